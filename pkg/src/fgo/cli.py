"""Command-line experiment harness.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime or numeric
failure.
"""
import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import svg
from .config import ConfigError, RunConfig, dump_config, load_config
from .datagen import TrajectoryDataset, environment, generate, make_context, rollout_many
from .denoiser import GaussianOracle, MlpDenoiser
from .metrics import aggregate, evaluate, frequency_evolution
from .sampler import SampleTrace, sample_fgo, sample_unguided
from .spectral import band_energy, low_pass
from .tensorio import ContainerError, load_tensors, save_tensors
from .training import TrainReport, train

log = logging.getLogger("fgo")

METHODS = ("unguided", "fgo", "lowpass", "ensemble")
ABLATION_AXES = ("omega_const", "p_base", "kfc", "schedules")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _need(path, what):
    path = Path(path)
    if not path.exists():
        raise UsageError(f"{what} not found: {path}")
    return path


# ---------------------------------------------------------------- policies

def oracle_mode_variances(cfg: RunConfig):
    mv = list(cfg.oracle_mode_var)
    if len(mv) > cfg.chunk_len:
        raise ConfigError(f"oracle_mode_var has {len(mv)} entries for chunk_len {cfg.chunk_len}")
    # shorter lists are extended with their last value
    return np.array(mv + [mv[-1]] * (cfg.chunk_len - len(mv)))


def _ramp_mean(cfg: RunConfig):
    """Context-conditional mean: straight line from start to goal, low-passed to ``f_clean``."""
    n, d = cfg.chunk_len, cfg.dims
    t = np.linspace(0.0, 1.0, n)[None, :, None]

    def mean(context):
        context = np.asarray(context, dtype=np.float64)
        start = context[:, None, :d]
        goal = context[:, None, d:2 * d] if context.shape[1] >= 2 * d else start
        return low_pass(start + t * (goal - start), cfg.f_clean)

    return mean


def build_oracle(cfg: RunConfig, conditional=False):
    sched = cfg.train_schedule()
    mean = _ramp_mean(cfg) if conditional else np.full((cfg.chunk_len, cfg.dims), cfg.oracle_mean)
    return GaussianOracle.from_mode_variances(sched, oracle_mode_variances(cfg), mean=mean,
                                              context_dim=cfg.context_dim, dims=cfg.dims)


def load_model(path):
    try:
        model = MlpDenoiser.load(_need(path, "checkpoint"))
        _, header = load_tensors(path)
    except ContainerError as exc:
        raise RuntimeError(f"cannot load checkpoint {path}: {exc}") from exc
    return model, header["meta"]


def resolve_policy(args, cfg: RunConfig, conditional=False):
    """``(model, clip)`` from ``--oracle`` or a checkpoint."""
    if args.oracle:
        return build_oracle(cfg, conditional), None
    model, meta = load_model(args.checkpoint or Path(args.out) / "model.fgt")
    if (model.chunk_len, model.dims, model.context_dim) != (cfg.chunk_len, cfg.dims, cfg.context_dim):
        raise ConfigError("checkpoint shape does not match the config")
    if cfg.clip == 0:
        clip = None
    elif cfg.clip > 0:
        clip = cfg.clip
    else:
        clip = meta.get("clip")
    return model, clip


def make_policy(method, model, cfg: RunConfig, rng, clip):
    sched = cfg.infer_schedule()
    fgo = cfg.fgo_config()
    if method == "fgo":
        return lambda ctx: sample_fgo(model, ctx, sched, fgo, rng, record=False,
                                      complete_band=cfg.complete_band, clip=clip)[0]
    if method in ("unguided", "lowpass", "ensemble"):
        return lambda ctx: sample_unguided(model, ctx, sched, rng, clip=clip)
    raise UsageError(f"unknown method {method!r}")


def smoother_for(method, cfg: RunConfig):
    if method == "lowpass":
        return ("lowpass", cfg.lowpass_f)
    if method == "ensemble":
        return ("ensemble", cfg.ensemble_decay)
    return "none"


def run_rollouts(model, cfg: RunConfig, methods, clip, seed):
    """Paired rollouts: every method replays the same environments and generator seed."""
    env_seeds = [seed * 100003 + i for i in range(cfg.episodes)]
    spec = cfg.demo_spec()
    out = {}
    for method in methods:
        rng = np.random.default_rng([seed, 1])
        policy = make_policy(method, model, cfg, rng, clip)
        traj, _ = rollout_many(policy, env_seeds, cfg.horizon, cfg.execute_m, spec, smoother_for(method, cfg))
        out[method] = traj
    return out


def episode_metrics(trajs, cfg: RunConfig):
    if trajs.shape[1] < 4:
        raise ValueError("trajectories need at least 4 steps for jerk")
    window = cfg.window
    if window > trajs.shape[1]:
        log.warning("window %d exceeds trajectory length %d; using the full trajectory", window, trajs.shape[1])
        window = trajs.shape[1]
    return [evaluate(t, window, cfg.dt) for t in trajs]


# ---------------------------------------------------------------- commands

def _tidy(value, scale):
    """Report rounding-level residue of a projector as an exact zero."""
    return 0.0 if abs(value) <= 1e-20 * max(abs(scale), 1.0) else value


def cmd_gen_data(args, cfg: RunConfig):
    ds = generate(cfg.demo_spec())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "dataset.fgt"
    ds.save(path)
    low, high = (float(e.mean()) for e in band_energy(ds.chunks, cfg.f_clean))
    clean_low, clean_high = (float(e.mean()) for e in band_energy(ds.clean_chunks, cfg.f_clean))
    high = _tidy(high, low)
    clean_high = _tidy(clean_high, clean_low)
    print(f"wrote {path}: {len(ds)} demos, N={cfg.chunk_len}, D={cfg.dims}")
    print(f"mean energy below f_clean={cfg.f_clean}: {low:.6g}, above: {high:.6g}")
    print(f"clean chunks above f_clean: {clean_high:.3g}")
    print(f"paused demos: {int(ds.paused.sum())}, jerk-impulse demos: {int(ds.jerked.sum())}")
    return 0


def train_model(ds: TrajectoryDataset, cfg: RunConfig, seed, standard=False, checkpoint_path=None):
    model = MlpDenoiser(cfg.chunk_len, cfg.dims, cfg.context_dim, hidden=cfg.hidden, depth=cfg.depth,
                        embed_dim=cfg.embed_dim, seed=seed)
    report = train(model, ds.contexts, ds.chunks, cfg.train_schedule(), cfg.fgo_config(),
                   cfg.train_config(seed), standard=standard, checkpoint_path=checkpoint_path)
    return model, report


def cmd_train(args, cfg: RunConfig):
    path = _need(args.data or Path(args.out) / "dataset.fgt", "dataset")
    ds = TrajectoryDataset.load(path)
    if (ds.spec.chunk_len, ds.spec.dims, ds.spec.context_dim) != (cfg.chunk_len, cfg.dims, cfg.context_dim):
        raise ConfigError("dataset shape does not match the config")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "model.fgt"
    model, report = train_model(ds, cfg, cfg.seed, standard=args.standard,
                                checkpoint_path=ckpt if cfg.checkpoint_every else None)
    clip = float(np.abs(ds.chunks).max())
    model.save(ckpt, meta={"clip": clip, "standard": bool(args.standard), "seed": cfg.seed})
    report.write_csv(out / "loss.csv")
    counts = report.cutoff_counts
    write_csv(out / "cutoffs.csv", ["f", "count"], [(f, int(c)) for f, c in enumerate(counts)])
    print(f"wrote {ckpt} and {out / 'loss.csv'}: {len(report.losses)} steps, "
          f"final epoch loss {report.final_loss:.6f}")
    return 0


def cmd_sample(args, cfg: RunConfig):
    count = cfg.count if args.count is None else args.count
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "samples.fgt"
    sched = cfg.infer_schedule()
    meta = {"kind": "samples", "count": count, "oracle": bool(args.oracle),
            "f_base": cfg.f_base, "n_steps": sched.n_steps}
    if count == 0:
        save_tensors(path, {}, meta=meta)
        print(f"wrote {path}: 0 samples")
        return 0
    model, clip = resolve_policy(args, cfg)
    starts, goals = zip(*[environment(cfg.seed * 100003 + i, cfg.demo_spec())[:2] for i in range(count)])
    context = make_context(np.array(starts), np.array(goals), cfg.context_dim)
    if args.oracle:
        context = np.zeros_like(context)
    x_fgo, tr_fgo = sample_fgo(model, context, sched, cfg.fgo_config(), np.random.default_rng(cfg.seed),
                               complete_band=cfg.complete_band, clip=clip)
    x_ung, tr_ung = sample_unguided(model, context, sched, np.random.default_rng(cfg.seed),
                                    return_trace=True, clip=clip)
    tensors = {"contexts": context, "fgo": x_fgo, "unguided": x_ung}
    for name, tr in (("fgo", tr_fgo), ("unguided", tr_ung)):
        tensors[f"{name}_states"] = tr.states
        tensors[f"{name}_ks"] = tr.ks.astype(np.float64)
        tensors[f"{name}_fks"] = tr.f_ks.astype(np.float64)
        tensors[f"{name}_omegas"] = tr.omegas
        for i in range(count):
            write_csv(out / "traces" / f"{name}_{i:04d}.csv", ["k", "f_k", "omega_k", "low_energy", "high_energy"],
                      tr.band_rows(i, cfg.f_base))
    save_tensors(path, tensors, meta=meta)
    print(f"wrote {path} and {2 * count} trace CSVs under {out / 'traces'}")
    return 0


def cmd_rollout(args, cfg: RunConfig):
    methods = args.methods.split(",") if args.methods else list(METHODS)
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    model, clip = resolve_policy(args, cfg, conditional=True)
    trajs = run_rollouts(model, cfg, methods, clip, cfg.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "rollouts.fgt"
    save_tensors(path, {f"traj_{m}": t for m, t in trajs.items()},
                 meta={"kind": "rollouts", "methods": methods, "oracle": bool(args.oracle)})
    print(f"wrote {path}: {cfg.episodes} episodes x {len(methods)} methods")
    return 0


def summarize(per_method):
    """Summary rows with the relative change against the unguided run when present."""
    rows = []
    ref = per_method.get("unguided")
    ref_j = aggregate([r.jerk_rms for r in ref])[0] if ref else None
    ref_a = aggregate([r.atv for r in ref])[0] if ref else None
    for method, reports in per_method.items():
        a_mean, a_std = aggregate([r.atv for r in reports])
        j_mean, j_std = aggregate([r.jerk_rms for r in reports])
        j_red = 1.0 - j_mean / ref_j if ref_j else float("nan")
        a_chg = a_mean / ref_a - 1.0 if ref_a else float("nan")
        rows.append((method, len(reports), a_mean, a_std, j_mean, j_std, j_red, a_chg))
    return rows


SUMMARY_HEADER = ["method", "episodes", "atv_mean", "atv_std", "jerk_rms_mean", "jerk_rms_std",
                  "jerk_reduction_vs_unguided", "atv_change_vs_unguided"]


def cmd_eval(args, cfg: RunConfig):
    path = _need(args.input or Path(args.out) / "rollouts.fgt", "rollouts or samples container")
    tensors, header = load_tensors(path)
    kind = header["meta"].get("kind")
    if kind == "rollouts":
        data = {m: tensors[f"traj_{m}"] for m in header["meta"]["methods"]}
    elif kind == "samples":
        data = {m: tensors[m] for m in ("unguided", "fgo") if m in tensors}
    else:
        raise UsageError(f"{path} holds neither rollouts nor samples")
    out = Path(args.out)
    per_method = {}
    band_rows = []
    for method, trajs in data.items():
        reports = episode_metrics(trajs, cfg)
        per_method[method] = reports
        write_csv(out / f"metrics_{method}.csv", ["episode", "atv", "jerk_rms"],
                  [(i, r.atv, r.jerk_rms) for i, r in enumerate(reports)])
        profile = np.mean([r.band_profile for r in reports], axis=0)
        band_rows += [(method, i, e) for i, e in enumerate(profile)]
    rows = summarize(per_method)
    write_csv(out / "summary.csv", SUMMARY_HEADER, rows)
    write_csv(out / "band_profile.csv", ["method", "mode", "energy"], band_rows)
    names = [r[0] for r in rows]
    (out / "metrics.svg").write_text(svg.bar_chart(
        names, [r[4] for r in rows], "JerkRMS over the approach window", "JerkRMS",
        errors=[r[5] for r in rows], stamp=args.stamp))
    for r in rows:
        print(f"{r[0]:>9}: ATV {r[2]:.4f} +/- {r[3]:.4f}  JerkRMS {r[4]:.4f} +/- {r[5]:.4f}  "
              f"jerk reduction {r[6]:+.1%}")
    return 0


def evolution_rows(states_by_method, ks_by_method):
    rows = []
    for method, states in states_by_method.items():
        trace = SampleTrace(ks=None, f_ks=None, omegas=None, states=states, eps_base=None,
                            eps_fine=None, eps_tilde=None, final=None)
        energies = frequency_evolution(trace)
        for i, (k, (lo, hi)) in enumerate(zip(ks_by_method[method], energies)):
            rows.append((method, i, int(k), lo, hi))
    return rows


def cmd_analyze_frequency(args, cfg: RunConfig):
    path = _need(args.input or Path(args.out) / "samples.fgt", "samples container")
    tensors, header = load_tensors(path)
    if header["meta"].get("kind") != "samples":
        raise UsageError(f"{path} does not hold samples")
    methods = [m for m in ("unguided", "fgo") if f"{m}_states" in tensors]
    if not methods:
        raise UsageError(f"{path} holds no per-step states")
    shapes = {tensors[f"{m}_states"].shape for m in methods}
    if len(shapes) != 1:
        raise ValueError(f"inconsistent trace shapes {sorted(shapes)}")
    rows = evolution_rows({m: tensors[f"{m}_states"] for m in methods},
                          {m: tensors[f"{m}_ks"] for m in methods})
    out = Path(args.out)
    write_csv(out / "evolution.csv", ["method", "index", "k", "low_energy", "high_energy"], rows)
    specs = []
    for component, col in (("low", 3), ("high", 4)):
        series = {}
        for m in methods:
            pts = [(r[2], r[col]) for r in rows if r[0] == m]
            series[m] = ([p[0] for p in pts], [p[1] for p in pts])
        specs.append((series, f"Haar {component}-frequency energy", "diffusion step k", "mean energy"))
    (out / "frequency.svg").write_text(svg.panels(specs, stamp=args.stamp))
    for m in methods:
        mine = [r for r in rows if r[0] == m]
        mid = mine[len(mine) // 4: 3 * len(mine) // 4]
        print(f"{m:>9}: final high energy {mine[-1][4]:.5g}, intermediate mean {np.mean([r[4] for r in mid]):.5g}")
    return 0


def ablation_cells(axis, cfg: RunConfig):
    """``(label, overrides)`` for every configuration on the axis."""
    if axis == "omega_const":
        return [(f"omega={w}", {"omega_schedule": "constant", "omega_const": float(w)}) for w in cfg.ablate_omegas]
    if axis == "p_base":
        return [(f"p_base={p}", {"p_base": p}) for p in (0.0, 0.2)]
    if axis == "kfc":
        return [(f"kfc={'on' if v else 'off'}", {"kfc": v}) for v in (True, False)]
    if axis == "schedules":
        return [(f"f={fk},omega={wk}", {"f_schedule": fk, "omega_schedule": wk})
                for fk in ("linear", "cosine") for wk in ("linear", "cosine")]
    raise UsageError(f"unknown ablation axis {axis!r}; choose from {', '.join(ABLATION_AXES)}")


def omega_regime(value):
    if 0.0 < value < 1.0:
        return "interpolation"
    if value > 1.0:
        return "extrapolation"
    return "boundary"


def cmd_ablate(args, cfg: RunConfig):
    cells = ablation_cells(args.axis, cfg)
    root = Path(args.out) / f"ablate_{args.axis}"
    ds_cache = {}
    models = {}
    baselines = {}
    results = []
    metric = cfg.ablate_metric
    for ci, (label, overrides) in enumerate(cells):
        cell_cfg = cfg.with_overrides(**overrides)
        values = []
        base_values = []
        rows = []
        for seed in cfg.ablate_seeds:
            key = (cell_cfg.training_key(), seed)
            if key not in models:
                data_key = cell_cfg.training_key()[:8]
                if data_key not in ds_cache:
                    ds_cache[data_key] = generate(cell_cfg.demo_spec())
                ds = ds_cache[data_key]
                model, _ = train_model(ds, cell_cfg, seed)
                models[key] = (model, float(np.abs(ds.chunks).max()))
                log.info("trained model for %s seed %d", label, seed)
            model, clip = models[key]
            clip = None if cfg.clip == 0 else (cfg.clip if cfg.clip > 0 else clip)
            trajs = run_rollouts(model, cell_cfg, ["fgo"], clip, seed)["fgo"]
            reports = episode_metrics(trajs, cell_cfg)
            value = aggregate([getattr(r, metric) for r in reports])[0]
            bkey = (cell_cfg.training_key(), seed, "unguided")
            if bkey not in baselines:
                btraj = run_rollouts(model, cell_cfg, ["unguided"], clip, seed)["unguided"]
                baselines[bkey] = aggregate([getattr(r, metric) for r in episode_metrics(btraj, cell_cfg)])[0]
            values.append(value)
            base_values.append(baselines[bkey])
            rows.append((seed, value, baselines[bkey]))
        cell_dir = root / f"cell_{ci:02d}"
        write_csv(cell_dir / "metrics.csv", ["seed", metric, f"unguided_{metric}"], rows)
        (cell_dir / "config.txt").write_text(dump_config(cell_cfg))
        mean, std = aggregate(values)
        base_mean, _ = aggregate(base_values)
        results.append((label, overrides, mean, std, base_mean))
    best = int(np.argmin([r[2] for r in results]))
    sweep = []
    for i, (label, overrides, mean, std, base_mean) in enumerate(results):
        value = overrides.get("omega_const", "")
        regime = omega_regime(value) if args.axis == "omega_const" else ""
        sweep.append((label, value, regime, len(cfg.ablate_seeds), mean, std, base_mean,
                      1.0 - mean / base_mean, int(i == best)))
    write_csv(root / "sweep.csv", ["cell", "omega", "regime", "seeds", f"{metric}_mean", f"{metric}_std",
                                   f"unguided_{metric}_mean", "reduction_vs_unguided", "winner"], sweep)
    (root / "sweep.svg").write_text(svg.bar_chart(
        [r[0] for r in results], [r[2] for r in results], f"{args.axis} ablation", metric,
        errors=[r[3] for r in results], highlight=best, stamp=args.stamp))
    print(f"sweep over {args.axis}: {len(cells)} configurations x {len(cfg.ablate_seeds)} seeds")
    for row in sweep:
        flag = "  <- best" if row[-1] else ""
        print(f"  {row[0]:>22}: {metric} {row[4]:.4f} +/- {row[5]:.4f}{flag}")
    if args.axis == "omega_const":
        regimes = {}
        for row in sweep:
            if row[2] != "boundary":
                regimes.setdefault(row[2], []).append(row[4])
        summary = [(name, min(v), float(np.mean(v))) for name, v in sorted(regimes.items())]
        winner = min(summary, key=lambda r: r[1])[0] if summary else ""
        write_csv(root / "regimes.csv", ["regime", f"best_{metric}", f"mean_{metric}", "winner"],
                  [(name, b, m, int(name == winner)) for name, b, m in summary])
        print(f"  winning regime: {winner}")
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "sample": cmd_sample,
    "rollout": cmd_rollout,
    "eval": cmd_eval,
    "analyze-frequency": cmd_analyze_frequency,
    "ablate": cmd_ablate,
}


def build_parser():
    parser = _Parser(prog="fgo", description="Frequency-guided diffusion policy experiments")
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--seed", type=int, help="global seed (overrides the config)")
    parser.add_argument("--out", default="runs", help="output directory")
    parser.add_argument("--stamp", action="store_true", help="embed a timestamp in SVG outputs")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("gen-data", help="generate the contaminated demonstration dataset")
    p = sub.add_parser("train", help="train the MLP denoiser")
    p.add_argument("--data", help="dataset container (default OUT/dataset.fgt)")
    p.add_argument("--standard", action="store_true", help="plain full-band diffusion training")
    for name in ("sample", "rollout"):
        p = sub.add_parser(name, help=f"{name} with a checkpoint or the Gaussian oracle")
        p.add_argument("--checkpoint", help="model container (default OUT/model.fgt)")
        p.add_argument("--oracle", action="store_true", help="use the Gaussian oracle from the config")
        if name == "sample":
            p.add_argument("--count", type=int)
        else:
            p.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
    p = sub.add_parser("eval", help="smoothness metrics for rollouts or samples")
    p.add_argument("--input", help="rollouts or samples container")
    p = sub.add_parser("analyze-frequency", help="Haar energy evolution across reverse steps")
    p.add_argument("--input", help="samples container (default OUT/samples.fgt)")
    p = sub.add_parser("ablate", help="sweep one design axis over several seeds")
    p.add_argument("--axis", required=True, choices=ABLATION_AXES)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_overrides(seed=args.seed)
        if getattr(args, "count", None) is not None and args.count < 0:
            raise UsageError("--count must be non-negative")
        return COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ContainerError, FloatingPointError, RuntimeError, ValueError, OSError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
