"""Hot numeric kernels with interchangeable backends.

``jit`` holds the numba-compiled loop versions and ``reference`` the
vectorised numpy versions. The module-level names resolve to ``jit`` unless
``FGO_DISABLE_JIT=1`` is set (see :mod:`fgo._jit`).
"""
from types import SimpleNamespace

from .._jit import USE_JIT
from . import _loops, _numpy
from ._tables import cos_table, orthonormal_scale, projector_stack, synthesis_table

_NAMES = (
    "dct_forward",
    "dct_inverse",
    "lowpass_varying",
    "haar_forward",
    "haar_inverse",
    "third_difference",
    "total_variation",
    "gelu",
    "gelu_grad",
)

jit = SimpleNamespace(**{name: getattr(_loops, name) for name in _NAMES})
reference = SimpleNamespace(**{name: getattr(_numpy, name) for name in _NAMES})
active = jit if USE_JIT else reference
BACKEND = "numba" if USE_JIT else "numpy"

dct_forward = active.dct_forward
dct_inverse = active.dct_inverse
lowpass_varying = active.lowpass_varying
haar_forward = active.haar_forward
haar_inverse = active.haar_inverse
third_difference = active.third_difference
total_variation = active.total_variation
gelu = active.gelu
gelu_grad = active.gelu_grad

__all__ = [
    *_NAMES,
    "BACKEND",
    "active",
    "cos_table",
    "jit",
    "orthonormal_scale",
    "projector_stack",
    "reference",
    "synthesis_table",
]
