"""Hot numeric kernels.

Each kernel exists twice: a loop version compiled by numba and a vectorized
numpy version.  The exported names point at one of them according to
:data:`crm._accel.USE_NUMBA`; both modules stay importable for benchmarks and
cross-checks.
"""
from .._accel import USE_NUMBA, backend
from . import _numpy

if USE_NUMBA:
    from . import _numba as _impl
else:
    _impl = _numpy

bottleneck = _impl.bottleneck
class_window_distance = _impl.class_window_distance
class_window_to_anchors = _impl.class_window_to_anchors
aligned_to_anchors = _impl.aligned_to_anchors
markov_labels = _impl.markov_labels
greedy_net = _impl.greedy_net
first_triangle_violation = _impl.first_triangle_violation

__all__ = [
    "backend",
    "bottleneck",
    "class_window_distance",
    "class_window_to_anchors",
    "aligned_to_anchors",
    "markov_labels",
    "greedy_net",
    "first_triangle_violation",
]
