"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
twin is used. Set ``KINOAURA_PURE_PYTHON=1`` to force the fallback.
"""
import os

if os.environ.get("KINOAURA_PURE_PYTHON", "") not in ("", "0"):
    from kinoaura import _pykernels as _impl
else:
    try:
        from kinoaura import _ckernels as _impl
    except ImportError:  # extension not built
        from kinoaura import _pykernels as _impl

BACKEND = _impl.BACKEND

wrap_angle = _impl.wrap_angle
wrap_angles = _impl.wrap_angles
substep_count = _impl.substep_count
car_rollout = _impl.car_rollout
car_propagate = _impl.car_propagate
car_propagate_batch = _impl.car_propagate_batch
car_jacobian_batch = _impl.car_jacobian_batch
distances = _impl.distances
nearest = _impl.nearest
within = _impl.within
best_near = _impl.best_near
points_free = _impl.points_free
segment_free = _impl.segment_free
