"""Nominal transition functions and their control Jacobians."""
from __future__ import annotations

import math

import numpy as np

from kinoaura import kernels
from kinoaura.core import ControlSpace, StateSpace, Topology

FD_STEP = 1e-6


def _check(x, u, dt, nx, nu):
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (nx,) or u.shape != (nu,):
        raise ValueError(f"expected state ({nx},) and control ({nu},), got {x.shape} and {u.shape}")
    if not (dt > 0.0 and math.isfinite(dt)):
        raise ValueError(f"duration must be positive and finite, got {dt}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
        raise ValueError("NaN or infinite input to propagation")
    return x, u


class DynamicsModel:
    """Deterministic discrete-time transition ``x' = Gamma(x, u)`` over ``dt``.

    Subclasses implement ``_propagate`` and ``_rollout``. Controls are clamped
    to the control space before use; ``jacobian_u`` falls back to central
    finite differences when no analytic sensitivity is provided.
    """

    name = "model"
    state_space: StateSpace
    control_space: ControlSpace

    def params(self) -> dict:
        return {}

    # -- scalar ------------------------------------------------------------
    def propagate(self, x, u, dt: float) -> np.ndarray:
        x, u = _check(x, u, dt, self.state_space.dims, self.control_space.dims)
        return self._propagate(x, self.control_space.clamp(u), float(dt))

    def rollout(self, x, u, dt: float) -> np.ndarray:
        """Intermediate states at integration substeps; the last row equals ``propagate``."""
        x, u = _check(x, u, dt, self.state_space.dims, self.control_space.dims)
        return self._rollout(x, self.control_space.clamp(u), float(dt))

    def jacobian_u(self, x, u, dt: float) -> np.ndarray:
        x, u = _check(x, u, dt, self.state_space.dims, self.control_space.dims)
        u = self.control_space.clamp(u)
        return self._jacobian_batch(x[None], u[None], float(dt))[1][0]

    # -- batched -----------------------------------------------------------
    def propagate_batch(self, X, U, dt: float) -> np.ndarray:
        X, U = self._check_batch(X, U, dt)
        if X.shape[0] == 0:
            return np.empty((0, self.state_space.dims))
        return self._propagate_batch(X, self.control_space.clamp(U), float(dt))

    def jacobian_u_batch(self, X, U, dt: float) -> tuple[np.ndarray, np.ndarray]:
        """Next states (n, nx) and Jacobians (n, nx, nu) for each row."""
        X, U = self._check_batch(X, U, dt)
        if X.shape[0] == 0:
            return np.empty((0, self.state_space.dims)), np.empty((0, self.state_space.dims, self.control_space.dims))
        return self._jacobian_batch(X, self.control_space.clamp(U), float(dt))

    def _check_batch(self, X, U, dt):
        nx, nu = self.state_space.dims, self.control_space.dims
        X = np.asarray(X, dtype=float).reshape(-1, nx)
        U = np.asarray(U, dtype=float).reshape(-1, nu)
        if X.shape[0] != U.shape[0]:
            raise ValueError(f"batch length mismatch: {X.shape[0]} states vs {U.shape[0]} controls")
        if not (dt > 0.0 and math.isfinite(dt)):
            raise ValueError(f"duration must be positive and finite, got {dt}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(U))):
            raise ValueError("NaN or infinite input to propagation")
        return X, U

    # -- defaults ----------------------------------------------------------
    def _propagate(self, x, u, dt):
        raise NotImplementedError

    def _rollout(self, x, u, dt):
        return np.stack([self.state_space.normalize(x), self._propagate(x, u, dt)])

    def _propagate_batch(self, X, U, dt):
        return np.stack([self._propagate(x, u, dt) for x, u in zip(X, U)])

    def _jacobian_batch(self, X, U, dt):
        return self._propagate_batch(X, U, dt), finite_difference_jacobian(self, X, U, dt)


def finite_difference_jacobian(model: DynamicsModel, X, U, dt: float) -> np.ndarray:
    """Central differences with step ``1e-6 * (1 + |u_j|)``, bounds not enforced."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    n, nu = U.shape
    space = model.state_space
    jac = np.empty((n, space.dims, nu))
    for j in range(nu):
        h = FD_STEP * (1.0 + np.abs(U[:, j]))
        up = U.copy()
        dn = U.copy()
        up[:, j] += h
        dn[:, j] -= h
        fp = np.stack([model._propagate(x, u, dt) for x, u in zip(X, up)])
        fm = np.stack([model._propagate(x, u, dt) for x, u in zip(X, dn)])
        jac[:, :, j] = space.difference(fp, fm) / (2.0 * h[:, None])
    return jac


class DoubleIntegrator6D(DynamicsModel):
    """Point mass in 3-D with acceleration control; propagation is closed form.

    State ``[px, py, pz, vx, vy, vz]``, control ``[ax, ay, az]``.
    """

    name = "double_integrator_6d"

    def __init__(self, position_lower=(-10.0, -10.0, -10.0), position_upper=(10.0, 10.0, 10.0),
                 max_velocity: float = 1.0, max_acceleration: float = 2.0, weights=None):
        if max_velocity <= 0.0 or max_acceleration <= 0.0:
            raise ValueError("velocity and acceleration bounds must be positive")
        lo = np.asarray(position_lower, dtype=float)
        hi = np.asarray(position_upper, dtype=float)
        self.max_velocity = float(max_velocity)
        self.max_acceleration = float(max_acceleration)
        self.state_space = StateSpace(
            np.concatenate([lo, -np.full(3, max_velocity)]),
            np.concatenate([hi, np.full(3, max_velocity)]),
            (Topology.REAL,) * 6,
            weights,
        )
        self.control_space = ControlSpace(-np.full(3, max_acceleration), np.full(3, max_acceleration))

    def params(self):
        return {"max_velocity": self.max_velocity, "max_acceleration": self.max_acceleration}

    def _propagate(self, x, u, dt):
        out = np.empty(6)
        out[:3] = x[:3] + x[3:] * dt + 0.5 * u * dt * dt
        out[3:] = x[3:] + u * dt
        return out

    def _rollout(self, x, u, dt):
        m = kernels.substep_count(dt)
        t = (np.arange(m + 1, dtype=float) * (dt / m))[:, None]
        rows = np.empty((m + 1, 6))
        rows[:, :3] = x[:3] + x[3:] * t + 0.5 * u * t * t
        rows[:, 3:] = x[3:] + u * t
        rows[-1] = self._propagate(x, u, dt)
        return rows

    def _propagate_batch(self, X, U, dt):
        out = np.empty_like(X)
        out[:, :3] = X[:, :3] + X[:, 3:] * dt + 0.5 * U * dt * dt
        out[:, 3:] = X[:, 3:] + U * dt
        return out

    def _jacobian_batch(self, X, U, dt):
        jac = np.zeros((X.shape[0], 6, 3))
        eye = np.eye(3)
        jac[:, :3, :] = 0.5 * dt * dt * eye
        jac[:, 3:, :] = dt * eye
        return self._propagate_batch(X, U, dt), jac


class KinematicCar(DynamicsModel):
    """Bicycle-model car on SE(2), integrated with fixed-step RK4.

    State ``[px, py, theta]``, control ``[v, phi]`` (speed, steering angle).
    """

    name = "kinematic_car"

    def __init__(self, wheelbase: float = 0.3, position_lower=(-10.0, -10.0), position_upper=(10.0, 10.0),
                 max_speed: float = 1.0, max_steer: float = 1.0, heading_weight: float = 0.5):
        if wheelbase <= 0.0:
            raise ValueError("wheelbase must be positive")
        if not 0.0 < max_steer < math.pi / 2:
            raise ValueError("steering bound must lie in (0, pi/2)")
        if max_speed <= 0.0:
            raise ValueError("speed bound must be positive")
        self.wheelbase = float(wheelbase)
        self.max_speed = float(max_speed)
        self.max_steer = float(max_steer)
        self.heading_weight = float(heading_weight)
        lo = np.asarray(position_lower, dtype=float)
        hi = np.asarray(position_upper, dtype=float)
        self.state_space = StateSpace(
            np.concatenate([lo, [-math.pi]]),
            np.concatenate([hi, [math.pi]]),
            (Topology.REAL, Topology.REAL, Topology.ANGULAR),
            (1.0, 1.0, heading_weight),
        )
        self.control_space = ControlSpace((-max_speed, -max_steer), (max_speed, max_steer))

    def params(self):
        return {
            "wheelbase": self.wheelbase,
            "max_speed": self.max_speed,
            "max_steer": self.max_steer,
            "heading_weight": self.heading_weight,
        }

    def _propagate(self, x, u, dt):
        return np.asarray(kernels.car_propagate(x, u, dt, self.wheelbase))

    def _rollout(self, x, u, dt):
        return kernels.car_rollout(x, u, dt, self.wheelbase)

    def _propagate_batch(self, X, U, dt):
        return kernels.car_propagate_batch(X, U, dt, self.wheelbase)

    def _jacobian_batch(self, X, U, dt):
        return kernels.car_jacobian_batch(X, U, dt, self.wheelbase)


MODELS = {DoubleIntegrator6D.name: DoubleIntegrator6D, KinematicCar.name: KinematicCar}
