"""Simulated ground-truth execution: nominal propagation plus bounded noise."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kinoaura.core import StateSpace


class NoiseModel:
    def sample(self, rng: np.random.Generator, space: StateSpace) -> np.ndarray:
        raise NotImplementedError

    def spec(self) -> dict:
        return {"kind": "none"}


@dataclass(frozen=True)
class ZeroNoise(NoiseModel):
    def sample(self, rng, space):
        return np.zeros(space.dims)


@dataclass(frozen=True)
class GaussianNoise(NoiseModel):
    """Per-dimension Gaussian ``w``; draws with weighted norm above ``delta`` are redrawn."""

    sigma: tuple
    delta: float
    max_draws: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, "sigma", tuple(float(s) for s in self.sigma))
        if any(s < 0.0 for s in self.sigma):
            raise ValueError("noise scales must be non-negative")
        if not self.delta > 0.0:
            raise ValueError("noise bound delta must be positive")

    def sample(self, rng, space):
        sigma = np.asarray(self.sigma)
        if sigma.size != space.dims:
            raise ValueError(f"noise has {sigma.size} scales for a {space.dims}-D state")
        for _ in range(self.max_draws):
            w = rng.normal(0.0, 1.0, space.dims) * sigma
            if space.norm(w) <= self.delta:
                return w
        raise RuntimeError("noise rejection sampler did not find a draw within delta")

    def spec(self):
        return {"kind": "gaussian", "sigma": list(self.sigma), "delta": self.delta}


@dataclass(frozen=True)
class ConstantBias(NoiseModel):
    """Deterministic offset added after every step."""

    offset: tuple

    def __post_init__(self):
        object.__setattr__(self, "offset", tuple(float(v) for v in self.offset))

    def sample(self, rng, space):
        w = np.asarray(self.offset)
        if w.size != space.dims:
            raise ValueError(f"bias has {w.size} entries for a {space.dims}-D state")
        return w.copy()

    def spec(self):
        return {"kind": "bias", "offset": list(self.offset)}


class GroundTruthExecutor:
    """Owns the true-state transition ``x_gt' = Gamma(x_gt, u) + w``.

    The noise stream comes from a generator seeded at construction, so two
    executors built with the same seed feed identical disturbances to the
    methods being compared. Results are clamped to the state bounds.
    """

    def __init__(self, model, noise: NoiseModel | None = None, seed: int = 0):
        self.model = model
        self.noise = noise if noise is not None else ZeroNoise()
        self.seed = int(seed)
        self.rng = np.random.default_rng([self.seed, 0x6e6f697365])
        self.steps = 0

    def fork(self) -> "GroundTruthExecutor":
        """Fresh executor with the same model, noise and seed."""
        return GroundTruthExecutor(self.model, self.noise, self.seed)

    def step(self, x, u, dt: float) -> np.ndarray:
        space = self.model.state_space
        nominal = self.model.propagate(x, u, dt)
        w = self.noise.sample(self.rng, space)
        self.steps += 1
        if not np.any(w):
            return nominal
        return space.clamp(nominal + w)
