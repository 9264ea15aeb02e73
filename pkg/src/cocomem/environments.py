"""Oblivious adversary instances and gradient predictors.

Two instance families:

* `AppendixAInstance` - averaged quadratic tracking losses with an affine
  budget constraint, the 1-D benchmark environment (closed-form gradients,
  closed-form best-in-hindsight).
* `SeparableLinearInstance` - per-round linear loss/constraint slices,
  one slice per delay, for the optimistic delayed-FTRL learner.

Instances draw every coefficient from a seeded PCG64 stream before round
one, so the sequence never depends on the learner's play and replays are
bit-identical.  Predictors supply coefficient and activity forecasts for
not-yet-revealed slices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import Ball, Box, FeasibleSet, MemoryFunctionOracle, MemoryWindow, as_decision

RNG_NAME = "pcg64"


def _instance_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0])))


@dataclass(frozen=True)
class InstanceConstants:
    """Closed-form problem constants fed to the bound calculators."""

    diameter: float
    l_f: float
    l_g: float
    f_bound: float
    g_bound: float


@dataclass(frozen=True)
class LinearSlice:
    """One affine component <coeff, x_{t-i}> + offset of a separable
    memory function; `delay` marks which past decision it touches."""

    coeff: np.ndarray
    offset: float
    round: int
    delay: int

    def value(self, x: np.ndarray) -> float:
        return float(self.coeff @ x) + self.offset


# ---------------------------------------------------------------------------
# Appendix-style quadratic/affine environment


class _QuadraticTrackingLoss(MemoryFunctionOracle):
    """f(x_{t-m},...,x_t) = (1/(m+1)) sum_i 0.5 ||x_{t-i} - c||^2."""

    def __init__(self, c: np.ndarray, m: int, radius: float):
        self.c = c
        self.dim = c.size
        self.memory = m
        reach = radius + float(np.linalg.norm(c))
        self.lipschitz = reach
        self.bound = 0.5 * reach * reach

    def value(self, window: MemoryWindow) -> float:
        diff = window.entries - self.c
        return 0.5 * float(np.sum(diff * diff)) / (self.memory + 1)

    def grad_wrt_last(self, window: MemoryWindow) -> np.ndarray:
        return (window.newest - self.c) / (self.memory + 1)

    def value_splat(self, x) -> float:
        diff = np.asarray(x, dtype=float) - self.c
        return 0.5 * float(diff @ diff)

    def grad_splat(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) - self.c


class _AffineBudgetConstraint(MemoryFunctionOracle):
    """g(x_{t-m},...,x_t) = (1/(m+1)) sum_i <d, x_{t-i}> - delta."""

    def __init__(self, d_coef: np.ndarray, delta: float, m: int, radius: float):
        self.d_coef = d_coef
        self.delta = delta
        self.dim = d_coef.size
        self.memory = m
        self.lipschitz = float(np.linalg.norm(d_coef))
        self.bound = self.lipschitz * radius + delta

    def value(self, window: MemoryWindow) -> float:
        return float(np.mean(window.entries @ self.d_coef)) - self.delta

    def grad_wrt_last(self, window: MemoryWindow) -> np.ndarray:
        return self.d_coef / (self.memory + 1)

    def value_splat(self, x) -> float:
        return float(self.d_coef @ np.asarray(x, dtype=float)) - self.delta

    def grad_splat(self, x) -> np.ndarray:
        return self.d_coef.copy()


class AppendixAInstance:
    """Quadratic tracking losses with an affine budget constraint.

    Coefficients c_t, d_t live in [-B, B]^d with B = gamma * sigma.  The
    stochastic mode draws them i.i.d. uniform on [-sigma, sigma]; the
    adversarial mode mixes uniform draws (probability 0.4) with centered
    Gaussians of std sigma (probability 0.6), re-drawing any Gaussian
    sample whose magnitude exceeds B so the stated coefficient range
    still holds.
    """

    kind = "appendix_a"

    def __init__(
        self,
        m: int = 3,
        horizon: int = 4000,
        radius: float = 15.0,
        sigma: float = 10.0,
        delta: float = 1.0,
        gamma: float = 3.0,
        mode: str = "stochastic",
        seed: int = 0,
        dim: int = 1,
        _coeffs: tuple[np.ndarray, np.ndarray] | None = None,
    ):
        if not (horizon >= m >= 0):
            raise ValueError("need horizon >= memory >= 0")
        if min(radius, sigma, delta) <= 0 or gamma <= 0:
            raise ValueError("radius, sigma, delta, gamma must be positive")
        if mode not in ("stochastic", "adversarial"):
            raise ValueError(f"unknown mode {mode!r}")
        self.m = m
        self.horizon = horizon
        self.radius = float(radius)
        self.sigma = float(sigma)
        self.delta = float(delta)
        self.gamma = float(gamma)
        self.coef_bound = gamma * sigma
        self.mode = mode
        self.seed = int(seed)
        self.dim = dim
        self.fset: FeasibleSet = (
            Box([-radius] * dim, [radius] * dim) if dim == 1 else Ball([0.0] * dim, radius)
        )
        if _coeffs is None:
            self.c, self.d_coef = self._generate()
        else:
            self.c, self.d_coef = _coeffs

    def _generate(self):
        rng = _instance_rng(self.seed)
        shape = (self.horizon + 1, self.dim)
        if self.mode == "stochastic":
            c = rng.uniform(-self.sigma, self.sigma, size=shape)
            d = rng.uniform(-self.sigma, self.sigma, size=shape)
            return c, d

        def mixture():
            pick_unif = rng.uniform(size=shape) < 0.4
            unif = rng.uniform(-self.sigma, self.sigma, size=shape)
            gaus = rng.normal(0.0, self.sigma, size=shape)
            bad = ~pick_unif & (np.abs(gaus) > self.coef_bound)
            while np.any(bad):
                gaus[bad] = rng.normal(0.0, self.sigma, size=int(bad.sum()))
                bad = ~pick_unif & (np.abs(gaus) > self.coef_bound)
            return np.where(pick_unif, unif, gaus)

        return mixture(), mixture()

    @property
    def rounds(self) -> range:
        return range(self.m, self.horizon + 1)

    @property
    def first_round(self) -> int:
        return self.m

    def loss(self, t: int) -> MemoryFunctionOracle:
        return _QuadraticTrackingLoss(self.c[t], self.m, self.radius)

    def constraint(self, t: int) -> MemoryFunctionOracle:
        return _AffineBudgetConstraint(self.d_coef[t], self.delta, self.m, self.radius)

    def constants(self) -> InstanceConstants:
        root_d = math.sqrt(self.dim)
        l_f = self.radius + self.coef_bound * root_d
        l_g = self.coef_bound * root_d
        return InstanceConstants(
            diameter=self.fset.diameter,
            l_f=l_f,
            l_g=l_g,
            f_bound=0.5 * l_f * l_f,
            g_bound=l_g * self.radius + self.delta,
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "rng": RNG_NAME,
                "seed": self.seed,
                "m": self.m,
                "horizon": self.horizon,
                "radius": self.radius,
                "sigma": self.sigma,
                "delta": self.delta,
                "gamma": self.gamma,
                "mode": self.mode,
                "dim": self.dim,
                "c": self.c.tolist(),
                "d_coef": self.d_coef.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "AppendixAInstance":
        obj = json.loads(text)
        if obj["kind"] != cls.kind:
            raise ValueError(f"not an {cls.kind} document")
        coeffs = (np.asarray(obj["c"], dtype=float), np.asarray(obj["d_coef"], dtype=float))
        return cls(
            m=obj["m"],
            horizon=obj["horizon"],
            radius=obj["radius"],
            sigma=obj["sigma"],
            delta=obj["delta"],
            gamma=obj["gamma"],
            mode=obj["mode"],
            seed=obj["seed"],
            dim=obj["dim"],
            _coeffs=coeffs,
        )


# ---------------------------------------------------------------------------
# Separable linear environment


class _SeparableMemoryFunction(MemoryFunctionOracle):
    """sum_i <coeff_i, x_{t-i}> + offset_i over the window slots."""

    def __init__(self, coeffs: np.ndarray, offsets: np.ndarray, radius_sup: float):
        # coeffs[i] multiplies x_{t-i} (delay order), shape (m+1, d)
        self.coeffs = coeffs
        self.offsets = offsets
        self.memory = coeffs.shape[0] - 1
        self.dim = coeffs.shape[1]
        joint = math.sqrt(float(np.sum(coeffs * coeffs)))
        lift = float(np.linalg.norm(coeffs.sum(axis=0)))
        self.lipschitz = max(joint, lift)
        self.bound = float(
            np.sum(np.linalg.norm(coeffs, axis=1)) * radius_sup + np.sum(np.abs(offsets))
        )

    def value(self, window: MemoryWindow) -> float:
        # window rows are oldest->newest; delay i touches row m-i
        rows = window.entries[::-1]
        return float(np.sum(rows * self.coeffs)) + float(np.sum(self.offsets))

    def grad_wrt_last(self, window: MemoryWindow) -> np.ndarray:
        return self.coeffs[0].copy()

    def value_splat(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(self.coeffs.sum(axis=0) @ x) + float(np.sum(self.offsets))

    def grad_splat(self, x) -> np.ndarray:
        return self.coeffs.sum(axis=0)


class SeparableLinearInstance:
    """Per-(round, delay) linear loss and constraint slices.

    Loss slices follow a sign-alternating drift (fixed-length blocks) plus
    uniform noise, so the leader moves and look-ahead pays off.  At most
    one constraint slice is emitted per round (at a random delay when
    `constraint_memory` is set, else always at delay 0); its offset puts
    the activation boundary strictly inside the set for a configurable
    fraction of slices and keeps the set center feasible for all of them,
    so the slice-wise benchmark set is nonempty by construction.
    Slices vanish outside rounds (m, horizon].
    """

    kind = "separable_linear"

    def __init__(
        self,
        m: int = 2,
        horizon: int = 2000,
        radius: float = 2.0,
        dim: int = 1,
        seed: int = 0,
        constraint_memory: bool = True,
        drift: float = 0.5,
        noise: float = 0.5,
        blocks: int = 8,
        g_round_density: float = 0.15,
        g_mag: tuple[float, float] = (0.01, 0.03),
        g_root: tuple[float, float] = (0.4, 0.9),
        g_active_fraction: float = 1.0,
    ):
        if not (horizon >= m >= 0):
            raise ValueError("need horizon >= memory >= 0")
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.m = m
        self.horizon = horizon
        self.radius = float(radius)
        self.dim = dim
        self.seed = int(seed)
        self.constraint_memory = constraint_memory
        self.drift = drift
        self.noise = noise
        self.blocks = blocks
        self.g_round_density = g_round_density
        self.g_mag = g_mag
        self.g_root = g_root
        self.g_active_fraction = g_active_fraction
        self.fset: FeasibleSet = (
            Box([-radius] * dim, [radius] * dim) if dim == 1 else Ball([0.0] * dim, radius)
        )
        self._generate()

    def _generate(self):
        rng = _instance_rng(self.seed)
        T, m, d = self.horizon, self.m, self.dim
        self.f_coef = np.zeros((T + 1, m + 1, d))
        self.g_coef = np.zeros((T + 1, m + 1, d))
        self.g_off = np.zeros((T + 1, m + 1))
        self.g_present = np.zeros((T + 1, m + 1), dtype=bool)

        w = rng.normal(size=d)
        w /= np.linalg.norm(w)
        base_sign = 1.0 if rng.uniform() < 0.5 else -1.0
        n_active = T - m
        block_len = max(1, math.ceil(n_active / max(1, self.blocks)))

        for t in range(m + 1, T + 1):
            block = (t - m - 1) // block_len
            sign = base_sign * (1.0 if block % 2 == 0 else -1.0)
            for i in range(m + 1):
                self.f_coef[t, i] = (
                    self.drift * sign * w + self.noise * rng.uniform(-1.0, 1.0, size=d)
                ) / (m + 1)
            if rng.uniform() < self.g_round_density:
                i = int(rng.integers(0, m + 1)) if self.constraint_memory else 0
                direction = rng.normal(size=d)
                direction /= np.linalg.norm(direction)
                mag = rng.uniform(*self.g_mag)
                coeff = mag * direction
                sup = self.fset.support(coeff) - float(coeff @ self.fset.center)
                if rng.uniform() < self.g_active_fraction:
                    root = rng.uniform(*self.g_root)
                else:
                    root = rng.uniform(1.05, 1.5)
                self.g_coef[t, i] = coeff
                self.g_off[t, i] = -root * sup
                self.g_present[t, i] = True

    @property
    def rounds(self) -> range:
        return range(self.m + 1, self.horizon + 1)

    @property
    def first_round(self) -> int:
        return self.m + 1

    def f_slice(self, r: int, i: int) -> LinearSlice | None:
        if not (0 < r <= self.horizon) or not (0 <= i <= self.m):
            return None
        if r <= self.m:
            return None
        return LinearSlice(self.f_coef[r, i], 0.0, r, i)

    def g_slice(self, r: int, i: int) -> LinearSlice | None:
        if not (0 < r <= self.horizon) or not (0 <= i <= self.m):
            return None
        if r <= self.m or not self.g_present[r, i]:
            return None
        return LinearSlice(self.g_coef[r, i], float(self.g_off[r, i]), r, i)

    def loss(self, t: int) -> MemoryFunctionOracle:
        coeffs = self.f_coef[t] if 0 < t <= self.horizon else np.zeros_like(self.f_coef[0])
        return _SeparableMemoryFunction(coeffs, np.zeros(self.m + 1), self._radius_sup())

    def constraint(self, t: int) -> MemoryFunctionOracle:
        in_range = 0 < t <= self.horizon
        coeffs = self.g_coef[t] if in_range else np.zeros_like(self.g_coef[0])
        offs = self.g_off[t] if in_range else np.zeros(self.m + 1)
        return _SeparableMemoryFunction(coeffs, offs, self._radius_sup())

    def _radius_sup(self) -> float:
        return self.fset.diameter / 2.0

    def constants(self) -> InstanceConstants:
        joint_f = np.sqrt(np.sum(self.f_coef**2, axis=(1, 2)))
        lift_f = np.linalg.norm(self.f_coef.sum(axis=1), axis=-1)
        joint_g = np.sqrt(np.sum(self.g_coef**2, axis=(1, 2)))
        lift_g = np.linalg.norm(self.g_coef.sum(axis=1), axis=-1)
        sup = self._radius_sup()
        f_norms = np.linalg.norm(self.f_coef, axis=2)
        g_norms = np.linalg.norm(self.g_coef, axis=2)
        f_bound = float(np.max(np.sum(f_norms * sup, axis=1)))
        g_bound = float(np.max(np.sum(g_norms * sup + np.abs(self.g_off), axis=1)))
        return InstanceConstants(
            diameter=self.fset.diameter,
            l_f=float(max(joint_f.max(), lift_f.max())),
            l_g=float(max(joint_g.max(), lift_g.max(), 1e-12)),
            f_bound=f_bound,
            g_bound=max(g_bound, 1e-12),
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "rng": RNG_NAME,
                "seed": self.seed,
                "m": self.m,
                "horizon": self.horizon,
                "radius": self.radius,
                "dim": self.dim,
                "constraint_memory": self.constraint_memory,
                "params": {
                    "drift": self.drift,
                    "noise": self.noise,
                    "blocks": self.blocks,
                    "g_round_density": self.g_round_density,
                    "g_mag": list(self.g_mag),
                    "g_root": list(self.g_root),
                    "g_active_fraction": self.g_active_fraction,
                },
                "f_coef": self.f_coef.tolist(),
                "g_coef": self.g_coef.tolist(),
                "g_off": self.g_off.tolist(),
                "g_present": self.g_present.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SeparableLinearInstance":
        obj = json.loads(text)
        if obj["kind"] != cls.kind:
            raise ValueError(f"not a {cls.kind} document")
        p = obj["params"]
        inst = cls(
            m=obj["m"],
            horizon=obj["horizon"],
            radius=obj["radius"],
            dim=obj["dim"],
            seed=obj["seed"],
            constraint_memory=obj["constraint_memory"],
            drift=p["drift"],
            noise=p["noise"],
            blocks=p["blocks"],
            g_round_density=p["g_round_density"],
            g_mag=tuple(p["g_mag"]),
            g_root=tuple(p["g_root"]),
            g_active_fraction=p["g_active_fraction"],
        )
        inst.f_coef = np.asarray(obj["f_coef"], dtype=float)
        inst.g_coef = np.asarray(obj["g_coef"], dtype=float)
        inst.g_off = np.asarray(obj["g_off"], dtype=float)
        inst.g_present = np.asarray(obj["g_present"], dtype=bool)
        return inst


# ---------------------------------------------------------------------------
# Predictors


class Predictor:
    """Forecast source for not-yet-revealed slice gradients.

    `predict_g` returns the coefficient vector and an activity flag for
    the hinge; the slice's predicted gradient is the coefficient when the
    flag is set and zero otherwise.  `x_ref` is the decision the activity
    is judged at: the committed decision for already-played rounds, or
    the candidate decision while the hint's self-consistency loop runs.
    """

    kind = "base"

    def bind(self, instance) -> None:
        self._instance = instance
        self._dim = instance.dim

    def begin_round(self, t: int) -> None:
        pass

    def predict_f(self, r: int, i: int) -> np.ndarray:
        raise NotImplementedError

    def predict_g(self, r: int, i: int, x_ref: np.ndarray):
        raise NotImplementedError


class PerfectPredictor(Predictor):
    """Returns true coefficients and the true activity at the reference
    decision."""

    kind = "perfect"

    def predict_f(self, r, i):
        s = self._instance.f_slice(r, i)
        return np.zeros(self._dim) if s is None else s.coeff.copy()

    def predict_g(self, r, i, x_ref):
        s = self._instance.g_slice(r, i)
        if s is None:
            return np.zeros(self._dim), False
        return s.coeff.copy(), s.value(x_ref) > 0.0


class ZeroPredictor(Predictor):
    """No information: zero coefficients, inactive hinges."""

    kind = "zero"

    def predict_f(self, r, i):
        return np.zeros(self._dim)

    def predict_g(self, r, i, x_ref):
        return np.zeros(self._dim), False


class NoisyPredictor(Predictor):
    """True slices plus Gaussian perturbations of a given scale.

    Activity comes from the perturbed affine value at the reference
    decision, so flags flip more often the closer the slice sits to its
    activation boundary.  Noise draws are fresh per query round but frozen
    within one round, keeping the hint's self-consistency loop and reruns
    deterministic.  scale = 0 coincides with the perfect predictor.
    """

    kind = "noisy"

    def __init__(self, scale: float, seed: int = 0):
        if scale < 0:
            raise ValueError("noise scale must be >= 0")
        self.scale = float(scale)
        self.seed = int(seed)
        self._round = None
        self._cache: dict = {}

    def begin_round(self, t: int) -> None:
        self._round = t
        self._cache = {}

    def _noise(self, tag: str, r: int, i: int, size: int) -> np.ndarray:
        key = (tag, r, i)
        if key not in self._cache:
            rng = np.random.Generator(
                np.random.PCG64(np.random.SeedSequence([self.seed, 7, self._round or 0, r, i]))
            )
            self._cache[key] = rng.normal(size=size + 1)
        return self._cache[key]

    def predict_f(self, r, i):
        s = self._instance.f_slice(r, i)
        coeff = np.zeros(self._dim) if s is None else s.coeff.copy()
        if self.scale > 0:
            coeff = coeff + self.scale * self._noise("f", r, i, self._dim)[: self._dim]
        return coeff

    def predict_g(self, r, i, x_ref):
        s = self._instance.g_slice(r, i)
        coeff = np.zeros(self._dim) if s is None else s.coeff.copy()
        offset = 0.0 if s is None else s.offset
        if self.scale > 0:
            draw = self._noise("g", r, i, self._dim)
            coeff = coeff + self.scale * draw[: self._dim]
            offset = offset + self.scale * draw[self._dim]
        if s is None and self.scale == 0.0:
            return coeff, False
        return coeff, float(coeff @ x_ref) + offset > 0.0


def make_predictor(kind: str, scale: float = 0.0, seed: int = 0) -> Predictor:
    if kind == "perfect":
        return PerfectPredictor()
    if kind == "zero":
        return ZeroPredictor()
    if kind == "noisy":
        return NoisyPredictor(scale, seed)
    raise ValueError(f"unknown predictor kind {kind!r}")
