"""Shared domain types: decision vectors, memory windows, feasible sets,
function oracles with memory, and per-round trace records.

A decision is a plain 1-D numpy array of finite floats.  A memory window
holds the last m+1 decisions in round order (oldest first), so the loss
f_t(x_{t-m}, ..., x_t) is always evaluated on a full window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Variant(Enum):
    """Which problem flavor a run solves.

    COCO_M2: both losses and constraints depend on the last m+1 decisions.
    COCO_M : losses have memory, constraints depend on the current decision.
    """

    COCO_M = "coco_m"
    COCO_M2 = "coco_m2"


def as_decision(x, dim: int | None = None) -> np.ndarray:
    """Validate and normalize a decision vector (1-D, finite, d >= 1)."""
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"decision must be a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("decision has non-finite entries")
    if dim is not None and v.size != dim:
        raise ValueError(f"decision has dimension {v.size}, expected {dim}")
    return v


class MemoryWindow:
    """Ring of the last m+1 decisions, oldest -> newest.

    After construction the window always holds exactly m+1 entries;
    pushing a new decision evicts the oldest one.
    """

    __slots__ = ("_buf", "memory", "dim")

    def __init__(self, entries):
        arr = np.asarray(entries, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError("window needs at least one entry")
        if not np.all(np.isfinite(arr)):
            raise ValueError("window has non-finite entries")
        self._buf = arr.copy()
        self.memory = arr.shape[0] - 1
        self.dim = arr.shape[1]

    def push(self, x) -> None:
        x = as_decision(x, self.dim)
        self._buf[:-1] = self._buf[1:]
        self._buf[-1] = x

    @property
    def entries(self) -> np.ndarray:
        """(m+1, d) array, row 0 is the oldest decision."""
        return self._buf

    @property
    def newest(self) -> np.ndarray:
        return self._buf[-1]

    @property
    def oldest(self) -> np.ndarray:
        return self._buf[0]

    def flat(self) -> np.ndarray:
        """Window stacked into a single (m+1)*d vector (for norms)."""
        return self._buf.reshape(-1)

    def copy(self) -> "MemoryWindow":
        return MemoryWindow(self._buf)

    def __len__(self) -> int:
        return self._buf.shape[0]


def splat(x, m: int) -> MemoryWindow:
    """Constant window (x, ..., x) with m+1 slots: the memory-less lift's
    evaluation point."""
    if m < 0:
        raise ValueError("memory length must be >= 0")
    x = as_decision(x)
    return MemoryWindow(np.tile(x, (m + 1, 1)))


# ---------------------------------------------------------------------------
# Feasible sets


class FeasibleSet:
    """Closed convex decision set with a cached diameter.

    Only axis-aligned boxes and Euclidean balls are supported; both admit
    exact projections and closed-form linear minimization.
    """

    dim: int
    diameter: float

    @property
    def center(self) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x, tol: float = 1e-9) -> bool:
        raise NotImplementedError

    def support(self, g: np.ndarray) -> float:
        """sup_{x in set} <g, x> (support function)."""
        raise NotImplementedError


class Box(FeasibleSet):
    def __init__(self, lo, hi):
        self.lo = as_decision(lo)
        self.hi = as_decision(hi, self.lo.size)
        if np.any(self.lo > self.hi):
            raise ValueError("empty box: lo > hi componentwise")
        self.dim = self.lo.size
        self.diameter = float(np.linalg.norm(self.hi - self.lo))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = as_decision(x, self.dim)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def support(self, g: np.ndarray) -> float:
        return float(np.sum(np.where(g >= 0, g * self.hi, g * self.lo)))

    def __repr__(self):
        return f"Box(lo={self.lo}, hi={self.hi})"


class Ball(FeasibleSet):
    def __init__(self, center, radius: float):
        self._center = as_decision(center)
        if not (radius > 0 and np.isfinite(radius)):
            raise ValueError("ball radius must be positive and finite")
        self.radius = float(radius)
        self.dim = self._center.size
        self.diameter = 2.0 * self.radius

    @property
    def center(self) -> np.ndarray:
        return self._center

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = as_decision(x, self.dim)
        return bool(np.linalg.norm(x - self._center) <= self.radius + tol)

    def support(self, g: np.ndarray) -> float:
        return float(g @ self._center) + self.radius * float(np.linalg.norm(g))

    def __repr__(self):
        return f"Ball(center={self._center}, radius={self.radius})"


# ---------------------------------------------------------------------------
# Function oracles


class MemoryFunctionOracle:
    """A convex function of a memory window with closed-form gradients.

    Subclasses provide the window value, the partial gradient w.r.t. the
    newest slot, and the memory-less lift value/gradient.  `grad_splat`
    must equal the sum of the partial gradients over all m+1 slots at a
    constant window (the chain rule of the splat map x -> (x,...,x)).

    `lipschitz` bounds both the joint-window Lipschitz constant and the
    lift's gradient norm; `bound` bounds |value| over the feasible set.
    """

    dim: int
    memory: int
    lipschitz: float
    bound: float

    def value(self, window: MemoryWindow) -> float:
        raise NotImplementedError

    def grad_wrt_last(self, window: MemoryWindow) -> np.ndarray:
        raise NotImplementedError

    def value_splat(self, x) -> float:
        return self.value(splat(x, self.memory))

    def grad_splat(self, x) -> np.ndarray:
        raise NotImplementedError


class _MaxOracle(MemoryFunctionOracle):
    """Pointwise max of several oracles; gradients follow the argmax
    (ties broken by lowest index), a valid subgradient choice."""

    def __init__(self, oracles):
        self.oracles = list(oracles)
        self.dim = self.oracles[0].dim
        self.memory = self.oracles[0].memory
        self.lipschitz = max(o.lipschitz for o in self.oracles)
        self.bound = max(o.bound for o in self.oracles)

    def _argmax_window(self, window):
        vals = [o.value(window) for o in self.oracles]
        return int(np.argmax(vals)), max(vals)

    def _argmax_splat(self, x):
        vals = [o.value_splat(x) for o in self.oracles]
        return int(np.argmax(vals)), max(vals)

    def value(self, window):
        return self._argmax_window(window)[1]

    def grad_wrt_last(self, window):
        k, _ = self._argmax_window(window)
        return self.oracles[k].grad_wrt_last(window)

    def value_splat(self, x):
        return self._argmax_splat(x)[1]

    def grad_splat(self, x):
        k, _ = self._argmax_splat(x)
        return self.oracles[k].grad_splat(x)


def max_reduce(oracles) -> MemoryFunctionOracle:
    """Fold k constraints into one via the pointwise max.

    With a single oracle the input is returned unchanged.  All oracles
    must share dimension and memory length.
    """
    oracles = list(oracles)
    if not oracles:
        raise ValueError("max_reduce needs at least one oracle")
    if len(oracles) == 1:
        return oracles[0]
    d, m = oracles[0].dim, oracles[0].memory
    for o in oracles[1:]:
        if o.dim != d or o.memory != m:
            raise ValueError("oracles disagree on dimension or memory length")
    return _MaxOracle(oracles)


# ---------------------------------------------------------------------------
# Per-round trace record


@dataclass
class RoundRecord:
    """Everything a single round produced, for metrics and CSV emission.

    `v_dual` is the cumulative memory-less violation driving the penalty;
    `ccv_cum` is the variant's official cumulative constraint violation
    (they coincide except for the double-memory penalty-OGD runs, where
    the dual update uses the lift while the CCV uses the window value).
    `eta_or_mu` is the step size (OGD) or FTRL weight used to produce the
    next decision.  The eps_* fields stay 0 for non-optimistic runs.
    """

    t: int
    x: np.ndarray
    f_mem: float
    f_splat: float
    g_mem: float
    g_splat: float
    g_plus_recorded: float
    v_dual: float
    ccv_cum: float
    phi_prime: float
    lam: float
    surrogate: float
    grad_norm: float
    eta_or_mu: float
    eps_f: float = 0.0
    eps_g: float = 0.0
    eps_z: float = 0.0
    saturated: bool = False
