"""Euclidean projections and the closed-form FTRL argmin.

Both feasible-set kinds admit exact formulas, so no iterative solver is
involved anywhere: projection is a clamp (box) or radial scaling (ball),
and the regularized leader  argmin_x <g, x> + mu * 0.5 ||x - c||^2  is a
projected affine map of g.
"""

from __future__ import annotations

import numpy as np

from .core import Ball, Box, FeasibleSet, as_decision


def project(fset: FeasibleSet, p) -> np.ndarray:
    """l2 projection of p onto the feasible set."""
    p = as_decision(p, fset.dim)
    if isinstance(fset, Box):
        return np.clip(p, fset.lo, fset.hi)
    if isinstance(fset, Ball):
        diff = p - fset.center
        n = float(np.linalg.norm(diff))
        if n <= fset.radius:
            return p.copy()
        return fset.center + diff * (fset.radius / n)
    raise TypeError(f"unsupported feasible set {type(fset).__name__}")


class Regularizer:
    """r(x) = 0.5 ||x - center||^2, nonnegative and 1-strongly convex.

    `r_max` is the maximum of r over the feasible set it was built for;
    with the center at the set's natural center this is (diameter/2)^2/2
    for both boxes and balls.
    """

    def __init__(self, fset: FeasibleSet):
        self.center = fset.center
        self.r_max = 0.5 * (fset.diameter / 2.0) ** 2

    def value(self, x) -> float:
        x = as_decision(x, self.center.size)
        return 0.5 * float(np.sum((x - self.center) ** 2))


def minimize_linear(fset: FeasibleSet, g: np.ndarray) -> np.ndarray:
    """argmin_{x in set} <g, x>; coordinates with g_i = 0 resolve to the
    center (box) and g = 0 resolves to the center (ball), for determinism."""
    g = np.asarray(g, dtype=float)
    if isinstance(fset, Box):
        c = fset.center
        return np.where(g > 0, fset.lo, np.where(g < 0, fset.hi, c))
    if isinstance(fset, Ball):
        n = float(np.linalg.norm(g))
        if n == 0.0:
            return fset.center.copy()
        return fset.center - fset.radius * g / n
    raise TypeError(f"unsupported feasible set {type(fset).__name__}")


def regret_coefficient(fset: FeasibleSet, memory: int, alpha: float) -> float:
    """(r_max/alpha + 1) * (m*|X| + sqrt(|X|^2 + alpha)): the constant in
    front of the accumulated hint error in the delayed-FTRL regret bound."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    d = fset.diameter
    r_max = Regularizer(fset).r_max
    return (r_max / alpha + 1.0) * (memory * d + np.sqrt(d * d + alpha))


def ftrl_argmin(fset: FeasibleSet, g, mu: float, reg: Regularizer) -> np.ndarray:
    """Exact minimizer of <g, x> + mu * r(x) over the feasible set.

    For mu > 0 the unconstrained optimum center - g/mu is projected onto
    the set (valid because r is centered at the set's center).  mu = 0
    degenerates to pure linear minimization.
    """
    g = np.asarray(g, dtype=float)
    if g.shape != (fset.dim,):
        raise ValueError(f"linear term has shape {g.shape}, expected ({fset.dim},)")
    if not np.all(np.isfinite(g)):
        raise ValueError("linear term has non-finite entries")
    if mu < 0:
        raise ValueError("mu must be >= 0")
    if mu == 0.0:
        return minimize_linear(fset, g)
    return project(fset, reg.center - g / mu)
