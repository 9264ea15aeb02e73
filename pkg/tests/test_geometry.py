import numpy as np
import pytest

from cocomem import Ball, Box, Regularizer, ftrl_argmin, project, regret_coefficient


def test_box_projection_clamps():
    b = Box([-15.0], [15.0])
    assert project(b, [20.0])[0] == pytest.approx(15.0)
    assert project(b, [-31.0])[0] == pytest.approx(-15.0)


def test_ball_projection_scales_radially():
    s = Ball([0.0, 0.0], 15.0)
    assert np.allclose(project(s, [30.0, 0.0]), [15.0, 0.0])


def test_interior_point_is_fixed():
    for fset in (Box([-1.0, -1.0], [1.0, 1.0]), Ball([0.0, 0.0], 1.0)):
        p = np.array([0.25, -0.5])
        assert np.array_equal(project(fset, p), p)


def test_projection_idempotent_and_nonexpansive():
    rng = np.random.default_rng(0)
    for fset in (Box([-2.0, -3.0], [1.0, 4.0]), Ball([1.0, -1.0], 2.5)):
        for _ in range(1000):
            p, q = rng.normal(scale=5.0, size=2), rng.normal(scale=5.0, size=2)
            pp, qq = project(fset, p), project(fset, q)
            assert np.linalg.norm(project(fset, pp) - pp) <= 1e-12
            assert np.linalg.norm(pp - qq) <= np.linalg.norm(p - q) + 1e-12


def test_ftrl_argmin_examples():
    s = Ball([0.0, 0.0], 15.0)
    r = Regularizer(s)
    # unconstrained optimum -g/mu interior
    assert np.allclose(ftrl_argmin(s, [2.0, 0.0], 1.0, r), [-2.0, 0.0])
    # optimum clipped to the boundary
    assert np.allclose(ftrl_argmin(s, [2.0, 0.0], 0.1, r), [-15.0, 0.0])
    # zero linear term
    assert np.allclose(ftrl_argmin(s, [0.0, 0.0], 2.0, r), [0.0, 0.0])
    # mu = 0 on a box: vertex of the linear program
    b = Box([-1.0, -1.0], [1.0, 1.0])
    assert np.allclose(ftrl_argmin(b, [3.0, -3.0], 0.0, Regularizer(b)), [-1.0, 1.0])
    # mu = 0 ties resolve to the center coordinate
    assert np.allclose(ftrl_argmin(b, [0.0, 2.0], 0.0, Regularizer(b)), [0.0, -1.0])


def test_ftrl_argmin_beats_random_feasible_points():
    rng = np.random.default_rng(3)
    for case in range(500):
        if case % 2 == 0:
            fset = Ball(rng.normal(size=2), float(rng.uniform(0.5, 4.0)))
        else:
            lo = rng.normal(size=2)
            fset = Box(lo, lo + rng.uniform(0.5, 4.0, size=2))
        reg = Regularizer(fset)
        g = rng.normal(scale=3.0, size=2)
        mu = float(rng.uniform(0.01, 5.0))
        x = ftrl_argmin(fset, g, mu, reg)
        assert fset.contains(x, tol=1e-9)
        obj = g @ x + mu * reg.value(x)
        pts = rng.uniform(-1.0, 1.0, size=(1000, 2))
        if isinstance(fset, Ball):
            cand = fset.center + pts * fset.radius
            norms = np.linalg.norm(cand - fset.center, axis=1)
            scale = np.minimum(1.0, fset.radius / np.maximum(norms, 1e-12))
            cand = fset.center + (cand - fset.center) * scale[:, None]
        else:
            cand = fset.lo + (pts + 1.0) / 2.0 * (fset.hi - fset.lo)
        vals = cand @ g + mu * 0.5 * np.sum((cand - reg.center) ** 2, axis=1)
        assert np.all(obj <= vals + 1e-10)


def test_ftrl_argmin_validates_input():
    b = Box([-1.0], [1.0])
    r = Regularizer(b)
    with pytest.raises(ValueError):
        ftrl_argmin(b, [1.0, 2.0], 1.0, r)
    with pytest.raises(ValueError):
        ftrl_argmin(b, [np.nan], 1.0, r)
    with pytest.raises(ValueError):
        ftrl_argmin(b, [1.0], -0.5, r)


def test_regularizer_max_value():
    b = Box([-15.0], [15.0])
    r = Regularizer(b)
    assert r.value(b.center) == 0.0
    # max over the set: half of (diameter/2)^2, attained at the endpoints
    assert r.r_max == pytest.approx(0.5 * 15.0**2)
    assert r.value([15.0]) == pytest.approx(r.r_max)


def test_regret_coefficient_formula():
    b = Box([-2.0], [2.0])
    alpha = 16.0  # diameter^2
    # (r_max/alpha + 1)(m*D + sqrt(D^2 + alpha)) with r_max = 2, D = 4
    want = (2.0 / 16.0 + 1.0) * (3 * 4.0 + np.sqrt(16.0 + 16.0))
    assert regret_coefficient(b, 3, alpha) == pytest.approx(want)
