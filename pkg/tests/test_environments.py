import json

import numpy as np
import pytest

from cocomem import (
    AppendixAInstance,
    NoisyPredictor,
    PerfectPredictor,
    SeparableLinearInstance,
    Variant,
    ZeroPredictor,
    make_predictor,
    run_penalty_ogd,
    splat,
)


def test_default_parameters_match_reference_experiment():
    inst = AppendixAInstance()
    assert (inst.m, inst.horizon, inst.radius) == (3, 4000, 15.0)
    assert (inst.sigma, inst.delta, inst.gamma) == (10.0, 1.0, 3.0)
    assert inst.coef_bound == 30.0
    assert inst.mode == "stochastic"


def test_constraint_lift_example():
    inst = AppendixAInstance(m=1, horizon=10, seed=0)
    inst.d_coef[5] = 2.0
    g = inst.constraint(5)
    # lift at x = 1: 2*1 - 1 = 1, positive part 1
    assert g.value_splat([1.0]) == pytest.approx(1.0)
    assert max(g.value_splat([1.0]), 0.0) == pytest.approx(1.0)
    assert g.value(splat([1.0], 1)) == pytest.approx(1.0)


def test_same_seed_is_bitwise_identical():
    a = AppendixAInstance(m=2, horizon=50, seed=9, mode="adversarial")
    b = AppendixAInstance(m=2, horizon=50, seed=9, mode="adversarial")
    assert np.array_equal(a.c, b.c) and np.array_equal(a.d_coef, b.d_coef)
    c = AppendixAInstance(m=2, horizon=50, seed=10, mode="adversarial")
    assert not np.array_equal(a.c, c.c)


def test_instance_unaffected_by_play():
    inst = AppendixAInstance(m=2, horizon=40, seed=1)
    before = inst.c.copy(), inst.d_coef.copy()
    run_penalty_ogd(inst, Variant.COCO_M2)
    run_penalty_ogd(inst, Variant.COCO_M)
    assert np.array_equal(inst.c, before[0]) and np.array_equal(inst.d_coef, before[1])


def test_coefficients_within_declared_range():
    st = AppendixAInstance(m=1, horizon=400, seed=3, mode="stochastic")
    assert np.all(np.abs(st.c) <= st.sigma) and np.all(np.abs(st.d_coef) <= st.sigma)
    ad = AppendixAInstance(m=1, horizon=400, seed=3, mode="adversarial")
    assert np.all(np.abs(ad.c) <= ad.coef_bound)
    assert np.all(np.abs(ad.d_coef) <= ad.coef_bound)
    # the Gaussian branch actually exceeds the uniform range sometimes
    assert np.max(np.abs(ad.c)) > ad.sigma


def test_declared_constants_dominate_empirical_probes():
    inst = AppendixAInstance(m=2, horizon=60, seed=5, mode="adversarial")
    k = inst.constants()
    rng = np.random.default_rng(0)
    for t in range(2, 61, 3):
        f, g = inst.loss(t), inst.constraint(t)
        w = rng.uniform(-15, 15, size=(100, 3, 1))
        for i in range(0, 100, 2):
            w1, w2 = splat(w[i, 0], 2), splat(w[i + 1, 0], 2)
            assert abs(f.value(w1)) <= k.f_bound + 1e-9
            assert abs(g.value(w1)) <= k.g_bound + 1e-9
            gap = np.linalg.norm(w1.flat() - w2.flat())
            assert abs(f.value(w1) - f.value(w2)) <= k.l_f * gap + 1e-9
            assert abs(g.value(w1) - g.value(w2)) <= k.l_g * gap + 1e-9


def test_appendix_json_round_trip():
    inst = AppendixAInstance(m=2, horizon=30, seed=11, mode="adversarial")
    doc = inst.to_json()
    obj = json.loads(doc)
    assert obj["rng"] == "pcg64" and obj["seed"] == 11
    back = AppendixAInstance.from_json(doc)
    assert np.array_equal(back.c, inst.c) and np.array_equal(back.d_coef, inst.d_coef)


def test_separable_json_round_trip():
    inst = SeparableLinearInstance(m=1, horizon=25, seed=13)
    back = SeparableLinearInstance.from_json(inst.to_json())
    assert np.array_equal(back.f_coef, inst.f_coef)
    assert np.array_equal(back.g_coef, inst.g_coef)
    assert np.array_equal(back.g_off, inst.g_off)
    assert np.array_equal(back.g_present, inst.g_present)


def test_separable_zero_outside_active_rounds():
    inst = SeparableLinearInstance(m=2, horizon=30, seed=0)
    for i in range(3):
        assert inst.f_slice(2, i) is None  # rounds <= m carry no slices
        assert inst.f_slice(31, i) is None
        assert inst.g_slice(0, i) is None
    assert inst.f_slice(3, 0) is not None


def test_separable_m0_collapses_to_single_slice():
    inst = SeparableLinearInstance(m=0, horizon=30, seed=1)
    t = 5
    f = inst.loss(t)
    assert f.memory == 0
    sl = inst.f_slice(t, 0)
    assert np.allclose(f.grad_splat([0.3]), sl.coeff)


def test_separable_center_feasible_for_every_slice():
    inst = SeparableLinearInstance(m=2, horizon=300, seed=4)
    center = inst.fset.center
    for r in range(3, 301):
        for i in range(3):
            sl = inst.g_slice(r, i)
            if sl is not None:
                assert sl.value(center) <= 0.0


def test_separable_constraint_bound_matches_sampling():
    inst = SeparableLinearInstance(m=2, horizon=200, seed=7)
    k = inst.constants()
    pts = np.linspace(-inst.radius, inst.radius, 10001)[:, None]
    worst = 0.0
    for r in range(3, 201):
        for i in range(3):
            sl = inst.g_slice(r, i)
            if sl is None:
                continue
            vals = np.abs(pts @ sl.coeff + sl.offset)
            worst = max(worst, float(np.max(vals)))
    assert worst <= k.g_bound + 1e-9
    assert worst >= 0.95 * k.g_bound  # the declared bound is near-tight


def test_predictors_basic_contracts():
    inst = SeparableLinearInstance(m=1, horizon=40, seed=2)
    x = np.array([0.5])
    perfect, zero = PerfectPredictor(), ZeroPredictor()
    noiseless = NoisyPredictor(0.0, seed=3)
    for p in (perfect, zero, noiseless):
        p.bind(inst)
        p.begin_round(10)
    for r in range(4, 20):
        for i in (0, 1):
            true_f = inst.f_slice(r, i)
            want = true_f.coeff if true_f is not None else np.zeros(1)
            assert np.array_equal(perfect.predict_f(r, i), want)
            assert np.array_equal(noiseless.predict_f(r, i), want)
            assert np.array_equal(zero.predict_f(r, i), np.zeros(1))
            pc, pa = perfect.predict_g(r, i, x)
            nc, na = noiseless.predict_g(r, i, x)
            assert np.array_equal(pc, nc) and pa == na
            zc, za = zero.predict_g(r, i, x)
            assert not za and np.array_equal(zc, np.zeros(1))
            gs = inst.g_slice(r, i)
            if gs is not None:
                assert pa == (gs.value(x) > 0.0)


def test_noisy_predictor_is_deterministic_per_round():
    inst = SeparableLinearInstance(m=1, horizon=40, seed=2)
    p = NoisyPredictor(0.4, seed=5)
    p.bind(inst)
    p.begin_round(7)
    a = p.predict_f(9, 1).copy()
    b = p.predict_f(9, 1).copy()
    assert np.array_equal(a, b)  # frozen within the round
    p.begin_round(8)
    c = p.predict_f(9, 1).copy()
    assert not np.array_equal(a, c)  # fresh across rounds
    q = NoisyPredictor(0.4, seed=5)
    q.bind(inst)
    q.begin_round(7)
    assert np.array_equal(q.predict_f(9, 1), a)  # reproducible


def test_make_predictor_dispatch():
    assert make_predictor("perfect").kind == "perfect"
    assert make_predictor("zero").kind == "zero"
    assert make_predictor("noisy", scale=0.1).kind == "noisy"
    with pytest.raises(ValueError):
        make_predictor("psychic")


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        AppendixAInstance(m=5, horizon=3)
    with pytest.raises(ValueError):
        AppendixAInstance(sigma=-1.0)
    with pytest.raises(ValueError):
        AppendixAInstance(mode="chaotic")
    with pytest.raises(ValueError):
        SeparableLinearInstance(radius=0.0)
