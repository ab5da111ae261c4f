import math

import numpy as np
import pytest

from pqvar.stochastic import (SemimartingaleSpec, decompose_local_time,
                              local_time_occupation, local_time_tanaka,
                              occupation_identity_check, pvar_exponent_probe,
                              quantile_level_grid, simulate)

BM = SemimartingaleSpec(T=1.0, n_steps=1024, seed=0)


def test_deterministic_drift_path():
    spec = SemimartingaleSpec(T=1.0, n_steps=512, drift=1.0, volatility=0.0,
                              x0=0.5, seed=9)
    b = simulate(spec)
    assert b.x[-1] == 0.5 + 1.0          # dyadic steps sum exactly
    assert np.all(b.qv == 0.0)
    assert np.all(b.m == 0.0)


def test_single_step():
    spec = SemimartingaleSpec(T=2.0, n_steps=1, volatility=3.0, seed=1)
    b = simulate(spec)
    assert len(b.times) == 2
    assert b.qv[-1] == pytest.approx(9.0 * 2.0)


def test_brownian_moments():
    finals = []
    for seed in range(500):
        b = simulate(SemimartingaleSpec(T=1.0, n_steps=256, seed=seed))
        finals.append(b.x[-1])
    finals = np.asarray(finals)
    assert abs(finals.mean()) < 4.0 / math.sqrt(500)
    assert abs(finals.var(ddof=1) - 1.0) < 0.15


def test_reproducibility_bitwise():
    a = simulate(BM)
    b = simulate(BM)
    assert a.x.tobytes() == b.x.tobytes()
    assert a.qv.tobytes() == b.qv.tobytes()
    c = simulate(BM, replicate=1)
    assert a.x.tobytes() != c.x.tobytes()
    d = simulate(SemimartingaleSpec(T=1.0, n_steps=1024, seed=1))
    assert a.x.tobytes() != d.x.tobytes()


def test_state_dependent_coefficients_and_split():
    spec = SemimartingaleSpec(
        T=1.0, n_steps=128, seed=4, x0=1.0,
        drift=lambda s, x: -0.5 * x,
        volatility=lambda s, x: 0.2 + 0.1 * abs(math.sin(x)))
    b = simulate(spec)
    # the Euler increments are shared: x - x0 = m + v bitwise
    assert np.array_equal(b.x - b.x[0], b.m + b.v) or \
        np.max(np.abs((b.x - b.x[0]) - (b.m + b.v))) < 1e-15
    assert np.all(np.diff(b.qv) > 0)


def test_non_finite_coefficients_rejected():
    spec = SemimartingaleSpec(n_steps=8, seed=0,
                              drift=lambda s, x: float("nan"))
    with pytest.raises(ValueError):
        simulate(spec)


def test_strided_observation():
    b = simulate(SemimartingaleSpec(n_steps=64, seed=2))
    c = b.strided(4)
    assert len(c.times) == 17
    assert c.x[0] == b.x[0] and c.x[-1] == b.x[-1]
    with pytest.raises(ValueError):
        b.strided(5)


# ---------------------------------------------------------------------------
# Tanaka estimator.

def levels_for(b, n=128, pad_frac=0.02):
    lo, hi = float(b.x.min()), float(b.x.max())
    pad = pad_frac * (hi - lo)
    return np.linspace(lo - pad, hi + pad, n + 1)


def test_initial_row_and_support():
    b = simulate(BM)
    levels = levels_for(b)
    ltf = local_time_tanaka(b, levels, time_indices=[0, 512, 1024])
    assert np.all(ltf.L[0] == 0.0)
    outside = (levels < b.x.min()) | (levels >= b.x.max())
    assert np.all(ltf.L[:, outside] == 0.0)
    assert np.all(ltf.L == ltf.ltilde + ltf.h)
    assert ltf.convention == "tanaka-no-half"


def test_level_grid_must_cover_path():
    b = simulate(BM)
    with pytest.raises(ValueError):
        local_time_tanaka(b, np.linspace(-0.01, 0.01, 5))


def test_discrete_tanaka_identity_recomputable():
    b = simulate(BM)
    levels = levels_for(b, 64)
    ltf = local_time_tanaka(b, levels, time_indices=[256, 1024])
    dm, dv = np.diff(b.m), np.diff(b.v)
    for r, j in ((0, 256), (1, 1024)):
        for i in (10, 32, 50):
            x = levels[i]
            ind = b.x[:j][b.x[:j] > x]
            mhat = float(np.sum((b.x[:j] > x) * dm[:j]))
            vhat = float(np.sum((b.x[:j] > x) * dv[:j]))
            direct = (max(b.x[j] - x, 0.0) - max(b.x[0] - x, 0.0)
                      - mhat - vhat)
            if x < b.x.min():
                direct = 0.0
            assert ltf.L[r, i] == pytest.approx(direct, abs=1e-12)


def test_local_time_monotone_in_time_for_brownian():
    b = simulate(SemimartingaleSpec(n_steps=2048, seed=7))
    levels = levels_for(b, 64)
    ltf = local_time_tanaka(b, levels, max_rows=64)
    assert np.min(np.diff(ltf.L, axis=0)) >= -1e-9


# ---------------------------------------------------------------------------
# Occupation estimator.

def test_occupation_zero_when_band_missed():
    spec = SemimartingaleSpec(n_steps=64, drift=0.0, volatility=0.0, x0=0.0,
                              seed=0)
    b = simulate(spec)
    levels = np.linspace(-1.0, 1.0, 21)
    ltf = local_time_occupation(b, levels, eps=0.2)
    assert np.all(ltf.L == 0.0)          # qv increments vanish


def test_occupation_validation():
    b = simulate(BM)
    levels = levels_for(b, 16)
    with pytest.raises(ValueError):
        local_time_occupation(b, levels, eps=-1.0)
    with pytest.raises(ValueError):
        local_time_occupation(b, levels, eps=1e-9)    # below spacing


def test_estimators_converge_to_each_other():
    mads = []
    for n_steps, eps in ((2**10, 0.2), (2**12, 0.1), (2**14, 0.05)):
        devs = []
        for seed in range(3):
            b = simulate(SemimartingaleSpec(n_steps=n_steps, seed=seed))
            levels = levels_for(b, 64)
            rows = [0, n_steps // 2, n_steps]
            lt_t = local_time_tanaka(b, levels, time_indices=rows)
            lt_o = local_time_occupation(b, levels, eps, time_indices=rows)
            devs.append(float(np.mean(np.abs(lt_t.L - lt_o.L))))
        mads.append(np.mean(devs))
    assert mads[0] > mads[1] > mads[2]


def test_cross_estimator_agreement_at_reference_config():
    devs = []
    for seed in range(100):
        b = simulate(SemimartingaleSpec(n_steps=2**14, seed=seed))
        levels = levels_for(b, 128)
        rows = [2**13, 2**14]
        lt_t = local_time_tanaka(b, levels, time_indices=rows)
        lt_o = local_time_occupation(b, levels, 0.05, time_indices=rows)
        devs.append(float(np.mean(np.abs(lt_t.L - lt_o.L))))
    assert float(np.mean(devs)) < 0.1


# ---------------------------------------------------------------------------
# Occupation identity.

def test_occupation_identity_zero_integrand():
    b = simulate(BM)
    ltf = local_time_tanaka(b, levels_for(b), time_indices=[1024])
    lhs, rhs, resid = occupation_identity_check(
        lambda x: np.zeros(np.shape(x)), ltf, b)
    assert lhs == 0.0 and rhs == 0.0 and resid == 0.0


def test_occupation_identity_unit_integrand():
    # both sides sit near t/2; the signed residual averages near zero
    diffs = []
    for seed in range(200):
        b = simulate(SemimartingaleSpec(n_steps=2**10, seed=seed))
        ltf = local_time_tanaka(b, levels_for(b, 256), time_indices=[2**10])
        lhs, rhs, _ = occupation_identity_check(
            lambda x: np.ones(np.shape(x)), ltf, b)
        assert rhs == pytest.approx(0.5, abs=1e-12)   # qv of unit volatility
        diffs.append(lhs - rhs)
    assert abs(float(np.mean(diffs))) < 0.02


def test_occupation_identity_ramped_indicator():
    # pilot-calibrated: the smooth-ramped step stays within 3x the unit
    # integrand's residual scale
    ramp = lambda x: np.clip((np.asarray(x, float) + 0.1) / 0.2, 0.0, 1.0)
    resid_unit, resid_ramp = [], []
    for seed in range(50):
        b = simulate(SemimartingaleSpec(n_steps=2**10, seed=seed))
        ltf = local_time_tanaka(b, levels_for(b, 256), time_indices=[2**10])
        _, _, r1 = occupation_identity_check(lambda x: np.ones(np.shape(x)),
                                             ltf, b)
        _, _, r2 = occupation_identity_check(ramp, ltf, b)
        resid_unit.append(r1)
        resid_ramp.append(r2)
    assert np.mean(resid_ramp) < 3.0 * max(np.mean(resid_unit), 0.01)


# ---------------------------------------------------------------------------
# Decomposition.

def test_decompose_injected_step():
    xs = np.linspace(-1, 1, 41)
    base = np.outer(np.linspace(0, 1, 4), np.zeros_like(xs))
    step = (xs >= xs[25]).astype(float) * 1.0
    L = base + np.outer(np.linspace(0, 1, 4), step)
    ltilde, h = decompose_local_time(L, jump_threshold=10.0)
    assert np.array_equal(h[-1], step)
    assert np.max(np.abs(ltilde)) == 0.0


def test_decompose_infinite_threshold():
    rng = np.random.default_rng(0)
    L = np.abs(rng.normal(size=(3, 20)))
    ltilde, h = decompose_local_time(L, jump_threshold=math.inf)
    assert np.all(h == 0.0)
    assert np.array_equal(ltilde, L)


def test_decompose_brownian_field_has_no_jumps():
    for seed in range(5):
        b = simulate(SemimartingaleSpec(n_steps=2**12, seed=seed))
        ltf = local_time_tanaka(b, levels_for(b, 256), time_indices=[2**12])
        assert float(np.max(np.abs(ltf.h))) == 0.0


# ---------------------------------------------------------------------------
# Exponent probe.

def test_probe_needs_three_levels():
    b = simulate(BM)
    with pytest.raises(ValueError):
        pvar_exponent_probe(b, level_counts=(64, 128))


def test_probe_values_nondecreasing_under_refinement():
    b = simulate(SemimartingaleSpec(n_steps=2**12, seed=3))
    rep = pvar_exponent_probe(b, p_list=(2.0,), level_counts=(32, 64, 128, 256))
    vals = rep.values[2.0]
    assert all(b2 >= a2 - 1e-12 for a2, b2 in zip(vals, vals[1:]))


def test_probe_deterministic_path_variation_tiny():
    spec = SemimartingaleSpec(n_steps=2**12, drift=1.0, volatility=0.0,
                              seed=0)
    b = simulate(spec)
    rep = pvar_exponent_probe(b, p_list=(1.5, 3.0),
                              level_counts=(64, 128, 256), spacing="uniform")
    # the exact local time vanishes; the estimate is bounded by one Euler step
    step = float(np.max(np.abs(np.diff(b.x))))
    for p, vals in rep.values.items():
        assert vals[-1] <= 260 * step ** min(p, 1.5)


def test_quantile_grid_strictly_increasing():
    b = simulate(BM)
    grid = quantile_level_grid(b.x, 64)
    assert len(grid) == 65
    assert np.all(np.diff(grid) > 0)
    constant = np.full(100, 3.14)
    fallback = quantile_level_grid(np.concatenate([constant, [3.15]]), 8)
    assert np.all(np.diff(fallback) > 0)


def test_uniform_axis_variation_stable_under_time_grid():
    from pqvar.variation import ConvexGauge, uniform_axis_variation

    b = simulate(SemimartingaleSpec(n_steps=2**12, seed=11))
    levels = levels_for(b, 128)
    gauge = ConvexGauge.power(2.5)
    vals = []
    for rows in ([0, 2**11, 2**12], [0, 2**10, 3 * 2**10, 2**12]):
        ltf = local_time_tanaka(b, levels, time_indices=rows)
        vals.append(uniform_axis_variation(ltf.as_field("L"), "y", gauge))
    assert all(np.isfinite(vals))
    # local time grows in t, so the final row dominates either time grid
    assert vals[0] == pytest.approx(vals[1], rel=0.05)


def test_local_time_field_reproducible_bitwise():
    b = simulate(SemimartingaleSpec(n_steps=2**10, seed=21))
    levels = levels_for(b, 64)
    a = local_time_tanaka(b, levels, time_indices=[0, 2**9, 2**10])
    c = local_time_tanaka(b, levels, time_indices=[0, 2**9, 2**10])
    assert a.L.tobytes() == c.L.tobytes()
    assert a.ltilde.tobytes() == c.ltilde.tobytes()
