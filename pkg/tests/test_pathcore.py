import io
import json

import numpy as np
import pytest

from pqvar.pathcore import (MollifierSpec, Partition1D, SampledField,
                            SampledPath, make_test_function, mollify_1d,
                            mollify_2d, x3cos, x3cos_left_derivative, x3t3cos,
                            x3t3cos_dt, x3t3cos_dx, xysin)


def test_sampled_path_invariants():
    with pytest.raises(ValueError):
        SampledPath([0.0, 0.0, 1.0], [1, 2, 3])
    with pytest.raises(ValueError):
        SampledPath([0.0, 1.0], [1.0, np.nan])
    with pytest.raises(ValueError):
        SampledPath([0.0], [1.0])
    p = SampledPath([0.0, 1.0, 2.0], [5.0, 6.0, 7.0])
    assert p.interval == (0.0, 2.0)
    assert p(0.5) == pytest.approx(5.5)
    # constant extension below the domain, error above
    assert p(-3.0) == 5.0
    with pytest.raises(ValueError):
        p(2.5)


def test_sampled_field_invariants():
    with pytest.raises(ValueError):
        SampledField([0, 1], [0, 1], np.zeros((3, 2)))
    f = SampledField([0, 1], [0, 1, 2], np.arange(6.0).reshape(2, 3))
    assert f.shape == (2, 3)


def test_partition_validation():
    with pytest.raises(ValueError):
        Partition1D((0, 0, 2))
    part = Partition1D((0, 2, 4))
    part.validate_for(5)
    with pytest.raises(ValueError):
        part.validate_for(6)


def test_test_functions_singular_points():
    assert x3cos(0.0) == 0.0
    assert x3cos_left_derivative(0.0) == 0.0
    assert np.all(xysin(0.0, np.linspace(-1, 1, 7)) == 0.0)
    assert np.all(xysin(np.linspace(-1, 1, 7), 0.0) == 0.0)
    assert x3t3cos(0.0, 0.3) == 0.0 and x3t3cos(0.3, 0.0) == 0.0
    assert x3t3cos_dx(0.0, 0.5) == 0.0 and x3t3cos_dt(0.5, 0.0) == 0.0


def test_test_functions_match_closed_forms():
    # 1000 random non-singular points reproduce the defining formulas
    rng = np.random.default_rng(42)
    x = rng.uniform(0.01, 2.0, 1000) * rng.choice([-1.0, 1.0], 1000)
    t = rng.uniform(0.01, 2.0, 1000)
    assert np.allclose(x3cos(x), x**3 * np.cos(1 / x), rtol=0, atol=1e-12)
    assert np.allclose(x3cos_left_derivative(x),
                       3 * x**2 * np.cos(1 / x) + x * np.sin(1 / x),
                       rtol=0, atol=1e-12)
    assert np.allclose(xysin(x, t), x * t * np.sin(1 / x + 1 / t),
                       rtol=0, atol=1e-12)
    assert np.allclose(x3t3cos(t, x), x**3 * t**3 * np.cos(1 / t + 1 / x),
                       rtol=0, atol=1e-12)
    assert np.allclose(x3t3cos_dx(t, x),
                       3 * t**3 * x**2 * np.cos(1 / t + 1 / x)
                       + x * t**3 * np.sin(1 / t + 1 / x),
                       rtol=0, atol=1e-12)


def test_make_test_function():
    grid = np.linspace(-1.0, 1.0, 21)
    p = make_test_function("x3cos", grid)
    assert p.values[10] == 0.0          # grid point at 0 carries the defined value
    poly = make_test_function("polynomial(0,1)", np.array([0.0, 0.7, 1.0]))
    assert poly.values[1] == pytest.approx(0.7)
    ramp = make_test_function("ramp(0.5)", grid)
    assert ramp.values[0] == 0.0 and ramp.values[-1] == pytest.approx(0.5)
    fld = make_test_function("xysin", (np.array([0.0, 0.5, 1.0]),
                                       np.array([0.0, 1.0])))
    assert np.all(fld.values[0] == 0.0) and np.all(fld.values[:, 0] == 0.0)
    with pytest.raises(ValueError):
        make_test_function("nope", grid)
    with pytest.raises(ValueError):
        make_test_function("x3cos", [0.0, np.inf])


def test_mollifier_mass_and_stability():
    spec = MollifierSpec()
    assert abs(spec.moment(0) - 1.0) < 1e-10
    doubled = MollifierSpec(quadrature_nodes=1024)
    rel = abs(spec.normalization - doubled.normalization) / doubled.normalization
    assert rel < 1e-8
    z = np.linspace(-0.5, 2.5, 301)
    vals = spec.rho(z)
    assert np.all(vals[(z <= 0) | (z >= 2)] == 0.0)
    assert np.all(vals[(z > 0.01) & (z < 1.99)] > 0.0)


def test_mollifier_derivatives_match_finite_differences():
    spec = MollifierSpec()
    z = np.linspace(0.1, 1.9, 41)
    h = 1e-6
    fd1 = (spec.rho(z + h) - spec.rho(z - h)) / (2 * h)
    assert np.max(np.abs(fd1 - spec.rho_prime(z))) < 1e-5
    fd2 = (spec.rho(z + h) - 2 * spec.rho(z) + spec.rho(z - h)) / h**2
    assert np.max(np.abs(fd2 - spec.rho_second(z))) < 1e-3


def test_mollify_constant_and_linear():
    spec = MollifierSpec()
    g5 = mollify_1d(lambda x: np.full(np.shape(x), 5.0), 7, spec)
    xs = np.linspace(-1, 1, 11)
    assert np.max(np.abs(g5(xs) - 5.0)) < 1e-9
    # first moment is verified by quadrature before relying on the shift
    m1 = spec.moment(1)
    assert abs(m1 - 1.0) < 1e-10
    gid = mollify_1d(lambda x: np.asarray(x, float), 10, spec)
    assert np.max(np.abs(gid(xs) - (xs - m1 / 10))) < 1e-6


def test_mollify_affine_least_squares():
    spec = MollifierSpec()
    gfun = mollify_1d(lambda x: 3.0 * np.asarray(x, float) - 2.0, 8, spec)
    xs = np.linspace(-2, 2, 100)
    ys = gfun(xs)
    coef = np.polynomial.polynomial.polyfit(xs, ys, 1)
    resid = ys - np.polynomial.polynomial.polyval(xs, coef)
    assert np.max(np.abs(resid)) < 1e-8
    assert coef[1] == pytest.approx(3.0, abs=1e-8)


def test_mollify_1d_sup_distance_decreasing():
    spec = MollifierSpec()
    xs = np.linspace(-1.0, 1.0, 10_000)
    sups = []
    for n in (4, 16, 64):
        gn = mollify_1d(x3cos, n, spec)
        sups.append(float(np.max(np.abs(gn(xs) - x3cos(xs)))))
    assert sups[0] > sups[1] > sups[2]


def test_mollify_1d_rejects_bad_order():
    with pytest.raises(ValueError):
        mollify_1d(x3cos, 0)


def test_mollify_2d_constant_and_linear():
    spec = MollifierSpec(quadrature_nodes=192)
    f3 = mollify_2d(lambda s, x: np.full(np.broadcast(s, x).shape, 3.0), 5, spec)
    pts = np.linspace(0.5, 1.0, 4)       # all above s = 2/n
    assert np.max(np.abs(f3(pts[:, None], pts[None, :]) - 3.0)) < 1e-9
    fsum = mollify_2d(lambda s, x: np.asarray(s, float) + np.asarray(x, float),
                      10, spec)
    s, x = 0.7, 0.3
    # separability: each axis contributes one first-moment shift
    expected = s + x - 2 * spec.moment(1) / 10
    assert abs(float(fsum(np.array(s), np.array(x))) - expected) < 1e-6


def test_mollify_2d_sup_distance_decreasing():
    spec = MollifierSpec(quadrature_nodes=96)
    g = np.linspace(0.1, 1.0, 41)
    tm, xm = np.meshgrid(g, g, indexing="ij")
    ref = x3t3cos(tm, xm)
    sups = []
    for n in (4, 16, 64):
        fn = mollify_2d(x3t3cos, n, spec)
        sups.append(float(np.max(np.abs(fn(tm, xm) - ref))))
    assert sups[0] > sups[1] > sups[2]


def test_mollify_2d_zero_time_extension():
    # with the window wider than s the zero extension must show up
    spec = MollifierSpec(quadrature_nodes=96)
    f1 = mollify_2d(lambda s, x: np.ones(np.broadcast(s, x).shape), 1, spec)
    val = float(f1(np.array(0.1), np.array(0.5)))
    assert val < 0.5    # most of the window z/n > s hits the zero extension


def test_serialization_roundtrips(tmp_path):
    p = SampledPath(np.linspace(0, 1, 5), np.arange(5.0), meta="demo")
    buf = io.StringIO()
    p.to_csv(buf)
    buf.seek(0)
    p2 = SampledPath.from_csv(buf)
    assert np.array_equal(p.xs, p2.xs) and np.array_equal(p.values, p2.values)
    p3 = SampledPath.from_json(json.loads(json.dumps(p.to_json())))
    assert np.array_equal(p.values, p3.values) and p3.meta == "demo"

    f = SampledField(np.linspace(0, 1, 3), np.linspace(0, 2, 4),
                     np.arange(12.0).reshape(3, 4))
    path = tmp_path / "field.csv"
    f.to_csv(str(path))
    f2 = SampledField.from_csv(str(path))
    assert np.array_equal(f.values, f2.values)
    f3 = SampledField.from_json(f.to_json())
    assert np.array_equal(f.ys, f3.ys)
