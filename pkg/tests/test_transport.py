import math
import numpy as np
import pytest
from scipy import integrate, optimize, special, stats

from tensorclt.measures import FAMILIES, PRODUCT_FAMILIES, MeasureSpec, UnsupportedFamilyError
from tensorclt.symtensor import TensorSpace
from tensorclt.transport import (
    identity_map,
    lemma_bound,
    linear_map,
    monotone_rearrangement,
    opnorm_eighth_moment,
    polynomial_map,
    transport_for,
)

PSI0 = 1 / math.sqrt(2 * math.pi)


def make(family, n):
    if family == "toeplitz_gaussian_rows":
        return MeasureSpec(family, n, symbol=(1.0, 0.4, 0.1))
    return MeasureSpec(family, n)


def fd(f, x, h=1e-5):
    return (f(x + h) - f(x - h)) / (2 * h)


def coord(tmap):
    return lambda t: tmap(np.atleast_2d(t).T)[:, 0]


def test_gaussian_is_identity():
    tm = monotone_rearrangement(MeasureSpec("gaussian", 3))
    x = np.random.default_rng(0).standard_normal((10, 3))
    phi, dphi = tm.evaluate(x)
    assert np.array_equal(phi, x)
    assert np.array_equal(dphi, np.broadcast_to(np.eye(3), (10, 3, 3)))
    assert (tm.alpha, tm.beta) == (1.0, 0.0)


def test_uniform_closed_form():
    tm = monotone_rearrangement(MeasureSpec("uniform_box", 1))
    x = np.linspace(-4, 4, 81)
    assert np.allclose(coord(tm)(x), math.sqrt(3) * (2 * special.ndtr(x) - 1), rtol=0, atol=1e-14)
    assert tm.jacobian([0.0])[0, 0] == pytest.approx(2 * math.sqrt(3) * PSI0, rel=1e-14)
    assert tm.jacobian([0.0])[0, 0] == pytest.approx(1.3820, abs=1e-4)


@pytest.mark.parametrize("family", ["uniform_box", "laplace_product", "uniform_logconcave_unconditional"])
def test_derivative_matches_finite_differences(family):
    tm = monotone_rearrangement(MeasureSpec(family, 1))
    x = np.linspace(-4, 4, 161)
    x = x[np.abs(x) > 1e-3]  # the Laplace map has a kink in phi' at 0 only through |x|
    d = tm.jacobian(x[:, None])[:, 0, 0]
    assert np.max(np.abs(d - fd(coord(tm), x)) / np.maximum(1, np.abs(d))) < 1e-5


def test_logconcave_map_against_root_finding():
    spec = MeasureSpec("uniform_logconcave_unconditional", 1)
    law = spec.coordinate()
    tm = monotone_rearrangement(spec)
    for x in (-3.0, -0.7, 0.2, 1.5, 5.0):
        target = special.ndtr(x)
        root = optimize.brentq(lambda y: law.cdf(y) - target, -10, 10, xtol=1e-14)
        assert coord(tm)(np.array([x]))[0] == pytest.approx(root, abs=1e-8)


@pytest.mark.parametrize("family", FAMILIES)
def test_pushforward_ks(family):
    spec = make(family, 1 if family != "toeplitz_gaussian_rows" else 2)
    tm = transport_for(spec)
    count = 100_000
    y = tm(np.random.default_rng(1).standard_normal((count, spec.n)))
    if spec.is_product:
        ks = stats.kstest(y[:, 0], spec.coordinate().cdf).statistic
        assert ks < 1.63 / math.sqrt(count)
    else:
        # Gaussian target: each coordinate is N(0, 1) and the covariance matches
        assert stats.kstest(y[:, 1], special.ndtr).statistic < 1.63 / math.sqrt(count)
        assert np.max(np.abs(np.cov(y, rowvar=False) - spec.covariance)) < 0.02


@pytest.mark.parametrize("family", PRODUCT_FAMILIES)
def test_monotone_on_grid(family):
    tm = transport_for(MeasureSpec(family, 1))
    x = np.linspace(-8, 8, 4001)[:, None]
    d = tm.jacobian(x)[:, 0, 0]
    if family == "polynomial_pushforward":
        # Q(x) = x^3 / sqrt(15): derivative vanishes only at the origin
        assert np.all(d[np.abs(x[:, 0]) > 0] > 0)
    else:
        assert np.all(d > 0)


@pytest.mark.parametrize("family", FAMILIES)
def test_declared_growth_bound_holds(family):
    tm = transport_for(make(family, 3))
    x = np.random.default_rng(2).standard_normal((1_000_000, 3))
    ratio = tm.opnorm(x) / tm.growth_bound(x)
    assert ratio.max() <= 1.0


@pytest.mark.parametrize("family", ["gaussian", "uniform_box", "laplace_product", "uniform_logconcave_unconditional"])
def test_log_concave_maps_at_most_linear_growth(family):
    tm = transport_for(MeasureSpec(family, 1))
    x = np.linspace(-8, 8, 1601)
    d = tm.jacobian(x[:, None])[:, 0, 0]
    C = np.max(d / (1 + np.abs(x)))
    assert C < 10


def test_polynomial_maps():
    ident = polynomial_map([0.0, 1.0], 2)
    assert ident.beta == 0
    x = np.random.default_rng(3).standard_normal((5, 2))
    assert np.allclose(ident(x), x)

    g = np.random.default_rng(4).standard_normal((400_000, 1))
    for coeffs, beta in (((-1 / math.sqrt(2), 0, 1 / math.sqrt(2)), 1), ((0, 0, 0, 1 / math.sqrt(15)), 2)):
        tm = polynomial_map(coeffs, 1)
        assert tm.beta == beta
        y = tm(g)[:, 0]
        se_m = y.std() / math.sqrt(y.size)
        se_v = (y**2).std() / math.sqrt(y.size)
        assert abs(y.mean()) < 4 * se_m
        assert abs((y**2).mean() - 1) < 4 * se_v
        c = np.asarray(coeffs)
        assert tm.alpha == pytest.approx(sum(i * abs(ci) for i, ci in enumerate(c)))


def test_polynomial_map_errors():
    with pytest.raises(ValueError):
        polynomial_map([1.0], 2)
    with pytest.warns(UserWarning):
        polynomial_map([0.0, 2.0], 1)
    with pytest.raises(UnsupportedFamilyError):
        monotone_rearrangement(MeasureSpec("polynomial_pushforward", 1, coeffs=(-1 / math.sqrt(2), 0, 1 / math.sqrt(2))))
    with pytest.raises(UnsupportedFamilyError):
        monotone_rearrangement(make("toeplitz_gaussian_rows", 2))


def test_eighth_moment_identity_exact():
    for n in (1, 5, 50):
        r = opnorm_eighth_moment(identity_map(n))
        assert r.eighth_moment == 1.0 and r.stderr == 0.0


def test_eighth_moment_uniform_against_gauss_hermite():
    tm = monotone_rearrangement(MeasureSpec("uniform_box", 1))
    x, w = np.polynomial.hermite_e.hermegauss(80)
    exact = np.sum(w * (2 * math.sqrt(3) * PSI0 * np.exp(-x * x / 2)) ** 8) / np.sum(w)
    r = opnorm_eighth_moment(tm, mc_n=100_000, seed=5)
    assert abs(r.eighth_moment - exact) < 3 * r.stderr


def _laplace_eighth_moment_exact(n):
    # phi' = h(|x|) with h increasing (Mills ratio), so max_i phi'(G_i) = h(max_i |G_i|)
    b = 1 / math.sqrt(2)

    def h(m):
        return b * PSI0 * math.exp(-m * m / 2) / (0.5 * special.erfc(m / math.sqrt(2)))

    def dens(m):
        return n * (2 * special.ndtr(m) - 1) ** (n - 1) * 2 * PSI0 * math.exp(-m * m / 2)

    return integrate.quad(lambda m: h(m) ** 8 * dens(m), 0, 12, limit=400)[0]


def test_eighth_moment_growth_against_quadrature():
    spec = MeasureSpec("laplace_product", 10)
    ns = (10, 100, 1000)
    reps = [opnorm_eighth_moment(transport_for(spec.with_n(n)), mc_n=10_000, seed=6) for n in ns]
    exact = [_laplace_eighth_moment_exact(n) for n in ns]
    for r, e in zip(reps, exact):
        assert abs(r.eighth_moment - e) < 3 * r.stderr
    slope_mc = np.polyfit(np.log(np.log(ns)), np.log([r.eighth_moment for r in reps]), 1)[0]
    slope_exact = np.polyfit(np.log(np.log(ns)), np.log(exact), 1)[0]
    assert abs(slope_mc - slope_exact) < 0.2
    # the log(n)^4 rate is asymptotic; over n = 1e3..1e6 the exponent is already in [3, 5]
    big = (1e3, 1e4, 1e5, 1e6)
    slope_big = np.polyfit(np.log(np.log(big)), np.log([_laplace_eighth_moment_exact(n) for n in big]), 1)[0]
    assert 3 <= slope_big <= 5


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("n", [1, 2, 10, 100])
def test_eighth_moment_below_lemma_bound(family, n):
    r = opnorm_eighth_moment(transport_for(make(family, n)), mc_n=2000, seed=7)
    assert r.eighth_moment <= r.lemma_bound
    assert r.lemma_bound == lemma_bound(transport_for(make(family, n)).alpha, transport_for(make(family, n)).beta, n)


def test_lemma_constant_choice():
    assert lemma_bound(1.0, 0.0, 10) == 256.0
    assert lemma_bound(1.0, 1.0, 1) == 256.0 * 4**4


def test_clamp_counter():
    tm = monotone_rearrangement(MeasureSpec("laplace_product", 2))
    assert tm.clamped(np.array([[9.0, 0.0], [-8.5, 8.0]])) == 2
    assert identity_map(2).clamped(np.array([[100.0, 0.0]])) == 0


def test_linear_map_and_scaling():
    A = np.array([[2.0, 0.5], [0.0, 1.0]])
    tm = linear_map(A)
    x = np.random.default_rng(8).standard_normal((4, 2))
    assert np.allclose(tm(x), x @ A.T)
    assert np.allclose(tm.jacobian(x), A)
    half = identity_map(3).scaled(0.5)
    assert np.allclose(half(np.ones((1, 3))), 0.5)
    assert half.lipschitz == 0.5 and half.alpha == 0.5
    assert tm.contractive().lipschitz == pytest.approx(1.0)


@pytest.mark.parametrize("family", FAMILIES)
def test_exact_tensor_moments_against_mc(family):
    tm = transport_for(make(family, 3))
    space = TensorSpace(3, 2)
    mean, method = tm.mean_tensor(space, "symmetric")
    assert method == "analytic"
    cov = tm.tensor_covariance(space, "symmetric")
    from tensorclt.symtensor import tensor_power

    y = tensor_power(tm(np.random.default_rng(9).standard_normal((400_000, 3))), space, "symmetric")
    se = y.std(axis=0) / math.sqrt(y.shape[0])
    assert np.all(np.abs(y.mean(axis=0) - mean) < 4 * se + 1e-12)
    emp = np.cov(y, rowvar=False)
    assert np.allclose(cov, cov.T)
    assert np.max(np.abs(emp - cov) / np.maximum(1, np.abs(cov))) < 0.3
