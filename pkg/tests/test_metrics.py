import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorclt.metrics import (
    MAX_EXACT,
    BoundInputs,
    DistanceReport,
    bures_w2,
    discrepancy_to_w2,
    entropic_w2,
    exact_w2,
    gaussian_proxy_w2,
    lipschitz_D8,
    sum_certificate,
    theorem_bound,
    threshold_slope,
    uniform_logconcave_D8,
)

clouds = st.integers(0, 2**32 - 1).map(lambda s: np.random.default_rng(s))


def test_exact_self_distance_zero():
    a = np.random.default_rng(0).standard_normal((30, 3))
    assert exact_w2(a, a).value == 0.0
    assert exact_w2(a, a[::-1]).value == 0.0


def test_exact_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(10):
        a, b = rng.standard_normal((3, 2)), rng.standard_normal((3, 2))
        brute = min(sum(np.sum((a[i] - b[pi[i]]) ** 2) for i in range(3)) for pi in itertools.permutations(range(3))) / 3
        assert exact_w2(a, b).value == pytest.approx(brute, rel=1e-12)


def test_exact_one_dimensional_sorted_coupling():
    rng = np.random.default_rng(2)
    a, b = rng.standard_normal(200), rng.exponential(size=200)
    assert exact_w2(a[:, None], b[:, None]).value == pytest.approx(np.mean((np.sort(a) - np.sort(b)) ** 2), rel=1e-12)


def test_exact_errors():
    with pytest.raises(ValueError):
        exact_w2(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(ValueError):
        exact_w2(np.zeros((MAX_EXACT + 1, 1)), np.zeros((MAX_EXACT + 1, 1)))


@settings(max_examples=25, deadline=None)
@given(rng=clouds, m=st.integers(2, 12), D=st.integers(1, 3))
def test_exact_metric_properties(rng, m, D):
    a, b, c = (rng.standard_normal((m, D)) for _ in range(3))
    ab, ba = exact_w2(a, b).value, exact_w2(b, a).value
    assert ab == pytest.approx(ba, rel=1e-12, abs=1e-14)
    assert ab > 0
    ac, bc = exact_w2(a, c).value, exact_w2(b, c).value
    assert math.sqrt(ac) <= math.sqrt(ab) + math.sqrt(bc) + 1e-12


@settings(max_examples=15, deadline=None)
@given(rng=clouds, m=st.integers(5, 40), D=st.integers(1, 4))
def test_entropic_brackets_exact(rng, m, D):
    a, b = rng.standard_normal((m, D)), rng.standard_normal((m, D)) + 0.5
    ex = exact_w2(a, b).value
    en = entropic_w2(a, b)
    assert en.value >= ex - 1e-10
    assert en.value - en.gap <= ex + 1e-10


def test_entropic_small_eps_converges():
    rng = np.random.default_rng(3)
    a, b = rng.standard_normal((15, 2)), rng.standard_normal((15, 2))
    en = entropic_w2(a, b, eps=1e-3, iters=3000)
    assert en.value == pytest.approx(exact_w2(a, b).value, rel=1e-3)


def test_proxy_examples():
    # mean 0, variance 4 in 1D; variances (4, 9) in 2D
    x = np.array([-2.0, 2.0]) * math.sqrt(0.5)  # ddof=1 variance 4
    assert gaussian_proxy_w2(x).value == pytest.approx(1.0)
    assert bures_w2([0.0, 0.0], np.diag([4.0, 9.0]))[0] == pytest.approx(5.0)
    assert bures_w2([3.0, 4.0], np.eye(2))[0] == pytest.approx(25.0)
    v, flagged = bures_w2([0.0, 0.0], np.diag([1.0, 0.0]))
    assert flagged and v == pytest.approx((math.sqrt(1e-12) - 1) ** 2)
    with pytest.raises(ValueError):
        gaussian_proxy_w2(np.zeros((3, 3)))


def test_proxy_gaussian_self_distance_decays():
    rng = np.random.default_rng(4)
    D = 5
    vals = [gaussian_proxy_w2(rng.standard_normal((m, D))).value for m in (1000, 100_000)]
    assert vals[1] < vals[0]
    assert vals[1] < 10 * D / 100_000


def test_proxy_gelbrich_lower_bound():
    rng = np.random.default_rng(5)
    m, D = 1000, 2
    for _ in range(20):
        M = rng.standard_normal((D, D))
        S = M @ M.T + 0.2 * np.eye(D)
        a = rng.standard_normal((m, D)) @ np.linalg.cholesky(S).T
        # reference standardised to mean 0 and (population) covariance Id exactly
        ref = rng.standard_normal((m, D))
        ref -= ref.mean(axis=0)
        ref = ref @ np.linalg.inv(np.linalg.cholesky(np.cov(ref, rowvar=False, ddof=0))).T
        ex = exact_w2(a, ref).value
        assert bures_w2(a.mean(axis=0), np.cov(a, rowvar=False, ddof=0))[0] <= ex + 1e-10
        # the proxy uses the ddof=1 covariance; that shifts it by at most Tr(S)/(m-1)
        slack = np.trace(np.cov(a, rowvar=False)) / (m - 1)
        assert gaussian_proxy_w2(a).value <= ex + slack


def test_report_json_round_trip():
    r = DistanceReport("entropic_w2", 0.25, gap=1e-3, m=10, D=2, seed=7, flagged=True)
    assert DistanceReport.from_json(r.to_json()) == r


def test_bound_example():
    b = theorem_bound(BoundInputs(3, 1000, 2, 1.0, 945.0, 1.0))
    assert b == pytest.approx(2 * 16 * 0.003 * math.sqrt(945) + 2 * 9 / 1000, rel=1e-14)
    assert b == pytest.approx(2.969, abs=5e-4)


def test_bound_weighted_matches_homogeneous():
    for d in (1, 7, 100):
        h = theorem_bound(BoundInputs(3, d, 2, 1.3, 945.0, 2.0))
        w = theorem_bound(BoundInputs(3, d, 2, 1.3, 945.0, 2.0, weights=(1.0,) * d))
        assert w == pytest.approx(h, rel=1e-14)
    assert BoundInputs(2, 3, 1, 1, 1, 1, weights=(1, 2, 3)).formula == "weighted"


def test_bound_decreases_in_d():
    vals = [theorem_bound(BoundInputs(3, d, 2, 1.0, 945.0, 1.0)) for d in (10, 100, 1000, 10_000)]
    assert all(x > y for x, y in zip(vals, vals[1:]))
    assert vals[-1] * 10_000 == pytest.approx(vals[0] * 10)


def test_bound_validation():
    with pytest.raises(ValueError):
        BoundInputs(3, 10, 2, -1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        BoundInputs(3, 10, 2, 1.0, 1.0, 1.0, weights=(1.0,))


def test_d8_helpers():
    assert lipschitz_D8(2.0) == 256.0
    assert uniform_logconcave_D8(0.5) == 256.0
    with pytest.raises(ValueError):
        uniform_logconcave_D8(0.0)


def test_certificates():
    assert discrepancy_to_w2(0.0) == 0.0
    assert discrepancy_to_w2(2.969) == 2.969
    assert sum_certificate(3.0, d=100) == 0.03
    assert sum_certificate(3.0, weights=(1.0,) * 4) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        discrepancy_to_w2(-1.0)
    with pytest.raises(ValueError):
        sum_certificate(1.0)


def test_slopes_synthetic():
    rows = [(3, d, 2.5 / d) for d in (50, 200, 800, 3200)]
    fit = threshold_slope(rows, squared=True)
    assert abs(fit.by_n[3] + 1.0) < 1e-12
    rows = [(n, 1000, 0.1 * n**7) for n in (2, 3, 5, 8)]
    assert threshold_slope(rows, squared=True).by_d[1000] == pytest.approx(7.0, abs=1e-10)
    # unsquared input is squared first
    rows = [(3, d, math.sqrt(2.5 / d)) for d in (50, 200, 800)]
    assert threshold_slope(rows).by_n[3] == pytest.approx(-1.0, abs=1e-12)


def test_slopes_need_three_points():
    with pytest.raises(ValueError):
        threshold_slope([(3, 50, 1.0), (3, 200, 0.5)])
    with pytest.raises(ValueError):
        threshold_slope([(3, 50, 0.0), (3, 200, 0.5), (3, 800, 0.1)])
