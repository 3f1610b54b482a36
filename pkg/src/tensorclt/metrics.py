"""Distances to the standard Gaussian and the explicit bound calculators.

Estimators
----------
exact_assignment_w2
    squared W2 between two equal-size clouds by optimal assignment.
entropic_w2
    log-domain Sinkhorn; reports the cost of the rounded plan (an upper
    bound on the exact value) and its duality gap.
gaussian_moment_proxy
    closed-form W2^2 between the fitted Gaussian ``N(m, S)`` and ``N(0, I)``,
    ``|m|^2 + Tr(S + I - 2 S^{1/2})``.  By the Gelbrich bound it never
    exceeds W2^2 between the underlying laws.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

ESTIMATORS = ("gaussian_moment_proxy", "exact_assignment_w2", "entropic_w2")
MAX_EXACT = 2000
EIG_FLOOR = 1e-12


@dataclass(frozen=True)
class DistanceReport:
    estimator: str
    value: float  # squared distance
    stderr: float | None = None
    gap: float | None = None
    m: int = 0
    D: int = 0
    seed: int | None = None
    flagged: bool = False  # eigenvalue floor hit / plan rounding needed

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DistanceReport":
        return cls(**json.loads(text))


def _clouds(a, b):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"cloud shapes differ: {a.shape} vs {b.shape}")
    return a, b


def exact_w2(cloud_a, cloud_b, seed: int | None = None) -> DistanceReport:
    """``(1/m) min_pi sum_i |a_i - b_pi(i)|^2`` by the Hungarian method."""
    a, b = _clouds(cloud_a, cloud_b)
    m = a.shape[0]
    if m > MAX_EXACT:
        raise ValueError(f"exact assignment capped at m={MAX_EXACT}; use entropic_w2 or the proxy")
    cost = cdist(a, b, "sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return DistanceReport("exact_assignment_w2", float(cost[rows, cols].sum() / m), m=m, D=a.shape[1], seed=seed)


def _round_plan(P, r, c):
    """Project a positive matrix onto the transport polytope ``U(r, c)``."""
    P = P * np.minimum(r / P.sum(axis=1), 1.0)[:, None]
    P = P * np.minimum(c / P.sum(axis=0), 1.0)[None, :]
    er = r - P.sum(axis=1)
    ec = c - P.sum(axis=0)
    if er.sum() > 0:
        P = P + np.outer(er, ec) / er.sum()
    return P


def entropic_w2(cloud_a, cloud_b, eps: float | None = None, iters: int = 500, seed: int | None = None) -> DistanceReport:
    """Sinkhorn with ``eps = 0.05 * median cost`` (default).

    ``value`` is the cost of the rounded entropic plan, which is feasible,
    so ``value >= exact``.  ``gap`` is ``value`` minus the dual objective
    of the c-transformed potentials, so ``value - gap <= exact``.
    """
    a, b = _clouds(cloud_a, cloud_b)
    m = a.shape[0]
    C = cdist(a, b, "sqeuclidean")
    if eps is None:
        med = float(np.median(C))
        eps = 0.05 * med if med > 0 else 1.0
    logw = -math.log(m)
    f = np.zeros(m)
    g = np.zeros(m)
    for _ in range(iters):
        f = -eps * logsumexp((g[None, :] - C) / eps + logw, axis=1)
        g = -eps * logsumexp((f[:, None] - C) / eps + logw, axis=0)
    w = np.full(m, 1.0 / m)
    P = np.exp((f[:, None] + g[None, :] - C) / eps + 2 * logw)
    P = _round_plan(P, w, w)
    primal = float((P * C).sum())
    gc = (C - f[:, None]).min(axis=0)
    dual = float(f.mean() + gc.mean())
    return DistanceReport("entropic_w2", primal, gap=max(primal - dual, 0.0), m=m, D=a.shape[1], seed=seed)


def bures_w2(mean, cov) -> tuple[float, bool]:
    """``|m|^2 + Tr(S + I - 2 S^{1/2})`` and whether the eigenvalue floor was hit."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    lam = np.linalg.eigvalsh(0.5 * (cov + cov.T))
    flagged = bool(lam.min() < EIG_FLOOR)
    lam = np.maximum(lam, EIG_FLOOR)
    return float(mean @ mean + np.sum((np.sqrt(lam) - 1.0) ** 2)), flagged


def gaussian_proxy_w2(cloud, seed: int | None = None) -> DistanceReport:
    cloud = np.asarray(cloud, dtype=float)
    if cloud.ndim == 1:
        cloud = cloud[:, None]
    m, D = cloud.shape
    if m < D + 1:
        raise ValueError(f"need at least D+1={D + 1} points, got {m}")
    value, flagged = bures_w2(cloud.mean(axis=0), np.cov(cloud, rowvar=False, ddof=1))
    return DistanceReport("gaussian_moment_proxy", value, m=m, D=D, seed=seed, flagged=flagged)


# ---------------------------------------------------------------------------
# bound calculators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundInputs:
    """Inputs of the Stein-discrepancy bound for ``A(W - E W)``.

    ``M8p`` is ``E|X|_2^{8(p-1)}``, ``D8`` is ``E|Dphi(G)|_op^8``.  With
    ``weights`` the ``1/d`` factor becomes ``|alpha|_4^4 / |alpha|_2^4``.
    """

    n: int
    d: int
    p: int
    opnorm_A: float
    M8p: float
    D8: float
    weights: tuple | None = None

    def __post_init__(self):
        for name in ("n", "d", "p", "opnorm_A", "M8p", "D8"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.weights is not None and len(self.weights) != self.d:
            raise ValueError(f"need {self.d} weights, got {len(self.weights)}")

    @property
    def formula(self) -> str:
        return "homogeneous" if self.weights is None else "weighted"

    @property
    def ratio(self) -> float:
        if self.weights is None:
            return 1.0 / self.d
        a = np.asarray(self.weights, dtype=float)
        return float(np.sum(a**4) / np.sum(a**2) ** 2)


def theorem_bound(inputs: BoundInputs) -> float:
    """``2 r (|A|^2 p^4 n sqrt(M8p) sqrt(D8) + n^p)`` with ``r = 1/d`` or the weight ratio."""
    i = inputs
    bracket = i.opnorm_A**2 * i.p**4 * i.n * math.sqrt(i.M8p) * math.sqrt(i.D8) + float(i.n) ** i.p
    return 2.0 * i.ratio * bracket


def lipschitz_D8(lipschitz: float) -> float:
    """``E|Dphi|_op^8`` for an ``L``-Lipschitz map is at most ``L^8``."""
    return float(lipschitz) ** 8


def uniform_logconcave_D8(L: float) -> float:
    """Caffarelli input for an ``L``-uniformly log-concave target, taking the map
    to be ``1/L``-Lipschitz so that ``sqrt(E|Dphi|^8) <= 1/L^4``."""
    if L <= 0:
        raise ValueError("L must be positive")
    return 1.0 / L**8


def discrepancy_to_w2(s2: float) -> float:
    """A squared Stein discrepancy is itself a certificate for ``W2^2``."""
    if s2 < 0:
        raise ValueError("squared discrepancy must be nonnegative")
    return float(s2)


def sum_certificate(s2_summand: float, d: int | None = None, weights=None) -> float:
    """Squared-discrepancy certificate of a normalised (weighted) i.i.d. sum."""
    if s2_summand < 0:
        raise ValueError("squared discrepancy must be nonnegative")
    if weights is not None:
        a = np.asarray(weights, dtype=float)
        return float(s2_summand * np.sum(a**4) / np.sum(a**2) ** 2)
    if d is None or d < 1:
        raise ValueError("give d >= 1 or weights")
    return float(s2_summand) / d


# ---------------------------------------------------------------------------
# rates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlopeFit:
    by_n: dict  # n -> slope of log(dist^2) against log d
    by_d: dict  # d -> slope of log(dist^2) against log n


def _slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def threshold_slope(results, squared: bool = False) -> SlopeFit:
    """Least-squares log-log slopes of squared distance against ``d`` (per fixed
    ``n``) and against ``n`` (per fixed ``d``).

    ``results`` holds ``(n, d, distance)`` triples; with ``squared=True`` the
    third entry is already the squared distance.  Series with fewer than
    three distinct abscissae are skipped; if none remains, ``ValueError``.
    """
    rows = [(int(n), int(d), float(v) if squared else float(v) ** 2) for n, d, v in results]
    if any(v <= 0 for _, _, v in rows):
        raise ValueError("distances must be positive for a log-log fit")
    by_n, by_d = {}, {}
    for key, pos, out in ((0, 1, by_n), (1, 0, by_d)):
        groups = {}
        for r in rows:
            groups.setdefault(r[key], []).append((r[pos], r[2]))
        for k, pts in sorted(groups.items()):
            if len({x for x, _ in pts}) >= 3:
                xs, ys = zip(*pts)
                out[k] = _slope(xs, ys)
    if not by_n and not by_d:
        raise ValueError("need at least 3 distinct d (or n) in some series")
    return SlopeFit(by_n, by_d)
