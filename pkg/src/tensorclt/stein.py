"""Stein kernels for tensor powers of transport maps.

For a transport map ``phi`` with ``phi(G) ~ mu`` put
``phit(y) = phi(y)^{⊗p} - E[phi(G)^{⊗p}]`` on the chosen coordinates.  The
estimator

    tau(y) = int_0^inf e^{-t} [P_t Dphit](y) dt  Dphit(y)^T

integrates exactly against ``Df(phit(y))`` to give ``E<phit, f(phit)>``, so
``E[tau(G) | phit(G)]`` is a Stein kernel of ``phit(G)``.  Conditioning only
lowers ``E|tau - Id|^2``; every discrepancy reported here is therefore an
upper bound.

Time integral: with ``u = e^{-t}`` the weight ``e^{-t} dt`` becomes ``du`` on
``(0, 1]``, discretised by Gauss-Legendre nodes.  The semigroup expectation
``P_t F(y) = E F(u y + sqrt(1 - u^2) Z)`` is Monte Carlo over ``K`` draws of
``Z`` shared by all time nodes.  The draws are split in two halves, giving
two conditionally independent copies ``tau_a``, ``tau_b`` of the estimator;
``tau = (tau_a + tau_b) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .symtensor import TensorSpace, index_array
from .transport import TransportMap

CHUNK = 1024  # points per random stream


class QuadratureError(ValueError):
    pass


@dataclass(frozen=True)
class OUQuadrature:
    """Gauss-Legendre nodes in ``u = e^{-t}`` plus the inner Monte Carlo size."""

    J: int = 16
    K: int = 64

    def __post_init__(self):
        if self.J < 1:
            raise QuadratureError("quadrature needs at least one time node")
        if self.K < 2 or self.K % 2:
            raise QuadratureError(f"inner draws K must be even and >= 2, got {self.K}")

    @property
    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """``(u, w)`` on ``[0, 1]``; ``w`` sums to one."""
        x, w = np.polynomial.legendre.leggauss(self.J)
        return 0.5 * (x + 1.0), 0.5 * w

    @property
    def times(self) -> np.ndarray:
        return -np.log(self.nodes[0])

    def refined(self) -> "OUQuadrature":
        return OUQuadrature(2 * self.J, 2 * self.K)


def ou_semigroup_apply(F, t: float, y, K: int = 64, seed: int = 0, return_stderr: bool = False):
    """Monte Carlo ``P_t F(y) = E F(e^{-t} y + sqrt(1 - e^{-2t}) N)``.

    ``F`` maps a batch ``(K, n)`` to ``(K, ...)``.  At ``t = 0`` returns
    ``F(y)`` with no sampling.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if K < 1:
        raise ValueError("K must be positive")
    y = np.asarray(y, dtype=float)
    if t == 0:
        val = np.asarray(F(y[None, :]))[0]
        return (val, np.zeros_like(val)) if return_stderr else val
    u = math.exp(-t)
    z = np.random.default_rng(seed).standard_normal((K, y.shape[0]))
    vals = np.asarray(F(u * y + math.sqrt(-math.expm1(-2.0 * t)) * z))
    mean = vals.mean(axis=0)
    if not return_stderr:
        return mean
    se = vals.std(axis=0, ddof=1) / math.sqrt(K) if K > 1 else np.full_like(mean, np.inf)
    return mean, se


@dataclass(frozen=True)
class KernelSample:
    """Per-point draws: ``Y = phit(G)`` ``(m, D)`` and the two half estimators ``(m, D, D)``."""

    Y: np.ndarray
    tau_a: np.ndarray
    tau_b: np.ndarray

    @property
    def tau(self) -> np.ndarray:
        return 0.5 * (self.tau_a + self.tau_b)

    def __len__(self):
        return self.Y.shape[0]


@dataclass(frozen=True, eq=False)
class SteinKernelField:
    """``y -> tau(y)`` for ``phi^{⊗p}`` restricted to ``kind`` coordinates.

    ``bias`` adds ``bias * Id`` to every kernel value; it exists only to
    check that the diagnostics catch a wrong kernel.
    """

    tmap: TransportMap
    space: TensorSpace
    kind: str
    quad: OUQuadrature
    center: np.ndarray
    center_method: str = "analytic"
    bias: float = 0.0
    idx: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "idx", index_array(self.space, self.kind))
        c = np.ascontiguousarray(self.center, dtype=float)
        if c.shape != (self.idx.shape[0],):
            raise ValueError(f"center has shape {c.shape}, expected ({self.idx.shape[0]},)")
        object.__setattr__(self, "center", c)

    @property
    def dim(self) -> int:
        return self.idx.shape[0]

    def with_bias(self, bias: float) -> "SteinKernelField":
        return SteinKernelField(self.tmap, self.space, self.kind, self.quad, self.center, self.center_method, bias)

    def _pass(self, y, z, use_numba=None):
        u, w = self.quad.nodes
        Y, ta, tb = kernels.stein_pass(y, z, u, w, self.tmap.kernel_args(), self.idx, self.center, use_numba)
        if self.bias:
            eye = self.bias * np.eye(self.dim)
            ta += eye
            tb += eye
        return Y, ta, tb

    def evaluate(self, y, seed: int = 0, use_numba=None) -> np.ndarray:
        """``tau(y)`` at given points ``(m, n)``; returns ``(m, D, D)``."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        z = np.random.default_rng(seed).standard_normal((y.shape[0], self.quad.K, self.space.n))
        Y, ta, tb = self._pass(y, z, use_numba)
        return 0.5 * (ta + tb)

    def sample(self, mc_n: int, seed: int = 0, use_numba=None) -> KernelSample:
        """Draw ``mc_n`` Gaussian points and their kernel estimates.

        Points come in blocks of :data:`CHUNK`, block ``c`` from the stream
        ``default_rng([seed, c])``; output does not depend on the backend.
        """
        if mc_n < 1:
            raise ValueError("mc_n must be positive")
        n, K, D = self.space.n, self.quad.K, self.dim
        Y = np.empty((mc_n, D))
        ta = np.empty((mc_n, D, D))
        tb = np.empty((mc_n, D, D))
        for c, lo in enumerate(range(0, mc_n, CHUNK)):
            b = min(CHUNK, mc_n - lo)
            rng = np.random.default_rng([seed, c])
            y = rng.standard_normal((b, n))
            z = rng.standard_normal((b, K, n))
            Y[lo : lo + b], ta[lo : lo + b], tb[lo : lo + b] = self._pass(y, z, use_numba)
        return KernelSample(Y, ta, tb)


def build_kernel(
    tmap: TransportMap,
    space: TensorSpace,
    kind: str = "principal",
    quad: OUQuadrature | None = None,
    center=None,
) -> SteinKernelField:
    """Kernel field of ``phi^{⊗p} - E[phi^{⊗p}]``.

    The centring vector is taken from ``center`` when given, otherwise from
    :meth:`TransportMap.mean_tensor` (exact for the shipped families).
    """
    if tmap.n != space.n:
        raise ValueError(f"map acts on R^{tmap.n} but the tensor space has n={space.n}")
    quad = quad or OUQuadrature()
    if center is None:
        center, method = tmap.mean_tensor(space, kind)
    else:
        method = "supplied"
    return SteinKernelField(tmap, space, kind, quad, np.asarray(center, dtype=float), method)


def linear_image_kernel(tau, A) -> np.ndarray:
    """Kernel of ``A X`` from a kernel ``tau`` of ``X``: ``A tau A^T`` (batched)."""
    A = np.asarray(A, dtype=float)
    return A @ np.asarray(tau) @ A.T


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

TEST_FAMILIES = ("linear", "quadratic", "cubic_odd")


@dataclass(frozen=True)
class SteinIdentityReport:
    family: str
    lhs: float
    rhs: float
    residual: float
    stderr: float
    mc_n: int

    @property
    def z(self) -> float:
        if self.stderr == 0:
            return 0.0 if self.residual == 0 else math.inf
        return abs(self.residual) / self.stderr

    def passed(self, threshold: float = 4.0) -> bool:
        return self.z < threshold


def _test_function_params(D: int, seed: int):
    rng = np.random.default_rng([0x7E57, seed])
    B = rng.standard_normal((D, D)) / math.sqrt(D)
    c = rng.standard_normal(D) / math.sqrt(D)
    return B, c


def _identity_terms(family, Y, tau, B, c):
    """Per-sample ``<Y, f(Y)>`` and ``<tau, Df(Y)>``."""
    if family == "linear":
        lhs = np.einsum("ia,ab,ib->i", Y, B, Y)
        rhs = np.einsum("iab,ab->i", tau, B)
    elif family == "quadratic":
        # f(Y) = (c.Y) B Y,  Df = B Y c^T + (c.Y) B
        cy = Y @ c
        BY = Y @ B.T
        lhs = cy * np.einsum("ia,ia->i", Y, BY)
        rhs = np.einsum("ia,iab,b->i", BY, tau, c) + cy * np.einsum("iab,ab->i", tau, B)
    elif family == "cubic_odd":
        # f(Y) = Y**3 coordinatewise
        lhs = (Y**4).sum(axis=1)
        rhs = 3.0 * np.einsum("iaa,ia->i", tau, Y * Y)
    else:
        raise ValueError(f"unknown test family {family!r}; expected one of {TEST_FAMILIES}")
    return lhs, rhs


def stein_identity_check(
    kfield: SteinKernelField,
    family: str = "linear",
    mc_n: int = 100_000,
    seed: int = 0,
    sample: KernelSample | None = None,
) -> SteinIdentityReport:
    """Coupled estimate of ``E<Y, f(Y)> - E<tau, Df(Y)>``.

    Both sides use the same draws; the stderr is that of the per-sample
    difference.  Pass ``sample`` to reuse a previous :meth:`SteinKernelField.sample`.
    """
    s = sample if sample is not None else kfield.sample(mc_n, seed)
    B, c = _test_function_params(kfield.dim, seed)
    lhs, rhs = _identity_terms(family, s.Y, s.tau, B, c)
    diff = lhs - rhs
    m = len(s)
    return SteinIdentityReport(
        family, float(lhs.mean()), float(rhs.mean()), float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(m)), m
    )


@dataclass(frozen=True)
class MomentIdentityReport:
    """``E[tau(G)]`` against ``Cov(phit(G))``."""

    mean_kernel: np.ndarray
    covariance: np.ndarray
    max_abs_diff: float
    stderr: float
    max_z: float
    mc_n: int
    method: str
    rounding: float = 0.0  # differences at or below this count as exact zeros

    def passed(self, threshold: float = 4.0) -> bool:
        return self.max_abs_diff < threshold * self.stderr or self.max_abs_diff <= self.rounding


def kernel_moment_check(
    kfield: SteinKernelField,
    mc_n: int = 100_000,
    seed: int = 0,
    sample: KernelSample | None = None,
    covariance: str = "auto",
) -> MomentIdentityReport:
    """Compare ``E[tau]`` with ``Cov(phit(G))`` entrywise.

    ``covariance="analytic"`` uses exact mixed moments of the map (available
    for every shipped family); ``"coupled"`` estimates ``E[Y Y^T]`` on the
    same draws and tests the mean of ``tau - Y Y^T``.  ``"auto"`` prefers
    the exact covariance: for polynomial maps ``Y Y^T`` has far heavier
    tails than ``tau`` and the coupled stderr is unreliable.

    ``stderr`` is the largest entrywise stderr; ``max_z`` the largest
    entrywise ratio.
    """
    if covariance not in ("auto", "analytic", "coupled"):
        raise ValueError(f"unknown covariance mode {covariance!r}")
    s = sample if sample is not None else kfield.sample(mc_n, seed)
    m = len(s)
    cov = None
    if covariance != "coupled":
        cov = kfield.tmap.tensor_covariance(kfield.space, kfield.kind)
        if cov is None and covariance == "analytic":
            raise ValueError("no closed-form covariance for this map")
    tau = s.tau
    if cov is None:
        yy = np.einsum("ia,ib->iab", s.Y, s.Y)
        diff = tau - yy
        cov = yy.mean(axis=0)
        method = "coupled"
    else:
        diff = tau - cov
        method = "analytic"
    dm = diff.mean(axis=0)
    se = diff.std(axis=0, ddof=1) / math.sqrt(m)
    # exact kernels (linear maps) leave only rounding in dm with se = 0
    tol = 1e-12 * max(1.0, float(np.abs(cov).max()))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(np.abs(dm) <= tol, 0.0, np.where(se > 0, np.abs(dm) / se, np.inf))
    return MomentIdentityReport(tau.mean(axis=0), cov, float(np.abs(dm).max()), float(se.max()), float(z.max()), m, method, tol)


@dataclass(frozen=True)
class DiscrepancyEstimate:
    value: float
    stderr: float
    mc_n: int


def discrepancy_upper_estimate(
    kfield: SteinKernelField,
    whitener=None,
    mc_n: int = 20_000,
    seed: int = 0,
    sample: KernelSample | None = None,
) -> DiscrepancyEstimate:
    """Unbiased estimate of ``E|A tau A^T - Id|_HS^2`` for the exact-inner kernel.

    Uses ``<A tau_a A^T - Id, A tau_b A^T - Id>`` with the two independent
    halves of the inner draws, so the inner Monte Carlo noise does not
    inflate the value.  Individual terms can be negative; the mean estimates
    a nonnegative quantity.
    """
    s = sample if sample is not None else kfield.sample(mc_n, seed)
    D = kfield.dim
    eye = np.eye(D)
    if whitener is None:
        a, b = s.tau_a - eye, s.tau_b - eye
    else:
        A = np.asarray(whitener, dtype=float)
        if A.shape != (D, D):
            raise ValueError(f"whitener must be {D}x{D}, got {A.shape}")
        a = A @ s.tau_a @ A.T - eye
        b = A @ s.tau_b @ A.T - eye
    terms = np.einsum("iab,iab->i", a, b)
    m = len(s)
    se = float(terms.std(ddof=1) / math.sqrt(m)) if m > 1 else math.inf
    return DiscrepancyEstimate(float(terms.mean()), se, m)


@dataclass(frozen=True)
class ContractionReport:
    max_opnorm: float
    inner_stderr: float
    points: int

    def passed(self, slack: float = 3.0) -> bool:
        # 1e-12 absorbs rounding when the kernel is exact (stderr 0)
        return self.max_opnorm <= 1.0 + slack * self.inner_stderr + 1e-12


def contraction_check(
    tmap: TransportMap,
    points: int = 10_000,
    seed: int = 0,
    quad: OUQuadrature | None = None,
    bias: float = 0.0,
) -> ContractionReport:
    """Largest ``|tau(y)|_op`` over sampled points for a 1-Lipschitz map (``p = 1``).

    ``inner_stderr`` is ``|tau_a - tau_b|_op / 2`` at the maximising point,
    a one-pair estimate of the inner Monte Carlo error there.
    """
    kfield = build_kernel(tmap, TensorSpace(tmap.n, 1), "full", quad or OUQuadrature())
    if bias:
        kfield = kfield.with_bias(bias)
    s = kfield.sample(points, seed)
    ops = np.linalg.norm(s.tau, ord=2, axis=(-2, -1))
    i = int(np.argmax(ops))
    spread = float(np.linalg.norm(s.tau_a[i] - s.tau_b[i], ord=2)) / 2.0
    return ContractionReport(float(ops[i]), spread, points)
