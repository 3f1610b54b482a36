"""Transport maps pushing the standard Gaussian on R^n to a target measure.

Product targets use the one-dimensional monotone rearrangement
``phi_i = F^{-1} o Phi`` in every coordinate; polynomial targets use the
polynomial itself; Gaussian targets with a covariance use the symmetric
square root.  Each map carries growth parameters ``(alpha, beta)`` with

    |Dphi(x)|_op <= alpha * (1 + |x|_inf ** beta)

certified analytically for the shipped families.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from . import kernels
from .measures import (
    GaussianLaw,
    MeasureSpec,
    PolynomialLaw,
    UnsupportedFamilyError,
    mixed_moment,
    wick_moment,
)
from .symtensor import TensorSpace, index_array

TABLE_NODES = 4097  # 2**12 intervals on [-8, 8]
INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


class DerivativeSingularityError(ValueError):
    """Target density vanishes inside its support, so the map derivative blows up."""


@dataclass(frozen=True, eq=False)
class TransportMap:
    """``x -> mix @ (scale * g(x_1), ..., scale * g(x_n))``.

    ``coord_law`` is the law of the unscaled coordinate ``g(G_1)``; it is
    used for exact tensor moments.  Immutable; evaluation is pure.
    """

    n: int
    code: int
    prm: np.ndarray
    alpha: float
    beta: float
    mix: np.ndarray | None = None
    table: tuple | None = None
    coord_law: object = None
    label: str = ""
    lipschitz: float | None = None  # sup |Dphi|_op when finite and known
    _margs: tuple = field(default=None, repr=False)

    def __post_init__(self):
        prm = np.ascontiguousarray(self.prm, dtype=float)
        prm.setflags(write=False)
        object.__setattr__(self, "prm", prm)
        if self.table is None:
            tv = td = np.zeros(2)
            x0, h = 0.0, 1.0
        else:
            tv, td, x0, h = self.table
        mix = np.zeros((self.n, self.n)) if self.mix is None else np.ascontiguousarray(self.mix, dtype=float)
        object.__setattr__(
            self,
            "_margs",
            (int(self.code), prm, np.ascontiguousarray(tv), np.ascontiguousarray(td), float(x0), float(h), mix, self.mix is not None),
        )

    @property
    def scale(self) -> float:
        return float(self.prm[0])

    @property
    def is_diagonal(self) -> bool:
        return self.mix is None

    def kernel_args(self) -> tuple:
        return self._margs

    def evaluate(self, x):
        """``(phi(x), Dphi(x))`` for ``x`` of shape ``(n,)`` or ``(m, n)``."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x2 = np.atleast_2d(x)
        if x2.shape[-1] != self.n:
            raise ValueError(f"expected points in R^{self.n}, got shape {x.shape}")
        phi, dphi = kernels.map_eval(self._margs, x2)
        return (phi[0], dphi[0]) if single else (phi, dphi)

    def __call__(self, x):
        return self.evaluate(x)[0]

    def jacobian(self, x):
        return self.evaluate(x)[1]

    def opnorm(self, x) -> np.ndarray:
        """``|Dphi(x)|_op`` row-wise."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.mix is None:
            _, gp = kernels._coord_np(*self._margs[:6], x)
            return np.abs(gp).max(axis=-1)
        return np.linalg.norm(self.jacobian(x), ord=2, axis=(-2, -1))

    def growth_bound(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.alpha * (1.0 + np.abs(x).max(axis=-1) ** self.beta)

    def clamped(self, x) -> int:
        """How many entries of ``x`` fall in the truncated tail ``|x| > 8``."""
        if self.code in (kernels.IDENTITY, kernels.POLY):
            return 0
        return int(np.count_nonzero(np.abs(np.asarray(x)) > kernels.CLAMP))

    def scaled(self, c: float) -> "TransportMap":
        """The map ``c * phi``."""
        lip = None if self.lipschitz is None else abs(c) * self.lipschitz
        common = dict(alpha=abs(c) * self.alpha, lipschitz=lip, label=f"{c:g}*{self.label}", _margs=None)
        if self.mix is not None:
            return replace(self, mix=c * self.mix, **common)
        prm = self.prm.copy()
        prm[0] *= c
        return replace(self, prm=prm, **common)

    def contractive(self) -> "TransportMap":
        """This map divided by its Lipschitz constant (unchanged if already 1-Lipschitz)."""
        if self.lipschitz is None:
            raise ValueError(f"{self.label} has no known finite Lipschitz constant")
        return self.scaled(1.0 / self.lipschitz) if self.lipschitz > 1 else self

    def exact_moment(self, indices):
        """``E[prod_i phi_{j_i}(G)]`` for 0-based ``indices``, or ``None`` if not known in closed form."""
        indices = list(indices)
        s = self.scale ** len(indices)
        if self.mix is None and self.coord_law is not None:
            return s * mixed_moment(_LawSpec(self.coord_law), indices)
        if self.mix is not None and self.code == kernels.IDENTITY:
            return s * wick_moment(self.mix @ self.mix.T, indices)
        return None

    def mean_tensor(self, space: TensorSpace, kind: str, mc_n: int = 1_000_000, seed: int = 0):
        """``E[phi(G)^{⊗p}]`` on the coordinates of ``kind``.

        Exact for coordinatewise maps with a known coordinate law and for
        linear maps of the Gaussian; Monte Carlo otherwise.  Returns
        ``(vector, method)``.
        """
        idx = index_array(space, kind)
        vals = [self.exact_moment(row) for row in idx]
        if all(v is not None for v in vals):
            return np.array(vals, dtype=float), "analytic"
        rng = np.random.default_rng(seed)
        acc = np.zeros(idx.shape[0])
        done = 0
        while done < mc_n:
            b = min(100_000, mc_n - done)
            v = self(rng.standard_normal((b, self.n)))
            acc += np.prod(v[:, idx], axis=-1).sum(axis=0)
            done += b
        return acc / mc_n, "monte_carlo"

    def tensor_covariance(self, space: TensorSpace, kind: str):
        """Exact ``Cov(phi(G)^{⊗p})`` on ``kind`` coordinates, or ``None``."""
        idx = index_array(space, kind)
        D = idx.shape[0]
        mean = np.empty(D)
        cov = np.empty((D, D))
        for a in range(D):
            m = self.exact_moment(idx[a])
            if m is None:
                return None
            mean[a] = m
        for a in range(D):
            for b in range(a, D):
                cov[a, b] = cov[b, a] = self.exact_moment(np.concatenate((idx[a], idx[b])))
        return cov - np.outer(mean, mean)


class _LawSpec:
    """Adapter so :func:`mixed_moment` can use a bare coordinate law."""

    is_product = True

    def __init__(self, law):
        self._law = law

    def coordinate(self):
        return self._law


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def identity_map(n: int) -> TransportMap:
    return TransportMap(n, kernels.IDENTITY, [1.0], alpha=1.0, beta=0.0, coord_law=GaussianLaw(), label="identity", lipschitz=1.0)


def linear_map(A) -> TransportMap:
    """``x -> A x``; pushes the Gaussian to ``N(0, A A^T)``."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("linear_map needs a square matrix")
    op = float(np.linalg.norm(A, 2))
    return TransportMap(A.shape[0], kernels.IDENTITY, [1.0], alpha=op / 2, beta=0.0, mix=A, coord_law=GaussianLaw(), label="linear", lipschitz=op)


def polynomial_map(Q, n: int) -> TransportMap:
    """Coordinatewise ``x_i -> Q(x_i)`` for ascending coefficients ``Q``.

    Growth: ``|Q'(x)| <= C_Q (1 + |x|^(k-1))`` with ``C_Q = sum_i i |c_i|``.
    """
    c = np.trim_zeros(np.asarray(Q, dtype=float), "b")
    if c.size < 2:
        raise ValueError("polynomial of degree 0 is not a transport map")
    law = PolynomialLaw(c)
    k = law.degree
    mean, second = law.raw_moment(1), law.raw_moment(2)
    if abs(mean) > 1e-8 or abs(second - 1.0) > 1e-8:
        warnings.warn(f"Q_*gamma is not isotropic (mean {mean:.3g}, second moment {second:.3g})", stacklevel=2)
    cq = float(sum(i * abs(ci) for i, ci in enumerate(c)))
    prm = np.concatenate(([1.0, float(k)], c))
    lip = abs(c[1]) if k == 1 else None
    return TransportMap(n, kernels.POLY, prm, alpha=cq, beta=float(k - 1), coord_law=law, label=f"poly{k}", lipschitz=lip)


def monotone_rearrangement(spec: MeasureSpec) -> TransportMap:
    """Coordinatewise ``F^{-1} o Phi`` for a product measure."""
    if not spec.is_product:
        raise UnsupportedFamilyError(f"monotone rearrangement needs a product family, got {spec.family}")
    n = spec.n
    law = spec.coordinate()
    f = spec.family
    if f == "gaussian":
        return identity_map(n)
    if f == "uniform_box":
        # phi' = 2 sqrt3 psi(x) <= 2 sqrt3 psi(0) = 2 alpha
        return TransportMap(n, kernels.UNIFORM, [1.0], alpha=math.sqrt(3.0) * INV_SQRT2PI, beta=0.0, coord_law=law, label=f,
            lipschitz=2.0 * math.sqrt(3.0) * INV_SQRT2PI)
    if f == "laplace_product":
        # Mills ratio psi/(1-Phi) <= 1 + |x|, so phi' <= b (1 + |x|)
        return TransportMap(n, kernels.LAPLACE, [1.0], alpha=1.0 / math.sqrt(2.0), beta=1.0, coord_law=law, label=f)
    if f == "polynomial_pushforward":
        if not law.monotone:
            raise UnsupportedFamilyError("Q is not monotone; use polynomial_map(Q) as the transport map")
        return polynomial_map(spec.coeffs, n)
    # uniform_logconcave_unconditional: tabulated quantile map
    x = np.linspace(-kernels.CLAMP, kernels.CLAMP, TABLE_NODES)
    half = TABLE_NODES // 2
    xp = x[half:]
    vals_p = law.isf(special.ndtr(-xp))
    vals_p[0] = 0.0
    vals = np.concatenate((-vals_p[:0:-1], vals_p))
    dens = law.pdf(vals)
    if np.any(dens <= 0) or not np.all(np.isfinite(vals)):
        raise DerivativeSingularityError("target density vanishes at an interior quantile")
    ders = INV_SQRT2PI * np.exp(-0.5 * x * x) / dens
    c0, c2, c4 = law.log_density_coeffs()
    # Caffarelli: sigma^2-uniformly log-concave target => (1/sigma)-Lipschitz map
    alpha = 0.5 / math.sqrt(law.uniform_L)
    return TransportMap(
        n,
        kernels.TABLE,
        [1.0, c0, c2, c4],
        alpha=alpha,
        beta=0.0,
        table=(vals, ders, float(x[0]), float(x[1] - x[0])),
        coord_law=law,
        label=f,
        lipschitz=2.0 * alpha,
    )


def gaussian_sqrt_map(cov) -> TransportMap:
    """Brenier map ``x -> Sigma^{1/2} x`` onto ``N(0, Sigma)``."""
    w, v = np.linalg.eigh(np.asarray(cov, dtype=float))
    root = (v * np.sqrt(np.maximum(w, 0.0))) @ v.T
    return replace(linear_map(root), label="gaussian_sqrt")


def transport_for(spec: MeasureSpec) -> TransportMap:
    """A transport map ``phi`` with ``phi(G) ~ spec`` for any shipped family."""
    if spec.family == "toeplitz_gaussian_rows":
        return gaussian_sqrt_map(spec.covariance)
    if spec.family == "polynomial_pushforward":
        return polynomial_map(spec.coeffs, spec.n)
    return monotone_rearrangement(spec)


# ---------------------------------------------------------------------------
# growth of the Jacobian
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthBoundReport:
    eighth_moment: float
    stderr: float
    lemma_bound: float
    method: str
    clamped: int = 0


def lemma_constant(beta: float) -> float:
    """``C_beta = 256 * (4 beta)^(4 beta)`` (``= 256`` at ``beta = 0``)."""
    return 256.0 * (4.0 * beta) ** (4.0 * beta)


def lemma_bound(alpha: float, beta: float, n: int) -> float:
    """``C_beta alpha^8 log(n)^(4 beta)`` with ``log n`` floored at 1."""
    return lemma_constant(beta) * alpha**8 * max(math.log(n), 1.0) ** (4.0 * beta)


def opnorm_eighth_moment(tmap: TransportMap, mc_n: int = 10_000, seed: int = 0, chunk: int = 8192) -> GrowthBoundReport:
    """Monte Carlo ``E |Dphi(G)|_op^8`` next to its growth-lemma bound."""
    if mc_n < 1000:
        raise ValueError("mc_n must be at least 1000")
    lb = lemma_bound(tmap.alpha, tmap.beta, tmap.n)
    if tmap.code == kernels.IDENTITY:
        # constant Jacobian: no sampling needed
        op = abs(tmap.scale) * (1.0 if tmap.mix is None else float(np.linalg.norm(tmap.mix, 2)))
        return GrowthBoundReport(op**8, 0.0, lb, "exact")
    rng = np.random.default_rng(seed)
    vals = []
    clamped = 0
    done = 0
    while done < mc_n:
        b = min(chunk, mc_n - done)
        g = rng.standard_normal((b, tmap.n))
        clamped += tmap.clamped(g)
        vals.append(tmap.opnorm(g) ** 8)
        done += b
    v = np.concatenate(vals)
    return GrowthBoundReport(float(v.mean()), float(v.std(ddof=1) / math.sqrt(mc_n)), lb, "monte_carlo", clamped)
