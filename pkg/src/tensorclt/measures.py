"""Isotropic test measures on R^n.

Six families are available:

==================================  ============================================
``gaussian``                        standard Gaussian
``uniform_box``                     uniform on ``[-sqrt3, sqrt3]^n``
``laplace_product``                 i.i.d. Laplace coordinates, scale ``1/sqrt2``
``polynomial_pushforward``          i.i.d. ``Q(G)`` for a polynomial ``Q``
``uniform_logconcave_unconditional``  i.i.d. coordinates with density
                                    ``∝ exp(-z^2/2 - lam z^4)``, rescaled to unit variance
``toeplitz_gaussian_rows``          ``N(0, Sigma_s)``, ``Sigma_s[i, j] = s(|i - j|)``
==================================  ============================================

All but the last are isotropic product measures.  One-dimensional
marginals are exposed through :meth:`MeasureSpec.coordinate`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np
from scipy import optimize, special, stats

FAMILIES = (
    "gaussian",
    "uniform_box",
    "laplace_product",
    "polynomial_pushforward",
    "uniform_logconcave_unconditional",
    "toeplitz_gaussian_rows",
)
PRODUCT_FAMILIES = FAMILIES[:5]

SQRT3 = math.sqrt(3.0)
LAPLACE_SCALE = 1.0 / math.sqrt(2.0)
DEFAULT_COEFFS = (0.0, 0.0, 0.0, 1.0 / math.sqrt(15.0))  # Q(x) = x^3 / sqrt(15)
DEFAULT_LAM = 0.25


class SpectrumError(ValueError):
    """Toeplitz symbol does not give a positive definite matrix."""


class UnsupportedFamilyError(ValueError):
    """Operation needs a product family (or an analytic formula that is missing)."""


def _double_factorial_odd(k: int) -> float:
    """``(k-1)!! = E[G^k]`` for even ``k``."""
    out = 1
    for j in range(k - 1, 0, -2):
        out *= j
    return float(out)


def gaussian_moment(k: int) -> float:
    return 0.0 if k % 2 else _double_factorial_odd(k)


# ---------------------------------------------------------------------------
# one-dimensional laws
# ---------------------------------------------------------------------------


class CoordinateLaw:
    """A law on R with sampler, quantile and raw moments."""

    name = "abstract"
    symmetric = True
    log_concave = True

    def raw_moment(self, k: int) -> float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        return self.cdf(-np.asarray(x, dtype=float)) if self.symmetric else 1.0 - self.cdf(x)

    def quantile(self, u):
        raise NotImplementedError


class GaussianLaw(CoordinateLaw):
    name = "gaussian"

    def raw_moment(self, k):
        return gaussian_moment(k)

    def sample(self, rng, size):
        return rng.standard_normal(size)

    def pdf(self, x):
        return stats.norm.pdf(x)

    def cdf(self, x):
        return special.ndtr(x)

    def quantile(self, u):
        return special.ndtri(u)


class UniformLaw(CoordinateLaw):
    """Uniform on ``[-sqrt3, sqrt3]`` (variance ``a^2/3 = 1``)."""

    name = "uniform_box"

    def raw_moment(self, k):
        if k % 2:
            return 0.0
        return 3 ** (k // 2) / (k + 1)

    def sample(self, rng, size):
        return rng.uniform(-SQRT3, SQRT3, size)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= SQRT3, 0.5 / SQRT3, 0.0)

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) + SQRT3) / (2 * SQRT3), 0.0, 1.0)

    def quantile(self, u):
        return SQRT3 * (2 * np.asarray(u, dtype=float) - 1)


class LaplaceLaw(CoordinateLaw):
    """Laplace with scale ``b = 1/sqrt2`` so that the variance ``2 b^2`` is one."""

    name = "laplace_product"

    def raw_moment(self, k):
        if k % 2:
            return 0.0
        return math.factorial(k) / 2 ** (k // 2)

    def sample(self, rng, size):
        return rng.laplace(0.0, LAPLACE_SCALE, size)

    def pdf(self, x):
        return np.exp(-np.abs(np.asarray(x, dtype=float)) / LAPLACE_SCALE) / (2 * LAPLACE_SCALE)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        t = 0.5 * np.exp(-np.abs(x) / LAPLACE_SCALE)
        return np.where(x < 0, t, 1.0 - t)

    def sf(self, x):
        return self.cdf(-np.asarray(x, dtype=float))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            lo = LAPLACE_SCALE * np.log(2 * u)
            hi = -LAPLACE_SCALE * np.log(2 * (1 - u))
        return np.where(u < 0.5, lo, hi)


class PolynomialLaw(CoordinateLaw):
    """Law of ``Q(G)`` with ``Q`` given by ascending coefficients."""

    name = "polynomial_pushforward"
    log_concave = False

    def __init__(self, coeffs):
        c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
        if c.size < 2:
            raise ValueError("polynomial must have degree >= 1")
        self.coeffs = c
        self.degree = c.size - 1
        self.symmetric = bool(np.all(c[0::2] == 0.0))
        dq = np.polynomial.polynomial.polyder(c)
        crit = np.polynomial.polynomial.polyroots(dq) if dq.size > 1 else np.array([])
        crit = crit[np.abs(crit.imag) < 1e-12].real
        lead_positive = c[-1] > 0
        # strictly increasing iff Q' never changes sign and Q' has positive leading coefficient
        self.monotone = lead_positive and not any(
            np.polynomial.polynomial.polyval(t - 1e-6, dq) < 0 or np.polynomial.polynomial.polyval(t + 1e-6, dq) < 0
            for t in crit
        )

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def derivative(self, x):
        return np.polynomial.polynomial.polyval(x, np.polynomial.polynomial.polyder(self.coeffs))

    def raw_moment(self, k):
        if k == 0:
            return 1.0
        qk = np.polynomial.polynomial.polypow(self.coeffs, k)
        return float(sum(a * gaussian_moment(i) for i, a in enumerate(qk) if i % 2 == 0))

    def sample(self, rng, size):
        return self(rng.standard_normal(size))

    def _real_roots(self, y):
        c = self.coeffs.copy()
        c[0] -= y
        r = np.polynomial.polynomial.polyroots(c)
        return np.sort(r[np.abs(r.imag) < 1e-9].real)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.monotone:
            out = np.empty_like(x)
            flat = out.reshape(-1)
            for i, y in enumerate(x.reshape(-1)):
                r = self._real_roots(y)
                flat[i] = special.ndtr(r[-1]) if r.size else (0.0 if y < self.coeffs[0] else 1.0)
            return out
        out = np.empty_like(x)
        flat = out.reshape(-1)
        for i, y in enumerate(x.reshape(-1)):
            pts = np.concatenate(([-np.inf], self._real_roots(y), [np.inf]))
            tot = 0.0
            for a, b in zip(pts[:-1], pts[1:]):
                mid = 0.0 if not np.isfinite(a) and not np.isfinite(b) else (
                    b - 1.0 if not np.isfinite(a) else (a + 1.0 if not np.isfinite(b) else 0.5 * (a + b)))
                if self(mid) <= y:
                    tot += special.ndtr(b) - special.ndtr(a)
            flat[i] = tot
        return out

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        flat = out.reshape(-1)
        for i, y in enumerate(x.reshape(-1)):
            for r in self._real_roots(y):
                d = abs(self.derivative(r))
                if d > 0:
                    flat[i] += stats.norm.pdf(r) / d
        return out

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if self.monotone:
            return self(special.ndtri(u))
        out = np.empty_like(u)
        flat = out.reshape(-1)
        lo, hi = self(-40.0), self(40.0)
        for i, q in enumerate(u.reshape(-1)):
            a, b = min(lo, hi, -1.0), max(lo, hi, 1.0)
            flat[i] = optimize.brentq(lambda y: float(self.cdf(y)) - q, a, b, xtol=1e-13)
        return out


class QuarticLogConcaveLaw(CoordinateLaw):
    """Density ``∝ exp(-z^2/2 - lam z^4)`` rescaled to unit variance.

    With ``sigma`` the standard deviation of the unscaled law, ``X = Z/sigma``
    has ``-(log rho)'' >= sigma^2``, so ``X`` is ``sigma^2``-uniformly log-concave.
    Tail probabilities are tabulated on a fine grid with Gauss-Legendre panels
    and evaluated by cubic Hermite interpolation.
    """

    name = "uniform_logconcave_unconditional"

    def __init__(self, lam: float = DEFAULT_LAM, grid: int = 20001):
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        self.lam = float(lam)
        lam = self.lam
        zmax = 1.0
        while zmax**2 / 2 + lam * zmax**4 < 740.0:
            zmax *= 1.25
        z = np.linspace(0.0, zmax, grid)
        gx, gw = np.polynomial.legendre.leggauss(10)
        a, b = z[:-1, None], z[1:, None]
        nodes = 0.5 * (b - a) * gx + 0.5 * (a + b)
        panel = 0.5 * (b[:, 0] - a[:, 0]) * (self._raw_density(nodes) @ gw)
        sf_raw = np.concatenate((np.cumsum(panel[::-1])[::-1], [0.0]))
        self._z = z
        self._sf_raw = sf_raw
        self.norm = 2.0 * sf_raw[0]
        m2 = 2.0 * self._raw_integral(2)
        self.sigma = math.sqrt(m2 / self.norm)
        self._sf_interp = _HermiteTail(z, sf_raw, -self._raw_density(z))
        # (log S) is concave and decreasing for log-concave laws; invert it monotonically
        pos = sf_raw > 1e-300
        from scipy.interpolate import PchipInterpolator

        self._inv_logsf = PchipInterpolator(-np.log(sf_raw[pos]), z[pos])

    def _raw_density(self, z):
        z = np.asarray(z, dtype=float)
        return np.exp(-0.5 * z * z - self.lam * z**4)

    def _raw_integral(self, k):
        f = lambda t: t**k * math.exp(-0.5 * t * t - self.lam * t**4)
        return sum(
            _quad(f, lo, hi) for lo, hi in zip(np.linspace(0, self._z[-1], 9)[:-1], np.linspace(0, self._z[-1], 9)[1:])
        )

    @property
    def uniform_L(self) -> float:
        return self.sigma**2

    def log_density_coeffs(self):
        """Coefficients ``(c0, c2, c4)`` of ``log rho(y) = c0 + c2 y^2 + c4 y^4``."""
        s = self.sigma
        return (math.log(s / self.norm), -0.5 * s * s, -self.lam * s**4)

    def raw_moment(self, k):
        if k % 2:
            return 0.0
        if k == 2:
            return 1.0
        return 2.0 * self._raw_integral(k) / self.norm / self.sigma**k

    def sample(self, rng, size):
        # Gaussian proposal, accept with probability exp(-lam z^4)
        size = tuple(np.atleast_1d(size)) if not np.isscalar(size) else (int(size),)
        total = int(np.prod(size))
        out = np.empty(total)
        filled = 0
        while filled < total:
            need = total - filled
            batch = int(need * 1.3) + 64
            z = rng.standard_normal(batch)
            keep = z[rng.random(batch) < np.exp(-self.lam * z**4)]
            take = min(keep.size, need)
            out[filled : filled + take] = keep[:take]
            filled += take
        return (out / self.sigma).reshape(size)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return self.sigma * self._raw_density(self.sigma * x) / self.norm

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        z = np.abs(self.sigma * x)
        s = self._sf_interp(z) / self.norm
        return np.where(x >= 0, s, 1.0 - s)

    def cdf(self, x):
        return self.sf(-np.asarray(x, dtype=float))

    def isf(self, q):
        """Inverse survival function for ``q <= 1/2``, Newton-polished (2 steps)."""
        q = np.asarray(q, dtype=float)
        target = q * self.norm
        z = self._inv_logsf(-np.log(target))
        for _ in range(2):
            z = z + (self._sf_interp(z) - target) / self._raw_density(z)
        return z / self.sigma

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        upper = u >= 0.5
        q = np.where(upper, 1.0 - u, u)
        y = self.isf(np.maximum(q, 1e-300))
        return np.where(upper, y, -y)


class _HermiteTail:
    def __init__(self, x, y, dy):
        from scipy.interpolate import CubicHermiteSpline

        self._spl = CubicHermiteSpline(x, y, dy, extrapolate=False)
        self._xmax = x[-1]

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return np.where(z >= self._xmax, 0.0, np.nan_to_num(self._spl(np.minimum(z, self._xmax))))


def _quad(f, a, b):
    from scipy import integrate

    return integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-13, limit=200)[0]


@lru_cache(maxsize=16)
def _quartic_law(lam: float) -> QuarticLogConcaveLaw:
    return QuarticLogConcaveLaw(lam)


# ---------------------------------------------------------------------------
# measure specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeasureSpec:
    """A parameterised measure on R^n.  Immutable once built."""

    family: str
    n: int
    coeffs: tuple = DEFAULT_COEFFS
    lam: float = DEFAULT_LAM
    symbol: tuple = (1.0,)
    _cov: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "symbol", tuple(float(c) for c in self.symbol))
        if self.family == "toeplitz_gaussian_rows":
            object.__setattr__(self, "_cov", toeplitz_matrix(self.symbol, self.n))
        if self.family == "polynomial_pushforward":
            PolynomialLaw(self.coeffs)  # validates degree

    # -- structure ---------------------------------------------------------
    @property
    def is_product(self) -> bool:
        return self.family in PRODUCT_FAMILIES

    @property
    def is_isotropic(self) -> bool:
        return self.family != "toeplitz_gaussian_rows" or bool(np.allclose(self.covariance, np.eye(self.n)))

    @property
    def is_unconditional(self) -> bool:
        if self.family == "polynomial_pushforward":
            return self.coordinate().symmetric
        if self.family == "toeplitz_gaussian_rows":
            return all(s == 0.0 for s in self.symbol[1:])
        return True

    @property
    def is_log_concave(self) -> bool:
        return self.family != "polynomial_pushforward"

    @property
    def covariance(self) -> np.ndarray:
        if self._cov is not None:
            return self._cov.copy()
        return np.eye(self.n)

    @property
    def uniform_L(self) -> float | None:
        """Declared uniform log-concavity constant, when there is one."""
        if self.family == "gaussian":
            return 1.0
        if self.family == "uniform_logconcave_unconditional":
            return self.coordinate().uniform_L
        if self.family == "toeplitz_gaussian_rows":
            return float(1.0 / np.linalg.eigvalsh(self.covariance).max())
        return None

    @property
    def poincare_c(self) -> float | None:
        """Declared L1-Poincare (Cheeger) constant of a coordinate, when known."""
        return {"laplace_product": 1.0 / LAPLACE_SCALE, "gaussian": math.sqrt(2.0 / math.pi)}.get(self.family)

    @property
    def degree(self) -> int | None:
        return self.coordinate().degree if self.family == "polynomial_pushforward" else None

    def coordinate(self) -> CoordinateLaw:
        f = self.family
        if f == "gaussian":
            return GaussianLaw()
        if f == "uniform_box":
            return UniformLaw()
        if f == "laplace_product":
            return LaplaceLaw()
        if f == "polynomial_pushforward":
            return _poly_law(self.coeffs)
        if f == "uniform_logconcave_unconditional":
            return _quartic_law(self.lam)
        raise UnsupportedFamilyError(f"{f} is not a product family")

    # -- config blocks -----------------------------------------------------
    def to_block(self) -> str:
        lines = [f"family = {self.family}", f"n = {self.n}"]
        if self.family == "polynomial_pushforward":
            lines.append("coeffs = " + ", ".join(repr(c) for c in self.coeffs))
        elif self.family == "uniform_logconcave_unconditional":
            lines.append(f"lam = {self.lam!r}")
        elif self.family == "toeplitz_gaussian_rows":
            lines.append("symbol = " + ", ".join(repr(c) for c in self.symbol))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_block(cls, block) -> "MeasureSpec":
        """Parse ``key = value`` lines (or a mapping with the same keys)."""
        if isinstance(block, str):
            items = {}
            for raw in block.splitlines():
                line = raw.strip()
                if not line or line.startswith(("#", ";", "[")):
                    continue
                if "=" not in line:
                    raise ValueError(f"expected key = value, got {raw!r}")
                k, v = line.split("=", 1)
                items[k.strip()] = v.strip()
        else:
            items = dict(block)
        kw = {"family": items.pop("family"), "n": int(items.pop("n", 1))}
        if "coeffs" in items:
            kw["coeffs"] = _floats(items.pop("coeffs"))
        if "lam" in items:
            kw["lam"] = float(items.pop("lam"))
        if "symbol" in items:
            kw["symbol"] = _floats(items.pop("symbol"))
        if items:
            raise ValueError(f"unknown measure keys: {sorted(items)}")
        return cls(**kw)

    def with_n(self, n: int) -> "MeasureSpec":
        return MeasureSpec(self.family, n, self.coeffs, self.lam, self.symbol)


def _floats(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(t) for t in text)
    return tuple(float(t) for t in str(text).split(",") if t.strip())


@lru_cache(maxsize=32)
def _poly_law(coeffs: tuple) -> PolynomialLaw:
    return PolynomialLaw(coeffs)


def toeplitz_matrix(symbol, size: int, tol: float = 1e-10) -> np.ndarray:
    """``Sigma[i, j] = s(|i - j|)`` (zero past the end of ``symbol``), checked positive definite."""
    s = np.zeros(size)
    sym = np.asarray(symbol, dtype=float)[:size]
    s[: sym.size] = sym
    if sym.size == 0 or s[0] != 1.0:
        raise ValueError("Toeplitz symbol must start with s(0) = 1")
    from scipy.linalg import toeplitz

    mat = toeplitz(s)
    lo = np.linalg.eigvalsh(mat).min()
    if lo < tol:
        raise SpectrumError(f"Toeplitz matrix is not positive definite (min eigenvalue {lo:.3e})")
    return mat


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def sample(spec: MeasureSpec, count: int, seed: int) -> np.ndarray:
    """``count`` i.i.d. draws as a ``(count, n)`` array; deterministic in ``(spec, count, seed)``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    return sample_rng(spec, count, rng)


def sample_rng(spec: MeasureSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    if spec.family == "toeplitz_gaussian_rows":
        chol = np.linalg.cholesky(spec.covariance)
        return rng.standard_normal((count, spec.n)) @ chol.T
    return spec.coordinate().sample(rng, (count, spec.n))


def coordinate_quantile(spec: MeasureSpec, u):
    """Quantile of one coordinate; defined for product families only."""
    if not spec.is_product:
        raise UnsupportedFamilyError(f"coordinate_quantile needs a product family, got {spec.family}")
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError("u must lie in (0, 1)")
    out = spec.coordinate().quantile(u)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class MomentReport:
    moment_order: int
    value: float
    method: str
    mc_stderr: float | None = None


def _sum_moments(moment_seqs, k):
    """Moments ``E[S^r]``, r <= k, of a sum of independent terms with given moment sequences."""
    acc = [1.0] + [0.0] * k
    for seq in moment_seqs:
        new = [0.0] * (k + 1)
        for r in range(k + 1):
            new[r] = sum(math.comb(r, i) * acc[i] * seq[r - i] for i in range(r + 1))
        acc = new
    return acc


def abs_moment(spec: MeasureSpec, m: int, mode: str = "analytic", mc_n: int = 100_000, seed: int = 0) -> MomentReport:
    """``E|X|_2^m`` for even ``m`` in ``2..24``."""
    if m % 2 or not 2 <= m <= 24:
        raise ValueError("m must be an even integer in [2, 24]")
    if mode == "mc":
        x = sample(spec, mc_n, seed)
        vals = np.sum(x * x, axis=1) ** (m // 2)
        return MomentReport(m, float(vals.mean()), "monte_carlo", float(vals.std(ddof=1) / math.sqrt(mc_n)))
    if mode != "analytic":
        raise ValueError("mode must be 'analytic' or 'mc'")
    k = m // 2
    n = spec.n
    if spec.family == "gaussian":
        val = 1
        for i in range(k):
            val *= n + 2 * i
        return MomentReport(m, float(val), "analytic")
    if spec.is_isotropic and k == 1:
        return MomentReport(m, float(n), "analytic")
    if spec.family == "toeplitz_gaussian_rows":
        lam = np.linalg.eigvalsh(spec.covariance)
        seqs = [[l**r * _double_factorial_odd(2 * r) for r in range(k + 1)] for l in lam]
        return MomentReport(m, float(_sum_moments(seqs, k)[k]), "analytic")
    law = spec.coordinate()
    seq = [law.raw_moment(2 * r) for r in range(k + 1)]
    return MomentReport(m, float(_sum_moments([seq] * n, k)[k]), "analytic")


def var_of_square(spec: MeasureSpec, mode: str = "analytic", mc_n: int = 400_000, seed: int = 0):
    """``Var(Y^2) = E[Y^4] - 1`` for one isotropic coordinate ``Y``.

    In ``mc`` mode returns ``(estimate, stderr)``.
    """
    if not spec.is_product:
        raise UnsupportedFamilyError("var_of_square needs a product family")
    law = spec.coordinate()
    if mode == "mc":
        y = law.sample(np.random.default_rng(seed), mc_n)
        v = (y * y - 1.0) ** 2
        # E[(Y^2 - 1)^2] = Var(Y^2) when E[Y^2] = 1
        return float(v.mean()), float(v.std(ddof=1) / math.sqrt(mc_n))
    return law.raw_moment(4) - 1.0


def mixed_moment(spec: MeasureSpec, indices) -> float:
    """``E[prod_i X_{j_i}]`` for 0-based coordinates ``indices`` (repeats allowed)."""
    indices = [int(j) for j in indices]
    if not indices:
        return 1.0
    if spec.is_product:
        law = spec.coordinate()
        out = 1.0
        for j in set(indices):
            out *= law.raw_moment(indices.count(j))
            if out == 0.0:
                return 0.0
        return out
    return wick_moment(spec.covariance, indices)


def wick_moment(cov: np.ndarray, indices) -> float:
    """Isserlis sum over perfect matchings for a centred Gaussian."""
    indices = list(indices)
    if len(indices) % 2:
        return 0.0
    if not indices:
        return 1.0
    first, rest = indices[0], indices[1:]
    total = 0.0
    for i, j in enumerate(rest):
        c = cov[first, j]
        if c != 0.0:
            total += c * wick_moment(cov, rest[:i] + rest[i + 1 :])
    return total


def odd_mixed_moment_probes(n: int, max_power: int = 2):
    """Multi-indices with distinct coordinates, the first raised to power 1.

    These moments vanish for unconditional isotropic measures.
    """
    out = []
    for k in range(2, min(n, 3) + 1):
        for js in combinations(range(n), k):
            for pw in range(1, max_power + 1):
                out.append([js[0]] + [j for j in js[1:] for _ in range(pw)])
    return out
