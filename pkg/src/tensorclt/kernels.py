"""Hot loops: coordinate transport maps, Stein-kernel accumulation, Wishart sums.

Every kernel has a numba version (``*_nb``) and a numpy version (``*_np``)
with identical signatures; the public wrappers pick one according to
:data:`tensorclt._accel.USE_NUMBA`.

A transport map is passed to the kernels as the tuple ``margs``::

    (code, prm, tab_vals, tab_ders, tab_x0, tab_h, mix, has_mix)

``code`` selects the coordinate map ``g`` (same for every coordinate), ``prm[0]``
is a multiplicative scale, ``mix`` an ``n x n`` matrix applied after the
coordinate maps when ``has_mix`` is true.
"""

import math

import numpy as np
from scipy import special

from . import _accel
from ._accel import njit

IDENTITY, UNIFORM, LAPLACE, POLY, TABLE = 0, 1, 2, 3, 4
CLAMP = 8.0

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)
INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)
LAPLACE_B = 1.0 / SQRT2


# ---------------------------------------------------------------------------
# numba
# ---------------------------------------------------------------------------


@njit
def _coord_nb(code, prm, tv, td, x0, h, x):
    s = prm[0]
    if code == IDENTITY:
        return s * x, s
    if code == POLY:
        k = int(prm[1])
        val = 0.0
        der = 0.0
        for i in range(k, -1, -1):
            val = val * x + prm[2 + i]
        for i in range(k, 0, -1):
            der = der * x + i * prm[2 + i]
        return s * val, s * der
    if x > CLAMP:
        x = CLAMP
    elif x < -CLAMP:
        x = -CLAMP
    dens = INV_SQRT2PI * math.exp(-0.5 * x * x)
    if code == UNIFORM:
        return s * SQRT3 * math.erf(x / SQRT2), s * 2.0 * SQRT3 * dens
    if code == LAPLACE:
        t = math.erfc(abs(x) / SQRT2)  # 2 * min(u, 1 - u)
        v = -LAPLACE_B * math.log(t)
        if x < 0:
            v = -v
        return s * v, s * LAPLACE_B * dens / (0.5 * t)
    # TABLE: cubic Hermite on a uniform grid, derivative by the density ratio
    pos = (x - x0) / h
    i = int(math.floor(pos))
    last = tv.shape[0] - 2
    if i < 0:
        i = 0
    elif i > last:
        i = last
    t = pos - i
    t2 = t * t
    t3 = t2 * t
    val = (
        (2 * t3 - 3 * t2 + 1) * tv[i]
        + (t3 - 2 * t2 + t) * h * td[i]
        + (-2 * t3 + 3 * t2) * tv[i + 1]
        + (t3 - t2) * h * td[i + 1]
    )
    y2 = val * val
    logrho = prm[1] + prm[2] * y2 + prm[3] * y2 * y2
    return s * val, s * dens / math.exp(logrho)


@njit
def _map_nb(code, prm, tv, td, x0, h, mix, has_mix, x, g, gp, phi, dphi):
    n = x.shape[0]
    for i in range(n):
        a, b = _coord_nb(code, prm, tv, td, x0, h, x[i])
        g[i] = a
        gp[i] = b
    if has_mix:
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += mix[i, j] * g[j]
                dphi[i, j] = mix[i, j] * gp[j]
            phi[i] = acc
    else:
        for i in range(n):
            phi[i] = g[i]
            for j in range(n):
                dphi[i, j] = 0.0
            dphi[i, i] = gp[i]


@njit
def _tpjac_nb(phi, dphi, idx, out):
    D, p = idx.shape
    n = dphi.shape[1]
    for a in range(D):
        for k in range(n):
            out[a, k] = 0.0
        for i in range(p):
            prod = 1.0
            for l in range(p):
                if l != i:
                    prod *= phi[idx[a, l]]
            if prod != 0.0:
                row = idx[a, i]
                for k in range(n):
                    out[a, k] += prod * dphi[row, k]


@njit
def map_eval_nb(code, prm, tv, td, x0, h, mix, has_mix, x):
    m, n = x.shape
    phi = np.empty((m, n))
    dphi = np.empty((m, n, n))
    g = np.empty(n)
    gp = np.empty(n)
    for r in range(m):
        _map_nb(code, prm, tv, td, x0, h, mix, has_mix, x[r], g, gp, phi[r], dphi[r])
    return phi, dphi


@njit
def stein_pass_nb(y, Z, u, w, code, prm, tv, td, x0, h, mix, has_mix, idx, center):
    m, n = y.shape
    K = Z.shape[1]
    J = u.shape[0]
    D, p = idx.shape
    half = K // 2
    Yt = np.empty((m, D))
    ta = np.zeros((m, D, D))
    tb = np.zeros((m, D, D))
    g = np.empty(n)
    gp = np.empty(n)
    phi = np.empty(n)
    dphi = np.empty((n, n))
    jac = np.empty((D, n))
    jy = np.empty((D, n))
    acc_a = np.empty((D, n))
    acc_b = np.empty((D, n))
    x = np.empty(n)
    sig = np.empty(J)
    for j in range(J):
        sig[j] = math.sqrt(max(0.0, 1.0 - u[j] * u[j]))
    for r in range(m):
        _map_nb(code, prm, tv, td, x0, h, mix, has_mix, y[r], g, gp, phi, dphi)
        _tpjac_nb(phi, dphi, idx, jy)
        for a in range(D):
            prod = 1.0
            for l in range(p):
                prod *= phi[idx[a, l]]
            Yt[r, a] = prod - center[a]
        acc_a[:, :] = 0.0
        acc_b[:, :] = 0.0
        for j in range(J):
            wk = w[j] / half
            for k in range(K):
                for i in range(n):
                    x[i] = u[j] * y[r, i] + sig[j] * Z[r, k, i]
                _map_nb(code, prm, tv, td, x0, h, mix, has_mix, x, g, gp, phi, dphi)
                _tpjac_nb(phi, dphi, idx, jac)
                if k < half:
                    for a in range(D):
                        for c in range(n):
                            acc_a[a, c] += wk * jac[a, c]
                else:
                    for a in range(D):
                        for c in range(n):
                            acc_b[a, c] += wk * jac[a, c]
        for a in range(D):
            for e in range(D):
                sa = 0.0
                sb = 0.0
                for c in range(n):
                    sa += acc_a[a, c] * jy[e, c]
                    sb += acc_b[a, c] * jy[e, c]
                ta[r, a, e] = sa
                tb[r, a, e] = sb
    return Yt, ta, tb


@njit
def wishart_sum_nb(X, w, idx, center, homogeneous):
    r, d, n = X.shape
    D, p = idx.shape
    out = np.zeros((r, D))
    for q in range(r):
        for a in range(D):
            acc = 0.0
            for i in range(d):
                prod = 1.0
                for l in range(p):
                    prod *= X[q, i, idx[a, l]]
                if homogeneous:
                    acc += prod - center[a]
                else:
                    acc += w[i] * (prod - center[a])
            out[q, a] = acc / math.sqrt(d) if homogeneous else acc
    return out


# ---------------------------------------------------------------------------
# numpy
# ---------------------------------------------------------------------------


def _coord_np(code, prm, tv, td, x0, h, x):
    s = prm[0]
    x = np.asarray(x, dtype=float)
    if code == IDENTITY:
        return s * x, np.full_like(x, s)
    if code == POLY:
        k = int(prm[1])
        c = prm[2 : 3 + k]
        val = np.zeros_like(x)
        der = np.zeros_like(x)
        for i in range(k, -1, -1):
            val = val * x + c[i]
        for i in range(k, 0, -1):
            der = der * x + i * c[i]
        return s * val, s * der
    x = np.clip(x, -CLAMP, CLAMP)
    dens = INV_SQRT2PI * np.exp(-0.5 * x * x)
    if code == UNIFORM:
        return s * SQRT3 * special.erf(x / SQRT2), s * 2.0 * SQRT3 * dens
    if code == LAPLACE:
        t = special.erfc(np.abs(x) / SQRT2)
        v = -LAPLACE_B * np.log(t)
        return s * np.where(x < 0, -v, v), s * LAPLACE_B * dens / (0.5 * t)
    pos = (x - x0) / h
    i = np.clip(np.floor(pos).astype(np.int64), 0, tv.shape[0] - 2)
    t = pos - i
    t2 = t * t
    t3 = t2 * t
    val = (
        (2 * t3 - 3 * t2 + 1) * tv[i]
        + (t3 - 2 * t2 + t) * h * td[i]
        + (-2 * t3 + 3 * t2) * tv[i + 1]
        + (t3 - t2) * h * td[i + 1]
    )
    y2 = val * val
    return s * val, s * dens / np.exp(prm[1] + prm[2] * y2 + prm[3] * y2 * y2)


def map_eval_np(code, prm, tv, td, x0, h, mix, has_mix, x):
    g, gp = _coord_np(code, prm, tv, td, x0, h, x)
    if has_mix:
        return g @ mix.T, mix * gp[..., None, :]
    n = x.shape[-1]
    dphi = np.zeros(x.shape + (n,))
    ar = np.arange(n)
    dphi[..., ar, ar] = gp
    return g, dphi


def _tpjac_np(phi, dphi, idx):
    p = idx.shape[1]
    vals = phi[..., idx]
    out = 0.0
    for i in range(p):
        others = np.ones(vals.shape[:-1])
        for l in range(p):
            if l != i:
                others = others * vals[..., l]
        out = out + others[..., None] * dphi[..., idx[:, i], :]
    return out


def stein_pass_np(y, Z, u, w, code, prm, tv, td, x0, h, mix, has_mix, idx, center, block=32):
    m, n = y.shape
    K = Z.shape[1]
    half = K // 2
    D = idx.shape[0]
    sig = np.sqrt(np.maximum(0.0, 1.0 - u * u))
    wk = w / half
    Yt = np.empty((m, D))
    ta = np.empty((m, D, D))
    tb = np.empty((m, D, D))
    for lo in range(0, m, block):
        sl = slice(lo, min(m, lo + block))
        yb = y[sl]
        phi_y, dphi_y = map_eval_np(code, prm, tv, td, x0, h, mix, has_mix, yb)
        jy = _tpjac_np(phi_y, dphi_y, idx)
        Yt[sl] = np.prod(phi_y[..., idx], axis=-1) - center
        x = u[None, :, None, None] * yb[:, None, None, :] + sig[None, :, None, None] * Z[sl][:, None, :, :]
        phi, dphi = map_eval_np(code, prm, tv, td, x0, h, mix, has_mix, x)
        jac = _tpjac_np(phi, dphi, idx)  # (b, J, K, D, n)
        acc_a = np.einsum("j,bjkdn->bdn", wk, jac[:, :, :half])
        acc_b = np.einsum("j,bjkdn->bdn", wk, jac[:, :, half:])
        ta[sl] = np.einsum("bdn,ben->bde", acc_a, jy)
        tb[sl] = np.einsum("bdn,ben->bde", acc_b, jy)
    return Yt, ta, tb


def wishart_sum_np(X, w, idx, center, homogeneous):
    mono = np.prod(X[..., idx], axis=-1) - center  # (r, d, D)
    if homogeneous:
        return mono.sum(axis=1) / math.sqrt(X.shape[1])
    return np.einsum("i,rid->rd", w, mono)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def _pick(nb, np_):
    return nb if _accel.USE_NUMBA else np_


def map_eval(margs, x):
    """Values ``(m, n)`` and Jacobians ``(m, n, n)`` of a transport map at ``x`` ``(m, n)``."""
    x = np.ascontiguousarray(x, dtype=float)
    return _pick(map_eval_nb, map_eval_np)(*margs, x)


def stein_pass(y, Z, u, w, margs, idx, center, use_numba=None):
    """Per-point ``(Y, tau_a, tau_b)`` for the OU-semigroup kernel estimator.

    ``tau_a`` and ``tau_b`` use the first and second half of the inner draws
    ``Z`` respectively; their average is the full estimator.
    """
    fn = stein_pass_nb if (_accel.USE_NUMBA if use_numba is None else use_numba) else stein_pass_np
    return fn(
        np.ascontiguousarray(y), np.ascontiguousarray(Z), u, w, *margs, idx, np.ascontiguousarray(center, dtype=float)
    )


def wishart_sum(X, w, idx, center, homogeneous, use_numba=None):
    fn = wishart_sum_nb if (_accel.USE_NUMBA if use_numba is None else use_numba) else wishart_sum_np
    return fn(np.ascontiguousarray(X), np.ascontiguousarray(w, dtype=float), idx, np.ascontiguousarray(center, dtype=float), homogeneous)
