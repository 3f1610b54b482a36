"""Index bookkeeping for tensor powers of R^n.

Three coordinate systems are supported for a tensor of order ``p``:

``full``
    all ``n**p`` multi-indices,
``symmetric``
    nondecreasing multi-indices ``j_1 <= ... <= j_p`` (monomial basis of
    ``Sym^p``),
``principal``
    strictly increasing multi-indices ``j_1 < ... < j_p``.

Multi-indices are ordered lexicographically in every kind, which is the
order produced by :mod:`itertools`.  Public enumeration uses 1-based tuples;
the array helpers used by the numerical code are 0-based.

Coordinates are plain monomials ``v_{j_1} ... v_{j_p}`` with no
multiplicity weights, so ``x^{⊗p}`` and its symmetrised version agree on
every materialised coordinate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

KINDS = ("full", "symmetric", "principal")


class EmptySpaceError(ValueError):
    """Principal coordinates requested with ``p > n``."""


@dataclass(frozen=True)
class TensorSpace:
    n: int
    p: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"p must be an integer >= 1, got {self.p!r}")

    @property
    def dim_full(self) -> int:
        return self.n**self.p

    @property
    def dim_sym(self) -> int:
        return comb(self.n + self.p - 1, self.p)

    @property
    def dim_principal(self) -> int:
        return comb(self.n, self.p)

    def dim(self, kind: str) -> int:
        _check_kind(kind)
        return {"full": self.dim_full, "symmetric": self.dim_sym, "principal": self.dim_principal}[kind]


def _check_kind(kind):
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")


@lru_cache(maxsize=256)
def _index_array(n: int, p: int, kind: str) -> np.ndarray:
    if kind == "full":
        it = itertools.product(range(n), repeat=p)
    elif kind == "symmetric":
        it = itertools.combinations_with_replacement(range(n), p)
    else:
        it = itertools.combinations(range(n), p)
    arr = np.array(list(it), dtype=np.int64).reshape(-1, p)
    arr.setflags(write=False)
    return arr


def index_array(space: TensorSpace, kind: str) -> np.ndarray:
    """0-based ``(D, p)`` int64 array of the multi-indices of ``kind``."""
    _check_kind(kind)
    if kind == "principal" and space.p > space.n:
        raise EmptySpaceError(f"no principal tensors of order p={space.p} in dimension n={space.n}")
    return _index_array(space.n, space.p, kind)


def enumerate_indices(space: TensorSpace, kind: str) -> list[tuple[int, ...]]:
    """Ordered list of 1-based multi-indices of the given kind.

    >>> enumerate_indices(TensorSpace(4, 2), "principal")[:3]
    [(1, 2), (1, 3), (1, 4)]
    """
    return [tuple(int(j) + 1 for j in row) for row in index_array(space, kind)]


def rank_index(index, space: TensorSpace, kind: str) -> int:
    """Position of a 1-based multi-index in :func:`enumerate_indices` order.

    Closed form via binomial coefficients; the inverse of enumeration.
    """
    _check_kind(kind)
    n, p = space.n, space.p
    idx = [int(j) - 1 for j in index]
    if len(idx) != p or min(idx) < 0 or max(idx) >= n:
        raise ValueError(f"{index!r} is not a multi-index of order {p} over 1..{n}")
    if kind == "full":
        r = 0
        for j in idx:
            r = r * n + j
        return r
    if kind == "symmetric":
        if any(a > b for a, b in zip(idx, idx[1:])):
            raise ValueError(f"{index!r} is not nondecreasing")
        # stars and bars: nondecreasing tuples over n <-> increasing tuples over n + p - 1
        idx = [j + i for i, j in enumerate(idx)]
        n = n + p - 1
    elif any(a >= b for a, b in zip(idx, idx[1:])):
        raise ValueError(f"{index!r} is not strictly increasing")
    # lexicographic rank of a combination
    r, prev = 0, -1
    for i, j in enumerate(idx):
        for v in range(prev + 1, j):
            r += comb(n - 1 - v, p - 1 - i)
        prev = j
    return r


def tensor_power(v, space: TensorSpace, kind: str) -> np.ndarray:
    """Monomial coordinates ``prod_i v[j_i]`` of ``v^{⊗p}``; ``v`` may be batched ``(..., n)``."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != space.n:
        raise ValueError(f"vector has length {v.shape[-1]}, space has n={space.n}")
    idx = index_array(space, kind)
    return np.prod(v[..., idx], axis=-1)


def tensor_power_jacobian(v, dphi, space: TensorSpace, kind: str) -> np.ndarray:
    """Jacobian rows of ``x -> phi(x)^{⊗p}`` by the Leibniz rule.

    Parameters
    ----------
    v : (..., n) array
        The value ``phi(x)``.
    dphi : (..., n, n) array
        The Jacobian ``Dphi(x)``.

    Returns
    -------
    (..., D, n) array with entry ``[(j_1..j_p), k] = sum_i d_k phi_{j_i} prod_{l != i} phi_{j_l}``.
    Only the rows of ``kind`` are formed.
    """
    v = np.asarray(v, dtype=float)
    dphi = np.asarray(dphi, dtype=float)
    n = space.n
    if v.shape[-1] != n or dphi.shape[-2:] != (n, n):
        raise ValueError(f"shape mismatch: v {v.shape}, dphi {dphi.shape}, n={n}")
    idx = index_array(space, kind)
    p = space.p
    vals = v[..., idx]  # (..., D, p)
    out = np.zeros(vals.shape[:-1] + (n,))
    for i in range(p):
        others = np.ones(vals.shape[:-1])
        for l in range(p):
            if l != i:
                others = others * vals[..., l]
        out += others[..., None] * dphi[..., idx[:, i], :]
    return out


def kron_opnorm_bound(phi_norm: float, dphi_opnorm: float, p: int) -> float:
    """``p * |phi|^(p-1) * |Dphi|_op``, dominating ``|D(phi^{⊗p})|_op``."""
    if phi_norm < 0 or dphi_opnorm < 0:
        raise ValueError("norms must be nonnegative")
    return p * phi_norm ** (p - 1) * dphi_opnorm
