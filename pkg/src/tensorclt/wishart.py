"""Wishart tensors, their covariance structure, and whitening.

A draw of the (weighted) Wishart tensor is

    W = sum_i alpha_i (X_i^{⊗p} - E[X^{⊗p}]) / |alpha|_2

restricted to the monomial coordinates of ``kind``; equal weights give the
usual ``1/sqrt(d)`` normalisation and take a dedicated code path.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .measures import MeasureSpec, mixed_moment, sample_rng, toeplitz_matrix
from .symtensor import TensorSpace, index_array

MAGIC = b"WSHT"
HEADER = struct.Struct("<4sIII")  # magic, reps, D, reserved
BLOCK_ELEMS = 4_000_000  # floats per sampling block


class WhiteningError(ValueError):
    """Covariance too close to singular to whiten."""


@dataclass(frozen=True)
class WishartConfig:
    spec: MeasureSpec
    p: int
    d: int
    kind: str = "principal"
    weights: tuple | None = None
    space: TensorSpace = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be positive")
        object.__setattr__(self, "space", TensorSpace(self.spec.n, self.p))
        index_array(self.space, self.kind)  # raises for p > n principal
        if self.weights is not None:
            w = tuple(float(a) for a in self.weights)
            if len(w) != self.d:
                raise ValueError(f"need {self.d} weights, got {len(w)}")
            if min(w) <= 0:
                raise ValueError("weights must be positive")
            object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def dim(self) -> int:
        return self.space.dim(self.kind)

    @property
    def homogeneous(self) -> bool:
        """No weights, or all weights equal (the normalisation cancels any constant)."""
        return self.weights is None or len(set(self.weights)) == 1

    @property
    def alpha(self) -> np.ndarray:
        return np.ones(self.d) if self.weights is None else np.asarray(self.weights)

    @property
    def normalized_weights(self) -> np.ndarray:
        a = self.alpha
        return a / np.linalg.norm(a)

    @property
    def weight_ratio(self) -> float:
        """``|alpha|_4^4 / |alpha|_2^4``; exactly ``1/d`` when homogeneous."""
        return 1.0 / self.d if self.homogeneous else weight_ratio(self.alpha)


def weight_ratio(alpha) -> float:
    a = np.asarray(alpha, dtype=float)
    return float(np.sum(a**4) / np.sum(a**2) ** 2)


def tensor_mean(spec: MeasureSpec, space: TensorSpace, kind: str) -> np.ndarray:
    """Exact ``E[X^{⊗p}]`` on ``kind`` coordinates (products of 1-D moments, or Wick)."""
    return np.array([mixed_moment(spec, row) for row in index_array(space, kind)])


def wishart_sample(cfg: WishartConfig, reps: int, seed: int = 0, use_numba=None) -> np.ndarray:
    """``reps`` independent draws of the Wishart tensor, shape ``(reps, D)``.

    Replica ``q`` uses the stream ``default_rng([seed, q])`` for its ``d``
    vectors, so any block of replicas can be recomputed on its own.
    """
    if reps < 1:
        raise ValueError("reps must be positive")
    idx = index_array(cfg.space, cfg.kind)
    center = tensor_mean(cfg.spec, cfg.space, cfg.kind)
    w = cfg.normalized_weights
    out = np.empty((reps, idx.shape[0]))
    block = max(1, BLOCK_ELEMS // (cfg.d * cfg.n))
    for lo in range(0, reps, block):
        hi = min(reps, lo + block)
        X = np.stack([sample_rng(cfg.spec, cfg.d, np.random.default_rng([seed, q])) for q in range(lo, hi)])
        out[lo:hi] = kernels.wishart_sum(X, w, idx, center, cfg.homogeneous, use_numba)
    return out


# ---------------------------------------------------------------------------
# covariance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CovarianceModel:
    """Covariance of one Wishart coordinate vector and its inverse square root.

    ``representation`` is ``identity``, ``diagonal`` (``values`` is the
    diagonal) or ``dense`` (``values`` is the matrix).
    """

    dim: int
    representation: str
    values: np.ndarray | None
    method: str

    @property
    def matrix(self) -> np.ndarray:
        if self.representation == "identity":
            return np.eye(self.dim)
        if self.representation == "diagonal":
            return np.diag(self.values)
        return self.values

    @property
    def eigenvalues(self) -> np.ndarray:
        if self.representation == "identity":
            return np.ones(self.dim)
        if self.representation == "diagonal":
            return np.sort(self.values)
        return np.linalg.eigvalsh(self.values)

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues.min())

    @property
    def opnorm_A(self) -> float:
        """``|Sigma^{-1/2}|_op``."""
        return 1.0 / math.sqrt(self.min_eigenvalue)

    @property
    def whitener(self) -> np.ndarray:
        if self.representation == "identity":
            return np.eye(self.dim)
        if self.representation == "diagonal":
            return np.diag(1.0 / np.sqrt(self.values))
        lam, vec = np.linalg.eigh(self.values)
        return (vec / np.sqrt(lam)) @ vec.T


def _exact_covariance(spec: MeasureSpec, idx: np.ndarray) -> np.ndarray:
    mean = np.array([mixed_moment(spec, row) for row in idx])
    D = idx.shape[0]
    cov = np.empty((D, D))
    for a in range(D):
        for b in range(a, D):
            cov[a, b] = cov[b, a] = mixed_moment(spec, np.concatenate((idx[a], idx[b])))
    return cov - np.outer(mean, mean)


def covariance_model(cfg: WishartConfig, reps: int | None = None, seed: int = 0, min_eig: float = 1e-8) -> CovarianceModel:
    """Covariance of ``X^{⊗p}`` on ``kind`` coordinates (equal to that of ``W``).

    Product families: identity for principal coordinates, diagonal for
    symmetric ``p = 2``, exact dense matrix from 1-D moments otherwise.
    Other families: empirical covariance of ``reps >= 50 D`` Wishart draws,
    shrunk toward its diagonal by ``10 / reps``.
    """
    spec, D = cfg.spec, cfg.dim
    idx = index_array(cfg.space, cfg.kind)
    if spec.is_product:
        if cfg.kind == "principal" or cfg.p == 1:
            model = CovarianceModel(D, "identity", None, "analytic")
        elif cfg.kind == "symmetric" and cfg.p == 2:
            v4 = spec.coordinate().raw_moment(4) - 1.0
            diag = np.where(idx[:, 0] == idx[:, 1], v4, 1.0)
            model = CovarianceModel(D, "diagonal", diag, "analytic")
        else:
            model = CovarianceModel(D, "dense", _exact_covariance(spec, idx), "analytic")
    else:
        reps = max(50 * D, 2000) if reps is None else reps
        if reps < 50 * D:
            raise ValueError(f"empirical covariance needs reps >= 50*D = {50 * D}")
        S = np.cov(wishart_sample(cfg, reps, seed), rowvar=False).reshape(D, D)
        lam = 10.0 / reps
        S = (1.0 - lam) * S + lam * np.diag(np.diag(S))
        model = CovarianceModel(D, "dense", S, "empirical")
    if model.min_eigenvalue < min_eig:
        raise WhiteningError(f"covariance min eigenvalue {model.min_eigenvalue:.3e} below {min_eig:g}")
    return model


def whiten(samples, model: CovarianceModel) -> np.ndarray:
    """Apply ``Sigma^{-1/2}`` to each row."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[-1] != model.dim:
        raise ValueError(f"samples have {samples.shape[-1]} coordinates, model has {model.dim}")
    if model.representation == "identity":
        return samples
    if model.representation == "diagonal":
        return samples / np.sqrt(model.values)
    return samples @ model.whitener  # whitener is symmetric


# ---------------------------------------------------------------------------
# dependent columns: Toeplitz Gram matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ToeplitzWeightReport:
    eigenvalues: np.ndarray
    ratio: float  # |alpha|_4^4 / |alpha|_2^4 from the eigenvalues
    trace_ratio: float  # Tr(Sigma^4) / Tr(Sigma^2)^2


def toeplitz_weights(symbol, d: int) -> ToeplitzWeightReport:
    sigma = toeplitz_matrix(symbol, d)
    alpha = np.linalg.eigvalsh(sigma)
    s2 = sigma @ sigma
    return ToeplitzWeightReport(alpha, weight_ratio(alpha), float(np.trace(s2 @ s2) / np.trace(s2) ** 2))


def toeplitz_gram(symbol, n: int, d: int, reps: int, seed: int = 0, diagonal: bool = False):
    """Draws of ``(X X^T - d Id) / |alpha|_2`` for ``X`` an ``n x d`` matrix with
    i.i.d. rows ``N(0, Sigma_s)``.

    Returns ``(samples, report)``; ``samples`` holds the strictly upper
    triangle (principal ``p = 2`` coordinates) or, with ``diagonal=True``,
    the full upper triangle in symmetric-kind order.
    """
    sigma = toeplitz_matrix(symbol, d)
    rep = toeplitz_weights(symbol, d)
    chol = np.linalg.cholesky(sigma)
    norm = float(np.linalg.norm(rep.eigenvalues))
    idx = index_array(TensorSpace(n, 2), "symmetric" if diagonal else "principal")
    out = np.empty((reps, idx.shape[0]))
    for q in range(reps):
        X = np.random.default_rng([seed, q]).standard_normal((n, d)) @ chol.T
        gram = X @ X.T - d * np.eye(n)
        out[q] = gram[idx[:, 0], idx[:, 1]] / norm
    return out, rep


# ---------------------------------------------------------------------------
# sample files
# ---------------------------------------------------------------------------


def write_samples(path, samples) -> Path:
    """Binary format: 16-byte header (``WSHT``, u32 reps, u32 D, u32 0), then
    little-endian float64 rows."""
    arr = np.ascontiguousarray(samples, dtype="<f8")
    if arr.ndim != 2:
        raise ValueError("samples must be a 2-D array")
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(HEADER.pack(MAGIC, arr.shape[0], arr.shape[1], 0))
        fh.write(arr.tobytes())
    return path


def read_samples(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise ValueError("file too short for a sample header")
    magic, reps, D, _ = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    body = raw[HEADER.size :]
    if len(body) != 8 * reps * D:
        raise ValueError(f"expected {reps}x{D} doubles, found {len(body)} bytes")
    return np.frombuffer(body, dtype="<f8").reshape(reps, D).copy()


def write_samples_csv(path, samples) -> Path:
    arr = np.asarray(samples, dtype=float)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"w{j}" for j in range(arr.shape[1])])
        for row in arr:
            w.writerow([repr(float(v)) for v in row])
    return path


def read_samples_csv(path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(len(rows) - 1, -1)
