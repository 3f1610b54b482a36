import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorclt.symtensor import (
    EmptySpaceError,
    TensorSpace,
    enumerate_indices,
    kron_opnorm_bound,
    rank_index,
    tensor_power,
    tensor_power_jacobian,
)

spaces = st.tuples(st.integers(1, 5), st.integers(1, 4)).map(lambda t: TensorSpace(*t))


def test_dimension_examples():
    assert len(enumerate_indices(TensorSpace(4, 2), "symmetric")) == 10
    assert enumerate_indices(TensorSpace(4, 2), "principal") == [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]
    assert enumerate_indices(TensorSpace(3, 3), "principal") == [(1, 2, 3)]


def test_principal_needs_p_le_n():
    with pytest.raises(EmptySpaceError):
        enumerate_indices(TensorSpace(2, 3), "principal")


@pytest.mark.parametrize("bad", [(0, 1), (2, 0), (1.5, 2)])
def test_space_validation(bad):
    with pytest.raises(ValueError):
        TensorSpace(*bad)


@given(spaces)
def test_dimensions_and_nesting(space):
    n, p = space.n, space.p
    full = enumerate_indices(space, "full")
    sym = enumerate_indices(space, "symmetric")
    assert len(full) == space.dim_full == n**p
    assert len(sym) == space.dim_sym == comb(n + p - 1, p)
    assert set(sym) <= set(full)
    assert all(a <= b for idx in sym for a, b in zip(idx, idx[1:]))
    if p <= n:
        pr = enumerate_indices(space, "principal")
        assert len(pr) == space.dim_principal == comb(n, p)
        assert set(pr) <= set(sym)
        assert all(a < b for idx in pr for a, b in zip(idx, idx[1:]))


@given(spaces, st.sampled_from(["full", "symmetric", "principal"]))
def test_rank_inverts_enumeration(space, kind):
    if kind == "principal" and space.p > space.n:
        return
    idx = enumerate_indices(space, kind)
    assert idx == sorted(idx)  # strictly ordered
    assert [rank_index(i, space, kind) for i in idx] == list(range(len(idx)))


def test_rank_rejects_wrong_shape():
    with pytest.raises(ValueError):
        rank_index((2, 1), TensorSpace(3, 2), "principal")
    with pytest.raises(ValueError):
        rank_index((1, 4), TensorSpace(3, 2), "full")


def test_tensor_power_examples():
    assert np.array_equal(tensor_power([1.0, 0, 0], TensorSpace(3, 2), "principal"), np.zeros(3))
    assert np.array_equal(tensor_power([1.0, 1, 1], TensorSpace(3, 2), "principal"), np.ones(3))
    assert np.array_equal(tensor_power([2.0, 3.0], TensorSpace(2, 2), "symmetric"), [4.0, 6.0, 9.0])
    with pytest.raises(ValueError):
        tensor_power([1.0, 2.0], TensorSpace(3, 2), "full")


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.permutations(range(3)))
def test_full_tensor_symmetric_under_permutation(v, perm):
    space = TensorSpace(3, 3)
    t = tensor_power(v, space, "full")
    for idx in itertools.product(range(1, 4), repeat=3):
        permuted = tuple(idx[k] for k in perm)
        assert t[rank_index(idx, space, "full")] == pytest.approx(t[rank_index(permuted, space, "full")], rel=1e-15)


def test_jacobian_trivial_cases():
    rng = np.random.default_rng(0)
    dphi = rng.standard_normal((3, 3))
    v = rng.standard_normal(3)
    assert np.array_equal(tensor_power_jacobian(v, dphi, TensorSpace(3, 1), "full"), dphi)
    a, b = 1.7, -0.4
    J = tensor_power_jacobian([a, b], np.eye(2), TensorSpace(2, 2), "symmetric")
    assert np.allclose(J[1], [b, a])


def _fd_jacobian(f, x, h):
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def test_jacobian_matches_finite_differences_diagonal_map():
    # phi(x) = sinh(x) coordinatewise; Dphi diagonal
    rng = np.random.default_rng(3)
    space = TensorSpace(4, 3)
    for kind in ("full", "symmetric", "principal"):
        x = rng.uniform(-1, 1, 4)
        J = tensor_power_jacobian(np.sinh(x), np.diag(np.cosh(x)), space, kind)
        fd = _fd_jacobian(lambda y: tensor_power(np.sinh(y), space, kind), x, 1e-5)
        assert np.max(np.abs(J - fd)) <= 1e-6 * max(1.0, np.max(np.abs(fd)))


def test_jacobian_rank_at_most_n():
    rng = np.random.default_rng(5)
    space = TensorSpace(3, 3)
    J = tensor_power_jacobian(rng.standard_normal(3), rng.standard_normal((3, 3)), space, "full")
    s = np.linalg.svd(J, compute_uv=False)
    assert J.shape == (27, 3)
    assert len(s) == 3  # an n^p x n matrix has at most n singular values


def test_kron_bound_examples():
    assert kron_opnorm_bound(1, 1, 2) == 2
    assert kron_opnorm_bound(0, 5, 3) == 0
    with pytest.raises(ValueError):
        kron_opnorm_bound(-1, 1, 2)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_kron_bound_dominates_opnorm(n, p, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    x = rng.standard_normal(n)
    v = np.tanh(A @ x)
    dphi = (1 - v**2)[:, None] * A  # Jacobian of tanh(Ax)
    J = tensor_power_jacobian(v, dphi, TensorSpace(n, p), "full")
    true = np.linalg.norm(J, 2)
    assert true <= kron_opnorm_bound(np.linalg.norm(v), np.linalg.norm(dphi, 2), p) * (1 + 1e-12) + 1e-15
