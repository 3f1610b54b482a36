import os
import subprocess
import sys

import numpy as np
import pytest

from tensorclt import _accel, kernels
from tensorclt.measures import FAMILIES, MeasureSpec
from tensorclt.stein import OUQuadrature
from tensorclt.symtensor import TensorSpace, index_array, tensor_power_jacobian
from tensorclt.transport import transport_for

needs_numba = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


def make(family, n):
    if family == "toeplitz_gaussian_rows":
        return MeasureSpec(family, n, symbol=(1.0, 0.4))
    return MeasureSpec(family, n)


@needs_numba
@pytest.mark.parametrize("family", FAMILIES)
def test_map_eval_backends_agree(family):
    margs = transport_for(make(family, 4)).kernel_args()
    x = np.random.default_rng(0).standard_normal((200, 4)) * 3
    a = kernels.map_eval_nb(*margs, x)
    b = kernels.map_eval_np(*margs, x)
    for u, v in zip(a, b):
        assert np.allclose(u, v, rtol=1e-13, atol=1e-13)


@needs_numba
@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("p,kind", [(1, "full"), (2, "principal"), (2, "symmetric"), (3, "principal")])
def test_stein_pass_backends_agree(family, p, kind):
    tm = transport_for(make(family, 3))
    idx = index_array(TensorSpace(3, p), kind)
    center = tm.mean_tensor(TensorSpace(3, p), kind)[0]
    rng = np.random.default_rng(1)
    y = rng.standard_normal((40, 3))
    Z = rng.standard_normal((40, 6, 3))
    u, w = OUQuadrature(5, 6).nodes
    a = kernels.stein_pass_nb(y, Z, u, w, *tm.kernel_args(), idx, center)
    b = kernels.stein_pass_np(y, Z, u, w, *tm.kernel_args(), idx, center)
    for s, t in zip(a, b):
        assert np.allclose(s, t, rtol=1e-11, atol=1e-11)


@needs_numba
@pytest.mark.parametrize("homogeneous", [True, False])
def test_wishart_sum_backends_agree(homogeneous):
    rng = np.random.default_rng(2)
    X = rng.standard_normal((7, 30, 4))
    w = rng.uniform(0.5, 2, 30)
    w /= np.linalg.norm(w)
    idx = index_array(TensorSpace(4, 2), "symmetric")
    c = rng.standard_normal(idx.shape[0])
    a = kernels.wishart_sum_nb(X, w, idx, c, homogeneous)
    b = kernels.wishart_sum_np(X, w, idx, c, homogeneous)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_numpy_jacobian_matches_reference():
    rng = np.random.default_rng(3)
    space = TensorSpace(4, 3)
    idx = index_array(space, "symmetric")
    phi = rng.standard_normal((5, 4))
    dphi = rng.standard_normal((5, 4, 4))
    assert np.allclose(kernels._tpjac_np(phi, dphi, idx), tensor_power_jacobian(phi, dphi, space, "symmetric"))


def test_stein_pass_single_point_by_hand():
    # identity map, p = 1: both halves equal the identity whatever the draws
    tm = transport_for(MeasureSpec("gaussian", 2))
    idx = index_array(TensorSpace(2, 1), "full")
    u, w = OUQuadrature(4, 4).nodes
    rng = np.random.default_rng(4)
    Y, ta, tb = kernels.stein_pass(rng.standard_normal((3, 2)), rng.standard_normal((3, 4, 2)), u, w, tm.kernel_args(), idx, np.zeros(2))
    assert np.allclose(ta, np.eye(2)) and np.allclose(tb, np.eye(2))


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, TENSORCLT_PURE_NUMPY="1")
    out = subprocess.run(
        [sys.executable, "-c", "import tensorclt; print(tensorclt.backend())"], env=env, capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == "numpy"
    env["TENSORCLT_PURE_NUMPY"] = "0"
    out = subprocess.run(
        [sys.executable, "-c", "import tensorclt; print(tensorclt.backend())"], env=env, capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == ("numba" if _accel.HAVE_NUMBA else "numpy")
