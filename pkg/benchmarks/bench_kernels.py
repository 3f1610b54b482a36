"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--points 4000] [--repeat 3]

Both backends are called explicitly (``use_numba=True/False``), so the
``TENSORCLT_PURE_NUMPY`` flag does not matter here.  Numba is warmed up
once before timing.
"""

import argparse
import timeit

import numpy as np

from tensorclt import _accel, kernels
from tensorclt.measures import MeasureSpec, sample_rng
from tensorclt.stein import OUQuadrature
from tensorclt.symtensor import TensorSpace, index_array
from tensorclt.transport import transport_for
from tensorclt.wishart import tensor_mean


def stein_case(family, n, p, points, K):
    tmap = transport_for(MeasureSpec(family, n))
    space = TensorSpace(n, p)
    idx = index_array(space, "principal")
    u, w = OUQuadrature(16, K).nodes
    rng = np.random.default_rng(0)
    y = rng.standard_normal((points, n))
    Z = rng.standard_normal((points, K, n))
    center = np.zeros(idx.shape[0])
    return lambda nb: kernels.stein_pass(y, Z, u, w, tmap.kernel_args(), idx, center, use_numba=nb)


def wishart_case(family, n, p, d, reps):
    spec = MeasureSpec(family, n)
    space = TensorSpace(n, p)
    idx = index_array(space, "symmetric")
    center = tensor_mean(spec, space, "symmetric")
    X = np.stack([sample_rng(spec, d, np.random.default_rng([0, q])) for q in range(reps)])
    w = np.full(d, 1 / np.sqrt(d))
    return lambda nb: kernels.wishart_sum(X, w, idx, center, True, use_numba=nb)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    cases = [
        ("stein_pass gaussian n=3 p=2 K=8", stein_case("gaussian", 3, 2, args.points, 8)),
        ("stein_pass laplace n=4 p=2 K=8", stein_case("laplace_product", 4, 2, args.points, 8)),
        ("stein_pass logconcave n=4 p=3 K=16", stein_case("uniform_logconcave_unconditional", 4, 3, args.points, 16)),
        ("wishart_sum uniform n=3 p=2 d=200", wishart_case("uniform_box", 3, 2, 200, args.points // 4)),
        ("wishart_sum gaussian n=4 p=3 d=100", wishart_case("gaussian", 4, 3, 100, args.points // 4)),
    ]
    print(f"{'case':40s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, fn in cases:
        a = fn(True)  # compile
        b = fn(False)
        diff = max(float(np.max(np.abs(x - y))) for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)))
        t_nb = min(timeit.repeat(lambda: fn(True), number=1, repeat=args.repeat))
        t_np = min(timeit.repeat(lambda: fn(False), number=1, repeat=args.repeat))
        print(f"{name:40s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f} {diff:11.2e}")


if __name__ == "__main__":
    main()
