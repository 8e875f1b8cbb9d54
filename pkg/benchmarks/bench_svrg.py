"""Time one SVRG epoch with the compiled and the pure-Python kernel.

    python benchmarks/bench_svrg.py --n 2000 --p 200 --repeat 3
"""
import argparse
import time

import numpy as np
import scipy.sparse as sp

from dane_sim import kernels
from dane_sim.data import gen_logistic
from dane_sim.model import link_slope, LossModel


def epoch_args(n, p, density, seed):
    data, _ = gen_logistic(n, p, seed=seed)
    X = data.features
    if density < 1.0:
        mask = np.random.default_rng(seed).random(X.shape) < density
        X = sp.csr_matrix(X * mask)
    y = data.labels
    rng = np.random.default_rng(seed + 1)
    w_snap = 0.01 * rng.standard_normal(p)
    slope = link_slope(LossModel("logistic"), np.asarray(X @ w_snap).ravel(), y)
    full = np.asarray(X.T @ slope).ravel() / n
    idx = rng.integers(0, n, size=2 * n, dtype=np.int64)
    return X, y, w_snap, slope, full, idx


def time_backend(name, X, y, w_snap, slope, full, idx, repeat):
    kern = kernels.get_backend(name)
    best = np.inf
    w = None
    for _ in range(repeat):
        w = w_snap.copy()
        t0 = time.perf_counter()
        if sp.issparse(X):
            kern.svrg_epoch_csr(X.data, X.indices.astype(np.int32), X.indptr.astype(np.int32),
                                y, 1, 1.0, w, w_snap, slope, full, idx, 1e-3, 0.1)
        else:
            kern.svrg_epoch_dense(X, y, 1, 1.0, w, w_snap, slope, full, idx, 1e-3, 0.1)
        best = min(best, time.perf_counter() - t0)
    return best, w


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--p", type=int, default=200)
    ap.add_argument("--density", type=float, default=1.0,
                    help="< 1 benchmarks the CSR kernel")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if not kernels.compiled_available():
        print("compiled kernel not built; only the Python fallback is available")
        return 1
    arrays = epoch_args(args.n, args.p, args.density, args.seed)
    t_c, w_c = time_backend("compiled", *arrays, args.repeat)
    t_p, w_p = time_backend("python", *arrays, args.repeat)
    layout = "csr" if args.density < 1.0 else "dense"
    steps = arrays[-1].shape[0]
    print(f"{layout} n={args.n} p={args.p} steps={steps}")
    print(f"compiled  {t_c * 1e3:9.2f} ms  ({steps / t_c:,.0f} steps/s)")
    print(f"python    {t_p * 1e3:9.2f} ms  ({steps / t_p:,.0f} steps/s)")
    print(f"speedup   {t_p / t_c:9.1f}x")
    print(f"max |w_compiled - w_python| = {np.max(np.abs(w_c - w_p)):.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
