"""Pure-Python SVRG epoch; same contract as the compiled ``_svrg_core``."""
import numpy as np


def _slope(kind, scale, u, y):
    if kind == 0:
        return scale * (u - y)
    return -y / (1.0 + np.exp(y * u))


def svrg_epoch_dense(X, y, kind, scale, w, w_snap, snap_slope, full_grad,
                     indices, step, coef):
    for i in indices:
        xi = X[i]
        d = _slope(kind, scale, float(xi @ w), y[i]) - snap_slope[i]
        w -= step * (d * xi + coef * (w - w_snap) + full_grad)


def svrg_epoch_csr(data, col, indptr, y, kind, scale, w, w_snap, snap_slope,
                   full_grad, indices, step, coef):
    for i in indices:
        lo, hi = indptr[i], indptr[i + 1]
        cols, vals = col[lo:hi], data[lo:hi]
        d = _slope(kind, scale, float(vals @ w[cols]), y[i]) - snap_slope[i]
        w -= step * (coef * (w - w_snap) + full_grad)
        w[cols] -= step * d * vals
