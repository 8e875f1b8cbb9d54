# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled SVRG epoch for linear-model subproblems.

Each stochastic step on sample i applies

    w <- w - step * ((l'(x_i.w) - l'(x_i.w_snap)) x_i + coef (w - w_snap) + G)

where ``coef = mu + gamma`` collects the deterministic l2 and proximal
terms and ``G`` is the full subproblem gradient at the snapshot.
"""
from libc.math cimport exp

cdef inline double _slope(int kind, double scale, double u, double y) nogil:
    if kind == 0:
        return scale * (u - y)
    return -y / (1.0 + exp(y * u))


def svrg_epoch_dense(const double[:, ::1] X, const double[::1] y, int kind,
                     double scale, double[::1] w, const double[::1] w_snap,
                     const double[::1] snap_slope, const double[::1] full_grad,
                     const long long[::1] indices, double step, double coef):
    cdef Py_ssize_t p = X.shape[1]
    cdef Py_ssize_t k, j, i
    cdef double u, d
    with nogil:
        for k in range(indices.shape[0]):
            i = indices[k]
            u = 0.0
            for j in range(p):
                u = u + X[i, j] * w[j]
            d = _slope(kind, scale, u, y[i]) - snap_slope[i]
            for j in range(p):
                w[j] = w[j] - step * (d * X[i, j] + coef * (w[j] - w_snap[j])
                                      + full_grad[j])


def svrg_epoch_csr(const double[::1] data, const int[::1] col,
                   const int[::1] indptr, const double[::1] y, int kind,
                   double scale, double[::1] w, const double[::1] w_snap,
                   const double[::1] snap_slope, const double[::1] full_grad,
                   const long long[::1] indices, double step, double coef):
    cdef Py_ssize_t p = w.shape[0]
    cdef Py_ssize_t k, j, i, q
    cdef double u, d
    with nogil:
        for k in range(indices.shape[0]):
            i = indices[k]
            u = 0.0
            for q in range(indptr[i], indptr[i + 1]):
                u = u + data[q] * w[col[q]]
            d = _slope(kind, scale, u, y[i]) - snap_slope[i]
            for j in range(p):
                w[j] = w[j] - step * (coef * (w[j] - w_snap[j]) + full_grad[j])
            for q in range(indptr[i], indptr[i + 1]):
                w[col[q]] = w[col[q]] - step * d * data[q]
