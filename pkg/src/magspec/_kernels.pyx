# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; same contracts as ``_kernels_py``."""

from libc.math cimport fabs, fmod, M_PI

cdef double TWO_PI = 2.0 * M_PI
cdef double TIE_RTOL = 1e-12


cdef inline double _wrap_abs(double x) nogil:
    cdef double y = fmod(x + M_PI, TWO_PI)
    if y < 0.0:
        y += TWO_PI
    return fabs(y - M_PI)


cpdef double frustration_objective(const long[::1] indptr, const long[::1] nbr,
                                   const double[::1] ophase, const double[::1] weight,
                                   const double[::1] psi):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t u, j
    cdef double total = 0.0, pu
    with nogil:
        for u in range(n):
            pu = psi[u]
            for j in range(indptr[u], indptr[u + 1]):
                total += weight[j] * _wrap_abs(ophase[j] + psi[nbr[j]] - pu)
    return 0.5 * total


def frustration_descent(const long[::1] indptr, const long[::1] nbr,
                        const double[::1] ophase, const double[::1] weight,
                        double[::1] psi, int max_sweeps, double rtol):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t u, a, b, i, j
    cdef double f_old, f_new, cur, cost, best_cost, best_x, ci
    cdef int sweeps = 0
    f_old = frustration_objective(indptr, nbr, ophase, weight, psi)
    while sweeps < max_sweeps and f_old > 0.0:
        sweeps += 1
        with nogil:
            for u in range(n):
                a = indptr[u]
                b = indptr[u + 1]
                if b - a < 2:
                    continue
                cur = 0.0
                for j in range(a, b):
                    cur += weight[j] * _wrap_abs(ophase[j] + psi[nbr[j]] - psi[u])
                best_cost = cur
                best_x = psi[u]
                for i in range(a, b):
                    ci = ophase[i] + psi[nbr[i]]
                    cost = 0.0
                    for j in range(a, b):
                        cost += weight[j] * _wrap_abs(ophase[j] + psi[nbr[j]] - ci)
                    if cost < best_cost - TIE_RTOL * (1.0 + cur):
                        best_cost = cost
                        best_x = ci
                psi[u] = best_x
        f_new = frustration_objective(indptr, nbr, ophase, weight, psi)
        if f_old - f_new <= rtol * f_old:
            f_old = min(f_old, f_new)
            break
        f_old = f_new
    return f_old, sweeps


def tree_gauge(const long[::1] order, const long[::1] pred,
               const double[::1] pred_phase, double[::1] psi):
    cdef Py_ssize_t i, c, p
    with nogil:
        for i in range(order.shape[0]):
            c = order[i]
            p = pred[c]
            if p >= 0:
                psi[c] = psi[p] - pred_phase[c]
