"""Pure-Python reference implementations of the hot kernels.

Mirrors ``_kernels.pyx`` call for call; used when the compiled extension is
unavailable or ``MAGSPEC_PURE_PYTHON=1``.
"""

import math

import numpy as np

TWO_PI = 2.0 * math.pi
# strict-improvement margin: near-ties keep the current angle, so the descent
# path does not depend on rounding (and hence not on the gauge)
TIE_RTOL = 1e-12


def _wrap_abs(x):
    y = math.fmod(x + math.pi, TWO_PI)
    if y < 0.0:
        y += TWO_PI
    return abs(y - math.pi)


def frustration_objective(indptr, nbr, ophase, weight, psi):
    """Half the sum over incidences of ``q |wrap(theta_uw + psi_w - psi_u)|``."""
    total = 0.0
    n = len(indptr) - 1
    for u in range(n):
        pu = psi[u]
        for j in range(indptr[u], indptr[u + 1]):
            total += weight[j] * _wrap_abs(ophase[j] + psi[nbr[j]] - pu)
    return 0.5 * total


def frustration_descent(indptr, nbr, ophase, weight, psi, max_sweeps, rtol):
    """Cyclic coordinate descent on vertex angles, updating ``psi`` in place.

    Each one-dimensional subproblem is piecewise linear on the circle, so its
    minimum sits at a breakpoint where one incident edge has zero defect; all
    breakpoints are enumerated.  Stops when a sweep lowers the objective by
    less than ``rtol`` relative.  Returns ``(objective, sweeps)``.
    """
    n = len(indptr) - 1
    f_old = frustration_objective(indptr, nbr, ophase, weight, psi)
    sweeps = 0
    while sweeps < max_sweeps and f_old > 0.0:
        sweeps += 1
        for u in range(n):
            a, b = indptr[u], indptr[u + 1]
            if b - a < 2:
                continue
            c = np.asarray(ophase[a:b]) + np.asarray(psi)[np.asarray(nbr[a:b])]
            w = np.asarray(weight[a:b])
            diff = np.mod(c[None, :] - c[:, None] + math.pi, TWO_PI) - math.pi
            cost = np.abs(diff) @ w
            cur = np.abs(np.mod(c - psi[u] + math.pi, TWO_PI) - math.pi) @ w
            best_cost, best_x = cur, psi[u]
            for i in range(b - a):
                if cost[i] < best_cost - TIE_RTOL * (1.0 + cur):
                    best_cost, best_x = cost[i], c[i]
            psi[u] = best_x
        f_new = frustration_objective(indptr, nbr, ophase, weight, psi)
        if f_old - f_new <= rtol * f_old:
            f_old = min(f_old, f_new)
            break
        f_old = f_new
    return f_old, sweeps


def tree_gauge(order, pred, pred_phase, psi):
    """Zero the defect on every tree edge: ``psi_c = psi_p - theta(p -> c)``.

    ``order`` lists vertices parents-first; roots have ``pred < 0`` and keep
    their current angle.
    """
    for i in range(len(order)):
        c = order[i]
        p = pred[c]
        if p >= 0:
            psi[c] = psi[p] - pred_phase[c]
