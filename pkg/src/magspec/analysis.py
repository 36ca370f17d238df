"""Integrated Bochner identity and heat-semigroup inequalities on flat grids.

Covariant derivatives use phased central differences along each grid axis,

    D_j f(u) = (exp(i theta(u -> u+)) f(u+) - exp(i theta(u -> u-)) f(u-)) / (2 h_j),

which is second-order accurate for the twisted derivative ``df + i f alpha``
and covariant under gauge transformations.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import operator as opmod
from .eigensolve import DEFAULT_SEED, smallest_k
from .geometry import DiscretizedManifold, circle_grid, torus_grid
from .magnetic import (MagneticPotential, circle_constant, torus_constant, torus_uniform_flux,
                       vertex_field)

HEAT_MAX_N = 400


class UnsupportedModel(ValueError):
    pass


def _stencil(M):
    if not M.is_structured:
        raise UnsupportedModel(f"covariant stencils need a structured grid, got {M.kind!r}")
    return M.grid_axes()


def _axis_derivative(axis, phase, g):
    h, fv, fe, bv, be = axis
    ef = np.exp(1j * phase[fe])
    eb = np.exp(-1j * phase[be])
    if g.ndim > 1:
        ef, eb = ef[:, None], eb[:, None]
    return (ef * g[fv] - eb * g[bv]) / (2.0 * h)


def covariant_gradient(M: DiscretizedManifold, P: MagneticPotential, f) -> np.ndarray:
    """Array of shape ``(dim, N)`` (or ``(dim, N, m)`` for a block) of ``D_j f``."""
    P.check_host(M)
    axes = _stencil(M)
    f = np.asarray(f, dtype=complex)
    if f.shape[0] != M.n_vertices:
        raise ValueError(f"function has {f.shape[0]} values, grid has {M.n_vertices} vertices")
    return np.stack([_axis_derivative(ax, P.edge_phase, f) for ax in axes])


def covariant_hessian(M: DiscretizedManifold, P: MagneticPotential, f) -> np.ndarray:
    """Array of shape ``(dim, dim, N)`` with entry ``[i, j] = D_i D_j f``."""
    G = covariant_gradient(M, P, f)
    axes = _stencil(M)
    return np.stack([np.stack([_axis_derivative(ax, P.edge_phase, Gj) for Gj in G]) for ax in axes])


def grad_norm_sq(M, P, f) -> np.ndarray:
    G = covariant_gradient(M, P, f)
    return (np.abs(G) ** 2).sum(axis=0)


def grid_spacing(M: DiscretizedManifold) -> float:
    return max(ax[0] for ax in _stencil(M))


@dataclass(eq=False)
class BochnerResidual:
    hess_term: float
    ric_term: float
    mixed_term: float
    field_density_term: float
    field_gradient_term: float
    h: float
    model: str = ""
    potential: str = ""

    @property
    def terms(self) -> dict:
        return {
            "hess_term": self.hess_term,
            "ric_term": self.ric_term,
            "mixed_term": self.mixed_term,
            "field_density_term": self.field_density_term,
            "field_gradient_term": self.field_gradient_term,
        }

    @property
    def residual(self) -> float:
        return float(sum(self.terms.values()))

    @property
    def scale(self) -> float:
        return float(sum(abs(v) for v in self.terms.values()))

    def to_dict(self) -> dict:
        return {**self.terms, "residual": self.residual, "h": self.h,
                "model": self.model, "potential": self.potential}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def band_limited(M: DiscretizedManifold, rng, max_mode: int, *, decay: float = 1.0) -> np.ndarray:
    """Random trigonometric polynomial with modes ``|m_j| <= max_mode`` on a flat grid.

    Coefficients are complex Gaussians damped by ``(1 + |m|^2)^(-decay)``;
    the function is evaluated at the grid points, so the same seed gives the
    same continuum function at every resolution.
    """
    if M.kind == "circle":
        L = M.params["L"]
        x = np.arange(M.n_vertices) * (L / M.n_vertices)
        ks = np.arange(-max_mode, max_mode + 1)
        c = (rng.standard_normal(ks.size) + 1j * rng.standard_normal(ks.size)) / (1 + ks ** 2) ** decay
        return np.exp(1j * np.outer(x, 2 * np.pi * ks / L)) @ c
    if M.kind == "torus":
        X = np.asarray(M.vertices)
        L1, L2 = M.params["L1"], M.params["L2"]
        ks = np.arange(-max_mode, max_mode + 1)
        k1, k2 = (a.ravel() for a in np.meshgrid(ks, ks, indexing="ij"))
        c = (rng.standard_normal(k1.size) + 1j * rng.standard_normal(k1.size)) / (1 + k1 ** 2 + k2 ** 2) ** decay
        ph = np.outer(X[:, 0], 2 * np.pi * k1 / L1) + np.outer(X[:, 1], 2 * np.pi * k2 / L2)
        return np.exp(1j * ph) @ c
    raise UnsupportedModel(f"band-limited fields need a structured grid, got {M.kind!r}")


def verify_integrated_bochner(M: DiscretizedManifold, P: MagneticPotential, f=None, *,
                              seed: int = DEFAULT_SEED, max_mode: int = 3) -> BochnerResidual:
    """The five integrated terms of the magnetic Bochner identity on a flat grid.

    In order: ``int |hess f|^2``, ``int ric(grad f, grad f)`` (zero on flat
    grids), ``-int Re <grad(Delta f), grad f>``, ``-int |f|^2 |d alpha|^2`` and
    the field-gradient coupling ``int Re(i d alpha(grad f, conj grad f))``.
    Their sum vanishes in the continuum.
    """
    P.check_host(M)
    _stencil(M)
    if f is None:
        f = band_limited(M, np.random.default_rng(seed), max_mode)
    f = np.asarray(f, dtype=complex)
    mu = M.vertex_volume
    op = opmod.assemble(M, P)
    G = covariant_gradient(M, P, f)
    H = covariant_hessian(M, P, f)
    GL = covariant_gradient(M, P, opmod.apply(op, f))
    hess = float(mu @ (np.abs(H) ** 2).sum(axis=(0, 1)))
    mixed = -float(mu @ (GL * G.conj()).real.sum(axis=0))
    if M.dimension == 2:
        b = vertex_field(M, P)
        dens = -float(mu @ (np.abs(f) ** 2 * b ** 2))
        # i b (G_x conj(conj G_y) - G_y conj(conj G_x)) has real part -2 b Im(G_x conj G_y)
        grad = float(mu @ (-2.0 * b * (G[0] * G[1].conj()).imag))
    else:
        dens = grad = 0.0
    ric = float(M.ricci_lower_bound * (mu @ (np.abs(G) ** 2).sum(axis=0)))
    return BochnerResidual(hess, ric, mixed, dens, grad, grid_spacing(M),
                           model=M.describe(), potential=P.descriptor)


def _circle_case(n, A=0.5, L=2 * np.pi):
    M = circle_grid(L, n)
    x = np.arange(n) * (L / n)
    return M, circle_constant(M, A), np.exp(1j * x)


def _torus_case(n, A=0.3, B=0.4, L=2 * np.pi, seed=DEFAULT_SEED):
    M = torus_grid(L, L, n, n)
    return M, torus_constant(M, A, B), band_limited(M, np.random.default_rng(seed), 3)


def _flux_case(n, m=2, L=2 * np.pi):
    M = torus_grid(L, L, n, n)
    P = torus_uniform_flux(M, m)
    S = smallest_k(opmod.assemble(M, P), m)
    # reproducing kernel of the ground space at vertex 0: independent of the basis
    X = S.eigenvectors
    return M, P, X @ X[0].conj()


SCENARIOS = {
    "circle": (_circle_case, (128, 256)),
    "torus": (_torus_case, (32, 64)),
    "flux": (_flux_case, (32, 64)),
}


@dataclass(eq=False)
class RefinementStudy:
    scenario: str
    rows: list = field(default_factory=list)

    @property
    def order(self) -> float:
        return self.rows[-1]["order"]

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "rows": self.rows, "order": self.order}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["h", "residual", "order"])
            for r in self.rows:
                w.writerow([repr(r["h"]), repr(r["residual"]), "" if r["order"] is None else repr(r["order"])])


def refinement_study(scenario: str = "circle", resolutions=None, **case_kw) -> RefinementStudy:
    """Bochner residuals on successively halved grids and the empirical order ``log2(r_h / r_{h/2})``.

    ``scenario`` is a name from ``SCENARIOS`` or a callable ``n -> (M, P, f)``.
    """
    if callable(scenario):
        make, default, name = scenario, None, getattr(scenario, "__name__", "custom")
        if resolutions is None:
            raise ValueError("a custom scenario needs explicit resolutions")
    elif scenario in SCENARIOS:
        (make, default), name = SCENARIOS[scenario], scenario
    else:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {sorted(SCENARIOS)}")
    study = RefinementStudy(name)
    prev = None
    for n in resolutions or default:
        M, P, f = make(n, **case_kw)
        r = verify_integrated_bochner(M, P, f)
        order = None if prev is None else math.log2(abs(prev) / abs(r.residual))
        study.rows.append({"n": n, "h": r.h, "residual": r.residual, "order": order, **r.terms})
        prev = r.residual
    return study


def heat_matrix(op: opmod.MagneticOperator, t: float) -> np.ndarray:
    """Dense ``exp(-t M^{-1} A)`` via scaling and squaring on the symmetrized matrix."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if op.size > HEAT_MAX_N:
        raise ValueError(f"heat semigroup is dense-only: N={op.size} exceeds {HEAT_MAX_N}")
    r = np.sqrt(op.mass)
    E = sla.expm(-t * op.dense_symmetrized())
    return (E / r[:, None]) * r[None, :]


def heat_semigroup(op: opmod.MagneticOperator, t: float, f) -> np.ndarray:
    f = np.asarray(f, dtype=complex)
    if f.shape[0] != op.size:
        raise ValueError(f"vector of length {f.shape[0]} for operator of size {op.size}")
    return heat_matrix(op, t) @ f


@dataclass(eq=False)
class HeatCheck:
    t_grid: list
    violations: list
    n_samples: int
    tol: float
    model: str = ""
    potential: str = ""

    @property
    def max_violation(self) -> dict:
        return {key: max(v[key] for v in self.violations) for key in ("i", "ii", "iii")}

    @property
    def holds(self) -> bool:
        return all(v <= self.tol for v in self.max_violation.values())

    def to_dict(self) -> dict:
        return {"t_grid": self.t_grid, "violations": self.violations, "n_samples": self.n_samples,
                "tol": self.tol, "max_violation": self.max_violation, "holds": self.holds,
                "model": self.model, "potential": self.potential}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _heat_factor(K, t):
    return 2.0 * t if K == 0 else (1.0 - math.exp(-2.0 * K * t)) / K


def heat_samples(M: DiscretizedManifold, n_samples: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Band-limited test functions (modes up to ``n/8``) scaled to ``max |f| = 1``."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    _stencil(M)
    n = M.params["n_verts"] if M.kind == "circle" else min(M.params["n1"], M.params["n2"])
    max_mode = max(1, n // 8)
    rng = np.random.default_rng(seed)
    cols = []
    for _ in range(n_samples):
        f = band_limited(M, rng, max_mode)
        cols.append(f / np.abs(f).max())
    return np.stack(cols, axis=1)


def verify_heat_lemma(op_alpha: opmod.MagneticOperator, op_zero: opmod.MagneticOperator, K: float,
                      t_grid, n_samples: int = 32, *, seed: int = DEFAULT_SEED,
                      tol_abs: float = 1e-6, allowance: float = 10.0) -> HeatCheck:
    """Pointwise gradient and contraction estimates for the magnetic heat flow.

    Signed violations per ``t`` (positive means the inequality fails):

    * (i)   ``|grad P^a f|^2 - e^{2Kt} P(|grad f|^2)``, pointwise maximum;
    * (ii)  ``c(t) |grad P^a f|^2 + |P^a f|^2 - P(|f|^2)``, pointwise maximum,
      with ``c(t) = (1 - e^{-2Kt}) / K`` and ``c = 2t`` at ``K = 0``;
    * (iii) ``||f - P^a f||_1 - 2 sqrt(t) ||grad f||_1`` in ``L^1(mu)``.

    Checks pass when every violation is at most ``tol_abs + allowance * h^2``.
    """
    M = op_alpha.manifold
    if op_zero.manifold is not M and op_zero.manifold.fingerprint != M.fingerprint:
        raise ValueError("magnetic and plain operators live on different grids")
    if K < 0:
        raise ValueError("K must be nonnegative")
    t = np.asarray(t_grid, dtype=float).ravel()
    if t.size == 0:
        raise ValueError("empty t grid")
    if K > 0 and np.any(t > 1.0 / (2.0 * K) * (1 + 1e-12)):
        raise ValueError("t grid must lie in [0, 1/(2K)]")
    P = op_alpha.potential
    F = heat_samples(M, n_samples, seed)
    mu = M.vertex_volume
    gF = grad_norm_sq(M, P, F)
    gF1 = mu @ np.sqrt(gF)
    h = grid_spacing(M)
    out = []
    for tt in t:
        Pa = heat_matrix(op_alpha, tt)
        Pz = heat_matrix(op_zero, tt).real
        U = Pa @ F
        gU = grad_norm_sq(M, P, U)
        v1 = gU - math.exp(2 * K * tt) * (Pz @ gF)
        v2 = _heat_factor(K, tt) * gU + np.abs(U) ** 2 - Pz @ (np.abs(F) ** 2)
        v3 = mu @ np.abs(F - U) - 2.0 * math.sqrt(tt) * gF1
        out.append({"t": float(tt), "i": float(v1.max()), "ii": float(v2.max()), "iii": float(v3.max())})
    return HeatCheck(t_grid=t.tolist(), violations=out, n_samples=n_samples,
                     tol=tol_abs + allowance * h * h, model=M.describe(), potential=P.descriptor)
