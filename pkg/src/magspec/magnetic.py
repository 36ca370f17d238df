"""Magnetic potentials stored as oriented edge phases.

A potential is the collection of line integrals ``theta_e`` of the 1-form
along each stored edge.  Face fluxes are oriented phase sums around faces,
reduced into ``(-pi, pi]`` so that lattice flux quanta count as zero field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .geometry import DiscretizedManifold

TWO_PI = 2 * np.pi
DEFAULT_TRIVIAL_TOL = 1e-8


class HostMismatch(ValueError):
    """A potential or gauge was used with a manifold it does not live on."""


def wrap_angle(x):
    """Reduce angles into ``(-pi, pi]``."""
    y = np.mod(np.asarray(x, dtype=float) + np.pi, TWO_PI) - np.pi
    return np.where(y == -np.pi, np.pi, y)


@dataclass(frozen=True, eq=False)
class MagneticPotential:
    edge_phase: np.ndarray
    descriptor: str
    host: str

    def check_host(self, M: DiscretizedManifold) -> None:
        if self.host != M.fingerprint or len(self.edge_phase) != M.n_edges:
            raise HostMismatch(
                f"potential {self.descriptor!r} lives on {self.host}, not on {M.describe()}"
            )

    def to_json(self) -> str:
        return json.dumps({
            "descriptor": self.descriptor,
            "host": self.host,
            "phases": [[i, float(t)] for i, t in enumerate(self.edge_phase)],
        })

    @classmethod
    def from_json(cls, text: str, M: DiscretizedManifold) -> "MagneticPotential":
        d = json.loads(text)
        phase = np.zeros(M.n_edges)
        for i, t in d["phases"]:
            phase[int(i)] = t
        P = _make(M, phase, d["descriptor"])
        if d.get("host", M.fingerprint) != M.fingerprint:
            raise HostMismatch(f"serialized potential was built for host {d['host']}")
        return P


@dataclass(frozen=True, eq=False)
class GaugeFunction:
    """Vertex angles ``psi`` representing ``tau(u) = exp(i psi_u)``."""

    angle: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.angle)):
            raise ValueError("gauge angles must be finite")

    @property
    def values(self) -> np.ndarray:
        return np.exp(1j * np.asarray(self.angle))


def _make(M, phase, descriptor) -> MagneticPotential:
    phase = np.array(phase, dtype=float)
    phase.flags.writeable = False
    return MagneticPotential(edge_phase=phase, descriptor=descriptor, host=M.fingerprint)


def _require_kind(M, kind):
    if M.kind != kind:
        raise HostMismatch(f"expected a {kind} model, got {M.describe()}")


def zero_potential(M: DiscretizedManifold) -> MagneticPotential:
    return _make(M, np.zeros(M.n_edges), f"{M.kind} zero")


def circle_constant(M: DiscretizedManifold, A: float) -> MagneticPotential:
    """``alpha = A dx`` on a circle grid."""
    _require_kind(M, "circle")
    return _make(M, A * M.edge_length, f"circle A={A:g}")


def torus_constant(M: DiscretizedManifold, A: float, B: float) -> MagneticPotential:
    """``alpha = A dx + B dy`` on a torus grid (closed, zero field)."""
    _require_kind(M, "torus")
    N = M.n_vertices
    h1, h2 = M.edge_length[0], M.edge_length[N]
    phase = np.concatenate([np.full(N, A * h1), np.full(N, B * h2)])
    return _make(M, phase, f"torus A={A:g} B={B:g}")


def torus_uniform_flux(M: DiscretizedManifold, m: int) -> MagneticPotential:
    """Landau-gauge phases with flux ``2 pi m / (n1 n2)`` through every square.

    y-edges in column ``i`` carry ``i * Phi``; the x-edges closing the
    periodic seam at column ``n1 - 1`` carry ``-j * n1 * Phi`` in row ``j``.
    """
    _require_kind(M, "torus")
    n1, n2 = M.params["n1"], M.params["n2"]
    N = n1 * n2
    flux = TWO_PI * m / N
    j, i = np.divmod(np.arange(N), n1)
    xphase = np.where(i == n1 - 1, -j * n1 * flux, 0.0)
    yphase = i * flux
    return _make(M, np.concatenate([xphase, yphase]), f"torus uniform flux m={m}")


def sphere_axial(M: DiscretizedManifold, s: float) -> MagneticPotential:
    """``alpha = s (x dy - y dx)`` integrated along straight chords by the midpoint rule."""
    _require_kind(M, "sphere")
    a = M.vertices[M.edges[:, 0]]
    b = M.vertices[M.edges[:, 1]]
    mid = 0.5 * (a + b)
    d = b - a
    return _make(M, s * (mid[:, 0] * d[:, 1] - mid[:, 1] * d[:, 0]), f"sphere s={s:g}")


def from_phases(M: DiscretizedManifold, phases, descriptor: str = "custom") -> MagneticPotential:
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (M.n_edges,):
        raise HostMismatch(f"expected {M.n_edges} edge phases, got shape {phases.shape}")
    return _make(M, phases, descriptor)


def face_fluxes(M: DiscretizedManifold, P: MagneticPotential) -> np.ndarray:
    """Oriented phase sum around each face, reduced into ``(-pi, pi]``."""
    P.check_host(M)
    if M.n_faces == 0:
        return np.zeros(0)
    raw = (P.edge_phase[M.face_edges] * M.face_signs).sum(axis=1)
    return wrap_angle(raw)


def d_alpha_sup_norm(M: DiscretizedManifold, P: MagneticPotential) -> float:
    """``max_f |flux_f| / area_f``; zero in dimension 1."""
    if M.dimension == 1 or M.n_faces == 0:
        P.check_host(M)
        return 0.0
    return float(np.max(np.abs(face_fluxes(M, P)) / M.face_area))


def vertex_field(M: DiscretizedManifold, P: MagneticPotential) -> np.ndarray:
    """Field density ``d alpha / dvol`` at vertices, averaged over incident faces."""
    if M.n_faces == 0:
        P.check_host(M)
        return np.zeros(M.n_vertices)
    dens = face_fluxes(M, P) / M.face_area
    fv = M.face_vertices
    tot = np.bincount(fv.ravel(), weights=np.repeat(dens, fv.shape[1]), minlength=M.n_vertices)
    cnt = np.bincount(fv.ravel(), minlength=M.n_vertices)
    return tot / np.maximum(cnt, 1)


def gauge_transform(M: DiscretizedManifold, P: MagneticPotential, tau: GaugeFunction) -> MagneticPotential:
    """``alpha -> alpha + d tau / (i tau)``: ``theta_uv += psi_v - psi_u``."""
    P.check_host(M)
    psi = np.asarray(tau.angle, dtype=float)
    if psi.shape != (M.n_vertices,):
        raise HostMismatch(f"gauge has {psi.shape} angles, host has {M.n_vertices} vertices")
    u, v = M.edges.T
    return _make(M, P.edge_phase + psi[v] - psi[u], f"{P.descriptor} (gauged)")


def holonomy(M: DiscretizedManifold, P: MagneticPotential, cycle) -> float:
    """Oriented phase sum along a closed edge path ``(edge_indices, signs)``."""
    P.check_host(M)
    edges, signs = (np.asarray(c) for c in cycle)
    if len(edges) == 0:
        raise ValueError("empty cycle")
    tails = np.where(signs > 0, M.edges[edges, 0], M.edges[edges, 1])
    heads = np.where(signs > 0, M.edges[edges, 1], M.edges[edges, 0])
    if not (np.array_equal(heads[:-1], tails[1:]) and heads[-1] == tails[0]):
        raise ValueError("edge path is not closed")
    return float((P.edge_phase[edges] * signs).sum())


def is_gauge_trivial(M: DiscretizedManifold, P: MagneticPotential, tol: float = DEFAULT_TRIVIAL_TOL) -> bool:
    """Zero field on every face and every generator holonomy in ``2 pi Z``."""
    if M.n_faces and np.max(np.abs(face_fluxes(M, P))) > tol:
        return False
    P.check_host(M)
    for cyc in M.homology_generators:
        if abs(wrap_angle(holonomy(M, P, cyc))) > tol:
            return False
    return True
