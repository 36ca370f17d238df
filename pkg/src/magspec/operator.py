"""Assembly of the discrete magnetic Laplacian as a Hermitian pencil ``(A, M)``.

``A`` is the magnetic stiffness matrix, ``A_uu = sum_e w_e`` and
``A_uv = -w_e exp(i theta_uv)``, so ``f* A f = sum_e w_e |f_u - e^{i theta_uv} f_v|^2``;
``M`` is the diagonal lumped mass.  The operator acting on vertex functions is
``M^{-1} A``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import DiscretizedManifold
from .magnetic import MagneticPotential


@dataclass(frozen=True, eq=False)
class MagneticOperator:
    stiffness: sp.csr_matrix
    mass: np.ndarray
    manifold: DiscretizedManifold
    potential: MagneticPotential

    @property
    def size(self) -> int:
        return len(self.mass)

    def dense_symmetrized(self) -> np.ndarray:
        """``M^{-1/2} A M^{-1/2}`` as a dense Hermitian array."""
        d = 1.0 / np.sqrt(self.mass)
        return d[:, None] * self.stiffness.toarray() * d[None, :]

    def write_matrix_market(self, path) -> None:
        """Stiffness matrix in MatrixMarket ``coordinate complex hermitian`` format.

        Only the lower triangle is written, as the format requires.
        """
        low = sp.tril(self.stiffness).tocoo()
        order = np.lexsort((low.row, low.col))
        with open(path, "w") as fh:
            fh.write("%%MatrixMarket matrix coordinate complex hermitian\n")
            fh.write(f"% magnetic stiffness; model {self.manifold.describe()}; potential {self.potential.descriptor}\n")
            fh.write(f"{self.size} {self.size} {low.nnz}\n")
            for r, c, z in zip(low.row[order], low.col[order], low.data[order]):
                fh.write(f"{r + 1} {c + 1} {z.real:.17g} {z.imag:.17g}\n")


def assemble(M: DiscretizedManifold, P: MagneticPotential) -> MagneticOperator:
    P.check_host(M)
    u, v = M.edges.T
    w = M.conductance
    N = M.n_vertices
    off = -w * np.exp(1j * P.edge_phase)
    diag = np.bincount(u, weights=w, minlength=N) + np.bincount(v, weights=w, minlength=N)
    rows = np.concatenate([u, v, np.arange(N)])
    cols = np.concatenate([v, u, np.arange(N)])
    vals = np.concatenate([off, off.conj(), diag.astype(complex)])
    A = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    A.sort_indices()
    return MagneticOperator(stiffness=A, mass=M.vertex_volume.copy(), manifold=M, potential=P)


def _check_vec(op, f):
    f = np.asarray(f, dtype=complex)
    if f.shape[0] != op.size:
        raise ValueError(f"vector of length {f.shape[0]} for operator of size {op.size}")
    return f


def apply(op: MagneticOperator, f) -> np.ndarray:
    """``M^{-1} A f``; accepts a vector or a block of column vectors."""
    f = _check_vec(op, f)
    out = op.stiffness @ f
    return out / (op.mass if f.ndim == 1 else op.mass[:, None])


def energy(op: MagneticOperator, f) -> float:
    """``f* A f``, the discrete ``int |d^alpha f|^2``."""
    f = _check_vec(op, f)
    return float(np.vdot(f, op.stiffness @ f).real)


def edge_energy(op: MagneticOperator, f) -> float:
    """Same quadratic form summed edge by edge (independent of the matrix)."""
    f = _check_vec(op, f)
    M = op.manifold
    u, v = M.edges.T
    d = f[u] - np.exp(1j * op.potential.edge_phase) * f[v]
    return float((M.conductance * np.abs(d) ** 2).sum())


def rayleigh(op: MagneticOperator, f) -> float:
    f = _check_vec(op, f)
    den = float((op.mass * np.abs(f) ** 2).sum())
    if den == 0.0:
        raise ValueError("Rayleigh quotient of the zero vector")
    return energy(op, f) / den
