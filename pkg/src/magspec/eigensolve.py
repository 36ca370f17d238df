"""Smallest eigenpairs of the Hermitian pencil ``(A, M)`` with diagonal ``M``.

Small problems go through dense LAPACK diagonalization.  Larger ones use a
block Lanczos iteration with full reorthogonalization and thick restarts.
The iteration runs in ``M^{1/2}``-scaled coordinates, where the
M-inner-product Lanczos recurrence for ``M^{-1} A`` becomes the Euclidean one
for ``S = M^{-1/2} A M^{-1/2}``; eigenvectors are mapped back to be
M-orthonormal.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .operator import MagneticOperator

DEFAULT_SEED = 0x5EED
DENSE_THRESHOLD = 1500
DEFAULT_TOL = 1e-9
DEGENERACY_GAP_TOL = 1e-6

EIGVEC_MAGIC = b"MAGSPECV"
EIGVEC_VERSION = 1


class EigensolverError(RuntimeError):
    """Lanczos failed to converge; ``residuals`` holds the best residuals reached."""

    def __init__(self, message, residuals=None, eigenvalues=None):
        super().__init__(message)
        self.residuals = residuals
        self.eigenvalues = eigenvalues


@dataclass(eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "residuals": [float(x) for x in self.residuals],
            "metadata": self.metadata,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def write_eigenvectors(self, path) -> None:
        """Binary column file: 32-byte header then columns of little-endian complex128.

        Header: magic ``MAGSPECV`` (8 bytes), uint32 version, uint32 reserved (0),
        uint64 rows N, uint64 columns k.  Each column is N values stored as
        interleaved float64 ``(re, im)`` pairs.
        """
        X = np.asarray(self.eigenvectors, dtype="<c16")
        N, k = X.shape
        with open(path, "wb") as fh:
            fh.write(EIGVEC_MAGIC)
            fh.write(struct.pack("<IIQQ", EIGVEC_VERSION, 0, N, k))
            fh.write(np.asfortranarray(X).T.tobytes())


def read_eigenvectors(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(8) != EIGVEC_MAGIC:
            raise ValueError(f"{path} is not an eigenvector file")
        version, _, N, k = struct.unpack("<IIQQ", fh.read(24))
        if version != EIGVEC_VERSION:
            raise ValueError(f"unsupported eigenvector file version {version}")
        data = np.frombuffer(fh.read(), dtype="<c16")
    return data.reshape(k, N).T.copy()


def _fix_phase(X):
    # deterministic global phase per column: largest-modulus entry real positive
    idx = np.argmax(np.abs(X) - 1e-12 * np.arange(X.shape[0])[:, None], axis=0)
    ph = X[idx, np.arange(X.shape[1])]
    return X * (np.abs(ph) / np.where(ph == 0, 1, ph))[None, :]


def _residuals(op, lam, X):
    R = op.stiffness @ X - (op.mass[:, None] * X) * lam[None, :]
    return np.linalg.norm(R, axis=0) / np.linalg.norm(X, axis=0)


def _finish(op, lam, Y, meta):
    d = 1.0 / np.sqrt(op.mass)
    X = _fix_phase(d[:, None] * Y)
    return Spectrum(eigenvalues=np.asarray(lam, dtype=float), eigenvectors=X,
                    residuals=_residuals(op, lam, X), metadata=meta)


def _dense(op, k):
    lam, Y = sla.eigh(op.dense_symmetrized(), subset_by_index=[0, k - 1], driver="evr")
    return lam, Y


def _proj(V, Z):
    # V^H Z without conjugating (copying) the tall basis
    return (Z.conj().T @ V).conj().T


def _orthonormalize(Z, V, rng, scale):
    """Orthonormalize block ``Z`` against ``V`` and itself; refill deficient columns."""
    for _ in range(2):
        if V.shape[1]:
            Z = Z - V @ _proj(V, Z)
    Q, R = np.linalg.qr(Z)
    bad = np.abs(np.diag(R)) <= 1e-10 * max(scale, 1e-300)
    if np.any(bad):
        fill = rng.standard_normal((Z.shape[0], int(bad.sum()))) + 1j * rng.standard_normal((Z.shape[0], int(bad.sum())))
        Q[:, bad] = fill
        basis = np.hstack([V, Q[:, ~bad]]) if V.shape[1] else Q[:, ~bad]
        for _ in range(2):
            Q[:, bad] -= basis @ _proj(basis, Q[:, bad])
        Q, _ = np.linalg.qr(Q)
        for _ in range(2):
            if V.shape[1]:
                Q = Q - V @ _proj(V, Q)
        Q, _ = np.linalg.qr(Q)
    return Q


def _lanczos(op, k, tol, seed, block_size, max_basis, max_restarts):
    N = op.size
    d = 1.0 / np.sqrt(op.mass)
    A = op.stiffness

    def S(Y):
        return d[:, None] * (A @ (d[:, None] * Y))

    b = block_size or max(k, 4)
    b = min(b, N)
    keep = min(N, k + b)
    m_max = min(N, max(max_basis, keep + 4 * b))
    rng = np.random.default_rng(seed)
    X0 = rng.standard_normal((N, b)) + 1j * rng.standard_normal((N, b))
    block = _orthonormalize(X0, np.zeros((N, 0), complex), rng, 1.0)
    Vbuf = np.empty((N, m_max), complex)
    SVbuf = np.empty((N, m_max), complex)
    m = 0
    matvecs = 0
    res = None
    lam = None
    for restart in range(max_restarts):
        while m + block.shape[1] <= m_max:
            nb = block.shape[1]
            W = S(block)
            matvecs += nb
            Vbuf[:, m:m + nb] = block
            SVbuf[:, m:m + nb] = W
            m += nb
            if m + b > m_max or m >= N:
                break
            block = _orthonormalize(W, Vbuf[:, :m], rng, np.linalg.norm(W))
        V, SV = Vbuf[:, :m], SVbuf[:, :m]
        H = _proj(V, SV)
        H = 0.5 * (H + H.conj().T)
        theta, C = sla.eigh(H)
        nk = min(keep, len(theta))
        Y = V @ C[:, :nk]
        SY = SV @ C[:, :nk]
        lam = theta[:k]
        R = SY[:, :k] - Y[:, :k] * lam[None, :]
        # pencil residual ||A x - lam M x|| / ||x|| with x = M^{-1/2} y
        res = np.linalg.norm(R / d[:, None], axis=0) / np.linalg.norm(Y[:, :k] * d[:, None], axis=0)
        if np.all(res <= tol) or m >= N:
            Yk = _orthonormalize(Y[:, :k], np.zeros((N, 0), complex), rng, 1.0) if k > 1 else Y[:, :k]
            Hk = Yk.conj().T @ S(Yk)
            lam2, C2 = sla.eigh(0.5 * (Hk + Hk.conj().T))
            meta = {"method": "lanczos", "restarts": restart, "matvecs": matvecs,
                    "block_size": b, "max_basis": m_max, "seed": seed, "tol": tol}
            return lam2, Yk @ C2, meta
        # thick restart: keep Ritz vectors, continue from the pending block
        Wlast = SV[:, -b:]
        block = _orthonormalize(Wlast, V, rng, np.linalg.norm(Wlast))
        Vbuf[:, :nk] = Y
        SVbuf[:, :nk] = SY
        m = nk
    raise EigensolverError(
        f"Lanczos did not converge after {max_restarts} restarts (max residual {res.max():.3e} > {tol:g})",
        residuals=res, eigenvalues=lam,
    )


def smallest_k(op: MagneticOperator, k: int, tol: float = DEFAULT_TOL, *, seed: int = DEFAULT_SEED,
               dense_threshold: int = DENSE_THRESHOLD, method: str = "auto",
               block_size: int | None = None, max_basis: int = 240,
               max_restarts: int = 400) -> Spectrum:
    """The ``k`` smallest eigenpairs of ``A x = lambda M x``.

    ``method`` is ``"auto"`` (dense up to ``dense_threshold`` vertices),
    ``"dense"`` or ``"lanczos"``.  Eigenvectors are M-orthonormal.
    """
    N = op.size
    if not 1 <= k <= N:
        raise ValueError(f"k must lie in [1, {N}], got {k}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if method == "auto":
        method = "dense" if N <= dense_threshold else "lanczos"
    if method == "dense":
        lam, Y = _dense(op, k)
        meta = {"method": "dense", "driver": "evr", "seed": seed, "tol": tol}
    elif method == "lanczos":
        lam, Y, meta = _lanczos(op, k, tol, seed, block_size, max_basis, max_restarts)
    else:
        raise ValueError(f"unknown method {method!r}")
    meta.update(N=N, k=k)
    spec = _finish(op, lam, Y, meta)
    if method == "lanczos" and np.any(spec.residuals > tol):
        raise EigensolverError(
            f"final residual {spec.residuals.max():.3e} exceeds tol {tol:g}",
            residuals=spec.residuals, eigenvalues=spec.eigenvalues)
    return spec


def degenerate_groups(S: Spectrum | np.ndarray, gap_tol: float = DEGENERACY_GAP_TOL) -> list[list[int]]:
    """Group eigenvalues whose successive gaps are ``<= gap_tol * max(1, lambda)``.

    Returns 1-based inclusive index ranges ``[first, last]`` matching the
    numbering ``lambda_1 <= lambda_2 <= ...``.
    """
    lam = np.asarray(S.eigenvalues if isinstance(S, Spectrum) else S, dtype=float)
    if lam.size == 0:
        return []
    groups = [[1, 1]]
    for i in range(1, len(lam)):
        if lam[i] - lam[i - 1] <= gap_tol * max(1.0, abs(lam[i])):
            groups[-1][1] = i + 1
        else:
            groups.append([i + 1, i + 1])
    return groups
