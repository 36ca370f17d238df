import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import magspec as ms
from magspec.eigensolve import EigensolverError, read_eigenvectors

from conftest import random_gauge


def circle_oracle(A, L, k, n):
    h = L / n
    ks = np.arange(-n // 2, n // 2)
    return np.sort((4 / h ** 2) * np.sin((2 * math.pi * ks / L + A) * h / 2) ** 2)[:k]


@pytest.mark.parametrize("A", [0.0, 0.25, 0.5, -0.5, 1.0])
def test_circle_matches_discrete_fourier(A):
    n, L = 256, 2 * math.pi
    M = ms.circle_grid(L, n)
    S = ms.smallest_k(ms.assemble(M, ms.circle_constant(M, A)), 6)
    np.testing.assert_allclose(S.eigenvalues, circle_oracle(A, L, 6, n), atol=1e-10)


def test_circle_frozen_values(circle512):
    S = ms.smallest_k(ms.assemble(circle512, ms.circle_constant(circle512, 0.5)), 6)
    np.testing.assert_allclose(S.eigenvalues, [0.24999922, 0.24999922, 2.24993647, 2.24993647,
                                               6.24950979, 6.24950979], atol=1e-8)
    assert S.residuals.max() < 1e-10


def test_torus_frozen_values(torus32):
    S = ms.smallest_k(ms.assemble(torus32, ms.torus_constant(torus32, 0.3, 0.4)), 4)
    np.testing.assert_allclose(S.eigenvalues, [0.24989175, 0.4495578, 0.64914687, 0.84881292], atol=1e-8)
    S = ms.smallest_k(ms.assemble(torus32, ms.torus_uniform_flux(torus32, 2)), 4)
    np.testing.assert_allclose(S.eigenvalues, [0.31782185, 0.31782185, 0.95249049, 0.95249049], atol=1e-8)


def test_sphere_frozen_values(sphere4):
    S = ms.smallest_k(ms.assemble(sphere4, ms.zero_potential(sphere4)), 9)
    np.testing.assert_allclose(S.eigenvalues[1:], [1.99999936] * 3 + [5.99145286] * 5, atol=1e-7)
    assert abs(S.eigenvalues[0]) < 1e-10
    S = ms.smallest_k(ms.assemble(sphere4, ms.sphere_axial(sphere4, 0.1)), 4)
    np.testing.assert_allclose(S.eigenvalues, [0.00665568, 1.80825063, 2.0039816, 2.20767885], atol=1e-7)


def test_eigenvectors_mass_orthonormal(torus32):
    S = ms.smallest_k(ms.assemble(torus32, ms.torus_uniform_flux(torus32, 2)), 5)
    X = S.eigenvectors
    G = X.conj().T @ (torus32.vertex_volume[:, None] * X)
    np.testing.assert_allclose(G, np.eye(5), atol=1e-10)


@pytest.mark.parametrize("make", [
    lambda: (lambda M: (M, ms.circle_constant(M, 0.31)))(ms.circle_grid(2 * math.pi, 300)),
    lambda: (lambda M: (M, ms.torus_uniform_flux(M, 3)))(ms.torus_grid(2.0, 2.0, 20, 20)),
    lambda: (lambda M: (M, ms.sphere_axial(M, 0.2)))(ms.icosphere(3)),
])
def test_dense_lanczos_agree(make):
    M, P = make()
    op = ms.assemble(M, P)
    a = ms.smallest_k(op, 5, method="dense")
    b = ms.smallest_k(op, 5, method="lanczos")
    np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, atol=1e-8)
    assert b.residuals.max() <= 1e-9


def test_lanczos_seed_determinism(sphere3):
    op = ms.assemble(sphere3, ms.sphere_axial(sphere3, 0.1))
    a = ms.smallest_k(op, 4, method="lanczos", seed=7)
    b = ms.smallest_k(op, 4, method="lanczos", seed=7)
    np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)
    np.testing.assert_array_equal(a.eigenvectors, b.eigenvectors)


def test_lanczos_failure_reports_residuals(sphere3):
    op = ms.assemble(sphere3, ms.zero_potential(sphere3))
    with pytest.raises(EigensolverError) as ei:
        ms.smallest_k(op, 4, method="lanczos", max_restarts=1, max_basis=24, tol=1e-14)
    assert ei.value.residuals is not None


@pytest.mark.parametrize("k", [0, 10_000])
def test_bad_k(k, circle512):
    with pytest.raises(ValueError):
        ms.smallest_k(ms.assemble(circle512, ms.zero_potential(circle512)), k)


def test_bad_method(circle512):
    with pytest.raises(ValueError):
        ms.smallest_k(ms.assemble(circle512, ms.zero_potential(circle512)), 2, method="qr")


def test_psd(sphere3):
    op = ms.assemble(sphere3, ms.sphere_axial(sphere3, 0.5))
    lam = np.linalg.eigvalsh(op.dense_symmetrized())
    assert lam.min() >= -1e-10 * lam.max()


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_spectrum_gauge_invariant(seed):
    rng = np.random.default_rng(seed)
    M = ms.torus_grid(2.0, 2.0, 10, 10)
    P = ms.torus_constant(M, 0.3, 0.4)
    Q = ms.gauge_transform(M, P, random_gauge(M, rng))
    a = ms.smallest_k(ms.assemble(M, P), 6).eigenvalues
    b = ms.smallest_k(ms.assemble(M, Q), 6).eigenvalues
    np.testing.assert_allclose(a, b, atol=1e-8)


@pytest.mark.parametrize("lam,groups", [
    ([0.0, 1.0, 1.0 + 1e-9, 2.0], [[1, 1], [2, 3], [4, 4]]),
    ([1.0, 1.0, 1.0], [[1, 3]]),
    ([0.0, 1e-3], [[1, 1], [2, 2]]),
    ([], []),
])
def test_degenerate_groups(lam, groups):
    assert ms.degenerate_groups(np.array(lam)) == groups


def test_eigenvector_file_roundtrip(tmp_path, circle512):
    S = ms.smallest_k(ms.assemble(circle512, ms.circle_constant(circle512, 0.5)), 3)
    p = tmp_path / "v.bin"
    S.write_eigenvectors(p)
    raw = p.read_bytes()
    assert raw[:8] == b"MAGSPECV" and len(raw) == 32 + 16 * 512 * 3
    np.testing.assert_array_equal(read_eigenvectors(p), S.eigenvectors)
