import itertools

import numpy as np
import pytest

from conftest import random_density, random_hermitian
from steerkit.povm import PAULI_X, PAULI_Z
from steerkit.qmat import (
    Bipartition,
    HermitianMatrix,
    is_perm_invariant,
    is_psd,
    kron,
    partial_trace,
    partial_transpose,
    permutation_unitary,
    reorder_subsystems,
    schmidt,
)
from steerkit.states import ghz, w


def test_kron_examples():
    assert np.allclose(kron(np.eye(2), np.eye(2)), np.eye(4))
    xz = kron(PAULI_X, PAULI_Z)
    assert np.allclose(xz[:2, 2:], PAULI_Z) and np.allclose(xz[2:, :2], PAULI_Z)
    assert np.allclose(xz[:2, :2], 0)
    assert np.allclose(kron(np.eye(2) / 2, np.eye(2) / 2), np.eye(4) / 4)


def test_hermitian_matrix_kron_dims():
    a = HermitianMatrix(np.eye(2), (2,))
    b = HermitianMatrix(np.eye(3), (3,))
    assert a.kron(b).dims == (2, 3)
    with pytest.raises(ValueError):
        HermitianMatrix(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        HermitianMatrix(np.eye(4), (2, 3))


def test_partial_trace_examples(oracles):
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(partial_trace(np.outer(phi, phi), [2, 2], [1]), np.eye(2) / 2)
    rho = ghz(3).density()
    assert np.allclose(partial_trace(rho, [2, 2, 2], [1, 2]), oracles["ghz3_trace_23"], atol=1e-14)


def test_partial_trace_product(rng):
    ra, rb = random_density(rng, 2), random_density(rng, 3)
    assert np.allclose(partial_trace(np.kron(ra, rb), [2, 3], [0]), rb)


@pytest.mark.parametrize("da,db", [(2, 2), (2, 3), (3, 2)])
def test_partial_trace_of_kron_is_scaled(rng, da, db):
    for _ in range(5):
        a, b = random_hermitian(rng, da), random_hermitian(rng, db)
        assert np.allclose(partial_trace(np.kron(a, b), [da, db], [1]), np.trace(b) * a)


def test_partial_trace_bad_index():
    with pytest.raises(IndexError):
        partial_trace(np.eye(4), [2, 2], [2])


def test_partial_transpose(oracles, rng):
    ra, rb = random_density(rng, 2), random_density(rng, 2)
    sep = np.kron(ra, rb)
    pt = partial_transpose(sep, [2, 2], 1)
    assert np.allclose(pt, np.kron(ra, rb.T))
    assert is_psd(pt)
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    ppt = partial_transpose(np.outer(phi, phi), [2, 2], 1)
    assert np.linalg.eigvalsh(ppt).min() == pytest.approx(oracles["pt_phi_plus_min_eig"], abs=1e-12)
    assert not is_psd(ppt)
    m = random_hermitian(rng, 6)
    assert np.allclose(partial_transpose(partial_transpose(m, [2, 3], 0), [2, 3], 0), m)
    assert np.trace(partial_transpose(m, [2, 3], 1)) == pytest.approx(np.trace(m))
    with pytest.raises(IndexError):
        partial_transpose(m, [2, 3], 5)


def test_permutation_unitary():
    assert np.allclose(permutation_unitary([2, 2, 2], [0, 1, 2]), np.eye(8))
    swap = permutation_unitary([2, 2], [1, 0])
    ket01 = np.eye(4)[1]
    assert np.allclose(swap @ ket01, np.eye(4)[2])
    psi = ghz(3).amplitudes
    for perm in itertools.permutations(range(3)):
        assert np.allclose(permutation_unitary([2, 2, 2], perm) @ psi, psi)
    with pytest.raises(ValueError):
        permutation_unitary([2, 3], [1, 0])


def test_permutation_unitary_composes():
    dims = [2, 2, 2, 2]
    for p, q in itertools.product(itertools.permutations(range(4)), repeat=2):
        comp = [p[q[j]] for j in range(4)]
        lhs = permutation_unitary(dims, comp)
        rhs = permutation_unitary(dims, p) @ permutation_unitary(dims, q)
        assert np.allclose(lhs, rhs)


def test_permutation_matches_reorder(rng):
    dims = [2, 3, 2]
    v = rng.normal(size=12) + 1j * rng.normal(size=12)
    # subsystems 0 and 2 have equal dimension, so swap them
    assert np.allclose(permutation_unitary(dims, [2, 1, 0]) @ v, reorder_subsystems(v, dims, [2, 1, 0]))


def test_schmidt_examples(oracles):
    dec = schmidt(ghz(3).amplitudes, (2, 2, 2), Bipartition.first_vs_rest(3))
    assert np.allclose(dec.coefficients, [1 / np.sqrt(2)] * 2)
    dec = schmidt(w(3).amplitudes, (2, 2, 2), Bipartition.first_vs_rest(3))
    assert np.allclose(dec.coefficients, oracles["w3_schmidt"], atol=1e-12)
    prod = np.kron([1, 0], [0.6, 0.8])
    assert np.allclose(schmidt(prod, (2, 2), Bipartition((0,), (1,))).coefficients, [1.0])


@pytest.mark.parametrize("dims,part1", [((2, 2, 2), (0,)), ((2, 3, 2), (1,)), ((3, 2, 2), (0, 2)), ((2, 2, 2, 2), (1, 3))])
def test_schmidt_round_trip(rng, dims, part1):
    n = len(dims)
    cut = Bipartition(part1, tuple(i for i in range(n) if i not in part1))
    for _ in range(5):
        v = rng.normal(size=int(np.prod(dims))) + 1j * rng.normal(size=int(np.prod(dims)))
        v /= np.linalg.norm(v)
        dec = schmidt(v, dims, cut)
        assert np.all(np.diff(dec.coefficients) <= 1e-15)
        assert np.sum(dec.coefficients**2) == pytest.approx(1.0)
        assert np.allclose(dec.left_vectors.conj() @ dec.left_vectors.T, np.eye(dec.rank))
        assert np.allclose(dec.right_vectors.conj() @ dec.right_vectors.T, np.eye(dec.rank))
        ordered = reorder_subsystems(v, dims, list(cut.part1) + list(cut.part2))
        assert abs(np.vdot(ordered, dec.reconstruct())) ** 2 >= 1 - 1e-10


def test_bipartition_validation():
    with pytest.raises(ValueError):
        Bipartition((), (0, 1))
    with pytest.raises(ValueError):
        Bipartition((0, 1), (1, 2))
    with pytest.raises(ValueError):
        Bipartition((0,), (1,)).check(3)


def test_is_psd_and_invariance():
    assert is_psd(np.eye(2) / 2)
    with pytest.raises(ValueError):
        is_psd(np.array([[0, 1], [0, 0]]))
    rho = ghz(3).density()
    assert is_perm_invariant(rho, [2, 2, 2], [0, 1, 2])
    asym = np.kron(np.diag([1, 0]), np.eye(4) / 4)
    assert not is_perm_invariant(asym, [2, 2, 2], [0, 1])


def test_lemma1_kernel_orthogonality(rng):
    # PSD summands of A annihilate the kernel of A
    for _ in range(10):
        basis = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))[0]
        support = basis[:, :2]
        parts = []
        for _ in range(3):
            c = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            parts.append(support @ c @ c.conj().T @ support.conj().T)
        kernel = basis[:, 2:]
        for b in parts:
            assert np.linalg.norm(b @ kernel) <= 1e-8
