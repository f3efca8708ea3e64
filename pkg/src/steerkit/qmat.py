"""Dense complex linear algebra on multipartite Hilbert spaces.

Functions take plain ``numpy`` arrays together with a ``dims`` list giving the
local dimension of each tensor factor. Leading batch axes are allowed for
``partial_trace`` and ``partial_transpose``: an array of shape ``(..., D, D)``
is treated as a stack of operators. Subsystems are indexed from 0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

HERM_TOL = 1e-8
SCHMIDT_CUTOFF = 1e-10


def _as_dims(dims: Iterable[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise ValueError(f"invalid subsystem dimensions {dims}")
    return dims


def _check_square(mat: np.ndarray, dims: Sequence[int]) -> int:
    total = int(np.prod(dims))
    if mat.shape[-2:] != (total, total):
        raise ValueError(f"operator of shape {mat.shape[-2:]} does not match dims {tuple(dims)}")
    return total


def _check_indices(indices: Iterable[int], n: int) -> tuple[int, ...]:
    out = tuple(sorted({int(i) for i in indices}))
    for i in out:
        if not 0 <= i < n:
            raise IndexError(f"subsystem index {i} out of range for {n} subsystems")
    return out


def dagger(mat: np.ndarray) -> np.ndarray:
    return np.swapaxes(np.conj(mat), -1, -2)


def is_hermitian(mat: np.ndarray, tol: float = HERM_TOL) -> bool:
    mat = np.asarray(mat)
    return mat.shape[-1] == mat.shape[-2] and bool(np.max(np.abs(mat - dagger(mat)), initial=0.0) <= tol)


def kron(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of any number of operators (or vectors)."""
    out = np.ones((1, 1) if np.ndim(ops[0]) == 2 else (1,), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def partial_trace(mat: np.ndarray, dims: Sequence[int], traced: Iterable[int]) -> np.ndarray:
    """Trace out the subsystems listed in ``traced``.

    >>> partial_trace(np.eye(4), [2, 2], [1])
    array([[2.+0.j, 0.+0.j],
           [0.+0.j, 2.+0.j]])
    """
    dims = _as_dims(dims)
    mat = np.asarray(mat, dtype=complex)
    _check_square(mat, dims)
    traced = _check_indices(traced, len(dims))
    kept = [i for i in range(len(dims)) if i not in traced]
    batch = mat.shape[:-2]
    n = len(dims)
    tensor = mat.reshape(batch + dims + dims)
    nb = len(batch)
    # bring (kept, traced | kept', traced') together, then contract the traced pair
    perm = (
        list(range(nb))
        + [nb + i for i in kept]
        + [nb + i for i in traced]
        + [nb + n + i for i in kept]
        + [nb + n + i for i in traced]
    )
    dk = int(np.prod([dims[i] for i in kept])) if kept else 1
    dt = int(np.prod([dims[i] for i in traced])) if traced else 1
    tensor = tensor.transpose(perm).reshape(batch + (dk, dt, dk, dt))
    return np.einsum("...ijkj->...ik", tensor)


def partial_transpose(mat: np.ndarray, dims: Sequence[int], sys: int | Iterable[int]) -> np.ndarray:
    dims = _as_dims(dims)
    mat = np.asarray(mat)
    total = _check_square(mat, dims)
    systems = _check_indices([sys] if np.isscalar(sys) else sys, len(dims))
    batch = mat.shape[:-2]
    n, nb = len(dims), len(batch)
    perm = list(range(nb + 2 * n))
    for i in systems:
        perm[nb + i], perm[nb + n + i] = perm[nb + n + i], perm[nb + i]
    return mat.reshape(batch + dims + dims).transpose(perm).reshape(batch + (total, total))


def reorder_subsystems(vec_or_mat: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors so that position ``k`` holds old subsystem ``order[k]``.

    Works on vectors ``(D,)`` and on operator stacks ``(..., D, D)``; the local
    dimensions may differ.
    """
    dims = _as_dims(dims)
    order = list(order)
    if sorted(order) != list(range(len(dims))):
        raise ValueError(f"{order} is not a permutation of {len(dims)} subsystems")
    arr = np.asarray(vec_or_mat)
    n = len(dims)
    if arr.ndim == 1:
        return arr.reshape(dims).transpose(order).reshape(-1)
    batch = arr.shape[:-2]
    nb = len(batch)
    perm = list(range(nb)) + [nb + i for i in order] + [nb + n + i for i in order]
    total = int(np.prod(dims))
    return arr.reshape(batch + dims + dims).transpose(perm).reshape(batch + (total, total))


def permutation_unitary(dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Unitary sending subsystem ``j`` to position ``perm[j]``.

    On product basis vectors ``V|i_0 ... i_{n-1}> = |i_{perm^-1(0)} ... >``, so
    ``permutation_unitary(dims, p) @ permutation_unitary(dims, q)`` equals the
    unitary of the composition ``p o q``.
    """
    dims = _as_dims(dims)
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(len(dims))):
        raise ValueError(f"{perm} is not a permutation of {len(dims)} subsystems")
    for j, pj in enumerate(perm):
        if dims[j] != dims[pj]:
            raise ValueError("permuted subsystems must have equal dimension")
    inverse = np.argsort(perm)
    total = int(np.prod(dims))
    eye = np.eye(total, dtype=complex)
    # column c of V is V|c>; reorder the factors of every basis vector at once
    cols = eye.reshape((total,) + dims).transpose([0] + [1 + int(i) for i in inverse]).reshape(total, total)
    return cols.T


def transpositions(parties: Sequence[int]) -> list[tuple[int, int]]:
    return list(itertools.combinations(parties, 2))


def _transposition_perm(n: int, i: int, j: int) -> list[int]:
    perm = list(range(n))
    perm[i], perm[j] = j, i
    return perm


def min_eigenvalue(mat: np.ndarray) -> float:
    mat = np.asarray(mat)
    herm = 0.5 * (mat + dagger(mat))
    return float(np.min(np.linalg.eigvalsh(herm)))


def is_psd(mat: np.ndarray, tol: float = HERM_TOL) -> bool:
    """Positive semidefiniteness test: smallest eigenvalue >= -tol.

    Raises ``ValueError`` if the input is not Hermitian within ``tol``.
    """
    mat = np.asarray(mat)
    if not is_hermitian(mat, tol):
        raise ValueError("is_psd expects a Hermitian matrix")
    return min_eigenvalue(mat) >= -tol


def is_perm_invariant(mat: np.ndarray, dims: Sequence[int], parties: Sequence[int], tol: float = HERM_TOL) -> bool:
    """Check ``V^dag M V = M`` for every transposition of ``parties``."""
    dims = _as_dims(dims)
    mat = np.asarray(mat)
    if not is_hermitian(mat, tol):
        raise ValueError("is_perm_invariant expects a Hermitian matrix")
    _check_indices(parties, len(dims))
    for i, j in transpositions(parties):
        v = permutation_unitary(dims, _transposition_perm(len(dims), i, j))
        if np.max(np.abs(dagger(v) @ mat @ v - mat)) > tol:
            return False
    return True


def embed_operator(op: np.ndarray, dims: Sequence[int], party: int) -> np.ndarray:
    """``1 (x) ... (x) op (x) ... (x) 1`` with ``op`` acting on ``party``."""
    dims = _as_dims(dims)
    _check_indices([party], len(dims))
    left = int(np.prod(dims[:party]))
    right = int(np.prod(dims[party + 1 :]))
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


@dataclass(frozen=True)
class HermitianMatrix:
    """Hermitian operator with subsystem metadata; the stored array is read-only."""

    data: np.ndarray
    dims: tuple[int, ...] = field(default=())
    tol: float = field(default=HERM_TOL, compare=False, repr=False)

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError("HermitianMatrix needs a square 2-d array")
        dims = _as_dims(self.dims) if self.dims else (data.shape[0],)
        _check_square(data, dims)
        if not is_hermitian(data, self.tol):
            raise ValueError("matrix is not Hermitian within tolerance")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "dims", dims)

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    @property
    def d(self) -> int:
        return self.data.shape[0]

    def kron(self, other: "HermitianMatrix") -> "HermitianMatrix":
        return HermitianMatrix(np.kron(self.data, other.data), self.dims + other.dims)

    def partial_trace(self, traced: Iterable[int]) -> "HermitianMatrix":
        traced = _check_indices(traced, len(self.dims))
        kept = tuple(d for i, d in enumerate(self.dims) if i not in traced)
        return HermitianMatrix(partial_trace(self.data, self.dims, traced), kept or (1,))

    def partial_transpose(self, sys: int | Iterable[int]) -> "HermitianMatrix":
        return HermitianMatrix(partial_transpose(self.data, self.dims, sys), self.dims)

    def is_psd(self, tol: float = HERM_TOL) -> bool:
        return is_psd(self.data, tol)

    def min_eigenvalue(self) -> float:
        return min_eigenvalue(self.data)


@dataclass(frozen=True)
class Bipartition:
    part1: tuple[int, ...]
    part2: tuple[int, ...]

    def __post_init__(self) -> None:
        p1 = tuple(sorted(int(i) for i in self.part1))
        p2 = tuple(sorted(int(i) for i in self.part2))
        if not p1 or not p2:
            raise ValueError("both sides of a bipartition must be non-empty")
        if set(p1) & set(p2):
            raise ValueError("bipartition sides overlap")
        object.__setattr__(self, "part1", p1)
        object.__setattr__(self, "part2", p2)

    @classmethod
    def first_vs_rest(cls, n: int) -> "Bipartition":
        return cls((0,), tuple(range(1, n)))

    def check(self, n: int) -> None:
        if sorted(self.part1 + self.part2) != list(range(n)):
            raise ValueError(f"bipartition {self} does not cover {n} subsystems")


@dataclass(frozen=True)
class SchmidtDecomposition:
    coefficients: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    cut: Bipartition
    left_dims: tuple[int, ...]
    right_dims: tuple[int, ...]

    @property
    def rank(self) -> int:
        return len(self.coefficients)

    def reconstruct(self) -> np.ndarray:
        """State vector in the ordering (part1 subsystems, part2 subsystems)."""
        return np.einsum("k,ki,kj->ij", self.coefficients, self.left_vectors, self.right_vectors).reshape(-1)


def schmidt(psi: np.ndarray, dims: Sequence[int], cut: Bipartition, cutoff: float = SCHMIDT_CUTOFF) -> SchmidtDecomposition:
    """Schmidt decomposition of a pure state across ``cut`` (via SVD).

    Coefficients are sorted non-increasingly; values below ``cutoff`` are dropped
    and define the Schmidt rank. Each left vector has its first non-negligible
    entry real and positive.
    """
    dims = _as_dims(dims)
    cut.check(len(dims))
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.size != int(np.prod(dims)):
        raise ValueError("state length does not match dims")
    order = list(cut.part1) + list(cut.part2)
    left_dims = tuple(dims[i] for i in cut.part1)
    right_dims = tuple(dims[i] for i in cut.part2)
    mat = reorder_subsystems(psi, dims, order).reshape(int(np.prod(left_dims)), int(np.prod(right_dims)))
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    keep = s > cutoff
    u, s, vh = u[:, keep], s[keep], vh[keep]
    left = u.T.copy()
    right = vh.copy()
    for k in range(len(s)):
        idx = int(np.argmax(np.abs(left[k]) > 1e-12))
        phase = left[k, idx] / abs(left[k, idx])
        left[k] /= phase
        right[k] *= phase
    return SchmidtDecomposition(s, left, right, cut, left_dims, right_dims)
