"""Pure-state families and the symmetry test behind the one-untrusted-party result."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .qmat import Bipartition, _as_dims, _transposition_perm, permutation_unitary, schmidt, transpositions


@dataclass(frozen=True)
class PureState:
    """Normalized state vector with subsystem dimensions (read-only)."""

    amplitudes: np.ndarray
    dims: tuple[int, ...]
    tol: float = 1e-8

    def __post_init__(self) -> None:
        amp = np.array(self.amplitudes, dtype=complex).reshape(-1)
        dims = _as_dims(self.dims)
        if amp.size != int(np.prod(dims)):
            raise ValueError(f"{amp.size} amplitudes do not match dims {dims}")
        if abs(np.linalg.norm(amp) - 1.0) > self.tol:
            raise ValueError(f"state has norm {np.linalg.norm(amp):.6g}, expected 1")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "dims", dims)

    @property
    def n_parties(self) -> int:
        return len(self.dims)

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def kron(self, other: "PureState") -> "PureState":
        return PureState(np.kron(self.amplitudes, other.amplitudes), self.dims + other.dims)


def basis_state(digits: Sequence[int], dims: Sequence[int]) -> PureState:
    amp = np.zeros(int(np.prod(dims)), dtype=complex)
    amp[np.ravel_multi_index(tuple(digits), tuple(dims))] = 1.0
    return PureState(amp, tuple(dims))


def ghz(n: int, d: int = 2) -> PureState:
    """``(1/sqrt(d)) sum_i |i>^{(x) n}``; the usual GHZ state for ``d = 2``."""
    if n < 2:
        raise ValueError("GHZ needs at least two parties")
    if d < 2:
        raise ValueError("local dimension must be at least 2")
    dims = (d,) * n
    amp = np.zeros(d**n, dtype=complex)
    for i in range(d):
        amp[np.ravel_multi_index((i,) * n, dims)] = 1 / np.sqrt(d)
    return PureState(amp, dims)


def dicke(n: int, k: int) -> PureState:
    """Uniform superposition of the n-qubit bitstrings of Hamming weight ``k``."""
    if not 0 < k < n:
        raise ValueError(f"Dicke weight k={k} must satisfy 0 < k < n={n}")
    dims = (2,) * n
    amp = np.zeros(2**n, dtype=complex)
    for ones in itertools.combinations(range(n), k):
        bits = [1 if i in ones else 0 for i in range(n)]
        amp[np.ravel_multi_index(tuple(bits), dims)] = 1.0
    return PureState(amp / np.linalg.norm(amp), dims)


def w(n: int = 3) -> PureState:
    return dicke(n, 1)


def max_entangled(d: int = 2) -> PureState:
    if d < 2:
        raise ValueError("maximally entangled state needs d >= 2")
    amp = np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)
    return PureState(amp, (d, d))


def haar_random_state(dims: Sequence[int], rng: np.random.Generator) -> PureState:
    total = int(np.prod(dims))
    v = rng.normal(size=total) + 1j * rng.normal(size=total)
    return PureState(v / np.linalg.norm(v), tuple(dims))


def thm1_hypothesis(psi: PureState, tol: float = 1e-8) -> bool:
    """Full Schmidt rank at ``1|2...n`` and invariance under permuting parties ``2..n``.

    Right Schmidt vectors are unique only up to phases (and rotations inside
    degenerate blocks), so invariance is tested on the state itself:
    ``(1 (x) V) psi = e^{i theta} psi`` for every transposition ``V``. The phase is
    common to all Schmidt vectors, which is what keeps ``|psi><psi|`` invariant
    under conjugation.
    """
    dims = psi.dims
    if len(dims) < 2:
        return False
    dec = schmidt(psi.amplitudes, dims, Bipartition.first_vs_rest(len(dims)))
    if dec.rank != dims[0]:
        return False
    rest = list(range(1, len(dims)))
    if len(set(dims[1:])) > 1:
        return False
    for i, j in transpositions(rest):
        v = permutation_unitary(dims, _transposition_perm(len(dims), i, j))
        moved = v @ psi.amplitudes
        overlap = np.vdot(psi.amplitudes, moved)
        if abs(abs(overlap) - 1.0) > tol or np.max(np.abs(moved - overlap * psi.amplitudes)) > tol:
            return False
    return True
