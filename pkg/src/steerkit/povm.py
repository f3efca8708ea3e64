"""POVMs, measurement assemblages and classical post-processing."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .qmat import HERM_TOL, is_hermitian

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}

THM2_VISIBILITY = 2 ** -0.25


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Povm:
    """Single measurement ``elements[k]``, shape ``(n_outcomes, d, d)``."""

    elements: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.elements)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValueError("Povm elements must have shape (n, d, d)")
        object.__setattr__(self, "elements", _readonly(arr))

    @property
    def d(self) -> int:
        return self.elements.shape[1]

    def __len__(self) -> int:
        return self.elements.shape[0]

    def completeness_residual(self) -> float:
        return float(np.max(np.abs(self.elements.sum(axis=0) - np.eye(self.d))))

    def min_eigenvalue(self) -> float:
        return float(min(np.linalg.eigvalsh(0.5 * (e + e.conj().T)).min() for e in self.elements))

    def is_valid(self, tol: float = HERM_TOL) -> bool:
        return (
            all(is_hermitian(e, tol) for e in self.elements)
            and self.min_eigenvalue() >= -tol
            and self.completeness_residual() <= tol
        )


@dataclass(frozen=True)
class MeasurementAssemblage:
    """Family of POVMs ``elements[a, x]``, shape ``(n_outcomes, n_settings, d, d)``.

    Settings with fewer outcomes are padded with zero operators.
    """

    elements: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.elements)
        if arr.ndim != 4 or arr.shape[2] != arr.shape[3]:
            raise ValueError("measurement assemblage must have shape (n_outcomes, n_settings, d, d)")
        object.__setattr__(self, "elements", _readonly(arr))

    @classmethod
    def from_povms(cls, povms: Sequence[Povm | Sequence[np.ndarray]]) -> "MeasurementAssemblage":
        mats = [np.asarray(p.elements if isinstance(p, Povm) else p, dtype=complex) for p in povms]
        d = mats[0].shape[-1]
        n_out = max(m.shape[0] for m in mats)
        out = np.zeros((n_out, len(mats), d, d), dtype=complex)
        for x, m in enumerate(mats):
            if m.shape[-1] != d:
                raise ValueError("all settings must act on the same dimension")
            out[: m.shape[0], x] = m
        return cls(out)

    @property
    def n_outcomes(self) -> int:
        return self.elements.shape[0]

    @property
    def n_settings(self) -> int:
        return self.elements.shape[1]

    @property
    def d(self) -> int:
        return self.elements.shape[2]

    def setting(self, x: int) -> Povm:
        return Povm(self.elements[:, x])

    def transpose(self) -> "MeasurementAssemblage":
        return MeasurementAssemblage(np.swapaxes(self.elements, -1, -2))


@dataclass(frozen=True)
class ResponseFunction:
    """Stochastic table ``table[a, x, lam] = p(a|x, lam)``."""

    table: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.table, dtype=float)
        if arr.ndim != 3:
            raise ValueError("response table must have shape (n_outcomes, n_settings, n_hidden)")
        if arr.min() < -1e-12 or np.max(np.abs(arr.sum(axis=0) - 1.0)) > 1e-9:
            raise ValueError("response table is not a conditional probability distribution")
        arr.setflags(write=False)
        object.__setattr__(self, "table", arr)

    @classmethod
    def deterministic(cls, strategies: Sequence[Sequence[int]], n_outcomes: int) -> "ResponseFunction":
        strategies = np.asarray(strategies, dtype=int)
        n_lam, n_set = strategies.shape
        table = np.zeros((n_outcomes, n_set, n_lam))
        for lam, strat in enumerate(strategies):
            table[strat, np.arange(n_set), lam] = 1.0
        return cls(table)

    @property
    def n_hidden(self) -> int:
        return self.table.shape[2]


@dataclass
class ValidationReport:
    valid: bool
    min_eigenvalue: float
    completeness_residual: float
    failures: list[str] = field(default_factory=list)


def validate(m: MeasurementAssemblage, tol: float = HERM_TOL) -> ValidationReport:
    """Report PSD and completeness violations for every setting."""
    failures = []
    worst_eig = np.inf
    worst_res = 0.0
    eye = np.eye(m.d)
    for x in range(m.n_settings):
        for a in range(m.n_outcomes):
            el = m.elements[a, x]
            if not is_hermitian(el, tol):
                failures.append(f"element ({a}|{x}) is not Hermitian")
                continue
            lo = float(np.linalg.eigvalsh(0.5 * (el + el.conj().T)).min())
            worst_eig = min(worst_eig, lo)
            if lo < -tol:
                failures.append(f"element ({a}|{x}) has negative eigenvalue {lo:.3e}")
        res = float(np.max(np.abs(m.elements[:, x].sum(axis=0) - eye)))
        worst_res = max(worst_res, res)
        if res > tol:
            failures.append(f"setting {x} sums to identity only within {res:.3e}")
    return ValidationReport(not failures, float(worst_eig), worst_res, failures)


def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"visibility {eta} outside [0, 1]")
    return eta


def pauli_measurements(axes: str = "XY", eta: float = 1.0) -> MeasurementAssemblage:
    """Dichotomic qubit measurements ``(1 +/- eta sigma)/2`` along the given Pauli axes."""
    eta = _check_eta(eta)
    eye = np.eye(2)
    povms = [[0.5 * (eye + eta * PAULIS[ax]), 0.5 * (eye - eta * PAULIS[ax])] for ax in axes.upper()]
    return MeasurementAssemblage.from_povms(povms)


def noisy_pauli_pair(eta: float = THM2_VISIBILITY) -> MeasurementAssemblage:
    """``M_{+-|1} = (1 +- eta X)/2`` and ``M_{+-|2} = (1 +- eta Y)/2``; outcome 0 is ``+``."""
    return pauli_measurements("XY", eta)


def trivial_measurement(d: int, n_outcomes: int = 1, n_settings: int = 1) -> MeasurementAssemblage:
    el = np.broadcast_to(np.eye(d) / n_outcomes, (n_outcomes, n_settings, d, d))
    return MeasurementAssemblage(el)


def post_process(parent: Povm, r: ResponseFunction) -> MeasurementAssemblage:
    """``A_{a|x} = sum_lam p(a|x, lam) G_lam``."""
    if r.n_hidden != len(parent):
        raise ValueError(f"response has {r.n_hidden} hidden labels but parent has {len(parent)} elements")
    return MeasurementAssemblage(np.einsum("axl,lij->axij", r.table, parent.elements))


def depolarize(m: MeasurementAssemblage, eta: float) -> MeasurementAssemblage:
    """``A' = eta A + (1 - eta) Tr(A) 1/d``, element-wise."""
    eta = _check_eta(eta)
    traces = np.einsum("axii->ax", m.elements)
    noise = traces[:, :, None, None] * np.eye(m.d) / m.d
    return MeasurementAssemblage(eta * m.elements + (1 - eta) * noise)


def random_qubit_pair(rng: np.random.Generator, eta: float) -> MeasurementAssemblage:
    """Random unitary rotation of the sharp X/Y pair, then depolarized to ``eta``.

    The unbiased orthogonal pair is jointly measurable exactly when
    ``eta <= 1/sqrt(2)``, so ``eta`` controls which side of the boundary the
    sample lies on.
    """
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    u = q * (np.diag(r) / np.abs(np.diag(r)))
    sharp = pauli_measurements("XY").elements
    rotated = np.einsum("ij,axjk,lk->axil", u, sharp, u.conj())
    return depolarize(MeasurementAssemblage(rotated), eta)
