"""Steering assemblages for one- and multi-sided scenarios, and their reduction maps.

An assemblage with ``k`` untrusted parties is stored as one array of shape
``(o_1, ..., o_k, s_1, ..., s_k, D, D)``: outcome indices first, then setting
indices, then the operator on the trusted parties (``D = prod(trusted_dims)``).
So a one-sided assemblage is ``members[a, x]`` and a two-sided one is
``members[a, b, x, y]``. Members are unnormalized; their trace is the outcome
probability.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .povm import MeasurementAssemblage
from .qmat import _as_dims, _check_indices, embed_operator, partial_trace, reorder_subsystems
from .states import PureState

NS_TOL = 1e-10


@dataclass(frozen=True)
class SteeringAssemblage:
    members: np.ndarray
    n_untrusted: int
    trusted_dims: tuple[int, ...]

    def __post_init__(self) -> None:
        arr = np.array(self.members, dtype=complex)
        dims = _as_dims(self.trusted_dims)
        k = int(self.n_untrusted)
        total = int(np.prod(dims))
        if arr.ndim != 2 * k + 2 or arr.shape[-2:] != (total, total):
            raise ValueError(f"members of shape {arr.shape} inconsistent with {k} untrusted parties and dims {dims}")
        arr.setflags(write=False)
        object.__setattr__(self, "members", arr)
        object.__setattr__(self, "trusted_dims", dims)
        object.__setattr__(self, "n_untrusted", k)

    @property
    def n_outcomes(self) -> tuple[int, ...]:
        return self.members.shape[: self.n_untrusted]

    @property
    def n_settings(self) -> tuple[int, ...]:
        return self.members.shape[self.n_untrusted : 2 * self.n_untrusted]

    @property
    def dim(self) -> int:
        return self.members.shape[-1]

    @property
    def scenario(self) -> str:
        return {1: "one-sided", 2: "two-sided"}.get(self.n_untrusted, f"{self.n_untrusted}-sided")

    def marginals(self) -> np.ndarray:
        """Sum over all outcomes, one operator per joint setting."""
        k = self.n_untrusted
        return self.members.sum(axis=tuple(range(k)))

    def reduced_state(self) -> np.ndarray:
        return self.marginals()[(0,) * self.n_untrusted]

    def no_signaling_residual(self) -> float:
        """Largest deviation of the outcome-summed members between any two settings.

        Checked per untrusted party: summing over that party's outcome must not
        depend on its setting.
        """
        k = self.n_untrusted
        worst = 0.0
        for p in range(k):
            summed = self.members.sum(axis=p)
            setting_axis = k - 1 + p
            ref = np.take(summed, [0], axis=setting_axis)
            worst = max(worst, float(np.max(np.abs(summed - ref), initial=0.0)))
        return worst

    def min_eigenvalue(self) -> float:
        flat = self.members.reshape(-1, self.dim, self.dim)
        return float(np.linalg.eigvalsh(0.5 * (flat + np.conj(np.swapaxes(flat, 1, 2)))).min())

    def validate(self, tol: float = 1e-8) -> list[str]:
        """Violated invariants (empty list when valid). Degenerate inputs are flagged here."""
        problems = []
        if self.min_eigenvalue() < -tol:
            problems.append(f"member with negative eigenvalue {self.min_eigenvalue():.3e}")
        res = self.no_signaling_residual()
        if res > max(tol, NS_TOL):
            problems.append(f"no-signaling residual {res:.3e}")
        total = float(np.real(np.trace(self.reduced_state())))
        if total <= tol:
            problems.append("assemblage has zero total weight")
        elif abs(total - 1.0) > max(tol, 1e-6):
            problems.append(f"total trace {total:.6g} differs from 1")
        return problems


def _state_assemblage(rho: np.ndarray | PureState, dims: Sequence[int] | None) -> SteeringAssemblage:
    if isinstance(rho, PureState):
        dims = rho.dims if dims is None else dims
        rho = rho.density()
    if dims is None:
        raise ValueError("dims are required when passing a density matrix")
    return SteeringAssemblage(np.asarray(rho, dtype=complex), 0, tuple(dims))


def apply_measurement(s: SteeringAssemblage, meas: MeasurementAssemblage, party: int) -> SteeringAssemblage:
    """Measure trusted ``party`` with ``meas``; it becomes a new untrusted party.

    The new outcome and setting indices are appended after the existing ones.
    """
    dims = s.trusted_dims
    _check_indices([party], len(dims))
    if meas.d != dims[party]:
        raise ValueError(f"measurement dimension {meas.d} does not match party dimension {dims[party]}")
    if len(dims) == 1:
        raise ValueError("cannot measure the last trusted party")
    k = s.n_untrusted
    # lift each POVM element to the full trusted space, multiply, trace the party out
    lifted = np.stack([np.stack([embed_operator(e, dims, party) for e in row]) for row in meas.elements])
    prod = np.einsum("axij,...jk->...axik", lifted, s.members)
    reduced = partial_trace(prod, dims, [party])
    # reduced has shape (o..., s..., a, x, D', D'); move a before the settings
    axes = list(range(reduced.ndim))
    a_axis, x_axis = 2 * k, 2 * k + 1
    order = axes[:k] + [a_axis] + axes[k : 2 * k] + [x_axis] + axes[2 * k + 2 :]
    new_dims = tuple(d for i, d in enumerate(dims) if i != party)
    return SteeringAssemblage(reduced.transpose(order), k + 1, new_dims)


def steer(rho: np.ndarray | PureState, measurements: Sequence[MeasurementAssemblage], dims: Sequence[int] | None = None) -> SteeringAssemblage:
    """Assemblage from measuring the first ``len(measurements)`` parties of ``rho``."""
    s = _state_assemblage(rho, dims)
    for meas in measurements:
        s = apply_measurement(s, meas, 0)
    return s


def steer_one_sided(rho: np.ndarray | PureState, meas: MeasurementAssemblage, dims: Sequence[int] | None = None) -> SteeringAssemblage:
    """``sigma_{a|x} = Tr_1[(A_{a|x} (x) 1) rho]`` on the remaining parties."""
    return steer(rho, [meas], dims)


def steer_two_sided(
    rho: np.ndarray | PureState,
    meas_a: MeasurementAssemblage,
    meas_b: MeasurementAssemblage,
    dims: Sequence[int] | None = None,
) -> SteeringAssemblage:
    """``sigma_{ab|xy} = Tr_12[(A_{a|x} (x) B_{b|y} (x) 1) rho]``."""
    return steer(rho, [meas_a, meas_b], dims)


def merge_parties(s: SteeringAssemblage, group: Iterable[int]) -> SteeringAssemblage:
    """Treat the trusted parties in ``group`` as a single party.

    The merged party sits where the first member of ``group`` was; if the group
    is not contiguous, the other parties are reordered accordingly. Non-GMS of
    the merged assemblage implies non-GMS of the original.
    """
    dims = s.trusted_dims
    group = list(_check_indices(group, len(dims)))
    if not group:
        raise ValueError("merge group is empty")
    first = group[0]
    rest = [i for i in range(len(dims)) if i not in group]
    order = [i for i in rest if i < first] + group + [i for i in rest if i > first]
    members = s.members
    if order != list(range(len(dims))):
        members = reorder_subsystems(members, dims, order)
    merged = int(np.prod([dims[i] for i in group]))
    new_dims = tuple(dims[i] for i in rest if i < first) + (merged,) + tuple(dims[i] for i in rest if i > first)
    return SteeringAssemblage(members, s.n_untrusted, new_dims)


def white_noise(s: SteeringAssemblage, eta: float) -> SteeringAssemblage:
    """``eta sigma + (1 - eta) Tr(sigma) 1/D`` on every member."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"visibility {eta} outside [0, 1]")
    traces = np.einsum("...ii->...", s.members)
    noise = traces[..., None, None] * np.eye(s.dim) / s.dim
    return SteeringAssemblage(eta * s.members + (1 - eta) * noise, s.n_untrusted, s.trusted_dims)
