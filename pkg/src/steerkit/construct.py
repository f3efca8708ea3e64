"""Closed-form constructions: the explicit two-sided decomposition of the noisy
Pauli pair, and parent measurements pulled back through a positive left inverse.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .incompat import ParentMeasurement
from .povm import MeasurementAssemblage, Povm, ResponseFunction, post_process
from .qmat import Bipartition, schmidt
from .states import PureState
from .steering import LhsModel

VERIFY_DPS = 30
MERGE_TOL = 1e-9


@dataclass(frozen=True)
class Thm2Constants:
    alpha: mpmath.mpf
    beta: mpmath.mpf

    @classmethod
    def exact(cls, dps: int = VERIFY_DPS) -> "Thm2Constants":
        with mpmath.workdps(dps):
            q = mpmath.root(2, 4)
            alpha = (mpmath.sqrt(2) - 1) / (2 * q)
            return cls(+alpha, 1 / (2 * q) - alpha)


def _paulis() -> tuple:
    one = mpmath.eye(2)
    sx = mpmath.matrix([[0, 1], [1, 0]])
    sy = mpmath.matrix([[0, -1j], [1j, 0]])
    return one, (sx, sy)


def _kron(a, b):
    out = mpmath.zeros(a.rows * b.rows, a.cols * b.cols)
    for i, j, k, l in itertools.product(range(a.rows), range(a.cols), range(b.rows), range(b.cols)):
        out[i * b.rows + k, j * b.cols + l] = a[i, j] * b[k, l]
    return out


def _check_signs(*signs: int) -> None:
    if any(s not in (1, -1) for s in signs):
        raise ValueError(f"outcome labels must be +1 or -1, got {signs}")


def _check_setting(s: int) -> None:
    if s not in (0, 1):
        raise ValueError(f"setting must be 0 (X) or 1 (Y), got {s}")


def _g_mp(a0: int, a1: int, b: int, y: int, c: Thm2Constants):
    one, sig = _paulis()
    local = a0 * sig[0] + a1 * sig[1]
    return _kron(one / 4 + c.alpha * local, one / 4) + _kron(c.beta * one + local / (4 * mpmath.sqrt(2)), b * sig[y] / 4)


def _h_mp(b0: int, b1: int, a: int, x: int, c: Thm2Constants):
    one, sig = _paulis()
    local = b0 * sig[0] + b1 * sig[1]
    return _kron(one / 4, one / 4 + c.alpha * local) + _kron(a * sig[x] / 4, c.beta * one + local / (4 * mpmath.sqrt(2)))


def _to_numpy(m) -> np.ndarray:
    return np.array(m.tolist(), dtype=complex)


def thm2_G(a0: int, a1: int, b: int, y: int, constants: Thm2Constants | None = None) -> np.ndarray:
    """``G_{a0,a1,b|y}`` on the two measured qubits; labels are +-1, ``y`` is 0 (X) or 1 (Y)."""
    _check_signs(a0, a1, b)
    _check_setting(y)
    with mpmath.workdps(VERIFY_DPS):
        return _to_numpy(_g_mp(a0, a1, b, y, constants or Thm2Constants.exact()))


def thm2_H(b0: int, b1: int, a: int, x: int, constants: Thm2Constants | None = None) -> np.ndarray:
    """``H_{b0,b1,a|x}``, the mirror image of :func:`thm2_G`."""
    _check_signs(b0, b1, a)
    _check_setting(x)
    with mpmath.workdps(VERIFY_DPS):
        return _to_numpy(_h_mp(b0, b1, a, x, constants or Thm2Constants.exact()))


@dataclass
class Thm2Report:
    max_reconstruction_error: float
    min_eigenvalue: float
    marginal_residual: float
    trace_error: float
    tol: float
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def _max_abs(m) -> mpmath.mpf:
    return max(abs(v) for v in m)


def verify_thm2(constants: Thm2Constants | None = None, tol: float = 1e-12, dps: int = VERIFY_DPS) -> Thm2Report:
    """Check the explicit decomposition of ``M_{a|x} (x) M_{b|y}`` at visibility ``2^(-1/4)``.

    Evaluated with ``dps`` significant digits. Checks all 16 products, positivity
    of the 16 operators, setting independence of their marginals, and their
    traces (each 1/4).
    """
    with mpmath.workdps(dps):
        c = constants or Thm2Constants.exact(dps)
        one, sig = _paulis()
        eta = 1 / mpmath.root(2, 4)
        signs = (1, -1)
        meas = {(a, x): (one + a * eta * sig[x]) / 2 for a in signs for x in (0, 1)}
        g = {(a0, a1, b, y): _g_mp(a0, a1, b, y, c) for a0, a1, b in itertools.product(signs, repeat=3) for y in (0, 1)}
        h = {(b0, b1, a, x): _h_mp(b0, b1, a, x, c) for b0, b1, a in itertools.product(signs, repeat=3) for x in (0, 1)}

        recon = mpmath.mpf(0)
        for a, b, x, y in itertools.product(signs, signs, (0, 1), (0, 1)):
            total = mpmath.zeros(4, 4)
            for free in signs:
                ax = (a, free) if x == 0 else (free, a)
                total += g[ax + (b, y)]
                by = (b, free) if y == 0 else (free, b)
                total += h[by + (a, x)]
            recon = max(recon, _max_abs(_kron(meas[a, x], meas[b, y]) - total))

        ops = [g[k] for k in g] + [h[k] for k in h]
        min_eig = min(min(mpmath.eighe(op, eigvals_only=True)) for op in ops)
        marg = mpmath.mpf(0)
        for a0, a1 in itertools.product(signs, repeat=2):
            marg = max(marg, _max_abs(sum((g[a0, a1, b, 0] - g[a0, a1, b, 1] for b in signs), mpmath.zeros(4, 4))))
            marg = max(marg, _max_abs(sum((h[a0, a1, a, 0] - h[a0, a1, a, 1] for a in signs), mpmath.zeros(4, 4))))
        trace_err = max(abs(sum(op[i, i] for i in range(4)) - mpmath.mpf(1) / 4) for op in ops)

    report = Thm2Report(float(recon), float(mpmath.re(min_eig)), float(marg), float(trace_err), tol)
    if report.max_reconstruction_error > tol:
        report.failures.append(f"reconstruction error {report.max_reconstruction_error:.3e}")
    if report.min_eigenvalue < -tol:
        report.failures.append(f"negative eigenvalue {report.min_eigenvalue:.3e}")
    if report.marginal_residual > tol:
        report.failures.append(f"marginal residual {report.marginal_residual:.3e}")
    if report.trace_error > tol:
        report.failures.append(f"trace error {report.trace_error:.3e}")
    return report


class RankDeficientError(ValueError):
    pass


@dataclass(frozen=True)
class LeftInverseMap:
    """``N -> B N^T B^dagger`` with ``B = sum_i p_i^(-1/2) |phi_i><conj(zeta_i)|``.

    The transpose in the action pairs with the unconjugated right Schmidt
    vectors in ``B``, so the map equals
    ``sum_ij (p_i p_j)^(-1/2) <zeta_i|N|zeta_j> |phi_j><phi_i|``.
    """

    b_matrix: np.ndarray
    coefficients: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray

    def __call__(self, n: np.ndarray) -> np.ndarray:
        n = np.asarray(n)
        b = self.b_matrix
        return b @ np.swapaxes(n, -1, -2) @ b.conj().T

    def gamma(self, m: np.ndarray) -> np.ndarray:
        """``Tr_1[(M (x) 1) |psi><psi|]`` in Schmidt coordinates."""
        c, phi, zeta = self.coefficients, self.left_vectors, self.right_vectors
        inner = phi.conj() @ np.asarray(m) @ phi.T  # <phi_j|M|phi_i> at [j, i]
        weights = np.outer(c, c) * inner.T  # sqrt(p_i p_j) <phi_j|M|phi_i> at [i, j]
        return zeta.T @ weights @ zeta.conj()

    def identity_error(self) -> float:
        """Max deviation of ``Lambda(Gamma(E_jk))`` from ``E_jk`` over the matrix units."""
        d = self.b_matrix.shape[0]
        worst = 0.0
        for j, k in itertools.product(range(d), repeat=2):
            e = np.zeros((d, d), dtype=complex)
            e[j, k] = 1.0
            worst = max(worst, float(np.max(np.abs(self(self.gamma(e)) - e))))
        return worst


def left_inverse(psi: PureState, cut: Bipartition | None = None) -> LeftInverseMap:
    """Positive left inverse of ``M -> Tr_1[(M (x) 1) psi]`` for a full-Schmidt-rank ``psi``."""
    n = psi.n_parties
    cut = cut or Bipartition.first_vs_rest(n)
    dec = schmidt(psi.amplitudes, psi.dims, cut)
    d1 = int(np.prod([psi.dims[i] for i in cut.part1]))
    if dec.rank < d1:
        raise RankDeficientError(f"Schmidt rank {dec.rank} is below the first-party dimension {d1}; no left inverse exists")
    c = np.asarray(dec.coefficients, dtype=float)
    phi = np.asarray(dec.left_vectors)
    zeta = np.asarray(dec.right_vectors)
    b = np.einsum("i,ij,ik->jk", 1 / c, phi, zeta)
    lmap = LeftInverseMap(b, c, phi, zeta)
    err = lmap.identity_error()
    if err > 1e-8:
        raise ArithmeticError(f"left inverse identity fails with error {err:.3e}")
    return lmap


def parent_from_lhs(
    psi: PureState,
    model: LhsModel,
    meas: MeasurementAssemblage | None = None,
    tol: float = 1e-6,
) -> ParentMeasurement:
    """Parent POVM ``G_lam = Lambda_psi(sigma_lam)`` from an LHS model of the steered assemblage.

    Hidden labels with negligible weight are dropped and labels whose
    normalized states agree within 1e-9 are merged, with their responses
    averaged by weight. If ``meas`` is given, the reconstruction is checked.
    """
    lmap = left_inverse(psi)
    sigma = np.asarray(model.sigma)
    weights = model.weights
    n_out = 1 + max(max(s) for s in model.strategies)
    if meas is not None:
        n_out = meas.n_outcomes
    n_set = len(model.strategies[0])

    groups: list[tuple[np.ndarray, list[int]]] = []
    for lam, w in enumerate(weights):
        if w <= 1e-12:
            continue
        state = sigma[lam] / w
        for rep, members in groups:
            if np.max(np.abs(rep - state)) <= MERGE_TOL:
                members.append(lam)
                break
        else:
            groups.append((state, [lam]))

    elements = []
    table = np.zeros((n_out, n_set, len(groups)))
    for k, (_, members) in enumerate(groups):
        elements.append(lmap(sum(sigma[lam] for lam in members)))
        total = sum(weights[lam] for lam in members)
        for lam in members:
            for x, a in enumerate(model.strategies[lam]):
                table[a, x, k] += weights[lam] / total
    parent = ParentMeasurement(Povm(np.array(elements)), ResponseFunction(table))

    completeness = parent.povm.completeness_residual()
    if completeness > tol:
        raise ValueError(f"extracted parent is incomplete (residual {completeness:.3e}); the model does not match the state")
    if meas is not None:
        err = float(np.max(np.abs(post_process(parent.povm, parent.response).elements - meas.elements)))
        if err > tol:
            raise ValueError(f"parent reproduces the measurements only to {err:.3e}")
    return parent
