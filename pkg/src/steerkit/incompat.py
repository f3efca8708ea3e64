"""Joint measurability and its distributed two-party generalizations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import sdpcore
from .povm import MeasurementAssemblage, Povm, ResponseFunction, depolarize, post_process, validate
from .sdpcore import SdpResult, Verdict

BISECT_TOL = 1e-4


@dataclass
class ParentMeasurement:
    povm: Povm
    response: ResponseFunction

    def reconstruct(self) -> MeasurementAssemblage:
        return post_process(self.povm, self.response)


@dataclass
class JmResult:
    verdict: Verdict
    parent: ParentMeasurement | None
    sdp: SdpResult

    @property
    def jointly_measurable(self) -> bool:
        return self.verdict is Verdict.FEASIBLE


@dataclass
class GenJmDecomposition:
    """``A_{a|x} (x) B_{b|y} = sum G + sum H (+ sum p_tau F_tau)`` with absorbed responses.

    ``g[lam][b, y]``, ``h[mu][a, x]`` and ``f[tau]`` are operators on the joint
    space of the two measured systems; ``lams``/``mus`` are the deterministic
    strategies and ``corr`` the correlation tables weighting ``f``.
    """

    g: np.ndarray
    h: np.ndarray
    lams: list[tuple[int, ...]]
    mus: list[tuple[int, ...]]
    f: np.ndarray | None = None
    corr: np.ndarray | None = None

    def reconstruct(self) -> np.ndarray:
        n_lam, n_b, n_y, d, _ = self.g.shape
        n_mu, n_a, n_x = self.h.shape[:3]
        out = np.zeros((n_a, n_b, n_x, n_y, d, d), dtype=complex)
        for lam, s in enumerate(self.lams):
            for x in range(n_x):
                out[s[x], :, x] += self.g[lam]
        for mu, s in enumerate(self.mus):
            for y in range(n_y):
                out[:, s[y], :, y] += self.h[mu]
        if self.f is not None:
            out += np.einsum("tabxy,tij->abxyij", self.corr, self.f)
        return out


@dataclass
class GenJmResult:
    verdict: Verdict
    decomposition: GenJmDecomposition | None
    sdp: SdpResult
    mode: str


def _check_meas(m: MeasurementAssemblage) -> None:
    report = validate(m, tol=1e-7)
    if not report.valid:
        raise ValueError("invalid measurement assemblage: " + "; ".join(report.failures))


def is_jointly_measurable(m: MeasurementAssemblage, adapter: sdpcore.SolverAdapter | None = None) -> JmResult:
    """Search for a parent POVM over deterministic post-processings."""
    _check_meas(m)
    prob, strategies = sdpcore.deterministic_membership_problem(m.elements, "jm")
    res = sdpcore.solve(prob, adapter)
    parent = None
    if res.feasible:
        elements = np.array([res.blocks[f"X{lam}"] for lam in range(len(strategies))])
        parent = ParentMeasurement(Povm(elements), ResponseFunction.deterministic(strategies, m.n_outcomes))
    return JmResult(res.verdict, parent, res)


def _bisect(member: Callable[[float], bool], lo: float, hi: float, tol: float) -> float:
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if member(mid):
            lo = mid
        else:
            hi = mid
    return lo


def incompat_robustness(
    m: MeasurementAssemblage,
    noise: Callable[[MeasurementAssemblage, float], MeasurementAssemblage] = depolarize,
    tol: float = BISECT_TOL,
    adapter: sdpcore.SolverAdapter | None = None,
) -> float:
    """Largest visibility ``eta`` (within ``tol``) at which ``noise(m, eta)`` is jointly measurable.

    An Inconclusive solve counts as not jointly measurable, so the result is
    conservative.
    """
    _check_meas(m)

    def member(eta: float) -> bool:
        return is_jointly_measurable(noise(m, eta), adapter).verdict is Verdict.FEASIBLE

    if member(1.0):
        return 1.0
    return _bisect(member, 0.0, 1.0, tol)


def jm_visibility_sdp(m: MeasurementAssemblage, adapter: sdpcore.SolverAdapter | None = None) -> float:
    """Critical depolarizing visibility from a single SDP maximizing ``eta``.

    Cross-check for :func:`incompat_robustness`; it relies on depolarizing
    noise being affine in ``eta``.
    """
    _check_meas(m)
    traces = np.einsum("axii->ax", m.elements)
    base = traces[:, :, None, None] * np.eye(m.d) / m.d
    prob, _ = sdpcore.deterministic_membership_problem(base, "jm-visibility", visibility=m.elements - base)
    res = sdpcore.solve(prob, adapter)
    if not res.feasible:
        raise RuntimeError(f"visibility SDP did not produce a validated optimum: {res.message or res.status}")
    return res.value


def _pair_targets(ma: MeasurementAssemblage, mb: MeasurementAssemblage) -> np.ndarray:
    return np.einsum("axij,bykl->abxyikjl", ma.elements, mb.elements).reshape(
        ma.n_outcomes, mb.n_outcomes, ma.n_settings, mb.n_settings, ma.d * mb.d, ma.d * mb.d
    )


def _decomposition(res: SdpResult, lams, mus, shape, corr) -> GenJmDecomposition:
    n_a, n_b, n_x, n_y = shape
    g = np.array([[[res.blocks[f"G{lam},{b}|{y}"] for y in range(n_y)] for b in range(n_b)] for lam in range(len(lams))])
    h = np.array([[[res.blocks[f"H{mu},{a}|{x}"] for x in range(n_x)] for a in range(n_a)] for mu in range(len(mus))])
    f = None if corr is None else np.array([res.blocks[f"F{t}"] for t in range(len(corr))])
    return GenJmDecomposition(g, h, lams, mus, f, corr)


def _genjm(ma: MeasurementAssemblage, mb: MeasurementAssemblage, corr, mode: str, adapter) -> GenJmResult:
    _check_meas(ma)
    _check_meas(mb)
    targets = _pair_targets(ma, mb)
    prob, lams, mus = sdpcore.two_sided_membership_problem(targets, corr, f"genjm-{mode}")
    res = sdpcore.solve(prob, adapter)
    dec = _decomposition(res, lams, mus, targets.shape[:4], corr) if res.feasible else None
    return GenJmResult(res.verdict, dec, res, mode)


def genjm_no_free(ma: MeasurementAssemblage, mb: MeasurementAssemblage, adapter: sdpcore.SolverAdapter | None = None) -> GenJmResult:
    """``A (x) B = sum_lam p(a|x,lam) G_{lam,b|y} + sum_mu p(b|y,mu) H_{mu,a|x}`` with no free term."""
    return _genjm(ma, mb, None, "no-free", adapter)


def correlation_tables(mode: str, n_a: int, n_b: int, n_x: int, n_y: int) -> np.ndarray:
    """Local deterministic products (``inner``) or no-signaling vertices (``outer``)."""
    if mode == "inner":
        return sdpcore.local_deterministic_tables(n_a, n_b, n_x, n_y)
    if mode == "outer":
        return sdpcore.ns_vertices(n_a, n_b, n_x, n_y)
    raise ValueError(f"unknown correlation mode {mode!r}; expected 'inner' or 'outer'")


def genjm_full(
    ma: MeasurementAssemblage,
    mb: MeasurementAssemblage,
    corr_mode: str = "inner",
    adapter: sdpcore.SolverAdapter | None = None,
) -> GenJmResult:
    """Decomposition with the extra ``sum_tau p(ab|xy,tau) F_tau`` term.

    The quantum set of correlations is bracketed: ``inner`` uses local
    deterministic tables (Feasible proves the decomposition exists), ``outer``
    uses the no-signaling vertices (Infeasible proves it does not).
    """
    corr = correlation_tables(corr_mode, ma.n_outcomes, mb.n_outcomes, ma.n_settings, mb.n_settings)
    return _genjm(ma, mb, corr, corr_mode, adapter)
