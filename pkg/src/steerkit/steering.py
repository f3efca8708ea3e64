"""Local-hidden-state and genuine multipartite steering membership.

Verdicts for the tripartite problems come from a pair of formulations:

* an *outer* relaxation whose infeasibility certifies genuine multipartite
  steering (``certified-GMS``);
* an *inner* formulation whose feasibility proves membership (``member``).

When only the outer relaxation is feasible the report says
``member-under-relaxation``; when neither side decides, ``inconclusive``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import sdpcore
from .assemblage import SteeringAssemblage, white_noise
from .incompat import BISECT_TOL, _bisect, correlation_tables
from .qmat import partial_trace
from .sdpcore import Certificate, FeasibilityProblem, SdpResult, Verdict

MEMBER = "member"
MEMBER_RELAXED = "member-under-relaxation"
CERTIFIED_GMS = "certified-GMS"
INCONCLUSIVE = "inconclusive"


@dataclass
class LhsModel:
    """Absorbed LHS model: ``sigma[lam]`` unnormalized, ``strategies[lam]`` maps setting to outcome."""

    strategies: list[tuple[int, ...]]
    sigma: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return np.real(np.einsum("lii->l", self.sigma))

    def states(self, cutoff: float = 1e-12) -> list[np.ndarray | None]:
        return [s / w if w > cutoff else None for s, w in zip(self.sigma, self.weights)]

    def reconstruct(self, n_outcomes: int) -> np.ndarray:
        n_set = len(self.strategies[0])
        d = self.sigma.shape[-1]
        out = np.zeros((n_outcomes, n_set, d, d), dtype=complex)
        for lam, s in enumerate(self.strategies):
            for x in range(n_set):
                out[s[x], x] += self.sigma[lam]
        return out


@dataclass
class LhsResult:
    verdict: Verdict
    model: LhsModel | None
    sdp: SdpResult

    @property
    def unsteerable(self) -> bool:
        return self.verdict is Verdict.FEASIBLE


@dataclass
class GmsMembershipReport:
    verdict: str
    relaxation: str
    residual: float = float("nan")
    min_eig: float = float("nan")
    blocks: dict[str, np.ndarray] | None = None
    certificate: Certificate | None = None
    results: list[SdpResult] = field(default_factory=list)

    @property
    def certificate_gap(self) -> float:
        return float("nan") if self.certificate is None else -self.certificate.value


def _check_assemblage(s: SteeringAssemblage, n_untrusted: int) -> None:
    if s.n_untrusted != n_untrusted:
        raise ValueError(f"expected {n_untrusted} untrusted part{'y' if n_untrusted == 1 else 'ies'}, got {s.n_untrusted}")
    problems = s.validate(tol=1e-7)
    if problems:
        raise ValueError("invalid assemblage: " + "; ".join(problems))


def is_unsteerable(s: SteeringAssemblage, adapter: sdpcore.SolverAdapter | None = None) -> LhsResult:
    """Exact LHS membership for one untrusted party; all trusted parties are treated jointly."""
    _check_assemblage(s, 1)
    prob, strategies = sdpcore.deterministic_membership_problem(s.members, "lhs")
    res = sdpcore.solve(prob, adapter)
    model = None
    if res.feasible:
        model = LhsModel(strategies, np.array([res.blocks[f"X{lam}"] for lam in range(len(strategies))]))
    return LhsResult(res.verdict, model, res)


def _gms_one_sided_problem(s: SteeringAssemblage) -> FeasibilityProblem:
    """Outer relaxation for one untrusted party and trusted split ``B|C``.

    Term 1 keeps arbitrary states via deterministic absorption. The two
    biseparable terms are aggregated into ``tau[a|x]``: PSD, PPT across ``B:C``
    and with a setting-independent outcome sum.
    """
    dims = s.trusted_dims
    n_out, n_set = s.n_outcomes[0], s.n_settings[0]
    d = s.dim
    strategies = sdpcore.enumerate_deterministic(n_set, n_out)
    pt = sdpcore.pt_map(dims, 1)
    prob = FeasibilityProblem("gms1-outer")
    for lam in range(len(strategies)):
        prob.add_block(f"X{lam}", d)
    for a, x in itertools.product(range(n_out), range(n_set)):
        prob.add_block(f"T{a}|{x}", d)
        prob.add_block(f"P{a}|{x}", d)
    for a, x in itertools.product(range(n_out), range(n_set)):
        terms = [(f"X{lam}", 1.0) for lam, st in enumerate(strategies) if st[x] == a]
        prob.add_equality(f"{a}|{x}", terms + [(f"T{a}|{x}", 1.0)], s.members[a, x])
    zero = np.zeros((d, d))
    for a, x in itertools.product(range(n_out), range(n_set)):
        prob.add_equality(f"pt{a}|{x}", [(f"T{a}|{x}", pt), (f"P{a}|{x}", -1.0)], zero)
    for x in range(1, n_set):
        terms = [(f"T{a}|{x}", 1.0) for a in range(n_out)] + [(f"T{a}|0", -1.0) for a in range(n_out)]
        prob.add_equality(f"ns{x}", terms, zero)
    unit = {f"{a}|0": np.eye(d) for a in range(n_out)}
    unit.update({f"ns{x}": np.eye(d) / n_set for x in range(1, n_set)})
    unit.update({f"pt{a}|{x}": -np.eye(d) / (2 * n_set) for a in range(n_out) for x in range(n_set)})
    prob.set_unit(unit)
    return prob


def probe_states(d: int, reduced: np.ndarray) -> list[np.ndarray]:
    """Finite family of pure states on one party for the inner product terms.

    Eigenvectors of the party's reduced state, the computational basis and the
    pairwise superpositions ``(|j> + c|k>)/sqrt2`` with ``c`` in ``{1, -1, i, -i}``.
    """
    vecs = list(np.linalg.eigh(reduced)[1].T)
    eye = np.eye(d)
    vecs += list(eye)
    for j, k in itertools.combinations(range(d), 2):
        vecs += [(eye[j] + c * eye[k]) / np.sqrt(2) for c in (1, -1, 1j, -1j)]
    return [np.outer(v, v.conj()) for v in vecs]


def _kron_map(fixed: np.ndarray, d_free: int, free_first: bool) -> sdpcore.LinearMap:
    d_fixed = fixed.shape[0]
    if free_first:
        fn = lambda m: np.einsum("nij,kl->nikjl", m, fixed).reshape(len(m), d_free * d_fixed, d_free * d_fixed)  # noqa: E731
    else:
        fn = lambda m: np.einsum("kl,nij->nkilj", fixed, m).reshape(len(m), d_free * d_fixed, d_free * d_fixed)  # noqa: E731
    return sdpcore.LinearMap(fn, d_free, d_free * d_fixed)


def _gms_one_sided_inner_problem(s: SteeringAssemblage) -> FeasibilityProblem:
    """Inner formulation: LHS term plus product terms with states from :func:`probe_states`.

    Any feasible point is an explicit biseparable decomposition, so
    feasibility proves membership.
    """
    d_b, d_c = s.trusted_dims
    n_out, n_set = s.n_outcomes[0], s.n_settings[0]
    d = s.dim
    reduced = s.reduced_state()
    rho_b = partial_trace(reduced, (d_b, d_c), [1])
    rho_c = partial_trace(reduced, (d_b, d_c), [0])
    strategies = sdpcore.enumerate_deterministic(n_set, n_out)
    # term 2 fixes a state on C and leaves an assemblage on B; term 3 the reverse
    families = [
        ("B", d_b, [_kron_map(r, d_b, True) for r in probe_states(d_c, rho_c)]),
        ("C", d_c, [_kron_map(r, d_c, False) for r in probe_states(d_b, rho_b)]),
    ]
    prob = FeasibilityProblem("gms1-inner")
    for lam in range(len(strategies)):
        prob.add_block(f"X{lam}", d)
    for side, d_free, maps in families:
        for mu, (a, x) in itertools.product(range(len(maps)), itertools.product(range(n_out), range(n_set))):
            prob.add_block(f"{side}{mu},{a}|{x}", d_free)
    for a, x in itertools.product(range(n_out), range(n_set)):
        terms = [(f"X{lam}", 1.0) for lam, st in enumerate(strategies) if st[x] == a]
        for side, _, maps in families:
            terms += [(f"{side}{mu},{a}|{x}", op) for mu, op in enumerate(maps)]
        prob.add_equality(f"{a}|{x}", terms, s.members[a, x])
    unit = {f"{a}|0": np.eye(d) for a in range(n_out)}
    for side, d_free, maps in families:
        for mu, x in itertools.product(range(len(maps)), range(1, n_set)):
            terms = [(f"{side}{mu},{a}|{x}", 1.0) for a in range(n_out)] + [(f"{side}{mu},{a}|0", -1.0) for a in range(n_out)]
            prob.add_equality(f"ns{side}{mu}|{x}", terms, np.zeros((d_free, d_free)))
            unit[f"ns{side}{mu}|{x}"] = np.eye(d_free) / n_set
    prob.set_unit(unit)
    return prob


def gms_one_sided(s: SteeringAssemblage, adapter: sdpcore.SolverAdapter | None = None) -> GmsMembershipReport:
    """GMS membership with one untrusted party and two trusted parties ``B|C``.

    Infeasibility of the PPT relaxation certifies GMS. Membership is claimed
    only with an explicit decomposition from the inner formulation; if the
    relaxation is feasible but the inner one is not, the report says
    ``member-under-relaxation``.
    """
    _check_assemblage(s, 1)
    if len(s.trusted_dims) != 2:
        raise ValueError(
            f"gms_one_sided needs exactly two trusted parties, got {len(s.trusted_dims)}; group them with merge_parties first"
        )
    outer = sdpcore.solve(_gms_one_sided_problem(s), adapter)
    if outer.infeasible:
        return GmsMembershipReport(CERTIFIED_GMS, "ppt", certificate=outer.certificate, results=[outer])
    if not outer.feasible:
        return GmsMembershipReport(INCONCLUSIVE, "ppt", results=[outer])
    inner = sdpcore.solve(_gms_one_sided_inner_problem(s), adapter)
    if inner.feasible:
        return GmsMembershipReport(MEMBER, "product-probes", inner.residual, inner.min_eig, inner.blocks, results=[outer, inner])
    return GmsMembershipReport(MEMBER_RELAXED, "ppt", outer.residual, outer.min_eig, outer.blocks, results=[outer, inner])


def gms_two_sided(s: SteeringAssemblage, corr_mode: str = "inner", adapter: sdpcore.SolverAdapter | None = None) -> GmsMembershipReport:
    """GMS membership with two untrusted parties and one trusted party.

    ``inner`` draws the correlations of the fully-untrusted term from local
    deterministic tables: Feasible means ``member``, Infeasible is
    ``inconclusive``. ``outer`` uses the no-signaling vertices: Infeasible means
    ``certified-GMS``, Feasible is ``member-under-relaxation``.
    """
    _check_assemblage(s, 2)
    if len(s.trusted_dims) != 1:
        raise ValueError("gms_two_sided needs a single trusted party; group them with merge_parties first")
    n_a, n_b = s.n_outcomes
    n_x, n_y = s.n_settings
    corr = correlation_tables(corr_mode, n_a, n_b, n_x, n_y)
    prob, _, _ = sdpcore.two_sided_membership_problem(s.members, corr, f"gms2-{corr_mode}")
    res = sdpcore.solve(prob, adapter)
    relax = "local-deterministic" if corr_mode == "inner" else "no-signaling"
    if res.verdict is Verdict.INCONCLUSIVE:
        return GmsMembershipReport(INCONCLUSIVE, relax, results=[res])
    if corr_mode == "inner":
        if res.feasible:
            return GmsMembershipReport(MEMBER, relax, res.residual, res.min_eig, res.blocks, results=[res])
        return GmsMembershipReport(INCONCLUSIVE, relax, certificate=res.certificate, results=[res])
    if res.infeasible:
        return GmsMembershipReport(CERTIFIED_GMS, relax, certificate=res.certificate, results=[res])
    return GmsMembershipReport(MEMBER_RELAXED, relax, res.residual, res.min_eig, res.blocks, results=[res])


def _is_member(s: SteeringAssemblage, target: str, corr_mode: str, adapter) -> bool:
    if target == "lhs":
        return is_unsteerable(s, adapter).unsteerable
    if target == "gms1":
        return gms_one_sided(s, adapter).verdict in (MEMBER, MEMBER_RELAXED)
    if target == "gms2":
        return gms_two_sided(s, corr_mode, adapter).verdict in (MEMBER, MEMBER_RELAXED)
    raise ValueError(f"unknown robustness target {target!r}")


def steering_robustness(
    family: SteeringAssemblage | Callable[[float], SteeringAssemblage],
    target: str = "lhs",
    corr_mode: str = "outer",
    tol: float = BISECT_TOL,
    adapter: sdpcore.SolverAdapter | None = None,
) -> float:
    """Largest ``eta`` (within ``tol``) whose assemblage is still a member of ``target``.

    ``family`` is either an assemblage, which is mixed with white noise on the
    trusted side, or a callable ``eta -> assemblage`` (for example measurement
    depolarization). For the GMS targets, membership means "not certified
    GMS", so ``eta*`` is the visibility above which GMS is certified. Returns 0
    when even ``eta = 0`` is not a member.
    """
    if isinstance(family, SteeringAssemblage):
        base = family
        family = lambda eta: white_noise(base, eta)  # noqa: E731

    def member(eta: float) -> bool:
        return _is_member(family(eta), target, corr_mode, adapter)

    if member(1.0):
        return 1.0
    if not member(0.0):
        return 0.0
    return _bisect(member, 0.0, 1.0, tol)
