"""Conic feasibility for membership problems over Hermitian PSD blocks.

A :class:`FeasibilityProblem` asks for Hermitian blocks ``X_i`` (PSD unless
flagged otherwise) satisfying affine equalities ``sum_i L_i(X_i) = T_e``. It is
solved as the shifted problem

    maximize s   subject to   sum_i L_i(X_i) = T_e,   X_i >= s 1,   s <= 1

whose optimum is non-negative exactly when the original problem is feasible.
The dual multipliers ``Y_e`` of the equalities at a negative optimum satisfy
``L_i^*(Y) >= 0`` for every block and ``sum_e <Y_e, T_e> < 0``: a Farkas
certificate of infeasibility.

Verdicts are never taken from the solver's word alone. Feasible witnesses are
projected back onto the affine constraints and re-checked by direct evaluation
of the maps; certificates are repaired along a problem-supplied *unit
direction* ``E`` (with ``L_i^*(E) >= c 1``, ``c > 0``) so the PSD part holds
exactly, and then checked for a strictly negative value.

Hermitian operators are parametrised by real coordinates in an orthonormal
basis, so adjoints are plain matrix transposes. PSD constraints use the real
embedding ``X -> [[Re X, -Im X], [Im X, Re X]]``.
"""

from __future__ import annotations

import contextlib
import contextvars
import itertools
import os
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Iterator, Protocol, Sequence, Union

import numpy as np
import scipy.sparse as sparse

from .qmat import partial_trace, partial_transpose

MAX_STRATEGIES = 10**6


class Verdict(str, Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class SolverSettings:
    tol_feas: float = 1e-8
    tol_gap: float = 1e-8
    max_iter: int = 200
    residual_tol: float = 1e-6
    eig_tol: float = 1e-7
    gap_tol: float = 1e-9


DEFAULT_SETTINGS = SolverSettings()
_SETTINGS: contextvars.ContextVar[SolverSettings] = contextvars.ContextVar("steerkit_settings", default=DEFAULT_SETTINGS)


@contextlib.contextmanager
def using_settings(settings: SolverSettings) -> Iterator[SolverSettings]:
    """Make ``settings`` the default for every :func:`solve` inside the block."""
    token = _SETTINGS.set(settings)
    try:
        yield settings
    finally:
        _SETTINGS.reset(token)


# Hermitian coordinates ------------------------------------------------------


@lru_cache(maxsize=None)
def herm_basis(d: int) -> np.ndarray:
    """Orthonormal basis of d x d Hermitian matrices, shape ``(d*d, d, d)``."""
    basis = []
    for j in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[j, j] = 1.0
        basis.append(e)
    r2 = np.sqrt(0.5)
    for j, k in itertools.combinations(range(d), 2):
        e = np.zeros((d, d), dtype=complex)
        e[j, k] = e[k, j] = r2
        basis.append(e)
        f = np.zeros((d, d), dtype=complex)
        f[j, k] = -1j * r2
        f[k, j] = 1j * r2
        basis.append(f)
    out = np.array(basis)
    out.setflags(write=False)
    return out


def to_coords(mat: np.ndarray) -> np.ndarray:
    mat = np.asarray(mat)
    return np.real(np.einsum("bij,...ji->...b", herm_basis(mat.shape[-1]), mat))


def from_coords(coords: np.ndarray, d: int) -> np.ndarray:
    return np.einsum("...b,bij->...ij", coords, herm_basis(d))


@lru_cache(maxsize=None)
def _svec_embedding(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Map from Hermitian coordinates to the scaled upper triangle of the real embedding."""
    n = 2 * d
    rows, cols = np.triu_indices(n)
    # column-major upper triangle: sort by column, then row
    order = np.lexsort((rows, cols))
    rows, cols = rows[order], cols[order]
    scale = np.where(rows == cols, 1.0, np.sqrt(2.0))
    basis = herm_basis(d)
    emb = np.block([[basis.real, -basis.imag], [basis.imag, basis.real]])
    k = (emb[:, rows, cols] * scale).T
    ident = (np.eye(n)[rows, cols] * scale)
    k.setflags(write=False)
    ident.setflags(write=False)
    return k, ident


# Linear maps ----------------------------------------------------------------


class LinearMap:
    """Complex-linear, Hermiticity-preserving map between operator spaces.

    ``fn`` must accept a stack of operators ``(n, d_in, d_in)``.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], d_in: int, d_out: int, key=None):
        self.fn = fn
        self.d_in = d_in
        self.d_out = d_out
        self.key = key

    def __call__(self, mat: np.ndarray) -> np.ndarray:
        mat = np.asarray(mat)
        if mat.ndim == 2:
            return self.fn(mat[None])[0]
        return self.fn(mat)

    def matrix(self) -> np.ndarray:
        if self.key is not None:
            return _cached_map_matrix(self.key, self)
        return _map_matrix(self)


def _map_matrix(op: LinearMap) -> np.ndarray:
    images = op.fn(herm_basis(op.d_in))
    return to_coords(images).T


_MAP_CACHE: dict = {}


def _cached_map_matrix(key, op: LinearMap) -> np.ndarray:
    if key not in _MAP_CACHE:
        m = _map_matrix(op)
        m.setflags(write=False)
        _MAP_CACHE[key] = m
    return _MAP_CACHE[key]


def pt_map(dims: Sequence[int], sys: int) -> LinearMap:
    dims = tuple(dims)
    d = int(np.prod(dims))
    return LinearMap(lambda m: partial_transpose(m, dims, sys), d, d, key=("pt", dims, sys))


def ptrace_map(dims: Sequence[int], traced: Sequence[int]) -> LinearMap:
    dims = tuple(dims)
    traced = tuple(sorted(traced))
    d_out = int(np.prod([d for i, d in enumerate(dims) if i not in traced]))
    return LinearMap(lambda m: partial_trace(m, dims, traced), int(np.prod(dims)), d_out, key=("ptr", dims, traced))


Op = Union[float, LinearMap]


# Problem ----------------------------------------------------------------------


@dataclass(frozen=True)
class Block:
    name: str
    dim: int
    psd: bool = True


@dataclass
class Equality:
    name: str
    terms: list[tuple[str, Op]]
    target: np.ndarray
    visibility: np.ndarray | None = None


class FeasibilityProblem:
    """Blocks plus affine equalities; optionally ``maximize t`` with targets ``T_e + t V_e``."""

    def __init__(self, label: str = ""):
        self.label = label
        self.blocks: dict[str, Block] = {}
        self.equalities: list[Equality] = []
        self._eq_index: dict[str, int] = {}
        self.unit: dict[str, np.ndarray] = {}
        self.visibility_cap = 1.0

    def add_block(self, name: str, dim: int, psd: bool = True) -> None:
        if name in self.blocks:
            raise ValueError(f"duplicate block {name!r}")
        self.blocks[name] = Block(name, int(dim), psd)

    def add_equality(self, name: str, terms: Sequence[tuple[str, Op]], target: np.ndarray, visibility: np.ndarray | None = None) -> None:
        target = np.asarray(target, dtype=complex)
        if name in self._eq_index:
            raise ValueError(f"duplicate equality {name!r}")
        if np.max(np.abs(target - target.conj().T), initial=0.0) > 1e-9:
            raise ValueError(f"target of {name!r} is not Hermitian")
        d_out = target.shape[0]
        for block, op in terms:
            if block not in self.blocks:
                raise KeyError(f"unknown block {block!r} in equality {name!r}")
            d_in = self.blocks[block].dim
            if isinstance(op, LinearMap):
                if (op.d_in, op.d_out) != (d_in, d_out):
                    raise ValueError(f"map dimensions {op.d_in}->{op.d_out} do not fit block {block!r} in {name!r}")
            elif d_in != d_out:
                raise ValueError(f"block {block!r} ({d_in}) does not match target dimension {d_out} in {name!r}")
        if visibility is not None:
            visibility = np.asarray(visibility, dtype=complex)
        self._eq_index[name] = len(self.equalities)
        self.equalities.append(Equality(name, list(terms), target, visibility))

    def set_unit(self, unit: dict[str, np.ndarray]) -> None:
        self.unit = {k: np.asarray(v, dtype=complex) for k, v in unit.items()}

    @property
    def maximize_visibility(self) -> bool:
        return any(e.visibility is not None for e in self.equalities)

    def apply(self, blocks: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        """Left-hand sides ``sum_i L_i(X_i)`` evaluated directly through the maps."""
        out = {}
        for eq in self.equalities:
            acc = np.zeros_like(eq.target)
            for name, op in eq.terms:
                x = blocks[name]
                acc = acc + (op(x) if isinstance(op, LinearMap) else op * x)
            out[eq.name] = acc
        return out

    def adjoint(self, duals: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        """``L_i^*(Y)`` for every block."""
        out = {name: np.zeros((b.dim, b.dim), dtype=complex) for name, b in self.blocks.items()}
        for eq in self.equalities:
            y = duals.get(eq.name)
            if y is None:
                continue
            yc = to_coords(y)
            for name, op in eq.terms:
                if isinstance(op, LinearMap):
                    out[name] = out[name] + from_coords(op.matrix().T @ yc, op.d_in)
                else:
                    out[name] = out[name] + np.conj(op) * y
        return out

    def target_value(self, duals: dict[str, np.ndarray], t: float = 0.0) -> float:
        total = 0.0
        for eq in self.equalities:
            if eq.name in duals:
                tgt = eq.target if eq.visibility is None else eq.target + t * eq.visibility
                total += float(np.real(np.trace(duals[eq.name] @ tgt)))
        return total


# Results ----------------------------------------------------------------------


@dataclass
class Certificate:
    """Dual functional: ``L_i^*(Y) >= 0`` for all blocks and ``sum <Y_e, T_e> = value < 0``."""

    duals: dict[str, np.ndarray]
    value: float
    min_adjoint_eig: float


@dataclass
class SdpResult:
    verdict: Verdict
    value: float = float("nan")
    blocks: dict[str, np.ndarray] | None = None
    certificate: Certificate | None = None
    residual: float = float("nan")
    min_eig: float = float("nan")
    solver: str = ""
    status: str = ""
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.verdict is Verdict.FEASIBLE

    @property
    def infeasible(self) -> bool:
        return self.verdict is Verdict.INFEASIBLE


# Independent checks ---------------------------------------------------------------


def check_witness(problem: FeasibilityProblem, blocks: dict[str, np.ndarray], t: float = 0.0) -> tuple[float, float]:
    """Max-norm equality residual and smallest eigenvalue over PSD blocks."""
    lhs = problem.apply(blocks)
    residual = 0.0
    for eq in problem.equalities:
        tgt = eq.target if eq.visibility is None else eq.target + t * eq.visibility
        residual = max(residual, float(np.max(np.abs(lhs[eq.name] - tgt), initial=0.0)))
    eigs = [np.linalg.eigvalsh(0.5 * (x + x.conj().T)).min() for n, x in blocks.items() if problem.blocks[n].psd]
    return residual, float(min(eigs)) if eigs else float("inf")


def check_certificate(problem: FeasibilityProblem, cert: Certificate) -> tuple[float, float]:
    """Recompute ``(value, min eigenvalue of the adjoint blocks)`` for a certificate.

    The certificate is valid when the eigenvalue is non-negative (up to
    round-off) and the value is negative.
    """
    adj = problem.adjoint(cert.duals)
    eigs = []
    for name, blk in problem.blocks.items():
        a = 0.5 * (adj[name] + adj[name].conj().T)
        if blk.psd:
            eigs.append(np.linalg.eigvalsh(a).min())
        else:
            eigs.append(-np.max(np.abs(a)))
    return problem.target_value(cert.duals), float(min(eigs))


def _repair_certificate(problem: FeasibilityProblem, duals: dict[str, np.ndarray]) -> Certificate | None:
    adj = problem.adjoint(duals)
    lo = min(np.linalg.eigvalsh(0.5 * (a + a.conj().T)).min() for n, a in adj.items() if problem.blocks[n].psd)
    if any(not b.psd and np.max(np.abs(adj[n])) > 1e-10 for n, b in problem.blocks.items()):
        return None
    duals = dict(duals)
    if lo < 0:
        if not problem.unit:
            return None
        unit_adj = problem.adjoint(problem.unit)
        c = min(np.linalg.eigvalsh(0.5 * (a + a.conj().T)).min() for n, a in unit_adj.items() if problem.blocks[n].psd)
        if c <= 1e-12:
            return None
        shift = -lo / c
        for name, e in problem.unit.items():
            duals[name] = duals.get(name, 0) + shift * e
        adj = problem.adjoint(duals)
    scale = sum(float(np.real(np.trace(a))) for a in adj.values())
    if scale <= 1e-12:
        # L^*(Y) = 0: the equalities alone are inconsistent
        scale = float(np.sqrt(sum(np.sum(np.abs(y) ** 2) for y in duals.values())))
        if scale <= 0:
            return None
    duals = {k: v / scale for k, v in duals.items()}
    value, min_eig = check_certificate(problem, Certificate(duals, 0.0, 0.0))
    return Certificate(duals, value, min_eig)


# Standard form -----------------------------------------------------------------------


@dataclass
class ConicData:
    """Real standard form handed to an adapter.

    Variables are ``x = (block coordinates..., z)`` where ``z`` is the shift
    ``s`` (feasibility) or the visibility ``t`` (robustness). The adapter must
    maximize ``z`` subject to ``A_eq x = b_eq``, ``z <= cap`` and, for every PSD
    block, ``K x_block - shift * ident`` in the PSD cone (``shift`` is ``z`` in
    feasibility mode and 0 otherwise). It returns ``x`` and the multipliers of
    ``A_eq`` with the sign convention ``A_eq^T y = K^T Z`` (``Z >= 0``).
    """

    n: int
    a_eq: np.ndarray
    b_eq: np.ndarray
    psd: list[tuple[slice, np.ndarray, np.ndarray, int]]
    shift_psd: bool
    cap: float


@dataclass
class RawSolution:
    status: str
    x: np.ndarray | None = None
    y_eq: np.ndarray | None = None
    infeasible: bool = False


class SolverAdapter(Protocol):
    name: str

    def solve(self, data: ConicData, settings: SolverSettings) -> RawSolution: ...


class ClarabelAdapter:
    name = "clarabel"

    def solve(self, data: ConicData, settings: SolverSettings) -> RawSolution:
        import clarabel

        n = data.n
        r = data.a_eq.shape[0]
        zcol = n - 1
        rows = [sparse.csr_matrix(data.a_eq)]
        b = [data.b_eq]
        cones = []
        if r:
            cones.append(clarabel.ZeroConeT(r))
        cap_row = sparse.csr_matrix(([1.0], ([0], [zcol])), shape=(1, n))
        rows.append(cap_row)
        b.append(np.array([data.cap]))
        cones.append(clarabel.NonnegativeConeT(1))
        for sl, k, ident, dim2 in data.psd:
            blk = sparse.lil_matrix((k.shape[0], n))
            blk[:, sl] = -k
            if data.shift_psd:
                blk[:, zcol] = ident[:, None]
            rows.append(blk.tocsr())
            b.append(np.zeros(k.shape[0]))
            cones.append(clarabel.PSDTriangleConeT(dim2))
        a = sparse.vstack(rows).tocsc()
        q = np.zeros(n)
        q[zcol] = -1.0
        p = sparse.csc_matrix((n, n))
        opts = clarabel.DefaultSettings()
        opts.verbose = False
        opts.tol_feas = settings.tol_feas
        opts.tol_gap_abs = settings.tol_gap
        opts.tol_gap_rel = settings.tol_gap
        opts.max_iter = settings.max_iter
        sol = clarabel.DefaultSolver(p, q, a, np.concatenate(b), cones, opts).solve()
        status = str(sol.status).split(".")[-1]
        z = np.asarray(sol.z)
        x = np.asarray(sol.x)
        if status in ("Solved", "AlmostSolved"):
            return RawSolution(status, x, z[:r])
        if status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
            return RawSolution(status, None, z[:r], infeasible=True)
        return RawSolution(status)


class CvxpyAdapter:
    """Same standard form through cvxpy; useful as an independent second solver."""

    def __init__(self, solver: str | None = None):
        self.solver = solver
        self.name = f"cvxpy:{solver}" if solver else "cvxpy"

    def solve(self, data: ConicData, settings: SolverSettings) -> RawSolution:
        import cvxpy as cp

        x = cp.Variable(data.n)
        z = x[data.n - 1]
        cons = []
        eq = None
        if data.a_eq.shape[0]:
            eq = data.a_eq @ x == data.b_eq
            cons.append(eq)
        cons.append(z <= data.cap)
        for sl, k, ident, dim2 in data.psd:
            w = cp.Variable((dim2, dim2), symmetric=True)
            rows, cols = _triu_colmajor(dim2)
            scale = np.where(rows == cols, 1.0, np.sqrt(2.0))
            expr = k @ x[sl] - (ident * z if data.shift_psd else 0)
            cons.append(cp.multiply(w[rows, cols], scale) == expr)
            cons.append(w >> 0)
        prob = cp.Problem(cp.Maximize(z), cons)
        try:
            prob.solve(solver=self.solver)
        except cp.error.SolverError as exc:
            return RawSolution(f"error: {exc}")
        status = prob.status
        if status in ("optimal", "optimal_inaccurate"):
            y = np.asarray(eq.dual_value) if eq is not None else np.zeros(0)
            return RawSolution(status, np.asarray(x.value), y)
        return RawSolution(status)


@lru_cache(maxsize=None)
def _triu_colmajor(n: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.triu_indices(n)
    order = np.lexsort((rows, cols))
    return rows[order], cols[order]


def get_adapter(name: str | None = None) -> SolverAdapter:
    """Adapter from a name such as ``clarabel``, ``cvxpy`` or ``cvxpy:SCS``.

    Defaults to the ``STEERKIT_SOLVER`` environment variable, then Clarabel.
    """
    name = name or os.environ.get("STEERKIT_SOLVER", "clarabel")
    low = name.lower()
    if low == "clarabel":
        return ClarabelAdapter()
    if low.startswith("cvxpy"):
        _, _, solver = name.partition(":")
        return CvxpyAdapter(solver.upper() or None)
    raise ValueError(f"unknown solver adapter {name!r}")


# Solve ------------------------------------------------------------------------------


_RECORDERS: list[list] = []


@contextlib.contextmanager
def record_solves() -> Iterator[list[tuple[FeasibilityProblem, SdpResult]]]:
    """Collect every ``(problem, result)`` pair solved inside the block."""
    log: list = []
    _RECORDERS.append(log)
    try:
        yield log
    finally:
        _RECORDERS.remove(log)


def _record(problem: FeasibilityProblem, result: SdpResult) -> SdpResult:
    for log in _RECORDERS:
        log.append((problem, result))
    return result


class _Layout:
    def __init__(self, problem: FeasibilityProblem):
        self.offsets: dict[str, slice] = {}
        pos = 0
        for name, blk in problem.blocks.items():
            self.offsets[name] = slice(pos, pos + blk.dim**2)
            pos += blk.dim**2
        self.n_params = pos
        self.row_offsets: dict[str, slice] = {}
        rpos = 0
        for eq in problem.equalities:
            m = eq.target.shape[0] ** 2
            self.row_offsets[eq.name] = slice(rpos, rpos + m)
            rpos += m
        self.n_rows = rpos

    def blocks(self, problem: FeasibilityProblem, x: np.ndarray) -> dict[str, np.ndarray]:
        return {name: from_coords(x[self.offsets[name]], blk.dim) for name, blk in problem.blocks.items()}

    def duals(self, problem: FeasibilityProblem, y: np.ndarray) -> dict[str, np.ndarray]:
        return {eq.name: from_coords(y[self.row_offsets[eq.name]], eq.target.shape[0]) for eq in problem.equalities}


def _assemble(problem: FeasibilityProblem, layout: _Layout) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = np.zeros((layout.n_rows, layout.n_params))
    b = np.zeros(layout.n_rows)
    v = np.zeros(layout.n_rows)
    for eq in problem.equalities:
        rows = layout.row_offsets[eq.name]
        b[rows] = to_coords(eq.target)
        if eq.visibility is not None:
            v[rows] = to_coords(eq.visibility)
        for name, op in eq.terms:
            cols = layout.offsets[name]
            if isinstance(op, LinearMap):
                a[rows, cols] += op.matrix()
            else:
                a[rows, cols] += float(np.real(op)) * np.eye(cols.stop - cols.start)
    return a, b, v


def solve(problem: FeasibilityProblem, adapter: SolverAdapter | None = None, settings: SolverSettings | None = None) -> SdpResult:
    """Decide feasibility (or maximize the visibility) and validate the outcome."""
    adapter = adapter or get_adapter()
    settings = settings or _SETTINGS.get()
    robust = problem.maximize_visibility
    if not problem.equalities:
        blocks = {n: np.zeros((b.dim, b.dim), dtype=complex) for n, b in problem.blocks.items()}
        return _record(problem, SdpResult(Verdict.FEASIBLE, 0.0, blocks, residual=0.0, min_eig=0.0, solver="none", status="trivial"))

    layout = _Layout(problem)
    a, b, v = _assemble(problem, layout)
    full = np.hstack([a, -v[:, None]]) if robust else a

    # drop dependent equality rows; an inconsistent affine system is infeasible outright
    u, sv, _ = np.linalg.svd(full, full_matrices=False)
    rank = int(np.sum(sv > 1e-10 * max(sv.max(initial=0.0), 1.0)))
    u_r = u[:, :rank]
    off_range = b - u_r @ (u_r.T @ b)
    if np.linalg.norm(off_range) > 1e-9 * (1 + np.linalg.norm(b)):
        cert = _repair_certificate(problem, layout.duals(problem, -off_range))
        return _record(problem, _certificate_result(cert, settings, adapter.name, "affine-inconsistent"))

    a_red = u_r.T @ full
    b_red = u_r.T @ b
    n = layout.n_params + 1
    if not robust:
        a_red = np.hstack([a_red, np.zeros((rank, 1))])
    psd = []
    for name, blk in problem.blocks.items():
        if blk.psd:
            k, ident = _svec_embedding(blk.dim)
            psd.append((layout.offsets[name], k, ident, 2 * blk.dim))
    data = ConicData(n, a_red, b_red, psd, shift_psd=not robust, cap=problem.visibility_cap if robust else 1.0)
    raw = adapter.solve(data, settings)

    if raw.x is not None:
        z = float(raw.x[-1])
        if robust or z >= -settings.eig_tol:
            blocks = _polish(problem, layout, a, b + (z * v if robust else 0), raw.x[:-1])
            residual, min_eig = check_witness(problem, blocks, z if robust else 0.0)
            ok = residual <= settings.residual_tol and min_eig >= -settings.eig_tol
            verdict = Verdict.FEASIBLE if ok else Verdict.INCONCLUSIVE
            msg = "" if ok else f"witness failed revalidation (residual {residual:.2e}, min eig {min_eig:.2e})"
            return _record(problem, SdpResult(verdict, z, blocks, None, residual, min_eig, adapter.name, raw.status, msg))
        if raw.y_eq is None:
            return _record(problem, SdpResult(Verdict.INCONCLUSIVE, z, solver=adapter.name, status=raw.status, message="no dual information"))
        cert = _repair_certificate(problem, layout.duals(problem, u_r @ raw.y_eq))
        res = _certificate_result(cert, settings, adapter.name, raw.status)
        res.value = z
        return _record(problem, res)
    if raw.infeasible and raw.y_eq is not None and not robust:
        cert = _repair_certificate(problem, layout.duals(problem, u_r @ raw.y_eq))
        return _record(problem, _certificate_result(cert, settings, adapter.name, raw.status))
    if raw.infeasible and robust:
        return _record(problem, SdpResult(Verdict.INFEASIBLE, solver=adapter.name, status=raw.status, message="no visibility is feasible"))
    return _record(problem, SdpResult(Verdict.INCONCLUSIVE, solver=adapter.name, status=raw.status, message="solver did not converge"))


def _polish(problem: FeasibilityProblem, layout: _Layout, a: np.ndarray, b: np.ndarray, x: np.ndarray) -> dict[str, np.ndarray]:
    """Least-norm correction of the block coordinates onto ``a x = b``."""
    resid = a @ x - b
    corr, *_ = np.linalg.lstsq(a, resid, rcond=None)
    return layout.blocks(problem, x - corr)


def _certificate_result(cert: Certificate | None, settings: SolverSettings, solver: str, status: str) -> SdpResult:
    if cert is None:
        return SdpResult(Verdict.INCONCLUSIVE, solver=solver, status=status, message="dual certificate could not be repaired")
    ok = cert.value <= -settings.gap_tol and cert.min_adjoint_eig >= -1e-11
    if ok:
        return SdpResult(Verdict.INFEASIBLE, cert.value, certificate=cert, solver=solver, status=status)
    return SdpResult(
        Verdict.INCONCLUSIVE,
        cert.value,
        certificate=cert,
        solver=solver,
        status=status,
        message=f"certificate gap {cert.value:.2e} not below -{settings.gap_tol:.0e}",
    )


# Strategies and correlation tables ----------------------------------------------------


def enumerate_deterministic(n_settings: int, n_outcomes: int) -> list[tuple[int, ...]]:
    """All maps setting -> outcome, in lexicographic order."""
    if n_settings < 1 or n_outcomes < 1:
        raise ValueError("need at least one setting and one outcome")
    if n_outcomes**n_settings > MAX_STRATEGIES:
        raise OverflowError(f"{n_outcomes}^{n_settings} deterministic strategies exceed {MAX_STRATEGIES}")
    return list(itertools.product(range(n_outcomes), repeat=n_settings))


def local_deterministic_tables(n_a: int, n_b: int, n_x: int, n_y: int) -> np.ndarray:
    """Products of deterministic strategies as tables ``p[a, b, x, y]``."""
    tables = []
    for sa in enumerate_deterministic(n_x, n_a):
        for sb in enumerate_deterministic(n_y, n_b):
            p = np.zeros((n_a, n_b, n_x, n_y))
            for x, y in itertools.product(range(n_x), range(n_y)):
                p[sa[x], sb[y], x, y] = 1.0
            tables.append(p)
    return np.array(tables)


class UnsupportedScenarioError(ValueError):
    pass


def ns_vertices(n_a: int = 2, n_b: int = 2, n_x: int = 2, n_y: int = 2) -> np.ndarray:
    """Extreme points of the two-party no-signaling polytope (2 settings, 2 outcomes).

    Returns 24 tables ``p[a, b, x, y]``: 16 local deterministic points followed by
    the 8 PR-type boxes ``p = 1/2 [a xor b = xy xor alpha x xor beta y xor gamma]``.
    """
    if (n_a, n_b, n_x, n_y) != (2, 2, 2, 2):
        raise UnsupportedScenarioError("no-signaling vertices are only tabulated for the 2-setting, 2-outcome scenario")
    tables = list(local_deterministic_tables(2, 2, 2, 2))
    for alpha, beta, gamma in itertools.product(range(2), repeat=3):
        p = np.zeros((2, 2, 2, 2))
        for a, b, x, y in itertools.product(range(2), repeat=4):
            if (a ^ b) == ((x * y) ^ (alpha * x) ^ (beta * y) ^ gamma):
                p[a, b, x, y] = 0.5
        tables.append(p)
    return np.array(tables)


def correlation_ns_residual(p: np.ndarray) -> float:
    """Largest violation of normalization or no-signaling for a table ``p[a, b, x, y]``."""
    norm = np.max(np.abs(p.sum(axis=(0, 1)) - 1.0))
    pa = p.sum(axis=1)  # (a, x, y)
    pb = p.sum(axis=0)  # (b, x, y)
    ns_a = np.max(np.abs(pa - pa[:, :, :1]))
    ns_b = np.max(np.abs(pb - pb[:, :1, :]))
    return float(max(norm, ns_a, ns_b, max(0.0, -p.min())))


# Shared builders ------------------------------------------------------------------------


def deterministic_membership_problem(targets: np.ndarray, label: str = "lhs", visibility: np.ndarray | None = None) -> tuple[FeasibilityProblem, list[tuple[int, ...]]]:
    """Blocks ``X_lam >= 0`` over deterministic strategies with ``sum_{lam(x)=a} X_lam = T[a, x]``.

    This is joint measurability when ``T`` is a measurement assemblage and the
    local-hidden-state problem when ``T`` is a steering assemblage.
    """
    n_out, n_set, d, _ = targets.shape
    strategies = enumerate_deterministic(n_set, n_out)
    prob = FeasibilityProblem(label)
    for lam in range(len(strategies)):
        prob.add_block(f"X{lam}", d)
    for a, x in itertools.product(range(n_out), range(n_set)):
        terms = [(f"X{lam}", 1.0) for lam, s in enumerate(strategies) if s[x] == a]
        vis = None if visibility is None else visibility[a, x]
        prob.add_equality(f"{a}|{x}", terms, targets[a, x], vis)
    prob.set_unit({f"{a}|0": np.eye(d) for a in range(n_out)})
    return prob, strategies


def two_sided_membership_problem(
    targets: np.ndarray,
    corr_tables: np.ndarray | None,
    label: str = "two-sided",
) -> tuple[FeasibilityProblem, list[tuple[int, ...]], list[tuple[int, ...]]]:
    """Decomposition ``T[a,b,x,y] = sum_{lam(x)=a} G_{lam,b|y} + sum_{mu(y)=b} H_{mu,a|x} + sum_tau p_tau(ab|xy) F_tau``.

    ``G`` and ``H`` carry the no-signaling constraints ``sum_b G_{lam,b|y}``
    independent of ``y`` and ``sum_a H_{mu,a|x}`` independent of ``x``. With
    ``corr_tables=None`` the ``F`` term is omitted.
    """
    n_a, n_b, n_x, n_y, d, _ = targets.shape
    lams = enumerate_deterministic(n_x, n_a)
    mus = enumerate_deterministic(n_y, n_b)
    prob = FeasibilityProblem(label)
    for lam in range(len(lams)):
        for b_, y in itertools.product(range(n_b), range(n_y)):
            prob.add_block(f"G{lam},{b_}|{y}", d)
    for mu in range(len(mus)):
        for a, x in itertools.product(range(n_a), range(n_x)):
            prob.add_block(f"H{mu},{a}|{x}", d)
    n_tau = 0 if corr_tables is None else len(corr_tables)
    for tau in range(n_tau):
        prob.add_block(f"F{tau}", d)

    for a, b_, x, y in itertools.product(range(n_a), range(n_b), range(n_x), range(n_y)):
        terms: list[tuple[str, Op]] = [(f"G{lam},{b_}|{y}", 1.0) for lam, s in enumerate(lams) if s[x] == a]
        terms += [(f"H{mu},{a}|{x}", 1.0) for mu, s in enumerate(mus) if s[y] == b_]
        for tau in range(n_tau):
            w = float(corr_tables[tau][a, b_, x, y])
            if w:
                terms.append((f"F{tau}", w))
        prob.add_equality(f"{a}{b_}|{x}{y}", terms, targets[a, b_, x, y])

    zero = np.zeros((d, d))
    unit = {f"{a}{b_}|00": np.eye(d) for a in range(n_a) for b_ in range(n_b)}
    for lam in range(len(lams)):
        for y in range(1, n_y):
            terms = [(f"G{lam},{b_}|{y}", 1.0) for b_ in range(n_b)] + [(f"G{lam},{b_}|0", -1.0) for b_ in range(n_b)]
            prob.add_equality(f"nsG{lam}|{y}", terms, zero)
            unit[f"nsG{lam}|{y}"] = np.eye(d) / n_y
    for mu in range(len(mus)):
        for x in range(1, n_x):
            terms = [(f"H{mu},{a}|{x}", 1.0) for a in range(n_a)] + [(f"H{mu},{a}|0", -1.0) for a in range(n_a)]
            prob.add_equality(f"nsH{mu}|{x}", terms, zero)
            unit[f"nsH{mu}|{x}"] = np.eye(d) / n_x
    prob.set_unit(unit)
    return prob, lams, mus
