"""Command-line front end: ``steerkit <subcommand> [options]``.

Every command writes one JSON document to stdout carrying a ``manifest``
(command, input hashes, tolerances, solver, verdict, wall time). Exit codes:
0 verdict produced, 1 ``verify-thm2`` checks failed, 2 invalid input,
3 solver inconclusive, 64 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import construct, incompat, io, sdpcore, states, steering
from .assemblage import merge_parties, steer, steer_one_sided
from .povm import depolarize, pauli_measurements, random_qubit_pair, trivial_measurement
from .sdpcore import SolverSettings, Verdict

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID = 2
EXIT_INCONCLUSIVE = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


@dataclass
class RunManifest:
    command: str
    inputs: dict[str, str] = field(default_factory=dict)
    tolerances: dict[str, float] = field(default_factory=dict)
    solver: dict[str, Any] = field(default_factory=dict)
    verdict: str = ""
    wall_time: float = 0.0


@dataclass
class _Input:
    obj: Any
    digest: str


def _read(path: str | None) -> _Input:
    if path in (None, "-"):
        raw = sys.stdin.buffer.read()
    else:
        with open(path, "rb") as fh:
            raw = fh.read()
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise io.FormatError(f"{path or 'stdin'} is not valid JSON: {exc}") from exc
    return _Input(obj, hashlib.sha256(raw).hexdigest())


def _settings(args) -> SolverSettings:
    return SolverSettings(tol_feas=args.tol, tol_gap=args.tol)


def _verdict_str(v: Verdict | str) -> str:
    return v.value if isinstance(v, Verdict) else str(v)


def _sdp_summary(res: sdpcore.SdpResult) -> dict:
    out = {"verdict": _verdict_str(res.verdict), "status": res.status, "objective": res.value}
    if res.feasible:
        out.update(residual=res.residual, min_eigenvalue=res.min_eig)
    if res.certificate is not None:
        out.update(certificate_value=res.certificate.value, certificate_min_eigenvalue=res.certificate.min_adjoint_eig)
    if res.message:
        out["message"] = res.message
    return out


# single-instance workers (module level so they can run in a process pool)


def _jm(obj: dict, opts: dict) -> dict:
    m = io.measurement_from_json(obj)
    res = incompat.is_jointly_measurable(m, sdpcore.get_adapter(opts["solver"]))
    report = {"verdict": _verdict_str(res.verdict), "sdp": _sdp_summary(res.sdp)}
    if res.parent is not None:
        report["parent"] = {"elements": res.parent.povm.elements, "response": res.parent.response.table}
    return report


def _lhs(obj: dict, opts: dict) -> dict:
    s = io.assemblage_from_json(obj)
    res = steering.is_unsteerable(s, sdpcore.get_adapter(opts["solver"]))
    report = {"verdict": _verdict_str(res.verdict), "sdp": _sdp_summary(res.sdp)}
    if res.model is not None:
        report["lhs_model"] = {"strategies": res.model.strategies, "sigma": res.model.sigma}
    return report


def _gms_report(rep: steering.GmsMembershipReport) -> dict:
    out = {"verdict": rep.verdict, "relaxation": rep.relaxation, "solves": [_sdp_summary(r) for r in rep.results]}
    if rep.certificate is not None:
        out["certificate_gap"] = rep.certificate_gap
    if rep.blocks is not None:
        out.update(residual=rep.residual, min_eigenvalue=rep.min_eig)
    return out


def _merged(s, group: str | None):
    if group:
        s = merge_parties(s, [int(i) for i in group.split(",")])
    return s


def _gms1(obj: dict, opts: dict) -> dict:
    s = _merged(io.assemblage_from_json(obj), opts.get("merge"))
    return _gms_report(steering.gms_one_sided(s, sdpcore.get_adapter(opts["solver"])))


def _gms2(obj: dict, opts: dict) -> dict:
    s = _merged(io.assemblage_from_json(obj), opts.get("merge"))
    return _gms_report(steering.gms_two_sided(s, opts["corr"], sdpcore.get_adapter(opts["solver"])))


_WORKERS: dict[str, Callable[[dict, dict], dict]] = {"jm": _jm, "lhs": _lhs, "gms1": _gms1, "gms2": _gms2}


def _run_worker(name: str, obj: dict, opts: dict) -> dict:
    with sdpcore.using_settings(SolverSettings(tol_feas=opts["tol"], tol_gap=opts["tol"])):
        return _WORKERS[name](obj, opts)


def _batchable(name: str, inp: _Input, args, extra: dict | None = None) -> dict:
    opts = {"solver": args.solver, "tol": args.tol, **(extra or {})}
    if not isinstance(inp.obj, list):
        return _run_worker(name, inp.obj, opts)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            reports = list(pool.map(_run_worker, [name] * len(inp.obj), inp.obj, [opts] * len(inp.obj)))
    else:
        reports = [_run_worker(name, item, opts) for item in inp.obj]
    verdicts = {r["verdict"] for r in reports}
    overall = "inconclusive" if "inconclusive" in verdicts else "batch"
    return {"verdict": overall, "results": reports}


# commands


def cmd_make_state(args) -> tuple[dict, dict]:
    kind = args.kind
    if kind == "ghz":
        psi = states.ghz(args.n, args.d)
    elif kind == "w":
        psi = states.w(args.n)
    elif kind == "dicke":
        psi = states.dicke(args.n, args.k)
    elif kind == "max-entangled":
        psi = states.max_entangled(args.d)
    elif kind == "random":
        psi = states.haar_random_state((args.d,) * args.n, np.random.default_rng(args.seed))
    else:
        digits = [int(c) for c in args.digits]
        psi = states.basis_state(digits, (args.d,) * len(digits))
    out = io.state_to_json(psi)
    out["verdict"] = "generated"
    return out, {}


def cmd_make_meas(args) -> tuple[dict, dict]:
    if args.kind == "pauli":
        m = pauli_measurements(args.axes, args.eta)
    elif args.kind == "trivial":
        m = trivial_measurement(args.d, args.outcomes, args.settings)
    else:
        m = random_qubit_pair(np.random.default_rng(args.seed), args.eta)
    out = io.measurement_to_json(m)
    out["verdict"] = "generated"
    return out, {}


def _load_state(inp: _Input):
    st = io.state_from_json(inp.obj)
    if isinstance(st, states.PureState):
        return st, st.dims
    return st


def cmd_steer(args) -> tuple[dict, dict]:
    st_in = _read(args.state)
    meas_in = [_read(p) for p in args.meas]
    rho, dims = _load_state(st_in)
    s = steer(rho, [io.measurement_from_json(m.obj) for m in meas_in], dims)
    out = io.assemblage_to_json(s)
    out["verdict"] = "generated"
    hashes = {"state": st_in.digest, **{f"meas{i}": m.digest for i, m in enumerate(meas_in)}}
    return out, hashes


def cmd_jm(args) -> tuple[dict, dict]:
    inp = _read(args.meas)
    return _batchable("jm", inp, args), {"meas": inp.digest}


def cmd_lhs(args) -> tuple[dict, dict]:
    inp = _read(args.assemblage)
    return _batchable("lhs", inp, args), {"assemblage": inp.digest}


def cmd_gms1(args) -> tuple[dict, dict]:
    inp = _read(args.assemblage)
    return _batchable("gms1", inp, args, {"merge": args.merge}), {"assemblage": inp.digest}


def cmd_gms2(args) -> tuple[dict, dict]:
    inp = _read(args.assemblage)
    return _batchable("gms2", inp, args, {"merge": args.merge, "corr": args.corr}), {"assemblage": inp.digest}


def cmd_genjm(args) -> tuple[dict, dict]:
    a_in, b_in = _read(args.meas_a), _read(args.meas_b)
    ma, mb = io.measurement_from_json(a_in.obj), io.measurement_from_json(b_in.obj)
    adapter = sdpcore.get_adapter(args.solver)
    if args.mode == "no-free":
        res = incompat.genjm_no_free(ma, mb, adapter)
    else:
        res = incompat.genjm_full(ma, mb, args.mode, adapter)
    return {"verdict": _verdict_str(res.verdict), "mode": res.mode, "sdp": _sdp_summary(res.sdp)}, {
        "meas_a": a_in.digest,
        "meas_b": b_in.digest,
    }


def cmd_robustness(args) -> tuple[dict, dict]:
    adapter = sdpcore.get_adapter(args.solver)
    hashes = {}
    if args.target == "jm":
        if not args.meas:
            raise ValueError("robustness --target jm needs --meas")
        inp = _read(args.meas[0])
        hashes["meas"] = inp.digest
        eta = incompat.incompat_robustness(io.measurement_from_json(inp.obj), tol=args.bisect_tol, adapter=adapter)
        noise = "measurement depolarization"
    elif args.assemblage:
        inp = _read(args.assemblage)
        hashes["assemblage"] = inp.digest
        s = _merged(io.assemblage_from_json(inp.obj), args.merge)
        eta = steering.steering_robustness(s, args.target, args.corr, args.bisect_tol, adapter)
        noise = "white noise on the trusted side"
    else:
        if not args.state or not args.meas:
            raise ValueError("robustness needs --assemblage, or --state with --meas")
        st_in = _read(args.state)
        meas_in = [_read(p) for p in args.meas]
        hashes = {"state": st_in.digest, **{f"meas{i}": m.digest for i, m in enumerate(meas_in)}}
        rho, dims = _load_state(st_in)
        meas = [io.measurement_from_json(m.obj) for m in meas_in]

        def family(eta: float):
            return _merged(steer(rho, [depolarize(m, eta) for m in meas], dims), args.merge)

        eta = steering.steering_robustness(family, args.target, args.corr, args.bisect_tol, adapter)
        noise = "measurement depolarization"
    return {"verdict": "computed", "eta_star": eta, "target": args.target, "noise": noise, "bisect_tol": args.bisect_tol}, hashes


def cmd_verify_thm2(args) -> tuple[dict, dict]:
    rep = construct.verify_thm2(tol=args.tol_check)
    out = asdict(rep)
    out["verdict"] = "pass" if rep.passed else "fail"
    return out, {}


def cmd_extract_parent(args) -> tuple[dict, dict]:
    st_in, m_in = _read(args.state), _read(args.meas)
    psi = io.state_from_json(st_in.obj)
    if not isinstance(psi, states.PureState):
        raise ValueError("extract-parent needs a pure state")
    meas = io.measurement_from_json(m_in.obj)
    s = steer_one_sided(psi, meas)
    s = merge_parties(s, range(len(s.trusted_dims)))
    lhs = steering.is_unsteerable(s, sdpcore.get_adapter(args.solver))
    out = {"verdict": _verdict_str(lhs.verdict), "sdp": _sdp_summary(lhs.sdp)}
    if lhs.model is not None:
        parent = construct.parent_from_lhs(psi, lhs.model, meas)
        out["parent"] = {
            "elements": parent.povm.elements,
            "response": parent.response.table,
            "completeness_residual": parent.povm.completeness_residual(),
        }
        out["reconstruction_error"] = float(np.max(np.abs(parent.reconstruct().elements - meas.elements)))
    return out, {"state": st_in.digest, "meas": m_in.digest}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--tol", type=float, default=sdpcore.DEFAULT_SETTINGS.tol_feas, help="solver primal/dual tolerance")
    common.add_argument("--solver", default=None, help="adapter name (default: $STEERKIT_SOLVER or clarabel)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for batch (list) inputs")
    common.add_argument("-o", "--output", default=None, help="write the report here instead of stdout")

    parser = _Parser(prog="steerkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("make-state", parents=[common], help="write a pure state")
    p.add_argument("--kind", choices=["ghz", "w", "dicke", "max-entangled", "basis", "random"], default="ghz")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--digits", default="000")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_state)

    p = sub.add_parser("make-meas", parents=[common], help="write a measurement assemblage")
    p.add_argument("--kind", choices=["pauli", "trivial", "random-qubit-pair"], default="pauli")
    p.add_argument("--axes", default="XY")
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--outcomes", type=int, default=1)
    p.add_argument("--settings", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_meas)

    p = sub.add_parser("steer", parents=[common], help="assemblage from a state and measurements on its first parties")
    p.add_argument("--state", required=True)
    p.add_argument("--meas", action="append", required=True, help="repeat for two untrusted parties")
    p.set_defaults(func=cmd_steer)

    p = sub.add_parser("jm", parents=[common], help="joint measurability")
    p.add_argument("--meas", default=None, help="measurement file (default stdin)")
    p.set_defaults(func=cmd_jm)

    for name, func, helptext in (
        ("lhs", cmd_lhs, "local-hidden-state membership"),
        ("gms1", cmd_gms1, "genuine multipartite steering, one untrusted party"),
        ("gms2", cmd_gms2, "genuine multipartite steering, two untrusted parties"),
    ):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--assemblage", default=None, help="assemblage file (default stdin)")
        if name != "lhs":
            p.add_argument("--merge", default=None, help="comma-separated trusted parties to merge first")
        if name == "gms2":
            p.add_argument("--corr", choices=["inner", "outer"], default="inner")
        p.set_defaults(func=func)

    p = sub.add_parser("genjm", parents=[common], help="distributed joint measurability of a measurement pair")
    p.add_argument("--meas-a", required=True)
    p.add_argument("--meas-b", required=True)
    p.add_argument("--mode", choices=["no-free", "inner", "outer"], default="no-free")
    p.set_defaults(func=cmd_genjm)

    p = sub.add_parser("robustness", parents=[common], help="critical visibility by bisection")
    p.add_argument("--target", choices=["jm", "lhs", "gms1", "gms2"], default="lhs")
    p.add_argument("--meas", action="append", default=[])
    p.add_argument("--state", default=None)
    p.add_argument("--assemblage", default=None)
    p.add_argument("--merge", default=None)
    p.add_argument("--corr", choices=["inner", "outer"], default="outer")
    p.add_argument("--bisect-tol", type=float, default=incompat.BISECT_TOL)
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("verify-thm2", parents=[common], help="check the explicit two-sided decomposition")
    p.add_argument("--tol-check", type=float, default=1e-12)
    p.set_defaults(func=cmd_verify_thm2)

    p = sub.add_parser("extract-parent", parents=[common], help="parent measurement from a state and compatible measurements")
    p.add_argument("--state", required=True)
    p.add_argument("--meas", required=True)
    p.set_defaults(func=cmd_extract_parent)
    return parser


def _exit_code(command: str, verdict: str) -> int:
    if verdict == "inconclusive":
        return EXIT_INCONCLUSIVE
    if command == "verify-thm2" and verdict != "pass":
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _emit(doc: dict, output: str | None) -> None:
    text = json.dumps(io.to_jsonable(doc), indent=2)
    if output:
        with open(output, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def dispatch(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    manifest = RunManifest(command=args.command)
    try:
        adapter = sdpcore.get_adapter(args.solver)
    except ValueError as exc:
        _emit({"verdict": "error", "error": str(exc)}, None)
        return EXIT_INVALID
    manifest.solver = {"adapter": adapter.name, **asdict(_settings(args))}
    manifest.tolerances = {"tol": args.tol, **({"bisect_tol": args.bisect_tol} if hasattr(args, "bisect_tol") else {})}
    start = time.perf_counter()
    try:
        with sdpcore.using_settings(_settings(args)):
            report, hashes = args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        manifest.verdict = "error"
        manifest.wall_time = time.perf_counter() - start
        _emit({"verdict": "error", "error": str(exc), "manifest": asdict(manifest)}, None)
        return EXIT_INVALID
    manifest.inputs = hashes
    manifest.verdict = report["verdict"]
    manifest.wall_time = time.perf_counter() - start
    report["manifest"] = asdict(manifest)
    _emit(report, args.output)
    return _exit_code(args.command, report["verdict"])


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
