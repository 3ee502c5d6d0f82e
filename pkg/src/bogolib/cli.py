"""Command-line drivers writing CSV tables with a JSON sidecar."""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .bath import mean_energy, run_otto_cycle
from .dynamics import hamiltonian_at, instantaneous_basis, run_compression
from .entanglement import (
    Bipartition,
    bipartition_scan,
    log_negativity,
    witness_adiabatic_analytic,
    witness_thermal_analytic,
)
from .errors import BogolibError, ScenarioError
from .lattice import build_hamiltonian, normal_modes, thermal_covariance
from .linalg import symplectic_eigenvalues
from .scenario import Scenario, load_scenario
from .sdp.cmc import optimal_witness
from .sdp.solver import SdpStatus

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_BAD_INPUT = 2


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def write_sidecar(path: Path, scenario: Scenario, command: str, started: str,
                  extra: Dict) -> None:
    doc = {
        "command": command,
        "code_version": __version__,
        "scenario_sha256": scenario.digest(),
        "scenario": scenario.model_dump(mode="json"),
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        **extra,
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def bisect_root(fn: Callable[[float], float], lo: float, hi: float, rtol: float = 1e-4):
    """Bracket of width ``rtol*hi`` around a sign change of a decreasing ``fn``."""
    f_lo, f_hi = fn(lo), fn(hi)
    if f_lo <= 0 or f_hi > 0:
        return None
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if fn(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo, hi


class _Context:
    def __init__(self, args, scenario: Scenario):
        self.args = args
        self.scenario = scenario
        run = scenario.run
        tol = args.tol
        self.gap_tol = tol if tol is not None else run.gap_tol
        self.feas_tol = tol if tol is not None else run.feas_tol
        self.max_iter = run.max_iter
        self.use_sdp = run.sdp and not getattr(args, "no_sdp", False)
        self.statuses: List[str] = []
        self.params = scenario.physical_params()
        self.units = scenario.units
        out = args.out or run.output_dir or "."
        self.out_dir = Path(out)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.workers = args.threads

    def sdp_witness(self, gamma):
        cert = optimal_witness(gamma, gap_tol=self.gap_tol, feas_tol=self.feas_tol,
                               max_iter=self.max_iter)
        self.statuses.append(cert.status.value)
        return cert

    def pmap(self, fn, items):
        if self.workers <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(self.workers) as pool:
            return list(pool.map(fn, items))

    @property
    def converged(self) -> bool:
        return all(s == SdpStatus.OPTIMAL.value for s in self.statuses)


def cmd_thermal_scan(ctx: _Context) -> Dict:
    sc = ctx.scenario
    a = ctx.args
    scan = sc.scan
    t_min = a.t_min if a.t_min is not None else (scan.T_min_nK if scan else None)
    t_max = a.t_max if a.t_max is not None else (scan.T_max_nK if scan else None)
    n_pts = a.n_points if a.n_points is not None else (scan.n_points if scan else 21)
    if t_min is None or t_max is None or not 0 < t_min <= t_max:
        raise ScenarioError("need 0 < T_min <= T_max (scan section or --t-min/--t-max)")
    temps_nK = np.array([t_min]) if n_pts == 1 else np.linspace(t_min, t_max, n_pts)
    params = ctx.params
    h = build_hamiltonian(params)
    basis = normal_modes(h)
    cut = Bipartition.zigzag(params.n_pixels) if params.n_pixels > 1 else None
    u = ctx.units

    def analytic(t_nK: float) -> float:
        return witness_thermal_analytic(basis, u.temperature_from_nK(t_nK)).value

    w_low = analytic(temps_nK[0])
    bracket = None
    lo = temps_nK[0] if w_low > 0 else None
    if lo is not None:
        hi = max(temps_nK[-1], lo)
        while analytic(hi) > 0 and hi < 1e9:
            hi *= 2.0
        bracket = bisect_root(analytic, lo, hi)

    def row(t_nK: float):
        t = u.temperature_from_nK(t_nK)
        gamma = thermal_covariance(h, basis, t)
        w_an = witness_thermal_analytic(basis, t).value
        w_sdp = x_e = None
        if ctx.use_sdp:
            cert = ctx.sdp_witness(gamma)
            w_sdp, x_e = cert.witness_value, cert.x_e
        en = log_negativity(gamma, cut, check=False) if cut else 0.0
        nu_min = float(symplectic_eigenvalues(gamma).values[0])
        return [t_nK, w_an, w_sdp, x_e, en, nu_min,
                bracket[0] if bracket else None, bracket[1] if bracket else None]

    rows = ctx.pmap(row, list(temps_nK))
    header = ["T_nK", "W_analytic", "W_sdp", "x_e", "E_N_zigzag", "min_symplectic",
              "T_star_low_nK", "T_star_high_nK"]
    write_csv(ctx.out_dir / "thermal_scan.csv", header, rows)
    return {"T_star_bracket_nK": bracket, "eta": params.eta, "n_rows": len(rows)}


def cmd_compress(ctx: _Context) -> Dict:
    sc = ctx.scenario
    params = ctx.params
    proto = sc.compression_protocol()
    t0 = sc.temperature()
    basis0 = normal_modes(build_hamiltonian(params))
    gamma0 = thermal_covariance(build_hamiltonian(params), basis0, t0)
    every = sc.protocol.snapshot_every or sc.run.snapshot_every or max(proto.n_steps // 50, 1)
    snaps = run_compression(gamma0, params, proto, basis=basis0, snapshot_every=every)
    cut = Bipartition.zigzag(params.n_pixels) if params.n_pixels > 1 else None
    u = ctx.units

    def row(snap):
        lam = snap.lambda_now
        h = hamiltonian_at(params, lam)
        w_ad = witness_adiabatic_analytic(basis0, instantaneous_basis(params, basis0, lam),
                                          t0).value
        w_sdp = x_e = None
        if ctx.use_sdp:
            cert = ctx.sdp_witness(snap.gamma)
            w_sdp, x_e = cert.witness_value, cert.x_e
        en = log_negativity(snap.gamma, cut, check=False) if cut else 0.0
        nu_min = float(symplectic_eigenvalues(snap.gamma).values[0])
        return [u.time_to_s(snap.time), lam, w_sdp, x_e, en, mean_energy(snap.gamma, h),
                w_ad, nu_min]

    rows = ctx.pmap(row, snaps)
    header = ["t_s", "lambda", "W_sdp", "x_e", "E_N_zigzag", "energy", "W_adiabatic",
              "min_symplectic"]
    write_csv(ctx.out_dir / "compress.csv", header, rows)
    return {"n_rows": len(rows), "epsilon": proto.epsilon, "dt_internal": proto.dt}


def cmd_otto(ctx: _Context) -> Dict:
    sc = ctx.scenario
    spec = sc.otto_spec()
    u = ctx.units
    t_init = u.temperature_from_nK(sc.cycle.T_cold_nK)
    every = sc.run.snapshot_every or max(spec.compression.n_steps // 20, 1)
    witness_fn = (lambda g: ctx.sdp_witness(g).witness_value) if ctx.use_sdp else None
    res = run_otto_cycle(ctx.params, spec, t_init, snapshot_every=every,
                         witness_fn=witness_fn, trace_every=sc.run.trace_every)
    rows = [[r.stroke, u.time_to_s(r.time), r.lambda_now, r.witness, r.log_negativity,
             r.energy, r.min_symplectic] for r in res.trace]
    header = ["stroke", "t_s", "lambda", "W_sdp", "E_N_zigzag", "energy", "min_symplectic"]
    write_csv(ctx.out_dir / "otto.csv", header, rows)
    ledger = res.ledger.as_dict()
    (ctx.out_dir / "otto_ledger.json").write_text(json.dumps(ledger, indent=2, sort_keys=True)
                                                  + "\n")
    return {"ledger": ledger, "energy_unit_J": u.energy_J}


def cmd_bipartitions(ctx: _Context) -> Dict:
    sc = ctx.scenario
    params = ctx.params
    h = build_hamiltonian(params)
    basis = normal_modes(h)
    gamma = thermal_covariance(h, basis, sc.temperature())
    quant = ctx.args.quantifier
    opts = {}
    if quant == "sdp":
        opts = dict(gap_tol=ctx.gap_tol, feas_tol=ctx.feas_tol, max_iter=ctx.max_iter)
    scan = bipartition_scan(gamma, quant, **opts)
    order = sorted(range(len(scan)), key=lambda i: (-scan[i][1], scan[i][0].part_a))
    rank = {i: r + 1 for r, i in enumerate(order)}
    rows = [[cut.label, val, rank[i]] for i, (cut, val) in enumerate(scan)]
    write_csv(ctx.out_dir / f"bipartitions_{quant}.csv", ["cut", "value", "rank"], rows)
    best = scan[order[0]]
    return {"best_cut": best[0].label, "best_value": best[1],
            "zigzag_cut": Bipartition.zigzag(params.n_pixels).canonical().label}


COMMANDS = {
    "thermal-scan": cmd_thermal_scan,
    "compress": cmd_compress,
    "otto": cmd_otto,
    "bipartitions": cmd_bipartitions,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario file (.json or .toml)")
    common.add_argument("--out", help="output directory (default: run.output_dir or .)")
    common.add_argument("--bc", choices=["neumann", "dirichlet"], help="override boundary")
    common.add_argument("--mu-rel", type=float, help="zero-mode shift relative to rho/(m Delta^2)")
    common.add_argument("--tol", type=float, help="SDP gap and feasibility tolerance")
    common.add_argument("--threads", type=int, help="worker threads (env BOGOLIB_THREADS)")
    common.add_argument("--no-sdp", action="store_true", help="skip SDP witnesses")

    parser = argparse.ArgumentParser(prog="bogolib", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    scan = sub.add_parser("thermal-scan", parents=[common], help="witnesses versus temperature")
    scan.add_argument("--t-min", type=float, help="lowest temperature in nK")
    scan.add_argument("--t-max", type=float, help="highest temperature in nK")
    scan.add_argument("--n-points", type=int)
    sub.add_parser("compress", parents=[common], help="Trotterized compression run")
    sub.add_parser("otto", parents=[common], help="four-stroke Otto cycle")
    bip = sub.add_parser("bipartitions", parents=[common], help="rank all bipartitions")
    bip.add_argument("--quantifier", choices=["logneg", "sdp"], default="logneg")
    sub.add_parser("validate-scenario", parents=[common], help="validate and echo a scenario")
    return parser


def _resolve_threads(arg: Optional[int]) -> int:
    if arg is not None:
        return max(arg, 1)
    env = os.environ.get("BOGOLIB_THREADS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError:
            raise ScenarioError(f"BOGOLIB_THREADS={env!r} is not an integer")
    return 1


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    started = datetime.now(timezone.utc).isoformat()
    try:
        args.threads = _resolve_threads(args.threads)
        scenario = load_scenario(args.scenario).override(boundary=args.bc,
                                                         mu_relative=args.mu_rel)
        scenario.physical_params()
    except BogolibError as exc:
        return _fail(EXIT_BAD_INPUT, type(exc).__name__, str(exc))
    if args.command == "validate-scenario":
        print(json.dumps(scenario.model_dump(mode="json"), indent=2, sort_keys=True))
        return EXIT_OK

    try:
        ctx = _Context(args, scenario)
        # worker threads share the process; keep BLAS single-threaded per worker
        with threadpool_limits(limits=1 if args.threads > 1 else None):
            extra = COMMANDS[args.command](ctx)
    except BogolibError as exc:
        return _fail(EXIT_BAD_INPUT, type(exc).__name__, str(exc))
    extra["sdp_statuses"] = sorted(set(ctx.statuses))
    write_sidecar(ctx.out_dir / f"{args.command}.json", scenario, args.command, started, extra)
    if not ctx.converged:
        bad = [s for s in ctx.statuses if s != SdpStatus.OPTIMAL.value]
        return _fail(EXIT_NOT_CONVERGED, "NotConverged",
                     f"{len(bad)} SDP solve(s) did not reach optimality")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
