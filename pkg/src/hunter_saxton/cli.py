"""Command-line front end.

    hunter-saxton solve   SCENARIO [--t-end T] [--dt DT] [--out DIR]
    hunter-saxton compare SCENARIO [--kappa-sweep lo:hi:n] [--out DIR]
    hunter-saxton check   SCENARIO [--kappa-sweep lo:hi:n] [--out DIR]
    hunter-saxton sweep   SCENARIO --kappa-sweep lo:hi:n [--out DIR]

SCENARIO is a JSON file or the name of a bundled scenario (``cusp``,
``two_cell``, ``empty``).  Exit codes: 0 all checks pass, 1 some check
failed, 2 bad input.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Optional

import numpy as np

from .characteristics_engine import (
    exponential_identity_check,
    integrate_characteristics,
    pair_diagnostics,
    pair_horizon,
    riccati_check,
    separation_lower_bound_check,
    write_pair_csv,
    write_trace_csv,
)
from .continuation_engine import (
    BumpGrid,
    ContinuationPolicy,
    FaultInjectedProvider,
    PolicyError,
    weak_residual,
)
from .dissipative_solver import format_float, write_energy_csv
from .energy_ledger import (
    ENERGY_TOL,
    compare,
    dissipative_characterization_check,
    event_grid,
    window_energy_check,
)
from .flow_measure import (
    StepFunction,
    build_flow_map,
    derivative_bound_check,
    positive_energy,
    stieltjes_change_of_variables_check,
)
from .profile import InitialProfile, ProfileError

log = logging.getLogger("hunter_saxton")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

ALL_CHECKS = (
    "energy_order",
    "window_energy",
    "riccati",
    "exponential",
    "separation",
    "derivative_bound",
    "change_of_variables",
    "positive_energy",
    "characterization",
    "weak_residual",
)

TOLERANCES = {
    "energy_order": ENERGY_TOL,
    "window_energy": ENERGY_TOL,
    "riccati": 1e-8,
    "exponential": 1e-5,
    "derivative_bound": 1e-12,
    "change_of_variables": 1e-12,
    "positive_energy": ENERGY_TOL,
    "characterization": 1e-12,
    "weak_residual": 1e-6,
}


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    name: str
    profile: InitialProfile
    policies: dict[str, ContinuationPolicy]
    t_end: float
    dt: float
    n_t: int = 41
    checks: tuple[str, ...] = ALL_CHECKS
    pairs: list[tuple[float, float]] = field(default_factory=list)
    windows: list[tuple[float, float]] = field(default_factory=list)
    labels: list[float] = field(default_factory=list)
    weak_window: Optional[tuple[float, float, float, float]] = None
    fault_injection: Optional[dict] = None

    def t_grid(self) -> list[float]:
        pts = set(float(t) for t in np.linspace(0.0, self.t_end, self.n_t))
        pts.update(event_grid(self.profile, self.t_end))
        return sorted(pts)


def _number(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ScenarioError(f"{where}: expected a finite number, got {v!r}")
    return float(v)


def _pairs(raw, where: str) -> list[tuple[float, float]]:
    if not isinstance(raw, list):
        raise ScenarioError(f"{where}: expected a list of [a, b] pairs")
    out = []
    for k, item in enumerate(raw):
        if not isinstance(item, list) or len(item) != 2:
            raise ScenarioError(f"{where}[{k}]: expected [a, b]")
        a, b = _number(item[0], f"{where}[{k}][0]"), _number(item[1], f"{where}[{k}][1]")
        if not a < b:
            raise ScenarioError(f"{where}[{k}]: need a < b")
        out.append((a, b))
    return out


def parse_scenario(data: Any, name: str = "scenario") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("top level: expected an object")
    try:
        profile = InitialProfile.from_dict(data.get("profile"))
    except ProfileError as exc:
        raise ScenarioError(f"profile.{exc}") from None
    policies = {"dissipative": ContinuationPolicy.dissipative()}
    raw = data.get("policies", [])
    if not isinstance(raw, list):
        raise ScenarioError("policies: expected a list")
    for k, item in enumerate(raw):
        if not isinstance(item, dict) or not isinstance(item.get("id"), str):
            raise ScenarioError(f"policies[{k}]: expected an object with a string id")
        try:
            pol = ContinuationPolicy.from_dict(item, item["id"])
            pol.validate(profile)
        except PolicyError as exc:
            raise ScenarioError(f"policies[{k}].{exc}") from None
        if item["id"] in policies and not (item["id"] == "dissipative" and pol.is_dissipative):
            raise ScenarioError(f"policies[{k}]: duplicate id {item['id']!r}")
        policies[item["id"]] = pol
    t_end = _number(data.get("t_end", 2.0), "t_end")
    dt = _number(data.get("dt", 1e-3), "dt")
    if t_end <= 0 or dt <= 0:
        raise ScenarioError("t_end and dt must be positive")
    n_t = data.get("n_t", 41)
    if isinstance(n_t, bool) or not isinstance(n_t, int) or n_t < 2:
        raise ScenarioError("n_t: expected an integer >= 2")
    checks = data.get("checks", list(ALL_CHECKS))
    if not isinstance(checks, list) or any(c not in ALL_CHECKS for c in checks):
        raise ScenarioError(f"checks: expected a subset of {list(ALL_CHECKS)}")
    labels = data.get("labels", [])
    if not isinstance(labels, list):
        raise ScenarioError("labels: expected a list")
    weak = data.get("weak_window")
    if weak is not None:
        if not isinstance(weak, list) or len(weak) != 4:
            raise ScenarioError("weak_window: expected [x0, x1, t0, t1]")
        weak = tuple(_number(v, f"weak_window[{i}]") for i, v in enumerate(weak))
    fault = data.get("fault_injection")
    if fault is not None:
        if not isinstance(fault, dict) or fault.get("policy", "dissipative") not in policies:
            raise ScenarioError("fault_injection: expected {policy, cell, factor} naming a known policy")
        cell = fault.get("cell", 0)
        if isinstance(cell, bool) or not isinstance(cell, int) or cell < 0:
            raise ScenarioError("fault_injection.cell: expected a nonnegative integer")
        fault = {"policy": fault.get("policy", "dissipative"), "cell": cell,
                 "factor": _number(fault.get("factor", 1.1), "fault_injection.factor")}
    return Scenario(
        name=str(data.get("name", name)),
        profile=profile,
        policies=policies,
        t_end=t_end,
        dt=dt,
        n_t=n_t,
        checks=tuple(checks),
        pairs=_pairs(data.get("pairs", []), "pairs"),
        windows=_pairs(data.get("windows", []), "windows"),
        labels=[_number(v, f"labels[{i}]") for i, v in enumerate(labels)],
        weak_window=weak,
        fault_injection=fault,
    )


def load_scenario(path: str) -> Scenario:
    if not os.path.exists(path) and not path.endswith(".json"):
        bundled = resources.files("hunter_saxton") / "scenarios" / f"{path}.json"
        if bundled.is_file():
            text, name = bundled.read_text(), path
        else:
            raise ScenarioError(f"{path}: no such file or bundled scenario")
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ScenarioError(f"{path}: {exc.strerror}") from None
        name = os.path.splitext(os.path.basename(path))[0]
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_scenario(data, name)


def parse_sweep(spec: str) -> list[float]:
    try:
        lo, hi, n = spec.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise ScenarioError(f"--kappa-sweep: expected lo:hi:n, got {spec!r}") from None
    if n < 1 or not (math.isfinite(lo) and math.isfinite(hi)) or lo < 0 or hi < lo:
        raise ScenarioError("--kappa-sweep: need 0 <= lo <= hi and n >= 1")
    return [float(k) for k in np.linspace(lo, hi, n)] if n > 1 else [lo]


def add_sweep(scn: Scenario, kappas: list[float]) -> list[str]:
    ids = []
    for k in kappas:
        pid = f"sweep_kappa={format_float(k)}"
        pol = ContinuationPolicy.uniform(scn.profile, k, pid)
        scn.policies[pid] = pol
        ids.append(pid)
    return ids


# -- checks -----------------------------------------------------------------


@dataclass
class Row:
    check: str
    policy: str
    target: str
    value: float
    passed: bool
    note: str = ""


def run_checks(scn: Scenario, out_dir: Optional[str] = None) -> list[Row]:
    rows: list[Row] = []
    grid = scn.t_grid()
    sols = {pid: pol.solution(scn.profile) for pid, pol in sorted(scn.policies.items())}
    want = set(scn.checks)

    if "energy_order" in want:
        rep = compare(scn.profile, scn.policies, grid)
        for pid, v in sorted(rep.verdicts.items()):
            gap = min(s - b for s, b in zip(rep.series[pid], rep.bound))
            rows.append(Row("energy_order", pid, "all t", gap, v["pass"],
                            f"first_exceed_t={v['first_exceed_t']}"))

    windows = scn.windows or [(scn.profile.breakpoints[0] - 1.0, scn.profile.breakpoints[-1] + 1.0)]
    for pid, sol in sols.items():
        for a, b in windows:
            if "window_energy" in want:
                m = window_energy_check(sol, a, b, grid)
                rows.append(Row("window_energy", pid, f"({a:g},{b:g})", m, m >= -ENERGY_TOL))
            if "positive_energy" in want:
                e = np.array([positive_energy(sol, a, b, t) for t in grid])
                drop = float(np.min(np.diff(e))) if e.size > 1 else 0.0
                rows.append(Row("positive_energy", pid, f"({a:g},{b:g})", drop, drop >= -ENERGY_TOL))
        if "derivative_bound" in want or "change_of_variables" in want:
            dmin, cmax = math.inf, 0.0
            bp = scn.profile.breakpoints
            fs = [StepFunction.indicator(bp[i], bp[i + 1]) for i in range(scn.profile.n_cells)]
            fs.append(StepFunction.constant(1.0, bp[0], bp[-1]))
            for t in grid:
                fmap = build_flow_map(sol, t)
                dmin = min(dmin, derivative_bound_check(fmap, scn.profile, t))
                for f in fs:
                    cmax = max(cmax, stieltjes_change_of_variables_check(f, fmap, bp[0] - 0.5, bp[-1] + 0.5)[2])
            if "derivative_bound" in want:
                rows.append(Row("derivative_bound", pid, "all t", dmin, dmin >= -TOLERANCES["derivative_bound"]))
            if "change_of_variables" in want:
                rows.append(Row("change_of_variables", pid, "all t", cmax, cmax <= TOLERANCES["change_of_variables"]))
        if "characterization" in want and sol.is_dissipative:
            labels = sorted({*scn.labels, *(z for pr in scn.pairs for z in pr), *scn.profile.breakpoints})
            worst = max(dissipative_characterization_check(sol, z, t) for z in labels for t in grid)
            rows.append(Row("characterization", pid, "labels x t", worst, worst <= TOLERANCES["characterization"]))
        if {"riccati", "exponential"} & want:
            for a, b in scn.pairs:
                t_pair = pair_horizon(scn.profile, a, b, scn.t_end)
                tr = integrate_characteristics(sol, [a, b], t_pair, scn.dt)
                diag = pair_diagnostics(tr[0], tr[1])
                tag = f"({a:g},{b:g})"
                if "riccati" in want:
                    m = riccati_check(diag)
                    rows.append(Row("riccati", pid, tag, m, m >= -TOLERANCES["riccati"], f"t<={t_pair:g}"))
                if "exponential" in want:
                    e = exponential_identity_check(diag)
                    rows.append(Row("exponential", pid, tag, e, e <= TOLERANCES["exponential"], f"t<={t_pair:g}"))
                if out_dir:
                    with open(os.path.join(out_dir, f"pair_{pid}_{a:g}_{b:g}.csv"), "w", encoding="utf-8") as fh:
                        write_pair_csv(fh, diag)
        if "weak_residual" in want and scn.weak_window is not None:
            r = weak_residual(sol, BumpGrid.uniform(scn.weak_window))
            rows.append(Row("weak_residual", pid, "3x3 bumps", r, r <= TOLERANCES["weak_residual"]))

    if "separation" in want:
        for a, b in scn.pairs:
            res = separation_lower_bound_check(scn.profile, a, b, scn.t_end, solution=sols["dissipative"])
            rows.append(Row("separation", "dissipative", f"({a:g},{b:g})", res.margin, res.ok, res.status))

    if "weak_residual" in want and scn.fault_injection and scn.weak_window is not None:
        fi = scn.fault_injection
        prov = FaultInjectedProvider(sols[fi["policy"]], fi["cell"], fi["factor"])
        r = weak_residual(prov, BumpGrid.uniform(scn.weak_window))
        rows.append(Row("weak_residual", f"{fi['policy']}+fault", f"cell {fi['cell']} x{fi['factor']:g}", r,
                        r <= TOLERANCES["weak_residual"], "fault injected"))
    return rows


def _row_dict(r: Row) -> dict:
    v = r.value if math.isfinite(r.value) else None
    return {"check": r.check, "policy": r.policy, "target": r.target, "value": v, "pass": r.passed, "note": r.note}


def write_rows(out_dir: str, rows: list[Row]) -> None:
    with open(os.path.join(out_dir, "checks.json"), "w", encoding="utf-8") as fh:
        json.dump([_row_dict(r) for r in rows], fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(os.path.join(out_dir, "checks.csv"), "w", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["check", "policy", "target", "value", "pass", "note"])
        for r in rows:
            w.writerow([r.check, r.policy, r.target, format_float(r.value), "pass" if r.passed else "FAIL", r.note])


def print_rows(rows: list[Row], stream=None) -> None:
    stream = stream or sys.stdout
    for r in rows:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.check:<20} {r.policy:<28} {r.target:<20} "
              f"{format(r.value, '.3e')}  {r.note}", file=stream)


# -- verbs --------------------------------------------------------------------


def _policy_file(pid: str) -> str:
    return "".join(c if c.isalnum() or c in "-_.=" else "_" for c in pid)


def cmd_solve(scn: Scenario, out: str) -> int:
    grid = scn.t_grid()
    for pid, pol in sorted(scn.policies.items()):
        sol = pol.solution(scn.profile)
        with open(os.path.join(out, f"energy_{_policy_file(pid)}.csv"), "w", encoding="utf-8") as fh:
            write_energy_csv(fh, sol, grid)
        with open(os.path.join(out, f"map_{_policy_file(pid)}.csv"), "w", encoding="utf-8") as fh:
            build_flow_map(sol, scn.t_end).write_csv(fh)
        if scn.labels:
            for tr in integrate_characteristics(sol, scn.labels, scn.t_end, scn.dt):
                name = f"trace_{_policy_file(pid)}_{format_float(tr.zeta)}.csv"
                with open(os.path.join(out, name), "w", encoding="utf-8") as fh:
                    write_trace_csv(fh, tr)
    print(f"{scn.name}: wrote solution files for {len(scn.policies)} policies to {out}")
    return EXIT_OK


def cmd_compare(scn: Scenario, out: str) -> int:
    rep = compare(scn.profile, scn.policies, scn.t_grid())
    with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as fh:
        rep.write_json(fh)
    with open(os.path.join(out, "report.csv"), "w", encoding="utf-8") as fh:
        rep.write_csv(fh)
    for pid, v in sorted(rep.verdicts.items()):
        print(f"{'PASS' if v['pass'] else 'FAIL'}  {pid}: first_exceed_t={v['first_exceed_t']}")
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_check(scn: Scenario, out: str) -> int:
    rows = run_checks(scn, out)
    write_rows(out, rows)
    print_rows(rows)
    return EXIT_OK if all(r.passed for r in rows) else EXIT_FAIL


def cmd_sweep(scn: Scenario, out: str, kappas: list[float]) -> int:
    ids = add_sweep(scn, kappas)
    code = cmd_compare(scn, out)
    grid = scn.t_grid()
    bp = scn.profile.breakpoints
    windows = scn.windows or [(bp[0] - 1.0, bp[-1] + 1.0)]
    rows = []
    for pid in ids:
        sol = scn.policies[pid].solution(scn.profile)
        for a, b in windows:
            m = window_energy_check(sol, a, b, grid)
            rows.append(Row("window_energy", pid, f"({a:g},{b:g})", m, m >= -ENERGY_TOL))
    write_rows(out, rows)
    print_rows(rows)
    return code if all(r.passed for r in rows) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hunter-saxton", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in ("solve", "compare", "check", "sweep"):
        p = sub.add_parser(verb)
        p.add_argument("scenario", help="scenario JSON file or bundled name")
        p.add_argument("--t-end", type=float, default=None)
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--kappa-sweep", default=None, metavar="lo:hi:n")
        p.add_argument("--out", default=".", metavar="DIR")
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scn = load_scenario(args.scenario)
        if args.t_end is not None:
            if not args.t_end > 0:
                raise ScenarioError("--t-end must be positive")
            scn.t_end = args.t_end
        if args.dt is not None:
            if not args.dt > 0:
                raise ScenarioError("--dt must be positive")
            scn.dt = args.dt
        kappas = parse_sweep(args.kappa_sweep) if args.kappa_sweep else None
        if args.verb == "sweep" and kappas is None:
            raise ScenarioError("sweep needs --kappa-sweep lo:hi:n")
        if kappas is not None and args.verb in ("compare", "check"):
            add_sweep(scn, kappas)
        os.makedirs(args.out, exist_ok=True)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    log.debug("scenario %s with %d policies", scn.name, len(scn.policies))
    if args.verb == "solve":
        return cmd_solve(scn, args.out)
    if args.verb == "compare":
        return cmd_compare(scn, args.out)
    if args.verb == "check":
        return cmd_check(scn, args.out)
    return cmd_sweep(scn, args.out, kappas)


if __name__ == "__main__":
    sys.exit(main())
