"""Energy accounting across continuations.

Every continuation built here keeps at least the energy of the labels that
have not blown up, and the dissipative solution keeps exactly that.  The
functions below turn those statements into margins on a time grid.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .continuation_engine import ContinuationPolicy
from .dissipative_solver import EventQueue, Solution, format_float
from .profile import InitialProfile, cell_meta, survivor_mass

__all__ = [
    "ENERGY_TOL",
    "EnergyReport",
    "event_grid",
    "compare",
    "window_margins",
    "window_energy_check",
    "dissipative_characterization_check",
    "recover_dissipative",
]

ENERGY_TOL = 1e-10


def event_grid(profile: InitialProfile, t_end: float | None = None, extra: Iterable[float] = ()) -> list[float]:
    """0, every blow-up time, the midpoints between them and one point past the last."""
    times = list(EventQueue.from_profile(profile).times)
    pts = {0.0, *times, *(float(t) for t in extra)}
    knots = [0.0] + times
    pts.update(0.5 * (a + b) for a, b in zip(knots, knots[1:]))
    last = knots[-1]
    pts.add(last + max(1.0, 0.5 * last) if t_end is None else float(t_end))
    if t_end is not None:
        pts = {t for t in pts if t <= t_end}
    return sorted(pts)


@dataclass
class EnergyReport:
    """Energy series of several policies against the dissipative bound."""

    t: list[float]
    bound: list[float]
    series: dict[str, list[float]]
    verdicts: dict[str, dict] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(v.get("pass", False) for v in self.verdicts.values())

    def to_dict(self) -> dict:
        return {"t": self.t, "bound": self.bound, "series": self.series, "verdicts": self.verdicts}

    def write_json(self, fh: IO[str]) -> None:
        json.dump(self.to_dict(), fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")

    def write_csv(self, fh: IO[str]) -> None:
        ids = sorted(self.series)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "bound", *ids])
        for k, t in enumerate(self.t):
            w.writerow([format_float(t), format_float(self.bound[k]),
                        *(format_float(self.series[i][k]) for i in ids)])


def _named(policies) -> list[tuple[str, ContinuationPolicy]]:
    if isinstance(policies, Mapping):
        return sorted(policies.items())
    return sorted(((p.name or repr(p.resurrect)), p) for p in policies)


def compare(profile: InitialProfile, policies, t_grid: Sequence[float], tol: float = ENERGY_TOL) -> EnergyReport:
    """Energy of each policy against the survivor mass on ``t_grid``.

    Verdicts per policy: ``never_below`` (no sample under the bound by more
    than ``tol``), ``first_exceed_t`` (first sample strictly above it) and,
    for policies with some ``kappa * e > tol``, ``exceeds_after_first_event``:
    the first grid point after its first such event is above the bound.
    """
    named = _named(policies)
    if not any(p.is_dissipative for _, p in named):
        raise ValueError("policies must include the dissipative one (kappa = 0 everywhere)")
    t = [float(x) for x in t_grid]
    bound = [survivor_mass(profile, x) for x in t]
    meta = cell_meta(profile)
    report = EnergyReport(t, bound, {})
    for name, pol in named:
        sol = pol.solution(profile)
        vals = [sol.energy(x) for x in t]
        report.series[name] = vals
        diff = [v - b for v, b in zip(vals, bound)]
        first = next((x for x, d in zip(t, diff) if d > tol), None)
        never_below = all(d >= -tol for d in diff)
        verdict = {"never_below": never_below, "first_exceed_t": first, "dissipative": pol.is_dissipative}
        ok = never_below
        # an event whose re-injected energy is below tol cannot be told apart
        detectable = [i for i, k in sol.kappa.items() if k * meta[i].energy > tol]
        if detectable:
            t_event = min(meta[i].blowup_time for i in detectable)
            after = [d for x, d in zip(t, diff) if x > t_event]
            verdict["first_event_t"] = t_event
            verdict["exceeds_after_first_event"] = bool(after) and after[0] > tol
            ok = ok and (verdict["exceeds_after_first_event"] or not after)
        else:
            verdict["max_abs_gap"] = max(abs(d) for d in diff) if diff else 0.0
            ok = ok and verdict["max_abs_gap"] <= tol
        verdict["pass"] = ok
        report.verdicts[name] = verdict
    return report


def _survivor_between(profile: InitialProfile, xi: float, zeta: float, t: float) -> float:
    # int over I_t intersected with (xi, zeta) of w0^2
    bp = profile.breakpoints
    terms = []
    for m in cell_meta(profile):
        if not m.alive_at(t):
            continue
        lo, hi = max(xi, bp[m.index]), min(zeta, bp[m.index + 1])
        if hi > lo:
            terms.append(m.slope * m.slope * (hi - lo))
    return math.fsum(terms)


def window_margins(solution: Solution, xi: float, zeta: float, t_grid: Sequence[float],
                   sides: tuple[str, str] = ("rightmost", "rightmost")) -> np.ndarray:
    """``int_{x_xi}^{x_zeta} w^2 - int_{I_t cap (xi, zeta)} w0^2`` on the grid."""
    if not xi <= zeta:
        raise ValueError("need xi <= zeta")
    out = np.empty(len(t_grid))
    for k, t in enumerate(t_grid):
        e = solution.energy_between(xi, zeta, t, sides)
        out[k] = e - _survivor_between(solution.profile, xi, zeta, t)
    return out


def window_energy_check(solution: Solution, xi: float, zeta: float, t_grid: Sequence[float],
                        sides: tuple[str, str] = ("rightmost", "rightmost")) -> float:
    """Smallest window margin; passes when ``>= -1e-10``."""
    m = window_margins(solution, xi, zeta, t_grid, sides)
    return float(m.min()) if m.size else 0.0


def dissipative_characterization_check(solution: Solution, xi: float, t: float) -> float:
    """``|u(x_xi(t), t) - u0(xi) - 1/2 sum_i m_i(xi) min(t, T_i)|``.

    ``m_i(xi)`` is the part of cell ``i``'s energy left of ``xi``; the time
    integral of the survivor mass left of ``xi`` is this sum in closed form.
    """
    if not solution.is_dissipative:
        raise ValueError("the identity characterizes the dissipative solution; kappa must vanish")
    p = solution.profile
    terms = []
    for m in cell_meta(p):
        lo, hi = p.breakpoints[m.index], min(xi, p.breakpoints[m.index + 1])
        if hi > lo:
            terms.append(m.slope * m.slope * (hi - lo) * min(t, m.blowup_time))
    rhs = p.u0(xi) + 0.5 * math.fsum(terms)
    lhs = solution.characteristic(xi, t).u
    return abs(lhs - rhs)


def recover_dissipative(profile: InitialProfile, policy: ContinuationPolicy, t_grid: Sequence[float] | None = None,
                        tol: float = ENERGY_TOL) -> bool:
    """True when the policy's energy matches the dissipative one on an event grid.

    Matching energies force every triggered ``kappa`` to vanish, so a
    ``True`` here must coincide with ``policy.is_dissipative``.
    """
    grid = event_grid(profile) if t_grid is None else list(t_grid)
    sol = policy.solution(profile)
    return all(abs(sol.energy(t) - survivor_mass(profile, t)) <= tol for t in grid)
