"""Exact, event-driven construction of piecewise-linear solutions.

Every cell of the initial profile keeps a closed form until it blows up::

    width(t) = dz * (1 + t w0 / 2)^2
    slope(t) = w0 / (1 + t w0 / 2)

so ``slope^2 * width`` stays equal to the cell energy ``w0^2 dz``.  A cell
with ``w0 < 0`` collapses at ``T = -2 / w0`` and keeps a zero-width marker at
its collision point.  Boundaries move with ``du/dt = 1/2 * (energy to the
left)``; summing the per-cell increments of ``u`` and of the width gives the
frame at any time without time stepping.

:class:`Solution` also carries the optional resurrected fans used by
:mod:`hunter_saxton.continuation_engine`.  With no fans it is the dissipative
solution.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Optional, Sequence

import numpy as np

from .profile import (
    ORIGINAL,
    RESURRECTED,
    CellMeta,
    Frame,
    InitialProfile,
    cell_meta,
    survivor_mass,
)

__all__ = [
    "SIDES",
    "CellState",
    "EventQueue",
    "CharacteristicPoint",
    "LabelSchedule",
    "Solution",
    "solve_at",
    "characteristic_state",
    "energy_series",
    "write_energy_csv",
    "format_float",
]

SIDES = ("leftmost", "rightmost", "generic")


def format_float(v: float) -> str:
    return format(float(v), ".17g")


@dataclass(frozen=True)
class CellState:
    meta: CellMeta
    alive: bool
    width: float
    slope: float

    @property
    def status(self) -> str:
        return "alive" if self.alive else f"collapsed({self.meta.blowup_time!r})"

    @property
    def energy(self) -> float:
        return self.slope * self.slope * self.width if self.alive else 0.0


@dataclass(frozen=True)
class EventQueue:
    """Distinct blow-up times in increasing order with the cells collapsing at each."""

    times: tuple[float, ...]
    cells: tuple[tuple[int, ...], ...]

    @classmethod
    def from_profile(cls, profile: InitialProfile) -> "EventQueue":
        by_time: dict[float, list[int]] = {}
        for m in cell_meta(profile):
            if math.isfinite(m.blowup_time):
                by_time.setdefault(m.blowup_time, []).append(m.index)
        times = tuple(sorted(by_time))
        return cls(times, tuple(tuple(by_time[t]) for t in times))

    def __len__(self):
        return len(self.times)

    def cells_at(self, t: float) -> tuple[int, ...]:
        k = self.times.index(t) if t in self.times else None
        return () if k is None else self.cells[k]


@dataclass(frozen=True)
class CharacteristicPoint:
    x: float
    u: float
    w: Optional[float]
    cell: int
    frac: float
    offset: float = 0.0


@dataclass(frozen=True)
class LabelSchedule:
    """Lagrangian location of one label, piecewise constant between events.

    On ``[times[k], times[k+1])`` the label sits ``fracs[k]`` of the way into
    frame cell ``cells[k]`` (a boundary when the fraction is 0).
    """

    zeta: float
    side: str
    times: tuple[float, ...]
    cells: tuple[int, ...]
    fracs: tuple[float, ...]
    offset: float
    branch_time: float

    def at(self, t: float) -> tuple[int, float]:
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        k = max(k, 0)
        return self.cells[k], self.fracs[k]


class Solution:
    """Piecewise-linear weak solution built from closed forms.

    Parameters
    ----------
    profile : InitialProfile
        Initial data.
    resurrect : mapping of int to float, optional
        Cell index -> fraction ``kappa`` of that cell's energy re-injected as
        a self-similar fan when it blows up.  Entries with ``kappa == 0`` are
        ignored, so an empty mapping gives the dissipative solution.
    """

    t_max = math.inf

    def __init__(self, profile: InitialProfile, resurrect: Optional[Mapping[int, float]] = None):
        self.profile = profile
        self.meta = cell_meta(profile)
        kappa = {}
        for i, k in (resurrect or {}).items():
            i, k = int(i), float(k)
            if not math.isfinite(k) or k < 0:
                raise ValueError(f"kappa for cell {i} must be finite and nonnegative, got {k!r}")
            if k == 0:
                continue
            if not 0 <= i < profile.n_cells:
                raise ValueError(f"resurrected cell {i} is not a cell of the profile")
            if not math.isfinite(self.meta[i].blowup_time):
                raise ValueError(f"cell {i} never blows up (w0 >= 0); nothing to continue")
            kappa[i] = k
        self.kappa = kappa

        kinds, sources, orig_slot, group_start = [], [], [], []
        for i in range(profile.n_cells):
            group_start.append(len(kinds))
            if i in kappa:
                kinds.append(RESURRECTED)
                sources.append(i)
            orig_slot.append(len(kinds))
            kinds.append(ORIGINAL)
            sources.append(i)
        self.kinds = tuple(kinds)
        self.sources = tuple(sources)
        self.orig_slot = tuple(orig_slot)
        self.group_start = tuple(group_start)

        src = np.asarray(sources, dtype=int)
        self._is_orig = np.array([k == ORIGINAL for k in kinds])
        self._w0 = np.asarray(profile.slopes)[src]
        self._dz = profile.widths[src]
        self._T = np.array([self.meta[i].blowup_time for i in sources])
        self._res_energy = np.array(
            [0.0 if k == ORIGINAL else kappa[i] * self.meta[i].energy for k, i in zip(kinds, sources)]
        )
        self.events = EventQueue.from_profile(profile)
        self._event_widths = [self._slot_arrays(tau)[0] for tau in self.events.times]
        self._schedules: dict = {}

    # -- frames -----------------------------------------------------------

    @property
    def event_times(self) -> tuple[float, ...]:
        return self.events.times

    @property
    def is_dissipative(self) -> bool:
        return not self.kappa

    @property
    def n_slots(self) -> int:
        return len(self.kinds)

    def _slot_arrays(self, t: float):
        w0, dz, T = self._w0, self._dz, self._T
        # widths may legitimately pass float range at astronomically late events
        with np.errstate(over="ignore"):
            a = 1.0 + t * w0 / 2.0
            alive = self._is_orig & (t < T) & (a > 0.0)
            born = ~self._is_orig & (t > T)
            tau = np.where(born, t - T, 1.0)
            a_safe = np.where(alive, a, 1.0)
            width = np.where(alive, dz * a_safe * a_safe, np.where(born, self._res_energy / 4.0 * tau * tau, 0.0))
            slope = np.where(alive, w0 / a_safe, np.where(born, 2.0 / tau, 0.0))
            du = np.where(alive, w0 * dz * a_safe, np.where(born, self._res_energy * tau / 2.0, 0.0))
        return width, slope, du

    def frame(self, t: float) -> Frame:
        if t < 0:
            raise ValueError(f"t must be nonnegative, got {t!r}")
        t = float(t)
        width, slope, du = self._slot_arrays(t)
        p = self.profile
        x0 = p.breakpoints[0] + p.anchor * t
        positions = x0 + np.concatenate(([0.0], np.cumsum(width)))
        values = p.anchor + np.concatenate(([0.0], np.cumsum(du)))
        return Frame(t, positions, values, slope, width, self.kinds, self.sources)

    def cell_states(self, t: float) -> list[CellState]:
        width, slope, _ = self._slot_arrays(t)
        out = []
        for i, m in enumerate(self.meta):
            c = self.orig_slot[i]
            out.append(CellState(m, m.alive_at(t), float(width[c]), float(slope[c])))
        return out

    def energy(self, t: float) -> float:
        return self.frame(t).total_energy

    # -- characteristics --------------------------------------------------

    def _expand(self, k: int, lo: int, hi: int) -> tuple[int, int]:
        widths = self._event_widths[k]
        while lo > 0 and widths[lo - 1] == 0.0:
            lo -= 1
        while hi < len(widths) and widths[hi] == 0.0:
            hi += 1
        return lo, hi

    def _fan_born(self, k: int, lo: int, hi: int) -> bool:
        tau = self.events.times[k]
        for c in range(lo, hi):
            if self.kinds[c] == RESURRECTED and self._T[c] == tau:
                return True
        return False

    def schedule(self, zeta: float, side: str = "rightmost", lam: float = 0.5) -> LabelSchedule:
        """Piecewise-constant Lagrangian location of the characteristic from ``zeta``.

        ``side`` picks the leftmost or rightmost edge at every branch point,
        or for ``"generic"`` the path at fraction ``lam`` across the first fan
        the label enters.
        """
        if side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}, got {side!r}")
        if side == "generic" and not 0.0 <= lam <= 1.0:
            raise ValueError(f"lam must lie in [0, 1], got {lam!r}")
        key = (float(zeta), side, float(lam) if side == "generic" else 0.0)
        if key not in self._schedules:
            self._schedules[key] = self._schedule(*key)
        return self._schedules[key]

    def _schedule(self, zeta: float, side: str, lam: float) -> LabelSchedule:
        p = self.profile
        K = self.n_slots
        lo_b, hi_b = p.support
        if zeta < lo_b:
            return LabelSchedule(zeta, side, (0.0,), (0,), (0.0,), zeta - lo_b, math.inf)
        if zeta > hi_b:
            return LabelSchedule(zeta, side, (0.0,), (K,), (0.0,), zeta - hi_b, math.inf)

        i = p.cell_index(zeta)
        times: list[float] = [0.0]
        if i < p.n_cells and zeta > p.breakpoints[i]:
            c = self.orig_slot[i]
            theta = (zeta - p.breakpoints[i]) / self.meta[i].width
            cells, fracs = [c], [theta]
            T = self.meta[i].blowup_time
            if not math.isfinite(T):
                return LabelSchedule(zeta, side, (0.0,), (c,), (theta,), 0.0, math.inf)
            lo, hi = c, c + 1
            first = self.events.times.index(T)
        else:
            b = self.group_start[i] if i < p.n_cells else K
            cells, fracs = [b], [0.0]
            lo = hi = b
            first = 0

        branch_time = math.inf
        frozen = None
        for k in range(first, len(self.events)):
            tau = self.events.times[k]
            if frozen is not None:
                break
            lo, hi = self._expand(k, lo, hi)
            if math.isinf(branch_time) and self._fan_born(k, lo, hi):
                branch_time = tau
                if side == "generic":
                    frozen = self._fan_fraction(lo, hi, lam)
            if frozen is not None:
                cell, frac = frozen
            elif side == "leftmost":
                cell, frac = lo, 0.0
            else:
                cell, frac = hi, 0.0
            if tau == times[-1]:
                cells[-1], fracs[-1] = cell, frac
            else:
                times.append(tau)
                cells.append(cell)
                fracs.append(frac)
        return LabelSchedule(zeta, side, tuple(times), tuple(cells), tuple(fracs), 0.0, branch_time)

    def _fan_fraction(self, lo: int, hi: int, lam: float) -> tuple[int, float]:
        # fans born together scale alike, so a fixed fraction of their total
        # width is a fixed slot and fraction for all later times
        weights = np.array([self._res_energy[c] if self.kinds[c] == RESURRECTED else 0.0 for c in range(lo, hi)])
        total = weights.sum()
        target = lam * total
        acc = 0.0
        for off, wgt in enumerate(weights):
            if wgt > 0 and (acc + wgt >= target):
                frac = (target - acc) / wgt
                if frac >= 1.0:
                    return lo + off + 1, 0.0
                return lo + off, frac
            acc += wgt
        return hi, 0.0

    def location(self, zeta: float, t: float, side: str = "rightmost", lam: float = 0.5):
        s = self.schedule(zeta, side, lam)
        cell, frac = s.at(t)
        return cell, frac, s.offset

    def characteristic(self, zeta: float, t: float, side: str = "rightmost", lam: float = 0.5,
                       frame: Optional[Frame] = None) -> CharacteristicPoint:
        """State ``(x, u, w)`` of the characteristic from label ``zeta`` at time ``t``."""
        frame = frame if frame is not None else self.frame(t)
        cell, frac, offset = self.location(zeta, t, side, lam)
        x, u, _ = frame.locate(cell, frac, offset)
        i = self.profile.cell_index(zeta)
        if i < 0 or i >= self.profile.n_cells:
            w = 0.0
        elif self.meta[i].alive_at(t):
            w = float(frame.slopes[self.orig_slot[i]])
        else:
            w = None
        return CharacteristicPoint(float(x), float(u), w, int(cell), float(frac), offset)

    def location_table(self, zetas: Sequence[float], side: str = "rightmost", lam: float = 0.5):
        """Locations of many labels on every inter-event interval.

        Returns ``(cells, fracs, offsets)`` with ``cells[k, j]`` the location of
        label ``j`` on ``[events[k-1], events[k])`` (row 0 starts at t=0).
        """
        times = (0.0,) + self.events.times
        cells = np.empty((len(times), len(zetas)), dtype=int)
        fracs = np.empty((len(times), len(zetas)))
        offsets = np.empty(len(zetas))
        for j, z in enumerate(zetas):
            s = self.schedule(z, side, lam)
            offsets[j] = s.offset
            for k, tk in enumerate(times):
                cells[k, j], fracs[k, j] = s.at(tk)
        return cells, fracs, offsets

    def label_slopes(self, zetas: Sequence[float], t: float, frame: Optional[Frame] = None) -> np.ndarray:
        """Slope carried by each label at ``t``; nan once its cell has collapsed."""
        frame = frame if frame is not None else self.frame(t)
        out = np.zeros(len(zetas))
        for j, z in enumerate(zetas):
            i = self.profile.cell_index(z)
            if 0 <= i < self.profile.n_cells:
                out[j] = frame.slopes[self.orig_slot[i]] if self.meta[i].alive_at(t) else math.nan
        return out

    def energy_between(self, a: float, b: float, t: float,
                       sides: tuple[str, str] = ("rightmost", "rightmost"),
                       positive_only: bool = False, frame: Optional[Frame] = None) -> float:
        """``int w^2`` between the characteristics from labels ``a`` and ``b``."""
        frame = frame if frame is not None else self.frame(t)
        ca, fa, _ = self.location(a, t, sides[0])
        cb, fb, _ = self.location(b, t, sides[1])
        return frame.energy_between(ca, fa, cb, fb, positive_only=positive_only)


def solve_at(profile: InitialProfile, t: float) -> Frame:
    """Frame of the dissipative solution at time ``t``."""
    return Solution(profile).frame(t)


def characteristic_state(profile: InitialProfile, zeta: float, t: float):
    """``(x, u, w)`` of the dissipative characteristic from ``zeta``; ``w`` is None once collapsed."""
    pt = Solution(profile).characteristic(zeta, t)
    return pt.x, pt.u, pt.w


def energy_series(profile: InitialProfile, t_grid: Iterable[float]) -> list[tuple[float, float, float]]:
    """``(t, int w^2, E)`` of the dissipative solution, with ``E = int w^2 / 2``."""
    out = []
    prev = -math.inf
    for t in t_grid:
        t = float(t)
        if t < 0 or t < prev:
            raise ValueError("t_grid must be nonnegative and nondecreasing")
        prev = t
        m = survivor_mass(profile, t)
        out.append((t, m, 0.5 * m))
    return out


def write_energy_csv(fh: IO[str], solution: Solution, t_grid: Sequence[float]) -> None:
    """CSV with columns ``t, total_energy, dissipative_bound, n_alive_cells``."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["t", "total_energy", "dissipative_bound", "n_alive_cells"])
    for t in t_grid:
        fr = solution.frame(t)
        writer.writerow([
            format_float(t),
            format_float(fr.total_energy),
            format_float(survivor_mass(solution.profile, t)),
            fr.n_alive,
        ])
