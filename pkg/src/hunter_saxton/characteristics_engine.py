"""RK4 tracking of characteristics and checks on characteristic pairs.

A characteristic solves

    x' = u,    u' = F(x, t) / 2,    F(x, t) = int_{-inf}^x w^2 dy,

with ``F`` read exactly from the provider's frames.  Steps are split at the
provider's event times and stage evaluations at an event use the one-sided
frame from inside the substep, so the integrand is smooth on every substep.

The lookup of ``F`` is anchored to the label's own cell: characteristics
never cross, so on the true path ``F`` only varies across the cell the label
lives in.  For labels at a cell boundary ``F`` is then constant between
events; for interior labels it is affine in ``x`` inside the cell and
clamped at its edges.  Without the anchor, an O(dt^2) stage error next to a
cell that is about to collapse lands inside that cell and the forcing loses
most of its energy.  Labels inside a collapsing cell go one step further and
take ``F`` at their fixed fraction of the cell: there the linearized flow has
a mode growing like 1/(T - t), so position feedback would only amplify
truncation error.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Optional, Sequence

import numpy as np

from .dissipative_solver import SIDES, Solution, format_float
from .profile import InitialProfile, cell_meta

__all__ = [
    "CharacteristicTrace",
    "PairDiagnostics",
    "COLLAPSE_TOL",
    "time_grid",
    "integrate_characteristic",
    "integrate_characteristics",
    "pair_diagnostics",
    "pair_horizon",
    "riccati_check",
    "riccati_margins",
    "exponential_identity_check",
    "SeparationResult",
    "separation_lower_bound_check",
    "AveragingProbe",
    "averaged_energy_probe",
    "write_trace_csv",
    "write_pair_csv",
]

COLLAPSE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CharacteristicTrace:
    """Samples of one characteristic on a uniform grid.

    ``w`` is nan where the label's cell has collapsed.  ``F`` holds the
    forcing seen at each sample, one-sided from the right at event times.
    """

    zeta: float
    side: str
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    w: np.ndarray
    F: np.ndarray
    F_left: np.ndarray
    lam: float = 0.5


@dataclass(frozen=True, eq=False)
class PairDiagnostics:
    t: np.ndarray
    h: np.ndarray
    p: np.ndarray
    omega: np.ndarray
    omega_dot: np.ndarray
    omega_dot_left: np.ndarray
    valid: np.ndarray

    @property
    def omega0(self) -> float:
        return float(self.omega[0])

    def until(self, t_stop: float) -> "PairDiagnostics":
        """The samples with ``t <= t_stop``."""
        k = int(np.searchsorted(self.t, t_stop, side="right"))
        return PairDiagnostics(self.t[:k], self.h[:k], self.p[:k], self.omega[:k],
                               self.omega_dot[:k], self.omega_dot_left[:k], self.valid[:k])


def time_grid(t_end: float, dt: float) -> np.ndarray:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if not t_end >= 0:
        raise ValueError(f"t_end must be nonnegative, got {t_end!r}")
    n = max(int(math.ceil(t_end / dt - 1e-9)), 1)
    return np.linspace(0.0, t_end, n + 1)


def _forcing(frame, cells, fracs, snapped, x):
    m = frame.n_cells
    cum = frame.cumulative
    inner = (fracs > 0.0) & (cells < m)
    jc = np.minimum(cells, m - 1)
    h = frame.widths[jc]
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(h > 0, (x - frame.positions[jc]) / h, fracs)
    f = np.where(snapped, fracs, np.clip(f, 0.0, 1.0))
    return np.where(inner, cum[jc] + frame.energies[jc] * f, cum[cells])


class _Tracker:
    def __init__(self, provider, zetas, side, lam):
        if side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}, got {side!r}")
        self.provider = provider
        self.events = np.asarray(provider.event_times, dtype=float)
        self.cells, self.fracs, self.offsets = provider.location_table(zetas, side, lam)
        snapped = np.zeros(self.cells.shape, dtype=bool)
        # inside a collapsing cell, position feedback excites the mode
        # 1/(T - t) of the linearized flow; the label's Lagrangian fraction
        # fixes its forcing instead
        profile = provider.profile
        meta = cell_meta(profile)
        for j, z in enumerate(zetas):
            i = profile.cell_index(z)
            if 0 <= i < profile.n_cells and math.isfinite(meta[i].blowup_time):
                snapped[:, j] = True
        # a generic path inside a fan is one member of a continuum of
        # solutions; it is followed at its fixed fraction of the fan
        if side == "generic":
            for j, z in enumerate(zetas):
                b = provider.schedule(z, side, lam).branch_time
                for k in range(self.cells.shape[0]):
                    start = 0.0 if k == 0 else self.events[k - 1]
                    snapped[k, j] |= start >= b
        self.snapped = snapped
        self._frames: dict = {}

    def row(self, t: float, toward: float) -> int:
        # interval index of t; at an event time pick the side we approach from
        k = int(np.searchsorted(self.events, t, side="right"))
        if toward < 0 and k > 0 and self.events[k - 1] == t:
            k -= 1
        return k

    def force(self, t: float, x, toward: float = 0.0):
        k = self.row(t, toward)
        tt = t
        if toward and np.any(self.events == t):
            tt = float(np.nextafter(t, math.inf if toward > 0 else -math.inf))
        return _forcing(self.frame(tt), self.cells[k], self.fracs[k], self.snapped[k], x)

    def frame(self, t: float):
        # stages and step ends revisit the same few times
        fr = self._frames.get(t)
        if fr is None:
            if len(self._frames) > 8:
                self._frames.clear()
            fr = self._frames[t] = self.provider.frame(t)
        return fr


def integrate_characteristics(frame_provider, zetas: Sequence[float], t_end: float, dt: float,
                              side: str = "rightmost", lam: float = 0.5) -> list[CharacteristicTrace]:
    """Classical RK4 for many labels on one shared uniform grid."""
    t_max = getattr(frame_provider, "t_max", math.inf)
    if t_end > t_max:
        raise ValueError(f"t_end={t_end!r} is beyond the provider domain [0, {t_max}]")
    zetas = [float(z) for z in zetas]
    grid = time_grid(t_end, dt)
    tr = _Tracker(frame_provider, zetas, side, lam)
    f0 = frame_provider.frame(0.0)
    x, u, _ = f0.locate(tr.cells[0], tr.fracs[0], tr.offsets)
    x, u = np.asarray(x, dtype=float).copy(), np.asarray(u, dtype=float).copy()

    n, L = len(grid), len(zetas)
    X, U, W = np.empty((n, L)), np.empty((n, L)), np.empty((n, L))
    FR, FL = np.empty((n, L)), np.empty((n, L))
    X[0], U[0] = x, u
    W[0] = frame_provider.label_slopes(zetas, 0.0, f0)
    FL[0] = FR[0] = tr.force(0.0, x, +1.0)

    for k in range(n - 1):
        a0, b0 = grid[k], grid[k + 1]
        inside = tr.events[(tr.events > a0) & (tr.events < b0)]
        cuts = np.concatenate(([a0], inside, [b0]))
        for a, b in zip(cuts[:-1], cuts[1:]):
            h = b - a
            m = a + 0.5 * h
            k1x, k1u = u, 0.5 * tr.force(a, x, +1.0)
            k2x, k2u = u + 0.5 * h * k1u, 0.5 * tr.force(m, x + 0.5 * h * k1x)
            k3x, k3u = u + 0.5 * h * k2u, 0.5 * tr.force(m, x + 0.5 * h * k2x)
            k4x, k4u = u + h * k3u, 0.5 * tr.force(b, x + h * k3x, -1.0)
            x = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
            u = u + h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        X[k + 1], U[k + 1] = x, u
        FL[k + 1] = tr.force(b0, x, -1.0)
        FR[k + 1] = tr.force(b0, x, +1.0)
        W[k + 1] = frame_provider.label_slopes(zetas, b0, tr.frame(b0))

    return [
        CharacteristicTrace(z, side, grid, X[:, j].copy(), U[:, j].copy(), W[:, j].copy(),
                            FR[:, j].copy(), FL[:, j].copy(), lam)
        for j, z in enumerate(zetas)
    ]


def integrate_characteristic(frame_provider, zeta: float, t_end: float, dt: float,
                             side: str = "rightmost", lam: float = 0.5) -> CharacteristicTrace:
    """Trace the characteristic from label ``zeta`` on ``[0, t_end]``."""
    return integrate_characteristics(frame_provider, [zeta], t_end, dt, side, lam)[0]


# -- pairs --------------------------------------------------------------------


def pair_diagnostics(trace1: CharacteristicTrace, trace2: CharacteristicTrace,
                     collapse_tol: float = COLLAPSE_TOL) -> PairDiagnostics:
    """``h = x2 - x1``, ``p = u2 - u1`` and ``omega = p / h`` until the pair collides."""
    if trace1.t.shape != trace2.t.shape or not np.array_equal(trace1.t, trace2.t):
        raise ValueError("traces are sampled on different time grids")
    if not trace1.x[0] < trace2.x[0]:
        raise ValueError("pair must start ordered: x1(0) < x2(0)")
    h = trace2.x - trace1.x
    p = trace2.u - trace1.u
    below = h < collapse_tol
    valid = ~np.logical_or.accumulate(below)
    with np.errstate(divide="ignore", invalid="ignore"):
        omega = np.where(valid, p / h, math.nan)
        # omega' = p'/h - omega^2 with p' = (F2 - F1)/2
        od = np.where(valid, 0.5 * (trace2.F - trace1.F) / h - omega * omega, math.nan)
        odl = np.where(valid, 0.5 * (trace2.F_left - trace1.F_left) / h - omega * omega, math.nan)
    return PairDiagnostics(trace1.t, h, p, omega, od, odl, valid)


def pair_horizon(profile: InitialProfile, a: float, b: float, t_end: float) -> float:
    """Where to stop checking the pair from labels ``a < b``.

    If every cell between the labels collapses, the pair is squeezed to a
    point at the last of those blow-up times and ``x2 - x1`` loses all its
    digits to cancellation on the way; the check stops halfway there.
    """
    bp = profile.breakpoints
    if a < bp[0] or b > bp[-1]:
        return t_end
    T = 0.0
    for m in cell_meta(profile):
        if bp[m.index + 1] > a and bp[m.index] < b:
            T = max(T, m.blowup_time)
    return t_end if not math.isfinite(T) else min(t_end, 0.5 * T)


def riccati_bound(omega0: float, t):
    """``2 w0 / (2 + t w0)``, nan where ``2 + t w0 <= 0``."""
    t = np.asarray(t, dtype=float)
    d = 2.0 + t * omega0
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(d > 0, 2.0 * omega0 / d, math.nan)


def riccati_margins(diag: PairDiagnostics) -> np.ndarray:
    if not math.isfinite(diag.omega0):
        raise ValueError("omega(0) is not finite")
    return diag.omega - riccati_bound(diag.omega0, diag.t)


def riccati_check(diag: PairDiagnostics) -> float:
    """Smallest ``omega(t) - 2 omega0 / (2 + t omega0)`` where both sides are defined."""
    m = riccati_margins(diag)
    m = m[np.isfinite(m)]
    return float(m.min()) if m.size else 0.0


def exponential_identity_check(diag: PairDiagnostics, corrected: bool = True) -> float:
    """Largest ``|h(t) - h(0) exp(int_0^t omega)| / h(t)`` over the recorded window.

    The integral is the composite trapezoid rule; with ``corrected`` each
    panel gets the Euler-Maclaurin end term ``-dt^2/12 (omega'(b-) - omega'(a+))``
    built from the recorded one-sided forcing.
    """
    v = diag.valid
    t, om, h = diag.t[v], diag.omega[v], diag.h[v]
    if t.size < 2:
        return 0.0
    dt = np.diff(t)
    panels = 0.5 * dt * (om[1:] + om[:-1])
    if corrected:
        od_r = diag.omega_dot[v][:-1]
        od_l = diag.omega_dot_left[v][1:]
        panels = panels - dt * dt / 12.0 * (od_l - od_r)
    integral = np.concatenate(([0.0], np.cumsum(panels)))
    pred = h[0] * np.exp(integral)
    return float(np.max(np.abs(h - pred) / h))


# -- separation bound -----------------------------------------------------------


@dataclass(frozen=True)
class SeparationResult:
    status: str  # "pass", "fail" or "inapplicable"
    margin: float
    bound: float
    min_separation: float
    eps0: float
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.status != "fail"


def separation_lower_bound_check(profile: InitialProfile, zeta0: float, zeta1: float, t: float,
                                 eps0: Optional[float] = None, n_samples: int = 200,
                                 solution: Optional[Solution] = None) -> SeparationResult:
    """Check ``|x1(s) - x0(s)| >= |zeta1 - zeta0| t^2 eps0^2 / 16`` for ``s`` in ``(0, t]``.

    ``eps0`` must satisfy ``w0(zeta0) > -2/t + eps0``; by default it is
    ``min((w0 + 2/t) / 2, 2/t)``.  If the pair's initial difference quotient
    is not above ``-2/t + eps0/2`` the check is reported inapplicable.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t!r}")
    sol = solution if solution is not None else Solution(profile)
    w0 = profile.slope_at(zeta0)
    if eps0 is None:
        eps0 = min(0.5 * (w0 + 2.0 / t), 2.0 / t)
    dz = abs(zeta1 - zeta0)
    bound = dz * t * t * eps0 * eps0 / 16.0
    if dz == 0.0:
        return SeparationResult("pass", 0.0, 0.0, 0.0, eps0, "coincident labels")
    if not (eps0 > 0 and w0 > -2.0 / t + eps0):
        return SeparationResult("inapplicable", math.nan, bound, math.nan, eps0,
                                f"w0(zeta0)={w0!r} is not above -2/t + eps0")
    if t * eps0 > 4.0:
        return SeparationResult("inapplicable", math.nan, bound, math.nan, eps0, "t * eps0 exceeds 4")
    lo, hi = sorted((zeta0, zeta1))
    omega0 = (profile.u0(hi) - profile.u0(lo)) / (hi - lo)
    if not omega0 > -2.0 / t + eps0 / 2.0:
        return SeparationResult("inapplicable", math.nan, bound, math.nan, eps0,
                                f"initial quotient {omega0!r} is not above -2/t + eps0/2")
    s = t * np.arange(1, n_samples + 1) / n_samples
    x0 = np.array([sol.characteristic(zeta0, si).x for si in s])
    x1 = np.array([sol.characteristic(zeta1, si).x for si in s])
    sep = np.abs(x1 - x0)
    margin = float(sep.min() - bound)
    # positions carry rounding of a few ulps of |x|
    slack = 8.0 * np.finfo(float).eps * float(max(1.0, np.abs(x0).max(), np.abs(x1).max()))
    return SeparationResult("pass" if margin >= -slack else "fail", margin, bound, float(sep.min()), eps0)


# -- averaged energy -------------------------------------------------------------


@dataclass(frozen=True)
class AveragingProbe:
    eps: tuple[float, ...]
    errors: tuple[float, ...]
    applicable: bool = True
    reason: str = ""


_GL = np.polynomial.legendre.leggauss(24)


def _window_excess(frame, ca, fa, cb, fb, w_ref):
    # int (w^2 - w_ref^2) / L over the cells between two Lagrangian locations
    m = frame.n_cells
    total = length = 0.0
    for c in range(ca, min(cb, m - 1) + 1):
        lo = fa if c == ca else 0.0
        hi = fb if c == cb else 1.0
        if hi <= lo:
            continue
        seg = (hi - lo) * frame.widths[c]
        total += (frame.slopes[c] ** 2 - w_ref * w_ref) * seg
        length += seg
    return total / length if length > 0 else 0.0


def averaged_energy_probe(frame_provider, zeta: float, eps_sequence: Sequence[float],
                          sigma: float, tau: float) -> AveragingProbe:
    """``|int_sigma^tau (avg of w^2 over [x(zeta), x(zeta+eps)] - w(x(zeta))^2) dt|`` per ``eps``.

    The reference slope is the one carried by label ``zeta`` (the cell
    ``[zeta_i, zeta_{i+1})`` holding it).  Any event touching the labels in
    ``[zeta, zeta + max eps]`` before ``tau`` makes the probe inapplicable.
    """
    eps = [float(e) for e in eps_sequence]
    if not 0 <= sigma <= tau:
        raise ValueError("need 0 <= sigma <= tau")
    if any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps_sequence must be positive and decreasing")
    profile = frame_provider.profile
    lo, hi = zeta, zeta + max(eps)
    for m in cell_meta(profile):
        a, b = profile.breakpoints[m.index], profile.breakpoints[m.index + 1]
        if b > lo and a <= hi and m.blowup_time <= tau:
            return AveragingProbe(tuple(eps), (), False,
                                  f"cell {m.index} collapses at {m.blowup_time!r} inside the window")
    nodes, weights = _GL
    ts = 0.5 * (tau + sigma) + 0.5 * (tau - sigma) * nodes
    ws = 0.5 * (tau - sigma) * weights
    i = profile.cell_index(zeta)
    errors = []
    for e in eps:
        acc = 0.0
        for t, wt in zip(ts, ws):
            fr = frame_provider.frame(t)
            ca, fa, _ = frame_provider.location(zeta, t, "rightmost")
            cb, fb, _ = frame_provider.location(zeta + e, t, "leftmost")
            w_ref = frame_provider.label_slopes([zeta], t, fr)[0] if 0 <= i < profile.n_cells else 0.0
            acc += wt * _window_excess(fr, ca, fa, cb, fb, w_ref)
        errors.append(abs(acc))
    return AveragingProbe(tuple(eps), tuple(errors))


# -- output -----------------------------------------------------------------------


def write_trace_csv(fh: IO[str], trace: CharacteristicTrace) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "x", "u", "w_if_defined"])
    for t, x, u, s in zip(trace.t, trace.x, trace.u, trace.w):
        w.writerow([format_float(t), format_float(x), format_float(u), "" if math.isnan(s) else format_float(s)])


def write_pair_csv(fh: IO[str], diag: PairDiagnostics) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "h", "p", "omega", "riccati_bound"])
    bound = riccati_bound(diag.omega0, diag.t)
    for t, h, p, om, b in zip(diag.t, diag.h, diag.p, diag.omega, bound):
        w.writerow([format_float(t), format_float(h), format_float(p),
                    "" if math.isnan(om) else format_float(om),
                    "" if math.isnan(b) or math.isnan(om) else format_float(b)])
