"""The label-to-position map, its generalized inverse and Stieltjes integrals.

At time ``t`` the map ``M(zeta) = x_r[zeta](t)`` (rightmost characteristics)
is nondecreasing and piecewise affine: alive cells are stretched by
``(1 + t w0 / 2)^2``, collapsed cells are flat, and every fan opened by a
resurrection shows up as a jump.
"""
from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass
from typing import IO

import numpy as np

from .dissipative_solver import Solution, format_float
from .profile import InitialProfile

__all__ = [
    "AFFINE",
    "FLAT",
    "JUMP",
    "Segment",
    "MonotoneFlowMap",
    "StepFunction",
    "build_flow_map",
    "stieltjes_change_of_variables_check",
    "derivative_bound_check",
    "positive_energy",
    "l1_translation_modulus",
]

AFFINE, FLAT, JUMP = "affine", "flat", "jump"


@dataclass(frozen=True)
class Segment:
    kind: str
    zeta_lo: float
    zeta_hi: float
    x_lo: float
    x_hi: float
    slope: float = 0.0
    cell: int = -1

    def value(self, zeta: float) -> float:
        if self.kind == AFFINE:
            return self.x_lo + self.slope * (zeta - self.zeta_lo)
        return self.x_hi


@dataclass(frozen=True)
class MonotoneFlowMap:
    """``M`` on ``[zeta_0, zeta_n]`` as ordered segments; translated outside."""

    t: float
    segments: tuple[Segment, ...]

    @property
    def domain(self) -> tuple[float, float]:
        return self.segments[0].zeta_lo, self.segments[-1].zeta_hi

    @property
    def x_start(self) -> float:
        return self.segments[0].x_lo

    @property
    def x_end(self) -> float:
        return self.segments[-1].x_hi

    def __call__(self, zeta: float) -> float:
        lo, hi = self.domain
        if zeta < lo:
            return self.x_start + (zeta - lo)
        if zeta > hi:
            return self.x_end + (zeta - hi)
        seg = None
        for s in self.segments:
            if s.zeta_lo <= zeta:
                seg = s
            else:
                break
        return seg.value(min(zeta, seg.zeta_hi))

    def left_limit(self, zeta: float) -> float:
        lo, hi = self.domain
        if zeta <= lo:
            return self.x_start + (zeta - lo)
        if zeta > hi:
            return self.x_end + (zeta - hi)
        seg = None
        for s in self.segments:
            if s.zeta_lo < zeta:
                seg = s
            else:
                break
        return seg.value(min(zeta, seg.zeta_hi))

    def inverse(self, y: float) -> float:
        """``W(y) = inf{zeta : M(zeta) >= y}``."""
        lo, hi = self.domain
        if y <= self.x_start:
            return lo + (y - self.x_start)
        if y > self.x_end:
            return hi + (y - self.x_end)
        for s in self.segments:
            if s.x_hi >= y:
                if s.kind == AFFINE:
                    return s.zeta_lo + (y - s.x_lo) / s.slope
                return s.zeta_lo
        return hi

    def flats(self) -> list[Segment]:
        return [s for s in self.segments if s.kind == FLAT]

    def jumps(self) -> list[Segment]:
        return [s for s in self.segments if s.kind == JUMP]

    def write_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["segment_type", "zeta_lo", "zeta_hi", "x_lo", "x_hi"])
        for s in self.segments:
            w.writerow([s.kind, format_float(s.zeta_lo), format_float(s.zeta_hi),
                        format_float(s.x_lo), format_float(s.x_hi)])


def build_flow_map(solution: Solution, t: float) -> MonotoneFlowMap:
    """Segments of ``zeta -> x_r[zeta](t)`` read off the solution's frame."""
    frame = solution.frame(t)
    p = solution.profile
    segs: list[Segment] = []
    prev = float(frame.positions[0])
    for i, m in enumerate(solution.meta):
        z0, z1 = p.breakpoints[i], p.breakpoints[i + 1]
        xr = solution.characteristic(z0, t, "rightmost", frame=frame).x
        if xr > prev:
            segs.append(Segment(JUMP, z0, z0, prev, xr))
        if m.alive_at(t):
            c = solution.orig_slot[i]
            a = 1.0 + t * m.slope / 2.0
            x_hi = float(frame.positions[c + 1])
            segs.append(Segment(AFFINE, z0, z1, xr, x_hi, a * a, i))
            prev = x_hi
        else:
            xf = solution.characteristic(0.5 * (z0 + z1), t, "rightmost", frame=frame).x
            segs.append(Segment(FLAT, z0, z1, xf, xf, 0.0, i))
            prev = xf
    zn = p.breakpoints[-1]
    xr = solution.characteristic(zn, t, "rightmost", frame=frame).x
    if xr > prev:
        segs.append(Segment(JUMP, zn, zn, prev, xr))
    return MonotoneFlowMap(float(t), tuple(segs))


@dataclass(frozen=True)
class StepFunction:
    """``values[k]`` on ``[breaks[k], breaks[k+1])``, ``outside`` elsewhere."""

    breaks: tuple[float, ...]
    values: tuple[float, ...]
    outside: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "breaks", tuple(float(b) for b in self.breaks))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) != len(self.breaks) - 1:
            raise ValueError("need one value per interval between breaks")
        if any(b <= a for a, b in zip(self.breaks, self.breaks[1:])):
            raise ValueError("breaks must be strictly increasing")

    @classmethod
    def constant(cls, c: float, lo: float, hi: float) -> "StepFunction":
        return cls((lo, hi), (c,), c)

    @classmethod
    def indicator(cls, lo: float, hi: float) -> "StepFunction":
        return cls((lo, hi), (1.0,))

    def __call__(self, x: float) -> float:
        k = bisect.bisect_right(self.breaks, x) - 1
        if k < 0 or k >= len(self.values):
            return self.outside
        return self.values[k]

    def integral(self, a: float, b: float) -> float:
        """``int_a^b f`` for ``a <= b``."""
        if b <= a:
            return 0.0
        pts = sorted({a, b, *(x for x in self.breaks if a < x < b)})
        return math.fsum(self(0.5 * (u + v)) * (v - u) for u, v in zip(pts, pts[1:]))


def stieltjes_change_of_variables_check(f: StepFunction, fmap: MonotoneFlowMap, a: float, b: float):
    """Both sides of ``int_(a,b] f dM = int_{M(a)}^{M(b)} f(W(y)) dy`` and their gap."""
    if b < a:
        raise ValueError("need a <= b")
    lo_dom, hi_dom = fmap.domain
    lhs_terms = []
    # translated tails have unit slope
    if a < lo_dom:
        lhs_terms.append(f.integral(a, min(b, lo_dom)))
    if b > hi_dom:
        lhs_terms.append(f.integral(max(a, hi_dom), b))
    for s in fmap.segments:
        if s.kind == JUMP:
            if a < s.zeta_lo <= b:
                lhs_terms.append(f(s.zeta_lo) * (s.x_hi - s.x_lo))
        elif s.kind == AFFINE:
            lo, hi = max(a, s.zeta_lo), min(b, s.zeta_hi)
            if hi > lo:
                lhs_terms.append(s.slope * f.integral(lo, hi))
    lhs = math.fsum(lhs_terms)

    ya, yb = fmap(a), fmap(b)
    cuts = {ya, yb}
    for s in fmap.segments:
        cuts.update((s.x_lo, s.x_hi))
    cuts.update(fmap(z) for z in f.breaks)
    cuts.update(fmap.left_limit(z) for z in f.breaks)
    pts = sorted(c for c in cuts if ya <= c <= yb)
    rhs = math.fsum(f(fmap.inverse(0.5 * (u + v))) * (v - u) for u, v in zip(pts, pts[1:]) if v > u)
    return lhs, rhs, abs(lhs - rhs)


def derivative_bound_check(fmap: MonotoneFlowMap, profile: InitialProfile, t: float) -> float:
    """Smallest ``M'(zeta) - (2 + t w0(zeta))^2 / 4`` over the affine segments."""
    margins = []
    for s in fmap.segments:
        if s.kind == AFFINE:
            b = 2.0 + t * profile.slopes[s.cell]
            # b * b, not b ** 2: pow() is not always correctly rounded
            margins.append(s.slope - 0.25 * (b * b))
    return min(margins) if margins else 0.0


def positive_energy(solution: Solution, a: float, b: float, t: float) -> float:
    """``int max(w, 0)^2`` between the rightmost characteristics from ``a`` and ``b``."""
    if not a < b:
        raise ValueError("need a < b")
    return solution.energy_between(a, b, t, positive_only=True)


def _translation_l1(g: StepFunction, y: float) -> float:
    # int |g(x + y) - g(x)| dx, exact for a step function
    pts = sorted(set(g.breaks) | {b - y for b in g.breaks})
    total = []
    for u, v in zip(pts, pts[1:]):
        if v > u:
            m = 0.5 * (u + v)
            total.append(abs(g(m + y) - g(m)) * (v - u))
    return math.fsum(total)


def l1_translation_modulus(g: StepFunction, eps: float) -> float:
    """``(1/eps) int_0^eps int |g(x+y) - g(x)| dx dy``, exact.

    The inner integral is piecewise linear in ``y`` with kinks at differences
    of breakpoints, so the trapezoid rule through the kinks is exact.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    if g.outside != 0.0:
        raise ValueError("g must vanish outside its breaks")
    br = np.asarray(g.breaks)
    diffs = np.abs(br[:, None] - br[None, :]).ravel()
    ys = np.unique(np.concatenate(([0.0, eps], diffs[(diffs > 0) & (diffs < eps)])))
    d = np.array([_translation_l1(g, y) for y in ys])
    return float(np.sum(0.5 * (d[1:] + d[:-1]) * np.diff(ys)) / eps)
