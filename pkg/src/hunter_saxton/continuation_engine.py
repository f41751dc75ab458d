"""Energy-resurrecting weak continuations and a distributional residual.

When a cell of negative slope collapses at ``T``, the dissipative solution
drops its energy ``e``.  A continuation instead opens a self-similar fan at
the collision point,

    slope 2 / (t - T),   width kappa * e / 4 * (t - T)^2,

carrying the constant energy ``kappa * e``.  ``kappa = 0`` everywhere gives
back the dissipative solution bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .dissipative_solver import Solution
from .profile import Frame, InitialProfile, cell_meta, eval_u

__all__ = [
    "PolicyError",
    "ContinuationPolicy",
    "ResurrectedCell",
    "continue_with",
    "resurrected_cells",
    "BumpGrid",
    "weak_residual",
    "bump_residuals",
    "FaultInjectedProvider",
]


class PolicyError(ValueError):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


@dataclass(frozen=True)
class ContinuationPolicy:
    """Resurrection coefficient per collapsing cell; cells not listed use 0."""

    resurrect: tuple[tuple[int, float], ...] = ()
    name: str = ""

    def __post_init__(self):
        items = self.resurrect.items() if isinstance(self.resurrect, Mapping) else self.resurrect
        clean = {}
        for i, k in items:
            if isinstance(i, bool) or int(i) != i or int(i) < 0:
                raise PolicyError(f"invalid cell index {i!r}", "resurrect")
            k = float(k)
            if not math.isfinite(k) or k < 0:
                raise PolicyError(f"kappa must be finite and >= 0, got {k!r}", f"resurrect[{int(i)}]")
            clean[int(i)] = k
        object.__setattr__(self, "resurrect", tuple(sorted(clean.items())))

    @classmethod
    def dissipative(cls) -> "ContinuationPolicy":
        return cls((), "dissipative")

    @classmethod
    def uniform(cls, profile: InitialProfile, kappa: float, name: str = "") -> "ContinuationPolicy":
        """Same ``kappa`` at every collapse event of ``profile``."""
        cells = [(m.index, kappa) for m in cell_meta(profile) if math.isfinite(m.blowup_time)]
        return cls(tuple(cells), name or f"kappa={kappa:g}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], name: str = "") -> "ContinuationPolicy":
        """Parse ``{"resurrect": {"<cell>": kappa, ...}}``."""
        if not isinstance(data, Mapping):
            raise PolicyError("expected an object")
        raw = data.get("resurrect", {})
        if not isinstance(raw, Mapping):
            raise PolicyError("expected an object mapping cell index to kappa", "resurrect")
        items = []
        for key, k in raw.items():
            try:
                i = int(key)
            except (TypeError, ValueError):
                raise PolicyError(f"cell index {key!r} is not an integer", "resurrect") from None
            if isinstance(k, bool) or not isinstance(k, (int, float)):
                raise PolicyError(f"expected a number, got {k!r}", f"resurrect[{key}]")
            items.append((i, k))
        return cls(tuple(items), name or str(data.get("id", "")))

    def to_dict(self) -> dict:
        return {"resurrect": {str(i): k for i, k in self.resurrect}}

    def as_mapping(self) -> dict[int, float]:
        return dict(self.resurrect)

    @property
    def is_dissipative(self) -> bool:
        return all(k == 0 for _, k in self.resurrect)

    def validate(self, profile: InitialProfile) -> None:
        meta = cell_meta(profile)
        for i, k in self.resurrect:
            if i >= profile.n_cells:
                raise PolicyError(f"cell {i} out of range (profile has {profile.n_cells})", f"resurrect[{i}]")
            if k > 0 and not math.isfinite(meta[i].blowup_time):
                raise PolicyError(f"cell {i} has w0 >= 0 and never blows up", f"resurrect[{i}]")

    def solution(self, profile: InitialProfile) -> Solution:
        self.validate(profile)
        return Solution(profile, self.as_mapping())


@dataclass(frozen=True)
class ResurrectedCell:
    birth_time: float
    kappa: float
    parent_energy: float

    @property
    def energy(self) -> float:
        return self.kappa * self.parent_energy

    def slope(self, t: float) -> float:
        return 2.0 / (t - self.birth_time) if t > self.birth_time else 0.0

    def width(self, t: float) -> float:
        d = max(t - self.birth_time, 0.0)
        return self.energy / 4.0 * d * d


def resurrected_cells(profile: InitialProfile, policy: ContinuationPolicy) -> dict[int, ResurrectedCell]:
    meta = cell_meta(profile)
    policy.validate(profile)
    return {
        i: ResurrectedCell(meta[i].blowup_time, k, meta[i].energy)
        for i, k in policy.resurrect
        if k > 0
    }


def continue_with(profile: InitialProfile, policy: ContinuationPolicy, t: float) -> Frame:
    """Frame at time ``t`` of the continuation selected by ``policy``."""
    return policy.solution(profile).frame(t)


# -- weak form --------------------------------------------------------------


def _bump(s):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    q = np.where(inside, 1.0 - s * s, 1.0)
    b = np.where(inside, np.exp(-1.0 / q), 0.0)
    db = np.where(inside, b * (-2.0 * s / (q * q)), 0.0)
    return b, db


@dataclass(frozen=True)
class BumpGrid:
    """Tensor grid of smooth bumps ``phi = b((x-cx)/rx) * b((t-ct)/rt)``.

    ``b(s) = exp(-1/(1-s^2))`` on ``|s| < 1``.  By default ``n x n`` centres
    are spread evenly over the window with radius equal to the spacing, so
    every support is a closed subset of the window.
    """

    window: tuple[float, float, float, float]
    centers_x: tuple[float, ...]
    centers_t: tuple[float, ...]
    radius_x: float
    radius_t: float

    @classmethod
    def uniform(cls, window, nx: int = 3, nt: int = 3, scale: float = 1.0) -> "BumpGrid":
        xa, xb, ta, tb = map(float, window)
        if not (xb > xa and tb > ta):
            raise ValueError(f"degenerate window {window!r}")
        dx, dtt = (xb - xa) / (nx + 1), (tb - ta) / (nt + 1)
        cx = tuple(xa + dx * (i + 1) for i in range(nx))
        ct = tuple(ta + dtt * (j + 1) for j in range(nt))
        return cls((xa, xb, ta, tb), cx, ct, dx * scale, dtt * scale)

    def bumps(self):
        for ct in self.centers_t:
            for cx in self.centers_x:
                yield cx, ct

    def check_support(self) -> None:
        xa, xb, ta, tb = self.window
        for cx, ct in self.bumps():
            if (cx - self.radius_x < xa or cx + self.radius_x > xb
                    or ct - self.radius_t < ta or ct + self.radius_t > tb):
                raise ValueError(
                    f"bump support [{cx - self.radius_x}, {cx + self.radius_x}] x "
                    f"[{ct - self.radius_t}, {ct + self.radius_t}] leaves window {self.window}"
                )
        if ta < 0:
            raise ValueError("window starts before t = 0")


_GL_X = np.polynomial.legendre.leggauss(16)
_GL_T = np.polynomial.legendre.leggauss(16)


def _gauss(a: float, b: float, n_panels: int, rule):
    nodes, weights = rule
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return x, w


def _residual_at(frame: Frame, cx, rx, ct, rt, t, panels):
    """x-integrals of the weak-form integrand and of the norm weight at time t."""
    bt, dbt = _bump((t - ct) / rt)
    if bt == 0.0 and dbt == 0.0:
        return 0.0, 0.0
    lo, hi = cx - rx, cx + rx
    cuts = frame.positions[(frame.positions > lo) & (frame.positions < hi)]
    edges = np.concatenate(([lo], cuts, [hi]))
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            x, w = _gauss(a, b, panels, _GL_X)
            xs.append(x)
            ws.append(w)
    x, w = np.concatenate(xs), np.concatenate(ws)
    u = eval_u(frame, x)
    F = frame.energy_left_of(x)
    bx, dbx = _bump((x - cx) / rx)
    phi = bx * bt
    phi_t = bx * dbt / rt
    phi_x = dbx * bt / rx
    integrand = u * phi_t + 0.5 * u * u * phi_x + 0.5 * F * phi
    norm = np.abs(phi) + np.abs(phi_t) + np.abs(phi_x)
    return float(np.dot(w, integrand)), float(np.dot(w, norm))


def _bump_integral(provider, cx, rx, ct, rt, panels, cache):
    ta, tb = ct - rt, ct + rt
    events = [e for e in getattr(provider, "event_times", ()) if ta < e < tb]
    cuts = [ta] + sorted(events) + [tb]
    total = norm = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        ts, wt = _gauss(a, b, panels, _GL_T)
        for t, w in zip(ts, wt):
            fr = cache.get(t)
            if fr is None:
                fr = cache[t] = provider.frame(t)
            r, n = _residual_at(fr, cx, rx, ct, rt, t, panels)
            total += w * r
            norm += w * n
    return total, norm


def bump_residuals(frame_provider, grid: BumpGrid, rtol: float = 1e-10, max_panels: int = 64):
    """Normalized weak-form residual of every bump.

    Each residual is ``|I(phi)| / int(|phi| + |phi_t| + |phi_x|)``; the panel
    count doubles until two successive values of ``I`` agree to ``rtol``
    relative to the norm.
    """
    grid.check_support()
    t_max = getattr(frame_provider, "t_max", math.inf)
    if grid.window[3] > t_max:
        raise ValueError(f"window ends at t={grid.window[3]} beyond provider domain {t_max}")
    out = []
    cache: dict = {}
    for cx, ct in grid.bumps():
        panels = 1
        prev, norm = _bump_integral(frame_provider, cx, grid.radius_x, ct, grid.radius_t, panels, cache)
        while True:
            panels *= 2
            cur, norm = _bump_integral(frame_provider, cx, grid.radius_x, ct, grid.radius_t, panels, cache)
            if abs(cur - prev) <= rtol * norm or panels >= max_panels:
                break
            prev = cur
        out.append(abs(cur) / norm)
    return np.array(out)


def weak_residual(frame_provider, test_function_grid: BumpGrid, **kw) -> float:
    """Largest normalized residual of ``u phi_t + u^2/2 phi_x + F/2 phi`` over the grid."""
    return float(bump_residuals(frame_provider, test_function_grid, **kw).max())


@dataclass
class FaultInjectedProvider:
    """Wraps a provider and multiplies one frame cell's slope by ``factor``.

    ``u`` is rebuilt continuously from the corrupted slopes, so the fault is
    a wrong ``w`` rather than a jump.
    """

    base: Any
    cell: int = 0
    factor: float = 1.1

    @property
    def event_times(self):
        return self.base.event_times

    @property
    def t_max(self):
        return getattr(self.base, "t_max", math.inf)

    def frame(self, t: float) -> Frame:
        fr = self.base.frame(t)
        slopes = fr.slopes.copy()
        slopes[self.cell] *= self.factor
        du = slopes * fr.widths
        values = fr.values[0] + np.concatenate(([0.0], np.cumsum(du)))
        return Frame(fr.t, fr.positions, values, slopes, fr.widths, fr.kinds, fr.sources)

    def __getattr__(self, name):
        if name == "base":
            raise AttributeError(name)
        return getattr(self.base, name)
