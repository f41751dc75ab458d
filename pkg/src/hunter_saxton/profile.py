"""Piecewise-linear data for the Hunter-Saxton equation.

The equation is

    u_t + (u^2 / 2)_x = 1/2 * int_{-inf}^x w^2 dy,   w = u_x,

and everything in this package works with initial data ``u0`` that is
continuous and piecewise linear, i.e. ``w0`` is piecewise constant with
compact support.  Outside ``[zeta_0, zeta_n]`` the slope is zero and ``u0``
is extended by constants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Union

import numpy as np

__all__ = [
    "ProfileError",
    "InitialProfile",
    "CellMeta",
    "Frame",
    "cell_meta",
    "eval_u",
    "survivor_mass",
    "ORIGINAL",
    "RESURRECTED",
]

ORIGINAL = "original"
RESURRECTED = "resurrected"


class ProfileError(ValueError):
    """Invalid initial profile; ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


@dataclass(frozen=True)
class InitialProfile:
    """Piecewise-linear ``u0`` given by breakpoints, cell slopes and ``u0(zeta_0)``."""

    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]
    anchor: float = 0.0

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        sl = tuple(float(s) for s in self.slopes)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "slopes", sl)
        object.__setattr__(self, "anchor", float(self.anchor))

        if len(bps) < 2:
            raise ProfileError("need at least two breakpoints", "breakpoints")
        if len(sl) != len(bps) - 1:
            raise ProfileError(
                f"expected {len(bps) - 1} slopes for {len(bps)} breakpoints, got {len(sl)}",
                "slopes",
            )
        for i, b in enumerate(bps):
            if not math.isfinite(b):
                raise ProfileError(f"non-finite value {b!r}", f"breakpoints[{i}]")
            if i and b <= bps[i - 1]:
                raise ProfileError(
                    f"{b!r} does not exceed breakpoints[{i - 1}]={bps[i - 1]!r}",
                    f"breakpoints[{i}]",
                )
        for i, s in enumerate(sl):
            if not math.isfinite(s):
                raise ProfileError(f"non-finite value {s!r}", f"slopes[{i}]")
            e = s * s * (bps[i + 1] - bps[i])
            if not math.isfinite(e):
                raise ProfileError("cell energy overflows", f"slopes[{i}]")
        if not math.isfinite(self.anchor):
            raise ProfileError(f"non-finite value {self.anchor!r}", "anchor")
        if not math.isfinite(self.total_energy):
            raise ProfileError("total energy overflows", "slopes")

    # -- construction -----------------------------------------------------

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "InitialProfile":
        """Build from the JSON fragment ``{"breakpoints", "slopes", "anchor"}``."""
        if not isinstance(data, Mapping):
            raise ProfileError("expected an object", None)
        for key in ("breakpoints", "slopes"):
            if key not in data:
                raise ProfileError("missing field", key)
            if not isinstance(data[key], (list, tuple)):
                raise ProfileError("expected a list", key)
            for i, v in enumerate(data[key]):
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise ProfileError(f"expected a number, got {v!r}", f"{key}[{i}]")
        anchor = data.get("anchor", 0.0)
        if isinstance(anchor, bool) or not isinstance(anchor, (int, float)):
            raise ProfileError(f"expected a number, got {anchor!r}", "anchor")
        return cls(tuple(data["breakpoints"]), tuple(data["slopes"]), anchor)

    def to_dict(self) -> dict:
        return {
            "breakpoints": list(self.breakpoints),
            "slopes": list(self.slopes),
            "anchor": self.anchor,
        }

    # -- derived quantities -----------------------------------------------

    @property
    def n_cells(self) -> int:
        return len(self.slopes)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(np.asarray(self.breakpoints))

    @property
    def values(self) -> np.ndarray:
        """``u0`` at the breakpoints."""
        du = np.asarray(self.slopes) * self.widths
        return self.anchor + np.concatenate(([0.0], np.cumsum(du)))

    @property
    def energies(self) -> np.ndarray:
        w = np.asarray(self.slopes)
        return w * w * self.widths

    @property
    def total_energy(self) -> float:
        return math.fsum(self.energies)

    @property
    def support(self) -> tuple[float, float]:
        return self.breakpoints[0], self.breakpoints[-1]

    def cell_index(self, zeta: float) -> int:
        """Index of the cell ``[zeta_i, zeta_{i+1})`` holding ``zeta``; -1 or n outside."""
        if zeta < self.breakpoints[0]:
            return -1
        if zeta >= self.breakpoints[-1]:
            return self.n_cells
        return int(np.searchsorted(self.breakpoints, zeta, side="right")) - 1

    def slope_at(self, zeta: float) -> float:
        i = self.cell_index(zeta)
        return self.slopes[i] if 0 <= i < self.n_cells else 0.0

    def u0(self, zeta):
        return eval_u(self, zeta)


@dataclass(frozen=True)
class CellMeta:
    index: int
    width: float
    slope: float
    energy: float
    blowup_time: float

    def factor(self, t: float) -> float:
        """``1 + t w0 / 2``; the cell shrinks by its square."""
        return 1.0 + t * self.slope / 2.0

    def alive_at(self, t: float) -> bool:
        # membership in I_t is strict: the cell is gone at t == T
        return t < self.blowup_time and self.factor(t) > 0.0


def cell_meta(profile: InitialProfile) -> list[CellMeta]:
    metas = []
    widths = profile.widths
    for i, w in enumerate(profile.slopes):
        dz = float(widths[i])
        T = -2.0 / w if w < 0 else math.inf
        metas.append(CellMeta(i, dz, w, w * w * dz, T))
    return metas


def survivor_mass(profile: InitialProfile, t: float) -> float:
    """Mass of ``w0^2`` over the labels that have not blown up by time ``t``."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t!r}")
    return math.fsum(m.energy for m in cell_meta(profile) if m.alive_at(t))


@dataclass(frozen=True, eq=False)
class Frame:
    """Snapshot of a piecewise-linear solution at time ``t``.

    Cells are stored in spatial order.  ``positions`` and ``values`` hold the
    ``m + 1`` cell boundaries; ``widths`` are kept separately from the
    position differences so zero-width (collapsed or unborn) cells are exact.
    ``kinds``/``sources`` tag each cell as an original cell or a resurrected
    fan, with the index of the original cell it comes from.
    """

    t: float
    positions: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    widths: np.ndarray
    kinds: tuple[str, ...] = ()
    sources: tuple[int, ...] = ()
    energies: np.ndarray = field(init=False, repr=False)
    cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        s = np.asarray(self.slopes, dtype=float)
        h = np.asarray(self.widths, dtype=float)
        e = s * s * h
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "cumulative", np.concatenate(([0.0], np.cumsum(e))))

    @property
    def n_cells(self) -> int:
        return len(self.widths)

    @property
    def total_energy(self) -> float:
        """``int w^2 dx`` summed cell by cell."""
        return float(self.cumulative[-1])

    @property
    def n_alive(self) -> int:
        return int(np.count_nonzero(self.widths > 0))

    # -- sampling by position ----------------------------------------------

    def _cell_of(self, x: np.ndarray) -> np.ndarray:
        # last boundary <= x, so zero-width cells are skipped to the right
        return np.searchsorted(self.positions, x, side="right") - 1

    def energy_left_of(self, x):
        """``F(x) = int_{-inf}^x w^2``."""
        x = np.asarray(x, dtype=float)
        j = self._cell_of(x)
        m = self.n_cells
        jc = np.clip(j, 0, max(m - 1, 0))
        h = self.widths[jc] if m else np.zeros_like(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(h > 0, (x - self.positions[jc]) / h, 0.0)
        frac = np.clip(frac, 0.0, 1.0)
        inner = self.cumulative[jc] + (self.energies[jc] * frac if m else 0.0)
        out = np.where(j < 0, 0.0, np.where(j >= m, self.total_energy, inner))
        return out if out.ndim else float(out)

    def slope_at(self, x):
        """Slope of the cell containing ``x`` (right-continuous), 0 outside."""
        x = np.asarray(x, dtype=float)
        j = self._cell_of(x)
        m = self.n_cells
        jc = np.clip(j, 0, max(m - 1, 0))
        out = np.where((j < 0) | (j >= m), 0.0, self.slopes[jc] if m else 0.0)
        return out if out.ndim else float(out)

    # -- sampling by Lagrangian location -----------------------------------

    def locate(self, cell, frac, offset=0.0):
        """Position, value and ``F`` at boundary ``cell`` plus ``frac`` of the cell.

        ``cell`` may equal ``n_cells`` (last boundary, ``frac`` 0).  ``offset``
        shifts exterior labels, where the slope is zero.
        """
        cell = np.asarray(cell, dtype=int)
        frac = np.asarray(frac, dtype=float)
        m = self.n_cells
        jc = np.clip(cell, 0, max(m - 1, 0))
        inside = cell < m
        h = np.where(inside, self.widths[jc], 0.0) if m else np.zeros(cell.shape)
        du = np.where(inside, self.slopes[jc] * h, 0.0) if m else np.zeros(cell.shape)
        e = np.where(inside, self.energies[jc], 0.0) if m else np.zeros(cell.shape)
        x = self.positions[cell] + frac * h + offset
        u = self.values[cell] + frac * du
        F = self.cumulative[cell] + frac * e
        return x, u, F

    def energy_between(self, cell_a, frac_a, cell_b, frac_b, positive_only=False) -> float:
        """``int w^2`` (or ``int max(w,0)^2``) between two Lagrangian locations."""
        e = self.energies
        if positive_only:
            e = np.where(self.slopes > 0, e, 0.0)
        cum = np.concatenate(([0.0], np.cumsum(e)))
        m = self.n_cells

        def left_of(c, f):
            return cum[c] + (f * e[c] if c < m else 0.0)

        return float(left_of(cell_b, frac_b) - left_of(cell_a, frac_a))


ProfileOrFrame = Union[InitialProfile, Frame]


def eval_u(obj: ProfileOrFrame, x):
    """Evaluate the piecewise-linear ``u`` at ``x`` with constant tails."""
    x_arr = np.asarray(x, dtype=float)
    if isinstance(obj, InitialProfile):
        xp = np.asarray(obj.breakpoints)
        up = obj.values
        slopes = np.asarray(obj.slopes)
        widths = obj.widths
    else:
        xp, up, slopes, widths = obj.positions, obj.values, obj.slopes, obj.widths
    m = len(xp) - 1
    j = np.searchsorted(xp, x_arr, side="right") - 1
    jc = np.clip(j, 0, m - 1)
    local = up[jc] + np.where(widths[jc] > 0, slopes[jc], 0.0) * (x_arr - xp[jc])
    out = np.where(j < 0, up[0], np.where(j >= m, up[-1], local))
    return out if out.ndim else float(out)
