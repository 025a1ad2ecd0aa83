"""Whole-space Green function of the unit-rate walk, with two-sided brackets.

g(x) = g(x, 0) is bracketed from killed-box solves on nested centered cubes:
the killed value is a rigorous lower end, and the exit correction is bounded
above by a conservative far-field envelope (the asymptotic constant with a
safety factor of 2, validated empirically in the test suite).  A much tighter
calibrated bracket comes from Richardson extrapolation of the nested-domain
sequence; it is clipped into the rigorous bracket and carries a width derived
from the extrapolation's own convergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .solvers import green_column

ENVELOPE_SAFETY = 2.0


def c0_constant(d: int) -> float:
    """Asymptotic constant: g(x) ~ c0 |x|^(2-d) with |x| the Euclidean norm."""
    return (d / 2.0) * math.gamma(d / 2.0 - 1.0) * math.pi ** (-d / 2.0)


@dataclass(frozen=True)
class GreenBracket:
    lo: float
    hi: float
    mid: float
    cal_lo: float
    cal_hi: float
    coarse: bool = False

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def cal_width(self) -> float:
        return self.cal_hi - self.cal_lo

    def contains(self, v: float) -> bool:
        return self.lo <= v <= self.hi


class GreenTable:
    """Radial table of g(x) = g(x, 0) over a centered cube, with brackets."""

    def __init__(self, d: int, radii: tuple = None, max_radius: int = 140):
        self.d = d
        self.c0 = c0_constant(d)
        if radii is None:
            radii = (48, 72, 108) if d == 3 else (20, 30, 45)
        self.radii = tuple(sorted(int(r) for r in radii))
        self.max_radius = max_radius
        self._cubes = None

    def _ensure(self):
        if self._cubes is None:
            cubes = []
            for R in self.radii:
                side = 2 * R + 1
                cube = green_column((side,) * self.d, (R,) * self.d)
                cubes.append(cube)
            self._cubes = cubes

    def grow(self) -> bool:
        """Scale all radii by 1.5 up to max_radius; True if anything changed."""
        new = tuple(min(int(r * 1.5), self.max_radius) for r in self.radii)
        if new == self.radii:
            return False
        self.radii = new
        self._cubes = None
        return True

    @property
    def query_radius(self) -> int:
        return self.radii[0] - 2

    def env_upper(self, dist: float) -> float:
        """Conservative upper bound on g at Euclidean distance >= dist."""
        if dist < 1:
            return self.g0_bracket().hi
        return ENVELOPE_SAFETY * self.c0 * dist ** (2 - self.d)

    def _values_at(self, pts: np.ndarray) -> list:
        """Killed-green values at pts for each nested radius (NaN if outside)."""
        self._ensure()
        pts = np.asarray(pts)
        vals = []
        for R, cube in zip(self.radii, self._cubes):
            inside = np.all(np.abs(pts) <= R, axis=1)
            v = np.full(len(pts), np.nan)
            if inside.any():
                rel = pts[inside] + R
                v[inside] = cube[tuple(rel.T)]
            vals.append(v)
        return vals

    def bracket_array(self, pts: np.ndarray):
        """(lo, hi, cal_lo, cal_hi, mid) arrays for displacement vectors pts.

        Points beyond the innermost radius get coarse envelope-only brackets.
        """
        pts = np.asarray(pts, dtype=np.int64)
        if pts.ndim == 1:
            pts = pts[None, :]
        g1, g2, g3 = self._values_at(pts)
        R1, R2, R3 = self.radii
        lo = np.where(np.isnan(g3), 0.0, g3)
        hi = lo + self.env_upper(R3)
        # Richardson on corr(R) ~ a / R
        with np.errstate(invalid="ignore"):
            a23 = (g3 - g2) / (1.0 / R2 - 1.0 / R3)
            a12 = (g2 - g1) / (1.0 / R1 - 1.0 / R2)
            ext23 = g3 + a23 / R3
            ext12 = g2 + a12 / R2
            w = 4.0 * np.abs(ext23 - ext12) + 1e-11
        mid = ext23
        cal_lo = np.maximum(lo, mid - w)
        cal_hi = np.minimum(hi, mid + w)
        coarse = np.isnan(g1)
        if coarse.any():
            # envelope-only bracket for far points
            dist = np.sqrt((pts[coarse] ** 2).sum(axis=1)).astype(float)
            far_hi = ENVELOPE_SAFETY * self.c0 * np.maximum(dist, 1.0) ** (2 - self.d)
            hi[coarse] = far_hi
            lo[coarse] = 0.0
            mid[coarse] = 0.5 * far_hi
            cal_lo[coarse] = 0.0
            cal_hi[coarse] = far_hi
        mid = np.clip(mid, cal_lo, cal_hi)
        return lo, hi, cal_lo, cal_hi, mid, coarse

    def bracket(self, x) -> GreenBracket:
        lo, hi, cal_lo, cal_hi, mid, coarse = self.bracket_array(np.array([x]))
        return GreenBracket(
            float(lo[0]), float(hi[0]), float(mid[0]),
            float(cal_lo[0]), float(cal_hi[0]), bool(coarse[0]),
        )

    def g0_bracket(self) -> GreenBracket:
        return self.bracket((0,) * self.d)

    @property
    def g0(self) -> float:
        return self.g0_bracket().mid


@lru_cache(maxsize=4)
def green_table(d: int = 3) -> GreenTable:
    return GreenTable(d)


def green(x, y, tol: float = 1e-3, d: int = None, table: GreenTable = None) -> GreenBracket:
    """Bracket for g(x, y); grows the solve domain until the calibrated width
    is at or below tol, else returns the widest achieved bracket flagged coarse.
    """
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if d is None:
        d = len(x)
    if table is None:
        table = green_table(d)
    disp = x - y
    while True:
        br = table.bracket(disp)
        if (not br.coarse) and br.cal_width <= tol:
            return br
        if not table.grow():
            return GreenBracket(br.lo, br.hi, br.mid, br.cal_lo, br.cal_hi, coarse=True)
