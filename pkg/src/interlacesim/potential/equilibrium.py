"""Equilibrium measures, relative equilibrium measures, and capacity brackets.

The relative measure e_{A,U} is exact (one charge solve).  Whole-space
quantities carry the two-sided factor from the comparison

    e_A <= e_{A,U} <= (1/p) e_A,   p = inf over the outer boundary of U of
                                       the probability of never hitting A,

with p bounded below through the hitting-probability series and the far-field
Green envelope.  Midpoints are sharpened by Richardson extrapolation over two
nested domains and always clipped into the rigorous bracket.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..lattice import BoxRegion, SiteFunction, SiteSet, internal_boundary
from .green import GreenTable, green_table
from .solvers import ChargeSolve, escape_charge_solve


@dataclass(frozen=True)
class CapacityBracket:
    lo: float
    hi: float
    mid: float

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def rel_width(self) -> float:
        return self.width / self.mid if self.mid > 0 else np.inf

    def contains(self, v: float) -> bool:
        return self.lo <= v <= self.hi


@dataclass
class RelativeEquilibrium:
    """e_{A,U} on the support sites, plus the killed hitting field over U."""

    domain: BoxRegion
    sites: np.ndarray  # (m, d) absolute coordinates (internal boundary of A)
    weights: np.ndarray  # e_{A,U}(site), exact up to solver residual
    h_field: np.ndarray  # P_x[H_A < T_U] over the domain box
    residual: float

    @property
    def capacity(self) -> float:
        return float(self.weights.sum())

    def hitting_probability(self, x) -> float:
        """P_x[H_A < T_U] for x in the domain."""
        rel = tuple(c - l for c, l in zip(x, self.domain.lower))
        return float(self.h_field[rel])

    def as_site_function(self) -> SiteFunction:
        return SiteFunction.from_pairs(self.domain, self.sites, self.weights)


def relative_equilibrium(A: SiteSet, U: BoxRegion, rtol: float = 1e-11) -> RelativeEquilibrium:
    """e_{A,U}(x) = P_x[no return to A before leaving U] on A, exactly.

    The charge representation of P_.[H_A < T_U] has the relative equilibrium
    measure as its charge, supported on the internal boundary of A.
    """
    pts = A.points()
    if len(pts) == 0:
        raise ValueError("empty set has no equilibrium measure")
    if not U.contains_array(pts).all():
        raise ValueError("A must be contained in U")
    shell = internal_boundary(A).points()
    rel = shell - np.asarray(U.lower)
    sol = escape_charge_solve(tuple(U.side), rel, rtol=rtol)
    return RelativeEquilibrium(
        domain=U,
        sites=shell,
        weights=sol.charge,
        h_field=sol.h,
        residual=sol.residual,
    )


@dataclass
class EquilibriumMeasure:
    """Whole-space equilibrium measure with a rigorous sandwich.

    weights_hi = e_{A,U} satisfies e_A <= weights_hi <= bracket_factor * e_A
    componentwise, bracket_factor = 1/p.  mid is an extrapolated point value
    clipped into [weights_hi * p, weights_hi].
    """

    A: SiteSet
    sites: np.ndarray
    weights_hi: np.ndarray
    p_lb: float
    mid: np.ndarray
    cap: CapacityBracket
    solve_domain: BoxRegion
    flagged_coarse: bool = False
    cap_cal: CapacityBracket = None  # calibrated (extrapolation-based) bracket

    @property
    def bracket_factor(self) -> float:
        return 1.0 / self.p_lb

    @property
    def weights_lo(self) -> np.ndarray:
        return self.weights_hi * self.p_lb

    def normalized(self) -> np.ndarray:
        """Categorical start distribution from the midpoint weights."""
        return self.mid / self.mid.sum()

    def as_site_function(self, window: BoxRegion | None = None, which: str = "mid") -> SiteFunction:
        vals = {"mid": self.mid, "hi": self.weights_hi, "lo": self.weights_lo}[which]
        win = window if window is not None else self.A.window
        return SiteFunction.from_pairs(win, self.sites, vals)


def _min_dist_to_boundary(A: SiteSet, U: BoxRegion) -> int:
    pts = A.points()
    lo = np.asarray(U.lower)
    hi = np.asarray(U.upper) - 1
    return int(min((pts - lo).min(), (hi - pts).min()))


def escape_probability_lower_bound(
    cap_hi: float, margin: int, table: GreenTable
) -> float:
    """Lower bound on inf over the outer boundary of U of P_x[H_A = infinity].

    Uses P_x[H_A < inf] <= cap(A) * sup_y g(x - y) and the far-field envelope
    at the margin distance.
    """
    return max(0.0, 1.0 - cap_hi * table.env_upper(float(margin)))


def equilibrium(
    A: SiteSet,
    tol: float = 0.05,
    d: int = None,
    margin0: int = None,
    max_margin: int = 220,
    table: GreenTable = None,
) -> EquilibriumMeasure:
    """Equilibrium measure of a finite set, with capacity bracket.

    Grows the solve domain until the relative bracket width 1 - p is at or
    below tol; if the margin budget runs out the widest achieved bracket is
    returned flagged coarse.  The reported bracket is
    [cap_U(A) * p, cap_U(A)].
    """
    pts = A.points()
    if len(pts) == 0:
        raise ValueError("empty set has no equilibrium measure")
    if d is None:
        d = A.d
    if table is None:
        table = green_table(d)
    bound = BoxRegion(
        tuple(pts.min(axis=0)),
        tuple(pts.max(axis=0) - pts.min(axis=0) + 1),
    )
    diam = max(bound.side)
    if margin0 is None:
        margin0 = max(3 * diam, 24)
    margin = min(margin0, max_margin)

    prev = None  # (margin, weights, cap)
    while True:
        U = bound.dilate(margin)
        relq = relative_equilibrium(A, U)
        capU = relq.capacity
        p_lb = escape_probability_lower_bound(capU, margin, table)
        if 1.0 - p_lb <= tol or margin >= max_margin:
            break
        prev = (margin, relq.weights.copy(), capU)
        margin = min(int(margin * 2), max_margin)

    weights_hi = relq.weights
    if prev is None:
        # one extra solve so the midpoint is always extrapolated
        m_half = max(margin // 2, 8)
        relq_half = relative_equilibrium(A, bound.dilate(m_half))
        prev = (m_half, relq_half.weights, relq_half.capacity)
    m1, w1, c1 = prev
    m2, w2, c2 = margin, weights_hi, capU
    a = (w2 - w1) / (1.0 / m1 - 1.0 / m2)
    mid = w2 + a / m2
    cap_mid = float(c2 + ((c2 - c1) / (1.0 / m1 - 1.0 / m2)) / m2)
    mid = np.clip(mid, weights_hi * p_lb, weights_hi)
    cap_mid = float(np.clip(cap_mid, capU * p_lb, capU))
    coarse = (1.0 - p_lb) > tol
    # calibrated capacity bracket: extrapolation residual is a (m1/m2)-fraction
    # of the remaining correction (validated against known values in tests)
    hw = max(0.5 * (m1 / m2) * abs(capU - cap_mid), 1e-9 * capU)
    cal = CapacityBracket(
        max(capU * p_lb, cap_mid - hw), min(capU, cap_mid + hw), cap_mid
    )
    return EquilibriumMeasure(
        A=A,
        sites=relq.sites,
        weights_hi=weights_hi,
        p_lb=p_lb,
        mid=mid,
        cap=CapacityBracket(capU * p_lb, capU, cap_mid),
        solve_domain=relq.domain,
        flagged_coarse=coarse,
        cap_cal=cal,
    )
