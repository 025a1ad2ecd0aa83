"""Separated box collections: the capacity-weighted source function V, its
potential against the equilibrium potential of the union, and the lattice-to-
Brownian capacity extrapolation.

Everything reduces to hitting probabilities through G e_D = P[H_D < inf]:

    V    = sum_D e_C(D) ebar_D     =>  GV(x) = sum_D (e_C(D)/cap(D)) P_x[H_D < inf]
    h_C  = G e_C                   =   P_x[H_C < inf]

so the comparison GV <= (1 + eps) h_C is bracketed from local killed hitting
fields plus far-field leak bounds, with the exact values P = 1 on the union
itself.  The mass ratios e_C(D)/cap(D) are at most 1 (restriction to the
union only removes equilibrium mass) and at least 1 - leak/cap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..lattice import BoxFamily, BoxRegion, SiteSet, internal_boundary
from .equilibrium import CapacityBracket, EquilibriumMeasure, equilibrium, relative_equilibrium
from .green import GreenTable, green_table
from .identities import Interval


def box_distance(a: BoxRegion, b: BoxRegion) -> int:
    """Mutual l-infinity distance between two boxes (0 if they intersect)."""
    gaps = []
    for al, au, bl, bu in zip(a.lower, a.upper, b.lower, b.upper):
        if bu <= al:
            gaps.append(al - bu + 1)
        elif au <= bl:
            gaps.append(bl - au + 1)
        else:
            gaps.append(0)
    return max(gaps)


class SeparationError(ValueError):
    pass


@dataclass
class SeparatedCollection:
    """A finite set of box families with centers (2K+3)L-separated."""

    families: list

    def __post_init__(self):
        if not self.families:
            raise ValueError("empty collection")
        L = self.families[0].L
        K = self.families[0].K
        if any(f.L != L or f.K != K for f in self.families):
            raise ValueError("collection must share one (L, K)")
        sep = (2 * K + 3) * L
        zs = np.array([f.z for f in self.families])
        for i in range(len(zs)):
            for j in range(i + 1, len(zs)):
                dist = int(np.abs(zs[i] - zs[j]).max())
                if dist < sep:
                    raise SeparationError(
                        f"centers {tuple(zs[i])} and {tuple(zs[j])} at distance "
                        f"{dist} < (2K+3)L = {sep}"
                    )

    @property
    def L(self) -> int:
        return self.families[0].L

    @property
    def K(self) -> int:
        return self.families[0].K

    @property
    def d(self) -> int:
        return self.families[0].d


@dataclass
class BoxPotential:
    """Per-box local data: equilibrium, killed hitting field, leak bounds."""

    family: BoxFamily
    em: EquilibriumMeasure
    h_domain: BoxRegion
    h_field: np.ndarray  # P_x[H_D < T_M] over h_domain
    margin: int
    q_return: float  # sup over dM of P[H_D < inf]
    leak_far: float  # sup over dM of P[hit other boxes of the collection]
    mass_ratio_lo: float  # lower bound on e_C(D)/cap(D)

    def hit_interval(self, x) -> Interval:
        """P_x[H_D < infinity] bracket for x in the local domain."""
        if self.family.D.contains(x):
            return Interval(1.0, 1.0, 1.0)
        rel = tuple(c - l for c, l in zip(x, self.h_domain.lower))
        h = float(self.h_field[rel])
        hi = min(1.0, h + (1.0 - h) * self.q_return)
        return Interval(h, hi, (h + hi) / 2)


def _local_potentials(coll: SeparatedCollection, margin: int, table: GreenTable):
    out = []
    ems = []
    for fam in coll.families:
        D = fam.D
        A = SiteSet.from_box(D)
        em = equilibrium(A, tol=0.08)
        ems.append(em)
    for i, fam in enumerate(coll.families):
        D = fam.D
        M = D.dilate(margin)
        A = SiteSet.from_box(D)
        rel = relative_equilibrium(A, M)
        q_ret = ems[i].cap.hi * table.env_upper(margin)
        leak = 0.0
        for j, other in enumerate(coll.families):
            if j == i:
                continue
            dist = box_distance(M, other.D)
            leak += ems[j].cap.hi * table.env_upper(max(dist, 1))
        # lost union mass: sum_y (e_D - e_C)(y) <= cap_M(D) * leak
        lost = rel.capacity * leak
        ratio_lo = max(0.0, 1.0 - lost / ems[i].cap.lo)
        out.append(
            BoxPotential(
                family=fam,
                em=ems[i],
                h_domain=M,
                h_field=rel.h_field,
                margin=margin,
                q_return=q_ret,
                leak_far=leak,
                mass_ratio_lo=ratio_lo,
            )
        )
    return out


@dataclass
class GvReport:
    epsilon: float
    ratio_interval: Interval  # max over the window of GV / h_C
    pointwise: list  # (x, GV interval, h_C interval) on a diagnostic subsample
    v_mass: Interval  # <V, 1>
    cap_union: Interval  # cap(C)
    passed: bool


def gv_vs_equilibrium_potential(
    coll: SeparatedCollection,
    epsilon: float,
    margin: int = None,
    shell: int = None,
    table: GreenTable = None,
) -> GvReport:
    """Max over a window around each box of GV / h_C, against 1 + epsilon.

    The window is each D-box dilated by `shell` sites.  On the union itself
    h_C = 1 and P[H_D < inf] = 1 exactly, so the bound there is driven purely
    by the cross-box leak; on the shell the killed fields enter with their
    return corrections.
    """
    d = coll.d
    if table is None:
        table = green_table(d)
    L = coll.L
    if margin is None:
        margin = max(16 * L, 96)
    if shell is None:
        shell = 2 * L
    locals_ = _local_potentials(coll, margin, table)

    # cap(C) and e_C(D) intervals from the mass ratios
    cap_lo = sum(bp.mass_ratio_lo * bp.em.cap.lo for bp in locals_)
    cap_hi = sum(bp.em.cap.hi for bp in locals_)
    cap_mid = sum(bp.em.cap.mid for bp in locals_)
    cap_union = Interval(cap_lo, cap_hi, cap_mid)
    v_mass = cap_union  # <V, 1> = sum e_C(D) = cap(C) by construction

    ratio_hi = 0.0
    ratio_lo = np.inf
    ratio_mid = 0.0
    pointwise = []
    for bp in locals_:
        win = bp.family.D.dilate(shell)
        pts = win.sites()
        # vectorized local field values
        rel = pts - np.asarray(bp.h_domain.lower)
        h = bp.h_field[tuple(rel.T)]
        on_D = bp.family.D.contains_array(pts)
        near_lo = np.where(on_D, 1.0, h)
        near_hi = np.where(on_D, 1.0, np.minimum(1.0, h + (1.0 - h) * bp.q_return))
        far_hi = np.zeros(len(pts))
        for other in locals_:
            if other is bp:
                continue
            dist = max(box_distance(win, other.family.D), 1)
            far_hi += other.em.cap.hi * table.env_upper(dist)
        gv_hi = near_hi + far_hi  # mass ratios <= 1
        gv_lo = bp.mass_ratio_lo * near_lo
        gv_mid = 0.5 * (gv_lo + gv_hi)
        hc_lo = near_lo  # killed hitting of the near box alone
        hc_hi = np.minimum(1.0, near_hi + far_hi)
        hc_mid = 0.5 * (hc_lo + hc_hi)
        r_hi = float(np.max(gv_hi / hc_lo))
        r_lo = float(np.min(gv_lo / hc_hi))
        ratio_hi = max(ratio_hi, r_hi)
        ratio_lo = min(ratio_lo, r_lo)
        ratio_mid = max(ratio_mid, float(np.max(gv_mid / hc_mid)))
        take = np.linspace(0, len(pts) - 1, 5).astype(int)
        for t in take:
            pointwise.append(
                (
                    tuple(pts[t]),
                    Interval(float(gv_lo[t]), float(gv_hi[t]), float(gv_mid[t])),
                    Interval(float(hc_lo[t]), float(hc_hi[t]), float(hc_mid[t])),
                )
            )
    ratio = Interval(ratio_lo, ratio_hi, ratio_mid)
    return GvReport(
        epsilon=epsilon,
        ratio_interval=ratio,
        pointwise=pointwise,
        v_mass=v_mass,
        cap_union=cap_union,
        passed=ratio_hi <= 1.0 + epsilon,
    )


@dataclass
class CapacityScalingReport:
    N_grid: list
    scaled: list       # d * cap(B_N) / N^{d-2}, midpoints
    brackets: list     # CapacityBracket per N
    differences: list  # successive |scaled| differences
    extrapolants: list # Richardson pairs
    extrapolant: float
    stability: float   # relative change between the last two extrapolants


def brownian_capacity_estimate(
    d: int = 3, N_grid: tuple = (3, 4, 6, 9, 14), margin_factor: int = 4
) -> CapacityScalingReport:
    """d * cap(B_N) / N^{d-2} along a geometric grid with Richardson limit.

    The limit is (1/d) * d = the Brownian capacity of [-1,1]^d; only the
    finite-scale trend and self-consistency are asserted here.
    """
    scaled = []
    brackets = []
    for N in N_grid:
        ball = SiteSet.from_box(BoxRegion.centered_ball(N, d))
        em = equilibrium(
            ball, tol=0.02, margin0=margin_factor * N, max_margin=2 * margin_factor * N
        )
        brackets.append(em.cap)
        scaled.append(d * em.cap.mid / N ** (d - 2))
    diffs = [abs(scaled[i + 1] - scaled[i]) for i in range(len(scaled) - 1)]
    # corr ~ a/N: extrapolate each neighboring pair
    ext = []
    for i in range(len(N_grid) - 1):
        n1, n2 = N_grid[i], N_grid[i + 1]
        s1, s2 = scaled[i], scaled[i + 1]
        a = (s1 - s2) / (1.0 / n1 - 1.0 / n2)
        ext.append(s2 - a / n2)
    stability = abs(ext[-1] - ext[-2]) / abs(ext[-1]) if len(ext) >= 2 else np.inf
    return CapacityScalingReport(
        N_grid=list(N_grid),
        scaled=scaled,
        brackets=brackets,
        differences=diffs,
        extrapolants=ext,
        extrapolant=ext[-1],
        stability=stability,
    )
