"""Classical potential-theory identities, bracketed: hitting probability,
sweeping, and the occupation-time Laplace functional right-hand side."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..lattice import SiteFunction, SiteSet, internal_boundary
from .equilibrium import EquilibriumMeasure, equilibrium, relative_equilibrium
from .green import GreenTable, green_table
from .solvers import SymmetricGreenKernels, hit_kernel_matrix


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    mid: float

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, v: float) -> bool:
        return self.lo <= v <= self.hi

    def gap_to(self, other: "Interval") -> float:
        return max(0.0, self.lo - other.hi, other.lo - self.hi)


def hitting_probability(x, em: EquilibriumMeasure, table: GreenTable = None) -> Interval:
    """P_x[H_A < infinity] = sum over y of g(x, y) e_A(y), with brackets."""
    if table is None:
        table = green_table(em.A.d)
    disp = np.asarray(x) - em.sites
    lo, hi, cal_lo, cal_hi, mid, coarse = table.bracket_array(disp)
    v_lo = float(np.dot(lo, em.weights_lo))
    v_hi = min(1.0, float(np.dot(hi, em.weights_hi)))
    v_mid = min(1.0, float(np.dot(mid, em.mid)))
    return Interval(v_lo, v_hi, v_mid)


@dataclass
class SweepingReport:
    """Verification of the sweeping identity for A inside A'."""

    sites: np.ndarray  # support of e_A
    lhs: list  # per-site Interval for e_A
    rhs: list  # per-site Interval for the swept measure
    central_discrepancy: float  # relative-identity mismatch, solver-level
    max_gap: float  # worst distance between the two intervals (0 = overlap)
    combined_width: float
    mass_lhs: "Interval"
    mass_rhs: "Interval"

    @property
    def passed(self) -> bool:
        return self.max_gap <= 1e-12 and self.central_discrepancy <= self.combined_width


def sweeping_check(A: SiteSet, Ap: SiteSet, margin: int = 64, table: GreenTable = None) -> SweepingReport:
    """e_A(x) versus the hitting-place distribution of e_{A'} (A inside A').

    Both sides are evaluated on one common killed domain, where the identity
    is exact for the killed chain (discrepancy at solver-residual level), and
    whole-space brackets are propagated around each side.
    """
    if not A.issubset(Ap):
        raise ValueError("sweeping check needs A contained in A'")
    d = A.d
    if table is None:
        table = green_table(d)
    pts = Ap.points()
    bound_lo = pts.min(axis=0)
    bound_hi = pts.max(axis=0)
    from ..lattice import BoxRegion

    U = BoxRegion(tuple(bound_lo), tuple(bound_hi - bound_lo + 1)).dilate(margin)
    relA = relative_equilibrium(A, U)
    relAp = relative_equilibrium(Ap, U)
    cap_hi_A = relA.capacity
    p_A = max(0.0, 1.0 - cap_hi_A * table.env_upper(margin))
    p_Ap = max(0.0, 1.0 - relAp.capacity * table.env_upper(margin))

    S_rel = relA.sites - np.asarray(U.lower)
    z_rel = relAp.sites - np.asarray(U.lower)
    kern = hit_kernel_matrix(tuple(U.side), S_rel, z_rel)  # (n_z, n_S)
    rhs_central = relAp.weights @ kern
    lhs_central = relA.weights
    central = float(np.max(np.abs(rhs_central - lhs_central)))

    # whole-space brackets: LHS in [p_A e_{A,U}, e_{A,U}];
    # RHS kernel in [k_U, k_U + q] with q the re-entry bound through dU
    q = cap_hi_A * table.env_upper(margin)
    rhs_lo = p_Ap * rhs_central
    rhs_hi = relAp.weights @ (kern + q)
    lhs = [Interval(p_A * v, v, v * (1 + p_A) / 2) for v in lhs_central]
    rhs = [
        Interval(float(l), float(h), float((l + h) / 2))
        for l, h in zip(rhs_lo, rhs_hi)
    ]
    gaps = [a.gap_to(b) for a, b in zip(lhs, rhs)]
    combined = max(
        (a.width + b.width) for a, b in zip(lhs, rhs)
    )
    mass_lhs = Interval(p_A * cap_hi_A, cap_hi_A, cap_hi_A * (1 + p_A) / 2)
    tot = float(rhs_central.sum())
    mass_rhs = Interval(p_Ap * tot, float(rhs_hi.sum()), tot)
    return SweepingReport(
        sites=relA.sites,
        lhs=lhs,
        rhs=rhs,
        central_discrepancy=central,
        max_gap=max(gaps),
        combined_width=combined,
        mass_lhs=mass_lhs,
        mass_rhs=mass_rhs,
    )


class SpectralConditionError(ValueError):
    def __init__(self, norm):
        self.norm = norm
        super().__init__(f"|GV|_inf = {norm:.6f} >= 1; Laplace functional diverges")


def laplace_rhs(V: SiteFunction, u: float, table: GreenTable = None, return_details: bool = False):
    """u <V, (I - GV)^{-1} 1> for finitely supported V with |GV|_inf < 1.

    The finite system f = 1 + G(V f) closes on supp(V) because V vanishes
    elsewhere; for the norm, G|V| is superharmonic and tends to zero, so its
    supremum over Z^d is attained on supp(V).
    """
    sites = V.support_points()
    vals = V.support_values()
    if len(sites) == 0:
        return (0.0, {}) if return_details else 0.0
    d = sites.shape[1]
    if table is None:
        table = green_table(d)
    n = len(sites)
    disp = (sites[:, None, :] - sites[None, :, :]).reshape(n * n, d)
    _, _, _, _, mid, _ = table.bracket_array(disp)
    G = mid.reshape(n, n)
    norm = float(np.max(G @ np.abs(vals)))
    if norm >= 1.0:
        raise SpectralConditionError(norm)
    f = np.linalg.solve(np.eye(n) - G * vals[None, :], np.ones(n))
    out = float(u * np.dot(vals, f))
    if return_details:
        return out, {"norm": norm, "f": f, "G": G}
    return out
