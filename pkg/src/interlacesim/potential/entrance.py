"""Entrance-law sandwiches and the exit-kernel factorization.

For a symmetric set A centered in a cube domain U, computes the exact killed
kernels

    out[y, z] = P_y[T_U < H-tilde_A, X_{T_U} = z]   (y in supp e_A, z in dU)
    in[z, y]  = P_z[H_A < H-tilde_{dU}, X_{H_A} = y]  (= out[y, z] by reversal)

and from them the two verification targets: the psi-ratio of the exit
factorization against e_A(y) P_0[X_{T_U} = z], and the deviation of the
normalized entrance laws from the normalized equilibrium measure.  Any walk
started beyond U and conditioned to enter through A has its entrance law
inside the convex hull of the normalized kernels, so the reported deviation
bounds the conditional-entrance deviation for every such starting point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..lattice import (
    BoxRegion,
    SiteSet,
    boundary,
    internal_boundary,
    label_components,
    neighbors as _neighbors,
)
from .equilibrium import EquilibriumMeasure, equilibrium
from .green import GreenTable, green_table
from .solvers import SymmetricGreenKernels


def face_triangle(side: int, d: int) -> np.ndarray:
    """Representative exit sites on the +axis0 face of a centered cube.

    Returns relative coordinates of interior-adjacent boundary sites
    z = (side, t_1, ..., t_{d-1}) reduced modulo the face stabilizer
    (transverse reflections and permutations): canonical offsets from the
    center, sorted.  Every (y, z) statistic invariant under the box group is
    exhausted by z in this set with y running over its full range.
    """
    c = (side - 1) / 2.0
    # canonical transverse coordinates: t >= center, sorted increasing offset
    offs = [t for t in range(side) if t >= c]
    reps = []
    if d == 2:
        for a in offs:
            reps.append((side, a))
    elif d == 3:
        for i, a in enumerate(offs):
            for b in offs[i:]:
                reps.append((side, a, b))
    else:
        def rec(prefix, start):
            if len(prefix) == d - 1:
                reps.append((side,) + tuple(prefix))
                return
            for k in range(start, len(offs)):
                rec(prefix + [offs[k]], k)
        rec([], 0)
    return np.array(reps, dtype=np.int64)


@dataclass
class EntranceKernels:
    A: SiteSet
    domain: BoxRegion
    supp_sites: np.ndarray          # absolute coordinates of supp(e_A)
    z_reps: np.ndarray              # representative exit sites (absolute)
    kernel: np.ndarray              # out[y, z] = in[z, y]
    exit_center: np.ndarray | None  # P_center[X_{T_U} = z] per z rep
    e_rel: np.ndarray               # e_{A,U}(y), exact
    em: EquilibriumMeasure          # whole-space measure with brackets

    def psi_matrix(self) -> np.ndarray:
        """psi[y, z] with out[y,z] = e_A(y) P_0[X=z] (1 + psi[y, z])."""
        denom = self.em.mid[:, None] * self.exit_center[None, :]
        psi = np.zeros_like(self.kernel)
        ok = denom > 0
        psi[ok] = self.kernel[ok] / denom[ok] - 1.0
        return psi

    def entrance_deviation(self) -> float:
        """max over (z, y) of |kernel-in(z, .)-normalized / e-bar_A - 1|."""
        colsum = self.kernel.sum(axis=0)
        ebar = self.em.normalized()
        dev = 0.0
        for j in np.flatnonzero(colsum > 0):
            ratio = self.kernel[:, j] / colsum[j] / ebar
            dev = max(dev, float(np.max(np.abs(ratio - 1.0))))
        return dev

    @property
    def e_rel_halfwidth(self) -> float:
        """Relative half-width of the e_A bracket feeding the ratios."""
        return (1.0 - self.em.p_lb) / 2.0


def centered_domain(A: SiteSet, radius: int) -> BoxRegion:
    """Cube around A's bounding box with matching center, margin >= radius."""
    pts = A.points()
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    if len(set(hi - lo)) != 1:
        raise ValueError("entrance kernels need a cubical A bounding box")
    return BoxRegion(tuple(lo - radius), tuple(hi - lo + 1 + 2 * radius))


def entrance_kernels(
    A: SiteSet,
    domain: BoxRegion,
    em: EquilibriumMeasure | None = None,
    with_center_exit: bool = True,
) -> EntranceKernels:
    """Exact exit/entrance kernels of the A <-> dU excursion geometry.

    domain must be a cube centered on A so the box symmetry group applies.
    """
    d = A.d
    shape = tuple(domain.side)
    if len(set(shape)) != 1:
        raise ValueError("domain must be a cube")
    side = shape[0]
    lower = np.asarray(domain.lower)

    S_abs = internal_boundary(A).points()
    shell_abs = boundary(A).points()
    S_rel = S_abs - lower
    shell_rel = shell_abs - lower
    if np.any(S_rel < 0) or np.any(S_rel >= side):
        raise ValueError("A not inside the domain")

    tri = face_triangle(side, d)           # z at axis0 == side (outside)
    w_rel = tri.copy()
    w_rel[:, 0] = side - 1                 # interior neighbor of each z

    center_rel = np.full(d, (side - 1) // 2, dtype=np.int64)
    has_center = with_center_exit and (side % 2 == 1)

    sources = [S_rel, shell_rel]
    if has_center:
        sources.append(center_rel[None, :])
    sources = np.concatenate(sources, axis=0)
    targets = np.concatenate([S_rel, shell_rel, w_rel], axis=0)

    kern = SymmetricGreenKernels(shape)
    Gmat = kern.matrix(sources, targets)
    nS, nSh, nW = len(S_rel), len(shell_rel), len(w_rel)
    G_S_S = Gmat[:nS, :nS]
    G_S_shell = Gmat[:nS, nS : nS + nSh]
    G_S_w = Gmat[:nS, nS + nSh :]
    G_shell_w = Gmat[nS : nS + nSh, nS + nSh :]
    if has_center:
        G_c_w = Gmat[-1, nS + nSh :]

    # killed-on-S corrections: g_{U \ S}(shell, w) and hit probabilities
    X = np.linalg.solve(G_S_S, G_S_w)                 # inv(G_SS) @ G_S_w
    G_killed_shell_w = G_shell_w - G_S_shell.T @ X
    hitprob_shell = G_S_shell.T @ np.linalg.solve(G_S_S, np.ones(nS))

    twod = 2.0 * d
    # out[y, z] = (1/2d) sum over outside-neighbors y' of y of
    #             g_{U\S}(y', w(z)) / 2d
    shell_index = {tuple(p): i for i, p in enumerate(shell_rel)}
    out = np.zeros((nS, nW))
    e_rel = np.zeros(nS)
    A_mask_lookup = A
    for i, y in enumerate(S_abs):
        acc = np.zeros(nW)
        esc = 0.0
        for yp in _neighbors(y):
            if yp in A_mask_lookup:
                continue
            j = shell_index.get(tuple(np.asarray(yp) - lower))
            if j is None:
                # neighbor outside the domain: direct exit; only possible when
                # A touches the boundary, which the geometry forbids
                raise ValueError("A touches the domain boundary")
            acc += G_killed_shell_w[j]
            esc += 1.0 - hitprob_shell[j]
        out[i] = acc / (twod * twod)
        e_rel[i] = esc / twod

    exit_c = G_c_w / twod if has_center else None

    if em is None:
        em = equilibrium(A)
    # align em.sites with S_abs ordering
    order = {tuple(p): i for i, p in enumerate(em.sites)}
    perm = np.array([order[tuple(p)] for p in S_abs])
    em_aligned = EquilibriumMeasure(
        A=em.A,
        sites=S_abs,
        weights_hi=em.weights_hi[perm],
        p_lb=em.p_lb,
        mid=em.mid[perm],
        cap=em.cap,
        solve_domain=em.solve_domain,
        flagged_coarse=em.flagged_coarse,
    )
    return EntranceKernels(
        A=A,
        domain=domain,
        supp_sites=S_abs,
        z_reps=tri + lower,
        kernel=out,
        exit_center=exit_c,
        e_rel=e_rel,
        em=em_aligned,
    )


@dataclass
class SandwichReport:
    K: int
    entrance_dev: float          # worst normalized-entrance deviation
    ratio_lo: float
    ratio_hi: float
    e_ratio_lo: float | None     # e_B(y)/e_B(A) vs e-bar_A, when B != A
    e_ratio_hi: float | None
    e_uncertainty: float
    delta: float
    passed: bool
    psi_max: float
    fitted_c: float              # psi_max * K


def entrance_sandwich_check(
    A: SiteSet,
    B_env: SiteSet | None,
    K: int,
    delta: float,
    L: int | None = None,
    table: GreenTable = None,
) -> SandwichReport:
    """Prop-1.5-style sandwich at scale K: entrance ratios within 1 +- delta/10.

    A must be centered and fit in a ball of radius L; the exit sphere is the
    cube of radius K*L around A.  When B_env strictly contains A, its
    complement must be connected (checked by flood fill on the enclosing
    window) and the equilibrium-restriction ratio e_B(y)/e_B(A) is bracketed
    as well.
    """
    d = A.d
    pts = A.points()
    if L is None:
        L = int(np.max(np.abs(pts)))
    # exit sphere = cube of half-width K*L around the center of A
    half = int(pts.max(axis=0)[0] - pts.min(axis=0)[0]) // 2
    margin = K * L - half
    if margin < 2:
        raise ValueError(f"K={K} too small for the set's extent")
    dom = centered_domain(A, margin)
    ek = entrance_kernels(A, dom)
    dev = ek.entrance_deviation()
    psi = ek.psi_matrix()
    psi_max = float(np.max(np.abs(psi)))
    ratio_lo, ratio_hi = 1.0 - dev, 1.0 + dev

    e_ratio_lo = e_ratio_hi = None
    b_is_a = B_env is None or (
        set(map(tuple, B_env.points())) == set(map(tuple, A.points()))
    )
    if not b_is_a:
        win = B_env.window
        A_in_win = SiteSet.from_points(win, A.points())
        if not A_in_win.issubset(B_env):
            raise ValueError("B_env must contain A")
        _check_complement_connected(B_env)
        e_ratio_lo, e_ratio_hi = _restriction_ratio_bracket(A, B_env, ek, table)
        ratio_lo = min(ratio_lo, e_ratio_lo)
        ratio_hi = max(ratio_hi, e_ratio_hi)

    slack = ek.e_rel_halfwidth
    tol = delta / 10.0
    passed = (ratio_hi - 1.0) + slack <= tol and (1.0 - ratio_lo) + slack <= tol
    return SandwichReport(
        K=K,
        entrance_dev=dev,
        ratio_lo=ratio_lo,
        ratio_hi=ratio_hi,
        e_ratio_lo=e_ratio_lo,
        e_ratio_hi=e_ratio_hi,
        e_uncertainty=slack,
        delta=delta,
        passed=passed,
        psi_max=psi_max,
        fitted_c=psi_max * K,
    )


def _check_complement_connected(B_env: SiteSet):
    win = B_env.window.dilate(1)
    comp = SiteSet.from_box(win, win).difference(
        SiteSet(win, np.pad(B_env.mask, 1, constant_values=False))
    )
    _, n = label_components(comp)
    if n != 1:
        raise ValueError("complement of B_env is not connected on the window")


def _restriction_ratio_bracket(A, B_env, ek, table):
    """Bracket e_B(y)/e_B(A) against e-bar_A(y) via leak bounds."""
    d = A.d
    if table is None:
        table = green_table(d)
    far = B_env.difference(A)
    far_pts = far.points()
    if len(far_pts) == 0:
        return 1.0, 1.0
    em_far = equilibrium(far, tol=0.2)
    # leak(y) <= P_y[escape A locally, then hit far part]
    dmin = np.array(
        [np.abs(far_pts - y).max(axis=1).min() for y in ek.supp_sites],
        dtype=float,
    )
    leak = ek.e_rel * em_far.cap.hi * np.array([table.env_upper(r) for r in dmin])
    e_hi = ek.em.weights_hi
    e_lo = np.maximum(ek.em.weights_lo - leak, 0.0)
    tot_hi = e_hi.sum()
    tot_lo = e_lo.sum()
    ebar = ek.em.normalized()
    r_lo = float(np.min((e_lo / tot_hi) / ebar))
    r_hi = float(np.max((e_hi / tot_lo) / ebar))
    return r_lo, r_hi
