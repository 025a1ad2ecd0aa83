"""Dirichlet solvers for the unit-rate walk generator on boxes.

The generator equation solved throughout is

    (I - P) f = b   on the box,  f = 0 outside,

with P the nearest-neighbor transition matrix (1/2d per neighbor).  On a full
box this diagonalizes in the sine basis and is solved by fast DST; killed
holes inside the box are handled by a charge (capacitance) representation:
P_x[H_S < T_W] = sum_s q(s) g_W(x, s) with G_SS q = 1, so one conjugate
gradient run in charge space (each matvec = one DST solve) replaces a huge
masked solve.

Symmetry-orbit helpers exploit the hyperoctahedral symmetry of centered cubes
to cut the number of Green-column solves by up to a factor 2^d d!.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft


# -- DST solve on a full box --------------------------------------------------


def _dirichlet_eigenvalues(shape: tuple) -> np.ndarray:
    d = len(shape)
    mu = None
    for axis, n in enumerate(shape):
        lam = 1.0 - np.cos(np.pi * np.arange(1, n + 1) / (n + 1))
        view = [None] * d
        view[axis] = slice(None)
        lam = lam[tuple(view)]
        mu = lam if mu is None else mu + lam
    return mu / d


_EIG_CACHE: dict = {}


def dst_dirichlet_solve(rhs: np.ndarray) -> np.ndarray:
    """Solve (I - P) f = rhs on the box with zero exterior data."""
    shape = rhs.shape
    if shape not in _EIG_CACHE:
        _EIG_CACHE[shape] = _dirichlet_eigenvalues(shape)
        if len(_EIG_CACHE) > 8:
            # drop the smallest cached spectra; large ones are the costly part
            for k in sorted(_EIG_CACHE, key=lambda s: np.prod(s))[:2]:
                if k != shape:
                    del _EIG_CACHE[k]
    mu = _EIG_CACHE[shape]
    fhat = sfft.dstn(rhs, type=1, norm="ortho")
    fhat /= mu
    return sfft.idstn(fhat, type=1, norm="ortho", overwrite_x=True)


def green_column(shape: tuple, src_rel) -> np.ndarray:
    """g_W(src, .) over the box (expected occupation times; unit mean holds)."""
    rhs = np.zeros(shape)
    rhs[tuple(int(c) for c in src_rel)] = 1.0
    return dst_dirichlet_solve(rhs)


# -- box symmetry group -------------------------------------------------------


def box_group(shape: tuple) -> list:
    """Symmetries of a box: axis permutations among equal sides x per-axis flips.

    Elements are (perm, flips); they act on relative coordinates by
    x -> flip(perm^{-1}-gather), with flip_a(x) = side_a - 1 - x.
    """
    d = len(shape)
    elems = []
    for perm in itertools.permutations(range(d)):
        if any(shape[perm[a]] != shape[a] for a in range(d)):
            continue
        for flips in itertools.product((False, True), repeat=d):
            elems.append((perm, flips))
    return elems


def apply_group_element(elem, pts: np.ndarray, shape: tuple) -> np.ndarray:
    """Apply a group element to (n, d) relative coordinates."""
    perm, flips = elem
    out = pts[:, list(perm)].copy()
    for a in range(len(shape)):
        if flips[a]:
            out[:, a] = shape[a] - 1 - out[:, a]
    return out


def inverse_element(elem, shape: tuple):
    perm, flips = elem
    d = len(perm)
    inv_perm = [0] * d
    for i, p in enumerate(perm):
        inv_perm[p] = i
    inv_flips = tuple(flips[inv_perm[a]] for a in range(d))
    return (tuple(inv_perm), inv_flips)


@dataclass
class OrbitIndex:
    """Orbit decomposition of a point list under the box group."""

    reps: np.ndarray  # (r, d) representative relative coordinates
    rep_of: np.ndarray  # (n,) index into reps for each input point
    elem_of: np.ndarray  # (n,) index into group: pts[i] = elem(group[elem_of[i]], reps[rep_of[i]])


def _group_inverse_index(group: list, shape: tuple) -> np.ndarray:
    lookup = {g: k for k, g in enumerate(group)}
    return np.array([lookup[inverse_element(g, shape)] for g in group])


def orbit_decompose(pts: np.ndarray, shape: tuple, group: list | None = None) -> OrbitIndex:
    if group is None:
        group = box_group(shape)
    pts = np.asarray(pts, dtype=np.int64)
    n, d = pts.shape
    images = np.stack(
        [apply_group_element(g, pts, shape) for g in group], axis=0
    )  # (|G|, n, d)
    mults = np.ones(d, dtype=np.int64)
    for a in range(d - 2, -1, -1):
        mults[a] = mults[a + 1] * shape[a + 1]
    codes = (images * mults).sum(axis=2)  # (|G|, n)
    gi0 = codes.argmin(axis=0)
    rep_codes = codes.min(axis=0)
    uniq_codes, first_idx, rep_of = np.unique(
        rep_codes, return_index=True, return_inverse=True
    )
    reps = images[gi0[first_idx], first_idx]  # (r, d)
    # group[gi0[i]] maps pts[i] to its representative, so the inverse maps back
    inv_idx = _group_inverse_index(group, shape)
    elem_of = inv_idx[gi0]
    return OrbitIndex(reps, rep_of.astype(np.int64), elem_of.astype(np.int64))


class SymmetricGreenKernels:
    """Assembled Green matrices g_W(sources, targets) on a box, orbit-reduced.

    Solves one DST system per source orbit representative and reads values for
    a non-representative source through the group action.  Target sets are
    closed under the group internally, so callers may pass any target list.
    """

    def __init__(self, shape: tuple):
        self.shape = tuple(int(s) for s in shape)
        self.group = box_group(self.shape)
        self._cubes: dict = {}

    def _flat(self, pts: np.ndarray) -> np.ndarray:
        return np.ravel_multi_index(np.asarray(pts).T, self.shape)

    def matrix(self, sources: np.ndarray, targets: np.ndarray) -> np.ndarray:
        """Dense (len(sources), len(targets)) matrix of g_W values.

        g_W(g(rep), t) = g_W(rep, g^{-1}(t)); peak memory is one box cube at a
        time plus the result.
        """
        sources = np.asarray(sources)
        targets = np.asarray(targets)
        oi = orbit_decompose(sources, self.shape, self.group)
        out = np.empty((len(sources), len(targets)))
        back_cache: dict = {}
        for gi in np.unique(oi.elem_of):
            ginv = inverse_element(self.group[gi], self.shape)
            back = apply_group_element(ginv, targets, self.shape)
            back_cache[gi] = np.ravel_multi_index(back.T, self.shape)
        for r in range(len(oi.reps)):
            cube = green_column(self.shape, oi.reps[r]).ravel()
            for i in np.flatnonzero(oi.rep_of == r):
                out[i] = cube[back_cache[oi.elem_of[i]]]
            del cube
        return out


# -- charge (capacitance) solves ---------------------------------------------


@dataclass
class ChargeSolve:
    """P_x[H_S < T_W] everywhere, as h = sum_s q(s) g_W(., s)."""

    h: np.ndarray  # cube over the box, values in [0, 1], == 1 on S
    charge: np.ndarray  # q over S sites (nonnegative); sum(q) = cap_W(S)
    sites_rel: np.ndarray
    residual: float
    iterations: int


def escape_charge_solve(
    shape: tuple,
    hole_rel: np.ndarray,
    rtol: float = 1e-11,
    max_iter: int = 400,
) -> ChargeSolve:
    """Hitting probability of a killed hole inside a Dirichlet box.

    Solves G_SS q = 1 by conjugate gradients where each matvec is one DST
    solve of the full box; returns h = G_W q.  cap_W(S) = sum q.
    """
    hole_rel = np.asarray(hole_rel)
    m = len(hole_rel)
    flat = np.ravel_multi_index(hole_rel.T, shape)

    def matvec(v: np.ndarray) -> np.ndarray:
        rhs = np.zeros(shape)
        rhs.ravel()[flat] = v
        cube = dst_dirichlet_solve(rhs)
        return cube.ravel()[flat]

    b = np.ones(m)
    q = np.zeros(m)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    b_norm = float(np.sqrt(rs))
    it = 0
    for it in range(1, max_iter + 1):
        Ap = matvec(p)
        alpha = rs / float(p @ Ap)
        q += alpha * p
        r -= alpha * Ap
        rs_new = float(r @ r)
        if np.sqrt(rs_new) <= rtol * b_norm:
            rs = rs_new
            break
        p = r + (rs_new / rs) * p
        rs = rs_new
    rhs = np.zeros(shape)
    rhs.ravel()[flat] = q
    h = dst_dirichlet_solve(rhs)
    # exact interpolation on the hole; clamp tiny numerical overshoot elsewhere
    h.ravel()[flat] = 1.0
    np.clip(h, 0.0, 1.0, out=h)
    return ChargeSolve(
        h=h,
        charge=q,
        sites_rel=hole_rel,
        residual=float(np.sqrt(rs)) / b_norm,
        iterations=it,
    )


def hit_kernel_matrix(
    shape: tuple,
    hole_rel: np.ndarray,
    eval_rel: np.ndarray,
    kernels: SymmetricGreenKernels | None = None,
) -> np.ndarray:
    """P_x[H_S < T_W, X_{H_S} = s] for x in eval_rel, s in hole_rel.

    Dense capacitance form g_W(x, S) @ inv(G_SS); meant for small holes.
    """
    if kernels is None:
        kernels = SymmetricGreenKernels(shape)
    G_sh = kernels.matrix(hole_rel, eval_rel).T  # (n_eval, m)
    G_hh = kernels.matrix(hole_rel, hole_rel)
    return np.linalg.solve(G_hh.T, G_sh.T).T
