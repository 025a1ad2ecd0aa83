"""Z^d lattice geometry: points, boxes, site sets, box hierarchies and columns.

Everything here is exact integer arithmetic.  Dimension d >= 3 is a runtime
parameter carried by the geometry objects themselves; mixing dimensions raises.
All objects are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

Point = tuple  # tuple of d ints


def as_point(x) -> tuple:
    return tuple(int(c) for c in x)


def neighbors(x: Sequence[int]) -> list:
    """The 2d nearest neighbors of x, deterministic order.

    Axis order, minus direction before plus: (-e1, +e1, -e2, +e2, ...).
    """
    x = as_point(x)
    d = len(x)
    out = []
    for axis in range(d):
        for sign in (-1, +1):
            y = list(x)
            y[axis] += sign
            out.append(tuple(y))
    return out


def step_table(d: int) -> np.ndarray:
    """(2d, d) int array of unit steps in the neighbors() order."""
    steps = np.zeros((2 * d, d), dtype=np.int64)
    for axis in range(d):
        steps[2 * axis, axis] = -1
        steps[2 * axis + 1, axis] = +1
    return steps


@dataclass(frozen=True)
class BoxRegion:
    """Axis-aligned box of lattice sites: [lower, lower + side) per axis."""

    lower: tuple
    side: tuple

    def __post_init__(self):
        object.__setattr__(self, "lower", as_point(self.lower))
        object.__setattr__(self, "side", as_point(self.side))
        if len(self.lower) != len(self.side):
            raise ValueError("lower and side must have the same dimension")
        if any(s <= 0 for s in self.side):
            raise ValueError(f"box sides must be positive, got {self.side}")

    @classmethod
    def cube(cls, lower: Sequence[int], side: int, d: int | None = None) -> "BoxRegion":
        lower = as_point(lower)
        if d is None:
            d = len(lower)
        return cls(lower, (int(side),) * d)

    @classmethod
    def centered_ball(cls, radius: int, d: int, center: Sequence[int] | None = None) -> "BoxRegion":
        """Closed l-infinity ball of the given radius: side 2*radius + 1."""
        if center is None:
            center = (0,) * d
        center = as_point(center)
        return cls(tuple(c - radius for c in center), (2 * radius + 1,) * d)

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def upper(self) -> tuple:
        """Exclusive upper corner."""
        return tuple(l + s for l, s in zip(self.lower, self.side))

    @property
    def cardinality(self) -> int:
        n = 1
        for s in self.side:
            n *= s
        return n

    def contains(self, x: Sequence[int]) -> bool:
        return all(l <= c < u for c, l, u in zip(x, self.lower, self.upper))

    def contains_array(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized membership for an (n, d) int array."""
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.all((pts >= lo) & (pts < hi), axis=1)

    def contains_box(self, other: "BoxRegion") -> bool:
        return all(
            sl <= ol and ou <= su
            for sl, ol, ou, su in zip(self.lower, other.lower, other.upper, self.upper)
        )

    def translate(self, z: Sequence[int]) -> "BoxRegion":
        return BoxRegion(tuple(l + c for l, c in zip(self.lower, z)), self.side)

    def dilate(self, margin: int) -> "BoxRegion":
        """Grow the box by `margin` sites on every face."""
        return BoxRegion(
            tuple(l - margin for l in self.lower),
            tuple(s + 2 * margin for s in self.side),
        )

    def index_of(self, pts: np.ndarray) -> np.ndarray:
        """Flat row-major index of points assumed inside the box."""
        rel = np.asarray(pts) - np.asarray(self.lower)
        return np.ravel_multi_index(rel.T, self.side)

    def sites(self) -> np.ndarray:
        """(cardinality, d) array of all sites, row-major order."""
        grids = np.meshgrid(
            *[np.arange(l, l + s) for l, s in zip(self.lower, self.side)],
            indexing="ij",
        )
        return np.stack([g.ravel() for g in grids], axis=1)

    def intersect(self, other: "BoxRegion") -> "BoxRegion | None":
        lo = tuple(max(a, b) for a, b in zip(self.lower, other.lower))
        hi = tuple(min(a, b) for a, b in zip(self.upper, other.upper))
        if any(h <= l for l, h in zip(lo, hi)):
            return None
        return BoxRegion(lo, tuple(h - l for l, h in zip(lo, hi)))


class SiteSet:
    """Finite set of lattice sites as a dense mask over a window box.

    Set operations are exact.  The mask is never mutated in place by public
    operations; treat instances as immutable.
    """

    def __init__(self, window: BoxRegion, mask: np.ndarray | None = None):
        self.window = window
        if mask is None:
            mask = np.zeros(window.side, dtype=bool)
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != tuple(window.side):
            raise ValueError(f"mask shape {mask.shape} != window side {window.side}")
        self.mask = mask

    # -- constructors -------------------------------------------------------
    @classmethod
    def from_points(cls, window: BoxRegion, pts: Iterable[Sequence[int]]) -> "SiteSet":
        mask = np.zeros(window.side, dtype=bool)
        for p in pts:
            rel = tuple(c - l for c, l in zip(p, window.lower))
            if any(r < 0 or r >= s for r, s in zip(rel, window.side)):
                raise ValueError(f"point {tuple(p)} outside window")
            mask[rel] = True
        return cls(window, mask)

    @classmethod
    def from_box(cls, box: BoxRegion, window: BoxRegion | None = None) -> "SiteSet":
        if window is None:
            window = box
        s = cls(window)
        inter = window.intersect(box)
        if inter is None:
            return s
        sl = tuple(
            slice(l - wl, l - wl + side)
            for l, wl, side in zip(inter.lower, window.lower, inter.side)
        )
        m = s.mask.copy()
        m[sl] = True
        return cls(window, m)

    # -- basic queries ------------------------------------------------------
    @property
    def d(self) -> int:
        return self.window.d

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __contains__(self, p) -> bool:
        rel = tuple(c - l for c, l in zip(p, self.window.lower))
        if any(r < 0 or r >= s for r, s in zip(rel, self.window.side)):
            return False
        return bool(self.mask[rel])

    def points(self) -> np.ndarray:
        """(n, d) coordinates of member sites, row-major order."""
        idx = np.argwhere(self.mask)
        return idx + np.asarray(self.window.lower)

    def same_window(self, other: "SiteSet") -> bool:
        return self.window == other.window

    def _check_window(self, other: "SiteSet"):
        if not self.same_window(other):
            raise ValueError("site sets live on different windows")

    # -- set algebra (window-exact) -----------------------------------------
    def union(self, other: "SiteSet") -> "SiteSet":
        self._check_window(other)
        return SiteSet(self.window, self.mask | other.mask)

    def intersection(self, other: "SiteSet") -> "SiteSet":
        self._check_window(other)
        return SiteSet(self.window, self.mask & other.mask)

    def difference(self, other: "SiteSet") -> "SiteSet":
        self._check_window(other)
        return SiteSet(self.window, self.mask & ~other.mask)

    def complement_in_window(self) -> "SiteSet":
        return SiteSet(self.window, ~self.mask)

    def issubset(self, other: "SiteSet") -> bool:
        self._check_window(other)
        return bool(np.all(~self.mask | other.mask))


def _shifted_or(mask: np.ndarray) -> np.ndarray:
    """Union of the 2d unit shifts of a boolean mask (same shape, zero fill)."""
    out = np.zeros_like(mask)
    d = mask.ndim
    for axis in range(d):
        sl_to = [slice(None)] * d
        sl_from = [slice(None)] * d
        sl_to[axis] = slice(0, -1)
        sl_from[axis] = slice(1, None)
        out[tuple(sl_to)] |= mask[tuple(sl_from)]
        out[tuple(sl_from)] |= mask[tuple(sl_to)]
    return out


def boundary(A: SiteSet) -> SiteSet:
    """Outer boundary: sites not in A adjacent to A.

    The window is grown by one so no boundary site is clipped.
    """
    grown = SiteSet.from_points(A.window.dilate(1), [])
    sl = tuple(slice(1, 1 + s) for s in A.window.side)
    m = np.zeros(grown.window.side, dtype=bool)
    m[sl] = A.mask
    nb = _shifted_or(m)
    return SiteSet(grown.window, nb & ~m)


def internal_boundary(A: SiteSet) -> SiteSet:
    """Sites of A with a neighbor outside A (window-exterior counts as outside)."""
    d = A.mask.ndim
    padded = np.pad(A.mask, 1, constant_values=False)
    has_outside = np.zeros_like(A.mask)
    for axis in range(d):
        lo = [slice(1, -1)] * d
        lo[axis] = slice(0, -2)
        hi = [slice(1, -1)] * d
        hi[axis] = slice(2, None)
        has_outside |= ~padded[tuple(lo)]
        has_outside |= ~padded[tuple(hi)]
    return SiteSet(A.window, A.mask & has_outside)


_STRUCTURE_CACHE: dict = {}


def _nn_structure(d: int) -> np.ndarray:
    if d not in _STRUCTURE_CACHE:
        _STRUCTURE_CACHE[d] = ndimage.generate_binary_structure(d, 1)
    return _STRUCTURE_CACHE[d]


def label_components(S: SiteSet) -> tuple[np.ndarray, int]:
    """Nearest-neighbor component labels over the window (0 = not in S)."""
    labels, n = ndimage.label(S.mask, structure=_nn_structure(S.d))
    return labels, int(n)


def connected_components(S: SiteSet) -> list:
    """List of (component SiteSet, l-infinity diameter), largest first."""
    labels, n = label_components(S)
    out = []
    for k in range(1, n + 1):
        m = labels == k
        pts = np.argwhere(m)
        diam = int((pts.max(axis=0) - pts.min(axis=0)).max()) if len(pts) else 0
        out.append((SiteSet(S.window, m), diam))
    out.sort(key=lambda cd: -len(cd[0]))
    return out


def component_diameters(S: SiteSet) -> list:
    """l-infinity diameters of the components of S (no site sets built)."""
    labels, n = label_components(S)
    diams = []
    for k in range(1, n + 1):
        pts = np.argwhere(labels == k)
        diams.append(int((pts.max(axis=0) - pts.min(axis=0)).max()))
    return diams


class SiteFunction:
    """Finitely supported real function on Z^d: dense values over a window."""

    def __init__(self, window: BoxRegion, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape != tuple(window.side):
            raise ValueError("values shape does not match window")
        self.window = window
        self.values = values

    @classmethod
    def from_pairs(cls, window: BoxRegion, sites: np.ndarray, vals: np.ndarray) -> "SiteFunction":
        arr = np.zeros(window.side, dtype=float)
        rel = np.asarray(sites) - np.asarray(window.lower)
        arr[tuple(rel.T)] = vals
        return cls(window, arr)

    def evaluate(self, x) -> float:
        if not self.window.contains(x):
            return 0.0
        rel = tuple(c - l for c, l in zip(x, self.window.lower))
        return float(self.values[rel])

    def evaluate_array(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts)
        out = np.zeros(len(pts))
        inside = self.window.contains_array(pts)
        if inside.any():
            rel = pts[inside] - np.asarray(self.window.lower)
            out[inside] = self.values[tuple(rel.T)]
        return out

    def support_points(self) -> np.ndarray:
        idx = np.argwhere(self.values != 0.0)
        return idx + np.asarray(self.window.lower)

    def support_values(self) -> np.ndarray:
        return self.values[self.values != 0.0]

    def total(self) -> float:
        return float(self.values.sum())

    def scaled(self, c: float) -> "SiteFunction":
        return SiteFunction(self.window, self.values * c)


# -- box hierarchy ----------------------------------------------------------


@dataclass(frozen=True)
class BoxFamily:
    """The nested boxes B, D, D-check, U, U-check, B-check around a scale-L site.

    Corner arithmetic, with z on the lattice L*Z^d:

        B = z + [0, L)^d
        D = z + [-3L, 4L)^d
        Dck = z + [-4L, 5L)^d
        U = z + [-KL + 1, KL - 1)^d
        Uck = z + [-(K+1)L + 1, (K+1)L - 1)^d
        Bck = z + [-(K+1)L, (K+1)L)^d
    """

    z: tuple
    L: int
    K: int
    B: BoxRegion = field(init=False)
    D: BoxRegion = field(init=False)
    Dck: BoxRegion = field(init=False)
    U: BoxRegion = field(init=False)
    Uck: BoxRegion = field(init=False)
    Bck: BoxRegion = field(init=False)

    def __post_init__(self):
        z = as_point(self.z)
        object.__setattr__(self, "z", z)
        L, K = self.L, self.K
        d = len(z)
        if L < 1:
            raise ValueError("L must be >= 1")
        if K < 2:
            raise ValueError("K must be >= 2")
        if any(c % L != 0 for c in z):
            raise ValueError(f"z={z} is not on the lattice {L}*Z^d")

        def cube(lo, hi):
            return BoxRegion(tuple(c + lo for c in z), (hi - lo,) * d)

        object.__setattr__(self, "B", cube(0, L))
        object.__setattr__(self, "D", cube(-3 * L, 4 * L))
        object.__setattr__(self, "Dck", cube(-4 * L, 5 * L))
        object.__setattr__(self, "U", cube(-K * L + 1, K * L - 1))
        object.__setattr__(self, "Uck", cube(-(K + 1) * L + 1, (K + 1) * L - 1))
        object.__setattr__(self, "Bck", cube(-(K + 1) * L, (K + 1) * L))

    @property
    def d(self) -> int:
        return len(self.z)

    def chain(self) -> list:
        return [self.B, self.D, self.Dck, self.U, self.Uck, self.Bck]

    def nesting_ok(self) -> bool:
        c = self.chain()
        return all(c[i + 1].contains_box(c[i]) for i in range(len(c) - 1))


def box_family(z: Sequence[int], L: int, K: int, strict: bool = True) -> BoxFamily:
    """Box hierarchy at scale-L site z.

    strict=True enforces the K >= 100 regime the asymptotic statements assume;
    strict=False admits smaller K for desk-scale experiments (callers gate
    correctness separately, e.g. via the entrance sandwich check).
    """
    if strict and K < 100:
        raise ValueError(f"K={K} < 100; pass strict=False for desk-scale geometry")
    return BoxFamily(as_point(z), int(L), int(K))


# -- columns ----------------------------------------------------------------


@dataclass(frozen=True)
class Column:
    """A stack of L-boxes in face direction e sharing a transverse footprint."""

    e_axis: int
    e_sign: int
    transverse: tuple  # lower corners of the footprint on the axes != e_axis
    boxes: tuple  # ordered BoxRegions, from the face outwards

    @property
    def direction(self) -> tuple:
        d = len(self.boxes[0].lower)
        e = [0] * d
        e[self.e_axis] = self.e_sign
        return tuple(e)


def enumerate_columns(N: int, M: float, L: int, d: int = 3) -> tuple[list, dict]:
    """Columns of L-boxes between the surface of B_N and S_N = {|x|_inf = [MN]}.

    For each face direction e, a column collects the L-boxes contained in
    {x . e > N} and in the ball of radius [(M+1)N], whose common transverse
    footprint [t, t+L)^{d-1} lies inside the face F_{e,N} (|x_j| <= N on the
    other axes).  Boxes protruding beyond the [(M+1)N]-ball are dropped, which
    truncates each column at the last fully contained box.

    Returns (columns, diagnostics); diagnostics reports counts and the
    c*(N/L)^{d-1} comparison value.
    """
    if M <= 1:
        raise ValueError("M must be > 1")
    if L > N:
        raise ValueError("need L <= N for the column geometry")
    R_out = int(np.floor((M + 1) * N))
    columns = []
    # transverse footprints: lower corners t on L*Z, with [t, t+L) inside [-N, N]
    t_lo = -(N // L) * L
    t_vals = [t for t in range(t_lo - L, N + 1, L) if t >= -N and t + L - 1 <= N]
    for axis in range(d):
        for sign in (-1, +1):
            # lower corners along the column axis, from the face outwards
            if sign == +1:
                # smallest corner a on L*Z with a > N; stack while box fits the ball
                a = L * ((N + L) // L)  # = L * ceil((N+1)/L) for integer N
                axis_corners = []
                while a + L - 1 <= R_out:
                    axis_corners.append(a)
                    a += L
            else:
                # largest corner b on L*Z with b + L - 1 < -N
                b = ((-N - L) // L) * L
                axis_corners = []
                while b >= -R_out:
                    axis_corners.append(b)
                    b -= L
            if not axis_corners:
                continue
            for trans in _product_int(t_vals, d - 1):
                boxes = []
                for a in axis_corners:
                    lower = list(trans)
                    lower.insert(axis, a)
                    box = BoxRegion(tuple(lower), (L,) * d)
                    if all(bl >= -R_out and bu - 1 <= R_out for bl, bu in zip(box.lower, box.upper)):
                        boxes.append(box)
                    else:
                        break
                if boxes:
                    columns.append(
                        Column(e_axis=axis, e_sign=sign, transverse=tuple(trans), boxes=tuple(boxes))
                    )
    diag = {
        "n_columns": len(columns),
        "per_face_bound": len(t_vals) ** (d - 1),
        "count_over_scale": len(columns) / max((N / L) ** (d - 1), 1e-300),
    }
    return columns, diag


def _product_int(vals, k):
    if k == 0:
        yield ()
        return
    for v in vals:
        for rest in _product_int(vals, k - 1):
            yield (v,) + rest
