"""Window-restricted random interlacements as a labeled Poisson cloud.

A sample on a finite set A holds every trajectory of the cloud with label in
(0, u_max] that meets A, represented by its forward part from the first visit
of A, killed on leaving a large box.  Labels arrive as a Poisson process with
rate cap(A) (capacity-bracket midpoint; the bracket is recorded and propagated
into downstream tolerances), starts are i.i.d. normalized equilibrium draws.

Traces, occupation fields, vacant sets and excursion streams are exact inside
A up to the recorded truncation budget.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lattice import BoxRegion, SiteFunction, SiteSet
from .potential.equilibrium import CapacityBracket, EquilibriumMeasure, equilibrium
from .potential.green import green_table
from .rng import RngStream
from .walk import Trajectory, excursion_decompose, sample_walk, sample_starts

FORMAT_VERSION = 1


class CapacityBracketTooWide(ValueError):
    pass


@dataclass
class InterlacementSample:
    A: SiteSet
    u_max: float
    kill: BoxRegion
    labels: np.ndarray  # ascending, distinct
    trajectories: list  # Trajectory per label
    cap: CapacityBracket
    em: EquilibriumMeasure
    eps_budget: float
    eps_achieved: float  # per-sample missed-return probability bound
    rng: RngStream

    @property
    def d(self) -> int:
        return self.A.d

    def count(self, u: float) -> int:
        return int(np.searchsorted(self.labels, u, side="right"))

    def restricted(self, u: float) -> "InterlacementSample":
        """Sub-sample of labels <= u (consistent with a direct u-sample)."""
        if u > self.u_max:
            raise ValueError("restriction level above u_max")
        k = self.count(u)
        return InterlacementSample(
            A=self.A,
            u_max=u,
            kill=self.kill,
            labels=self.labels[:k],
            trajectories=self.trajectories[:k],
            cap=self.cap,
            em=self.em,
            eps_budget=self.eps_budget,
            eps_achieved=self.eps_achieved,
            rng=self.rng,
        )


def default_kill_radius(
    A: SiteSet,
    u_max: float,
    cap: CapacityBracket,
    eps: float,
    d: int,
    max_radius: int = 600,
) -> tuple[int, float]:
    """Kill radius from the hitting-probability bound, and achieved budget.

    R = max(4 diam(bounding box), radius making the bounded per-sample
    missed-return probability <= eps), clipped at max_radius; the achieved
    bound is returned alongside.
    """
    table = green_table(d)
    pts = A.points()
    r_A = int(np.max(np.abs(pts - np.round(pts.mean(axis=0)))))
    diam = int((pts.max(axis=0) - pts.min(axis=0)).max()) + 1
    n_exp = max(u_max * cap.mid, 1.0)

    def budget(R: int) -> float:
        return n_exp * cap.hi * table.env_upper(max(R - r_A, 1))

    R = max(4 * diam, 2 * r_A + 8)
    while budget(R) > eps and R < max_radius:
        R = min(int(R * 1.5) + 1, max_radius)
    return R, budget(R)


def sample_interlacement(
    A: SiteSet,
    u_max: float,
    rng: RngStream,
    em: EquilibriumMeasure = None,
    kill_radius: int = None,
    eps_trunc: float = 1e-3,
    max_kill_radius: int = 600,
    cap_rel_width_max: float = 0.01,
) -> InterlacementSample:
    """Poisson cloud of forward trajectories meeting A, labels in (0, u_max]."""
    if u_max < 0:
        raise ValueError("u_max must be nonnegative")
    d = A.d
    if em is None:
        em = equilibrium(A)
    cap = em.cap_cal
    if cap.rel_width > cap_rel_width_max:
        raise CapacityBracketTooWide(
            f"calibrated capacity bracket width {cap.rel_width:.4f} exceeds "
            f"{cap_rel_width_max}; run a tighter equilibrium solve"
        )
    if kill_radius is None:
        kill_radius, eps_achieved = default_kill_radius(
            A, u_max, cap, eps_trunc, d, max_kill_radius
        )
    else:
        table = green_table(d)
        pts = A.points()
        r_A = int(np.max(np.abs(pts - np.round(pts.mean(axis=0)))))
        n_exp = max(u_max * cap.mid, 1.0)
        eps_achieved = n_exp * cap.hi * table.env_upper(max(kill_radius - r_A, 1))
    pts = A.points()
    center = tuple(int(round(c)) for c in pts.mean(axis=0))
    kill = BoxRegion.centered_ball(kill_radius, d, center)

    gen = rng.derive("labels").generator()
    labels = []
    t = 0.0
    rate = cap.mid
    while True:
        t += gen.standard_exponential() / rate
        if t > u_max:
            break
        labels.append(t)
    labels = np.array(labels)

    start_gen = rng.derive("starts").generator()
    sites = em.sites
    weights = em.mid
    idx = sample_starts(sites, weights, len(labels), start_gen)
    trajectories = []
    for i in range(len(labels)):
        x = tuple(int(c) for c in sites[idx[i]])
        traj = sample_walk(x, kill, rng.derive("traj", i))
        trajectories.append(traj)
    return InterlacementSample(
        A=A,
        u_max=u_max,
        kill=kill,
        labels=labels,
        trajectories=trajectories,
        cap=cap,
        em=em,
        eps_budget=eps_trunc,
        eps_achieved=eps_achieved,
        rng=rng,
    )


def occupation_field(s: InterlacementSample, u: float) -> SiteFunction:
    """L_{x,u} over the sample's set A (complete only there)."""
    if u > s.u_max:
        raise ValueError("occupation level above u_max")
    win = s.A.window
    vals = np.zeros(win.side)
    lo = np.asarray(win.lower)
    k = s.count(u)
    for traj in s.trajectories[:k]:
        skel = traj.skeleton
        inside = win.contains_array(skel)
        if not inside.any():
            continue
        rel = skel[inside] - lo
        np.add.at(vals, tuple(rel.T), traj.holds[inside])
    vals[~s.A.mask] = 0.0
    return SiteFunction(win, vals)


def trace_mask(s: InterlacementSample, u: float, window: BoxRegion) -> np.ndarray:
    """Union of trajectory ranges with label <= u, over a box window."""
    mask = np.zeros(window.side, dtype=bool)
    lo = np.asarray(window.lower)
    for traj in s.trajectories[: s.count(u)]:
        skel = traj.skeleton
        inside = window.contains_array(skel)
        if inside.any():
            rel = skel[inside] - lo
            mask[tuple(rel.T)] = True
    return mask


def site_subset(inner: SiteSet, outer: SiteSet) -> bool:
    """inner subset of outer, windows may differ."""
    pts = inner.points()
    if len(pts) == 0:
        return True
    ok = outer.window.contains_array(pts)
    if not ok.all():
        return False
    rel = pts - np.asarray(outer.window.lower)
    return bool(outer.mask[tuple(rel.T)].all())


def vacant_set(s: InterlacementSample, u: float, window: SiteSet) -> SiteSet:
    """window minus the trace at level u; window must sit inside A."""
    if u > s.u_max:
        raise ValueError("vacancy level above u_max")
    if not site_subset(window, s.A):
        raise ValueError(
            "window must be contained in the Poissonization set A; "
            "outside it the sample misses trajectories"
        )
    tr = trace_mask(s, u, window.window)
    return SiteSet(window.window, window.mask & ~tr)


@dataclass
class LabeledExcursion:
    label: float
    traj_index: int
    ordinal: int  # within-trajectory, 1-based
    record: object  # walk.ExcursionRecord

    @property
    def key(self):
        return (self.label, self.ordinal)


@dataclass
class ExcursionStream:
    excursions: list  # LabeledExcursion, lexicographic (label, ordinal)
    censored: int
    labels: np.ndarray  # label per excursion

    def count(self, u: float) -> int:
        return int(np.searchsorted(self.labels, u, side="right"))

    @property
    def censored_rate(self) -> float:
        n = len(self.excursions) + self.censored
        return self.censored / n if n else 0.0


def excursion_stream(s: InterlacementSample, D: SiteSet, U: BoxRegion) -> ExcursionStream:
    """Ordered excursions from D to the complement of U, labels attached.

    Requires D inside A (every trajectory meeting D is present) and U inside
    the kill box (departures resolve); censored tails are excluded from counts
    and reported.
    """
    if not site_subset(D, s.A):
        raise ValueError("D must be contained in the Poissonization set A")
    if not s.kill.contains_box(U):
        raise ValueError("U must be contained in the kill box")
    out = []
    censored = 0
    for i, (lab, traj) in enumerate(zip(s.labels, s.trajectories)):
        records, n, cens = excursion_decompose(traj, D, U, parent_id=i)
        censored += int(cens)
        for rec in records:
            out.append(LabeledExcursion(lab, i, rec.ordinal, rec))
    labels = np.array([e.label for e in out])
    return ExcursionStream(out, censored, labels)


# -- serialization ------------------------------------------------------------


def sample_to_json(s: InterlacementSample) -> str:
    steps_of = []
    for traj in s.trajectories:
        diffs = np.diff(traj.skeleton, axis=0)
        steps_of.append(
            {
                "start": [int(c) for c in traj.skeleton[0]],
                "moves": [[int(c) for c in row] for row in diffs],
                "holds": [float(h) for h in traj.holds],
                "terminal": traj.terminal_reason,
            }
        )
    doc = {
        "format_version": FORMAT_VERSION,
        "d": s.d,
        "window_lower": list(s.A.window.lower),
        "window_side": list(s.A.window.side),
        "A_points": [[int(c) for c in p] for p in s.A.points()],
        "u_max": s.u_max,
        "kill_lower": list(s.kill.lower),
        "kill_side": list(s.kill.side),
        "labels": [float(x) for x in s.labels],
        "cap": [s.cap.lo, s.cap.hi, s.cap.mid],
        "eps_budget": s.eps_budget,
        "eps_achieved": s.eps_achieved,
        "trajectories": steps_of,
    }
    return json.dumps(doc)


def sample_from_json(text: str, em: EquilibriumMeasure = None) -> InterlacementSample:
    doc = json.loads(text)
    if doc["format_version"] != FORMAT_VERSION:
        raise ValueError(f"unsupported sample format {doc['format_version']}")
    window = BoxRegion(tuple(doc["window_lower"]), tuple(doc["window_side"]))
    A = SiteSet.from_points(window, doc["A_points"])
    kill = BoxRegion(tuple(doc["kill_lower"]), tuple(doc["kill_side"]))
    trajectories = []
    for item in doc["trajectories"]:
        start = np.array(item["start"], dtype=np.int64)
        moves = np.array(item["moves"], dtype=np.int64).reshape(-1, len(start))
        skel = np.concatenate([start[None, :], start + np.cumsum(moves, axis=0)])
        traj = Trajectory(
            start=tuple(int(c) for c in start),
            skeleton=skel,
            kill=kill,
            terminal_reason=item["terminal"],
            hold_stream=RngStream(0, 0),
            _holds=np.array(item["holds"]),
        )
        trajectories.append(traj)
    cap = CapacityBracket(*doc["cap"])
    return InterlacementSample(
        A=A,
        u_max=doc["u_max"],
        kill=kill,
        labels=np.array(doc["labels"]),
        trajectories=trajectories,
        cap=cap,
        em=em,
        eps_budget=doc["eps_budget"],
        eps_achieved=doc["eps_achieved"],
        rng=RngStream(0, 0),
    )
