"""Continuous-time simple random walk: sampling, stopping times, excursions.

The walk has unit jump rate: a uniform nearest-neighbor skeleton Y_0, Y_1, ...
and i.i.d. Exp(1) holding times.  All stopping sets are skeleton events, so
holding times are generated lazily from a derived stream and only materialized
for occupation functionals.  "Run to infinity" is realized as run until first
exit of a kill box; events unresolved at that point are reported as censored,
never silently as infinite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .lattice import BoxRegion, SiteSet, as_point, step_table
from .rng import RngStream

INFINITE = "infinite"
HIT = "hit"
CENSORED = "censored"


class KillBoxTooLarge(ValueError):
    pass


@dataclass
class Trajectory:
    """A sampled walk path: skeleton sites plus Exp(1) holds.

    skeleton[0] is the start; skeleton[-1] is the first site outside the kill
    box when terminal_reason == "exit".  holds[i] is the duration spent at
    skeleton[i]; it is generated lazily from hold_stream.
    """

    start: tuple
    skeleton: np.ndarray  # (n, d) int64
    kill: BoxRegion
    terminal_reason: str  # "exit" | "max_steps" | "degenerate"
    hold_stream: RngStream
    _holds: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_steps(self) -> int:
        return len(self.skeleton)

    @property
    def holds(self) -> np.ndarray:
        if self._holds is None:
            gen = self.hold_stream.generator()
            h = gen.standard_exponential(len(self.skeleton))
            self._holds = h
        return self._holds

    def times(self) -> np.ndarray:
        """Arrival time at each skeleton index (t[0] = 0)."""
        h = self.holds
        t = np.empty(len(h))
        t[0] = 0.0
        np.cumsum(h[:-1], out=t[1:])
        return t

    def visited(self) -> np.ndarray:
        return np.unique(self.skeleton, axis=0)


_MAX_WALK_BYTES = 4 * 10**9


def sample_walk(
    x,
    kill: BoxRegion,
    rng: RngStream,
    max_steps: int = 200_000_000,
    block: int = 8192,
) -> Trajectory:
    """Walk from x until its first exit of the kill box.

    The skeleton is built in vectorized blocks.  A degenerate kill box that
    does not contain x yields a single-site trajectory.
    """
    x = as_point(x)
    d = len(x)
    if kill.d != d:
        raise ValueError("kill box dimension mismatch")
    # expected exit time is of order (max side)^2; the skeleton is the memory
    expected_steps = min(max_steps, max(kill.side) ** 2 * 4)
    if expected_steps * (8 * d + 8) > _MAX_WALK_BYTES:
        raise KillBoxTooLarge(
            f"kill box of side {max(kill.side)} implies about {expected_steps} "
            f"steps per walk, beyond the memory budget; shrink it or max_steps"
        )
    gen = rng.generator()
    hold_stream = rng.derive("holds")
    if not kill.contains(x):
        skel = np.array([x], dtype=np.int64)
        return Trajectory(x, skel, kill, "degenerate", hold_stream)

    steps = step_table(d)
    lo = np.asarray(kill.lower)
    hi = np.asarray(kill.upper)
    pos = np.asarray(x, dtype=np.int64)
    chunks = [np.array([x], dtype=np.int64)]
    total = 0
    reason = "max_steps"
    while total < max_steps:
        dirs = gen.integers(0, 2 * d, size=block)
        disp = np.cumsum(steps[dirs], axis=0, dtype=np.int64)
        path = pos + disp
        outside = np.any((path < lo) | (path >= hi), axis=1)
        if outside.any():
            k = int(np.argmax(outside))
            chunks.append(path[: k + 1])
            reason = "exit"
            break
        chunks.append(path)
        pos = path[-1]
        total += block
    skel = np.concatenate(chunks, axis=0)
    return Trajectory(x, skel, kill, reason, hold_stream)


def _membership(skel: np.ndarray, region) -> np.ndarray:
    """Boolean membership of skeleton sites in a SiteSet or BoxRegion."""
    if isinstance(region, BoxRegion):
        return region.contains_array(skel)
    if isinstance(region, SiteSet):
        win = region.window
        inside_win = win.contains_array(skel)
        out = np.zeros(len(skel), dtype=bool)
        if inside_win.any():
            rel = skel[inside_win] - np.asarray(win.lower)
            out[inside_win] = region.mask[tuple(rel.T)]
        return out
    raise TypeError(f"unsupported region type {type(region)!r}")


@dataclass
class StopTime:
    status: str  # "hit" | "infinite" | "censored"
    index: Optional[int] = None
    time: Optional[float] = None

    @property
    def finite(self) -> bool:
        return self.status == HIT


def stopping_times(traj: Trajectory, A, U) -> tuple[StopTime, StopTime, StopTime]:
    """(H_A, T_U, H-tilde_A) for a truncated trajectory.

    H_A: first time in A.  T_U: first time outside U.  H-tilde_A: first time in
    A at or after the first jump.  Events unresolved when the walk was killed
    are censored; T_U resolves as soon as the walk leaves U, and a walk killed
    outside U has left U.
    """
    skel = traj.skeleton
    in_A = _membership(skel, A)
    in_U = _membership(skel, U)
    t = traj.times()

    def first(mask: np.ndarray, start: int) -> Optional[int]:
        hits = np.flatnonzero(mask[start:])
        return int(hits[0]) + start if len(hits) else None

    iA = first(in_A, 0)
    if iA is not None:
        H_A = StopTime(HIT, iA, float(t[iA]))
    else:
        H_A = StopTime(CENSORED)

    iU = first(~in_U, 0)
    if iU is not None:
        T_U = StopTime(HIT, iU, float(t[iU]))
    else:
        # the trajectory ended while still inside U (kill box inside U, or
        # max-steps truncation): unresolved
        T_U = StopTime(CENSORED)

    iAt = first(in_A, 1)
    if iAt is not None:
        Ht_A = StopTime(HIT, iAt, float(t[iAt]))
    else:
        Ht_A = StopTime(CENSORED)
    return H_A, T_U, Ht_A


@dataclass
class ExcursionRecord:
    """One completed excursion: return to A at r_index, departure from U at d_index."""

    parent_id: int
    ordinal: int  # 1-based within the parent trajectory
    r_index: int
    d_index: int
    path: np.ndarray  # skeleton[r_index : d_index + 1]; final site outside U
    holds: np.ndarray  # holds over the same slice

    def occupation(self, weights) -> float:
        """Integral over the excursion of weights(X_s) ds, up to the exit time."""
        vals = weights.evaluate_array(self.path[:-1])
        return float(np.dot(vals, self.holds[:-1]))


def excursion_decompose(
    traj: Trajectory, A, U, parent_id: int = 0, need_holds: bool = True
) -> tuple[list, int, bool]:
    """Successive excursions of the walk from A to the complement of U.

    Returns (records, N, censored_tail).  N counts completed excursions; a
    final return to A with no subsequent exit of U before the kill-box exit is
    a censored tail and excluded from N.
    """
    skel = traj.skeleton
    in_A = _membership(skel, A)
    out_U = ~_membership(skel, U)
    holds = traj.holds if need_holds else np.zeros(len(skel))
    idx_A = np.flatnonzero(in_A)
    idx_out = np.flatnonzero(out_U)
    records = []
    censored_tail = False
    k = 0
    cursor = 0
    while True:
        pos = np.searchsorted(idx_A, cursor)
        if pos == len(idx_A):
            break
        r = int(idx_A[pos])
        pos_out = np.searchsorted(idx_out, r)
        if pos_out == len(idx_out):
            # returned to A but never left U before the trajectory ended
            censored_tail = True
            break
        dpt = int(idx_out[pos_out])
        k += 1
        records.append(
            ExcursionRecord(
                parent_id=parent_id,
                ordinal=k,
                r_index=r,
                d_index=dpt,
                path=skel[r : dpt + 1],
                holds=holds[r : dpt + 1],
            )
        )
        cursor = dpt + 1
    return records, k, censored_tail


def occupation_functional(traj: Trajectory, weights, warn_sink=None) -> float:
    """Sum over steps of weights(site) * hold, exact given the trajectory.

    weights must be finitely supported inside the kill box; if its support
    touches the kill boundary a warning is emitted through warn_sink (truncation
    may bias the integral).
    """
    if warn_sink is not None:
        support_box = weights.window
        killed_inner = traj.kill.dilate(-1) if min(traj.kill.side) > 2 else traj.kill
        if not killed_inner.contains_box(support_box):
            warn_sink(
                "occupation support touches the kill boundary; truncation may bias"
            )
    vals = weights.evaluate_array(traj.skeleton)
    return float(np.dot(vals, traj.holds))


def sample_start(sites: np.ndarray, weights: np.ndarray, rng: RngStream) -> tuple:
    """Exact categorical draw of a start site from nonnegative weights."""
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if not (total > 0):
        raise ValueError("zero-mass start measure")
    gen = rng.generator()
    cum = np.cumsum(w)
    u = gen.random() * total
    i = int(np.searchsorted(cum, u, side="right"))
    i = min(i, len(w) - 1)
    return as_point(sites[i])


def sample_starts(sites: np.ndarray, weights: np.ndarray, n: int, gen: np.random.Generator) -> np.ndarray:
    """Vectorized categorical draws (row indices into sites)."""
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if not (total > 0):
        raise ValueError("zero-mass start measure")
    cum = np.cumsum(w)
    u = gen.random(n) * total
    idx = np.searchsorted(cum, u, side="right")
    return np.minimum(idx, len(w) - 1)
