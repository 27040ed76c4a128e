"""KCT time-and-space geometry.

Pads live in a (time, pad position) plane; stockpile placements are
rectangles there and the remaining free space is kept as the set of maximal
free rectangles (pad gaps).  Reclaimers ride a shared rail, so reclaim jobs
live in a (time, rail position) plane: the space reachable between two
consecutive jobs of one machine at its travel speed is a parallelogram
(reclaimer gap), while a committed job shadows the paired machine behind a
trapezium-shaped tent whose flanks slope at the travel speed.
"""

from __future__ import annotations

import math
from bisect import insort

from .model import TIME_TOL

POS_TOL = 1e-6  # metres

INF = math.inf


# ---------------------------------------------------------------------------
# maximal free rectangles (pad gaps)
# ---------------------------------------------------------------------------

def _contains(outer, inner) -> bool:
    return (outer[0] <= inner[0] + TIME_TOL and inner[1] <= outer[1] + TIME_TOL
            and outer[2] <= inner[2] + POS_TOL and inner[3] <= outer[3] + POS_TOL)


def _overlaps(a, b) -> bool:
    return (a[0] < b[1] - TIME_TOL and b[0] < a[1] - TIME_TOL
            and a[2] < b[3] - POS_TOL and b[2] < a[3] - POS_TOL)


class PadSpace:
    """Maximal free rectangles of one pad under committed placements.

    Rectangles are (t1, t2, y1, y2); t2 may be infinite.  Starting from the
    whole pad, each committed placement splits every gap it punctures into
    the four maximal slabs around it, then contained rectangles are pruned,
    which keeps exactly the set of maximal free rectangles.
    """

    def __init__(self, length: float):
        self.length = length
        self.gaps: list[tuple[float, float, float, float]] = [(0.0, INF, 0.0, length)]
        self.placements: list[tuple[float, float, float, float, str]] = []

    def snapshot(self):
        return (list(self.gaps), list(self.placements))

    def restore(self, snap):
        self.gaps, self.placements = snap
        self.gaps = list(self.gaps)
        self.placements = list(self.placements)

    def commit(self, rect: tuple[float, float, float, float], sid: str):
        t1, t2, y1, y2 = rect
        untouched = []
        parts = []
        for gap in self.gaps:
            if not _overlaps(gap, rect):
                untouched.append(gap)
                continue
            gt1, gt2, gy1, gy2 = gap
            if t1 > gt1 + TIME_TOL:
                parts.append((gt1, t1, gy1, gy2))
            if gt2 > t2 + TIME_TOL:
                parts.append((t2, gt2, gy1, gy2))
            if y1 > gy1 + POS_TOL:
                parts.append((gt1, gt2, gy1, y1))
            if gy2 > y2 + POS_TOL:
                parts.append((gt1, gt2, y2, gy2))
        kept = []
        for i, part in enumerate(parts):
            dominated = False
            for j, other in enumerate(parts):
                if i == j:
                    continue
                if _contains(other, part) and not (part == other and i < j):
                    dominated = True
                    break
            if not dominated:
                for other in untouched:
                    if _contains(other, part):
                        dominated = True
                        break
            if not dominated and part not in kept:
                kept.append(part)
        self.gaps = sorted(untouched + kept)
        self.placements.append((t1, t2, y1, y2, sid))

    def free_area_gaps(self):
        return list(self.gaps)


# ---------------------------------------------------------------------------
# reclaimer rail state
# ---------------------------------------------------------------------------

class ReclaimerState:
    """Committed reclaim jobs of one machine, time-sorted.

    Jobs are (start, end, position, extent_low, extent_high, stockpile id).
    An artificial job pinned at the machine's home position ends at t=0 and
    a mirror job at infinity keeps one open-ended gap alive; consecutive
    entries delimit the machine's reclaimer gaps.
    """

    def __init__(self, name: str, home: float, axis_length: float, speed: float):
        self.name = name
        self.home = home
        self.axis_length = axis_length
        self.speed = speed
        self.jobs: list[tuple[float, float, float, float, float, str]] = []

    def snapshot(self):
        return list(self.jobs)

    def restore(self, snap):
        self.jobs = list(snap)

    def commit(self, start, end, position, y1, y2, sid):
        insort(self.jobs, (start, end, position, y1, y2, sid))

    def release(self, sid: str):
        for i, job in enumerate(self.jobs):
            if job[5] == sid:
                del self.jobs[i]
                return
        raise KeyError(sid)

    def gaps(self):
        """Consecutive job pairs as (prev_end, prev_pos, next_start, next_pos)."""
        anchors = [(-INF, 0.0, self.home)] + [(j[0], j[1], j[2]) for j in self.jobs] \
            + [(INF, INF, self.home)]
        out = []
        for (_, pe, pp), (ns, _, np_) in zip(anchors[:-1], anchors[1:]):
            out.append((pe, pp, ns, np_))
        return out


# ---------------------------------------------------------------------------
# per-height feasibility inside one pad gap / reclaimer gap pair
# ---------------------------------------------------------------------------

def reach_left(t_anchor: float, p_anchor: float, y: float, speed: float) -> float:
    """Earliest time the machine can hold position y after an anchor point."""
    if t_anchor == -INF:
        return -INF
    return t_anchor + abs(y - p_anchor) / speed

def reach_right(t_anchor: float, p_anchor: float, y: float, speed: float) -> float:
    """Latest time the machine may leave position y and still make the anchor."""
    if t_anchor == INF:
        return INF
    return t_anchor - abs(y - p_anchor) / speed


def gap_fits_duration(gap, duration: float, speed: float,
                      y_lo: float, y_hi: float) -> bool:
    """True if some height in [y_lo, y_hi] offers ``duration`` hours inside
    the reclaimer gap."""
    pe, pp, ns, np_ = gap
    if ns == INF:
        return y_hi >= y_lo - POS_TOL
    best = -INF
    for y in (y_lo, y_hi, min(max(pp, y_lo), y_hi), min(max(np_, y_lo), y_hi)):
        width = reach_right(ns, np_, y, speed) - reach_left(pe, pp, y, speed)
        best = max(best, width)
    return best >= duration - TIME_TOL


def critical_heights(rect, gap, duration: float, stack_end: float, speed: float,
                     other_jobs=()) -> list[float]:
    """Candidate heights where the earliest feasible reclaim start can occur.

    Includes every vertex of the leftmost boundary of the pad-gap and
    reclaimer-gap intersection, the cone apexes, the heights where the
    available width shrinks to exactly the reclaim duration, and the
    positions and blocking edges of the paired machine's jobs.
    """
    rt1, rt2, ry1, ry2 = rect
    pe, pp, ns, np_ = gap
    if ry2 < ry1 - POS_TOL:
        return []
    cands = {ry1, ry2}
    for apex in (pp, np_):
        if apex != INF and ry1 - POS_TOL <= apex <= ry2 + POS_TOL:
            cands.add(min(max(apex, ry1), ry2))

    # Left-boundary pieces: t = rt1, t = stack_end, the forward cone edges.
    # Right-boundary pieces: t = rt2, the backward cone edges.
    left_pieces = [(0.0, max(rt1, stack_end))]
    if pe != -INF:
        left_pieces.append((1.0 / speed, pe - pp / speed))    # y >= pp side
        left_pieces.append((-1.0 / speed, pe + pp / speed))   # y <= pp side
    right_pieces = []
    if rt2 != INF:
        right_pieces.append((0.0, rt2))
    if ns != INF:
        right_pieces.append((-1.0 / speed, ns + np_ / speed))  # y >= np side
        right_pieces.append((1.0 / speed, ns - np_ / speed))   # y <= np side

    def add(y):
        if ry1 - POS_TOL <= y <= ry2 + POS_TOL:
            cands.add(min(max(y, ry1), ry2))

    # Crossings between boundary pieces (kinks of the intersection outline)
    # and heights where left(y) + duration == right(y) (exact-fit heights).
    for la, lb in left_pieces:
        for ra, rb in right_pieces:
            if abs(la - ra) > 1e-15:
                add((rb - lb) / (la - ra))
                add((rb - duration - lb) / (la - ra))
    for la, lb in left_pieces:
        for lc, ld in left_pieces:
            if abs(la - lc) > 1e-15:
                add((ld - lb) / (la - lc))
    for ra, rb in right_pieces:
        for rc, rd in right_pieces:
            if abs(ra - rc) > 1e-15:
                add((rd - rb) / (ra - rc))

    for job in other_jobs:
        add(job[2])
        add(job[3])
        add(job[4])

    out = sorted(cands)
    # Deduplicate within tolerance, keeping the sweep deterministic.
    dedup: list[float] = []
    for y in out:
        if not dedup or y - dedup[-1] > POS_TOL:
            dedup.append(y)
    return dedup


def tent_tau_blocks(h: float, duration: float, cand_edge: float,
                    machine_is_low: bool, other_jobs, speed: float):
    """Forbidden start-time intervals for a candidate job at height ``h``.

    Both clash directions are enforced: the candidate's machine position must
    stay clear of the tents of the paired machine's jobs, and the candidate's
    own tent (anchored at ``cand_edge``, its extent edge facing the paired
    machine) must not swallow any committed job position of that machine.
    """
    blocks = []
    for t1, t2, pos, ylo, yhi, _sid in other_jobs:
        if machine_is_low:
            # The paired machine sits above: its job shadows every height
            # above its lower extent edge.
            delta = (h - ylo) / speed
        else:
            delta = (yhi - h) / speed
        if delta > POS_TOL / speed:
            blocks.append((t1 - delta - duration, t2 + delta))
        if machine_is_low:
            # Our tent is anchored at our top edge and shadows positions
            # below it; the paired job position must stay clear of it.
            delta2 = (cand_edge - pos) / speed
        else:
            delta2 = (pos - cand_edge) / speed
        if delta2 > POS_TOL / speed:
            blocks.append((t1 - delta2 - duration, t2 + delta2))
    return blocks


def earliest_start(lo: float, hi: float, duration: float,
                   blocks, blocked_regions=(), day_guard=None) -> float | None:
    """Earliest start in [lo, hi] avoiding forbidden start intervals,
    blocked time regions (which the whole job must avoid) and an optional
    per-day guard callback returning a bump time or None."""
    t = lo
    for _ in range(10_000):
        if t > hi + TIME_TOL:
            return None
        bump = None
        for b1, b2 in blocks:
            if b1 + TIME_TOL < t < b2 - TIME_TOL:
                bump = b2
                break
        if bump is None:
            for r1, r2 in blocked_regions:
                if r1 + TIME_TOL < t + duration and t < r2 - TIME_TOL:
                    bump = r2
                    break
        if bump is None and day_guard is not None:
            bump = day_guard(t)
        if bump is None:
            return t
        t = max(t + TIME_TOL, bump)
    return None


# ---------------------------------------------------------------------------
# flexibility-loss areas (exact strip integration)
# ---------------------------------------------------------------------------
#
# Every region involved (reclaimer gaps and clash tents) intersects each
# horizontal line y = const in one time interval whose bounds are linear in
# y, so areas reduce to integrating a piecewise-linear interval length over
# the axis: break the axis at every pairwise crossing of the bounding lines
# and sum exact trapezoids.

def _strip_area(lowers, uppers, y0: float, y1: float) -> float:
    """Integral over y in [y0, y1] of max(0, min(uppers) - max(lowers)).

    ``lowers`` and ``uppers`` are lines (slope, intercept) evaluated as
    slope*y + intercept.
    """
    if y1 <= y0:
        return 0.0
    lines = list(lowers) + list(uppers)
    cuts = [y0, y1]
    n = len(lines)
    for i in range(n):
        mi, qi = lines[i]
        for j in range(i + 1, n):
            mj, qj = lines[j]
            dm = mi - mj
            if dm != 0.0:
                y = (qj - qi) / dm
                if y0 < y < y1:
                    cuts.append(y)
    cuts.sort()
    # Between consecutive cuts the active bounds are fixed lines and the
    # width keeps one sign, so clamped trapezoids are exact.
    area = 0.0
    prev_y = 0.0
    prev_w = 0.0
    first = True
    for y in cuts:
        lo = -INF
        for m, q in lowers:
            v = m * y + q
            if v > lo:
                lo = v
        hi = INF
        for m, q in uppers:
            v = m * y + q
            if v < hi:
                hi = v
        w = hi - lo
        if w < 0.0:
            w = 0.0
        if first:
            first = False
        else:
            area += 0.5 * (prev_w + w) * (y - prev_y)
        prev_y = y
        prev_w = w
    return area


def _gap_lines(gap, speed: float):
    """Lower and upper bounding lines of a reclaimer gap's time interval."""
    pe, pp, ns, np_ = gap
    inv = 1.0 / speed
    lowers = [(inv, pe - pp * inv), (-inv, pe + pp * inv)]
    uppers = []
    if ns != INF:
        uppers = [(-inv, ns + np_ * inv), (inv, ns - np_ * inv)]
    return lowers, uppers


def gap_area(gap, speed: float, axis_len: float) -> float:
    """Exact area of a (finite) reclaimer gap clipped to the rail axis."""
    lowers, uppers = _gap_lines(gap, speed)
    if not uppers:
        raise ValueError("gap area undefined for an open-ended gap")
    return _strip_area(lowers, uppers, 0.0, axis_len)


def own_flexibility_loss(gap, tau: float, dur: float, h: float,
                         speed: float, axis_len: float) -> float:
    """Reclaimer-gap area the machine itself loses by committing the job.

    Splitting the gap at the job leaves two sub-gaps; the loss is what the
    split cuts away.  Open-ended gaps are handled as the (finite) limit of
    growing horizons, where the far tails cancel exactly.
    """
    pe, pp, ns, np_ = gap
    before = gap_area((pe, pp, tau, h), speed, axis_len)
    if ns == INF:
        def half_spread(x):
            return 0.5 * (x * x + (axis_len - x) * (axis_len - x))
        whole_minus_after = (axis_len * (tau + dur - pe)
                             + (half_spread(h) - half_spread(pp)) / speed)
        return max(0.0, whole_minus_after - before)
    whole = gap_area(gap, speed, axis_len)
    after = gap_area((tau + dur, h, ns, np_), speed, axis_len)
    return max(0.0, whole - before - after)


def _tent_lines(tent, speed: float, opens_down: bool):
    """Bounding lines and valid height range of a clash tent's blocked
    interval: (lower, upper, y_lo, y_hi).  ``tent`` is (edge, t1, t2)."""
    edge, t1, t2 = tent
    inv = 1.0 / speed
    if opens_down:
        lower = (inv, t1 - edge * inv)
        upper = (-inv, t2 + edge * inv)
        return lower, upper, -INF, edge
    lower = (-inv, t1 + edge * inv)
    upper = (inv, t2 - edge * inv)
    return lower, upper, edge, INF


def paired_flexibility_loss(cand_tent, neighbour_tents, other_gaps,
                            speed: float, axis_len: float,
                            opens_down: bool) -> float:
    """Area of the paired machine's gaps newly shadowed by the candidate.

    Shadow already cast by the committing machine's neighbouring jobs is
    excluded (inclusion-exclusion), so re-covering old shadow costs nothing.
    Tents are (edge, t1, t2) in the direction given by ``opens_down``.
    """
    subsets = [((cand_tent,), 1.0)]
    for i, tent in enumerate(neighbour_tents):
        subsets.append(((cand_tent, tent), -1.0))
        for other in neighbour_tents[i + 1:]:
            subsets.append(((cand_tent, tent, other), 1.0))
    total = 0.0
    for gap in other_gaps:
        g_lowers, g_uppers = _gap_lines(gap, speed)
        for tents, sign in subsets:
            lowers = list(g_lowers)
            uppers = list(g_uppers)
            y_lo, y_hi = 0.0, axis_len
            for tent in tents:
                lo_line, up_line, t_ylo, t_yhi = _tent_lines(tent, speed,
                                                             opens_down)
                lowers.append(lo_line)
                uppers.append(up_line)
                y_lo = max(y_lo, t_ylo)
                y_hi = min(y_hi, t_yhi)
            if y_hi <= y_lo:
                continue
            part = _strip_area(lowers, uppers, y_lo, y_hi)
            if sign > 0:
                total += part
            else:
                total -= part
    return max(0.0, total)
