"""Independent feasibility validator.

Checks a solution against every operating rule using only the instance and
the solution itself: it rebuilds ledgers, berth occupancies, channel event
timelines and yard geometry from scratch rather than trusting any state the
constructor kept.  Structural problems (dangling ids, missing schedules)
are reported with kind "structural"; rule breaches use per-rule kinds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import (CAPE_TONNES, HOURS_PER_DAY, MAX_LEAD_HOURS,
                    MAX_LOADING_GAP_HOURS, MIN_BUILD_HOURS, TIME_TOL,
                    TONNES_TOL, Instance, Solution, day_of, day_start,
                    stockpile_length)
from .rail import Router

_HEADWAY = 0.25


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    subjects: tuple[str, ...] = ()

    def __str__(self):
        return f"[{self.kind}] {self.message}"


def validate(instance: Instance, solution: Solution) -> list[Violation]:
    """Return all constraint violations; an empty list means feasible."""
    out: list[Violation] = []
    structural_ok = _check_structure(instance, solution, out)
    if not structural_ok:
        return out
    _check_arrival_grid(instance, solution, out)
    _check_inbound_ledgers(instance, solution, out)
    _check_build_windows(instance, solution, out)
    _check_reclaim_rules(instance, solution, out)
    _check_outbound(instance, solution, out)
    _check_berths(instance, solution, out)
    _check_yard(instance, solution, out)
    _check_channel(instance, solution, out)
    return out


# ---------------------------------------------------------------------------

def _check_structure(instance, solution, out) -> bool:
    ok = True
    known_vessels = {v.id for v in instance.vessels}
    known_stockpiles = {s.id for v in instance.vessels for s in v.stockpiles}
    for vid in solution.vessels:
        if vid not in known_vessels:
            out.append(Violation("structural", f"unknown vessel id {vid}", (vid,)))
            ok = False
    for sid in solution.stockpiles:
        if sid not in known_stockpiles:
            out.append(Violation("structural", f"unknown stockpile id {sid}", (sid,)))
            ok = False
    for v in instance.vessels:
        if v.id not in solution.vessels:
            out.append(Violation("structural", f"vessel {v.id} unscheduled", (v.id,)))
            ok = False
        for s in v.stockpiles:
            sched = solution.stockpiles.get(s.id)
            if sched is None:
                out.append(Violation("structural",
                                     f"stockpile {s.id} unscheduled", (s.id,)))
                ok = False
                continue
            comp_ids = {c.id for c in s.components}
            if set(sched.arrivals) != comp_ids:
                out.append(Violation("structural",
                                     f"stockpile {s.id}: component ids mismatch",
                                     (s.id,)))
                ok = False
                continue
            for c in s.components:
                total = sum(w for w, _ in sched.arrivals[c.id])
                if abs(total - c.tonnes) > TONNES_TOL:
                    out.append(Violation(
                        "structural",
                        f"component {c.id}: railed {total} of {c.tonnes} t",
                        (s.id, c.id)))
                    ok = False
            if v.terminal == "KCT":
                if sched.pad is None or sched.position is None or sched.reclaimer is None:
                    out.append(Violation(
                        "structural",
                        f"KCT stockpile {s.id} missing pad/position/reclaimer",
                        (s.id,)))
                    ok = False
    return ok


def _check_arrival_grid(instance, solution, out):
    for sid, sched in solution.stockpiles.items():
        for comp, arrs in sched.arrivals.items():
            for w, t in arrs:
                if t < -TIME_TOL:
                    out.append(Violation("arrival-grid",
                                         f"{sid}/{comp}: negative arrival time",
                                         (sid,)))
                if abs(t - round(t / HOURS_PER_DAY) * HOURS_PER_DAY) > TIME_TOL:
                    out.append(Violation(
                        "arrival-grid",
                        f"{sid}/{comp}: arrival at {t} not a day start", (sid,)))
                if w <= 0:
                    out.append(Violation("arrival-grid",
                                         f"{sid}/{comp}: non-positive tonnage",
                                         (sid,)))


def _check_inbound_ledgers(instance, solution, out):
    router = Router(instance.rail_graph)
    arc_used: dict[tuple[str, int], float] = {}
    dit_used: dict[tuple[str, int], float] = {}
    dssc_used: dict[tuple[str, int], float] = {}
    sp_vessel = instance.stockpile_vessel()
    for v in instance.vessels:
        for s in v.stockpiles:
            sched = solution.stockpiles[s.id]
            stream = None
            if v.terminal == "KCT" and sched.pad is not None:
                stream = instance.terminals["KCT"].yard.stream_for_pad(sched.pad).id
            for c in s.components:
                route = router.resolve(c.load_point, v.terminal)
                for w, t in sched.arrivals[c.id]:
                    day = day_of(t)
                    for arc in route:
                        key = (arc.id, day)
                        arc_used[key] = arc_used.get(key, 0.0) + w
                    dit_used[(v.terminal, day)] = dit_used.get((v.terminal, day), 0.0) + w
                    if stream is not None:
                        dssc_used[(stream, day)] = dssc_used.get((stream, day), 0.0) + w
    for (arc_id, day), used in sorted(arc_used.items()):
        cap = instance.rail_graph.arc(arc_id).daily_capacity
        if used > cap + TONNES_TOL:
            out.append(Violation("rail-capacity",
                                 f"arc {arc_id} day {day}: {used:.3f} > {cap}",
                                 (arc_id,)))
    for (term, day), used in sorted(dit_used.items()):
        cap = instance.terminals[term].daily_inbound
        if used > cap + TONNES_TOL:
            out.append(Violation("inbound-capacity",
                                 f"{term} DIT day {day}: {used:.3f} > {cap}",
                                 (term,)))
    if "KCT" in instance.terminals and instance.terminals["KCT"].yard:
        caps = {st.id: st.daily_capacity
                for st in instance.terminals["KCT"].yard.streams}
        for (stream, day), used in sorted(dssc_used.items()):
            if used > caps[stream] + TONNES_TOL:
                out.append(Violation(
                    "stream-capacity",
                    f"{stream} day {day}: {used:.3f} > {caps[stream]}",
                    (stream,)))


def _check_build_windows(instance, solution, out):
    for v in instance.vessels:
        for s in v.stockpiles:
            sched = solution.stockpiles[s.id]
            b_lo, b_hi = sched.build_start, sched.build_end
            if b_lo < v.eta - MAX_LEAD_HOURS - TIME_TOL:
                out.append(Violation(
                    "build-window",
                    f"stockpile {s.id}: stacking starts {b_lo:.2f}, more than "
                    f"ten days before ETA {v.eta:.2f}", (s.id,)))
            span = (b_hi + HOURS_PER_DAY) - b_lo
            if span > s.max_build_days * HOURS_PER_DAY + TIME_TOL:
                out.append(Violation(
                    "build-window",
                    f"stockpile {s.id}: build span {span:.1f} h exceeds "
                    f"{s.max_build_days} days", (s.id,)))
            earliest = max(b_hi + HOURS_PER_DAY, b_lo + MIN_BUILD_HOURS)
            if sched.load_start < earliest - TIME_TOL:
                out.append(Violation(
                    "reclaim-after-build",
                    f"stockpile {s.id}: reclaim at {sched.load_start:.2f} "
                    f"before effective build end {earliest:.2f}", (s.id,)))


def _check_reclaim_rules(instance, solution, out):
    for v in instance.vessels:
        cfg = instance.terminals[v.terminal]
        rate = cfg.yard.machine_rate if v.terminal == "KCT" else cfg.reclaim_rate
        sched_v = solution.vessels[v.id]
        prev_end = None
        for s in v.stockpiles:
            sched = solution.stockpiles[s.id]
            dur = sched.load_end - sched.load_start
            want = s.tonnes / rate
            if abs(dur - want) > 1e-6:
                out.append(Violation(
                    "reclaim-duration",
                    f"stockpile {s.id}: duration {dur:.6f} h, expected {want:.6f}",
                    (s.id,)))
            if prev_end is not None:
                gap = sched.load_start - prev_end
                if gap < -TIME_TOL:
                    out.append(Violation(
                        "reclaim-order",
                        f"stockpile {s.id} starts before its predecessor ends",
                        (v.id, s.id)))
                elif v.terminal == "KCT" and gap > MAX_LOADING_GAP_HOURS + TIME_TOL:
                    out.append(Violation(
                        "loading-gap",
                        f"vessel {v.id}: {gap:.2f} h pause before {s.id}",
                        (v.id, s.id)))
            prev_end = sched.load_end
        load_start, load_end = solution.load_interval(v)
        if sched_v.arrival < v.eta - TIME_TOL:
            out.append(Violation("vessel-timing",
                                 f"vessel {v.id} arrives before its ETA", (v.id,)))
        if sched_v.arrival > load_start + TIME_TOL:
            out.append(Violation("vessel-timing",
                                 f"vessel {v.id} loads before berthing", (v.id,)))
        if sched_v.departure < load_end - TIME_TOL:
            out.append(Violation("vessel-timing",
                                 f"vessel {v.id} departs before loading ends",
                                 (v.id,)))


def _interval_overlap(a1, a2, b1, b2) -> bool:
    return a1 < b2 - TIME_TOL and b1 < a2 - TIME_TOL


def _check_outbound(instance, solution, out):
    # DOT: reclaimed tonnage booked pro-rata over the days a load overlaps.
    used: dict[tuple[str, int], float] = {}
    sp_vessel = instance.stockpile_vessel()
    for sid, sched in solution.stockpiles.items():
        v = sp_vessel[sid]
        cfg = instance.terminals[v.terminal]
        rate = cfg.yard.machine_rate if v.terminal == "KCT" else cfg.reclaim_rate
        k = day_of(sched.load_start)
        while day_start(k) < sched.load_end - TIME_TOL:
            overlap = (min(sched.load_end, day_start(k + 1))
                       - max(sched.load_start, day_start(k)))
            if overlap > TIME_TOL:
                key = (v.terminal, k)
                used[key] = used.get(key, 0.0) + rate * overlap
            k += 1
    for (term, day), tonnes in sorted(used.items()):
        cap = instance.terminals[term].daily_outbound
        if tonnes > cap + 1e-3:
            out.append(Violation("outbound-capacity",
                                 f"{term} DOT day {day}: {tonnes:.3f} > {cap}",
                                 (term,)))
    # Ship loaders: at most three concurrent reclaim jobs at KCT.
    jobs = [(solution.stockpiles[s.id].load_start,
             solution.stockpiles[s.id].load_end, s.id)
            for v in instance.vessels if v.terminal == "KCT"
            for s in v.stockpiles]
    yard = instance.terminals["KCT"].yard if "KCT" in instance.terminals else None
    if yard is not None and _max_concurrency(jobs) > yard.ship_loaders:
        out.append(Violation("ship-loaders",
                             "more than three concurrent reclaim jobs at KCT"))


def _max_concurrency(intervals) -> int:
    events = []
    for s, e, *_ in intervals:
        events.append((s, 1))
        events.append((e, -1))
    events.sort(key=lambda ev: (ev[0], ev[1]))
    worst = active = 0
    for _, delta in events:
        active += delta
        worst = max(worst, active)
    return worst


def _check_berths(instance, solution, out):
    by_term: dict[str, list] = {t: [] for t in instance.terminals}
    for v in instance.vessels:
        sched = solution.vessels[v.id]
        by_term[v.terminal].append((sched.arrival, sched.departure, v.id))
    for term, intervals in by_term.items():
        cap = instance.terminals[term].berths
        if _max_concurrency(intervals) > cap:
            out.append(Violation("berth-capacity",
                                 f"more than {cap} vessels berthed at {term}",
                                 (term,)))


def _check_yard(instance, solution, out):
    if "KCT" not in instance.terminals or instance.terminals["KCT"].yard is None:
        return
    yard = instance.terminals["KCT"].yard
    speed = yard.machine_speed
    by_pad: dict[str, list] = {p: [] for p in yard.pad_lengths}
    by_machine: dict[str, list] = {m: [] for m in yard.reclaimer_pads}
    sp_vessel = instance.stockpile_vessel()
    for v in instance.vessels:
        if v.terminal != "KCT":
            continue
        for s in v.stockpiles:
            sched = solution.stockpiles[s.id]
            length = stockpile_length(s.tonnes)
            half = length / 2.0
            y1, y2 = sched.position - half, sched.position + half
            pad_len = yard.pad_lengths[sched.pad]
            if y1 < -1e-6 or y2 > pad_len + 1e-6:
                out.append(Violation("pad-bounds",
                                     f"stockpile {s.id} overhangs pad {sched.pad}",
                                     (s.id,)))
            if sched.reclaimer not in yard.reclaimers_for_pad(sched.pad):
                out.append(Violation(
                    "reclaimer-assignment",
                    f"{sched.reclaimer} cannot serve pad {sched.pad}",
                    (s.id,)))
                continue
            rect = (sched.build_start, sched.load_end, y1, y2)
            by_pad[sched.pad].append((rect, s.id))
            by_machine[sched.reclaimer].append(
                (sched.load_start, sched.load_end, sched.position, y1, y2, s.id))
    for pad, rects in by_pad.items():
        for i in range(len(rects)):
            for j in range(i + 1, len(rects)):
                (a, sa), (b, sb) = rects[i], rects[j]
                if (_interval_overlap(a[0], a[1], b[0], b[1])
                        and a[2] < b[3] - 1e-6 and b[2] < a[3] - 1e-6):
                    out.append(Violation(
                        "pad-overlap",
                        f"stockpiles {sa} and {sb} overlap on pad {pad}",
                        (sa, sb)))
    # Per machine: sequential jobs must be reachable at travel speed.
    for name, jobs in by_machine.items():
        jobs.sort()
        home = yard.home_position(name)
        prev_end, prev_pos = 0.0, home
        for t1, t2, pos, _y1, _y2, sid in jobs:
            if t1 < prev_end - TIME_TOL:
                out.append(Violation("reclaimer-overlap",
                                     f"{name} runs two jobs at once near {sid}",
                                     (name, sid)))
            elif abs(pos - prev_pos) > speed * (t1 - prev_end) + 1e-6:
                out.append(Violation(
                    "reclaimer-reach",
                    f"{name} cannot travel to {sid} in time", (name, sid)))
            prev_end, prev_pos = t2, pos
    # Paired machines must never need to cross: each job's shadow tent must
    # exclude every committed position of the paired machine.
    pairs = sorted({tuple(sorted(yard.rail_pair(m))) for m in yard.reclaimer_pads})
    for low, high in pairs:
        for t1, t2, pos, y1, y2, sid in by_machine[low]:
            for u1, u2, qos, _z1, _z2, tid in by_machine[high]:
                # low machine's job shadows heights below y2.
                slack = _tent_clearance(t1, t2, u1, u2, speed)
                if qos < y2 - slack - 1e-6:
                    out.append(Violation(
                        "reclaimer-clash",
                        f"{high} job {tid} sits inside the shadow of "
                        f"{low} job {sid}", (sid, tid)))
        for t1, t2, pos, y1, y2, sid in by_machine[high]:
            for u1, u2, qos, _z1, _z2, tid in by_machine[low]:
                slack = _tent_clearance(t1, t2, u1, u2, speed)
                if qos > y1 + slack + 1e-6:
                    out.append(Violation(
                        "reclaimer-clash",
                        f"{low} job {tid} sits inside the shadow of "
                        f"{high} job {sid}", (sid, tid)))


def _tent_clearance(t1, t2, u1, u2, speed) -> float:
    """Least tent height drop over the other job's active interval.

    The tent anchored on [t1, t2] decays at the travel speed outside it; the
    other job holds its position throughout [u1, u2], so the binding moment
    is the one closest to [t1, t2].
    """
    if u2 <= t1:
        gap = t1 - u2
    elif u1 >= t2:
        gap = u1 - t2
    else:
        gap = 0.0
    return speed * gap


def _check_channel(instance, solution, out):
    transit = {name: cfg.transit_hours for name, cfg in instance.terminals.items()}
    events: dict[str, list] = {t: [] for t in instance.terminals}
    transits = []
    for v in instance.vessels:
        sched = solution.vessels[v.id]
        dest_transit = transit[v.terminal]
        for name, term_transit in transit.items():
            if term_transit <= dest_transit + TIME_TOL:
                offset = dest_transit - term_transit
                events[name].append((sched.arrival - offset, "arr", v.id))
                events[name].append((sched.departure + offset, "dep", v.id))
        transits.append((sched.arrival - dest_transit, sched.arrival, v.id))
        transits.append((sched.departure, sched.departure + dest_transit, v.id))
        if v.is_cape:
            if not instance.tides.contains(sched.departure):
                out.append(Violation(
                    "tidal-window",
                    f"cape {v.id} departs at {sched.departure:.2f} outside "
                    f"any tidal window", (v.id,)))
    for s, e, vid in transits:
        if s < -TIME_TOL:
            out.append(Violation("channel-horizon",
                                 f"vessel {vid} transit starts before time zero",
                                 (vid,)))
    for name, evs in events.items():
        clear = 2.0 * transit[name]
        n = len(evs)
        for i in range(n):
            ti, ki, vi = evs[i]
            for j in range(i + 1, n):
                tj, kj, vj = evs[j]
                if ki == kj:
                    if abs(ti - tj) < _HEADWAY - TIME_TOL:
                        out.append(Violation(
                            "channel-headway",
                            f"{ki} events of {vi} and {vj} at {name} only "
                            f"{abs(ti - tj) * 60:.1f} min apart", (vi, vj)))
                else:
                    dep_t, arr_t = (ti, tj) if ki == "dep" else (tj, ti)
                    dep_v, arr_v = (vi, vj) if ki == "dep" else (vj, vi)
                    if dep_t < arr_t - TIME_TOL and arr_t - dep_t < clear - TIME_TOL:
                        out.append(Violation(
                            "channel-clearance",
                            f"arrival of {arr_v} at {name} only "
                            f"{(arr_t - dep_t) * 60:.1f} min after departure "
                            f"of {dep_v}", (arr_v, dep_v)))
    worst = _max_concurrency(transits)
    if worst > 4:
        out.append(Violation("channel-transits",
                             f"{worst} concurrent channel transits"))
