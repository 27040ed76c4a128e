"""Greedy order-driven schedule construction.

Vessels are scheduled one at a time in a caller-supplied order; committed
decisions are never revisited by later vessels.  CCT and NCT vessels get the
simplified treatment (rail as early as possible, then search a loading
period); KCT vessels get full placement enumeration over pads, pad gaps,
reclaimers, reclaimer gaps and critical heights, with regret backtracking
inside the vessel when a later stockpile or the loading period cannot be
accommodated.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace

from .channel import ChannelTimeline
from .errors import HorizonError, InputError, SchedulingError
from .model import (HOURS_PER_DAY, MAX_LEAD_HOURS, MAX_LOADING_GAP_HOURS,
                    TIME_TOL, TONNES_TOL, Instance, Solution, Stockpile,
                    StockpileSchedule, Vessel, VesselSchedule, average_delay,
                    day_of, day_start, first_day_at_or_after,
                    stockpile_length)
from .rail import RailingInfeasible, Router, build_ledger, rail_stockpile
from .yard import (INF, PadSpace, ReclaimerState, critical_heights,
                   earliest_start, own_flexibility_loss,
                   paired_flexibility_loss, reach_left, reach_right,
                   tent_tau_blocks)

# Placement lists are truncated to this many remembered alternatives.
PLACEMENT_CAP = 256
# Lazy enumeration stops once lower bounds fall this many whole hours past
# the best completion found; regret re-enumerates in full if it runs dry.
LAZY_WINDOW_HOURS = 12.0
_MIN_KEPT = 16
_REGRET_LIMIT = 200_000


def _floor_hour(t: float) -> int:
    return int(math.floor(t + TIME_TOL))


@dataclass
class Placement:
    end: float
    pad: str
    position: float
    reclaimer: str
    tau: float
    duration: float
    length: float
    arrivals: dict
    build_start: float
    build_end: float
    stack_end: float
    loss: float = math.nan  # filled in once the candidate survives filtering

    @property
    def sort_key(self):
        return (_floor_hour(self.end), self.loss, self.end, self.pad,
                self.position, self.reclaimer)

    @property
    def rect(self):
        half = self.length / 2.0
        return (self.build_start, self.end,
                self.position - half, self.position + half)


def _full_regions(intervals, cap: int):
    """Merged time regions where at least ``cap`` intervals are active."""
    events = []
    for s, e, *_ in intervals:
        events.append((s, 1))
        events.append((e, -1))
    events.sort(key=lambda ev: (ev[0], ev[1]))
    regions = []
    active = 0
    start = None
    for t, delta in events:
        active += delta
        if active >= cap and start is None:
            start = t
        elif active < cap and start is not None:
            if t > start + TIME_TOL:
                regions.append((start, t))
            start = None
    return regions


class EvaluationState:
    """Mutable bookkeeping for one construction run."""

    def __init__(self, instance: Instance):
        self.instance = instance
        self.router = Router(instance.rail_graph)
        self.ledger = build_ledger(instance)
        self.channel = ChannelTimeline(instance.terminals)
        self.berths = {t: [] for t in instance.terminals}
        self.loaders: list[tuple[float, float, str]] = []
        self.vessel_scheds: dict[str, VesselSchedule] = {}
        self.stockpile_scheds: dict[str, StockpileSchedule] = {}
        kct = instance.terminals.get("KCT")
        self.yard = kct.yard if kct else None
        self.pads: dict[str, PadSpace] = {}
        self.machines: dict[str, ReclaimerState] = {}
        if self.yard is not None:
            for pad, length in self.yard.pad_lengths.items():
                self.pads[pad] = PadSpace(length)
            for name in sorted(self.yard.reclaimer_pads):
                self.machines[name] = ReclaimerState(
                    name, self.yard.home_position(name),
                    self.yard.rail_length(name), self.yard.machine_speed)

    def partial_solution(self) -> Solution:
        return Solution(vessels=dict(self.vessel_scheds),
                        stockpiles=dict(self.stockpile_scheds))

    def _dot_guard(self, terminal: str, rate: float, duration: float):
        ledger = self.ledger

        def guard(t: float):
            end = t + duration
            k = day_of(t)
            while day_start(k) < end - TIME_TOL:
                ds, de = day_start(k), day_start(k + 1)
                overlap = min(end, de) - max(t, ds)
                if overlap > TIME_TOL:
                    res = ledger.residual("dot", terminal, k)
                    if rate * overlap > res + TONNES_TOL:
                        if t >= ds - TIME_TOL:
                            return max(de - res / rate, t + TIME_TOL)
                        return max(ds, de - res / rate)
                k += 1
            return None

        return guard

    def _reserve_dot(self, terminal: str, rate: float, start: float, end: float):
        k = day_of(start)
        while day_start(k) < end - TIME_TOL:
            overlap = min(end, day_start(k + 1)) - max(start, day_start(k))
            if overlap > TIME_TOL:
                self.ledger.reserve("dot", terminal, k, rate * overlap)
            k += 1

    def _reserve_arrivals(self, stockpile: Stockpile, terminal: str,
                          arrivals: dict, stream: str | None):
        for comp in stockpile.components:
            route = self.router.resolve(comp.load_point, terminal)
            for tonnes, t in arrivals[comp.id]:
                day = day_of(t)
                for arc in route:
                    self.ledger.reserve("arc", arc.id, day, tonnes)
                self.ledger.reserve("dit", terminal, day, tonnes)
                if stream is not None:
                    self.ledger.reserve("dssc", stream, day, tonnes)


# ---------------------------------------------------------------------------
# CCT / NCT
# ---------------------------------------------------------------------------

def _schedule_simple_vessel(state: EvaluationState, v: Vessel):
    cfg = state.instance.terminals[v.terminal]
    rate = cfg.reclaim_rate
    base_day = first_day_at_or_after(max(v.eta - MAX_LEAD_HOURS, 0.0))
    railings = []
    for s in v.stockpiles:
        start_day = base_day
        while True:
            txn = state.ledger.begin()
            try:
                result = rail_stockpile(s, state.router, v.terminal,
                                        state.ledger, start_day)
                state.ledger.commit(txn)
                railings.append(result)
                break
            except RailingInfeasible as exc:
                state.ledger.rollback(txn)
                start_day = exc.first_day + 1

    load_dur = v.tonnes / rate
    t0 = max(max(r.effective_build_end for r in railings), v.eta)
    dot_guard = state._dot_guard(v.terminal, rate, load_dur)
    berth_regions = _full_regions(state.berths[v.terminal], cfg.berths)
    tides = state.instance.tides
    tau = t0
    arrival_floor = v.eta
    for _ in range(_REGRET_LIMIT):
        bump = dot_guard(tau)
        if bump is not None:
            tau = max(tau + TIME_TOL, bump)
            continue
        arrival = state.channel.latest_feasible_arrival(
            v.terminal, tau, floor_t=arrival_floor)
        if arrival is None:
            tau = state.channel.next_feasible_arrival(v.terminal, tau + TIME_TOL)
            continue
        departure = state.channel.next_feasible_departure(
            v.terminal, tau + load_dur, v.is_cape, tides)
        conflict = None
        for r1, r2 in berth_regions:
            if r1 < departure - TIME_TOL and r2 > arrival + TIME_TOL:
                conflict = (r1, r2)
                break
        if conflict is not None:
            if conflict[1] <= tau + TIME_TOL:
                arrival_floor = max(arrival_floor, conflict[1])
            else:
                tau = max(tau + TIME_TOL, conflict[1])
            continue
        _commit_simple(state, v, railings, tau, load_dur, arrival, departure)
        return
    raise SchedulingError(f"no loading period found for {v.id}",
                          state.partial_solution())


def _commit_simple(state, v, railings, tau, load_dur, arrival, departure):
    cfg = state.instance.terminals[v.terminal]
    state._reserve_dot(v.terminal, cfg.reclaim_rate, tau, tau + load_dur)
    state.channel.commit(v.id, v.terminal, arrival, departure,
                         v.is_cape, state.instance.tides)
    bisect.insort(state.berths[v.terminal], (arrival, departure, v.id))
    t = tau
    for s, result in zip(v.stockpiles, railings):
        dur = s.tonnes / cfg.reclaim_rate
        state.stockpile_scheds[s.id] = StockpileSchedule(
            stockpile_id=s.id, arrivals=result.arrivals,
            load_start=t, load_end=t + dur)
        t += dur
    state.vessel_scheds[v.id] = VesselSchedule(v.id, arrival, departure)


# ---------------------------------------------------------------------------
# KCT placement enumeration
# ---------------------------------------------------------------------------

def _enumerate_placements(state: EvaluationState, v: Vessel, s: Stockpile,
                          prev_end: float | None, vessel_floor: float,
                          lazy: bool = True):
    yard = state.yard
    speed = yard.machine_speed
    rate = yard.machine_rate
    dur = s.tonnes / rate
    length = stockpile_length(s.tonnes)
    half = length / 2.0
    lead = max(v.eta - MAX_LEAD_HOURS, 0.0)
    # Loading cannot begin before the vessel can actually berth, i.e. the
    # first channel-feasible arrival at or after its ETA.
    lo_floor = max(vessel_floor,
                   prev_end if prev_end is not None else vessel_floor)
    hi_cap = prev_end + MAX_LOADING_GAP_HOURS if prev_end is not None else INF

    cfg = state.instance.terminals["KCT"]
    loader_regions = _full_regions(state.loaders, yard.ship_loaders)
    berth_regions = _full_regions(state.berths["KCT"], cfg.berths)
    blocked = sorted(loader_regions + berth_regions)
    dot_guard = state._dot_guard("KCT", rate, dur)
    if prev_end is not None:
        # The vessel stays berthed from the previous reclaim through this
        # one, so the first moment all berths fill after prev_end caps how
        # far this reclaim may extend.
        berth_cap = INF
        for r1, r2 in berth_regions:
            if r2 > prev_end + TIME_TOL:
                berth_cap = min(berth_cap, r1)
        hi_cap = min(hi_cap, berth_cap - dur)

    machine_gaps = {name: m.gaps() for name, m in state.machines.items()}
    pairs = {name: yard.rail_pair(name) for name in state.machines}
    combos = []
    for pad in yard.pads():
        space = state.pads[pad]
        for gap in space.gaps:
            gt1, gt2, gy1, gy2 = gap
            if gy2 - gy1 < length - 1e-6:
                continue
            start_day = first_day_at_or_after(max(gt1, lead))
            stack_lb = day_start(start_day) + 72.0
            if gt2 - max(gt1, day_start(start_day)) < 72.0 + dur - TIME_TOL:
                continue
            if max(stack_lb, lo_floor) > hi_cap + TIME_TOL:
                continue
            for rm in yard.reclaimers_for_pad(pad):
                for gi, rgap in enumerate(machine_gaps[rm]):
                    pe, pp, ns, np_ = rgap
                    if ns != INF and ns - max(pe, stack_lb, lo_floor) < dur - TIME_TOL:
                        continue
                    if max(stack_lb, pe, lo_floor) > hi_cap + TIME_TOL:
                        continue
                    lb = max(stack_lb, pe, lo_floor) + dur
                    combos.append((lb, pad, gap, rm, gi, rgap))
    combos.sort(key=lambda c: (c[0], c[1], c[2], c[3], c[4]))

    rail_cache: dict[tuple, object] = {}
    kept: list[tuple[Placement, object, tuple, float, bool]] = []
    best_end = INF
    for lb, pad, gap, rm, gi, rgap in combos:
        if lazy and len(kept) >= _MIN_KEPT and \
                _floor_hour(lb) > _floor_hour(best_end) + LAZY_WINDOW_HOURS:
            break
        key = (pad, gap)
        railing = rail_cache.get(key, "miss")
        if railing == "miss":
            railing = _tentative_rail(state, s, pad, gap, lead)
            rail_cache[key] = railing
        if railing is None:
            continue
        stack_end = railing.effective_build_end
        gt1, gt2, gy1, gy2 = gap
        if stack_end + dur > gt2 + TIME_TOL:
            continue
        pe, pp, ns, np_ = rgap
        rect = (gt1, gt2, gy1 + half, gy2 - half)
        if rect[3] < rect[2] - 1e-6:
            continue
        machine = state.machines[rm]
        pair = pairs[rm]
        is_low = rm == pair[0]
        all_other_jobs = state.machines[pair[1] if is_low else pair[0]].jobs
        lo_base = max(stack_end, lo_floor)
        # Only paired jobs whose clash tents can reach the candidate's start
        # window matter; tents decay within one axis-crossing time.
        axis_h = machine.axis_length / speed
        other_jobs = [
            k for k in all_other_jobs
            if k[1] + axis_h > lo_base
            and (hi_cap == INF or k[0] - axis_h - dur < hi_cap + dur)]
        for h in critical_heights(rect, rgap, dur, lo_base, speed, other_jobs):
            lo = max(lo_base, reach_left(pe, pp, h, speed), gt1)
            hi = min(gt2, reach_right(ns, np_, h, speed)) - dur
            hi = min(hi, hi_cap)
            if lo > hi + TIME_TOL:
                continue
            edge = h + half if is_low else h - half
            blocks = tent_tau_blocks(h, dur, edge, is_low, other_jobs, speed)
            tau = earliest_start(lo, hi, dur, blocks, blocked, dot_guard)
            if tau is None:
                continue
            end = tau + dur
            placement = Placement(
                end=end, pad=pad, position=h, reclaimer=rm,
                tau=tau, duration=dur, length=length,
                arrivals=railing.arrivals, build_start=railing.build_start,
                build_end=railing.build_end, stack_end=stack_end)
            kept.append((placement, machine, rgap, edge, is_low))
            best_end = min(best_end, end)
    if lazy and kept:
        # Keep only completions inside the lazy window so this list is an
        # exact prefix of the full enumeration (regret can resume from it).
        cutoff = _floor_hour(best_end) + LAZY_WINDOW_HOURS
        kept = [row for row in kept if _floor_hour(row[0].end) <= cutoff]
    # Flexibility loss only breaks ties between candidates completing within
    # the same whole hour; leave it zero where the hour is unique.
    by_hour: dict[int, int] = {}
    for row in kept:
        hour = _floor_hour(row[0].end)
        by_hour[hour] = by_hour.get(hour, 0) + 1
    for placement, machine, rgap, edge, is_low in kept:
        if by_hour[_floor_hour(placement.end)] > 1:
            placement.loss = _flexibility_loss(
                state, machine, rgap, placement.tau, dur, placement.position,
                edge, is_low, machine_gaps)
        else:
            placement.loss = 0.0
    placements = sorted((row[0] for row in kept), key=lambda p: p.sort_key)
    return placements[:PLACEMENT_CAP]


def _tentative_rail(state, s, pad, gap, lead):
    start_day = first_day_at_or_after(max(gap[0], lead))
    stream = state.yard.stream_for_pad(pad).id
    txn = state.ledger.begin()
    try:
        result = rail_stockpile(s, state.router, "KCT", state.ledger,
                                start_day, stream=stream)
    except RailingInfeasible:
        state.ledger.rollback(txn)
        return None
    state.ledger.rollback(txn)
    return result


def _flexibility_loss(state, machine, rgap, tau, dur, h, edge, is_low,
                      machine_gaps):
    yard = state.yard
    speed = yard.machine_speed
    axis = machine.axis_length
    own = own_flexibility_loss(rgap, tau, dur, h, speed, axis)
    pair = yard.rail_pair(machine.name)
    other = state.machines[pair[1] if is_low else pair[0]]
    cand_tent = (edge, tau, tau + dur)
    # The committing machine's jobs bounding this gap already shadow part of
    # the plane; only newly shadowed area counts as loss.
    prev_job = None
    next_job = None
    for job in machine.jobs:
        if job[1] <= tau + TIME_TOL:
            prev_job = job
        elif job[0] >= tau + dur - TIME_TOL and next_job is None:
            next_job = job
    neighbour_tents = []
    for job in (prev_job, next_job):
        if job is not None:
            jedge = job[4] if is_low else job[3]
            neighbour_tents.append((jedge, job[0], job[1]))
    # The tent vanishes once its flanks hit the axis boundary facing the
    # paired machine; beyond that time span it cannot shadow anything.
    span = (edge if is_low else axis - edge) / speed
    t_lo = tau - span - TIME_TOL
    t_hi = tau + dur + span + TIME_TOL
    gaps = [g for g in machine_gaps[other.name]
            if g[0] < t_hi and (g[2] == INF or g[2] > t_lo)]
    paired = paired_flexibility_loss(cand_tent, neighbour_tents, gaps,
                                     speed, axis, opens_down=is_low)
    return own + paired


# ---------------------------------------------------------------------------
# KCT vessel driver with regret backtracking
# ---------------------------------------------------------------------------

@dataclass
class _Frame:
    stockpile: Stockpile
    placements: list
    index: int
    undo: dict = field(default_factory=dict)
    prev_end: float | None = None
    lazy: bool = True
    vessel_floor: float = 0.0

    @property
    def chosen(self) -> Placement:
        return self.placements[self.index]


def _commit_placement(state: EvaluationState, v: Vessel, s: Stockpile,
                      placement: Placement) -> dict:
    stream = state.yard.stream_for_pad(placement.pad).id
    txn = state.ledger.begin()
    state._reserve_arrivals(s, "KCT", placement.arrivals, stream)
    state._reserve_dot("KCT", state.yard.machine_rate,
                       placement.tau, placement.end)
    ledger_log = state.ledger.commit(txn)
    pad_space = state.pads[placement.pad]
    pad_snap = pad_space.snapshot()
    pad_space.commit(placement.rect, s.id)
    machine = state.machines[placement.reclaimer]
    machine_snap = machine.snapshot()
    half = placement.length / 2.0
    machine.commit(placement.tau, placement.end, placement.position,
                   placement.position - half, placement.position + half, s.id)
    loader = (placement.tau, placement.end, s.id)
    bisect.insort(state.loaders, loader)
    state.stockpile_scheds[s.id] = StockpileSchedule(
        stockpile_id=s.id, arrivals=placement.arrivals,
        load_start=placement.tau, load_end=placement.end,
        pad=placement.pad, position=placement.position,
        reclaimer=placement.reclaimer)
    return {"ledger": ledger_log, "pad": placement.pad, "pad_snap": pad_snap,
            "machine": placement.reclaimer, "machine_snap": machine_snap,
            "loader": loader, "sid": s.id}


def _undo_placement(state: EvaluationState, undo: dict):
    state.ledger.rollback(undo["ledger"])
    state.pads[undo["pad"]].restore(undo["pad_snap"])
    state.machines[undo["machine"]].restore(undo["machine_snap"])
    state.loaders.remove(undo["loader"])
    del state.stockpile_scheds[undo["sid"]]


def _loading_period_kct(state: EvaluationState, v: Vessel,
                        first_start: float, last_end: float):
    """Returns ("ok", arrival, departure), ("shift", floor) when the vessel
    cannot reach a berth by the committed first reclaim start (placements
    must restart no earlier than ``floor``), or ("regret", None) when the
    berth clashes inside the stay and another placement must be tried."""
    cfg = state.instance.terminals["KCT"]
    berth_regions = _full_regions(state.berths["KCT"], cfg.berths)
    arrival_floor = v.eta
    for _ in range(1000):
        arrival = state.channel.latest_feasible_arrival(
            "KCT", first_start, floor_t=arrival_floor)
        if arrival is None:
            floor = state.channel.next_feasible_arrival(
                "KCT", max(first_start, arrival_floor) + TIME_TOL)
            return ("shift", floor)
        departure = state.channel.next_feasible_departure(
            "KCT", last_end, v.is_cape, state.instance.tides)
        conflict = None
        for r1, r2 in berth_regions:
            if r1 < departure - TIME_TOL and r2 > arrival + TIME_TOL:
                conflict = (r1, r2)
                break
        if conflict is None:
            return ("ok", arrival, departure)
        if conflict[1] <= first_start + TIME_TOL:
            arrival_floor = max(arrival_floor, conflict[1])
            continue
        return ("regret", None)
    return ("regret", None)


def _regret(state: EvaluationState, v: Vessel, frames: list[_Frame]) -> bool:
    """Undo the most recent placement and advance to its next alternative.

    Returns False when even the first stockpile has no alternatives left.
    """
    while frames:
        frame = frames.pop()
        _undo_placement(state, frame.undo)
        frame.index += 1
        if frame.index >= len(frame.placements) and frame.lazy \
                and len(frame.placements) < PLACEMENT_CAP:
            # Lazy enumeration is a strict prefix of the full list, so the
            # full re-enumeration resumes exactly where the prefix stopped.
            full = _enumerate_placements(state, v, frame.stockpile,
                                         frame.prev_end, frame.vessel_floor,
                                         lazy=False)
            if len(full) > len(frame.placements):
                frame.placements = full
            frame.lazy = False
        if frame.index < len(frame.placements):
            frame.undo = _commit_placement(state, v, frame.stockpile,
                                           frame.chosen)
            frames.append(frame)
            return True
    return False


def _schedule_vessel_kct(state: EvaluationState, v: Vessel):
    frames: list[_Frame] = []
    vessel_floor = state.channel.next_feasible_arrival("KCT", v.eta)
    steps = 0
    while True:
        steps += 1
        if steps > _REGRET_LIMIT:
            raise SchedulingError(f"regret limit exceeded for {v.id}",
                                  state.partial_solution())
        if len(frames) < len(v.stockpiles):
            s = v.stockpiles[len(frames)]
            prev_end = frames[-1].chosen.end if frames else None
            placements = _enumerate_placements(state, v, s, prev_end,
                                               vessel_floor)
            if placements:
                frame = _Frame(stockpile=s, placements=placements, index=0,
                               prev_end=prev_end, vessel_floor=vessel_floor)
                frame.undo = _commit_placement(state, v, s, frame.chosen)
                frames.append(frame)
            elif not _regret(state, v, frames):
                raise SchedulingError(
                    f"no placement for first stockpile of {v.id}",
                    state.partial_solution())
            continue
        first_start = state.stockpile_scheds[v.stockpiles[0].id].load_start
        last_end = state.stockpile_scheds[v.stockpiles[-1].id].load_end
        verdict = _loading_period_kct(state, v, first_start, last_end)
        if verdict[0] == "shift":
            # The vessel cannot reach a berth by its first reclaim start;
            # rebuild every placement no earlier than the attainable berth
            # entry time.
            while frames:
                _undo_placement(state, frames.pop().undo)
            vessel_floor = max(verdict[1], vessel_floor + TIME_TOL)
            continue
        if verdict[0] == "regret":
            if not _regret(state, v, frames):
                raise SchedulingError(
                    f"no loading period for {v.id}", state.partial_solution())
            continue
        _, arrival, departure = verdict
        state.channel.commit(v.id, "KCT", arrival, departure,
                             v.is_cape, state.instance.tides)
        bisect.insort(state.berths["KCT"], (arrival, departure, v.id))
        state.vessel_scheds[v.id] = VesselSchedule(v.id, arrival, departure)
        return


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def construct_schedule(instance: Instance, order) -> Solution:
    """Build a complete feasible schedule processing vessels in ``order``.

    Deterministic: identical instance and order always produce the identical
    solution.  Raises :class:`SchedulingError` carrying the partial solution
    when the horizon data (e.g. the tide table) runs out.
    """
    ids = [v.id for v in instance.vessels]
    if sorted(order) != sorted(ids):
        raise InputError("order must be a permutation of the vessel ids")
    state = EvaluationState(instance)
    by_id = {v.id: v for v in instance.vessels}
    for vid in order:
        v = by_id[vid]
        try:
            if v.terminal == "KCT":
                _schedule_vessel_kct(state, v)
            else:
                _schedule_simple_vessel(state, v)
        except HorizonError as exc:
            raise SchedulingError(f"horizon exhausted while scheduling {vid}: {exc}",
                                  state.partial_solution()) from exc
    solution = Solution(vessels=dict(state.vessel_scheds),
                        stockpiles=dict(state.stockpile_scheds))
    return replace(solution, objective=average_delay(solution, instance))
