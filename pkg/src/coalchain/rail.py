"""Rail network: directed graph, unique route resolution and per-day ledgers.

Coal moves instantly from load points to terminals (travel times ignored);
the only rail-side constraints are daily tonnage caps on arcs, terminal
inbound caps (DIT) and, at KCT, stacker stream caps (DSSC).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .errors import InputError
from .model import (HOURS_PER_DAY, TIME_TOL, TONNES_TOL, Stockpile,
                    day_start)


@dataclass(frozen=True)
class Arc:
    id: str
    tail: str
    head: str
    daily_capacity: float


@dataclass(frozen=True)
class RailGraph:
    """Directed graph from load points to terminals with daily arc caps."""

    nodes: tuple[str, ...]
    arcs: tuple[Arc, ...]
    load_points: tuple[str, ...]

    def __post_init__(self):
        known = set(self.nodes)
        for arc in self.arcs:
            if arc.tail not in known or arc.head not in known:
                raise InputError(f"arc {arc.id}: endpoint not in node list")
            if arc.daily_capacity <= 0:
                raise InputError(f"arc {arc.id}: capacity must be positive")
        for lp in self.load_points:
            if lp not in known:
                raise InputError(f"load point {lp} not in node list")

    def out_arcs(self, node: str) -> list[Arc]:
        return [a for a in self.arcs if a.tail == node]

    def arc(self, arc_id: str) -> Arc:
        for a in self.arcs:
            if a.id == arc_id:
                return a
        raise InputError(f"unknown arc {arc_id}")


class Router:
    """Resolves and caches the unique route from load points to terminals.

    Among minimum-arc-count paths the lexicographically smallest arc-id
    sequence is chosen, so routing is deterministic and instance-independent.
    """

    def __init__(self, graph: RailGraph):
        self.graph = graph
        self._cache: dict[tuple[str, str], tuple[Arc, ...]] = {}
        self._dist: dict[str, dict[str, int]] = {}

    def _distances_to(self, terminal: str) -> dict[str, int]:
        dist = self._dist.get(terminal)
        if dist is not None:
            return dist
        # BFS on reversed arcs.
        into: dict[str, list[Arc]] = {}
        for arc in self.graph.arcs:
            into.setdefault(arc.head, []).append(arc)
        dist = {terminal: 0}
        queue = deque([terminal])
        while queue:
            node = queue.popleft()
            for arc in into.get(node, ()):
                if arc.tail not in dist:
                    dist[arc.tail] = dist[node] + 1
                    queue.append(arc.tail)
        self._dist[terminal] = dist
        return dist

    def resolve(self, load_point: str, terminal: str) -> tuple[Arc, ...]:
        key = (load_point, terminal)
        route = self._cache.get(key)
        if route is not None:
            return route
        if load_point not in self.graph.nodes:
            raise InputError(f"unknown load point {load_point}")
        if terminal not in self.graph.nodes:
            raise InputError(f"unknown terminal node {terminal}")
        dist = self._distances_to(terminal)
        if load_point not in dist:
            raise InputError(f"terminal {terminal} unreachable from {load_point}")
        path = []
        node = load_point
        while node != terminal:
            step = dist[node]
            # Arcs staying on some shortest path, smallest arc id first.
            choices = [a for a in self.graph.out_arcs(node)
                       if dist.get(a.head, math.inf) == step - 1]
            arc = min(choices, key=lambda a: a.id)
            path.append(arc)
            node = arc.head
        route = tuple(path)
        self._cache[key] = route
        return route


def default_rail_graph() -> RailGraph:
    """Hunter-valley style default: three corridors merging towards the port.

    Capacities are calibrated so default synthetic stems remain railable;
    override via the rail graph file for other scenarios.  The NW load
    points see two routes to CCT (via the port junction directly, or via
    the KCT branch); the one-arc-shorter direct branch is always chosen.
    """
    nodes = ("LPNW1", "LPNW2", "LPW1", "LPW2", "LPH1", "LPH2", "LPS1", "LPS2",
             "NWJ", "WSJ", "MUS", "SGT", "MTL", "PRT", "KCT", "CCT", "NCT")
    arcs = (
        Arc("NW1J", "LPNW1", "NWJ", 220_000.0),
        Arc("NW2J", "LPNW2", "NWJ", 220_000.0),
        Arc("NWM", "NWJ", "MUS", 420_000.0),
        Arc("W1J", "LPW1", "WSJ", 200_000.0),
        Arc("W2J", "LPW2", "WSJ", 200_000.0),
        Arc("WSM", "WSJ", "MUS", 360_000.0),
        Arc("MUS", "MUS", "SGT", 700_000.0),
        Arc("H1S", "LPH1", "SGT", 200_000.0),
        Arc("H2S", "LPH2", "SGT", 200_000.0),
        Arc("SGM", "SGT", "MTL", 860_000.0),
        Arc("S1M", "LPS1", "MTL", 180_000.0),
        Arc("S2M", "LPS2", "MTL", 180_000.0),
        Arc("MTP", "MTL", "PRT", 900_000.0),
        Arc("PKT", "PRT", "KCT", 520_000.0),
        Arc("PNT", "PRT", "NCT", 240_000.0),
        Arc("PCT", "PRT", "CCT", 110_000.0),
        Arc("KCC", "KCT", "CCT", 60_000.0),
    )
    load_points = ("LPNW1", "LPNW2", "LPW1", "LPW2", "LPH1", "LPH2", "LPS1", "LPS2")
    return RailGraph(nodes=nodes, arcs=arcs, load_points=load_points)


class DayLedger:
    """Residual per-day tonnage for arcs, DIT, stacker streams and DOT.

    Keys are (kind, resource id); residuals are stored sparsely against the
    configured capacity.  Reservations run inside transactions that snapshot
    prior residuals, so rollback restores every touched value bit-exactly.
    """

    def __init__(self):
        self._capacity: dict[tuple[str, str], float] = {}
        self._residual: dict[tuple[str, str], dict[int, float]] = {}
        self._txn_stack: list[dict[tuple[str, str, int], float]] = []

    def define(self, kind: str, resource: str, daily_capacity: float):
        self._capacity[(kind, resource)] = daily_capacity
        self._residual.setdefault((kind, resource), {})

    def capacity(self, kind: str, resource: str) -> float:
        return self._capacity[(kind, resource)]

    def residual(self, kind: str, resource: str, day: int) -> float:
        key = (kind, resource)
        return self._residual[key].get(day, self._capacity[key])

    def begin(self) -> int:
        self._txn_stack.append({})
        return len(self._txn_stack)

    def reserve(self, kind: str, resource: str, day: int, tonnes: float):
        if tonnes <= 0:
            return
        key = (kind, resource)
        days = self._residual[key]
        current = days.get(day, self._capacity[key])
        if tonnes > current + TONNES_TOL:
            raise InputError(
                f"over-reservation on {kind}/{resource} day {day}: "
                f"{tonnes} > {current}")
        if self._txn_stack:
            log = self._txn_stack[-1]
            log.setdefault((kind, resource, day), current)
        days[day] = current - tonnes

    def commit(self, token: int) -> dict:
        """Close the transaction, returning an undo record for later rollback."""
        if token != len(self._txn_stack):
            raise InputError("ledger transactions must close in LIFO order")
        return self._txn_stack.pop()

    def rollback(self, token_or_log):
        """Restore residuals saved by an open transaction or an undo record."""
        if isinstance(token_or_log, int):
            if token_or_log != len(self._txn_stack):
                raise InputError("ledger transactions must close in LIFO order")
            log = self._txn_stack.pop()
        else:
            log = token_or_log
        for (kind, resource, day), value in log.items():
            self._residual[(kind, resource)][day] = value


def residual_path_capacity(route: tuple[Arc, ...], day: int, ledger: DayLedger) -> float:
    """Smallest residual arc capacity along the route on the given day."""
    if day < 0:
        raise InputError("day must be non-negative")
    residual = min(ledger.residual("arc", arc.id, day) for arc in route)
    return max(0.0, residual)


@dataclass
class RailingResult:
    arrivals: dict[str, tuple[tuple[float, float], ...]]
    build_start: float
    build_end: float

    @property
    def effective_build_end(self) -> float:
        from .model import MIN_BUILD_HOURS
        return max(self.build_end + HOURS_PER_DAY,
                   self.build_start + MIN_BUILD_HOURS)


class RailingInfeasible(Exception):
    """Coal could not be fully railed within the stockpile's build window."""

    def __init__(self, first_day: int):
        super().__init__(f"build span exceeded from day {first_day}")
        self.first_day = first_day


# Upper bound on empty days scanned before declaring the instance broken.
_SCAN_LIMIT_DAYS = 20_000


def rail_stockpile(stockpile: Stockpile, router: Router, terminal: str,
                   ledger: DayLedger, start_day: int,
                   stream: str | None = None) -> RailingResult:
    """Greedily schedule coal arrivals for every component of a stockpile.

    Components are railed in listed order; each day the delivered tonnage is
    the least of the residual path capacity, the terminal's residual DIT,
    the stacker stream residual (KCT only) and the tonnage still owed.
    Days without capacity are skipped (stacking is preemptible).  Raises
    :class:`RailingInfeasible` when an arrival would land outside the
    stockpile's maximum build span, leaving reservations for the caller's
    open transaction to roll back.
    """
    arrivals: dict[str, list[tuple[float, float]]] = {}
    first_day: int | None = None
    last_day: int | None = None
    max_days = stockpile.max_build_days
    for comp in stockpile.components:
        left = comp.tonnes
        route = router.resolve(comp.load_point, terminal)
        day = start_day
        comp_arrivals: list[tuple[float, float]] = []
        while left > TONNES_TOL:
            if first_day is not None and day > first_day + max_days - 1:
                raise RailingInfeasible(first_day)
            if day - start_day > _SCAN_LIMIT_DAYS:
                raise InputError(
                    f"component {comp.id}: no rail capacity within "
                    f"{_SCAN_LIMIT_DAYS} days of day {start_day}")
            # Taking this day must keep the whole stockpile's stacking span
            # inside the build limit (components share one span).
            if first_day is not None and \
                    max(last_day, day) - min(first_day, day) + 1 > max_days:
                day += 1
                continue
            path_res = residual_path_capacity(route, day, ledger)
            dit_res = ledger.residual("dit", terminal, day)
            if stream is not None:
                stream_res = ledger.residual("dssc", stream, day)
            else:
                stream_res = math.inf
            tonnes = min(path_res, dit_res, stream_res, left)
            if tonnes > TONNES_TOL:
                for arc in route:
                    ledger.reserve("arc", arc.id, day, tonnes)
                ledger.reserve("dit", terminal, day, tonnes)
                if stream is not None:
                    ledger.reserve("dssc", stream, day, tonnes)
                comp_arrivals.append((tonnes, day_start(day)))
                left -= tonnes
                first_day = day if first_day is None else min(first_day, day)
                last_day = day if last_day is None else max(last_day, day)
            day += 1
        arrivals[comp.id] = comp_arrivals
    if first_day is None:
        raise InputError(f"stockpile {stockpile.id}: nothing to rail")
    return RailingResult(
        arrivals={c: tuple(a) for c, a in arrivals.items()},
        build_start=day_start(first_day),
        build_end=day_start(last_day),
    )


def build_ledger(instance) -> DayLedger:
    """Fresh ledger with every rail arc, DIT, DSSC and DOT resource defined."""
    ledger = DayLedger()
    for arc in instance.rail_graph.arcs:
        ledger.define("arc", arc.id, arc.daily_capacity)
    for name, cfg in instance.terminals.items():
        ledger.define("dit", name, cfg.daily_inbound)
        ledger.define("dot", name, cfg.daily_outbound)
        if cfg.yard is not None:
            for stream in cfg.yard.streams:
                ledger.define("dssc", stream.id, stream.daily_capacity)
    return ledger
