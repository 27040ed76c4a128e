"""Channel traffic feasibility.

The channel is a straight line with an entry area (15 minutes to cross) and
three terminals at fixed travel times from its end.  Every movement to or
from a terminal leaves real events at that terminal and projected events at
every terminal nearer the entry; each terminal's event list must keep
arrivals 15 minutes apart, departures 15 minutes apart, and make any arrival
that follows a departure wait out the full round-trip clearance of that
terminal.  A departure may coincide with a preceding arrival.  At most four
vessels may be in transit at once, and capesize vessels depart only inside
tidal windows.
"""

from __future__ import annotations

import bisect
import math

from .errors import HorizonError, InputError
from .model import TIME_TOL, TerminalConfig, TideTable

HEADWAY = 0.25  # hours between like events at one terminal

_MAX_SCAN = 100_000


class ChannelTimeline:
    """Per-terminal event lists plus the set of channel transit intervals."""

    def __init__(self, terminals: dict[str, TerminalConfig], max_transits: int = 4):
        self.transit_hours = {name: cfg.transit_hours for name, cfg in terminals.items()}
        self.max_transits = max_transits
        # Terminals nearer the entry than (or equal to) each destination,
        # with the projection offset and that terminal's clearance time.
        self._passed: dict[str, tuple[tuple[str, float, float], ...]] = {}
        for dest, dest_transit in self.transit_hours.items():
            rows = []
            for name, transit in self.transit_hours.items():
                if transit <= dest_transit + TIME_TOL:
                    rows.append((name, dest_transit - transit, transit))
            rows.sort(key=lambda r: r[2])
            self._passed[dest] = tuple(rows)
        self.arrivals: dict[str, list[tuple[float, str]]] = {t: [] for t in terminals}
        self.departures: dict[str, list[tuple[float, str]]] = {t: [] for t in terminals}
        self.transits: list[tuple[float, float, str]] = []
        self._by_vessel: dict[str, list[tuple[str, str, float]]] = {}

    def clone(self) -> "ChannelTimeline":
        other = object.__new__(ChannelTimeline)
        other.transit_hours = self.transit_hours
        other.max_transits = self.max_transits
        other._passed = self._passed
        other.arrivals = {t: list(v) for t, v in self.arrivals.items()}
        other.departures = {t: list(v) for t, v in self.departures.items()}
        other.transits = list(self.transits)
        other._by_vessel = {v: list(e) for v, e in self._by_vessel.items()}
        return other

    # -- predicates --------------------------------------------------------

    def _transit_conflict(self, start: float, end: float) -> float | None:
        """Earliest end among current transits if adding (start, end) would
        exceed the concurrency cap, else None."""
        active = [e for s, e, _ in self.transits
                  if s < end - TIME_TOL and e > start + TIME_TOL]
        if len(active) < self.max_transits:
            return None
        return min(active)

    def arrival_violation(self, dest: str, t: float) -> float | None:
        """None if an arrival at ``dest`` at ``t`` is feasible, else the
        earliest later time at which the specific conflict found clears."""
        transit = self.transit_hours[dest]
        if t < transit - TIME_TOL:
            return transit  # the transit would begin before the horizon
        for name, offset, clear in self._passed[dest]:
            tp = t - offset
            arrs = self.arrivals[name]
            i = bisect.bisect_left(arrs, (tp - HEADWAY + TIME_TOL,))
            if i < len(arrs) and arrs[i][0] < tp + HEADWAY - TIME_TOL:
                return arrs[i][0] + HEADWAY + offset
            deps = self.departures[name]
            lo = bisect.bisect_right(deps, (tp - 2.0 * clear + TIME_TOL, "￿"))
            hi = bisect.bisect_left(deps, (tp - TIME_TOL,))
            if hi > lo:
                return deps[hi - 1][0] + 2.0 * clear + offset
        free = self._transit_conflict(t - transit, t)
        if free is not None:
            return free + transit
        return None

    def departure_violation(self, dest: str, t: float,
                            cape: bool = False,
                            tides: TideTable | None = None) -> float | None:
        """None if a departure from ``dest`` at ``t`` is feasible, else the
        earliest later candidate time for the conflict found."""
        if t < -TIME_TOL:
            return 0.0
        if cape:
            if tides is None:
                raise InputError("cape departures need a tide table")
            start, _ = tides.window_for(t)
            if t < start - TIME_TOL:
                return start
        for name, offset, clear in self._passed[dest]:
            tp = t + offset
            deps = self.departures[name]
            i = bisect.bisect_left(deps, (tp - HEADWAY + TIME_TOL,))
            if i < len(deps) and deps[i][0] < tp + HEADWAY - TIME_TOL:
                return deps[i][0] + HEADWAY - offset
            # An existing arrival shortly after this departure would be an
            # arrival preceded by a departure without full clearance.
            arrs = self.arrivals[name]
            lo = bisect.bisect_right(arrs, (tp + TIME_TOL, "￿"))
            hi = bisect.bisect_left(arrs, (tp + 2.0 * clear - TIME_TOL,))
            if hi > lo:
                return arrs[hi - 1][0] - offset
        transit = self.transit_hours[dest]
        free = self._transit_conflict(t, t + transit)
        if free is not None:
            return free
        return None

    def arrival_feasible(self, dest: str, t: float) -> bool:
        return self.arrival_violation(dest, t) is None

    def departure_feasible(self, dest: str, t: float, cape: bool = False,
                           tides: TideTable | None = None) -> bool:
        return self.departure_violation(dest, t, cape, tides) is None

    # -- searches ----------------------------------------------------------

    def next_feasible_arrival(self, dest: str, from_t: float) -> float:
        t = max(from_t, self.transit_hours[dest])
        for _ in range(_MAX_SCAN):
            bump = self.arrival_violation(dest, t)
            if bump is None:
                return t
            t = max(t + TIME_TOL, bump)
        raise HorizonError(f"no feasible arrival at {dest} from {from_t}")

    def next_feasible_departure(self, dest: str, from_t: float,
                                cape: bool = False,
                                tides: TideTable | None = None) -> float:
        t = max(from_t, 0.0)
        for _ in range(_MAX_SCAN):
            bump = self.departure_violation(dest, t, cape, tides)
            if bump is None:
                return t
            t = max(t + TIME_TOL, bump)
        raise HorizonError(f"no feasible departure from {dest} after {from_t}")

    def latest_feasible_arrival(self, dest: str, at_most: float,
                                floor_t: float = 0.0) -> float | None:
        """Latest feasible arrival time that is <= at_most and >= floor_t."""
        floor_t = max(floor_t, self.transit_hours[dest])
        t = at_most
        for _ in range(_MAX_SCAN):
            if t < floor_t - TIME_TOL:
                return None
            down = self._arrival_down_bump(dest, t)
            if down is None:
                return t
            t = min(t - TIME_TOL, down)
        return None

    def _arrival_down_bump(self, dest: str, t: float) -> float | None:
        """Next lower candidate when an arrival at ``t`` is infeasible."""
        transit = self.transit_hours[dest]
        if t < transit - TIME_TOL:
            return -math.inf
        for name, offset, clear in self._passed[dest]:
            tp = t - offset
            arrs = self.arrivals[name]
            i = bisect.bisect_left(arrs, (tp - HEADWAY + TIME_TOL,))
            if i < len(arrs) and arrs[i][0] < tp + HEADWAY - TIME_TOL:
                # Slide below the whole run of conflicting arrivals.
                j = bisect.bisect_left(arrs, (tp + HEADWAY - TIME_TOL,))
                return arrs[min(j, len(arrs)) - 1][0] - HEADWAY + offset
            deps = self.departures[name]
            lo = bisect.bisect_right(deps, (tp - 2.0 * clear + TIME_TOL, "￿"))
            hi = bisect.bisect_left(deps, (tp - TIME_TOL,))
            if hi > lo:
                return deps[lo][0] + offset
        start, end = t - transit, t
        active = [(s, e) for s, e, _ in self.transits
                  if s < end - TIME_TOL and e > start + TIME_TOL]
        if len(active) >= self.max_transits:
            return max(s for s, _ in active)
        return None

    # -- mutation ----------------------------------------------------------

    def commit(self, vessel_id: str, dest: str, arrival: float, departure: float,
               cape: bool = False, tides: TideTable | None = None):
        if self.arrival_violation(dest, arrival) is not None:
            raise InputError(f"infeasible arrival committed for {vessel_id}")
        if self.departure_violation(dest, departure, cape, tides) is not None:
            raise InputError(f"infeasible departure committed for {vessel_id}")
        records = []
        for name, offset, _ in self._passed[dest]:
            ta = arrival - offset
            td = departure + offset
            bisect.insort(self.arrivals[name], (ta, vessel_id))
            bisect.insort(self.departures[name], (td, vessel_id))
            records.append(("arr", name, ta))
            records.append(("dep", name, td))
        transit = self.transit_hours[dest]
        bisect.insort(self.transits, (arrival - transit, arrival, vessel_id))
        bisect.insort(self.transits, (departure, departure + transit, vessel_id))
        records.append(("transit", "", arrival - transit))
        records.append(("transit", "", departure))
        self._by_vessel[vessel_id] = records

    def release(self, vessel_id: str):
        records = self._by_vessel.pop(vessel_id, [])
        for kind, name, t in records:
            if kind == "arr":
                self.arrivals[name].remove((t, vessel_id))
            elif kind == "dep":
                self.departures[name].remove((t, vessel_id))
            else:
                for i, (s, _e, v) in enumerate(self.transits):
                    if v == vessel_id and s == t:
                        del self.transits[i]
                        break

    def events(self, terminal: str) -> list[tuple[float, str, str]]:
        """All events at a terminal as (time, kind, vessel), time-sorted."""
        out = [(t, "arrival", v) for t, v in self.arrivals[terminal]]
        out += [(t, "departure", v) for t, v in self.departures[terminal]]
        out.sort(key=lambda e: (e[0], e[1], e[2]))
        return out
