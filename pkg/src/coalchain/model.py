"""Domain model for the three-terminal coal export chain.

Times are hours from the start of the horizon (continuous floats), days are
24-hour buckets indexed from 0, tonnages are tonnes and positions are metres.
Coal arrivals always sit on day starts, i.e. multiples of 24 hours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import HorizonError, IncompleteSolutionError, InputError

# Comparison tolerances: times in hours, tonnages in tonnes.
TIME_TOL = 1e-9
TONNES_TOL = 1e-6

HOURS_PER_DAY = 24.0

#: Vessels at or above this cargo tonnage are capesize and tide-bound.
CAPE_TONNES = 100_000.0

#: Lead limit: stacking may start at most ten days before the vessel ETA.
MAX_LEAD_HOURS = 240.0

#: Reclaiming may not start before three days after the first coal arrival.
MIN_BUILD_HOURS = 72.0

#: Maximum pause between consecutive stockpile reclaims of one KCT vessel.
MAX_LOADING_GAP_HOURS = 5.0

TERMINALS = ("CCT", "KCT", "NCT")


def day_of(t: float) -> int:
    """Day bucket containing time ``t`` (day k covers [24k, 24(k+1)))."""
    return int(math.floor((t + TIME_TOL) / HOURS_PER_DAY))


def day_start(day: int) -> float:
    return day * HOURS_PER_DAY


def first_day_at_or_after(t: float) -> int:
    """Earliest day whose start is at or after time ``t`` (never negative)."""
    return max(0, int(math.ceil((t - TIME_TOL) / HOURS_PER_DAY)))


@dataclass(frozen=True)
class StackerStream:
    """One KCT stacker stream: a daily tonnage cap shared by the pads it feeds."""

    id: str
    pads: tuple[str, ...]
    daily_capacity: float


@dataclass(frozen=True)
class YardConfig:
    """KCT stockyard layout: pads, reclaimers and stacker streams."""

    pad_lengths: dict[str, float]
    # Reclaimer pairs ride a shared rail serving two pads and cannot pass
    # each other; the first machine of a pair homes at position 0, the
    # second at the far end of the rail.
    reclaimer_pads: dict[str, tuple[str, ...]]
    machine_speed: float  # m/h
    machine_rate: float  # t/h while reclaiming
    ship_loaders: int
    streams: tuple[StackerStream, ...]

    def pads(self) -> tuple[str, ...]:
        return tuple(sorted(self.pad_lengths))

    def reclaimers_for_pad(self, pad: str) -> tuple[str, ...]:
        return tuple(sorted(r for r, pads in self.reclaimer_pads.items() if pad in pads))

    def stream_for_pad(self, pad: str) -> StackerStream:
        for stream in self.streams:
            if pad in stream.pads:
                return stream
        raise InputError(f"no stacker stream feeds pad {pad}")

    def rail_pair(self, reclaimer: str) -> tuple[str, ...]:
        """Both machines of the rail that ``reclaimer`` rides, low-home first."""
        pads = self.reclaimer_pads[reclaimer]
        return tuple(sorted(r for r, p in self.reclaimer_pads.items() if p == pads))

    def rail_length(self, reclaimer: str) -> float:
        """Length of the shared rail axis (the longer of the two pads served)."""
        return max(self.pad_lengths[p] for p in self.reclaimer_pads[reclaimer])

    def home_position(self, reclaimer: str) -> float:
        pair = self.rail_pair(reclaimer)
        return 0.0 if reclaimer == pair[0] else self.rail_length(reclaimer)


@dataclass(frozen=True)
class TerminalConfig:
    """Static capacities and channel geometry of one terminal."""

    name: str
    berths: int
    daily_inbound: float  # DIT, t/day
    daily_outbound: float  # DOT, t/day
    reclaim_rate: float  # t/h
    channel_minutes: float  # travel from the end of the entry area
    yard: Optional[YardConfig] = None

    @property
    def channel_hours(self) -> float:
        return self.channel_minutes / 60.0

    @property
    def transit_hours(self) -> float:
        """Full one-way transit: 15 min entry area plus the terminal leg."""
        return 0.25 + self.channel_hours


def default_kct_yard() -> YardConfig:
    return YardConfig(
        pad_lengths={"A": 2142.0, "B": 1905.0, "C": 2174.0, "D": 2156.0},
        reclaimer_pads={
            "R459": ("A", "B"),
            "R460": ("A", "B"),
            "R411": ("C", "D"),
            "R412": ("C", "D"),
        },
        machine_speed=1800.0,
        machine_rate=139_200.0 / 24.0,  # 139.2 kt/day
        ship_loaders=3,
        streams=(
            StackerStream("stream1", ("A",), 144_000.0),
            StackerStream("stream2", ("B", "C"), 288_000.0),
            StackerStream("stream3", ("D",), 144_000.0),
        ),
    )


def default_terminal_configs() -> dict[str, TerminalConfig]:
    return {
        "KCT": TerminalConfig("KCT", berths=4, daily_inbound=500_000.0,
                              daily_outbound=390_000.0, reclaim_rate=5800.0,
                              channel_minutes=55.0, yard=default_kct_yard()),
        "CCT": TerminalConfig("CCT", berths=2, daily_inbound=96_000.0,
                              daily_outbound=94_000.0, reclaim_rate=2200.0,
                              channel_minutes=35.0),
        "NCT": TerminalConfig("NCT", berths=3, daily_inbound=228_000.0,
                              daily_outbound=214_000.0, reclaim_rate=5800.0,
                              channel_minutes=85.0),
    }


@dataclass(frozen=True)
class TideTable:
    """High-tide times; each tide h opens the window [h - 1.5, h + 0.5)."""

    high_tides: tuple[float, ...]

    WINDOW_BEFORE = 1.5
    WINDOW_AFTER = 0.5

    def __post_init__(self):
        tides = self.high_tides
        for a, b in zip(tides, tides[1:]):
            if b <= a:
                raise InputError("high tide times must be strictly increasing")

    def window_for(self, t: float) -> tuple[float, float]:
        """Window containing ``t``, else the first window opening after ``t``."""
        for h in self.high_tides:
            start, end = h - self.WINDOW_BEFORE, h + self.WINDOW_AFTER
            if t < end - TIME_TOL:
                return (start, end)
        raise HorizonError(f"tide table exhausted at t={t}")

    def contains(self, t: float) -> bool:
        """True if ``t`` falls inside some tidal window."""
        try:
            start, _ = self.window_for(t)
        except HorizonError:
            return False
        return t >= start - TIME_TOL


def tidal_window_for(t: float, tides: TideTable) -> tuple[float, float]:
    return tides.window_for(t)


@dataclass(frozen=True)
class Component:
    """A tonnage railed from one load point into a stockpile."""

    id: str
    load_point: str
    tonnes: float

    def __post_init__(self):
        if self.tonnes <= 0:
            raise InputError(f"component {self.id}: tonnage must be positive")


@dataclass(frozen=True)
class Stockpile:
    """One cargo: components blended into a single pile, reclaimed in one job."""

    id: str
    components: tuple[Component, ...]
    max_build_days: int = 7

    def __post_init__(self):
        if not self.components:
            raise InputError(f"stockpile {self.id}: needs at least one component")
        if self.max_build_days < 3:
            raise InputError(f"stockpile {self.id}: max build days below minimum build")

    @property
    def tonnes(self) -> float:
        return sum(c.tonnes for c in self.components)


@dataclass(frozen=True)
class Vessel:
    """A vessel with its ordered cargo list (the mandatory reclaim order)."""

    id: str
    terminal: str
    eta: float
    stockpiles: tuple[Stockpile, ...]

    def __post_init__(self):
        if self.terminal not in TERMINALS:
            raise InputError(f"vessel {self.id}: unknown terminal {self.terminal}")
        if not self.stockpiles:
            raise InputError(f"vessel {self.id}: needs at least one stockpile")
        if self.eta < 0:
            raise InputError(f"vessel {self.id}: negative ETA")

    @property
    def tonnes(self) -> float:
        return sum(s.tonnes for s in self.stockpiles)

    @property
    def is_cape(self) -> bool:
        return self.tonnes >= CAPE_TONNES - TONNES_TOL


@dataclass(frozen=True)
class Instance:
    """A shipping stem plus the shared infrastructure it runs on."""

    vessels: tuple[Vessel, ...]
    tides: TideTable
    rail_graph: "RailGraph"  # noqa: F821 - defined in coalchain.rail
    terminals: dict[str, TerminalConfig] = field(default_factory=default_terminal_configs)
    warmup_hours: float = 0.0
    meta: dict = field(default_factory=dict)

    def vessel(self, vessel_id: str) -> Vessel:
        for v in self.vessels:
            if v.id == vessel_id:
                return v
        raise InputError(f"unknown vessel {vessel_id}")

    def eta_order(self) -> tuple[str, ...]:
        """Vessel ids sorted by increasing ETA (ties by id)."""
        return tuple(v.id for v in sorted(self.vessels, key=lambda v: (v.eta, v.id)))

    def stockpile_vessel(self) -> dict[str, Vessel]:
        out = {}
        for v in self.vessels:
            for s in v.stockpiles:
                out[s.id] = v
        return out


@dataclass(frozen=True)
class StockpileSchedule:
    """Where and when one stockpile is built and reclaimed.

    ``arrivals`` maps component id to its coal arrivals (tonnes, day-start
    time); the stockpile-level arrival set is their union.  Pad, position
    (centre, metres) and reclaimer are set for KCT stockpiles only.
    """

    stockpile_id: str
    arrivals: dict[str, tuple[tuple[float, float], ...]]
    load_start: float
    load_end: float
    pad: Optional[str] = None
    position: Optional[float] = None
    reclaimer: Optional[str] = None

    def all_arrivals(self) -> tuple[tuple[float, float], ...]:
        out = []
        for comp in sorted(self.arrivals):
            out.extend(self.arrivals[comp])
        return tuple(sorted(out, key=lambda wt: (wt[1], wt[0])))

    @property
    def build_start(self) -> float:
        times = [t for arr in self.arrivals.values() for _, t in arr]
        if not times:
            raise IncompleteSolutionError(f"stockpile {self.stockpile_id}: no coal arrivals")
        return min(times)

    @property
    def build_end(self) -> float:
        times = [t for arr in self.arrivals.values() for _, t in arr]
        if not times:
            raise IncompleteSolutionError(f"stockpile {self.stockpile_id}: no coal arrivals")
        return max(times)

    @property
    def effective_build_end(self) -> float:
        """Earliest permitted reclaim start: the later of the last arrival's
        day end and the three-day minimum build period."""
        return max(self.build_end + HOURS_PER_DAY, self.build_start + MIN_BUILD_HOURS)


@dataclass(frozen=True)
class VesselSchedule:
    vessel_id: str
    arrival: float
    departure: float


@dataclass(frozen=True)
class Solution:
    """Complete schedules for every vessel and stockpile of an instance."""

    vessels: dict[str, VesselSchedule]
    stockpiles: dict[str, StockpileSchedule]
    objective: float = float("nan")
    meta: dict = field(default_factory=dict)

    def load_interval(self, vessel: Vessel) -> tuple[float, float]:
        first = self.stockpiles[vessel.stockpiles[0].id]
        last = self.stockpiles[vessel.stockpiles[-1].id]
        return (first.load_start, last.load_end)


def stockpile_length(tonnes: float) -> float:
    """Pad length in metres occupied by a stockpile of the given tonnage.

    Linear model of pile footprint, snapped to 5 m increments.
    """
    if tonnes < 0:
        raise InputError("tonnage must be non-negative")
    return 5.0 * math.floor((0.0017 * tonnes + 39.714) / 5.0 + 0.5)


def ideal_load_end(vessel: Vessel, cfg: TerminalConfig) -> float:
    """Load completion if the vessel berthed at its ETA and loaded at full rate."""
    return vessel.eta + vessel.tonnes / cfg.reclaim_rate


def earliest_departure(vessel: Vessel, cfg: TerminalConfig, tides: TideTable) -> float:
    """Ideal departure time: load end, tide-aligned for capesize vessels."""
    if vessel.tonnes <= 0:
        raise InputError(f"vessel {vessel.id}: non-positive tonnage")
    end = ideal_load_end(vessel, cfg)
    if vessel.is_cape:
        start, _ = tides.window_for(end)
        return max(end, start)
    return end


def average_delay(solution: Solution, instance: Instance,
                  include_warmup: bool = True) -> float:
    """Mean departure delay (hours) against each vessel's ideal departure.

    With ``include_warmup`` false, vessels whose ETA falls inside the
    instance's warm-up prefix are excluded from the mean.
    """
    total = 0.0
    count = 0
    for v in instance.vessels:
        sched = solution.vessels.get(v.id)
        if sched is None:
            raise IncompleteSolutionError(f"vessel {v.id} is not scheduled")
        if not include_warmup and v.eta < instance.warmup_hours:
            continue
        ideal = earliest_departure(v, instance.terminals[v.terminal], instance.tides)
        total += sched.departure - ideal
        count += 1
    if count == 0:
        return 0.0
    return total / count
