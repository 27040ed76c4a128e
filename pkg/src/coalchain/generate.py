"""Synthetic shipping stem generator.

Real stems are confidential, so instances are drawn from seeded
distributions whose summary statistics (vessel counts, terminal mix, ETA
gaps, cargo tonnage ranges and means) track the published instance summary;
absolute delay values of real stems are not reproducible.  Generation is
fully deterministic per seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .model import Instance, Component, Stockpile, TideTable, Vessel, \
    default_terminal_configs
from .rail import default_rail_graph

# Semi-diurnal tide period in hours.
TIDE_PERIOD = 12.42

TON_MIN = 10_000.0
TON_MAX = 160_000.0


@dataclass(frozen=True)
class GeneratorConfig:
    vessels: int = 200
    seed: int = 0
    mean_eta_gap: float = 4.2  # hours between consecutive ETAs, system-wide
    # First ETA well past the ten-day stacking lead, so early vessels are not
    # artificially starved by the start of the horizon.
    eta_start: float = 540.0
    terminal_mix: dict = field(default_factory=lambda: {
        "KCT": 0.52, "CCT": 0.15, "NCT": 0.33})
    # Mean cargo (stockpile) tonnage per terminal.
    mean_tonnes: dict = field(default_factory=lambda: {
        "KCT": 70_000.0, "CCT": 58_000.0, "NCT": 95_000.0})
    # Stockpiles-per-vessel distributions (count -> probability).
    stockpile_counts: dict = field(default_factory=lambda: {
        "KCT": {1: 0.50, 2: 0.40, 3: 0.10},
        "CCT": {1: 0.65, 2: 0.35},
        "NCT": {1: 0.95, 2: 0.05},
    })
    max_components: int = 3
    warmup_days: float = 0.0

    def __post_init__(self):
        if self.vessels <= 0:
            raise InputError("vessel count must be positive")
        if abs(sum(self.terminal_mix.values()) - 1.0) > 1e-9:
            raise InputError("terminal mix probabilities must sum to 1")
        for dist in self.stockpile_counts.values():
            if abs(sum(dist.values()) - 1.0) > 1e-9:
                raise InputError("stockpile count probabilities must sum to 1")


def _draw_tonnes(rng: np.random.Generator, mean: float) -> float:
    """Cargo tonnage in [TON_MIN, TON_MAX] with the requested mean.

    Beta-distributed with fixed concentration: keeps the spread wide while
    hitting the mean exactly in expectation.
    """
    frac = (mean - TON_MIN) / (TON_MAX - TON_MIN)
    conc = 2.5
    sample = rng.beta(frac * conc, (1.0 - frac) * conc)
    tonnes = TON_MIN + sample * (TON_MAX - TON_MIN)
    # Whole tonnes keep ledger arithmetic exact and files tidy.
    return float(round(tonnes))


def generate_instance(config: GeneratorConfig) -> Instance:
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    graph = default_rail_graph()
    load_points = list(graph.load_points)
    terminals = sorted(config.terminal_mix)
    probs = np.array([config.terminal_mix[t] for t in terminals])

    vessels = []
    eta = config.eta_start
    for i in range(config.vessels):
        eta += rng.exponential(config.mean_eta_gap)
        term = terminals[int(rng.choice(len(terminals), p=probs))]
        counts = sorted(config.stockpile_counts[term].items())
        ks = [k for k, _ in counts]
        ps = np.array([p for _, p in counts])
        n_piles = ks[int(rng.choice(len(ks), p=ps))]
        stockpiles = []
        for j in range(n_piles):
            tonnes = _draw_tonnes(rng, config.mean_tonnes[term])
            n_comp = int(rng.integers(1, config.max_components + 1))
            shares = rng.dirichlet(np.ones(n_comp))
            comp_tonnes = [max(1.0, round(tonnes * s)) for s in shares]
            comp_tonnes[-1] = tonnes - sum(comp_tonnes[:-1])
            if comp_tonnes[-1] < 1.0:
                comp_tonnes = [tonnes]
            components = []
            for k, ct in enumerate(comp_tonnes):
                lp = load_points[int(rng.integers(len(load_points)))]
                components.append(Component(
                    id=f"v{i:04d}s{j}c{k}", load_point=lp, tonnes=float(ct)))
            # Nearby mines allow only five build days; others seven.
            max_days = 5 if rng.random() < 0.2 else 7
            stockpiles.append(Stockpile(
                id=f"v{i:04d}s{j}", components=tuple(components),
                max_build_days=max_days))
        vessels.append(Vessel(id=f"v{i:04d}", terminal=term, eta=float(eta),
                              stockpiles=tuple(stockpiles)))

    horizon = eta + 2400.0
    phase = float(rng.uniform(0.0, TIDE_PERIOD))
    tides = make_tide_table(horizon, phase)
    return Instance(
        vessels=tuple(vessels),
        tides=tides,
        rail_graph=graph,
        terminals=default_terminal_configs(),
        warmup_hours=config.warmup_days * 24.0,
        meta={"generator_seed": config.seed, "vessel_count": config.vessels},
    )


def make_tide_table(horizon_hours: float, phase: float = 5.0) -> TideTable:
    """Semi-diurnal tide table covering [0, horizon_hours]."""
    times = []
    t = phase
    while t < horizon_hours:
        times.append(round(t, 6))
        t += TIDE_PERIOD
    return TideTable(tuple(times))


def instance_statistics(instance: Instance) -> dict:
    """Summary statistics in the shape of the published instance table."""
    stats = {}
    groups = {"system": list(instance.vessels)}
    for term in ("KCT", "CCT", "NCT"):
        groups[term] = [v for v in instance.vessels if v.terminal == term]
    for name, vessels in groups.items():
        if not vessels:
            stats[name] = None
            continue
        etas = sorted(v.eta for v in vessels)
        gaps = [b - a for a, b in zip(etas, etas[1:])]
        cargoes = [s.tonnes for v in vessels for s in v.stockpiles]
        stats[name] = {
            "vessels": len(vessels),
            "stockpiles": sum(len(v.stockpiles) for v in vessels),
            "eta_min": etas[0],
            "eta_max": etas[-1],
            "eta_gap_mean": sum(gaps) / len(gaps) if gaps else 0.0,
            "tonnes_min": min(cargoes),
            "tonnes_max": max(cargoes),
            "tonnes_mean": sum(cargoes) / len(cargoes),
        }
    return stats
