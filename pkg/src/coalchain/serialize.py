"""Instance and solution files.

Both artifacts are single JSON documents (UTF-8, structured text).  All
times are hours, tonnages tonnes, positions metres.  Parsing the emitted
file reproduces the in-memory objects exactly (floats survive via repr
round-tripping), which the round-trip tests pin down.

Instance document::

    {"format": "coalchain-instance", "version": 1,
     "warmup_hours": 0.0,
     "meta": {...},                      # seed, config hash, free-form
     "tides": [12.1, 24.6, ...],
     "rail_graph": {"nodes": [...],
                     "arcs": [{"id": ..., "from": ..., "to": ..., "capacity": ...}],
                     "load_points": [...]},
     "terminals": {"KCT": {..., "yard": {...}}, "CCT": {...}, "NCT": {...}},
     "vessels": [{"id": ..., "terminal": ..., "eta": ...,
                   "stockpiles": [{"id": ..., "max_build_days": 7,
                                    "components": [{"id": ..., "load_point": ...,
                                                     "tonnes": ...}]}]}]}

Solution document::

    {"format": "coalchain-solution", "version": 1,
     "objective": ..., "meta": {...},
     "vessels": {vid: {"arrival": ..., "departure": ...}},
     "stockpiles": {sid: {"arrivals": {component: [[tonnes, time], ...]},
                           "load": [start, end],
                           "pad": ..., "position": ..., "reclaimer": ...}}}
"""

from __future__ import annotations

import hashlib
import json

from .errors import InputError
from .model import (Component, Instance, Solution, Stockpile,
                    StockpileSchedule, StackerStream, TerminalConfig,
                    TideTable, Vessel, VesselSchedule, YardConfig)
from .rail import Arc, RailGraph

INSTANCE_FORMAT = "coalchain-instance"
SOLUTION_FORMAT = "coalchain-solution"
GRAPH_FORMAT = "coalchain-railgraph"


# ---------------------------------------------------------------------------
# rail graph
# ---------------------------------------------------------------------------

def rail_graph_to_dict(graph: RailGraph) -> dict:
    return {
        "nodes": list(graph.nodes),
        "arcs": [{"id": a.id, "from": a.tail, "to": a.head,
                  "capacity": a.daily_capacity} for a in graph.arcs],
        "load_points": list(graph.load_points),
    }


def rail_graph_from_dict(data: dict) -> RailGraph:
    return RailGraph(
        nodes=tuple(data["nodes"]),
        arcs=tuple(Arc(a["id"], a["from"], a["to"], float(a["capacity"]))
                   for a in data["arcs"]),
        load_points=tuple(data["load_points"]),
    )


def save_rail_graph(graph: RailGraph, path):
    doc = {"format": GRAPH_FORMAT, "version": 1, **rail_graph_to_dict(graph)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_rail_graph(path) -> RailGraph:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("format") != GRAPH_FORMAT:
        raise InputError(f"{path}: not a rail graph file")
    return rail_graph_from_dict(data)


def load_tide_table(path) -> TideTable:
    """Tide file: one high-tide time (hours) per line; '#' comments allowed."""
    tides = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tides.append(float(line))
    return TideTable(tuple(tides))


# ---------------------------------------------------------------------------
# terminals
# ---------------------------------------------------------------------------

def _yard_to_dict(yard: YardConfig) -> dict:
    return {
        "pad_lengths": dict(yard.pad_lengths),
        "reclaimer_pads": {r: list(p) for r, p in yard.reclaimer_pads.items()},
        "machine_speed": yard.machine_speed,
        "machine_rate": yard.machine_rate,
        "ship_loaders": yard.ship_loaders,
        "streams": [{"id": s.id, "pads": list(s.pads),
                     "daily_capacity": s.daily_capacity} for s in yard.streams],
    }


def _yard_from_dict(data: dict) -> YardConfig:
    return YardConfig(
        pad_lengths={k: float(v) for k, v in data["pad_lengths"].items()},
        reclaimer_pads={r: tuple(p) for r, p in data["reclaimer_pads"].items()},
        machine_speed=float(data["machine_speed"]),
        machine_rate=float(data["machine_rate"]),
        ship_loaders=int(data["ship_loaders"]),
        streams=tuple(StackerStream(s["id"], tuple(s["pads"]),
                                    float(s["daily_capacity"]))
                      for s in data["streams"]),
    )


def _terminal_to_dict(cfg: TerminalConfig) -> dict:
    out = {
        "berths": cfg.berths,
        "daily_inbound": cfg.daily_inbound,
        "daily_outbound": cfg.daily_outbound,
        "reclaim_rate": cfg.reclaim_rate,
        "channel_minutes": cfg.channel_minutes,
    }
    if cfg.yard is not None:
        out["yard"] = _yard_to_dict(cfg.yard)
    return out


def _terminal_from_dict(name: str, data: dict) -> TerminalConfig:
    return TerminalConfig(
        name=name,
        berths=int(data["berths"]),
        daily_inbound=float(data["daily_inbound"]),
        daily_outbound=float(data["daily_outbound"]),
        reclaim_rate=float(data["reclaim_rate"]),
        channel_minutes=float(data["channel_minutes"]),
        yard=_yard_from_dict(data["yard"]) if "yard" in data else None,
    )


# ---------------------------------------------------------------------------
# instance
# ---------------------------------------------------------------------------

def instance_to_dict(instance: Instance) -> dict:
    return {
        "format": INSTANCE_FORMAT,
        "version": 1,
        "warmup_hours": instance.warmup_hours,
        "meta": dict(instance.meta),
        "tides": list(instance.tides.high_tides),
        "rail_graph": rail_graph_to_dict(instance.rail_graph),
        "terminals": {name: _terminal_to_dict(cfg)
                      for name, cfg in sorted(instance.terminals.items())},
        "vessels": [
            {"id": v.id, "terminal": v.terminal, "eta": v.eta,
             "stockpiles": [
                 {"id": s.id, "max_build_days": s.max_build_days,
                  "components": [
                      {"id": c.id, "load_point": c.load_point,
                       "tonnes": c.tonnes} for c in s.components]}
                 for s in v.stockpiles]}
            for v in instance.vessels],
    }


def instance_from_dict(data: dict) -> Instance:
    if data.get("format") != INSTANCE_FORMAT:
        raise InputError("not an instance document")
    vessels = tuple(
        Vessel(
            id=v["id"], terminal=v["terminal"], eta=float(v["eta"]),
            stockpiles=tuple(
                Stockpile(
                    id=s["id"],
                    max_build_days=int(s.get("max_build_days", 7)),
                    components=tuple(
                        Component(c["id"], c["load_point"], float(c["tonnes"]))
                        for c in s["components"]))
                for s in v["stockpiles"]))
        for v in data["vessels"])
    return Instance(
        vessels=vessels,
        tides=TideTable(tuple(float(t) for t in data["tides"])),
        rail_graph=rail_graph_from_dict(data["rail_graph"]),
        terminals={name: _terminal_from_dict(name, cfg)
                   for name, cfg in data["terminals"].items()},
        warmup_hours=float(data.get("warmup_hours", 0.0)),
        meta=dict(data.get("meta", {})),
    )


def save_instance(instance: Instance, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(instance), fh, indent=1)
        fh.write("\n")


def load_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from exc
    return instance_from_dict(data)


# ---------------------------------------------------------------------------
# solution
# ---------------------------------------------------------------------------

def solution_to_dict(solution: Solution) -> dict:
    stockpiles = {}
    for sid, sched in sorted(solution.stockpiles.items()):
        entry = {
            "arrivals": {comp: [[w, t] for w, t in arrs]
                         for comp, arrs in sorted(sched.arrivals.items())},
            "load": [sched.load_start, sched.load_end],
        }
        if sched.pad is not None:
            entry["pad"] = sched.pad
            entry["position"] = sched.position
            entry["reclaimer"] = sched.reclaimer
        stockpiles[sid] = entry
    return {
        "format": SOLUTION_FORMAT,
        "version": 1,
        "objective": solution.objective,
        "meta": dict(solution.meta),
        "vessels": {vid: {"arrival": s.arrival, "departure": s.departure}
                    for vid, s in sorted(solution.vessels.items())},
        "stockpiles": stockpiles,
    }


def solution_from_dict(data: dict) -> Solution:
    if data.get("format") != SOLUTION_FORMAT:
        raise InputError("not a solution document")
    vessels = {vid: VesselSchedule(vid, float(s["arrival"]), float(s["departure"]))
               for vid, s in data["vessels"].items()}
    stockpiles = {}
    for sid, entry in data["stockpiles"].items():
        stockpiles[sid] = StockpileSchedule(
            stockpile_id=sid,
            arrivals={comp: tuple((float(w), float(t)) for w, t in arrs)
                      for comp, arrs in entry["arrivals"].items()},
            load_start=float(entry["load"][0]),
            load_end=float(entry["load"][1]),
            pad=entry.get("pad"),
            position=entry.get("position"),
            reclaimer=entry.get("reclaimer"),
        )
    return Solution(vessels=vessels, stockpiles=stockpiles,
                    objective=float(data["objective"]),
                    meta=dict(data.get("meta", {})))


def save_solution(solution: Solution, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(solution_to_dict(solution), fh, indent=1)
        fh.write("\n")


def load_solution(path) -> Solution:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from exc
    return solution_from_dict(data)


def canonical_json(data: dict) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def solution_hash(solution: Solution) -> str:
    """Stable digest of the schedule content (meta excluded)."""
    doc = solution_to_dict(solution)
    doc.pop("meta", None)
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()


def instance_hash(instance: Instance) -> str:
    doc = instance_to_dict(instance)
    doc.pop("meta", None)
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()
