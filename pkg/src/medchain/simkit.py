"""Deterministic discrete-event simulator: scenario + policy -> event log + metrics.

The event log is the single source of truth: every metric is recomputable
from the log alone. Logs serialize as JSON Lines with integer-millisecond
timestamps, so identical (scenario, policy, seed) inputs yield byte-identical
output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from random import Random
from typing import Callable

from .geo import gc_distance
from .scenario import Scenario
from .smdp import (
    DispatchAction,
    Event,
    EventKind,
    WorldState,
    initial_state,
    is_terminal,
    step,
)
from .world import watercraft_position

Policy = Callable[[WorldState], DispatchAction]

_MAX_EPOCHS = 100_000


@dataclass(frozen=True)
class Metrics:
    """Per-request and per-aircraft outcome measures, all derived from the log."""

    response_time: dict[str, float]  # first ArrivePickup - RequestArrival
    time_to_facility: dict[str, float]  # Delivered - RequestArrival
    axp_dwell: tuple[tuple[str, str, float], ...]  # (request, watercraft, seconds)
    utilization: dict[str, float]  # per aircraft, fraction of sim span


def run(scenario: Scenario, policy: Policy, seed: int = 0) -> tuple[tuple[Event, ...], Metrics]:
    """Execute a scenario under a policy; returns (event log, metrics)."""
    rng = Random(seed)
    state, fired = initial_state(scenario)
    log: list[Event] = list(fired)
    for _ in range(_MAX_EPOCHS):
        if is_terminal(state):
            break
        action = policy(state)
        tr = step(state, action, rng)
        log.extend(tr.events)
        state = tr.next_state
    else:
        raise RuntimeError("simulation did not terminate (policy bug?)")
    return tuple(log), metrics_from_log(tuple(log), scenario)


def metrics_from_log(log: tuple[Event, ...], scenario: Scenario) -> Metrics:
    arrivals: dict[str, int] = {}
    first_pickup: dict[str, int] = {}
    delivered: dict[str, int] = {}
    dwell: list[tuple[str, str, float]] = []
    drops: dict[tuple[str, str], int] = {}
    for e in log:
        if e.kind is EventKind.REQUEST_ARRIVAL:
            arrivals[e.request_id] = e.t_ms
        elif e.kind is EventKind.ARRIVE_PICKUP:
            first_pickup.setdefault(e.request_id, e.t_ms)
        elif e.kind is EventKind.DELIVERED:
            delivered[e.request_id] = e.t_ms
        elif e.kind is EventKind.PATIENT_DROPOFF:
            drops[(e.request_id, e.watercraft_id)] = e.t_ms
        elif e.kind is EventKind.PATIENT_PICKUP:
            t0 = drops.pop((e.request_id, e.watercraft_id), None)
            if t0 is not None:
                dwell.append((e.request_id, e.watercraft_id, (e.t_ms - t0) / 1000.0))

    response = {rid: (t - arrivals[rid]) / 1000.0
                for rid, t in first_pickup.items() if rid in arrivals}
    ttf = {rid: (t - arrivals[rid]) / 1000.0
           for rid, t in delivered.items() if rid in arrivals}

    span_ms = log[-1].t_ms if log else 0
    utilization: dict[str, float] = {}
    for a in scenario.aircraft:
        events = [e for e in log if e.aircraft_id == a.id]
        busy = 0
        block_start = None
        last_t = None
        for e in events:
            if e.kind is EventKind.LAUNCH:
                if block_start is not None and last_t is not None:
                    busy += last_t - block_start
                block_start = e.t_ms
            last_t = e.t_ms
        if block_start is not None and last_t is not None:
            busy += last_t - block_start
        utilization[a.id] = busy / span_ms if span_ms > 0 else 0.0

    return Metrics(response_time=response, time_to_facility=ttf,
                   axp_dwell=tuple(dwell), utilization=utilization)


_ID_FIELDS = ("aircraft_id", "watercraft_id", "request_id", "facility_id")


def event_to_json(e: Event) -> str:
    doc: dict = {"t_ms": e.t_ms, "kind": e.kind.value}
    for f in _ID_FIELDS:
        v = getattr(e, f)
        if v is not None:
            doc[f] = v
    return json.dumps(doc, separators=(",", ":"))


def write_jsonl(log: tuple[Event, ...]) -> str:
    return "".join(event_to_json(e) + "\n" for e in log)


def parse_jsonl(text: str) -> tuple[Event, ...]:
    events = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        doc = json.loads(line)
        events.append(Event(
            t_ms=int(doc["t_ms"]), kind=EventKind(doc["kind"]),
            aircraft_id=doc.get("aircraft_id"), watercraft_id=doc.get("watercraft_id"),
            request_id=doc.get("request_id"), facility_id=doc.get("facility_id"),
        ))
    return tuple(events)


# Expected relative order of public per-request milestones.
_REQUEST_MILESTONES = (
    EventKind.REQUEST_ARRIVAL,
    EventKind.ARRIVE_PICKUP,
    EventKind.PATIENT_DROPOFF,
    EventKind.PATIENT_PICKUP,
    EventKind.ARRIVE_FACILITY,
    EventKind.DELIVERED,
)


def replay_violations(log: tuple[Event, ...], scenario: Scenario) -> list[str]:
    """Internal-consistency checks for an event log; empty list means clean."""
    problems: list[str] = []

    for prev, cur in zip(log, log[1:]):
        if cur.t_ms < prev.t_ms:
            problems.append(f"time regresses at t_ms={cur.t_ms} after {prev.t_ms}")
            break

    by_request: dict[str, list[Event]] = {}
    for e in log:
        if e.request_id:
            by_request.setdefault(e.request_id, []).append(e)
    for rid, events in by_request.items():
        kinds = [e.kind for e in events]
        if kinds.count(EventKind.REQUEST_ARRIVAL) != 1:
            problems.append(f"request {rid}: expected exactly one arrival")
        if kinds.count(EventKind.DELIVERED) > 1:
            problems.append(f"request {rid}: delivered more than once")
        idx = [ _REQUEST_MILESTONES.index(k) for k in kinds if k in _REQUEST_MILESTONES]
        drop_pick = [k for k in kinds if k in (EventKind.PATIENT_DROPOFF,
                                               EventKind.PATIENT_PICKUP)]
        for a, b in zip(drop_pick, drop_pick[1:]):
            if a == b:
                problems.append(f"request {rid}: consecutive {a.value} without counterpart")
        if drop_pick and drop_pick[0] is EventKind.PATIENT_PICKUP:
            problems.append(f"request {rid}: patient picked up before any drop-off")

    problems.extend(_movement_violations(log, scenario))
    return problems


def _event_position(e: Event, scenario: Scenario):
    if e.kind is EventKind.LAUNCH:
        return scenario.aircraft_by_id(e.aircraft_id).home_base
    if e.kind is EventKind.ARRIVE_PICKUP:
        for r in scenario.requests:
            if r.id == e.request_id:
                return r.location
        return None
    if e.kind in (EventKind.ARRIVE_AXP, EventKind.PATIENT_DROPOFF,
                  EventKind.PATIENT_PICKUP, EventKind.REFUEL_COMPLETE):
        if e.watercraft_id:
            w = scenario.watercraft_by_id(e.watercraft_id)
            return watercraft_position(w, e.t_ms / 1000.0)
        return None
    if e.kind in (EventKind.ARRIVE_FACILITY, EventKind.DELIVERED):
        return scenario.facility(e.facility_id).location if e.facility_id else None
    return None


def _movement_violations(log: tuple[Event, ...], scenario: Scenario) -> list[str]:
    problems = []
    for a in scenario.aircraft:
        located = []
        for e in log:
            if e.aircraft_id != a.id:
                continue
            pos = _event_position(e, scenario)
            if pos is not None:
                located.append((e, pos))
        for (e1, p1), (e2, p2) in zip(located, located[1:]):
            dt = (e2.t_ms - e1.t_ms) / 1000.0
            d = gc_distance(p1, p2)
            if d > a.cruise_speed * dt + a.cruise_speed * 0.002 + 1.0:
                problems.append(
                    f"aircraft {a.id}: {d:.0f} m between {e1.kind.value}@{e1.t_ms} and "
                    f"{e2.kind.value}@{e2.t_ms} exceeds reachable distance")
    return problems


def replay_check(log: tuple[Event, ...], scenario: Scenario) -> bool:
    """True when the log passes every internal-consistency invariant."""
    return not replay_violations(log, scenario)
