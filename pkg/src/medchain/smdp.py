"""Semi-Markov decision process over world snapshots.

Decision epochs fall at event completions and request arrivals. The scheduled
event queue lives inside the (immutable) world snapshot; transitions pop the
queue, apply handlers, and return a new snapshot plus the events that fired.
All event times are integer milliseconds so ordering is bit-stable across
platforms; geodesy rounds into the event layer at ms resolution.
"""

from __future__ import annotations

import enum
import math
from bisect import insort
from dataclasses import dataclass, replace
from random import Random

from .geo import GeoPoint, gc_distance
from .scenario import Scenario, SimConfig
from .world import (
    Aircraft,
    AircraftState,
    AircraftStatus,
    EvacRequest,
    MissionLeg,
    Watercraft,
    transfer_mode,
    watercraft_position,
)


class IllegalAction(ValueError):
    """Action not legal in the given state."""


class ActionKind(str, enum.Enum):
    HOLD = "hold"
    DISPATCH_DIRECT = "dispatch_direct"
    DISPATCH_VIA_AXP = "dispatch_via_axp"


_KIND_ORDER = {ActionKind.HOLD: 0, ActionKind.DISPATCH_DIRECT: 1, ActionKind.DISPATCH_VIA_AXP: 2}


@dataclass(frozen=True)
class DispatchAction:
    kind: ActionKind
    aircraft_id: str | None = None
    request_id: str | None = None
    axp_watercraft_id: str | None = None
    receiving_aircraft_id: str | None = None
    launch_time: float = 0.0

    def sort_key(self):
        return (
            _KIND_ORDER[self.kind],
            self.aircraft_id or "",
            self.request_id or "",
            self.axp_watercraft_id or "",
            self.receiving_aircraft_id or "",
        )


HOLD = DispatchAction(kind=ActionKind.HOLD)


class EventKind(str, enum.Enum):
    REQUEST_ARRIVAL = "RequestArrival"
    LAUNCH = "Launch"
    ARRIVE_PICKUP = "ArrivePickup"
    SERVICE_COMPLETE = "ServiceComplete"
    ARRIVE_AXP = "ArriveAXP"
    PATIENT_DROPOFF = "PatientDropoff"
    PATIENT_PICKUP = "PatientPickup"
    REFUEL_COMPLETE = "RefuelComplete"
    ARRIVE_FACILITY = "ArriveFacility"
    DELIVERED = "Delivered"
    RETURN_COMPLETE = "ReturnComplete"  # internal: not part of the public log


PUBLIC_EVENT_KINDS = tuple(k for k in EventKind if k is not EventKind.RETURN_COMPLETE)
_EVENT_ORDER = {k: i for i, k in enumerate(EventKind)}


@dataclass(frozen=True)
class Event:
    t_ms: int
    kind: EventKind
    aircraft_id: str | None = None
    watercraft_id: str | None = None
    request_id: str | None = None
    facility_id: str | None = None

    def sort_key(self):
        return (
            self.t_ms,
            _EVENT_ORDER[self.kind],
            self.aircraft_id or "",
            self.watercraft_id or "",
            self.request_id or "",
            self.facility_id or "",
        )


# Mission stages, advanced by event handlers.
_ST_TO_PICKUP = "to_pickup"
_ST_LOADING = "loading"
_ST_TO_FACILITY = "to_facility"
_ST_TO_AXP = "to_axp"
_ST_DROPPING = "dropping"
_ST_AWAIT_LAUNCH = "await_launch"
_ST_TO_AXP_RECV = "to_axp_recv"
_ST_WAIT_PATIENT = "wait_patient"
_ST_HOISTING_UP = "hoisting_up"
_ST_RETURNING = "returning"


@dataclass(frozen=True)
class Mission:
    role: str  # "direct" | "pickup" | "receiving"
    stage: str
    request_id: str
    facility_id: str
    axp_watercraft_id: str | None = None
    partner_id: str | None = None
    dropoff_ms: int | None = None  # set once the patient is on deck


@dataclass(frozen=True)
class WorldState:
    scenario: Scenario
    clock_ms: int
    aircraft: tuple[AircraftState, ...]
    pending: tuple[str, ...]
    in_transit: tuple[tuple[str, str, str], ...]  # (request_id, carrier_id, leg tag)
    delivered: tuple[tuple[str, int], ...]  # (request_id, t_ms)
    queue: tuple[Event, ...]  # kept sorted by Event.sort_key
    missions: tuple[tuple[str, Mission], ...]  # aircraft_id -> mission
    halted: bool = False

    @property
    def clock(self) -> float:
        return self.clock_ms / 1000.0

    def request(self, rid: str) -> EvacRequest:
        for r in self.scenario.requests:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def aircraft_state(self, aid: str) -> AircraftState:
        for a in self.aircraft:
            if a.id == aid:
                return a
        raise KeyError(aid)

    def mission_of(self, aid: str) -> Mission | None:
        for i, m in self.missions:
            if i == aid:
                return m
        return None


@dataclass(frozen=True)
class Transition:
    next_state: WorldState
    sojourn: float
    reward: float
    terminal: bool
    events: tuple[Event, ...]


def _ms(t_s: float) -> int:
    return round(t_s * 1000.0)


def _fly_ms(d_m: float, speed_mps: float) -> int:
    return int(math.ceil(d_m / speed_mps * 1000.0))


def _refuel_node(w: Watercraft) -> bool:
    # Refueling requires landing, hence a helipad.
    return w.refuel and w.helipad



def intercept_time(origin: GeoPoint, depart_s: float, speed: float, w: Watercraft,
                   tol_s: float = 1e-4) -> tuple[float, GeoPoint, float]:
    """Solve the rendezvous with a moving watercraft.

    Returns (arrival time s, watercraft position at arrival, distance flown m).
    Fixed-point iteration converges because watercraft are far slower than
    aircraft.
    """
    t = depart_s
    for _ in range(200):
        pos = watercraft_position(w, t)
        d = gc_distance(origin, pos)
        t_new = depart_s + d / speed
        if abs(t_new - t) <= tol_s:
            t = t_new
            break
        t = t_new
    pos = watercraft_position(w, t)
    return t, pos, gc_distance(origin, pos)


def initial_state(scenario: Scenario) -> tuple[WorldState, tuple[Event, ...]]:
    """Build the t=0 snapshot; returns it plus any events that fired at t=0."""
    aircraft = tuple(
        AircraftState(craft=a, status=a.status, fuel_range_remaining=a.fuel_range_remaining)
        for a in scenario.aircraft
    )
    queue = sorted(
        (Event(t_ms=_ms(r.time), kind=EventKind.REQUEST_ARRIVAL, request_id=r.id)
         for r in scenario.requests),
        key=Event.sort_key,
    )
    state = WorldState(
        scenario=scenario, clock_ms=0, aircraft=aircraft, pending=(),
        in_transit=(), delivered=(), queue=tuple(queue), missions=(),
    )
    return _drain_now(state, None)


def is_terminal(s: WorldState) -> bool:
    if s.halted:
        return True
    if s.pending or s.in_transit:
        return False
    return not any(e.kind is EventKind.REQUEST_ARRIVAL for e in s.queue)


def _grid(cfg: SimConfig, t_s: float) -> float:
    g = cfg.launch_grid_s
    return math.ceil(t_s / g) * g if g > 0 else t_s


def _grid_floor(cfg: SimConfig, t_s: float) -> float:
    g = cfg.launch_grid_s
    return math.floor(t_s / g) * g if g > 0 else t_s


def _direct_feasible(s: WorldState, ac: AircraftState, req: EvacRequest) -> bool:
    fac = s.scenario.facility(req.destination)
    base = ac.craft.home_base
    d1 = gc_distance(base, req.location)
    fuel = ac.fuel_range_remaining
    if d1 > fuel / 2.0:
        return False
    remaining = fuel - d1
    return gc_distance(req.location, fac.location) <= remaining / 2.0


def _via_feasible(s: WorldState, ac1: AircraftState, req: EvacRequest, w: Watercraft,
                  ac2: AircraftState) -> bool:
    """Feasibility of a relay through w at the predicted rendezvous time."""
    cfg = s.scenario.config
    fac = s.scenario.facility(req.destination)
    launch1 = _grid(cfg, s.clock)
    speed1 = ac1.craft.cruise_speed
    d1 = gc_distance(ac1.craft.home_base, req.location)
    fuel1 = ac1.fuel_range_remaining
    if d1 > fuel1 / 2.0:
        return False
    fuel1 -= d1
    depart = launch1 + d1 / speed1 + ac1.craft.service_time_land
    t_arr, wpos, d2 = intercept_time(req.location, depart, speed1, w)
    if _refuel_node(w):
        if d2 > fuel1:
            return False
    elif d2 > fuel1 / 2.0:
        return False
    # Receiving aircraft: arrives at the exchange, then carries to the facility.
    dropoff = t_arr + _service_time(ac1.craft, transfer_mode(w))
    t_arr2 = dropoff + cfg.deck_clear_s
    wpos2 = watercraft_position(w, t_arr2)
    d3 = gc_distance(ac2.craft.home_base, wpos2)
    fuel2 = ac2.fuel_range_remaining
    if d3 > fuel2 / 2.0:
        return False
    fuel2 -= d3
    return gc_distance(wpos2, fac.location) <= fuel2 / 2.0


def _service_time(craft: Aircraft, mode: str) -> float:
    return craft.service_time_land if mode in ("land", "ground") else craft.service_time_hoist


def legal_actions(s: WorldState) -> list[DispatchAction]:
    """Deterministically ordered legal actions; hold is always present."""
    cfg = s.scenario.config
    allowed = cfg.allowed_dispatch_kinds
    actions: list[DispatchAction] = [HOLD]
    launch = _grid(cfg, s.clock)
    idle = [a for a in s.aircraft if a.status is AircraftStatus.IDLE]
    for rid in s.pending:
        req = s.request(rid)
        if allowed is None or ActionKind.DISPATCH_DIRECT.value in allowed:
            for ac in idle:
                if _direct_feasible(s, ac, req):
                    actions.append(DispatchAction(
                        kind=ActionKind.DISPATCH_DIRECT, aircraft_id=ac.id,
                        request_id=rid, launch_time=launch))
        if allowed is None or ActionKind.DISPATCH_VIA_AXP.value in allowed:
            for ac1 in idle:
                for w in s.scenario.watercraft:
                    for ac2 in idle:
                        if ac2.id == ac1.id:
                            continue
                        if _via_feasible(s, ac1, req, w, ac2):
                            actions.append(DispatchAction(
                                kind=ActionKind.DISPATCH_VIA_AXP, aircraft_id=ac1.id,
                                request_id=rid, axp_watercraft_id=w.id,
                                receiving_aircraft_id=ac2.id, launch_time=launch))
    actions.sort(key=DispatchAction.sort_key)
    return actions


def _replace_ac(s: WorldState, new: AircraftState) -> tuple[AircraftState, ...]:
    return tuple(new if a.id == new.id else a for a in s.aircraft)


def _set_mission(missions, aid: str, m: Mission | None):
    out = tuple((i, mm) for i, mm in missions if i != aid)
    if m is not None:
        out = out + ((aid, m),)
    return out


def _push(queue: tuple[Event, ...], *events: Event) -> tuple[Event, ...]:
    q = list(queue)
    for e in events:
        insort(q, e, key=Event.sort_key)
    return tuple(q)


def _carrier_update(in_transit, rid: str, carrier: str, tag: str):
    return tuple(t for t in in_transit if t[0] != rid) + ((rid, carrier, tag),)


def apply_action(s: WorldState, a: DispatchAction) -> WorldState:
    """Commit an action at the current clock without advancing time.

    Raises IllegalAction when the action is not currently legal.
    """
    if a.kind is ActionKind.HOLD:
        return s
    cfg = s.scenario.config
    if a.launch_time < s.clock - 1e-9:
        raise IllegalAction(f"launch_time {a.launch_time} is before clock {s.clock}")
    if a.request_id not in s.pending:
        raise IllegalAction(f"request {a.request_id} is not pending")
    req = s.request(a.request_id)
    ac1 = s.aircraft_state(a.aircraft_id)
    if ac1.status is not AircraftStatus.IDLE:
        raise IllegalAction(f"aircraft {a.aircraft_id} is not idle")
    allowed = cfg.allowed_dispatch_kinds
    if allowed is not None and a.kind.value not in allowed:
        raise IllegalAction(f"scenario prohibits {a.kind.value}")
    launch_ms = _ms(_grid(cfg, max(a.launch_time, s.clock)))

    if a.kind is ActionKind.DISPATCH_DIRECT:
        if a.axp_watercraft_id or a.receiving_aircraft_id:
            raise IllegalAction("dispatch_direct takes no exchange assignments")
        if not _direct_feasible(s, ac1, req):
            raise IllegalAction("direct dispatch not leg-feasible")
        mission = Mission(role="direct", stage=_ST_AWAIT_LAUNCH, request_id=req.id,
                          facility_id=req.destination)
        state = replace(
            s,
            aircraft=_replace_ac(s, replace(ac1, status=AircraftStatus.ENROUTE)),
            pending=tuple(r for r in s.pending if r != req.id),
            in_transit=_carrier_update(s.in_transit, req.id, ac1.id, "assigned"),
            missions=_set_mission(s.missions, ac1.id, mission),
            queue=_push(s.queue, Event(t_ms=launch_ms, kind=EventKind.LAUNCH,
                                       aircraft_id=ac1.id, request_id=req.id)),
        )
        return state

    # dispatch_via_axp
    if not a.axp_watercraft_id or not a.receiving_aircraft_id:
        raise IllegalAction("dispatch_via_axp requires a watercraft and a receiving aircraft")
    if a.receiving_aircraft_id == a.aircraft_id:
        raise IllegalAction("pickup and receiving aircraft must differ")
    ac2 = s.aircraft_state(a.receiving_aircraft_id)
    if ac2.status is not AircraftStatus.IDLE:
        raise IllegalAction(f"aircraft {a.receiving_aircraft_id} is not idle")
    w = s.scenario.watercraft_by_id(a.axp_watercraft_id)
    if not _via_feasible(s, ac1, req, w, ac2):
        raise IllegalAction("via-AXP dispatch not leg-feasible at predicted rendezvous")

    # Deterministic prediction schedules the receiving launch so it arrives
    # deck_clear_s after the predicted patient drop-off.
    launch1 = launch_ms / 1000.0
    speed1 = ac1.craft.cruise_speed
    d1 = gc_distance(ac1.craft.home_base, req.location)
    depart = launch1 + d1 / speed1 + ac1.craft.service_time_land
    t_arr, _, _ = intercept_time(req.location, depart, speed1, w)
    dropoff_pred = t_arr + _service_time(ac1.craft, transfer_mode(w))
    target_arr2 = dropoff_pred + cfg.deck_clear_s
    wpos2 = watercraft_position(w, target_arr2)
    d3 = gc_distance(ac2.craft.home_base, wpos2)
    launch2 = max(s.clock, _grid_floor(cfg, target_arr2 - d3 / ac2.craft.cruise_speed))
    launch2_ms = max(launch_ms, _ms(launch2))

    m1 = Mission(role="pickup", stage=_ST_AWAIT_LAUNCH, request_id=req.id,
                 facility_id=req.destination, axp_watercraft_id=w.id, partner_id=ac2.id)
    m2 = Mission(role="receiving", stage=_ST_AWAIT_LAUNCH, request_id=req.id,
                 facility_id=req.destination, axp_watercraft_id=w.id, partner_id=ac1.id)
    missions = _set_mission(_set_mission(s.missions, ac1.id, m1), ac2.id, m2)
    committed = {ac1.id: replace(ac1, status=AircraftStatus.ENROUTE),
                 ac2.id: replace(ac2, status=AircraftStatus.ENROUTE)}
    state = replace(
        s,
        aircraft=tuple(committed.get(a_st.id, a_st) for a_st in s.aircraft),
        pending=tuple(r for r in s.pending if r != req.id),
        in_transit=_carrier_update(s.in_transit, req.id, ac1.id, "assigned"),
        missions=missions,
        queue=_push(
            s.queue,
            Event(t_ms=launch_ms, kind=EventKind.LAUNCH, aircraft_id=ac1.id, request_id=req.id),
            Event(t_ms=launch2_ms, kind=EventKind.LAUNCH, aircraft_id=ac2.id, request_id=req.id),
        ),
    )
    return state


def _sample_service(cfg: SimConfig, rng: Random | None, mean: float) -> float:
    if rng is None or not cfg.stochastic or mean <= 0:
        return mean
    lo, hi = mean * (1 - cfg.noise_spread), mean * (1 + cfg.noise_spread)
    return rng.triangular(lo, hi, mean)


def _handle(s: WorldState, e: Event, rng: Random | None) -> WorldState:
    cfg = s.scenario.config
    t = e.t_ms / 1000.0
    kind = e.kind

    if kind is EventKind.REQUEST_ARRIVAL:
        return replace(s, pending=s.pending + (e.request_id,))

    if kind is EventKind.RETURN_COMPLETE:
        ac = s.aircraft_state(e.aircraft_id)
        return replace(
            s,
            aircraft=_replace_ac(s, replace(
                ac, status=AircraftStatus.IDLE, fuel_range_remaining=ac.craft.max_range,
                location=ac.craft.home_base, legs=())),
            missions=_set_mission(s.missions, e.aircraft_id, None),
        )

    ac = s.aircraft_state(e.aircraft_id) if e.aircraft_id else None
    m = s.mission_of(e.aircraft_id) if e.aircraft_id else None

    if kind is EventKind.LAUNCH:
        req = s.request(m.request_id)
        origin = ac.position(e.t_ms)
        if m.role in ("direct", "pickup"):
            d = gc_distance(origin, req.location)
            arr = e.t_ms + _fly_ms(d, ac.craft.cruise_speed)
            leg = MissionLeg(start=origin, end=req.location, depart_ms=e.t_ms, arrive_ms=arr)
            new_ac = replace(ac, fuel_range_remaining=ac.fuel_range_remaining - d,
                             legs=ac.legs + (leg,))
            ev = Event(t_ms=arr, kind=EventKind.ARRIVE_PICKUP, aircraft_id=ac.id,
                       request_id=req.id)
        else:  # receiving: fly to the exchange watercraft
            w = s.scenario.watercraft_by_id(m.axp_watercraft_id)
            t_arr, wpos, d = intercept_time(origin, t, ac.craft.cruise_speed, w)
            arr = max(e.t_ms, _ms(t_arr))
            leg = MissionLeg(start=origin, end=wpos, depart_ms=e.t_ms, arrive_ms=arr)
            new_ac = replace(ac, fuel_range_remaining=ac.fuel_range_remaining - d,
                             legs=ac.legs + (leg,))
            ev = Event(t_ms=arr, kind=EventKind.ARRIVE_AXP, aircraft_id=ac.id,
                       watercraft_id=w.id, request_id=req.id)
        stage = {"direct": _ST_TO_PICKUP, "pickup": _ST_TO_PICKUP,
                 "receiving": _ST_TO_AXP_RECV}[m.role]
        return replace(
            s, aircraft=_replace_ac(s, new_ac),
            missions=_set_mission(s.missions, ac.id, replace(m, stage=stage)),
            queue=_push(s.queue, ev),
        )

    if kind is EventKind.ARRIVE_PICKUP:
        svc = _sample_service(cfg, rng, ac.craft.service_time_land)
        done = e.t_ms + _ms(svc)
        return replace(
            s,
            aircraft=_replace_ac(s, replace(ac, status=AircraftStatus.ON_STATION)),
            missions=_set_mission(s.missions, ac.id, replace(m, stage=_ST_LOADING)),
            queue=_push(s.queue, Event(t_ms=done, kind=EventKind.SERVICE_COMPLETE,
                                       aircraft_id=ac.id, request_id=e.request_id)),
        )

    if kind is EventKind.SERVICE_COMPLETE:
        req = s.request(m.request_id)
        if m.stage == _ST_LOADING:
            # Patient aboard; depart for the facility or the exchange.
            s = replace(s, in_transit=_carrier_update(s.in_transit, req.id, ac.id, "aboard"))
            origin = ac.position(e.t_ms)
            if m.role == "direct":
                fac = s.scenario.facility(m.facility_id)
                d = gc_distance(origin, fac.location)
                arr = e.t_ms + _fly_ms(d, ac.craft.cruise_speed)
                leg = MissionLeg(start=origin, end=fac.location, depart_ms=e.t_ms, arrive_ms=arr)
                new_ac = replace(ac, status=AircraftStatus.ENROUTE,
                                 fuel_range_remaining=ac.fuel_range_remaining - d,
                                 legs=ac.legs + (leg,))
                ev = Event(t_ms=arr, kind=EventKind.ARRIVE_FACILITY, aircraft_id=ac.id,
                           request_id=req.id, facility_id=fac.id)
                stage = _ST_TO_FACILITY
            else:
                w = s.scenario.watercraft_by_id(m.axp_watercraft_id)
                t_arr, wpos, d = intercept_time(origin, e.t_ms / 1000.0, ac.craft.cruise_speed, w)
                arr = max(e.t_ms + 1, _ms(t_arr))
                leg = MissionLeg(start=origin, end=wpos, depart_ms=e.t_ms, arrive_ms=arr)
                new_ac = replace(ac, status=AircraftStatus.ENROUTE,
                                 fuel_range_remaining=ac.fuel_range_remaining - d,
                                 legs=ac.legs + (leg,))
                ev = Event(t_ms=arr, kind=EventKind.ARRIVE_AXP, aircraft_id=ac.id,
                           watercraft_id=w.id, request_id=req.id)
                stage = _ST_TO_AXP
            return replace(
                s, aircraft=_replace_ac(s, new_ac),
                missions=_set_mission(s.missions, ac.id, replace(m, stage=stage)),
                queue=_push(s.queue, ev),
            )
        if m.stage == _ST_HOISTING_UP:
            # Receiving aircraft has the patient secured; burn hoist fuel, head out.
            w = s.scenario.watercraft_by_id(m.axp_watercraft_id)
            mode = transfer_mode(w)
            fuel = ac.fuel_range_remaining
            if mode == "hoist":
                fuel = max(0.0, fuel - _service_time(ac.craft, mode) * ac.craft.cruise_speed)
            fac = s.scenario.facility(m.facility_id)
            origin = ac.position(e.t_ms)
            d = gc_distance(origin, fac.location)
            arr = e.t_ms + _fly_ms(d, ac.craft.cruise_speed)
            leg = MissionLeg(start=origin, end=fac.location, depart_ms=e.t_ms, arrive_ms=arr)
            new_ac = replace(ac, status=AircraftStatus.ENROUTE,
                             fuel_range_remaining=max(0.0, fuel - d), legs=ac.legs + (leg,))
            return replace(
                s, aircraft=_replace_ac(s, new_ac),
                missions=_set_mission(s.missions, ac.id, replace(m, stage=_ST_TO_FACILITY)),
                queue=_push(s.queue, Event(t_ms=arr, kind=EventKind.ARRIVE_FACILITY,
                                           aircraft_id=ac.id, request_id=req.id,
                                           facility_id=fac.id)),
            )
        raise RuntimeError(f"unexpected service completion in stage {m.stage}")

    if kind is EventKind.ARRIVE_AXP:
        w = s.scenario.watercraft_by_id(e.watercraft_id)
        if m.role in ("direct", "pickup") or m.stage == _ST_TO_AXP:
            svc = _sample_service(cfg, rng, _service_time(ac.craft, transfer_mode(w)))
            done = e.t_ms + _ms(svc)
            return replace(
                s,
                aircraft=_replace_ac(s, replace(ac, status=AircraftStatus.ON_STATION)),
                missions=_set_mission(s.missions, ac.id, replace(m, stage=_ST_DROPPING)),
                queue=_push(s.queue, Event(t_ms=done, kind=EventKind.PATIENT_DROPOFF,
                                           aircraft_id=ac.id, watercraft_id=w.id,
                                           request_id=e.request_id)),
            )
        # Receiving aircraft on station; pick up as soon as the deck is ready.
        s = replace(s, aircraft=_replace_ac(s, replace(ac, status=AircraftStatus.ON_STATION)),
                    missions=_set_mission(s.missions, ac.id, replace(m, stage=_ST_WAIT_PATIENT)))
        drop = s.mission_of(ac.id).dropoff_ms
        if drop is not None:
            t_pick = max(e.t_ms, drop + _ms(cfg.deck_clear_s))
            s = replace(s, queue=_push(s.queue, Event(
                t_ms=t_pick, kind=EventKind.PATIENT_PICKUP, aircraft_id=ac.id,
                watercraft_id=e.watercraft_id, request_id=e.request_id)))
        return s

    if kind is EventKind.PATIENT_DROPOFF:
        w = s.scenario.watercraft_by_id(e.watercraft_id)
        mode = transfer_mode(w)
        fuel = ac.fuel_range_remaining
        if mode == "hoist":
            fuel = max(0.0, fuel - _service_time(ac.craft, mode) * ac.craft.cruise_speed)
        s = replace(
            s,
            in_transit=_carrier_update(s.in_transit, e.request_id, w.id, "on_deck"),
            aircraft=_replace_ac(s, replace(ac, fuel_range_remaining=fuel,
                                            status=AircraftStatus.RETURNING)),
        )
        # Mark the drop time on the receiver's mission so it can schedule pickup.
        recv_id = m.partner_id
        recv_m = s.mission_of(recv_id) if recv_id else None
        if recv_m is not None:
            recv_m = replace(recv_m, dropoff_ms=e.t_ms)
            s = replace(s, missions=_set_mission(s.missions, recv_id, recv_m))
            if recv_m.stage == _ST_WAIT_PATIENT:
                t_pick = e.t_ms + _ms(cfg.deck_clear_s)
                s = replace(s, queue=_push(s.queue, Event(
                    t_ms=t_pick, kind=EventKind.PATIENT_PICKUP, aircraft_id=recv_id,
                    watercraft_id=w.id, request_id=e.request_id)))
        # Pickup aircraft recovers: refuel alongside if possible, then return home.
        s = replace(s, missions=_set_mission(s.missions, ac.id,
                                             replace(s.mission_of(ac.id), stage=_ST_RETURNING)))
        if _refuel_node(w):
            done = e.t_ms + _ms(cfg.refuel_time_s)
            return replace(s, queue=_push(s.queue, Event(
                t_ms=done, kind=EventKind.REFUEL_COMPLETE, aircraft_id=ac.id,
                watercraft_id=w.id)))
        return _start_return(s, ac.id, e.t_ms)

    if kind is EventKind.PATIENT_PICKUP:
        w = s.scenario.watercraft_by_id(e.watercraft_id)
        svc = _sample_service(cfg, rng, _service_time(ac.craft, transfer_mode(w)))
        done = e.t_ms + _ms(svc)
        return replace(
            s,
            in_transit=_carrier_update(s.in_transit, e.request_id, ac.id, "aboard"),
            missions=_set_mission(s.missions, ac.id, replace(m, stage=_ST_HOISTING_UP)),
            queue=_push(s.queue, Event(t_ms=done, kind=EventKind.SERVICE_COMPLETE,
                                       aircraft_id=ac.id, request_id=e.request_id)),
        )

    if kind is EventKind.REFUEL_COMPLETE:
        new_ac = replace(ac, fuel_range_remaining=ac.craft.max_range)
        s = replace(s, aircraft=_replace_ac(s, new_ac))
        return _start_return(s, ac.id, e.t_ms)

    if kind is EventKind.ARRIVE_FACILITY:
        # Delivery happens on touchdown; the Delivered event is logged at the
        # same instant and handles the request bookkeeping.
        return replace(s, queue=_push(s.queue, Event(
            t_ms=e.t_ms, kind=EventKind.DELIVERED, aircraft_id=ac.id,
            request_id=e.request_id, facility_id=e.facility_id)))

    if kind is EventKind.DELIVERED:
        s = replace(
            s,
            in_transit=tuple(t for t in s.in_transit if t[0] != e.request_id),
            delivered=s.delivered + ((e.request_id, e.t_ms),),
            missions=_set_mission(s.missions, ac.id, replace(m, stage=_ST_RETURNING)),
        )
        return _start_return(s, ac.id, e.t_ms)

    raise RuntimeError(f"unhandled event kind {kind}")


def _start_return(s: WorldState, aid: str, t_ms: int) -> WorldState:
    ac = s.aircraft_state(aid)
    origin = ac.position(t_ms)
    d = gc_distance(origin, ac.craft.home_base)
    arr = t_ms + _fly_ms(d, ac.craft.cruise_speed)
    leg = MissionLeg(start=origin, end=ac.craft.home_base, depart_ms=t_ms, arrive_ms=arr)
    new_ac = replace(ac, status=AircraftStatus.RETURNING,
                     fuel_range_remaining=max(0.0, ac.fuel_range_remaining - d),
                     legs=ac.legs + (leg,))
    return replace(
        s,
        aircraft=_replace_ac(s, new_ac),
        queue=_push(s.queue, Event(t_ms=arr, kind=EventKind.RETURN_COMPLETE, aircraft_id=aid)),
    )


def _drain_now(s: WorldState, rng: Random | None) -> tuple[WorldState, tuple[Event, ...]]:
    fired: list[Event] = []
    while s.queue and s.queue[0].t_ms <= s.clock_ms:
        e = s.queue[0]
        s = replace(s, queue=s.queue[1:])
        s = _handle(s, e, rng)
        if e.kind is not EventKind.RETURN_COMPLETE:
            fired.append(e)
    return s, tuple(fired)


def _undelivered_cost(s: WorldState, start_ms: int, end_ms: int,
                      delivered_at: dict[str, int]) -> float:
    """Precedence-weighted patient-seconds of undelivered time in [start, end)."""
    total = 0.0
    done = dict(s.delivered)
    for r in s.scenario.requests:
        if r.id in done and done[r.id] <= start_ms:
            continue
        arrive = max(start_ms, _ms(r.time))
        stop = min(end_ms, delivered_at.get(r.id, end_ms))
        if stop > arrive:
            total += r.weight * r.patient_count * (stop - arrive) / 1000.0
    return total


def advance(s: WorldState, rng: Random | None) -> Transition:
    """Move to the next decision epoch (all events at the next event time)."""
    start_ms = s.clock_ms
    if not s.queue:
        return _exhausted(s, start_ms)
    next_ms = s.queue[0].t_ms
    s = replace(s, clock_ms=next_ms)
    s, fired = _drain_now(s, rng)
    delivered_at = {e.request_id: e.t_ms for e in fired if e.kind is EventKind.DELIVERED}
    reward = -_undelivered_cost(s, start_ms, next_ms, delivered_at)
    return Transition(next_state=s, sojourn=(next_ms - start_ms) / 1000.0,
                      reward=reward, terminal=is_terminal(s), events=fired)


def _exhausted(s: WorldState, start_ms: int) -> Transition:
    """No events left: terminal, or abandonment of any still-undelivered patients."""
    if not s.pending and not s.in_transit:
        return Transition(next_state=replace(s, halted=True), sojourn=0.0, reward=0.0,
                          terminal=True, events=())
    horizon_ms = _ms(s.scenario.config.abandon_horizon_s)
    end_ms = start_ms + horizon_ms
    cost = _undelivered_cost(s, start_ms, end_ms, {})
    nxt = replace(s, clock_ms=end_ms, halted=True)
    return Transition(next_state=nxt, sojourn=horizon_ms / 1000.0, reward=-cost,
                      terminal=True, events=())


def step(s: WorldState, a: DispatchAction, rng: Random | None = None) -> Transition:
    """Apply an action and advance to the next decision epoch."""
    if is_terminal(s):
        raise IllegalAction("cannot step a terminal state")
    s2 = apply_action(s, a)
    s2, fired_now = _drain_now(s2, rng)
    tr = advance(s2, rng)
    if fired_now:
        return replace(tr, events=fired_now + tr.events)
    return tr


def predict_timeline(s: WorldState, a: DispatchAction,
                     max_epochs: int = 64) -> tuple[tuple[Event, ...], float | None]:
    """Deterministic forward rollout of one action with hold elsewhere.

    Returns the public events involving the dispatched request plus the
    delivery time in seconds (None if the request is never delivered within
    the horizon). Uses exact service means regardless of the scenario's noise
    setting, matching the planner's deterministic-prediction contract.
    """
    events: list[Event] = []
    rid = a.request_id
    state = s
    action = a
    for _ in range(max_epochs):
        if is_terminal(state):
            break
        tr = step(state, action, rng=None)
        events.extend(tr.events)
        state = tr.next_state
        action = HOLD
        for rid2, t_ms in state.delivered:
            if rid2 == rid:
                mine = tuple(e for e in events if e.request_id == rid)
                return mine, t_ms / 1000.0
        if tr.terminal:
            break
    mine = tuple(e for e in events if e.request_id == rid)
    return mine, None
