"""Entity model and kinematics: aircraft, watercraft tracks, facilities, requests.

Entities are immutable snapshot values; state transitions build new instances
via dataclasses.replace. Watercraft motion is fully determined by the declared
route plan unless live position fixes override it.
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass

from .geo import GeoPoint, gc_distance, initial_bearing, destination_point


class AircraftStatus(str, enum.Enum):
    IDLE = "idle"
    ENROUTE = "enroute"
    ON_STATION = "on_station"
    RETURNING = "returning"


class MedLevel(str, enum.Enum):
    NONE = "none"
    MEDIC = "medic"
    ROLE2 = "role2"


class Precedence(str, enum.Enum):
    URGENT = "urgent"
    PRIORITY = "priority"
    ROUTINE = "routine"


PRECEDENCE_WEIGHT = {
    Precedence.URGENT: 4.0,
    Precedence.PRIORITY: 2.0,
    Precedence.ROUTINE: 1.0,
}


@dataclass(frozen=True)
class RoutePlan:
    """Waypoint route traversed at per-leg speeds starting at departure_time.

    A single waypoint means the craft holds station. loop=True closes the
    route from the last waypoint back to the first at the last leg's speed
    and repeats, so the track stays continuous.
    """

    waypoints: tuple[GeoPoint, ...]
    leg_speeds: tuple[float, ...] = ()
    departure_time: float = 0.0
    loop: bool = False

    def __post_init__(self):
        if len(self.waypoints) < 1:
            raise ValueError("route needs at least one waypoint")
        if len(self.leg_speeds) != len(self.waypoints) - 1:
            raise ValueError("leg_speeds must have len(waypoints) - 1 entries")
        for v in self.leg_speeds:
            if not v > 0:
                raise ValueError(f"leg speed must be positive, got {v}")
        for p, q in zip(self.waypoints, self.waypoints[1:]):
            if p == q:
                raise ValueError("consecutive waypoints must be distinct")


@dataclass(frozen=True)
class Watercraft:
    id: str
    route: RoutePlan
    helipad: bool
    refuel: bool
    med_level: MedLevel = MedLevel.NONE
    override_track: tuple[tuple[float, GeoPoint], ...] = ()

    def __post_init__(self):
        times = [t for t, _ in self.override_track]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError(f"override fixes for {self.id} must be strictly increasing in time")


@dataclass(frozen=True)
class Aircraft:
    id: str
    home_base: GeoPoint
    cruise_speed: float
    max_range: float
    status: AircraftStatus = AircraftStatus.IDLE
    fuel_range_remaining: float | None = None
    service_time_hoist: float = 300.0
    service_time_land: float = 180.0

    def __post_init__(self):
        if not self.cruise_speed > 0:
            raise ValueError(f"cruise_speed must be positive, got {self.cruise_speed}")
        if not self.max_range > 0:
            raise ValueError(f"max_range must be positive, got {self.max_range}")
        if self.fuel_range_remaining is None:
            object.__setattr__(self, "fuel_range_remaining", self.max_range)
        if not (0 <= self.fuel_range_remaining <= self.max_range):
            raise ValueError(
                f"fuel_range_remaining {self.fuel_range_remaining} outside [0, {self.max_range}]"
            )


@dataclass(frozen=True)
class TreatmentFacility:
    id: str
    location: GeoPoint
    role: int = 2

    def __post_init__(self):
        if self.role not in (2, 3):
            raise ValueError(f"facility role must be 2 or 3, got {self.role}")


@dataclass(frozen=True)
class EvacRequest:
    id: str
    time: float
    location: GeoPoint
    precedence: Precedence
    patient_count: int
    destination: str

    def __post_init__(self):
        if self.patient_count < 1:
            raise ValueError("patient_count must be >= 1")

    @property
    def weight(self) -> float:
        return PRECEDENCE_WEIGHT[self.precedence]


@dataclass(frozen=True)
class MissionLeg:
    """One flown segment, for position interpolation and plan display."""

    start: GeoPoint
    end: GeoPoint
    depart_ms: int
    arrive_ms: int


@dataclass(frozen=True)
class AircraftState:
    """Runtime picture of one airframe inside a world snapshot."""

    craft: Aircraft
    status: AircraftStatus = AircraftStatus.IDLE
    fuel_range_remaining: float = 0.0
    location: GeoPoint | None = None  # last fixed point (None -> home base)
    legs: tuple[MissionLeg, ...] = ()  # remaining/active legs for display

    @property
    def id(self) -> str:
        return self.craft.id

    def position(self, t_ms: int) -> GeoPoint:
        loc = self.location if self.location is not None else self.craft.home_base
        for leg in self.legs:
            if t_ms < leg.depart_ms:
                return loc
            if t_ms <= leg.arrive_ms:
                if leg.arrive_ms == leg.depart_ms or leg.start == leg.end:
                    return leg.end
                frac = (t_ms - leg.depart_ms) / (leg.arrive_ms - leg.depart_ms)
                d = gc_distance(leg.start, leg.end) * frac
                if d == 0.0:
                    return leg.start
                return destination_point(leg.start, initial_bearing(leg.start, leg.end), d)
            loc = leg.end
        return loc


def radius_of_action(max_range: float) -> float:
    """Planning reach for an out-and-back sortie: half the maximum range."""
    if max_range < 0:
        raise ValueError("max_range must be non-negative")
    return max_range / 2.0


def transfer_mode(w: Watercraft) -> str:
    """'land' when the watercraft has a helipad, else 'hoist'."""
    return "land" if w.helipad else "hoist"


def leg_feasible(ac: Aircraft | AircraftState, origin: GeoPoint, dest: GeoPoint,
                 refuel_at_to: bool) -> bool:
    """Can this aircraft fly origin->dest on its remaining fuel range?

    Without a refuel at the destination, half the remaining range is reserved
    for the return, mirroring radius-of-action planning.
    """
    fuel = ac.fuel_range_remaining
    d = gc_distance(origin, dest)
    if refuel_at_to:
        return d <= fuel
    return d <= fuel / 2.0


def _propagate_route(route: RoutePlan, t: float) -> GeoPoint:
    wps = route.waypoints
    if len(wps) == 1 or t <= route.departure_time:
        return wps[0]
    legs = list(zip(wps, wps[1:], route.leg_speeds))
    if route.loop:
        legs.append((wps[-1], wps[0], route.leg_speeds[-1]))
    durations = [gc_distance(p, q) / v for p, q, v in legs]
    total = sum(durations)
    elapsed = t - route.departure_time
    if route.loop:
        elapsed = elapsed % total
    elif elapsed >= total:
        return wps[-1]
    for (p, q, v), dur in zip(legs, durations):
        if elapsed < dur:
            d = v * elapsed
            if d == 0.0 or p == q:
                return p
            return destination_point(p, initial_bearing(p, q), d)
        elapsed -= dur
    return legs[-1][1]


def watercraft_position(w: Watercraft, t: float) -> GeoPoint:
    """Position at time t: live fixes take priority over the declared route.

    Fixes bracketing t are great-circle interpolated; past the last fix the
    craft holds at that fix (the feed is authoritative once it diverges).
    Before the first fix, and with no fixes at all, the route plan governs.
    """
    track = w.override_track
    if track:
        times = [ft for ft, _ in track]
        if t >= times[-1]:
            return track[-1][1]
        if t >= times[0]:
            i = bisect.bisect_right(times, t) - 1
            (t0, p0), (t1, p1) = track[i], track[i + 1]
            if p0 == p1:
                return p0
            d = gc_distance(p0, p1) * (t - t0) / (t1 - t0)
            if d == 0.0:
                return p0
            return destination_point(p0, initial_bearing(p0, p1), d)
    return _propagate_route(w.route, t)
