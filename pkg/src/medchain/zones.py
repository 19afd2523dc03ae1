"""Transfer opportunity zones, coverage windows, evacuation chains, and
dedicated exchange-ship placement.

Zones are exact disk intersections queried by point membership; polygon
boundaries exist only for display export. The chain search runs over a
time-expanded graph whose nodes are (location, time quantum) pairs with
resource labels per aircraft, so moving watercraft and refuel stops are
handled uniformly.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .geo import GeoPoint, destination_point, gc_distance
from .world import Aircraft, Watercraft, transfer_mode, watercraft_position

DEFAULT_DT_S = 300.0
DEFAULT_REFUEL_S = 600.0
DEFAULT_DECK_CLEAR_S = 60.0


class NoFeasibleChain(Exception):
    """No relay of aircraft and watercraft reaches the destination in time."""


@dataclass(frozen=True)
class ZoneRegion:
    """Intersection of great-circle disks; empty when the disks don't overlap."""

    disks: tuple[tuple[GeoPoint, float], ...]

    def __post_init__(self):
        if not self.disks:
            raise ValueError("a zone needs at least one disk")
        if any(r <= 0 for _, r in self.disks):
            raise ValueError("disk radii must be positive")

    def contains(self, p: GeoPoint) -> bool:
        return all(gc_distance(c, p) <= r for c, r in self.disks)

    def is_empty(self) -> bool:
        for i, (c1, r1) in enumerate(self.disks):
            for c2, r2 in self.disks[i + 1:]:
                if gc_distance(c1, c2) > r1 + r2:
                    return True
        return False


@dataclass(frozen=True)
class TimeWindow:
    start: float
    end: float
    watercraft_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.end > self.start:
            raise ValueError("window end must be after start")


@dataclass(frozen=True)
class ChainLeg:
    carrier_aircraft_id: str
    from_id: str
    to_id: str
    start: GeoPoint
    end: GeoPoint
    depart: float
    arrive: float
    refuel: bool
    exchange_mode: str  # mode of the exchange/stop at the leg's destination


@dataclass(frozen=True)
class TransferPlan:
    legs: tuple[ChainLeg, ...]
    total_time: float
    total_distance: float

    def exchange_count(self) -> int:
        """Number of aircraft-to-aircraft handoffs (carrier changes)."""
        changes = 0
        for a, b in zip(self.legs, self.legs[1:]):
            if a.carrier_aircraft_id != b.carrier_aircraft_id:
                changes += 1
        return changes


def opportunity_zone(origin_a: GeoPoint, roa_a: float, origin_b: GeoPoint,
                     roa_b: float) -> ZoneRegion:
    """Region where one watercraft can bridge two aircraft operating radii."""
    return ZoneRegion(disks=((origin_a, roa_a), (origin_b, roa_b)))


def zone_windows(z: ZoneRegion, fleet: list[Watercraft], horizon: tuple[float, float],
                 dt: float) -> tuple[list[TimeWindow], list[TimeWindow]]:
    """Sampled coverage windows and their complement (blackouts) over horizon.

    A sample time is covered when at least one watercraft is inside the zone;
    consecutive covered samples merge. Each sample covers [t, t+dt), clipped
    to the horizon, so windows and blackouts partition [t0, t1] exactly.
    """
    t0, t1 = horizon
    if not t1 > t0:
        raise ValueError("horizon end must be after start")
    if not dt > 0:
        raise ValueError("dt must be positive")
    samples: list[tuple[float, tuple[str, ...]]] = []
    t = t0
    while t < t1:
        inside = tuple(w.id for w in fleet if z.contains(watercraft_position(w, t)))
        samples.append((t, inside))
        t += dt

    windows: list[TimeWindow] = []
    blackouts: list[TimeWindow] = []
    i = 0
    while i < len(samples):
        covered = bool(samples[i][1])
        j = i
        ids: set[str] = set()
        while j < len(samples) and bool(samples[j][1]) == covered:
            ids.update(samples[j][1])
            j += 1
        start = samples[i][0]
        end = samples[j][0] if j < len(samples) else t1
        win = TimeWindow(start=start, end=end, watercraft_ids=tuple(sorted(ids)))
        (windows if covered else blackouts).append(win)
        i = j
    return windows, blackouts


# --- chain search -----------------------------------------------------------

_PICKUP = ("pickup",)
_DEST = ("dest",)


@dataclass(frozen=True)
class _Label:
    time: float
    n_legs: int
    node: tuple
    aircraft_id: str
    fuel: float
    legs: tuple[ChainLeg, ...]

    def key(self):
        return (self.node, self.aircraft_id)


class _Search:
    def __init__(self, pickup: GeoPoint, dest: GeoPoint, fleet: list[Watercraft],
                 pool: list[Aircraft], t0: float, horizon: float, dt: float,
                 refuel_time: float, deck_clear: float):
        self.pickup = pickup
        self.dest = dest
        self.fleet = {w.id: w for w in fleet}
        self.pool = {a.id: a for a in pool}
        self.t0 = t0
        self.deadline = t0 + horizon
        self.dt = dt
        self.refuel_time = refuel_time
        self.deck_clear = deck_clear

    def node_pos(self, node: tuple, t: float) -> GeoPoint:
        if node == _PICKUP:
            return self.pickup
        if node == _DEST:
            return self.dest
        if node[0] == "w":
            return watercraft_position(self.fleet[node[1]], t)
        return self.pool[node[1]].home_base

    def fly(self, origin: GeoPoint, depart: float, speed: float, node: tuple):
        """Arrival time, end position, and distance for a leg to a node."""
        if node[0] == "w":
            w = self.fleet[node[1]]
            t = depart
            for _ in range(100):
                pos = watercraft_position(w, t)
                t_new = depart + gc_distance(origin, pos) / speed
                if abs(t_new - t) < 1e-4:
                    t = t_new
                    break
                t = t_new
            pos = watercraft_position(w, t)
            return t, pos, gc_distance(origin, pos)
        pos = self.node_pos(node, depart)
        d = gc_distance(origin, pos)
        return depart + d / speed, pos, d

    def refuel_at(self, node: tuple, aircraft_id: str) -> bool:
        if node[0] == "w":
            w = self.fleet[node[1]]
            return w.refuel and w.helipad
        return node == ("base", aircraft_id)

    def service(self, craft: Aircraft, node: tuple) -> tuple[float, str]:
        if node[0] == "w":
            mode = transfer_mode(self.fleet[node[1]])
            svc = craft.service_time_land if mode == "land" else craft.service_time_hoist
            return svc, mode
        return craft.service_time_land, "ground"


def chain_search(pickup: GeoPoint, dest: GeoPoint, fleet: list[Watercraft],
                 aircraft_pool: list[Aircraft], t0: float = 0.0,
                 horizon: float = 86_400.0, dt: float = DEFAULT_DT_S,
                 refuel_time: float = DEFAULT_REFUEL_S,
                 deck_clear: float = DEFAULT_DECK_CLEAR_S) -> TransferPlan:
    """Minimal-arrival-time relay plan from pickup to dest.

    Uniform-cost search on arrival time over (location, time-quantum) nodes;
    ties prefer fewer legs, then lexicographic aircraft ids. Aircraft refuel
    only at helipad-and-refuel watercraft or their own home base; a patient
    changes aircraft only at a watercraft. Raises NoFeasibleChain when the
    destination is unreachable within the horizon.
    """
    if not aircraft_pool:
        raise NoFeasibleChain("no aircraft available")
    if not dt > 0:
        raise ValueError("dt must be positive")
    ctx = _Search(pickup, dest, fleet, aircraft_pool, t0, horizon, dt,
                  refuel_time, deck_clear)

    counter = 0
    heap: list[tuple[float, int, str, int, _Label]] = []

    def push(label: _Label):
        nonlocal counter
        if label.time > ctx.deadline:
            return
        counter += 1
        heapq.heappush(heap, (label.time, label.n_legs, label.aircraft_id, counter, label))

    # Seed: each aircraft approaches the pickup, directly or via one refuel stop.
    for a in sorted(aircraft_pool, key=lambda x: x.id):
        for label in _approach_labels(ctx, a):
            push(label)

    # key -> list of non-dominated (time, fuel)
    best: dict[tuple, list[tuple[float, float]]] = {}

    def dominated(label: _Label) -> bool:
        q = math.floor(label.time / dt)
        entries = best.setdefault((label.key(), q), [])
        for t, f in entries:
            if t <= label.time and f >= label.fuel:
                return True
        entries[:] = [(t, f) for t, f in entries
                      if not (label.time <= t and label.fuel >= f)]
        entries.append((label.time, label.fuel))
        return False

    while heap:
        _, _, _, _, lab = heapq.heappop(heap)
        if lab.node == _DEST:
            total_d = sum(gc_distance(l.start, l.end) for l in lab.legs)
            return TransferPlan(legs=lab.legs, total_time=lab.time - t0,
                                total_distance=total_d)
        if dominated(lab):
            continue
        craft = ctx.pool[lab.aircraft_id]

        # Fly onward with the patient aboard. Watercraft come before the home
        # base so a co-located refuel ship wins the tie.
        targets = [_DEST]
        targets += [("w", wid) for wid in sorted(ctx.fleet)]
        targets.append(("base", lab.aircraft_id))
        for target in targets:
            if target == lab.node:
                continue
            arr, pos, d = ctx.fly(ctx.node_pos(lab.node, lab.time), lab.time,
                                  craft.cruise_speed, target)
            refuel_here = ctx.refuel_at(target, lab.aircraft_id)
            # Legs into non-refuel nodes (the destination included) keep the
            # symmetric return reserve; reaching fuel again afterwards is the
            # receiver's own problem.
            limit = lab.fuel if refuel_here else lab.fuel / 2.0
            if d > limit:
                continue
            if target == _DEST:
                push(_Label(time=arr, n_legs=lab.n_legs + 1, node=_DEST,
                            aircraft_id=lab.aircraft_id, fuel=lab.fuel - d,
                            legs=lab.legs + (_leg(ctx, lab, target, pos, arr, False,
                                                  "ground"),)))
                continue
            if refuel_here:
                depart_next = arr + ctx.refuel_time
                push(_Label(time=depart_next, n_legs=lab.n_legs + 1, node=target,
                            aircraft_id=lab.aircraft_id, fuel=craft.max_range,
                            legs=lab.legs + (_leg(ctx, lab, target, pos, arr, True,
                                                  "land"),)))
            if target[0] == "w":
                # Handoff to every other aircraft that can make the exchange.
                _push_handoffs(ctx, lab, target, pos, arr, d, push)

        # Wait in place one quantum (the watercraft may drift into range).
        push(_Label(time=lab.time + dt, n_legs=lab.n_legs, node=lab.node,
                    aircraft_id=lab.aircraft_id, fuel=lab.fuel, legs=lab.legs))

    raise NoFeasibleChain(
        f"destination unreachable within {horizon:.0f}s of t0={t0:.0f}s")


def _leg(ctx: _Search, lab: _Label, target: tuple, pos: GeoPoint, arrive: float,
         refuel: bool, mode: str) -> ChainLeg:
    return ChainLeg(
        carrier_aircraft_id=lab.aircraft_id,
        from_id=_node_name(lab.node), to_id=_node_name(target),
        start=ctx.node_pos(lab.node, lab.time), end=pos,
        depart=lab.time, arrive=arrive, refuel=refuel, exchange_mode=mode,
    )


def _node_name(node: tuple) -> str:
    if node == _PICKUP:
        return "pickup"
    if node == _DEST:
        return "dest"
    return node[1] if node[0] == "w" else f"base:{node[1]}"


def _approach_labels(ctx: _Search, a: Aircraft):
    """Initial labels: aircraft a boards the patient at the pickup point."""
    base_node = ("base", a.id)
    base = a.home_base
    svc_ground = a.service_time_land

    # Direct approach.
    d = gc_distance(base, ctx.pickup)
    if d <= a.fuel_range_remaining / 2.0:
        arr = ctx.t0 + d / a.cruise_speed
        leg = ChainLeg(carrier_aircraft_id=a.id, from_id=_node_name(base_node),
                       to_id="pickup", start=base, end=ctx.pickup, depart=ctx.t0,
                       arrive=arr, refuel=False, exchange_mode="ground")
        yield _Label(time=arr + svc_ground, n_legs=1, node=_PICKUP, aircraft_id=a.id,
                     fuel=a.fuel_range_remaining - d, legs=(leg,))

    # One refuel stop on the way in (positioning legs keep the return reserve).
    for wid in sorted(ctx.fleet):
        w = ctx.fleet[wid]
        if not (w.refuel and w.helipad):
            continue
        arr1, pos1, d1 = ctx.fly(base, ctx.t0, a.cruise_speed, ("w", wid))
        if d1 > a.fuel_range_remaining / 2.0:
            continue
        depart2 = arr1 + ctx.refuel_time
        pos_at = watercraft_position(w, depart2)
        d2 = gc_distance(pos_at, ctx.pickup)
        if d2 > a.max_range / 2.0:
            continue
        arr2 = depart2 + d2 / a.cruise_speed
        leg1 = ChainLeg(carrier_aircraft_id=a.id, from_id=_node_name(base_node),
                        to_id=wid, start=base, end=pos1, depart=ctx.t0, arrive=arr1,
                        refuel=True, exchange_mode="land")
        leg2 = ChainLeg(carrier_aircraft_id=a.id, from_id=wid, to_id="pickup",
                        start=pos_at, end=ctx.pickup, depart=depart2, arrive=arr2,
                        refuel=False, exchange_mode="ground")
        yield _Label(time=arr2 + svc_ground, n_legs=2, node=_PICKUP, aircraft_id=a.id,
                     fuel=a.max_range - d2, legs=(leg1, leg2))


def _push_handoffs(ctx: _Search, lab: _Label, target: tuple, pos: GeoPoint,
                   arr: float, d: float, push):
    """Patient changes aircraft at a watercraft node."""
    w = ctx.fleet[target[1]]
    giver = ctx.pool[lab.aircraft_id]
    svc_out, mode = ctx.service(giver, target)
    deck_time = arr + svc_out  # patient on deck
    for bid in sorted(ctx.pool):
        if bid == lab.aircraft_id:
            continue
        b = ctx.pool[bid]
        # Receiver flies in from its own base; earliest launch is t0.
        arr_b, pos_b, d_b = ctx.fly(b.home_base, ctx.t0, b.cruise_speed, target)
        # It can also delay launch to arrive exactly when the deck clears; the
        # flown distance is evaluated at the actual meet time.
        meet = max(deck_time + ctx.deck_clear, arr_b)
        pos_meet = ctx.node_pos(target, meet)
        d_b = gc_distance(b.home_base, pos_meet)
        # Positioning flights always keep the return reserve: a receiver is
        # never committed beyond its radius of action, since the rendezvous
        # may slip and it must be able to go home empty.
        if d_b > b.fuel_range_remaining / 2.0:
            continue
        svc_in, mode_in = ctx.service(b, target)
        aboard = meet + svc_in
        fuel_b = b.fuel_range_remaining - d_b
        handoff = ChainLeg(
            carrier_aircraft_id=lab.aircraft_id,
            from_id=_node_name(lab.node), to_id=_node_name(target),
            start=ctx.node_pos(lab.node, lab.time), end=pos,
            depart=lab.time, arrive=arr, refuel=False, exchange_mode=mode_in,
        )
        push(_Label(time=aboard, n_legs=lab.n_legs + 1, node=target,
                    aircraft_id=bid, fuel=fuel_b, legs=lab.legs + (handoff,)))
        if ctx.refuel_at(target, bid):
            push(_Label(time=aboard + ctx.refuel_time, n_legs=lab.n_legs + 1,
                        node=target, aircraft_id=bid, fuel=b.max_range,
                        legs=lab.legs + (handoff,)))


def place_dedicated_axp(candidates: list[GeoPoint],
                        demand: list[tuple[GeoPoint, GeoPoint]],
                        fleet: list[Watercraft], aircraft_pool: list[Aircraft],
                        horizon: float, dt: float) -> tuple[GeoPoint, float]:
    """Station a dedicated helipad-and-refuel ship to maximize chain coverage.

    Score per candidate is the fraction of (demand pair, start-time quantum)
    combinations for which a feasible chain exists. Ties go to the lowest
    candidate index; the result is independent of candidate order beyond that.
    """
    if not candidates:
        raise ValueError("need at least one candidate position")
    from .world import RoutePlan  # local import to keep module deps one-way

    quanta = [t for t in _frange(0.0, horizon, dt)]
    best_idx, best_score = 0, -1.0
    for idx, cand in enumerate(candidates):
        dedicated = Watercraft(id="dedicated-axp", helipad=True, refuel=True,
                               route=RoutePlan(waypoints=(cand,)))
        trial_fleet = list(fleet) + [dedicated]
        hits = 0
        total = 0
        for pickup, dest in demand:
            for t0 in quanta:
                total += 1
                try:
                    chain_search(pickup, dest, trial_fleet, aircraft_pool,
                                 t0=t0, horizon=horizon, dt=dt)
                    hits += 1
                except NoFeasibleChain:
                    pass
        score = hits / total if total else 0.0
        if score > best_score:
            best_idx, best_score = idx, score
    return candidates[best_idx], best_score


def _frange(start: float, stop: float, step: float):
    t = start
    while t < stop:
        yield t
        t += step


# --- GeoJSON export ---------------------------------------------------------

CIRCLE_SAMPLES = 128


def _circle_coords(center: GeoPoint, radius: float) -> list[list[float]]:
    ring = []
    for i in range(CIRCLE_SAMPLES):
        p = destination_point(center, 360.0 * i / CIRCLE_SAMPLES, radius)
        ring.append([p.lon, p.lat])
    ring.append(ring[0])
    return ring


def zone_geojson(z: ZoneRegion) -> dict:
    features = []
    for i, (center, radius) in enumerate(z.disks):
        features.append({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [_circle_coords(center, radius)]},
            "properties": {"disk": i, "radius_m": radius, "empty": z.is_empty()},
        })
    return {"type": "FeatureCollection", "features": features}


def windows_geojson(windows: list[TimeWindow], blackouts: list[TimeWindow]) -> dict:
    features = []
    for kind, items in (("window", windows), ("blackout", blackouts)):
        for w in items:
            features.append({
                "type": "Feature",
                "geometry": None,
                "properties": {"kind": kind, "start": w.start, "end": w.end,
                               "watercraft_ids": list(w.watercraft_ids)},
            })
    return {"type": "FeatureCollection", "features": features}


def plan_geojson(plan: TransferPlan) -> dict:
    features = []
    for i, leg in enumerate(plan.legs):
        features.append({
            "type": "Feature",
            "geometry": {"type": "LineString",
                         "coordinates": [[leg.start.lon, leg.start.lat],
                                         [leg.end.lon, leg.end.lat]]},
            "properties": {"leg": i, "carrier": leg.carrier_aircraft_id,
                           "from": leg.from_id, "to": leg.to_id,
                           "depart_s": leg.depart, "arrive_s": leg.arrive,
                           "refuel": leg.refuel, "exchange_mode": leg.exchange_mode},
        })
    return {"type": "FeatureCollection", "features": features}
