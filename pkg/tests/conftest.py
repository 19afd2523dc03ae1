"""Shared scenario builders for the test suite."""

import random

from medchain.geo import GeoPoint, destination_point, knots_to_mps
from medchain.scenario import Scenario, SimConfig
from medchain.world import (
    Aircraft,
    EvacRequest,
    Precedence,
    RoutePlan,
    TreatmentFacility,
    Watercraft,
)


def make_aircraft(aid: str, base: GeoPoint, speed: float = 100.0,
                  max_range: float = 1_000_000.0, fuel: float | None = None,
                  hoist_s: float = 300.0, land_s: float = 180.0) -> Aircraft:
    return Aircraft(id=aid, home_base=base, cruise_speed=speed, max_range=max_range,
                    fuel_range_remaining=fuel, service_time_hoist=hoist_s,
                    service_time_land=land_s)


def stationary_watercraft(wid: str, pos: GeoPoint, helipad: bool = False,
                          refuel: bool = False) -> Watercraft:
    return Watercraft(id=wid, helipad=helipad, refuel=refuel,
                      route=RoutePlan(waypoints=(pos,)))


def east_track(wid: str, start: GeoPoint, distance_m: float, knots: float = 5.0,
               helipad: bool = False, refuel: bool = False) -> Watercraft:
    end = destination_point(start, 90.0, distance_m)
    return Watercraft(id=wid, helipad=helipad, refuel=refuel,
                      route=RoutePlan(waypoints=(start, end),
                                      leg_speeds=(knots_to_mps(knots),)))


def triangle_scenario(side_m: float = 10_000.0, precedence=Precedence.URGENT,
                      config: SimConfig | None = None) -> Scenario:
    """One aircraft, one request side_m away, facility side_m beyond that."""
    base = GeoPoint(21.0, -158.0)
    pickup = destination_point(base, 90.0, side_m)
    fac_loc = destination_point(pickup, 0.0, side_m)
    return Scenario(
        name="triangle",
        config=config or SimConfig(),
        aircraft=(make_aircraft("a1", base),),
        facilities=(TreatmentFacility(id="f1", location=fac_loc, role=2),),
        requests=(EvacRequest(id="r1", time=0.0, location=pickup, precedence=precedence,
                              patient_count=1, destination="f1"),),
    )


def desk_toy_scenario(stochastic: bool = False) -> Scenario:
    """Two aircraft, two requests, designed so the myopic baseline misassigns.

    Everything sits on one due-east line from base1 (km offsets): priority
    pickup at 6, its facility at 12, urgent pickup at 40, urgent facility at
    50, base2 at 130. Aircraft 2 has just enough fuel for the urgent mission
    and cannot reach the priority pickup at all. The urgent request is faster
    served by aircraft 1, but that starves the two-litter priority request
    arriving at t=150; the best first move is to send aircraft 2.
    """
    base1 = GeoPoint(10.0, 10.0)

    def east(km: float) -> GeoPoint:
        return destination_point(base1, 90.0, km * 1000.0)

    return Scenario(
        name="desk-toy",
        config=SimConfig(stochastic=stochastic),
        aircraft=(
            make_aircraft("a1", base1),
            make_aircraft("a2", east(130.0), max_range=200_000.0, fuel=185_000.0),
        ),
        facilities=(
            TreatmentFacility(id="fp", location=east(12.0), role=2),
            TreatmentFacility(id="fu", location=east(50.0), role=3),
        ),
        requests=(
            EvacRequest(id="urgent", time=0.0, location=east(40.0),
                        precedence=Precedence.URGENT, patient_count=1, destination="fu"),
            EvacRequest(id="prio", time=150.0, location=east(6.0),
                        precedence=Precedence.PRIORITY, patient_count=2, destination="fp"),
        ),
    )


def random_benchmark_scenario(rng: random.Random) -> Scenario:
    """One draw from the randomized benchmark family.

    Ranges are generous relative to the distances involved, so every request
    is deliverable and both policies are compared on identical demand.
    """
    center = GeoPoint(rng.uniform(15, 25), rng.uniform(-160, -150))

    def jitter(ref: GeoPoint, max_km: float) -> GeoPoint:
        return destination_point(ref, rng.uniform(0, 360),
                                 rng.uniform(5, max_km) * 1000.0)

    n_bases = rng.choice((1, 2))
    bases = [jitter(center, 120) for _ in range(n_bases)]
    aircraft = tuple(
        Aircraft(id=f"a{i+1}", home_base=bases[i % n_bases],
                 cruise_speed=rng.uniform(60, 90),
                 max_range=rng.uniform(500_000, 800_000))
        for i in range(rng.choice((2, 3))))
    facilities = tuple(
        TreatmentFacility(id=f"f{i+1}", location=jitter(center, 100),
                          role=rng.choice((2, 3)))
        for i in range(rng.choice((1, 2))))
    watercraft = []
    for i in range(rng.choice((0, 1, 2))):
        start = jitter(center, 110)
        end = destination_point(start, rng.uniform(0, 360),
                                rng.uniform(10_000, 60_000))
        watercraft.append(Watercraft(
            id=f"w{i+1}", helipad=rng.random() < 0.4, refuel=rng.random() < 0.3,
            route=RoutePlan(waypoints=(start, end),
                            leg_speeds=(rng.uniform(2, 8),))))
    requests = tuple(
        EvacRequest(id=f"r{i+1}", time=rng.uniform(0, 1200) if i else 0.0,
                    location=jitter(center, 110),
                    precedence=rng.choice((Precedence.URGENT, Precedence.PRIORITY,
                                           Precedence.ROUTINE)),
                    patient_count=1, destination=rng.choice(facilities).id)
        for i in range(rng.choice((1, 2, 3))))
    return Scenario(name="bench", config=SimConfig(), aircraft=aircraft,
                    watercraft=tuple(watercraft), facilities=facilities,
                    requests=requests)


def relay_scenario(config: SimConfig | None = None) -> Scenario:
    """Two aircraft, one watercraft between them, one request near aircraft 1."""
    base1 = GeoPoint(21.0, -158.0)
    pickup = destination_point(base1, 90.0, 8_000.0)
    wpos = destination_point(pickup, 90.0, 30_000.0)
    base2 = destination_point(wpos, 90.0, 30_000.0)
    fac_loc = destination_point(base2, 90.0, 8_000.0)
    return Scenario(
        name="relay",
        config=config or SimConfig(),
        aircraft=(make_aircraft("a1", base1), make_aircraft("a2", base2)),
        watercraft=(east_track("w1", wpos, 20_000.0),),
        facilities=(TreatmentFacility(id="f1", location=fac_loc, role=3),),
        requests=(EvacRequest(id="r1", time=0.0, location=pickup,
                              precedence=Precedence.URGENT, patient_count=1,
                              destination="f1"),),
    )
