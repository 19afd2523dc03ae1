"""Scenario file format: parsing, validation, unit normalization, bundled data.

A scenario is a single JSON document. Units must be declared explicitly and
all quantities are normalized to meters and seconds on load. Bundled scenarios
ship as package data and are referenced by id; MEDCHAIN_SCENARIO_DIR overrides
the lookup directory.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict
from importlib import resources
from pathlib import Path

from .geo import GeoPoint, statute_miles_to_m, nautical_miles_to_m, knots_to_mps
from .world import (
    Aircraft,
    EvacRequest,
    MedLevel,
    Precedence,
    RoutePlan,
    TreatmentFacility,
    Watercraft,
)

SCHEMA_VERSION = 1
BUNDLED_IDS = ("mpw2023", "fig7_manila_guam", "oahu_kauai")

DISTANCE_UNITS = ("mi_statute", "nmi", "m")
SPEED_UNITS = ("kn", "mps")


class ParseError(ValueError):
    """Malformed scenario document."""


class ValidationError(ValueError):
    """Structurally valid JSON that violates a scenario invariant."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class SimConfig:
    """Service-time, noise, and action-space configuration for a scenario."""

    service_time_hoist_s: float = 300.0
    service_time_land_s: float = 180.0
    deck_clear_s: float = 60.0
    refuel_time_s: float = 600.0
    cabin_capacity: int = 2
    stochastic: bool = False
    noise_spread: float = 0.2
    abandon_horizon_s: float = 86_400.0
    launch_grid_s: float = 10.0
    # Exercise rules of engagement: restrict dispatch kinds the planner may
    # use (hold is always allowed). None means unrestricted.
    allowed_dispatch_kinds: tuple[str, ...] | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    config: SimConfig = field(default_factory=SimConfig)
    aircraft: tuple[Aircraft, ...] = ()
    watercraft: tuple[Watercraft, ...] = ()
    facilities: tuple[TreatmentFacility, ...] = ()
    requests: tuple[EvacRequest, ...] = ()

    def facility(self, fid: str) -> TreatmentFacility:
        for f in self.facilities:
            if f.id == fid:
                return f
        raise KeyError(fid)

    def watercraft_by_id(self, wid: str) -> Watercraft:
        for w in self.watercraft:
            if w.id == wid:
                return w
        raise KeyError(wid)

    def aircraft_by_id(self, aid: str) -> Aircraft:
        for a in self.aircraft:
            if a.id == aid:
                return a
        raise KeyError(aid)


def _req(obj: dict, key: str, path: str):
    if key not in obj:
        raise ValidationError(f"{path}.{key}", "required field missing")
    return obj[key]


def _point(obj, path: str) -> GeoPoint:
    if not isinstance(obj, dict) or "lat" not in obj or "lon" not in obj:
        raise ValidationError(path, "expected an object with lat and lon")
    try:
        return GeoPoint(float(obj["lat"]), float(obj["lon"]))
    except (TypeError, ValueError) as e:
        raise ValidationError(path, str(e)) from e


def loads(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ParseError("scenario document must be a JSON object")
    return from_dict(doc)


def from_dict(doc: dict) -> Scenario:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError("schema_version", f"expected {SCHEMA_VERSION}, got {version}")

    units = _req(doc, "units", "")
    dist_unit = _req(units, "distance", "units")
    speed_unit = _req(units, "speed", "units")
    if dist_unit not in DISTANCE_UNITS:
        raise ValidationError("units.distance", f"must be one of {DISTANCE_UNITS}")
    if speed_unit not in SPEED_UNITS:
        raise ValidationError("units.speed", f"must be one of {SPEED_UNITS}")

    def to_m(x: float) -> float:
        if dist_unit == "mi_statute":
            return statute_miles_to_m(x)
        if dist_unit == "nmi":
            return nautical_miles_to_m(x)
        return float(x)

    def to_mps(x: float) -> float:
        return knots_to_mps(x) if speed_unit == "kn" else float(x)

    cfg_doc = doc.get("config", {})
    known = {f for f in SimConfig.__dataclass_fields__}
    unknown = set(cfg_doc) - known
    if unknown:
        raise ValidationError(f"config.{sorted(unknown)[0]}", "unknown config key")
    if "allowed_dispatch_kinds" in cfg_doc and cfg_doc["allowed_dispatch_kinds"] is not None:
        cfg_doc = dict(cfg_doc)
        cfg_doc["allowed_dispatch_kinds"] = tuple(cfg_doc["allowed_dispatch_kinds"])
    config = SimConfig(**cfg_doc)
    if config.cabin_capacity < 1:
        raise ValidationError("config.cabin_capacity", "must be >= 1")

    aircraft = []
    for i, a in enumerate(doc.get("aircraft", [])):
        path = f"aircraft[{i}]"
        try:
            aircraft.append(Aircraft(
                id=str(_req(a, "id", path)),
                home_base=_point(_req(a, "home_base", path), f"{path}.home_base"),
                cruise_speed=to_mps(float(_req(a, "cruise_speed", path))),
                max_range=to_m(float(_req(a, "max_range", path))),
                fuel_range_remaining=(
                    to_m(float(a["fuel_range_remaining"]))
                    if a.get("fuel_range_remaining") is not None else None),
                service_time_hoist=float(a.get("service_time_hoist", config.service_time_hoist_s)),
                service_time_land=float(a.get("service_time_land", config.service_time_land_s)),
            ))
        except ValueError as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(path, str(e)) from e

    watercraft = []
    for i, w in enumerate(doc.get("watercraft", [])):
        path = f"watercraft[{i}]"
        helipad = _req(w, "helipad", path)
        if not isinstance(helipad, bool):
            raise ValidationError(f"{path}.helipad", "must be a boolean")
        route_doc = _req(w, "route", path)
        waypoints = tuple(
            _point(p, f"{path}.route.waypoints[{j}]")
            for j, p in enumerate(_req(route_doc, "waypoints", f"{path}.route"))
        )
        try:
            route = RoutePlan(
                waypoints=waypoints,
                leg_speeds=tuple(to_mps(float(v)) for v in route_doc.get("leg_speeds", [])),
                departure_time=float(route_doc.get("departure_time", 0.0)),
                loop=bool(route_doc.get("loop", False)),
            )
            med = MedLevel(w.get("med_level", "none"))
            watercraft.append(Watercraft(
                id=str(_req(w, "id", path)),
                route=route,
                helipad=helipad,
                refuel=bool(w.get("refuel", False)),
                med_level=med,
                override_track=tuple(
                    (float(t), _point(p, f"{path}.override_track[{k}]"))
                    for k, (t, p) in enumerate(w.get("override_track", []))
                ),
            ))
        except ValueError as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(path, str(e)) from e

    facilities = []
    for i, f in enumerate(doc.get("facilities", [])):
        path = f"facilities[{i}]"
        try:
            facilities.append(TreatmentFacility(
                id=str(_req(f, "id", path)),
                location=_point(_req(f, "location", path), f"{path}.location"),
                role=int(f.get("role", 2)),
            ))
        except ValueError as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(path, str(e)) from e

    requests = []
    for i, r in enumerate(doc.get("requests", [])):
        path = f"requests[{i}]"
        try:
            requests.append(EvacRequest(
                id=str(_req(r, "id", path)),
                time=float(_req(r, "time", path)),
                location=_point(_req(r, "location", path), f"{path}.location"),
                precedence=Precedence(_req(r, "precedence", path)),
                patient_count=int(r.get("patient_count", 1)),
                destination=str(_req(r, "destination", path)),
            ))
        except ValueError as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(path, str(e)) from e

    scenario = Scenario(
        name=str(doc.get("name", "unnamed")),
        config=config,
        aircraft=tuple(aircraft),
        watercraft=tuple(watercraft),
        facilities=tuple(facilities),
        requests=tuple(requests),
    )
    _validate_cross_refs(scenario)
    return scenario


def _validate_cross_refs(s: Scenario) -> None:
    for coll, label in ((s.aircraft, "aircraft"), (s.watercraft, "watercraft"),
                        (s.facilities, "facilities"), (s.requests, "requests")):
        ids = [e.id for e in coll]
        dupes = {i for i in ids if ids.count(i) > 1}
        if dupes:
            raise ValidationError(label, f"duplicate id(s): {sorted(dupes)}")
    facility_ids = {f.id for f in s.facilities}
    for i, r in enumerate(s.requests):
        if r.destination not in facility_ids:
            raise ValidationError(f"requests[{i}].destination",
                                  f"unknown facility '{r.destination}'")
        if r.patient_count > s.config.cabin_capacity:
            raise ValidationError(f"requests[{i}].patient_count",
                                  f"exceeds cabin capacity {s.config.cabin_capacity}")
    if s.config.allowed_dispatch_kinds is not None:
        for k in s.config.allowed_dispatch_kinds:
            if k not in ("dispatch_direct", "dispatch_via_axp"):
                raise ValidationError("config.allowed_dispatch_kinds", f"unknown kind '{k}'")


def to_dict(s: Scenario) -> dict:
    """Serialize a scenario back to its JSON document form (meters/seconds)."""
    def pt(p: GeoPoint) -> dict:
        return {"lat": p.lat, "lon": p.lon}

    cfg = asdict(s.config)
    if cfg["allowed_dispatch_kinds"] is not None:
        cfg["allowed_dispatch_kinds"] = list(cfg["allowed_dispatch_kinds"])
    return {
        "schema_version": SCHEMA_VERSION,
        "name": s.name,
        "units": {"distance": "m", "speed": "mps"},
        "config": cfg,
        "aircraft": [
            {
                "id": a.id, "home_base": pt(a.home_base), "cruise_speed": a.cruise_speed,
                "max_range": a.max_range, "fuel_range_remaining": a.fuel_range_remaining,
                "service_time_hoist": a.service_time_hoist,
                "service_time_land": a.service_time_land,
            }
            for a in s.aircraft
        ],
        "watercraft": [
            {
                "id": w.id, "helipad": w.helipad, "refuel": w.refuel,
                "med_level": w.med_level.value,
                "route": {
                    "waypoints": [pt(p) for p in w.route.waypoints],
                    "leg_speeds": list(w.route.leg_speeds),
                    "departure_time": w.route.departure_time,
                    "loop": w.route.loop,
                },
                "override_track": [[t, pt(p)] for t, p in w.override_track],
            }
            for w in s.watercraft
        ],
        "facilities": [
            {"id": f.id, "location": pt(f.location), "role": f.role} for f in s.facilities
        ],
        "requests": [
            {
                "id": r.id, "time": r.time, "location": pt(r.location),
                "precedence": r.precedence.value, "patient_count": r.patient_count,
                "destination": r.destination,
            }
            for r in s.requests
        ],
    }


def dumps(s: Scenario) -> str:
    return json.dumps(to_dict(s), indent=2)


def _bundled_dir() -> Path:
    override = os.environ.get("MEDCHAIN_SCENARIO_DIR")
    if override:
        return Path(override)
    return Path(str(resources.files("medchain").joinpath("data")))


def load(path_or_id: str | Path) -> Scenario:
    """Load a scenario from a file path or a bundled scenario id."""
    p = Path(path_or_id)
    if not p.exists():
        candidate = _bundled_dir() / f"{path_or_id}.json"
        if candidate.exists():
            p = candidate
        else:
            raise FileNotFoundError(f"no scenario file or bundled id '{path_or_id}'")
    return loads(p.read_text())
