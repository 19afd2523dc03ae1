"""Spherical-Earth geodesy primitives.

All distances are meters on a sphere of radius EARTH_RADIUS_M, all angles
are degrees. Latitude/longitude inputs and outputs are decimal degrees with
longitude normalized into (-180, 180].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6_371_000.0

METERS_PER_STATUTE_MILE = 1609.344
METERS_PER_NAUTICAL_MILE = 1852.0
MPS_PER_KNOT = METERS_PER_NAUTICAL_MILE / 3600.0


class UndefinedBearing(ValueError):
    """Raised when the forward azimuth is not defined (coincident points or a pole)."""


def statute_miles_to_m(mi: float) -> float:
    return mi * METERS_PER_STATUTE_MILE


def m_to_statute_miles(m: float) -> float:
    return m / METERS_PER_STATUTE_MILE


def nautical_miles_to_m(nmi: float) -> float:
    return nmi * METERS_PER_NAUTICAL_MILE


def knots_to_mps(kn: float) -> float:
    return kn * MPS_PER_KNOT


def normalize_lon(lon: float) -> float:
    """Wrap a longitude into the half-open interval (-180, 180]."""
    lon = math.fmod(lon, 360.0)
    if lon > 180.0:
        lon -= 360.0
    elif lon <= -180.0:
        lon += 360.0
    return lon


@dataclass(frozen=True)
class GeoPoint:
    """A position on the sphere. lat in [-90, 90], lon normalized to (-180, 180]."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0) or not math.isfinite(self.lat):
            raise ValueError(f"latitude out of range: {self.lat}")
        if not math.isfinite(self.lon):
            raise ValueError(f"longitude not finite: {self.lon}")
        object.__setattr__(self, "lon", normalize_lon(self.lon))

    def is_pole(self) -> bool:
        return abs(self.lat) == 90.0


def gc_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters (haversine).

    Exactly symmetric in its arguments and finite for all valid inputs,
    including antipodal pairs.
    """
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    # Clamp against rounding before asin; h may exceed 1 by an ulp near antipodes.
    h = min(1.0, h)
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(h))


def initial_bearing(a: GeoPoint, b: GeoPoint) -> float:
    """Forward azimuth of the great circle from a to b, degrees in [0, 360).

    Raises UndefinedBearing when a == b or a is a pole. For antipodal pairs
    the formula's value is returned; it is numerically unstable there.
    """
    if a == b:
        raise UndefinedBearing(f"bearing undefined for coincident points {a}")
    if a.is_pole():
        raise UndefinedBearing(f"bearing undefined at a pole: {a}")
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dlam = math.radians(b.lon - a.lon)
    x = math.sin(dlam) * math.cos(phi2)
    y = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlam)
    deg = math.degrees(math.atan2(x, y)) % 360.0
    # x % 360 can round to exactly 360.0 for tiny negative x.
    return 0.0 if deg == 360.0 else deg


def destination_point(a: GeoPoint, bearing: float, d: float) -> GeoPoint:
    """Point reached by traveling d meters from a along the given initial bearing.

    destination_point(a, bearing, 0) returns a exactly.
    """
    if d < 0:
        raise ValueError(f"distance must be non-negative, got {d}")
    if d == 0.0:
        return a
    phi1 = math.radians(a.lat)
    lam1 = math.radians(a.lon)
    theta = math.radians(bearing)
    delta = d / EARTH_RADIUS_M
    sin_phi2 = math.sin(phi1) * math.cos(delta) + math.cos(phi1) * math.sin(delta) * math.cos(theta)
    sin_phi2 = max(-1.0, min(1.0, sin_phi2))
    phi2 = math.asin(sin_phi2)
    lam2 = lam1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(phi1),
        math.cos(delta) - math.sin(phi1) * sin_phi2,
    )
    return GeoPoint(math.degrees(phi2), math.degrees(lam2))
