"""Coordinate handling and eye-to-line distance geometry in nautical miles.

Latitudes and longitudes are decimal degrees (western hemisphere negative).
Point-to-point distances are great-circle; segment geometry is evaluated in
a flat equirectangular frame centred on the hurricane eye, which is accurate
to well under 1% at the <= ~200 nmi ranges where a storm has any influence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_NMI = 3440.065
NMI_PER_DEGREE = 60.0

# Half-width of the validity window of the flat projection, degrees.
PROJECTION_WINDOW_DEG = 10.0


@dataclass(frozen=True)
class GeoPoint:
    """A latitude/longitude pair in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class LocalPoint:
    """Planar offset from a projection origin: nmi east (x) and north (y)."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"local coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class DistanceBounds:
    """Minimum and maximum distance of a line segment from a reference point.

    ``d_min == d_max == inf`` is the sentinel meaning the segment lies beyond
    any possible hurricane influence (outside the projection window).
    """

    d_min: float
    d_max: float

    def __post_init__(self) -> None:
        if math.isnan(self.d_min) or math.isnan(self.d_max):
            raise ValueError("distance bounds must not be NaN")
        if self.d_min < 0.0 or self.d_min > self.d_max:
            raise ValueError(f"need 0 <= d_min <= d_max, got ({self.d_min}, {self.d_max})")

    @property
    def beyond_influence(self) -> bool:
        return math.isinf(self.d_min)


NO_INFLUENCE = DistanceBounds(math.inf, math.inf)


def haversine_nmi(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points in nautical miles."""
    phi_a = math.radians(a.lat)
    phi_b = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi_a) * math.cos(phi_b) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_NMI * math.asin(math.sqrt(h))


def in_projection_window(origin: GeoPoint, p: GeoPoint) -> bool:
    """Whether ``p`` is close enough to ``origin`` for the flat projection."""
    return (
        abs(p.lat - origin.lat) < PROJECTION_WINDOW_DEG
        and abs(p.lon - origin.lon) < PROJECTION_WINDOW_DEG
    )


def project_local(origin: GeoPoint, p: GeoPoint) -> LocalPoint:
    """Project ``p`` into the flat frame centred at ``origin``.

    x = dlon * 60 * cos(origin.lat) and y = dlat * 60, both in nmi.  Raises
    ValueError outside the 10-degree validity window, where the flat-earth
    error is no longer negligible.
    """
    if not in_projection_window(origin, p):
        raise ValueError(
            f"point ({p.lat}, {p.lon}) outside the {PROJECTION_WINDOW_DEG} degree "
            f"projection window around ({origin.lat}, {origin.lon})"
        )
    x = (p.lon - origin.lon) * NMI_PER_DEGREE * math.cos(math.radians(origin.lat))
    y = (p.lat - origin.lat) * NMI_PER_DEGREE
    return LocalPoint(x, y)


def unproject_local(origin: GeoPoint, local: LocalPoint) -> GeoPoint:
    """Inverse of :func:`project_local`: map a planar offset back to lat/lon."""
    lat = origin.lat + local.y / NMI_PER_DEGREE
    lon = origin.lon + local.x / (NMI_PER_DEGREE * math.cos(math.radians(origin.lat)))
    return GeoPoint(lat, lon)


def segment_distance_bounds(
    eye: GeoPoint, endpoint_a: GeoPoint, endpoint_b: GeoPoint
) -> DistanceBounds:
    """Minimum and maximum distance from ``eye`` to the segment a--b.

    Both endpoints are projected into the eye-centred frame.  d_min is the
    perpendicular distance when the foot of the perpendicular falls within
    the segment, else the nearer endpoint distance; d_max is the farther
    endpoint distance.  Segments with an endpoint outside the projection
    window are reported as NO_INFLUENCE rather than an error: they cannot be
    touched by the wind field anyway.
    """
    if not (in_projection_window(eye, endpoint_a) and in_projection_window(eye, endpoint_b)):
        return NO_INFLUENCE
    a = project_local(eye, endpoint_a)
    b = project_local(eye, endpoint_b)
    d_a = math.hypot(a.x, a.y)
    d_b = math.hypot(b.x, b.y)
    d_max = max(d_a, d_b)
    ux = b.x - a.x
    uy = b.y - a.y
    seg_sq = ux * ux + uy * uy
    if seg_sq == 0.0:
        # degenerate segment: treat as a point
        return DistanceBounds(d_a, d_a)
    t = -(a.x * ux + a.y * uy) / seg_sq
    if 0.0 <= t <= 1.0:
        d_min = math.hypot(a.x + t * ux, a.y + t * uy)
    else:
        d_min = min(d_a, d_b)
    # rounding can push the foot distance a few ulp past an endpoint distance
    return DistanceBounds(min(d_min, d_max), d_max)
