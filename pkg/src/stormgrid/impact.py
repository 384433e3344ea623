"""Per-line wind exposure and the fragility map from wind speed to outage
probability."""

from __future__ import annotations

from dataclasses import dataclass

from .geo import DistanceBounds, GeoPoint, segment_distance_bounds
from .grid import GridModel
from .windfield import WindFieldParams, gradient_wind


@dataclass(frozen=True)
class FragilityCurve:
    """Linear fragility: no outages below v_cri, certain collapse at v_col.

    One curve is applied to every line regardless of voltage class.
    """

    v_cri: float = 48.59
    v_col: float = 106.91

    def __post_init__(self) -> None:
        if not 0.0 < self.v_cri < self.v_col:
            raise ValueError(f"need 0 < v_cri < v_col, got ({self.v_cri}, {self.v_col})")


@dataclass(frozen=True)
class LineExposure:
    """One branch's experienced wind and resulting outage probability."""

    branch_id: int
    gamma: float
    d_bounds: DistanceBounds
    p_out: float

    def __post_init__(self) -> None:
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not 0.0 <= self.p_out <= 1.0:
            raise ValueError(f"p_out must be in [0, 1], got {self.p_out}")


def line_wind_speed(params: WindFieldParams, d_bounds: DistanceBounds) -> float:
    """Maximum wind speed (knots) experienced along a line.

    A line whose distance interval brackets r_vmax sees the full v_max.
    Otherwise the interval lies on one monotone side of the profile, so the
    stronger of the winds at its nearest and farthest points bounds the
    whole interval.  The beyond-influence sentinel maps to calm.
    """
    if d_bounds.beyond_influence:
        return 0.0
    if d_bounds.d_min <= params.r_vmax <= d_bounds.d_max:
        return params.v_max
    return max(
        gradient_wind(params, d_bounds.d_min),
        gradient_wind(params, d_bounds.d_max),
    )


def outage_probability(gamma: float, curve: FragilityCurve) -> float:
    """Outage probability for a line experiencing wind speed ``gamma``."""
    if gamma < 0.0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    if gamma < curve.v_cri:
        return 0.0
    if gamma >= curve.v_col:
        return 1.0
    return (gamma - curve.v_cri) / (curve.v_col - curve.v_cri)


def exposure_for_step(
    grid: GridModel, params: WindFieldParams, eye: GeoPoint, curve: FragilityCurve
) -> list[LineExposure]:
    """Exposure of every branch to one hurricane snapshot.

    Wind-exempt branches (zero geographic length, i.e. internal substation
    ties) keep gamma = 0 and p_out = 0; everything else goes through
    distance bounds -> line wind speed -> fragility.
    """
    exempt = grid.wind_exempt_branch_ids()
    exposures = []
    for br in grid.branches:
        a = grid.bus_by_id[br.from_bus].location
        b = grid.bus_by_id[br.to_bus].location
        bounds = segment_distance_bounds(eye, a, b)
        if br.id in exempt:
            exposures.append(LineExposure(br.id, 0.0, bounds, 0.0))
        else:
            gamma = line_wind_speed(params, bounds)
            exposures.append(LineExposure(br.id, gamma, bounds, outage_probability(gamma, curve)))
    return exposures
