"""Static gradient wind field, eye-pressure deficit, inland decay, and the
per-step evolution of hurricane parameters.

The radial profile rises from calm at the eye to the peak sustained wind at
the eyewall radius, decays exponentially out to the storm boundary, and is
zero beyond it.  The pressure deficit is unitless here: it only ever enters
the model through ratios between consecutive time steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

# Eye-pressure deficit at landfall: sqrt((A + B*lat - ln r_vmax) / C).
_PRESSURE_CONST = 2.636
_PRESSURE_LAT_COEFF = 0.0394899
_PRESSURE_DENOM = 5.086e-4


@dataclass(frozen=True)
class WindFieldParams:
    """One hurricane snapshot: peak wind, the two radii, and shape constants.

    v_max is in knots, r_vmax and r_s in nmi.  k (> 1) shapes the inner
    ramp-up; beta (> 1) is the factor by which the wind has dropped at the
    outer boundary r_s.
    """

    v_max: float
    r_vmax: float
    r_s: float
    k: float
    beta: float

    def __post_init__(self) -> None:
        if not self.v_max > 0.0:
            raise ValueError(f"v_max must be > 0, got {self.v_max}")
        if not 0.0 < self.r_vmax < self.r_s:
            raise ValueError(f"need 0 < r_vmax < r_s, got ({self.r_vmax}, {self.r_s})")
        if not self.k > 1.0:
            raise ValueError(f"k must be > 1, got {self.k}")
        if not self.beta > 1.0:
            raise ValueError(f"beta must be > 1, got {self.beta}")

    @property
    def psi(self) -> float:
        """Inner-branch rate constant; makes the ramp hit v_max at r_vmax."""
        return math.log(self.k / (self.k - 1.0)) / self.r_vmax

    @property
    def lam(self) -> float:
        """Outer-branch rate constant; wind falls to v_max/beta at r_s."""
        return math.log(self.beta) / (self.r_s - self.r_vmax)


@dataclass(frozen=True)
class HurricaneScenario:
    """A sampled hurricane and its evolution over the configured time steps."""

    id: int
    landfall_params: WindFieldParams
    delta_p0: float
    alpha: float
    params_by_step: Mapping[float, WindFieldParams]

    def __post_init__(self) -> None:
        if not self.delta_p0 > 0.0:
            raise ValueError(f"delta_p0 must be > 0, got {self.delta_p0}")

    @property
    def time_steps(self) -> tuple[float, ...]:
        return tuple(sorted(self.params_by_step))


def gradient_wind(params: WindFieldParams, x: float) -> float:
    """Sustained wind speed in knots at distance ``x`` nmi from the eye."""
    if x < 0.0:
        raise ValueError(f"distance from the eye must be >= 0, got {x}")
    if x < params.r_vmax:
        return params.k * params.v_max * (1.0 - math.exp(-params.psi * x))
    if x <= params.r_s:
        return params.v_max * math.exp(-params.lam * (x - params.r_vmax))
    return 0.0


def landfall_pressure(lat_deg: float, r_vmax: float) -> float:
    """Eye pressure deficit at landfall from latitude and eyewall radius.

    The radicand goes negative for very large eyewall radii at low latitude;
    that parameter combination has no defined landfall pressure and raises
    ValueError so the caller can resample.  A radicand of exactly zero is
    accepted and yields 0.
    """
    if r_vmax <= 0.0:
        raise ValueError(f"r_vmax must be > 0, got {r_vmax}")
    radicand = (_PRESSURE_CONST + _PRESSURE_LAT_COEFF * lat_deg - math.log(r_vmax)) / _PRESSURE_DENOM
    if radicand < 0.0:
        raise ValueError(
            f"landfall pressure undefined for these parameters "
            f"(lat={lat_deg}, r_vmax={r_vmax})"
        )
    return math.sqrt(radicand)


def decay_pressure(delta_p0: float, alpha: float, t: float) -> float:
    """Eye pressure deficit after ``t`` hours of inland decay at rate ``alpha``."""
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    if alpha < 0.0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    return delta_p0 * math.exp(-alpha * t)


def evolve_params(
    prev: WindFieldParams, pressure_ratio: float, growth_rate: float = 0.0
) -> WindFieldParams:
    """Advance a wind field one step.

    The peak wind scales with the pressure-deficit ratio between the steps;
    both radii grow by ``growth_rate`` (a fraction per step, usually 0).
    Scaling preserves r_vmax < r_s, so the result is always valid.
    """
    if not 0.0 < pressure_ratio <= 1.0:
        raise ValueError(f"pressure_ratio must be in (0, 1], got {pressure_ratio}")
    if growth_rate <= -1.0:
        raise ValueError(f"growth_rate must be > -1, got {growth_rate}")
    g = 1.0 + growth_rate
    return WindFieldParams(
        v_max=prev.v_max * pressure_ratio,
        r_vmax=prev.r_vmax * g,
        r_s=prev.r_s * g,
        k=prev.k,
        beta=prev.beta,
    )


def evolve_schedule(
    landfall: WindFieldParams,
    delta_p0: float,
    alpha: float,
    time_steps: Sequence[float],
    growth_rate: float = 0.0,
) -> dict[float, WindFieldParams]:
    """Wind-field parameters at each time step, chained from landfall.

    Each step multiplies v_max by that step's pressure-deficit ratio, so with
    zero growth the peak wind decays as exp(-alpha * t) of its landfall value.
    """
    if not delta_p0 > 0.0:
        raise ValueError(f"delta_p0 must be > 0 to form step ratios, got {delta_p0}")
    steps = [float(t) for t in time_steps]
    if not steps or steps[0] != 0.0:
        raise ValueError("time steps must start at 0")
    schedule: dict[float, WindFieldParams] = {0.0: landfall}
    prev_t = 0.0
    prev = landfall
    for t in steps[1:]:
        if t <= prev_t:
            raise ValueError(f"time steps must be strictly increasing, got {t} after {prev_t}")
        ratio = decay_pressure(delta_p0, alpha, t) / decay_pressure(delta_p0, alpha, prev_t)
        prev = evolve_params(prev, ratio, growth_rate)
        schedule[t] = prev
        prev_t = t
    return schedule
