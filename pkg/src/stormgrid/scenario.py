"""Historical-parameter ingestion, KDE fitting/sampling, and hurricane/track
generation.

The three wind-field parameters (eyewall radius, storm radius, peak wind) are
each smoothed into a one-dimensional Gaussian KDE and sampled independently;
draws are truncated below their physical support by rejection, and triples
are rejected until the eyewall radius is smaller than the storm radius.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geo import GeoPoint, LocalPoint, haversine_nmi, unproject_local
from .windfield import (
    HurricaneScenario,
    WindFieldParams,
    evolve_schedule,
    landfall_pressure,
)

HISTORY_HEADER = ("r_vmax_nmi", "r_s_nmi", "v_max_kt")
TRACK_HEADER = ("track_id", "t_hours", "lat_deg", "lon_deg")

# Cap on consecutive rejected draws before declaring the inputs incompatible.
MAX_REJECTIONS = 10_000

# Relative spread allowed between consecutive eye displacements of a track.
SPEED_TOLERANCE = 0.01


@dataclass
class HistoryTable:
    """Rows of (r_vmax nmi, r_s nmi, v_max kt) from past storms."""

    rows: list[tuple[float, float, float]]
    source_note: str = ""

    @property
    def r_vmax(self) -> list[float]:
        return [r[0] for r in self.rows]

    @property
    def r_s(self) -> list[float]:
        return [r[1] for r in self.rows]

    @property
    def v_max(self) -> list[float]:
        return [r[2] for r in self.rows]


@dataclass(frozen=True)
class Kde:
    """Gaussian-kernel density over 1-D samples with a single bandwidth.

    Sampling is truncated below ``support_min`` by rejection; the density
    itself is the plain (untruncated) mixture and integrates to 1.
    """

    samples: tuple[float, ...]
    bandwidth: float
    support_min: float

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValueError("KDE needs at least one sample")
        if not self.bandwidth > 0.0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")

    def density(self, x):
        """Mixture density at ``x`` (scalar or array)."""
        xs = np.asarray(x, dtype=float)
        s = np.asarray(self.samples)
        z = (xs[..., None] - s) / self.bandwidth
        d = np.exp(-0.5 * z * z).sum(axis=-1) / (
            len(s) * self.bandwidth * math.sqrt(2.0 * math.pi)
        )
        return float(d) if xs.ndim == 0 else d

    def draw(self, rng: np.random.Generator) -> float:
        """One draw: a uniformly chosen sample plus bandwidth-scaled Gaussian
        noise, rejection-resampled while at or below ``support_min``."""
        for _ in range(MAX_REJECTIONS):
            value = self.samples[rng.integers(len(self.samples))] + rng.normal(0.0, self.bandwidth)
            if value > self.support_min:
                return value
        raise ValueError(
            f"KDE sampling rejected {MAX_REJECTIONS} consecutive draws at "
            f"support_min={self.support_min}"
        )


def load_history(text, source_note: str = "") -> HistoryTable:
    """Parse a history CSV with header ``r_vmax_nmi,r_s_nmi,v_max_kt``.

    Any non-numeric or non-positive field is an error naming the offending
    data row (1-based).  At least two valid rows are required for KDE fitting.
    """
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("history CSV is empty") from None
    if tuple(h.strip() for h in header) != HISTORY_HEADER:
        raise ValueError(
            f"history CSV header must be {','.join(HISTORY_HEADER)}, "
            f"got {','.join(header)}"
        )
    rows: list[tuple[float, float, float]] = []
    for i, raw in enumerate(reader, start=1):
        if not raw or all(not cell.strip() for cell in raw):
            continue
        if len(raw) != 3:
            raise ValueError(f"history row {i}: expected 3 fields, got {len(raw)}")
        values = []
        for name, cell in zip(HISTORY_HEADER, raw):
            try:
                v = float(cell)
            except ValueError:
                raise ValueError(f"history row {i}: non-numeric {name} {cell!r}") from None
            if not v > 0.0:
                raise ValueError(f"history row {i}: {name} must be > 0, got {v}")
            values.append(v)
        rows.append((values[0], values[1], values[2]))
    if len(rows) < 2:
        raise ValueError(f"history CSV needs at least 2 rows, got {len(rows)}")
    return HistoryTable(rows, source_note)


def fit_kde(samples: Iterable[float], support_min: float = 0.0) -> Kde:
    """Fit a Gaussian KDE with the Silverman rule-of-thumb bandwidth.

    bandwidth = 0.9 * min(std, IQR/1.34) * n**(-1/5), floored at
    1e-6 * mean(|samples|) so a degenerate all-equal sample still yields a
    usable (near-point-mass) sampler.
    """
    data = np.asarray(list(samples), dtype=float)
    if data.size < 2:
        raise ValueError(f"KDE fitting needs at least 2 samples, got {data.size}")
    if not np.all(data > support_min):
        raise ValueError(f"all samples must exceed support_min={support_min}")
    sigma = float(np.std(data, ddof=1))
    q75, q25 = np.percentile(data, [75.0, 25.0])
    spread = min(sigma, float(q75 - q25) / 1.34)
    bandwidth = 0.9 * spread * float(data.size) ** -0.2
    floor = 1e-6 * float(np.mean(np.abs(data)))
    bandwidth = max(bandwidth, floor)
    if bandwidth <= 0.0:
        bandwidth = 1e-6
    return Kde(tuple(float(v) for v in data), bandwidth, float(support_min))


def fit_parameter_kdes(history: HistoryTable) -> tuple[Kde, Kde, Kde]:
    """KDEs for (r_vmax, r_s, v_max), each truncated below zero."""
    return (
        fit_kde(history.r_vmax, 0.0),
        fit_kde(history.r_s, 0.0),
        fit_kde(history.v_max, 0.0),
    )


def sample_params(
    kdes: tuple[Kde, Kde, Kde], rng: np.random.Generator, k: float, beta: float
) -> WindFieldParams:
    """Draw one (r_vmax, r_s, v_max) triple, resampling until r_vmax < r_s."""
    kde_r_vmax, kde_r_s, kde_v_max = kdes
    for _ in range(MAX_REJECTIONS):
        r_vmax = kde_r_vmax.draw(rng)
        r_s = kde_r_s.draw(rng)
        v_max = kde_v_max.draw(rng)
        if r_vmax < r_s:
            return WindFieldParams(v_max=v_max, r_vmax=r_vmax, r_s=r_s, k=k, beta=beta)
    raise ValueError(
        f"no triple with r_vmax < r_s in {MAX_REJECTIONS} attempts; "
        "the fitted KDEs look incompatible"
    )


@dataclass(frozen=True)
class Track:
    """Time-stamped eye positions for one forecast track."""

    id: int
    eye_positions: tuple[tuple[float, GeoPoint], ...]

    def __post_init__(self) -> None:
        if self.id < 1:
            raise ValueError(f"track id must be >= 1, got {self.id}")
        if not self.eye_positions:
            raise ValueError("track needs at least one eye position")
        times = [t for t, _ in self.eye_positions]
        if times[0] != 0.0:
            raise ValueError(f"track {self.id}: first entry must be at t=0, got t={times[0]}")
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise ValueError(f"track {self.id}: times must be strictly increasing")
        _check_constant_speed(self.id, self.eye_positions)

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(t for t, _ in self.eye_positions)

    def eye_at(self, t: float) -> GeoPoint:
        for step, point in self.eye_positions:
            if step == t:
                return point
        raise KeyError(f"track {self.id} has no eye position for t={t}")


def _check_constant_speed(track_id: int, positions) -> None:
    """Consecutive eye displacements must imply one translational speed."""
    speeds = []
    for (t0, p0), (t1, p1) in zip(positions, positions[1:]):
        speeds.append(haversine_nmi(p0, p1) / (t1 - t0))
    if not speeds:
        return
    mean = sum(speeds) / len(speeds)
    if mean == 0.0:
        if any(s != 0.0 for s in speeds):
            raise ValueError(f"track {track_id}: inconsistent translational speed")
        return
    worst = max(abs(s - mean) for s in speeds) / mean
    if worst > SPEED_TOLERANCE:
        raise ValueError(
            f"track {track_id}: translational speed varies by {worst:.2%} "
            f"(max allowed {SPEED_TOLERANCE:.0%})"
        )


@dataclass(frozen=True)
class SimulationConfig:
    """Run-level knobs: landfall, time grid, ensemble sizes, wind-field and
    fragility constants, and Monte-Carlo sizing.

    Defaults: landfall on the upper Texas coast, 0..12 h in 2 h steps, 30
    hurricanes on 3 tracks, 800 trials per cell.  k=1.14, beta=10 and
    alpha=0.2/h give a field that is almost fully decayed by the 12 h step.
    """

    landfall: GeoPoint = GeoPoint(28.9, -95.2)
    time_steps: tuple[float, ...] = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0)
    n_hurricanes: int = 30
    n_tracks: int = 3
    decay_alpha: float = 0.2
    shape_k: float = 1.14
    boundary_beta: float = 10.0
    size_growth_rate: float = 0.0
    trials_per_cell: int = 800
    master_seed: int = 0
    v_cri: float = 48.59
    v_col: float = 106.91
    translational_speed: float = 10.0

    def __post_init__(self) -> None:
        steps = tuple(float(t) for t in self.time_steps)
        object.__setattr__(self, "time_steps", steps)
        if not steps or steps[0] != 0.0:
            raise ValueError("time_steps must start at 0")
        if any(t1 <= t0 for t0, t1 in zip(steps, steps[1:])):
            raise ValueError("time_steps must be strictly increasing")
        if self.n_hurricanes < 1:
            raise ValueError(f"n_hurricanes must be >= 1, got {self.n_hurricanes}")
        if self.n_tracks < 1:
            raise ValueError(f"n_tracks must be >= 1, got {self.n_tracks}")
        if self.decay_alpha < 0.0:
            raise ValueError(f"decay_alpha must be >= 0, got {self.decay_alpha}")
        if not self.shape_k > 1.0:
            raise ValueError(f"shape_k must be > 1, got {self.shape_k}")
        if not self.boundary_beta > 1.0:
            raise ValueError(f"boundary_beta must be > 1, got {self.boundary_beta}")
        if self.size_growth_rate <= -1.0:
            raise ValueError(f"size_growth_rate must be > -1, got {self.size_growth_rate}")
        if self.trials_per_cell < 1:
            raise ValueError(f"trials_per_cell must be >= 1, got {self.trials_per_cell}")
        if self.master_seed < 0:
            raise ValueError(f"master_seed must be >= 0, got {self.master_seed}")
        if not 0.0 < self.v_cri < self.v_col:
            raise ValueError(f"need 0 < v_cri < v_col, got ({self.v_cri}, {self.v_col})")
        if not self.translational_speed > 0.0:
            raise ValueError(
                f"translational_speed must be > 0, got {self.translational_speed}"
            )


def default_bearings(n_tracks: int) -> list[float]:
    """Inland bearings fanned 20 degrees apart around 320 true (NW over Texas
    from the default landfall); three tracks get (300, 320, 340)."""
    center = 320.0
    return [center + 20.0 * (i - (n_tracks - 1) / 2.0) for i in range(n_tracks)]


def build_tracks(config: SimulationConfig, bearings: Sequence[float]) -> list[Track]:
    """One straight constant-speed track per bearing, anchored at landfall.

    The eye at time t is the landfall point advanced by speed * t nmi along
    the bearing, mapped back to lat/lon through the local projection inverse.
    """
    if len(bearings) != config.n_tracks:
        raise ValueError(
            f"need one bearing per track: {config.n_tracks} tracks, "
            f"{len(bearings)} bearings"
        )
    tracks = []
    for i, bearing in enumerate(bearings, start=1):
        theta = math.radians(bearing)
        positions = []
        for t in config.time_steps:
            dist = config.translational_speed * t
            local = LocalPoint(dist * math.sin(theta), dist * math.cos(theta))
            positions.append((float(t), unproject_local(config.landfall, local)))
        tracks.append(Track(i, tuple(positions)))
    return tracks


def load_tracks(text) -> list[Track]:
    """Parse a track CSV with header ``track_id,t_hours,lat_deg,lon_deg``.

    Track ids must be the consecutive integers 1..N; each track's rows may
    appear in any order and are sorted by time before validation.
    """
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("track CSV is empty") from None
    if tuple(h.strip() for h in header) != TRACK_HEADER:
        raise ValueError(
            f"track CSV header must be {','.join(TRACK_HEADER)}, got {','.join(header)}"
        )
    by_id: dict[int, list[tuple[float, GeoPoint]]] = {}
    for i, raw in enumerate(reader, start=1):
        if not raw or all(not cell.strip() for cell in raw):
            continue
        if len(raw) != 4:
            raise ValueError(f"track row {i}: expected 4 fields, got {len(raw)}")
        try:
            track_id = int(raw[0])
            t = float(raw[1])
            point = GeoPoint(float(raw[2]), float(raw[3]))
        except ValueError as exc:
            raise ValueError(f"track row {i}: {exc}") from None
        by_id.setdefault(track_id, []).append((t, point))
    if not by_id:
        raise ValueError("track CSV has no data rows")
    ids = sorted(by_id)
    if ids != list(range(1, len(ids) + 1)):
        raise ValueError(f"track ids must be 1..N consecutive, got {ids}")
    return [Track(i, tuple(sorted(by_id[i], key=lambda e: e[0]))) for i in ids]


def generate_scenarios(
    config: SimulationConfig, history: HistoryTable, rng: np.random.Generator
) -> list[HurricaneScenario]:
    """Sample ``config.n_hurricanes`` independent hurricane scenarios.

    Each scenario carries its sampled landfall wind field, the landfall
    pressure deficit, and the evolved parameters at every configured step.
    Triples whose eyewall radius admits no landfall pressure are resampled.
    """
    kdes = fit_parameter_kdes(history)
    scenarios = []
    for h in range(1, config.n_hurricanes + 1):
        for _ in range(MAX_REJECTIONS):
            params = sample_params(kdes, rng, config.shape_k, config.boundary_beta)
            try:
                delta_p0 = landfall_pressure(config.landfall.lat, params.r_vmax)
            except ValueError:
                continue
            if delta_p0 > 0.0:
                break
        else:
            raise ValueError(
                "no sampled hurricane admitted a valid landfall pressure after "
                f"{MAX_REJECTIONS} attempts"
            )
        schedule = evolve_schedule(
            params, delta_p0, config.decay_alpha, config.time_steps, config.size_growth_rate
        )
        scenarios.append(HurricaneScenario(h, params, delta_p0, config.decay_alpha, schedule))
    return scenarios
