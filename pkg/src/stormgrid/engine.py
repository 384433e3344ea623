"""Chained Monte-Carlo simulation across time steps with monotone outage
states, per-cell averaging, and the equal-weight spatiotemporal aggregate.

Reproducibility contract: every trial runs on its own random stream derived
from (master_seed, track id, hurricane id, trial index), outage draws happen
in branch-id-ascending order within each step, and per-trial results are
reduced in trial order.  The loss table is therefore bit-identical for any
worker count.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Mapping, Sequence

import numpy as np

from .grid import GridModel, _Topology
from .impact import FragilityCurve, exposure_for_step
from .scenario import SimulationConfig, Track
from .windfield import HurricaneScenario

# Early stop: running mean of final-step loss moved < 0.1% over the last
# EARLY_STOP_WINDOW trials, never before EARLY_STOP_MIN_TRIALS.
EARLY_STOP_WINDOW = 100
EARLY_STOP_MIN_TRIALS = 200
EARLY_STOP_REL_CHANGE = 1e-3


@dataclass(frozen=True)
class TrialResult:
    """Losses of one Monte-Carlo trajectory, per time step."""

    trial_index: int
    loss_by_step: Mapping[float, float]


@dataclass(frozen=True)
class CellResult:
    """Averaged losses for one (hurricane, track) cell."""

    hurricane_id: int
    track_id: int
    loss_avg_by_step: Mapping[float, float]
    n_trials: int
    convergence_trace: tuple[float, ...]


@dataclass(frozen=True)
class LossTable:
    """All cell results plus the equal-weight aggregate per time step."""

    cells: tuple[CellResult, ...]
    aggregate_by_step: Mapping[float, float]


def trial_rng(
    master_seed: int, track_id: int, hurricane_id: int, trial_index: int
) -> np.random.Generator:
    """Independent deterministic stream for one (track, hurricane, trial).

    Track and hurricane ids are 1-based, so these streams can never collide
    with the scenario-generation stream seeded by master_seed alone.
    """
    return np.random.default_rng((master_seed, track_id, hurricane_id, trial_index))


def _step_probabilities(
    scenario: HurricaneScenario,
    track: Track,
    grid: GridModel,
    curve: FragilityCurve,
    topo: _Topology,
) -> list[tuple[float, np.ndarray]]:
    """Per-step outage probabilities, aligned with the topology branch order."""
    rows = []
    for t in scenario.time_steps:
        exposures = exposure_for_step(grid, scenario.params_by_step[t], track.eye_at(t), curve)
        by_id = {e.branch_id: e.p_out for e in exposures}
        rows.append((t, np.array([by_id[bid] for bid in topo.branch_ids])))
    return rows


def _trial_losses(
    topo: _Topology, step_probs: Sequence[tuple[float, np.ndarray]], rng: np.random.Generator
) -> list[float]:
    """One trajectory: per step, each still-in-service line gets one uniform
    draw (branch id ascending) and fails when p_out exceeds it; failed lines
    stay failed.  Returns the disconnected load after every step."""
    delta = np.zeros(topo.n_branches, dtype=np.uint8)
    losses: list[float] = []
    current: float | None = None
    for _t, p_out in step_probs:
        alive = np.flatnonzero(delta == 0)
        changed = False
        if alive.size:
            draws = rng.random(alive.size)
            failed = alive[p_out[alive] > draws]
            if failed.size:
                delta[failed] = 1
                changed = True
        if current is None or changed:
            current = topo.loss(delta)
        losses.append(current)
    return losses


def run_trial(
    scenario: HurricaneScenario,
    track: Track,
    grid: GridModel,
    curve: FragilityCurve,
    rng: np.random.Generator,
    trial_index: int = 0,
) -> TrialResult:
    """Run one Monte-Carlo trajectory over all time steps."""
    topo = _Topology(grid)
    step_probs = _step_probabilities(scenario, track, grid, curve, topo)
    losses = _trial_losses(topo, step_probs, rng)
    return TrialResult(trial_index, {t: loss for (t, _), loss in zip(step_probs, losses)})


def run_mcs(
    scenario: HurricaneScenario,
    track: Track,
    grid: GridModel,
    curve: FragilityCurve,
    config: SimulationConfig,
    *,
    early_stop: bool = False,
) -> CellResult:
    """Average trial losses for one (hurricane, track) cell.

    Runs ``config.trials_per_cell`` independent trials, each on its own
    stream from :func:`trial_rng`, accumulating sums in trial order.  The
    convergence trace is the running mean of the final-step loss.  With
    ``early_stop`` the loop halts once that mean moved less than 0.1%
    relative over the last 100 trials (never before trial 200); by default
    every configured trial runs.
    """
    topo = _Topology(grid)
    step_probs = _step_probabilities(scenario, track, grid, curve, topo)
    sums = np.zeros(len(step_probs))
    trace: list[float] = []
    n = 0
    for trial_index in range(config.trials_per_cell):
        rng = trial_rng(config.master_seed, track.id, scenario.id, trial_index)
        sums += _trial_losses(topo, step_probs, rng)
        n += 1
        trace.append(float(sums[-1]) / n)
        if early_stop and n >= EARLY_STOP_MIN_TRIALS:
            then = trace[n - 1 - EARLY_STOP_WINDOW]
            if abs(trace[-1] - then) <= EARLY_STOP_REL_CHANGE * abs(then):
                break
    averages = {t: float(sums[i]) / n for i, (t, _) in enumerate(step_probs)}
    return CellResult(scenario.id, track.id, averages, n, tuple(trace))


def aggregate_loss(
    cells: Sequence[CellResult], config: SimulationConfig
) -> dict[float, float]:
    """Equal-weight mean of cell averages over every (track, hurricane) pair."""
    by_key: dict[tuple[int, int], CellResult] = {}
    for cell in cells:
        key = (cell.track_id, cell.hurricane_id)
        if key in by_key:
            raise ValueError(f"duplicate cell result for track {key[0]}, hurricane {key[1]}")
        by_key[key] = cell
    expected = [
        (zeta, h)
        for zeta in range(1, config.n_tracks + 1)
        for h in range(1, config.n_hurricanes + 1)
    ]
    for zeta, h in expected:
        if (zeta, h) not in by_key:
            raise ValueError(f"missing cell result for track {zeta}, hurricane {h}")
    if len(by_key) != len(expected):
        extras = sorted(set(by_key) - set(expected))
        raise ValueError(f"unexpected cell results: {extras}")
    n_cells = len(expected)
    aggregate: dict[float, float] = {}
    for t in config.time_steps:
        total = 0.0
        for key in expected:
            try:
                total += by_key[key].loss_avg_by_step[t]
            except KeyError:
                raise ValueError(
                    f"cell (track {key[0]}, hurricane {key[1]}) has no loss for t={t}"
                ) from None
        aggregate[t] = total / n_cells
    return aggregate


def resolve_workers(requested: int | None, n_jobs: int) -> int:
    """Effective worker count: explicit request or hardware parallelism,
    capped by STORMGRID_THREADS and by the number of jobs."""
    if requested is not None and requested < 1:
        raise ValueError(f"worker count must be >= 1, got {requested}")
    count = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get("STORMGRID_THREADS")
    if cap:
        count = min(count, max(1, int(cap)))
    return max(1, min(count, n_jobs))


_WORKER_STATE: dict = {}


def _init_worker(grid, curve, config, early_stop) -> None:
    _WORKER_STATE.update(grid=grid, curve=curve, config=config, early_stop=early_stop)


def _run_cell(job) -> CellResult:
    track, scenario = job
    return run_mcs(
        scenario,
        track,
        _WORKER_STATE["grid"],
        _WORKER_STATE["curve"],
        _WORKER_STATE["config"],
        early_stop=_WORKER_STATE["early_stop"],
    )


def run_simulation(
    grid: GridModel,
    scenarios: Sequence[HurricaneScenario],
    tracks: Sequence[Track],
    curve: FragilityCurve,
    config: SimulationConfig,
    *,
    workers: int | None = None,
    early_stop: bool = False,
) -> LossTable:
    """Run every (track, hurricane) cell and aggregate.

    Cells are independent work units; results are collected in (track,
    hurricane) order, so the table does not depend on the worker count.
    """
    jobs = [(track, scenario) for track in tracks for scenario in scenarios]
    n_workers = resolve_workers(workers, len(jobs))
    if n_workers <= 1:
        cells = [
            run_mcs(scenario, track, grid, curve, config, early_stop=early_stop)
            for track, scenario in jobs
        ]
    else:
        with Pool(
            n_workers, initializer=_init_worker, initargs=(grid, curve, config, early_stop)
        ) as pool:
            cells = pool.map(_run_cell, jobs)
    return LossTable(tuple(cells), aggregate_loss(cells, config))
