"""stormgrid: probabilistic hurricane wind fields over a geo-referenced
transmission grid, with Monte-Carlo outage sampling and disconnected-load
loss quantification."""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"

from .engine import (  # noqa: E402,F401
    CellResult,
    LossTable,
    TrialResult,
    aggregate_loss,
    run_mcs,
    run_simulation,
    run_trial,
)
from .geo import DistanceBounds, GeoPoint, LocalPoint  # noqa: F401
from .grid import Branch, Bus, GridModel, OutageState, disconnected_load  # noqa: F401
from .impact import FragilityCurve, LineExposure  # noqa: F401
from .scenario import (  # noqa: F401
    HistoryTable,
    Kde,
    SimulationConfig,
    Track,
    build_tracks,
    generate_scenarios,
    load_history,
)
from .windfield import HurricaneScenario, WindFieldParams, gradient_wind  # noqa: F401


def data_path(name: str) -> Path:
    """Path to a bundled data file (sample history, demo grids)."""
    return Path(str(resources.files(__name__).joinpath("data", name)))
