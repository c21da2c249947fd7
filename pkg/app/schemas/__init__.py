from .run import (
    COMMANDS,
    RUN_CONFIGS,
    RunConfigBase,
    TimeGrid,
    VevConfig,
    GramConfig,
    AklConfig,
    EvolveConfig,
    ScalingConfig,
    SpinSpectrumConfig,
    SpinAklConfig,
    CountConfig,
    HagedornConfig,
    CasimirConfig,
    load_run_config,
)
from .manifest import RunManifest
from .report import (
    SeriesTerm,
    VevReport,
    GramReport,
    AklReport,
    TrajectoryReport,
    PowerLawReport,
    ScalingSummary,
    SpinAklRowReport,
    EigenResidualReport,
    SpinAklSummary,
    HagedornReport,
    CasimirReport,
)

__all__ = [
    "COMMANDS",
    "RUN_CONFIGS",
    "RunConfigBase",
    "TimeGrid",
    "VevConfig",
    "GramConfig",
    "AklConfig",
    "EvolveConfig",
    "ScalingConfig",
    "SpinSpectrumConfig",
    "SpinAklConfig",
    "CountConfig",
    "HagedornConfig",
    "CasimirConfig",
    "load_run_config",
    "RunManifest",
    "SeriesTerm",
    "VevReport",
    "GramReport",
    "AklReport",
    "TrajectoryReport",
    "PowerLawReport",
    "ScalingSummary",
    "SpinAklRowReport",
    "EigenResidualReport",
    "SpinAklSummary",
    "HagedornReport",
    "CasimirReport",
]
