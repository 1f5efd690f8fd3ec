"""Monte-Carlo sweeps, experiment presets and the command line."""

from .config import SimConfig, load_config, load_configs, parse_grid
from .sweep import (
    PointResult,
    SweepResult,
    ebn0_at_bler,
    ebn0_to_sigma2,
    emit_csv,
    parse_csv,
    run_sweep,
    wilson_ci,
)

__all__ = [
    "PointResult",
    "SimConfig",
    "SweepResult",
    "ebn0_at_bler",
    "ebn0_to_sigma2",
    "emit_csv",
    "load_config",
    "load_configs",
    "parse_csv",
    "parse_grid",
    "run_sweep",
    "wilson_ci",
]
