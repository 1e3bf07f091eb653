"""Link-level simulator for jamming-resilient UAV links with pattern-reconfigurable antennas."""

__version__ = "0.1.0"

from .channel import ChannelSet, PathKind, PathSpec, ScenarioConfig
from .codec import CodecConfig, compress, nmse_and_ratio, reconstruct
from .config import Estimator, RunConfig, load_config
from .geometry import AngleDeg, AngleGrid, UpaShape
from .harness import run_montecarlo, run_trial
from .patterns import ElementPatternParams, PatternBank, PatternBankConfig, build_bank

__all__ = [
    "__version__",
    "AngleDeg", "AngleGrid", "UpaShape",
    "ElementPatternParams", "PatternBankConfig", "PatternBank", "build_bank",
    "CodecConfig", "compress", "reconstruct", "nmse_and_ratio",
    "ScenarioConfig", "PathKind", "PathSpec", "ChannelSet",
    "Estimator", "RunConfig", "load_config",
    "run_trial", "run_montecarlo",
]
