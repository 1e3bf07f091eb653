"""Run configuration: dataclasses plus a flat TOML loader.

Every key mirrors a parameter name used throughout the package. Unknown keys
are rejected so a typo never silently falls back to a default.

Example::

    hpbw_deg = 15
    n_p_azi = 11
    n_p_ele = 11
    n_u_azi = 2
    n_u_ele = 2
    controller_paths = ["LoS", "NLoS"]
    estimator = "omp_mmv"
    trials = 300
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channel import ScenarioConfig
from .codec import CodecConfig
from .estimation import OmpConfig
from .patterns import PatternBankConfig

__all__ = ["Estimator", "RunConfig", "ConfigError", "CONFIG_KEYS", "load_config", "config_from_mapping", "config_to_mapping"]


class ConfigError(ValueError):
    pass


class Estimator(str, Enum):
    OMP_MMV = "omp_mmv"
    MUSIC = "music"
    ORACLE = "oracle"
    OMNI = "omni"


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    bank: PatternBankConfig = field(default_factory=lambda: PatternBankConfig(11, 11))
    codec: CodecConfig = field(default_factory=CodecConfig)
    use_compressed: bool = False
    clamp_floor: bool = True  # bound C_L below by the element floor
    omp: OmpConfig = field(default_factory=OmpConfig)
    estimator: Estimator = Estimator.OMP_MMV
    trials: int = 500
    base_seed: int = 0
    n_s: int = 1000
    load_eps: float = 1e-8
    dl_power_dbm: float | None = None  # None: same as the controller power
    out_dir: str = "out"

    def __post_init__(self):
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.n_s < 1:
            raise ConfigError("n_s must be >= 1")
        if not self.load_eps > 0:
            raise ConfigError("load_eps must be positive")


# flat key -> (section, attribute); section None means RunConfig itself
_SCENARIO = [f.name for f in fields(ScenarioConfig) if f.name not in ("uav_shape", "controller_shape")]
CONFIG_KEYS = {
    **{k: ("scenario", k) for k in _SCENARIO},
    "n_u_azi": ("uav", "n_azi"),
    "n_u_ele": ("uav", "n_ele"),
    "n_c_azi": ("ctrl", "n_azi"),
    "n_c_ele": ("ctrl", "n_ele"),
    "n_p_azi": ("bank", "n_p_azi"),
    "n_p_ele": ("bank", "n_p_ele"),
    "hpbw_deg": ("element", "hpbw_deg"),
    "sla_db": ("element", "sla_db"),
    "a_max_db": ("element", "a_max_db"),
    "gain_law": ("element", "gain_law"),
    "n_a_azi": ("grid", "n_azi"),
    "n_a_ele": ("grid", "n_ele"),
    "threshold_db": ("codec", "threshold_db"),
    "db_factor": ("codec", "db_factor"),
    "eta_th": ("omp", "eta_th"),
    "max_paths": ("omp", "max_paths"),
    **{k: (None, k) for k in ("use_compressed", "clamp_floor", "estimator", "trials", "base_seed", "n_s",
                              "load_eps", "dl_power_dbm", "out_dir")},
}


def config_from_mapping(data: dict, base: RunConfig | None = None) -> RunConfig:
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    base = base or RunConfig()
    parts = {
        "scenario": {}, "uav": {}, "ctrl": {}, "bank": {}, "element": {},
        "grid": {}, "codec": {}, "omp": {}, None: {},
    }
    for key, value in data.items():
        section, attr = CONFIG_KEYS[key]
        if isinstance(value, list):
            value = tuple(value)
        parts[section][attr] = value
    try:
        sc = base.scenario
        scenario = replace(
            sc,
            uav_shape=replace(sc.uav_shape, **parts["uav"]),
            controller_shape=replace(sc.controller_shape, **parts["ctrl"]),
            **parts["scenario"],
        )
        bk = base.bank
        bank = replace(
            bk,
            element=replace(bk.element, **parts["element"]),
            grid=replace(bk.grid, **parts["grid"]),
            **parts["bank"],
        )
        return replace(
            base,
            scenario=scenario,
            bank=bank,
            codec=replace(base.codec, **parts["codec"]),
            omp=replace(base.omp, **parts["omp"]),
            **parts[None],
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def config_to_mapping(cfg: RunConfig) -> dict:
    """Inverse of config_from_mapping (used for sweep provenance)."""
    sources = {
        "scenario": cfg.scenario, "uav": cfg.scenario.uav_shape, "ctrl": cfg.scenario.controller_shape,
        "bank": cfg.bank, "element": cfg.bank.element, "grid": cfg.bank.grid,
        "codec": cfg.codec, "omp": cfg.omp, None: cfg,
    }
    out = {}
    for key, (section, attr) in CONFIG_KEYS.items():
        val = getattr(sources[section], attr)
        if isinstance(val, Enum):
            val = val.value
        elif isinstance(val, tuple):
            val = [v.value if isinstance(v, Enum) else v for v in val]
        out[key] = val
    return out


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"{path}: configuration must be flat (found tables {nested})")
    return config_from_mapping(data)
