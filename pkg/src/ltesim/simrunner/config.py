"""Strict experiment configuration.

A config file is TOML: top-level run keys plus one table per section.
Unknown keys abort with their dotted name.  ``--override key=value``
strings use the same dotted names, with the value parsed as a TOML value
(bare words fall back to strings).
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigError
from ..propagation import PropagationParams

EXPERIMENTS = ("mu-gain", "das", "femto", "cfo", "pilot-power")


@dataclass(frozen=True)
class LayoutConfig:
    rings: int = 2
    isd: float = 500.0
    rru_fraction: float = 2 / 3
    rru_offset_deg: float = 36.0


@dataclass(frozen=True)
class RadioConfig:
    bandwidth_per_rb: float = 180e3
    velocity_kmh: float = 3.0
    rate_efficiency: float = 0.75
    rate_cap: float = 4.5


@dataclass(frozen=True)
class MuGainConfig:
    users: tuple = (2, 5, 10, 20, 40, 64)
    schedulers: tuple = ("best-cqi", "pf", "rr")
    antennas: tuple = ("1x1", "2x2", "4x4")
    n_rb: int = 10
    pf_window: float = 100.0
    codebook_bits: dict = field(default_factory=lambda: {"2": 2, "4": 4})
    # fraction of resource elements left after reference signals, per n_tx
    pilot_overhead: dict = field(default_factory=lambda: {"1": 8 / 168, "2": 16 / 168, "4": 24 / 168})


@dataclass(frozen=True)
class DasConfig:
    users_per_cell: tuple = (2, 4, 8, 12)
    modes: tuple = ("svd-perfect", "clsm-quantized", "zf-perfect", "zf-quantized", "pu2rc-quantized")
    layouts: tuple = ("centralized", "das")
    n_rb: int = 4
    n_tx: int = 8
    n_rx: int = 4
    feedback_bits: int = 8
    pu2rc_matrix_bits: int = 2
    clsm_rank_bits: int = 2
    su_scheduler: str = "rr"  # single-user modes: "rr" (equal shares) or "best-cqi"
    interference_floor_dbm: float | None = None  # None: calibrate against a full grid
    calibration_rings: int = 3


@dataclass(frozen=True)
class FemtoConfig:
    n_clusters: int = 10
    users_per_cluster: int = 5
    cluster_radius: float = 20.0
    femto_counts: tuple | None = None  # None: 0..n_clusters
    n_rb: int = 10
    scheduler: str = "pf"
    indoor_users: bool = True
    pf_window: float = 100.0


@dataclass(frozen=True)
class CfoConfig:
    snr_db: tuple = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0)
    preset: str = "time-domain"
    c_mse: float | None = None
    n_obs: int | None = None
    n_re: int = 12
    epsilon_override: float | None = None


@dataclass(frozen=True)
class PilotPowerConfig:
    velocities: tuple = (0.0, 50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 350.0, 400.0, 450.0, 500.0)
    antennas: tuple = ("1x1", "2x2", "4x4")
    snr_db: float = 20.0
    c_noise: float = 1.0
    c_floor: float = 1e-5
    pilot_density_per_tx: float = 1.0
    sinr_slack: float = 1e-6
    n_samples: int = 200


SECTIONS = {
    "layout": LayoutConfig,
    "propagation": PropagationParams,
    "radio": RadioConfig,
    "mu_gain": MuGainConfig,
    "das": DasConfig,
    "femto": FemtoConfig,
    "cfo": CfoConfig,
    "pilot_power": PilotPowerConfig,
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "mu-gain"
    seed: int = 1
    n_drops: int = 50
    n_tti: int = 200
    layout: LayoutConfig = LayoutConfig()
    propagation: PropagationParams = PropagationParams()
    radio: RadioConfig = RadioConfig()
    mu_gain: MuGainConfig = MuGainConfig()
    das: DasConfig = DasConfig()
    femto: FemtoConfig = FemtoConfig()
    cfo: CfoConfig = CfoConfig()
    pilot_power: PilotPowerConfig = PilotPowerConfig()

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment: unknown experiment {self.experiment!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed: must be an unsigned 64-bit integer")
        for name in ("n_drops", "n_tti"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be positive")
        _check_sections(self)


def _check_sections(cfg):
    mg = cfg.mu_gain
    for a in mg.antennas:
        _parse_antennas("mu_gain.antennas", a)
    if not mg.users or min(mg.users) < 2:
        raise ConfigError("mu_gain.users: need a non-empty grid of counts >= 2")
    for s in mg.schedulers:
        if s not in ("best-cqi", "pf", "rr"):
            raise ConfigError(f"mu_gain.schedulers: unknown scheduler {s!r}")
    if not cfg.das.users_per_cell or min(cfg.das.users_per_cell) < 1:
        raise ConfigError("das.users_per_cell: need a non-empty grid of positive counts")
    known = {"svd-perfect", "clsm-quantized", "zf-perfect", "zf-quantized", "pu2rc-quantized"}
    for m in cfg.das.modes:
        if m not in known:
            raise ConfigError(f"das.modes: unknown mode {m!r}")
    for lay in cfg.das.layouts:
        if lay not in ("centralized", "das"):
            raise ConfigError(f"das.layouts: unknown layout {lay!r}")
    if cfg.das.su_scheduler not in ("rr", "best-cqi"):
        raise ConfigError(f"das.su_scheduler: unknown scheduler {cfg.das.su_scheduler!r}")
    fc = cfg.femto
    if fc.n_clusters < 1 or fc.users_per_cluster < 1 or fc.cluster_radius <= 0:
        raise ConfigError("femto: cluster counts and radius must be positive")
    if fc.femto_counts is not None:
        if not fc.femto_counts or min(fc.femto_counts) < 0 or max(fc.femto_counts) > fc.n_clusters:
            raise ConfigError("femto.femto_counts: must lie in [0, n_clusters]")
    if fc.scheduler not in ("best-cqi", "pf", "rr"):
        raise ConfigError(f"femto.scheduler: unknown scheduler {fc.scheduler!r}")
    if not cfg.cfo.snr_db:
        raise ConfigError("cfo.snr_db: grid must be non-empty")
    pp = cfg.pilot_power
    if not pp.velocities or min(pp.velocities) < 0 or max(pp.velocities) > 500:
        raise ConfigError("pilot_power.velocities: must lie in [0, 500] km/h")
    for a in pp.antennas:
        _parse_antennas("pilot_power.antennas", a)


def _parse_antennas(key, text):
    try:
        nt, nr = (int(x) for x in str(text).lower().split("x"))
    except ValueError:
        raise ConfigError(f"{key}: bad antenna configuration {text!r}") from None
    if (nt, nr) not in ((1, 1), (2, 2), (4, 4)):
        raise ConfigError(f"{key}: antenna configuration {text!r} not in 1x1, 2x2, 4x4")
    return nt, nr


parse_antennas = _parse_antennas


def _coerce(key, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected a boolean")
        return value
    if isinstance(default, tuple) or (default is None and isinstance(value, list)):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list")
        return tuple(value)
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"{key}: expected a table")
        return dict(value)
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string")
        return value
    return value


def _build_section(name, cls, table):
    if not isinstance(table, dict):
        raise ConfigError(f"{name}: expected a table")
    defaults = cls()
    names = {f.name for f in fields(cls)}
    kw = {}
    for key, value in table.items():
        if key not in names:
            raise ConfigError(f"{name}.{key}: unknown key")
        kw[key] = _coerce(f"{name}.{key}", value, getattr(defaults, key))
    return dataclasses.replace(defaults, **kw)


def config_from_dict(data):
    data = dict(data)
    top = {f.name for f in fields(ExperimentConfig)} - set(SECTIONS)
    kw = {}
    defaults = ExperimentConfig()
    for key, value in data.items():
        if key in SECTIONS:
            kw[key] = _build_section(key, SECTIONS[key], value)
        elif key in top:
            kw[key] = _coerce(key, value, getattr(defaults, key))
        else:
            raise ConfigError(f"{key}: unknown key")
    try:
        return ExperimentConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _parse_value(text):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(data, overrides):
    """Merge ``key=value`` strings (dotted keys) into a raw config dict."""
    data = {k: dict(v) if isinstance(v, dict) else v for k, v in data.items()}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"{key}: not a section")
        node[parts[-1]] = _parse_value(text.strip())
    return data


def load_config(path=None, overrides=(), **top):
    """Read a TOML file (optional), apply overrides and top-level values."""
    data = {}
    if path is not None:
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
    data = apply_overrides(data, overrides)
    for key, value in top.items():
        if value is not None:
            data[key] = value
    return config_from_dict(data)
