"""Simulation configuration and its INI file form."""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, fields

from .channels import ErrorModelParams
from .exceptions import ConfigError, InvalidArgumentError
from .measurement import MeasurementSetting, parse_setting_label
from .phase import PhaseNoiseParams

MODES = ("heralded", "physical")


def default_settings(m: int) -> tuple[str, ...]:
    return ("eigen",) + tuple(f"mi:{i}" for i in range(m))


@dataclass(frozen=True)
class SimConfig:
    m: int = 6
    trajectories: int = 1_000_000
    master_seed: int = 20240101
    params: ErrorModelParams = field(default_factory=ErrorModelParams)
    phase: PhaseNoiseParams = field(default_factory=PhaseNoiseParams)
    settings: tuple[str, ...] = ()  # empty means all m+1 settings
    cycle_rate: float = 1000 / 0.150  # 1000 generation cycles per 150 ms experiment cycle
    mode: str = "heralded"
    phase_deg: float = 0.0  # mean relative phase of the prepared state

    def __post_init__(self):
        if not isinstance(self.m, int) or not 1 <= self.m <= 16:
            raise ConfigError(f"m must be an integer in [1, 16], got {self.m!r}")
        if not isinstance(self.trajectories, int) or self.trajectories <= 0:
            raise ConfigError(f"trajectories must be a positive integer, got {self.trajectories!r}")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if self.cycle_rate <= 0:
            raise ConfigError("cycle_rate must be positive")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        try:
            self.measurement_settings()
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def setting_labels(self) -> tuple[str, ...]:
        return self.settings or default_settings(self.m)

    def measurement_settings(self) -> list[MeasurementSetting]:
        return [parse_setting_label(s, self.m) for s in self.setting_labels]

    @property
    def phi(self) -> float:
        return math.radians(self.phase_deg)

    def replace(self, **changes) -> "SimConfig":
        from dataclasses import replace

        return replace(self, **changes)


def emit_config(cfg: SimConfig) -> str:
    cp = configparser.ConfigParser()
    cp["simulation"] = {
        "m": str(cfg.m),
        "trajectories": str(cfg.trajectories),
        "master_seed": str(cfg.master_seed),
        "settings": ", ".join(cfg.settings),
        "cycle_rate": repr(cfg.cycle_rate),
        "mode": cfg.mode,
    }
    cp["errors"] = {f.name: repr(getattr(cfg.params, f.name)) for f in fields(ErrorModelParams)}
    ph = {
        "sigma_laser_deg": repr(cfg.phase.sigma_laser),
        "sigma_inter_deg": repr(cfg.phase.sigma_inter),
        "phase_deg": repr(cfg.phase_deg),
    }
    if cfg.phase.sigma_laser_components is not None:
        ph["sigma_laser_components_deg"] = ", ".join(repr(c) for c in cfg.phase.sigma_laser_components)
    cp["phase"] = ph
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _num(section, key, kind, default):
    if key not in section:
        return default
    raw = section[key].strip()
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} = {raw!r} is not a valid {kind.__name__}") from None


def parse_config(text: str, **overrides) -> SimConfig:
    """Read an INI configuration; missing keys keep their defaults.

    Keyword ``overrides`` (e.g. from command-line flags) win over the file.
    """
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    unknown = set(cp.sections()) - {"simulation", "errors", "phase"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    base = SimConfig.__dataclass_fields__
    sim = cp["simulation"] if cp.has_section("simulation") else cp[cp.default_section]
    kw = {
        "m": _num(sim, "m", int, base["m"].default),
        "trajectories": _num(sim, "trajectories", int, base["trajectories"].default),
        "master_seed": _num(sim, "master_seed", int, base["master_seed"].default),
        "cycle_rate": _num(sim, "cycle_rate", float, base["cycle_rate"].default),
        "mode": sim.get("mode", base["mode"].default).strip(),
    }
    labels = [s.strip() for s in sim.get("settings", "").split(",") if s.strip()]
    kw["settings"] = tuple(labels)

    err_kw = {}
    if cp.has_section("errors"):
        names = {f.name for f in fields(ErrorModelParams)}
        for key in cp["errors"]:
            if key not in names:
                raise ConfigError(f"unknown error parameter {key!r}")
            err_kw[key] = _num(cp["errors"], key, float, None)
    ph_kw = {}
    phase_deg = 0.0
    if cp.has_section("phase"):
        sec = cp["phase"]
        known = {"sigma_laser_deg", "sigma_inter_deg", "phase_deg", "sigma_laser_components_deg"}
        extra = set(sec) - known
        if extra:
            raise ConfigError(f"unknown phase parameters {sorted(extra)}")
        if "sigma_laser_deg" in sec:
            ph_kw["sigma_laser"] = _num(sec, "sigma_laser_deg", float, None)
        if "sigma_inter_deg" in sec:
            ph_kw["sigma_inter"] = _num(sec, "sigma_inter_deg", float, None)
        if "sigma_laser_components_deg" in sec:
            try:
                comps = tuple(float(x) for x in sec["sigma_laser_components_deg"].split(","))
            except ValueError:
                raise ConfigError("sigma_laser_components_deg must be two numbers") from None
            ph_kw["sigma_laser_components"] = comps
        phase_deg = _num(sec, "phase_deg", float, 0.0)
    kw["phase_deg"] = phase_deg

    err_over = overrides.pop("params", None)
    kw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        kw["params"] = err_over or ErrorModelParams(**err_kw)
        kw["phase"] = PhaseNoiseParams(**ph_kw)
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from None
    return SimConfig(**kw)


def load_config(path: str | None, **overrides) -> SimConfig:
    if path is None:
        return parse_config("", **overrides)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, **overrides)


def setting_file_tag(setting: MeasurementSetting) -> str:
    return "eigen" if setting.is_eigen else f"mi{setting.index}"

