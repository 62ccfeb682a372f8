"""Experiment specification files.

A spec is a JSON object whose keys mirror :class:`ExperimentSpec`. Unknown
keys are rejected. ``config`` holds :class:`~ramimo.channel.SystemConfig`
overrides.
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from ..channel import SystemConfig
from ..exceptions import ConfigError

SCENARIOS = ("fig2", "fig3", "fig4", "fig56")

FIG2_SCHEMES = ("FD", "ES", "RA-AltMI", "RA-AltEig", "fixed-mode")
MSE_SCHEMES = ("optimal", "offline-chan-corr", "offline-pattern-corr")
CSI_VARIANTS = ("perfect", "estimated-optimal", "estimated-offline", "estimated-pattern")

_DEFAULTS = {
    "fig2": dict(snr_db=[0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0], trials=500,
                 schemes=["FD", "RA-AltMI", "RA-AltEig", "fixed-mode"]),
    "fig3": dict(snr_db=[20.0], trials=2000, schemes=["optimal"]),
    "fig4": dict(snr_db=[0.0, 10.0, 20.0, 30.0], trials=2000, schemes=list(MSE_SCHEMES)),
    "fig56": dict(snr_db=[0.0, 10.0, 20.0, 30.0], trials=500, schemes=list(CSI_VARIANTS)),
}


@dataclass
class ExperimentSpec:
    """One Monte-Carlo sweep.

    ``schemes`` lists the compared schemes (``csi`` variants for
    ``fig56``); ``f_values`` is the training-size sweep of ``fig3``.
    """

    scenario: str
    config: dict = field(default_factory=dict)
    snr_db: list = None
    f_values: list = None
    schemes: list = None
    trials: int = None
    seed_base: int = 0
    output: str = None
    n_train: int = 3
    n_sectors: int = 4
    calibration_trials: int = 500
    metric: str = "sum_rate"
    max_sweeps: int = 5
    beamwidth: float = 30.0
    exponent: float = 2.0
    budget: int = 10**6
    check_trends: bool = True

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        defaults = _DEFAULTS[self.scenario]
        for key, value in defaults.items():
            if getattr(self, key) is None:
                setattr(self, key, list(value) if isinstance(value, list) else value)
        if not isinstance(self.config, dict):
            raise ConfigError("config must be an object of SystemConfig fields")
        self.system = self.build_config()
        if self.f_values is None:
            self.f_values = list(range(1, self.system.n_modes + 1))
        self.validate()

    def build_config(self):
        known = {f.name for f in dataclasses.fields(SystemConfig)}
        unknown = set(self.config) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return SystemConfig(**self.config)

    def validate(self):
        if not isinstance(self.trials, int) or isinstance(self.trials, bool) or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials!r}")
        for name in ("snr_db", "schemes", "f_values"):
            value = getattr(self, name)
            if not isinstance(value, list) or not value:
                raise ConfigError(f"{name} must be a non-empty list")
        allowed = {"fig2": FIG2_SCHEMES, "fig3": MSE_SCHEMES, "fig4": MSE_SCHEMES,
                   "fig56": CSI_VARIANTS}[self.scenario]
        bad = [s for s in self.schemes if s not in allowed]
        if bad:
            raise ConfigError(f"unknown schemes {bad} for {self.scenario}; allowed {allowed}")
        n_modes = self.system.n_modes
        if any(not isinstance(f, int) or not 1 <= f <= n_modes for f in self.f_values):
            raise ConfigError(f"f_values must lie in 1..{n_modes}")
        if not 1 <= self.n_train <= n_modes:
            raise ConfigError(f"n_train must lie in 1..{n_modes}")
        if self.n_sectors < 1 or self.calibration_trials < 1:
            raise ConfigError("n_sectors and calibration_trials must be positive")
        if self.metric not in ("sum_rate", "eig_sum"):
            raise ConfigError(f"unknown metric {self.metric!r}")

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def digest(self):
        """Short hash of the spec file content (the output path excluded)."""
        data = self.to_dict()
        data.pop("output")
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def spec_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("spec must be a JSON object")
    known = {f.name for f in dataclasses.fields(ExperimentSpec)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown spec keys: {sorted(unknown)}")
    if "scenario" not in data:
        raise ConfigError("spec needs a 'scenario'")
    return ExperimentSpec(**data)


def load_spec(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return spec_from_dict(data)
