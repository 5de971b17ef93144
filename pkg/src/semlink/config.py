"""Run configuration: defaults, flat key=value config files, overrides.

Config files hold one `key = value` pair per line with `#` comments.
Keys mirror RunConfig field names exactly; unknown keys are errors.
List values (snr_db, epsilons) are comma-separated; map_shape is HxW.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .errors import ConfigurationError
from .ofdm import QAM_ORDERS

# 20-point budget grid used by the latency sweep (sorted ascending;
# 0 means selection disabled).
DEFAULT_EPSILONS = (0.0, 0.001, 0.002, 0.005, 0.01, 0.02, 0.03, 0.05,
                    0.08, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8,
                    0.9, 1.0)


@dataclass
class RunConfig:
    # dataset
    n_items: int = 200
    n_maps: int = 10
    map_shape: tuple = (8, 8)
    n_classes: int = 4
    skew: float = 1.0
    bits_per_sample: int = 8
    # head training
    epochs: int = 200
    lr: float = 0.1
    # selection / sweeps
    epsilon: float = 0.01
    epsilons: tuple = DEFAULT_EPSILONS
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0)
    # OFDM
    l_fft: int = 64
    cp_len: int = 16
    l_taps: int = 8
    n_pilots: int = 2
    qam_order: int = 16
    # keys
    l_scores: int = 16
    l_skey: int = 64
    l_plk: int = 128
    plk_noise: float = 0.0
    # experiment harness
    trials: int = 128
    seed: int = 1
    out_dir: str = "out"
    symbol_duration: float = 4e-6   # seconds per payload symbol (latency proxy)

    def validate(self) -> "RunConfig":
        if self.n_items < 1 or self.trials < 1:
            raise ConfigurationError("n_items and trials must be >= 1")
        if not self.snr_db:
            raise ConfigurationError("snr_db list must be nonempty")
        if not self.epsilons:
            raise ConfigurationError("epsilons list must be nonempty")
        if any(e < 0 for e in self.epsilons) or self.epsilon < 0:
            raise ConfigurationError("epsilon values must be >= 0")
        if self.qam_order not in QAM_ORDERS:
            raise ConfigurationError(f"qam_order must be one of {QAM_ORDERS}")
        if not 1 <= self.bits_per_sample <= 16:
            raise ConfigurationError("bits_per_sample must be in [1, 16]")
        if not 1 <= self.l_scores <= 32:
            raise ConfigurationError("l_scores must be in [1, 32]")
        if self.l_skey < 1 or self.l_plk < 1:
            raise ConfigurationError("key lengths must be >= 1")
        if not 0 <= self.cp_len < self.l_fft:
            raise ConfigurationError("need 0 <= cp_len < l_fft")
        if self.cp_len < self.l_taps - 1:
            raise ConfigurationError("cp_len must be >= l_taps - 1")
        if self.n_pilots < 1:
            raise ConfigurationError("n_pilots must be >= 1")
        if self.n_maps < self.n_classes:
            raise ConfigurationError("need n_maps >= n_classes")
        return self


_INT_FIELDS = {"n_items", "n_maps", "n_classes", "bits_per_sample", "epochs",
               "l_fft", "cp_len", "l_taps", "n_pilots", "qam_order",
               "l_scores", "l_skey", "l_plk", "trials", "seed"}
_FLOAT_FIELDS = {"skew", "lr", "epsilon", "plk_noise", "symbol_duration"}
_FLOAT_LIST_FIELDS = {"epsilons", "snr_db"}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _INT_FIELDS:
            return int(raw)
        if key in _FLOAT_FIELDS:
            return float(raw)
        if key in _FLOAT_LIST_FIELDS:
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if key == "map_shape":
            h, w = raw.lower().split("x")
            return (int(h), int(w))
        if key == "out_dir":
            return raw
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse value for '{key}': {raw!r}") from exc
    raise ConfigurationError(f"unknown config key: {key}")


def load_config(path) -> RunConfig:
    """Parse a flat key=value file into a validated RunConfig."""
    known = {f.name for f in fields(RunConfig)}
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in known:
                raise ConfigurationError(f"{path}:{lineno}: unknown config key: {key}")
            values[key] = _parse_value(key, raw)
    return RunConfig(**values).validate()


def apply_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Return a copy with non-None overrides applied, then revalidate."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **changes).validate()
