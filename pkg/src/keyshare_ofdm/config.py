"""System parameters, validation and the ``key = value`` config format."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping


class ConfigError(ValueError):
    """Raised when a configuration violates one of its invariants."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class SystemConfig:
    """All physical and protocol parameters of one scenario.

    Defaults are the reference scenario: 64 sub-channels, CP and CIR of
    length 8, two eavesdroppers, N_A = 2, N_B = 8, 30 dB per-sub-channel
    SNR, SNR gaps of 1.2, R_data = 1.5 bits/channel-use, K = 1 and a key
    buffer of 10 packets.
    """

    n_subchannels: int = 64
    n_cp: int = 8
    n_taps: int = 8
    n_tx_alice: int = 2
    n_tx_bob: int = 8
    n_eves: int = 2
    snr_alice: float = 1000.0
    snr_bob: float = 1000.0
    gap_ab: float = 1.2
    gap_ba: float = 1.2
    rate_data: float = 1.5
    key_ratio: int = 1
    q_max: int = 10
    n_data_fixed: int = 11
    bandwidth_time: tuple[float, float] | None = None

    # derived quantities; always consistent after validate()
    @property
    def n_key_fixed(self) -> int:
        return self.n_subchannels - self.n_data_fixed

    @property
    def rate_key(self) -> float:
        return self.rate_data / self.key_ratio

    @property
    def symbol_length(self) -> int:
        """Channel uses per OFDM symbol, N + N_cp."""
        return self.n_subchannels + self.n_cp

    @property
    def bits_data(self) -> float | None:
        if self.bandwidth_time is None:
            return None
        w, t = self.bandwidth_time
        return self.rate_data * w * t

    @property
    def bits_key(self) -> float | None:
        b = self.bits_data
        return None if b is None else b / self.key_ratio

    def replace(self, **changes: Any) -> "SystemConfig":
        """Return a validated copy with ``changes`` applied."""
        return validate(dataclasses.replace(self, **changes))

    def as_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_INT_FIELDS = {
    "n_subchannels", "n_cp", "n_taps", "n_tx_alice", "n_tx_bob", "n_eves",
    "key_ratio", "q_max", "n_data_fixed",
}
_FLOAT_FIELDS = {"snr_alice", "snr_bob", "gap_ab", "gap_ba", "rate_data"}
FIELD_NAMES = tuple(f.name for f in fields(SystemConfig))


def validate(config: SystemConfig) -> SystemConfig:
    """Check every invariant of ``config`` and return it unchanged.

    Raises
    ------
    ConfigError
        Naming the first violated invariant.
    """
    c = config
    for name in _INT_FIELDS:
        value = getattr(c, name)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
    for name in _FLOAT_FIELDS:
        value = getattr(c, name)
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"{name} must be a finite number, got {value!r}")

    if c.n_subchannels < 1:
        raise ConfigError("n_subchannels must be >= 1")
    if c.n_taps < 1:
        raise ConfigError("n_taps must be >= 1")
    if c.n_cp < c.n_taps:
        raise ConfigError(
            f"n_cp ({c.n_cp}) must be >= n_taps ({c.n_taps}): cyclic prefix "
            "shorter than the channel impulse response")
    if c.n_subchannels < c.n_taps:
        raise ConfigError("n_subchannels must be >= n_taps")
    if c.n_tx_alice < 1 or c.n_tx_bob < 1:
        raise ConfigError("antenna counts must be >= 1")
    if c.n_eves < 0:
        raise ConfigError("n_eves must be >= 0")
    if not 1 <= c.n_data_fixed <= c.n_subchannels:
        raise ConfigError(
            f"n_data_fixed must lie in [1, {c.n_subchannels}], "
            f"got {c.n_data_fixed}")
    if c.key_ratio < 1:
        raise ConfigError("key_ratio K must be >= 1")
    if c.key_ratio > c.q_max:
        raise ConfigError(
            f"key_ratio K ({c.key_ratio}) must be <= q_max ({c.q_max})")
    if c.snr_alice <= 0 or c.snr_bob <= 0:
        raise ConfigError("SNRs must be strictly positive")
    if c.gap_ab < 1 or c.gap_ba < 1:
        raise ConfigError("SNR gaps must be >= 1")
    if c.rate_data < 0:
        raise ConfigError("rate_data must be >= 0")
    if c.bandwidth_time is not None:
        w, t = c.bandwidth_time
        if w <= 0 or t <= 0:
            raise ConfigError("bandwidth and slot duration must be positive")
    return config


def parse_number(text: str) -> float:
    """Parse a float, accepting a ``dB`` suffix (converted to linear)."""
    s = text.strip()
    if s.lower().endswith("db"):
        return db_to_linear(float(s[:-2]))
    return float(s)


def coerce_field(name: str, text: str) -> Any:
    if name not in FIELD_NAMES:
        raise ConfigError(f"unknown config key {name!r}")
    if name in _INT_FIELDS:
        try:
            return int(text.strip())
        except ValueError:
            raise ConfigError(f"{name} expects an integer, got {text!r}") from None
    if name == "bandwidth_time":
        parts = text.replace(",", " ").split()
        if len(parts) != 2:
            raise ConfigError("bandwidth_time expects two numbers 'W, T'")
        return (float(parts[0]), float(parts[1]))
    try:
        return parse_number(text)
    except ValueError:
        raise ConfigError(f"{name} expects a number, got {text!r}") from None


def parse_config_text(text: str) -> dict[str, Any]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = coerce_field(key, value)
    return values


REQUIRED_KEYS = tuple(n for n in FIELD_NAMES if n != "bandwidth_time")


def from_mapping(values: Mapping[str, Any],
                 base: SystemConfig | None = None) -> SystemConfig:
    """Build a validated config from ``values``.

    Without ``base`` every key except ``bandwidth_time`` must be present.
    """
    unknown = set(values) - set(FIELD_NAMES)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if base is None:
        missing = [k for k in REQUIRED_KEYS if k not in values]
        if missing:
            raise ConfigError(f"missing config keys: {missing}")
        return validate(SystemConfig(**values))
    return validate(dataclasses.replace(base, **values))


def load_config(path: str | Path, base: SystemConfig | None = None) -> SystemConfig:
    return from_mapping(parse_config_text(Path(path).read_text()), base)


def dump_config(config: SystemConfig) -> str:
    lines = []
    for name, value in config.as_dict().items():
        if value is None:
            continue
        if isinstance(value, tuple):
            value = ", ".join(repr(float(v)) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{name} = {value}")
    return "\n".join(lines) + "\n"


DEFAULT = validate(SystemConfig())
