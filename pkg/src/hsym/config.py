"""Run configuration: plain key=value files with '#' comments.

Every key has a default; unknown or duplicate keys are rejected with the
offending line.  `canonical_text` serializes every key in a fixed order such
that parse(canonical_text(c)) == c (round-trip safe).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError
from .model import ModelConfig


@dataclass(frozen=True)
class RunConfig:
    # simulation
    reynolds: float = 1.0e7
    f0: complex = 2.0 + 2.0j
    f1: complex = 1.0 + 1.0j
    n_shells: int = 28
    dt: Optional[float] = None              # auto: viscous-scale CFL, dyadic
    t_end: float = 200.0
    t_transient: float = 20.0
    record_stride: Optional[int] = None     # auto: aim for ~2e5 frames
    seed: int = 1
    c_safety: float = 0.025
    # analysis
    m_band: Optional[tuple[int, int]] = None  # auto: inertial band from Re
    window: tuple[int, int] = (-2, 2)
    fit_band: Optional[tuple[int, int]] = None  # auto: shells 4 .. 0.75 log2 Re - 4
    orders: tuple[float, ...] = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0)
    grid_min: float = 1.0e-3
    grid_max: float = 1.0e2
    grid_bins: int = 200
    memory_depth: int = 1
    pdf_bins: int = 201
    pdf_span: float = 5.0
    pdf_weighting: str = "amplitude"        # or "resample": uniform-tau resampling

    def __post_init__(self):
        if self.memory_depth not in (0, 1):
            raise ConfigError(f"memory_depth must be 0 or 1, got {self.memory_depth}")
        if self.pdf_weighting not in ("amplitude", "resample"):
            raise ConfigError(f"pdf_weighting must be 'amplitude' or 'resample', got {self.pdf_weighting!r}")
        if not (0 < self.grid_min < self.grid_max):
            raise ConfigError(f"need 0 < grid_min < grid_max, got [{self.grid_min}, {self.grid_max}]")
        if self.grid_bins < 2:
            raise ConfigError(f"grid_bins must be >= 2, got {self.grid_bins}")
        if self.pdf_bins < 2:
            raise ConfigError(f"pdf_bins must be >= 2, got {self.pdf_bins}")
        if not (self.pdf_span > 0):
            raise ConfigError(f"pdf_span must be positive, got {self.pdf_span}")
        if self.window[0] > self.window[1]:
            raise ConfigError(f"window must be lo:hi with lo <= hi, got {self.window}")
        if self.m_band is not None and self.m_band[0] > self.m_band[1]:
            raise ConfigError(f"m_band must be lo:hi with lo <= hi, got {self.m_band}")
        if self.fit_band is not None and self.fit_band[0] > self.fit_band[1]:
            raise ConfigError(f"fit_band must be lo:hi with lo <= hi, got {self.fit_band}")
        if any(p < 0 for p in self.orders):
            raise ConfigError("orders must be non-negative")
        try:
            self.model()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def model(self) -> ModelConfig:
        return ModelConfig(
            reynolds=self.reynolds, f0=self.f0, f1=self.f1, n_shells=self.n_shells,
            dt=self.dt, t_end=self.t_end, t_transient=self.t_transient,
            record_stride=self.record_stride, seed=self.seed, c_safety=self.c_safety,
        )

    def resolved_m_band(self) -> tuple[int, int]:
        """Configured band, or the inertial band implied by the Reynolds number.

        Keeps a quarter of the log-range clear of the forcing shells and the
        same four-octave margin below the viscous cutoff as the fit band.
        """
        if self.m_band is not None:
            return self.m_band
        lo = max(1, round(0.25 * math.log2(self.reynolds)))
        hi = min(round(0.75 * math.log2(self.reynolds)) - 4, self.n_shells - 2)
        return int(lo), int(max(hi, lo + 1))

    def resolved_fit_band(self) -> tuple[int, int]:
        if self.fit_band is not None:
            return self.fit_band
        hi = min(round(0.75 * math.log2(self.reynolds)) - 4, self.n_shells - 2)
        return 4, int(max(hi, 6))


# --- value codecs -----------------------------------------------------------

def _parse_float(v: str) -> float:
    return float(v)


def _parse_opt_float(v: str) -> Optional[float]:
    return None if v == "auto" else float(v)


def _parse_int(v: str) -> int:
    return int(v, 10)


def _parse_opt_int(v: str) -> Optional[int]:
    return None if v == "auto" else int(v, 10)


def _parse_complex(v: str) -> complex:
    s = v.replace(" ", "").replace("i", "j")
    return complex(s)


def _parse_pair(v: str) -> tuple[int, int]:
    lo, _, hi = v.partition(":")
    if not _:
        raise ValueError(f"expected lo:hi, got {v!r}")
    return int(lo, 10), int(hi, 10)


def _parse_opt_pair(v: str) -> Optional[tuple[int, int]]:
    return None if v == "auto" else _parse_pair(v)


def _parse_orders(v: str) -> tuple[float, ...]:
    return tuple(float(x) for x in v.split(",") if x.strip())


def _parse_str(v: str) -> str:
    return v


def _show(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, complex):
        return repr(value).strip("()")
    if isinstance(value, tuple):
        if value and isinstance(value[0], int) and len(value) == 2:
            return f"{value[0]}:{value[1]}"
        return ",".join(f"{x:g}" for x in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


_PARSERS = {
    "reynolds": _parse_float,
    "f0": _parse_complex,
    "f1": _parse_complex,
    "n_shells": _parse_int,
    "dt": _parse_opt_float,
    "t_end": _parse_float,
    "t_transient": _parse_float,
    "record_stride": _parse_opt_int,
    "seed": _parse_int,
    "c_safety": _parse_float,
    "m_band": _parse_opt_pair,
    "window": _parse_pair,
    "fit_band": _parse_opt_pair,
    "orders": _parse_orders,
    "grid_min": _parse_float,
    "grid_max": _parse_float,
    "grid_bins": _parse_int,
    "memory_depth": _parse_int,
    "pdf_bins": _parse_int,
    "pdf_span": _parse_float,
    "pdf_weighting": _parse_str,
}

KEYS = tuple(f.name for f in dataclasses.fields(RunConfig))
assert set(KEYS) == set(_PARSERS)


def parse_config(text: str) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        key = key.strip()
        value = value.strip()
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate config key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except (ValueError, OverflowError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RunConfig:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    return parse_config(text)


def canonical_text(cfg: RunConfig) -> str:
    lines = [f"{key} = {_show(getattr(cfg, key))}" for key in KEYS]
    return "\n".join(lines) + "\n"
