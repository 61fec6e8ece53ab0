"""Series ingestion, windowing, splits and synthetic generators.

The synthetic families all decompose as ``series[t] = base(t) + noise[t]``
with a deterministic daily+weekly sinusoidal base, so the conditional
quantile at any proportion is available in closed form for oracle-based
testing.  An optional mid-series drift shifts the base level and/or swaps
the noise family.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields, replace
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import stats

from .validation import check_series, check_unit_open

__all__ = [
    "SeriesSpec",
    "SyntheticOracle",
    "generate_synthetic",
    "load_csv",
    "save_csv",
    "make_window",
    "split",
]

NOISE_FAMILIES = ("gaussian", "lognormal", "beta", "weibull_netload")


@dataclass
class SeriesSpec:
    """Recipe for one synthetic series (or a pointer to a CSV file)."""

    source: str = "synthetic"  # "synthetic" or a CSV path
    family: str = "lognormal"
    length: int = 30_000
    seed: int = 1
    level: float = 10.0
    daily_amplitude: float = 2.0
    weekly_amplitude: float = 1.0
    noise_scale: float = 1.0
    sigma: float = 1.0  # gaussian std / lognormal log-std
    mu: float = 0.0  # lognormal log-mean
    beta_a: float = 2.0
    beta_b: float = 5.0
    beta_range: float = 4.0  # the noise is beta_range * Beta(a, b)
    weibull_shape: float = 2.0
    weibull_scale: float = 1.0
    drift_step: Optional[int] = None
    drift_level_shift: float = 0.0
    drift_family: Optional[str] = None
    drift_noise_scale: Optional[float] = None

    def validate(self) -> "SeriesSpec":
        if self.source == "synthetic":
            if self.family not in NOISE_FAMILIES:
                raise ValueError(f"unknown noise family {self.family!r}; choose from {NOISE_FAMILIES}")
            if self.length <= 0:
                raise ValueError("length must be positive")
            if self.drift_step is not None and not 0 < self.drift_step < self.length:
                raise ValueError(f"drift_step {self.drift_step} must fall inside the series")
            if self.drift_family is not None and self.drift_family not in NOISE_FAMILIES:
                raise ValueError(f"unknown drift family {self.drift_family!r}")
        return self

    def to_flat(self) -> Dict[str, str]:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif value is None:
                text = "none"
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            out[f"series.{f.name}"] = text
        return out

    @classmethod
    def from_flat(cls, flat: Dict[str, str]) -> "SeriesSpec":
        spec = cls()
        parsers = {
            "source": str,
            "family": str,
            "length": int,
            "seed": int,
            "drift_step": lambda s: None if s.lower() == "none" else int(s),
            "drift_family": lambda s: None if s.lower() == "none" else s,
            "drift_noise_scale": lambda s: None if s.lower() == "none" else float(s),
        }
        for f in fields(cls):
            key = f"series.{f.name}"
            if key in flat:
                parse = parsers.get(f.name, float)
                setattr(spec, f.name, parse(flat[key]))
        return spec


def _base_profile(spec: SeriesSpec, t: np.ndarray | int) -> np.ndarray | float:
    t = np.asarray(t, dtype=np.float64)
    return (
        spec.level
        + spec.daily_amplitude * np.sin(2.0 * np.pi * t / 24.0)
        + spec.weekly_amplitude * np.sin(2.0 * np.pi * t / 168.0)
    )


def _draw_noise(spec: SeriesSpec, family: str, scale: float, n: int, rng: np.random.Generator) -> np.ndarray:
    if family == "gaussian":
        raw = rng.normal(0.0, spec.sigma, size=n)
    elif family == "lognormal":
        raw = rng.lognormal(spec.mu, spec.sigma, size=n)
    elif family == "beta":
        raw = spec.beta_range * rng.beta(spec.beta_a, spec.beta_b, size=n)
    elif family == "weibull_netload":
        # load minus a Weibull-distributed generation draw
        raw = -spec.weibull_scale * rng.weibull(spec.weibull_shape, size=n)
    else:
        raise ValueError(f"unknown noise family {family!r}")
    return scale * raw


def _noise_quantile(spec: SeriesSpec, family: str, scale: float, alpha) -> np.ndarray | float:
    alpha = np.asarray(alpha, dtype=np.float64)
    if family == "gaussian":
        q = spec.sigma * stats.norm.ppf(alpha)
    elif family == "lognormal":
        q = np.exp(spec.mu + spec.sigma * stats.norm.ppf(alpha))
    elif family == "beta":
        q = spec.beta_range * stats.beta.ppf(alpha, spec.beta_a, spec.beta_b)
    elif family == "weibull_netload":
        # quantile of -scale*W is -scale * q_W(1 - alpha)
        q = -spec.weibull_scale * stats.weibull_min.ppf(1.0 - alpha, spec.weibull_shape)
    else:
        raise ValueError(f"unknown noise family {family!r}")
    return scale * q


@dataclass(frozen=True)
class SyntheticOracle:
    """Closed-form conditional quantiles for a generated series."""

    spec: SeriesSpec

    def _family_scale(self, t: int) -> tuple[str, float, float]:
        spec = self.spec
        drifted = spec.drift_step is not None and t >= spec.drift_step
        family = spec.drift_family if (drifted and spec.drift_family) else spec.family
        scale = (
            spec.drift_noise_scale
            if (drifted and spec.drift_noise_scale is not None)
            else spec.noise_scale
        )
        shift = spec.drift_level_shift if drifted else 0.0
        return family, scale, shift

    def base(self, t: int) -> float:
        family, scale, shift = self._family_scale(t)
        return float(_base_profile(self.spec, t)) + shift

    def quantile(self, alpha: float, t: int = 0) -> float:
        """The exact alpha-quantile of the value at step ``t``."""
        check_unit_open("alpha", alpha)
        family, scale, _ = self._family_scale(t)
        return self.base(t) + float(_noise_quantile(self.spec, family, scale, alpha))

    def interval_width(self, alpha: float, beta: float, t: int = 0) -> float:
        return self.quantile(alpha + 1.0 - beta, t) - self.quantile(alpha, t)

    def optimal_pair(self, beta: float, n_actions: int, t: int = 0) -> tuple[float, float]:
        """Width-minimizing (lower, upper) proportions over the action grid."""
        from .agent import action_space  # local import avoids a cycle at module load

        space = action_space(n_actions, beta)
        widths = [self.interval_width(a, beta, t) for a in space.proportions]
        best = int(np.argmin(widths))
        a = space.proportions[best]
        return a, a + 1.0 - beta


def generate_synthetic(spec: SeriesSpec) -> tuple[np.ndarray, SyntheticOracle]:
    """Deterministically generate a series and its quantile oracle."""
    spec.validate()
    if spec.source != "synthetic":
        raise ValueError("generate_synthetic requires a synthetic SeriesSpec")
    rng = np.random.default_rng(spec.seed)
    t = np.arange(spec.length)
    series = np.asarray(_base_profile(spec, t), dtype=np.float64)

    cut = spec.drift_step if spec.drift_step is not None else spec.length
    series[:cut] += _draw_noise(spec, spec.family, spec.noise_scale, cut, rng)
    if cut < spec.length:
        family = spec.drift_family or spec.family
        scale = spec.drift_noise_scale if spec.drift_noise_scale is not None else spec.noise_scale
        series[cut:] += _draw_noise(spec, family, scale, spec.length - cut, rng)
        series[cut:] += spec.drift_level_shift
    return series, SyntheticOracle(spec=replace(spec))


def load_csv(path) -> np.ndarray:
    """Read a two-column (timestamp, value) CSV with a header row.

    Values come back in file order; timestamps must be strictly increasing
    (numeric when they all parse as numbers, lexicographic otherwise, which
    suits ISO-8601 stamps) but are not otherwise used.
    """
    values = []
    stamps = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise ValueError(f"{path}: expected a header row with two columns")
        for lineno, row in enumerate(reader, start=2):
            if len(row) < 2:
                raise ValueError(f"{path}: line {lineno}: expected two columns, got {len(row)}")
            try:
                values.append(float(row[1]))
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-numeric value {row[1]!r}") from None
            stamps.append(row[0].strip())
    if not values:
        raise ValueError(f"{path}: no data rows")

    try:
        ordered = [float(s) for s in stamps]
    except ValueError:
        ordered = stamps  # ISO timestamps order lexicographically
    for i in range(1, len(ordered)):
        if not ordered[i] > ordered[i - 1]:
            raise ValueError(f"{path}: line {i + 2}: timestamps are not strictly increasing")
    return np.asarray(values, dtype=np.float64)


def save_csv(path, series, start: int = 0) -> None:
    """Write a series with integer timestamps ``start, start+1, ...``."""
    series = check_series(series)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "value"])
        for i, v in enumerate(series):
            writer.writerow([start + i, repr(float(v))])


def make_window(series: np.ndarray, t: int, h: int) -> np.ndarray:
    """The ``h`` values immediately preceding index ``t``, oldest first."""
    if t < h:
        raise ValueError(f"need t >= {h} to build a window, got t={t}")
    return np.array(series[t - h : t], dtype=np.float64)


def split(series: np.ndarray, train_fraction: float, min_segment: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Contiguous chronological split at ``floor(len * fraction)``."""
    series = check_series(series)
    check_unit_open("train_fraction", train_fraction)
    cut = int(np.floor(len(series) * train_fraction))
    if cut < min_segment or len(series) - cut < min_segment:
        raise ValueError(
            f"split at {cut} leaves a segment shorter than {min_segment} "
            f"(series length {len(series)})"
        )
    return series[:cut], series[cut:]
