"""CSV ingestion, chronological splits, normalization and synthetic data.

CSV layout (ETT style): a header row, a timestamp column (ISO-8601 or an
integer index) first, then one numeric column per channel.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Sequence

import numpy as np

from .sampling import ConfigError, RandomSource
from .series import MultivariateSeries, WindowPair, count_windows


class CsvFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.7
    val: float = 0.2
    test: float = 0.1

    def __post_init__(self):
        if min(self.train, self.val, self.test) <= 0:
            raise ConfigError("split ratios must be positive")
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise ConfigError(f"split ratios must sum to 1, got {self.train + self.val + self.test}")


def _parse_timestamps(raw: list[str]):
    try:
        return np.array([int(v) for v in raw], dtype=np.int64)
    except ValueError:
        pass
    try:
        return np.array([datetime.fromisoformat(v.strip()) for v in raw], dtype="datetime64[us]")
    except ValueError:
        return None


def load_csv(path) -> MultivariateSeries:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if len(header) < 2:
        raise CsvFormatError(f"{path}: need a timestamp column and at least one channel, got {len(header)} column(s)")
    if not body:
        raise CsvFormatError(f"{path}: no data rows")

    values = np.empty((len(header) - 1, len(body)))
    for r, row in enumerate(body):
        line = r + 2
        if len(row) != len(header):
            raise CsvFormatError(f"{path}: row {line} has {len(row)} fields, header has {len(header)}")
        for k, cell in enumerate(row[1:]):
            try:
                v = float(cell)
            except ValueError:
                raise CsvFormatError(f"{path}: row {line}, column {header[k + 1]!r}: cannot parse {cell!r} as a number") from None
            if not math.isfinite(v):
                raise CsvFormatError(f"{path}: row {line}, column {header[k + 1]!r}: non-finite value {cell!r}")
            values[k, r] = v

    timestamps = _parse_timestamps([row[0] for row in body])
    if timestamps is not None and timestamps.size > 1 and not np.all(timestamps[1:] > timestamps[:-1]):
        raise CsvFormatError(f"{path}: timestamps in column {header[0]!r} are not strictly increasing")
    return MultivariateSeries(values, timestamps, tuple(header[1:]))


def _format_timestamp(ts) -> str:
    if isinstance(ts, np.datetime64):
        return str(np.datetime_as_string(ts, unit="s")).replace("T", " ")
    return str(ts)


def write_csv(series: MultivariateSeries, path, time_header: str = "date") -> None:
    """Write ``series`` with shortest round-trip float formatting."""
    names = series.channel_names or tuple(f"ch{k}" for k in range(series.n_channels))
    stamps = series.timestamps if series.timestamps is not None else range(series.length)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([time_header, *names])
        for t, ts in enumerate(stamps):
            w.writerow([_format_timestamp(ts), *(repr(float(v)) for v in series.values[:, t])])


def split_bounds(T: int, spec: SplitSpec = SplitSpec()) -> tuple[int, int]:
    # the small epsilon keeps e.g. (0.7 + 0.2) * 100 from flooring to 89
    return math.floor(spec.train * T + 1e-9), math.floor((spec.train + spec.val) * T + 1e-9)


def split(series: MultivariateSeries, spec: SplitSpec = SplitSpec(), d: int = 1, h: int = 1, require_all: bool = False):
    """Chronological train/val/test split.

    The train part must host at least one ``d + h`` window; with ``require_all``
    the validation and test parts must as well.
    """
    T = series.length
    b1, b2 = split_bounds(T, spec)
    lengths = (b1, b2 - b1, T - b2)
    need = d + h
    checked = lengths if require_all else lengths[:1]
    if min(lengths) < 1:
        raise ConfigError(f"split of T={T} gives lengths {lengths}; every split must be non-empty")
    if any(count_windows(n, d, h) < 1 for n in checked):
        ratios = (spec.train, spec.val, spec.test) if require_all else (spec.train,)
        min_T = max(math.ceil(need / r) for r in ratios)
        which = "every split" if require_all else "the train split"
        raise ConfigError(
            f"split of T={T} gives lengths {lengths}; {which} needs >= {need} steps "
            f"for d={d}, h={h} (series length of roughly {min_T} or more)"
        )
    return series.slice_steps(0, b1), series.slice_steps(b1, b2), series.slice_steps(b2, T)


def subsample_train(train_windows: Sequence[WindowPair], fraction: float, rng: RandomSource) -> list[WindowPair]:
    """``ceil(fraction * N)`` windows drawn without replacement, original order kept."""
    if not 0 < fraction <= 1:
        raise ConfigError(f"fraction must be in (0, 1], got {fraction}")
    n = len(train_windows)
    k = math.ceil(fraction * n - 1e-12)
    if k >= n:
        return list(train_windows)
    keep = np.sort(rng.choice_without_replacement(n, k))
    return [train_windows[i] for i in keep]


@dataclass
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, series: MultivariateSeries) -> MultivariateSeries:
        vals = (series.values - self.mean[:, None]) / self.std[:, None]
        return MultivariateSeries(vals, series.timestamps, series.channel_names)

    def invert(self, series: MultivariateSeries) -> MultivariateSeries:
        vals = series.values * self.std[:, None] + self.mean[:, None]
        return MultivariateSeries(vals, series.timestamps, series.channel_names)


def fit_normalizer(train_series: MultivariateSeries) -> Normalizer:
    mean = train_series.values.mean(axis=1)
    std = train_series.values.std(axis=1)
    flat = np.flatnonzero(~(std > 0))
    if flat.size:
        names = train_series.channel_names
        label = names[flat[0]] if names else f"#{flat[0]}"
        raise ConfigError(f"channel {label} is constant on the training split; cannot normalize")
    return Normalizer(mean, std)


@dataclass
class SynthSpec:
    """Sum-of-tones + trend + Gaussian noise generator settings.

    ``tones[k]`` lists ``(frequency in cycles/step, amplitude)`` for channel ``k``;
    ``slopes[k]`` is that channel's trend per step.
    """

    length: int = 2000
    channels: int = 1
    tones: list = field(default_factory=list)
    slopes: list = field(default_factory=list)
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.tones = [[(float(f), float(a)) for f, a in ch] for ch in self.tones] or [[] for _ in range(self.channels)]
        self.slopes = [float(s) for s in self.slopes] or [0.0] * self.channels
        if self.length < 64:
            raise ConfigError(f"synthetic length must be >= 64, got {self.length}")
        if len(self.tones) != self.channels or len(self.slopes) != self.channels:
            raise ConfigError("tones and slopes need one entry per channel")
        for ch in self.tones:
            for f, _ in ch:
                if not 0 < f < 0.5:
                    raise ConfigError(f"tone frequency must be in (0, 0.5), got {f}")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


def synth_generate(spec: SynthSpec) -> MultivariateSeries:
    rng = RandomSource(spec.seed)
    t = np.arange(spec.length, dtype=np.float64)
    values = np.zeros((spec.channels, spec.length))
    for k in range(spec.channels):
        ch_rng = rng.child(k)
        for f, amp in spec.tones[k]:
            phase = ch_rng.uniform(0.0, 2 * np.pi)
            values[k] += amp * np.sin(2 * np.pi * f * t + phase)
        values[k] += spec.slopes[k] * t
        if spec.noise_std > 0:
            values[k] += spec.noise_std * ch_rng.normal(spec.length)
    return MultivariateSeries(values, np.arange(spec.length, dtype=np.int64), tuple(f"ch{k}" for k in range(spec.channels)))


def scarcity_spec(seed: int = 0, length: int = 2000, channels: int = 7, noise_std: float = 0.3) -> SynthSpec:
    """The 7-channel multi-tone benchmark series used for scarcity experiments."""
    rng = RandomSource(seed).child(10_000)
    tones, slopes = [], []
    for _ in range(channels):
        tones.append([
            (float(rng.uniform(0.01, 0.04)), float(rng.uniform(0.5, 1.5))),
            (float(rng.uniform(0.05, 0.12)), float(rng.uniform(0.3, 1.0))),
            (float(rng.uniform(0.15, 0.3)), float(rng.uniform(0.1, 0.5))),
        ])
        slopes.append(float(rng.uniform(-5e-4, 5e-4)))
    return SynthSpec(length, channels, tones, slopes, noise_std, seed)
