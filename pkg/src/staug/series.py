"""Multivariate series and forecasting windows.

Values are stored channel-major, shape ``(c, T)``, so each channel is a
contiguous row. Windows are value copies of their parent slice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


class WindowBoundsError(ValueError):
    """Raised when a requested window does not fit inside its series."""


class ShapeError(ValueError):
    """Raised when arrays that must share a shape do not."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MultivariateSeries:
    values: np.ndarray
    timestamps: Optional[np.ndarray] = None
    channel_names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[None, :]
        if values.ndim != 2 or values.shape[1] < 1 or values.shape[0] < 1:
            raise ShapeError(f"values must be a non-empty (c, T) matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise ValueError(f"non-finite value at channel {bad[0]}, step {bad[1]}")
        object.__setattr__(self, "values", _frozen(values))

        if self.timestamps is not None:
            ts = np.array(self.timestamps)
            if ts.shape != (values.shape[1],):
                raise ShapeError(f"expected {values.shape[1]} timestamps, got {ts.shape[0]}")
            if ts.size > 1 and not np.all(ts[1:] > ts[:-1]):
                raise ValueError("timestamps must be strictly increasing")
            object.__setattr__(self, "timestamps", _frozen(ts))

        if self.channel_names is not None:
            names = tuple(str(n) for n in self.channel_names)
            if len(names) != values.shape[0]:
                raise ShapeError(f"expected {values.shape[0]} channel names, got {len(names)}")
            object.__setattr__(self, "channel_names", names)

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]

    def slice_steps(self, start: int, stop: int) -> "MultivariateSeries":
        ts = None if self.timestamps is None else self.timestamps[start:stop]
        return MultivariateSeries(self.values[:, start:stop], ts, self.channel_names)


@dataclass(frozen=True)
class WindowPair:
    """Aligned history/future slices of one series.

    ``history`` has shape ``(c, d)`` and ``future`` has shape ``(c, h)``.
    """

    history: np.ndarray
    future: np.ndarray
    source_offset: int = 0

    def __post_init__(self):
        hist = np.array(self.history, dtype=np.float64)
        fut = np.array(self.future, dtype=np.float64)
        if hist.ndim != 2 or fut.ndim != 2:
            raise ShapeError("history and future must be 2-d (channels, steps)")
        if hist.shape[0] != fut.shape[0]:
            raise ShapeError(f"channel mismatch: history has {hist.shape[0]}, future has {fut.shape[0]}")
        if hist.shape[1] < 1 or fut.shape[1] < 1:
            raise ShapeError("history and future need at least one step each")
        object.__setattr__(self, "history", _frozen(hist))
        object.__setattr__(self, "future", _frozen(fut))
        object.__setattr__(self, "source_offset", int(self.source_offset))

    @property
    def n_channels(self) -> int:
        return self.history.shape[0]

    @property
    def d(self) -> int:
        return self.history.shape[1]

    @property
    def h(self) -> int:
        return self.future.shape[1]

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_channels, self.d, self.h)

    def full(self) -> np.ndarray:
        """History and future concatenated along time, shape ``(c, d + h)``."""
        return np.concatenate([self.history, self.future], axis=1)

    @classmethod
    def from_full(cls, values: np.ndarray, d: int, source_offset: int = 0) -> "WindowPair":
        values = np.asarray(values, dtype=np.float64)
        return cls(values[:, :d], values[:, d:], source_offset)


def slice_window(series: MultivariateSeries, offset: int, d: int, h: int) -> WindowPair:
    T = series.length
    if offset < 0:
        raise WindowBoundsError(f"offset must be >= 0, got {offset}")
    if d < 1 or h < 1:
        raise WindowBoundsError(f"d and h must be >= 1, got d={d}, h={h}")
    if offset + d + h > T:
        raise WindowBoundsError(
            f"offset + d + h <= T violated: {offset} + {d} + {h} = {offset + d + h} > {T}"
        )
    v = series.values
    return WindowPair(v[:, offset:offset + d].copy(), v[:, offset + d:offset + d + h].copy(), offset)


def enumerate_windows(series: MultivariateSeries, d: int, h: int, stride: int = 1) -> list[WindowPair]:
    """All windows at offsets ``0, stride, 2*stride, ...`` that fit in the series."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    last = series.length - d - h
    if last < 0:
        return []
    return [slice_window(series, off, d, h) for off in range(0, last + 1, stride)]


def count_windows(T: int, d: int, h: int, stride: int = 1) -> int:
    return max(0, (T - d - h) // stride + 1)


def stack_windows(windows: Sequence[WindowPair]) -> tuple[np.ndarray, np.ndarray]:
    """Stack windows into ``(N, c, d)`` history and ``(N, c, h)`` future arrays."""
    return (np.stack([w.history for w in windows]), np.stack([w.future for w in windows]))
