"""Empirical Mode Decomposition by sifting.

A signal is split into intrinsic mode functions (highest frequency first)
and a residue such that ``signal == sum(imfs) + residue`` up to rounding:
the residue is always recomputed as ``signal - sum(imfs)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_banded

from .series import WindowPair

logger = logging.getLogger(__name__)

PARTS = ("full", "history", "future")

STOP_FEW_EXTREMA = "few_extrema"
STOP_LOW_ENERGY = "low_energy"
STOP_MAX_IMFS = "max_imfs"


class DegenerateEnvelopeError(ValueError):
    """Fewer than two extrema: no envelope can be fitted."""


@dataclass(frozen=True)
class EmdConfig:
    sd_threshold: float = 0.2
    max_sift_iters: int = 10
    max_imfs: int = 10
    residue_energy_ratio: float = 1e-10
    boundary_extrema: int = 2

    def __post_init__(self):
        if not self.sd_threshold > 0:
            raise ValueError(f"sd_threshold must be > 0, got {self.sd_threshold}")
        if self.max_sift_iters < 1:
            raise ValueError(f"max_sift_iters must be >= 1, got {self.max_sift_iters}")
        if self.max_imfs < 1:
            raise ValueError(f"max_imfs must be >= 1, got {self.max_imfs}")
        if not 0 < self.residue_energy_ratio < 1:
            raise ValueError(f"residue_energy_ratio must be in (0, 1), got {self.residue_energy_ratio}")
        if self.boundary_extrema < 0:
            raise ValueError(f"boundary_extrema must be >= 0, got {self.boundary_extrema}")


@dataclass
class ChannelDecomposition:
    imfs: list[np.ndarray]
    residue: np.ndarray
    stop_reason: str = STOP_FEW_EXTREMA

    @property
    def source_length(self) -> int:
        return self.residue.size

    @property
    def n_imfs(self) -> int:
        return len(self.imfs)

    @property
    def imf_matrix(self) -> np.ndarray:
        """IMFs stacked as rows, shape ``(n_imfs, L)``; built once and reused."""
        m = self.__dict__.get("_imf_matrix")
        if m is None or m.shape[0] != len(self.imfs):
            m = np.array(self.imfs, dtype=np.float64).reshape(len(self.imfs), self.residue.size)
            m.setflags(write=False)
            self.__dict__["_imf_matrix"] = m
        return m

    def reconstruct(self) -> np.ndarray:
        if not self.imfs:
            return self.residue.copy()
        return np.sum(self.imfs, axis=0) + self.residue

    def as_matrix(self) -> np.ndarray:
        """Rows ``imf_1 .. imf_n, residue``."""
        return np.vstack(self.imfs + [self.residue])


@dataclass
class Decomposition:
    channels: list[ChannelDecomposition]
    part: str = "full"

    def __post_init__(self):
        lengths = {ch.source_length for ch in self.channels}
        if len(lengths) > 1:
            raise ValueError(f"channels disagree on length: {sorted(lengths)}")

    @property
    def source_length(self) -> int:
        return self.channels[0].source_length if self.channels else 0

    def reconstruct(self) -> np.ndarray:
        return np.vstack([ch.reconstruct() for ch in self.channels])


def find_extrema(signal) -> tuple[np.ndarray, np.ndarray]:
    """Indices of local maxima and minima.

    A flat run bounded by lower (higher) values on both sides counts as one
    maximum (minimum) at its midpoint, rounded down. Runs touching either end
    of the signal are never extrema.
    """
    x = np.asarray(signal, dtype=np.float64)
    empty = np.zeros(0, dtype=np.int64)
    if x.size < 3:
        return empty, empty
    # run-length encode so plateaus collapse to a single value
    starts = np.flatnonzero(np.concatenate(([True], x[1:] != x[:-1])))
    ends = np.concatenate((starts[1:] - 1, [x.size - 1]))
    vals = x[starts]
    if vals.size < 3:
        return empty, empty
    mid, prev, nxt = vals[1:-1], vals[:-2], vals[2:]
    centers = (starts[1:-1] + ends[1:-1]) // 2
    maxima = centers[(mid > prev) & (mid > nxt)]
    minima = centers[(mid < prev) & (mid < nxt)]
    return maxima.astype(np.int64), minima.astype(np.int64)


def count_zero_crossings(signal) -> int:
    """Sign changes, ignoring exact zeros."""
    x = np.asarray(signal, dtype=np.float64)
    s = np.sign(x)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def natural_cubic_spline(knots, values, at) -> np.ndarray:
    """Evaluate the natural cubic spline through ``(knots, values)`` at ``at``.

    ``knots`` must be strictly increasing. Points outside the knot span are
    extrapolated with the end polynomial pieces.
    """
    x = np.asarray(knots, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    t = np.asarray(at, dtype=np.float64)
    n = x.size
    if n < 2:
        raise DegenerateEnvelopeError(f"need at least 2 knots, got {n}")
    dx = np.diff(x)
    slope = np.diff(y) / dx
    m = np.zeros(n)  # second derivatives; zero at both ends
    if n > 2:
        ab = np.zeros((3, n - 2))
        ab[0, 1:] = dx[1:-1]
        ab[1] = 2.0 * (dx[:-1] + dx[1:])
        ab[2, :-1] = dx[1:-1]
        m[1:-1] = solve_banded((1, 1), ab, 6.0 * np.diff(slope))
    i = np.clip(np.searchsorted(x, t, side="right") - 1, 0, n - 2)
    h = dx[i]
    a = t - x[i]
    b = x[i + 1] - t
    return (m[i] * b**3 + m[i + 1] * a**3) / (6.0 * h) + (y[i] / h - m[i] * h / 6.0) * b + (y[i + 1] / h - m[i + 1] * h / 6.0) * a


def _mirrored_knots(idx: np.ndarray, L: int, n_mirror: int) -> np.ndarray:
    if n_mirror == 0:
        return idx
    left = -idx[:n_mirror][::-1]
    right = 2 * (L - 1) - idx[-n_mirror:][::-1]
    knots = np.concatenate((left, idx, right))
    # an extremum sitting on the end maps onto itself
    return np.unique(knots)


def envelope(signal, extrema_indices, cfg: EmdConfig = EmdConfig()) -> np.ndarray:
    """Natural cubic spline through the extrema, evaluated at ``0..L-1``.

    ``cfg.boundary_extrema`` extrema are reflected about each end of the
    signal before fitting to keep the spline from swinging at the edges.
    """
    x = np.asarray(signal, dtype=np.float64)
    idx = np.unique(np.asarray(extrema_indices, dtype=np.int64))
    if idx.size < 2:
        raise DegenerateEnvelopeError(f"need at least 2 extrema, got {idx.size}")
    L = x.size
    knots = _mirrored_knots(idx, L, cfg.boundary_extrema)
    # reflected knot k takes the value at its source index
    src = np.where(knots < 0, -knots, np.where(knots > L - 1, 2 * (L - 1) - knots, knots))
    return natural_cubic_spline(knots, x[src], np.arange(L, dtype=np.float64))


def mean_envelope(signal, cfg: EmdConfig = EmdConfig()) -> np.ndarray:
    maxima, minima = find_extrema(signal)
    upper = envelope(signal, maxima, cfg)
    lower = envelope(signal, minima, cfg)
    return 0.5 * (upper + lower)


class SiftResult(NamedTuple):
    imf: np.ndarray
    iterations: int
    terminated: bool


def can_sift(signal) -> bool:
    maxima, minima = find_extrema(signal)
    return maxima.size >= 2 and minima.size >= 2


def sift(signal, cfg: EmdConfig = EmdConfig()) -> SiftResult:
    """Extract one candidate IMF.

    Stops once the Cauchy criterion ``sum((h_prev - h)**2) / sum(h_prev**2)``
    is below ``cfg.sd_threshold`` and the candidate's zero-crossing and
    extrema counts differ by at most one, or after ``cfg.max_sift_iters``
    passes. ``terminated`` is set when an envelope became degenerate mid-way.
    """
    h = np.array(signal, dtype=np.float64)
    if not can_sift(h):
        raise DegenerateEnvelopeError("sifting needs at least 2 maxima and 2 minima")
    for it in range(1, cfg.max_sift_iters + 1):
        try:
            m = mean_envelope(h, cfg)
        except DegenerateEnvelopeError:
            return SiftResult(h, it - 1, True)
        denom = float(np.dot(h, h))
        sd = float(np.dot(m, m)) / denom if denom > 0 else 0.0
        h = h - m
        if sd < cfg.sd_threshold and is_oscillatory(h):
            return SiftResult(h, it, False)
    return SiftResult(h, cfg.max_sift_iters, False)


def is_oscillatory(signal) -> bool:
    """Zero-crossing and extrema counts differ by at most one."""
    maxima, minima = find_extrema(signal)
    return abs(count_zero_crossings(signal) - (maxima.size + minima.size)) <= 1


def decompose(signal, cfg: EmdConfig = EmdConfig()) -> ChannelDecomposition:
    x = np.array(signal, dtype=np.float64).reshape(-1)
    energy0 = float(np.dot(x, x))
    imfs: list[np.ndarray] = []
    residue = x.copy()
    while True:
        if len(imfs) >= cfg.max_imfs:
            reason = STOP_MAX_IMFS
            break
        maxima, minima = find_extrema(residue)
        if maxima.size + minima.size < 4 or maxima.size < 2 or minima.size < 2:
            reason = STOP_FEW_EXTREMA
            break
        if float(np.dot(residue, residue)) < cfg.residue_energy_ratio * energy0:
            reason = STOP_LOW_ENERGY
            break
        result = sift(residue, cfg)
        if result.terminated:
            logger.debug("sifting stopped on a degenerate envelope after %d passes", result.iterations)
        imfs.append(result.imf)
        residue = x - np.sum(imfs, axis=0)
    return ChannelDecomposition(imfs, residue, reason)


def _select(window: WindowPair, part: str) -> np.ndarray:
    if part == "full":
        return window.full()
    if part == "history":
        return window.history
    if part == "future":
        return window.future
    raise ValueError(f"part must be one of {PARTS}, got {part!r}")


def decompose_window(window: WindowPair, part: str = "full", cfg: EmdConfig = EmdConfig()) -> Decomposition:
    """Decompose every channel of the selected window slice independently."""
    values = _select(window, part)
    return Decomposition([decompose(row, cfg) for row in values], part)


def imf_oscillation_defects(dec: ChannelDecomposition) -> list[int]:
    """Indices of IMFs (with >= 4 extrema) whose zero-crossing and extrema counts differ by more than one."""
    bad = []
    for i, imf in enumerate(dec.imfs):
        maxima, minima = find_extrema(imf)
        n_ext = maxima.size + minima.size
        if n_ext >= 4 and abs(count_zero_crossings(imf) - n_ext) > 1:
            bad.append(i)
    return bad
