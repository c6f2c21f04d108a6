"""Reference augmentations: moving-average filtering and segment permutation.

Filtering is deterministic (one synthetic sample per window); permutation is
diverse but destroys temporal order.
"""

from __future__ import annotations

import numpy as np

from .sampling import ConfigError, RandomSource
from .series import WindowPair


def _moving_average(values: np.ndarray, kernel: int) -> np.ndarray:
    half = kernel // 2
    padded = np.pad(values, ((0, 0), (half, half)), mode="edge")
    csum = np.cumsum(padded, axis=1)
    csum = np.concatenate([np.zeros((values.shape[0], 1)), csum], axis=1)
    return (csum[:, kernel:] - csum[:, :-kernel]) / kernel


def moving_average_filter(window: WindowPair, kernel: int) -> WindowPair:
    """Centered moving average of history and future separately, edges replicated."""
    if kernel < 1 or kernel % 2 == 0:
        raise ConfigError(f"kernel must be odd and >= 1, got {kernel}")
    if kernel > min(window.d, window.h):
        raise ConfigError(f"kernel {kernel} exceeds min(d, h) = {min(window.d, window.h)}")
    if kernel == 1:
        return window
    return WindowPair(
        _moving_average(window.history, kernel),
        _moving_average(window.future, kernel),
        window.source_offset,
    )


def _permute_blocks(values: np.ndarray, n_segments: int, rng: RandomSource) -> np.ndarray:
    blocks = np.array_split(np.arange(values.shape[1]), n_segments)
    order = rng.permutation(n_segments)
    idx = np.concatenate([blocks[k] for k in order])
    return values[:, idx]


def segment_permutation(window: WindowPair, n_segments: int, rng: RandomSource) -> WindowPair:
    """Shuffle contiguous blocks of history and of future, independently.

    All channels share the block order so cross-channel alignment survives.
    A future shorter than ``n_segments`` simply gets some empty blocks.
    """
    if not 1 <= n_segments <= window.d:
        raise ConfigError(f"n_segments must be in [1, {window.d}], got {n_segments}")
    if n_segments == 1:
        return window
    return WindowPair(
        _permute_blocks(window.history, n_segments, rng),
        _permute_blocks(window.future, n_segments, rng),
        window.source_offset,
    )
