"""Spectral and time augmentation (EMD recombination + mix-up) for time-series forecasting."""

__version__ = "0.1.0"

from .augment import AugmentConfig, Augmenter, DecompositionCache, freq_augment, mixup, precompute, recombine, staug_sample
from .emd import ChannelDecomposition, Decomposition, EmdConfig, decompose, decompose_window, envelope, find_extrema, sift
from .forecaster import LinearForecastModel, TrainConfig, evaluate, predict, train
from .sampling import RandomSource, WeightVector, draw_lambda, draw_weights
from .series import MultivariateSeries, WindowPair, enumerate_windows, slice_window

__all__ = [
    "AugmentConfig", "Augmenter", "DecompositionCache", "freq_augment", "mixup", "precompute", "recombine",
    "staug_sample", "ChannelDecomposition", "Decomposition", "EmdConfig", "decompose", "decompose_window",
    "envelope", "find_extrema", "sift", "LinearForecastModel", "TrainConfig", "evaluate", "predict", "train",
    "RandomSource", "WeightVector", "draw_lambda", "draw_weights", "MultivariateSeries", "WindowPair",
    "enumerate_windows", "slice_window",
]
