"""Spectral-and-temporal augmentation of forecasting windows.

Each training sample is built by decomposing two windows into IMFs,
reassembling each with random weights, then mixing the two results with a
Beta-distributed coefficient shared by history, future and all channels.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .emd import ChannelDecomposition, Decomposition, EmdConfig, decompose_window
from .sampling import ConfigError, RandomSource, WeightVector, draw_lambda, draw_weights
from .series import ShapeError, WindowPair

logger = logging.getLogger(__name__)

RESIDUE_POLICIES = ("fixed_one", "weighted", "dropped")


class CacheMissError(KeyError):
    def __str__(self):
        return f"no decomposition cached for {self.args[0]!r}; run precompute() over the training windows first"


@dataclass(frozen=True)
class AugmentConfig:
    weight_low: float = 0.0
    weight_high: float = 2.0
    alpha: float = 0.5
    include_residue: str = "fixed_one"
    enable_freq: bool = True
    enable_time: bool = True

    def __post_init__(self):
        if not self.weight_low < self.weight_high:
            raise ConfigError(f"need weight_low < weight_high, got {self.weight_low} >= {self.weight_high}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if self.include_residue not in RESIDUE_POLICIES:
            raise ConfigError(f"include_residue must be one of {RESIDUE_POLICIES}, got {self.include_residue!r}")

    def to_dict(self) -> dict:
        return asdict(self)


class DecompositionCache:
    """Write-once map from ``(series_id, window offset)`` to a decomposition."""

    def __init__(self, series_id: str = "train"):
        self.series_id = series_id
        self._entries: dict[tuple[str, int], Decomposition] = {}
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._entries)

    def __contains__(self, key):
        return key in self._entries

    def key(self, window: WindowPair) -> tuple[str, int]:
        return (self.series_id, window.source_offset)

    def put(self, window: WindowPair, dec: Decomposition) -> None:
        self._entries[self.key(window)] = dec

    def get(self, window: WindowPair) -> Decomposition:
        key = self.key(window)
        try:
            dec = self._entries[key]
        except KeyError:
            self.misses += 1
            raise CacheMissError(key) from None
        self.hits += 1
        return dec

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 1.0


def _decompose_one(args):
    window, part, cfg = args
    return decompose_window(window, part, cfg)


def precompute(
    dataset: Sequence[WindowPair],
    cfg: EmdConfig = EmdConfig(),
    *,
    part: str = "full",
    cache: Optional[DecompositionCache] = None,
    jobs: int = 1,
) -> DecompositionCache:
    """Decompose every window not already in ``cache``.

    Output does not depend on ``jobs``: each window is decomposed independently.
    """
    cache = cache if cache is not None else DecompositionCache()
    todo = [w for w in dataset if cache.key(w) not in cache]
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            decs = list(pool.map(_decompose_one, [(w, part, cfg) for w in todo], chunksize=16))
    else:
        decs = [decompose_window(w, part, cfg) for w in todo]
    for w, dec in zip(todo, decs):
        cache.put(w, dec)
    logger.debug("precomputed %d decompositions (%d cached)", len(todo), len(cache))
    return cache


def recombine(dec: ChannelDecomposition, w: WeightVector, policy: str = "fixed_one") -> np.ndarray:
    """Weighted sum of IMFs, with the residue handled per ``policy``."""
    if len(w) != dec.n_imfs:
        raise ShapeError(f"{len(w)} weights for {dec.n_imfs} IMFs")
    if policy not in RESIDUE_POLICIES:
        raise ConfigError(f"unknown residue policy {policy!r}")
    out = w.weights @ dec.imf_matrix if dec.n_imfs else np.zeros(dec.source_length)
    if policy == "fixed_one":
        out += dec.residue
    elif policy == "weighted":
        out += w.residue_weight * dec.residue
    return out


def _channel_weights(n: int, cfg: AugmentConfig, rng: RandomSource) -> WeightVector:
    if cfg.include_residue == "weighted":
        drawn = draw_weights(n + 1, cfg.weight_low, cfg.weight_high, rng)
        return WeightVector(drawn.weights[:n], float(drawn.weights[n]))
    return draw_weights(n, cfg.weight_low, cfg.weight_high, rng)


def freq_augment(
    window: WindowPair,
    dec: Decomposition,
    cfg: AugmentConfig,
    rng: RandomSource,
    *,
    weights_out: Optional[list] = None,
) -> WindowPair:
    """Recombine each channel's IMFs with fresh random weights.

    ``dec`` may cover the full window or only its history; in the latter case
    the future is passed through untouched. Drawn weight vectors are appended
    to ``weights_out`` when given.
    """
    if not cfg.enable_freq:
        return window
    c, d, h = window.shape
    if len(dec.channels) != c:
        raise ShapeError(f"decomposition has {len(dec.channels)} channels, window has {c}")
    if dec.source_length not in (d + h, d) or (dec.source_length == d and dec.part != "history"):
        raise ShapeError(f"decomposition length {dec.source_length} does not match window d={d}, h={h}")

    rows = []
    for ch in dec.channels:
        wv = _channel_weights(ch.n_imfs, cfg, rng)
        if weights_out is not None:
            weights_out.append(wv)
        rows.append(recombine(ch, wv, cfg.include_residue))
    values = np.vstack(rows)
    if dec.part == "history":
        return WindowPair(values, window.future, window.source_offset)
    return WindowPair.from_full(values, d, window.source_offset)


def mixup(wp_i: WindowPair, wp_j: WindowPair, lam: float) -> WindowPair:
    """Convex combination ``lam * wp_i + (1 - lam) * wp_j`` of history and future."""
    if wp_i.shape != wp_j.shape:
        raise ShapeError(f"cannot mix windows of shape {wp_i.shape} and {wp_j.shape}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if lam == 1.0:
        return wp_i
    if lam == 0.0:
        return WindowPair(wp_j.history, wp_j.future, wp_i.source_offset)
    hist = lam * wp_i.history + (1.0 - lam) * wp_j.history
    fut = lam * wp_i.future + (1.0 - lam) * wp_j.future
    return WindowPair(hist, fut, wp_i.source_offset)


@dataclass
class SampleTrace:
    """What went into one augmented sample; used for audit manifests."""

    index_i: int
    index_j: Optional[int] = None
    lam: Optional[float] = None
    weights_i: Optional[list] = None
    weights_j: Optional[list] = None

    def to_dict(self) -> dict:
        def ws(v):
            if v is None:
                return None
            return [{"weights": wv.weights.tolist(), "residue_weight": wv.residue_weight} for wv in v]

        return {
            "index_i": self.index_i,
            "index_j": self.index_j,
            "lambda": self.lam,
            "weights_i": ws(self.weights_i),
            "weights_j": ws(self.weights_j),
        }


def staug_sample(
    index_i: int,
    dataset: Sequence[WindowPair],
    cache: Optional[DecompositionCache],
    cfg: AugmentConfig,
    rng: RandomSource,
    trace: Optional[SampleTrace] = None,
) -> WindowPair:
    """Build one augmented training window from window ``index_i``.

    Draw order from ``rng``: partner index, window-i weights, window-j weights,
    then lambda. Stages that are disabled draw nothing.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    wi = dataset[index_i]
    if trace is not None:
        trace.index_i = index_i
    if not cfg.enable_freq and not cfg.enable_time:
        return wi

    def spectral(w: WindowPair, sink):
        if not cfg.enable_freq:
            return w
        if cache is None:
            raise CacheMissError((None, w.source_offset))
        return freq_augment(w, cache.get(w), cfg, rng, weights_out=sink)

    if not cfg.enable_time:
        sink = [] if trace is not None else None
        out = spectral(wi, sink)
        if trace is not None:
            trace.weights_i = sink
        return out

    j = int(rng.integers(0, len(dataset)))
    sink_i = [] if trace is not None else None
    sink_j = [] if trace is not None else None
    si = spectral(wi, sink_i)
    sj = spectral(dataset[j], sink_j)
    lam = draw_lambda(cfg.alpha, rng)
    if trace is not None:
        trace.index_j, trace.lam = j, lam
        trace.weights_i, trace.weights_j = sink_i, sink_j
    return mixup(si, sj, lam)


class Augmenter:
    """Callable used by the training loop: ``augmenter(index, key) -> WindowPair``.

    ``key`` identifies the draw (epoch, position) so that each sample gets
    its own child random source and results do not depend on call order.
    """

    def __init__(self, dataset: Sequence[WindowPair], cache: Optional[DecompositionCache], cfg: AugmentConfig, rng: RandomSource):
        self.dataset = dataset
        self.cache = cache
        self.cfg = cfg
        self.rng = rng

    def __call__(self, index: int, key: Iterable[int] = ()) -> WindowPair:
        return staug_sample(index, self.dataset, self.cache, self.cfg, self.rng.child(*key, index))
