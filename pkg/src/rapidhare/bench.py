"""Single-thread per-frame latency measurement for both predictors.

Frames are pre-materialized in memory so the timed path is exactly the
per-frame inference loop, never parsing or I/O. Block decoding is charged
per frame by dividing each block's wall time by its length.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .gmm import ActivityModelSet
from .hmm import HmmConfig, TransitionMatrix, default_transition_matrix, viterbi_block
from .predictor import PredictorConfig, PredictorSession

BENCH_METHODS = ("rapidhare", "hmm")


@dataclass(frozen=True)
class BenchStats:
    """Per-frame latency summary in microseconds."""

    mean_us: float
    std_us: float
    p99_us: float
    frames: int
    repeats: int
    method: str


def _bench_frames(dim: int, frames: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=(frames, dim))


def _time_rapidhare(models, cfg, X) -> np.ndarray:
    session = PredictorSession(models, cfg)
    samples = np.empty(len(X))
    clock = time.perf_counter
    for i, x in enumerate(X):
        t0 = clock()
        session.push_frame(x)
        samples[i] = clock() - t0
    return samples


def _time_hmm(models, trans, hmm_cfg, X) -> np.ndarray:
    samples = np.empty(len(X))
    clock = time.perf_counter
    prior = np.asarray(hmm_cfg.initial_probs, dtype=np.float64)
    w = hmm_cfg.window_w
    for lo in range(0, len(X), w):
        block = X[lo : lo + w]
        t0 = clock()
        path = viterbi_block(models, trans, prior, block)
        dt = clock() - t0
        samples[lo : lo + len(block)] = dt / len(block)
        prior = trans.probs[int(path[-1]) - 1]
    return samples


def run_bench(
    models: ActivityModelSet,
    method: str = "rapidhare",
    frames: int = 2000,
    repeats: int = 5,
    pred_cfg: PredictorConfig = PredictorConfig(),
    trans: TransitionMatrix | None = None,
    hmm_cfg: HmmConfig = HmmConfig(),
    seed: int = 0,
) -> BenchStats:
    """Measure mean/std/p99 per-frame wall time over several passes of a fixed stream.

    The mean and std summarize per-repeat means; the p99 pools every
    individual per-frame sample across repeats.
    """
    if frames <= 0:
        raise DataError("frames must be positive")
    if repeats <= 0:
        raise DataError("repeats must be positive")
    if method not in BENCH_METHODS:
        raise DataError(f"unknown bench method: {method!r}")
    trans = default_transition_matrix() if trans is None else trans
    X = _bench_frames(models.dim, frames, seed)

    runner = {
        "rapidhare": lambda: _time_rapidhare(models, pred_cfg, X),
        "hmm": lambda: _time_hmm(models, trans, hmm_cfg, X),
    }[method]

    runner()  # warm-up pass, untimed
    all_samples = []
    repeat_means = []
    for _ in range(repeats):
        samples = runner()
        all_samples.append(samples)
        repeat_means.append(samples.mean())
    pooled = np.concatenate(all_samples)
    return BenchStats(
        mean_us=float(np.mean(repeat_means) * 1e6),
        std_us=float(np.std(repeat_means) * 1e6),
        p99_us=float(np.percentile(pooled, 99) * 1e6),
        frames=frames,
        repeats=repeats,
        method=method,
    )
