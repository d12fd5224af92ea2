"""Diagonal-covariance Gaussian mixtures: density evaluation and EM training.

One mixture models the frame distribution of one activity. Densities are
always evaluated in the log domain through log-sum-exp, and training floors
every variance so the log-density stays finite for any finite input.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .data import ALL_LABELS, ActivityLabel
from .errors import DataError, NumericError

DEFAULT_VARIANCE_FLOOR = 1e-6
_LOG_2PI = float(np.log(2.0 * np.pi))

# Per-activity component counts used by default: many components for dynamic
# activities, few for static ones.
DEFAULT_COMPONENT_COUNTS: dict[ActivityLabel, int] = {
    ActivityLabel.WALKING: 18,
    ActivityLabel.RUNNING: 18,
    ActivityLabel.GOING_UP: 16,
    ActivityLabel.GOING_DOWN: 16,
    ActivityLabel.SITTING: 2,
    ActivityLabel.SITTING_DOWN: 7,
    ActivityLabel.STANDING_UP: 5,
    ActivityLabel.STANDING: 4,
}


@dataclass(frozen=True)
class GmmModel:
    """One mixture of axis-aligned Gaussians: weights, means, diagonal variances."""

    weights: np.ndarray  # (k,), positive, sums to 1
    means: np.ndarray  # (k, dim)
    variances: np.ndarray  # (k, dim), positive

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.asarray(self.means, dtype=np.float64)
        v = np.asarray(self.variances, dtype=np.float64)
        if m.ndim != 2 or len(m) == 0 or w.shape != (len(m),) or v.shape != m.shape:
            raise DataError("inconsistent mixture parameter shapes")
        if not (np.isfinite(w).all() and np.isfinite(m).all() and np.isfinite(v).all()):
            raise DataError("mixture parameters must be finite")
        if (w <= 0).any() or abs(float(w.sum()) - 1.0) > 1e-12:
            raise DataError("mixture weights must be positive and sum to 1")
        if (v <= 0).any():
            raise DataError("mixture variances must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @cached_property
    def _log_norm(self) -> np.ndarray:
        """log w_j - 0.5 * sum_d log(2 pi var_jd), per component."""
        return np.log(self.weights) - 0.5 * np.sum(_LOG_2PI + np.log(self.variances), axis=1)


def log_pdf(model: GmmModel, x) -> float:
    """Log mixture density at one point, via log-sum-exp over components."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dim,):
        raise DataError(f"expected a length-{model.dim} vector, got shape {x.shape}")
    diff = x - model.means
    comp = model._log_norm - 0.5 * ((diff * diff) / model.variances).sum(axis=1)
    m = comp.max()
    return float(m + np.log(np.exp(comp - m).sum()))


def _component_log_density(means, variances, log_norm, X, chunk=2048):
    """Per-row, per-component log densities, chunked to bound temporary memory."""
    n = len(X)
    out = np.empty((n, len(means)))
    for lo in range(0, n, chunk):
        sub = X[lo : lo + chunk]
        diff = sub[:, None, :] - means[None, :, :]
        out[lo : lo + chunk] = log_norm - 0.5 * ((diff * diff) / variances).sum(axis=2)
    return out


def log_pdf_batch(model: GmmModel, X) -> np.ndarray:
    """Log mixture density for every row of X."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise DataError(f"expected an (n, {model.dim}) matrix, got shape {X.shape}")
    comp = _component_log_density(model.means, model.variances, model._log_norm, X)
    m = comp.max(axis=1)
    return m + np.log(np.exp(comp - m[:, None]).sum(axis=1))


def _pairwise_sq_dists(X, centers, chunk=4096):
    n = len(X)
    out = np.empty((n, len(centers)))
    for lo in range(0, n, chunk):
        sub = X[lo : lo + chunk]
        diff = sub[:, None, :] - centers[None, :, :]
        out[lo : lo + chunk] = (diff * diff).sum(axis=2)
    return out


def _kmeans_pp_seeds(data, k, rng):
    n = len(data)
    centers = np.empty((k, data.shape[1]))
    centers[0] = data[rng.integers(n)]
    d2 = ((data - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)  # all remaining mass at the centers already
        centers[j] = data[idx]
        d2 = np.minimum(d2, ((data - centers[j]) ** 2).sum(axis=1))
    return centers


def _validate_training_data(data, k) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or len(data) == 0:
        raise DataError("training data must be a non-empty 2-D array")
    if not np.isfinite(data).all():
        raise DataError("training data contains non-finite values")
    if k < 1:
        raise DataError("component count must be positive")
    if k > len(data):
        raise DataError(f"k={k} exceeds the {len(data)} available rows")
    return data


def kmeans_init(data, k: int, seed: int, variance_floor: float = DEFAULT_VARIANCE_FLOOR,
                max_iters: int = 100) -> GmmModel:
    """k-means++ seeding plus Lloyd iterations; the result seeds EM.

    Means are the final centroids, variances the per-dimension within-cluster
    spread (floored), weights the cluster occupancies. Empty clusters are
    reseeded from the point farthest from its assigned centroid, so every
    component keeps positive weight. Deterministic for a fixed seed.
    """
    data = _validate_training_data(data, k)
    n = len(data)
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_seeds(data, k, rng)
    assign = np.zeros(n, dtype=np.intp)
    for _ in range(max_iters):
        dists = _pairwise_sq_dists(data, centers)
        assign = dists.argmin(axis=1)
        d2min = dists[np.arange(n), assign]
        for j in range(k):
            if not (assign == j).any():
                far = int(np.argmax(d2min))
                assign[far] = j
                d2min[far] = -1.0
        new_centers = np.empty_like(centers)
        for j in range(k):
            new_centers[j] = data[assign == j].mean(axis=0)
        if np.array_equal(new_centers, centers):
            break
        centers = new_centers

    counts = np.bincount(assign, minlength=k)
    weights = counts / n
    means = np.empty_like(centers)
    variances = np.empty_like(centers)
    for j in range(k):
        members = data[assign == j]
        means[j] = members.mean(axis=0)
        variances[j] = np.maximum(members.var(axis=0), variance_floor)
    return GmmModel(weights / weights.sum(), means, variances)


@dataclass(frozen=True)
class EmConfig:
    """Stopping rule, regularization, and seeding for EM training."""

    max_iters: int = 200
    tol: float = 1e-6  # relative log-likelihood improvement
    seed: int = 1
    variance_floor: float = DEFAULT_VARIANCE_FLOOR
    n_init_restarts: int = 1

    def __post_init__(self):
        if self.max_iters < 1 or self.tol <= 0 or self.variance_floor <= 0:
            raise DataError("EM configuration values must be positive")
        if self.n_init_restarts < 1:
            raise DataError("n_init_restarts must be positive")
        if self.seed < 0:
            raise DataError("seed must be non-negative")


def _em(data, init: GmmModel, cfg: EmConfig, rng) -> tuple[GmmModel, list[float]]:
    n = len(data)
    weights = init.weights.copy()
    means = init.means.copy()
    variances = init.variances.copy()
    trace: list[float] = []
    prev = -np.inf
    for it in range(cfg.max_iters):
        log_norm = np.log(weights) - 0.5 * np.sum(_LOG_2PI + np.log(variances), axis=1)
        comp = _component_log_density(means, variances, log_norm, data)
        rowmax = comp.max(axis=1)
        shifted = np.exp(comp - rowmax[:, None])
        rowsum = shifted.sum(axis=1)
        ll = float((rowmax + np.log(rowsum)).sum())
        if not np.isfinite(ll):
            raise NumericError("log-likelihood became non-finite during EM")
        trace.append(ll)
        if it > 0 and (ll - prev) < cfg.tol * max(abs(prev), 1e-12):
            break
        if it == cfg.max_iters - 1:
            break
        prev = ll

        resp = shifted / rowsum[:, None]
        nk = resp.sum(axis=0)
        safe_nk = np.maximum(nk, 1e-300)
        means = (resp.T @ data) / safe_nk[:, None]
        ex2 = (resp.T @ (data * data)) / safe_nk[:, None]
        variances = np.maximum(ex2 - means * means, cfg.variance_floor)
        weights = nk / n
        # Starved components restart from a random data point.
        tiny = nk < 1e-10 * n
        if tiny.any():
            for j in np.flatnonzero(tiny):
                means[j] = data[rng.integers(n)]
                variances[j] = cfg.variance_floor
                weights[j] = 1.0 / n
        weights = weights / weights.sum()
    return GmmModel(weights, means, variances), trace


def fit_em_trace(data, k: int, cfg: EmConfig = EmConfig()) -> tuple[GmmModel, list[float]]:
    """EM from a k-means++ start, returning the per-iteration log-likelihoods.

    With several restarts, the fit with the best final log-likelihood wins.
    """
    data = _validate_training_data(data, k)
    best: tuple[GmmModel, list[float]] | None = None
    for r in range(cfg.n_init_restarts):
        seed = cfg.seed + 9973 * r
        init = kmeans_init(data, k, seed=seed, variance_floor=cfg.variance_floor)
        fitted = _em(data, init, cfg, np.random.default_rng(seed))
        if best is None or fitted[1][-1] > best[1][-1]:
            best = fitted
    return best


def fit_em(data, k: int, cfg: EmConfig = EmConfig()) -> tuple[GmmModel, float]:
    """Fit a diagonal-covariance mixture by EM; returns the model and its final log-likelihood."""
    model, trace = fit_em_trace(data, k, cfg)
    return model, trace[-1]


@dataclass(frozen=True)
class ActivityModelSet:
    """One trained mixture per activity, all sharing a feature dimensionality."""

    models: dict[ActivityLabel, GmmModel]

    def __post_init__(self):
        if set(self.models) != set(ALL_LABELS):
            raise DataError("a model set needs exactly one mixture per activity")
        dims = {m.dim for m in self.models.values()}
        if len(dims) != 1:
            raise DataError("all activity mixtures must share one dimensionality")

    @property
    def dim(self) -> int:
        return next(iter(self.models.values())).dim

    @property
    def component_counts(self) -> dict[ActivityLabel, int]:
        return {label: self.models[label].n_components for label in ALL_LABELS}

    @property
    def n_total_components(self) -> int:
        return sum(m.n_components for m in self.models.values())

    def frame_log_likelihoods(self, x) -> np.ndarray:
        """Per-activity log densities of one frame, in activity id order."""
        return np.array([log_pdf(self.models[label], x) for label in ALL_LABELS])


def fit_activity_models(
    frames_per_label: dict[ActivityLabel, np.ndarray],
    counts: dict[ActivityLabel, int] | None = None,
    cfg: EmConfig = EmConfig(),
) -> tuple[ActivityModelSet, dict[ActivityLabel, float]]:
    """Train one mixture per activity on that activity's pooled frames.

    Each activity gets a seed derived from the base seed so training whole
    sets stays deterministic.
    """
    counts = dict(DEFAULT_COMPONENT_COUNTS if counts is None else counts)
    models = {}
    final_ll = {}
    for label in ALL_LABELS:
        k = counts.get(label)
        if k is None:
            raise DataError(f"no component count for activity {label.label_name}")
        frames = frames_per_label.get(label)
        if frames is None or len(frames) < k:
            have = 0 if frames is None else len(frames)
            raise DataError(
                f"activity {label.label_name}: {have} training frames, need at least {k}"
            )
        per_label_cfg = replace(cfg, seed=cfg.seed + int(label))
        models[label], final_ll[label] = fit_em(frames, k, per_label_cfg)
    return ActivityModelSet(models), final_ll


MODEL_FORMAT_TAG = "RAPIDHARE-MODEL v1"


def save_model_set(model_set: ActivityModelSet, path) -> None:
    """Serialize a model set; reals carry 17 significant digits for exact round-trips."""
    lines = [MODEL_FORMAT_TAG, f"dim {model_set.dim}", f"activities {len(model_set.models)}"]
    for label in ALL_LABELS:
        m = model_set.models[label]
        lines.append(f"activity {label.label_name} components {m.n_components}")
        for j in range(m.n_components):
            lines.append(f"component {m.weights[j]:.17g}")
            lines.append("mean " + " ".join(f"{v:.17g}" for v in m.means[j]))
            lines.append("var " + " ".join(f"{v:.17g}" for v in m.variances[j]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


class _ModelReader:
    def __init__(self, path):
        self.path = Path(path)
        if not self.path.is_file():
            raise DataError(f"no such model file: {path}")
        self.lines = self.path.read_text(encoding="ascii").splitlines()
        self.pos = 0

    def next(self, what: str) -> str:
        if self.pos >= len(self.lines):
            raise DataError(f"{self.path}: unexpected end of file, expected {what}")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def fail(self, msg: str):
        raise DataError(f"{self.path}:{self.pos}: {msg}")


def load_model_set(path) -> ActivityModelSet:
    """Parse a serialized model set, validating structure and invariants."""
    r = _ModelReader(path)
    if r.next("format tag") != MODEL_FORMAT_TAG:
        r.fail(f"expected format tag {MODEL_FORMAT_TAG!r}")
    parts = r.next("dim").split()
    if len(parts) != 2 or parts[0] != "dim":
        r.fail("expected 'dim <d>'")
    dim = int(parts[1])
    parts = r.next("activities").split()
    if len(parts) != 2 or parts[0] != "activities":
        r.fail("expected 'activities <n>'")
    n_activities = int(parts[1])

    models = {}
    for _ in range(n_activities):
        parts = r.next("activity header").split()
        if len(parts) != 4 or parts[0] != "activity" or parts[2] != "components":
            r.fail("expected 'activity <name> components <k>'")
        label = ActivityLabel.from_name(parts[1])
        k = int(parts[3])
        weights = np.empty(k)
        means = np.empty((k, dim))
        variances = np.empty((k, dim))
        for j in range(k):
            parts = r.next("component weight").split()
            if len(parts) != 2 or parts[0] != "component":
                r.fail("expected 'component <weight>'")
            weights[j] = float(parts[1])
            parts = r.next("component mean").split()
            if len(parts) != dim + 1 or parts[0] != "mean":
                r.fail(f"expected 'mean' with {dim} values")
            means[j] = [float(v) for v in parts[1:]]
            parts = r.next("component variance").split()
            if len(parts) != dim + 1 or parts[0] != "var":
                r.fail(f"expected 'var' with {dim} values")
            variances[j] = [float(v) for v in parts[1:]]
        models[label] = GmmModel(weights, means, variances)
    return ActivityModelSet(models)
