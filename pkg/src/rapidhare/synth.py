"""Synthetic labeled streams from known mixtures, for oracle tests and demos.

Frames are drawn independently within each activity segment; there is no
temporal correlation because none is needed to exercise the classifier math.
Default generators place each activity at a distinct sign-pattern mean with a
spread far smaller than the pattern separation, and they stay inside [-1, 1]
so generated datasets can round-trip through the recording file format.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import ALL_LABELS, N_ACTIVITIES, ActivityLabel, ChannelSpec, Dataset, LabeledSequence, channel
from .errors import DataError
from .gmm import GmmModel
from .hmm import TransitionMatrix

DEFAULT_SYNTH_SEED = 20260101


@dataclass(frozen=True)
class SynthSpec:
    """Everything needed to draw a reproducible labeled dataset."""

    generators: dict[ActivityLabel, GmmModel]
    activity_chain: TransitionMatrix
    n_subjects: int = 3
    frames_per_subject: int = 20000
    min_segment: int = 200
    seed: int = DEFAULT_SYNTH_SEED

    def __post_init__(self):
        if set(self.generators) != set(ALL_LABELS):
            raise DataError("need one generator mixture per activity")
        dims = {g.dim for g in self.generators.values()}
        if len(dims) != 1:
            raise DataError("generator mixtures must share one dimensionality")
        if self.n_subjects < 1 or self.frames_per_subject < 1 or self.min_segment < 1:
            raise DataError("subject, frame, and segment counts must be positive")
        if self.frames_per_subject < self.min_segment:
            raise DataError("frames_per_subject must be at least min_segment")
        if self.activity_chain.probs.shape != (N_ACTIVITIES, N_ACTIVITIES):
            raise DataError("activity chain must cover all activities")

    @property
    def dim(self) -> int:
        return next(iter(self.generators.values())).dim


def default_generators(
    dim: int = 6, separation: float = 0.6, sigma: float = 0.02
) -> dict[ActivityLabel, GmmModel]:
    """Well-separated single-component generators on sign-pattern means.

    Activity i's mean follows the binary code of i - 1 across dimensions, at
    +-``separation``; with the default spread the nearest pair of activities
    sits dozens of standard deviations apart.
    """
    if dim < 3:
        raise DataError("default generators need at least 3 dimensions")
    gens = {}
    for label in ALL_LABELS:
        bits = [(int(label) - 1) >> (d % 3) & 1 for d in range(dim)]
        mean = separation * (2.0 * np.array(bits, dtype=np.float64) - 1.0)
        gens[label] = GmmModel(
            np.array([1.0]), mean[None, :], np.full((1, dim), sigma * sigma)
        )
    return gens


def uniform_activity_chain() -> TransitionMatrix:
    """Segment-level chain: the next activity is uniform over the other seven."""
    p = np.full((N_ACTIVITIES, N_ACTIVITIES), 1.0 / (N_ACTIVITIES - 1))
    np.fill_diagonal(p, 0.0)
    return TransitionMatrix(p)


def default_spec(**overrides) -> SynthSpec:
    """The desk-scale defaults: 3 subjects, 20k frames each, 6 dims, 200-frame segments."""
    dim = overrides.pop("dim", 6)
    separation = overrides.pop("separation", 0.6)
    sigma = overrides.pop("sigma", 0.02)
    overrides.setdefault("generators", default_generators(dim, separation, sigma))
    overrides.setdefault("activity_chain", uniform_activity_chain())
    return SynthSpec(**overrides)


def synth_channels(dim: int) -> list[ChannelSpec]:
    return [channel(f"acc_sig_{i}", "accel") for i in range(dim)]


def _label_stream(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    n = spec.frames_per_subject
    labels = np.empty(n, dtype=np.int64)
    chain = spec.activity_chain.probs
    current = int(rng.integers(N_ACTIVITIES))
    pos = 0
    while pos < n:
        length = spec.min_segment + int(rng.integers(spec.min_segment + 1))
        end = pos + length
        # The closing segment absorbs any remainder shorter than min_segment.
        if n - end < spec.min_segment:
            end = n
        labels[pos:end] = current + 1
        pos = end
        current = int(rng.choice(N_ACTIVITIES, p=chain[current]))
    return labels


def _sample_mixture(model: GmmModel, n: int, rng: np.random.Generator) -> np.ndarray:
    comp = rng.choice(model.n_components, size=n, p=model.weights)
    noise = rng.standard_normal((n, model.dim))
    return model.means[comp] + noise * np.sqrt(model.variances[comp])


def generate(spec: SynthSpec) -> Dataset:
    """Draw one labeled sequence per subject; bit-identical for a fixed seed."""
    children = np.random.SeedSequence(spec.seed).spawn(spec.n_subjects)
    sequences = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        labels = _label_stream(spec, rng)
        frames = np.empty((spec.frames_per_subject, spec.dim))
        for label_id in np.unique(labels):
            mask = labels == label_id
            frames[mask] = _sample_mixture(
                spec.generators[ActivityLabel(int(label_id))], int(mask.sum()), rng
            )
        sequences.append(LabeledSequence(f"{i + 1:02d}", frames, labels))
    return Dataset(sequences, synth_channels(spec.dim))


_INT_KEYS = {"n_subjects", "frames_per_subject", "dim", "min_segment", "seed"}
_FLOAT_KEYS = {"separation", "sigma"}


def load_spec(path) -> SynthSpec:
    """Read a spec from a ``key value`` text file; unknown keys are rejected."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such spec file: {path}")
    overrides = {}
    for lineno, line in enumerate(path.read_text(encoding="ascii").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 'key value'")
        key, value = parts
        try:
            if key in _INT_KEYS:
                overrides[key] = int(value)
            elif key in _FLOAT_KEYS:
                overrides[key] = float(value)
            else:
                raise DataError(f"{path}:{lineno}: unknown key {key!r}")
        except ValueError:
            raise DataError(f"{path}:{lineno}: bad value for {key!r}") from None
    return default_spec(**overrides)
