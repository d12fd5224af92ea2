"""Sensor recordings on disk, their in-memory form, and subject-level splits.

Recording file format (text, one file per continuous recording):

* lines starting with ``#`` are metadata: ``#subject <id>`` (required) and
  ``#rate <hz>`` (optional, default 56.35); unknown metadata keys are ignored
* the first non-metadata line is a tab-separated header of column names whose
  last column is literally ``act``
* every following line is one frame: tab-separated raw integers, one per
  channel, then the activity id (1..8)

Raw integers are scaled to [-1, 1] at parse time with the affine map of each
channel's declared raw range, so everything downstream sees scaled reals.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

NOMINAL_SAMPLE_RATE_HZ = 56.35
N_ACTIVITIES = 8


class ActivityLabel(enum.IntEnum):
    """The eight recognized activities; ids are fixed and 1-based."""

    WALKING = 1
    RUNNING = 2
    GOING_UP = 3
    GOING_DOWN = 4
    SITTING = 5
    SITTING_DOWN = 6
    STANDING_UP = 7
    STANDING = 8

    @property
    def label_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> "ActivityLabel":
        try:
            return cls[name.upper()]
        except KeyError:
            raise DataError(f"unknown activity name: {name!r}") from None


ALL_LABELS: tuple[ActivityLabel, ...] = tuple(ActivityLabel)

# Raw integer encodings per channel kind.
RAW_RANGES: dict[str, tuple[int, int]] = {
    "accel": (-32768, 32767),
    "gyro": (-32768, 32767),
    "emg": (0, 255),
}


@dataclass(frozen=True)
class ChannelSpec:
    """One sensor channel: name, kind, and the raw integer interval it uses."""

    name: str
    kind: str
    raw_min: int
    raw_max: int

    def __post_init__(self):
        if self.kind not in RAW_RANGES:
            raise DataError(f"unknown channel kind: {self.kind!r}")
        if self.raw_min >= self.raw_max:
            raise DataError(
                f"degenerate raw range [{self.raw_min}, {self.raw_max}] for channel {self.name!r}"
            )


def channel(name: str, kind: str) -> ChannelSpec:
    """Build a ChannelSpec with the default raw range of its kind."""
    lo, hi = RAW_RANGES.get(kind, (0, 0))
    return ChannelSpec(name, kind, lo, hi)


SENSOR_LOCATIONS = ("rf", "rs", "rt", "lf", "ls", "lt")  # right/left foot, shin, thigh


def full_sensor_channels() -> list[ChannelSpec]:
    """The full 38-channel layout: accel and gyro triples on six leg sites plus two EMG channels."""
    chans: list[ChannelSpec] = []
    for loc in SENSOR_LOCATIONS:
        for axis in "xyz":
            chans.append(channel(f"acc_{loc}_{axis}", "accel"))
        for axis in "xyz":
            chans.append(channel(f"gyro_{loc}_{axis}", "gyro"))
    chans.append(channel("emg_r", "emg"))
    chans.append(channel("emg_l", "emg"))
    return chans


def channels_from_names(names: list[str]) -> list[ChannelSpec]:
    """Infer channel specs from header column names (``acc_``/``gyro_``/``emg`` prefixes)."""
    chans = []
    for name in names:
        if name.startswith("acc"):
            kind = "accel"
        elif name.startswith("gyro"):
            kind = "gyro"
        elif name.startswith("emg"):
            kind = "emg"
        else:
            raise DataError(f"cannot infer sensor kind from column name {name!r}")
        chans.append(channel(name, kind))
    return chans


@dataclass
class LabeledSequence:
    """A contiguous recording: scaled frames, per-frame activity labels, one subject."""

    subject_id: str
    frames: np.ndarray  # (n_frames, n_channels) float64
    labels: np.ndarray  # (n_frames,) int64 with values 1..8
    sample_rate_hz: float = NOMINAL_SAMPLE_RATE_HZ

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if frames.ndim != 2 or len(frames) == 0:
            raise DataError("frames must be a non-empty 2-D array")
        if labels.shape != (len(frames),):
            raise DataError("labels must align one-to-one with frames")
        if not np.isfinite(frames).all():
            raise DataError("frames contain non-finite values")
        if labels.min() < 1 or labels.max() > N_ACTIVITIES:
            raise DataError("labels must be activity ids in 1..8")
        self.frames = frames
        self.labels = labels

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass
class Dataset:
    """A collection of labeled sequences sharing one channel layout."""

    sequences: list[LabeledSequence]
    channels: list[ChannelSpec]

    def __post_init__(self):
        if not self.sequences:
            raise DataError("a dataset needs at least one sequence")
        n = len(self.channels)
        for seq in self.sequences:
            if seq.dim != n:
                raise DataError(
                    f"sequence for subject {seq.subject_id} has {seq.dim} channels, expected {n}"
                )

    def subjects(self) -> list[str]:
        return sorted({seq.subject_id for seq in self.sequences})


def _scale_columns(raw: np.ndarray, channels: list[ChannelSpec]) -> np.ndarray:
    mins = np.array([c.raw_min for c in channels], dtype=np.float64)
    spans = np.array([c.raw_max - c.raw_min for c in channels], dtype=np.float64)
    return -1.0 + 2.0 * (raw - mins) / spans


def parse_recording(path, channels: list[ChannelSpec]) -> LabeledSequence:
    """Parse one recording file into a scaled, labeled sequence.

    Raises DataError with the offending line number for malformed headers,
    wrong row widths, non-integer fields, unknown label ids, and raw values
    outside a channel's declared range.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such recording file: {path}")
    subject = None
    rate = NOMINAL_SAMPLE_RATE_HZ
    header_seen = False
    rows: list[list[int]] = []
    first_data_line = 0
    n_cols = len(channels) + 1
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                raise DataError(f"{path}:{lineno}: blank line")
            if line.startswith("#"):
                if header_seen:
                    raise DataError(f"{path}:{lineno}: metadata line after the header")
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "subject":
                    subject = parts[1]
                elif len(parts) == 2 and parts[0] == "rate":
                    try:
                        rate = float(parts[1])
                    except ValueError:
                        raise DataError(f"{path}:{lineno}: bad sample rate {parts[1]!r}") from None
            elif not header_seen:
                names = line.split("\t")
                if len(names) < 2 or names[-1] != "act":
                    raise DataError(f"{path}:{lineno}: header must end with an 'act' column")
                expected = [c.name for c in channels]
                if names[:-1] != expected:
                    raise DataError(f"{path}:{lineno}: header columns do not match the channel spec")
                header_seen = True
            else:
                parts = line.split("\t")
                if len(parts) != n_cols:
                    raise DataError(f"{path}:{lineno}: expected {n_cols} columns, got {len(parts)}")
                try:
                    row = [int(p) for p in parts]
                except ValueError:
                    raise DataError(f"{path}:{lineno}: non-integer field") from None
                if not rows:
                    first_data_line = lineno
                rows.append(row)
    if subject is None:
        raise DataError(f"{path}: missing '#subject' metadata line")
    if not header_seen:
        raise DataError(f"{path}: missing header line")
    if not rows:
        raise DataError(f"{path}: no data rows")

    raw = np.array(rows, dtype=np.int64)
    acts = raw[:, -1]
    bad = (acts < 1) | (acts > N_ACTIVITIES)
    if bad.any():
        i = int(np.argmax(bad))
        raise DataError(f"{path}:{first_data_line + i}: unknown label id {acts[i]}")
    values = raw[:, :-1]
    mins = np.array([c.raw_min for c in channels])
    maxs = np.array([c.raw_max for c in channels])
    out_of_range = (values < mins) | (values > maxs)
    if out_of_range.any():
        r, c = map(int, np.argwhere(out_of_range)[0])
        raise DataError(
            f"{path}:{first_data_line + r}: value {values[r, c]} outside the raw range of "
            f"channel {channels[c].name!r}"
        )
    return LabeledSequence(subject, _scale_columns(values, channels), acts, rate)


def write_recording(seq: LabeledSequence, channels: list[ChannelSpec], path) -> None:
    """Write a sequence back to the recording format, inverting the raw scaling."""
    if seq.dim != len(channels):
        raise DataError(f"sequence has {seq.dim} channels, spec has {len(channels)}")
    mins = np.array([c.raw_min for c in channels], dtype=np.float64)
    spans = np.array([c.raw_max - c.raw_min for c in channels], dtype=np.float64)
    raw = np.rint((seq.frames + 1.0) * (spans / 2.0) + mins)
    maxs = mins + spans
    if (raw < mins).any() or (raw > maxs).any():
        raise DataError("scaled values fall outside the representable raw range")
    raw = raw.astype(np.int64)
    lines = [f"#subject {seq.subject_id}", f"#rate {seq.sample_rate_hz!r}"]
    lines.append("\t".join([c.name for c in channels] + ["act"]))
    table = np.column_stack([raw, seq.labels])
    lines.extend("\t".join(map(str, row)) for row in table)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_dataset(data_dir) -> Dataset:
    """Load every recording file in a directory; channels inferred from the first header."""
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DataError(f"no such data directory: {data_dir}")
    files = sorted(p for p in data_dir.iterdir() if p.is_file())
    if not files:
        raise DataError(f"no recording files in {data_dir}")
    channels = None
    for line in files[0].read_text(encoding="ascii").splitlines():
        if line and not line.startswith("#"):
            names = line.split("\t")
            if names[-1] != "act":
                raise DataError(f"{files[0]}: header must end with an 'act' column")
            channels = channels_from_names(names[:-1])
            break
    if channels is None:
        raise DataError(f"{files[0]}: missing header line")
    sequences = [parse_recording(p, channels) for p in files]
    return Dataset(sequences, channels)


def write_dataset(dataset: Dataset, out_dir) -> list[Path]:
    """Write one recording file per sequence into a directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    counts: dict[str, int] = {}
    for seq in dataset.sequences:
        n = counts.get(seq.subject_id, 0)
        counts[seq.subject_id] = n + 1
        suffix = f"_{n}" if n else ""
        p = out_dir / f"subject_{seq.subject_id}{suffix}.tsv"
        write_recording(seq, dataset.channels, p)
        paths.append(p)
    return paths


def split_loso(dataset: Dataset, test_subject: str) -> tuple[Dataset, Dataset, Dataset]:
    """Leave-one-subject-out split: (train, validation, test).

    The validation subject is the cyclic successor of the test subject in
    sorted subject-id order, which makes cross-validation folds reproducible.
    """
    subjects = dataset.subjects()
    if len(subjects) < 3:
        raise DataError("leave-one-subject-out needs at least 3 subjects")
    if test_subject not in subjects:
        raise DataError(f"unknown subject: {test_subject!r}")
    val_subject = subjects[(subjects.index(test_subject) + 1) % len(subjects)]

    def pick(pred):
        return Dataset([s for s in dataset.sequences if pred(s.subject_id)], dataset.channels)

    train = pick(lambda s: s != test_subject and s != val_subject)
    validation = pick(lambda s: s == val_subject)
    test = pick(lambda s: s == test_subject)
    return train, validation, test


def frames_by_label(sequences: list[LabeledSequence]) -> dict[ActivityLabel, np.ndarray]:
    """Concatenate all frames carrying each label across sequences."""
    out: dict[ActivityLabel, np.ndarray] = {}
    for label in ALL_LABELS:
        chunks = [seq.frames[seq.labels == label] for seq in sequences]
        chunks = [c for c in chunks if len(c)]
        if chunks:
            out[label] = np.concatenate(chunks, axis=0)
    return out
