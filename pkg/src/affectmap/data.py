"""Input-signal ingestion: IDX (MNIST) files, state assignment, synthetic data.

The IDX reader is bit-exact against the published byte layout (big-endian
header, unsigned-byte payload) and has a matching writer so round-trips can
be verified.  For desk-scale experiments a deterministic Gaussian-cluster
generator stands in for real sensor data.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DatasetConsistencyError, IdxFormatError, InsufficientDataError

__all__ = [
    "IMAGE_MAGIC",
    "LABEL_MAGIC",
    "SignalDataset",
    "StateAssignment",
    "load_idx_images",
    "load_idx_labels",
    "write_idx_images",
    "write_idx_labels",
    "assign_states",
    "dataset_from_idx",
    "synth_gaussian_dataset",
]

IMAGE_MAGIC = 2051  # 0x00000803
LABEL_MAGIC = 2049  # 0x00000801


@dataclass
class SignalDataset:
    """n signals of width d with one state label each.

    Labels live in [0, state_count) and every state has at least one sample
    (training additionally requires two, enforced there).
    """

    signals: np.ndarray
    state_labels: np.ndarray
    state_count: int
    provenance: str

    def __post_init__(self):
        x = np.asarray(self.signals, dtype=float)
        y = np.asarray(self.state_labels, dtype=int)
        if x.ndim != 2:
            raise ValueError(f"signals must be 2-D (n, d), got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise ValueError(
                f"labels must be 1-D of length {x.shape[0]}, got shape {y.shape}"
            )
        if not np.all(np.isfinite(x)):
            raise ValueError("signals must be finite")
        if self.state_count < 1:
            raise ValueError(f"state_count must be >= 1, got {self.state_count}")
        if y.size and (y.min() < 0 or y.max() >= self.state_count):
            raise ValueError(
                f"labels must lie in [0, {self.state_count}), got range "
                f"[{y.min()}, {y.max()}]"
            )
        present = np.unique(y)
        if len(present) != self.state_count:
            missing = sorted(set(range(self.state_count)) - set(present.tolist()))
            raise InsufficientDataError(f"states {missing} have no samples")
        if self.provenance not in ("idx", "synthetic", "csv"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        x = x.copy()
        y = y.copy()
        x.setflags(write=False)
        y.setflags(write=False)
        self.signals = x
        self.state_labels = y

    def __len__(self):
        return self.signals.shape[0]

    @property
    def dim(self):
        return self.signals.shape[1]

    def state_indices(self):
        """Sample indices per state id."""
        return [np.flatnonzero(self.state_labels == s) for s in range(self.state_count)]

    def state_counts(self):
        return np.bincount(self.state_labels, minlength=self.state_count)

    def subset(self, indices, provenance=None):
        return SignalDataset(
            self.signals[indices],
            self.state_labels[indices],
            self.state_count,
            provenance or self.provenance,
        )

    def to_csv(self, path):
        """Export as "label,x0,...,x{d-1}" rows with a header line."""
        header = "label," + ",".join(f"x{i}" for i in range(self.dim))
        with open(path, "w") as f:
            f.write(header + "\n")
            for label, row in zip(self.state_labels, self.signals):
                f.write(
                    str(int(label)) + "," + ",".join(repr(float(v)) for v in row) + "\n"
                )

    @classmethod
    def from_csv(cls, path):
        labels, rows = [], []
        with open(path) as f:
            lines = [ln.strip() for ln in f if ln.strip()]
        if not lines:
            raise ValueError(f"empty dataset file {path}")
        if lines and lines[0].startswith("label"):
            lines = lines[1:]
        for ln in lines:
            parts = ln.split(",")
            labels.append(int(parts[0]))
            rows.append([float(v) for v in parts[1:]])
        labels = np.asarray(labels, dtype=int)
        return cls(np.asarray(rows, dtype=float), labels, int(labels.max()) + 1, "csv")


def _read_exact(f, count, path, what):
    data = f.read(count)
    if len(data) != count:
        raise IdxFormatError(
            f"{path}: truncated {what}: expected {count} bytes, got {len(data)}"
        )
    return data


def load_idx_images(path):
    """Read an IDX image file into a (n, rows, cols) uint8 tensor.

    Header is big-endian: magic 2051, then item, row, and column counts as
    32-bit integers, then n*rows*cols unsigned bytes row-major.
    """
    with open(path, "rb") as f:
        header = _read_exact(f, 16, path, "header")
        magic, n, rows, cols = struct.unpack(">iiii", header)
        if magic != IMAGE_MAGIC:
            raise IdxFormatError(
                f"{path}: bad magic {magic}, expected {IMAGE_MAGIC} for images"
            )
        payload = _read_exact(f, n * rows * cols, path, "pixel payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(n, rows, cols)


def load_idx_labels(path):
    """Read an IDX label file into a (n,) uint8 array (magic 2049)."""
    with open(path, "rb") as f:
        header = _read_exact(f, 8, path, "header")
        magic, n = struct.unpack(">ii", header)
        if magic != LABEL_MAGIC:
            raise IdxFormatError(
                f"{path}: bad magic {magic}, expected {LABEL_MAGIC} for labels"
            )
        payload = _read_exact(f, n, path, "label payload")
    return np.frombuffer(payload, dtype=np.uint8)


def write_idx_images(path, images):
    """Inverse of load_idx_images; writing a parsed file reproduces it byte-for-byte."""
    imgs = np.ascontiguousarray(images, dtype=np.uint8)
    if imgs.ndim != 3:
        raise ValueError(f"images must be (n, rows, cols), got shape {imgs.shape}")
    with open(path, "wb") as f:
        f.write(struct.pack(">iiii", IMAGE_MAGIC, *imgs.shape))
        f.write(imgs.tobytes())


def write_idx_labels(path, labels):
    lab = np.ascontiguousarray(labels, dtype=np.uint8)
    if lab.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {lab.shape}")
    with open(path, "wb") as f:
        f.write(struct.pack(">ii", LABEL_MAGIC, lab.shape[0]))
        f.write(lab.tobytes())


@dataclass(frozen=True)
class StateAssignment:
    """Partial map from raw labels (e.g. digits 0-9) to state ids.

    Unmapped raw labels are dropped at assignment time.  Mapped state ids
    must form a contiguous range [0, s).
    """

    mapping: dict

    def __post_init__(self):
        mapping = {int(k): int(v) for k, v in self.mapping.items()}
        object.__setattr__(self, "mapping", mapping)
        if not mapping:
            raise ValueError("assignment must map at least one raw label")
        ids = sorted(set(mapping.values()))
        if ids != list(range(len(ids))):
            raise ValueError(f"mapped state ids must be contiguous from 0, got {ids}")

    @property
    def state_count(self):
        return len(set(self.mapping.values()))


def assign_states(signals, raw_labels, assignment, provenance="idx"):
    """Keep the samples whose raw label is mapped and relabel them to state ids."""
    x = np.asarray(signals, dtype=float)
    raw = np.asarray(raw_labels)
    if x.shape[0] != raw.shape[0]:
        raise DatasetConsistencyError(
            f"signal count {x.shape[0]} != label count {raw.shape[0]}"
        )
    keep = np.array([int(r) in assignment.mapping for r in raw], dtype=bool)
    if not keep.any():
        raise InsufficientDataError("no samples left after applying the assignment")
    mapped = np.array([assignment.mapping[int(r)] for r in raw[keep]], dtype=int)
    return SignalDataset(x[keep], mapped, assignment.state_count, provenance)


def dataset_from_idx(images_path, labels_path, assignment):
    """Assemble a SignalDataset from paired IDX files.

    Pixel bytes are scaled to [0, 1] and images flattened row-major, so
    d = rows * cols.
    """
    images = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise DatasetConsistencyError(
            f"image count {images.shape[0]} != label count {labels.shape[0]} "
            f"({images_path} vs {labels_path})"
        )
    signals = images.reshape(images.shape[0], -1).astype(float) / 255.0
    return assign_states(signals, labels, assignment, provenance="idx")


def synth_gaussian_dataset(s, per_state, d, separation, seed):
    """Deterministic Gaussian clusters: state i centered at separation * e_i.

    Centers sit on scaled coordinate directions (cycled through R^d), so the
    distance between any two distinct centers is exactly separation*sqrt(2).
    Unit isotropic variance.  per_state may be a single count or one count
    per state.
    """
    if s < 2:
        raise ValueError(f"need at least 2 states, got {s}")
    if d < 1:
        raise ValueError(f"need d >= 1, got {d}")
    if separation != 0.0 and s > d:
        raise ValueError(
            f"d={d} is too small for {s} distinct centers on coordinate axes"
        )
    counts = np.broadcast_to(np.asarray(per_state, dtype=int), (s,))
    if np.any(counts < 1):
        raise ValueError("per_state counts must be >= 1")
    rng = np.random.default_rng(seed)
    blocks, labels = [], []
    for i in range(s):
        center = np.zeros(d)
        center[i % d] = separation
        blocks.append(center + rng.standard_normal((counts[i], d)))
        labels.append(np.full(counts[i], i, dtype=int))
    return SignalDataset(
        np.vstack(blocks), np.concatenate(labels), s, provenance="synthetic"
    )
