"""Datasets of precomputed features: synthetic clusters, CSV and PGML binary files."""
import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError, ParseError
from .model import make_rng

BIN_MAGIC = b"PGML"
BIN_VERSION = 1


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_count: int
    is_test: np.ndarray
    class_names: list = field(default_factory=list)
    centers: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.is_test = np.asarray(self.is_test, dtype=bool)
        if not self.class_names:
            self.class_names = [str(i) for i in range(self.class_count)]
        n = len(self.labels)
        if self.features.ndim != 2 or len(self.features) != n or len(self.is_test) != n:
            raise ParameterError("features, labels and split flags must have one entry per item")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ParameterError(f"labels must lie in [0, {self.class_count})")
        if not np.all(np.isfinite(self.features)):
            raise ParameterError("features contain NaN or Inf")

    @property
    def dim(self):
        return self.features.shape[1]

    def split(self, which):
        """``(features, labels)`` of one split with labels re-indexed densely inside it."""
        sel = self.is_test if which == "test" else ~self.is_test
        labels = self.labels[sel]
        _, dense = np.unique(labels, return_inverse=True)
        return self.features[sel], dense.astype(np.int64)


def synthetic_clusters(c, per_class, d, noise_sigma, seed):
    if c < 2 or per_class < 2 or noise_sigma < 0:
        raise ParameterError("need c >= 2, per_class >= 2 and noise_sigma >= 0")
    rng = make_rng(seed)
    centers = rng.standard_normal((c, d))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    labels = np.repeat(np.arange(c), per_class)
    features = centers[labels] + noise_sigma * rng.standard_normal((c * per_class, d))
    is_test = np.tile(np.arange(per_class) >= per_class // 2, c)
    return Dataset(features, labels, c, is_test, centers=centers)


def _dense_ids(raw_labels):
    if all(s.isdigit() for s in raw_labels):
        uniq = sorted({int(s) for s in raw_labels})
        index = {str(v): i for i, v in enumerate(uniq)}
        names = [str(v) for v in uniq]
    else:
        index, names = {}, []
        for s in raw_labels:
            if s not in index:
                index[s] = len(names)
                names.append(s)
    return np.array([index[s] for s in raw_labels], dtype=np.int64), names


def _assign_split(labels, names, split_col, test_classes):
    if split_col is not None:
        return split_col
    if test_classes is not None:
        wanted = {str(t) for t in test_classes}
        missing = wanted - set(names)
        if missing:
            raise ParameterError(f"test classes not present in data: {sorted(missing)}")
        test_ids = [i for i, nm in enumerate(names) if nm in wanted]
    else:
        # zero-shot default: first half of the classes train, the rest test
        test_ids = list(range(len(names) // 2, len(names)))
    return np.isin(labels, test_ids)


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "label":
        raise ParseError(f"{path}: line 1: header must start with 'label'")
    split_at = header.index("split") if "split" in header else None
    feat_cols = [i for i, h in enumerate(header) if i != 0 and i != split_at]
    expected = [f"f{j}" for j in range(len(feat_cols))]
    if [header[i] for i in feat_cols] != expected:
        raise ParseError(f"{path}: line 1: feature columns must be named f0..f{len(feat_cols) - 1}")
    if not feat_cols:
        raise ParseError(f"{path}: line 1: no feature columns")
    raw_labels, feats, splits = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not x.strip() for x in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
        label = row[0].strip()
        if not label:
            raise ParseError(f"{path}: line {lineno}: empty label")
        try:
            vals = [float(row[i]) for i in feat_cols]
        except ValueError as exc:
            raise ParseError(f"{path}: line {lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError(f"{path}: line {lineno}: non-finite feature value")
        if split_at is not None:
            tag = row[split_at].strip().lower()
            if tag not in ("train", "test"):
                raise ParseError(f"{path}: line {lineno}: split must be 'train' or 'test', got {tag!r}")
            splits.append(tag == "test")
        raw_labels.append(label)
        feats.append(vals)
    if not feats:
        raise ParseError(f"{path}: no data rows")
    labels, names = _dense_ids(raw_labels)
    return np.array(feats), labels, names, (np.array(splits) if split_at is not None else None)


def _read_binary(path):
    buf = Path(path).read_bytes()
    if len(buf) < 16 or buf[:4] != BIN_MAGIC:
        raise ParseError(f"{path}: offset 0: bad magic")
    version, n, d = struct.unpack_from("<III", buf, 4)
    if version != BIN_VERSION:
        raise ParseError(f"{path}: offset 4: unsupported version {version}")
    rec = np.dtype([("label", "<u4"), ("x", "<f4", (d,))])
    if len(buf) - 16 != n * rec.itemsize:
        raise ParseError(f"{path}: offset 16: expected {n} records of {rec.itemsize} bytes, "
                         f"found {len(buf) - 16} bytes")
    records = np.frombuffer(buf, dtype=rec, count=n, offset=16)
    feats = records["x"].astype(np.float64)
    bad = np.flatnonzero(~np.all(np.isfinite(feats), axis=1))
    if bad.size:
        raise ParseError(f"{path}: record {int(bad[0])} (offset {16 + int(bad[0]) * rec.itemsize}): "
                         "non-finite feature value")
    labels, names = _dense_ids([str(int(v)) for v in records["label"]])
    return feats, labels, names, None


def load_features(path, test_classes=None):
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    reader = _read_binary if head == BIN_MAGIC else _read_csv
    feats, labels, names, split_col = reader(path)
    is_test = _assign_split(labels, names, split_col, test_classes)
    if not is_test.any():
        raise ParseError(f"{path}: test split is empty")
    return Dataset(feats, labels, len(names), is_test, names)


def write_binary(path, dataset):
    n, d = dataset.features.shape
    rec = np.dtype([("label", "<u4"), ("x", "<f4", (d,))])
    records = np.empty(n, dtype=rec)
    records["label"] = dataset.labels
    records["x"] = dataset.features
    Path(path).write_bytes(BIN_MAGIC + struct.pack("<III", BIN_VERSION, n, d) + records.tobytes())


def write_csv(path, dataset, with_split=False):
    d = dataset.dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label"] + (["split"] if with_split else []) + [f"f{j}" for j in range(d)])
        for y, x, t in zip(dataset.labels, dataset.features, dataset.is_test):
            w.writerow([dataset.class_names[y]] + (["test" if t else "train"] if with_split else [])
                       + [repr(float(v)) for v in x])


class BatchSampler:
    """Shuffled epochs of fixed-size batches drawn without replacement."""

    def __init__(self, n_items, batch_size, rng, drop_last=True):
        if batch_size > n_items:
            raise ParameterError(f"batch size {batch_size} exceeds {n_items} training items")
        if batch_size < 1:
            raise ParameterError("batch size must be >= 1")
        self.n_items, self.batch_size, self.rng, self.drop_last = n_items, batch_size, rng, drop_last

    def epoch(self):
        perm = self.rng.permutation(self.n_items)
        stop = self.n_items - self.n_items % self.batch_size if self.drop_last else self.n_items
        return [perm[i : i + self.batch_size] for i in range(0, stop, self.batch_size)]


def sample_batch(n_items, m, rng):
    if m > n_items:
        raise ParameterError(f"batch size {m} exceeds {n_items} training items")
    return rng.choice(n_items, size=m, replace=False)
