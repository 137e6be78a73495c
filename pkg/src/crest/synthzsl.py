"""Synthetic zero-shot datasets plus the on-disk matrix and dataset formats.

Class attribute vectors get power-law marginal frequencies and pairwise
co-occurrence. Region features are a fixed seeded linear map of each region's
attribute subset, perturbed per instance by a random linear transform and
additive noise. Regions ``[0, R/2)`` form the visual stream and ``[R/2, R)``
the attribute stream; conflict injection replaces one stream with noise.

Matrix formats:

* text: comma-separated decimals, one row per line, optional final newline.
* binary: ``b"CRSTMAT1"``, uint32 rows, uint32 cols (little endian), then
  rows*cols little-endian float32 values in row-major order.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtr, ndtri

from crest.errors import ConfigError, FormatError
from crest.inference import ClassSemanticMatrix
from crest.numgraph import Tensor

MAGIC = b"CRSTMAT1"
_HEADER = struct.Struct("<8sII")
SPLITS = ("train_seen", "test_seen", "test_unseen")
STREAMS = ("none", "visual", "attribute")

_TOP_FREQUENCY = 0.7
_SHARPNESS = 1.5


@dataclass
class SynthConfig:
    class_count: int = 20
    seen_count: int = 15
    attribute_count: int = 32
    regions_per_instance: int = 8
    feature_width: int = 64
    instances_per_class: int = 50
    imbalance_exponent: float = 0.5
    cooccurrence_strength: float = 0.6
    concept_rank: int = 0
    concept_strength: float = 0.0
    feature_scale: float = 1.0
    variability_noise: float = 0.2
    conflict_rate: float = 0.0
    test_fraction: float = 0.2
    binary_attributes: bool = False
    normalize_attributes: bool = True
    seed: int = 0

    def __post_init__(self):
        counts = ("class_count", "seen_count", "attribute_count", "regions_per_instance",
                  "feature_width", "instances_per_class")
        for name in counts:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.seen_count >= self.class_count:
            raise ConfigError("seen_count must be below class_count")
        if self.regions_per_instance < 2 or self.regions_per_instance % 2:
            raise ConfigError("regions_per_instance must be even (two streams)")
        if self.imbalance_exponent < 0 or self.variability_noise < 0:
            raise ConfigError("imbalance_exponent and variability_noise must be nonnegative")
        if self.concept_rank < 0 or self.concept_rank >= self.attribute_count:
            raise ConfigError("concept_rank must lie in [0, attribute_count)")
        if self.feature_scale <= 0:
            raise ConfigError("feature_scale must be positive")
        for name in ("cooccurrence_strength", "concept_strength", "conflict_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie in (0, 1)")


@dataclass
class ZslDataset:
    semantics: ClassSemanticMatrix
    features: np.ndarray  # N x R x h, float32
    labels: np.ndarray  # N, int64
    splits: np.ndarray  # N, one of SPLITS
    instance_ids: list = field(default_factory=list)
    corruption: np.ndarray = None  # N, one of STREAMS

    def __post_init__(self):
        n = len(self.labels)
        if not self.instance_ids:
            self.instance_ids = [f"{i:06d}" for i in range(n)]
        if self.corruption is None:
            self.corruption = np.array(["none"] * n)
        if not (len(self.features) == len(self.splits) == len(self.instance_ids) == len(self.corruption) == n):
            raise FormatError("dataset columns differ in length")

    def indices(self, split):
        return np.flatnonzero(self.splits == split)

    def validate(self):
        sem = self.semantics
        seen_split = np.isin(self.splits, ("train_seen", "test_seen"))
        if not np.isin(self.labels[seen_split], sem.seen_ids).all():
            raise FormatError("seen splits contain unseen-class labels")
        if not np.isin(self.labels[self.splits == "test_unseen"], sem.unseen_ids).all():
            raise FormatError("test_unseen contains seen-class labels")
        if not np.isin(self.splits, SPLITS).all():
            raise FormatError("unknown split tag")
        return self

    def equals(self, other):
        return (
            np.array_equal(self.semantics.z, other.semantics.z)
            and np.array_equal(self.semantics.seen_ids, other.semantics.seen_ids)
            and self.features.dtype == other.features.dtype
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.splits, other.splits)
            and list(self.instance_ids) == list(other.instance_ids)
            and np.array_equal(self.corruption, other.corruption)
        )


# -- generation --------------------------------------------------------------

def attribute_frequencies(config):
    """Target probability that each attribute is active, decaying as a power law."""
    ranks = np.arange(1, config.attribute_count + 1, dtype=np.float64)
    return np.clip(_TOP_FREQUENCY * ranks ** (-config.imbalance_exponent), 0.02, 0.98)


def _stratified_normal(rng, n):
    """n standard-normal quantiles at (i + 0.5)/n, randomly ordered."""
    return ndtri((rng.permutation(n) + 0.5) / n)


def _restratify(values):
    n = len(values)
    ranks = np.argsort(np.argsort(values, kind="stable"), kind="stable")
    return ndtri((ranks + 0.5) / n)


def class_attributes(config, rng):
    """|C| x |A| attribute matrix with power-law marginals and paired co-occurrence."""
    n, a = config.class_count, config.attribute_count
    latent = np.empty((n, a))
    rho = config.cooccurrence_strength
    for j in range(a):
        fresh = _stratified_normal(rng, n)
        if j % 2 == 1:
            # the odd attribute of each pair co-varies with its even partner
            latent[:, j] = _restratify(rho * latent[:, j - 1] + np.sqrt(1.0 - rho**2) * fresh)
        else:
            latent[:, j] = fresh
    kappa = config.concept_strength if config.concept_rank else 0.0
    if kappa > 0:
        # a few shared concepts drive many attributes at once
        concepts = rng.standard_normal((n, config.concept_rank))
        loadings = rng.standard_normal((config.concept_rank, a)) / np.sqrt(config.concept_rank)
        mixed = np.sqrt(kappa) * (concepts @ loadings) + np.sqrt(1.0 - kappa) * latent
        latent = np.column_stack([_restratify(col) for col in mixed.T])
    shift = ndtri(attribute_frequencies(config))
    z = ndtr(_SHARPNESS * (latent + shift))
    if config.binary_attributes:
        z = (z > 0.5).astype(np.float64)
    if config.normalize_attributes:
        # unit rows keep dot-product scores from favouring attribute-rich classes
        z = z / np.maximum(np.linalg.norm(z, axis=1, keepdims=True), 1e-12)
    return z


def _region_masks(config, rng):
    """Attribute subset of each region; each stream covers every attribute once."""
    half = config.regions_per_instance // 2
    masks = np.zeros((config.regions_per_instance, config.attribute_count))
    for stream in range(2):
        order = rng.permutation(config.attribute_count)
        for pos, attr in enumerate(order):
            masks[stream * half + pos % half, attr] = 1.0
    return masks


def generate(config):
    """Deterministic synthetic dataset for ``config``."""
    rng = np.random.default_rng(config.seed)
    n_cls, h, r = config.class_count, config.feature_width, config.regions_per_instance
    z = class_attributes(config, rng)
    unseen = np.sort(rng.choice(n_cls, n_cls - config.seen_count, replace=False))
    seen = np.setdiff1d(np.arange(n_cls), unseen)
    semantics = ClassSemanticMatrix(z, seen, unseen)

    masks = _region_masks(config, rng)
    per_region = masks.sum(axis=1, keepdims=True)
    attr_map = rng.standard_normal((config.attribute_count, h))
    region_bias = 0.5 * rng.standard_normal((r, h))
    # class prototypes: C x R x h
    prototypes = np.einsum("ca,ra,ah->crh", z, masks / np.sqrt(per_region), attr_map) + region_bias
    prototypes = config.feature_scale * prototypes
    noise_scale = float(prototypes.std())

    n_inst = config.instances_per_class
    n_test = max(1, int(round(config.test_fraction * n_inst)))
    features, labels, splits, corruption = [], [], [], []
    v = config.variability_noise
    for c in range(n_cls):
        for i in range(n_inst):
            x = prototypes[c]
            if v > 0:
                transform = np.eye(h) + v * rng.standard_normal((h, h)) / np.sqrt(h)
                x = x @ transform + v * noise_scale * rng.standard_normal((r, h))
            stream = "none"
            if config.conflict_rate > 0 and rng.random() < config.conflict_rate:
                stream = STREAMS[1 + int(rng.integers(2))]
                half = r // 2
                block = slice(0, half) if stream == "visual" else slice(half, r)
                x = x.copy()
                x[block] = noise_scale * rng.standard_normal((half, h))
            features.append(x)
            labels.append(c)
            corruption.append(stream)
            if c in unseen:
                splits.append("test_unseen")
            else:
                splits.append("test_seen" if i >= n_inst - n_test else "train_seen")
    dataset = ZslDataset(
        semantics=semantics,
        features=np.asarray(features, dtype=np.float32),
        labels=np.asarray(labels, dtype=np.int64),
        splits=np.asarray(splits),
        corruption=np.asarray(corruption),
    )
    return dataset.validate()


# -- matrix files -------------------------------------------------------------

def format_decimal(value):
    return np.format_float_positional(float(value), unique=True, trim="-")


def write_text_matrix(path, matrix):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    lines = [",".join(format_decimal(v) for v in row) for row in matrix]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_text_matrix(text, name="<text>"):
    rows = []
    offset = 0
    width = None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        try:
            row = [float(tok) for tok in line.split(",")]
        except ValueError:
            raise FormatError(f"{name}: line {lineno} (byte offset {offset}): non-numeric value") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise FormatError(
                f"{name}: line {lineno} (byte offset {offset}): expected {width} values, found {len(row)}"
            )
        rows.append(row)
        offset += len(line.encode("utf-8")) + 1
    if not rows:
        raise FormatError(f"{name}: empty matrix file")
    return np.asarray(rows, dtype=np.float64)


def read_text_matrix(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: byte offset {exc.start}: not UTF-8 text") from None
    return parse_text_matrix(text, str(path))


def encode_binary_matrix(matrix):
    matrix = np.asarray(matrix, dtype="<f4")
    if matrix.ndim != 2:
        raise FormatError(f"binary matrices are two-dimensional, got shape {matrix.shape}")
    rows, cols = matrix.shape
    return _HEADER.pack(MAGIC, rows, cols) + matrix.tobytes(order="C")


def decode_binary_matrix(blob, name="<bytes>"):
    if len(blob) < _HEADER.size:
        raise FormatError(f"{name}: byte offset {len(blob)}: truncated header ({len(blob)} of {_HEADER.size} bytes)")
    magic, rows, cols = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"{name}: byte offset 0: bad magic {magic!r}, expected {MAGIC!r}")
    expected = rows * cols * 4
    body = len(blob) - _HEADER.size
    if body != expected:
        where = _HEADER.size + min(body, expected)
        raise FormatError(
            f"{name}: byte offset {where}: expected {expected} data bytes for {rows}x{cols}, found {body}"
        )
    return np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(rows, cols).astype(np.float32)


def write_binary_matrix(path, matrix):
    Path(path).write_bytes(encode_binary_matrix(matrix))


def read_binary_matrix(path):
    path = Path(path)
    return decode_binary_matrix(path.read_bytes(), str(path))


def load_matrix(path):
    """Read a matrix in either format; binary files are recognised by extension or magic."""
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"{path}: no such file")
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
    if path.suffix == ".bin" or head == MAGIC:
        return Tensor(read_binary_matrix(path))
    return Tensor(read_text_matrix(path))


# -- dataset directories ----------------------------------------------------

def save(dataset, directory):
    directory = Path(directory)
    (directory / "features").mkdir(parents=True, exist_ok=True)
    write_text_matrix(directory / "semantics.csv", dataset.semantics.z)
    seen = set(dataset.semantics.seen_ids.tolist())
    with open(directory / "splits.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class_id", "seen_flag"])
        for c in range(dataset.semantics.n_classes):
            w.writerow([c, int(c in seen)])
    with open(directory / "labels.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance_id", "class_id", "split"])
        for iid, label, split in zip(dataset.instance_ids, dataset.labels, dataset.splits):
            w.writerow([iid, int(label), split])
    with open(directory / "corruption.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance_id", "corrupted_stream"])
        for iid, stream in zip(dataset.instance_ids, dataset.corruption):
            w.writerow([iid, stream])
    for iid, x in zip(dataset.instance_ids, dataset.features):
        write_binary_matrix(directory / "features" / f"{iid}.bin", x)


def _read_csv(path, header):
    if not path.is_file():
        raise FormatError(f"{path}: no such file")
    text = path.read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != header:
        raise FormatError(f"{path}: byte offset 0: expected header {','.join(header)}")
    offsets = np.cumsum([0] + [len(line.encode("utf-8")) + 1 for line in text.split("\n")])
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise FormatError(f"{path}: line {lineno} (byte offset {offsets[lineno - 1]}): "
                              f"expected {len(header)} fields")
    return rows[1:], offsets


def load(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise FormatError(f"{directory}: dataset directory not found")
    z = read_text_matrix(directory / "semantics.csv") if (directory / "semantics.csv").is_file() else None
    if z is None:
        raise FormatError(f"{directory / 'semantics.csv'}: no such file")
    split_rows, offsets = _read_csv(directory / "splits.csv", ["class_id", "seen_flag"])
    try:
        flags = {int(c): int(f) for c, f in split_rows}
    except ValueError:
        raise FormatError(f"{directory / 'splits.csv'}: non-integer field") from None
    if sorted(flags) != list(range(z.shape[0])) or set(flags.values()) - {0, 1}:
        raise FormatError(f"{directory / 'splits.csv'}: class ids must be 0..{z.shape[0] - 1} with 0/1 flags")
    seen = [c for c, f in flags.items() if f]
    unseen = [c for c, f in flags.items() if not f]
    semantics = ClassSemanticMatrix(z, seen, unseen)

    label_rows, offsets = _read_csv(directory / "labels.csv", ["instance_id", "class_id", "split"])
    ids, labels, splits = [], [], []
    for lineno, (iid, label, split) in enumerate(label_rows, start=2):
        if split not in SPLITS or not label.isdigit() or int(label) >= z.shape[0]:
            raise FormatError(f"{directory / 'labels.csv'}: line {lineno} "
                              f"(byte offset {offsets[lineno - 1]}): bad record")
        ids.append(iid)
        labels.append(int(label))
        splits.append(split)
    corruption = ["none"] * len(ids)
    corruption_path = directory / "corruption.csv"
    if corruption_path.is_file():
        rows, _ = _read_csv(corruption_path, ["instance_id", "corrupted_stream"])
        lookup = dict(rows)
        corruption = [lookup.get(i, "none") for i in ids]
    features = [read_binary_matrix(directory / "features" / f"{iid}.bin") for iid in ids]
    shapes = {f.shape for f in features}
    if len(shapes) > 1:
        raise FormatError(f"{directory / 'features'}: feature matrices differ in shape: {sorted(shapes)}")
    dataset = ZslDataset(
        semantics=semantics,
        features=np.asarray(features, dtype=np.float32),
        labels=np.asarray(labels, dtype=np.int64),
        splits=np.asarray(splits),
        instance_ids=ids,
        corruption=np.asarray(corruption),
    )
    return dataset.validate()


def nearest_class_mean_accuracy(dataset, regions=None, eval_split="test_seen", fit_split="train_seen",
                                eval_mask=None):
    """Accuracy of nearest-class-mean on flattened features, class means from ``fit_split``."""
    x = dataset.features.astype(np.float64)
    if regions is not None:
        x = x[:, regions]
    x = x.reshape(len(x), -1)
    fit = dataset.splits == fit_split
    classes = np.unique(dataset.labels[fit])
    means = np.stack([x[fit & (dataset.labels == c)].mean(axis=0) for c in classes])
    sel = dataset.splits == eval_split
    if eval_mask is not None:
        sel &= eval_mask
    d = ((x[sel, None, :] - means[None]) ** 2).sum(-1)
    pred = classes[np.argmin(d, axis=1)]
    return float(np.mean(pred == dataset.labels[sel]))



def attribute_ncm_accuracy(dataset, fit_split="train_seen"):
    """Unseen-class accuracy of nearest-class-mean routed through attribute space.

    Each unseen test instance gets soft weights over the seen class means
    (softmax of negative squared distances standardised per instance), those
    weights mix the seen attribute vectors, and the prediction is the unseen
    class with the most cosine-similar attribute vector. Macro averaged.
    """
    semantics = dataset.semantics
    x = dataset.features.astype(np.float64).reshape(len(dataset.features), -1)
    fit = dataset.splits == fit_split
    seen = semantics.seen_ids
    means = np.stack([x[fit & (dataset.labels == c)].mean(axis=0) for c in seen])
    test = dataset.splits == "test_unseen"
    if not test.any():
        raise ConfigError("dataset has no test_unseen instances")
    d = ((x[test, None, :] - means[None]) ** 2).sum(-1)
    logits = -(d - d.mean(axis=1, keepdims=True)) / d.std(axis=1, keepdims=True)
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=1, keepdims=True)
    estimate = weights @ semantics.z[seen]
    unseen_z = semantics.z[semantics.unseen_ids]
    cos = (estimate / np.linalg.norm(estimate, axis=1, keepdims=True)) @ (
        unseen_z / np.linalg.norm(unseen_z, axis=1, keepdims=True)).T
    pred = semantics.unseen_ids[np.argmax(cos, axis=1)]
    labels = dataset.labels[test]
    return float(np.mean([np.mean(pred[labels == c] == c) for c in np.unique(labels)]))
