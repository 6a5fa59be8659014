"""Synthetic ordinal-progression data and feature CSV interchange.

CSV layout: header ``id,label,f0,...,f{d-1}``, one sample per row, UTF-8,
LF line endings, floats written with 17 significant digits.
"""
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .errors import DataFormatError, InvalidInputError
from .graph import NUM_CLASSES, as_features, as_labels

SPLITS = ("train", "val", "test")


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    ids: List[str] = field(default_factory=list)
    split: Optional[str] = None

    def __post_init__(self):
        self.features = as_features(self.features)
        self.labels = as_labels(self.labels, self.features.shape[0])
        if not self.ids:
            self.ids = [str(i) for i in range(self.features.shape[0])]
        if len(self.ids) != self.features.shape[0]:
            raise InvalidInputError("ids and features differ in length")
        if self.split is not None and self.split not in SPLITS:
            raise InvalidInputError(f"unknown split tag {self.split!r}")

    def __len__(self):
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, indices, split=None) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.features[indices],
            self.labels[indices],
            [self.ids[i] for i in indices],
            split,
        )


@dataclass(frozen=True)
class SynthConfig:
    m: int = 2000
    d: int = 16
    noise_sigma: float = 0.6
    curvature: int = 4
    class_balance: tuple = (1.0, 1.0, 1.0, 1.0, 1.0)
    seed: int = 0


def generate(config: SynthConfig) -> Dataset:
    """Sample a noisy embedding of a monotone latent progression.

    A latent ``u`` in [0, 5) is drawn class by class (grade ``floor(u)``
    follows ``class_balance``), lifted through ``[u, sin(w_c u), cos(w_c u)]``
    for ``curvature`` seeded frequencies, mixed by a seeded ``d x (2c+1)``
    matrix and perturbed by isotropic Gaussian noise.
    """
    if config.m < 5 or config.d < 1:
        raise InvalidInputError("generate needs m >= 5 and d >= 1")
    if config.noise_sigma < 0 or config.curvature < 0:
        raise InvalidInputError("noise_sigma and curvature must be non-negative")
    balance = np.asarray(config.class_balance, dtype=np.float64)
    if balance.shape != (NUM_CLASSES,) or np.any(balance < 0) or not balance.sum() > 0:
        raise InvalidInputError(
            f"class_balance must be {NUM_CLASSES} non-negative weights with positive sum"
        )

    rng = np.random.default_rng(config.seed)
    # the embedding map is drawn first so it does not depend on m
    freqs = rng.uniform(0.3, 1.5, config.curvature)
    mixing = rng.normal(0.0, 1.0, (config.d, 2 * config.curvature + 1))

    grades = rng.choice(NUM_CLASSES, size=config.m, p=balance / balance.sum())
    u = grades + rng.uniform(0.0, 1.0, config.m)
    basis = [u]
    for w in freqs:
        basis += [np.sin(w * u), np.cos(w * u)]
    phi = np.stack(basis, axis=1)
    features = phi @ mixing.T
    if config.noise_sigma > 0:
        features = features + rng.normal(0.0, config.noise_sigma, features.shape)
    return Dataset(features, grades)


def _parse_float(text, lineno):
    try:
        value = float(text)
    except ValueError:
        raise DataFormatError(f"cannot parse feature value {text!r}", lineno) from None
    if not math.isfinite(value):
        raise DataFormatError(f"non-finite feature value {text!r}", lineno)
    return value


def load_features_csv(path) -> Dataset:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("file is empty", 1) from None
        d = len(header) - 2
        expected = ["id", "label"] + [f"f{i}" for i in range(d)]
        if d < 1 or header != expected:
            raise DataFormatError(
                "header must be id,label,f0,...,f{d-1} with at least one feature", 1
            )
        ids, labels, rows = [], [], []
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            if len(row) != d + 2:
                raise DataFormatError(f"expected {d + 2} columns, found {len(row)}", lineno)
            sample_id, label_text = row[0], row[1]
            try:
                label = int(label_text)
            except ValueError:
                raise DataFormatError(f"label {label_text!r} is not an integer", lineno) from None
            if not 0 <= label < NUM_CLASSES:
                raise DataFormatError(
                    f"sample {sample_id!r}: label {label} outside 0..{NUM_CLASSES - 1}", lineno
                )
            ids.append(sample_id)
            labels.append(label)
            rows.append([_parse_float(v, lineno) for v in row[2:]])
    if not rows:
        raise DataFormatError("no samples")
    return Dataset(np.array(rows), np.array(labels), ids)


def write_features_csv(dataset: Dataset, path):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "label"] + [f"f{i}" for i in range(dataset.d)])
        for sample_id, label, row in zip(dataset.ids, dataset.labels, dataset.features):
            writer.writerow([sample_id, int(label)] + [format(v, ".17g") for v in row])


def split(dataset: Dataset, fractions: Sequence[float] = (0.8, 0.1, 0.1), seed=0):
    """Stratified train/val/test split.

    Within each grade the samples are shuffled and the val and test shares are
    rounded half up; train keeps the remainder. Raises if any split is empty.
    """
    fr = np.asarray(fractions, dtype=np.float64)
    if fr.shape != (3,) or np.any(fr <= 0) or abs(fr.sum() - 1.0) > 1e-9:
        raise InvalidInputError("fractions must be three positive numbers summing to 1")
    rng = np.random.default_rng(seed)
    parts = ([], [], [])
    for grade in range(NUM_CLASSES):
        members = np.flatnonzero(dataset.labels == grade)
        if members.size == 0:
            continue
        members = rng.permutation(members)
        c = members.size
        n_val = math.floor(c * fr[1] + 0.5)
        n_test = math.floor(c * fr[2] + 0.5)
        if c >= 3:
            # keep at least one sample of every well-populated grade in train
            while c - n_val - n_test < 1:
                if n_val >= n_test:
                    n_val -= 1
                else:
                    n_test -= 1
        n_train = max(c - n_val - n_test, 0)
        n_val = min(n_val, c - n_train)
        parts[0].append(members[:n_train])
        parts[1].append(members[n_train:n_train + n_val])
        parts[2].append(members[n_train + n_val:])
    out = []
    for tag, chunks in zip(SPLITS, parts):
        idx = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)
        if idx.size == 0:
            raise InvalidInputError(f"{tag} split would be empty")
        out.append(dataset.subset(rng.permutation(idx), tag))
    return tuple(out)
