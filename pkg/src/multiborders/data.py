"""Datasets, the plain-text data file format, and a synthetic ordinal generator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DataFileError(ValueError):
    pass


class RaggedRow(DataFileError):
    def __init__(self, line, expected, found):
        self.line = line
        super().__init__(f"line {line}: expected {expected} columns, found {found}")


class NonIntegerLabel(DataFileError):
    pass


class EmptyFile(DataFileError):
    pass


class ThresholdSpecInvalid(ValueError):
    pass


class ClassStarvation(RuntimeError):
    pass


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("need one label per feature row")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")

    def __len__(self):
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


def read_table(path) -> tuple[np.ndarray, list[int]]:
    """Read a whitespace table with ``#`` comments; returns (rows, line numbers)."""
    rows, lines = [], []
    width = None
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.split()
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise RaggedRow(lineno, width, len(fields))
            rows.append(fields)
            lines.append(lineno)
    if not rows:
        raise EmptyFile(f"{path}: no data rows")
    return rows, lines


def parse_label(text, lineno):
    try:
        value = int(text)
    except ValueError:
        raise NonIntegerLabel(f"line {lineno}: class label {text!r} is not an integer") from None
    if value < 0:
        raise NonIntegerLabel(f"line {lineno}: class label {value} is negative")
    return value


def read_data(path, n_classes: int | None = None) -> Dataset:
    """Read a data file: feature columns followed by an integer label column."""
    rows, lines = read_table(path)
    if len(rows[0]) < 2:
        raise DataFileError(f"{path}: need at least one feature column and a label column")
    try:
        features = np.array([[float(v) for v in r[:-1]] for r in rows])
    except ValueError as exc:
        raise DataFileError(f"{path}: {exc}") from None
    labels = np.array([parse_label(r[-1], n) for r, n in zip(rows, lines)], dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1
    return Dataset(features, labels, n_classes)


def write_data(data: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for x, c in zip(data.features, data.labels):
            f.write(" ".join(f"{v:.17g}" for v in x) + f" {c}\n")


def geometric_thresholds(lo: float, hi: float, count: int) -> np.ndarray:
    """``count`` values in geometric progression from ``lo`` to ``hi`` inclusive."""
    if count < 1:
        raise ThresholdSpecInvalid("need at least one threshold")
    if not 0 < lo < hi:
        raise ThresholdSpecInvalid(f"need 0 < lo < hi, got lo={lo}, hi={hi}")
    if count == 1:
        return np.array([np.sqrt(lo * hi)])
    return lo * (hi / lo) ** (np.arange(count) / (count - 1))


def latent_field(x, thresholds):
    """Positive field increasing with the mean of ``x``'s components.

    The log-range extends one threshold spacing past the outer thresholds so
    every class gets an equal-width band of the mean even without noise.
    """
    log_t = np.log(thresholds)
    step = np.diff(log_t).mean() if len(log_t) > 1 else 1.0
    u = np.mean(x, axis=-1)
    return np.exp(log_t[0] - step + u * (len(log_t) + 1) * step)


def classes_from_field(z, thresholds) -> np.ndarray:
    """Class = number of thresholds strictly below ``z``."""
    return np.searchsorted(thresholds, z, side="left").astype(np.int64)


def synth_continuum(n: int, d: int = 2, n_classes: int = 8, lo: float = 7e-5, hi: float = 1e-3,
                    sigma: float = 0.3, seed: int = 1, max_retries: int = 10) -> Dataset:
    """Ordinal classes from geometric thresholds on a noisy positive field.

    Features are uniform on the unit cube.  The noise is multiplicative
    log-normal with log-standard-deviation ``sigma``.  When ``n`` is at least
    50 per class, the noise is redrawn (up to ``max_retries`` times) until
    every class is populated.
    """
    if n_classes < 2:
        raise ThresholdSpecInvalid("need at least two classes")
    if d < 1 or n < 1:
        raise ValueError("need n >= 1 and d >= 1")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    thresholds = geometric_thresholds(lo, hi, n_classes - 1)
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(n, d))
    z0 = latent_field(x, thresholds)
    for _ in range(max_retries + 1):
        z = z0 * np.exp(sigma * rng.standard_normal(n)) if sigma > 0 else z0
        labels = classes_from_field(z, thresholds)
        data = Dataset(x, labels, n_classes)
        if n < 50 * n_classes or np.all(data.class_counts() > 0):
            return data
        if sigma == 0:
            break
    raise ClassStarvation(f"some class stayed empty after {max_retries} redraws: {data.class_counts()}")
