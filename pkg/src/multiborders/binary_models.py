"""Two-class discriminators returning r(x) = P(2|x) - P(1|x) in [-1, 1].

Labels are -1 for side 1 and +1 for side 2.  Two learners are built in:
L2-regularized logistic regression fitted by full-batch gradient descent,
and a fixed-bandwidth Gaussian kernel density estimator.
"""

from __future__ import annotations

import io
import shlex
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Optional

import numpy as np
from scipy.spatial.distance import pdist
from scipy.special import expit, log_expit

MAGIC = b"MBORDER1"
FORMAT_VERSION = 1
KIND_TAGS = {"logistic": 1, "kde": 2}
KDE_SUBSAMPLE = 256

_AGF_NOTE = (
    "AGF borders options (-s, -W, -k, ...) are not supported; "
    "the built-in learners accept -m, -r, -n, -e, -h, -S"
)


class OptionError(ValueError):
    pass


class UnknownFlag(OptionError):
    def __init__(self, flag):
        self.flag = flag
        super().__init__(f"unknown training flag {flag!r}: {_AGF_NOTE}")


class MalformedValue(OptionError):
    pass


class TrainingError(ValueError):
    pass


class SingleClassInput(TrainingError):
    pass


class DimensionMismatch(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


class CorruptModel(ModelFormatError):
    pass


class TruncatedStream(ModelFormatError):
    pass


@dataclass(frozen=True)
class TrainOptions:
    model: str = "logistic"
    ridge: float = 1e-3
    iterations: int = 500
    learning_rate: float = 0.1
    bandwidth: Optional[float] = None
    seed: Optional[int] = None


def _number(flag, text, kind, check, what):
    try:
        value = kind(text)
    except ValueError:
        raise MalformedValue(f"{flag} expects {what}, got {text!r}") from None
    if not check(value):
        raise MalformedValue(f"{flag} expects {what}, got {text!r}")
    return value


def parse_options(text: str) -> TrainOptions:
    """Parse the contents of a quoted training option string.

    ``-m logistic|kde``  learner (default logistic)
    ``-r LAMBDA``        L2 penalty for logistic regression (default 1e-3)
    ``-n ITER``          gradient-descent iterations (default 500)
    ``-e RATE``          learning rate (default 0.1)
    ``-h WIDTH``         KDE bandwidth (default: half the median pairwise distance)
    ``-S SEED``          seed for the KDE bandwidth subsample
    """
    try:
        words = shlex.split(text)
    except ValueError as exc:
        raise MalformedValue(f"cannot split option string {text!r}: {exc}") from None
    values = {}
    it = iter(words)
    for flag in it:
        if flag not in ("-m", "-r", "-n", "-e", "-h", "-S"):
            raise UnknownFlag(flag)
        try:
            arg = next(it)
        except StopIteration:
            raise MalformedValue(f"{flag} needs a value") from None
        if flag == "-m":
            if arg.lower() not in KIND_TAGS:
                raise MalformedValue(f"-m expects 'logistic' or 'kde', got {arg!r}")
            values["model"] = arg.lower()
        elif flag == "-r":
            values["ridge"] = _number(flag, arg, float, lambda v: v >= 0, "a number >= 0")
        elif flag == "-n":
            values["iterations"] = _number(flag, arg, int, lambda v: v >= 1, "an integer >= 1")
        elif flag == "-e":
            values["learning_rate"] = _number(flag, arg, float, lambda v: v > 0, "a number > 0")
        elif flag == "-h":
            values["bandwidth"] = _number(flag, arg, float, lambda v: 0 < v < np.inf, "a number > 0")
        else:
            values["seed"] = _number(flag, arg, int, lambda v: v >= 0, "an integer >= 0")
    return TrainOptions(**values)


# --- models ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LogisticModel:
    w: np.ndarray
    b: float
    kind: str = field(default="logistic", init=False)

    @property
    def d(self) -> int:
        return self.w.shape[0]

    def evaluate(self, x) -> float:
        x = _check_point(x, self.d)
        # tanh(z/2) == 2*sigmoid(z) - 1, and is exactly odd in z
        return float(np.tanh(0.5 * (x @ self.w + self.b)))


@dataclass(frozen=True, eq=False)
class KDEModel:
    side1: np.ndarray
    side2: np.ndarray
    bandwidth: float
    kind: str = field(default="kde", init=False)

    @property
    def d(self) -> int:
        return self.side1.shape[1]

    def densities(self, x) -> tuple[float, float]:
        """Mean unnormalized Gaussian kernel value over each side's samples."""
        x = _check_point(x, self.d)
        scale = -0.5 / self.bandwidth**2
        f1 = np.mean(np.exp(scale * np.sum((self.side1 - x) ** 2, axis=1)))
        f2 = np.mean(np.exp(scale * np.sum((self.side2 - x) ** 2, axis=1)))
        return float(f1), float(f2)

    def evaluate(self, x) -> float:
        f1, f2 = self.densities(x)
        total = f1 + f2
        if total == 0.0:
            return 0.0
        return min(1.0, max(-1.0, (f2 - f1) / total))


BinaryModel = LogisticModel | KDEModel


def evaluate(model: BinaryModel, x) -> float:
    return model.evaluate(x)


def _check_point(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape != (d,):
        raise DimensionMismatch(f"model expects a {d}-dimensional point, got shape {x.shape}")
    return x


# --- training --------------------------------------------------------------


def _check_training_data(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[1] < 1:
        raise DimensionMismatch(f"features must be an (n, d) array with d >= 1, got {X.shape}")
    if y.shape != (X.shape[0],):
        raise DimensionMismatch(f"{X.shape[0]} feature rows but {y.shape} labels")
    if not np.all((y == 1) | (y == -1)):
        raise TrainingError("binary labels must be -1 or +1")
    if not (np.any(y == -1) and np.any(y == 1)):
        raise SingleClassInput("training data needs at least one sample of each label")
    return X, y.astype(float)


def logistic_loss(w, b, X, y, ridge):
    """Mean logistic loss plus (ridge/2)*|w|^2; the bias is not penalized."""
    margin = y * (X @ w + b)
    return -np.mean(log_expit(margin)) + 0.5 * ridge * (w @ w)


def logistic_gradient(w, b, X, y, ridge):
    coef = -y * expit(-y * (X @ w + b))
    grad_w = X.T @ coef / X.shape[0] + ridge * w
    grad_b = np.mean(coef)
    return grad_w, grad_b


def train_logistic(X, y, opts: TrainOptions) -> LogisticModel:
    w = np.zeros(X.shape[1])
    b = 0.0
    for _ in range(opts.iterations):
        grad_w, grad_b = logistic_gradient(w, b, X, y, opts.ridge)
        w = w - opts.learning_rate * grad_w
        b = b - opts.learning_rate * grad_b
    w.setflags(write=False)
    return LogisticModel(w, float(b))


def default_bandwidth(X, seed=None) -> float:
    rng = np.random.default_rng(seed)
    if X.shape[0] > KDE_SUBSAMPLE:
        X = X[np.sort(rng.choice(X.shape[0], KDE_SUBSAMPLE, replace=False))]
    h = float(np.median(pdist(X))) / 2 if X.shape[0] > 1 else 0.0
    return h if h > 0 else 1.0


def train_kde(X, y, opts: TrainOptions) -> KDEModel:
    h = opts.bandwidth if opts.bandwidth is not None else default_bandwidth(X, opts.seed or 0)
    side1 = np.ascontiguousarray(X[y < 0])
    side2 = np.ascontiguousarray(X[y > 0])
    side1.setflags(write=False)
    side2.setflags(write=False)
    return KDEModel(side1, side2, float(h))


def train(X, y, opts: TrainOptions = TrainOptions()) -> BinaryModel:
    """Fit a binary model on features ``X`` (n, d) and labels ``y`` in {-1, +1}."""
    X, y = _check_training_data(X, y)
    if opts.model == "kde":
        return train_kde(X, y, opts)
    return train_logistic(X, y, opts)


# --- file format -----------------------------------------------------------
#
# magic "MBORDER1" | u32 version | u32 kind | u32 d | parameters
# logistic: d x f64 weights, f64 bias
# kde:      f64 bandwidth, u64 n1, u64 n2, n1*d f64, n2*d f64
# all little-endian


def _floats(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def save_model(model: BinaryModel, stream: BinaryIO) -> None:
    stream.write(MAGIC)
    stream.write(struct.pack("<III", FORMAT_VERSION, KIND_TAGS[model.kind], model.d))
    if model.kind == "logistic":
        stream.write(_floats(model.w))
        stream.write(struct.pack("<d", model.b))
    else:
        stream.write(struct.pack("<dQQ", model.bandwidth, len(model.side1), len(model.side2)))
        stream.write(_floats(model.side1))
        stream.write(_floats(model.side2))


def dumps(model: BinaryModel) -> bytes:
    buf = io.BytesIO()
    save_model(model, buf)
    return buf.getvalue()


def _read(stream, n):
    data = stream.read(n)
    if len(data) != n:
        raise TruncatedStream(f"model stream ended early: wanted {n} bytes, got {len(data)}")
    return data


def _read_floats(stream, count):
    arr = np.frombuffer(_read(stream, 8 * count), dtype="<f8").astype(float)
    arr.setflags(write=False)
    return arr


def load_model(stream: BinaryIO) -> BinaryModel:
    head = stream.read(len(MAGIC))
    if len(head) < len(MAGIC):
        raise TruncatedStream("model stream too short to contain a header")
    if head != MAGIC:
        raise CorruptModel(f"bad magic {head!r}, expected {MAGIC!r}")
    version, kind, d = struct.unpack("<III", _read(stream, 12))
    if version != FORMAT_VERSION:
        raise CorruptModel(f"unsupported model format version {version}")
    if d < 1:
        raise CorruptModel("model dimension must be >= 1")
    if kind == KIND_TAGS["logistic"]:
        w = _read_floats(stream, d)
        (b,) = struct.unpack("<d", _read(stream, 8))
        model = LogisticModel(w, b)
    elif kind == KIND_TAGS["kde"]:
        h, n1, n2 = struct.unpack("<dQQ", _read(stream, 24))
        if not h > 0 or n1 < 1 or n2 < 1:
            raise CorruptModel("invalid KDE header")
        side1 = _read_floats(stream, n1 * d).reshape(n1, d)
        side2 = _read_floats(stream, n2 * d).reshape(n2, d)
        model = KDEModel(side1, side2, h)
    else:
        raise CorruptModel(f"unknown model kind tag {kind}")
    if stream.read(1):
        raise CorruptModel("trailing bytes after model parameters")
    return model


def loads(data: bytes) -> BinaryModel:
    return load_model(io.BytesIO(data))
