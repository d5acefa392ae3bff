"""Train every binary model of a control tree and export the result.

Model keys are node paths.  The root is ``0``, and child ``k`` of node
``P`` is ``P.k``.  A two-class node's model is keyed by its own path.
Partition ``i`` of a partition node at ``P`` is keyed ``P.p<i>``.
Exported files are named ``<base>.<key>.mbm``.  The classification control
file is ``<base>.mbc``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import binary_models
from .binary_models import BinaryModel, TrainOptions
from .control_lang import (
    ControlNode, Dialect, Leaf, ModelName, Partition, PartitionNode, TrainingOptions,
    TwoClassNode, iter_nodes, iter_specs, load, serialize, validate,
)
from .data import Dataset

CONTROL_SUFFIX = ".mbc"
MODEL_SUFFIX = ".mbm"


class ComposerError(Exception):
    pass


class ValidationFailed(ComposerError):
    def __init__(self, report):
        self.report = report
        lines = "\n".join(f"  {v}" for v in report.violations)
        super().__init__(f"control tree failed validation:\n{lines}")


class EmptySideData(ComposerError):
    pass


class NodeTrainingError(ComposerError):
    """A binary model could not be trained; names the node it belongs to."""

    def __init__(self, key, cause):
        self.key = key
        self.cause = cause
        super().__init__(f"node {key}: {cause}")


def collect_subtree_classes(node: ControlNode) -> frozenset[int]:
    return frozenset(n.cls for _, n in iter_nodes(node) if isinstance(n, Leaf))


def child_class_sets(node: ControlNode) -> list[frozenset[int]]:
    return [collect_subtree_classes(c) for c in getattr(node, "children", ())]


def relabel_for_partition(data: Dataset, side1, side2) -> tuple[np.ndarray, np.ndarray]:
    """Rows whose class is on either side, labelled -1 (side 1) / +1 (side 2).

    Rows from other classes are dropped; row order is preserved.
    """
    side1, side2 = set(side1), set(side2)
    if side1 & side2:
        raise ValueError(f"sides overlap on classes {sorted(side1 & side2)}")
    in1 = np.isin(data.labels, list(side1))
    in2 = np.isin(data.labels, list(side2))
    for name, mask, side in (("side 1", in1, side1), ("side 2", in2, side2)):
        if not mask.any():
            raise EmptySideData(f"{name} (classes {sorted(side)}) has no training samples")
    keep = in1 | in2
    y = np.where(in2[keep], 1, -1)
    return data.features[keep], y


@dataclass(frozen=True)
class PlanStep:
    """One binary model to train: which classes go on each side."""

    key: str
    options: str
    side1: frozenset[int]
    side2: frozenset[int]
    n1: int | None = None
    n2: int | None = None


def _binary_jobs(tree: ControlNode):
    for path, node in iter_nodes(tree):
        if isinstance(node, TwoClassNode):
            sets = child_class_sets(node)
            yield path, node.spec, sets[0], sets[1]
        elif isinstance(node, PartitionNode):
            sets = child_class_sets(node)
            for i, part in enumerate(node.partitions):
                side1 = frozenset().union(*(sets[j] for j in part.side1))
                side2 = frozenset().union(*(sets[j] for j in part.side2))
                yield f"{path}.p{i}", part.spec, side1, side2


def plan(tree: ControlNode, data: Dataset | None = None) -> list[PlanStep]:
    """List the binary models a training tree needs, in depth-first order."""
    steps = []
    for key, spec, side1, side2 in _binary_jobs(tree):
        text = spec.options if isinstance(spec, TrainingOptions) else spec.path
        n1 = n2 = None
        if data is not None:
            n1 = int(np.isin(data.labels, list(side1)).sum())
            n2 = int(np.isin(data.labels, list(side2)).sum())
        steps.append(PlanStep(key, text, side1, side2, n1, n2))
    return steps


@dataclass
class TrainedMultiModel:
    """Classification-dialect tree whose model names are keys into ``models``."""

    tree: ControlNode
    models: dict[str, BinaryModel]
    sample_counts: dict[str, tuple[int, int]] = field(default_factory=dict)

    @property
    def d(self) -> int | None:
        dims = {m.d for m in self.models.values()}
        if len(dims) > 1:
            raise ValueError(f"binary models disagree on dimension: {sorted(dims)}")
        return dims.pop() if dims else None


def _rename(node: ControlNode, name_of: Callable[[str], str], path: str = "0") -> ControlNode:
    if isinstance(node, Leaf):
        return node
    children = tuple(_rename(c, name_of, f"{path}.{k}") for k, c in enumerate(node.children))
    if isinstance(node, TwoClassNode):
        return TwoClassNode(ModelName(name_of(path)), children)
    parts = tuple(Partition(ModelName(name_of(f"{path}.p{i}")), p.side1, p.side2)
                  for i, p in enumerate(node.partitions))
    return PartitionNode(parts, children)


def train_tree(tree: ControlNode, data: Dataset, seed: int = 0, jobs: int = 1,
               trainer=binary_models.train) -> TrainedMultiModel:
    """Train one binary model per two-class node and per partition.

    A two-class node sees only the classes beneath it.  A partition sees the
    classes beneath the children it lists.  ``seed`` applies to option
    strings without ``-S``.  ``trainer(X, y, opts)`` is injectable for
    instrumentation.
    """
    if any(not isinstance(s, TrainingOptions) for s in iter_specs(tree)):
        raise ComposerError("training requires a training-dialect control tree")
    report = validate(tree, data.n_classes)
    if not report.ok:
        raise ValidationFailed(report)

    prepared = []
    for key, spec, side1, side2 in _binary_jobs(tree):
        try:
            opts = binary_models.parse_options(spec.options)
            X, y = relabel_for_partition(data, side1, side2)
        except (binary_models.OptionError, EmptySideData) as exc:
            raise NodeTrainingError(key, exc) from exc
        if opts.seed is None:
            opts = TrainOptions(**{**opts.__dict__, "seed": seed})
        prepared.append((key, X, y, opts))

    def run(job):
        key, X, y, opts = job
        try:
            return trainer(X, y, opts)
        except (binary_models.TrainingError, binary_models.DimensionMismatch) as exc:
            raise NodeTrainingError(key, exc) from exc

    if jobs > 1 and len(prepared) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trained = list(pool.map(run, prepared))
    else:
        trained = [run(job) for job in prepared]

    models = {key: m for (key, *_), m in zip(prepared, trained)}
    counts = {key: (int((y < 0).sum()), int((y > 0).sum())) for key, _, y, _ in prepared}
    return TrainedMultiModel(_rename(tree, lambda p: p), models, counts)


def model_filename(base_name: str, key: str) -> str:
    return f"{base_name}.{key}{MODEL_SUFFIX}"


def _keyed_names(tree: ControlNode) -> list[tuple[str, str]]:
    """``(node-path key, model name)`` for every binary model in a classification tree."""
    return [(key, spec.path) for key, spec, _, _ in _binary_jobs(tree)]


def export(model: TrainedMultiModel, directory, base_name: str) -> tuple[str, list[str]]:
    """Write ``<base>.mbc`` and one ``.mbm`` file per binary model.

    Returns the control file text and the written model paths.  The control
    file names model files relative to its own directory.
    """
    os.makedirs(directory, exist_ok=True)
    tree = _rename(model.tree, lambda key: model_filename(base_name, key))
    written = []
    for key, name in _keyed_names(model.tree):
        path = os.path.join(directory, model_filename(base_name, key))
        try:
            with open(path, "wb") as f:
                binary_models.save_model(model.models[name], f)
        except OSError as exc:
            raise OSError(f"cannot write model file {path}: {exc.strerror}") from exc
        written.append(path)
    control_text = serialize(tree) + "\n"
    control_path = os.path.join(directory, base_name + CONTROL_SUFFIX)
    try:
        with open(control_path, "w", encoding="utf-8") as f:
            f.write(control_text)
    except OSError as exc:
        raise OSError(f"cannot write control file {control_path}: {exc.strerror}") from exc
    return control_text, written


def load_trained(control_path) -> TrainedMultiModel:
    """Read a classification control file and the model files it names."""
    tree = load(control_path, Dialect.CLASSIFICATION)
    base = os.path.dirname(os.path.abspath(control_path))
    models = {}
    for spec in iter_specs(tree):
        if spec.path in models:
            continue
        path = spec.path if os.path.isabs(spec.path) else os.path.join(base, spec.path)
        try:
            with open(path, "rb") as f:
                models[spec.path] = binary_models.load_model(f)
        except OSError as exc:
            raise OSError(f"cannot read model file {path}: {exc.strerror}") from exc
        except binary_models.ModelFormatError as exc:
            raise type(exc)(f"{path}: {exc}") from exc
    return TrainedMultiModel(tree, models)
