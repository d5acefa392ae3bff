"""Classify points with a trained multi-model.

A two-class node picks child 1 when r >= 0 and child 0 otherwise.  It
contributes (1 + |r|) / 2 to the winner probability.  A partition node
solves for its local class probabilities, descends into the argmax child,
and contributes that probability.  The full distribution is reported only
for a single partition node whose children are all leaves.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .binary_models import DimensionMismatch
from .coding import LeastSquaresSolver, Method, build_coding_matrix
from .composer import TrainedMultiModel
from .control_lang import ControlNode, Leaf, PartitionNode, TwoClassNode


@dataclass(frozen=True, eq=False)
class ClassificationResult:
    predicted_class: int
    probability: float
    # only for single-level partition models: indexed by absolute class
    distribution: np.ndarray | None = None

    @property
    def full(self) -> bool:
        return self.distribution is not None


@dataclass
class Counters:
    binary_evaluations: int = 0


def is_single_level(tree: ControlNode) -> bool:
    return isinstance(tree, PartitionNode) and all(isinstance(c, Leaf) for c in tree.children)


@lru_cache(maxsize=256)
def _solver(partitions, n_local, method, ridge) -> LeastSquaresSolver:
    return LeastSquaresSolver(build_coding_matrix(partitions, n_local), method, ridge)


class Classifier:
    """Binds a trained model to the probability-solving method."""

    def __init__(self, model: TrainedMultiModel, method: Method = Method.LSQ, ridge: float = 0.0):
        self.model = model
        self.method = Method(method)
        self.ridge = ridge
        self.d = model.d
        self.single_level = is_single_level(model.tree)

    def _evaluate(self, name, x, counters):
        counters.binary_evaluations += 1
        return self.model.models[name].evaluate(x)

    def _local_probabilities(self, node: PartitionNode, x, counters):
        r = [self._evaluate(p.spec.path, x, counters) for p in node.partitions]
        solver = _solver(node.partitions, len(node.children), self.method, self.ridge)
        return solver.solve(np.clip(r, -1.0, 1.0)).p

    def _descend(self, node: ControlNode, x, counters) -> tuple[int, float]:
        prob = 1.0
        while not isinstance(node, Leaf):
            if isinstance(node, TwoClassNode):
                r = self._evaluate(node.spec.path, x, counters)
                winner = 1 if r >= 0 else 0
                q = (1.0 + abs(r)) / 2.0
            else:
                p = self._local_probabilities(node, x, counters)
                winner = int(np.argmax(p))
                q = float(p[winner])
            prob *= q
            node = node.children[winner]
        return node.cls, prob

    def classify_point(self, x, counters: Counters | None = None) -> ClassificationResult:
        counters = counters if counters is not None else Counters()
        x = np.asarray(x, dtype=float)
        if self.d is not None and x.shape != (self.d,):
            raise DimensionMismatch(f"model expects {self.d}-dimensional points, got shape {x.shape}")
        tree = self.model.tree
        if self.single_level:
            p = self._local_probabilities(tree, x, counters)
            classes = [leaf.cls for leaf in tree.children]
            dist = np.zeros(max(classes) + 1)
            dist[classes] = p
            winner = int(np.argmax(p))
            # ties go to the lowest class
            best = min((c for c, v in zip(classes, p) if v == p[winner]))
            return ClassificationResult(best, float(dist[best]), dist)
        cls, prob = self._descend(tree, x, counters)
        return ClassificationResult(cls, prob)

    def classify_batch(self, points, jobs: int = 1) -> tuple[list[ClassificationResult], Counters]:
        points = np.asarray(points, dtype=float)
        if points.size == 0:
            return [], Counters()
        if points.ndim != 2:
            raise DimensionMismatch(f"expected an (n, d) array of points, got shape {points.shape}")
        if jobs <= 1:
            counters = Counters()
            return [self.classify_point(x, counters) for x in points], counters

        def run(chunk):
            c = Counters()
            return [self.classify_point(x, c) for x in chunk], c

        chunks = np.array_split(points, min(jobs, len(points)))
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(run, chunks))
        results = [r for part, _ in parts for r in part]
        return results, Counters(sum(c.binary_evaluations for _, c in parts))


def classify_point(model: TrainedMultiModel, x, **kwargs) -> ClassificationResult:
    return Classifier(model, **kwargs).classify_point(x)


def classify_batch(model: TrainedMultiModel, points, jobs: int = 1, **kwargs):
    return Classifier(model, **kwargs).classify_batch(points, jobs=jobs)
