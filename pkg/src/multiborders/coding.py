"""Coding matrices and recovery of class probabilities from partition outputs.

Row 0 of a coding matrix is the normalization constraint (all ones).  Row
``i + 1`` describes partition ``i``: -1 for classes on side 1, +1 for
classes on side 2, 0 for classes the partition leaves out.  With ``p`` the
class probabilities and ``r`` the binary responses, ``A @ p`` should
equal ``[1, r_1, ..., r_n]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

RANK_RTOL = 1e-10


class CodingError(ValueError):
    pass


class IndexOutOfRange(CodingError):
    pass


class EmptySide(CodingError):
    pass


class OverlappingSides(CodingError):
    pass


class DimensionMismatch(CodingError):
    pass


class Method(enum.Enum):
    LSQ = "lsq"
    LSQ_RIDGE = "lsq_ridge"


@dataclass(frozen=True)
class CodingMatrix:
    entries: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.entries.shape[1]

    @property
    def n_partitions(self) -> int:
        return self.entries.shape[0] - 1


@dataclass(frozen=True)
class ProbabilityVector:
    """Solved class probabilities.

    ``rank_deficient`` marks a minimum-norm solution of an under-determined
    system; ``degenerate`` marks the uniform fallback used when every
    component was clipped to zero.
    """

    p: np.ndarray
    rank_deficient: bool = False
    degenerate: bool = False


@dataclass(frozen=True)
class ConditionReport:
    rank: int
    over_determined: bool


def build_coding_matrix(partitions: Sequence, n_classes: int) -> CodingMatrix:
    """Encode partitions (anything with ``side1``/``side2`` index lists)."""
    entries = np.zeros((len(partitions) + 1, n_classes))
    entries[0] = 1.0
    for i, part in enumerate(partitions, start=1):
        side1, side2 = list(part.side1), list(part.side2)
        if not side1 or not side2:
            raise EmptySide(f"partition {i - 1} has an empty side")
        for j in side1 + side2:
            if not 0 <= j < n_classes:
                raise IndexOutOfRange(f"partition {i - 1}: class {j} not in [0, {n_classes})")
        if set(side1) & set(side2):
            raise OverlappingSides(f"partition {i - 1}: sides share classes")
        entries[i, side1] = -1.0
        entries[i, side2] = 1.0
    entries.setflags(write=False)
    return CodingMatrix(entries)


def condition_report(A: CodingMatrix) -> ConditionReport:
    s = np.linalg.svd(A.entries, compute_uv=False)
    rank = int(np.sum(s > RANK_RTOL * s[0])) if s.size and s[0] > 0 else 0
    return ConditionReport(rank=rank, over_determined=A.n_partitions + 1 > A.n_classes)


def project_to_simplex(p: np.ndarray) -> tuple[np.ndarray, bool]:
    """Clip negatives and renormalize; uniform if nothing survives."""
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if not total > 0:
        return np.full(p.shape, 1.0 / p.size), True
    return p / total, False


class LeastSquaresSolver:
    """Pre-factored solver for repeated solves against one coding matrix.

    Normal equations ``(A^T A + lam I) p = A^T b`` are solved with a Cholesky
    factorization.  An unregularized rank-deficient system falls back to the
    minimum-norm least-squares solution and flags it.
    """

    def __init__(self, A: CodingMatrix, method: Method = Method.LSQ, ridge: float = 0.0):
        method = Method(method)
        if method is Method.LSQ:
            ridge = 0.0
        elif not ridge >= 0:
            raise ValueError(f"ridge parameter must be >= 0, got {ridge}")
        self.A = A
        self.method = method
        self.ridge = float(ridge)
        M = A.entries
        self.rank_deficient = condition_report(A).rank < A.n_classes and self.ridge == 0.0
        if self.rank_deficient:
            self._pinv = np.linalg.pinv(M, rcond=RANK_RTOL)
            self._chol = None
        else:
            gram = M.T @ M + self.ridge * np.eye(A.n_classes)
            self._chol = scipy.linalg.cho_factor(gram, lower=True)

    def raw_solve(self, r) -> np.ndarray:
        """Least-squares solution before the simplex repair."""
        r = np.asarray(r, dtype=float)
        if r.shape != (self.A.n_partitions,):
            raise DimensionMismatch(
                f"expected {self.A.n_partitions} partition responses, got shape {r.shape}"
            )
        b = np.concatenate(([1.0], r))
        if self._chol is None:
            return self._pinv @ b
        return scipy.linalg.cho_solve(self._chol, self.A.entries.T @ b)

    def solve(self, r) -> ProbabilityVector:
        r = np.asarray(r, dtype=float)
        if r.ndim == 1 and np.any(np.abs(r) > 1.0 + 1e-12):
            raise ValueError("partition responses must lie in [-1, 1]")
        p, degenerate = project_to_simplex(self.raw_solve(r))
        return ProbabilityVector(p, rank_deficient=self.rank_deficient, degenerate=degenerate)


def solve_probabilities(A: CodingMatrix, r, method: Method = Method.LSQ, ridge: float = 0.0) -> ProbabilityVector:
    return LeastSquaresSolver(A, method, ridge).solve(r)
