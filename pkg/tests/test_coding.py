from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from multiborders.coding import (
    DimensionMismatch, EmptySide, IndexOutOfRange, LeastSquaresSolver, Method, OverlappingSides,
    build_coding_matrix, condition_report, project_to_simplex, solve_probabilities,
)


def part(side1, side2):
    return SimpleNamespace(side1=side1, side2=side2)


ADJACENT = [part(list(range(k)), list(range(k, 8))) for k in range(1, 8)]
ONE_VS_REST_3 = [part([i], [j for j in range(3) if j != i]) for i in range(3)]


# --- exact oracles ---------------------------------------------------------

def rank_by_row_reduction(M):
    rows = [[Fraction(int(v)) for v in row] for row in M]
    rank, n_cols = 0, len(rows[0])
    for col in range(n_cols):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        for r in range(len(rows)):
            if r != rank and rows[r][col] != 0:
                f = rows[r][col] / rows[rank][col]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def normal_equations_oracle(M, b):
    """Solve (M^T M) p = M^T b by Gauss-Jordan elimination in exact arithmetic."""
    M = [[Fraction(int(v)) for v in row] for row in M]
    b = [Fraction(v) for v in b]
    n = len(M[0])
    G = [[sum(M[k][i] * M[k][j] for k in range(len(M))) for j in range(n)]
         + [sum(M[k][i] * b[k] for k in range(len(M)))] for i in range(n)]
    for col in range(n):
        pivot = next(r for r in range(col, n) if G[r][col] != 0)
        G[col], G[pivot] = G[pivot], G[col]
        G[col] = [v / G[col][col] for v in G[col]]
        for r in range(n):
            if r != col and G[r][col] != 0:
                f = G[r][col]
                G[r] = [a - f * c for a, c in zip(G[r], G[col])]
    return np.array([float(G[i][n]) for i in range(n)])


def random_simplex(rng, n):
    return rng.dirichlet(np.ones(n))


# --- build_coding_matrix ---------------------------------------------------

def test_first_adjacent_row():
    A = build_coding_matrix([part([0], [1, 2, 3, 4, 5, 6, 7])], 8)
    assert A.entries[1].tolist() == [-1, 1, 1, 1, 1, 1, 1, 1]
    assert A.entries[0].tolist() == [1] * 8


def test_one_vs_rest_rows():
    A = build_coding_matrix(ONE_VS_REST_3, 3)
    assert A.entries.tolist() == [[1, 1, 1], [-1, 1, 1], [1, -1, 1], [1, 1, -1]]


def test_adjacent_scheme_matrix():
    A = build_coding_matrix(ADJACENT, 8)
    assert A.entries.shape == (8, 8)
    for i in range(1, 8):
        assert A.entries[i].tolist() == [-1] * i + [1] * (8 - i)


def test_omitted_classes_get_zero():
    A = build_coding_matrix([part([0], [2])], 3)
    assert A.entries[1].tolist() == [-1, 0, 1]


@pytest.mark.parametrize("p, exc", [
    (part([0], [3]), IndexOutOfRange),
    (part([], [1]), EmptySide),
    (part([0, 1], [1]), OverlappingSides),
])
def test_build_errors(p, exc):
    with pytest.raises(exc):
        build_coding_matrix([p], 3)


# --- condition_report ------------------------------------------------------

def test_condition_adjacent():
    A = build_coding_matrix(ADJACENT, 8)
    report = condition_report(A)
    assert report.rank == rank_by_row_reduction(A.entries) == 8
    # 7 partitions + normalization row = 8 equations for 8 unknowns: square
    assert A.entries.shape == (8, 8)
    assert not report.over_determined


def test_condition_one_vs_rest():
    A = build_coding_matrix(ONE_VS_REST_3, 3)
    report = condition_report(A)
    assert report.rank == rank_by_row_reduction(A.entries) == 3
    assert report.over_determined


def test_condition_single_partition():
    report = condition_report(build_coding_matrix([part([0], [1])], 2))
    assert report.rank == 2 and not report.over_determined


def test_condition_rank_deficient():
    # two classes that are never separated
    A = build_coding_matrix([part([0, 1], [2])], 3)
    assert condition_report(A).rank == rank_by_row_reduction(A.entries) == 2


# --- solve_probabilities ---------------------------------------------------

def test_two_class_symmetry():
    pv = solve_probabilities(build_coding_matrix([part([0], [1])], 2), [0.0])
    np.testing.assert_allclose(pv.p, [0.5, 0.5], atol=1e-15)


def test_one_vs_rest_one_hot():
    pv = solve_probabilities(build_coding_matrix(ONE_VS_REST_3, 3), [-1.0, 1.0, 1.0])
    np.testing.assert_allclose(pv.p, [1, 0, 0], atol=1e-12)
    assert not pv.rank_deficient and not pv.degenerate


@pytest.mark.parametrize("partitions, n", [(ADJACENT, 8), (ONE_VS_REST_3, 3)])
def test_recovery_matches_oracle(partitions, n):
    A = build_coding_matrix(partitions, n)
    solver = LeastSquaresSolver(A)
    rng = np.random.default_rng(20)
    for _ in range(100):
        p = random_simplex(rng, n)
        b = A.entries @ p
        raw = solver.raw_solve(b[1:])
        oracle = normal_equations_oracle(A.entries, b)
        assert np.max(np.abs(raw - oracle)) < 1e-10
        assert np.max(np.abs(solver.solve(b[1:]).p - p)) < 1e-10


def test_rank_deficient_minimum_norm():
    A = build_coding_matrix([part([0, 1], [2])], 3)
    pv = solve_probabilities(A, [0.0])
    assert pv.rank_deficient
    # the two inseparable classes share their half equally
    np.testing.assert_allclose(pv.p, [0.25, 0.25, 0.5], atol=1e-12)


def test_ridge_not_flagged_rank_deficient():
    A = build_coding_matrix([part([0, 1], [2])], 3)
    pv = solve_probabilities(A, [0.0], Method.LSQ_RIDGE, 0.1)
    assert not pv.rank_deficient
    assert abs(pv.p.sum() - 1) < 1e-12


def test_degenerate_fallback_is_uniform():
    p, degenerate = project_to_simplex(np.array([-1.0, -2.0, 0.0]))
    assert degenerate
    assert p.tolist() == pytest.approx([1 / 3] * 3)


def test_clip_then_renormalize():
    p, degenerate = project_to_simplex(np.array([-0.2, 0.6, 0.6]))
    assert not degenerate
    assert p.tolist() == [0.0, 0.5, 0.5]


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        solve_probabilities(build_coding_matrix(ADJACENT, 8), [0.0] * 6)


def test_response_out_of_range():
    with pytest.raises(ValueError):
        solve_probabilities(build_coding_matrix([part([0], [1])], 2), [1.5])


# --- properties ------------------------------------------------------------

@st.composite
def full_rank_systems(draw):
    n = draw(st.integers(2, 7))
    parts = []
    for _ in range(draw(st.integers(n - 1, n + 3))):
        perm = draw(st.permutations(range(n)))
        size = draw(st.integers(2, n))
        cut = draw(st.integers(1, size - 1))
        parts.append(part(list(perm[:cut]), list(perm[cut:size])))
    A = build_coding_matrix(parts, n)
    seed = draw(st.integers(0, 2**32 - 1))
    return A, seed


@settings(max_examples=200, deadline=None)
@given(full_rank_systems())
def test_exact_recovery(case):
    A, seed = case
    assume(condition_report(A).rank == A.n_classes)
    p = random_simplex(np.random.default_rng(seed), A.n_classes)
    r = (A.entries @ p)[1:]
    assert np.max(np.abs(solve_probabilities(A, r).p - p)) < 1e-9


@settings(max_examples=200, deadline=None)
@given(full_rank_systems())
def test_permutation_equivariance(case):
    A, seed = case
    assume(condition_report(A).rank == A.n_classes)
    rng = np.random.default_rng(seed)
    p = random_simplex(rng, A.n_classes)
    perm = rng.permutation(A.n_classes)
    r = (A.entries @ p)[1:]
    permuted = type(A)(A.entries[:, perm])
    np.testing.assert_allclose(solve_probabilities(permuted, r).p, solve_probabilities(A, r).p[perm],
                               atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(full_rank_systems(), st.lists(st.sampled_from([-1.0, 1.0, 0.0, 0.5, -0.3]), min_size=12, max_size=12))
def test_output_always_on_simplex(case, values):
    A, seed = case
    rng = np.random.default_rng(seed)
    r = np.where(rng.random(A.n_partitions) < 0.5, values[:A.n_partitions], rng.uniform(-1, 1, A.n_partitions))
    for method in (Method.LSQ, Method.LSQ_RIDGE):
        p = solve_probabilities(A, r, method, 0.01).p
        assert np.all(p >= 0)
        assert abs(p.sum() - 1) < 1e-9


def test_ridge_limit_matches_lsq():
    A = build_coding_matrix(ADJACENT, 8)
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = random_simplex(rng, 8)
        r = (A.entries @ p)[1:]
        lsq = solve_probabilities(A, r).p
        ridge = solve_probabilities(A, r, Method.LSQ_RIDGE, 1e-10).p
        assert np.max(np.abs(lsq - ridge)) < 1e-6
