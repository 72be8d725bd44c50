"""Spectral radii, irreducibility and the stretch-factor order."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from endtrack.spectral import (
    ContractError,
    LambdaVector,
    TransitionMatrix,
    compare_lambda,
    is_exponential,
    is_irreducible,
    is_nilpotent,
    pf_left_eigenvector,
    scc,
    spectral_radius,
    transition_matrix,
)

PHI = (1 + 5**0.5) / 2


def eig_radius(a) -> float:
    """Independent oracle: largest eigenvalue modulus from LAPACK."""
    a = np.asarray(a, dtype=float)
    return float(max(abs(np.linalg.eigvals(a)))) if a.size else 0.0


def test_fibonacci_matrix():
    assert spectral_radius([[1, 1], [1, 0]]) == pytest.approx(PHI, abs=1e-9)


@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_permutations_have_radius_exactly_one(n):
    rng = np.random.default_rng(n)
    p = np.eye(n, dtype=int)[rng.permutation(n)]
    assert spectral_radius(p) == 1.0


def test_nilpotent_is_exactly_zero():
    a = [[0, 1, 3], [0, 0, 2], [0, 0, 0]]
    assert is_nilpotent(a)
    assert spectral_radius(a) == 0.0


def test_doubling_block():
    assert spectral_radius([[2]]) == 2.0


def test_reducible_takes_the_largest_block():
    a = [[3, 0, 0], [1, 1, 1], [0, 1, 1]]
    assert spectral_radius(a) == pytest.approx(3.0, abs=1e-9)


matrices = st.integers(1, 6).flatmap(
    lambda n: st.lists(st.lists(st.integers(0, 3), min_size=n, max_size=n), min_size=n, max_size=n)
)


@settings(max_examples=150, deadline=None)
@given(matrices)
def test_radius_matches_eigenvalue_oracle(a):
    assert spectral_radius(a) == pytest.approx(eig_radius(a), abs=1e-7)


@settings(max_examples=100, deadline=None)
@given(matrices)
def test_pf_left_eigenvector(a):
    a = np.asarray(a)
    if not is_irreducible(a):
        with pytest.raises(ContractError):
            pf_left_eigenvector(a)
        return
    v = pf_left_eigenvector(a)
    r = spectral_radius(a)
    assert (v > 0).all()
    assert v.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(v @ a, r * v, atol=1e-8)


def test_is_exponential_needs_irreducible():
    with pytest.raises(ContractError):
        is_exponential([[0, 0], [0, 0]])
    assert not is_exponential([[0, 1], [1, 0]])
    assert is_exponential([[1, 1], [1, 0]])


def test_scc_orders_sinks_first():
    succ = {"a": ["b"], "b": ["a", "c"], "c": []}
    comps = scc(["a", "b", "c"], succ)
    assert comps[0] == ["c"]
    assert sorted(comps[1]) == ["a", "b"]


def test_transition_matrix_counts_crossings(F):
    t = transition_matrix(F, ["core:p", "core:q"])
    assert t.table.tolist() == [[1, 1], [1, 0]]
    assert t.to_csv() == "1,1\n1,0"


def test_transition_matrix_rejects_negative():
    with pytest.raises(ContractError):
        TransitionMatrix(("x",), np.array([[-1]]))


def test_lambda_vector_order_and_padding():
    assert LambdaVector((2.0, 3.0)).values == (3.0, 2.0)
    assert compare_lambda(LambdaVector((2.0,)), LambdaVector((2.0, 1.5))) == "less"
    assert compare_lambda(LambdaVector((3.0,)), LambdaVector((2.0, 2.0))) == "greater"
    assert compare_lambda(LambdaVector((2.0,)), LambdaVector((2.0 + 1e-12,))) == "equal"
    assert compare_lambda(LambdaVector(()), LambdaVector(())) == "equal"
    with pytest.raises(ContractError):
        LambdaVector((1.0,))
    assert str(LambdaVector((2.0,))) == "(2.000000000)"
