"""Edge fates and compatible filtrations."""

from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from endtrack.filtration import (
    BACKWARD,
    ESCAPING,
    NEITHER,
    brute_force_fate,
    check_invariance,
    compatible_filtration,
    fate_table,
    lambda_vector,
    top_lambda,
)
from endtrack.fixtures import perturbed_ladder

PHI = (1 + 5**0.5) / 2


def kinds(m):
    return [s.kind for s in compatible_filtration(m).strata]


def test_L_strata(L):
    f = compatible_filtration(L)
    assert kinds(L) == ["escaping", "finite", "backward"]
    mid = f.strata[1]
    assert mid.edges == ("core:a-1",)
    assert mid.exponential and mid.radius == 2.0
    assert mid.matrix.table.tolist() == [[2]]


def test_S_has_no_middle(S):
    assert kinds(S) == ["escaping", "backward"]
    assert lambda_vector(S).values == ()
    assert top_lambda(S) == 0.0


def test_F_strata(F):
    # the ray edge of copy 0 returns to itself, so it is a finite stratum of radius 1
    f = compatible_filtration(F)
    assert kinds(F) == ["escaping", "finite", "finite"]
    assert f.strata[1].edges == ("R@0:r",) and f.strata[1].radius == 1.0
    assert not f.strata[1].exponential
    assert f.strata[2].edges == ("core:p", "core:q")
    assert f.strata[2].radius == pytest.approx(PHI, abs=1e-9)


def test_L_fates(L):
    ft = fate_table(L)
    assert ft.fate("core:a-1") == NEITHER
    assert ft.fate("core:a0") == ESCAPING
    assert ft.fate("L@0:b") == BACKWARD
    assert ft.fate("R@7:a") == ESCAPING


def test_backward_takes_priority_on_the_pure_shift(S):
    # every core edge of the shift escapes both ways; it is filed as backward
    ft = fate_table(S)
    assert all(ft.fate(e) == BACKWARD for e in S.graph.core_edges())


@pytest.mark.parametrize("name", ["L", "S", "F"])
def test_fates_match_brute_force_on_fixtures(name, request):
    m = request.getfixturevalue(name)
    ft = fate_table(m)
    for e in ft.cstar:
        assert ft.fate(e) == brute_force_fate(m, e), e


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_fates_match_brute_force_randomized(seed):
    m = perturbed_ladder(seed)
    ft = fate_table(m)
    for e in ft.cstar:
        assert ft.fate(e) == brute_force_fate(m, e)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_filtration_is_invariant(seed):
    m = perturbed_ladder(seed)
    f = compatible_filtration(m)
    assert check_invariance(m, f).ok
    assert f.strata[0].kind == "escaping"
    for s in f.finite_strata():
        assert s.irreducible


@pytest.mark.parametrize("name", ["L", "S", "F"])
def test_fixture_filtrations_are_invariant(name, request):
    m = request.getfixturevalue(name)
    assert check_invariance(m, compatible_filtration(m)).ok


def test_level_of_deep_copies(L):
    f = compatible_filtration(L)
    assert f.level_of("R@9:b") == 0
    assert f.level_of("L@9:b") == f.top
    assert f.level_of("~core:a-1") == 1
