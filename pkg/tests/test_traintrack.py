"""Core subdivision, verification, the pipeline and train-track promotion."""

from __future__ import annotations

import random
import time
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from builders import correspondence_failures, lambda_never_increases, sample_loops
from endtrack import address as ad
from endtrack.filtration import compatible_filtration, lambda_vector
from endtrack.fixtures import perturbed_ladder
from endtrack.mapcore import validate_map
from endtrack.spectral import ContractError, compare_lambda
from endtrack.traintrack import (
    CapExceeded,
    Caps,
    backtracking_turns,
    boundedness_constant,
    core_extent,
    core_subdivision,
    flat_log,
    is_bounded,
    is_train_track,
    promote_to_train_track,
    to_relative_train_track,
    verify_rtt,
)

PHI = (1 + 5**0.5) / 2


# ------------------------------------------------------------ orbit oracle
def point_step(m, edges, e, t):
    """Image of the point at parameter ``t`` of ``e``, or None once it leaves ``edges``."""
    w = m.edge_image(e)
    s = t * len(w)
    j = min(int(s), len(w) - 1)
    x, local = w[j], s - j
    if ad.unorient(x) not in edges:
        return None
    return (ad.unorient(x), 1 - local if ad.is_reversed(x) else local)


def stays(m, edges, e, t, steps=200):
    seen = set()
    cur = (e, Fraction(t))
    for _ in range(steps):
        if cur in seen:
            return True
        seen.add(cur)
        cur = point_step(m, edges, *cur)
        if cur is None:
            return False
    return True


def test_core_extent_of_a_minus_one(L):
    lo, hi = core_extent(L, ["core:a-1"])["core:a-1"]
    assert (lo, hi) == (Fraction(1, 12), Fraction(107, 156))
    edges = {"core:a-1"}
    assert stays(L, edges, "core:a-1", lo) and stays(L, edges, "core:a-1", hi)
    outside = [Fraction(i, 1000) for i in range(0, 1001) if not lo <= Fraction(i, 1000) <= hi]
    assert all(not stays(L, edges, "core:a-1", t) for t in outside)


def test_core_subdivision_of_L(L):
    m2, recs, maps = core_subdivision(L, 1)
    assert validate_map(m2) == []
    assert [r.params["reason"] for r in recs] == ["core"]
    f = compatible_filtration(m2)
    finite = {s.edges: s.radius for s in f.finite_strata()}
    assert finite == {("core:a-1.0",): 1.0, ("core:a-1.2",): 0.0, ("core:a-1.1",): 2.0}
    assert len(m2.edge_image("core:a-1.1")) == 10
    assert correspondence_failures(L, m2, maps, sample_loops(L, random.Random(3), 10)) == []


def test_boundedness(L, S, F):
    for m in (L, S, F):
        f = compatible_filtration(m)
        assert is_bounded(m, f, boundedness_constant(m, f))
    assert boundedness_constant(L) >= 1


# ------------------------------------------------------------ verification
def test_raw_L_fails_df_closure(L):
    rep = verify_rtt(L)
    assert not rep.ok
    assert not rep.checks["df_closure"].ok
    assert rep.checks["df_closure"].witness == "core:a-1"
    assert rep.checks["infinite_strata"].ok


@pytest.mark.parametrize("name", ["S", "F"])
def test_fixtures_already_pass(name, request):
    assert verify_rtt(request.getfixturevalue(name)).ok


def test_report_lines(L):
    lines = verify_rtt(L).lines()
    assert lines[-1] == "overall: FAIL"
    assert any(line.startswith("df_closure: FAIL witness=core:a-1") for line in lines)


# ---------------------------------------------------------------- pipeline
def test_L_pipeline(L_rtt):
    r = L_rtt
    assert r.report.ok
    exp = r.filtration.exponential_strata()
    assert len(exp) == 1 and len(exp[0].edges) == 1
    assert r.lam == pytest.approx(2.0, abs=1e-9)
    names = [x.name for x in flat_log(r.log)]
    assert names[0] == "subdivide" and "fold" in names


def test_F_and_S_pipelines(F_rtt, S_rtt):
    assert F_rtt.report.ok and F_rtt.lam == pytest.approx(PHI, abs=1e-9)
    assert S_rtt.report.ok and S_rtt.lam == 0.0 and S_rtt.Lambda.values == ()
    assert F_rtt.stats["moves"] == 0


def test_L_log_never_raises_lambda(L, L_rtt):
    assert lambda_never_increases(L_rtt.log, lambda_vector(L))


def test_L_maps_are_equivalences(L, L_rtt):
    loops = sample_loops(L, random.Random(11), 15)
    assert correspondence_failures(L, L_rtt.map, L_rtt.maps, loops) == []


def test_move_cap(L):
    with pytest.raises(CapExceeded) as exc:
        to_relative_train_track(L, Caps(moves=1))
    assert validate_map(exc.value.best) == []


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_randomized_pipeline(seed):
    m = perturbed_ladder(seed)
    t0 = time.perf_counter()
    r = to_relative_train_track(m)
    assert time.perf_counter() - t0 < 10
    assert r.report.ok
    assert lambda_never_increases(r.log, lambda_vector(m))
    assert compare_lambda(r.Lambda, lambda_vector(m)) != "greater"
    assert correspondence_failures(m, r.map, r.maps, sample_loops(m, random.Random(seed), 5)) == []


# --------------------------------------------------------------- promotion
def test_promotion_no_ops(L_rtt, F_rtt):
    for r in (L_rtt, F_rtt):
        assert is_train_track(r.map)
        p = promote_to_train_track(r)
        assert p.stats["promotion_folds"] == 0
        assert compare_lambda(p.Lambda, r.Lambda) == "equal"


def test_promotion_folds_backtracking_turns():
    m = perturbed_ladder(15)
    r = to_relative_train_track(m)
    assert backtracking_turns(r.map)
    p = promote_to_train_track(r)
    assert p.stats["promotion_folds"] == 4
    assert is_train_track(p.map) and p.report.ok
    assert compare_lambda(p.Lambda, r.Lambda) == "equal"
    assert correspondence_failures(m, p.map, p.maps, sample_loops(m, random.Random(15), 8)) == []


def test_promotion_cap():
    r = to_relative_train_track(perturbed_ladder(31))
    with pytest.raises(CapExceeded):
        promote_to_train_track(r, max_folds=16)


def test_promotion_preconditions(L, S_rtt):
    with pytest.raises(ContractError):
        promote_to_train_track(S_rtt)
