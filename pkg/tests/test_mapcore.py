"""Map evaluation, tightening, ends and turns."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from builders import W, spur_rose
from endtrack import address as ad
from endtrack.fixtures import Ladder, perturbed_ladder
from endtrack.mapcore import (
    CollapsedEdgeError,
    classify_ends,
    classify_turn,
    cyclic_tighten,
    derivative,
    iterate_loop,
    reverse_word,
    tighten_word,
    turn,
    turn_map,
    validate_map,
)

letters = st.sampled_from(["core:a", "~core:a", "core:b", "~core:b", "R@0:r", "~R@0:r"])
words = st.lists(letters, max_size=30).map(tuple)


def naive_tighten(w):
    """Repeatedly delete the leftmost cancelling pair."""
    w = list(w)
    changed = True
    while changed:
        changed = False
        for i in range(len(w) - 1):
            if w[i + 1] == ad.reverse(w[i]):
                del w[i : i + 2]
                changed = True
                break
    return tuple(w)


@given(words)
def test_tighten_matches_naive_reduction(w):
    assert tighten_word(w) == naive_tighten(w)


@given(words)
def test_tighten_is_idempotent_and_cancels_inverse(w):
    t = tighten_word(w)
    assert tighten_word(t) == t
    assert tighten_word(w + reverse_word(w)) == ()


@given(words)
def test_cyclic_tighten_has_no_wrap_cancellation(w):
    c = cyclic_tighten(w)
    assert tighten_word(c) == c
    if len(c) >= 2:
        assert c[0] != ad.reverse(c[-1])


def test_ladder_ends(L, S):
    for m in (L, S):
        ends = classify_ends(m)
        assert ends["L"].kind == "repelling" and ends["L"].drift == -1
        assert ends["R"].kind == "attracting" and ends["R"].drift == 1


def test_fib_ray_end_attracts(F):
    assert classify_ends(F)["R"].kind == "attracting"


def test_deep_images_follow_the_shift_rule(L):
    for n in range(L.depth, L.depth + 5):
        for x in "abc":
            base = L.edge_image(ad.at("R", L.depth - 1, x))
            assert L.edge_image(ad.at("R", n, x)) == tuple(ad.shift_address(y, n - L.depth + 1) for y in base)


def test_tau_image_of_a_minus_one(L):
    img = L.edge_image("core:a-1")
    assert len(img) == 13
    assert img == Ladder().word("~b-1 a-1 c-1 c0 ~a1 ~b0 a0 ~c-1 ~a-1 b-1 b0 a1 ~c0")


def test_image_paths_are_connected(L):
    g = L.graph
    for e in L.stored_edges():
        w = L.edge_image(e)
        assert g.tail(w[0]) == L.vertex_image(g.tail(e))
        assert g.head(w[-1]) == L.vertex_image(g.head(e))
        for x, y in zip(w, w[1:]):
            assert g.head(x) == g.tail(y)


def test_derivative_of_a_minus_one(L):
    assert derivative(L, "core:a-1") == "~core:b-1"


def test_collapsed_edge_derivative_raises():
    m = spur_rose()
    m0 = m.with_images(edge_images={**m.edge_images, "core:z": ()})
    with pytest.raises(CollapsedEdgeError):
        derivative(m0, "core:z")


def test_turn_is_unordered():
    assert turn("core:b", "core:a") == turn("core:a", "core:b")


def test_turns_at_a_ladder_vertex(L, S):
    # the shift is injective on directions, so every turn is legal
    g = S.graph
    inc = g.incident_edges("core:u0")
    for i, a in enumerate(inc):
        for b in inc[i + 1 :]:
            assert classify_turn(S, (a, b)).kind == "legal"
    # {a-1, b-1} goes to {~b-1, b0} and then marches into the right end as a
    # pair of distinct rail directions, so it never degenerates
    t = turn_map(L, ("core:a-1", "core:b-1"))
    assert t == turn("~core:b-1", "core:b0")
    assert turn_map(L, turn_map(L, t)) == turn("R@1:b", "~R@0:b")
    assert classify_turn(L, ("core:a-1", "core:b-1")).kind == "legal"


def test_degenerate_turn():
    assert classify_turn(spur_rose(), ("core:p", "core:p")).kind == "degenerate"


def test_fixtures_validate(L, S, F):
    for m in (L, S, F):
        assert validate_map(m) == []


@pytest.mark.parametrize("seed", range(10))
def test_perturbed_ladders_validate(seed):
    assert validate_map(perturbed_ladder(seed)) == []


def test_missing_image_is_reported(L):
    imgs = dict(L.edge_images)
    del imgs["core:a0"]
    assert "missing image for edge core:a0" in validate_map(L.with_images(edge_images=imgs))


def test_square_loop_moves_right_under_shift(S):
    lad = Ladder()
    assert iterate_loop(S, lad.rectangle(-1, 0), 1) == cyclic_tighten(lad.rectangle(0, 1))


def test_word_helper():
    assert W("p ~q") == ("core:p", "~core:q")
