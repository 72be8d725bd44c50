"""Addresses, presentations, materialization and the .epg format."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from builders import ray
from endtrack import address as ad
from endtrack import epg
from endtrack.fixtures import FIXTURES, Ladder, fixture, perturbed_ladder
from endtrack.graphrep import (
    EndPresentation,
    FiniteGraph,
    GraphPresentation,
    PresentationError,
    materialize,
    validate_presentation,
)

names = st.text(alphabet="abcxyz019.", min_size=1, max_size=6)


@given(names, st.integers(0, 50), st.sampled_from(["R", "L", "E1"]))
def test_address_round_trip(local, copy, end):
    assert ad.parse(ad.at(end, copy, local)) == (end, copy, local)
    assert ad.parse(ad.core(local)) == (None, None, local)


@given(names, st.booleans())
def test_reverse_is_an_involution(local, fwd):
    o = ad.orient(ad.core(local), fwd)
    assert ad.reverse(ad.reverse(o)) == o
    assert ad.unorient(ad.reverse(o)) == ad.core(local)
    assert ad.is_reversed(o) != fwd


@given(st.integers(0, 20), st.integers(-20, 20))
def test_shift_composes(n, k):
    a = ad.at("R", n, "b")
    if n + k < 0:
        with pytest.raises(ad.AddressError):
            ad.shift_address(a, k)
    else:
        assert ad.shift_address(a, k) == ad.at("R", n + k, "b")
        assert ad.shift_address(ad.reverse(a), k) == ad.reverse(ad.at("R", n + k, "b"))


@pytest.mark.parametrize("bad", ["core", "R@x:a", "R@-1:a", ":a", "R@1:", "~core:a"])
def test_malformed_addresses(bad):
    with pytest.raises(ad.AddressError):
        ad.parse(bad)


def test_ladder_presentation_is_valid():
    assert validate_presentation(Ladder().presentation()) == []


def test_inner_vertices_alias_to_core_or_previous_copy():
    g = Ladder().presentation()
    assert g.canonical_vertex("R@0:ui") == "core:u1"
    assert g.canonical_vertex("R@3:wi") == "R@2:wo"
    assert g.canonical_vertex("L@0:ui") == "core:u-1"


def test_ladder_vertices_have_valence_three():
    g = Ladder().presentation()
    for v in g.canonical_vertices_to_depth(3):
        assert len(g.incident_edges(v)) == 3, v


def test_ladder_edges_meet_their_neighbours():
    lad = Ladder()
    g = lad.presentation()
    for i in range(-4, 4):
        assert g.head(lad.edge("b", i)) == g.tail(lad.edge("b", i + 1))
        assert g.head(lad.edge("c", i)) == g.tail(lad.edge("c", i + 1))
        assert g.tail(lad.edge("a", i)) == g.tail(lad.edge("b", i))


def test_materialize_counts():
    # core: 3 rungs and 4 rails; every copy adds a rung and two rails per end
    g = materialize(Ladder().presentation(), 2)
    assert len(g.edges) == 7 + 2 * 3 * 3
    assert g.is_connected()


def test_dangling_core_edge_is_reported():
    core = FiniteGraph(("v",), {"p": ("v", "w")})
    rep = validate_presentation(GraphPresentation(core, (ray(),)))
    assert any("dangling" in r for r in rep)


def test_non_bijective_attach_is_reported():
    E = EndPresentation("R", FiniteGraph(("x", "y"), {"r": ("x", "y")}), ("x",), ("y",), {"y": "y"}, {"x": "v"})
    core = FiniteGraph(("v",), {"p": ("v", "v")})
    assert any("attach" in r for r in validate_presentation(GraphPresentation(core, (E,))))


def test_no_ends_is_reported():
    core = FiniteGraph(("v",), {"p": ("v", "v")})
    assert "presentation has no ends" in validate_presentation(GraphPresentation(core, ()))


def test_unknown_vertex_raises():
    with pytest.raises(PresentationError):
        Ladder().presentation().canonical_vertex("core:nowhere")


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_epg_round_trip_is_byte_identical(name):
    text = epg.dumps(fixture(name), {"fixture": name})
    m, meta = epg.loads(text)
    assert epg.dumps(m, meta) == text


@given(st.integers(0, 200))
def test_epg_round_trip_randomized(seed):
    text = epg.dumps(perturbed_ladder(seed))
    assert epg.dumps(epg.loads(text)[0]) == text


@pytest.mark.parametrize("text", ["[1]", "{", '{"core": 3}'])
def test_epg_rejects_garbage(text):
    with pytest.raises(epg.FormatError):
        epg.loads(text)
