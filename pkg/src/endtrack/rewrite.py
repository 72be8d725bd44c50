"""Cellular relabelings between presentations, and map transport along them.

A :class:`Rewrite` sends every oriented edge of a source presentation to a
path of a target presentation, and every vertex to a vertex.  Explicit tables
cover core cells and fundamental-domain cells (applied in every copy); an
optional per-end copy offset realizes absorbing end copies into the core.
Unlisted cells keep their address.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

from . import address as ad
from .graphrep import GraphPresentation, materialize
from .mapcore import GraphMap, Word, cyclic_tighten, reverse_word, tighten_word


@dataclass
class Rewrite:
    src: GraphPresentation
    dst: GraphPresentation
    core_edges: dict[str, Word] = field(default_factory=dict)
    core_vertices: dict[str, str] = field(default_factory=dict)
    domain_edges: dict[str, dict[str, tuple[tuple[str, bool], ...]]] = field(default_factory=dict)
    domain_vertices: dict[str, dict[str, str]] = field(default_factory=dict)
    #: end id -> k.  For k > 0 the first k copies become core cells named
    #: ``absorbed[(end, copy, local)]`` and later copies move down by k; for
    #: k < 0 copies move up by -k.
    end_offsets: dict[str, int] = field(default_factory=dict)
    absorbed: dict[tuple[str, int, str], str] = field(default_factory=dict)

    def edge(self, o: str) -> Word:
        if ad.is_reversed(o):
            return reverse_word(self.edge(ad.unorient(o)))
        p = ad.parse(o)
        if p.end is None:
            w = self.core_edges.get(p.local)
            return w if w is not None else (o,)
        k = self.end_offsets.get(p.end, 0)
        copy = p.copy
        if k > 0 and copy < k:
            return (self.absorbed[(p.end, copy, p.local)],)
        copy -= k
        table = self.domain_edges.get(p.end)
        if table is not None and p.local in table:
            return tuple(ad.orient(ad.at(p.end, copy, x), fwd) for x, fwd in table[p.local])
        return (ad.at(p.end, copy, p.local),)

    def vertex(self, v: str) -> str:
        v = self.src.canonical_vertex(v)
        p = ad.parse(v)
        if p.end is None:
            out = self.core_vertices.get(p.local, v)
        else:
            k = self.end_offsets.get(p.end, 0)
            copy = p.copy
            if k > 0 and copy < k:
                out = self.absorbed[(p.end, copy, p.local)]
            else:
                copy -= k
                table = self.domain_vertices.get(p.end, {})
                out = ad.at(p.end, copy, table.get(p.local, p.local))
        return self.dst.canonical_vertex(out)

    def path(self, w: Iterable[str]) -> Word:
        out: list[str] = []
        for x in w:
            out.extend(self.edge(x))
        return tuple(out)

    def region(self) -> list[str]:
        """Source edges listed explicitly (all others are relabeled one-to-one)."""
        out = [ad.core(x) for x in self.core_edges]
        for E, table in self.domain_edges.items():
            out += [ad.at(E, 0, x) for x in table]
        return out


class CellularMap:
    """A cellular map between realized graphs, evaluated on demand."""

    def __init__(self, rw: Rewrite, explicit_bound: Optional[int] = None):
        self.rw = rw
        self.src = rw.src
        self.dst = rw.dst
        self._bound = explicit_bound

    def edge_path(self, o: str) -> Word:
        return self.rw.edge(o)

    def vertex(self, v: str) -> str:
        return self.rw.vertex(v)

    def path(self, w: Sequence[str]) -> Word:
        return tighten_word(self.rw.path(w))

    def loop(self, w: Sequence[str]) -> Word:
        return cyclic_tighten(self.rw.path(w))

    @property
    def bound(self) -> int:
        if self._bound is not None:
            return self._bound
        lengths = [len(w) for w in self.rw.core_edges.values()]
        for table in self.rw.domain_edges.values():
            lengths += [len(w) for w in table.values()]
        return max([1] + lengths)


class ComposedMap:
    """Sequential composition of cellular maps, tightening after each factor."""

    def __init__(self, maps: Sequence):
        if not maps:
            raise ValueError("empty composition")
        self.maps = list(maps)
        self.src = self.maps[0].src
        self.dst = self.maps[-1].dst

    def edge_path(self, o: str) -> Word:
        w: Word = (o,)
        for f in self.maps:
            w = f.path(w)
        return w

    def vertex(self, v: str) -> str:
        for f in self.maps:
            v = f.vertex(v)
        return v

    def path(self, w: Sequence[str]) -> Word:
        for f in self.maps:
            w = f.path(w)
        return tuple(w)

    def loop(self, w: Sequence[str]) -> Word:
        for f in self.maps:
            w = f.loop(w)
        return tuple(w)

    def bound_over(self, depth: int) -> int:
        """Longest edge image over all source edges in copies below ``depth``."""
        g = materialize(self.src, depth)
        return max([1] + [len(self.edge_path(e)) for e in g.edges])

    @property
    def factor_product(self) -> int:
        out = 1
        for f in self.maps:
            out *= getattr(f, "bound", 1)
        return out


def transport(
    m: GraphMap,
    rw: Rewrite,
    old_edge: Callable[[str], Optional[Word]] | None = None,
    new_edge: Mapping[str, Word] | None = None,
    new_vertex: Mapping[str, str] | None = None,
    depth: int | None = None,
) -> GraphMap:
    """The map ``rw o f o s`` on the target presentation.

    ``s`` is the identity on names.  For target cells without a same-named
    source cell, ``old_edge(e)`` returns the source path ``f(s(e))`` (pushed
    through ``rw``), while ``new_edge`` and ``new_vertex`` give target images
    directly.
    """
    d = depth if depth is not None else m.depth
    g2 = rw.dst
    new_edge = new_edge or {}
    new_vertex = new_vertex or {}
    eimg: dict[str, Word] = {}
    for e in g2.edges_to_depth(d):
        if e in new_edge:
            eimg[e] = tighten_word(new_edge[e])
            continue
        old = old_edge(e) if old_edge else None
        if old is None:
            old = m.edge_image(e)
        eimg[e] = tighten_word(rw.path(old))
    vimg: dict[str, str] = {}
    for v in g2.canonical_vertices_to_depth(d):
        if v in new_vertex:
            vimg[v] = g2.canonical_vertex(new_vertex[v])
        else:
            vimg[v] = rw.vertex(m.vertex_image(v))
    return GraphMap(g2, d, dict(m.end_targets), vimg, eimg)


def fresh(name: str, taken: set[str]) -> str:
    """``name`` itself if unused, otherwise ``name'``, ``name''`` and so on."""
    out = name
    while out in taken:
        out += "'"
    taken.add(out)
    return out


_ABSORBED = re.compile(r"^(?P<end>[^.]+?)(?P<n>\d+)\.")


def next_absorb_index(g: GraphPresentation, end: str) -> int:
    best = -1
    for name in list(g.core.edges) + list(g.core.vertices):
        mt = _ABSORBED.match(name)
        if mt and mt.group("end") == end:
            best = max(best, int(mt.group("n")))
    return best + 1
