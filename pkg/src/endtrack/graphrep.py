"""Finite presentations of infinite graphs with finitely many periodic ends.

An infinite graph is stored as a finite core together with one periodic ray
per end.  Each ray is built from copies ``0, 1, 2, ...`` of a finite
fundamental domain: copy ``n``'s outer boundary is glued to copy ``n+1``'s
inner boundary through ``attach`` and copy ``0``'s inner boundary is glued to
the core through ``core_attach``.

Inner-boundary vertices are aliases.  Every vertex has one *canonical*
address: core vertices, and for end vertices the address in the copy where
the vertex is outer or interior.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from . import address as ad


class PresentationError(ValueError):
    """Raised when a presentation or address is used in an invalid way."""


@dataclass(frozen=True)
class FiniteGraph:
    """A finite graph; ``edges`` maps an edge name to its ``(tail, head)``."""

    vertices: tuple[str, ...]
    edges: Mapping[str, tuple[str, str]]

    def degree(self, v: str) -> int:
        return sum((t == v) + (h == v) for t, h in self.edges.values())

    def incident(self, v: str) -> list[str]:
        """Oriented edges with tail ``v`` (a loop contributes both orientations)."""
        out = []
        for e, (t, h) in self.edges.items():
            if t == v:
                out.append(e)
            if h == v:
                out.append(ad.reverse(e))
        return out

    def is_connected(self) -> bool:
        if not self.vertices:
            return True
        return len(_components(self.vertices, self.edges.values())) == 1


def _components(vertices: Iterable[str], edges: Iterable[tuple[str, str]]) -> list[set[str]]:
    parent: dict[str, str] = {v: v for v in vertices}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t, h in edges:
        if t in parent and h in parent:
            parent[find(t)] = find(h)
    groups: dict[str, set[str]] = {}
    for v in parent:
        groups.setdefault(find(v), set()).add(v)
    return list(groups.values())


@dataclass(frozen=True)
class EndPresentation:
    id: str
    domain: FiniteGraph
    inner: tuple[str, ...]
    outer: tuple[str, ...]
    attach: Mapping[str, str]
    core_attach: Mapping[str, str]

    @cached_property
    def outer_of(self) -> dict[str, str]:
        """Inverse of ``attach``: inner vertex to the outer vertex glued onto it."""
        return {i: o for o, i in self.attach.items()}

    @cached_property
    def domain_incidence(self) -> dict[str, list[str]]:
        inc: dict[str, list[str]] = {v: [] for v in self.domain.vertices}
        for e, (t, h) in self.domain.edges.items():
            inc.setdefault(t, []).append(e)
            inc.setdefault(h, []).append(ad.reverse(e))
        return inc


@dataclass(frozen=True)
class GraphPresentation:
    core: FiniteGraph
    ends: tuple[EndPresentation, ...]

    # ------------------------------------------------------------- lookups
    @cached_property
    def end_map(self) -> dict[str, EndPresentation]:
        return {e.id: e for e in self.ends}

    def end(self, eid: str) -> EndPresentation:
        try:
            return self.end_map[eid]
        except KeyError:
            raise PresentationError(f"unknown end {eid!r}") from None

    @cached_property
    def _core_incidence(self) -> dict[str, list[str]]:
        inc: dict[str, list[str]] = {ad.core(v): [] for v in self.core.vertices}
        for e, (t, h) in self.core.edges.items():
            inc[ad.core(t)].append(ad.core(e))
            inc[ad.core(h)].append(ad.reverse(ad.core(e)))
        for E in self.ends:
            for i, cv in E.core_attach.items():
                for o in E.domain_incidence.get(i, ()):
                    inc[ad.core(cv)].append(ad.orient(ad.at(E.id, 0, ad.unorient(o)), not ad.is_reversed(o)))
        return inc

    def canonical_vertex(self, v: str) -> str:
        """Resolve inner-boundary aliases to the canonical vertex address."""
        p = ad.parse(v)
        if p.end is None:
            if p.local not in self._core_vertex_set:
                raise PresentationError(f"unknown core vertex {v!r}")
            return v
        E = self.end(p.end)
        if p.local not in self._domain_vertex_sets[p.end]:
            raise PresentationError(f"unknown vertex {v!r}")
        if p.local in E.core_attach:
            if p.copy == 0:
                return ad.core(E.core_attach[p.local])
            return ad.at(p.end, p.copy - 1, E.outer_of[p.local])
        return v

    @cached_property
    def _core_vertex_set(self) -> frozenset[str]:
        return frozenset(self.core.vertices)

    @cached_property
    def _domain_vertex_sets(self) -> dict[str, frozenset[str]]:
        return {E.id: frozenset(E.domain.vertices) for E in self.ends}

    def has_edge(self, e: str) -> bool:
        try:
            p = ad.parse(ad.unorient(e))
        except ad.AddressError:
            return False
        if p.end is None:
            return p.local in self.core.edges
        E = self.end_map.get(p.end)
        return E is not None and p.local in E.domain.edges

    def ends_of(self, e: str) -> tuple[str, str]:
        """Canonical ``(tail, head)`` of an oriented edge address."""
        rev = ad.is_reversed(e)
        u = ad.unorient(e)
        p = ad.parse(u)
        if p.end is None:
            try:
                t, h = self.core.edges[p.local]
            except KeyError:
                raise PresentationError(f"unknown edge {e!r}") from None
            t, h = ad.core(t), ad.core(h)
        else:
            E = self.end(p.end)
            try:
                t, h = E.domain.edges[p.local]
            except KeyError:
                raise PresentationError(f"unknown edge {e!r}") from None
            t = self.canonical_vertex(ad.at(p.end, p.copy, t))
            h = self.canonical_vertex(ad.at(p.end, p.copy, h))
        return (h, t) if rev else (t, h)

    def tail(self, e: str) -> str:
        return self.ends_of(e)[0]

    def head(self, e: str) -> str:
        return self.ends_of(e)[1]

    def incident_edges(self, v: str) -> list[str]:
        """Oriented edges with tail ``v``, including those across a gluing."""
        v = self.canonical_vertex(v)
        p = ad.parse(v)
        if p.end is None:
            return list(self._core_incidence[v])
        E = self.end(p.end)
        out = [
            ad.orient(ad.at(p.end, p.copy, ad.unorient(o)), not ad.is_reversed(o))
            for o in E.domain_incidence.get(p.local, ())
        ]
        if p.local in E.attach:
            i = E.attach[p.local]
            out += [
                ad.orient(ad.at(p.end, p.copy + 1, ad.unorient(o)), not ad.is_reversed(o))
                for o in E.domain_incidence.get(i, ())
            ]
        return out

    # ---------------------------------------------------------- enumeration
    def core_edges(self) -> list[str]:
        return [ad.core(e) for e in self.core.edges]

    def end_edges(self, eid: str, copy: int) -> list[str]:
        return [ad.at(eid, copy, x) for x in self.end(eid).domain.edges]

    def edges_to_depth(self, depth: int) -> list[str]:
        """Core edges plus end edges in copies ``0..depth-1``."""
        out = self.core_edges()
        for E in self.ends:
            for n in range(depth):
                out += self.end_edges(E.id, n)
        return out

    def canonical_vertices_to_depth(self, depth: int) -> list[str]:
        """Core vertices plus canonical end vertices in copies ``0..depth-1``."""
        out = [ad.core(v) for v in self.core.vertices]
        for E in self.ends:
            for n in range(depth):
                out += [ad.at(E.id, n, v) for v in E.domain.vertices if v not in E.core_attach]
        return out


def validate_presentation(p: GraphPresentation) -> list[str]:
    """Every violated invariant as a human-readable entry; empty iff valid."""
    report: list[str] = []
    cv = set(p.core.vertices)
    if len(cv) != len(p.core.vertices):
        report.append("duplicate core vertex")
    for name in list(p.core.vertices) + list(p.core.edges):
        try:
            ad.check_name(name, "core cell")
        except ad.AddressError as exc:
            report.append(str(exc))
    for e, (t, h) in p.core.edges.items():
        if t not in cv or h not in cv:
            report.append(f"dangling endpoint on core edge {e}")
    if not p.ends:
        report.append("presentation has no ends")
    ids = [E.id for E in p.ends]
    if len(set(ids)) != len(ids):
        report.append("duplicate end id")
    for E in p.ends:
        report += _validate_end(E, cv)
    if report:
        return report
    depth = 2 * max(len(E.domain.vertices) + len(E.domain.edges) for E in p.ends) + 1
    if not materialize(p, depth).is_connected():
        report.append(f"realized graph disconnected at depth {depth}")
    for E in p.ends:
        if not _ray_connected(E, depth):
            report.append(f"end {E.id}: ray beyond copy 1 is disconnected")
    return report


def _validate_end(E: EndPresentation, core_vertices: set[str]) -> list[str]:
    rep: list[str] = []
    try:
        ad.check_name(E.id, "end")
        if E.id == ad.CORE:
            raise ad.AddressError("end id 'core' is reserved")
    except ad.AddressError as exc:
        rep.append(str(exc))
    dv = set(E.domain.vertices)
    for e, (t, h) in E.domain.edges.items():
        if t not in dv or h not in dv:
            rep.append(f"dangling endpoint on edge {e} of end {E.id}")
    if not E.domain.edges:
        rep.append(f"end {E.id}: fundamental domain has no edges")
    if not set(E.inner) <= dv or not set(E.outer) <= dv:
        rep.append(f"end {E.id}: boundary vertex missing from domain")
    if len(set(E.inner)) != len(E.inner) or len(set(E.outer)) != len(E.outer):
        rep.append(f"end {E.id}: repeated boundary vertex")
    if set(E.inner) & set(E.outer):
        rep.append(f"end {E.id}: local finiteness failure (vertex both inner and outer)")
    if (
        len(E.inner) != len(E.outer)
        or set(E.attach) != set(E.outer)
        or set(E.attach.values()) != set(E.inner)
        or len(set(E.attach.values())) != len(E.attach)
    ):
        rep.append(f"end {E.id}: attach not bijective")
    if set(E.core_attach) != set(E.inner):
        rep.append(f"end {E.id}: core_attach must be defined exactly on the inner boundary")
    if len(set(E.core_attach.values())) != len(E.core_attach):
        rep.append(f"end {E.id}: core_attach not injective")
    if not set(E.core_attach.values()) <= core_vertices:
        rep.append(f"end {E.id}: core_attach targets a missing core vertex")
    if not E.inner:
        rep.append(f"end {E.id}: empty boundary")
    return rep


def _ray_connected(E: EndPresentation, depth: int) -> bool:
    """Copies ``1..depth`` of the ray glued together form a connected graph."""
    verts, edges = set(), []

    def canon(n: int, v: str) -> tuple[int, str]:
        if v in E.core_attach and n > 1:
            return (n - 1, E.outer_of[v])
        return (n, v)

    for n in range(1, depth + 1):
        for v in E.domain.vertices:
            verts.add(canon(n, v))
        for t, h in E.domain.edges.values():
            edges.append((canon(n, t), canon(n, h)))
    return len(_components(verts, edges)) == 1


def materialize(p: GraphPresentation, depth: int) -> FiniteGraph:
    """Core plus copies ``0..depth`` of every end, with addresses as names.

    The outer boundary of copy ``depth`` is left hanging.
    """
    if depth < 0:
        raise PresentationError("depth must be nonnegative")
    edges: dict[str, tuple[str, str]] = {}
    for e in p.edges_to_depth(depth + 1):
        edges[e] = p.ends_of(e)
    verts = dict.fromkeys(p.canonical_vertices_to_depth(depth + 1))
    for t, h in edges.values():
        verts.setdefault(t)
        verts.setdefault(h)
    return FiniteGraph(tuple(verts), edges)


def shift_address(addr: str, k: int) -> str:
    return ad.shift_address(addr, k)


def incident_edges(p: GraphPresentation, v: str) -> list[str]:
    return p.incident_edges(v)


def make_graph(vertices: Sequence[str], edges: Mapping[str, tuple[str, str]] | Iterable) -> FiniteGraph:
    """Build a FiniteGraph from a vertex list and ``{edge: (tail, head)}``."""
    if not isinstance(edges, Mapping):
        edges = {e: (t, h) for e, t, h in edges}
    return FiniteGraph(tuple(vertices), dict(edges))

