"""Cellular self-maps of graphs with periodic ends, and edge-path algebra.

A map is stored on a finite window: every core cell and every end cell in
copies ``0..depth-1`` has an explicit image.  Deeper copies follow the
equivariance rule ``f(x@n) = shift(f(x@(depth-1)), n - depth + 1)``, where the
stored copy-``depth-1`` images live in the end ``end_targets[E]``.

Paths are tuples of oriented edge addresses.  :class:`EdgePath` adds the base
vertex needed for the empty path.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

from . import address as ad
from .graphrep import GraphPresentation, PresentationError, validate_presentation

Word = tuple[str, ...]


class MapError(ValueError):
    """Raised when a map presentation is inconsistent."""


class CollapsedEdgeError(MapError):
    """Raised when an operation needs the first edge of an image that is a point."""


class NotEndperiodicError(MapError):
    """Raised when an end is neither attracting nor repelling."""


@dataclass(frozen=True)
class EdgePath:
    start: str
    edges: Word = ()

    def __len__(self) -> int:
        return len(self.edges)

    def end(self, g: GraphPresentation) -> str:
        return g.head(self.edges[-1]) if self.edges else self.start

    def reversed(self, g: GraphPresentation) -> "EdgePath":
        return EdgePath(self.end(g), reverse_word(self.edges))

    def is_tight(self) -> bool:
        return all(a != ad.reverse(b) for a, b in zip(self.edges, self.edges[1:]))


def reverse_word(w: Sequence[str]) -> Word:
    return tuple(ad.reverse(x) for x in reversed(w))


def tighten_word(w: Iterable[str]) -> Word:
    """Delete adjacent inverse pairs until none remain."""
    stack: list[str] = []
    for x in w:
        if stack and stack[-1] == ad.reverse(x):
            stack.pop()
        else:
            stack.append(x)
    return tuple(stack)


def cyclic_tighten(w: Iterable[str]) -> Word:
    """Tighten a closed path, also cancelling across the wrap-around."""
    t = tighten_word(w)
    i, j = 0, len(t) - 1
    while i < j and t[i] == ad.reverse(t[j]):
        i += 1
        j -= 1
    return t[i : j + 1]


def tighten(path: EdgePath) -> EdgePath:
    return EdgePath(path.start, tighten_word(path.edges))


def is_path(g: GraphPresentation, start: str, w: Sequence[str]) -> bool:
    v = g.canonical_vertex(start)
    for x in w:
        t, h = g.ends_of(x)
        if t != v:
            return False
        v = h
    return True


class EndClass(NamedTuple):
    kind: str  # "attracting" or "repelling"
    drift: int


class TurnVerdict(NamedTuple):
    kind: str  # "legal", "illegal" or "degenerate"
    witness: Optional[int] = None


def turn(a: str, b: str) -> tuple[str, str]:
    """Canonical form of the unordered pair ``{a, b}``."""
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class GraphMap:
    """A generalized endperiodic map given on a finite window."""

    graph: GraphPresentation
    depth: int
    end_targets: Mapping[str, str]
    vertex_images: Mapping[str, str]
    edge_images: Mapping[str, Word]

    # --------------------------------------------------------------- images
    def vertex_image(self, v: str) -> str:
        v = self.graph.canonical_vertex(v)
        p = ad.parse(v)
        if p.end is None or p.copy < self.depth:
            try:
                return self.vertex_images[v]
            except KeyError:
                raise MapError(f"no stored image for vertex {v}") from None
        base = self.vertex_images[ad.at(p.end, self.depth - 1, p.local)]
        return ad.shift_address(base, p.copy - self.depth + 1)

    def edge_image(self, o: str) -> Word:
        """Raw image of an oriented edge as a tuple of oriented edges."""
        cache = self._image_cache
        w = cache.get(o)
        if w is None:
            w = self._edge_image(o)
            cache[o] = w
        return w

    @cached_property
    def _image_cache(self) -> dict[str, Word]:
        return {}

    def _edge_image(self, o: str) -> Word:
        if ad.is_reversed(o):
            return reverse_word(self.edge_image(ad.unorient(o)))
        p = ad.parse(o)
        if p.end is None or p.copy < self.depth:
            try:
                return tuple(self.edge_images[o])
            except KeyError:
                raise MapError(f"no stored image for edge {o}") from None
        base = self.edge_images[ad.at(p.end, self.depth - 1, p.local)]
        k = p.copy - self.depth + 1
        try:
            return tuple(ad.shift_address(x, k) for x in base)
        except ad.AddressError as exc:
            raise MapError(f"equivariant image of {o} is inconsistent: {exc}") from exc

    def image_path(self, o: str) -> EdgePath:
        return EdgePath(self.vertex_image(self.graph.tail(o)), self.edge_image(o))

    def map_word(self, w: Sequence[str]) -> Word:
        out: list[str] = []
        for x in w:
            out.extend(self.edge_image(x))
        return tuple(out)

    def stored_edges(self) -> list[str]:
        return self.graph.edges_to_depth(self.depth)

    def stored_vertices(self) -> list[str]:
        return self.graph.canonical_vertices_to_depth(self.depth)

    @cached_property
    def ends(self) -> dict[str, EndClass]:
        return classify_ends(self)

    def with_images(
        self,
        edge_images: Mapping[str, Word] | None = None,
        vertex_images: Mapping[str, str] | None = None,
        graph: GraphPresentation | None = None,
        depth: int | None = None,
    ) -> "GraphMap":
        return GraphMap(
            graph if graph is not None else self.graph,
            depth if depth is not None else self.depth,
            dict(self.end_targets),
            dict(vertex_images if vertex_images is not None else self.vertex_images),
            dict(edge_images if edge_images is not None else self.edge_images),
        )


# ------------------------------------------------------------------- paths
def edge_image(m: GraphMap, e: str) -> EdgePath:
    return m.image_path(e)


def map_path(m: GraphMap, path: EdgePath, tightened: bool = True) -> EdgePath:
    w = m.map_word(path.edges)
    return EdgePath(m.vertex_image(path.start), tighten_word(w) if tightened else w)


def iterate(m: GraphMap, path: EdgePath, n: int) -> EdgePath:
    if n < 0:
        raise ValueError("iteration count must be nonnegative")
    cur = tighten(path)
    for _ in range(n):
        cur = map_path(m, cur, tightened=True)
    return cur


def iterate_loop(m: GraphMap, loop: Sequence[str], n: int) -> Word:
    """Cyclically tightened ``n``-th image of a closed path (pure Python)."""
    cur = cyclic_tighten(loop)
    for _ in range(n):
        cur = cyclic_tighten(m.map_word(cur))
    return cur


# ------------------------------------------------------------ derivatives
def derivative(m: GraphMap, e: str) -> str:
    w = m.edge_image(e)
    if not w:
        raise CollapsedEdgeError(f"edge {ad.unorient(e)} collapses to a vertex")
    return w[0]


def _fold_turn(m: GraphMap, t: tuple[str, str]) -> tuple[str, str]:
    """Shift a turn deep inside one end down to copy ``depth-1``."""
    a, b = t
    pa, pb = ad.parse(ad.unorient(a)), ad.parse(ad.unorient(b))
    if pa.end is None or pa.end != pb.end:
        return t
    k = min(pa.copy, pb.copy) - (m.depth - 1)
    if k <= 0:
        return t
    return turn(ad.shift_address(a, -k), ad.shift_address(b, -k))


def turn_map(m: GraphMap, t: tuple[str, str]) -> tuple[str, str]:
    return turn(derivative(m, t[0]), derivative(m, t[1]))


def classify_turn(m: GraphMap, t: Sequence[str]) -> TurnVerdict:
    """Legality of a turn from its orbit under the induced turn map."""
    a, b = t
    if m.graph.tail(a) != m.graph.tail(b):
        raise MapError(f"turn {{{a}, {b}}} does not share a tail vertex")
    cur = turn(a, b)
    if cur[0] == cur[1]:
        return TurnVerdict("degenerate", 0)
    seen = {_fold_turn(m, cur)}
    k = 0
    while True:
        cur = turn_map(m, cur)
        k += 1
        if cur[0] == cur[1]:
            return TurnVerdict("illegal", k)
        key = _fold_turn(m, cur)
        if key in seen:
            return TurnVerdict("legal", None)
        seen.add(key)


# ------------------------------------------------------------------- ends
def classify_ends(m: GraphMap) -> dict[str, EndClass]:
    """Attracting or repelling, from the copy drift of the deep equivariant images."""
    d = m.depth
    out: dict[str, EndClass] = {}
    for E in m.graph.ends:
        T = m.end_targets.get(E.id)
        if T is None:
            raise NotEndperiodicError(f"end {E.id} has no target end")
        drifts: list[int] = []
        cells = [(ad.at(E.id, d - 1, x), m.edge_images) for x in E.domain.edges]
        cells += [
            (ad.at(E.id, d - 1, v), m.vertex_images) for v in E.domain.vertices if v not in E.core_attach
        ]
        for cell, table in cells:
            img = table.get(cell)
            if img is None:
                raise MapError(f"no stored image for {cell}")
            for x in [img] if isinstance(img, str) else img:
                p = ad.parse(ad.unorient(x))
                if p.end != T:
                    raise NotEndperiodicError(
                        f"image of {cell} leaves end {T} (contains {x})"
                    )
                drifts.append(p.copy - (d - 1))
        lo, hi = min(drifts), max(drifts)
        if lo >= 1:
            out[E.id] = EndClass("attracting", lo)
        elif hi <= -1:
            out[E.id] = EndClass("repelling", hi)
        else:
            raise NotEndperiodicError(
                f"end {E.id} is neither attracting nor repelling (drifts {lo}..{hi})"
            )
    for E, T in m.end_targets.items():
        if E in out and T in out and out[E].kind != out[T].kind:
            raise NotEndperiodicError(f"end {E} and its target {T} have different kinds")
    return out


def attracting_ends(m: GraphMap) -> set[str]:
    return {e for e, c in m.ends.items() if c.kind == "attracting"}


def repelling_ends(m: GraphMap) -> set[str]:
    return {e for e, c in m.ends.items() if c.kind == "repelling"}


# ------------------------------------------------------------- validation
def validate_map(m: GraphMap) -> list[str]:
    """Every violated map invariant as a report entry; empty iff valid."""
    g = m.graph
    report = list(validate_presentation(g))
    if report:
        return report
    if m.depth < 1:
        return ["depth must be positive"]
    ids = [E.id for E in g.ends]
    if set(m.end_targets) != set(ids) or sorted(m.end_targets.values()) != sorted(ids):
        report.append("end permutation invalid")
        return report
    for v in m.stored_vertices():
        if v not in m.vertex_images:
            report.append(f"missing image for vertex {v}")
        else:
            try:
                g.canonical_vertex(m.vertex_images[v])
            except (PresentationError, ad.AddressError):
                report.append(f"vertex {v} maps to invalid address {m.vertex_images[v]}")
    for e in m.stored_edges():
        if e not in m.edge_images:
            report.append(f"missing image for edge {e}")
    if report:
        return report
    extra = set(m.edge_images) - set(m.stored_edges())
    for e in sorted(extra):
        report.append(f"stored image for {e} outside the window")
    for e in g.edges_to_depth(m.depth + 2):
        try:
            w = m.edge_image(e)
            start = g.canonical_vertex(m.vertex_image(g.tail(e)))
            stop = g.canonical_vertex(m.vertex_image(g.head(e)))
            if not all(g.has_edge(x) for x in w):
                report.append(f"image of {e} uses an unknown edge")
                continue
        except (MapError, PresentationError, ad.AddressError) as exc:
            report.append(f"image of {e} is inconsistent: {exc}")
            continue
        if not is_path(g, start, w) or (EdgePath(start, w).end(g) != stop):
            report.append(f"endpoint mismatch on {e}")
    try:
        classify_ends(m)
    except MapError as exc:
        report.append(f"end classification failed: {exc}")
    return report
