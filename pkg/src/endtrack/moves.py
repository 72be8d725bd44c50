"""Homotopy moves that rewrite a map while keeping its stretch factors in check.

Every move returns ``(new_map, MoveRecord, CorrespondenceMaps)``.  Moves act
on the core directly.  Moves on a repelling end rewrite its fundamental
domain once, so every copy changes together.  Moves that would touch an
attracting end first absorb the needed copies into the core (see
:func:`absorb`), so attracting fundamental domains are never modified.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from . import address as ad
from .filtration import compatible_filtration, fate_table, lambda_vector
from .graphrep import EndPresentation, FiniteGraph, GraphPresentation
from .mapcore import GraphMap, MapError, Word, reverse_word, tighten_word
from .rewrite import CellularMap, ComposedMap, Rewrite, fresh, next_absorb_index, transport
from .spectral import LambdaVector, pf_left_eigenvector


class MoveError(MapError):
    """Raised when a move's precondition fails."""


@dataclass
class MoveRecord:
    name: str
    params: dict
    lambda_before: LambdaVector
    lambda_after: LambdaVector
    propagation: str = ""
    children: list["MoveRecord"] = field(default_factory=list)

    def line(self) -> str:
        args = " ".join(f"{k}={_fmt(v)}" for k, v in self.params.items())
        prop = self.propagation or "-"
        return f"{self.name} {args} | {self.lambda_before} -> {self.lambda_after} | {prop}"

    def flat(self) -> list["MoveRecord"]:
        out = [self]
        for c in self.children:
            out += c.flat()
        return out


def _fmt(v) -> str:
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, dict):
        return ";".join(f"{k}:{_fmt(x)}" for k, x in sorted(v.items()))
    return str(v)


@dataclass
class CorrespondenceMaps:
    """Cellular maps old -> new and new -> old with a bound on edge images."""

    forward: object
    backward: object
    bound: int

    def then(self, other: "CorrespondenceMaps") -> "CorrespondenceMaps":
        return CorrespondenceMaps(
            ComposedMap(_factors(self.forward) + _factors(other.forward)),
            ComposedMap(_factors(other.backward) + _factors(self.backward)),
            self.bound * other.bound,
        )


def _factors(f) -> list:
    return list(f.maps) if isinstance(f, ComposedMap) else [f]


def identity_maps(g: GraphPresentation) -> CorrespondenceMaps:
    ident = CellularMap(Rewrite(g, g), 1)
    return CorrespondenceMaps(ident, ident, 1)


def _maps(fw: Rewrite, bw: Rewrite) -> CorrespondenceMaps:
    f, b = CellularMap(fw), CellularMap(bw)
    return CorrespondenceMaps(f, b, max(f.bound, b.bound))


def _lam(m: GraphMap) -> LambdaVector:
    return lambda_vector(m)


# ------------------------------------------------------------ presentation
def _with_core(g: GraphPresentation, core: FiniteGraph, rename: Mapping[str, str] | None = None) -> GraphPresentation:
    rename = rename or {}
    ends = tuple(
        EndPresentation(
            E.id,
            E.domain,
            E.inner,
            E.outer,
            dict(E.attach),
            {i: rename.get(v, v) for i, v in E.core_attach.items()},
        )
        for E in g.ends
    )
    return GraphPresentation(core, ends)


def _with_end(g: GraphPresentation, new: EndPresentation) -> GraphPresentation:
    return GraphPresentation(g.core, tuple(new if E.id == new.id else E for E in g.ends))


def _attach_targets(g: GraphPresentation) -> dict[str, list[str]]:
    """Core vertex -> ends glued onto it."""
    out: dict[str, list[str]] = {}
    for E in g.ends:
        for v in E.core_attach.values():
            out.setdefault(v, []).append(E.id)
    return out


class _UnionFind:
    def __init__(self, items: Iterable[str]):
        self.parent = {x: x for x in items}

    def find(self, x: str) -> str:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a: str, b: str) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True

    def classes(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return out


def _tree_paths(edges: Mapping[str, tuple[str, str]], forest: Iterable[str], reps: Mapping[str, str]) -> dict[str, Word]:
    """For each vertex, the forest path from its class representative to it."""
    adj: dict[str, list[tuple[str, str]]] = {}
    for x in forest:
        t, h = edges[x]
        adj.setdefault(t, []).append((x, h))
        adj.setdefault(h, []).append((ad.reverse(x), t))
    out: dict[str, Word] = {}
    for r in set(reps.values()):
        out[r] = ()
        stack = [r]
        while stack:
            v = stack.pop()
            for o, w in adj.get(v, ()):
                if w not in out:
                    out[w] = out[v] + (o,)
                    stack.append(w)
    return out


# --------------------------------------------------------------- pull tight
def pull_tight(m: GraphMap) -> tuple[GraphMap, MoveRecord, CorrespondenceMaps]:
    """Tighten every stored edge image (a homotopy rel vertices)."""
    before = _lam(m)
    eimg = {e: tighten_word(w) for e, w in m.edge_images.items()}
    changed = sorted(e for e, w in eimg.items() if tuple(w) != tuple(m.edge_images[e]))
    m2 = m.with_images(edge_images=eimg) if changed else m
    rewritten = sorted(
        {ad.end_of(e) for e in changed if ad.end_of(e) and ad.copy_of(e) == m.depth - 1}
    )
    prop = "domain " + ",".join(rewritten) if rewritten else ""
    return (
        m2,
        MoveRecord("pull_tight", {"edges": len(changed)}, before, _lam(m2), prop),
        identity_maps(m.graph),
    )


# ------------------------------------------------------------------ forests
def pretrivial_forest(m: GraphMap) -> list[str]:
    """Edges whose iterated images tighten to a point.

    Computed as the least set ``P`` such that an edge belongs to ``P`` when its
    stored image is empty or made only of edges of ``P``, on the fate window
    plus one copy.  Images are taken as stored, so callers tighten first.
    """
    ft = fate_table(m)
    window = ft.cstar + [e for E in m.graph.ends for e in m.graph.end_edges(E.id, ft.cutoff)]
    wset = set(window)
    users: dict[str, list[str]] = {}
    missing: dict[str, int] = {}
    ready: list[str] = []
    for e in window:
        img = {ad.unorient(x) for x in m.edge_image(e)}
        if not img <= wset:
            continue
        missing[e] = len(img)
        if not img:
            ready.append(e)
        for x in img:
            users.setdefault(x, []).append(e)
    out: set[str] = set()
    while ready:
        e = ready.pop()
        if e in out:
            continue
        out.add(e)
        for u in users.get(e, ()):
            missing[u] -= 1
            if missing[u] == 0:
                ready.append(u)
    return sorted(out)


def collapse_invariant_forest(m: GraphMap, forest: Iterable[str]) -> tuple[GraphMap, MoveRecord, CorrespondenceMaps]:
    """Collapse each component of an invariant forest to a vertex.

    End edges present in every window copy are collapsed in the fundamental
    domain (hence in all copies).  Any other end edge is first moved into the
    core by absorbing the copies that hold it.
    """
    before = _lam(m)
    forest = sorted({ad.unorient(e) for e in forest})
    for e in forest:
        if not m.graph.has_edge(e):
            raise MoveError(f"unknown forest edge {e}")
    if not forest:
        return m, MoveRecord("collapse_forest", {"edges": []}, before, before), identity_maps(m.graph)
    maps = identity_maps(m.graph)
    records: list[MoveRecord] = []
    ft = fate_table(m)
    span = ft.cutoff
    fset = set(forest)
    domain: dict[str, set[str]] = {}
    for E in m.graph.ends:
        for x in E.domain.edges:
            if all(ad.at(E.id, n, x) in fset for n in range(span)):
                domain.setdefault(E.id, set()).add(x)
    partial: dict[str, int] = {}
    for e in forest:
        p = ad.parse(e)
        if p.end is not None and p.local not in domain.get(p.end, ()):
            partial[p.end] = max(partial.get(p.end, 0), p.copy + 1)
    _check_forest_invariant(m, fset, domain)
    cur = m
    for E, k in sorted(partial.items()):
        cur, rec, mp = absorb(cur, E, k)
        records.append(rec)
        fset = {_follow(mp, e) for e in fset if not _is_domain(e, domain)} | {
            e for e in fset if _is_domain(e, domain)
        }
        maps = maps.then(mp)
    core_forest = sorted(ad.local_of(e) for e in fset if ad.is_core(e))
    cur, mp, prop = _collapse(cur, core_forest, {E: sorted(xs) for E, xs in domain.items()})
    maps = maps.then(mp)
    rec = MoveRecord("collapse_forest", {"edges": forest}, before, _lam(cur), prop, records)
    return cur, rec, maps


def _is_domain(e: str, domain: Mapping[str, set[str]]) -> bool:
    p = ad.parse(e)
    return p.end is not None and p.local in domain.get(p.end, ())


def _follow(maps: CorrespondenceMaps, e: str) -> str:
    w = maps.forward.edge_path(e)
    if len(w) != 1:
        raise MoveError(f"edge {e} did not survive relabeling")
    return ad.unorient(w[0])


def _check_forest_invariant(m: GraphMap, fset: set[str], domain: Mapping[str, set[str]]) -> None:
    def inside(x: str) -> bool:
        u = ad.unorient(x)
        return u in fset or _is_domain(u, domain)

    cells = [e for e in fset if not _is_domain(e, domain)]
    for E, xs in domain.items():
        cells += [ad.at(E, n, x) for x in xs for n in range(m.depth)]
    for e in cells:
        bad = [x for x in m.edge_image(e) if not inside(x)]
        if bad:
            raise MoveError(f"forest is not invariant: image of {e} crosses {ad.unorient(bad[0])}")


def _collapse(
    m: GraphMap, core_forest: Sequence[str], domain: Mapping[str, Sequence[str]]
) -> tuple[GraphMap, CorrespondenceMaps, str]:
    g = m.graph
    targets = _attach_targets(g)
    # core part
    uf = _UnionFind(g.core.vertices)
    for x in core_forest:
        t, h = g.core.edges[x]
        if not uf.union(t, h):
            raise MoveError(f"forest is not contractible (cycle through {x})")
    reps: dict[str, str] = {}
    for members in uf.classes().values():
        glued = [v for v in members if v in targets]
        ends_here = [E for v in glued for E in targets[v]]
        if len(ends_here) != len(set(ends_here)):
            raise MoveError("collapse would glue two boundary vertices of one end")
        rep = sorted(glued)[0] if glued else sorted(members)[0]
        for v in members:
            reps[v] = rep
    cf = set(core_forest)
    core = FiniteGraph(
        tuple(v for v in g.core.vertices if reps[v] == v),
        {e: (reps[t], reps[h]) for e, (t, h) in g.core.edges.items() if e not in cf},
    )
    g2 = _with_core(g, core, reps)
    fw = Rewrite(g, g2)
    fw.core_edges = {x: () for x in core_forest}
    fw.core_vertices = {v: ad.core(r) for v, r in reps.items() if r != v}
    paths = _tree_paths(g.core.edges, core_forest, reps)
    bw_core: dict[str, Word] = {}
    for e, (t, h) in g.core.edges.items():
        if e in cf or (reps[t] == t and reps[h] == h):
            continue
        w = paths[t] + (e,) + reverse_word(paths[h])
        bw_core[e] = tuple(ad.orient(ad.core(ad.unorient(x)), not ad.is_reversed(x)) for x in w)
    # domain part
    notes = []
    dom_fw_e: dict[str, dict] = {}
    dom_fw_v: dict[str, dict] = {}
    dom_bw_e: dict[str, dict] = {}
    for eid, xs in sorted(domain.items()):
        E = g2.end(eid)
        duf = _UnionFind(E.domain.vertices)
        for x in xs:
            t, h = E.domain.edges[x]
            if not duf.union(t, h):
                raise MoveError(f"forest is not contractible in end {eid}")
        boundary = set(E.inner) | set(E.outer)
        dreps: dict[str, str] = {}
        for members in duf.classes().values():
            bd = [v for v in members if v in boundary]
            if len(bd) > 1:
                raise MoveError(f"collapse would change the end structure of {eid}")
            rep = bd[0] if bd else sorted(members)[0]
            for v in members:
                dreps[v] = rep
        xset = set(xs)
        dom = FiniteGraph(
            tuple(v for v in E.domain.vertices if dreps[v] == v),
            {e: (dreps[t], dreps[h]) for e, (t, h) in E.domain.edges.items() if e not in xset},
        )
        newE = EndPresentation(eid, dom, E.inner, E.outer, dict(E.attach), dict(E.core_attach))
        g2 = _with_end(g2, newE)
        dom_fw_e[eid] = {x: () for x in xs}
        dom_fw_v[eid] = {v: r for v, r in dreps.items() if r != v}
        dpaths = _tree_paths(E.domain.edges, xs, dreps)
        table = {}
        for e, (t, h) in E.domain.edges.items():
            if e in xset or (dreps[t] == t and dreps[h] == h):
                continue
            w = dpaths[t] + (e,) + reverse_word(dpaths[h])
            table[e] = tuple((ad.unorient(x), not ad.is_reversed(x)) for x in w)
        dom_bw_e[eid] = table
        notes.append(eid)
    fw = Rewrite(g, g2, fw.core_edges, fw.core_vertices, dom_fw_e, dom_fw_v)
    bw = Rewrite(g2, g, bw_core, {}, dom_bw_e, {})
    m2 = transport(m, fw)
    prop = "domain " + ",".join(notes) if notes else ""
    return m2, _maps(fw, bw), prop


# ------------------------------------------------------------------ absorb
def absorb(m: GraphMap, end: str, k: int) -> tuple[GraphMap, MoveRecord, CorrespondenceMaps]:
    """Move copies ``0..k-1`` of an end into the core.

    The realized graph and the map are unchanged; only the bookkeeping moves.
    Absorbed cells are named ``<end><n>.<local>`` with ``n`` counting every
    copy of that end absorbed so far.
    """
    before = _lam(m)
    g = m.graph
    E = g.end(end)
    if k < 1:
        return m, MoveRecord("absorb", {"end": end, "copies": 0}, before, before), identity_maps(g)
    base = next_absorb_index(g, end)
    absorbed: dict[tuple[str, int, str], str] = {}
    vname: dict[str, str] = {}
    taken = set(g.core.vertices) | set(g.core.edges)
    for n in range(k):
        for v in E.domain.vertices:
            if v not in E.core_attach:
                name = fresh(f"{end}{base + n}.{v}", taken)
                absorbed[(end, n, v)] = ad.core(name)
                vname[ad.at(end, n, v)] = name
    for n in range(k):
        for x in E.domain.edges:
            absorbed[(end, n, x)] = ad.core(fresh(f"{end}{base + n}.{x}", taken))

    def local(v: str) -> str:
        v = g.canonical_vertex(v)
        return ad.local_of(v) if ad.is_core(v) else vname[v]

    verts = list(g.core.vertices) + list(vname.values())
    edges = dict(g.core.edges)
    for n in range(k):
        for x, (t, h) in E.domain.edges.items():
            edges[ad.local_of(absorbed[(end, n, x)])] = (local(ad.at(end, n, t)), local(ad.at(end, n, h)))
    newE = EndPresentation(
        end,
        E.domain,
        E.inner,
        E.outer,
        dict(E.attach),
        {i: local(ad.at(end, k, i)) for i in E.inner},
    )
    g2 = _with_end(g, newE)
    g2 = GraphPresentation(FiniteGraph(tuple(verts), edges), g2.ends)
    fw = Rewrite(g, g2, end_offsets={end: k}, absorbed=absorbed)
    back_e = {ad.local_of(a): (ad.at(e, n, x),) for (e, n, x), a in absorbed.items() if x in E.domain.edges}
    back_v = {ad.local_of(a): ad.at(e, n, x) for (e, n, x), a in absorbed.items() if x in E.domain.vertices}
    bw = Rewrite(g2, g, back_e, back_v, end_offsets={end: -k})
    m2 = None
    for depth in range(max(1, m.depth), m.depth + k + 4):
        cand = _absorbed_map(m, fw, bw, g2, depth)
        if _rule_consistent(m, cand, fw, bw):
            m2 = cand
            break
    if m2 is None:
        raise MoveError(f"could not re-window the map after absorbing {k} copies of {end}")
    maps = CorrespondenceMaps(CellularMap(fw, 1), CellularMap(bw, 1), 1)
    return m2, MoveRecord("absorb", {"end": end, "copies": k}, before, _lam(m2)), maps


def _absorbed_map(m: GraphMap, fw: Rewrite, bw: Rewrite, g2: GraphPresentation, depth: int) -> GraphMap:
    eimg = {e: tighten_word(fw.path(m.edge_image(bw.edge(e)[0]))) for e in g2.edges_to_depth(depth)}
    vimg = {v: fw.vertex(m.vertex_image(bw.vertex(v))) for v in g2.canonical_vertices_to_depth(depth)}
    return GraphMap(g2, depth, dict(m.end_targets), vimg, eimg)


def _rule_consistent(m: GraphMap, cand: GraphMap, fw: Rewrite, bw: Rewrite) -> bool:
    """Deep images produced by the new equivariance rule agree with the old map."""
    for E in cand.graph.ends:
        for n in range(cand.depth, cand.depth + 3):
            for x in E.domain.edges:
                e = ad.at(E.id, n, x)
                try:
                    got = cand.edge_image(e)
                    want = tighten_word(fw.path(m.edge_image(bw.edge(e)[0])))
                except (MapError, KeyError, ad.AddressError):
                    return False
                if got != want:
                    return False
    return True


def _settle(
    m: GraphMap, rec: MoveRecord, maps: CorrespondenceMaps
) -> tuple[GraphMap, MoveRecord, CorrespondenceMaps]:
    """Collapse the pretrivial forest left behind by a move."""
    forest = pretrivial_forest(m)
    if forest:
        m, sub, mp = collapse_invariant_forest(m, forest)
        rec.children.append(sub)
        maps = maps.then(mp)
    rec.lambda_after = _lam(m)
    return m, rec, maps


def _absorb_for(
    m: GraphMap, cells: Iterable[str]
) -> tuple[GraphMap, list[MoveRecord], CorrespondenceMaps]:
    """Absorb enough copies that every listed cell lies in the core."""
    need: dict[str, int] = {}
    for c in cells:
        p = ad.parse(ad.unorient(c))
        if p.end is not None:
            need[p.end] = max(need.get(p.end, 0), p.copy + 1)
    maps = identity_maps(m.graph)
    recs = []
    for E, k in sorted(need.items()):
        m, rec, mp = absorb(m, E, k)
        recs.append(rec)
        maps = maps.then(mp)
    return m, recs, maps


# -------------------------------------------------------------- subdivide
def subdivide_at(
    m: GraphMap, cuts: Mapping[str, Iterable[Fraction]]
) -> tuple[GraphMap, MoveRecord, CorrespondenceMaps]:
    """Subdivide core edges at the given parameters in ``(0, 1)``.

    Edge ``x`` cut at ``t_1 < ... < t_k`` becomes pieces ``x.0 .. x.k`` joined
    at new vertices ``x.v1 .. x.vk``.  The map is unchanged as a map of the
    realized graph, so every cut point must map to a vertex or to another
    cut point.
    """
    before = _lam(m)
    g = m.graph
    table: dict[str, list[Fraction]] = {}
    for e, ts in cuts.items():
        e = ad.unorient(e)
        if not ad.is_core(e) or ad.local_of(e) not in g.core.edges:
            raise MoveError(f"subdivide_at needs core edges, got {e}")
        vals = sorted({Fraction(t) for t in ts})
        if not vals:
            continue
        if vals[0] <= 0 or vals[-1] >= 1:
            raise MoveError(f"cut parameters on {e} must lie strictly inside (0, 1)")
        table[ad.local_of(e)] = vals
    if not table:
        return m, MoveRecord("subdivide", {"cuts": {}}, before, before), identity_maps(g)
    taken = set(g.core.vertices) | set(g.core.edges)
    pieces: dict[str, list[str]] = {}
    mids: dict[str, list[str]] = {}
    verts = list(g.core.vertices)
    edges: dict[str, tuple[str, str]] = {}
    for x, (t, h) in g.core.edges.items():
        if x not in table:
            edges[x] = (t, h)
            continue
        k = len(table[x])
        mids[x] = [fresh(f"{x}.v{j + 1}", taken) for j in range(k)]
        pieces[x] = [fresh(f"{x}.{j}", taken) for j in range(k + 1)]
        chain = [t] + mids[x] + [h]
        verts += mids[x]
        for j, name in enumerate(pieces[x]):
            edges[name] = (chain[j], chain[j + 1])
    g2 = _with_core(g, FiniteGraph(tuple(verts), edges))
    fw = Rewrite(g, g2, {x: tuple(ad.core(p) for p in ps) for x, ps in pieces.items()})
    bw_e: dict[str, Word] = {}
    bw_v: dict[str, str] = {}
    for x, ps in pieces.items():
        bw_e[ps[0]] = (ad.core(x),)
        for p in ps[1:]:
            bw_e[p] = ()
        for v in mids[x]:
            bw_v[v] = ad.core(g.core.edges[x][1])
    bw = Rewrite(g2, g, bw_e, bw_v)

    def part(o: str, lo: Fraction, hi: Fraction) -> Word:
        """New-graph path along the portion ``[lo, hi]`` of oriented edge ``o``."""
        x = ad.local_of(o) if ad.is_core(o) else None
        if x not in table:
            if (lo, hi) != (0, 1):
                raise MoveError(f"image crosses part of {ad.unorient(o)}, which is not cut there")
            return fw.edge(o)
        a, b = (lo, hi) if not ad.is_reversed(o) else (1 - hi, 1 - lo)
        pts = [Fraction(0)] + table[x] + [Fraction(1)]
        try:
            i0, i1 = pts.index(a), pts.index(b)
        except ValueError:
            raise MoveError(f"image of a cut point lands inside {x} away from its cuts") from None
        seg = tuple(ad.core(pieces[x][j]) for j in range(i0, i1))
        return seg if not ad.is_reversed(o) else reverse_word(seg)

    def subpath(w: Word, a: Fraction, b: Fraction) -> Word:
        out: list[str] = []
        for s, o in enumerate(w):
            lo, hi = max(a - s, Fraction(0)), min(b - s, Fraction(1))
            if hi > lo:
                out.extend(part(o, lo, hi))
        return tuple(out)

    new_edges: dict[str, Word] = {}
    new_verts: dict[str, str] = {}
    for x, ts in table.items():
        e = ad.core(x)
        w = m.edge_image(e)
        n = len(w)
        pts = [Fraction(0)] + ts + [Fraction(1)]
        for j, p in enumerate(pieces[x]):
            new_edges[ad.core(p)] = subpath(w, pts[j] * n, pts[j + 1] * n)
        for v, t in zip(mids[x], ts):
            s = t * n
            if s.denominator == 1:
                s = int(s)
                old = m.vertex_image(g.tail(e)) if s == 0 else g.head(w[s - 1])
                new_verts[ad.core(v)] = fw.vertex(old)
            else:
                j = int(s)
                u = s - j
                o = w[j]
                y = ad.local_of(o) if ad.is_core(o) else None
                param = u if not ad.is_reversed(o) else 1 - u
                if y not in table or param not in table[y]:
                    raise MoveError(f"cut point {t} of {x} maps inside {ad.unorient(o)} away from its cuts")
                new_verts[ad.core(v)] = ad.core(mids[y][table[y].index(param)])
    m2 = transport(m, fw, new_edge=new_edges, new_vertex=new_verts)
    params = {"cuts": {x: [str(t) for t in ts] for x, ts in table.items()}}
    return m2, MoveRecord("subdivide", params, before, _lam(m2)), _maps(fw, bw)


def subdivide(m: GraphMap, e: str, k: int) -> tuple[GraphMap, MoveRecord, CorrespondenceMaps]:
    """Subdivide ``e`` at the point mapping to the vertex after ``k`` image edges.

    A repelling-end edge is subdivided in its fundamental domain; an attracting
    end edge is subdivided after absorbing its copy into the core.
    """
    g = m.graph
    n = len(m.edge_image(e))
    if not 0 < k < n:
        raise MoveError(f"position {k} out of range for an image of length {n}")
    kf = k if not ad.is_reversed(e) else n - k
    u = ad.unorient(e)
    p = ad.parse(u)
    if p.end is None:
        return subdivide_at(m, {u: [Fraction(kf, n)]})
    if m.ends[p.end].kind == "repelling":
        return _subdivide_domain(m, p.end, p.local, kf)
    before = _lam(m)
    m1, recs, maps = _absorb_for(m, [u])
    e1 = _follow(maps, u)
    m2, rec, mp = subdivide_at(m1, {e1: [Fraction(kf, n)]})
    rec.children = recs + rec.children
    rec.lambda_before = before
    return m2, rec, maps.then(mp)


def _subdivide_domain(m: GraphMap, eid: str, x: str, k: int) -> tuple[GraphMap, MoveRecord, CorrespondenceMaps]:
    before = _lam(m)
    g = m.graph
    E = g.end(eid)
    d = m.depth
    images = [m.edge_image(ad.at(eid, n, x)) for n in range(d)]

    def follows(w: Word) -> bool:
        """A single forward letter on another copy of ``x``: pieces map to pieces."""
        if len(w) != 1 or ad.is_reversed(w[0]):
            return False
        p = ad.parse(w[0])
        return p.end == eid and p.local == x

    if not 0 < k < len(images[0]) or any(not (0 < k < len(w) or follows(w)) for w in images):
        raise MoveError(f"position {k} is not interior to every copy of {eid}:{x}")
    taken = set(E.domain.vertices) | set(E.domain.edges)
    x0, x1 = fresh(f"{x}.0", taken), fresh(f"{x}.1", taken)
    vm = fresh(f"{x}.v1", taken)
    t, h = E.domain.edges[x]
    dedges = {y: ends for y, ends in E.domain.edges.items() if y != x}
    dedges[x0] = (t, vm)
    dedges[x1] = (vm, h)
    newE = EndPresentation(
        eid, FiniteGraph(E.domain.vertices + (vm,), dedges), E.inner, E.outer, dict(E.attach), dict(E.core_attach)
    )
    g2 = _with_end(g, newE)
    fw = Rewrite(g, g2, domain_edges={eid: {x: ((x0, True), (x1, True))}})
    bw = Rewrite(g2, g, domain_edges={eid: {x0: ((x, True),), x1: ()}}, domain_vertices={eid: {vm: h}})
    new_edges: dict[str, Word] = {}
    new_verts: dict[str, str] = {}
    for n, w in enumerate(images):
        if follows(w):
            c = ad.copy_of(w[0])
            new_edges[ad.at(eid, n, x0)] = (ad.at(eid, c, x0),)
            new_edges[ad.at(eid, n, x1)] = (ad.at(eid, c, x1),)
            new_verts[ad.at(eid, n, vm)] = ad.at(eid, c, vm)
            continue
        new_edges[ad.at(eid, n, x0)] = fw.path(w[:k])
        new_edges[ad.at(eid, n, x1)] = fw.path(w[k:])
        new_verts[ad.at(eid, n, vm)] = fw.vertex(g.head(w[k - 1]))
    m2 = transport(m, fw, new_edge=new_edges, new_vertex=new_verts)
    rec = MoveRecord("subdivide", {"edge": ad.at(eid, 0, x), "k": k}, before, _lam(m2), f"domain {eid}")
    return m2, rec, _maps(fw, bw)


# ------------------------------------------------------------- valence one
def valence_one_homotopy(m: GraphMap, v: str) -> tuple[GraphMap, MoveRecord, CorrespondenceMaps]:
    """Remove a valence-one vertex and its edge, composing with the retraction."""
    before = _lam(m)
    g = m.graph
    v = g.canonical_vertex(v)
    inc = g.incident_edges(v)
    if len(inc) != 1:
        raise MoveError(f"vertex {v} has valence {len(inc)}, not 1")
    o = inc[0]
    e = ad.unorient(o)
    w = g.head(o)
    pv, pe = ad.parse(v), ad.parse(e)
    if pv.end is None and pe.end is None:
        x = pe.local
        core = FiniteGraph(
            tuple(u for u in g.core.vertices if u != pv.local),
            {y: ends for y, ends in g.core.edges.items() if y != x},
        )
        g2 = _with_core(g, core)
        fw = Rewrite(g, g2, {x: ()}, {pv.local: w})
        m2 = transport(m, fw)
        rec = MoveRecord("valence_one", {"vertex": v, "edge": e}, before, before)
        return _settle(m2, rec, _maps(fw, Rewrite(g2, g)))
    end = pv.end or pe.end
    if m.ends[end].kind == "attracting" or pv.end is None or pe.end != pv.end:
        m1, recs, maps = _absorb_for(m, [e, v])
        m2, rec, mp = valence_one_homotopy(m1, maps.forward.vertex(v))
        rec.children = recs + rec.children
        rec.lambda_before = before
        return m2, rec, maps.then(mp)
    E = g.end(end)
    if pv.local in E.inner or pv.local in E.outer or pe.copy != pv.copy:
        raise MoveError(f"spur at {v} crosses a gluing of end {end}")
    dom = FiniteGraph(
        tuple(u for u in E.domain.vertices if u != pv.local),
        {y: ends for y, ends in E.domain.edges.items() if y != pe.local},
    )
    g2 = _with_end(g, EndPresentation(end, dom, E.inner, E.outer, dict(E.attach), dict(E.core_attach)))
    wl = E.domain.edges[pe.local][1 if not ad.is_reversed(o) else 0]
    fw = Rewrite(g, g2, domain_edges={end: {pe.local: ()}}, domain_vertices={end: {pv.local: wl}})
    m2 = transport(m, fw)
    rec = MoveRecord("valence_one", {"vertex": v, "edge": e}, before, before, f"domain {end}")
    return _settle(m2, rec, _maps(fw, Rewrite(g2, g)))


# ------------------------------------------------------------- valence two
def valence_two_homotopy(
    m: GraphMap, v: str, filt=None
) -> tuple[GraphMap, MoveRecord, CorrespondenceMaps]:
    """Remove a valence-two vertex by stretching one incident edge across the other.

    The edge pushed across lies in the lower stratum; within one exponential
    stratum it is the one with the larger left eigenvector coefficient, ties
    broken by address.
    """
    before = _lam(m)
    g = m.graph
    v = g.canonical_vertex(v)
    inc = g.incident_edges(v)
    if len(inc) != 2 or ad.unorient(inc[0]) == ad.unorient(inc[1]):
        raise MoveError(f"vertex {v} does not have valence two with distinct edges")
    if not ad.is_core(v) or not all(ad.is_core(o) for o in inc):
        if any(m.ends[ad.end_of(c)].kind == "repelling" for c in [v] + inc if ad.end_of(c)):
            raise MoveError("valence-two homotopy on a repelling end is not supported")
        m1, recs, maps = _absorb_for(m, [v] + inc)
        m2, rec, mp = valence_two_homotopy(m1, maps.forward.vertex(v))
        rec.children = recs + rec.children
        rec.lambda_before = before
        return m2, rec, maps.then(mp)
    filt = filt if filt is not None else compatible_filtration(m)
    a, b = _collapse_choice(m, filt, inc)
    y, x = g.head(a), g.head(b)
    if y == v:
        raise MoveError(f"edge {ad.unorient(a)} is a loop")
    beta = ad.local_of(b)
    if not ad.is_reversed(b):
        ends_new = (ad.local_of(y), ad.local_of(x))
        sigma = (ad.reverse(a), b)
    else:
        ends_new = (ad.local_of(x), ad.local_of(y))
        sigma = (ad.reverse(b), a)
    al = ad.local_of(a)
    vl = ad.local_of(v)
    edges = {e: ends for e, ends in g.core.edges.items() if e != al}
    edges[beta] = ends_new
    g2 = _with_core(g, FiniteGraph(tuple(u for u in g.core.vertices if u != vl), edges))
    fw = Rewrite(g, g2, {al: ()}, {vl: y})
    bw = Rewrite(g2, g, {beta: sigma})
    over = {ad.core(beta): m.map_word(sigma)}
    m2 = transport(m, fw, old_edge=over.get)
    rec = MoveRecord("valence_two", {"vertex": v, "across": ad.unorient(a), "kept": ad.core(beta)}, before, before)
    return _settle(m2, rec, _maps(fw, bw))


def _collapse_choice(m: GraphMap, filt, inc: Sequence[str]) -> tuple[str, str]:
    o1, o2 = sorted(inc, key=ad.unorient)
    l1, l2 = filt.level_of(o1), filt.level_of(o2)
    if l1 != l2:
        return (o1, o2) if l1 < l2 else (o2, o1)
    s = filt.strata[l1]
    if s.finite and s.exponential:
        vec = pf_left_eigenvector(s.matrix)
        c1 = vec[s.matrix.index.index(ad.unorient(o1))]
        c2 = vec[s.matrix.index.index(ad.unorient(o2))]
        if c2 > c1 + 1e-12:
            return o2, o1
    return o1, o2


# -------------------------------------------------------------------- fold
def common_prefix(u: Word, w: Word) -> int:
    k = 0
    while k < len(u) and k < len(w) and u[k] == w[k]:
        k += 1
    return k


def fold(
    m: GraphMap, a: str, b: str, prefix: Optional[int] = None
) -> tuple[GraphMap, MoveRecord, CorrespondenceMaps]:
    """Identify the initial segments of ``a`` and ``b`` mapping to the first ``prefix`` image edges.

    ``prefix`` defaults to the longest common prefix of the two images.  A
    segment shorter than its edge is split off by subdivision first.
    """
    before = _lam(m)
    g = m.graph
    if g.tail(a) != g.tail(b):
        raise MoveError(f"{a} and {b} do not share a tail")
    if a == b:
        raise MoveError("degenerate turn")
    fa, fb = m.edge_image(a), m.edge_image(b)
    k = common_prefix(fa, fb) if prefix is None else prefix
    if k < 1 or tuple(fa[:k]) != tuple(fb[:k]):
        raise MoveError(f"images of {a} and {b} do not share a prefix of length {k}")
    pa, pb = ad.parse(ad.unorient(a)), ad.parse(ad.unorient(b))
    if pa.end is None and pb.end is None:
        return _fold_core(m, a, b, k, before)
    if (
        pa.end is not None
        and pa.end == pb.end
        and pa.copy == pb.copy
        and pa.local != pb.local
        and m.ends[pa.end].kind == "repelling"
        and _domain_images_agree(m, a, b, k)
    ):
        return _fold_domain(m, a, b, k, before)
    m1, recs, maps = _absorb_for(m, [a, b, g.tail(a)])
    a1, b1 = maps.forward.edge_path(a)[0], maps.forward.edge_path(b)[0]
    m2, rec, mp = _fold_core(m1, a1, b1, k, before)
    rec.children = recs + rec.children
    return m2, rec, maps.then(mp)


def _fold_core(m: GraphMap, a: str, b: str, k: int, before: LambdaVector):
    maps = identity_maps(m.graph)
    children: list[MoveRecord] = []
    cuts: dict[str, list[Fraction]] = {}
    for o in (a, b):
        n = len(m.edge_image(o))
        if k < n:
            cuts.setdefault(ad.unorient(o), []).append(Fraction(k, n) if not ad.is_reversed(o) else Fraction(n - k, n))
    if cuts:
        m, rec, mp = subdivide_at(m, cuts)
        children.append(rec)
        maps = maps.then(mp)
        a, b = mp.forward.edge_path(a)[0], mp.forward.edge_path(b)[0]
    g = m.graph
    if ad.unorient(a) == ad.unorient(b):
        raise MoveError("cannot fold an edge onto itself")
    v, x, y = g.tail(a), g.head(a), g.head(b)
    if x == y:
        raise MoveError("fold would identify two edges with the same endpoints")
    targets = _attach_targets(g)
    xl, yl = ad.local_of(x), ad.local_of(y)
    if xl in targets and yl in targets:
        raise MoveError("fold would glue two end attachment vertices")
    keep, gone = (yl, xl) if yl in targets else (xl, yl)
    bu = ad.local_of(b)
    edges: dict[str, tuple[str, str]] = {}
    for e, (t, h) in g.core.edges.items():
        if e == bu:
            continue
        edges[e] = (keep if t == gone else t, keep if h == gone else h)
    g2 = _with_core(g, FiniteGraph(tuple(u for u in g.core.vertices if u != gone), edges))
    fw = Rewrite(g, g2, {bu: (a,) if not ad.is_reversed(b) else (ad.reverse(a),)}, {gone: ad.core(keep)})
    # old path from the kept vertex to the removed one
    bridge = (ad.reverse(a), b) if keep == xl else (ad.reverse(b), a)
    bw_e: dict[str, Word] = {}
    for e, (t, h) in g.core.edges.items():
        if e == bu or gone not in (t, h):
            continue
        w = (bridge if t == gone else ()) + (ad.core(e),) + (reverse_word(bridge) if h == gone else ())
        bw_e[e] = tighten_word(w)
    bw = Rewrite(g2, g, bw_e, {})
    m2 = transport(m, fw)
    maps = maps.then(_maps(fw, bw))
    rec = MoveRecord("fold", {"turn": [a, b], "prefix": k}, before, before, "", children)
    return _settle(m2, rec, maps)


def _domain_images_agree(m: GraphMap, a: str, b: str, k: int) -> bool:
    c = ad.copy_of(a)
    for n in range(m.depth):
        fa = m.edge_image(ad.shift_address(a, n - c))
        fb = m.edge_image(ad.shift_address(b, n - c))
        if tuple(fa[:k]) != tuple(fb[:k]):
            return False
    return True


def _fold_domain(m: GraphMap, a: str, b: str, k: int, before: LambdaVector):
    eid = ad.end_of(a)
    c = ad.copy_of(a)
    maps = identity_maps(m.graph)
    children: list[MoveRecord] = []
    for which in (0, 1):
        o = (a, b)[which]
        lens = {len(m.edge_image(ad.shift_address(o, n - c))) for n in range(m.depth)}
        if min(lens) < k or (k in lens and len(lens) > 1):
            raise MoveError(f"prefix {k} is not uniform across copies of {ad.unorient(o)}")
        if k < min(lens):
            n0 = len(m.edge_image(o))
            kf = k if not ad.is_reversed(o) else n0 - k
            if len(lens) > 1 and ad.is_reversed(o):
                raise MoveError("reversed partial domain fold needs equal image lengths")
            m, rec, mp = _subdivide_domain(m, eid, ad.local_of(o), kf)
            children.append(rec)
            maps = maps.then(mp)
            a, b = mp.forward.edge_path(a)[0], mp.forward.edge_path(b)[0]
    g = m.graph
    E = g.end(eid)
    al, bl = ad.local_of(a), ad.local_of(b)

    def local_head(o: str) -> str:
        t, h = E.domain.edges[ad.local_of(o)]
        return t if ad.is_reversed(o) else h

    x, y = local_head(a), local_head(b)
    if x == y:
        raise MoveError("fold would identify two edges with the same endpoints")
    boundary = set(E.inner) | set(E.outer)
    if x in boundary and y in boundary:
        raise MoveError(f"fold would change the end structure of {eid}")
    keep, gone = (y, x) if y in boundary else (x, y)
    dedges = {}
    for e, (t, h) in E.domain.edges.items():
        if e == bl:
            continue
        dedges[e] = (keep if t == gone else t, keep if h == gone else h)
    dom = FiniteGraph(tuple(u for u in E.domain.vertices if u != gone), dedges)
    g2 = _with_end(g, EndPresentation(eid, dom, E.inner, E.outer, dict(E.attach), dict(E.core_attach)))
    same = ad.is_reversed(a) == ad.is_reversed(b)
    fw = Rewrite(g, g2, domain_edges={eid: {bl: ((al, same),)}}, domain_vertices={eid: {gone: keep}})
    la = (al, not ad.is_reversed(a))
    lb = (bl, not ad.is_reversed(b))
    inv = lambda p: (p[0], not p[1])  # noqa: E731
    bridge = (inv(la), lb) if keep == x else (inv(lb), la)
    table = {}
    for e, (t, h) in E.domain.edges.items():
        if e == bl or gone not in (t, h):
            continue
        w = (bridge if t == gone else ()) + ((e, True),) + (tuple(inv(p) for p in reversed(bridge)) if h == gone else ())
        table[e] = _tighten_pairs(w)
    bw = Rewrite(g2, g, domain_edges={eid: table})
    m2 = transport(m, fw)
    maps = maps.then(_maps(fw, bw))
    rec = MoveRecord("fold", {"turn": [a, b], "prefix": k}, before, before, f"domain {eid}", children)
    return _settle(m2, rec, maps)


def _tighten_pairs(w: Sequence[tuple[str, bool]]) -> tuple[tuple[str, bool], ...]:
    out: list[tuple[str, bool]] = []
    for x, f in w:
        if out and out[-1] == (x, not f):
            out.pop()
        else:
            out.append((x, f))
    return tuple(out)
