"""Edge fates and the compatible filtration.

Fates are decided exactly on a finite window ``C*``: the core plus every end
copy below a cutoff ``B``.  ``B`` is chosen so that no core or stored-window
image reaches a repelling copy at or beyond ``B``.  Beyond the cutoff,
attracting copies only map further out (an escaping sink) and repelling copies
only receive arcs from further out (a backward-escaping source), so on ``C*``:

* an edge escapes iff nothing it reaches inside ``C*`` lies on a cycle;
* an edge is backward escaping iff nothing reaching it inside ``C*`` lies on
  a cycle.

Deep attracting copies escape; their backward fate is resolved through their
finitely many predecessors, which lie strictly closer to the core.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

from . import address as ad
from .mapcore import GraphMap, MapError, classify_ends
from .spectral import (
    LambdaVector,
    TransitionMatrix,
    is_exponential,
    is_irreducible,
    scc,
    spectral_radius,
    transition_matrix,
)

ESCAPING = "escaping"
BACKWARD = "backward_escaping"
NEITHER = "neither"


class FiltrationError(MapError):
    """Raised when no compatible filtration exists or a check fails internally."""


@dataclass(frozen=True)
class FoldedDigraph:
    """Window edges plus one class node ``E@*`` per end for the copies beyond it.

    ``arcs[u]`` lists ``(v, drift)``: for arcs into a class node the drift is
    the copy offset beyond the cutoff, otherwise 0.
    """

    nodes: tuple[str, ...]
    arcs: dict[str, list[tuple[str, int]]]
    cutoff: int


class FateTable:
    """Exact fate decision for every edge of a map."""

    def __init__(self, m: GraphMap):
        self.m = m
        self.ends = classify_ends(m)
        self.attracting = {e for e, c in self.ends.items() if c.kind == "attracting"}
        self.repelling = {e for e, c in self.ends.items() if c.kind == "repelling"}
        d = m.depth
        reach = -1
        for e in m.stored_edges():
            for x in m.edge_image(e):
                p = ad.parse(ad.unorient(x))
                if p.end in self.repelling:
                    reach = max(reach, p.copy)
        self.cutoff = max(d, reach + 1)
        self.cstar: list[str] = m.graph.edges_to_depth(self.cutoff)
        cset = set(self.cstar)
        self._cset = cset
        self.succ: dict[str, list[str]] = {}
        self.pred: dict[str, list[str]] = {e: [] for e in self.cstar}
        self.occurrences: dict[str, set[str]] = {}
        for e in self.cstar:
            targets = []
            for x in m.edge_image(e):
                u = ad.unorient(x)
                self.occurrences.setdefault(u, set()).add(e)
                if u in cset and u not in targets:
                    targets.append(u)
            self.succ[e] = targets
            for u in targets:
                self.pred[u].append(e)
        comps = scc(self.cstar, self.succ)
        cyclic = set()
        for comp in comps:
            if len(comp) > 1 or comp[0] in self.succ[comp[0]]:
                cyclic.update(comp)
        self.cyclic = cyclic
        self.non_escaping = _closure(cyclic, self.pred)
        self.non_backward = _closure(cyclic, self.succ)
        self._deep_memo: dict[str, bool] = {}
        self._deep_sources: dict[tuple[str, str], list[tuple[str, str, int]]] = {}
        for E in m.graph.ends:
            T = m.end_targets[E.id]
            for y in E.domain.edges:
                for x in m.edge_image(ad.at(E.id, d - 1, y)):
                    p = ad.parse(ad.unorient(x))
                    self._deep_sources.setdefault((T, p.local), []).append((E.id, y, p.copy))

    # -------------------------------------------------------------- queries
    def fate(self, e: str) -> str:
        e = ad.unorient(e)
        if e in self._cset:
            if e not in self.non_backward and self.repelling:
                return BACKWARD
            if e not in self.non_escaping:
                return ESCAPING
            return NEITHER
        p = ad.parse(e)
        if p.end is None or not self.m.graph.has_edge(e):
            raise FiltrationError(f"unknown edge {e}")
        if p.end in self.repelling:
            return BACKWARD
        return BACKWARD if self._deep_backward(e) else ESCAPING

    def _deep_backward(self, e: str) -> bool:
        memo = self._deep_memo
        if e in memo:
            return memo[e]
        stack = [e]
        while stack:
            cur = stack[-1]
            if cur in memo:
                stack.pop()
                continue
            preds = self._deep_predecessors(cur)
            pending = [q for q in preds if q not in self._cset and q not in memo]
            if pending:
                stack.extend(pending)
                continue
            ok = True
            for q in preds:
                if q in self._cset:
                    ok = ok and q not in self.non_backward
                else:
                    ok = ok and memo[q]
            memo[cur] = ok
            stack.pop()
        return memo[e]

    def _deep_predecessors(self, e: str) -> list[str]:
        """Every edge whose image crosses the deep attracting edge ``e``."""
        p = ad.parse(e)
        d = self.m.depth
        preds = set(self.occurrences.get(e, ()))
        for src_end, y, c in self._deep_sources.get((p.end, p.local), ()):
            k = p.copy - c + d - 1
            if k >= self.cutoff:
                preds.add(ad.at(src_end, k, y))
        return sorted(preds)

    def middle(self) -> list[str]:
        return [e for e in self.cstar if self.fate(e) == NEITHER]

    def folded_digraph(self) -> FoldedDigraph:
        B = self.cutoff
        arcs: dict[str, list[tuple[str, int]]] = {}
        for e in self.cstar:
            out = []
            for x in self.m.edge_image(e):
                u = ad.unorient(x)
                if u in self._cset:
                    out.append((u, 0))
                else:
                    q = ad.parse(u)
                    out.append((f"{q.end}@*", q.copy - B))
            arcs[e] = out
        for E in self.m.graph.ends:
            drift = self.ends[E.id].drift
            arcs[f"{E.id}@*"] = [(f"{self.m.end_targets[E.id]}@*", drift)]
        return FoldedDigraph(tuple(arcs), arcs, B)


def _closure(seeds: set[str], adj: dict[str, list[str]]) -> set[str]:
    seen = set(seeds)
    stack = list(seeds)
    while stack:
        v = stack.pop()
        for w in adj.get(v, ()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def fate_table(m: GraphMap) -> FateTable:
    """The fate table of ``m``, cached on the (immutable) map."""
    ft = m.__dict__.get("_fate_table")
    if ft is None:
        ft = FateTable(m)
        m.__dict__["_fate_table"] = ft
    return ft


def edge_fate(m: GraphMap, e: str) -> str:
    return fate_table(m).fate(e)


def brute_force_fate(m: GraphMap, e: str, compact_depth: Optional[int] = None) -> str:
    """Fate by explicit iteration of image and preimage sets on a truncation.

    Backward escape is only possible toward a repelling end; without one, an
    edge that nothing maps onto is judged by its forward orbit alone.

    The compact reference set is every edge below ``compact_depth`` (default:
    the depth plus the size of the folded digraph); image and preimage sets
    are iterated for twice a horizon that dominates the transient length and
    tested against the reference set on the second half.
    """
    e = ad.unorient(e)
    g = m.graph
    nodes = len(g.edges_to_depth(m.depth)) + len(g.ends)
    D = m.depth + nodes if compact_depth is None else compact_depth
    K = set(g.edges_to_depth(D))
    copy = ad.copy_of(e) or 0
    N = nodes + D + copy + 1 + _max_reach(m)
    mat = g.edges_to_depth(D + 2 * N + copy + 2)
    pre: dict[str, set[str]] = {}
    for x in mat:
        for y in m.edge_image(x):
            pre.setdefault(ad.unorient(y), set()).add(x)

    def meets(step) -> bool:
        cur = {e}
        for n in range(1, 2 * N + 1):
            cur = step(cur)
            if n >= N and cur & K:
                return True
        return False

    forward = lambda s: {ad.unorient(y) for x in s for y in m.edge_image(x)}  # noqa: E731
    backward = lambda s: {q for x in s for q in pre.get(x, ())}  # noqa: E731
    if not meets(backward) and any(c.kind == "repelling" for c in m.ends.values()):
        return BACKWARD
    if not meets(forward):
        return ESCAPING
    return NEITHER


def _max_reach(m: GraphMap) -> int:
    r = 0
    for e in m.stored_edges():
        for x in m.edge_image(e):
            r = max(r, ad.copy_of(x) or 0)
    return r


# --------------------------------------------------------------- strata
@dataclass
class Stratum:
    level: int
    kind: str  # "escaping", "backward" or "finite"
    edges: tuple[str, ...]
    matrix: Optional[TransitionMatrix] = None
    irreducible: bool = False
    radius: float = 0.0
    exponential: bool = False

    @property
    def finite(self) -> bool:
        return self.kind == "finite"


@dataclass
class Filtration:
    """Ordered strata; ``strata[i]`` is ``H_i``.

    Infinite strata list only their members inside the fate window; membership
    of other edges is decided by fate.
    """

    strata: list[Stratum]
    fates: FateTable = field(repr=False)

    @cached_property
    def _finite_levels(self) -> dict[str, int]:
        out = {}
        for i, s in enumerate(self.strata):
            if s.finite:
                for e in s.edges:
                    out[e] = i
        return out

    def level_of(self, e: str) -> int:
        e = ad.unorient(e)
        lv = self._finite_levels.get(e)
        if lv is not None:
            return lv
        fate = self.fates.fate(e)
        kind = {ESCAPING: "escaping", BACKWARD: "backward"}.get(fate)
        for i, s in enumerate(self.strata):
            if s.kind == kind:
                return i
        raise FiltrationError(f"edge {e} belongs to no stratum")

    @property
    def top(self) -> int:
        return len(self.strata) - 1

    def finite_strata(self) -> list[Stratum]:
        return [s for s in self.strata if s.finite]

    def exponential_strata(self) -> list[Stratum]:
        return [s for s in self.strata if s.finite and s.exponential]

    def middle_edges(self) -> list[str]:
        return [e for s in self.finite_strata() for e in s.edges]


def _finite_stratum(m: GraphMap, level: int, comp: list[str]) -> Stratum:
    edges = tuple(sorted(comp))
    M = transition_matrix(m, edges)
    irr = is_irreducible(M)
    return Stratum(
        level,
        "finite",
        edges,
        M,
        irr,
        spectral_radius(M),
        irr and is_exponential(M),
    )


def compatible_filtration(m: GraphMap) -> Filtration:
    ft = fate_table(m)
    middle = sorted(ft.middle())
    mset = set(middle)
    succ = {e: [u for u in ft.succ[e] if u in mset] for e in middle}
    comps = scc(middle, succ)
    escaping = tuple(e for e in ft.cstar if ft.fate(e) == ESCAPING)
    strata = [Stratum(0, "escaping", escaping)]
    for comp in comps:
        strata.append(_finite_stratum(m, len(strata), comp))
    if ft.repelling:
        backward = tuple(e for e in ft.cstar if ft.fate(e) == BACKWARD)
        strata.append(Stratum(len(strata), "backward", backward))
    filt = Filtration(strata, ft)
    rep = check_invariance(m, filt)
    if not rep.ok:
        raise FiltrationError(f"constructed filtration is not invariant: {rep.message}")
    return filt


def reordered(filt: Filtration, order: list[int]) -> Filtration:
    """The same strata in a different order (levels renumbered)."""
    strata = []
    for new, old in enumerate(order):
        s = filt.strata[old]
        strata.append(Stratum(new, s.kind, s.edges, s.matrix, s.irreducible, s.radius, s.exponential))
    return Filtration(strata, filt.fates)


@dataclass(frozen=True)
class InvarianceReport:
    ok: bool
    witness: Optional[str] = None
    message: str = ""


def check_invariance(m: GraphMap, filt: Filtration) -> InvarianceReport:
    """Every edge of ``G_i`` maps into ``G_i``, checked on the fate window and one copy beyond."""
    ft = filt.fates
    extra = []
    for E in m.graph.ends:
        extra += m.graph.end_edges(E.id, ft.cutoff)
    for e in ft.cstar + extra:
        lv = filt.level_of(e)
        for x in m.edge_image(e):
            if filt.level_of(x) > lv:
                return InvarianceReport(
                    False, e, f"image of {e} (level {lv}) crosses {ad.unorient(x)} at level {filt.level_of(x)}"
                )
    return InvarianceReport(True)


def lambda_vector(m: GraphMap, filt: Filtration | None = None) -> LambdaVector:
    filt = filt if filt is not None else compatible_filtration(m)
    return LambdaVector(tuple(s.radius for s in filt.exponential_strata()))


def top_lambda(m: GraphMap, filt: Filtration | None = None) -> float:
    filt = filt if filt is not None else compatible_filtration(m)
    return max((s.radius for s in filt.finite_strata()), default=0.0)
