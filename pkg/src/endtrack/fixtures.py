"""Built-in example maps.

``ladder-shift``
    The bi-infinite ladder with rungs ``a_i`` (``u_i -> w_i``) and rails
    ``b_i`` (``u_i -> u_{i+1}``), ``c_i`` (``w_i -> w_{i+1}``), mapped by the
    shift ``x_i -> x_{i+1}``.  The left end repels and the right end attracts.
``ladder-shift-tau``
    The shift followed by the compactly supported homotopy equivalence that
    sends ``a_0`` to a 13-edge loop-laden path and fixes every other edge.
``fib-ray``
    A rose on ``p, q`` with ``p -> pq``, ``q -> p`` and an attracting ray.

Ladder cells are named ``a<i>``, ``b<i>``, ``c<i>``, ``u<i>``, ``w<i>`` in the
core, and the ends ``L`` and ``R`` carry one column per fundamental domain.
"""

from __future__ import annotations

import random
from typing import Iterable, Mapping, Sequence

from . import address as ad
from .graphrep import EndPresentation, FiniteGraph, GraphPresentation
from .mapcore import GraphMap, Word, cyclic_tighten, tighten_word

#: Image of ``a_0`` under the compactly supported map, with orientations fixed
#: so that it runs from ``u_0`` to ``w_0``.
TAU_A0 = "~b-1 a-1 c-1 c0 ~a1 ~b0 a0 ~c-1 ~a-1 b-1 b0 a1 ~c0"

FIXTURE_NOTES = {
    "ladder-shift-tau": (
        "f = tau after shift; tau(a0) = " + TAU_A0 + "; orientations chosen so the path "
        "runs from u0 to w0"
    ),
    "ladder-shift": "f = shift x_i -> x_{i+1}",
    "fib-ray": "p -> p q, q -> p; ray edge r of copy 0 -> r@0 r@1; deeper copies shift",
}


class Ladder:
    """Address bookkeeping for the ladder with core columns ``-K..K``."""

    def __init__(self, radius: int = 1):
        self.K = radius

    def edge(self, kind: str, i: int) -> str:
        K = self.K
        if kind == "a":
            if -K <= i <= K:
                return ad.core(f"a{i}")
            return ad.at("R", i - K - 1, "a") if i > K else ad.at("L", -K - 1 - i, "a")
        if -K <= i <= K - 1:
            return ad.core(f"{kind}{i}")
        return ad.at("R", i - K, kind) if i >= K else ad.at("L", -K - 1 - i, kind)

    def vertex(self, kind: str, i: int) -> str:
        K = self.K
        if -K <= i <= K:
            return ad.core(f"{kind}{i}")
        return ad.at("R", i - K - 1, kind + "o") if i > K else ad.at("L", -K - 1 - i, kind + "o")

    def token(self, tok: str) -> str:
        """``'~b-1'`` style ladder notation to an oriented address."""
        rev = tok.startswith("~")
        name = tok[1:] if rev else tok
        e = self.edge(name[0], int(name[1:]))
        return ad.orient(e, not rev)

    def word(self, text: str | Sequence[str]) -> Word:
        toks = text.split() if isinstance(text, str) else text
        return tuple(self.token(t) for t in toks)

    def presentation(self) -> GraphPresentation:
        K = self.K
        verts = [f"{k}{i}" for k in "uw" for i in range(-K, K + 1)]
        edges = {f"a{i}": (f"u{i}", f"w{i}") for i in range(-K, K + 1)}
        for i in range(-K, K):
            edges[f"b{i}"] = (f"u{i}", f"u{i + 1}")
            edges[f"c{i}"] = (f"w{i}", f"w{i + 1}")
        core = FiniteGraph(tuple(verts), edges)
        dom_verts = ("ui", "wi", "uo", "wo")
        right = EndPresentation(
            "R",
            FiniteGraph(dom_verts, {"b": ("ui", "uo"), "c": ("wi", "wo"), "a": ("uo", "wo")}),
            ("ui", "wi"),
            ("uo", "wo"),
            {"uo": "ui", "wo": "wi"},
            {"ui": f"u{K}", "wi": f"w{K}"},
        )
        left = EndPresentation(
            "L",
            FiniteGraph(dom_verts, {"b": ("uo", "ui"), "c": ("wo", "wi"), "a": ("uo", "wo")}),
            ("ui", "wi"),
            ("uo", "wo"),
            {"uo": "ui", "wo": "wi"},
            {"ui": f"u{-K}", "wi": f"w{-K}"},
        )
        return GraphPresentation(core, (left, right))

    def stored_columns(self, depth: int) -> tuple[range, range]:
        """Rung indices and rail indices whose images are stored at this depth."""
        K = self.K
        return range(-K - depth, K + depth + 1), range(-K - depth, K + depth)

    def shift_map(self, tau: Mapping[str, str] | None = None, depth: int = 2) -> GraphMap:
        """The map ``tau`` after the shift; ``tau`` maps ladder edge names to words."""
        tau = dict(tau or {})
        g = self.presentation()
        rungs, rails = self.stored_columns(depth)
        eimg: dict[str, Word] = {}

        def image(kind: str, i: int) -> Word:
            name = f"{kind}{i + 1}"
            return self.word(tau[name]) if name in tau else (self.edge(kind, i + 1),)

        for i in rungs:
            eimg[self.edge("a", i)] = image("a", i)
        for i in rails:
            for kind in "bc":
                eimg[self.edge(kind, i)] = image(kind, i)
        vimg = {}
        for i in rungs:
            for kind in "uw":
                vimg[self.vertex(kind, i)] = self.vertex(kind, i + 1)
        stored = set(g.edges_to_depth(depth))
        vstored = set(g.canonical_vertices_to_depth(depth))
        return GraphMap(
            g,
            depth,
            {"L": "L", "R": "R"},
            {v: w for v, w in vimg.items() if v in vstored},
            {e: w for e, w in eimg.items() if e in stored},
        )

    def rectangle(self, i: int, j: int) -> Word:
        """The loop around columns ``i..j`` based at ``u_i``."""
        w = [f"b{k}" for k in range(i, j)] + [f"a{j}"]
        w += [f"~c{k}" for k in range(j - 1, i - 1, -1)] + [f"~a{i}"]
        return self.word(w)


def ladder_shift_tau() -> GraphMap:
    return Ladder().shift_map({"a0": TAU_A0})


def ladder_shift() -> GraphMap:
    return Ladder().shift_map()


def fib_ray() -> GraphMap:
    core = FiniteGraph(("v",), {"p": ("v", "v"), "q": ("v", "v")})
    ray = EndPresentation(
        "R", FiniteGraph(("x", "y"), {"r": ("x", "y")}), ("x",), ("y",), {"y": "x"}, {"x": "v"}
    )
    g = GraphPresentation(core, (ray,))
    p, q = ad.core("p"), ad.core("q")
    r = lambda n: ad.at("R", n, "r")  # noqa: E731
    y = lambda n: ad.at("R", n, "y")  # noqa: E731
    return GraphMap(
        g,
        2,
        {"R": "R"},
        {ad.core("v"): ad.core("v"), y(0): y(1), y(1): y(2)},
        {p: (p, q), q: (p,), r(0): (r(0), r(1)), r(1): (r(2),)},
    )


FIXTURES = {
    "ladder-shift-tau": ladder_shift_tau,
    "ladder-shift": ladder_shift,
    "fib-ray": fib_ray,
}


def fixture(name: str) -> GraphMap:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None


# ------------------------------------------------------ random perturbations
def _rectangles(lad: Ladder, lo: int, hi: int) -> list[tuple[str, Word]]:
    """Rectangles with columns in ``lo..hi`` as (base vertex, loop) pairs."""
    out = []
    for i in range(lo, hi):
        for j in range(i + 1, hi + 1):
            out.append((lad.vertex("u", i), lad.rectangle(i, j)))
    return out


def _loops_at(lad: Ladder, v: str, lo: int, hi: int, avoid: str) -> list[Word]:
    """Rectangle loops based at ``v`` that avoid edge ``avoid``."""
    g = lad.presentation()
    out = []
    for base, loop in _rectangles(lad, lo, hi):
        for rot in range(len(loop)):
            w = loop[rot:] + loop[:rot]
            if g.tail(w[0]) == v:
                for cand in (w, tuple(ad.reverse(x) for x in reversed(w))):
                    if all(ad.unorient(x) != avoid for x in cand):
                        out.append(cand)
    return out


def perturbed_ladder(seed: int, moves: int = 2, depth: int = 2) -> GraphMap:
    """Shift followed by a random product of Nielsen-type moves in the core.

    Each move replaces one core edge ``e`` by ``gamma e`` or ``e gamma`` where
    ``gamma`` is a rectangle loop at the relevant endpoint that avoids ``e``.
    Such a move fixes every vertex and is invertible, so the composite is a
    compactly supported homotopy equivalence after the shift.
    """
    rng = random.Random(seed)
    lad = Ladder()
    g = lad.presentation()
    names = sorted(g.core.edges)
    tau: dict[str, Word] = {}

    def apply(tau_step: dict[str, Word], w: Iterable[str]) -> Word:
        out: list[str] = []
        for x in w:
            u = ad.unorient(x)
            img = tau_step.get(u, (u,))
            out.extend(img if not ad.is_reversed(x) else tuple(ad.reverse(y) for y in reversed(img)))
        return tighten_word(out)

    done = 0
    while done < moves:
        e = ad.core(rng.choice(names))
        front = rng.random() < 0.5
        v = g.tail(e) if front else g.head(e)
        loops = _loops_at(lad, v, -1, 1, e)
        if not loops:
            continue
        gamma = rng.choice(loops)
        step = {e: gamma + (e,) if front else (e,) + gamma}
        current = {x: tau.get(x, (x,)) for x in g.core_edges()}
        tau = {x: apply(step, w) for x, w in current.items()}
        done += 1
    text = {}
    for x, w in tau.items():
        if w != (x,):
            text[ad.local_of(x)] = [_to_token(lad, y) for y in w]
    return lad.shift_map({k: " ".join(v) for k, v in text.items()}, depth=depth)


def _to_token(lad: Ladder, o: str) -> str:
    rev = ad.is_reversed(o)
    name = ad.local_of(o)
    return ("~" if rev else "") + name


def random_loop(g_edges: Mapping[str, tuple[str, str]], rng: random.Random, pieces: int = 3) -> Word:
    """A random nontrivial cyclically tight loop in a finite connected graph.

    Built from a spanning tree: each chosen non-tree edge closes up with tree
    paths to a fixed root, and a few such generators are multiplied.
    """
    verts = sorted({v for ends in g_edges.values() for v in ends})
    root = verts[0]
    adj: dict[str, list[tuple[str, str]]] = {v: [] for v in verts}
    for e, (t, h) in sorted(g_edges.items()):
        adj[t].append((e, h))
        adj[h].append((ad.reverse(e), t))
    parent: dict[str, str | None] = {root: None}
    order = [root]
    for v in order:
        for o, w in adj[v]:
            if w not in parent:
                parent[w] = o
                order.append(w)
    tree = {ad.unorient(o) for o in parent.values() if o is not None}

    def to_root(v: str) -> list[str]:
        out = []
        while parent[v] is not None:
            o = parent[v]
            out.append(ad.reverse(o))
            v = g_edges[ad.unorient(o)][0] if not ad.is_reversed(o) else g_edges[ad.unorient(o)][1]
        return out

    gens = []
    for e, (t, h) in sorted(g_edges.items()):
        if e in tree:
            continue
        down = [ad.reverse(x) for x in reversed(to_root(t))]
        gens.append(tuple(down) + (e,) + tuple(to_root(h)))
    if not gens:
        raise ValueError("graph is a tree")
    for _ in range(100):
        w: list[str] = []
        for _ in range(rng.randint(1, pieces)):
            gen = rng.choice(gens)
            if rng.random() < 0.5:
                gen = tuple(ad.reverse(x) for x in reversed(gen))
            w.extend(gen)
        loop = cyclic_tighten(w)
        if loop:
            return loop
    raise ValueError("failed to produce a nontrivial loop")
