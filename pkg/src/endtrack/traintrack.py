"""Relative train track pipeline: stretch-factor minimization, repair and verification."""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from . import address as ad
from .filtration import Filtration, compatible_filtration, fate_table, lambda_vector, top_lambda, BACKWARD, ESCAPING
from .mapcore import (
    CollapsedEdgeError,
    GraphMap,
    MapError,
    Word,
    classify_turn,
    derivative,
    tighten_word,
    turn,
    turn_map,
)
from .moves import (
    CorrespondenceMaps,
    MoveError,
    MoveRecord,
    collapse_invariant_forest,
    common_prefix,
    fold,
    identity_maps,
    pretrivial_forest,
    pull_tight,
    subdivide_at,
    valence_one_homotopy,
    valence_two_homotopy,
)
from .spectral import ContractError, LambdaVector, compare_lambda


class CapExceeded(RuntimeError):
    """Raised when the driver hits a move or sweep cap; carries the best map found."""

    def __init__(self, message: str, best: GraphMap, log: list[MoveRecord]):
        super().__init__(message)
        self.best = best
        self.log = log


@dataclass(frozen=True)
class Caps:
    moves: int = 10000
    sweeps: int = 64


# ---------------------------------------------------------------- bounded
def boundedness_constant(m: GraphMap, filt: Filtration | None = None) -> int:
    """Middle edges plus top-stratum window edges whose images leave the top stratum."""
    filt = filt if filt is not None else compatible_filtration(m)
    count = len(filt.middle_edges())
    top = filt.strata[-1]
    if top.kind == "backward":
        ft = filt.fates
        window = ft.cstar + [e for E in m.graph.ends for e in m.graph.end_edges(E.id, ft.cutoff)]
        for e in window:
            if ft.fate(e) != BACKWARD:
                continue
            if any(ft.fate(x) != BACKWARD for x in m.edge_image(e)):
                count += 1
    return count


def is_bounded(m: GraphMap, filt: Filtration | None = None, constant: Optional[int] = None) -> bool:
    """At most ``L`` exponential strata, each with at most ``L`` edges.

    ``L`` is recomputed from ``m`` unless a fixed ``constant`` is passed.
    """
    filt = filt if filt is not None else compatible_filtration(m)
    L = boundedness_constant(m, filt) if constant is None else constant
    exp = filt.exponential_strata()
    return len(exp) <= L and all(len(s.edges) <= L for s in exp)


# ------------------------------------------------------- core subdivision
def _exponential(filt: Filtration, r: int):
    if not 0 <= r < len(filt.strata):
        raise MoveError(f"no stratum {r}")
    s = filt.strata[r]
    if not (s.finite and s.exponential):
        raise MoveError(f"stratum {r} is not a finite exponential stratum")
    return s


def core_extent(m: GraphMap, edges: Sequence[str]) -> dict[str, tuple[Fraction, Fraction]]:
    """Exact ``(inf, sup)`` of the points of each edge whose forward orbit stays in ``edges``.

    A point at parameter ``t`` of ``e`` sits at position ``t * |f(e)|`` of the
    image path, so the extremes solve a system of min/max equations of
    contracting affine maps.  Float value iteration picks a policy, which is
    then solved exactly over the rationals and improved until optimal.
    """
    edges = [ad.unorient(e) for e in edges]
    eset = set(edges)
    occ: dict[str, list[tuple[int, str, bool]]] = {}
    length: dict[str, int] = {}
    for e in edges:
        w = m.edge_image(e)
        length[e] = len(w)
        occ[e] = [(j, ad.unorient(x), not ad.is_reversed(x)) for j, x in enumerate(w) if ad.unorient(x) in eset]
        if not occ[e]:
            raise MoveError(f"edge {e} does not map over its stratum")
    lo = {e: 0.0 for e in edges}
    hi = {e: 1.0 for e in edges}
    for _ in range(4000):
        nlo = {e: min((j + lo[g]) / length[e] if f else (j + 1 - hi[g]) / length[e] for j, g, f in occ[e]) for e in edges}
        nhi = {e: max((j + hi[g]) / length[e] if f else (j + 1 - lo[g]) / length[e] for j, g, f in occ[e]) for e in edges}
        done = all(abs(nlo[e] - lo[e]) < 1e-15 and abs(nhi[e] - hi[e]) < 1e-15 for e in edges)
        lo, hi = nlo, nhi
        if done:
            break

    def value(e: str, o: tuple[int, str, bool], L: dict, H: dict, low: bool):
        j, g, f = o
        if low:
            return (j + L[g]) / length[e] if f else (j + 1 - H[g]) / length[e]
        return (j + H[g]) / length[e] if f else (j + 1 - L[g]) / length[e]

    pol_lo = {e: min(occ[e], key=lambda o: value(e, o, lo, hi, True)) for e in edges}
    pol_hi = {e: max(occ[e], key=lambda o: value(e, o, lo, hi, False)) for e in edges}
    for _ in range(200):
        L, H = _solve_policy(edges, length, pol_lo, pol_hi)
        improved = False
        for e in edges:
            best = min(occ[e], key=lambda o: value(e, o, L, H, True))
            if value(e, best, L, H, True) < L[e]:
                pol_lo[e] = best
                improved = True
            best = max(occ[e], key=lambda o: value(e, o, L, H, False))
            if value(e, best, L, H, False) > H[e]:
                pol_hi[e] = best
                improved = True
        if not improved:
            return {e: (L[e], H[e]) for e in edges}
    raise MoveError("core extent policy iteration did not settle")


def _solve_policy(edges, length, pol_lo, pol_hi) -> tuple[dict, dict]:
    """Solve ``x = A x + b`` exactly for the chosen policy."""
    idx = {}
    for e in edges:
        idx[("lo", e)] = len(idx)
        idx[("hi", e)] = len(idx)
    n = len(idx)
    A = [[Fraction(0)] * (n + 1) for _ in range(n)]
    for e in edges:
        for side, (j, g, f) in (("lo", pol_lo[e]), ("hi", pol_hi[e])):
            row = A[idx[(side, e)]]
            row[idx[(side, e)]] += 1
            inv = Fraction(1, length[e])
            if f:
                row[idx[(side, g)]] -= inv
                row[n] += Fraction(j) * inv
            else:
                other = "hi" if side == "lo" else "lo"
                row[idx[(other, g)]] += inv
                row[n] += Fraction(j + 1) * inv
    for c in range(n):
        p = next(r for r in range(c, n) if A[r][c] != 0)
        A[c], A[p] = A[p], A[c]
        piv = A[c][c]
        A[c] = [x / piv for x in A[c]]
        for r in range(n):
            if r != c and A[r][c] != 0:
                f = A[r][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[c])]
    L = {e: A[idx[("lo", e)]][n] for e in edges}
    H = {e: A[idx[("hi", e)]][n] for e in edges}
    return L, H


def core_subdivision(m: GraphMap, r: int, filt: Filtration | None = None):
    """Cut every edge of exponential stratum ``r`` at the ends of its non-escaping core.

    Returns ``(new_map, records, maps)``.  Flanking pieces drop into lower
    strata and the middle pieces form the new stratum.
    """
    filt = filt if filt is not None else compatible_filtration(m)
    s = _exponential(filt, r)
    ext = core_extent(m, s.edges)
    cuts = {}
    for e, (lo, hi) in ext.items():
        if lo >= hi:
            raise MoveError(f"core of {e} is a single point")
        ts = [t for t in (lo, hi) if 0 < t < 1]
        if ts:
            cuts[e] = ts
    if not cuts:
        return m, [], identity_maps(m.graph)
    m2, rec, maps = subdivide_at(m, cuts)
    rec.name = "subdivide"
    rec.params["reason"] = "core"
    return m2, [rec], maps


def _pieces_family(maps: CorrespondenceMaps, edges: Sequence[str]) -> list[str]:
    out = []
    for e in edges:
        out += [ad.unorient(x) for x in maps.forward.edge_path(e)]
    return out


def _find_stratum(filt: Filtration, members: set[str]) -> Optional[int]:
    for i, s in enumerate(filt.strata):
        if s.finite and s.exponential and set(s.edges) & members:
            return i
    return None


# --------------------------------------------- inessential connecting paths
def attaching_points(m: GraphMap, filt: Filtration, r: int) -> list[str]:
    """Vertices of stratum ``r`` met by lower-stratum edges."""
    s = filt.strata[r]
    verts = set()
    for e in s.edges:
        verts.update(m.graph.ends_of(e))
    out = []
    for v in sorted(verts):
        if any(filt.level_of(o) < r for o in m.graph.incident_edges(v)):
            out.append(v)
    return out


def _lower_geodesics(m: GraphMap, filt: Filtration, r: int, points: Sequence[str]):
    """BFS geodesics in the lower strata between pairs of attaching points."""
    ft = filt.fates
    window = set(ft.cstar)
    for E in m.graph.ends:
        window.update(m.graph.end_edges(E.id, ft.cutoff))

    def usable(o: str) -> bool:
        u = ad.unorient(o)
        return u in window and filt.level_of(u) < r

    pset = set(points)
    for p in points:
        prev: dict[str, Optional[str]] = {p: None}
        queue = deque([p])
        while queue:
            v = queue.popleft()
            for o in m.graph.incident_edges(v):
                if not usable(o):
                    continue
                w = m.graph.head(o)
                if w not in prev:
                    prev[w] = o
                    queue.append(w)
        for q in sorted(pset & set(prev)):
            if q <= p:
                continue
            path = []
            v = q
            while prev[v] is not None:
                path.append(prev[v])
                v = m.graph.tail(prev[v])
            yield p, q, tuple(reversed(path))


def _trivial_geodesic(m: GraphMap, filt: Filtration, r: int):
    pts = attaching_points(m, filt, r)
    for p, q, path in _lower_geodesics(m, filt, r, pts):
        if not tighten_word(m.map_word(path)):
            return p, q, path
    return None


def collapse_inessential_connecting_paths(m: GraphMap, r: int, filt: Filtration | None = None, max_folds: int = 1000):
    """Fold away lower-stratum paths between attaching points whose images are trivial.

    Returns ``(new_map, records, maps)``.
    """
    filt = filt if filt is not None else compatible_filtration(m)
    members = set(_exponential(filt, r).edges)
    records: list[MoveRecord] = []
    maps = identity_maps(m.graph)
    folds = 0
    while True:
        found = _trivial_geodesic(m, filt, r)
        if found is None:
            return m, records, maps
        _, _, alpha = found
        while alpha:
            if folds >= max_folds:
                raise MoveError("too many folds while collapsing a connecting path")
            pair = _cancelling_junction(m, alpha)
            if pair is None:
                raise MoveError("trivial image without a cancelling junction")
            m, rec, mp = fold(m, *pair)
            records.append(rec)
            maps = maps.then(mp)
            folds += 1
            alpha = mp.forward.path(alpha)
            members = set(_pieces_family(mp, sorted(members)))
        filt = compatible_filtration(m)
        nr = _find_stratum(filt, members)
        if nr is None:
            return m, records, maps
        r = nr


def _cancelling_junction(m: GraphMap, alpha: Word) -> Optional[tuple[str, str]]:
    for a, b in zip(alpha, alpha[1:]):
        fa = m.edge_image(ad.reverse(a))
        fb = m.edge_image(b)
        if fa and fb and fa[0] == fb[0]:
            return ad.reverse(a), b
    return None


# ------------------------------------------------------------ verification
@dataclass
class Check:
    ok: bool
    witness: Optional[str] = None
    note: str = ""


@dataclass
class RTTReport:
    checks: dict[str, Check]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks.values())

    def failures(self) -> list[tuple[str, Check]]:
        return [(k, c) for k, c in self.checks.items() if not c.ok]

    def lines(self) -> list[str]:
        out = []
        for k, c in self.checks.items():
            tail = f" witness={c.witness}" if c.witness else ""
            note = f" ({c.note})" if c.note else ""
            out.append(f"{k}: {'pass' if c.ok else 'FAIL'}{tail}{note}")
        out.append(f"overall: {'pass' if self.ok else 'FAIL'}")
        return out


def _legal(m: GraphMap, a: str, b: str) -> tuple[bool, Optional[int]]:
    try:
        v = classify_turn(m, (a, b))
    except CollapsedEdgeError:
        return False, None
    return v.kind == "legal", v.witness


def verify_rtt(m: GraphMap, filt: Filtration | None = None) -> RTTReport:
    """Check the relative train track conditions, with a witness for each failure."""
    filt = filt if filt is not None else compatible_filtration(m)
    checks: dict[str, Check] = {}
    checks["infinite_strata"] = _check_infinite(filt)
    closure = Check(True)
    mixed = Check(True)
    paths = Check(True, note="geodesic certificates only")
    legal = Check(True)
    for r, s in enumerate(filt.strata):
        if not (s.finite and s.exponential):
            continue
        members = set(s.edges)
        oriented = [o for e in s.edges for o in (e, ad.reverse(e))]
        if closure.ok:
            for o in oriented:
                try:
                    d = derivative(m, o)
                except CollapsedEdgeError:
                    closure = Check(False, ad.unorient(o), f"stratum {r}: image is a point")
                    break
                if ad.unorient(d) not in members:
                    closure = Check(False, ad.unorient(o), f"stratum {r}: D{o} = {d} leaves the stratum")
                    break
        if mixed.ok:
            bad = _mixed_turn_failure(m, filt, r, oriented)
            if bad:
                mixed = Check(False, bad, f"stratum {r}: illegal mixed turn")
        if paths.ok:
            found = _trivial_geodesic(m, filt, r)
            if found:
                p, q, path = found
                paths = Check(False, " ".join(path), f"stratum {r}: connecting path {p} -> {q} has trivial image")
        if legal.ok:
            bad = _illegal_in_images(m, r, members)
            if bad:
                legal = Check(False, bad, f"stratum {r}: illegal turn inside an edge image")
    checks["df_closure"] = closure
    checks["mixed_turns"] = mixed
    checks["connecting_paths"] = paths
    checks["legal_images"] = legal
    return RTTReport(checks)


def _check_infinite(filt: Filtration) -> Check:
    strata = filt.strata
    ft = filt.fates
    for i, s in enumerate(strata):
        if s.kind == "escaping" and i != 0:
            return Check(False, f"stratum {i}", "escaping stratum not at the bottom")
        if s.kind == "backward" and i != len(strata) - 1:
            return Check(False, f"stratum {i}", "backward-escaping stratum not at the top")
        want = {"escaping": ESCAPING, "backward": BACKWARD}.get(s.kind)
        for e in s.edges:
            if want and ft.fate(e) != want:
                return Check(False, e, f"edge in stratum {i} is not {want}")
            if s.finite and ft.fate(e) in (ESCAPING, BACKWARD):
                return Check(False, e, f"finite stratum {i} holds an edge with fate {ft.fate(e)}")
    return Check(True)


def _mixed_turn_failure(m: GraphMap, filt: Filtration, r: int, oriented: Sequence[str]) -> Optional[str]:
    by_vertex: dict[str, list[str]] = {}
    for o in oriented:
        by_vertex.setdefault(m.graph.tail(o), []).append(o)
    for v, mine in sorted(by_vertex.items()):
        lower = [o for o in m.graph.incident_edges(v) if filt.level_of(o) < r]
        for a in mine:
            for b in lower:
                ok, _ = _legal(m, a, b)
                if not ok:
                    return f"{{{a}, {b}}}"
    return None


def _illegal_in_images(m: GraphMap, r: int, members: set[str]) -> Optional[str]:
    for e in sorted(members):
        w = m.edge_image(e)
        for x, y in zip(w, w[1:]):
            if ad.unorient(x) in members and ad.unorient(y) in members:
                ok, _ = _legal(m, ad.reverse(x), y)
                if not ok:
                    return f"{e}: {{{ad.reverse(x)}, {y}}}"
        for t in _stratum_turns(m, members):
            ok, _ = _legal(m, *t)
            if ok:
                u = turn_map(m, t)
                if ad.unorient(u[0]) not in members or ad.unorient(u[1]) not in members:
                    return f"T{{{t[0]}, {t[1]}}} leaves the stratum"
    return None


def _stratum_turns(m: GraphMap, members: set[str]) -> list[tuple[str, str]]:
    by_vertex: dict[str, list[str]] = {}
    for e in sorted(members):
        for o in (e, ad.reverse(e)):
            by_vertex.setdefault(m.graph.tail(o), []).append(o)
    out = []
    for os_ in by_vertex.values():
        for i, a in enumerate(os_):
            for b in os_[i + 1 :]:
                out.append(turn(a, b))
    return out


# ------------------------------------------------------------------ driver
class _Run:
    """Mutable state threaded through the driver."""

    def __init__(self, m: GraphMap, caps: Caps):
        self.m = m
        self.caps = caps
        self.log: list[MoveRecord] = []
        self.maps = identity_maps(m.graph)
        self.moves = 0
        self.reverted = 0

    def apply(self, result) -> None:
        m, rec, mp = result
        self.m = m
        self.log.append(rec)
        self.maps = self.maps.then(mp)
        self.moves += 1
        if self.moves > self.caps.moves:
            raise CapExceeded(f"move cap {self.caps.moves} exceeded", self.m, self.log)

    def apply_many(self, result) -> None:
        m, recs, mp = result
        self.m = m
        self.log.extend(recs)
        self.maps = self.maps.then(mp)
        self.moves += len(recs)
        if self.moves > self.caps.moves:
            raise CapExceeded(f"move cap {self.caps.moves} exceeded", self.m, self.log)


def normalize(run: _Run) -> None:
    """Tighten, collapse pretrivial forests and prune core valence-one vertices."""
    res = pull_tight(run.m)
    if res[1].params["edges"]:
        run.apply(res)
    while True:
        forest = pretrivial_forest(run.m)
        if forest:
            run.apply(collapse_invariant_forest(run.m, forest))
            continue
        spur = next((v for v in run.m.graph.core.vertices if len(run.m.graph.incident_edges(ad.core(v))) == 1), None)
        if spur is None:
            return
        run.apply(valence_one_homotopy(run.m, ad.core(spur)))


def _fold_candidate(m: GraphMap, members: set[str], skip: set) -> Optional[tuple[str, str]]:
    """An illegal stratum turn inside an edge image, pushed to the step before degeneration."""
    for e in sorted(members):
        w = m.edge_image(e)
        for x, y in zip(w, w[1:]):
            if ad.unorient(x) not in members or ad.unorient(y) not in members:
                continue
            t = turn(ad.reverse(x), y)
            ok, k = _legal(m, *t)
            if ok or k is None:
                continue
            for _ in range(k - 1):
                t = turn_map(m, t)
            if t not in skip:
                return t
    return None


def minimize_lambda(m: GraphMap, caps: Caps = Caps(), run: Optional[_Run] = None):
    """Fold illegal turns in exponential strata until no sweep changes the map.

    Returns ``(new_map, log, maps)``.  A fold that would raise the stretch
    vector is reverted and its turn skipped.
    """
    run = run or _Run(m, caps)
    normalize(run)
    skip: set = set()
    sweeps = 0
    while True:
        sweeps += 1
        if sweeps > caps.sweeps:
            raise CapExceeded(f"sweep cap {caps.sweeps} exceeded", run.m, run.log)
        filt = compatible_filtration(run.m)
        changed = False
        for r, s in enumerate(filt.strata):
            if not (s.finite and s.exponential):
                continue
            members = set(s.edges)
            t = _fold_candidate(run.m, members, skip)
            if t is None:
                continue
            if any(ad.unorient(derivative(run.m, o)) not in members for e in members for o in (e, ad.reverse(e))):
                run.apply_many(core_subdivision(run.m, r, filt))
                changed = True
                break
            before = lambda_vector(run.m, filt)
            try:
                cand = fold(run.m, *t)
            except MoveError:
                skip.add(t)
                continue
            if compare_lambda(cand[1].lambda_after, before) == "greater":
                skip.add(t)
                run.reverted += 1
                continue
            run.apply(cand)
            normalize(run)
            changed = True
            break
        if not changed:
            if _restore_boundedness(run):
                continue
            return run.m, run.log, run.maps


def _restore_boundedness(run: _Run) -> bool:
    filt = compatible_filtration(run.m)
    if is_bounded(run.m, filt):
        return False
    for v in run.m.graph.core.vertices:
        inc = run.m.graph.incident_edges(ad.core(v))
        if len(inc) != 2 or ad.unorient(inc[0]) == ad.unorient(inc[1]):
            continue
        if filt.level_of(inc[0]) != filt.level_of(inc[1]) or not filt.strata[filt.level_of(inc[0])].finite:
            continue
        try:
            cand = valence_two_homotopy(run.m, ad.core(v), filt)
        except MoveError:
            continue
        if compare_lambda(cand[1].lambda_after, cand[1].lambda_before) == "greater":
            continue
        run.apply(cand)
        return True
    return False


# ---------------------------------------------------------------- pipeline
@dataclass
class PipelineResult:
    map: GraphMap
    filtration: Filtration
    Lambda: LambdaVector
    lam: float
    log: list[MoveRecord]
    maps: CorrespondenceMaps
    report: RTTReport
    stats: dict = field(default_factory=dict)

    @property
    def bound(self) -> int:
        return self.maps.bound


def to_relative_train_track(m: GraphMap, caps: Caps = Caps()) -> PipelineResult:
    """Minimize stretch factors, then repair each exponential stratum bottom-up.

    Repairs can expose new illegal turns, so minimization and repair
    alternate until a full round applies no move.
    """
    start = time.perf_counter()
    run = _Run(m, caps)
    lam_in = lambda_vector(m)
    lam_min = None
    rounds = 0
    while True:
        rounds += 1
        if rounds > caps.sweeps:
            raise CapExceeded(f"sweep cap {caps.sweeps} exceeded", run.m, run.log)
        moves_before = run.moves
        minimize_lambda(run.m, caps, run)
        if lam_min is None:
            lam_min = lambda_vector(run.m)
        _repair_strata(run)
        if run.moves == moves_before:
            break
    filt = compatible_filtration(run.m)
    report = verify_rtt(run.m, filt)
    Lam = lambda_vector(run.m, filt)
    stats = {
        "moves": run.moves,
        "rounds": rounds,
        "reverted": run.reverted,
        "seconds": time.perf_counter() - start,
        "lambda_in": str(lam_in),
        "lambda_min": str(lam_min),
    }
    return PipelineResult(run.m, filt, Lam, top_lambda(run.m, filt), run.log, run.maps, report, stats)


def _repair_strata(run: _Run) -> None:
    """Core subdivision then connecting-path collapse, lowest exponential stratum first."""
    done: list[set[str]] = []
    while True:
        filt = compatible_filtration(run.m)
        target = None
        for r, s in enumerate(filt.strata):
            if s.finite and s.exponential and not any(set(s.edges) & d for d in done):
                target = r
                break
        if target is None:
            return
        members = set(filt.strata[target].edges)
        m1, recs, mp = core_subdivision(run.m, target, filt)
        run.apply_many((m1, recs, mp))
        members = set(_pieces_family(mp, sorted(members)))
        filt = compatible_filtration(run.m)
        r = _find_stratum(filt, members)
        if r is not None:
            run.apply_many(collapse_inessential_connecting_paths(run.m, r, filt))
            filt = compatible_filtration(run.m)
            r = _find_stratum(filt, members_after(run, members))
        done.append(set(filt.strata[r].edges) if r is not None else members)


def members_after(run: _Run, members: set[str]) -> set[str]:
    """Stratum members that survive in the current graph."""
    return {e for e in members if run.m.graph.has_edge(e)}


def flat_log(log: Sequence[MoveRecord]) -> list[MoveRecord]:
    out = []
    for r in log:
        out += r.flat()
    return out


# --------------------------------------------------------------- promotion
def backtracking_turns(m: GraphMap) -> list[tuple[int, tuple[str, str]]]:
    """Turns inside edge images that some iterate folds, with their heights.

    The height of a turn is the number of turn-map steps until it becomes
    degenerate.  Images beyond the stored window are shifts of window images,
    so one extra copy covers them.
    """
    out = set()
    for e in m.graph.edges_to_depth(m.depth + 1):
        w = m.edge_image(e)
        for x, y in zip(w, w[1:]):
            t = turn(ad.reverse(x), y)
            v = classify_turn(m, t)
            if v.kind == "illegal":
                out.add((v.witness, t))
    return sorted(out)


def is_train_track(m: GraphMap) -> bool:
    """Every iterate of every edge image is tight."""
    return not backtracking_turns(m)


def _ends_edge_to_edge(m: GraphMap) -> bool:
    d = m.depth
    for E in m.graph.ends:
        for e in m.graph.end_edges(E.id, d - 1):
            if len(m.edge_image(e)) != 1:
                return False
    return True


def promote_to_train_track(result: PipelineResult, caps: Caps = Caps(), max_folds: int = 64) -> PipelineResult:
    """Fold backtracking turns, lowest height first, until the map is a train track.

    Requires a verified relative train track that is endperiodic near its
    ends and has exactly one exponential stratum.  Each step folds the turn
    one step before it degenerates, then normalizes.  Raises
    :class:`CapExceeded` after ``max_folds`` folds.
    """
    filt = result.filtration
    if not result.report.ok:
        raise ContractError("promotion needs a verified relative train track")
    if len(filt.exponential_strata()) != 1:
        raise ContractError("promotion needs exactly one exponential stratum")
    if not _ends_edge_to_edge(result.map):
        raise ContractError("promotion needs a map sending end edges to single edges")
    start = time.perf_counter()
    run = _Run(result.map, caps)
    run.log = list(result.log)
    run.maps = result.maps
    folds = 0
    while True:
        found = backtracking_turns(run.m)
        if not found:
            break
        h, t = found[0]
        for _ in range(h - 1):
            t = turn_map(run.m, t)
        run.apply(fold(run.m, *t))
        normalize(run)
        folds += 1
        if folds > max_folds:
            raise CapExceeded("promotion fold cap exceeded", run.m, run.log)
    filt = compatible_filtration(run.m)
    report = verify_rtt(run.m, filt)
    Lam = lambda_vector(run.m, filt)
    stats = dict(result.stats)
    stats.update(promotion_folds=folds, promotion_seconds=time.perf_counter() - start)
    return PipelineResult(run.m, filt, Lam, top_lambda(run.m, filt), run.log, run.maps, report, stats)
