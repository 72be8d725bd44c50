"""Loop growth under iteration: bounded lengths, escape, witnesses and entropy.

Iterated images of a loop are computed by a compiled substitute-and-tighten
kernel working on integer letter codes.  A letter packs an unoriented edge
class, a copy number and an orientation bit, so reversing a letter flips the
low bit and end copies beyond the stored window are obtained by adding a
multiple of the copy stride to every letter of their base image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numba
import numpy as np

from . import address as ad
from .filtration import Filtration
from .graphrep import materialize
from .mapcore import GraphMap, MapError, Word, cyclic_tighten
from .spectral import ContractError


class SearchDepthError(RuntimeError):
    """No loop with the requested property exists within the search bound."""


class GrowthCapError(RuntimeError):
    """An iterated loop outgrew the letter budget."""


# ---------------------------------------------------------------- classes
def _canonical_rotation(w: Word) -> Word:
    if not w:
        return w
    n = len(w)
    return min(w[i:] + w[:i] for i in range(n))


@dataclass(frozen=True)
class ConjugacyClass:
    """A cyclically tight loop up to rotation, stored in its least rotation."""

    letters: Word

    @classmethod
    def of(cls, loop: Iterable[str]) -> "ConjugacyClass":
        return cls(_canonical_rotation(cyclic_tighten(loop)))

    def __post_init__(self) -> None:
        w = tuple(self.letters)
        if cyclic_tighten(w) != w:
            raise ContractError("conjugacy class letters must be cyclically tight")
        object.__setattr__(self, "letters", _canonical_rotation(w))

    def __len__(self) -> int:
        return len(self.letters)

    @property
    def trivial(self) -> bool:
        return not self.letters

    def inverse(self) -> "ConjugacyClass":
        return ConjugacyClass(tuple(ad.reverse(x) for x in reversed(self.letters)))

    def __str__(self) -> str:
        return ",".join(self.letters)


def bounded_length(c: ConjugacyClass | Sequence[str], sub: Iterable[str]) -> int:
    """Occurrences of edges of ``sub`` in the loop, ignoring orientation."""
    letters = c.letters if isinstance(c, ConjugacyClass) else tuple(c)
    edges = {ad.unorient(e) for e in sub}
    return sum(1 for x in letters if ad.unorient(x) in edges)


def exhaustion(m: GraphMap, i: int) -> frozenset[str]:
    """Edges of the ``i``-th compact window: the core plus end copies ``0..i``."""
    return frozenset(materialize(m.graph, i).edges)


# ----------------------------------------------------------- growth table
@dataclass(frozen=True)
class GrowthTable:
    """Bounded lengths of the iterates ``f^n(c)`` for ``n = 0..N``."""

    pairs: tuple[tuple[int, int], ...]

    @property
    def lengths(self) -> list[int]:
        return [l for _, l in self.pairs]

    @property
    def exponent(self) -> float:
        """Largest log-length slope over windows ``[n1, N]`` with ``n1 >= N/2``.

        ``-inf`` when the last length is 0.  Windows starting at a zero
        length are skipped; if every one does, the slope is 0.
        """
        N, last = self.pairs[-1]
        if last == 0:
            return float("-inf")
        lengths = dict(self.pairs)
        slopes = [
            (math.log(last) - math.log(lengths[n1])) / (N - n1)
            for n1 in range(math.ceil(N / 2), N)
            if lengths[n1] > 0
        ]
        return max(slopes) if slopes else 0.0

    def tsv(self) -> str:
        rows = ["n\tlength"] + [f"{n}\t{l}" for n, l in self.pairs]
        return "\n".join(rows)


# ------------------------------------------------------------------ kernel
@numba.njit(cache=True)
def _image_size(word, lens, n_core, n_classes, depth):
    total = 0
    for i in range(word.shape[0]):
        t = word[i] >> 1
        gid = t % n_classes
        copy = t // n_classes - 1
        if gid < n_core:
            key = gid
        else:
            key = n_core + (gid - n_core) * depth + min(copy, depth - 1)
        total += lens[key]
    return total


@numba.njit(cache=True)
def _step(word, starts, lens, data, n_core, n_classes, depth, stride):
    out = np.empty(_image_size(word, lens, n_core, n_classes, depth), dtype=np.int32)
    top = 0
    for i in range(word.shape[0]):
        code = word[i]
        rev = code & 1
        t = code >> 1
        gid = t % n_classes
        copy = t // n_classes - 1
        shift = 0
        if gid < n_core:
            key = gid
        else:
            key = n_core + (gid - n_core) * depth + min(copy, depth - 1)
            if copy > depth - 1:
                shift = (copy - depth + 1) * stride
        s = starts[key]
        n = lens[key]
        for j in range(n):
            if rev == 0:
                x = data[s + j] + shift
            else:
                x = (data[s + n - 1 - j] + shift) ^ 1
            if top > 0 and out[top - 1] == (x ^ 1):
                top -= 1
            else:
                out[top] = x
                top += 1
    lo = 0
    hi = top
    while hi - lo >= 2 and out[lo] == (out[hi - 1] ^ 1):
        lo += 1
        hi -= 1
    return out[lo:hi]


@numba.njit(cache=True)
def _count(word, mask, n_classes):
    c = 0
    width = mask.shape[1]
    for i in range(word.shape[0]):
        t = word[i] >> 1
        gid = t % n_classes
        col = t // n_classes
        if col < width and mask[gid, col]:
            c += 1
    return c


class GrowthEngine:
    """Compiled tables for iterating loops under one map."""

    def __init__(self, m: GraphMap, max_letters: int = 500_000_000):
        self.m = m
        self.max_letters = max_letters
        g = m.graph
        self.depth = m.depth
        core = sorted(g.core.edges)
        self.classes: list[tuple[Optional[str], str]] = [(None, x) for x in core]
        self.n_core = len(core)
        for E in sorted(g.end_map):
            for x in sorted(g.end(E).domain.edges):
                self.classes.append((E, x))
        self.gid = {c: i for i, c in enumerate(self.classes)}
        self.n_classes = len(self.classes)
        self.stride = 2 * self.n_classes
        starts, lens, data = [], [], []
        for E, x in self.classes:
            copies = [None] if E is None else range(self.depth)
            for n in copies:
                addr = ad.core(x) if E is None else ad.at(E, n, x)
                img = [self.encode(y) for y in m.edge_image(addr)]
                starts.append(len(data))
                lens.append(len(img))
                data.extend(img)
        self.starts = np.asarray(starts, dtype=np.int64)
        self.lens = np.asarray(lens, dtype=np.int64)
        self.data = np.asarray(data if data else [0], dtype=np.int32)

    def encode(self, o: str) -> int:
        p = ad.parse(ad.unorient(o))
        copy = -1 if p.end is None else p.copy
        try:
            gid = self.gid[(p.end, p.local)]
        except KeyError:
            raise MapError(f"unknown edge {o}") from None
        return (((copy + 1) * self.n_classes + gid) << 1) | int(ad.is_reversed(o))

    def decode(self, code: int) -> str:
        t = int(code) >> 1
        E, x = self.classes[t % self.n_classes]
        copy = t // self.n_classes - 1
        addr = ad.core(x) if E is None else ad.at(E, copy, x)
        return ad.reverse(addr) if code & 1 else addr

    def word(self, loop: Sequence[str]) -> np.ndarray:
        return np.asarray([self.encode(x) for x in cyclic_tighten(loop)], dtype=np.int32)

    def mask(self, sub: Iterable[str]) -> np.ndarray:
        cells = []
        for e in sub:
            p = ad.parse(ad.unorient(e))
            cells.append((self.gid[(p.end, p.local)], 0 if p.end is None else p.copy + 1))
        width = 1 + max([col for _, col in cells] + [0])
        out = np.zeros((self.n_classes, width), dtype=np.bool_)
        for gid, col in cells:
            out[gid, col] = True
        return out

    def step(self, word: np.ndarray) -> np.ndarray:
        size = _image_size(word, self.lens, self.n_core, self.n_classes, self.depth)
        if size > self.max_letters:
            raise GrowthCapError(f"an iterate needs {size} letters, over the budget of {self.max_letters}")
        return _step(word, self.starts, self.lens, self.data, self.n_core, self.n_classes, self.depth, self.stride)

    def iterate(self, loop: Sequence[str], n: int) -> Word:
        w = self.word(loop)
        for _ in range(n):
            w = self.step(w)
        return tuple(self.decode(x) for x in w)

    def table(self, loop: Sequence[str], sub: Iterable[str], N: int) -> GrowthTable:
        mask = self.mask(sub)
        w = self.word(loop)
        pairs = [(0, int(_count(w, mask, self.n_classes)))]
        for n in range(1, N + 1):
            w = self.step(w)
            pairs.append((n, int(_count(w, mask, self.n_classes))))
        return GrowthTable(tuple(pairs))


def _loop_of(c: ConjugacyClass | Sequence[str]) -> Word:
    return c.letters if isinstance(c, ConjugacyClass) else tuple(c)


def growth_exponent(
    m: GraphMap, c: ConjugacyClass | Sequence[str], sub: Iterable[str], N: int, engine: GrowthEngine | None = None
) -> GrowthTable:
    if N < 4:
        raise ContractError("growth tables need N >= 4")
    return (engine or GrowthEngine(m)).table(_loop_of(c), list(sub), N)


@dataclass(frozen=True)
class Escape:
    escaped: bool
    at: Optional[int]

    def __str__(self) -> str:
        return f"escaped at {self.at}" if self.escaped else "not within N"


def escapes(
    m: GraphMap, c: ConjugacyClass | Sequence[str], sub: Iterable[str], N: int, engine: GrowthEngine | None = None
) -> Escape:
    """Smallest ``n`` after which every tested iterate avoids ``sub``.

    The last tested iterate must itself avoid ``sub``; otherwise the loop
    has not escaped within ``N`` steps.
    """
    if N < 1:
        raise ContractError("escape tests need N >= 1")
    mask_sub = list(sub)
    eng = engine or GrowthEngine(m)
    if not _loop_of(c):
        return Escape(True, 0)
    mask = eng.mask(mask_sub)
    w = eng.word(_loop_of(c))
    lengths = [int(_count(w, mask, eng.n_classes))]
    for _ in range(N):
        w = eng.step(w)
        lengths.append(int(_count(w, mask, eng.n_classes)))
    if lengths[-1] > 0:
        return Escape(False, None)
    n = N
    while n > 0 and lengths[n] == 0:
        n -= 1
    return Escape(True, n)


# ---------------------------------------------------------------- entropy
@dataclass(frozen=True)
class Entropy:
    """``log λ`` for ``λ >= 1``; the zero marker when every loop escapes."""

    value: Optional[float]

    @property
    def zero_lambda(self) -> bool:
        return self.value is None

    def __str__(self) -> str:
        return "zero_lambda" if self.value is None else f"{self.value:.9f}"


def entropy(result) -> Entropy:
    if not result.report.ok:
        raise ContractError("entropy is reported only for verified relative train tracks")
    lam = result.lam
    if lam == 0.0:
        return Entropy(None)
    return Entropy(math.log(lam))


# ---------------------------------------------------------------- witness
@dataclass(frozen=True)
class Witness:
    level: int
    sub: tuple[str, ...]
    loop: ConjugacyClass


def _top_stratum(filt: Filtration, lam: float) -> int:
    for i, s in enumerate(filt.strata):
        if s.finite and abs(s.radius - lam) <= 1e-9:
            return i
    raise ContractError(f"no finite stratum has radius {lam}")


def candidate_loops(m: GraphMap, filt: Filtration, level: int, max_len: int, depth: int | None = None) -> list[ConjugacyClass]:
    """Tight loops in the union of strata up to ``level`` crossing that stratum.

    Enumerated by non-backtracking walks from each stratum edge back to its
    tail, shortest first, with inverse loops identified.
    """
    g = m.graph
    depth = depth if depth is not None else m.depth + 1
    allowed = [e for e in g.edges_to_depth(depth) if filt.level_of(e) <= level]
    members = set(filt.strata[level].edges)
    out_edges: dict[str, list[str]] = {}
    for e in allowed:
        for o in (e, ad.reverse(e)):
            out_edges.setdefault(g.tail(o), []).append(o)
    for v in out_edges:
        out_edges[v].sort()
    found: set[ConjugacyClass] = set()

    def dist_to(target: str) -> dict[str, int]:
        into: dict[str, list[str]] = {}
        for v, os_ in out_edges.items():
            for o in os_:
                into.setdefault(g.head(o), []).append(v)
        dist = {target: 0}
        frontier = [target]
        while frontier:
            nxt = []
            for v in frontier:
                for u in into.get(v, ()):
                    if u not in dist:
                        dist[u] = dist[v] + 1
                        nxt.append(u)
            frontier = nxt
        return dist

    for e in sorted(members):
        for first in (e, ad.reverse(e)):
            start = g.tail(first)
            dist = dist_to(start)
            stack = [(g.head(first), (first,))]
            while stack:
                v, path = stack.pop()
                if v == start and path[-1] != ad.reverse(path[0]):
                    c = ConjugacyClass.of(path)
                    if c.letters and c.inverse() not in found:
                        found.add(c)
                if len(path) >= max_len:
                    continue
                for o in out_edges.get(v, ()):
                    if o == ad.reverse(path[-1]):
                        continue
                    if len(path) + 1 + dist.get(g.head(o), max_len + 1) > max_len:
                        continue
                    stack.append((g.head(o), path + (o,)))
    return sorted(found, key=lambda c: (len(c), c.letters))


def supremum_witness(result, max_len: int = 12, probe: int = 12, slack: float = 0.1) -> Witness:
    """A loop crossing the top stretch stratum whose growth attains ``log λ``.

    Candidates are tried shortest first; the first whose probe exponent is
    within ``slack`` of ``log λ`` is returned.  Loops that escape are
    skipped, so the result need not be the shortest crossing loop.
    """
    if not result.report.ok:
        raise ContractError("witnesses are computed only for verified relative train tracks")
    lam = result.lam
    if lam < 1.0:
        raise ContractError("no supremum witness when the stretch factor is 0")
    m = result.map
    filt = result.filtration
    i = _top_stratum(filt, lam)
    sub = tuple(filt.strata[i].edges)
    eng = GrowthEngine(m)
    target = math.log(lam)
    for c in candidate_loops(m, filt, i, max_len):
        if growth_exponent(m, c, sub, probe, eng).exponent >= target - slack:
            return Witness(i, sub, c)
    raise SearchDepthError(f"no loop of length <= {max_len} crossing stratum {i} grows at rate {lam}")
