"""Transition matrices, strongly connected components and stretch factors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from . import address as ad


class NumericalError(RuntimeError):
    """Raised when power iteration fails to converge within its cap."""


class ContractError(ValueError):
    """Raised when an input violates a documented precondition."""


@dataclass(frozen=True)
class TransitionMatrix:
    """Crossing counts: entry ``(i, j)`` counts ``e_i`` in the image of ``e_j``."""

    index: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.table, dtype=np.int64)
        if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] != len(self.index):
            raise ContractError("transition matrix must be square and match its index")
        if (t < 0).any():
            raise ContractError("transition matrix entries must be nonnegative")
        object.__setattr__(self, "table", t)

    def to_csv(self) -> str:
        return "\n".join(",".join(str(int(x)) for x in row) for row in self.table)


def transition_matrix(m, edges: Sequence[str]) -> TransitionMatrix:
    edges = tuple(ad.unorient(e) for e in edges)
    pos = {e: i for i, e in enumerate(edges)}
    t = np.zeros((len(edges), len(edges)), dtype=np.int64)
    for j, e in enumerate(edges):
        for x in m.edge_image(e):
            i = pos.get(ad.unorient(x))
            if i is not None:
                t[i, j] += 1
    return TransitionMatrix(edges, t)


def scc(nodes: Iterable[Hashable], succ: Mapping) -> list[list]:
    """Strongly connected components, each listed before any component that reaches it.

    Iterative Tarjan; ``succ[v]`` lists the heads of arcs out of ``v``.  With
    arcs pointing from an edge to the edges crossed by its image, images flow
    toward earlier components.
    """
    nodes = list(nodes)
    node_set = set(nodes)
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    out: list[list] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter([w for w in succ.get(root, ()) if w in node_set]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter([x for x in succ.get(w, ()) if x in node_set])))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
    return out


def _as_array(M) -> np.ndarray:
    a = M.table if isinstance(M, TransitionMatrix) else np.asarray(M)
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError("matrix must be square")
    if (a < 0).any():
        raise ContractError("matrix must be nonnegative")
    return a


def is_nilpotent(M) -> bool:
    """``M^n = 0`` for ``n`` the dimension, checked on the zero pattern."""
    a = (_as_array(M) > 0).astype(np.int64)
    p = a.copy()
    for _ in range(a.shape[0]):
        if not p.any():
            return True
        p = np.minimum(p @ a, 1)
    return not p.any()


def _components_of(a: np.ndarray) -> list[list[int]]:
    n = a.shape[0]
    succ = {j: [i for i in range(n) if a[i, j] > 0] for j in range(n)}
    return scc(range(n), succ)


def _irreducible_radius(a: np.ndarray, tol: float = 1e-12, cap: int = 200000) -> tuple[float, np.ndarray]:
    """PF radius and right eigenvector of an irreducible block via power iteration on ``a + I``.

    Convergence is certified by the Collatz-Wielandt bracket
    ``min (Bx)_i / x_i <= rho(B) <= max (Bx)_i / x_i``.
    """
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0]), np.ones(1)
    b = a + np.eye(n)
    x = np.full(n, 1.0 / n)
    for _ in range(cap):
        y = b @ x
        ratios = y / x
        lo, hi = ratios.min(), ratios.max()
        x = y / y.sum()
        if hi - lo <= tol * hi:
            return float((lo + hi) / 2 - 1.0), x
    raise NumericalError("power iteration did not converge")


def spectral_radius(M) -> float:
    """Perron-Frobenius eigenvalue; exactly 0 for nilpotent input."""
    a = _as_array(M)
    if a.shape[0] == 0 or is_nilpotent(a):
        return 0.0
    best = 0.0
    for comp in _components_of(a):
        sub = a[np.ix_(comp, comp)]
        if len(comp) == 1 and sub[0, 0] == 0:
            continue
        if _is_permutation(sub):
            best = max(best, 1.0)
            continue
        best = max(best, _irreducible_radius(sub)[0])
    return best


def pf_left_eigenvector(M) -> np.ndarray:
    """Left PF eigenvector of an irreducible matrix, normalized to sum 1."""
    a = _as_array(M)
    if not is_irreducible(a):
        raise ContractError("eigenvector requested for a reducible matrix")
    return _irreducible_radius(a.T)[1]


def is_irreducible(M) -> bool:
    a = _as_array(M)
    n = a.shape[0]
    if n == 0:
        return False
    if len(_components_of(a)) != 1:
        return False
    return n > 1 or a[0, 0] > 0


def _is_permutation(a: np.ndarray) -> bool:
    return bool(
        ((a == 0) | (a == 1)).all() and (a.sum(axis=0) == 1).all() and (a.sum(axis=1) == 1).all()
    )


def is_exponential(M) -> bool:
    """For irreducible ``M``: radius exceeds 1 exactly when ``M`` is not a permutation."""
    a = _as_array(M)
    if not is_irreducible(a):
        raise ContractError("is_exponential requires an irreducible matrix")
    return not _is_permutation(a)


LAMBDA_TOL = 1e-9


@dataclass(frozen=True)
class LambdaVector:
    """Stretch factors above 1, in descending order."""

    values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        vals = tuple(sorted((float(v) for v in self.values), reverse=True))
        if any(v <= 1.0 for v in vals):
            raise ContractError("stretch factors in a lambda vector must exceed 1")
        object.__setattr__(self, "values", vals)

    @property
    def top(self) -> float:
        return self.values[0] if self.values else 0.0

    def __str__(self) -> str:
        return "(" + ", ".join(f"{v:.9f}" for v in self.values) + ")"


def compare_lambda(x: LambdaVector, y: LambdaVector, tol: float = LAMBDA_TOL) -> str:
    """Lexicographic comparison after padding the shorter vector with 1.0."""
    a, b = list(x.values), list(y.values)
    n = max(len(a), len(b))
    a += [1.0] * (n - len(a))
    b += [1.0] * (n - len(b))
    for u, v in zip(a, b):
        if u < v - tol:
            return "less"
        if u > v + tol:
            return "greater"
    return "equal"
