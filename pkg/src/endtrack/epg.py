"""Reading and writing ``.epg`` files (UTF-8 JSON)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

from .graphrep import EndPresentation, FiniteGraph, GraphPresentation
from .mapcore import GraphMap


class FormatError(ValueError):
    """Raised for unreadable or structurally malformed ``.epg`` data."""


def _graph_to_json(g: FiniteGraph) -> dict:
    return {
        "vertices": list(g.vertices),
        "edges": [{"id": e, "tail": t, "head": h} for e, (t, h) in g.edges.items()],
    }


def _graph_from_json(d: Mapping) -> FiniteGraph:
    try:
        return FiniteGraph(
            tuple(d["vertices"]), {e["id"]: (e["tail"], e["head"]) for e in d["edges"]}
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed graph block: {exc}") from exc


def to_json(m: GraphMap, meta: Mapping[str, Any] | None = None) -> dict:
    g = m.graph
    out: dict[str, Any] = {
        "core": _graph_to_json(g.core),
        "ends": [
            {
                "id": E.id,
                "domain": _graph_to_json(E.domain),
                "inner": list(E.inner),
                "outer": list(E.outer),
                "attach": dict(E.attach),
                "core_attach": dict(E.core_attach),
            }
            for E in g.ends
        ],
        "map": {
            "depth": m.depth,
            "end_targets": dict(m.end_targets),
            "vertices": dict(m.vertex_images),
            "edges": {e: list(w) for e, w in m.edge_images.items()},
        },
    }
    if meta:
        out["meta"] = dict(meta)
    return out


def from_json(d: Mapping) -> tuple[GraphMap, dict]:
    try:
        core = _graph_from_json(d["core"])
        ends = tuple(
            EndPresentation(
                E["id"],
                _graph_from_json(E["domain"]),
                tuple(E["inner"]),
                tuple(E["outer"]),
                dict(E["attach"]),
                dict(E["core_attach"]),
            )
            for E in d["ends"]
        )
        mp = d["map"]
        m = GraphMap(
            GraphPresentation(core, ends),
            int(mp["depth"]),
            dict(mp["end_targets"]),
            dict(mp["vertices"]),
            {e: tuple(w) for e, w in mp["edges"].items()},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed presentation: {exc}") from exc
    return m, dict(d.get("meta", {}))


def dumps(m: GraphMap, meta: Mapping[str, Any] | None = None) -> str:
    """Canonical text: sorted keys, one-space indent, trailing newline."""
    return json.dumps(to_json(m, meta), indent=1, sort_keys=True, ensure_ascii=False) + "\n"


def loads(text: str) -> tuple[GraphMap, dict]:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise FormatError("top level must be an object")
    return from_json(d)


def read(path: str | Path) -> tuple[GraphMap, dict]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    return loads(text)


def write(path: str | Path, m: GraphMap, meta: Mapping[str, Any] | None = None) -> None:
    Path(path).write_text(dumps(m, meta), encoding="utf-8")
