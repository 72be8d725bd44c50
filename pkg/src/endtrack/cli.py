"""Command-line front end.

Exit codes: 0 success or pass, 1 verification failure, 2 input error,
3 cap exceeded.  All numbers are printed with nine decimals.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import address as ad
from . import epg
from .dynamics import GrowthCapError, growth_exponent
from .filtration import compatible_filtration, lambda_vector, top_lambda
from .fixtures import FIXTURES, fixture
from .graphrep import PresentationError
from .mapcore import MapError, classify_ends, validate_map
from .spectral import ContractError
from .traintrack import CapExceeded, Caps, flat_log, to_relative_train_track, verify_rtt

OK, FAIL, INPUT, CAP = 0, 1, 2, 3


class InputError(Exception):
    """Unusable input: unreadable file, invalid presentation or bad flag value."""


def _num(x: float) -> str:
    return f"{x:.9f}"


def _lam_line(lam: float) -> str:
    return "λ = 0" if lam == 0.0 else f"λ = {_num(lam)}"


def _load(path: str):
    try:
        m, meta = epg.read(path)
    except epg.FormatError as exc:
        raise InputError(str(exc)) from exc
    problems = validate_map(m)
    if problems:
        raise InputError("invalid map: " + "; ".join(problems))
    return m, meta


def _out(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


# -------------------------------------------------------------- commands
def cmd_validate(args) -> int:
    _load(args.input)
    _out("valid")
    return OK


def cmd_ends(args) -> int:
    m, _ = _load(args.input)
    for eid, cls in sorted(classify_ends(m).items()):
        _out(f"{eid}\t{cls.kind}\tdrift {cls.drift}\t-> {m.end_targets[eid]}")
    return OK


def cmd_filtration(args) -> int:
    m, _ = _load(args.input)
    filt = compatible_filtration(m)
    for s in filt.strata:
        if s.finite:
            tag = "exponential" if s.exponential else "finite"
            _out(f"H{s.level}\t{tag}\tradius {_num(s.radius)}\t{','.join(s.edges)}")
        else:
            _out(f"H{s.level}\t{s.kind}\t{len(s.edges)} window edges")
    return OK


def cmd_lambda(args) -> int:
    m, _ = _load(args.input)
    filt = compatible_filtration(m)
    _out(f"Λ = {lambda_vector(m, filt)}")
    _out(_lam_line(top_lambda(m, filt)))
    return OK


def _maps_table(result, m_in) -> dict:
    fw, bw = result.maps.forward, result.maps.backward
    return {
        "bound": result.bound,
        "forward": {e: list(fw.edge_path(e)) for e in m_in.graph.edges_to_depth(m_in.depth)},
        "backward": {e: list(bw.edge_path(e)) for e in result.map.graph.edges_to_depth(result.map.depth)},
    }


def cmd_traintrack(args) -> int:
    m, _ = _load(args.input)
    caps = Caps(moves=args.caps) if args.caps is not None else Caps()
    try:
        result = to_relative_train_track(m, caps)
    except CapExceeded as exc:
        sys.stderr.write(f"cap exceeded: {exc}\n")
        return CAP
    meta = {"Lambda": list(result.Lambda.values), "lambda": result.lam, "bound": result.bound}
    epg.write(args.output, result.map, meta)
    maps_path = Path(str(args.output) + ".maps.json")
    maps_path.write_text(json.dumps(_maps_table(result, m), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    moves = flat_log(result.log)
    if args.log:
        Path(args.log).write_text("".join(r.line() + "\n" for r in moves), encoding="utf-8")
    _out(f"moves = {len(moves)}")
    _out(f"Λ = {result.Lambda}")
    _out(_lam_line(result.lam))
    _out(f"bound = {result.bound}")
    _out("verify: " + ("pass" if result.report.ok else "fail"))
    return OK if result.report.ok else FAIL


def cmd_verify(args) -> int:
    m, _ = _load(args.input)
    report = verify_rtt(m, compatible_filtration(m))
    for line in report.lines():
        _out(line)
    return OK if report.ok else FAIL


def _parse_sub(text: str, m) -> list[str]:
    kind, _, rest = text.partition(":")
    if kind == "stratum":
        filt = compatible_filtration(m)
        try:
            i = int(rest)
            return list(filt.strata[i].edges)
        except (ValueError, IndexError):
            raise InputError(f"no stratum {rest!r}; levels run 0..{filt.top}") from None
    if kind == "edges":
        out = [x for x in rest.split(",") if x]
        for e in out:
            if not m.graph.has_edge(ad.unorient(e)):
                raise InputError(f"unknown edge {e}")
        return out
    raise InputError(f"--sub must be stratum:<i> or edges:<csv>, not {text!r}")


def cmd_growth(args) -> int:
    m, _ = _load(args.input)
    loop = [x for x in args.loop.split(",") if x]
    for e in loop:
        if not m.graph.has_edge(ad.unorient(e)):
            raise InputError(f"unknown edge {e} in --loop")
    sub = _parse_sub(args.sub, m)
    try:
        table = growth_exponent(m, loop, sub, args.iters)
    except GrowthCapError as exc:
        sys.stderr.write(f"cap exceeded: {exc}\n")
        return CAP
    _out(table.tsv())
    exp = table.exponent
    _out("exponent\t" + ("-inf" if exp == float("-inf") else _num(exp)))
    return OK


def cmd_fixture(args) -> int:
    text = epg.dumps(fixture(args.name), {"fixture": args.name})
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return OK


# ---------------------------------------------------------------- parser
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="endtrack", description="Relative train tracks for endperiodic graph maps.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, help_ in [
        ("validate", cmd_validate, "check that a .epg file presents a valid map"),
        ("ends", cmd_ends, "classify ends as attracting or repelling"),
        ("filtration", cmd_filtration, "print the compatible filtration"),
        ("lambda", cmd_lambda, "print the stretch-factor vector and its maximum"),
        ("verify", cmd_verify, "check the relative train track conditions"),
    ]:
        s = sub.add_parser(name, help=help_)
        s.add_argument("input")
        s.set_defaults(func=fn)
    s = sub.add_parser("traintrack", help="run the relative train track pipeline")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--log")
    s.add_argument("--caps", type=int)
    s.set_defaults(func=cmd_traintrack)
    s = sub.add_parser("growth", help="tabulate bounded lengths of iterated loops")
    s.add_argument("input")
    s.add_argument("--loop", required=True)
    s.add_argument("--sub", required=True)
    s.add_argument("--iters", type=int, required=True)
    s.set_defaults(func=cmd_growth)
    s = sub.add_parser("fixture", help="write a built-in fixture")
    s.add_argument("name", choices=sorted(FIXTURES))
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_fixture)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, PresentationError, MapError, ContractError, ad.AddressError, ValueError) as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return INPUT


if __name__ == "__main__":
    sys.exit(main())
