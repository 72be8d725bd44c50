"""The command-line front end, driven in-process."""

from __future__ import annotations

import json

import pytest

from endtrack import epg
from endtrack.cli import CAP, FAIL, INPUT, OK, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def files(tmp_path, capsys):
    paths = {}
    for name in ["ladder-shift-tau", "ladder-shift", "fib-ray"]:
        p = tmp_path / f"{name}.epg"
        assert run(capsys, "fixture", name, "-o", str(p))[0] == OK
        paths[name] = p
    return paths


def test_fixture_to_stdout_round_trips(capsys, L):
    code, out, _ = run(capsys, "fixture", "ladder-shift-tau")
    assert code == OK
    m, meta = epg.loads(out)
    assert epg.dumps(m, meta) == out


def test_validate_and_ends(capsys, files):
    assert run(capsys, "validate", str(files["fib-ray"])) == (OK, "valid\n", "")
    code, out, _ = run(capsys, "ends", str(files["ladder-shift-tau"]))
    assert code == OK and "attracting" in out and "repelling" in out


def test_lambda_lines(capsys, files):
    code, out, _ = run(capsys, "lambda", str(files["ladder-shift"]))
    assert code == OK and out.splitlines()[-1] == "λ = 0"
    code, out, _ = run(capsys, "lambda", str(files["fib-ray"]))
    assert out.splitlines()[-1] == "λ = 1.618033989"


def test_traintrack_writes_outputs(capsys, files, tmp_path):
    out_path, log_path = tmp_path / "out.epg", tmp_path / "moves.log"
    code, out, _ = run(capsys, "traintrack", str(files["ladder-shift-tau"]), "-o", str(out_path), "--log", str(log_path))
    assert code == OK
    lines = out.splitlines()
    assert "λ = 2.000000000" in lines and "verify: pass" in lines
    n_moves = int(lines[0].split("=")[1])
    assert n_moves == len(log_path.read_text().splitlines()) > 0
    m2, meta = epg.read(out_path)
    assert meta["lambda"] == pytest.approx(2.0)
    maps = json.loads((tmp_path / "out.epg.maps.json").read_text())
    assert set(maps) == {"bound", "forward", "backward"} and maps["bound"] >= 1
    # the written map passes verification on its own
    code, out, _ = run(capsys, "verify", str(out_path))
    assert code == OK and out.splitlines()[-1] == "overall: pass"


def test_traintrack_is_deterministic(capsys, files, tmp_path):
    a = run(capsys, "traintrack", str(files["ladder-shift-tau"]), "-o", str(tmp_path / "a.epg"))
    b = run(capsys, "traintrack", str(files["ladder-shift-tau"]), "-o", str(tmp_path / "b.epg"))
    assert a == b
    assert (tmp_path / "a.epg").read_text() == (tmp_path / "b.epg").read_text()


def test_raw_ladder_fails_verification(capsys, files):
    code, out, _ = run(capsys, "verify", str(files["ladder-shift-tau"]))
    assert code == FAIL
    assert any("core:a-1" in l for l in out.splitlines() if "df_closure" in l)
    assert out.splitlines()[-1] == "overall: FAIL"


def test_move_cap_exit_code(capsys, files, tmp_path):
    code, _, err = run(capsys, "traintrack", str(files["ladder-shift-tau"]), "-o", str(tmp_path / "x.epg"), "--caps", "1")
    assert code == CAP and "cap exceeded" in err


def test_growth_table(capsys, files):
    code, out, _ = run(capsys, "growth", str(files["fib-ray"]), "--loop", "core:p", "--sub", "edges:core:p,core:q", "--iters", "6")
    assert code == OK
    lines = out.splitlines()
    assert lines[0] == "n\tlength"
    assert [int(l.split("\t")[1]) for l in lines[1:8]] == [1, 2, 3, 5, 8, 13, 21]
    assert lines[-1].startswith("exponent\t0.48")


def test_growth_escape_prints_minus_inf(capsys, files):
    core = ",".join(f"core:{x}" for x in ["a-1", "a0", "a1", "b-1", "b0", "c-1", "c0"])
    code, out, _ = run(capsys, "growth", str(files["ladder-shift"]), "--loop", "core:a0,core:c0,~core:a1,~core:b0",
                       "--sub", "edges:" + core, "--iters", "8")
    assert code == OK
    lengths = [int(l.split("\t")[1]) for l in out.splitlines()[1:10]]
    assert lengths[0] == 4 and lengths[-1] == 0
    assert out.splitlines()[-1] == "exponent\t-inf"


@pytest.mark.parametrize(
    "argv",
    [
        ["growth", "{fib}", "--loop", "core:nope", "--sub", "stratum:0", "--iters", "5"],
        ["growth", "{fib}", "--loop", "core:p", "--sub", "bogus", "--iters", "5"],
        ["growth", "{fib}", "--loop", "core:p", "--sub", "stratum:99", "--iters", "5"],
        ["growth", "{fib}", "--loop", "core:p", "--sub", "stratum:0", "--iters", "2"],
        ["validate", "{missing}"],
        ["validate", "{garbage}"],
    ],
)
def test_input_errors(capsys, files, tmp_path, argv):
    garbage = tmp_path / "garbage.epg"
    garbage.write_text("not a map\n")
    sub = {"{fib}": str(files["fib-ray"]), "{missing}": str(tmp_path / "none.epg"), "{garbage}": str(garbage)}
    code, _, err = run(capsys, *[sub.get(a, a) for a in argv])
    assert code == INPUT and "input error" in err


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
