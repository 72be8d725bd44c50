"""Acceptance criteria, one test each.

Every test records a PASS or FAIL line; the lines are printed together at the
end of the run by the terminal-summary hook in ``conftest.py`` and also
immediately when the test runs with ``-s``.
"""

from __future__ import annotations

import contextlib
import math
import random
import time

import numpy as np
import pytest

from builders import C, W, halved, lambda_never_increases, sample_loops
from endtrack import address as ad
from endtrack.dynamics import (
    ConjugacyClass,
    GrowthEngine,
    bounded_length,
    entropy,
    escapes,
    exhaustion,
    growth_exponent,
    supremum_witness,
)
from endtrack.filtration import brute_force_fate, compatible_filtration, fate_table, lambda_vector
from endtrack.fixtures import fixture, perturbed_ladder
from endtrack.graphrep import materialize
from endtrack.spectral import spectral_radius
from endtrack.traintrack import to_relative_train_track, verify_rtt

PHI = (1 + 5**0.5) / 2
SEEDS = range(50)
RESULTS: list[str] = []


@contextlib.contextmanager
def criterion(n: int, title: str):
    notes: list[str] = []
    try:
        yield notes
    except BaseException as exc:
        line = f"criterion {n} FAIL  {title}: {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        RESULTS.append(line)
        print(line)
        raise
    line = f"criterion {n} PASS  {title}" + (f" ({'; '.join(notes)})" if notes else "")
    RESULTS.append(line)
    print(line)


@pytest.fixture(scope="module")
def runs():
    """Pipeline results on the fixtures and the randomized perturbations, with wall times."""
    out = {}
    for name in ["ladder-shift-tau", "fib-ray", "ladder-shift"]:
        m = fixture(name)
        t = time.perf_counter()
        out[name] = (m, to_relative_train_track(m), time.perf_counter() - t)
    for s in SEEDS:
        m = perturbed_ladder(s)
        t = time.perf_counter()
        out[f"seed {s}"] = (m, to_relative_train_track(m), time.perf_counter() - t)
    return out


def test_criterion_1_ladder_reproduction():
    with criterion(1, "ladder pipeline: one exponential stratum of one edge, lambda 2, verify passes") as notes:
        m = fixture("ladder-shift-tau")
        t = time.perf_counter()
        r = to_relative_train_track(m)
        dt = time.perf_counter() - t
        expo = [s for s in r.filtration.strata if s.finite and s.exponential]
        notes.append(f"{dt:.3f} s, lambda {r.lam:.9f}, edges {[list(s.edges) for s in expo]}")
        assert dt < 5.0
        assert len(expo) == 1 and len(expo[0].edges) == 1
        assert abs(r.lam - 2.0) <= 1e-9
        assert r.report.ok and verify_rtt(r.map, compatible_filtration(r.map)).ok


def test_criterion_2_raw_ladder_fails_at_the_closure_condition():
    with criterion(2, "raw ladder filtration fails the first-derivative closure with witness core:a-1") as notes:
        m = fixture("ladder-shift-tau")
        report = verify_rtt(m, compatible_filtration(m))
        fails = dict(report.failures())
        notes.append(f"failed checks {sorted(fails)}")
        assert not report.ok
        assert "df_closure" in fails
        assert "core:a-1" in str(fails["df_closure"].witness)


def test_criterion_3_lambda_monotone(runs):
    with criterion(3, "Lambda never increases along pipeline logs on L, F and 50 perturbations") as notes:
        slow = max(dt for key, (_, _, dt) in runs.items() if key.startswith("seed"))
        notes.append(f"slowest randomized run {slow:.3f} s")
        for key, (m, r, dt) in runs.items():
            if key == "ladder-shift":
                continue
            assert lambda_never_increases(r.log, lambda_vector(m)), key
            if key.startswith("seed"):
                assert dt < 10.0, key


def _eig_radius(a) -> float:
    return float(max(abs(np.linalg.eigvals(np.asarray(a, dtype=float))))) if np.size(a) else 0.0


def _random_irreducible(rng: np.random.Generator) -> np.ndarray:
    from endtrack.spectral import is_irreducible

    while True:
        n = int(rng.integers(1, 9))
        a = rng.integers(0, 3, size=(n, n)) * (rng.random((n, n)) < 0.45)
        if is_irreducible(a) and _eig_radius(a) > 1 + 1e-6:
            return a


def test_criterion_4_spectral_suite():
    with criterion(4, "permutations radius 1, Fibonacci radius phi, deleting an index lowers the radius") as notes:
        rng = np.random.default_rng(20261014)
        for n in range(1, 9):
            for _ in range(5):
                p = np.eye(n, dtype=int)[rng.permutation(n)]
                assert spectral_radius(p) == 1.0
        assert abs(spectral_radius([[1, 1], [1, 0]]) - 1.618033989) <= 1e-9
        gaps = []
        for _ in range(100):
            a = _random_irreducible(rng)
            rho, rho_eig = spectral_radius(a), _eig_radius(a)
            assert abs(rho - rho_eig) <= 1e-8 * max(1.0, rho_eig)
            for i in range(a.shape[0]):
                keep = [j for j in range(a.shape[0]) if j != i]
                b = a[np.ix_(keep, keep)]
                assert spectral_radius(b) < rho and _eig_radius(b) < rho_eig - 1e-9
                gaps.append(rho - spectral_radius(b))
        notes.append(f"smallest drop {min(gaps):.3e}")


def test_criterion_5_growth_oracle():
    with criterion(5, "witness growth on L at N=24, loop p on F at N=25, sampled loops on S escape") as notes:
        rL = to_relative_train_track(fixture("ladder-shift-tau"))
        w = supremum_witness(rL)
        eL = growth_exponent(rL.map, w.loop, w.sub, 24).exponent
        rF = to_relative_train_track(fixture("fib-ray"))
        eF = growth_exponent(rF.map, W("p"), rF.filtration.strata[2].edges, 25).exponent
        notes.append(f"L {eL - math.log(2):+.2e}, F {eF - math.log(PHI):+.2e}")
        assert abs(eL - math.log(2)) <= 0.05
        assert abs(eF - math.log(PHI)) <= 0.02
        S = fixture("ladder-shift")
        eng = GrowthEngine(S)
        loops = sample_loops(S, random.Random(5), count=20)
        worst = 0
        for i in range(6):
            window = exhaustion(S, i)
            for c in loops:
                esc = escapes(S, c, window, 15, eng)
                assert esc.escaped, (i, c)
                worst = max(worst, esc.at)
        notes.append(f"S windows 0..5, latest escape step {worst}")


def test_criterion_6_subdivision_invariance():
    with criterion(6, "L and its once-subdivided variant both reach lambda 2 and entropy log 2") as notes:
        for m in (fixture("ladder-shift-tau"), halved(fixture("ladder-shift-tau"))):
            r = to_relative_train_track(m)
            assert r.report.ok
            assert abs(r.lam - 2.0) <= 1e-9
            assert abs(entropy(r).value - math.log(2)) <= 1e-9
            notes.append(f"{len(m.graph.core.edges)} core edges: lambda {r.lam:.9f}")


def _image_subgraph(maps, sub) -> set[str]:
    return {ad.unorient(x) for e in sub for x in maps.forward.edge_path(e)}


def test_criterion_7_bounded_equivalence_certificate(runs):
    with criterion(7, "correspondence maps obey the bound and the loop length inequality") as notes:
        checked = 0
        items = list(runs.items()) + [("halved L", (halved(fixture("ladder-shift-tau")), None, 0))]
        for key, (m, r, _) in items:
            r = r or to_relative_train_track(m)
            maps, m2, L = r.maps, r.map, r.bound
            for e in materialize(m.graph, m.depth).edges:
                assert len(maps.forward.edge_path(e)) <= L, (key, e)
            for e in materialize(m2.graph, m2.depth).edges:
                assert len(maps.backward.edge_path(e)) <= L, (key, e)
            loops = [ConjugacyClass.of(c) for c in sample_loops(m, random.Random(key), count=20, depth=3)]
            for k in range(3):
                sub = exhaustion(m, k)
                hsub = _image_subgraph(maps, sub)
                for c in loops:
                    hc = ConjugacyClass.of(maps.forward.loop(c.letters))
                    assert bounded_length(hc, hsub) <= L * bounded_length(c, sub), (key, k, str(c))
                    checked += 1
        notes.append(f"{checked} loop and subgraph pairs")


def test_criterion_8_fate_oracle():
    with criterion(8, "fate table agrees with brute-force iteration on every edge") as notes:
        maps = [fixture(n) for n in ("ladder-shift-tau", "ladder-shift", "fib-ray")] + [perturbed_ladder(s) for s in SEEDS]
        count = 0
        for m in maps:
            ft = fate_table(m)
            for e in ft.cstar:
                assert ft.fate(e) == brute_force_fate(m, e), e
                count += 1
        notes.append(f"{count} edges over {len(maps)} maps")


def test_criterion_9_growth_upper_bound():
    with criterion(9, "sampled loop growth never exceeds log lambda on the train track outputs") as notes:
        worst = []
        for name in ("ladder-shift-tau", "fib-ray", "ladder-shift"):
            r = to_relative_train_track(fixture(name))
            m = r.map
            bound = math.log(r.lam) if r.lam > 0 else float("-inf")
            eng = GrowthEngine(m)
            top = -math.inf
            for c in sample_loops(m, random.Random(9), count=10):
                for k in (0, 2):
                    e = growth_exponent(m, c, exhaustion(m, k), 16, eng).exponent
                    assert e <= bound + 0.05 or (bound == -math.inf and e == -math.inf), (name, c, e)
                    top = max(top, e)
            worst.append(f"{name} max {top:.4f} vs {bound:.4f}")
        notes.extend(worst)
