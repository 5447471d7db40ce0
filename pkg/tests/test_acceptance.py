"""Acceptance criteria 1 to 11, one PASS/FAIL line per criterion."""

from __future__ import annotations

import time

import pytest

from pmelimit.harness.cli import main
from pmelimit.harness.verify import CRITERIA, TIER_SETTINGS, crit_determinism

SEED = 0
TIER = TIER_SETTINGS["desk"]
_results: dict = {}


def _report(capsys, res):
    with capsys.disabled():
        print(f"\n[{'PASS' if res.passed else 'FAIL'}] criterion {res.number:2d}: {res.title} ({res.seconds:.2f}s)")
        for c in res.checks:
            if not c.passed:
                print(f"    failing {c.name} [{c.anchor}]: value={c.value:.6g} bound={c.bound:.6g}")


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    t0 = time.perf_counter()
    res = CRITERIA[number](TIER, SEED)
    res.seconds = time.perf_counter() - t0
    _results[number] = res
    _report(capsys, res)
    assert res.checks
    assert res.passed, [c.name for c in res.checks if not c.passed]


def test_criterion_11_determinism(capsys, tmp_path):
    first = {k: _results.get(k) or CRITERIA[k](TIER, SEED) for k in (1, 2, 5)}
    res = crit_determinism(TIER, SEED, first)
    # the verify subcommand run twice must emit identical CSV payloads and pass vectors
    outs = [tmp_path / "a", tmp_path / "b"]
    codes = [main(["verify", "--tier", "smoke", "--seed", str(SEED), "--out", str(o)]) for o in outs]
    csvs = sorted(p.name for p in outs[0].glob("*.csv"))
    same = codes[0] == codes[1] and csvs and all(
        (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes() for n in csvs
    )
    _report(capsys, res)
    assert res.passed and same
