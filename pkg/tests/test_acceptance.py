"""Acceptance criteria on the reference configuration.

The ``selftest`` command is run twice through the CLI entry point; criteria
1-10 are read from the first report and criterion 11 compares both reports
byte for byte. One summary line per criterion is printed at the end of the
session.
"""

import json

import pytest

from indiff import cli

CRITERIA = {
    1: "obstacle and terminal row",
    2: "a-priori bounds",
    3: "time monotonicity",
    4: "boundary limit and monotonicity",
    5: "method agreement",
    6: "linear-limit oracle",
    7: "monotonicity suite",
    8: "hedge sanity",
    9: "dual bracket",
    10: "ESO checks",
    11: "selftest reproducibility",
}

SUMMARY: dict[int, str] = {}


@pytest.fixture(scope="module")
def reports(tmp_path_factory):
    base = tmp_path_factory.mktemp("acceptance")
    cfg = base / "reference.cfg"
    cfg.write_text("# reference configuration (all defaults)\n")
    out = []
    for name in ("run1", "run2"):
        code = cli.main(["selftest", "--config", str(cfg), "--out", str(base / name)])
        out.append((code, (base / name / "selftest.json").read_bytes()))
    return out


def _record(n, ok, detail):
    SUMMARY[n] = f"criterion {n:>2} [{'PASS' if ok else 'FAIL'}] {CRITERIA[n]}: {detail}"


@pytest.mark.parametrize("n", range(1, 11))
def test_criterion(reports, n):
    checks = [c for c in json.loads(reports[0][1])["checks"] if c["criterion"] == n]
    assert checks, f"no checks recorded for criterion {n}"
    ok = all(c["passed"] for c in checks)
    detail = "; ".join(f"{c['name']}={c['measured']:.3g} (thr {c['threshold']:.3g})" for c in checks)
    _record(n, ok, detail)
    failed = [c["name"] for c in checks if not c["passed"]]
    assert not failed, f"criterion {n} failed: {failed}"


def test_criterion_11_reproducible(reports):
    (c1, r1), (c2, r2) = reports
    ok = r1 == r2 and c1 == c2
    _record(11, ok, f"exit codes {c1}/{c2}, reports identical={r1 == r2}")
    assert ok
    assert c1 == 0
