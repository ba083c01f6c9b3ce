"""Acceptance gate.

Each test runs one criterion at its stated size and tolerance and records
a one-line PASS/FAIL summary, printed at the end of the pytest run.  The
statistical criteria go through the command-line interface so the written
manifests are what criterion 9 inspects.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from conftest import record
from youngpdmp import cli, verify
from youngpdmp.params import DEFAULT
from youngpdmp.pdmp import DEFAULT_EVENT_CAP, FULL, MODES, flow, hitting_time

# the stationary law at N=14 leaves about 2e-6 mass on the boundary, which warns
pytestmark = [pytest.mark.slow, pytest.mark.filterwarnings("ignore:stationary mass")]

R = 1.0


def timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start


def run_verify(out_dir, *argv):
    code = cli.main(["verify", *argv, "--out", str(out_dir)])
    report = json.loads((out_dir / "report.json").read_text())
    manifest = json.loads((out_dir / "manifest.json").read_text())
    return code, report, manifest


@pytest.fixture(scope="module")
def claim4a(tmp_path_factory):
    out = tmp_path_factory.mktemp("claim4a")
    (code, report, manifest), elapsed = timed(run_verify, out, "claim4a", "--replicas", "100000")
    return code, report, manifest, elapsed


@pytest.fixture(scope="module")
def claim5a(tmp_path_factory):
    out = tmp_path_factory.mktemp("claim5a")
    (code, report, manifest), elapsed = timed(run_verify, out, "claim5a", "--replicas", "50000",
                                              "--r-prime", "2")
    return code, report, manifest, elapsed


@pytest.fixture(scope="module")
def stationarity(tmp_path_factory):
    out = tmp_path_factory.mktemp("stationarity")
    (code, report, manifest), elapsed = timed(run_verify, out, "stationarity", "--replicas",
                                              "1000", "--burn-in", "10", "--time", "30")
    return code, report, manifest, elapsed


def test_01_rowsums():
    report, elapsed = timed(verify.rowsums_check, 8)
    ok = report["verdict"] == verify.PASS and elapsed < 10
    record(1, "Q-matrix row sums, exact", ok,
           f"{report['n_checked']} rows, {len(report['failures'])} failures, {elapsed:.1f}s")
    assert report["failures"] == []
    assert len(report["parameters"]) == 3
    assert elapsed < 10


def test_02_identity():
    report, elapsed = timed(verify.identity_trials, 200, 0, 6)
    ok = report["verdict"] == verify.PASS and elapsed < 30
    record(2, "second-difference identity, exact", ok,
           f"200 trials, {len(report['failures'])} failures, {elapsed:.1f}s")
    assert report["failures"] == []
    assert elapsed < 30


def test_03_combinatorics():
    report, elapsed = timed(verify.combinatorics_check, 8)
    ok = report["verdict"] == verify.PASS and elapsed < 10
    record(3, "hook formula and branching rules, exact", ok,
           f"{len(report['failures'])} failures, {elapsed:.1f}s")
    assert report["failures"] == []
    assert elapsed < 10


def _flow_errors():
    rng = np.random.default_rng(2024)
    n = 1000
    worst = {"semigroup": 0.0, "hitting": 0.0, "ode": 0.0}
    for mode in MODES:
        ys = rng.uniform(1e-3, 0.95 * R, n)
        for y, a, b in zip(ys, rng.random(n), rng.random(n)):
            span = hitting_time(y, R, mode)
            s, t = a * b * span, a * (1 - b) * span
            lhs, rhs = flow(flow(y, s, mode, R), t, mode, R), flow(y, s + t, mode, R)
            worst["semigroup"] = max(worst["semigroup"], abs(lhs - rhs) / rhs)
            target = y + a * (R - y)
            back = flow(y, hitting_time(y, target, mode), mode, math.inf)
            worst["hitting"] = max(worst["hitting"], abs(back - target) / target)
            t0 = max(a, 1e-3) * span
            again = hitting_time(y, flow(y, t0, mode, math.inf), mode)
            worst["hitting"] = max(worst["hitting"], abs(again - t0) / t0)
        # one vectorized integration of n independent scalar equations
        horizon = 0.5
        rhs_fn = (lambda _, v: v * (v + 1)) if mode == FULL else (lambda _, v: v)
        sol = solve_ivp(rhs_fn, (0.0, horizon), ys, method="DOP853", rtol=1e-12, atol=1e-14)
        closed = np.array([flow(y, horizon, mode, math.inf) for y in ys])
        worst["ode"] = max(worst["ode"], float(np.max(np.abs(closed - sol.y[:, -1]) / closed)))
    return worst


def test_04_flow_analytics():
    worst, elapsed = timed(_flow_errors)
    ok = (worst["semigroup"] < 1e-9 and worst["hitting"] < 1e-9 and worst["ode"] < 1e-7
          and elapsed < 5)
    record(4, "flow semigroup, hitting inverse, ODE oracle", ok,
           f"semigroup {worst['semigroup']:.1e}, hitting {worst['hitting']:.1e}, "
           f"ode {worst['ode']:.1e}, {elapsed:.1f}s")
    assert worst["semigroup"] < 1e-9
    assert worst["hitting"] < 1e-9
    assert worst["ode"] < 1e-7
    assert elapsed < 5


def test_05_claim_4a(claim4a):
    code, report, _, elapsed = claim4a
    tv = report.get("tv", math.nan)
    gibbs_verdict = (report.get("gibbs") or {}).get("verdict")
    ok = report["overflow_mass"] < 1e-6 and tv < 0.015 and gibbs_verdict == verify.PASS
    record(5, "shape law vs uniformization, Gibbs states", ok,
           f"TV {tv:.4f} < 0.015, overflow {report['overflow_mass']:.1e}, "
           f"Gibbs {gibbs_verdict} ({report['gibbs']['n_tests']} subtests), {elapsed:.0f}s")
    assert report["overflow_mass"] < 1e-6
    assert tv < 0.015
    assert gibbs_verdict == verify.PASS
    assert code == 0


def test_06_claim_5a(claim5a):
    code, report, _, elapsed = claim5a
    ok = report["tv"] < 0.02
    record(6, "truncation consistency r'=2 to r=1", ok, f"TV {report['tv']:.4f} < 0.02, "
           f"Gibbs after truncation {report['gibbs_truncated']['verdict']}, {elapsed:.0f}s")
    assert report["tv"] < 0.02
    assert code == 0


def test_07_stationarity(stationarity):
    code, report, _, elapsed = stationarity
    ok = report["tv_pdmp"] < 0.03 and report["tv_calibration"] < 0.02
    record(7, "occupation measure vs stationary law", ok,
           f"TV {report['tv_pdmp']:.4f} < 0.03, calibration {report['tv_calibration']:.4f} "
           f"< 0.02, {elapsed:.0f}s")
    assert report["tv_pdmp"] < 0.03
    assert report["tv_calibration"] < 0.02


def test_08_single_particle():
    report = verify.single_particle_test(DEFAULT, 2 * 10**4, seed=0)
    ok = report["ks_p_time"] > 1e-3 and report["ks_p_ratio"] > 1e-3
    record(8, "single particle, exponential and uniform laws", ok,
           f"KS p {report['ks_p_time']:.3f} (time), {report['ks_p_ratio']:.3f} (ratio)")
    assert report["ks_p_time"] > 1e-3
    assert report["ks_p_ratio"] > 1e-3


def test_09_no_explosion(claim4a, claim5a, stationarity):
    stats = {"claim4a": claim4a[2], "claim5a native": claim5a[2]["native_events"],
             "claim5a lifted": claim5a[2]["lifted_events"], "stationarity": stationarity[2]}
    ok = all("mean_events" in s and s["max_events"] < DEFAULT_EVENT_CAP for s in stats.values())
    detail = ", ".join(f"{k} mean {s['mean_events']:.1f} max {s['max_events']}"
                       for k, s in stats.items())
    record(9, "event cap never reached", ok, detail)
    assert ok


def test_10_determinism(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    argv = ["simulate", "--replicas", "50", "--seed", "9", "--time", "2", "--log-events"]
    assert cli.main(argv + ["--out", str(a)]) == 0
    assert cli.main(argv + ["--workers", "1", "--out", str(b)]) == 0
    assert cli.main(["replay", str(a / "manifest.json"), "--out", str(c)]) == 0
    names = sorted(p.name for p in a.iterdir())
    same = all((a / n).read_bytes() == (c / n).read_bytes() for n in names)
    logs_same = all((a / n).read_bytes() == (b / n).read_bytes()
                    for n in names if n != "manifest.json")
    verify_argv = ["verify", "claim4a", "--replicas", "300", "--max-size", "12"]
    assert cli.main(verify_argv + ["--out", str(tmp_path / "v1")]) == 0
    assert cli.main(["replay", str(tmp_path / "v1" / "manifest.json"),
                     "--out", str(tmp_path / "v2")]) == 0
    reports_same = ((tmp_path / "v1" / "report.json").read_bytes()
                    == (tmp_path / "v2" / "report.json").read_bytes())
    ok = same and logs_same and reports_same
    record(10, "byte-identical replay", ok,
           f"{len(names)} simulate files, worker count independent, verify report replayed")
    assert same
    assert logs_same
    assert reports_same
