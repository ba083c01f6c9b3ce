import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import solve_ivp

from youngpdmp import pdmp
from youngpdmp.params import DEFAULT, validate
from youngpdmp.partitions import YoungDiagram, addable_corners, removable_corners
from youngpdmp.pdmp import (ABSORB, FULL, JUMP, PLANCHEREL, Engine, Event, ExplosionError,
                            SimConfig, flow, hitting_time, replay, run)
from youngpdmp.tableau_state import HeightState, InvalidStateError


def ode_flow(y, t, mode):
    """Numerical integration oracle for y' = y(y+1) or y' = y."""
    rhs = (lambda _, v: v * (v + 1)) if mode == FULL else (lambda _, v: v)
    sol = solve_ivp(rhs, (0.0, t), [y], method="DOP853", rtol=1e-13, atol=1e-15)
    return sol.y[0, -1]


def test_flow_identity_at_zero():
    for mode in pdmp.MODES:
        assert flow(0.37, 0.0, mode, 1.0) == 0.37
        assert flow(0.0, 5.0, mode, 1.0) == 0.0
        assert flow(1.0, 5.0, mode, 1.0) == 1.0


def test_flow_examples():
    assert flow(1.0, math.log(4 / 3), FULL, 10.0) == pytest.approx(2.0, rel=1e-12)
    assert ode_flow(1.0, math.log(4 / 3), FULL) == pytest.approx(2.0, rel=1e-9)
    for t in (math.log(2), 1.0, 50.0):
        assert flow(1.0, t, FULL, 3.0) == 3.0
        assert flow(1.0, t, FULL, 1e6) == 1e6
    assert flow(1.0, 1.0, PLANCHEREL, 10.0) == pytest.approx(math.e)


def test_hitting_time_examples():
    assert hitting_time(0.4, 0.4, FULL) == 0.0
    assert hitting_time(1.0, 2.0, FULL) == pytest.approx(math.log(4 / 3), rel=1e-14)
    assert hitting_time(1.0, math.e, PLANCHEREL) == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(ValueError):
        hitting_time(0.0, 1.0)


@pytest.mark.parametrize("mode", pdmp.MODES)
def test_flow_matches_ode(mode):
    r = 5.0
    for y in (0.01, 0.3, 1.0, 2.5):
        for frac in (0.1, 0.5, 0.9):
            t = frac * hitting_time(y, r, mode)
            assert flow(y, t, mode, r) == pytest.approx(ode_flow(y, t, mode), rel=1e-7)


@pytest.mark.parametrize("mode", pdmp.MODES)
def test_flow_monotone_in_start(mode):
    ys = np.linspace(0.0, 2.0, 41)
    for t in (0.0, 0.05, 0.3, 1.0, 3.0):
        values = [flow(y, t, mode, 2.0) for y in ys]
        assert all(a <= b for a, b in zip(values, values[1:]))


def test_first_event_from_empty_is_accepted_jump():
    cfg = SimConfig(DEFAULT, horizon=math.inf)
    engine = Engine(cfg, None, np.random.default_rng(1))
    event, _ = engine.step(math.inf)
    assert event.kind == JUMP and (event.i, event.j) == (1, 1)
    assert event.from_ == 1.0 and 0 < event.to < 1.0


def test_first_event_time_law():
    params = DEFAULT
    cfg = SimConfig(params, horizon=math.inf)
    times, tos = [], []
    for k in range(4000):
        engine = Engine(cfg, None, pdmp.replica_rng(7, k))
        event, _ = engine.step(math.inf)
        times.append(event.t)
        tos.append(event.to)
    rate = params.p * params.r
    assert stats.kstest(times, "expon", args=(0, 1 / rate)).pvalue > 1e-3
    assert stats.kstest(tos, "uniform").pvalue > 1e-3


def test_lone_cell_absorbs_at_hitting_time():
    # tiny rates so no Poisson point fires first
    params = validate(1e-9, 0, 1e-9, 0, 1.0)
    y = 0.2
    start = HeightState(1.0, ((y,),))
    cfg = SimConfig(params, subdiagram="single", horizon=10.0)
    traj = run(cfg, start, replica=3)
    assert traj.events[0].kind == ABSORB
    assert traj.events[0].t == pytest.approx(hitting_time(y, 1.0), rel=1e-14)


def test_step_wrapper_keeps_state_valid():
    cfg = SimConfig(DEFAULT, horizon=5.0)
    rng = np.random.default_rng(3)
    s, clock = HeightState.empty(1.0), 0.0
    for _ in range(200):
        s, clock, _ = pdmp.step(s, clock, cfg, rng)
        s.validate()
        if clock >= cfg.horizon:
            break


def test_run_zero_horizon():
    start = HeightState(1.0, ((0.1, 0.5), (0.3,)))
    traj = run(SimConfig(DEFAULT, horizon=0.0), start)
    assert traj.final == start and traj.events == []


def test_run_deterministic():
    cfg = SimConfig(validate(0.5, 0, 0.5, 0, 2.0), horizon=5.0, seed=11)
    a, b = run(cfg, replica=4), run(cfg, replica=4)
    assert a.events == b.events and a.final == b.final
    assert [e.to_json() for e in a.events] == [e.to_json() for e in b.events]
    assert run(cfg, replica=5).events != a.events


def check_log(initial, events, r, mode=FULL):
    """Replay the log by hand, asserting every event invariant on the way."""
    anchors = {c: (v, 0.0) for c, v in initial.items()}
    shape = initial.shape()
    last_t = 0.0

    def height(cell, t):
        if cell not in anchors:
            return r
        y, t0 = anchors[cell]
        return min(flow(y, t - t0, mode, r), math.nextafter(r, 0))

    for ev in events:
        assert ev.t >= last_t
        last_t = ev.t
        cell = (ev.i, ev.j)
        if ev.kind == ABSORB:
            assert cell in removable_corners(shape)
            y, t0 = anchors.pop(cell)
            assert ev.from_ == y < r and ev.to == r
            assert ev.t == pytest.approx(t0 + hitting_time(y, r, mode), rel=1e-12, abs=1e-12)
            shape = shape.remove(cell)
        else:
            i, j = cell
            h = height(cell, ev.t)
            if i == 1 and j == 1:
                low = 0.0
            elif i == 1:
                low = height((1, j - 1), ev.t)
            elif j == 1:
                low = height((i - 1, 1), ev.t)
            else:
                low = max(height((i - 1, j), ev.t), height((i, j - 1), ev.t))
            assert low < ev.to < ev.from_ == pytest.approx(h, rel=1e-12)
            if cell not in anchors:
                assert ev.from_ == r and cell in addable_corners(shape)
                shape = shape.add(cell)
            anchors[cell] = (ev.to, ev.t)
    return shape


@pytest.mark.parametrize("mode, r", [(FULL, 1.0), (FULL, 2.5), (PLANCHEREL, 2.0)])
def test_event_log_invariants_and_replay(mode, r):
    params = validate(0.5, 0, 0.5, 0, r)
    cfg = SimConfig(params, mode=mode, horizon=6.0, seed=5)
    n_events = 0
    for k in range(40):
        traj = run(cfg, replica=k)
        traj.final.validate()
        shape = check_log(traj.initial, traj.events, r, mode)
        assert shape == traj.final.shape()
        assert replay(traj.initial, traj.events, cfg.horizon, mode) == traj.final
        n_events += len(traj.events)
    assert n_events > 100


def test_replay_from_nonempty_start():
    start = HeightState(1.0, ((0.1, 0.5), (0.3,)))
    cfg = SimConfig(DEFAULT, horizon=3.0, seed=2)
    traj = run(cfg, start)
    assert replay(start, traj.events, 3.0) == traj.final


def test_event_jsonl_roundtrip():
    ev = Event(0.125, 1, 2, JUMP, 0.7, 0.3)
    assert Event.from_json(ev.to_json()) == ev
    assert '"from":0.7' in ev.to_json()


def test_subdiagram_restriction():
    cfg = SimConfig(validate(0.5, 0, 0.5, 0, 2.0), subdiagram="row:3", horizon=20.0, seed=1)
    seen = set()
    for k in range(20):
        traj = run(cfg, replica=k)
        seen |= {(e.i, e.j) for e in traj.events}
        assert traj.final.shape_rows() in {(), (1,), (2,), (3,)}
    assert seen <= {(1, 1), (1, 2), (1, 3)}
    assert (1, 3) in seen
    with pytest.raises(InvalidStateError):
        run(cfg, HeightState(2.0, ((0.1,), (0.2,))))


def test_subdiagram_parsing():
    assert pdmp.parse_subdiagram("single") == YoungDiagram((1,))
    assert pdmp.parse_subdiagram("row:4") == YoungDiagram((4,))
    assert pdmp.parse_subdiagram("[2,1]") == YoungDiagram((2, 1))
    assert pdmp.parse_subdiagram(None) is None


def test_plancherel_rates_ignore_parameters():
    a = SimConfig(validate(0.5, 0, 0.5, 0, 1.0), mode=PLANCHEREL, horizon=4.0, seed=9)
    b = SimConfig(validate(3.2, 0, 3.7, 0, 1.0), mode=PLANCHEREL, horizon=4.0, seed=9)
    assert run(a).events == run(b).events


def test_explosion_alarm():
    cfg = SimConfig(validate(0.5, 0, 0.5, 0, 3.0), horizon=100.0, event_cap=5)
    with pytest.raises(ExplosionError):
        run(cfg)


def test_level_mismatch_rejected():
    with pytest.raises(InvalidStateError):
        run(SimConfig(DEFAULT), HeightState(2.0, ((0.5,),)))


def test_occupation_sums_to_window():
    cfg = SimConfig(DEFAULT, horizon=10.0, seed=4)
    traj = run(cfg)
    occ = pdmp.occupation((), traj.events, 1.0, 2.0, 10.0)
    assert sum(occ.values()) == pytest.approx(8.0)
    path = pdmp.shape_path((), traj.events, 1.0)
    assert path[-1][1] == traj.final.shape_rows()


def test_ensemble_order_independent_of_workers(monkeypatch):
    cfg = SimConfig(DEFAULT, horizon=2.0, seed=3)
    serial = pdmp.run_ensemble(cfg, 12, workers=1)
    parallel = pdmp.run_ensemble(cfg, 12, workers=2)
    assert [r.final for r in serial] == [r.final for r in parallel]
    monkeypatch.setenv(pdmp.WORKERS_ENV, "1")
    assert pdmp.worker_count(8) == 1
