"""Checks of the particle process against exact identities and the jump chain.

Exact checks use Fraction arithmetic and have no tolerance.  Statistical
checks return plain dict reports that carry every seed, sample size and
threshold needed to rerun them.
"""

from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from . import gibbs, jump_chain, pdmp
from .params import Parameters, validate
from .partitions import (Cell, YoungDiagram, addable_corners, as_diagram, diagrams_up_to, dim,
                         enumerate_tableaux, random_tableau, removable_corners)

PASS, FAIL, INCONCLUSIVE, ERROR = gibbs.PASS, gibbs.FAIL, gibbs.INCONCLUSIVE, "error"
OVERFLOW_BUDGET = 1e-6
MASS_FLOOR = 1e-4


# -- exact identities ----------------------------------------------------------

class RegionError(ValueError):
    """The region does not determine a neighbour the identity needs."""


def _order_rank(region: YoungDiagram, order: Sequence) -> dict:
    order = [Cell(*c) for c in order]
    rank = {c: k for k, c in enumerate(order)}
    if len(rank) != len(order) or set(rank) != set(region.cells()):
        raise ValueError("order must list every cell of the region exactly once")
    for (i, j), k in rank.items():
        if (i > 1 and rank[Cell(i - 1, j)] > k) or (j > 1 and rank[Cell(i, j - 1)] > k):
            raise ValueError(f"order is not a linear extension at {(i, j)}")
    return rank


def remark_identity_sides(y: Mapping, region, order: Sequence, s, p) -> tuple:
    """Both sides of the second-difference identity on a finite region.

    ``order`` is a linear extension of ``region``; it is extended to all
    cells by placing every cell outside ``region`` after the region.  Cells
    outside the region are only compared with each other when both carry a
    zero value, otherwise :class:`RegionError` is raised.
    """
    region = as_diagram(region)
    y = {Cell(*c): Fraction(v) for c, v in y.items() if v != 0}
    s, p = Fraction(s), Fraction(p)
    outside = [c for c in y if c not in region]
    if outside:
        raise RegionError(f"support cells {outside} lie outside the region")
    rank = _order_rank(region, order)

    def val(c):
        return y.get(c, Fraction(0))

    def pick(a, b, larger):
        ra, rb = rank.get(a), rank.get(b)
        if ra is None and rb is None:
            if val(a) or val(b):
                raise RegionError(f"order of {a} and {b} is undetermined")
            return a
        if ra is None:
            return a if larger else b
        if rb is None:
            return b if larger else a
        return (a if ra > rb else b) if larger else (a if ra < rb else b)

    candidates = set(y)
    for i, j in y:
        candidates.update({Cell(i + 1, j), Cell(i, j + 1)})
        if i > 1:
            candidates.add(Cell(i - 1, j))
        if j > 1:
            candidates.add(Cell(i, j - 1))
    lhs = Fraction(0)
    for cell in candidates:
        i, j = cell
        up = val(pick(Cell(i + 1, j), Cell(i, j + 1), larger=False))
        if i == 1 and j == 1:
            down = Fraction(0)
        elif i == 1:
            down = val(Cell(1, j - 1))
        elif j == 1:
            down = val(Cell(i - 1, 1))
        else:
            down = val(pick(Cell(i - 1, j), Cell(i, j - 1), larger=True))
        c = j - i
        lhs += (up + down - 2 * val(cell)) * (p + s * c + c * c)
    return lhs, 2 * sum(y.values(), Fraction(0))


def remark_identity_check(y: Mapping, region, order: Sequence, s, p) -> bool:
    lhs, rhs = remark_identity_sides(y, region, order, s, p)
    return lhs == rhs


def _random_fraction(rng, lo, hi, max_den=9) -> Fraction:
    den = int(rng.integers(1, max_den + 1))
    return Fraction(int(rng.integers(lo * den, hi * den + 1)), den)


def identity_trials(trials: int = 200, seed: int = 0, box: int = 6) -> dict:
    """Randomized exact trials; alternates a padded square region with the
    downward closure of the support."""
    rng = np.random.default_rng(seed)
    failures = []
    for t in range(trials):
        density = rng.uniform(0.1, 0.6)
        y = {Cell(i, j): _random_fraction(rng, -10, 10)
             for i in range(1, box + 1) for j in range(1, box + 1) if rng.random() < density}
        if t % 2 == 0 or not y:
            region = YoungDiagram((box + 2,) * (box + 2))
        else:
            region = YoungDiagram(tuple(
                max([j for (i2, j) in y if i2 >= i], default=0) for i in range(1, box + 1)
                if any(i2 >= i for (i2, _) in y)))
            region = YoungDiagram(tuple(r for r in region.rows if r))
        order_tab = random_tableau(region, rng)
        order = [order_tab.cell_of()[k] for k in range(1, region.size + 1)]
        s, p = _random_fraction(rng, -20, 20), _random_fraction(rng, -20, 20)
        lhs, rhs = remark_identity_sides(y, region, order, s, p)
        if lhs != rhs:
            failures.append({"trial": t, "y": {f"{c.i},{c.j}": str(v) for c, v in y.items()},
                             "region": list(region.rows), "s": str(s), "p": str(p),
                             "lhs": str(lhs), "rhs": str(rhs)})
    return {"check": "identity", "trials": trials, "seed": seed, "failures": failures,
            "verdict": PASS if not failures else FAIL}


ROWSUM_PARAMETERS = {
    "z=z'=1/2, r=1": ("1/2", 0, "1/2", 0, 1),
    "z=1+2i, z'=1-2i, r=2": (1, 2, 1, -2, 2),
    "z=z'=-1/2, r=1/2": ("-1/2", 0, "-1/2", 0, "1/2"),
}


def rowsums_check(max_size: int = 8, parameter_sets: Optional[dict] = None) -> dict:
    """Exact total-exit identity for every diagram up to ``max_size``."""
    parameter_sets = parameter_sets or ROWSUM_PARAMETERS
    failures = []
    n_checked = 0
    for label, args in parameter_sets.items():
        params = validate(*args, exact=True)
        for lam in diagrams_up_to(max_size):
            total, expected = jump_chain.row_sum_identity(lam, params)
            n_checked += 1
            if total != expected:
                failures.append({"params": label, "shape": list(lam.rows),
                                 "sum": str(total), "expected": str(expected)})
    return {"check": "rowsums", "max_size": max_size, "n_checked": n_checked,
            "parameters": list(parameter_sets), "failures": failures,
            "verdict": PASS if not failures else FAIL}


def combinatorics_check(max_size: int = 8) -> dict:
    """Hook formula vs enumeration, and the down/up branching rules."""
    failures = []
    for lam in diagrams_up_to(max_size):
        d = dim(lam)
        if d != len(enumerate_tableaux(lam)):
            failures.append({"shape": list(lam.rows), "rule": "hook vs enumeration"})
        if lam.size and sum(dim(lam.remove(c)) for c in removable_corners(lam)) != d:
            failures.append({"shape": list(lam.rows), "rule": "down branching"})
        if sum(dim(lam.add(c)) for c in addable_corners(lam)) != (lam.size + 1) * d:
            failures.append({"shape": list(lam.rows), "rule": "up branching"})
    return {"check": "combinatorics", "max_size": max_size, "failures": failures,
            "verdict": PASS if not failures else FAIL}


# -- distributions --------------------------------------------------------------

def tv_distance(pa: Mapping, pb: Mapping, tol: float = 1e-9) -> float:
    for name, dist in (("first", pa), ("second", pb)):
        total = sum(dist.values())
        if abs(total - 1.0) > tol:
            raise ValueError(f"{name} distribution sums to {total}")
    keys = set(pa) | set(pb)
    return 0.5 * math.fsum(abs(pa.get(k, 0.0) - pb.get(k, 0.0)) for k in keys)


def histogram(shapes: Iterable) -> dict:
    counts = Counter(tuple(s) for s in shapes)
    n = sum(counts.values())
    return {k: v / n for k, v in sorted(counts.items(), key=lambda kv: (sum(kv[0]), kv[0]))}


def normalize(weights: Mapping) -> dict:
    total = math.fsum(weights.values())
    return {k: v / total for k, v in weights.items()}


def multinomial_margin(reference: Mapping, n: int, floor: float = MASS_FLOOR) -> float:
    """Four-sigma TV margin ``4 sqrt(K / n) / 2`` over states above ``floor``."""
    k = sum(1 for v in reference.values() if v > floor)
    return 2.0 * math.sqrt(max(k, 1) / n)


def _event_stats(results) -> dict:
    counts = np.array([res.n_events for res in results], dtype=float)
    if not len(counts):
        return {"mean_events": 0.0, "max_events": 0}
    return {"mean_events": float(counts.mean()), "max_events": int(counts.max())}


def _shape_key(d) -> str:
    return "overflow" if d == jump_chain.OVERFLOW else YoungDiagram(d).to_json()


def _dist_json(dist: Mapping) -> dict:
    return {_shape_key(k): v for k, v in dist.items()}


def _explosion_report(check: str, err: pdmp.ExplosionError, **fields) -> dict:
    return {"check": check, "verdict": ERROR, "explosion": True,
            "message": str(err), **fields}


# -- claims ------------------------------------------------------------------------

def claim_4a_test(params: Parameters, horizon: float = 1.0, replicas: int = 10**4,
                  max_size: int = 14, seed: int = 0, workers: Optional[int] = None,
                  sampler: str = "pdmp", event_cap: int = pdmp.DEFAULT_EVENT_CAP,
                  tv_threshold: Optional[float] = None) -> dict:
    """Shape law of the particle process from the empty state versus the
    jump chain's transient law; plus Gibbsianness of the final states.

    ``sampler="gillespie"`` swaps the particle ensemble for the jump chain
    itself, which calibrates the harness.
    """
    gen = jump_chain.build_generator(max_size, params)
    tr = jump_chain.transient_distribution(gen, (), horizon)
    exact = {lam.rows: float(p) for lam, p in zip(tr.states, tr.probs) if p > 0}
    exact[jump_chain.OVERFLOW] = tr.overflow_mass
    exact = normalize(exact)
    base = {"check": "claim4a", "sampler": sampler, "params": params.describe(),
            "horizon": horizon, "replicas": replicas, "max_size": max_size, "seed": seed,
            "overflow_mass": tr.overflow_mass, "series_error": tr.series_error}
    if tr.overflow_mass > OVERFLOW_BUDGET:
        return {**base, "verdict": ERROR,
                "message": f"overflow mass {tr.overflow_mass:.3g} above budget; raise max_size"}
    gibbs_report = None
    stats_ = {}
    if sampler == "pdmp":
        cfg = pdmp.SimConfig(params, horizon=horizon, seed=seed, event_cap=event_cap)
        try:
            results = pdmp.run_ensemble(cfg, replicas, workers=workers)
        except pdmp.ExplosionError as err:
            return _explosion_report("claim4a", err, **base)
        finals = [res.final.shape_rows() for res in results]
        gibbs_report = gibbs.test_gibbsianness([res.final for res in results]).to_dict()
        stats_ = _event_stats(results)
    elif sampler == "gillespie":
        cache: dict = {}
        finals = []
        for k in range(replicas):
            path = jump_chain.gillespie_run((), params, horizon, pdmp.replica_rng(seed, k),
                                            event_cap, cache)
            finals.append(path[-1][1].rows)
    else:
        raise ValueError(f"unknown sampler {sampler!r}")
    emp = histogram(finals)
    tv = tv_distance(emp, exact)
    margin = multinomial_margin(exact, replicas) + tr.overflow_mass
    threshold = margin if tv_threshold is None else tv_threshold
    ok = tv < threshold and (gibbs_report is None or gibbs_report["verdict"] != FAIL)
    return {**base, **stats_, "tv": tv, "margin": margin, "threshold": threshold,
            "gibbs": gibbs_report, "empirical": _dist_json(emp), "exact": _dist_json(exact),
            "verdict": PASS if ok else FAIL}


def claim_5a_test(params: Parameters, r_prime: float, horizon: float = 1.0,
                  replicas: int = 5 * 10**4, seed: int = 0, workers: Optional[int] = None,
                  threshold: float = 0.02, event_cap: int = pdmp.DEFAULT_EVENT_CAP) -> dict:
    """Run at level ``r_prime``, truncate to ``r``, compare with a native run at ``r``.

    The native ensemble uses master seed ``seed`` and the high-level one
    ``seed + 1`` so the two samples are independent.
    """
    r = float(params.r)
    if r_prime < r:
        raise ValueError("r_prime must be at least r")
    high = params.with_r(r_prime)
    cfg_low = pdmp.SimConfig(params, horizon=horizon, seed=seed, event_cap=event_cap)
    cfg_high = pdmp.SimConfig(high, horizon=horizon, seed=seed + 1, event_cap=event_cap)
    base = {"check": "claim5a", "params": params.describe(), "r_prime": r_prime,
            "horizon": horizon, "replicas": replicas, "seeds": [seed, seed + 1]}
    try:
        native = pdmp.run_ensemble(cfg_low, replicas, workers=workers)
        lifted = pdmp.run_ensemble(cfg_high, replicas, workers=workers)
    except pdmp.ExplosionError as err:
        return _explosion_report("claim5a", err, **base)
    truncated = [res.final.truncate(r) for res in lifted]
    h_native = histogram(res.final.shape_rows() for res in native)
    h_trunc = histogram(s.shape_rows() for s in truncated)
    tv = tv_distance(h_native, h_trunc)
    gibbs_report = gibbs.test_gibbsianness(truncated).to_dict()
    ok = tv < threshold and gibbs_report["verdict"] != FAIL
    return {**base, "tv": tv, "threshold": threshold, "gibbs_truncated": gibbs_report,
            "native_events": _event_stats(native), "lifted_events": _event_stats(lifted),
            "native": _dist_json(h_native), "truncated": _dist_json(h_trunc),
            "verdict": PASS if ok else FAIL}


def stationarity_test(params: Parameters, max_size: int = 14, burn_in: float = 10.0,
                      horizon: float = 30.0, replicas: int = 1000, seed: int = 0,
                      workers: Optional[int] = None, pdmp_threshold: float = 0.03,
                      calibration_threshold: float = 0.02, gibbs_start_horizon: float = 0.0,
                      event_cap: int = pdmp.DEFAULT_EVENT_CAP) -> dict:
    """Time-averaged shape occupation after burn-in versus the stationary law.

    The jump chain's own occupation (Gillespie, master seed ``seed + 1``)
    calibrates the harness.  The shape laws at ``burn_in`` and ``horizon``
    are compared as a stability check.  With ``gibbs_start_horizon > 0`` an
    extra ensemble (seed ``seed + 2``) starts from the stationary Gibbs
    measure and its shape law at that time is compared with the stationary law.
    """
    if not horizon > burn_in:
        raise ValueError("horizon must exceed burn_in")
    gen = jump_chain.build_generator(max_size, params)
    st = jump_chain.stationary_distribution(gen)
    pi = normalize({lam.rows: float(p) for lam, p in zip(st.states, st.probs)})
    base = {"check": "stationarity", "params": params.describe(), "max_size": max_size,
            "burn_in": burn_in, "horizon": horizon, "replicas": replicas,
            "seeds": [seed, seed + 1, seed + 2], "residual": st.residual,
            "boundary_mass": st.boundary_mass}
    cfg = pdmp.SimConfig(params, horizon=horizon, seed=seed, event_cap=event_cap)
    try:
        results = pdmp.run_ensemble(cfg, replicas, log_events=True, workers=workers)
    except pdmp.ExplosionError as err:
        return _explosion_report("stationarity", err, **base)
    r = float(params.r)
    occ: dict = {}
    at_burn, at_end = [], []
    for res in results:
        for rows, dt in pdmp.occupation((), res.events, r, burn_in, horizon).items():
            occ[rows] = occ.get(rows, 0.0) + dt
        path = pdmp.shape_path((), res.events, r)
        at_burn.append(jump_chain.path_at(path, burn_in))
        at_end.append(res.final.shape_rows())
    occ = normalize(occ)
    tv_pdmp = tv_distance(occ, pi)

    cache: dict = {}
    g_occ: dict = {}
    for k in range(replicas):
        path = jump_chain.gillespie_run((), params, horizon, pdmp.replica_rng(seed + 1, k),
                                        event_cap, cache)
        for lam, dt in jump_chain.path_occupation(path, burn_in, horizon).items():
            g_occ[lam.rows] = g_occ.get(lam.rows, 0.0) + dt
    g_occ = normalize(g_occ)
    tv_cal = tv_distance(g_occ, pi)

    h_burn, h_end = histogram(at_burn), histogram(at_end)
    tv_two = tv_distance(h_burn, h_end)
    two_margin = 2 * multinomial_margin(pi, replicas)
    report = {**base, **_event_stats(results), "tv_pdmp": tv_pdmp,
              "pdmp_threshold": pdmp_threshold, "tv_calibration": tv_cal,
              "calibration_threshold": calibration_threshold, "tv_two_time": tv_two,
              "two_time_margin": two_margin, "occupation": _dist_json(occ),
              "stationary": _dist_json(pi)}
    ok = tv_pdmp < pdmp_threshold and tv_cal < calibration_threshold and tv_two < two_margin
    if gibbs_start_horizon > 0:
        start = gibbs.GibbsInitial({k: v for k, v in pi.items() if v > 0}, r)
        cfg2 = pdmp.SimConfig(params, horizon=gibbs_start_horizon, seed=seed + 2,
                              event_cap=event_cap)
        starts = pdmp.run_ensemble(cfg2, replicas, initial=start, workers=workers)
        h_start = histogram(res.final.shape_rows() for res in starts)
        tv_start = tv_distance(h_start, pi)
        start_margin = multinomial_margin(pi, replicas)
        report.update({"gibbs_start_horizon": gibbs_start_horizon, "tv_gibbs_start": tv_start,
                       "gibbs_start_margin": start_margin})
        ok = ok and tv_start < start_margin
    report["verdict"] = PASS if ok else FAIL
    return report


def single_particle_test(params: Parameters, samples: int = 2 * 10**4, seed: int = 0,
                         alpha: float = 1e-3, event_cap: int = pdmp.DEFAULT_EVENT_CAP) -> dict:
    """One-cell model: first jump time from the empty state, and the
    ratio destination/height of the first jump of a supported particle."""
    r = float(params.r)
    rate = float(params.p) * r
    cfg = pdmp.SimConfig(params, subdiagram="single", horizon=math.inf, seed=seed,
                         event_cap=event_cap)
    first_times = np.empty(samples)
    ratios = np.empty(samples)
    absorbed_first = 0
    for k in range(samples):
        engine = pdmp.Engine(cfg, None, pdmp.replica_rng(seed, k))
        first = None
        while True:
            event, _ = engine.step(math.inf)
            if event is None:
                continue
            if first is None:
                first = event
                if event.kind != pdmp.JUMP:
                    absorbed_first += 1
                first_times[k] = event.t
            if event.kind == pdmp.JUMP and event.from_ < r:
                ratios[k] = event.to / event.from_
                break
    p_time = float(stats.kstest(first_times, "expon", args=(0.0, 1.0 / rate)).pvalue)
    p_ratio = float(stats.kstest(ratios, "uniform").pvalue)
    ok = p_time > alpha and p_ratio > alpha and absorbed_first == 0
    return {"check": "single-particle", "params": params.describe(), "samples": samples,
            "seed": seed, "rate": rate, "mean_first_time": float(first_times.mean()),
            "expected_mean": 1.0 / rate, "ks_p_time": p_time, "ks_p_ratio": p_ratio,
            "absorptions_before_first_jump": absorbed_first, "alpha": alpha,
            "verdict": PASS if ok else FAIL}
