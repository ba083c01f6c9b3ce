"""The shape-level jump process on Young diagrams.

Rates out of a diagram ``lam`` of size ``n``::

    lam -> lam + box : r * q(c(box)) * dim(lam + box) / ((n + 1) * dim(lam))
    lam -> lam - box : (r + 1) * n * dim(lam - box) / dim(lam)

with total exit rate ``(2r + 1) n + r z z'``.  Rational parameters give
exact (Fraction) rates; float parameters give floats.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.stats import poisson

from .params import Parameters
from .partitions import (YoungDiagram, addable_corners, as_diagram, diagrams_up_to, dim,
                         removable_corners)
from .pdmp import DEFAULT_EVENT_CAP, ExplosionError

GENERATOR_BOUND = 16
OVERFLOW = "overflow"


@dataclass(frozen=True)
class RateRow:
    source: YoungDiagram
    up: dict
    down: dict
    total_exit: object

    def targets(self):
        for cell, rate in self.up.items():
            yield self.source.add(cell), rate
        for cell, rate in self.down.items():
            yield self.source.remove(cell), rate


def rate_row(shape, params: Parameters) -> RateRow:
    lam = as_diagram(shape)
    n = lam.size
    d = dim(lam)
    r = params.r
    up = {}
    for cell in addable_corners(lam):
        ratio = Fraction(dim(lam.add(cell)), (n + 1) * d)
        rate = r * params.q(cell.content) * ratio
        up[cell] = rate if params.exact else float(rate)
    down = {}
    for cell in removable_corners(lam):
        ratio = Fraction(n * dim(lam.remove(cell)), d)
        rate = (r + 1) * ratio
        down[cell] = rate if params.exact else float(rate)
    total = (2 * r + 1) * n + r * params.p
    return RateRow(lam, up, down, total)


def row_sum_identity(shape, params: Parameters) -> tuple:
    """``(sum of all rates, (2r+1)|lam| + r p)``; equal in exact arithmetic."""
    row = rate_row(shape, params)
    return sum(row.up.values()) + sum(row.down.values()), row.total_exit


def gillespie_run(initial, params: Parameters, horizon: float, rng,
                  event_cap: int = DEFAULT_EVENT_CAP, cache: Optional[dict] = None):
    """Shape trajectory ``[(t, diagram), ...]`` on ``[0, horizon]``."""
    cache = {} if cache is None else cache
    lam = as_diagram(initial)
    t = 0.0
    path = [(0.0, lam)]
    n_events = 0
    while True:
        entry = cache.get(lam)
        if entry is None:
            row = rate_row(lam, params)
            targets, rates = zip(*row.targets())
            rates = np.asarray(rates, dtype=float)
            entry = (targets, np.cumsum(rates), float(rates.sum()))
            cache[lam] = entry
        targets, cum, total = entry
        t += rng.standard_exponential() / total
        if t >= horizon:
            return path
        k = int(np.searchsorted(cum, rng.random() * total, side="right"))
        lam = targets[min(k, len(targets) - 1)]
        path.append((t, lam))
        n_events += 1
        if n_events > event_cap:
            raise ExplosionError(f"event cap {event_cap} exceeded at t={t}", n_events, t)


def path_at(path, t: float) -> YoungDiagram:
    current = path[0][1]
    for time, lam in path:
        if time > t:
            break
        current = lam
    return current


def path_occupation(path, t0: float, t1: float) -> dict:
    out: dict = {}
    for k, (start, lam) in enumerate(path):
        end = path[k + 1][0] if k + 1 < len(path) else math.inf
        lo, hi = max(start, t0), min(end, t1)
        if hi > lo:
            out[lam] = out.get(lam, 0.0) + (hi - lo)
    return out


@dataclass
class Generator:
    """Rate matrix on ``{lam : |lam| <= N}`` plus an absorbing overflow state.

    The overflow state is the last index; up-moves out of size ``N`` go there.
    """

    max_size: int
    params: Parameters
    states: list
    index: dict
    Q: sp.csr_matrix

    @property
    def overflow(self) -> int:
        return len(self.states)

    @property
    def n_states(self) -> int:
        return len(self.states) + 1

    def retained(self) -> "Generator":
        """Same states with moves into the overflow state suppressed."""
        Q = sp.bmat([[retained_generator(self), None], [None, sp.csr_matrix((1, 1))]])
        return Generator(self.max_size, self.params, self.states, self.index, Q.tocsr())


def build_generator(max_size: int, params: Parameters, bound: int = GENERATOR_BOUND) -> Generator:
    if max_size > bound:
        raise ValueError(f"max size {max_size} above generator bound {bound}")
    states = diagrams_up_to(max_size)
    index = {lam: k for k, lam in enumerate(states)}
    over = len(states)
    rows, cols, vals = [], [], []
    for k, lam in enumerate(states):
        row = rate_row(lam, params)
        total = 0.0
        for target, rate in row.targets():
            rate = float(rate)
            rows.append(k)
            cols.append(index.get(target, over))
            vals.append(rate)
            total += rate
        rows.append(k)
        cols.append(k)
        vals.append(-total)
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(over + 1, over + 1))
    return Generator(max_size, params, states, index, Q)


@dataclass
class Transient:
    probs: np.ndarray
    overflow_mass: float
    series_error: float
    states: list

    def as_dict(self) -> dict:
        return {lam: float(p) for lam, p in zip(self.states, self.probs) if p > 0.0}


def transient_distribution(gen: Generator, initial, horizon: float, tol: float = 1e-12,
                           max_poisson_mean: float = 20.0) -> Transient:
    """Law at ``horizon`` by uniformization.

    ``initial`` is a diagram or a probability vector over ``gen.states``.

    The horizon is split into sub-intervals with uniformized Poisson mean at
    most ``max_poisson_mean``; each Poisson series is cut when the tail drops
    below ``tol / n_intervals`` and the discarded tails are summed into
    ``series_error``.
    """
    if isinstance(initial, np.ndarray):
        v = np.zeros(gen.n_states)
        v[:len(initial)] = initial
    else:
        v = np.zeros(gen.n_states)
        v[gen.index[as_diagram(initial)]] = 1.0
    if horizon <= 0.0:
        return Transient(v[:-1], 0.0, 0.0, gen.states)
    Q = gen.Q
    rate = float(-Q.diagonal().min())
    if rate == 0.0:
        return Transient(v[:-1], 0.0, 0.0, gen.states)
    n_int = max(1, math.ceil(rate * horizon / max_poisson_mean))
    dt = horizon / n_int
    mu = rate * dt
    P = (sp.identity(gen.n_states, format="csr") + Q / rate).T.tocsr()
    local_tol = tol / n_int
    k_max = int(poisson.isf(local_tol, mu)) + 1
    weights = poisson.pmf(np.arange(k_max + 1), mu)
    error = 0.0
    for _ in range(n_int):
        term = v
        acc = weights[0] * term
        for k in range(1, k_max + 1):
            term = P @ term
            acc = acc + weights[k] * term
        error += float(poisson.sf(k_max, mu))
        v = acc
    return Transient(v[:-1], float(v[-1]), error, gen.states)


@dataclass
class Stationary:
    probs: np.ndarray
    residual: float
    boundary_mass: float
    states: list

    def as_dict(self) -> dict:
        return {lam: float(p) for lam, p in zip(self.states, self.probs)}

    @property
    def converged(self) -> bool:
        return self.boundary_mass < 1e-6


def retained_generator(gen: Generator) -> sp.csr_matrix:
    """Generator on the retained states with overflow moves suppressed."""
    n = len(gen.states)
    Q = gen.Q[:n, :n].tolil()
    lost = np.asarray(gen.Q[:n, n].todense()).ravel()
    Q.setdiag(Q.diagonal() + lost)
    return Q.tocsr()


def stationary_distribution(gen: Generator) -> Stationary:
    Qt = retained_generator(gen)
    n = Qt.shape[0]
    A = Qt.T.tolil()
    A[0, :] = np.ones(n)
    b = np.zeros(n)
    b[0] = 1.0
    pi = spla.spsolve(A.tocsc(), b)
    if not np.all(np.isfinite(pi)):
        raise RuntimeError("stationary solve failed")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    residual = float(np.abs(Qt.T @ pi).max())
    sizes = np.array([lam.size for lam in gen.states])
    boundary = float(pi[sizes == gen.max_size].sum())
    if boundary >= 1e-6:
        warnings.warn(f"stationary mass {boundary:.3g} on size {gen.max_size}; "
                      "the size truncation is visible", RuntimeWarning, stacklevel=2)
    return Stationary(pi, residual, boundary, gen.states)
