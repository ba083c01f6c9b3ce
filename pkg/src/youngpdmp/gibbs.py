"""Gibbs measures on bounded generalized tableaux.

Given its shape, a Gibbs state is uniform (Lebesgue) on the set of
generalized tableaux of that shape.  That set splits into ``dim(lam)``
congruent simplices, one per standard tableau, so a sample is a uniform
tableau together with ``N`` sorted iid ``Uniform(0, r)`` heights placed by
rank.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .partitions import ENUMERATION_BOUND, as_diagram, dim, enumerate_tableaux, random_tableau
from .tableau_state import HeightState

ALPHA = 1e-3
MIN_HITS = 100
MIN_SAMPLES = 1000

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"


def sample_given_shape(shape, r, rng) -> HeightState:
    lam = as_diagram(shape)
    n = lam.size
    if n == 0:
        return HeightState.empty(r)
    tableau = random_tableau(lam, rng)
    values = np.sort(rng.random(n) * r)
    rows = tuple(tuple(float(values[k - 1]) for k in row) for row in tableau.entries)
    return HeightState(r, rows)


def _normalized(dist: dict, tol: float = 1e-9):
    shapes = list(dist)
    weights = np.array([float(dist[s]) for s in shapes])
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > tol:
        raise ValueError(f"distribution must be nonnegative and sum to 1 (sum={weights.sum()!r})")
    return shapes, np.cumsum(weights)


def sample_gibbs(dist: dict, r, rng) -> HeightState:
    """Draw a shape from ``dist`` then a uniform state of that shape."""
    shapes, cum = _normalized(dist)
    k = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return sample_given_shape(shapes[min(k, len(shapes) - 1)], r, rng)


class GibbsInitial:
    """Picklable start-state sampler for ensembles."""

    def __init__(self, dist: dict, r):
        self.shapes, self.cum = _normalized(dist)
        self.r = r

    def __call__(self, rng) -> HeightState:
        k = int(np.searchsorted(self.cum, rng.random() * self.cum[-1], side="right"))
        return sample_given_shape(self.shapes[min(k, len(self.shapes) - 1)], self.r, rng)


@dataclass
class ShapeReport:
    shape: tuple
    n: int
    dim: int
    chi2_p: float | None = None
    ks_p: list = field(default_factory=list)

    def pvalues(self) -> list:
        out = list(self.ks_p)
        if self.chi2_p is not None:
            out.append(self.chi2_p)
        return out

    def to_dict(self) -> dict:
        return {"shape": list(self.shape), "n": self.n, "dim": self.dim,
                "chi2_p": self.chi2_p, "ks_p": self.ks_p}


@dataclass
class GibbsReport:
    verdict: str
    n_samples: int
    alpha: float
    threshold: float
    n_tests: int
    shapes: list
    min_p: float | None = None
    message: str = ""

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "n_samples": self.n_samples, "alpha": self.alpha,
                "bonferroni_threshold": self.threshold, "n_tests": self.n_tests,
                "min_p": self.min_p, "message": self.message,
                "shapes": [s.to_dict() for s in self.shapes]}


def test_gibbsianness(samples, alpha: float = ALPHA, min_hits: int = MIN_HITS,
                      min_samples: int = MIN_SAMPLES) -> GibbsReport:
    """Conditional-uniformity test, shape by shape.

    For every shape with at least ``min_hits`` samples: a chi-square test
    that the rank tableau is uniform on all standard tableaux (when there
    are at least two), and for each rank ``k`` a KS test that the k-th
    smallest height over ``r`` is Beta(k, N - k + 1).  The family is judged
    at ``alpha`` with a Bonferroni correction over all subtests.
    """
    samples = list(samples)
    if len(samples) < min_samples:
        return GibbsReport(INCONCLUSIVE, len(samples), alpha, alpha, 0, [],
                           message=f"need at least {min_samples} samples")
    levels = {s.r for s in samples}
    if len(levels) != 1:
        raise ValueError(f"samples must share one level, got {sorted(levels)}")
    r = levels.pop()
    groups = defaultdict(list)
    for state in samples:
        groups[state.shape_rows()].append(state)
    reports = []
    for rows in sorted(groups, key=lambda s: (sum(s), s)):
        group = groups[rows]
        n_cells = sum(rows)
        if len(group) < min_hits or n_cells == 0:
            continue
        d = dim(rows)
        report = ShapeReport(rows, len(group), d)
        ranked = [s.to_ranked_tableau() for s in group]
        if d >= 2 and n_cells <= ENUMERATION_BOUND:
            labels = {t: k for k, t in enumerate(enumerate_tableaux(rows))}
            counts = np.zeros(d)
            for _, tableau, _ in ranked:
                counts[labels[tableau]] += 1
            report.chi2_p = float(stats.chisquare(counts).pvalue)
        values = np.array([v for _, _, v in ranked]) / r
        for k in range(1, n_cells + 1):
            dist = stats.beta(k, n_cells - k + 1)
            report.ks_p.append(float(stats.kstest(values[:, k - 1], dist.cdf).pvalue))
        reports.append(report)
    pvals = [p for rep in reports for p in rep.pvalues()]
    if not pvals:
        return GibbsReport(INCONCLUSIVE, len(samples), alpha, alpha, 0, reports,
                           message=f"no shape with at least {min_hits} samples")
    threshold = alpha / len(pvals)
    min_p = min(pvals)
    verdict = PASS if min_p > threshold else FAIL
    return GibbsReport(verdict, len(samples), alpha, threshold, len(pvals), reports, min_p)


# pytest would otherwise collect the function above as a test
test_gibbsianness.__test__ = False
