"""Scenario-based mean-ES portfolio selection.

Both classic problems are linear programs through the shortfall's
minimization form: with auxiliary variables (t, z), the tail mean of the
portfolio loss a'X equals min over t of t + E[(a'X - t)+]/(1-p), and the
positive parts linearize as z_s >= a'x_s - t, z_s >= 0.  Solutions come from
the in-repo dense simplex, and the reported shortfall is recomputed directly
from the solved weights as a consistency check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .concentration import ScenarioSet
from .dist import DiscreteDistribution
from .riskmeasures import axiom_harness, es
from .simplex import LPResult, LPStatus, solve_lp

__all__ = [
    "SimplexSet",
    "BoxSet",
    "LinearSet",
    "MinESGivenReturn",
    "MaxReturnGivenES",
    "PortfolioProblem",
    "PortfolioResult",
    "FrontierPoint",
    "solve",
    "frontier",
    "objective_is_mean_es",
    "MeanESReport",
]


@dataclass(frozen=True)
class SimplexSet:
    """Long-only fully invested weights: a >= 0, sum(a) = 1."""

    def constraints(self, k: int):
        return [(0.0, None)] * k, None, None, np.ones((1, k)), np.ones(1)


@dataclass(frozen=True)
class BoxSet:
    """Fully invested weights with per-asset bounds lo <= a <= hi."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def constraints(self, k: int):
        lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (k,))
        hi = np.broadcast_to(np.asarray(self.hi, dtype=float), (k,))
        if np.any(lo > hi):
            raise ValueError("box bounds need lo <= hi")
        bounds = list(zip(lo.tolist(), hi.tolist()))
        return bounds, None, None, np.ones((1, k)), np.ones(1)


@dataclass(frozen=True)
class LinearSet:
    """General polyhedron G a <= h; the caller keeps it nonempty and bounded."""

    G: tuple[tuple[float, ...], ...]
    h: tuple[float, ...]

    def constraints(self, k: int):
        G = np.asarray(self.G, dtype=float)
        h = np.asarray(self.h, dtype=float).ravel()
        if G.ndim != 2 or G.shape[1] != k:
            raise ValueError(f"G must have {k} columns")
        if G.shape[0] != h.size:
            raise ValueError("G and h row counts differ")
        return [(None, None)] * k, G, h, None, None


@dataclass(frozen=True)
class MinESGivenReturn:
    """Minimize tail risk subject to expected return >= u."""

    u: float


@dataclass(frozen=True)
class MaxReturnGivenES:
    """Maximize expected return subject to tail risk <= r."""

    r: float


@dataclass(frozen=True)
class PortfolioProblem:
    scenarios: ScenarioSet
    p: float
    feasible_set: SimplexSet | BoxSet | LinearSet
    mode: MinESGivenReturn | MaxReturnGivenES

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"confidence level p must lie in (0, 1), got {self.p!r}")


@dataclass(frozen=True)
class PortfolioResult:
    status: LPStatus
    weights: np.ndarray | None
    es_value: float | None
    mean_return: float | None
    lp_value: float | None


def _assemble(prob: PortfolioProblem):
    s = prob.scenarios
    m, k = s.m, s.k
    X = s.losses
    w = s.weights
    mu = w @ X  # per-asset expected loss
    a_bounds, G, h, A_eq, b_eq = prob.feasible_set.constraints(k)
    nvar = k + 1 + m
    bounds = list(a_bounds) + [(None, None)] + [(0.0, None)] * m

    rows = [np.concatenate([X[s_i], [-1.0], -np.eye(m)[s_i]]) for s_i in range(m)]
    A_ub = np.vstack(rows)
    b_ub = np.zeros(m)
    if G is not None:
        A_ub = np.vstack([A_ub, np.hstack([G, np.zeros((G.shape[0], 1 + m))])])
        b_ub = np.concatenate([b_ub, h])
    if A_eq is not None:
        A_eq = np.hstack([A_eq, np.zeros((A_eq.shape[0], 1 + m))])
    ru = np.concatenate([np.zeros(k), [1.0], w / (1.0 - prob.p)])

    if isinstance(prob.mode, MinESGivenReturn):
        c = ru
        ret_row = np.concatenate([mu, np.zeros(1 + m)])
        A_ub = np.vstack([A_ub, ret_row])
        b_ub = np.concatenate([b_ub, [-prob.mode.u]])
    elif isinstance(prob.mode, MaxReturnGivenES):
        c = np.concatenate([mu, np.zeros(1 + m)])
        A_ub = np.vstack([A_ub, ru])
        b_ub = np.concatenate([b_ub, [prob.mode.r]])
    else:
        raise ValueError(f"unknown mode {prob.mode!r}")
    return c, A_ub, b_ub, A_eq, b_eq, bounds, mu


def solve(prob: PortfolioProblem) -> PortfolioResult:
    """Solve the linearized problem; infeasibility is a status, not an error."""
    c, A_ub, b_ub, A_eq, b_eq, bounds, mu = _assemble(prob)
    res: LPResult = solve_lp(c, A_ub, b_ub, A_eq, b_eq, bounds)
    if res.status is not LPStatus.OPTIMAL:
        return PortfolioResult(res.status, None, None, None, None)
    k = prob.scenarios.k
    a = res.x[:k]
    port = DiscreteDistribution(prob.scenarios.losses @ a, prob.scenarios.weights)
    es_direct = es(port, prob.p)
    mean_return = -float(mu @ a)
    if isinstance(prob.mode, MinESGivenReturn):
        lp_value = res.value
    else:
        lp_value = -res.value  # the LP minimized expected loss
    return PortfolioResult(LPStatus.OPTIMAL, a, es_direct, mean_return, lp_value)


@dataclass(frozen=True)
class FrontierPoint:
    target: float
    status: LPStatus
    weights: np.ndarray | None
    es: float | None
    mean: float | None


def _return_range(prob: PortfolioProblem) -> tuple[float, float]:
    """Attainable expected-return interval via two auxiliary LPs on weights only."""
    k = prob.scenarios.k
    mu = prob.scenarios.weights @ prob.scenarios.losses
    bounds, G, h, A_eq, b_eq = prob.feasible_set.constraints(k)
    hi = solve_lp(mu, G, h, A_eq, b_eq, bounds)  # least expected loss = greatest return
    lo = solve_lp(-mu, G, h, A_eq, b_eq, bounds)
    if hi.status is not LPStatus.OPTIMAL or lo.status is not LPStatus.OPTIMAL:
        raise ValueError(f"feasible set is {hi.status.value}/{lo.status.value} for return bounds")
    return float(lo.value), -float(hi.value)  # (min return, max return)


def frontier(prob: PortfolioProblem, n_points: int) -> list[FrontierPoint]:
    """Sweep the risk-minimization problem over attainable return targets.

    Targets are evenly spaced between the least and greatest attainable
    expected return; the risk coordinate is nondecreasing along the sweep
    because the feasible sets nest.
    """
    if n_points < 2:
        raise ValueError("frontier needs n_points >= 2")
    u_min, u_max = _return_range(prob)
    targets = np.linspace(u_min, u_max, n_points)
    points = []
    for u in targets:
        r = solve(
            PortfolioProblem(prob.scenarios, prob.p, prob.feasible_set, MinESGivenReturn(float(u)))
        )
        points.append(FrontierPoint(float(u), r.status, r.weights, r.es_value, r.mean_return))
    return points


@dataclass(frozen=True)
class MeanESReport:
    monotonicity: object
    concentration_aversion: object

    @property
    def passed(self) -> bool:
        return self.monotonicity.passed and self.concentration_aversion.passed


def objective_is_mean_es(objective, p: float, trials: int, seed: int) -> MeanESReport:
    """Evidence that an objective is a mean-shortfall criterion.

    Runs the monotonicity and tail-concentration-aversion harnesses against
    the supplied functional (a callable on DiscreteDistribution; ``inf``
    encodes constraint violations).  A double PASS is evidence, not proof.
    """
    m_rep = axiom_harness(objective, "M", trials=trials, seed=seed, p=p)
    pca_rep = axiom_harness(objective, "pCA", trials=trials, seed=seed + 1, p=p)
    return MeanESReport(m_rep, pca_rep)
