"""Closed-form average costs and optimal thresholds for single items.

Push and genie thresholds are parameterized by cycle length ``m``: under
push the copy is refreshed at the update that brings its age to ``m``;
under the genie the copy is refreshed at the first request after the age
has reached ``m``. The matching strict age thresholds are ``m - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import CostParams, ItemParams
from .policies import (
    AlwaysFetch,
    GenieThreshold,
    NeverFetch,
    PolicySpec,
    push_cycle,
    pull_threshold,
)


# costs within this relative distance count as tied; ties go to the smaller
# cycle so that rescaling (c_f, c_a) cannot flip the choice through rounding
TIE_RTOL = 1e-12


class DomainError(ValueError):
    pass


class BracketError(RuntimeError):
    """An integer search hit the edge of its range before finding the minimum."""


@dataclass(frozen=True)
class PushSolution:
    m_star: float  # int, or math.inf for "never push"
    cost: float
    degenerate: bool = False

    def policy(self) -> PolicySpec:
        return push_cycle(self.m_star)


@dataclass(frozen=True)
class PullSolution:
    tau_star: float  # math.inf: never fetch; math.nan: no requests
    cost: float
    degenerate: bool = False

    def policy(self) -> PolicySpec:
        if math.isnan(self.tau_star):
            return NeverFetch()
        return pull_threshold(self.tau_star)


@dataclass(frozen=True)
class GenieSolution:
    eta_star: float  # argmin of the genie cycle cost; math.inf when never fetching
    cost: float
    degenerate: bool = False

    @property
    def age_threshold(self) -> float:
        """Strict age threshold realizing ``eta_star``; -1 means fetch on every request."""
        return self.eta_star - 1

    def policy(self) -> PolicySpec:
        if self.eta_star == math.inf:
            return NeverFetch()
        if self.eta_star == 0:
            return AlwaysFetch()
        return GenieThreshold(int(self.eta_star) - 1)


def continuous_push_cycle(item: ItemParams, beta: float, costs: CostParams) -> float:
    """Real minimizer sqrt(2*lam*c_f / (beta*p*c_a)) of the push cycle cost."""
    bp = beta * item.p
    if bp * costs.c_a == 0:
        return math.inf
    return math.sqrt(2.0 * item.lam * costs.c_f / (bp * costs.c_a))


def push_cycle_cost(m: int, item: ItemParams, beta: float, costs: CostParams) -> float:
    if m < 1:
        raise DomainError(f"push cycle length must be >= 1, got {m}")
    bp = beta * item.p
    return 0.5 * bp * costs.c_a * (m - 1) + item.lam * costs.c_f / m


def push_integer_case_cost(item: ItemParams, beta: float, costs: CostParams) -> float:
    """sqrt(2*lam*bp*c_a*c_f) - bp*c_a/2, exact when the continuous cycle is an integer."""
    bp = beta * item.p
    return math.sqrt(2.0 * item.lam * bp * costs.c_a * costs.c_f) - 0.5 * bp * costs.c_a


def push_optimal(item: ItemParams, beta: float, costs: CostParams) -> PushSolution:
    bp = beta * item.p
    if bp == 0 or item.lam == 0 or costs.c_a == 0:
        return PushSolution(math.inf, 0.0, degenerate=True)
    eta = max(1, math.floor(continuous_push_cycle(item, beta, costs)))
    c0 = push_cycle_cost(eta, item, beta, costs)
    c1 = push_cycle_cost(eta + 1, item, beta, costs)
    if c1 < c0 * (1.0 - TIE_RTOL):
        return PushSolution(eta + 1, c1)
    return PushSolution(eta, c0)


def pull_threshold_formula(bp: float, lam: float, costs: CostParams) -> float:
    return (math.sqrt(1.0 + 2.0 * bp * costs.c_f / (costs.c_a * lam)) - 1.0) / bp


def pull_optimal(item: ItemParams, beta: float, costs: CostParams) -> PullSolution:
    bp = beta * item.p
    if bp == 0:
        return PullSolution(math.nan, 0.0, degenerate=True)
    if item.lam == 0 or costs.c_a == 0:
        return PullSolution(math.inf, 0.0, degenerate=True)
    tau = pull_threshold_formula(bp, item.lam, costs)
    cost = costs.c_a * item.lam * (
        math.sqrt(1.0 + 2.0 * (bp / item.lam) * (costs.c_f / costs.c_a)) - 1.0
    )
    return PullSolution(tau, cost)


def genie_cycle_cost(m, item: ItemParams, beta: float, costs: CostParams):
    """Average cost of the genie that refreshes on the first request after age ``m``.

    Accepts an integer or an integer array of cycle lengths.
    """
    bp = beta * item.p
    if bp == 0:
        raise DomainError("genie cycle cost needs a positive request rate")
    if np.any(np.asarray(m) < 0):
        raise DomainError(f"genie cycle length must be >= 0, got {m}")
    num = 0.5 * bp * costs.c_a * m * (m - 1) + item.lam * costs.c_f
    return num / (item.lam / bp + m)


def default_genie_m_max(item: ItemParams, beta: float, costs: CostParams) -> int:
    return 10 * math.ceil(continuous_push_cycle(item, beta, costs)) + 10


def genie_optimal(
    item: ItemParams, beta: float, costs: CostParams, m_max: int | None = None
) -> GenieSolution:
    bp = beta * item.p
    if bp == 0 or item.lam == 0 or costs.c_a == 0:
        return GenieSolution(math.inf, 0.0, degenerate=True)
    explicit = m_max is not None
    if m_max is None:
        m_max = default_genie_m_max(item, beta, costs)
    while True:
        ms = np.arange(m_max + 1)
        vals = genie_cycle_cost(ms, item, beta, costs)
        low = vals.min()
        best = int(np.flatnonzero(vals <= low * (1.0 + TIE_RTOL))[0])
        if best < m_max:
            return GenieSolution(best, float(vals[best]))
        if explicit:
            raise BracketError(f"genie minimum not bracketed by m_max={m_max}; increase it")
        m_max *= 2
