from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freshcache.analytic import (
    BracketError,
    DomainError,
    GenieSolution,
    continuous_push_cycle,
    genie_cycle_cost,
    genie_optimal,
    pull_optimal,
    push_cycle_cost,
    push_integer_case_cost,
    push_optimal,
)
from freshcache.model import CostParams, ItemParams
from freshcache.policies import AlwaysFetch, GenieThreshold, NeverFetch, PullThreshold, PushCycle

ITEM = ItemParams(1.0, 2.0)
COSTS = CostParams(1.0, 0.1)


def _scan_limit(item, bp, costs):
    # both cycle costs grow linearly beyond a few multiples of the continuous cycle
    return 4 * math.ceil(math.sqrt(2 * item.lam * costs.c_f / (bp * costs.c_a))) + 10


def brute_push(item, bp, costs, m_max=None):
    """Integer scan of aging-per-cycle plus fetch-per-cycle over cycle time."""
    m_max = m_max or _scan_limit(item, bp, costs)
    best = None
    for m in range(1, m_max + 1):
        cycle_time = m / item.lam
        aging = costs.c_a * sum(bp * k / item.lam for k in range(m))
        c = (aging + costs.c_f) / cycle_time
        if best is None or c < best[1] - 1e-15:
            best = (m, c)
    return best


def brute_genie(item, bp, costs, m_max=None):
    m_max = m_max or _scan_limit(item, bp, costs)
    best = None
    for m in range(0, m_max + 1):
        # expected cycle: m update sojourns then a wait for the next request
        length = m / item.lam + 1 / bp
        aging = costs.c_a * bp * sum(k / item.lam for k in range(m))
        c = (aging + costs.c_f) / length
        if best is None or c < best[1] - 1e-15:
            best = (m, c)
    return best


def test_running_example_push():
    sol = push_optimal(ITEM, 1.0, COSTS)
    assert sol.m_star == 6
    assert sol.cost == pytest.approx(0.25 + 2 / 6, rel=1e-12)
    assert sol.policy() == PushCycle(6)
    assert continuous_push_cycle(ITEM, 1.0, COSTS) == pytest.approx(math.sqrt(40))


def test_running_example_pull():
    sol = pull_optimal(ITEM, 1.0, COSTS)
    assert sol.tau_star == pytest.approx(math.sqrt(11) - 1, rel=1e-12)
    assert sol.cost == pytest.approx(0.2 * (math.sqrt(11) - 1), rel=1e-12)
    assert sol.policy() == PullThreshold(sol.tau_star)


def test_running_example_genie():
    sol = genie_optimal(ITEM, 1.0, COSTS)
    assert sol.eta_star == 5
    assert sol.cost == pytest.approx(3 / 7, rel=1e-12)
    assert sol.age_threshold == 4
    assert sol.policy() == GenieThreshold(4)


def test_genie_fetches_every_stale_request_when_updates_dominate():
    # m = 1 (refresh only stale copies) always beats m = 0 (refresh every request)
    item, costs = ItemParams(1.0, 100.0), CostParams(1.0, 1.0)
    sol = genie_optimal(item, 0.01, costs)
    assert sol.eta_star == 1
    assert sol.policy() == GenieThreshold(0)
    assert genie_cycle_cost(0, item, 0.01, costs) == pytest.approx(0.01)
    assert sol.cost < genie_cycle_cost(0, item, 0.01, costs)
    assert GenieSolution(0, 0.01).policy() == AlwaysFetch()


@pytest.mark.parametrize("solver", [push_optimal, pull_optimal, genie_optimal])
def test_no_updates_means_never_fetch(solver):
    sol = solver(ItemParams(1.0, 0.0), 1.0, COSTS)
    assert sol.degenerate and sol.cost == 0.0
    assert sol.policy() == NeverFetch()


def test_no_requests():
    assert push_optimal(ItemParams(0.0, 1.0), 1.0, COSTS).degenerate
    pull = pull_optimal(ItemParams(0.0, 1.0), 1.0, COSTS)
    assert math.isnan(pull.tau_star) and pull.cost == 0.0
    with pytest.raises(DomainError):
        genie_cycle_cost(3, ItemParams(0.0, 1.0), 1.0, COSTS)


def test_push_cycle_domain():
    with pytest.raises(DomainError):
        push_cycle_cost(0, ITEM, 1.0, COSTS)


def test_genie_explicit_bound_too_small():
    with pytest.raises(BracketError):
        genie_optimal(ITEM, 1.0, COSTS, m_max=3)


def test_integer_case_formula_exact_when_cycle_is_integer():
    # m_c = sqrt(2 lam c_f / (bp c_a)) = 5 exactly
    item, costs = ItemParams(1.0, 1.25), CostParams(1.0, 0.1)
    assert continuous_push_cycle(item, 1.0, costs) == pytest.approx(5.0)
    assert push_integer_case_cost(item, 1.0, costs) == pytest.approx(push_cycle_cost(5, item, 1.0, costs))


grid = dict(bp=st.floats(0.1, 10.0), lam=st.floats(0.01, 5.0), ratio=st.floats(2.0, 100.0))


@settings(max_examples=150)
@given(**grid)
def test_push_matches_brute_force(bp, lam, ratio):
    item, costs = ItemParams(1.0, lam), CostParams(1.0, 1 / ratio)
    m, c = brute_push(item, bp, costs)
    sol = push_optimal(item, bp, costs)
    assert sol.cost == pytest.approx(c, rel=1e-9)
    assert push_cycle_cost(m, item, bp, costs) == pytest.approx(sol.cost, rel=1e-9)


@settings(max_examples=150)
@given(**grid)
def test_genie_matches_brute_force_and_bounds_push_and_pull(bp, lam, ratio):
    item, costs = ItemParams(1.0, lam), CostParams(1.0, 1 / ratio)
    _, c = brute_genie(item, bp, costs)
    sol = genie_optimal(item, bp, costs)
    assert sol.cost == pytest.approx(c, rel=1e-9)
    assert sol.cost <= push_optimal(item, bp, costs).cost * (1 + 1e-12)
    assert sol.cost <= pull_optimal(item, bp, costs).cost * (1 + 1e-12)


@settings(max_examples=150)
@given(**grid)
def test_pull_threshold_is_stationary_point(bp, lam, ratio):
    item, costs = ItemParams(1.0, lam), CostParams(1.0, 1 / ratio)
    sol = pull_optimal(item, bp, costs)

    def cost(t):
        return (costs.c_a * lam * bp * t * t / 2 + costs.c_f) / (t + 1 / bp)

    assert cost(sol.tau_star) == pytest.approx(sol.cost, rel=1e-10)
    h = 1e-4 * max(sol.tau_star, 1e-3)
    assert cost(sol.tau_star) <= min(cost(sol.tau_star + h), cost(max(sol.tau_star - h, 0)))
