from __future__ import annotations

import math

import numpy as np
import pytest

from freshcache import experiments as ex
from freshcache.analytic import pull_optimal, push_optimal
from freshcache.model import Catalog, CostParams, ItemParams, build_catalog
from freshcache.partition import (
    BracketError,
    PoleError,
    buffer_assignment,
    combined_assignment,
    combined_cost,
    f_star,
    greedy_savings_order,
    reduction_pct,
    y_star,
    zero_gain_cubic,
)


def test_f_star_g40():
    assert f_star(40.0) == pytest.approx(1.83609, abs=1e-5)
    F = f_star(40.0) / 2
    assert zero_gain_cubic(F, 40.0) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("G", [1.2, 2.0, 5.0, 40.0, 1e3, 1e6])
def test_scan_agrees_with_bisection(G):
    assert f_star(G, scan=True) == pytest.approx(f_star(G), abs=1e-9)


def test_f_star_limits():
    assert f_star(math.inf) == 2.0
    assert f_star(1e8) == pytest.approx(2.0, abs=1e-3)
    with pytest.raises(BracketError):
        f_star(1.0)


def test_f_star_increasing_in_g():
    vals = [f_star(G) for G in np.geomspace(1.2, 1e5, 40)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_reduction_sign_and_pole():
    assert reduction_pct(0.25, 40.0) < 0  # beta*p/lam < 1: pull wins
    assert reduction_pct(5.0, 40.0) > 0
    with pytest.raises(PoleError):
        reduction_pct(40.0, 40.0)
    with pytest.raises(ValueError):
        reduction_pct(0.0, 40.0)


def test_reduction_matches_cost_ratio():
    item, costs = ItemParams(1.0, 1.0), CostParams(1.0, 0.1)
    bp = 3.0
    F = bp / 2
    from freshcache.analytic import push_integer_case_cost

    expected = 100 * (pull_optimal(item, bp, costs).cost / push_integer_case_cost(item, bp, costs) - 1)
    assert reduction_pct(F, costs.G) == pytest.approx(expected, rel=1e-10)


def _catalog():
    return build_catalog(ex.base_recipe(n_items=200), 5.0, CostParams(1.0, 0.1))


def test_y_star_and_order():
    cat = Catalog((ItemParams(0.5, 0.0), ItemParams(0.3, 1.0), ItemParams(0.2, 0.1)), 2.0)
    y = y_star(cat)
    assert y[0] == math.inf and y[1] == pytest.approx(0.6) and y[2] == pytest.approx(4.0)
    asg = combined_assignment(cat)
    assert asg.order == (0, 2, 1)


def test_fstar_split_is_prefix_of_order():
    cat = _catalog()
    asg = combined_assignment(cat)
    fs = f_star(40.0)
    assert asg.group1 == asg.order[: asg.n_star]
    assert all(y > fs for y in asg.y_star[: asg.n_star])
    assert all(y <= fs for y in asg.y_star[asg.n_star:])


def test_exact_rule_is_per_item_minimum():
    cat = _catalog()
    cc = combined_cost(cat, combined_assignment(cat, rule="exact"))
    direct = sum(
        min(push_optimal(it, cat.beta, cat.costs).cost, pull_optimal(it, cat.beta, cat.costs).cost)
        for it in cat.items
    )
    assert cc.exact == pytest.approx(direct, rel=1e-12)
    assert cc.disagreements == ()
    assert cc.miss == 0.0


def test_buffer_caches_top_b_and_charges_misses():
    cat = _catalog()
    asg = buffer_assignment(cat, 10)
    assert asg.cached == asg.order[:10]
    cc = combined_cost(cat, asg)
    miss = sum(cat.request_rate(n) * cat.costs.c_f for n in asg.order[10:])
    assert cc.miss == pytest.approx(miss, rel=1e-12)
    assert buffer_assignment(cat, 500).cached == combined_assignment(cat).cached


def test_buffer_rejects_negative():
    with pytest.raises(ValueError):
        buffer_assignment(_catalog(), -1)


def test_assignment_serializes():
    d = buffer_assignment(_catalog(), 5).to_dict()
    assert d["buffer"] == 5 and len(d["cached"]) == 5 and d["rule"] == "fstar"


def test_greedy_savings_order_is_a_permutation():
    cat = _catalog()
    assert sorted(greedy_savings_order(cat)) == list(range(len(cat)))
