"""Choosing between push and pull per item.

Items are ranked by y = beta*p/lam (requests per update). Items far above
the zero-gain ratio f*(G) are cheaper under push, items below it under
pull. ``G = 4*c_f/c_a``.

Under a buffer of ``B`` slots only the top-B items by y are cached. An
uncached item is served straight from the back-end, so each of its
requests costs one fetch (rate ``beta*p*c_f``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .analytic import pull_optimal, push_integer_case_cost, push_optimal
from .model import Catalog

BISECT_TOL = 1e-12


class PoleError(ValueError):
    pass


class BracketError(ValueError):
    pass


@dataclass(frozen=True)
class GainPoint:
    F: float
    G: float
    reduction_pct: float
    flag: str = ""


def reduction_pct(F: float, G: float) -> float:
    """Percent by which the pull cost exceeds the (integer-case) push cost."""
    if not (F > 0 and G > 0):
        raise ValueError(f"F and G must be positive, got F={F}, G={G}")
    gf = math.sqrt(G * F)
    denom = gf - F
    if denom == 0:
        raise PoleError(f"reduction is singular at F = G = {G}")
    return 100.0 * ((math.sqrt(1.0 + G * F) - 1.0) / denom - 1.0)


def zero_gain_cubic(F: float, G: float) -> float:
    # F^3 - 4(1+G)F^2 + 4(1+2G)F - 4G in Horner form
    return ((F - 4.0 * (1.0 + G)) * F + 4.0 * (1.0 + 2.0 * G)) * F - 4.0 * G


def _bisect(f, lo: float, hi: float, tol: float = BISECT_TOL) -> float:
    flo = f(lo)
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def f_star(G: float, scan: bool = False) -> float:
    """Zero-gain ratio beta*p/lam at which push and pull cost the same.

    For G > 9/8 the cubic changes sign on (1/2, 1) and the root is found by
    bisection. ``scan=True`` instead searches all real cubic roots with
    0 < F < G that also solve the unsquared equation.
    """
    if G == math.inf:
        return 2.0  # cubic / G -> -4(F-1)^2
    if not scan:
        if not G > 9.0 / 8.0:
            raise BracketError(f"zero-gain bracket not guaranteed for G={G} <= 9/8")
        return 2.0 * _bisect(lambda F: zero_gain_cubic(F, G), 0.5, 1.0)
    roots = np.roots([1.0, -4.0 * (1 + G), 4.0 * (1 + 2 * G), -4.0 * G])
    good = []
    for r in roots:
        if abs(r.imag) > 1e-9 or not (0 < r.real < G):
            continue
        F = r.real
        if abs(math.sqrt(1 + G * F) - 1 - (math.sqrt(G * F) - F)) < 1e-8 * (1 + G):
            good.append(F)
    if not good:
        raise BracketError(f"no zero-gain root for G={G}")
    return 2.0 * min(good)


def y_star(catalog: Catalog) -> np.ndarray:
    bp = catalog.beta * catalog.p
    lam = catalog.lam
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.where(lam > 0, bp / np.where(lam > 0, lam, 1.0), math.inf)
    return y


@dataclass(frozen=True)
class GroupAssignment:
    """Which cached items are push-managed (group1) and pull-managed (group2).

    ``order`` lists item indices by decreasing y (ties by index) and
    ``y_star`` the matching values. Indices are 0-based.
    """

    order: tuple[int, ...]
    y_star: tuple[float, ...]
    n_star: int
    f_star: float
    group1: tuple[int, ...]
    group2: tuple[int, ...]
    cached: tuple[int, ...]
    rule: str = "fstar"
    buffer: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "order": list(self.order),
            "y_star": [None if math.isinf(v) else v for v in self.y_star],
            "n_star": self.n_star,
            "f_star": self.f_star,
            "group1": sorted(self.group1),
            "group2": sorted(self.group2),
            "cached": sorted(self.cached),
            "rule": self.rule,
            "buffer": self.buffer,
        }


def _per_item_costs(catalog: Catalog) -> tuple[np.ndarray, np.ndarray]:
    push = np.array([push_optimal(it, catalog.beta, catalog.costs).cost for it in catalog.items])
    pull = np.array([pull_optimal(it, catalog.beta, catalog.costs).cost for it in catalog.items])
    return push, pull


def _assign(catalog: Catalog, B: int | None, rule: str) -> GroupAssignment:
    if rule not in ("fstar", "exact"):
        raise ValueError(f"unknown rule {rule!r}")
    y = y_star(catalog)
    order = sorted(range(len(y)), key=lambda n: (-y[n], n))
    fs = f_star(catalog.costs.G)
    n_star = int(np.sum(y > fs))
    cap = len(order) if B is None else max(0, min(int(B), len(order)))
    cached = order[:cap]
    if rule == "fstar":
        k = min(n_star, cap)
        group1, group2 = cached[:k], cached[k:]
    else:
        push, pull = _per_item_costs(catalog)
        group1 = [n for n in cached if math.isinf(y[n]) or push[n] < pull[n]]
        group2 = [n for n in cached if not (math.isinf(y[n]) or push[n] < pull[n])]
    return GroupAssignment(
        order=tuple(order),
        y_star=tuple(float(y[n]) for n in order),
        n_star=n_star,
        f_star=fs,
        group1=tuple(group1),
        group2=tuple(group2),
        cached=tuple(cached),
        rule=rule,
        buffer=None if B is None else int(B),
    )


def combined_assignment(catalog: Catalog, rule: str = "fstar") -> GroupAssignment:
    """Split every item into push (y > f*) and pull groups.

    ``rule="exact"`` compares the achievable per-item optimal costs instead
    of the f* ratio; the two differ only for items near the crossover.
    """
    return _assign(catalog, None, rule)


def buffer_assignment(catalog: Catalog, B: int, rule: str = "fstar") -> GroupAssignment:
    if B < 0:
        raise ValueError(f"buffer size must be >= 0, got {B}")
    return _assign(catalog, B, rule)


@dataclass(frozen=True)
class CombinedCost:
    """Costs of a grouping.

    ``formula`` uses the integer-case push expression for group1 (what the
    closed form reports); ``exact`` uses the achievable integer-cycle push
    cost. Both cover cached items only; ``miss`` is the fetch-per-request
    cost of uncached items. ``disagreements`` lists items whose group
    differs from the per-item cheaper paradigm.
    """

    formula: float
    exact: float
    miss: float
    best: float
    disagreements: tuple[int, ...] = field(default_factory=tuple)

    @property
    def total(self) -> float:
        return self.exact + self.miss


def combined_cost(catalog: Catalog, assignment: GroupAssignment) -> CombinedCost:
    beta, costs = catalog.beta, catalog.costs
    push, pull = _per_item_costs(catalog)
    formula = exact = best = 0.0
    disagreements = []
    for n in assignment.group1:
        it = catalog.items[n]
        formula += 0.0 if push[n] == 0 else push_integer_case_cost(it, beta, costs)
        exact += push[n]
        if pull[n] < push[n]:
            disagreements.append(n)
    for n in assignment.group2:
        formula += pull[n]
        exact += pull[n]
        if push[n] < pull[n]:
            disagreements.append(n)
    for n in assignment.cached:
        best += min(push[n], pull[n])
    cached = set(assignment.cached)
    miss = math.fsum(
        catalog.request_rate(n) * costs.c_f for n in range(len(catalog)) if n not in cached
    )
    return CombinedCost(formula, exact, miss, best, tuple(sorted(disagreements)))


def greedy_savings_order(catalog: Catalog) -> list[int]:
    """Item indices by decreasing saving from caching (miss cost minus best paradigm cost).

    Diagnostic against the y-ranked admission used by ``buffer_assignment``.
    """
    push, pull = _per_item_costs(catalog)
    savings = [
        catalog.request_rate(n) * catalog.costs.c_f - min(push[n], pull[n])
        for n in range(len(catalog))
    ]
    return sorted(range(len(savings)), key=lambda n: (-savings[n], n))
