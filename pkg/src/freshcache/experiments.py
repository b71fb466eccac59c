"""Parameter sweeps that regenerate the figure data as CSV tables.

Paradigm totals per sweep point:

push, pull, genie
    every cached item under that paradigm's optimal policy.
combined
    each cached item under whichever of push/pull is cheaper for it.
combined_fstar
    the f*-ratio split, evaluated with achievable push costs.
combined_formula
    the same split with the integer-case push expression.
always, never
    fetch on every request / never fetch.

With a buffer ``B`` only the top-B items by beta*p/lam are cached and every
other item pays one fetch per request. Push-only caching admits an item
only when pushing beats that miss cost.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .analytic import genie_optimal, pull_optimal, push_optimal
from .model import (
    Catalog,
    CatalogRecipe,
    CostParams,
    ItemParams,
    RefreshProfile,
    build_catalog,
    recipe_to_dict,
)
from .oracle import pull_grid_search, push_brute_force
from .partition import (
    PoleError,
    buffer_assignment,
    combined_assignment,
    combined_cost,
    f_star,
    reduction_pct,
)
from .policies import AlwaysFetch, NeverFetch, PolicySpec
from .simulator import SimConfig, simulate_catalog

PARADIGMS = ("push", "pull", "combined", "combined_fstar", "combined_formula", "genie", "always", "never")
DEFAULT_PARADIGMS = ("push", "pull", "combined", "combined_fstar", "combined_formula", "genie")
SIMULATABLE = {"push", "pull", "combined", "combined_fstar", "genie", "always", "never"}
SWEEP_VARIABLES = ("beta", "zipf_alpha", "buffer_B", "item_F")

# experiment setup of the multi-item figures
BASE_BETA = 5.0
BASE_COSTS = CostParams(1.0, 0.1)
BASE_N = 1000
BASE_Z = 1.0
BASE_LAMBDA = 0.01
BASE_BUFFER = 10

ROW_COLUMNS = [
    "sweep_variable",
    "sweep_value",
    "paradigm",
    "analytic_cost",
    "simulated_cost",
    "std_error",
    "abs_gap",
    "oracle_cost",
]


@dataclass(frozen=True)
class SweepSpec:
    sweep_variable: str
    values: tuple[float, ...]
    recipe: CatalogRecipe
    beta: float = BASE_BETA
    costs: CostParams = BASE_COSTS
    sim: SimConfig | None = None
    paradigms: tuple[str, ...] = DEFAULT_PARADIGMS
    buffer: int | None = None
    sim_requests: float | None = None

    def __post_init__(self):
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ValueError(f"unknown sweep variable {self.sweep_variable!r}")
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if not vals or any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("sweep values must be nonempty and strictly increasing")
        if not self.paradigms or any(p not in PARADIGMS for p in self.paradigms):
            raise ValueError(f"paradigms must be a nonempty subset of {PARADIGMS}")


@dataclass(frozen=True)
class SweepRow:
    sweep_variable: str
    sweep_value: float
    paradigm: str
    analytic_cost: float
    simulated_cost: float = math.nan
    std_error: float = math.nan
    oracle_cost: float = math.nan

    @property
    def abs_gap(self) -> float:
        return abs(self.simulated_cost - self.analytic_cost)

    def to_row(self) -> dict[str, Any]:
        d = asdict(self)
        d["abs_gap"] = self.abs_gap
        return {k: d[k] for k in ROW_COLUMNS}


# --- per-paradigm evaluation ---------------------------------------------------------

@dataclass
class ParadigmPlan:
    """Analytic total and executable per-item policies of one paradigm."""

    cost: float
    policies: list[PolicySpec] | None = None
    detail: dict[str, Any] = field(default_factory=dict)


def _cached_set(catalog: Catalog, B: int | None) -> list[int]:
    return list(buffer_assignment(catalog, len(catalog) if B is None else B).cached)


def plan_paradigms(
    catalog: Catalog, paradigms: Sequence[str] = DEFAULT_PARADIGMS, B: int | None = None
) -> dict[str, ParadigmPlan]:
    beta, costs = catalog.beta, catalog.costs
    n_items = len(catalog)
    cached = set(_cached_set(catalog, B))
    miss = [catalog.request_rate(n) * costs.c_f for n in range(n_items)]
    push = [push_optimal(it, beta, costs) for it in catalog.items]
    pull = [pull_optimal(it, beta, costs) for it in catalog.items]
    plans: dict[str, ParadigmPlan] = {}

    def single(solutions, admit=lambda n: True) -> ParadigmPlan:
        total, specs = [], []
        for n in range(n_items):
            if n in cached and admit(n):
                total.append(solutions[n].cost)
                specs.append(solutions[n].policy())
            else:
                total.append(miss[n])
                specs.append(AlwaysFetch())
        return ParadigmPlan(math.fsum(total), specs)

    for name in paradigms:
        if name == "push":
            plans[name] = single(push, admit=lambda n: push[n].cost < miss[n])
        elif name == "pull":
            plans[name] = single(pull)
        elif name == "genie":
            plans[name] = single([genie_optimal(it, beta, costs) for it in catalog.items])
        elif name in ("combined", "combined_fstar", "combined_formula"):
            rule = "exact" if name == "combined" else "fstar"
            if B is None:
                asg = combined_assignment(catalog, rule=rule)
            else:
                asg = buffer_assignment(catalog, B, rule=rule)
            cc = combined_cost(catalog, asg)
            specs: list[PolicySpec] = [AlwaysFetch()] * n_items
            for n in asg.group1:
                specs[n] = push[n].policy()
            for n in asg.group2:
                specs[n] = pull[n].policy()
            value = cc.formula + cc.miss if name == "combined_formula" else cc.total
            plans[name] = ParadigmPlan(
                value,
                None if name == "combined_formula" else specs,
                {"n_star": asg.n_star, "f_star": asg.f_star, "disagreements": cc.disagreements},
            )
        elif name == "always":
            plans[name] = ParadigmPlan(math.fsum(miss), [AlwaysFetch()] * n_items)
        elif name == "never":
            aging = any(catalog.request_rate(n) > 0 and it.lam > 0 for n, it in enumerate(catalog.items))
            plans[name] = ParadigmPlan(math.inf if aging else 0.0, [NeverFetch()] * n_items)
        else:
            raise ValueError(f"unknown paradigm {name!r}")
    return plans


def _oracle_total(catalog: Catalog, paradigm: str, B: int | None) -> float:
    """Per-item oracle optimum summed over cached items (push/pull only)."""
    beta, costs = catalog.beta, catalog.costs
    cached = set(_cached_set(catalog, B))
    total = []
    for n, it in enumerate(catalog.items):
        miss = catalog.request_rate(n) * costs.c_f
        if n not in cached or it.lam == 0 or it.p == 0 or beta == 0:
            total.append(miss if n not in cached else 0.0)
            continue
        if paradigm == "push":
            m_c = math.sqrt(2 * it.lam * costs.c_f / (beta * it.p * costs.c_a))
            c = push_brute_force(it, beta, costs, 2 * math.ceil(m_c) + 4)[1]
            total.append(min(c, miss) if B is not None else c)
        else:
            total.append(pull_grid_search(it, beta, costs)[1])
    return math.fsum(total)


def evaluate_point(
    catalog: Catalog,
    paradigms: Sequence[str],
    sweep_variable: str,
    sweep_value: float,
    B: int | None = None,
    sim: SimConfig | None = None,
    with_oracle: bool = False,
    jobs: int = 1,
) -> list[SweepRow]:
    plans = plan_paradigms(catalog, paradigms, B)
    rows = []
    for name in paradigms:
        plan = plans[name]
        sim_cost = se = math.nan
        if sim is not None and plan.policies is not None and name in SIMULATABLE:
            res = simulate_catalog(catalog, plan.policies, sim, jobs=jobs).aggregate
            sim_cost, se = res.avg_cost, res.std_error
        oracle = math.nan
        if with_oracle and name in ("push", "pull"):
            oracle = _oracle_total(catalog, name, B)
        rows.append(SweepRow(sweep_variable, sweep_value, name, plan.cost, sim_cost, se, oracle))
    return rows


def _sim_for(catalog: Catalog, spec: SweepSpec) -> SimConfig | None:
    if spec.sim is None:
        return None
    if spec.sim_requests is None:
        return spec.sim
    rates = [catalog.request_rate(n) for n in range(len(catalog)) if catalog.request_rate(n) > 0]
    if not rates:
        return spec.sim
    return replace(spec.sim, horizon=max(spec.sim.horizon, spec.sim_requests / min(rates)))


def catalog_at(spec: SweepSpec, value: float) -> tuple[Catalog, int | None]:
    recipe, beta, B = spec.recipe, spec.beta, spec.buffer
    if spec.sweep_variable == "beta":
        beta = value
    elif spec.sweep_variable == "zipf_alpha":
        lam_avg = recipe.refresh_profile.lambda_avg
        if lam_avg is None:
            lam_avg = recipe.refresh_profile.lam
        recipe = replace(recipe, refresh_profile=RefreshProfile.zipf_weighted(value, lam_avg))
    elif spec.sweep_variable == "buffer_B":
        B = int(value)
    elif spec.sweep_variable == "item_F":
        if recipe.n_items != 1:
            raise ValueError("item_F sweeps need a single-item recipe")
        lam = recipe.refresh_profile.rates(1)[0]
        beta = 2.0 * value * lam
    return build_catalog(recipe, beta, spec.costs), B


def run_sweep(spec: SweepSpec, with_oracle: bool = False, jobs: int = 1) -> list[SweepRow]:
    rows: list[SweepRow] = []
    for value in spec.values:
        catalog, B = catalog_at(spec, value)
        rows.extend(
            evaluate_point(
                catalog, spec.paradigms, spec.sweep_variable, value, B,
                _sim_for(catalog, spec), with_oracle, jobs,
            )
        )
    return rows


# --- figure drivers ------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroCrossing:
    G: float
    f_star: float
    F_cross: float
    sign_changes: int


def run_fig2_gain_surface(
    F_values: Sequence[float], G_values: Sequence[float], pole_rtol: float = 1e-6
) -> tuple[list, list[ZeroCrossing]]:
    """Reduction (%) over an F x G grid plus each row's zero crossing.

    Cells with F >= G lie past the pole (the integer-case push cost is not
    positive there) and are flagged rather than evaluated.
    """
    from .partition import GainPoint

    points, crossings = [], []
    for G in G_values:
        signs = []
        for F in F_values:
            if abs(F - G) <= pole_rtol * G:
                points.append(GainPoint(F, G, math.nan, "pole"))
                continue
            if F > G:
                points.append(GainPoint(F, G, math.nan, "beyond_pole"))
                continue
            try:
                r = reduction_pct(F, G)
            except PoleError:
                points.append(GainPoint(F, G, math.nan, "pole"))
                continue
            points.append(GainPoint(F, G, r))
            if r != 0:
                signs.append(r > 0)
        changes = sum(a != b for a, b in zip(signs, signs[1:]))
        fs = f_star(G) if G > 9 / 8 else math.nan
        crossings.append(ZeroCrossing(G, fs, fs / 2, changes))
    return points, crossings


def fig3_spec(
    beta_values: Sequence[float],
    item: ItemParams = ItemParams(1.0, 1.0),
    costs: CostParams = BASE_COSTS,
    sim: SimConfig | None = None,
    sim_requests: float | None = 2e5,
) -> SweepSpec:
    recipe = CatalogRecipe(1, 0.0, RefreshProfile.constant(item.lam))
    return SweepSpec(
        "beta", tuple(beta_values), recipe, costs=costs, sim=sim,
        paradigms=DEFAULT_PARADIGMS, sim_requests=sim_requests,
    )


def run_fig3_single_item(
    beta_values: Sequence[float],
    item: ItemParams = ItemParams(1.0, 1.0),
    costs: CostParams = BASE_COSTS,
    sim: SimConfig | None = None,
    with_oracle: bool = True,
) -> list[SweepRow]:
    if item.p != 1.0:
        raise ValueError("single-item sweeps need p = 1")
    return run_sweep(fig3_spec(beta_values, item, costs, sim), with_oracle=with_oracle)


def single_item_crossover(item_lam: float, costs: CostParams, y_lo=0.5, y_hi=4.0, n=20001):
    """Ratios y = beta/lam where the achievable push and pull costs swap order."""
    ys = np.linspace(y_lo, y_hi, n)
    diff = []
    for y in ys:
        it = ItemParams(1.0, item_lam)
        b = y * item_lam
        diff.append(push_optimal(it, b, costs).cost - pull_optimal(it, b, costs).cost)
    diff = np.asarray(diff)
    s = np.sign(diff)
    idx = np.flatnonzero(s[:-1] * s[1:] < 0)
    return [float(0.5 * (ys[i] + ys[i + 1])) for i in idx]


def base_recipe(alpha: float | None = None, n_items: int = BASE_N, z: float = BASE_Z) -> CatalogRecipe:
    profile = (
        RefreshProfile.constant(BASE_LAMBDA)
        if alpha is None
        else RefreshProfile.zipf_weighted(alpha, BASE_LAMBDA)
    )
    return CatalogRecipe(n_items, z, profile)


def run_fig4_multi_item(
    beta_values: Sequence[float],
    recipe: CatalogRecipe | None = None,
    costs: CostParams = BASE_COSTS,
    sim: SimConfig | None = None,
    paradigms: Sequence[str] = DEFAULT_PARADIGMS,
    jobs: int = 1,
) -> list[SweepRow]:
    spec = SweepSpec("beta", tuple(beta_values), recipe or base_recipe(), costs=costs,
                     sim=sim, paradigms=tuple(paradigms))
    return run_sweep(spec, jobs=jobs)


def run_fig5_alpha_sweep(
    alpha_values: Sequence[float],
    B: int = BASE_BUFFER,
    recipe: CatalogRecipe | None = None,
    beta: float = BASE_BETA,
    costs: CostParams = BASE_COSTS,
    sim: SimConfig | None = None,
    paradigms: Sequence[str] = DEFAULT_PARADIGMS,
    jobs: int = 1,
) -> list[SweepRow]:
    spec = SweepSpec("zipf_alpha", tuple(alpha_values), recipe or base_recipe(alpha=0.0),
                     beta=beta, costs=costs, sim=sim, paradigms=tuple(paradigms), buffer=B)
    return run_sweep(spec, jobs=jobs)


def run_fig6_buffer_sweep(
    B_values: Sequence[int],
    recipe: CatalogRecipe | None = None,
    beta: float = BASE_BETA,
    costs: CostParams = BASE_COSTS,
    sim: SimConfig | None = None,
    paradigms: Sequence[str] = DEFAULT_PARADIGMS,
    jobs: int = 1,
) -> list[SweepRow]:
    spec = SweepSpec("buffer_B", tuple(B_values), recipe or base_recipe(), beta=beta,
                     costs=costs, sim=sim, paradigms=tuple(paradigms))
    return run_sweep(spec, jobs=jobs)


def pivot(rows: Sequence[SweepRow], column: str = "analytic_cost") -> dict[float, dict[str, float]]:
    """{sweep_value: {paradigm: value}} view of a sweep table."""
    table: dict[float, dict[str, float]] = {}
    for r in rows:
        table.setdefault(r.sweep_value, {})[r.paradigm] = getattr(r, column)
    return table


# --- output --------------------------------------------------------------------------

def _fmt(v: Any) -> Any:
    if isinstance(v, float):
        return repr(v)
    return v


def write_csv(path: str | Path, rows: Sequence[dict[str, Any]], columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r[k]) for k in columns})


def write_sweep_csv(path: str | Path, rows: Sequence[SweepRow]) -> None:
    write_csv(path, [r.to_row() for r in rows], ROW_COLUMNS)


def write_gain_csv(path: str | Path, points, crossings: Sequence[ZeroCrossing]) -> None:
    fstar_by_G = {c.G: c.F_cross for c in crossings}
    rows = [
        {"F": p.F, "G": p.G, "reduction_pct": p.reduction_pct, "flag": p.flag,
         "zero_crossing_F": fstar_by_G[p.G]}
        for p in points
    ]
    write_csv(path, rows, ["F", "G", "reduction_pct", "flag", "zero_crossing_F"])


def write_manifest(path: str | Path, **fields: Any) -> dict[str, Any]:
    manifest = {"code_version": __version__, **fields}
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return manifest


def sweep_parameters(spec: SweepSpec) -> dict[str, Any]:
    return {
        "sweep_variable": spec.sweep_variable,
        "values": list(spec.values),
        "base": recipe_to_dict(spec.recipe, spec.beta, spec.costs),
        "buffer": spec.buffer,
        "paradigms": list(spec.paradigms),
        "sim": None if spec.sim is None else asdict(spec.sim),
        "sim_requests": spec.sim_requests,
    }


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0
