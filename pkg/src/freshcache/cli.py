"""Command-line entry point: ``freshcache {analyze,simulate,sweep,oracle}``.

Every command writes ``summary.json`` into ``--out`` (also on failure) and
exits 0 only when all of its checks pass. Exit code 1 means a check failed,
2 means bad input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from . import __version__
from . import experiments as ex
from .analytic import genie_optimal, pull_optimal, push_optimal
from .model import (
    Catalog,
    CatalogRecipe,
    CostParams,
    ItemParams,
    RefreshProfile,
    ValidationError,
    build_catalog,
    recipe_from_dict,
    recipe_to_dict,
)
from .oracle import (
    ConvergenceError,
    PreconditionError,
    StructureError,
    ViConfig,
    pull_grid_search,
    pull_refined_minimum,
    pull_renewal_cost,
    pull_value_iteration,
    push_age_bound,
    push_renewal_cost,
    push_value_iteration,
)
from .partition import buffer_assignment, combined_assignment, y_star
from .policies import NeverFetch, PolicySpec, parse_policy
from .simulator import CSV_COLUMNS, SimConfig, simulate_catalog

EXIT_OK, EXIT_CHECK_FAILED, EXIT_BAD_INPUT = 0, 1, 2
BUFFER_KEY = "buffer_B"


class InputError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config_digest: str
    seed: int
    started: str
    finished: str = ""
    outputs: list[str] = field(default_factory=list)
    effective_config: dict[str, Any] = field(default_factory=dict)
    code_version: str = __version__


def config_digest(config: dict[str, Any]) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _jsonable(v: Any) -> Any:
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def default_config() -> dict[str, Any]:
    return recipe_to_dict(ex.base_recipe(), ex.BASE_BETA, ex.BASE_COSTS)


def load_config(path: str | None, overrides: dict[str, Any]) -> dict[str, Any]:
    if path is None:
        config = default_config()
    else:
        text = Path(path).read_text()
        try:
            config = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if not isinstance(config, dict):
            raise InputError(f"{path}: top-level JSON value must be an object")
    for key, value in overrides.items():
        if value is not None:
            config[key] = value
    return config


def catalog_from_config(config: dict[str, Any]) -> tuple[Catalog, CatalogRecipe, int | None]:
    try:
        recipe, beta, costs = recipe_from_dict(config)
        catalog = build_catalog(recipe, beta, costs)
    except ValidationError as exc:
        raise InputError(f"invalid config field {exc.field!r}: {exc}") from None
    B = config.get(BUFFER_KEY)
    if B is not None and (isinstance(B, bool) or not isinstance(B, int) or B < 0):
        raise InputError(f"invalid config field {BUFFER_KEY!r}: must be a non-negative integer")
    return catalog, recipe, B


def resolve_seed(seed: int | None) -> int:
    if seed is None:
        env = os.environ.get("FRESHCACHE_SEED")
        if env is None:
            return 0
        try:
            seed = int(env)
        except ValueError:
            raise InputError(f"FRESHCACHE_SEED must be an integer, got {env!r}") from None
    if not 0 <= seed < 2**64:
        raise InputError("seed must be an unsigned 64-bit integer")
    return seed


def parse_values(text: str, integer: bool = False) -> list[float]:
    """``"1,2,5"`` or an inclusive range ``"1..200"`` (integer step 1) or ``"0.5..2:0.25"``."""
    try:
        if ".." in text:
            lo_s, _, rest = text.partition("..")
            hi_s, _, step_s = rest.partition(":")
            lo, hi = float(lo_s), float(hi_s)
            step = float(step_s) if step_s else 1.0
            if step <= 0 or hi < lo:
                raise ValueError
            n = int(math.floor((hi - lo) / step + 1e-9))
            vals = [lo + i * step for i in range(n + 1)]
        else:
            vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"cannot parse value list {text!r}") from None
    if not vals:
        raise InputError(f"empty value list {text!r}")
    return [int(round(v)) for v in vals] if integer else vals


# --- analyze ------------------------------------------------------------------------

ANALYZE_COLUMNS = [
    "item", "p", "lam", "y_star", "m_star", "tau_star", "eta_star",
    "push_cost", "pull_cost", "genie_cost", "group", "flags",
]


def cmd_analyze(args, out: Path) -> tuple[int, dict[str, Any], list[str]]:
    config = load_config(args.config, {BUFFER_KEY: args.B})
    catalog, recipe, B = catalog_from_config(config)
    beta, costs = catalog.beta, catalog.costs
    asg = combined_assignment(catalog, rule="exact")
    group = {n: "push" for n in asg.group1} | {n: "pull" for n in asg.group2}
    y = y_star(catalog)
    rows = []
    for n, it in enumerate(catalog.items):
        ps, pl, gn = (f(it, beta, costs) for f in (push_optimal, pull_optimal, genie_optimal))
        flags = "degenerate" if (ps.degenerate or pl.degenerate or gn.degenerate) else ""
        rows.append({
            "item": n, "p": it.p, "lam": it.lam, "y_star": float(y[n]),
            "m_star": ps.m_star, "tau_star": pl.tau_star, "eta_star": gn.eta_star,
            "push_cost": ps.cost, "pull_cost": pl.cost, "genie_cost": gn.cost,
            "group": group[n], "flags": flags,
        })
    path = out / "analyze.csv"
    ex.write_csv(path, rows, ANALYZE_COLUMNS)

    totals = {name: plan.cost for name, plan in ex.plan_paradigms(catalog, ex.PARADIGMS).items()}
    summary: dict[str, Any] = {
        "n_items": len(catalog),
        "n_star": asg.n_star,
        "f_star": asg.f_star,
        "totals": totals,
    }
    if B is not None:
        summary["buffer_B"] = B
        summary["buffer_totals"] = {
            name: plan.cost for name, plan in ex.plan_paradigms(catalog, ex.PARADIGMS, B).items()
        }
        summary["buffer_assignment"] = buffer_assignment(catalog, B).to_dict()
    if len(catalog) <= 20:
        summary["items"] = rows

    show = rows[: args.show]
    print("  ".join(f"{c:>10}" for c in ANALYZE_COLUMNS[:-1]))
    for r in show:
        print("  ".join(_cell(r[c]) for c in ANALYZE_COLUMNS[:-1]))
    if len(rows) > len(show):
        print(f"... {len(rows) - len(show)} more rows in {path}")
    print(f"split index n* = {asg.n_star}, f* = {asg.f_star:.6f}")
    for name, value in totals.items():
        print(f"total {name:>17}: {value:.6g}")
    if B is not None:
        for name, value in summary["buffer_totals"].items():
            print(f"total {name:>17} (B={B}): {value:.6g}")
    return EXIT_OK, {"config": config, **summary}, [str(path)]


def _cell(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:>10.6g}"
    return f"{v!s:>10}"


# --- simulate -----------------------------------------------------------------------

def _policies_for(text: str, catalog: Catalog) -> list[PolicySpec]:
    beta, costs = catalog.beta, catalog.costs
    auto = {"push:auto": push_optimal, "pull:auto": pull_optimal, "genie:auto": genie_optimal}
    if text in auto:
        return [auto[text](it, beta, costs).policy() for it in catalog.items]
    try:
        spec = parse_policy(text)
    except ValidationError as exc:
        raise InputError(str(exc)) from None
    return [spec] * len(catalog)


def cmd_simulate(args, out: Path) -> tuple[int, dict[str, Any], list[str]]:
    config = load_config(args.config, {})
    catalog, _, _ = catalog_from_config(config)
    specs = _policies_for(args.policy, catalog)
    try:
        sim = SimConfig(args.horizon, seed=args.seed, batch_count=args.batches)
    except ValidationError as exc:
        raise InputError(str(exc)) from None
    res = simulate_catalog(catalog, specs, sim, jobs=args.jobs)
    path = out / "simulate.csv"
    ex.write_csv(path, [r.to_row() for r in res.items], CSV_COLUMNS)
    agg = res.aggregate
    bad_never = [
        r.item_index for r, s in zip(res.items, specs)
        if isinstance(s, NeverFetch) and not r.converged
    ]
    print(f"avg_cost = {agg.avg_cost:.6g} +/- {agg.std_error:.3g} "
          f"(fetch {agg.fetch_cost_rate:.6g}, aging {agg.aging_cost_rate:.6g})")
    if agg.flags:
        print("flags: " + ", ".join(agg.flags))
    code = EXIT_CHECK_FAILED if (args.strict and bad_never) else EXIT_OK
    summary = {
        "config": config,
        "policy": args.policy,
        "sim": asdict(sim),
        "aggregate": agg.to_row() | {"flags": list(agg.flags)},
        "non_convergent_never_items": bad_never,
    }
    return code, summary, [str(path)]


# --- sweep --------------------------------------------------------------------------

def _dominance_failures(rows: list[ex.SweepRow]) -> list[str]:
    """Points violating genie <= combined <= min(push, pull)."""
    fails = []
    analytic = ex.pivot(rows)
    sim = ex.pivot(rows, "simulated_cost")
    se = ex.pivot(rows, "std_error")
    for x, costs in analytic.items():
        if not {"genie", "combined", "push", "pull"} <= costs.keys():
            continue
        tol = 1e-12 * max(1.0, abs(costs["combined"]))
        if costs["genie"] > costs["combined"] + tol:
            fails.append(f"{x}: analytic genie > combined")
        if costs["combined"] > min(costs["push"], costs["pull"]) + tol:
            fails.append(f"{x}: analytic combined > min(push, pull)")
        s, e = sim[x], se[x]
        if all(math.isfinite(s[k]) for k in ("genie", "combined", "push", "pull")):
            if s["genie"] > s["combined"] + 3 * math.hypot(e["genie"], e["combined"]):
                fails.append(f"{x}: simulated genie > combined")
            lo = min(("push", "pull"), key=lambda k: s[k])
            if s["combined"] > s[lo] + 3 * math.hypot(e["combined"], e[lo]):
                fails.append(f"{x}: simulated combined > {lo}")
    return fails


def cmd_sweep(args, out: Path) -> tuple[int, dict[str, Any], list[str]]:
    fig = args.figure
    sim = None
    if args.simulate:
        sim = SimConfig(args.horizon, seed=args.seed)
    paradigms = tuple(args.paradigms.split(",")) if args.paradigms else ex.DEFAULT_PARADIGMS
    t0 = time.perf_counter()
    params: dict[str, Any] = {"figure": fig, "seed": args.seed}
    checks: dict[str, Any] = {}
    csv_path = out / f"{fig}.csv"

    if fig == "fig2":
        F = parse_values(args.values or "0.05..4:0.05")
        G = parse_values(args.G or "2,5,10,40,100,400")
        points, crossings = ex.run_fig2_gain_surface(F, G)
        ex.write_gain_csv(csv_path, points, crossings)
        params.update(F_values=F, G_values=G)
        checks["single_sign_change"] = all(c.sign_changes == 1 for c in crossings if c.G > 9 / 8)
        for c in crossings:
            print(f"G={c.G:g}: zero crossing at F={c.F_cross:.6f} (f*={c.f_star:.6f}), "
                  f"sign changes={c.sign_changes}")
    else:
        config = load_config(args.config, {})
        try:
            recipe, beta, costs = recipe_from_dict(config) if args.config else (None, None, ex.BASE_COSTS)
        except ValidationError as exc:
            raise InputError(str(exc)) from None
        if args.beta is not None:
            beta = args.beta
        if fig == "fig3":
            item = ItemParams(1.0, args.lam)
            betas = parse_values(args.values or "0.25..6:0.25")
            betas = [b * args.lam for b in betas] if args.per_lambda else betas
            spec = ex.fig3_spec(betas, item, costs, sim)
            rows = ex.run_sweep(spec, with_oracle=True)
            cross = ex.single_item_crossover(args.lam, costs)
            checks["crossover_y"] = cross
            params.update(ex.sweep_parameters(spec))
        elif fig == "fig4":
            betas = parse_values(args.values or "1..10")
            spec = ex.SweepSpec("beta", tuple(betas), recipe or ex.base_recipe(), costs=costs,
                                sim=sim, paradigms=paradigms)
            rows = ex.run_sweep(spec, jobs=args.jobs)
            params.update(ex.sweep_parameters(spec))
        elif fig == "fig5":
            alphas = parse_values(args.values or "-2..2:0.25")
            spec = ex.SweepSpec("zipf_alpha", tuple(alphas), recipe or ex.base_recipe(alpha=0.0),
                                beta=beta or ex.BASE_BETA, costs=costs, sim=sim,
                                paradigms=paradigms, buffer=args.B if args.B is not None else ex.BASE_BUFFER)
            rows = ex.run_sweep(spec, jobs=args.jobs)
            params.update(ex.sweep_parameters(spec))
        elif fig == "fig6":
            Bs = parse_values(args.B_values or args.values or "1..200", integer=True)
            spec = ex.SweepSpec("buffer_B", tuple(Bs), recipe or ex.base_recipe(),
                                beta=beta or ex.BASE_BETA, costs=costs, sim=sim, paradigms=paradigms)
            rows = ex.run_sweep(spec, jobs=args.jobs)
            params.update(ex.sweep_parameters(spec))
            pull = [ex.pivot(rows)[b]["pull"] for b in spec.values] if "pull" in paradigms else []
            checks["pull_non_increasing"] = all(b <= a + 1e-12 for a, b in zip(pull, pull[1:]))
        else:  # argparse restricts choices; kept for direct callers
            raise InputError(f"unknown figure {fig!r}")
        ex.write_sweep_csv(csv_path, rows)
        fails = _dominance_failures(rows)
        checks["dominance_failures"] = fails
        _print_sweep(rows)

    wall = time.perf_counter() - t0
    manifest_path = out / f"{fig}_manifest.json"
    ex.write_manifest(manifest_path, parameters=_jsonable(params), seed=args.seed, wall_time_s=wall)
    passed = not checks.get("dominance_failures") and checks.get("single_sign_change", True) \
        and checks.get("pull_non_increasing", True)
    code = EXIT_OK if (passed or not args.check) else EXIT_CHECK_FAILED
    return code, {"figure": fig, "checks": checks, "checks_passed": passed}, [str(csv_path), str(manifest_path)]


def _print_sweep(rows: list[ex.SweepRow]) -> None:
    table = ex.pivot(rows)
    names = list(next(iter(table.values())).keys())
    var = rows[0].sweep_variable
    print(f"{var:>10}  " + "  ".join(f"{n:>16}" for n in names))
    for x, costs in table.items():
        print(f"{x:>10.4g}  " + "  ".join(f"{costs[n]:>16.6g}" for n in names))


# --- oracle -------------------------------------------------------------------------

def _oracle_push(item: ItemParams, beta: float, costs: CostParams, vi: ViConfig) -> dict[str, Any]:
    sol = push_value_iteration(item, beta, costs, vi)
    analytic = push_optimal(item, beta, costs)
    cycle = sol.threshold + 1
    vi_cost = push_renewal_cost(cycle, item, beta, costs)
    gap = abs(vi_cost - analytic.cost) / analytic.cost
    bound = push_age_bound(item, beta, costs)
    return {
        "vi_cycle": cycle, "analytic_cycle": analytic.m_star, "vi_cost": vi_cost,
        "analytic_cost": analytic.cost, "relative_gap": gap, "age_bound": bound,
        "max_sweep_threshold": sol.max_sweep_threshold, "sweeps": sol.sweeps,
        "state_cap": sol.state_cap,
        "passed": bool(sol.is_threshold and gap < 0.01 and sol.max_sweep_threshold <= bound),
    }


def _oracle_pull(item: ItemParams, beta: float, costs: CostParams, vi: ViConfig) -> dict[str, Any]:
    bp = beta * item.p
    sol = pull_value_iteration(item, beta, costs, vi)
    analytic = pull_optimal(item, beta, costs)
    tau_grid, cost_grid = pull_grid_search(item, beta, costs)
    _, cost_refined = pull_refined_minimum(item, beta, costs)
    epoch_gap = abs(sol.threshold_time - analytic.tau_star)
    return {
        "vi_tau": sol.threshold_time, "analytic_tau": analytic.tau_star, "epoch": 1.0 / bp,
        "vi_cost": pull_renewal_cost(sol.threshold_time, item, beta, costs),
        "analytic_cost": analytic.cost, "grid_tau": tau_grid, "grid_cost": cost_grid,
        "refined_cost": cost_refined, "state_cap": sol.state_cap, "sweeps": sol.sweeps,
        "passed": bool(
            sol.is_threshold
            and epoch_gap <= 1.0 / bp
            and abs(tau_grid - analytic.tau_star) <= 1e-3
            and abs(cost_refined - analytic.cost) <= 1e-6 * analytic.cost
        ),
    }


def cmd_oracle(args, out: Path) -> tuple[int, dict[str, Any], list[str]]:
    config = load_config(args.config, {})
    catalog, _, _ = catalog_from_config(config)
    q = args.q if args.q is not None else (0.999 if args.which == "push" else 0.9999)
    vi = ViConfig(discount_q=q, state_cap=args.state_cap)
    check = _oracle_push if args.which == "push" else _oracle_pull
    indices = range(min(len(catalog), args.max_items))
    reports = []
    for n in indices:
        it = catalog.items[n]
        try:
            rep = check(it, catalog.beta, catalog.costs, vi)
        except (PreconditionError, StructureError, ConvergenceError) as exc:
            rep = {"passed": False, "error": f"{type(exc).__name__}: {exc}"}
        rep["item"] = n
        reports.append(rep)
        status = "PASS" if rep["passed"] else "FAIL"
        detail = rep.get("error") or ", ".join(
            f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
            for k, v in rep.items() if k not in ("passed", "item")
        )
        print(f"item {n} {args.which}: {status}  {detail}")
    passed = all(r["passed"] for r in reports)
    code = EXIT_OK if passed else EXIT_CHECK_FAILED
    return code, {"which": args.which, "q": q, "reports": reports, "passed": passed}, []


# --- driver -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="catalog JSON document")
    common.add_argument("--out", metavar="DIR", default="freshcache_out", help="output directory")
    common.add_argument("--seed", type=int, default=None, help="U64 seed (fallback: $FRESHCACHE_SEED, then 0)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for simulation")
    common.add_argument("--strict", action="store_true", help="treat soft failures as errors")

    parser = argparse.ArgumentParser(prog="freshcache", description=__doc__.splitlines()[0],
                                     parents=[common])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="per-item analytic report")
    p.add_argument("--B", type=int, default=None, help="buffer size (overrides config buffer_B)")
    p.add_argument("--show", type=int, default=20, help="rows to print")

    p = sub.add_parser("simulate", parents=[common], help="Monte-Carlo run of one policy family")
    p.add_argument("--policy", required=True,
                   help="push:M | pull:TAU | genie:ETA | always | never | push:auto | pull:auto | genie:auto")
    p.add_argument("--horizon", type=float, default=1e5)
    p.add_argument("--batches", type=int, default=20)

    p = sub.add_parser("sweep", parents=[common], help="regenerate a figure's data table")
    p.add_argument("figure", choices=["fig2", "fig3", "fig4", "fig5", "fig6"])
    p.add_argument("--values", help="sweep values: a,b,c or lo..hi[:step]")
    p.add_argument("--G", help="fig2: G values")
    p.add_argument("--B", dest="B_values", help="fig6: buffer sizes, e.g. 1..200")
    p.add_argument("--buffer", dest="B", type=int, default=None, help="fig5: buffer size")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--lam", type=float, default=1.0, help="fig3: item refresh rate")
    p.add_argument("--per-lambda", action="store_true", help="fig3: values are beta/lam ratios")
    p.add_argument("--paradigms", help="comma-separated subset of " + ",".join(ex.PARADIGMS))
    p.add_argument("--simulate", action="store_true", help="add simulated totals")
    p.add_argument("--horizon", type=float, default=2e5)
    p.add_argument("--check", action="store_true", help="exit nonzero when ordering checks fail")

    p = sub.add_parser("oracle", parents=[common], help="value-iteration and renewal cross-check")
    p.add_argument("--which", choices=["push", "pull"], required=True)
    p.add_argument("--q", type=float, default=None, help="discount (default 0.999 push, 0.9999 pull)")
    p.add_argument("--state-cap", type=int, default=None)
    p.add_argument("--max-items", type=int, default=20)
    return parser


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "sweep": cmd_sweep, "oracle": cmd_oracle}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    summary: dict[str, Any] = {}
    outputs: list[str] = []
    try:
        args.seed = resolve_seed(args.seed)
        code, summary, outputs = COMMANDS[args.command](args, out)
    except (InputError, ValidationError, PreconditionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code, summary = EXIT_BAD_INPUT, {"error": str(exc)}
    effective = summary.pop("config", None) or {}
    manifest = RunManifest(
        command=args.command,
        config_digest=config_digest(effective),
        seed=args.seed if isinstance(args.seed, int) else 0,
        started=started,
        finished=_now(),
        outputs=outputs,
        effective_config=effective,
    )
    doc = {"exit_code": code, "manifest": asdict(manifest), **summary}
    (out / "summary.json").write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
