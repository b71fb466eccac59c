"""Continuous-time Monte-Carlo simulation of one or many cached items.

Requests (rate beta*p) and back-end updates (rate lam) are independent
Poisson streams. Every stream draws from its own PCG64 generator keyed by
``SeedSequence(seed, spawn_key=(item_index, stream))`` with stream 0 for
requests and 1 for updates, so streams never collide across items.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import Catalog, CostParams, ItemParams, ItemState, ValidationError
from .policies import PolicySpec, on_request, on_update

REQUEST_STREAM = 0
UPDATE_STREAM = 1
MIN_REPORTED_REQUESTS = 10_000

CSV_COLUMNS = [
    "item_index",
    "policy_kind",
    "param",
    "avg_cost",
    "fetch_rate",
    "aging_rate",
    "std_error",
    "fetch_count",
    "request_count",
    "update_count",
    "seed",
    "horizon",
]


@dataclass(frozen=True)
class SimConfig:
    horizon: float
    seed: int = 0
    warmup_fraction: float = 0.1
    batch_count: int = 20

    def __post_init__(self):
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValidationError("horizon", f"must be finite and > 0, got {self.horizon}")
        if not (0 <= self.warmup_fraction < 1):
            raise ValidationError("warmup_fraction", f"must lie in [0, 1), got {self.warmup_fraction}")
        if self.batch_count < 2:
            raise ValidationError("batch_count", f"must be >= 2, got {self.batch_count}")
        if not (0 <= self.seed < 2**64):
            raise ValidationError("seed", "must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class SimResult:
    """Measured cost rates over the post-warmup window.

    Counts cover the measurement window only. ``batch_means`` holds the
    per-batch total cost rates behind ``std_error``.
    """

    avg_cost: float
    fetch_cost_rate: float
    aging_cost_rate: float
    fetch_count: int
    request_count: int
    update_count: int
    std_error: float
    batch_means: tuple[float, ...] = ()
    window: float = 0.0
    item_index: int = 0
    policy_kind: str = ""
    param: float = math.nan
    seed: int = 0
    horizon: float = 0.0
    flags: tuple[str, ...] = ()

    @property
    def converged(self) -> bool:
        return "non_convergent" not in self.flags

    def to_row(self) -> dict:
        return {
            "item_index": self.item_index,
            "policy_kind": self.policy_kind,
            "param": self.param,
            "avg_cost": self.avg_cost,
            "fetch_rate": self.fetch_cost_rate,
            "aging_rate": self.aging_cost_rate,
            "std_error": self.std_error,
            "fetch_count": self.fetch_count,
            "request_count": self.request_count,
            "update_count": self.update_count,
            "seed": self.seed,
            "horizon": self.horizon,
        }


@dataclass(frozen=True)
class CatalogSimResult:
    items: list[SimResult]
    aggregate: SimResult = field(repr=False)


def stream_rng(seed: int, item_index: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(item_index, stream))
    return np.random.Generator(np.random.PCG64(ss))


def poisson_times(rng: np.random.Generator, rate: float, horizon: float) -> np.ndarray:
    """Arrival times in [0, horizon) of a rate-``rate`` Poisson process."""
    if rate <= 0:
        return np.empty(0)
    chunk = int(rate * horizon + 6.0 * math.sqrt(rate * horizon) + 16)
    parts = []
    t0 = 0.0
    while True:
        times = t0 + np.cumsum(rng.exponential(1.0 / rate, size=chunk))
        if times[-1] >= horizon:
            parts.append(times[times < horizon])
            break
        parts.append(times)
        t0 = times[-1]
    return np.concatenate(parts)


def batch_statistics(values: np.ndarray, times: np.ndarray, start: float, end: float, batches: int):
    """Batch-means rates of cost ``values`` charged at ``times`` in [start, end)."""
    width = (end - start) / batches
    idx = np.minimum(((times - start) / width).astype(np.int64), batches - 1)
    sums = np.bincount(idx, weights=values, minlength=batches)
    means = sums / width
    se = float(np.std(means, ddof=1) / math.sqrt(batches))
    return means, se


def trend_score(means: Sequence[float]) -> float:
    """Kendall-style concordance of batch means with batch order, in [-1, 1]."""
    m = np.asarray(means)
    k = len(m)
    if k < 2:
        return 0.0
    diff = np.sign(m[None, :] - m[:, None])
    upper = np.triu_indices(k, 1)
    return float(diff[upper].sum() / len(upper[0]))


def _flags(result_requests: int, means: np.ndarray, degenerate: bool) -> tuple[str, ...]:
    flags = []
    if degenerate:
        flags.append("degenerate")
    if len(means) >= 4 and trend_score(means) > 0.8:
        flags.append("non_convergent")
    if result_requests < MIN_REPORTED_REQUESTS:
        flags.append("low_event_count")
    return tuple(flags)


def simulate_item(
    item: ItemParams,
    beta: float,
    costs: CostParams,
    spec: PolicySpec,
    config: SimConfig,
    item_index: int = 0,
) -> SimResult:
    bp = beta * item.p
    horizon = config.horizon
    start = config.warmup_fraction * horizon
    window = horizon - start
    meta = dict(
        item_index=item_index,
        policy_kind=spec.kind,
        param=float(spec.param),
        seed=config.seed,
        horizon=horizon,
        window=window,
    )
    if bp + item.lam == 0:
        zeros = tuple([0.0] * config.batch_count)
        return SimResult(0.0, 0.0, 0.0, 0, 0, 0, 0.0, zeros, flags=("degenerate",), **meta)

    req = poisson_times(stream_rng(config.seed, item_index, REQUEST_STREAM), bp, horizon)
    upd = poisson_times(stream_rng(config.seed, item_index, UPDATE_STREAM), item.lam, horizon)
    # updates first so that (measure-zero) ties resolve update-before-request
    times = np.concatenate([upd, req])
    is_req = np.concatenate([np.zeros(len(upd), bool), np.ones(len(req), bool)])
    order = np.argsort(times, kind="stable")
    times = times[order]
    is_req = is_req[order]

    fetch_t, age_t, age_c = _run_events(times.tolist(), is_req.tolist(), spec, costs)

    fetch_t = np.asarray(fetch_t)
    age_t = np.asarray(age_t)
    age_c = np.asarray(age_c, dtype=float)
    fmask = fetch_t >= start
    amask = age_t >= start
    fetch_total = costs.c_f * int(fmask.sum())
    aging_total = float(age_c[amask].sum())

    all_t = np.concatenate([fetch_t[fmask], age_t[amask]])
    all_c = np.concatenate([np.full(int(fmask.sum()), costs.c_f), age_c[amask]])
    means, se = batch_statistics(all_c, all_t, start, horizon, config.batch_count)

    n_req = int(np.sum(req >= start))
    n_upd = int(np.sum(upd >= start))
    fetch_rate = fetch_total / window
    aging_rate = aging_total / window
    return SimResult(
        avg_cost=fetch_rate + aging_rate,
        fetch_cost_rate=fetch_rate,
        aging_cost_rate=aging_rate,
        fetch_count=int(fmask.sum()),
        request_count=n_req,
        update_count=n_upd,
        std_error=se,
        batch_means=tuple(float(x) for x in means),
        flags=_flags(n_req, means, False),
        **meta,
    )


def _run_events(times: list, is_req: list, spec: PolicySpec, costs: CostParams):
    """Drive ``spec`` through the merged event list.

    Returns fetch times plus the time and aging charge of every request
    served from the cache with a nonzero age.
    """
    state = ItemState()
    fetch_t: list[float] = []
    age_t: list[float] = []
    age_c: list[float] = []
    c_a = costs.c_a
    for t, r in zip(times, is_req):
        state.advance(t)
        if r:
            d = on_request(spec, state)
            if d.fetch:
                fetch_t.append(t)
                state.refresh()
            elif d.serve_age:
                age_t.append(t)
                age_c.append(c_a * d.serve_age)
        else:
            state.age += 1
            if on_update(spec, state):
                fetch_t.append(t)
                state.refresh()
    return fetch_t, age_t, age_c


def _simulate_job(args):
    item, beta, costs, spec, config, index = args
    return simulate_item(item, beta, costs, spec, config, item_index=index)


def aggregate_results(results: Sequence[SimResult], config: SimConfig) -> SimResult:
    means = np.sum([r.batch_means for r in results], axis=0)
    se = float(np.std(means, ddof=1) / math.sqrt(len(means)))
    fetch = math.fsum(r.fetch_cost_rate for r in results)
    aging = math.fsum(r.aging_cost_rate for r in results)
    n_req = sum(r.request_count for r in results)
    return SimResult(
        avg_cost=fetch + aging,
        fetch_cost_rate=fetch,
        aging_cost_rate=aging,
        fetch_count=sum(r.fetch_count for r in results),
        request_count=n_req,
        update_count=sum(r.update_count for r in results),
        std_error=se,
        batch_means=tuple(float(x) for x in means),
        window=results[0].window,
        item_index=-1,
        policy_kind="aggregate",
        seed=config.seed,
        horizon=config.horizon,
        flags=_flags(n_req, means, all("degenerate" in r.flags for r in results)),
    )


def simulate_catalog(
    catalog: Catalog, specs: Sequence[PolicySpec], config: SimConfig, jobs: int = 1
) -> CatalogSimResult:
    if len(specs) != len(catalog):
        raise ValidationError("specs", f"expected {len(catalog)} policies, got {len(specs)}")
    args = [
        (item, catalog.beta, catalog.costs, spec, config, n)
        for n, (item, spec) in enumerate(zip(catalog.items, specs))
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_simulate_job, args, chunksize=8))
    else:
        results = [_simulate_job(a) for a in args]
    return CatalogSimResult(results, aggregate_results(results, config))

