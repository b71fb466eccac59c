"""Independent checks of the analytic thresholds.

Two routes that share no code with ``analytic``:

* discounted value iteration on the embedded decision chains, sampled at
  update epochs (push) or request epochs (pull);
* renewal-reward evaluation of threshold policies with exhaustive or grid
  search over the threshold.

Push chain. States are the age after an update. Serving until the next
update costs ``(beta*p/lam) * c_a * age`` in expectation (requests per
update sojourn times the per-request aging charge); pushing costs ``c_f``
and leaves age 0 for the sojourn, so the next state is 1.

Pull chain. States are request epochs ``k = 1, 2, ...`` since the last
fetch, with elapsed-time proxy ``s = k/(beta*p)``. Serving costs
``lam * c_a * s``; fetching costs ``c_f`` and restarts at ``k = 1``.

Both chains are truncated at ``state_cap`` with the fetch action forced at
the cap. Truncation is exact once the converged threshold lies below the
cap, because fetching is then optimal at the cap anyway.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from numba import njit
from scipy.optimize import minimize_scalar

from .model import CostParams, ItemParams


class StructureError(RuntimeError):
    """Value iteration produced a policy that is not of threshold type."""


class ConvergenceError(RuntimeError):
    pass


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class ViConfig:
    discount_q: float = 0.999
    state_cap: int | None = None
    sweep_count: int = 2_000_000
    tolerance: float = 1e-9

    def __post_init__(self):
        if not (0 < self.discount_q < 1):
            raise PreconditionError(f"discount_q must lie in (0, 1), got {self.discount_q}")
        if self.state_cap is not None and self.state_cap < 2:
            raise PreconditionError(f"state_cap must be >= 2, got {self.state_cap}")
        if not self.tolerance > 0:
            raise PreconditionError("tolerance must be > 0")


@dataclass(frozen=True)
class ViSolution:
    """Converged values and greedy actions over states ``0..state_cap``.

    ``threshold`` is the largest state whose action is 0 (fetch happens
    strictly above it). ``max_sweep_threshold`` is the largest threshold
    seen in any sweep, for the uniform-bound check.
    """

    values: np.ndarray
    policy: np.ndarray
    threshold: int
    is_threshold: bool
    sweeps: int
    state_cap: int
    max_sweep_threshold: int
    epoch_width: float = 1.0

    @property
    def threshold_time(self) -> float:
        """Pull only: threshold epoch converted to elapsed time."""
        return self.threshold * self.epoch_width

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["state", "value", "action"])
            for s, (v, a) in enumerate(zip(self.values, self.policy)):
                w.writerow([s, repr(float(v)), int(a)])


def push_age_bound(item: ItemParams, beta: float, costs: CostParams) -> int:
    """Uniform bound floor(lam*c_f/(beta*p*c_a)) + 1 on every sweep's age threshold."""
    return math.floor(item.lam * costs.c_f / (beta * item.p * costs.c_a)) + 1


def pull_epoch_cost(k: int, r: int, item: ItemParams, beta: float, costs: CostParams) -> float:
    """Aging charge at epoch ``k`` of the pull chain; request-free epochs (r=0) cost nothing."""
    return r * item.lam * costs.c_a * k / (beta * item.p)


def _sweeps(weight: float, c_f: float, q: float, cap: int, first_state: int) -> Iterator:
    """Yield (values, actions) after each value-iteration sweep.

    ``weight * state`` is the serve cost; ``first_state`` is where the chain
    restarts after a fetch.
    """
    states = np.arange(cap + 1, dtype=float)
    serve_cost = weight * states
    v = np.zeros(cap + 1)
    nxt = np.empty(cap + 1)
    while True:
        nxt[:-1] = v[1:]
        nxt[-1] = v[-1]
        keep = serve_cost + q * nxt
        keep[-1] = np.inf
        fetch = c_f + q * v[first_state]
        act = fetch < keep
        v = np.where(act, fetch, keep)
        yield v, act


@njit(cache=True)
def _vi_kernel(weight, c_f, q, cap, first, tol, max_sweeps):
    """Sweep until the sup-norm change drops below ``tol``.

    Checks threshold structure and monotonicity in the state after every
    sweep. Status: 0 converged, 1 non-threshold, 2 non-monotone, 3 sweep
    budget exhausted.
    """
    v = np.zeros(cap + 1)
    nv = np.zeros(cap + 1)
    act = np.zeros(cap + 1, dtype=np.bool_)
    max_thr = 0
    thr = 0
    for sweep in range(1, max_sweeps + 1):
        fetch = c_f + q * v[first]
        delta = 0.0
        first_fetch = -1
        structured = True
        vmax = 0.0
        for s in range(cap + 1):
            if s < cap:
                keep = weight * s + q * v[s + 1]
            else:
                keep = np.inf
            a = fetch < keep
            act[s] = a
            nv[s] = fetch if a else keep
            if s >= first:
                if a:
                    if first_fetch < 0:
                        first_fetch = s
                elif first_fetch >= 0:
                    structured = False
            d = abs(nv[s] - v[s])
            if d > delta:
                delta = d
            if abs(nv[s]) > vmax:
                vmax = abs(nv[s])
        thr = first_fetch - 1
        if not structured:
            return nv, act, thr, sweep, max_thr, 1
        if thr > max_thr:
            max_thr = thr
        for s in range(first, cap):
            if nv[s + 1] < nv[s] - 1e-12 * (1.0 + vmax):
                return nv, act, thr, sweep, max_thr, 2
        v, nv = nv, v
        if sweep > 1 and delta < tol:
            return v, act, thr, sweep, max_thr, 0
    return v, act, thr, max_sweeps, max_thr, 3


def _value_iteration(weight, c_f, config: ViConfig, cap: int, first: int):
    v, act, thr, sweeps, max_thr, status = _vi_kernel(
        float(weight), float(c_f), config.discount_q, int(cap), first,
        config.tolerance, config.sweep_count,
    )
    if status == 1:
        raise StructureError(f"non-threshold policy at sweep {sweeps}")
    if status == 2:
        raise StructureError(f"value not monotone in state at sweep {sweeps}")
    if status == 3:
        raise ConvergenceError(f"no convergence within {config.sweep_count} sweeps")
    return v.copy(), act.copy(), int(thr), int(sweeps), int(max_thr)


def push_value_iteration(
    item: ItemParams, beta: float, costs: CostParams, config: ViConfig | None = None
) -> ViSolution:
    config = config or ViConfig()
    bp = beta * item.p
    if not (item.lam > 0 and bp > 0 and costs.c_a > 0):
        raise PreconditionError("push value iteration needs lam > 0, beta*p > 0 and c_a > 0")
    bound = push_age_bound(item, beta, costs)
    cap = config.state_cap if config.state_cap is not None else 4 * bound
    if cap <= bound + 1:
        raise PreconditionError(
            f"state_cap={cap} does not exceed the age-threshold bound {bound} + 1"
        )
    v, act, thr, sweeps, max_thr = _value_iteration(
        bp * costs.c_a / item.lam, costs.c_f, config, cap, 1
    )
    return ViSolution(v, act, thr, True, sweeps, cap, max_thr)


def iter_push_sweeps(
    item: ItemParams, beta: float, costs: CostParams, q: float, cap: int
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Raw push value-iteration sweeps v_1, v_2, ... with their greedy actions."""
    return _sweeps(beta * item.p * costs.c_a / item.lam, costs.c_f, q, cap, 1)


def iter_pull_sweeps(
    item: ItemParams, beta: float, costs: CostParams, q: float, cap: int
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Raw pull value-iteration sweeps over request epochs."""
    return _sweeps(item.lam * costs.c_a / (beta * item.p), costs.c_f, q, cap, 1)


def pull_value_iteration(
    item: ItemParams, beta: float, costs: CostParams, config: ViConfig | None = None
) -> ViSolution:
    """Pull-chain value iteration.

    With ``state_cap=None`` the cap starts at 64 epochs and doubles until
    the converged threshold sits below half the cap. An explicit cap that
    the threshold reaches raises ``PreconditionError``.
    """
    config = config or ViConfig()
    bp = beta * item.p
    if not (item.lam > 0 and bp > 0 and costs.c_a > 0):
        raise PreconditionError("pull value iteration needs lam > 0, beta*p > 0 and c_a > 0")
    weight = item.lam * costs.c_a / bp
    cap = config.state_cap or 64
    while True:
        v, act, thr, sweeps, max_thr = _value_iteration(
            weight, costs.c_f, config, cap, 1
        )
        if config.state_cap is not None:
            if thr + 1 >= cap:
                raise PreconditionError(f"state_cap={cap} binds: threshold reached the cap")
            break
        if 2 * (thr + 1) < cap:
            break
        cap *= 2
    return ViSolution(v, act, thr, True, sweeps, cap, max_thr, epoch_width=1.0 / bp)


# --- renewal-reward oracles ------------------------------------------------------

def push_renewal_cost(m: int, item: ItemParams, beta: float, costs: CostParams) -> float:
    """Cycle-average cost when pushing at the update that makes the age ``m``.

    Ages 0..m-1 each last one update sojourn (mean 1/lam) and see beta*p/lam
    requests on average; one push per cycle of m updates.
    """
    bp = beta * item.p
    aging = costs.c_a * (bp / item.lam) * sum(range(m))
    return (aging + costs.c_f) / (m / item.lam)


def push_brute_force(
    item: ItemParams, beta: float, costs: CostParams, m_max: int
) -> tuple[int, float]:
    bp = beta * item.p
    m_c = math.sqrt(2 * item.lam * costs.c_f / (bp * costs.c_a))
    if m_max < 2 * math.ceil(m_c):
        raise PreconditionError(f"m_max={m_max} is below 2*ceil({m_c:.4g})")
    ms = np.arange(1, m_max + 1)
    vals = (costs.c_a * (bp / item.lam) * ms * (ms - 1) / 2 + costs.c_f) * item.lam / ms
    best = int(np.argmin(vals))
    if best == len(ms) - 1:
        raise PreconditionError(f"minimum at m_max={m_max}; not bracketed")
    return int(ms[best]), float(vals[best])


def pull_renewal_cost(tau, item: ItemParams, beta: float, costs: CostParams):
    """Cycle-average cost of the pull policy with threshold ``tau``.

    A cycle is an aging phase of length tau, during which requests see mean
    age lam*s, followed by a memoryless wait 1/(beta*p) for the fetching
    request.
    """
    bp = beta * item.p
    tau = np.asarray(tau, dtype=float)
    out = (costs.c_a * item.lam * bp * tau**2 / 2 + costs.c_f) / (tau + 1.0 / bp)
    return out if out.ndim else float(out)


def pull_grid_search(
    item: ItemParams,
    beta: float,
    costs: CostParams,
    step: float = 1e-4,
    tau_max: float | None = None,
) -> tuple[float, float]:
    """Grid minimum of ``pull_renewal_cost`` on [0, tau_max] at spacing ``step``.

    The renewal cost is quasi-convex in tau (convex numerator over a linear
    denominator), so a coarse pass followed by a step-``step`` pass over the
    neighbouring coarse cells returns the same grid point as a full scan.
    ``tau_max`` defaults to c_f/(lam*c_a): past it a single served request
    already costs more than a fetch.
    """
    if tau_max is None:
        tau_max = costs.c_f / (item.lam * costs.c_a)
    n_fine = int(math.floor(tau_max / step))
    stride = max(1, n_fine // 100_000)
    coarse = np.arange(0, n_fine + 1, stride)
    i = int(np.argmin(pull_renewal_cost(coarse * step, item, beta, costs)))
    lo = int(coarse[max(i - 1, 0)])
    hi = int(coarse[min(i + 1, len(coarse) - 1)])
    fine = np.arange(lo, hi + 1)
    vals = pull_renewal_cost(fine * step, item, beta, costs)
    j = int(np.argmin(vals))
    return float(fine[j] * step), float(vals[j])


def pull_refined_minimum(
    item: ItemParams, beta: float, costs: CostParams, step: float = 1e-4
) -> tuple[float, float]:
    """Grid minimum polished by bounded Brent search within one grid step."""
    tau0, _ = pull_grid_search(item, beta, costs, step=step)
    res = minimize_scalar(
        lambda t: pull_renewal_cost(t, item, beta, costs),
        bounds=(max(0.0, tau0 - step), tau0 + step),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(res.x), float(res.fun)
