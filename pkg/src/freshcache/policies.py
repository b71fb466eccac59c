"""Per-item refresh policies executed by the simulator.

Push policies act on back-end update events and see only the age of the
cached copy. Pull policies act on request events and see only the time
elapsed since the last fetch. The genie sees both and acts on requests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Union

from .model import ItemState, ValidationError


@dataclass(frozen=True)
class PushCycle:
    """Push a fresh copy at the update that brings the age to ``m``."""

    m: int
    kind = "push"

    def __post_init__(self):
        if isinstance(self.m, bool) or not isinstance(self.m, int) or self.m < 1:
            raise ValidationError("m", f"push cycle length must be an integer >= 1, got {self.m!r}")

    @property
    def param(self) -> float:
        return self.m


@dataclass(frozen=True)
class PullThreshold:
    """Fetch on a request once more than ``tau`` time has passed since the last fetch."""

    tau: float
    kind = "pull"

    def __post_init__(self):
        if not (0.0 <= self.tau < math.inf):
            raise ValidationError("tau", f"must be finite and >= 0, got {self.tau!r}")

    @property
    def param(self) -> float:
        return self.tau


@dataclass(frozen=True)
class GenieThreshold:
    """Fetch on a request when the age exceeds ``eta``."""

    eta: int
    kind = "genie"

    def __post_init__(self):
        if isinstance(self.eta, bool) or not isinstance(self.eta, int) or self.eta < 0:
            raise ValidationError("eta", f"must be an integer >= 0, got {self.eta!r}")

    @property
    def param(self) -> float:
        return self.eta


@dataclass(frozen=True)
class AlwaysFetch:
    kind = "always"
    param = math.nan


@dataclass(frozen=True)
class NeverFetch:
    kind = "never"
    param = math.nan


PolicySpec = Union[PushCycle, PullThreshold, GenieThreshold, AlwaysFetch, NeverFetch]


@dataclass(frozen=True)
class PolicyDecision:
    fetch: bool
    serve_age: int


def push_cycle(m: float) -> PolicySpec:
    return NeverFetch() if m == math.inf else PushCycle(int(m))


def pull_threshold(tau: float) -> PolicySpec:
    return NeverFetch() if tau == math.inf else PullThreshold(float(tau))


def genie_threshold(eta: float) -> PolicySpec:
    return NeverFetch() if eta == math.inf else GenieThreshold(int(eta))


def _push_fetch(m: int, age: int) -> bool:
    return age >= m


def _pull_fetch(tau: float, elapsed: float) -> bool:
    return elapsed > tau


def _genie_fetch(eta: int, age: int) -> bool:
    return age > eta


def on_update(spec: PolicySpec, state: ItemState) -> bool:
    """Decision at a back-end update; ``state.age`` already includes it."""
    if isinstance(spec, PushCycle):
        return _push_fetch(spec.m, state.age)
    return False


def on_request(spec: PolicySpec, state: ItemState) -> PolicyDecision:
    if isinstance(spec, PullThreshold):
        fetch = _pull_fetch(spec.tau, state.elapsed)
    elif isinstance(spec, GenieThreshold):
        fetch = _genie_fetch(spec.eta, state.age)
    elif isinstance(spec, AlwaysFetch):
        fetch = True
    else:
        fetch = False
    return PolicyDecision(fetch, 0 if fetch else state.age)


# --- serialization -------------------------------------------------------------

def policy_to_dict(spec: PolicySpec) -> dict[str, Any]:
    d: dict[str, Any] = {"kind": spec.kind}
    if isinstance(spec, PushCycle):
        d["m"] = spec.m
    elif isinstance(spec, PullThreshold):
        d["tau"] = spec.tau
    elif isinstance(spec, GenieThreshold):
        d["eta"] = spec.eta
    return d


def policy_from_dict(d: dict[str, Any]) -> PolicySpec:
    kind = d.get("kind")
    try:
        if kind == "push":
            return push_cycle(d["m"])
        if kind == "pull":
            return pull_threshold(float(d["tau"]))
        if kind == "genie":
            return genie_threshold(d["eta"])
    except KeyError as exc:
        raise ValidationError(str(kind), f"missing parameter {exc.args[0]!r}") from None
    if kind == "always":
        return AlwaysFetch()
    if kind == "never":
        return NeverFetch()
    raise ValidationError("kind", f"unknown policy kind {kind!r}")


def parse_policy(text: str) -> PolicySpec:
    """Parse the CLI form ``push:6``, ``pull:2.3``, ``genie:5``, ``always``, ``never``."""
    kind, _, arg = text.partition(":")
    if kind in ("always", "never") and not arg:
        return policy_from_dict({"kind": kind})
    key = {"push": "m", "pull": "tau", "genie": "eta"}.get(kind)
    if key is None or not arg:
        raise ValidationError("policy", f"cannot parse {text!r}")
    try:
        value: float = float(arg) if kind == "pull" else int(arg)
    except ValueError:
        raise ValidationError("policy", f"bad parameter in {text!r}") from None
    return policy_from_dict({"kind": kind, key: value})
