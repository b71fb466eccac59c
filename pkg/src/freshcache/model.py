"""Domain types shared by every part of the package.

An item is described by its request share ``p`` and its back-end update
rate ``lam``. A catalog bundles N items with the aggregate request rate
``beta`` and the fetch/aging cost pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

PROB_SUM_TOL = 1e-9


class ValidationError(ValueError):
    """Raised when a parameter is outside its admissible range."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ItemParams:
    p: float
    lam: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ValidationError("p", f"must lie in [0, 1], got {self.p}")
        if not (self.lam >= 0.0):
            raise ValidationError("lam", f"must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class CostParams:
    c_f: float = 1.0
    c_a: float = 0.1

    def __post_init__(self):
        if not (self.c_f > 0.0):
            raise ValidationError("c_f", f"must be > 0, got {self.c_f}")
        if not (self.c_a >= 0.0):
            raise ValidationError("c_a", f"must be >= 0, got {self.c_a}")

    @property
    def G(self) -> float:
        """Cost ratio 4*c_f/c_a used by the push/pull gain analysis."""
        return math.inf if self.c_a == 0 else 4.0 * self.c_f / self.c_a

    def scaled(self, k: float) -> CostParams:
        return CostParams(self.c_f * k, self.c_a * k)


@dataclass(frozen=True)
class Catalog:
    items: tuple[ItemParams, ...]
    beta: float
    costs: CostParams = field(default_factory=CostParams)

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if len(self.items) < 1:
            raise ValidationError("n_items", "catalog needs at least one item")
        if not (self.beta >= 0.0):
            raise ValidationError("beta", f"must be >= 0, got {self.beta}")
        total = math.fsum(it.p for it in self.items)
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValidationError("p", f"popularities sum to {total!r}, not 1")

    def __len__(self) -> int:
        return len(self.items)

    @property
    def p(self) -> np.ndarray:
        return np.array([it.p for it in self.items])

    @property
    def lam(self) -> np.ndarray:
        return np.array([it.lam for it in self.items])

    def request_rate(self, n: int) -> float:
        return self.beta * self.items[n].p


@dataclass(frozen=True)
class RefreshProfile:
    """How per-item update rates are assigned.

    ``constant`` gives every item ``lam``; ``zipf_weighted`` gives item n
    (1-based) a rate proportional to 1/n**alpha, rescaled so the mean is
    ``lambda_avg``; ``explicit`` lists the rates verbatim.
    """

    kind: str
    lam: float | None = None
    alpha: float | None = None
    lambda_avg: float | None = None
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind == "constant":
            if self.lam is None or not self.lam >= 0:
                raise ValidationError("refresh_profile.lambda", f"must be >= 0, got {self.lam}")
        elif self.kind == "zipf_weighted":
            if self.alpha is None or not math.isfinite(self.alpha):
                raise ValidationError("refresh_profile.alpha", "a finite exponent is required")
            if self.lambda_avg is None or not self.lambda_avg >= 0:
                raise ValidationError(
                    "refresh_profile.lambda_avg", f"must be >= 0, got {self.lambda_avg}"
                )
        elif self.kind == "explicit":
            if self.values is None:
                raise ValidationError("refresh_profile.values", "list of rates is required")
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
            if any(not v >= 0 for v in self.values):
                raise ValidationError("refresh_profile.values", "rates must be >= 0")
        else:
            raise ValidationError("refresh_profile.kind", f"unknown kind {self.kind!r}")

    @classmethod
    def constant(cls, lam: float) -> RefreshProfile:
        return cls("constant", lam=lam)

    @classmethod
    def zipf_weighted(cls, alpha: float, lambda_avg: float) -> RefreshProfile:
        return cls("zipf_weighted", alpha=alpha, lambda_avg=lambda_avg)

    @classmethod
    def explicit(cls, values: Sequence[float]) -> RefreshProfile:
        return cls("explicit", values=tuple(values))

    def rates(self, n_items: int) -> list[float]:
        if self.kind == "constant":
            return [float(self.lam)] * n_items
        if self.kind == "explicit":
            if len(self.values) != n_items:
                raise ValidationError(
                    "refresh_profile.values",
                    f"expected {n_items} rates, got {len(self.values)}",
                )
            return list(self.values)
        weights = [n ** -self.alpha for n in range(1, n_items + 1)]
        scale = self.lambda_avg * n_items / math.fsum(weights)
        return [w * scale for w in weights]

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind}
        if self.kind == "constant":
            d["lambda"] = self.lam
        elif self.kind == "zipf_weighted":
            d["alpha"] = self.alpha
            d["lambda_avg"] = self.lambda_avg
        else:
            d["values"] = list(self.values)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RefreshProfile:
        kind = d.get("kind")
        if kind == "constant":
            return cls.constant(_num(d, "lambda", "refresh_profile.lambda"))
        if kind == "zipf_weighted":
            return cls.zipf_weighted(
                _num(d, "alpha", "refresh_profile.alpha"),
                _num(d, "lambda_avg", "refresh_profile.lambda_avg"),
            )
        if kind == "explicit":
            vals = d.get("values")
            if not isinstance(vals, list):
                raise ValidationError("refresh_profile.values", "must be a list")
            return cls.explicit(vals)
        raise ValidationError("refresh_profile.kind", f"unknown kind {kind!r}")


@dataclass(frozen=True)
class CatalogRecipe:
    n_items: int
    zipf_popularity_z: float
    refresh_profile: RefreshProfile

    def __post_init__(self):
        if isinstance(self.n_items, bool) or not isinstance(self.n_items, (int, np.integer)):
            raise ValidationError("n_items", f"must be an integer, got {self.n_items!r}")
        if self.n_items < 1:
            raise ValidationError("n_items", f"must be >= 1, got {self.n_items}")
        if not math.isfinite(self.zipf_popularity_z):
            raise ValidationError("zipf_popularity_z", "must be finite")
        if self.refresh_profile.kind == "explicit":
            self.refresh_profile.rates(self.n_items)


def zipf_pmf(n_items: int, z: float) -> list[float]:
    """Zipf(z) probabilities over ranks 1..n_items; z=0 is uniform."""
    weights = [n ** -z for n in range(1, n_items + 1)]
    h = math.fsum(weights)
    return [w / h for w in weights]


def build_catalog(recipe: CatalogRecipe, beta: float, costs: CostParams) -> Catalog:
    p = zipf_pmf(recipe.n_items, recipe.zipf_popularity_z)
    lam = recipe.refresh_profile.rates(recipe.n_items)
    # float rounding can leave p slightly above 1 for a single item
    items = tuple(ItemParams(min(pi, 1.0), li) for pi, li in zip(p, lam))
    return Catalog(items, beta, costs)


@dataclass(slots=True)
class ItemState:
    """Mutable per-item state owned by one simulation run.

    ``age`` counts back-end updates since the last fetch and ``elapsed`` is
    the time since that fetch.
    """

    age: int = 0
    elapsed: float = 0.0
    last_event_time: float = 0.0

    def advance(self, t: float) -> None:
        self.elapsed += t - self.last_event_time
        self.last_event_time = t

    def refresh(self) -> None:
        self.age = 0
        self.elapsed = 0.0


# --- JSON config -------------------------------------------------------------

def _num(d: dict[str, Any], key: str, name: str | None = None) -> float:
    name = name or key
    if key not in d:
        raise ValidationError(name, "missing")
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(name, f"must be a number, got {v!r}")
    return float(v)


def recipe_to_dict(recipe: CatalogRecipe, beta: float, costs: CostParams) -> dict[str, Any]:
    return {
        "n_items": recipe.n_items,
        "zipf_popularity_z": recipe.zipf_popularity_z,
        "refresh_profile": recipe.refresh_profile.to_dict(),
        "beta": beta,
        "c_f": costs.c_f,
        "c_a": costs.c_a,
    }


def recipe_from_dict(d: dict[str, Any]) -> tuple[CatalogRecipe, float, CostParams]:
    if not isinstance(d, dict):
        raise ValidationError("config", "top-level JSON value must be an object")
    n = d.get("n_items")
    if isinstance(n, bool) or not isinstance(n, int):
        raise ValidationError("n_items", f"must be an integer, got {n!r}")
    rp = d.get("refresh_profile")
    if not isinstance(rp, dict):
        raise ValidationError("refresh_profile", "must be an object")
    recipe = CatalogRecipe(n, _num(d, "zipf_popularity_z"), RefreshProfile.from_dict(rp))
    costs = CostParams(_num(d, "c_f"), _num(d, "c_a"))
    return recipe, _num(d, "beta"), costs
