"""Result records and the loss registry shared by the estimators and harness."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError
from .metrics import bures_sq, hellinger_sq, qre
from .states import BlochState

__all__ = [
    "LOSSES",
    "RiskEstimate",
    "SweepResult",
    "ScalingFit",
    "eigen_hellinger",
    "resolve_loss",
    "fingerprint",
    "summarize_losses",
]


def eigen_hellinger(truth: BlochState, estimate: BlochState) -> float:
    """Squared Hellinger distance between the two spectra."""
    return hellinger_sq(truth.lam, estimate.lam)


def _qre_truth_first(truth: BlochState, estimate: BlochState) -> float:
    return qre(truth, estimate)


# every loss is called as loss(truth, estimate)
LOSSES: dict[str, Callable[[BlochState, BlochState], float]] = {
    "bures": bures_sq,
    "qre": _qre_truth_first,
    "hellinger": eigen_hellinger,
}


def resolve_loss(name: str):
    try:
        return LOSSES[name]
    except KeyError:
        raise DomainError(f"unknown loss {name!r}; choose from {sorted(LOSSES)}") from None


def _canonical(obj):
    if isinstance(obj, float):
        return float.hex(obj)
    if isinstance(obj, (np.floating,)):
        return float.hex(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_canonical(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(x) for x in obj]
    return obj


def fingerprint(config: dict) -> str:
    """Stable SHA-256 of a configuration mapping (floats hashed exactly)."""
    blob = json.dumps(_canonical(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class RiskEstimate:
    """Monte Carlo mean loss and its standard error.

    ``infinite_count`` trials with an infinite loss are excluded from
    ``mean`` and reported here instead; ``nudged_count`` counts pure
    estimates moved radially inward before evaluating the relative entropy.
    """

    mean: float
    stderr: float
    trials: int
    n: int
    loss_name: str
    estimator_name: str
    config_fingerprint: str
    infinite_count: int = 0
    nudged_count: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def summarize_losses(losses) -> tuple[float, float, int]:
    """Mean, standard error and number of infinite entries.

    Reduction runs over the full ordered array so the result does not depend
    on how trials were split across workers.
    """
    losses = np.asarray(losses, dtype=float)
    finite = np.isfinite(losses)
    vals = losses[finite]
    if vals.size == 0:
        return math.nan, math.nan, int(losses.size)
    mean = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    return mean, stderr, int(losses.size - vals.size)


@dataclass(frozen=True)
class SweepResult:
    """Risk at each grid state and the worst case among them."""

    grid: list
    per_state: list
    max_state: int
    max_risk: float

    @classmethod
    def from_estimates(cls, grid, per_state) -> "SweepResult":
        if not grid:
            raise DomainError("grid must be non-empty")
        means = np.array([e.mean for e in per_state])
        i = int(np.nanargmax(means))
        return cls(list(grid), list(per_state), i, float(means[i]))

    def to_dict(self) -> dict:
        return {
            "grid": [s.r.tolist() for s in self.grid],
            "per_state": [e.to_dict() for e in self.per_state],
            "max_state": self.max_state,
            "max_risk": self.max_risk,
        }


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares line through ``(log n, log max_risk)``."""

    ns: list
    max_risks: list
    slope: float
    intercept: float
    r_squared: float
    sweeps: list = field(default_factory=list, repr=False, compare=False)

    @classmethod
    def fit(cls, ns, max_risks, sweeps=()) -> "ScalingFit":
        ns = [int(n) for n in ns]
        if len(ns) < 3 or any(b <= a for a, b in zip(ns, ns[1:])):
            raise DomainError("need at least three strictly increasing sample sizes")
        x = np.log(np.asarray(ns, dtype=float))
        y = np.log(np.asarray(max_risks, dtype=float))
        slope, intercept = np.polyfit(x, y, 1)
        resid = y - (slope * x + intercept)
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
        return cls(ns, [float(r) for r in max_risks], float(slope), float(intercept), r2,
                   list(sweeps))

    def to_dict(self) -> dict:
        return {
            "ns": self.ns,
            "max_risks": self.max_risks,
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
        }
