"""Two-stage adaptive estimator with separate measurements.

Stage one measures each Pauli observable on ``n1/3`` copies and forms the
preliminary Bloch vector ``r~``.  Stage two measures ``sigma . r~/|r~|`` on
the remaining ``n2`` copies; with ``k`` outcomes equal to +1 the length of
the Bloch vector is estimated by ``2 p_hat - 1`` where
``p_hat = add_beta(n2, k)``.  The estimate points along ``r~`` (or against
it when ``p_hat < 1/2``).

Also provides the non-adaptive baseline: Pauli tomography on fixed axes
followed by radial projection onto the ball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .binomial import add_beta
from .errors import DomainError
from .records import RiskEstimate, fingerprint, resolve_loss, summarize_losses
from .states import (
    BlochState,
    bloch_from_counts,
    project_to_ball,
    sample_pauli_outcomes,
)

__all__ = [
    "LocalAdaptiveConfig",
    "LocalAdaptiveResult",
    "run_local_adaptive",
    "local_adaptive_risk",
    "run_naive_tomography",
]

_DEFAULT_AXIS = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class LocalAdaptiveConfig:
    """Copy budget of the adaptive estimator.

    ``n1 = 3 * round(fraction * n / 3)`` copies go to stage one so that every
    Pauli axis receives the same count; ``n2 = n - n1``.
    """

    n: int
    fraction: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.fraction < 1.0:
            raise DomainError("fraction must lie in (0, 1)")
        if self.n1 < 3 or self.n2 < 4:
            raise DomainError(f"n={self.n} is too small for fraction {self.fraction}")

    @property
    def n1(self) -> int:
        return 3 * round(self.fraction * self.n / 3)

    @property
    def n2(self) -> int:
        return self.n - self.n1


@dataclass(frozen=True, eq=False)
class LocalAdaptiveResult:
    estimate: BlochState
    prelim_direction: np.ndarray
    k_plus: int
    p_hat: float


def run_local_adaptive(truth: BlochState, config: LocalAdaptiveConfig, rng) -> LocalAdaptiveResult:
    counts = sample_pauli_outcomes(truth, config.n1 // 3, rng)
    rt = bloch_from_counts(counts)
    nrm = math.sqrt(float(rt @ rt))
    # a zero preliminary vector has no direction; fall back to +z
    axis = rt / nrm if nrm > 0 else _DEFAULT_AXIS
    p = min(max(0.5 * (1.0 + float(truth.r @ axis)), 0.0), 1.0)
    k = int(rng.binomial(config.n2, p))
    p_hat = add_beta(config.n2, k)
    return LocalAdaptiveResult(BlochState((2.0 * p_hat - 1.0) * axis), axis, k, p_hat)


def local_adaptive_risk(
    truth: BlochState,
    config: LocalAdaptiveConfig,
    trials: int,
    loss: str = "bures",
    rng=None,
    estimator=None,
) -> RiskEstimate:
    """Monte Carlo risk of the adaptive estimator at ``truth``.

    Each trial draws from its own child stream of ``rng``.  ``estimator`` may
    replace the procedure by any ``f(truth, config, rng) -> BlochState``.
    """
    if trials < 100:
        raise DomainError("need at least 100 trials")
    rng = np.random.default_rng() if rng is None else rng
    loss_fn = resolve_loss(loss)
    if estimator is None:
        estimator = lambda t, c, g: run_local_adaptive(t, c, g).estimate
    losses = np.array([loss_fn(truth, estimator(truth, config, child))
                       for child in rng.spawn(trials)])
    mean, stderr, n_inf = summarize_losses(losses)
    seq = rng.bit_generator.seed_seq
    fp = fingerprint({
        "estimator": "local", "n": config.n, "fraction": config.fraction,
        "truth": truth.r, "trials": trials, "loss": loss,
        "entropy": str(seq.entropy), "spawn_key": list(seq.spawn_key),
    })
    return RiskEstimate(mean, stderr, trials, config.n, loss, "local", fp, n_inf)


def run_naive_tomography(truth: BlochState, n: int, rng) -> BlochState:
    """Pauli tomography with ``n // 3`` copies per axis, projected to the ball."""
    counts = sample_pauli_outcomes(truth, n // 3, rng)
    return project_to_ball(bloch_from_counts(counts))
