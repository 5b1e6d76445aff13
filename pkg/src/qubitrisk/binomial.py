"""Estimators of a binomial or Poisson parameter and their exact risks.

All risks here are computed by summation over the sampling distribution,
never by simulation.  Binomial sums run over the full support; Poisson sums
run over a window around the mean outside of which the Poisson tail mass is
below ``1e-12``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize, stats
from scipy.special import gammaln

from .errors import DomainError
from .metrics import hellinger_sq, kl

__all__ = [
    "AddBetaEstimator",
    "GammaPrior",
    "PoissonRiskPoint",
    "add_beta",
    "add_beta_table",
    "standard_table",
    "add_half_table",
    "estimator_table",
    "kl_risk_exact",
    "hellinger_risk_exact",
    "default_lambda_grid",
    "sup_risk",
    "poisson_window",
    "poisson_sqrt_risk",
    "bayes_sqrt_estimate",
    "bayes_sqrt_risk",
    "poisson_risk_curve",
    "bayes_risk_curve",
    "max_poisson_risk",
]

POISSON_TAIL = 1e-12
POISSON_REGIME_MUS = (0.5, 1.0, 1.11, 2.0, 5.0)


def _check_n(n):
    if int(n) != n or n < 4:
        raise DomainError(f"add-beta needs an integer n >= 4, got {n!r}")


def add_beta_table(n: int) -> np.ndarray:
    """Add-beta estimates for every ``k = 0..n``.

    Interior counts use ``(k + 3/4)/(n + 3/2)``; the two smallest and two
    largest counts get their own constants, symmetric under ``k -> n - k``.
    """
    _check_n(n)
    k = np.arange(n + 1, dtype=float)
    est = (k + 0.75) / (n + 1.5)
    est[0] = 0.5 / (n + 1.25)
    est[1] = 2.0 / (n + 1.75)
    est[n - 1] = (n - 0.25) / (n + 1.75)
    est[n] = (n + 0.75) / (n + 1.25)
    return est


def add_beta(n: int, k: int) -> float:
    """Add-beta estimate of a binomial success probability from ``k`` of ``n``."""
    _check_n(n)
    if int(k) != k or not 0 <= k <= n:
        raise DomainError(f"k={k!r} outside [0, {n}]")
    if k == 0:
        return 0.5 / (n + 1.25)
    if k == 1:
        return 2.0 / (n + 1.75)
    if k == n - 1:
        return (n - 0.25) / (n + 1.75)
    if k == n:
        return (n + 0.75) / (n + 1.25)
    return (k + 0.75) / (n + 1.5)


@dataclass(frozen=True)
class AddBetaEstimator:
    """Callable wrapper around ``add_beta`` for a fixed ``n``."""

    n: int

    def __post_init__(self):
        _check_n(self.n)

    def __call__(self, k):
        return self.table()[np.asarray(k)]

    def table(self) -> np.ndarray:
        return add_beta_table(self.n)


def standard_table(n: int) -> np.ndarray:
    """Relative frequencies ``k/n``."""
    return np.arange(n + 1, dtype=float) / n


def add_half_table(n: int) -> np.ndarray:
    """``(k + 1/2)/(n + 1)``, the usual regularisation of ``k/n``."""
    return (np.arange(n + 1, dtype=float) + 0.5) / (n + 1)


_NAMED = {"add-beta": add_beta_table, "standard": standard_table, "add-half": add_half_table}


def estimator_table(n: int, estimator) -> np.ndarray:
    """Resolve ``estimator`` into an array of estimates indexed by ``k``.

    ``estimator`` may be a name (``"add-beta"``, ``"standard"``,
    ``"add-half"``), an array of length ``n + 1``, or a callable
    ``f(n, k_array)``.
    """
    if isinstance(estimator, str):
        try:
            return _NAMED[estimator](n)
        except KeyError:
            raise DomainError(f"unknown estimator {estimator!r}") from None
    if callable(estimator):
        return np.asarray(estimator(n, np.arange(n + 1)), dtype=float)
    table = np.asarray(estimator, dtype=float)
    if table.shape != (n + 1,):
        raise DomainError(f"estimator table must have length {n + 1}")
    return table


def _binomial_risk(n, lam, estimator, loss, chunk=64):
    lam = np.asarray(lam, dtype=float)
    flat = np.atleast_1d(lam).ravel()
    if np.any((flat < 0) | (flat > 1)):
        raise DomainError("lam must lie in [0, 1]")
    table = estimator_table(n, estimator)
    k = np.arange(n + 1)
    out = np.empty(flat.size)
    for start in range(0, flat.size, chunk):
        lc = flat[start:start + chunk, None]
        pmf = stats.binom.pmf(k[None, :], n, lc)
        losses = loss(np.broadcast_to(lc, pmf.shape), table[None, :])
        # 0 * inf must not poison the sum: impossible outcomes carry no loss
        losses = np.where(pmf > 0, losses, 0.0)
        out[start:start + chunk] = np.sum(pmf * losses, axis=1)
    return float(out[0]) if lam.ndim == 0 else out.reshape(lam.shape)


def kl_risk_exact(n: int, lam, estimator="add-beta"):
    """``E_k KL((lam, 1-lam) || (est(k), 1-est(k)))`` for ``k ~ Bin(n, lam)``."""
    return _binomial_risk(n, lam, estimator, kl)


def hellinger_risk_exact(n: int, lam, estimator="add-beta"):
    """Expected squared Hellinger loss, exact binomial sum."""
    return _binomial_risk(n, lam, estimator, hellinger_sq)


def default_lambda_grid(n: int) -> np.ndarray:
    """400 log-spaced points in ``[1e-6, 1/2]`` plus ``mu/n`` for
    ``mu`` in the Poisson regime."""
    grid = np.geomspace(1e-6, 0.5, 400)
    extra = np.array(POISSON_REGIME_MUS) / n
    return np.unique(np.concatenate([grid, extra[extra <= 0.5]]))


def sup_risk(n: int, estimator="add-beta", loss: str = "kl", lambdas=None):
    """Maximum exact risk over a lambda grid.

    Returns
    -------
    sup : float
    lam_at_sup : float
    """
    lambdas = default_lambda_grid(n) if lambdas is None else np.asarray(lambdas, float)
    fn = {"kl": kl_risk_exact, "hellinger": hellinger_risk_exact}[loss]
    risks = fn(n, lambdas, estimator)
    i = int(np.argmax(risks))
    return float(risks[i]), float(lambdas[i])


@dataclass(frozen=True)
class GammaPrior:
    """Gamma prior on the Poisson mean with shape ``alpha`` and scale ``beta``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise DomainError("Gamma prior needs alpha > 0 and beta > 0")


@dataclass(frozen=True)
class PoissonRiskPoint:
    mu: float
    risk: float


def poisson_window(mu: float, tail: float = POISSON_TAIL) -> np.ndarray:
    """Counts ``k`` carrying all but ``tail`` of the Poisson(mu) mass."""
    lo = int(stats.poisson.ppf(0.5 * tail, mu))
    hi = int(stats.poisson.isf(0.5 * tail, mu)) + 1
    return np.arange(max(lo, 0), hi + 1)


def _poisson_expect(mu, f):
    k = poisson_window(mu)
    pmf = stats.poisson.pmf(k, mu)
    return float(np.sum(pmf * f(k)))


def _check_mu(mu):
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu!r}")


def poisson_sqrt_risk(mu: float) -> PoissonRiskPoint:
    """``R(mu) = E (sqrt(K) - sqrt(mu))^2`` for ``K ~ Poisson(mu)``.

    Equal to ``2 mu - 2 sqrt(mu) E sqrt(K)``; the squared form is summed
    directly to avoid cancellation at large ``mu``.
    """
    _check_mu(mu)
    s = math.sqrt(mu)
    return PoissonRiskPoint(mu, _poisson_expect(mu, lambda k: (np.sqrt(k) - s) ** 2))


def bayes_sqrt_estimate(k, prior: GammaPrior):
    """Posterior mean of ``sqrt(mu)`` given a Poisson count ``k``.

    ``Gamma(k + a + 1/2) / Gamma(k + a) * sqrt(b / (b + 1))``, evaluated
    through log-gamma differences.
    """
    k = np.asarray(k, dtype=float)
    a, b = prior.alpha, prior.beta
    est = np.exp(gammaln(k + a + 0.5) - gammaln(k + a)) * math.sqrt(b / (b + 1.0))
    return float(est) if est.ndim == 0 else est


def bayes_sqrt_risk(mu: float, prior: GammaPrior) -> PoissonRiskPoint:
    """Risk ``E (mu_hat_B^(1/2) - sqrt(mu))^2`` of the Bayes estimator."""
    _check_mu(mu)
    s = math.sqrt(mu)
    return PoissonRiskPoint(
        mu, _poisson_expect(mu, lambda k: (bayes_sqrt_estimate(k, prior) - s) ** 2)
    )


def poisson_risk_curve(mus) -> np.ndarray:
    return np.array([poisson_sqrt_risk(m).risk for m in np.asarray(mus, float)])


def bayes_risk_curve(mus, prior: GammaPrior) -> np.ndarray:
    return np.array([bayes_sqrt_risk(m, prior).risk for m in np.asarray(mus, float)])


def max_poisson_risk(bounds=(0.5, 2.0), prior: GammaPrior | None = None):
    """Locate the maximum of ``R(mu)`` (or ``R_B``) on an interval.

    Returns
    -------
    PoissonRiskPoint
        Location and value of the maximum.
    """
    if prior is None:
        f: Callable[[float], float] = lambda m: -poisson_sqrt_risk(m).risk
    else:
        f = lambda m: -bayes_sqrt_risk(m, prior).risk
    res = optimize.minimize_scalar(f, bounds=bounds, method="bounded",
                                   options={"xatol": 1e-9})
    return PoissonRiskPoint(float(res.x), float(-res.fun))
