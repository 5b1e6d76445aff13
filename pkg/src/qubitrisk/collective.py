"""Collective-measurement estimator built on local asymptotic normality.

The estimator spends ``n_prelim ~ n^(1-kappa)`` copies on Pauli tomography
to localise the state.  If the preliminary Bloch vector is short
(``|r~| <= delta``) the rest of the copies are used for Pauli tomography
with a maximum-likelihood fit on the ball.  Otherwise the remaining
``n2 = n - n_prelim`` copies undergo a which-block measurement (total spin
``j``), which estimates the small eigenvalue, followed by a heterodyne
measurement of the rotation parameters ``(u, v)`` in the frame of ``r~``.

The heterodyne is simulated in its Gaussian limit: the outcome is the true
``(u, v)`` plus independent normal noise of variance
``(1 - lam)/(2 (1 - 2 lam)^2)`` per component, at the true ``lam``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, xlogy

from .binomial import add_beta
from .errors import DomainError
from .metrics import bures_weight_bloch, bures_weight_local, fisher_pauli
from .states import (
    BlochState,
    LocalTheta,
    OutcomeCounts,
    Rotation,
    bloch_from_counts,
    local_coordinates,
    project_to_ball,
    reconstruct,
    sample_pauli_outcomes,
)

__all__ = [
    "BlockDistribution",
    "CollectiveConfig",
    "CollectiveResult",
    "HeterodyneModel",
    "block_distribution",
    "k_factor",
    "typical_blocks",
    "sample_block",
    "ml_bloch_estimate",
    "pauli_loglik",
    "run_collective",
    "collective_trial",
    "local_minimax_constant",
    "mixed_ball_bound",
    "pauli_tomography_constant",
]


@dataclass(frozen=True, eq=False)
class BlockDistribution:
    """Distribution of the total spin ``j`` of ``n`` qubits in state
    ``diag(1 - lam, lam)^(x n)``.

    Blocks are indexed by the integer ``twoj = 2 j`` running over
    ``n % 2, n % 2 + 2, ..., n``.  ``log_weights`` are the exact log
    probabilities (``-inf`` off the support); ``cdf`` is the normalised
    cumulative sum used for inverse-CDF sampling.
    """

    n: int
    lam: float
    twoj: np.ndarray
    log_weights: np.ndarray
    cdf: np.ndarray

    @property
    def j(self) -> np.ndarray:
        return 0.5 * self.twoj

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def log_pmf(self, j) -> np.ndarray:
        idx = (np.round(2 * np.asarray(j)).astype(int) - self.n % 2) // 2
        return self.log_weights[idx]


def _log_comb(n, k):
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def _freeze(*arrays):
    for a in arrays:
        a.flags.writeable = False


def _from_log_weights(n, lam, twoj, lw):
    w = np.exp(lw - np.max(lw))
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    _freeze(twoj, lw, cdf)
    return BlockDistribution(n, lam, twoj, lw, cdf)


def block_log_multiplicity(n: int, twoj) -> np.ndarray:
    """log of ``n_j = C(n, k) - C(n, k - 1)`` with ``k = n/2 - j``.

    Uses ``n_j = C(n, k) (2j + 1)/(n - k + 1)``.
    """
    twoj = np.asarray(twoj)
    k = (n - twoj) // 2
    return _log_comb(n, k) + np.log(twoj + 1.0) - np.log(n - k + 1.0)


@lru_cache(maxsize=256)
def block_distribution(n: int, lam: float) -> BlockDistribution:
    """Exact which-block distribution ``p_{n,lam}(j)`` in log space.

    ``log p = log n_j - log(1 - 2 lam) + k log lam + (n/2 + j + 1) log(1 - lam)
    + log(1 - p^(2j+1))`` with ``k = n/2 - j`` and ``p = lam/(1 - lam)``.
    At ``lam = 0`` all mass sits on ``j = n/2``.  Results are cached and
    immutable.
    """
    n = int(n)
    lam = float(lam)
    if n < 1:
        raise DomainError("n must be positive")
    if not 0.0 <= lam < 0.5:
        raise DomainError(f"lam={lam!r} outside [0, 1/2)")
    twoj = np.arange(n % 2, n + 1, 2)
    if lam == 0.0:
        lw = np.full(twoj.shape, -np.inf)
        lw[-1] = 0.0
        return _from_log_weights(n, lam, twoj, lw)
    k = (n - twoj) // 2
    log_p = math.log(lam) - math.log1p(-lam)
    lw = (
        block_log_multiplicity(n, twoj)
        - math.log1p(-2.0 * lam)
        + k * math.log(lam)
        + (n - k + 1) * math.log1p(-lam)
        + np.log(-np.expm1((twoj + 1) * log_p))
    )
    return _from_log_weights(n, lam, twoj, lw)


@lru_cache(maxsize=64)
def _block_distribution_mixed(n: int) -> BlockDistribution:
    # limit lam -> 1/2: p(j) = n_j (2j + 1) / 2^n
    twoj = np.arange(n % 2, n + 1, 2)
    lw = block_log_multiplicity(n, twoj) + np.log(twoj + 1.0) - n * math.log(2.0)
    return _from_log_weights(n, 0.5, twoj, lw)


def k_factor(j, n: int, lam: float):
    """Ratio ``p_{n,lam}(j) / Bin(n, lam)(n/2 - j)``.

    ``K = (1 - p^(2j+1)) (n + (2(j - j_n) + 1)/(1 - 2 lam))
    / (n + (j - j_n + 1)/(1 - lam))`` with ``j_n = n (1/2 - lam)``.
    """
    if not 0.0 < lam < 0.5:
        raise DomainError(f"lam={lam!r} outside (0, 1/2)")
    j = np.asarray(j, dtype=float)
    jn = n * (0.5 - lam)
    log_p = math.log(lam) - math.log1p(-lam)
    tail = -np.expm1((2 * j + 1) * log_p)
    out = tail * (n + (2 * (j - jn) + 1) / (1 - 2 * lam)) / (n + (j - jn + 1) / (1 - lam))
    return float(out) if out.ndim == 0 else out


def typical_blocks(n: int, lam: float, eps3: float = 0.1) -> np.ndarray:
    """Values of ``j`` within ``n^(1/2 + eps3)`` of ``j_n = n (1/2 - lam)``."""
    j = 0.5 * np.arange(n % 2, n + 1, 2)
    return j[np.abs(j - n * (0.5 - lam)) <= n ** (0.5 + eps3)]


def sample_block(dist: BlockDistribution, rng) -> float:
    """Draw ``j`` by inverting the CDF."""
    i = int(np.searchsorted(dist.cdf, rng.random(), side="right"))
    return 0.5 * dist.twoj[min(i, dist.twoj.size - 1)]


@dataclass(frozen=True)
class HeterodyneModel:
    """Gaussian-limit heterodyne readout of the rotation parameters."""

    lam: float

    def __post_init__(self):
        if not 0.0 <= self.lam < 0.5:
            raise DomainError(f"lam={self.lam!r} outside [0, 1/2)")

    @property
    def variance_per_component(self) -> float:
        return (1.0 - self.lam) / (2.0 * (1.0 - 2.0 * self.lam) ** 2)

    def sample(self, u: float, v: float, rng) -> tuple[float, float]:
        du, dv = math.sqrt(self.variance_per_component) * rng.standard_normal(2)
        return u + du, v + dv


@dataclass(frozen=True)
class CollectiveConfig:
    """Resource split of the collective estimator.

    Parameters
    ----------
    n : int
        Total number of copies.
    kappa : float
        The preliminary stage uses ``ceil(n^(1 - kappa))`` copies, rounded up
        to a multiple of three.
    delta : float
        Radius of the ball around the maximally mixed state handled by
        Pauli tomography.
    """

    n: int
    kappa: float = 0.3
    delta: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.kappa < 0.5:
            raise DomainError("kappa must lie in (0, 1/2)")
        if not 0.0 < self.delta < 0.5:
            raise DomainError("delta must lie in (0, 1/2)")
        if self.prelim_per_axis < 3:
            raise DomainError(f"n={self.n} leaves fewer than 9 preliminary copies")
        if self.n_second < 12:
            raise DomainError(f"n={self.n} leaves too few copies for stage two")

    @property
    def prelim_per_axis(self) -> int:
        return math.ceil(math.ceil(self.n ** (1.0 - self.kappa)) / 3)

    @property
    def n_prelim(self) -> int:
        return 3 * self.prelim_per_axis

    @property
    def n_second(self) -> int:
        return self.n - self.n_prelim


@dataclass(frozen=True, eq=False)
class CollectiveResult:
    """Estimate plus the intermediate quantities of one run.

    ``branch`` is ``"mixed"`` for the Pauli/ML branch and ``"local"``
    for the block + heterodyne branch.  ``j``, ``lam_hat`` and ``w_hat`` are
    ``None`` in the mixed branch.
    """

    estimate: BlochState
    branch: str
    prelim: BlochState
    j: float | None = None
    lam_hat: float | None = None
    w_hat: tuple | None = None


def pauli_loglik(r, counts: OutcomeCounts) -> float:
    """Product-binomial log-likelihood of Pauli counts (up to a constant)."""
    r = np.asarray(r, dtype=float)
    c = np.asarray(counts.plus_counts, dtype=float)
    m = counts.n_per_axis
    return float(np.sum(xlogy(c, 1.0 + r) + xlogy(m - c, 1.0 - r)))


def _loglik_grad(r, c, m):
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(c > 0, c / (1.0 + r), 0.0) - np.where(m - c > 0, (m - c) / (1.0 - r), 0.0)
    return g


def ml_bloch_estimate(
    counts: OutcomeCounts, tol: float = 1e-10, max_iter: int = 10_000
) -> BlochState:
    """Maximum-likelihood state for Pauli counts.

    The unconstrained maximiser is the linear-inversion vector; when it lies
    outside the ball the maximum is on the sphere and is found by projected
    gradient ascent with step halving, started from the radial projection.
    """
    raw = bloch_from_counts(counts)
    if raw @ raw <= 1.0:
        return BlochState(raw)
    c = np.asarray(counts.plus_counts, dtype=float)
    m = counts.n_per_axis
    r = raw / np.linalg.norm(raw)
    cur = pauli_loglik(r, counts)
    step = 1.0 / m
    for _ in range(max_iter):
        g = _loglik_grad(r, c, m)
        while True:
            cand = r + step * g
            cand /= max(np.linalg.norm(cand), 1.0)
            val = pauli_loglik(cand, counts)
            if val >= cur:
                break
            step *= 0.5
            if step < 1e-300:
                return BlochState(r)
        moved = np.linalg.norm(cand - r)
        r, cur = cand, val
        step *= 2.0
        if moved < tol:
            break
    return BlochState(r)


def collective_trial(truth: BlochState, config: CollectiveConfig, rng) -> CollectiveResult:
    """One run of the collective estimator with all intermediate outputs."""
    counts = sample_pauli_outcomes(truth, config.prelim_per_axis, rng)
    prelim = project_to_ball(bloch_from_counts(counts))
    n2 = config.n_second
    if prelim.norm <= config.delta:
        counts2 = sample_pauli_outcomes(truth, n2 // 3, rng)
        return CollectiveResult(ml_bloch_estimate(counts2), "mixed", prelim)

    frame = Rotation.aligning(prelim.r)
    if truth.norm == 0.0:
        # rotation parameters are meaningless for the maximally mixed state
        j = sample_block(_block_distribution_mixed(n2), rng)
        lam_hat = add_beta(n2, int(round(n2 / 2 - j)))
        est = reconstruct(LocalTheta(lam_hat, 0.0, 0.0, n2, frame))
        return CollectiveResult(est, "local", prelim, j, lam_hat, (0.0, 0.0))

    theta = local_coordinates(truth, frame, n2, strict=False)
    j = sample_block(block_distribution(n2, theta.lam), rng)
    lam_hat = add_beta(n2, int(round(n2 / 2 - j)))
    u_hat, v_hat = HeterodyneModel(theta.lam).sample(theta.u, theta.v, rng)
    est = reconstruct(LocalTheta(lam_hat, u_hat, v_hat, n2, frame))
    return CollectiveResult(est, "local", prelim, j, lam_hat, (u_hat, v_hat))


def run_collective(truth: BlochState, config: CollectiveConfig, rng) -> BlochState:
    """Estimate ``truth`` from ``config.n`` simulated copies."""
    return collective_trial(truth, config, rng).estimate


def local_minimax_constant(lam0: float) -> float:
    """Asymptotic local minimax constant of ``n * bures_sq`` at ``lam0``.

    Sum of the classical eigenvalue part ``Gamma_00 v0`` with
    ``v0 = lam0 (1 - lam0)`` and the rotation part ``2 Gamma_11 w0`` with
    ``w0 = (1 - lam0)/(2 (1 - 2 lam0)^2)``.  Equals ``5/4 - lam0``.
    """
    if not 0.0 <= lam0 < 0.5:
        raise DomainError(f"lam0={lam0!r} outside [0, 1/2)")
    w0 = (1.0 - lam0) / (2.0 * (1.0 - 2.0 * lam0) ** 2)
    if lam0 == 0.0:
        # Gamma_00 diverges but Gamma_00 * v0 -> 1/4
        return 0.25 + 2.0 * 1.0 * w0
    gamma = bures_weight_local(lam0)
    v0 = lam0 * (1.0 - lam0)
    return float(gamma[0, 0] * v0 + 2.0 * gamma[1, 1] * w0)


def mixed_ball_bound(delta: float) -> float:
    """``3/4 (1 + delta/(1 - delta))``: Tr(I^-1 G) maximised over the ball."""
    return 0.75 * (1.0 + delta / (1.0 - delta))


def pauli_tomography_constant(state: BlochState) -> float:
    """Limit of ``n * E bures_sq`` for ML Pauli tomography with ``n/3``
    copies per axis: ``3 Tr(I^-1 G)``."""
    return 3.0 * float(np.trace(np.linalg.solve(fisher_pauli(state), bures_weight_bloch(state))))
