"""Monte Carlo risk evaluation, grid sweeps, scaling fits and
concentration checks.

Reproducibility
---------------
Trial ``t`` of a run draws from
``default_rng(SeedSequence(master_seed, spawn_key=stream_key + (t,)))`` where
``stream_key`` identifies the (sample size, grid state) being evaluated.
Losses are collected in trial order and reduced over the full array, so the
output does not depend on the number of worker processes.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .collective import (
    CollectiveConfig,
    block_distribution,
    run_collective,
    sample_block,
    typical_blocks,
)
from .errors import DomainError
from .local_adaptive import LocalAdaptiveConfig, run_local_adaptive, run_naive_tomography
from .records import (
    RiskEstimate,
    ScalingFit,
    SweepResult,
    fingerprint,
    resolve_loss,
    summarize_losses,
)
from .states import BlochState, random_direction

__all__ = [
    "ESTIMATORS",
    "EstimatorSpec",
    "GridSpec",
    "ConcentrationReport",
    "monte_carlo_risk",
    "max_risk_sweep",
    "scaling_fit",
    "concentration_check",
    "trial_rng",
    "sweep_rows",
    "write_csv",
    "write_json",
    "CSV_COLUMNS",
]

ESTIMATORS = ("local", "collective", "naive", "oracle", "synthetic")
QRE_NUDGE = 1e-9
# spawn-key tag for grid directions, kept apart from trial streams
_GRID_TAG = 0x67726964


@dataclass(frozen=True)
class EstimatorSpec:
    """Estimator name plus its tuning parameters.

    ``local`` uses ``fraction``; ``collective`` uses ``kappa`` and ``delta``;
    ``synthetic`` ignores the state and reports the deterministic loss
    ``c * n^(-exponent) * log(n)^log_power`` (a test hook for fits).
    """

    name: str
    fraction: float = 0.5
    kappa: float = 0.3
    delta: float = 0.1
    c: float = 1.0
    exponent: float = 1.0
    log_power: float = 0.0

    def __post_init__(self):
        if self.name not in ESTIMATORS:
            raise DomainError(f"unknown estimator {self.name!r}; choose from {ESTIMATORS}")

    def params(self) -> dict:
        keys = {
            "local": ("fraction",),
            "collective": ("kappa", "delta"),
            "synthetic": ("c", "exponent", "log_power"),
        }.get(self.name, ())
        return {k: getattr(self, k) for k in keys}

    def trial_function(self, n: int):
        """``f(truth, rng) -> BlochState`` for sample size ``n``."""
        if self.name == "local":
            cfg = LocalAdaptiveConfig(n, self.fraction)
            return lambda truth, rng: run_local_adaptive(truth, cfg, rng).estimate
        if self.name == "collective":
            cfg = CollectiveConfig(n, self.kappa, self.delta)
            return lambda truth, rng: run_collective(truth, cfg, rng)
        if self.name == "naive":
            return lambda truth, rng: run_naive_tomography(truth, n, rng)
        if self.name == "oracle":
            return lambda truth, rng: truth
        raise DomainError("synthetic estimator has no trial function")

    def synthetic_loss(self, n: int) -> float:
        return self.c * n ** (-self.exponent) * math.log(n) ** self.log_power


def _as_spec(estimator):
    if isinstance(estimator, str):
        return EstimatorSpec(estimator)
    # anything exposing the EstimatorSpec interface is accepted as is
    if all(hasattr(estimator, a) for a in ("name", "params", "trial_function")):
        return estimator
    raise DomainError(f"cannot interpret {estimator!r} as an estimator")


def trial_rng(master_seed: int, stream_key, trial: int):
    return np.random.default_rng(
        np.random.SeedSequence(int(master_seed), spawn_key=(*stream_key, int(trial)))
    )


def _run_chunk(spec, truth_r, n, loss, master_seed, stream_key, start, stop):
    truth = BlochState(truth_r)
    loss_fn = resolve_loss(loss)
    run = spec.trial_function(n)
    out = np.empty(stop - start)
    nudged = 0
    for i, t in enumerate(range(start, stop)):
        est = run(truth, trial_rng(master_seed, stream_key, t))
        if loss == "qre" and est.is_pure:
            est = BlochState(est.r * (1.0 - QRE_NUDGE))
            nudged += 1
        out[i] = loss_fn(truth, est)
    return out, nudged


def _chunks(trials, workers):
    if workers <= 1:
        return [(0, trials)]
    size = max(1, math.ceil(trials / (4 * workers)))
    return [(s, min(s + size, trials)) for s in range(0, trials, size)]


class _Pool:
    """Process pool for ``workers > 1``; inline execution otherwise."""

    def __init__(self, workers: int):
        self.workers = max(1, int(workers))
        self._ex = ProcessPoolExecutor(self.workers) if self.workers > 1 else None

    def map_chunks(self, args, bounds):
        if self._ex is None:
            return [_run_chunk(*args, s, e) for s, e in bounds]
        futs = [self._ex.submit(_run_chunk, *args, s, e) for s, e in bounds]
        return [f.result() for f in futs]

    def close(self):
        if self._ex is not None:
            self._ex.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def monte_carlo_risk(
    estimator,
    truth: BlochState,
    n: int,
    trials: int,
    loss: str = "bures",
    master_seed: int = 0,
    *,
    stream_key=(),
    workers: int = 1,
    _pool: _Pool | None = None,
) -> RiskEstimate:
    """Mean loss of ``estimator`` at ``truth`` over ``trials`` runs."""
    spec = _as_spec(estimator)
    if trials < 100:
        raise DomainError("need at least 100 trials")
    resolve_loss(loss)
    stream_key = tuple(int(k) for k in stream_key)
    fp = fingerprint({
        "estimator": spec.name, "params": spec.params(), "truth": truth.r, "n": int(n),
        "trials": int(trials), "loss": loss, "master_seed": int(master_seed),
        "stream_key": list(stream_key),
    })
    if spec.name == "synthetic" and isinstance(spec, EstimatorSpec):
        return RiskEstimate(spec.synthetic_loss(n), 0.0, trials, n, loss, spec.name, fp)
    args = (spec, np.array(truth.r), int(n), loss, int(master_seed), stream_key)
    pool = _pool or _Pool(workers)
    try:
        parts = pool.map_chunks(args, _chunks(trials, pool.workers))
    finally:
        if _pool is None:
            pool.close()
    losses = np.concatenate([p[0] for p in parts])
    nudged = sum(p[1] for p in parts)
    mean, stderr, n_inf = summarize_losses(losses)
    return RiskEstimate(mean, stderr, trials, int(n), loss, spec.name, fp, n_inf, nudged)


@dataclass(frozen=True)
class GridSpec:
    """States over which the maximum risk is taken.

    ``radii`` are Bloch lengths along +z; the string ``"1-1/n"`` stands for
    ``1 - 1/n``.  ``random_radii`` each contribute ``random_per_radius``
    states in uniformly random directions drawn from ``direction_seed``
    (the master seed when None), identical for every ``n``.
    """

    radii: tuple = (0.0, 0.3, 0.6, 0.9, 0.99, "1-1/n", 1.0)
    random_radii: tuple = (0.99, 1.0)
    random_per_radius: int = 3
    direction_seed: int | None = None

    def states(self, n: int, master_seed: int = 0) -> list:
        out = []
        for r in self.radii:
            length = 1.0 - 1.0 / n if r == "1-1/n" else float(r)
            out.append(BlochState([0.0, 0.0, length]))
        seed = master_seed if self.direction_seed is None else self.direction_seed
        rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(_GRID_TAG,)))
        for r in self.random_radii:
            for _ in range(self.random_per_radius):
                out.append(BlochState(float(r) * random_direction(rng)))
        if len(out) < 3:
            raise DomainError("grid must contain at least three states")
        return out

    def to_dict(self) -> dict:
        return asdict(self)


def max_risk_sweep(
    estimator,
    grid: GridSpec | None,
    n: int,
    trials: int,
    loss: str = "bures",
    master_seed: int = 0,
    *,
    workers: int = 1,
    _pool: _Pool | None = None,
) -> SweepResult:
    """Risk at every grid state; reports the largest."""
    grid = GridSpec() if grid is None else grid
    states = grid.states(n, master_seed)
    pool = _pool or _Pool(workers)
    try:
        per = [
            monte_carlo_risk(estimator, s, n, trials, loss, master_seed,
                             stream_key=(n, i), _pool=pool)
            for i, s in enumerate(states)
        ]
    finally:
        if _pool is None:
            pool.close()
    return SweepResult.from_estimates(states, per)


def scaling_fit(
    estimator,
    grid: GridSpec | None,
    ns,
    trials: int,
    loss: str = "bures",
    master_seed: int = 0,
    *,
    workers: int = 1,
) -> ScalingFit:
    """Log-log slope of the maximum grid risk against ``n``."""
    ns = [int(n) for n in ns]
    if len(ns) < 3 or math.log10(max(ns) / min(ns)) < 1.5 - 1e-12:
        raise DomainError("need at least three sample sizes spanning 1.5 decades")
    with _Pool(workers) as pool:
        sweeps = [max_risk_sweep(estimator, grid, n, trials, loss, master_seed, _pool=pool)
                  for n in ns]
    return ScalingFit.fit(ns, [s.max_risk for s in sweeps], sweeps)


@dataclass(frozen=True)
class ConcentrationReport:
    lemma: str
    n: int
    epsilon: float
    repetitions: int
    exceedances: int
    rate: float
    stderr: float
    bound: float
    threshold: float
    passed: bool = field(default=False)

    def to_dict(self) -> dict:
        return asdict(self)


def concentration_check(
    lemma: str,
    n: int,
    epsilon: float,
    repetitions: int,
    master_seed: int = 0,
    *,
    truth: BlochState | None = None,
    n_prelim: int | None = None,
) -> ConcentrationReport:
    """Empirical tail probability against an exponential bound.

    ``lemma`` selects the event:

    ``"lemma1"``
        ``|r~ - r|^2 > 6 n^(-1 + 2 eps)`` for Pauli tomography on ``n``
        copies (``n/3`` per axis); bound ``6 exp(-2 n^(2 eps)/3)``.
    ``"lemma2"``
        ``|r~ - r|^2 > 3 n^(2 eps - 1)`` where ``r~`` is the projected
        estimate from ``n_prelim`` copies (default ``ceil(n^0.9)``); bound
        ``6 exp(-2 n_prelim n^(2 eps - 1)/3)``.
    ``"blocks"``
        ``j`` outside ``|j - n(1/2 - lam)| <= n^(1/2 + eps)`` under the
        which-block law; bound ``2 exp(-2 n^(2 eps))``.

    Passes when the empirical rate is at most the bound plus three binomial
    standard errors.
    """
    if repetitions < 1000:
        raise DomainError("need at least 1000 repetitions")
    truth = BlochState([0.0, 0.0, 0.5]) if truth is None else truth
    tag = {"lemma1": 1, "lemma2": 2, "blocks": 3}.get(lemma)
    if tag is None:
        raise DomainError(f"unknown concentration check {lemma!r}")
    rng = np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=(tag, n)))
    r = np.asarray(truth.r)
    if lemma in ("lemma1", "lemma2"):
        if lemma == "lemma1":
            per_axis = n // 3
            threshold = 6.0 * n ** (-1.0 + 2 * epsilon)
            bound = 6.0 * math.exp(-2.0 * n ** (2 * epsilon) / 3.0)
        else:
            nt = math.ceil(n**0.9) if n_prelim is None else int(n_prelim)
            per_axis = math.ceil(nt / 3)
            threshold = 3.0 * n ** (2 * epsilon - 1.0)
            bound = 6.0 * math.exp(-2.0 * (3 * per_axis) * n ** (2 * epsilon - 1.0) / 3.0)
        counts = rng.binomial(per_axis, np.clip(0.5 * (1 + r), 0, 1), size=(repetitions, 3))
        est = 2.0 * counts / per_axis - 1.0
        if lemma == "lemma2":
            norms = np.linalg.norm(est, axis=1, keepdims=True)
            est = np.where(norms > 1, est / norms, est)
        exceed = int(np.sum(np.sum((est - r) ** 2, axis=1) > threshold))
    else:
        lam = truth.lam
        dist = block_distribution(n, lam)
        typical = set(np.round(2 * typical_blocks(n, lam, epsilon)).astype(int).tolist())
        draws = [int(round(2 * sample_block(dist, rng))) for _ in range(repetitions)]
        exceed = sum(d not in typical for d in draws)
        threshold = n ** (0.5 + epsilon)
        bound = 2.0 * math.exp(-2.0 * n ** (2 * epsilon))
    rate = exceed / repetitions
    stderr = math.sqrt(rate * (1 - rate) / repetitions)
    return ConcentrationReport(lemma, n, epsilon, repetitions, exceed, rate, stderr,
                               bound, threshold,
                               rate <= bound + 3 * stderr)


CSV_COLUMNS = ("estimator", "loss", "n", "r_x", "r_y", "r_z", "trials", "mean", "stderr", "seed")


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return x


def sweep_rows(sweep: SweepResult, seed: int):
    for state, est in zip(sweep.grid, sweep.per_state):
        yield (est.estimator_name, est.loss_name, est.n, *state.r.tolist(),
               est.trials, est.mean, est.stderr, seed)


def write_csv(path, header, rows) -> None:
    """Write one header row then ``rows``, floats with 17 significant digits."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_json(path, payload) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")
