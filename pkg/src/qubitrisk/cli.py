"""Command-line interface.

Every command writes ``<out>/<command>.csv`` and a JSON sidecar
``<out>/<command>.json`` holding the fully resolved configuration, the
results and a timestamp.  The output directory defaults to ``$QUBITRISK_OUT``
or ``./results``.  Options are resolved as: command-line flags, then the
``--config`` JSON file, then built-in defaults.

Exit status: 0 on success, 2 for invalid arguments, 3 for numerical
failures.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import sys

import numpy as np

from . import binomial, harness, lan, metrics
from .collective import local_minimax_constant, mixed_ball_bound
from .errors import CutoffTooSmall, DimensionCap, DomainError, QubitRiskError

OUT_ENV = "QUBITRISK_OUT"

COMMON_DEFAULTS = {"seed": 0, "workers": 1, "out": None}

DEFAULTS = {
    "poisson-risk": {"mu_min": 0.01, "mu_max": 400.0, "steps": 400, "bayes": False,
                     "alpha": 0.41, "beta": 200.0},
    "risk": {"estimator": "local", "loss": "bures", "n": 10_000, "trials": 1000,
             "grid": "default", "random_radii": "0.99,1", "random_count": 3,
             "fraction": 0.5, "kappa": 0.3, "delta": 0.1},
    "scaling": {"estimator": "local", "loss": "bures", "ns": "1000,10000,100000",
                "trials": 1000, "grid": "default", "random_radii": "0.99,1",
                "random_count": 3, "fraction": 0.5, "kappa": 0.3, "delta": 0.1,
                "synthetic_c": 1.0, "synthetic_exponent": 1.0, "synthetic_log_power": 0.0},
    "lan-check": {"ns": "50,100,200,400", "j_offset": 0.0, "lam": 0.25, "w": "1,0",
                  "cutoff": None},
    "concentration": {"lemma": "all", "n": None, "epsilon": 0.1, "repetitions": 10_000,
                      "n_prelim": None},
    "metrics-check": {"lam_points": 10, "phi_points": 10, "phi_max": 0.3},
}


class UsageError(Exception):
    pass


def _int_list(text):
    try:
        vals = [int(float(x)) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None
    return vals


def _float_list(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _grid(cfg) -> harness.GridSpec:
    if cfg["grid"] == "default":
        radii = harness.GridSpec.radii
    else:
        radii = []
        for tok in str(cfg["grid"]).split(","):
            tok = tok.strip()
            if tok == "1-1/n":
                radii.append(tok)
            else:
                try:
                    radii.append(float(tok))
                except ValueError:
                    raise UsageError(f"bad grid radius {tok!r}") from None
        radii = tuple(radii)
    return harness.GridSpec(radii, tuple(_float_list(cfg["random_radii"])),
                            int(cfg["random_count"]))


def _spec(cfg) -> harness.EstimatorSpec:
    return harness.EstimatorSpec(
        cfg["estimator"], fraction=cfg["fraction"], kappa=cfg["kappa"], delta=cfg["delta"],
        c=cfg.get("synthetic_c", 1.0), exponent=cfg.get("synthetic_exponent", 1.0),
        log_power=cfg.get("synthetic_log_power", 0.0),
    )


def _paths(cfg, name):
    out = cfg["out"] or os.environ.get(OUT_ENV) or "results"
    stem = name.replace("-", "_")
    return os.path.join(out, stem + ".csv"), os.path.join(out, stem + ".json")


def _emit(cfg, name, header, rows, results):
    csv_path, json_path = _paths(cfg, name)
    harness.write_csv(csv_path, header, rows)
    payload = {
        "command": name,
        "config": cfg,
        "results": results,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    harness.write_json(json_path, payload)
    print(json.dumps(results, indent=2, sort_keys=True, default=harness._json_default))
    print(f"wrote {csv_path} and {json_path}", file=sys.stderr)


def cmd_poisson_risk(cfg) -> None:
    if not 0 < cfg["mu_min"] < cfg["mu_max"]:
        raise UsageError("need 0 < mu_min < mu_max")
    if cfg["steps"] < 2:
        raise UsageError("steps must be at least 2")
    mus = np.geomspace(cfg["mu_min"], cfg["mu_max"], int(cfg["steps"]))
    R = binomial.poisson_risk_curve(mus)
    i = int(np.argmax(R))
    results = {"argmax_mu_grid": float(mus[i]), "max_R_grid": float(R[i]),
               "R_at_mu_max": float(R[-1])}
    lo, hi = mus[max(i - 1, 0)], mus[min(i + 1, mus.size - 1)]
    if hi > lo:
        peak = binomial.max_poisson_risk((lo, hi))
        results.update(argmax_mu=peak.mu, max_R=peak.risk)
    header, cols = ["mu", "R"], [mus, R]
    if cfg["bayes"]:
        prior = binomial.GammaPrior(cfg["alpha"], cfg["beta"])
        RB = binomial.bayes_risk_curve(mus, prior)
        header.append("R_B")
        cols.append(RB)
        results.update(sup_R_B_grid=float(RB.max()), argmax_mu_R_B=float(mus[np.argmax(RB)]),
                       R_B_at_mu_max=float(RB[-1]))
    _emit(cfg, "poisson-risk", header, zip(*cols), results)


def _reference_constants(delta):
    return {"lower_local_pure": local_minimax_constant(0.0), "upper_collective": 1.5,
            "mixed_ball_bound": mixed_ball_bound(delta)}


def cmd_risk(cfg) -> None:
    spec = _spec(cfg)
    if spec.name == "synthetic":
        raise UsageError("the synthetic estimator is only available for 'scaling'")
    sweep = harness.max_risk_sweep(spec, _grid(cfg), int(cfg["n"]), int(cfg["trials"]),
                                   cfg["loss"], int(cfg["seed"]), workers=int(cfg["workers"]))
    n = int(cfg["n"])
    results = {"sweep": sweep.to_dict(), "n_times_max_risk": n * sweep.max_risk,
               "reference_constants": _reference_constants(cfg["delta"])}
    _emit(cfg, "risk", harness.CSV_COLUMNS, harness.sweep_rows(sweep, cfg["seed"]), results)


def cmd_scaling(cfg) -> None:
    spec = _spec(cfg)
    ns = _int_list(cfg["ns"])
    fit = harness.scaling_fit(spec, _grid(cfg), ns, int(cfg["trials"]), cfg["loss"],
                              int(cfg["seed"]), workers=int(cfg["workers"]))
    n_risk = [n * r for n, r in zip(fit.ns, fit.max_risks)]
    results = {"fit": fit.to_dict(), "n_times_max_risk": n_risk}
    if cfg["loss"] == "qre":
        results["n_risk_over_log_n"] = [v / math.log(n) for n, v in zip(fit.ns, n_risk)]
    rows = []
    for sweep in fit.sweeps:
        rows.extend(harness.sweep_rows(sweep, cfg["seed"]))
    _emit(cfg, "scaling", harness.CSV_COLUMNS, rows, results)


def cmd_lan_check(cfg) -> None:
    ns = _int_list(cfg["ns"])
    w = tuple(_float_list(cfg["w"]))
    if len(w) != 2:
        raise UsageError("w must have two components")
    lam_ = float(cfg["lam"])
    cutoff = cfg["cutoff"]
    rows, dists = [], []
    for n in ns:
        j = lan.nearest_block(n, lam_, cfg["j_offset"])
        c = int(cutoff) if cutoff else max(int(2 * j + 1), lan.suggested_cutoff(lam_, w))
        d = lan.lan_trace_distance(j, n, lam_, w, c)
        rows.append((n, j, c, d))
        dists.append(d)
    results = {"ns": ns, "distances": dists}
    if len(ns) >= 2 and all(d > 0 for d in dists):
        results["slope"] = float(np.polyfit(np.log(ns), np.log(dists), 1)[0])
    _emit(cfg, "lan-check", ["n", "j", "cutoff", "trace_distance"], rows, results)


_CONC_DEFAULT_N = {"lemma1": 3000, "lemma2": 10_000, "blocks": 10_000}


def cmd_concentration(cfg) -> None:
    lemmas = list(_CONC_DEFAULT_N) if cfg["lemma"] == "all" else [cfg["lemma"]]
    reports = []
    for lem in lemmas:
        n = int(cfg["n"]) if cfg["n"] else _CONC_DEFAULT_N[lem]
        reports.append(harness.concentration_check(
            lem, n, float(cfg["epsilon"]), int(cfg["repetitions"]), int(cfg["seed"]),
            n_prelim=cfg["n_prelim"]))
    header = ["lemma", "n", "epsilon", "repetitions", "exceedances", "rate", "stderr",
              "bound", "threshold", "passed"]
    rows = [[getattr(r, h) for h in header] for r in reports]
    _emit(cfg, "concentration", header, rows, {"reports": [r.to_dict() for r in reports]})


def cmd_metrics_check(cfg) -> None:
    lams = np.linspace(0.0, 0.45, int(cfg["lam_points"]))
    lam_hats = np.linspace(0.0, 0.45, int(cfg["lam_points"]))
    lam_hats[0] = lam_hats[1] / 10  # relative-entropy expansion needs lam_hat > 0
    phis = np.linspace(cfg["phi_max"] / int(cfg["phi_points"]), cfg["phi_max"],
                       int(cfg["phi_points"]))
    rows = []
    worst = {"bures": 0.0, "qre": 0.0}
    for lam_ in lams:
        for lh in lam_hats:
            for phi in phis:
                b = metrics.bures_sq_expansion(lam_, lh, phi)
                q = metrics.qre_expansion(lam_, lh, phi)
                rb = b.remainder_bound / phi**4
                rq = q.remainder_bound / (phi**4 * math.log(1.0 / lh))
                worst["bures"] = max(worst["bures"], rb)
                worst["qre"] = max(worst["qre"], rq)
                rows.append(("bures", lam_, lh, phi, b.total, b.remainder_bound, rb))
                rows.append(("qre", lam_, lh, phi, q.total, q.remainder_bound, rq))
    results = {"max_ratio": worst, "passed": {k: v <= 1.0 for k, v in worst.items()}}
    _emit(cfg, "metrics-check",
          ["loss", "lam", "lam_hat", "phi", "expansion", "remainder", "ratio"], rows, results)


COMMANDS = {
    "poisson-risk": cmd_poisson_risk,
    "risk": cmd_risk,
    "scaling": cmd_scaling,
    "lan-check": cmd_lan_check,
    "concentration": cmd_concentration,
    "metrics-check": cmd_metrics_check,
}


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--seed", type=int, help="master seed (64-bit unsigned)")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")
    common.add_argument("--workers", type=int, help="worker processes for Monte Carlo trials")
    common.add_argument("--config", help="JSON file with option values")

    p = argparse.ArgumentParser(prog="qubitrisk", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("poisson-risk", parents=[common], argument_default=S,
                        help="Hellinger risk curves in the Poisson regime")
    sp.add_argument("--mu-min", type=float)
    sp.add_argument("--mu-max", type=float)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--bayes", action="store_true", help="add the Gamma-prior Bayes curve")
    sp.add_argument("--alpha", type=float, help="prior shape (implies --bayes)")
    sp.add_argument("--beta", type=float, help="prior scale (implies --bayes)")

    def estimator_flags(sp, estimators):
        sp.add_argument("--estimator", choices=estimators)
        sp.add_argument("--loss", choices=["bures", "qre", "hellinger"])
        sp.add_argument("--trials", type=int)
        sp.add_argument("--grid", help="'default' or comma-separated radii along z "
                                       "(the token 1-1/n is allowed)")
        sp.add_argument("--random-radii", help="radii of random-direction grid states")
        sp.add_argument("--random-count", type=int, help="random directions per radius")
        sp.add_argument("--fraction", type=float, help="stage-one share (local)")
        sp.add_argument("--kappa", type=float, help="preliminary exponent (collective)")
        sp.add_argument("--delta", type=float, help="mixed-ball radius (collective)")

    sp = sub.add_parser("risk", parents=[common], argument_default=S,
                        help="maximum risk over a grid of states")
    estimator_flags(sp, ["local", "collective", "naive", "oracle"])
    sp.add_argument("--n", type=int)

    sp = sub.add_parser("scaling", parents=[common], argument_default=S,
                        help="log-log slope of maximum risk against n")
    estimator_flags(sp, list(harness.ESTIMATORS))
    sp.add_argument("--ns", help="comma-separated sample sizes")
    sp.add_argument("--synthetic-c", type=float)
    sp.add_argument("--synthetic-exponent", type=float)
    sp.add_argument("--synthetic-log-power", type=float)

    sp = sub.add_parser("lan-check", parents=[common], argument_default=S,
                        help="distance between block states and their Gaussian limit")
    sp.add_argument("--ns")
    sp.add_argument("--j-offset", type=float)
    sp.add_argument("--lam", type=float)
    sp.add_argument("--w", help="u,v")
    sp.add_argument("--cutoff", type=int)

    sp = sub.add_parser("concentration", parents=[common], argument_default=S,
                        help="empirical tail probabilities against their bounds")
    sp.add_argument("--lemma", choices=["lemma1", "lemma2", "blocks", "all"])
    sp.add_argument("--n", type=int)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--repetitions", type=int)
    sp.add_argument("--n-prelim", type=int)

    sp = sub.add_parser("metrics-check", parents=[common], argument_default=S,
                        help="exact-versus-expansion error of the losses")
    sp.add_argument("--lam-points", type=int)
    sp.add_argument("--phi-points", type=int)
    sp.add_argument("--phi-max", type=float)
    return p


def resolve_config(args: argparse.Namespace) -> dict:
    flags = vars(args).copy()
    command = flags.pop("command")
    cfg = {**COMMON_DEFAULTS, **DEFAULTS[command]}
    path = flags.pop("config", None)
    if path:
        try:
            with open(path) as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {path}: {exc}") from None
        unknown = set(from_file) - set(cfg)
        if unknown:
            raise UsageError(f"unknown keys in config file: {sorted(unknown)}")
        cfg.update(from_file)
    cfg.update(flags)
    if command == "poisson-risk" and ("alpha" in flags or "beta" in flags):
        cfg["bayes"] = True
    if cfg["seed"] < 0 or cfg["seed"] >= 2**64:
        raise UsageError("seed must be a 64-bit unsigned integer")
    if cfg["workers"] < 1:
        raise UsageError("workers must be positive")
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command](cfg)
    except (UsageError, DomainError, DimensionCap) as exc:
        print(f"qubitrisk {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except CutoffTooSmall as exc:
        print(f"qubitrisk {args.command}: numeric failure: {exc}; "
              f"try --cutoff {exc.suggested}", file=sys.stderr)
        return 3
    except (QubitRiskError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"qubitrisk {args.command}: numeric failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
