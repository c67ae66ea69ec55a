"""Command-line entry point: runs one experiment per invocation and writes
CSV/JSON artifacts.

Seed precedence: the HESTON_LDA_SEED environment variable beats --seed,
which beats the config value, which defaults to 42.  All artifacts are
written through a temp file and an atomic rename, and any artifact already
produced is removed if a later step fails, so a run never leaves partial
output behind.  Floats are serialized with 17 significant digits; reruns
with the same config and seed are byte-identical regardless of --threads.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import tempfile
from typing import Optional

from . import __version__
from .config import (
    EXPERIMENTS,
    ConfigError,
    ExperimentConfig,
    config_to_dict,
    parse_config,
)
from .core import FunctionalCoeffs, ModelParams
from .mc import (
    ergodic_check,
    ldp_check,
    martingale_check,
    stopping_time_experiment,
)
from .mgf import MgfQuery, convergence_gap, log_mgf_alpha_beta, log_mgf_full
from .rates import (
    derivative_image,
    domain_of,
    legendre_transform,
    rate_minimum,
)
from .regimes import (
    _DISAGREE_NOTE,
    classify_gamma1,
    classify_gamma2,
    classify_linear_arbitrage,
    classify_sublinear_arbitrage,
    sublinear_thresholds,
)

__all__ = ["main", "run_experiment"]


def _fmt(value) -> str:
    """One CSV cell: 17 significant digits for floats, empty for None."""
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".17g")


def _write_text(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(cell) for cell in row) for row in rows)
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if hasattr(obj, "_asdict"):
        return _jsonable(obj._asdict())
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj):
        return _jsonable(dataclasses.asdict(obj))
    raise TypeError(f"cannot serialize {type(obj)!r}")


def _log_mgf_at(u: float, coeffs: FunctionalCoeffs, t: float, p: ModelParams) -> float:
    if coeffs.delta == 0.0:
        return log_mgf_alpha_beta(u * coeffs.alpha, u * coeffs.beta, t, p)
    return log_mgf_full(MgfQuery(coeffs=coeffs, t=t, u=u), p)


# ---------------------------------------------------------------------------
# experiment runners: each returns (files: {name: text}, outputs: dict)


def _run_rate_fn(cfg: ExperimentConfig, seed: int, threads: int):
    p = cfg.params
    _, beta, delta = cfg.options["coeffs"]
    rows = []
    for x in cfg.options["x_grid"]:
        ev = legendre_transform(x, beta, delta, p)
        rows.append((x, ev.value, ev.u_star))
    dom = domain_of(beta, delta, p)
    image = derivative_image(beta, delta, p)
    minimum = rate_minimum(beta, delta, p)
    outputs = {
        "domain": {"lo": dom.lo, "hi": dom.hi,
                   "lo_closed": dom.lo_closed, "hi_closed": dom.hi_closed},
        "derivative_image": {"lo": image.lo, "hi": image.hi},
        "rate_minimum": {"x_min": minimum.x_min, "value": minimum.value,
                         "attained_zero": minimum.attained_zero},
    }
    return {"rates.csv": _csv_text(("x", "lambda_star", "u_star"), rows)}, outputs


def _run_mgf_check(cfg: ExperimentConfig, seed: int, threads: int):
    p = cfg.params
    coeffs = FunctionalCoeffs(*cfg.options["coeffs"])
    u = cfg.options["u"]
    t_grid = list(cfg.options["t_grid"])
    gaps = convergence_gap(u, coeffs, t_grid, p)
    rows = [(t, _log_mgf_at(u, coeffs, t, p), gap) for t, gap in gaps]
    outputs = {
        "u": u,
        "largest_t_gap": gaps[-1][1],
    }
    return {"mgf.csv": _csv_text(("t", "log_mgf", "gap"), rows)}, outputs


def _run_classify(cfg: ExperimentConfig, seed: int, threads: int):
    p = cfg.params
    gamma = cfg.options["gamma"]
    reports = {"linear_arbitrage": classify_linear_arbitrage(gamma, p)}
    for name, call in (
        ("sublinear_arbitrage", lambda: classify_sublinear_arbitrage(gamma, p)),
        ("sublinear_thresholds", lambda: sublinear_thresholds(p)),
    ):
        try:
            reports[name] = call()
        except ValueError as exc:
            reports[name] = {"error": str(exc)}
    c = cfg.options.get("c")
    if c is not None:
        for name, classify in (("gamma1", classify_gamma1), ("gamma2", classify_gamma2)):
            try:
                reports[name] = classify(c, p)
            except ValueError as exc:
                reports[name] = {"error": str(exc)}
    payload = {name: _jsonable(rep) for name, rep in reports.items()}
    payload["disagreement"] = _DISAGREE_NOTE in reports["linear_arbitrage"].notes
    text = json.dumps(payload, indent=2) + "\n"
    return {"regimes.json": text}, payload


def _run_ldp_verify(cfg: ExperimentConfig, seed: int, threads: int):
    p = cfg.params
    opts = cfg.options
    comp = ldp_check(
        FunctionalCoeffs(*opts["coeffs"]),
        opts["x"],
        list(opts["t_grid"]),
        opts["n_paths"],
        p,
        steps_per_unit_t=opts["steps_per_unit_t"],
        seed=seed,
        threads=threads,
    )
    rows = []
    for t, n, p_hat, lo, hi in comp.rows:
        decay = -math.log(p_hat) / t if p_hat > 0 else None
        rows.append((t, n, p_hat, lo, hi, decay))
    rows.append(("theory", None, None, None, None, comp.theory_rate))
    est = comp.estimate
    outputs = {
        "x": comp.x,
        "theory_rate": comp.theory_rate,
        "skipped": comp.skipped,
        "slope": est.slope if est else None,
        "stderr": est.stderr if est else None,
        "r_squared": est.r_squared if est else None,
        "relative_deviation": comp.relative_deviation,
        "upper_bound_ok": comp.upper_bound_ok,
        "notes": list(comp.notes),
    }
    header = ("t", "n_paths", "p_hat", "ci_lo", "ci_hi", "minus_log_p_over_t")
    return {"ldp.csv": _csv_text(header, rows)}, outputs


def _run_ergodic_check(cfg: ExperimentConfig, seed: int, threads: int):
    p = cfg.params
    report = ergodic_check(
        cfg.options["t"],
        cfg.options["n_paths"],
        p,
        n_steps=cfg.options.get("n_steps"),
        seed=seed,
        threads=threads,
    )
    rows = [(s.name, s.estimate, s.target, s.stderr) for s in report.stats]
    outputs = _jsonable(report)
    header = ("name", "estimate", "target", "stderr")
    return {"ergodic.csv": _csv_text(header, rows)}, outputs


def _run_martingale_check(cfg: ExperimentConfig, seed: int, threads: int):
    p = cfg.params
    report = martingale_check(
        cfg.options["t"],
        cfg.options["n_paths"],
        p,
        n_steps=cfg.options.get("n_steps"),
        seed=seed,
        threads=threads,
    )
    row = (
        report.t,
        report.n_paths,
        report.mc_mean,
        report.mc_stderr,
        report.closed_form,
        report.explodes_at,
    )
    header = ("t", "n_paths", "mc_mean", "mc_stderr", "closed_form", "explodes_at")
    return {"martingale.csv": _csv_text(header, [row])}, _jsonable(report)


def _run_stopping_time(cfg: ExperimentConfig, seed: int, threads: int):
    p = cfg.params
    opts = cfg.options
    rows = []
    reports = []
    for t, f_value in zip(opts["t_grid"], opts["f_values"]):
        report = stopping_time_experiment(
            opts["gamma"],
            opts["gamma_bar"],
            f_value,
            t,
            opts["n_paths"],
            p,
            gamma_prime=opts.get("gamma_prime"),
            n_steps=opts.get("n_steps"),
            seed=seed,
            threads=threads,
        )
        reports.append(report)
        rows.append(
            (
                report.t,
                report.f_of_t,
                report.p_hat,
                report.ci[0],
                report.ci[1],
                report.chebychev_term,
                report.tail_term,
                report.bound,
                report.within_bound,
            )
        )
    header = (
        "t",
        "f_of_t",
        "p_hat",
        "ci_lo",
        "ci_hi",
        "chebychev_term",
        "tail_term",
        "bound",
        "within_bound",
    )
    outputs = {"experiments": _jsonable(reports)}
    return {"stopping.csv": _csv_text(header, rows)}, outputs


_RUNNERS = {
    "rate-fn": _run_rate_fn,
    "mgf-check": _run_mgf_check,
    "classify": _run_classify,
    "ldp-verify": _run_ldp_verify,
    "ergodic-check": _run_ergodic_check,
    "martingale-check": _run_martingale_check,
    "stopping-time": _run_stopping_time,
}


def run_experiment(
    cfg: ExperimentConfig,
    seed: Optional[int] = None,
    out_dir: Optional[str] = None,
    threads: int = 1,
) -> list:
    """Run the configured experiment and write its artifacts.

    Returns the list of files written (report.json last).  On any failure
    nothing is left behind: artifacts are built in memory first, written
    atomically, and removed again if a later write fails.
    """
    seed = cfg.seed if seed is None else int(seed)
    out_dir = cfg.output_dir if out_dir is None else out_dir

    files, outputs = _RUNNERS[cfg.experiment](cfg, seed, threads)

    # The report must reproduce the run: the resolved seed is part of that,
    # the --out destination is not (same config may land anywhere).
    config_dict = config_to_dict(cfg)
    config_dict["seed"] = seed
    report = {
        "version": f"heston-lda {__version__}",
        "experiment": cfg.experiment,
        "seed": seed,
        "config": config_dict,
        "outputs": _jsonable(outputs),
        "files": sorted(files),
    }
    files = dict(files)
    files["report.json"] = json.dumps(report, indent=2) + "\n"

    os.makedirs(out_dir, exist_ok=True)
    written = []
    try:
        for name in sorted(files):
            path = os.path.join(out_dir, name)
            _write_text(path, files[name])
            written.append(path)
    except BaseException:
        for path in written:
            if os.path.exists(path):
                os.unlink(path)
        raise
    return written


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="heston-lda",
        description="Large-deviation and arbitrage-regime experiments for a "
        "square-root stochastic volatility model.",
    )
    parser.add_argument(
        "--version", action="version", version=f"heston-lda {__version__}"
    )
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", required=True, help="TOML experiment document")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
        sp.add_argument("--out", default=None, help="override the output directory")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker processes (does not affect results)")
    args = parser.parse_args(argv)

    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        for problem in exc.errors:
            print(f"config error: {problem}", file=sys.stderr)
        return 2

    if cfg.experiment != args.experiment:
        print(
            f"config error: document configures '{cfg.experiment}' but the "
            f"subcommand is '{args.experiment}'",
            file=sys.stderr,
        )
        return 2

    seed = cfg.seed
    if args.seed is not None:
        seed = args.seed
    env_seed = os.environ.get("HESTON_LDA_SEED")
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            print("config error: HESTON_LDA_SEED must be an integer", file=sys.stderr)
            return 2

    try:
        written = run_experiment(
            cfg,
            seed=seed,
            out_dir=args.out,
            threads=args.threads,
        )
    except Exception as exc:  # noqa: BLE001 - single boundary, message to stderr
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
