"""Render one CSV artifact into one PNG figure.

Four figure kinds, one per artifact family:

- ``rate_curve``      rates.csv       convex transform values over x, with
                                       the data minimum marked
- ``convergence``     mgf.csv         per-horizon log-MGF over t next to the
                                       gap to its limit on a log scale
- ``decay_compare``   ldp.csv         empirical decay points with CI bars
                                       against the analytic rate line
- ``regime_map``      sweep CSV       verdicts over the (lambda, gamma) plane

Schema checks run before any drawing, and the output file is only written
after the full figure is built, so a bad input never leaves a PNG behind.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

__all__ = ["KINDS", "PlotSpec", "ReportError", "render_report"]


class ReportError(ValueError):
    """Unusable input: missing file, empty CSV, or schema mismatch."""


_REQUIRED_COLUMNS = {
    "rate_curve": ("x", "lambda_star"),
    "convergence": ("t", "log_mgf", "gap"),
    "decay_compare": ("t", "p_hat", "ci_lo", "ci_hi", "minus_log_p_over_t"),
    "regime_map": ("lambda", "gamma", "verdict"),
}

KINDS = tuple(sorted(_REQUIRED_COLUMNS))


@dataclass(frozen=True)
class PlotSpec:
    """One rendering request: which CSV, which figure kind, which PNG."""

    input_csv: str
    kind: str
    output_png: str

    def __post_init__(self) -> None:
        if self.kind not in _REQUIRED_COLUMNS:
            raise ReportError(
                f"unknown kind '{self.kind}'; expected one of {', '.join(KINDS)}"
            )


def _read_rows(spec: PlotSpec) -> list:
    try:
        with open(spec.input_csv, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames
            rows = list(reader)
    except OSError as exc:
        raise ReportError(f"cannot read '{spec.input_csv}': {exc}") from None
    if header is None:
        raise ReportError(f"'{spec.input_csv}' is empty")
    missing = [c for c in _REQUIRED_COLUMNS[spec.kind] if c not in header]
    if missing:
        raise ReportError(
            f"kind '{spec.kind}' requires column(s) "
            + ", ".join(f"'{c}'" for c in missing)
            + f"; '{spec.input_csv}' has: "
            + ", ".join(header)
        )
    if not rows:
        raise ReportError(f"'{spec.input_csv}' has a header but no data rows")
    return rows


def _floats(rows, column):
    return [float(r[column]) for r in rows]


def _finite_pairs(xs, ys):
    pairs = [(x, y) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
    if not pairs:
        raise ReportError("no finite data points to plot")
    return [p[0] for p in pairs], [p[1] for p in pairs]


def _draw_rate_curve(rows, ax_pair):
    (ax,) = ax_pair
    x, y = _finite_pairs(_floats(rows, "x"), _floats(rows, "lambda_star"))
    order = sorted(range(len(x)), key=x.__getitem__)
    x = [x[i] for i in order]
    y = [y[i] for i in order]
    ax.plot(x, y, marker=".", lw=1.2, color="#1f5fa8")
    k = min(range(len(y)), key=y.__getitem__)
    ax.plot([x[k]], [y[k]], marker="o", ms=8, mfc="none", color="#c23b22")
    ax.annotate(
        f"minimum at x = {x[k]:g}",
        (x[k], y[k]),
        textcoords="offset points",
        xytext=(8, 10),
        fontsize=9,
    )
    ax.set_xlabel("x")
    ax.set_ylabel("rate value")
    ax.set_title("Legendre transform of the limiting CGF")


def _draw_convergence(rows, ax_pair):
    ax_left, ax_right = ax_pair
    t = _floats(rows, "t")
    per_t = [m / s for m, s in zip(_floats(rows, "log_mgf"), t)]
    ax_left.plot(*_finite_pairs(t, per_t), marker="o", lw=1.2, color="#1f5fa8")
    ax_left.set_xlabel("t")
    ax_left.set_ylabel("log MGF / t")
    ax_left.set_title("Scaled log-MGF over the horizon")

    gt, gap = _finite_pairs(t, _floats(rows, "gap"))
    positive = [(a, g) for a, g in zip(gt, gap) if g > 0]
    if positive:
        ax_right.semilogy([p[0] for p in positive], [p[1] for p in positive],
                          marker="o", lw=1.2, color="#c23b22")
    ax_right.set_xlabel("t")
    ax_right.set_ylabel("|log MGF / t  -  limit|")
    ax_right.set_title("Gap to the limiting CGF")


def _draw_decay_compare(rows, ax_pair):
    (ax,) = ax_pair
    theory = None
    t, y, lo, hi = [], [], [], []
    for row in rows:
        if row["t"] == "theory":
            theory = float(row["minus_log_p_over_t"])
            continue
        p_hat = float(row["p_hat"])
        if not 0.0 < p_hat < 1.0:
            continue  # unresolvable horizon, nothing to place on a log scale
        ti = float(row["t"])
        t.append(ti)
        y.append(float(row["minus_log_p_over_t"]))
        ci_lo, ci_hi = float(row["ci_lo"]), float(row["ci_hi"])
        hi.append(-math.log(ci_lo) / ti if ci_lo > 0 else math.nan)
        lo.append(-math.log(ci_hi) / ti if ci_hi > 0 else math.nan)
    if not t:
        raise ReportError("no resolvable probabilities to plot")
    err_lo = [max(0.0, yy - l) if math.isfinite(l) else 0.0 for yy, l in zip(y, lo)]
    err_hi = [max(0.0, h - yy) if math.isfinite(h) else 0.0 for yy, h in zip(y, hi)]
    ax.errorbar(t, y, yerr=[err_lo, err_hi], fmt="o", capsize=3,
                color="#1f5fa8", label="-log p / t (MC, 95% CI)")
    if theory is not None:
        ax.axhline(theory, color="#c23b22", lw=1.2, label=f"analytic rate {theory:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("decay rate")
    ax.set_title("Empirical tail decay against the analytic rate")
    ax.legend(loc="best", fontsize=9)


_VERDICT_STYLE = (
    ("holds", "#2a7e43", "o"),
    ("fails", "#c23b22", "x"),
    ("boundary", "#e0a100", "s"),
    ("not_covered_by_paper", "#8a8a8a", "^"),
)


def _draw_regime_map(rows, ax_pair):
    (ax,) = ax_pair
    groups = {}
    for row in rows:
        groups.setdefault(row["verdict"], []).append(
            (float(row["lambda"]), float(row["gamma"]))
        )
    known = {name for name, _, _ in _VERDICT_STYLE}
    for name, color, marker in _VERDICT_STYLE:
        pts = groups.get(name)
        if pts:
            ax.scatter([p[0] for p in pts], [p[1] for p in pts], c=color,
                       marker=marker, s=36, label=name)
    other = [p for name, pts in sorted(groups.items()) if name not in known
             for p in pts]
    if other:
        ax.scatter([p[0] for p in other], [p[1] for p in other], c="#444444",
                   marker=".", s=24, label="other")
    ax.set_xlabel("lambda")
    ax.set_ylabel("gamma")
    ax.set_title("Arbitrage verdicts over the (lambda, gamma) plane")
    ax.legend(loc="best", fontsize=9)


_DRAWERS = {
    "rate_curve": (_draw_rate_curve, 1),
    "convergence": (_draw_convergence, 2),
    "decay_compare": (_draw_decay_compare, 1),
    "regime_map": (_draw_regime_map, 1),
}


def render_report(spec: PlotSpec) -> str:
    """Render ``spec.input_csv`` as ``spec.kind`` into ``spec.output_png``.

    Returns the output path.  Raises ReportError (and writes nothing) on a
    missing or empty file or when the CSV lacks the kind's columns.
    """
    rows = _read_rows(spec)
    draw, n_axes = _DRAWERS[spec.kind]
    fig, axes = plt.subplots(
        1, n_axes, figsize=(4.8 * n_axes, 3.6), dpi=150, constrained_layout=True
    )
    try:
        draw(rows, (axes,) if n_axes == 1 else tuple(axes))
        directory = os.path.dirname(spec.output_png)
        if directory:
            os.makedirs(directory, exist_ok=True)
        # strip the version metadata so identical inputs give identical bytes
        fig.savefig(spec.output_png, format="png", metadata={"Software": None})
    finally:
        plt.close(fig)
    return spec.output_png
