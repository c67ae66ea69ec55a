"""Monte Carlo harness: tail probabilities, decay-slope regression, ergodic
averages, change-of-measure checks and the stopped-exponential experiment.

Work is split into fixed 65536-path chunks.  Chunk ``i`` always draws from
the Philox substream keyed by ``seed + (i << 64)`` and chunk summaries are
reduced in index order, so results are bit-identical for any worker count.
Chunk summaries are small vectors of sums (and exact integer counts), never
per-path arrays.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    _FELLER_MSG,
    FunctionalCoeffs,
    ModelParams,
    cir_step,
    log_radon_nikodym_gamma1,
    sample_variance_batch,
    validate_params,
)
from .mgf import MgfExplosionError, log_mgf_alpha_beta
from .rates import derivative_image, legendre_transform, rate_minimum

__all__ = [
    "TailQuery",
    "DecayEstimate",
    "LdpComparison",
    "ErgodicStat",
    "ErgodicReport",
    "MartingaleReport",
    "StoppingReport",
    "estimate_prob",
    "decay_fit",
    "decay_slope",
    "ldp_check",
    "ergodic_check",
    "martingale_check",
    "stopping_time_experiment",
]

_CHUNK = 65536
_MASK64 = (1 << 64) - 1
# two-sided 95% normal quantile
_WILSON_Z = 1.959963984540054


@dataclass(frozen=True)
class TailQuery:
    """One tail-probability estimation request.

    The event is {X_t / denom >= threshold} (or strictly below, per
    ``direction``) where X_t is the path functional of ``coeffs`` and the
    denominator is t for linear speed or the supplied f(t) value for custom
    speed.  ``n_steps`` defaults to 20 grid steps per unit of time.
    """

    coeffs: FunctionalCoeffs
    threshold: float
    t: float
    n_paths: int
    n_steps: Optional[int] = None
    direction: str = "at_least"
    speed: str = "linear"
    f_of_t: Optional[float] = None
    seed: int = 0

    def __post_init__(self) -> None:
        problems = []
        if self.direction not in ("at_least", "below"):
            problems.append("direction must be 'at_least' or 'below'")
        if self.speed not in ("linear", "custom"):
            problems.append("speed must be 'linear' or 'custom'")
        if not self.t > 0:
            problems.append("t must be positive")
        if self.n_paths < 100:
            problems.append("n_paths must be at least 100")
        if self.n_steps is None:
            object.__setattr__(self, "n_steps", max(1, round(20.0 * self.t)))
        elif self.n_steps < 1:
            problems.append("n_steps must be a positive integer")
        if self.speed == "custom":
            if self.f_of_t is None or not self.f_of_t > 0:
                problems.append("speed='custom' requires a positive f_of_t")
        elif self.f_of_t is not None:
            problems.append("f_of_t is only meaningful with speed='custom'")
        if math.isnan(self.threshold):
            problems.append("threshold must not be NaN")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def denominator(self) -> float:
        return self.t if self.speed == "linear" else float(self.f_of_t)


@dataclass(frozen=True)
class DecayEstimate:
    """Weighted least-squares fit of -log p_hat against t.

    ``points`` holds (t, log p_hat, CI half-width in log space) for every
    queried horizon.  When any p_hat falls on {0, 1} the slope is not
    identified: slope/stderr/r_squared are NaN, the offending horizons are
    listed in ``censored`` and the floor 1/n_paths stands in for log 0.
    """

    slope: float
    stderr: float
    r_squared: float
    points: tuple
    censored: tuple = ()
    note: str = ""


@dataclass(frozen=True)
class LdpComparison:
    """Empirical decay slope against the analytic tail rate inf Lambda*.

    ``rows`` holds the raw per-horizon estimates as
    (t, n_paths, p_hat, ci_lo, ci_hi) tuples.
    """

    x: float
    theory_rate: float
    estimate: Optional[DecayEstimate]
    relative_deviation: float
    upper_bound_ok: Optional[bool]
    skipped: bool
    rows: tuple = ()
    notes: tuple = ()


@dataclass(frozen=True)
class ErgodicStat:
    name: str
    estimate: float
    target: float
    stderr: float


@dataclass(frozen=True)
class ErgodicReport:
    t: float
    n_paths: int
    stats: tuple


@dataclass(frozen=True)
class MartingaleReport:
    t: float
    n_paths: int
    mc_mean: float
    mc_stderr: float
    closed_form: Optional[float]
    explodes_at: Optional[float] = None
    supermartingale_deficit: Optional[float] = None
    notes: tuple = ()


@dataclass(frozen=True)
class StoppingReport:
    gamma: float
    gamma_bar: float
    gamma_prime: float
    f_of_t: float
    t: float
    n_paths: int
    p_hat: float
    ci: tuple
    chebychev_term: float
    tail_term: float
    bound: float
    within_bound: bool
    untriggered_fraction: float
    notes: tuple = ()


# ---------------------------------------------------------------------------
# chunked execution


def _chunk_sizes(n_paths: int) -> list:
    sizes = []
    left = int(n_paths)
    while left > 0:
        take = min(_CHUNK, left)
        sizes.append(take)
        left -= take
    return sizes


def _chunk_rng(seed: int, index: int) -> np.random.Generator:
    key = (int(seed) & _MASK64) + (index << 64)
    return np.random.Generator(np.random.Philox(key=key))


def _tail_chunk(payload: dict, rng: np.random.Generator) -> np.ndarray:
    p: ModelParams = payload["p"]
    q: TailQuery = payload["q"]
    n = payload["n"]
    want_inv = q.coeffs.delta != 0.0
    v, int_v, int_inv, _ = sample_variance_batch(p, q.t, q.n_steps, n, want_inv, rng)
    x = q.coeffs.alpha * v + q.coeffs.beta * int_v
    if want_inv:
        x = x + q.coeffs.delta * int_inv
    scaled = x / q.denominator
    if q.direction == "at_least":
        hits = np.count_nonzero(scaled >= q.threshold)
    else:
        hits = np.count_nonzero(scaled < q.threshold)
    return np.array([float(hits), float(n)])


def _ergodic_chunk(payload: dict, rng: np.random.Generator) -> np.ndarray:
    p: ModelParams = payload["p"]
    n = payload["n"]
    t = payload["t"]
    v, int_v, int_inv, _ = sample_variance_batch(p, t, payload["n_steps"], n, True, rng)
    iv = int_v / t
    inv = int_inv / t
    return np.array(
        [
            iv.sum(),
            np.sum(iv * iv),
            inv.sum(),
            np.sum(inv * inv),
            v.sum(),
            np.sum(v**2),
            np.sum(v**3),
            np.sum(v**4),
            float(n),
        ]
    )


def _martingale_chunk(payload: dict, rng: np.random.Generator) -> np.ndarray:
    p: ModelParams = payload["p"]
    n = payload["n"]
    t = payload["t"]
    v, int_v, _, _ = sample_variance_batch(p, t, payload["n_steps"], n, False, rng)
    z = np.exp(log_radon_nikodym_gamma1(v, int_v, t, p))
    return np.array([z.sum(), np.sum(z * z), float(n)])


def _stopping_chunk(payload: dict, rng: np.random.Generator) -> np.ndarray:
    p: ModelParams = payload["p"]
    n = payload["n"]
    t = payload["t"]
    n_steps = payload["n_steps"]
    trigger = payload["trigger"]  # level for lam^2 * int V
    log_threshold = payload["log_threshold"]

    h = t / n_steps
    half_h = 0.5 * h
    lam_sq = p.lam * p.lam

    v = np.full(n, float(p.v0))
    int_v = np.zeros(n)
    log_z = np.zeros(n)
    stopped = np.zeros(n, dtype=bool)
    for k in range(1, n_steps + 1):
        v_next = cir_step(v, h, p, rng)
        int_v_next = int_v + half_h * (v + v_next)
        newly = (~stopped) & (lam_sq * int_v_next >= trigger)
        if np.any(newly):
            log_z[newly] = log_radon_nikodym_gamma1(
                v_next[newly], int_v_next[newly], k * h, p
            )
            stopped |= newly
        v = v_next
        int_v = int_v_next
    open_mask = ~stopped
    if np.any(open_mask):
        log_z[open_mask] = log_radon_nikodym_gamma1(
            v[open_mask], int_v[open_mask], t, p
        )
    hits = np.count_nonzero(log_z >= log_threshold)
    untriggered = np.count_nonzero(open_mask)
    return np.array([float(hits), float(untriggered), float(n)])


_CHUNK_KINDS = {
    "tail": _tail_chunk,
    "ergodic": _ergodic_chunk,
    "martingale": _martingale_chunk,
    "stopping": _stopping_chunk,
}


def _run_chunk(payload: dict) -> np.ndarray:
    rng = _chunk_rng(payload["seed"], payload["index"])
    return _CHUNK_KINDS[payload["kind"]](payload, rng)


def _reduce_chunks(kind: str, seed: int, n_paths: int, static: dict, threads: int):
    payloads = [
        {"kind": kind, "seed": seed, "index": i, "n": size, **static}
        for i, size in enumerate(_chunk_sizes(n_paths))
    ]
    threads = max(1, int(threads))
    if threads == 1 or len(payloads) == 1:
        parts = [_run_chunk(pl) for pl in payloads]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_run_chunk, payloads))
    return np.sum(np.stack(parts), axis=0)


def _wilson(hits: int, n: int) -> tuple:
    """95% Wilson score interval for a binomial proportion."""
    p_hat = hits / n
    z2 = _WILSON_Z * _WILSON_Z
    denom = 1.0 + z2 / n
    center = (p_hat + z2 / (2.0 * n)) / denom
    half = (
        _WILSON_Z
        * math.sqrt(p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n))
        / denom
    )
    # center - half cancels to ~1e-18 instead of 0 when hits == 0 (and
    # symmetrically at hits == n); pin the exact endpoints there.
    lo = 0.0 if hits == 0 else max(0.0, center - half)
    hi = 1.0 if hits == n else min(1.0, center + half)
    return p_hat, lo, hi


# ---------------------------------------------------------------------------
# operations


def estimate_prob(q: TailQuery, p: ModelParams, threads: int = 1):
    """Estimate the tail probability of ``q``; returns (p_hat, (lo, hi)).

    Deterministic in (q.seed, q) and independent of ``threads``.
    """
    validate_params(p)
    total = _reduce_chunks("tail", q.seed, q.n_paths, {"p": p, "q": q}, threads)
    hits, n = int(total[0]), int(total[1])
    p_hat, lo, hi = _wilson(hits, n)
    return p_hat, (lo, hi)


def decay_fit(samples: Sequence) -> DecayEstimate:
    """Fit -log p against t on (t, p_hat, n_paths) triples.

    Weighted least squares with delta-method weights 1/sd(log p_hat); the
    covariance of the fit is propagated from those weights, not rescaled by
    the residuals.  Horizons with p_hat on {0, 1} censor the fit.
    """
    ts = np.array([s[0] for s in samples], dtype=float)
    probs = np.array([s[1] for s in samples], dtype=float)
    ns = np.array([s[2] for s in samples], dtype=float)
    if len(set(ts.tolist())) < 4:
        raise ValueError("need at least 4 distinct t values")

    points = []
    censored = []
    for t, ph, n in zip(ts, probs, ns):
        _, lo, hi = _wilson(int(round(ph * n)), int(n))
        if 0.0 < ph < 1.0:
            half = 0.5 * (math.log(hi) - math.log(max(lo, 1.0 / (n * n))))
            points.append((float(t), math.log(ph), half))
        else:
            floor = 1.0 / n
            points.append((float(t), math.log(floor if ph == 0.0 else 1.0 - floor), math.inf))
            censored.append(float(t))
    if censored:
        note = (
            "censored: p_hat on {0,1} at t = "
            + ", ".join(f"{t:g}" for t in censored)
            + "; smallest resolvable probability is 1/n_paths"
        )
        return DecayEstimate(
            slope=math.nan,
            stderr=math.nan,
            r_squared=math.nan,
            points=tuple(points),
            censored=tuple(censored),
            note=note,
        )

    y = -np.log(probs)
    w = np.sqrt(ns * probs / (1.0 - probs))  # 1 / sd of log p_hat
    coeffs, cov = np.polyfit(ts, y, 1, w=w, cov="unscaled")
    slope = float(coeffs[0])
    stderr = float(math.sqrt(cov[0, 0]))
    fitted = np.polyval(coeffs, ts)
    w2 = w * w
    ybar = float(np.sum(w2 * y) / np.sum(w2))
    ss_res = float(np.sum(w2 * (y - fitted) ** 2))
    ss_tot = float(np.sum(w2 * (y - ybar) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    note = (
        "exponential regime reached"
        if r_squared > 0.95
        else "r^2 at or below 0.95; exponential regime not established"
    )
    return DecayEstimate(
        slope=slope,
        stderr=stderr,
        r_squared=float(r_squared),
        points=tuple(points),
        note=note,
    )


def decay_slope(queries: Sequence, p: ModelParams, threads: int = 1) -> DecayEstimate:
    """Estimate each query's tail probability, then fit the decay slope.

    The queries must agree on everything except the horizon (and the
    step count / f(t) values that scale with it).
    """
    if not queries:
        raise ValueError("need at least 4 distinct t values")
    first = queries[0]
    for q in queries[1:]:
        same = (
            q.coeffs == first.coeffs
            and q.threshold == first.threshold
            and q.direction == first.direction
            and q.speed == first.speed
            and q.n_paths == first.n_paths
            and q.seed == first.seed
        )
        if not same:
            raise ValueError("queries must share everything but t")
    samples = []
    for q in queries:
        p_hat, _ = estimate_prob(q, p, threads)
        samples.append((q.t, p_hat, q.n_paths))
    return decay_fit(samples)


def ldp_check(
    coeffs: FunctionalCoeffs,
    x: float,
    t_grid: Sequence,
    n_paths: int,
    p: ModelParams,
    steps_per_unit_t: float = 20.0,
    seed: int = 0,
    threads: int = 1,
) -> LdpComparison:
    """Compare the empirical decay of P(X_t/t >= x) with inf Lambda* on [x, inf).

    Horizons where the analytic infimum vanishes (x at or below the rate
    minimum) make the event non-decaying; those checks are skipped with a
    "zero-rate point" note instead of fitting a slope to noise.
    """
    validate_params(p)
    if p.b <= 0:
        raise ValueError("ldp_check needs b > 0")
    ts = sorted(float(t) for t in t_grid)
    if len(set(ts)) < 4:
        raise ValueError("need at least 4 distinct t values")
    image = derivative_image(coeffs.beta, coeffs.delta, p)
    if not (image.lo < x < image.hi):
        raise ValueError("x must lie strictly inside the derivative image")

    mn = rate_minimum(coeffs.beta, coeffs.delta, p)
    if x <= mn.x_min:
        return LdpComparison(
            x=x,
            theory_rate=0.0,
            estimate=None,
            relative_deviation=math.nan,
            upper_bound_ok=None,
            skipped=True,
            notes=("zero-rate point",),
        )
    theory = legendre_transform(x, coeffs.beta, coeffs.delta, p).value

    queries = [
        TailQuery(
            coeffs=coeffs,
            threshold=x,
            t=t,
            n_paths=n_paths,
            n_steps=max(1, round(steps_per_unit_t * t)),
            seed=seed,
        )
        for t in ts
    ]
    samples = []
    rows = []
    for q in queries:
        p_hat, (lo, hi) = estimate_prob(q, p, threads)
        samples.append((q.t, p_hat, q.n_paths))
        rows.append((q.t, q.n_paths, p_hat, lo, hi))
    est = decay_fit(samples)
    notes = []
    if est.censored:
        return LdpComparison(
            x=x,
            theory_rate=theory,
            estimate=est,
            relative_deviation=math.nan,
            upper_bound_ok=None,
            skipped=False,
            rows=tuple(rows),
            notes=(est.note,),
        )
    rel = abs(est.slope - theory) / theory

    # Decay upper bound at the largest horizon: the analytic rate should not
    # beat the empirical -log(p)/t by more than the binomial CI allows.
    hi_last = rows[-1][4]
    upper_ok = bool(theory <= -math.log(hi_last) / ts[-1]) if 0 < hi_last < 1 else True
    if est.note:
        notes.append(est.note)
    return LdpComparison(
        x=x,
        theory_rate=theory,
        estimate=est,
        relative_deviation=rel,
        upper_bound_ok=upper_ok,
        skipped=False,
        rows=tuple(rows),
        notes=tuple(notes),
    )


def ergodic_check(
    t: float,
    n_paths: int,
    p: ModelParams,
    n_steps: Optional[int] = None,
    seed: int = 0,
    threads: int = 1,
) -> ErgodicReport:
    """Sample means of the time averages and the terminal law against their
    long-run targets a/b, b/(a-sigma), a/b and a*sigma/b^2."""
    validate_params(p)
    if p.b <= 0:
        raise ValueError("ergodic averages need b > 0")
    if not p.feller_strict:
        raise ValueError(_FELLER_MSG)
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    if n_steps is None:
        n_steps = max(1, round(50.0 * t))
    total = _reduce_chunks(
        "ergodic", seed, n_paths, {"p": p, "t": float(t), "n_steps": int(n_steps)}, threads
    )
    s_iv, s_iv2, s_inv, s_inv2, s_v1, s_v2, s_v3, s_v4, n = total
    n = float(n)

    def mean_stat(name, s1, s2, target):
        mean = s1 / n
        var = max(0.0, s2 / n - mean * mean)
        return ErgodicStat(name, float(mean), float(target), float(math.sqrt(var / n)))

    a, b, sigma = p.a, p.b, p.sigma
    m1 = s_v1 / n
    m2 = s_v2 / n
    m3 = s_v3 / n
    m4 = s_v4 / n
    mu2 = max(0.0, m2 - m1 * m1)
    # central fourth moment from raw moments
    mu4 = m4 - 4.0 * m3 * m1 + 6.0 * m2 * m1 * m1 - 3.0 * m1**4
    var_se = math.sqrt(max(0.0, mu4 - mu2 * mu2) / n)
    stats = (
        mean_stat("mean_int_v_over_t", s_iv, s_iv2, a / b),
        mean_stat("mean_int_inv_v_over_t", s_inv, s_inv2, b / (a - sigma)),
        ErgodicStat("terminal_mean", float(m1), a / b, float(math.sqrt(mu2 / n))),
        ErgodicStat("terminal_variance", float(mu2), a * sigma / (b * b), float(var_se)),
    )
    return ErgodicReport(t=float(t), n_paths=int(n), stats=stats)


def _closed_form_z_mean(t: float, p: ModelParams) -> float:
    """E[Z_t] for the gamma1 change of measure, via the variance-process MGF."""
    s = math.sqrt(2.0 * p.sigma)
    alpha = -p.lam / s
    beta = -p.b * p.lam / s - 0.5 * p.lam * p.lam
    log_prefactor = p.lam * p.v0 / s + p.a * p.lam * t / s
    return math.exp(log_prefactor + log_mgf_alpha_beta(alpha, beta, t, p))


def martingale_check(
    t: float,
    n_paths: int,
    p: ModelParams,
    n_steps: Optional[int] = None,
    seed: int = 0,
    threads: int = 1,
) -> MartingaleReport:
    """MC mean of the pathwise change-of-measure density Z_t against 1 and
    against its closed-form expectation.

    A closed-form explosion before t is reported distinctly (closed_form
    None, explodes_at set); the MC mean below 1 is then the supermartingale
    deficit.
    """
    validate_params(p)
    if not t > 0:
        raise ValueError("t must be positive")
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    if n_steps is None:
        n_steps = max(1, round(50.0 * t))
    total = _reduce_chunks(
        "martingale",
        seed,
        n_paths,
        {"p": p, "t": float(t), "n_steps": int(n_steps)},
        threads,
    )
    s1, s2, n = float(total[0]), float(total[1]), float(total[2])
    mean = s1 / n
    var = max(0.0, s2 / n - mean * mean)
    stderr = math.sqrt(var / n)

    notes = []
    explodes_at = None
    deficit = None
    try:
        closed = _closed_form_z_mean(t, p)
    except MgfExplosionError as exc:
        closed = None
        explodes_at = exc.explodes_at
        deficit = 1.0 - mean
        notes.append(
            "closed-form expectation explodes before t; the density is a "
            "strict supermartingale on this horizon"
        )
    if p.lam == 0.0:
        notes.append("lambda = 0: Z is identically 1")
    return MartingaleReport(
        t=float(t),
        n_paths=int(n),
        mc_mean=float(mean),
        mc_stderr=float(stderr),
        closed_form=closed,
        explodes_at=explodes_at,
        supermartingale_deficit=deficit,
        notes=tuple(notes),
    )


def stopping_time_experiment(
    gamma: float,
    gamma_bar: float,
    f_of_t: float,
    t: float,
    n_paths: int,
    p: ModelParams,
    gamma_prime: Optional[float] = None,
    n_steps: Optional[int] = None,
    seed: int = 0,
    threads: int = 1,
) -> StoppingReport:
    """Estimate P(Z_{tau1} >= e^{(gamma_bar-gamma) f(t)}) and compare it with
    the Chebychev-plus-tail bound.

    tau1 caps the first grid time where int_0^s gamma1^2 reaches
    2*gamma_prime*f(t); gamma_prime defaults to the midpoint of
    (gamma_bar, a*lam^2/(2b)) and must satisfy
    0 < gamma < gamma_bar < gamma_prime < a*lam^2/(2b).  The tail term
    P(int_0^t gamma1^2 < 2*gamma_prime*f(t)) is replaced by the Wilson upper
    bound of the untriggered-path fraction, erring on the generous side.
    """
    validate_params(p)
    problems = []
    if not 0 < gamma < gamma_bar:
        problems.append("need 0 < gamma < gamma_bar")
    if not f_of_t > 0:
        problems.append("f_of_t must be positive")
    if not t > 0:
        problems.append("t must be positive")
    if n_paths < 100:
        problems.append("n_paths must be at least 100")

    notes = []
    if p.lam == 0.0:
        # gamma1 vanishes: Z is identically 1 and the trigger never fires.
        if gamma_prime is None:
            gamma_prime = gamma_bar + 1.0
        notes.append(
            "lambda = 0: Z_tau1 is identically 1, the outcome is decided by "
            "the threshold sign alone"
        )
    else:
        if p.b <= 0:
            problems.append("b must be positive (the gamma_prime cap needs a*lam^2/(2b))")
        else:
            cap = p.a * p.lam * p.lam / (2.0 * p.b)
            if gamma_prime is None:
                gamma_prime = 0.5 * (gamma_bar + cap)
            if not gamma_bar < gamma_prime < cap:
                problems.append(
                    "need gamma_bar < gamma_prime < a*lam^2/(2b) = " f"{cap:.6g}"
                )
    if problems:
        raise ValueError("; ".join(problems))
    if n_steps is None:
        n_steps = max(1, round(10.0 * t))

    static = {
        "p": p,
        "t": float(t),
        "n_steps": int(n_steps),
        "trigger": 2.0 * gamma_prime * f_of_t,
        "log_threshold": (gamma_bar - gamma) * f_of_t,
    }
    total = _reduce_chunks("stopping", seed, n_paths, static, threads)
    hits, untriggered, n = int(total[0]), int(total[1]), int(total[2])
    p_hat, lo, hi = _wilson(hits, n)
    _, _, tail_upper = _wilson(untriggered, n)
    cheb = 2.0 * gamma_prime / ((gamma_prime - gamma + gamma_bar) ** 2 * f_of_t)
    bound = cheb + tail_upper
    return StoppingReport(
        gamma=float(gamma),
        gamma_bar=float(gamma_bar),
        gamma_prime=float(gamma_prime),
        f_of_t=float(f_of_t),
        t=float(t),
        n_paths=n,
        p_hat=p_hat,
        ci=(lo, hi),
        chebychev_term=cheb,
        tail_term=tail_upper,
        bound=bound,
        within_bound=bool(p_hat <= bound),
        untriggered_fraction=untriggered / n,
        notes=tuple(notes),
    )
