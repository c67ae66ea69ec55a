"""Monte Carlo estimators: tail probabilities, decay fits, ergodic and
martingale diagnostics, and the stopped-density experiment.

Statistical assertions use generous multiples of the reported standard
errors so the suite stays deterministic under the fixed seeds.
"""

import math

import numpy as np
import pytest

from heston_lda import (
    DecayEstimate,
    FunctionalCoeffs,
    ModelParams,
    TailQuery,
    decay_fit,
    decay_slope,
    ergodic_check,
    estimate_prob,
    ldp_check,
    legendre_transform,
    martingale_check,
    stopping_time_experiment,
)
from heston_lda.mc import _closed_form_z_mean, _wilson


def params(**kw):
    base = dict(mu=0.0, r=0.0, a=2.0, b=1.0, sigma=0.5, rho=-0.5, v0=1.0, lam=0.0)
    base.update(kw)
    return ModelParams(**base)


INT_V = FunctionalCoeffs(beta=1.0)


# ---------------------------------------------------------------------------
# Wilson intervals


def test_wilson_interval_coverage():
    rng = np.random.default_rng(915)
    n, p_true, reps = 500, 0.3, 1000
    covered = 0
    for hits in rng.binomial(n, p_true, size=reps):
        _, lo, hi = _wilson(int(hits), n)
        covered += lo <= p_true <= hi
    assert covered / reps >= 0.93


def test_wilson_interval_edges():
    p_hat, lo, hi = _wilson(0, 50)
    assert p_hat == 0.0 and lo == 0.0 and 0.0 < hi < 0.2
    p_hat, lo, hi = _wilson(50, 50)
    assert p_hat == 1.0 and hi == 1.0 and 0.8 < lo < 1.0


# ---------------------------------------------------------------------------
# decay fits


def test_decay_fit_recovers_exact_exponential():
    ts = [2.0, 4.0, 6.0, 8.0, 12.0, 16.0, 20.0]
    est = decay_fit([(t, math.exp(-0.3 * t), 10**7) for t in ts])
    assert est.slope == pytest.approx(0.3, abs=1e-10)
    assert est.stderr < 1e-3
    assert est.r_squared == pytest.approx(1.0, abs=1e-12)
    assert est.note == "exponential regime reached"
    assert not est.censored


def test_decay_fit_censors_unresolvable_horizons():
    samples = [(t, math.exp(-0.5 * t), 10**4) for t in (2.0, 4.0, 6.0, 8.0)]
    samples.append((30.0, 0.0, 10**4))
    est = decay_fit(samples)
    assert math.isnan(est.slope) and math.isnan(est.stderr)
    assert math.isnan(est.r_squared)
    assert est.censored == (30.0,)
    assert "censored: p_hat on {0,1} at t = 30" in est.note
    assert "1/n_paths" in est.note
    # the censored horizon still appears in the points, at the 1/n floor
    floors = [pt for pt in est.points if pt[0] == 30.0]
    assert floors and floors[0][1] == pytest.approx(math.log(1e-4))


def test_decay_fit_needs_four_distinct_horizons():
    with pytest.raises(ValueError, match="4 distinct t"):
        decay_fit([(1.0, 0.5, 100), (2.0, 0.3, 100), (2.0, 0.3, 100)])


def test_decay_slope_rejects_mixed_queries():
    qs = [
        TailQuery(coeffs=INT_V, threshold=3.0, t=2.0, n_paths=200),
        TailQuery(coeffs=INT_V, threshold=3.5, t=4.0, n_paths=200),
    ]
    with pytest.raises(ValueError, match="share everything but t"):
        decay_slope(qs, params())


# ---------------------------------------------------------------------------
# tail queries


def test_tail_query_collects_all_violations():
    with pytest.raises(ValueError) as err:
        TailQuery(
            coeffs=INT_V,
            threshold=math.nan,
            t=-1.0,
            n_paths=10,
            direction="sideways",
            speed="warp",
        )
    msg = str(err.value)
    for fragment in (
        "direction must be 'at_least' or 'below'",
        "speed must be 'linear' or 'custom'",
        "t must be positive",
        "n_paths must be at least 100",
        "threshold must not be NaN",
    ):
        assert fragment in msg


def test_tail_query_speed_and_f_pairing():
    with pytest.raises(ValueError, match="requires a positive f_of_t"):
        TailQuery(coeffs=INT_V, threshold=1.0, t=1.0, n_paths=100, speed="custom")
    with pytest.raises(ValueError, match="only meaningful with speed='custom'"):
        TailQuery(coeffs=INT_V, threshold=1.0, t=1.0, n_paths=100, f_of_t=3.0)
    q = TailQuery(
        coeffs=INT_V, threshold=1.0, t=4.0, n_paths=100, speed="custom", f_of_t=2.0
    )
    assert q.denominator == 2.0
    assert TailQuery(coeffs=INT_V, threshold=1.0, t=4.0, n_paths=100).denominator == 4.0


def test_tail_query_default_steps():
    q = TailQuery(coeffs=INT_V, threshold=1.0, t=2.5, n_paths=100)
    assert q.n_steps == 50


def test_estimate_prob_infinite_thresholds():
    q = TailQuery(coeffs=INT_V, threshold=-math.inf, t=1.0, n_paths=200)
    p_hat, (lo, hi) = estimate_prob(q, params())
    assert p_hat == 1.0 and hi == 1.0
    q = TailQuery(coeffs=INT_V, threshold=math.inf, t=1.0, n_paths=200)
    p_hat, (lo, hi) = estimate_prob(q, params())
    assert p_hat == 0.0 and lo == 0.0


def test_estimate_prob_directions_partition():
    kw = dict(coeffs=INT_V, threshold=2.1, t=1.0, n_paths=1000, seed=7)
    up, _ = estimate_prob(TailQuery(direction="at_least", **kw), params())
    down, _ = estimate_prob(TailQuery(direction="below", **kw), params())
    assert up + down == 1.0


def test_estimate_prob_deterministic_and_thread_invariant():
    # 70000 paths spans two 65536-path substream chunks
    q = TailQuery(coeffs=INT_V, threshold=2.2, t=1.0, n_paths=70000, seed=11)
    first = estimate_prob(q, params(), threads=1)
    again = estimate_prob(q, params(), threads=1)
    multi = estimate_prob(q, params(), threads=3)
    assert first == again == multi
    other_seed = estimate_prob(
        TailQuery(coeffs=INT_V, threshold=2.2, t=1.0, n_paths=70000, seed=12),
        params(),
    )
    assert other_seed != first


def test_tail_prob_at_ergodic_median_level():
    """At the ergodic mean the time average is above threshold about half
    the time for large t."""
    q = TailQuery(coeffs=INT_V, threshold=2.0, t=200.0, n_paths=2000,
                  n_steps=1000, seed=3)
    p_hat, _ = estimate_prob(q, params())
    assert abs(p_hat - 0.5) < 0.1


def test_tail_prob_decays_for_rare_level():
    q = TailQuery(coeffs=INT_V, threshold=3.0, t=50.0, n_paths=2000, seed=3)
    p_hat, _ = estimate_prob(q, params())
    assert p_hat < 0.01


# ---------------------------------------------------------------------------
# LDP comparison


def test_ldp_check_skips_zero_rate_points():
    # below the rate minimum the tail event has no exponential decay
    rep = ldp_check(FunctionalCoeffs(beta=1.0, delta=1.0), 2.5,
                    (5.0, 10.0, 15.0, 20.0), 200, params())
    assert rep.skipped and rep.estimate is None
    assert rep.theory_rate == 0.0
    assert rep.upper_bound_ok is None
    assert math.isnan(rep.relative_deviation)
    assert rep.notes == ("zero-rate point",)

    at_mean = ldp_check(INT_V, 2.0, (5.0, 10.0, 15.0, 20.0), 200, params())
    assert at_mean.skipped


def test_ldp_check_small_run_structure():
    grid = (2.0, 3.0, 4.0, 5.0)
    rep = ldp_check(INT_V, 3.5, grid, 400, params(), steps_per_unit_t=10.0, seed=1)
    assert not rep.skipped
    assert rep.theory_rate == pytest.approx(
        legendre_transform(3.5, 1.0, 0.0, params()).value, rel=1e-14
    )
    assert len(rep.rows) == 4
    for row, t in zip(rep.rows, grid):
        assert row[0] == t and row[1] == 400
        assert 0.0 <= row[3] <= row[2] <= row[4] <= 1.0
    assert isinstance(rep.estimate, DecayEstimate)
    if not rep.estimate.censored:
        assert rep.relative_deviation >= 0.0
        assert isinstance(rep.upper_bound_ok, bool)


def test_ldp_check_rejections():
    grid = (5.0, 10.0, 15.0, 20.0)
    with pytest.raises(ValueError, match="strictly inside"):
        ldp_check(INT_V, -1.0, grid, 200, params())
    with pytest.raises(ValueError, match="b > 0"):
        ldp_check(INT_V, 3.0, grid, 200, params(b=-1.0))
    with pytest.raises(ValueError, match="4 distinct t"):
        ldp_check(INT_V, 3.5, (5.0, 5.0, 10.0, 15.0), 200, params())


# ---------------------------------------------------------------------------
# ergodic diagnostics


def test_ergodic_check_matches_long_run_targets():
    rep = ergodic_check(200.0, 1000, params(), n_steps=10000, seed=5)
    assert rep.n_paths == 1000
    names = [s.name for s in rep.stats]
    assert names == [
        "mean_int_v_over_t",
        "mean_int_inv_v_over_t",
        "terminal_mean",
        "terminal_variance",
    ]
    targets = {
        "mean_int_v_over_t": 2.0,
        "mean_int_inv_v_over_t": 1.0 / 1.5,
        "terminal_mean": 2.0,
        "terminal_variance": 1.0,
    }
    for stat in rep.stats:
        assert stat.target == pytest.approx(targets[stat.name], rel=1e-15)
        # 4 sigma plus a small allowance for the O(1/t) start-up transient
        assert abs(stat.estimate - stat.target) <= 4.0 * stat.stderr + 0.012


def test_ergodic_check_validation():
    with pytest.raises(ValueError, match="b > 0"):
        ergodic_check(10.0, 100, params(b=-0.5))
    with pytest.raises(ValueError, match="Feller"):
        ergodic_check(10.0, 100, params(a=0.4))
    with pytest.raises(ValueError, match="at least 2"):
        ergodic_check(10.0, 1, params())


# ---------------------------------------------------------------------------
# martingale diagnostics


def test_martingale_lambda_zero_is_exact():
    rep = martingale_check(2.0, 200, params(lam=0.0))
    assert rep.mc_mean == 1.0 and rep.mc_stderr == 0.0
    assert rep.closed_form == pytest.approx(1.0, rel=1e-14)
    assert rep.explodes_at is None and rep.supermartingale_deficit is None
    assert any("identically 1" in n for n in rep.notes)


def test_martingale_mean_is_one():
    rep = martingale_check(5.0, 20000, params(lam=0.1), n_steps=500, seed=9)
    assert rep.closed_form == pytest.approx(1.0, abs=1e-9)
    assert abs(rep.mc_mean - 1.0) <= 3.0 * rep.mc_stderr + 1e-3
    assert rep.explodes_at is None


def test_martingale_closed_form_is_one_across_lambda():
    """The exponential compensator matches the variance-process MGF exactly,
    so the closed-form mean is 1 for every lambda and horizon."""
    for lam in (-2.0, -0.5, 0.3, 1.5):
        for t in (0.5, 3.0, 20.0):
            assert math.log(_closed_form_z_mean(t, params(lam=lam))) == pytest.approx(
                0.0, abs=1e-9
            )


def test_martingale_validation():
    with pytest.raises(ValueError, match="t must be positive"):
        martingale_check(0.0, 200, params())
    with pytest.raises(ValueError, match="at least 2"):
        martingale_check(1.0, 1, params())


# ---------------------------------------------------------------------------
# stopped-density experiment


def test_stopping_probability_within_bound():
    rep = stopping_time_experiment(
        gamma=0.05, gamma_bar=0.1, f_of_t=10.0, t=100.0, n_paths=2000,
        p=params(lam=1.0), seed=13,
    )
    assert rep.gamma_prime == pytest.approx(0.55, rel=1e-15)  # midpoint of (0.1, 1.0)
    assert rep.chebychev_term == pytest.approx(
        2.0 * 0.55 / ((0.55 - 0.05 + 0.1) ** 2 * 10.0), rel=1e-12
    )
    assert rep.within_bound
    assert rep.p_hat <= rep.bound
    assert rep.untriggered_fraction < 0.01  # trigger level 11 << E int gamma1^2 = 200
    assert rep.tail_term < 0.01
    assert rep.ci[0] <= rep.p_hat <= rep.ci[1]


def test_stopping_probability_decays_with_horizon():
    """With f = sqrt(t) the deviation probability falls as t grows."""
    shared = dict(gamma=0.05, gamma_bar=0.1, p=params(lam=1.0), n_paths=2000, seed=13)
    early = stopping_time_experiment(f_of_t=10.0, t=100.0, **shared)
    late = stopping_time_experiment(f_of_t=20.0, t=400.0, **shared)
    assert late.p_hat < early.p_hat
    assert late.bound < early.bound


def test_stopping_lambda_zero_degenerates():
    rep = stopping_time_experiment(
        gamma=0.1, gamma_bar=0.2, f_of_t=5.0, t=1.0, n_paths=200, p=params(lam=0.0)
    )
    assert rep.p_hat == 0.0
    assert rep.untriggered_fraction == 1.0
    assert rep.within_bound
    assert any("identically 1" in n for n in rep.notes)


def test_stopping_ordering_violations_all_named():
    with pytest.raises(ValueError) as err:
        stopping_time_experiment(
            gamma=-1.0, gamma_bar=0.1, f_of_t=-1.0, t=-2.0, n_paths=10,
            p=params(lam=1.0),
        )
    msg = str(err.value)
    for fragment in (
        "0 < gamma < gamma_bar",
        "f_of_t must be positive",
        "t must be positive",
        "n_paths must be at least 100",
    ):
        assert fragment in msg
    with pytest.raises(ValueError, match=r"gamma_bar < gamma_prime < a\*lam\^2"):
        stopping_time_experiment(
            gamma=0.05, gamma_bar=0.1, f_of_t=10.0, t=10.0, n_paths=200,
            p=params(lam=1.0), gamma_prime=2.0,
        )
    with pytest.raises(ValueError, match="b must be positive"):
        stopping_time_experiment(
            gamma=0.05, gamma_bar=0.1, f_of_t=10.0, t=10.0, n_paths=200,
            p=params(lam=1.0, b=-1.0),
        )


# ---------------------------------------------------------------------------
# reproducibility across the reduction layer


def test_reports_thread_invariant_across_chunks():
    p = params(lam=0.3)
    erg1 = ergodic_check(1.0, 70000, p, n_steps=50, seed=21, threads=1)
    erg2 = ergodic_check(1.0, 70000, p, n_steps=50, seed=21, threads=2)
    assert erg1 == erg2
    mart1 = martingale_check(1.0, 70000, p, n_steps=50, seed=21, threads=1)
    mart2 = martingale_check(1.0, 70000, p, n_steps=50, seed=21, threads=2)
    assert mart1 == mart2
