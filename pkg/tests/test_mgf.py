"""Finite-horizon moment generating functions.

Oracles:
  * the Riccati ODE system psi' = sigma psi^2 - b psi + beta, phi' = a psi
    integrated with scipy (independent of the closed form under test),
  * mpmath's hyp1f1 at 50 digits for the confluent series,
  * Monte Carlo with exact variance transitions for the three-term
    functional, where no finite-dimensional ODE oracle exists.
"""

import math

import mpmath
import numpy as np
import pytest
from scipy.integrate import solve_ivp

from heston_lda import (
    FunctionalCoeffs,
    MgfExplosionError,
    MgfQuery,
    ModelParams,
    cgf_limit,
    convergence_gap,
    kummer_1f1,
    log_mgf_alpha_beta,
    log_mgf_full,
    sample_variance_batch,
)

P = ModelParams()


def riccati_ode_log_mgf(alpha, beta, t, p, rtol=1e-11):
    """Numerically integrated log E exp(alpha V_t + beta int V)."""

    def rhs(_, y):
        psi = y[0]
        return [p.sigma * psi * psi - p.b * psi + beta, p.a * psi]

    sol = solve_ivp(rhs, (0.0, t), [alpha, 0.0], method="DOP853",
                    rtol=rtol, atol=1e-13)
    assert sol.success
    return float(sol.y[1, -1] + sol.y[0, -1] * p.v0)


def riccati_ode_blowup(alpha, beta, p, t_max=20.0):
    """First time the Riccati solution passes 1e8, or inf."""

    def rhs(_, y):
        psi = y[0]
        return [p.sigma * psi * psi - p.b * psi + beta]

    def crossing(_, y):
        return y[0] - 1e8

    crossing.terminal = True
    sol = solve_ivp(rhs, (0.0, t_max), [alpha], events=crossing,
                    rtol=1e-10, atol=1e-12)
    hits = sol.t_events[0]
    return float(hits[0]) if hits.size else math.inf


# ---------------------------------------------------------------------------
# two-term closed form vs the ODE


def admissible_query(rng, p):
    """Draw (alpha, beta, t) with a finite moment at every horizon."""
    beta_max = p.b * p.b / (4.0 * p.sigma)
    beta = float(rng.uniform(-3.0, beta_max - 0.05))
    chi = math.sqrt(p.b * p.b - 4.0 * p.sigma * beta)
    x_minus = (p.b - chi) / (2.0 * p.sigma)
    x_plus = (p.b + chi) / (2.0 * p.sigma)
    alpha = float(rng.uniform(x_minus - 2.0, x_plus - 0.05 * (x_plus - x_minus)))
    t = float(rng.uniform(0.1, 15.0))
    return alpha, beta, t


@pytest.mark.parametrize("p", [P, ModelParams(b=-0.5), ModelParams(b=0.0)],
                         ids=["ergodic", "b_negative", "b_zero"])
def test_two_term_mgf_matches_ode(p, rng):
    for _ in range(10):
        alpha, beta, t = admissible_query(rng, p)
        got = log_mgf_alpha_beta(alpha, beta, t, p)
        want = riccati_ode_log_mgf(alpha, beta, t, p)
        assert got == pytest.approx(want, rel=1e-7, abs=1e-9)


def test_two_term_mgf_trivial_query():
    assert log_mgf_alpha_beta(0.0, 0.0, 7.0, P) == 0.0


def test_constant_riccati_branch_is_exact():
    chi = math.sqrt(P.b**2 - 4 * P.sigma * (-1.0))
    x_minus = (P.b - chi) / (2 * P.sigma)
    got = log_mgf_alpha_beta(x_minus, -1.0, 3.0, P)
    assert got == pytest.approx(P.a * x_minus * 3.0 + x_minus * P.v0, rel=1e-14)


def test_double_root_branch_continuous(rng):
    beta_star = P.b**2 / (4.0 * P.sigma)
    for alpha in (-0.5, 0.3, 0.9):
        at = log_mgf_alpha_beta(alpha, beta_star, 2.0, P)
        near = log_mgf_alpha_beta(alpha, beta_star - 1e-10, 2.0, P)
        assert at == pytest.approx(near, rel=1e-5)
        assert at == pytest.approx(riccati_ode_log_mgf(alpha, beta_star, 2.0, P),
                                   rel=1e-7)


def test_moment_infinite_for_every_horizon_when_chi_complex():
    with pytest.raises(ValueError, match="infinite for every horizon"):
        log_mgf_alpha_beta(0.0, 1.0, 1.0, P)  # beta > b^2/(4 sigma)


def test_explosion_time_matches_ode_blowup():
    alpha, beta = 5.0, 0.2
    with pytest.raises(MgfExplosionError) as err:
        log_mgf_alpha_beta(alpha, beta, 5.0, P)
    t_star = err.value.explodes_at
    assert t_star == pytest.approx(riccati_ode_blowup(alpha, beta, P), rel=1e-5)
    # finite strictly before the explosion, infinite at and after it
    value = log_mgf_alpha_beta(alpha, beta, 0.999 * t_star, P)
    assert math.isfinite(value)
    with pytest.raises(MgfExplosionError):
        log_mgf_alpha_beta(alpha, beta, t_star, P)


def test_explosion_requires_alpha_beyond_upper_root():
    # alpha exactly at the upper root never explodes, any horizon
    chi = math.sqrt(P.b**2 - 4 * P.sigma * 0.2)
    x_plus = (P.b + chi) / (2 * P.sigma)
    value = log_mgf_alpha_beta(x_plus, 0.2, 50.0, P)
    assert math.isfinite(value)


def test_t_must_be_positive():
    with pytest.raises(ValueError, match="t must be positive"):
        log_mgf_alpha_beta(0.1, 0.1, 0.0, P)


# ---------------------------------------------------------------------------
# confluent hypergeometric series


def test_kummer_identity_exponential():
    for z in np.linspace(-10.0, 10.0, 201):
        assert kummer_1f1(1.0, 1.0, float(z)) == pytest.approx(
            math.exp(z), rel=1e-12
        )


def test_kummer_identity_expm1_over_z():
    for z in np.linspace(-10.0, 10.0, 201):
        z = float(z)
        if z == 0.0:
            continue
        assert kummer_1f1(1.0, 2.0, z) == pytest.approx(
            math.expm1(z) / z, rel=1e-12
        )


def test_kummer_against_mpmath(rng):
    mpmath.mp.dps = 50
    for _ in range(40):
        u = float(rng.uniform(0.1, 12.0))
        v = float(rng.uniform(0.2, 14.0))
        z = float(rng.uniform(-49.0, 49.0))
        want = float(mpmath.hyp1f1(u, v, z))
        assert kummer_1f1(u, v, z) == pytest.approx(want, rel=1e-12)


def test_kummer_at_zero_and_rejections():
    assert kummer_1f1(2.3, 4.5, 0.0) == 1.0
    with pytest.raises(ValueError, match="series cap exceeded"):
        kummer_1f1(1.0, 1.0, 50.5)
    with pytest.raises(ValueError, match="nonpositive integer"):
        kummer_1f1(1.0, 0.0, 1.0)
    with pytest.raises(ValueError, match="nonpositive integer"):
        kummer_1f1(1.0, -3.0, 1.0)


# ---------------------------------------------------------------------------
# three-term closed form


def test_full_mgf_overlaps_two_term_form_when_delta_zero(rng):
    """30 random delta = 0 queries: both closed forms, 1e-8 agreement."""
    for _ in range(30):
        alpha, beta, t = admissible_query(rng, P)
        t = max(t, 1.0)  # below t ~ 1 the series argument exceeds its cap
        u = float(rng.uniform(0.2, 1.5))
        if u * beta >= P.b**2 / (4 * P.sigma) or u * alpha >= 1.6:
            continue
        q = MgfQuery(coeffs=FunctionalCoeffs(alpha, beta, 0.0), t=t, u=u)
        try:
            full = log_mgf_full(q, P)
        except MgfExplosionError:
            with pytest.raises(MgfExplosionError):
                log_mgf_alpha_beta(u * alpha, u * beta, t, P)
            continue
        two = log_mgf_alpha_beta(u * alpha, u * beta, t, P)
        assert full == pytest.approx(two, rel=1e-8, abs=1e-8)


def test_full_mgf_against_monte_carlo(rng):
    """No ODE oracle exists once delta != 0; exact-transition MC is one."""
    cases = [
        (FunctionalCoeffs(0.1, 0.15, -0.3), 2.0),
        (FunctionalCoeffs(0.0, -0.5, 0.3), 3.0),
    ]
    n = 60_000
    for coeffs, t in cases:
        want = log_mgf_full(MgfQuery(coeffs=coeffs, t=t, u=1.0), P)
        v, int_v, int_inv, _ = sample_variance_batch(
            P, t, round(200 * t), n, True, rng
        )
        x = coeffs.alpha * v + coeffs.beta * int_v + coeffs.delta * int_inv
        w = np.exp(x)
        mean = float(w.mean())
        rel_se = float(w.std() / (mean * math.sqrt(n)))
        assert abs(math.log(mean) - want) <= 4.0 * rel_se + 2e-3


def test_full_mgf_explosion_consistent_with_two_term_form():
    coeffs = FunctionalCoeffs(5.0, 0.2, 0.0)
    with pytest.raises(MgfExplosionError):
        log_mgf_alpha_beta(5.0, 0.2, 5.0, P)
    with pytest.raises(MgfExplosionError, match="explodes before t"):
        log_mgf_full(MgfQuery(coeffs=coeffs, t=5.0, u=1.0), P)
    # strictly inside the finite window both forms agree (close to the
    # explosion the series argument exceeds its cap and the 1F1 form refuses)
    t_star = riccati_ode_blowup(5.0, 0.2, P)
    value = log_mgf_full(MgfQuery(coeffs=coeffs, t=0.5 * t_star, u=1.0), P)
    assert value == pytest.approx(
        log_mgf_alpha_beta(5.0, 0.2, 0.5 * t_star, P), rel=1e-8
    )


def test_full_mgf_rejections():
    q = MgfQuery(coeffs=FunctionalCoeffs(0.0, 0.1, 0.1), t=1.0, u=1.0)
    with pytest.raises(ValueError, match="requires b != 0"):
        log_mgf_full(q, ModelParams(b=0.0))
    with pytest.raises(ValueError, match="Feller condition a>sigma"):
        log_mgf_full(q, ModelParams(a=0.4, sigma=0.5))
    with pytest.raises(ValueError, match="complex A"):
        log_mgf_full(MgfQuery(coeffs=FunctionalCoeffs(0.0, 1.0, 0.0), t=1.0, u=1.0), P)
    with pytest.raises(ValueError, match="complex nu"):
        log_mgf_full(MgfQuery(coeffs=FunctionalCoeffs(0.0, 0.1, 2.0), t=1.0, u=1.0), P)
    assert log_mgf_full(MgfQuery(coeffs=FunctionalCoeffs(1.0, 1.0, 1.0), t=1.0,
                                 u=0.0), P) == 0.0


def test_query_validation():
    with pytest.raises(ValueError, match="t must be a positive real"):
        MgfQuery(coeffs=FunctionalCoeffs(), t=-1.0, u=0.5)
    with pytest.raises(ValueError, match="u must be a finite real"):
        MgfQuery(coeffs=FunctionalCoeffs(), t=1.0, u=math.inf)


# ---------------------------------------------------------------------------
# convergence toward the limiting CGF


def test_gap_shrinks_like_one_over_t():
    coeffs = FunctionalCoeffs(0.0, 1.0, 0.0)
    gaps = dict(convergence_gap(0.25, coeffs, [50.0, 100.0, 200.0, 400.0], P))
    assert gaps[400.0] < gaps[200.0] < gaps[100.0] < gaps[50.0]
    # halving rate consistent with a C/t tail
    assert gaps[200.0] / gaps[100.0] == pytest.approx(0.5, abs=0.1)


def test_gap_shrinks_for_three_term_functional():
    coeffs = FunctionalCoeffs(0.0, 1.0, -1.0)
    pairs = convergence_gap(0.25, coeffs, [25.0, 50.0, 100.0, 200.0], P)
    gaps = [g for _, g in pairs]
    assert all(g2 < g1 for g1, g2 in zip(gaps, gaps[1:]))
    assert gaps[-1] < 0.02


def test_gap_is_alpha_insensitive_in_the_limit():
    lean = convergence_gap(0.25, FunctionalCoeffs(0.0, 1.0, 0.0), [300.0], P)
    rich = convergence_gap(0.25, FunctionalCoeffs(0.8, 1.0, 0.0), [300.0], P)
    limit = cgf_limit(0.25, 1.0, 0.0, P)
    assert limit > 0
    assert lean[0][1] < 0.01 and rich[0][1] < 0.01


def test_gap_grid_validation():
    coeffs = FunctionalCoeffs(0.0, 1.0, 0.0)
    with pytest.raises(ValueError, match="nonempty"):
        convergence_gap(0.25, coeffs, [], P)
    with pytest.raises(ValueError, match="positive"):
        convergence_gap(0.25, coeffs, [-1.0, 2.0], P)
    with pytest.raises(ValueError, match="strictly increasing"):
        convergence_gap(0.25, coeffs, [2.0, 2.0], P)
