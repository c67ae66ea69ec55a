"""Finite-horizon log moment generating functions of the Heston path
functionals, in two independent closed forms, plus the Kummer confluent
hypergeometric series and convergence diagnostics toward the limiting CGF.

Form 1 (delta = 0): log E exp(alpha*V_t + beta*int V) from the Riccati
solution of the affine ansatz exp(A(t) + B(t)*V_0).  With
chi = sqrt(b^2 - 4 sigma beta) and Riccati roots x_pm = (b +- chi)/(2 sigma),

    B(t) = (x_plus*E - x_minus*R) / (E - R),      E = e^{-chi t},
    A(t) = a*x_minus*t - (a/sigma) * log((E - R)/(1 - R)),

where R = (alpha - x_plus)/(alpha - x_minus).  The moment explodes in finite
time exactly when alpha > x_plus, at time -log(R)/chi; the explosion check
is analytic, not numerical.

Form 2 (delta allowed, b != 0): the Gamma/sinh/cosh/1F1 product for
log E exp(u*(alpha*V_t + beta*int V + delta*int 1/V)), evaluated in shifted
log-space so that A*t/2 in the thousands stays finite.  The 1F1 argument is

    z = A^2 V_0 / (2 sigma sinh(x) * (btilde*sinh(x) + A*cosh(x))),

with x = A*t/2 and btilde = b - 2 sigma alpha u; it decays like e^{-A t}
and vanishes in the large-t limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import FunctionalCoeffs, ModelParams
from .rates import cgf_limit

__all__ = [
    "MgfQuery",
    "MgfExplosionError",
    "log_mgf_alpha_beta",
    "log_mgf_full",
    "kummer_1f1",
    "convergence_gap",
]

_LOG2 = math.log(2.0)
_FELLER_MSG = "Feller condition a>sigma required when delta != 0"


class MgfExplosionError(ValueError):
    """The requested moment is infinite strictly before the horizon."""

    def __init__(self, message: str, explodes_at: float):
        super().__init__(message)
        self.explodes_at = explodes_at


@dataclass(frozen=True)
class MgfQuery:
    """One finite-horizon MGF evaluation: log E exp(u * X_t^{coeffs})."""

    coeffs: FunctionalCoeffs
    t: float
    u: float

    def __post_init__(self) -> None:
        if not (self.t > 0 and math.isfinite(self.t)):
            raise ValueError("t must be a positive real")
        if not math.isfinite(self.u):
            raise ValueError("u must be a finite real")


def log_mgf_alpha_beta(
    alpha: float, beta: float, t: float, p: ModelParams
) -> float:
    """log E exp(alpha*V_t + beta*int_0^t V ds), Riccati closed form."""
    if t <= 0:
        raise ValueError("t must be positive")
    if alpha == 0.0 and beta == 0.0:
        return 0.0
    a, b, sigma, v0 = p.a, p.b, p.sigma, p.v0
    chi_sq = b * b - 4.0 * sigma * beta
    if chi_sq < 0:
        raise ValueError(
            "domain error: b^2 - 4*sigma*beta < 0, chi is complex and the "
            "moment is infinite for every horizon"
        )
    chi = math.sqrt(chi_sq)

    if chi == 0.0:
        # Double Riccati root x0 = b/(2 sigma).
        x0 = b / (2.0 * sigma)
        if alpha == x0:
            return a * x0 * t + x0 * v0
        denom = 1.0 - sigma * (alpha - x0) * t
        if alpha > x0:
            explodes_at = 1.0 / (sigma * (alpha - x0))
            if explodes_at <= t:
                raise MgfExplosionError(
                    f"mgf explodes before t: explosion time {explodes_at:.6g} "
                    f"<= horizon {t:.6g}",
                    explodes_at=explodes_at,
                )
        b_t = x0 + (alpha - x0) / denom
        return a * x0 * t - (a / sigma) * math.log(denom) + b_t * v0

    x_plus = (b + chi) / (2.0 * sigma)
    x_minus = (b - chi) / (2.0 * sigma)
    if alpha == x_minus:
        # Constant Riccati solution.
        return a * x_minus * t + x_minus * v0
    ratio = (alpha - x_plus) / (alpha - x_minus)
    if alpha > x_plus:
        explodes_at = -math.log(ratio) / chi
        if explodes_at <= t:
            raise MgfExplosionError(
                f"mgf explodes before t: explosion time {explodes_at:.6g} "
                f"<= horizon {t:.6g}",
                explodes_at=explodes_at,
            )
    decay = math.exp(-chi * t)
    gap = decay - ratio
    b_t = (x_plus * decay - x_minus * ratio) / gap
    return (
        a * x_minus * t
        - (a / sigma) * math.log(gap / (1.0 - ratio))
        + b_t * v0
    )


def kummer_1f1(u: float, v: float, z: float) -> float:
    """Confluent hypergeometric 1F1(u; v; z) by direct series summation.

    Terms are accumulated until |term| < 1e-15 * |partial sum|; arguments
    with |z| > 50 are refused (the callers' z decays with the horizon, so
    the cap is never binding there).  Negative z is routed through the
    reflection 1F1(u, v, z) = e^z 1F1(v-u, v, -z), which keeps every summand
    positive and avoids catastrophic cancellation.
    """
    if v <= 0 and float(v).is_integer():
        raise ValueError("v must not be a nonpositive integer")
    if abs(z) > 50.0:
        raise ValueError(f"series cap exceeded: |z| = {abs(z):.6g} > 50")
    if z < 0.0:
        return math.exp(z) * kummer_1f1(v - u, v, -z)
    term = 1.0
    total = 1.0
    for n in range(1, 10001):
        term *= (u + n - 1.0) / ((v + n - 1.0) * n) * z
        total += term
        if abs(term) < 1e-15 * abs(total):
            return total
    raise RuntimeError(
        "internal defect: 1F1 series did not converge within 10^4 terms"
    )


def log_mgf_full(q: MgfQuery, p: ModelParams) -> float:
    """log E exp(u * X_t) for X = alpha*V_t + beta*int V + delta*int 1/V.

    Gamma/sinh/cosh/1F1 closed form, b != 0 only.  Raises a domain error
    when the square-root arguments go complex, and MgfExplosionError when
    the effective denominator btilde*sinh + A*cosh loses positivity on the
    horizon (the moment is then infinite before t).
    """
    if p.b == 0.0:
        raise ValueError(
            "finite-horizon closed form requires b != 0; only the limiting "
            "CGF covers b = 0"
        )
    u = q.u
    if u == 0.0:
        return 0.0
    coeffs = q.coeffs
    if coeffs.delta != 0.0 and not p.feller_strict:
        raise ValueError(_FELLER_MSG)
    a, b, sigma, v0, t = p.a, p.b, p.sigma, p.v0, q.t

    alpha_u = u * coeffs.alpha
    beta_u = u * coeffs.beta
    delta_u = u * coeffs.delta

    a_sq = b * b - 4.0 * sigma * beta_u
    if a_sq < 0:
        raise ValueError("domain error: b^2 - 4*sigma*beta*u < 0 (complex A)")
    nu_sq = (a - sigma) ** 2 - 4.0 * sigma * delta_u
    if nu_sq < 0:
        raise ValueError(
            "domain error: (a-sigma)^2 - 4*sigma*delta*u < 0 (complex nu)"
        )
    big_a = math.sqrt(a_sq)
    if big_a == 0.0:
        raise ValueError(
            "degenerate double root A = 0; the closed form needs "
            "b^2 - 4*sigma*beta*u > 0"
        )
    nu = math.sqrt(nu_sq) / sigma
    kappa = a / (2.0 * sigma)
    x = 0.5 * big_a * t
    b_tilde = b - 2.0 * sigma * alpha_u

    # sinh(x) = e^x (1-w)/2, cosh(x) = e^x (1+w)/2 with w = e^{-2x}.
    w = math.exp(-2.0 * x)
    core = b_tilde * (1.0 - w) + big_a * (1.0 + w)
    if core <= 0.0:
        raise MgfExplosionError(
            "mgf explodes before t: effective denominator "
            f"btilde*sinh + A*cosh is nonpositive at horizon {t:.6g}",
            explodes_at=math.nan,
        )
    log_bracket = x - _LOG2 + math.log(core)     # log(btilde sinh + A cosh)
    log_2sinh = x + math.log1p(-w)               # log(2 sinh x)
    coth = 1.0 / math.tanh(x)

    z = (big_a * big_a * v0 / (2.0 * sigma)) * math.exp(
        _LOG2 - log_2sinh - log_bracket
    )
    half = 0.5 * (nu + 1.0)
    # The second power base is (btilde*sinh/A + cosh) = bracket/A; on the
    # delta = 0 slice this normalization is what makes the product collapse
    # onto the Riccati form to machine precision.
    return (
        math.lgamma(kappa + half)
        - math.lgamma(nu + 1.0)
        + (b / (2.0 * sigma)) * (a * t + v0)
        - (big_a * v0 / (2.0 * sigma)) * coth
        + (half - kappa) * (math.log(big_a * v0 / (2.0 * sigma)) + _LOG2 - log_2sinh)
        - (half + kappa) * (log_bracket - math.log(big_a))
        + math.log(kummer_1f1(kappa + half, nu + 1.0, z))
    )


def convergence_gap(
    u: float,
    coeffs: FunctionalCoeffs,
    t_grid: list,
    p: ModelParams,
) -> list:
    """|t^-1 log MGF - limiting CGF| along an increasing horizon grid.

    Dispatches to the Riccati form when delta = 0 and to the 1F1 form
    otherwise.  Returns a list of (t, gap) pairs.
    """
    grid = [float(t) for t in t_grid]
    if not grid:
        raise ValueError("t_grid must be nonempty")
    if any(t <= 0 for t in grid):
        raise ValueError("t_grid entries must be positive")
    if any(t1 >= t2 for t1, t2 in zip(grid, grid[1:])):
        raise ValueError("t_grid must be strictly increasing")
    limit = cgf_limit(u, coeffs.beta, coeffs.delta, p)
    out = []
    for t in grid:
        if coeffs.delta == 0.0:
            value = log_mgf_alpha_beta(u * coeffs.alpha, u * coeffs.beta, t, p)
        else:
            value = log_mgf_full(MgfQuery(coeffs=coeffs, t=t, u=u), p)
        out.append((t, abs(value / t - limit)))
    return out
