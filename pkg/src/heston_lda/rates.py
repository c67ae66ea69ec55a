"""Limiting cumulant generating functions of the Heston path functionals,
their effective domains and derivative images, and Fenchel-Legendre
transforms (rate functions).

All formulas are closed-form in the coefficients (beta, delta) of
X_t = alpha*V_t + beta*int V + delta*int 1/V; the limit of t^-1 log E e^{uX}
does not depend on alpha.  With

    P(u) = (a - sigma)^2 - 4*sigma*delta*u,
    Q(u) = b^2 - 4*sigma*beta*u,

the limit is a*b/(2 sigma) - sqrt(P*Q)/(2 sigma) - sqrt(Q)/2 for delta != 0
and (a/(2 sigma)) * (b - sqrt(Q)) for delta = 0.  Both branches cover b = 0.
For b <= 0 the formulas are evaluated as written; they then lose the
zero-at-origin CGF normalization (value a*b/sigma at u = 0), which callers
relying on large-deviation semantics must keep in mind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .core import ModelParams

__all__ = [
    "DomainInterval",
    "RateEval",
    "RateMinimum",
    "domain_of",
    "cgf_limit",
    "cgf_derivative",
    "derivative_image",
    "legendre_transform",
    "legendre_closed_form_delta0",
    "rate_minimum",
]

_FELLER_MSG = "Feller condition a>sigma required when delta != 0"


@dataclass(frozen=True)
class DomainInterval:
    """An interval of the extended real line with per-endpoint closedness.

    Infinite endpoints are always open; the constructor normalizes that.
    """

    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool

    def __post_init__(self) -> None:
        if math.isnan(self.lo) or math.isnan(self.hi) or self.lo > self.hi:
            raise ValueError(f"invalid interval bounds [{self.lo}, {self.hi}]")
        if math.isinf(self.lo) and self.lo_closed:
            object.__setattr__(self, "lo_closed", False)
        if math.isinf(self.hi) and self.hi_closed:
            object.__setattr__(self, "hi_closed", False)

    def contains(self, x: float) -> bool:
        if x < self.lo or x > self.hi:
            return False
        if x == self.lo and not self.lo_closed:
            return False
        if x == self.hi and not self.hi_closed:
            return False
        return True

    def contains_interior(self, x: float) -> bool:
        return self.lo < x < self.hi


@dataclass(frozen=True)
class RateEval:
    """One Legendre-transform evaluation: value and maximizing u (if any).

    ``value`` is +inf exactly when x falls outside the open derivative
    image; the supremum is unattained there (it diverges even at the finite
    image endpoint, where u*x - Lambda(u) still grows like sqrt(|u|)).
    """

    x: float
    value: float
    u_star: Optional[float]


class RateMinimum(NamedTuple):
    x_min: float
    value: float
    attained_zero: bool


def _require_feller(delta: float, p: ModelParams) -> None:
    if delta != 0.0 and p.a <= p.sigma:
        raise ValueError(_FELLER_MSG)


def domain_of(beta: float, delta: float, p: ModelParams) -> DomainInterval:
    """Effective domain of u -> cgf_limit(u, beta, delta, p).

    Each positive coefficient contributes an upper bound (its sqrt argument
    must stay nonnegative), each negative one a lower bound, with the 1/0 =
    infinity convention when a coefficient vanishes.  Finite endpoints are
    closed: the square roots vanish there but the value is still defined.
    """
    _require_feller(delta, p)
    lo, hi = -math.inf, math.inf
    if beta > 0:
        hi = min(hi, p.b * p.b / (4.0 * p.sigma * beta))
    elif beta < 0:
        lo = max(lo, p.b * p.b / (4.0 * p.sigma * beta))
    if delta > 0:
        hi = min(hi, (p.a - p.sigma) ** 2 / (4.0 * p.sigma * delta))
    elif delta < 0:
        lo = max(lo, (p.a - p.sigma) ** 2 / (4.0 * p.sigma * delta))
    return DomainInterval(lo, hi, math.isfinite(lo), math.isfinite(hi))


def cgf_limit(u: float, beta: float, delta: float, p: ModelParams) -> float:
    """Limiting cumulant generating function at exponent multiplier u."""
    dom = domain_of(beta, delta, p)
    if not dom.contains(u):
        raise ValueError(
            f"u={u} outside the effective domain [{dom.lo}, {dom.hi}]"
        )
    a, b, sigma = p.a, p.b, p.sigma
    q = b * b - 4.0 * sigma * beta * u
    if delta == 0.0:
        return (a / (2.0 * sigma)) * (b - math.sqrt(q))
    pp = (a - sigma) ** 2 - 4.0 * sigma * delta * u
    return (
        a * b / (2.0 * sigma)
        - math.sqrt(pp * q) / (2.0 * sigma)
        - 0.5 * math.sqrt(q)
    )


def cgf_derivative(
    u: float, beta: float, delta: float, p: ModelParams
) -> tuple[float, float]:
    """Closed-form first and second u-derivatives of cgf_limit.

    Only defined on the open interior of the domain (the derivatives blow
    up at finite endpoints).
    """
    dom = domain_of(beta, delta, p)
    if not dom.contains_interior(u):
        raise ValueError(
            f"u={u} not interior to the effective domain ({dom.lo}, {dom.hi})"
        )
    a, b, sigma = p.a, p.b, p.sigma
    q = b * b - 4.0 * sigma * beta * u
    if delta == 0.0:
        sq = math.sqrt(q)
        return beta * a / sq, 2.0 * sigma * beta * beta * a / (q * sq)
    if beta == 0.0 and b == 0.0:
        # Q vanishes identically, the limit function is constant zero.
        return 0.0, 0.0
    pp = (a - sigma) ** 2 - 4.0 * sigma * delta * u
    pq = pp * q
    sqrt_pq = math.sqrt(pq)
    first = sigma * beta / math.sqrt(q) + (beta * pp + delta * q) / sqrt_pq
    cross = beta * (a - sigma) ** 2 - delta * b * b
    second = (
        2.0 * sigma * sigma * beta * beta / (q * math.sqrt(q))
        + 2.0 * sigma * cross * cross / (pq * sqrt_pq)
    )
    return first, second


def derivative_image(beta: float, delta: float, p: ModelParams) -> DomainInterval:
    """Open image of the CGF derivative over the domain interior.

    R when beta*delta < 0; (2 sqrt(beta delta), inf) when both positive;
    (-inf, -2 sqrt(beta delta)) when both negative; with a vanishing
    coefficient the sign of the remaining one picks (0, inf) or (-inf, 0).
    """
    if beta == 0.0 and delta == 0.0:
        raise ValueError("derivative image undefined for beta = delta = 0")
    _require_feller(delta, p)
    prod = beta * delta
    if prod < 0:
        return DomainInterval(-math.inf, math.inf, False, False)
    if prod > 0:
        edge = 2.0 * math.sqrt(prod)
        if beta > 0:
            return DomainInterval(edge, math.inf, False, False)
        return DomainInterval(-math.inf, -edge, False, False)
    leading = beta if delta == 0.0 else delta
    if leading > 0:
        return DomainInterval(0.0, math.inf, False, False)
    return DomainInterval(-math.inf, 0.0, False, False)


def _solve_dual(x: float, beta: float, delta: float, p: ModelParams) -> float:
    """Solve d/du cgf_limit(u) = x on the domain interior.

    The derivative is strictly increasing, diverges at any finite domain
    endpoint and tends to the finite image boundary at infinite ones, so a
    bracket always exists for x in the open image.  Safeguarded Newton:
    analytic second derivative, bisection fallback, bracket maintained
    throughout.  Residual tolerance 1e-12 (scaled by max(1, |x|)).
    """
    dom = domain_of(beta, delta, p)
    lo, hi = dom.lo, dom.hi

    def d1(u: float) -> float:
        return cgf_derivative(u, beta, delta, p)[0]

    fail = RuntimeError(
        "internal defect: could not bracket the dual root after 200 probes"
    )
    # Upper bracket end: derivative above x.
    ub = None
    if math.isfinite(hi):
        step = max(1.0, abs(hi))
        for _ in range(200):
            step *= 0.5
            cand = hi - step
            if cand <= lo or cand >= hi:
                continue
            if d1(cand) > x:
                ub = cand
                break
    else:
        cand = lo + max(1.0, abs(lo)) if math.isfinite(lo) else 0.0
        step = 1.0
        for _ in range(200):
            if cand > lo and d1(cand) > x:
                ub = cand
                break
            cand += step
            step *= 2.0
    if ub is None:
        raise fail
    # Lower bracket end: derivative below x.
    la = None
    if math.isfinite(lo):
        step = max(1.0, abs(lo))
        for _ in range(200):
            step *= 0.5
            cand = lo + step
            if cand >= ub or cand <= lo:
                continue
            if d1(cand) < x:
                la = cand
                break
    else:
        cand = min(0.0, ub - 1.0)
        step = 1.0
        for _ in range(200):
            if cand < ub and d1(cand) < x:
                la = cand
                break
            cand -= step
            step *= 2.0
    if la is None:
        raise fail

    u = 0.5 * (la + ub)
    tol = 1e-12 * max(1.0, abs(x))
    for _ in range(200):
        first, second = cgf_derivative(u, beta, delta, p)
        res = first - x
        if abs(res) <= tol:
            return u
        if res < 0:
            la = u
        else:
            ub = u
        # Near a finite domain endpoint the derivative is close to vertical
        # and the bracket reaches float resolution while the residual is
        # still large; u is then pinned to one ulp, which is all the
        # transform value needs (its u-sensitivity is the residual itself).
        if ub - la <= 4.0 * math.ulp(max(abs(la), abs(ub), 1.0)):
            return u
        trial = u - res / second if second > 0 else math.nan
        u = trial if la < trial < ub else 0.5 * (la + ub)
    raise RuntimeError(
        "internal defect: dual root search did not converge in 200 iterations"
    )


def legendre_transform(
    x: float, beta: float, delta: float, p: ModelParams
) -> RateEval:
    """Fenchel-Legendre transform sup_u (u*x - cgf_limit(u)) at x.

    Finite exactly on the open derivative image, where the supremum is
    attained at the unique interior solution of the first-order condition;
    +inf everywhere else, including the finite image endpoint.
    """
    if beta == 0.0 and delta == 0.0:
        raise ValueError("rate function undefined for beta = delta = 0")
    _require_feller(delta, p)
    if p.b == 0.0 and beta == 0.0:
        # Degenerate corner: the limit function vanishes identically on its
        # domain, so the conjugate is linear in x on one side.
        bound = (p.a - p.sigma) ** 2 / (4.0 * p.sigma * delta)
        if delta > 0:
            value = bound * x if x >= 0 else math.inf
        else:
            value = bound * x if x <= 0 else math.inf
        return RateEval(x=x, value=value, u_star=None)
    image = derivative_image(beta, delta, p)
    if not image.contains_interior(x):
        return RateEval(x=x, value=math.inf, u_star=None)
    u_star = _solve_dual(x, beta, delta, p)
    value = u_star * x - cgf_limit(u_star, beta, delta, p)
    # The transform of a function vanishing somewhere is nonnegative up to
    # roundoff; clamp the dust so downstream never sees -1e-17.
    if p.b > 0 and value < 0 and value > -1e-9:
        value = 0.0
    if delta == 0.0:
        closed = legendre_closed_form_delta0(x, beta, p)
        if not math.isclose(closed, value, rel_tol=1e-8, abs_tol=1e-8):
            raise RuntimeError(
                "internal defect: numerical transform "
                f"{value} disagrees with the closed form {closed} at x={x}"
            )
    return RateEval(x=x, value=value, u_star=u_star)


def legendre_closed_form_delta0(x: float, beta: float, p: ModelParams) -> float:
    """Closed-form rate function for delta = 0: (b*x - a*beta)^2/(4 sigma |beta x|).

    Matches the numerical transform on the open image (x and beta sharing
    sign) and extends continuously to +inf at x = 0.
    """
    if beta == 0.0:
        raise ValueError("closed form requires beta != 0")
    if x == 0.0:
        return math.inf
    num = (p.b * x - p.a * beta) ** 2
    return num / (4.0 * p.sigma * abs(beta * x))


def rate_minimum(beta: float, delta: float, p: ModelParams) -> RateMinimum:
    """Location and value of the rate-function minimum.

    For b != 0 the minimizing point is the derivative at the origin of the
    dual variable, x_min = a*beta/|b| + delta*|b|/(a - sigma), where the
    conjugate bound u*x - Lambda(u) is tight at u = 0; the minimum value is
    -Lambda(0), which is 0 exactly when b > 0 and a*|b|/sigma otherwise.
    For b = 0 the infimum is zero but approached only along the unbounded
    end of the image, so it is not attained.
    """
    if beta == 0.0 and delta == 0.0:
        raise ValueError("rate function undefined for beta = delta = 0")
    _require_feller(delta, p)
    if p.b == 0.0:
        if beta == 0.0:
            # Identically-zero limit function: conjugate minimized at 0.
            return RateMinimum(0.0, 0.0, True)
        x_inf = math.inf if beta > 0 else -math.inf
        return RateMinimum(x_inf, 0.0, False)
    x_min = p.a * beta / abs(p.b)
    if delta != 0.0:
        x_min += delta * abs(p.b) / (p.a - p.sigma)
    if p.b > 0:
        return RateMinimum(x_min, 0.0, True)
    return RateMinimum(x_min, p.a * abs(p.b) / p.sigma, False)
