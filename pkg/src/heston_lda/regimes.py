"""Analytic classification of market-price-of-risk and asymptotic-arbitrage
regimes.

Each classifier evaluates published sufficient conditions exactly as stated
and never extrapolates: inputs the conditions are silent about receive the
explicit verdict ``not_covered_by_paper``.  Equality in any strict
inequality is its own verdict, ``boundary``, so thresholds are observable.

The linear-speed arbitrage classifier reports two decision modes.  The
default is the exact inequality

    a*lam/sqrt(2 sigma) + gamma + Lambda^{beta'}(1) < 0,
    beta' = -b*lam/sqrt(2 sigma) - lam^2/2,

whose CGF term simplifies to (a/(2 sigma))*(b - |b + sqrt(2 sigma)*lam|).
The second mode is the stated zeta-interval rule; the two differ on a
nonempty set of lambda (the interval rule drops a 1/(2 sigma) factor on the
square-root term), and any disagreement at the queried point is flagged in
the report rather than silently resolved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .core import ModelParams
from .rates import DomainInterval

__all__ = [
    "HOLDS",
    "FAILS",
    "BOUNDARY",
    "NOT_COVERED",
    "RegimeReport",
    "classify_gamma1",
    "classify_gamma2",
    "classify_linear_arbitrage",
    "sublinear_thresholds",
    "classify_sublinear_arbitrage",
]

HOLDS = "holds"
FAILS = "fails"
BOUNDARY = "boundary"
NOT_COVERED = "not_covered_by_paper"

_DISAGREE_NOTE = "paper-interval vs exact-inequality disagreement"


@dataclass(frozen=True)
class RegimeReport:
    """Structured classifier output.

    ``constants`` carries the arbitrage constants (C, lambda1, lambda2) and
    is present only when a linear-speed arbitrage query holds.
    ``lambda_intervals`` lists open/closed lambda sets on which the reported
    verdict would hold, when that set has a tractable closed form.
    """

    query: str
    verdict: str
    thresholds: dict = field(default_factory=dict)
    lambda_intervals: tuple = ()
    constants: Optional[dict] = None
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {
            "query": self.query,
            "verdict": self.verdict,
            "thresholds": dict(self.thresholds),
            "lambda_intervals": [
                {
                    "lo": iv.lo,
                    "hi": iv.hi,
                    "lo_closed": iv.lo_closed,
                    "hi_closed": iv.hi_closed,
                }
                for iv in self.lambda_intervals
            ],
            "constants": dict(self.constants) if self.constants else None,
            "notes": list(self.notes),
        }


def _trichotomy(value: float, threshold: float) -> str:
    """fails / boundary / not-covered split for 'fails when value > threshold'."""
    if value > threshold:
        return FAILS
    if value == threshold:
        return BOUNDARY
    return NOT_COVERED


def classify_gamma1(c: float, p: ModelParams) -> RegimeReport:
    """Does the average squared kernel gamma1 stay below c at linear speed?

    Verdict ``fails`` means no linear-speed exceedance: either b <= 0, or
    b > 0 with c above a*lam^2/b.  Below that threshold the linear-speed
    question is not settled here, but every sublinear speed reaches the
    threshold (see sublinear_thresholds).
    """
    if c <= 0:
        raise ValueError("c must be positive")
    lam = p.lam
    if lam == 0.0:
        return RegimeReport(
            query="gamma1_linear",
            verdict=FAILS,
            thresholds={"c": c},
            lambda_intervals=(DomainInterval(0.0, 0.0, True, True),),
            notes=("gamma1 vanishes identically (lambda = 0); the claim is trivial",),
        )
    if p.b <= 0:
        return RegimeReport(
            query="gamma1_linear",
            verdict=FAILS,
            thresholds={"c": c},
            lambda_intervals=(DomainInterval(-math.inf, math.inf, False, False),),
            notes=("case (i): b <= 0, the variance has no ergodic average",),
        )
    threshold = p.a * lam * lam / p.b
    verdict = _trichotomy(c, threshold)
    lam_edge = math.sqrt(p.b * c / p.a)
    notes = []
    if verdict is FAILS:
        notes.append(f"case (ii): c exceeds a*lambda^2/b = {threshold:.6g}")
        intervals = (DomainInterval(-lam_edge, lam_edge, False, False),)
    elif verdict is BOUNDARY:
        notes.append(f"c equals a*lambda^2/b = {threshold:.6g} exactly")
        intervals = ()
    else:
        notes.append(
            "linear speed undecided here; sublinear_thresholds gives c1 = "
            f"{threshold:.6g}, exceeded at every sublinear speed"
        )
        intervals = ()
    return RegimeReport(
        query="gamma1_linear",
        verdict=verdict,
        thresholds={"c": c, "a_lambda_sq_over_b": threshold},
        lambda_intervals=intervals,
        notes=tuple(notes),
    )


def classify_gamma2(c: float, p: ModelParams) -> RegimeReport:
    """Does the average squared kernel gamma2 stay below c at linear speed?

    Five-case dispatch on the signs of lambda*rho*(mu - r).  The mu = r,
    b > 0 case uses the stated lambda^4 threshold; when it differs from the
    ergodic mean of gamma2^2 (which carries lambda^2), both are reported and
    a note flags any query falling between them.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    lam, rho, spread = p.lam, p.rho, p.mu - p.r
    rho_sq = rho * rho
    one_m = 1.0 - rho_sq
    if lam * rho == 0.0:
        notes = ["case (v): lambda*rho = 0"]
        if rho == 0.0:
            notes.append("complete market (rho = 0) falls under case (v)")
        return RegimeReport(
            query="gamma2_linear",
            verdict=FAILS,
            thresholds={"c": c},
            notes=tuple(notes),
        )
    if spread == 0.0:
        if p.b <= 0:
            return RegimeReport(
                query="gamma2_linear",
                verdict=FAILS,
                thresholds={"c": c},
                notes=("case (iii): mu = r and b <= 0",),
            )
        stated = p.a * lam**4 * rho_sq / (p.b * one_m)
        ergodic_mean = p.a * lam**2 * rho_sq / (p.b * one_m)
        verdict = _trichotomy(c, stated)
        notes = [
            "case (iv): mu = r, b > 0, stated threshold a*lambda^4*rho^2/(b*(1-rho^2))"
        ]
        if stated != ergodic_mean:
            lo, hi = sorted((stated, ergodic_mean))
            if lo < c < hi:
                notes.append(
                    f"c lies between the ergodic mean of gamma2^2 ({ergodic_mean:.6g})"
                    f" and the stated threshold ({stated:.6g}); the verdict follows"
                    " the stated lambda^4 inequality"
                )
        intervals = ()
        if verdict is FAILS:
            # rho_sq can underflow to 0.0 for a subnormal-but-nonzero rho;
            # the true edge then overflows, so inf is the rounded value.
            if rho_sq == 0.0:
                lam_edge = math.inf
            else:
                lam_edge = (c * p.b * one_m / (p.a * rho_sq)) ** 0.25
            intervals = (DomainInterval(-lam_edge, lam_edge, False, False),)
        return RegimeReport(
            query="gamma2_linear",
            verdict=verdict,
            thresholds={
                "c": c,
                "stated_threshold": stated,
                "ergodic_mean_gamma2_sq": ergodic_mean,
            },
            lambda_intervals=intervals,
            notes=tuple(notes),
        )
    cross = lam * rho * spread
    if cross > 0:
        return RegimeReport(
            query="gamma2_linear",
            verdict=FAILS,
            thresholds={"c": c},
            notes=("case (i): lambda*rho*(mu-r) > 0",),
        )
    threshold = -4.0 * cross / one_m
    verdict = _trichotomy(c, threshold)
    notes = [
        "case (ii): lambda*rho*(mu-r) < 0, threshold -4*lambda*rho*(mu-r)/(1-rho^2)"
        f" = {threshold:.6g}"
    ]
    if verdict is NOT_COVERED:
        notes.append("c below the case (ii) threshold; no stated condition applies")
    return RegimeReport(
        query="gamma2_linear",
        verdict=verdict,
        thresholds={"c": c, "four_cross_over_one_minus_rho_sq": threshold},
        notes=tuple(notes),
    )


def classify_linear_arbitrage(gamma: float, p: ModelParams) -> RegimeReport:
    """Strong asymptotic arbitrage at linear speed, two decision modes.

    Exact mode (default verdict): holds iff
    a*lam/s + gamma + (a/(2 sigma))*(b - |b + s*lam|) < 0, s = sqrt(2 sigma),
    equivalently lam < -b/s - gamma*s/(2a).  On a hold the report carries the
    constants C = exp(lam*v0/s), lambda1 = -(exact margin), lambda2 = gamma.

    Interval mode: lam outside (-b/s - gamma/(a*zeta+), -b/s + gamma/(a*zeta-))
    when s > 1, lam < -b/s - gamma/(a*zeta+) when s <= 1 (zeta- vanishes at
    s = 1, which is assigned to the one-sided rule).  Any disagreement with
    the exact mode at the queried lambda is flagged in the notes.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    a, b, sigma, lam = p.a, p.b, p.sigma, p.lam
    s = math.sqrt(2.0 * sigma)

    cgf_at_one = (a / (2.0 * sigma)) * (b - abs(b + s * lam))
    margin = a * lam / s + gamma + cgf_at_one
    if margin < 0:
        exact = HOLDS
    elif margin == 0:
        exact = BOUNDARY
    else:
        exact = FAILS
    exact_edge = -b / s - gamma * s / (2.0 * a)

    zeta_plus = s + 1.0 / s
    thresholds = {
        "exact_margin": margin,
        "cgf_at_one": cgf_at_one,
        "exact_lambda_edge": exact_edge,
        "zeta_plus": zeta_plus,
    }
    lo = -b / s - gamma / (a * zeta_plus)
    if s > 1.0:
        zeta_minus = s - 1.0 / s
        hi = -b / s + gamma / (a * zeta_minus)
        thresholds["zeta_minus"] = zeta_minus
        thresholds["interval_lo"] = lo
        thresholds["interval_hi"] = hi
        if lam < lo or lam > hi:
            interval = HOLDS
        elif lam == lo or lam == hi:
            interval = BOUNDARY
        else:
            interval = FAILS
    else:
        thresholds["interval_lo"] = lo
        if lam < lo:
            interval = HOLDS
        elif lam == lo:
            interval = BOUNDARY
        else:
            interval = FAILS

    notes = [
        f"exact-inequality mode: {exact}",
        f"paper-interval mode: {interval}",
    ]
    if exact != interval:
        notes.append(_DISAGREE_NOTE)
    if exact is FAILS:
        notes.append(
            "fails means the sufficient condition fails; absence of "
            "arbitrage is not claimed"
        )

    constants = None
    if exact is HOLDS:
        constants = {
            "C": math.exp(lam * p.v0 / s),
            "lambda1": -margin,
            "lambda2": gamma,
        }
    return RegimeReport(
        query="linear_arbitrage",
        verdict=exact,
        thresholds=thresholds,
        lambda_intervals=(DomainInterval(-math.inf, exact_edge, False, False),),
        constants=constants,
        notes=tuple(notes),
    )


def sublinear_thresholds(p: ModelParams) -> RegimeReport:
    """Market-price-of-risk thresholds reachable at every sublinear speed.

    c1 = a*lambda^2/b for gamma1.  For gamma2 the threshold c2 depends on
    the (mu - r, rho*lambda) pattern; when mu != r and rho*lambda < 0 every
    positive c2 works and none is reported numerically.
    """
    if p.b <= 0:
        raise ValueError("not applicable: b <= 0 (no ergodic regime)")
    lam, rho, spread = p.lam, p.rho, p.mu - p.r
    if lam * rho * spread > 0:
        raise ValueError("not covered: lambda*rho*(mu-r) > 0")
    c1 = p.a * lam * lam / p.b
    thresholds = {"c1": c1}
    notes = []
    if p.a <= p.sigma:
        notes.append(
            "gamma2 threshold unavailable: it needs a > sigma (finite 1/V average)"
        )
    elif spread == 0.0:
        c2 = p.a * lam * lam * rho * rho / (p.b * (1.0 - rho * rho))
        thresholds["c2"] = c2
        if c2 == 0.0:
            notes.append(
                "gamma2 vanishes identically (mu = r, lambda*rho = 0); no "
                "positive threshold exists"
            )
    elif rho * lam < 0:
        notes.append("any positive c2 works (mu != r and rho*lambda < 0)")
    elif rho * lam == 0.0:
        c2 = spread * spread * p.b / ((p.a - p.sigma) * (1.0 - rho * rho))
        thresholds["c2"] = c2
    return RegimeReport(
        query="sublinear_thresholds",
        verdict=HOLDS,
        thresholds=thresholds,
        notes=tuple(notes),
    )


def classify_sublinear_arbitrage(gamma: float, p: ModelParams) -> RegimeReport:
    """Strong asymptotic arbitrage at any sublinear speed f (t/f(t) -> inf).

    Requires the ergodic setting b > 0, the strict Feller bound a > sigma
    and lambda*rho*(mu-r) <= 0; violations are reported together.
    """
    problems = []
    if gamma <= 0:
        problems.append("gamma must be positive")
    if p.b <= 0:
        problems.append("b must be positive (ergodic regime)")
    if p.a <= p.sigma:
        problems.append("a must exceed sigma (strict Feller bound)")
    if p.lam * p.rho * (p.mu - p.r) > 0:
        problems.append("lambda*rho*(mu-r) must be <= 0")
    if problems:
        raise ValueError("; ".join(problems))

    a, b, lam, rho, spread = p.a, p.b, p.lam, p.rho, p.mu - p.r
    rho_sq = rho * rho
    if spread == 0.0:
        if rho == 0.0:
            return RegimeReport(
                query="sublinear_arbitrage",
                verdict=FAILS,
                thresholds={"gamma": gamma},
                notes=(
                    "mu = r and rho = 0: gamma2 vanishes and the lambda "
                    "threshold is infinite",
                ),
            )
        if rho_sq <= 0.5:
            if rho_sq == 0.0:
                # subnormal rho: rho^2 underflows and the true edge overflows
                edge = math.inf
            else:
                edge = math.sqrt(2.0 * b * gamma * (1.0 - rho_sq) / (a * rho_sq))
            which = "sqrt(2*b*gamma*(1-rho^2)/(a*rho^2))"
        else:
            edge = math.sqrt(2.0 * b * gamma / a)
            which = "sqrt(2*b*gamma/a)"
        abs_lam = abs(lam)
        if abs_lam > edge:
            verdict = HOLDS
        elif abs_lam == edge:
            verdict = BOUNDARY
        else:
            verdict = FAILS
        return RegimeReport(
            query="sublinear_arbitrage",
            verdict=verdict,
            thresholds={"gamma": gamma, "lambda_edge": edge},
            lambda_intervals=(
                DomainInterval(-math.inf, -edge, False, False),
                DomainInterval(edge, math.inf, False, False),
            ),
            notes=(f"mu = r: holds iff |lambda| > {which} = {edge:.6g}",),
        )
    if rho * lam < 0:
        return RegimeReport(
            query="sublinear_arbitrage",
            verdict=HOLDS,
            thresholds={"gamma": gamma},
            notes=("mu != r and rho*lambda < 0: holds with no lambda constraint",),
        )
    if rho * lam == 0.0:
        edge = spread * spread * b / (2.0 * (a - p.sigma) * (1.0 - rho_sq))
        if gamma < edge:
            verdict = HOLDS
        elif gamma == edge:
            verdict = BOUNDARY
        else:
            verdict = FAILS
        return RegimeReport(
            query="sublinear_arbitrage",
            verdict=verdict,
            thresholds={"gamma": gamma, "gamma_edge": edge},
            notes=(
                "mu != r and rho*lambda = 0: holds iff gamma < "
                f"(mu-r)^2*b/(2*(a-sigma)*(1-rho^2)) = {edge:.6g}",
            ),
        )
    return RegimeReport(
        query="sublinear_arbitrage",
        verdict=NOT_COVERED,
        thresholds={"gamma": gamma},
        notes=("mu != r with rho*lambda > 0 (and mu < r): no stated condition",),
    )
