"""Likelihood-ratio model selection against the full-model ML comparative base.

Each nested candidate is tested with -2 log-ratio ~ chi-square(df); when the
approximation is inapplicable (candidate beats the base, degenerate base,
mixture at a p boundary, cv_stat < 1) AIC takes over per the selection rules.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .distributions import Family, MgwParams
from .estimators import Degeneracy, Fit, FitFailure, Method
from .special import chi_square_sf

CANDIDATE_KEYS = (
    "exponential_ml",
    "gamma_ml",
    "weibull_ml",
    "mixed_exponential_ml",
    "mgw_mixture",
)
MGW_ML_KEY = "mgw_ml"


class LrtStatus(enum.Enum):
    TESTED = "tested"
    CANDIDATE_EXCEEDS_MGW = "not_applicable_candidate_exceeds_mgw"
    MGW_DEGENERATE = "not_applicable_mgw_degenerate"
    CV_LESS_THAN_ONE = "not_applicable_cv_less_than_one"
    MIXTURE_AT_BOUNDARY = "not_applicable_mixture_at_boundary"
    UNAVAILABLE = "not_applicable_unavailable"


@dataclass(frozen=True)
class LrtVerdict:
    candidate: str
    status: LrtStatus
    statistic: float | None = None
    df: int | None = None
    p_value: float | None = None


class SelectionRule(enum.Enum):
    MAX_P_VALUE = "max_p_value"
    ALL_BELOW_THRESHOLD = "all_below_threshold_mgw_ml"
    AIC_AMONG_EXCEEDERS = "aic_among_exceeders"
    AIC_AFTER_DEGENERATE = "aic_after_mgw_degenerate"


@dataclass(frozen=True)
class SelectionReport:
    chosen: str
    label: str
    family: Family
    method: Method
    rule: SelectionRule
    log_lik: float
    params: MgwParams | None
    p_value: float | None = None
    aic: float | None = None


_FAMILY_LABEL = {
    Family.EXPONENTIAL: "Exponential",
    Family.GAMMA: "Gamma",
    Family.WEIBULL: "Weibull",
    Family.MIXED_EXPONENTIAL: "Mixed Exponential",
    Family.MGW: "MGW",
    Family.MGE: "MGE",
    Family.MEW: "MEW",
}
_METHOD_LABEL = {Method.ML: "ML estimation", Method.MIXTURE: "mixture estimation"}


def display_label(fit: Fit) -> str:
    family = fit.family
    if family is Family.MIXED_EXPONENTIAL and fit.degeneracy is Degeneracy.A:
        family = Family.EXPONENTIAL
    return f"{_FAMILY_LABEL[family]} ({_METHOD_LABEL[fit.method]})"


def free_parameter_count(key: str, fit: Fit) -> int:
    """Free parameters actually estimated, after any degeneracy collapse."""
    if key == "exponential_ml":
        return 1
    if key in ("gamma_ml", "weibull_ml"):
        return 2
    if key == "mixed_exponential_ml":
        return 1 if fit.degeneracy is Degeneracy.A else 3
    if key == "mgw_mixture":
        return {Degeneracy.NONE: 3, Degeneracy.B1: 2,
                Degeneracy.B2: 2, Degeneracy.B3: 1}[fit.degeneracy]
    if key == MGW_ML_KEY:
        return 5
    raise ValueError(f"unknown candidate key {key!r}")


def degrees_of_freedom(key: str, fit: Fit, mgw_ml: Fit) -> int:
    """Dimension gap for the chi-square approximation.

    The exponential normally sits 4 parameters below the full model, but when
    the comparative base has itself collapsed to a single-family ML fit
    (flag C) only the scale separates them.
    """
    if key == "exponential_ml":
        return 1 if mgw_ml.degeneracy is Degeneracy.C else 4
    if key in ("gamma_ml", "weibull_ml"):
        return 3
    if key == "mixed_exponential_ml":
        return 4 if fit.degeneracy is Degeneracy.A else 2
    if key == "mgw_mixture":
        return {Degeneracy.NONE: 2, Degeneracy.B1: 3,
                Degeneracy.B2: 3, Degeneracy.B3: 4}[fit.degeneracy]
    raise ValueError(f"no degrees of freedom defined for {key!r}")


def aic(fit: Fit, key: str) -> float:
    return 2.0 * free_parameter_count(key, fit) - 2.0 * fit.log_lik


def lrt(key: str, candidate: Fit | FitFailure, mgw_ml: Fit) -> LrtVerdict:
    if isinstance(candidate, FitFailure):
        status = (LrtStatus.CV_LESS_THAN_ONE
                  if candidate.reason == "cv_stat_below_one"
                  else LrtStatus.UNAVAILABLE)
        return LrtVerdict(candidate=key, status=status)
    if candidate.mixture_boundary:
        return LrtVerdict(candidate=key, status=LrtStatus.MIXTURE_AT_BOUNDARY)
    if candidate.log_lik > mgw_ml.log_lik:
        return LrtVerdict(candidate=key, status=LrtStatus.CANDIDATE_EXCEEDS_MGW)
    if mgw_ml.degeneracy is Degeneracy.C and key != "exponential_ml":
        return LrtVerdict(candidate=key, status=LrtStatus.MGW_DEGENERATE)
    stat = 2.0 * (mgw_ml.log_lik - candidate.log_lik)
    df = degrees_of_freedom(key, candidate, mgw_ml)
    return LrtVerdict(candidate=key, status=LrtStatus.TESTED, statistic=stat,
                      df=df, p_value=chi_square_sf(stat, df))


def _degenerate_target(fits: dict, mgw_ml: Fit) -> str:
    """Which single-family ML fit a flag-C base collapsed to."""
    if mgw_ml.params is not None:
        return "gamma_ml" if mgw_ml.params.p >= 0.5 else "weibull_ml"
    gaps = {}
    for key in ("gamma_ml", "weibull_ml"):
        cand = fits.get(key)
        if isinstance(cand, Fit):
            gaps[key] = abs(cand.log_lik - mgw_ml.log_lik)
    if not gaps:
        return "weibull_ml"
    return min(gaps, key=lambda k: (gaps[k], k != "gamma_ml"))


def _order_index(key: str) -> int:
    return CANDIDATE_KEYS.index(key)


def select_model(fits: dict, mgw_ml: Fit, threshold: float = 0.05) -> SelectionReport:
    """Pick the reported model for one site-month.

    Rules, in order: candidates that beat the comparative base compete on
    AIC; a degenerate (flag C) base hands the choice to AIC among the fit it
    collapsed to, the mixed-exp ML fit, and a usable mixture fit; otherwise
    the largest LRT p-value at or above the threshold wins; if every tested
    p-value falls below the threshold the comparative base itself is kept.
    Ties break toward fewer free parameters, then the fixed family order.
    """
    verdicts = {key: lrt(key, fits[key], mgw_ml)
                for key in CANDIDATE_KEYS if key in fits}

    def aic_pick(pool: list[str], rule: SelectionRule) -> SelectionReport:
        scored = [(aic(fits[k], k), free_parameter_count(k, fits[k]),
                   _order_index(k), k) for k in pool]
        best = min(scored)
        fit = fits[best[3]]
        return SelectionReport(chosen=best[3], label=display_label(fit),
                               family=fit.family, method=fit.method, rule=rule,
                               log_lik=fit.log_lik, params=fit.params,
                               aic=best[0])

    exceeders = [k for k in CANDIDATE_KEYS
                 if k in verdicts
                 and verdicts[k].status is LrtStatus.CANDIDATE_EXCEEDS_MGW]
    if exceeders:
        return aic_pick(exceeders, SelectionRule.AIC_AMONG_EXCEEDERS)

    if mgw_ml.degeneracy is Degeneracy.C:
        pool = [_degenerate_target(fits, mgw_ml)]
        if isinstance(fits.get("mixed_exponential_ml"), Fit):
            pool.append("mixed_exponential_ml")
        mix = fits.get("mgw_mixture")
        if isinstance(mix, Fit) and not mix.mixture_boundary:
            pool.append("mgw_mixture")
        pool = [k for k in pool if isinstance(fits.get(k), Fit)]
        if pool:
            return aic_pick(pool, SelectionRule.AIC_AFTER_DEGENERATE)

    tested = [k for k in CANDIDATE_KEYS
              if k in verdicts and verdicts[k].status is LrtStatus.TESTED]
    if tested:
        ranked = sorted(
            (( -verdicts[k].p_value, free_parameter_count(k, fits[k]),
               _order_index(k), k) for k in tested))
        top = ranked[0][3]
        if verdicts[top].p_value >= threshold:
            fit = fits[top]
            return SelectionReport(chosen=top, label=display_label(fit),
                                   family=fit.family, method=fit.method,
                                   rule=SelectionRule.MAX_P_VALUE,
                                   log_lik=fit.log_lik, params=fit.params,
                                   p_value=verdicts[top].p_value)
    return SelectionReport(chosen=MGW_ML_KEY, label=display_label(mgw_ml),
                           family=mgw_ml.family, method=mgw_ml.method,
                           rule=SelectionRule.ALL_BELOW_THRESHOLD,
                           log_lik=mgw_ml.log_lik, params=mgw_ml.params)


def run_lrts(fits: dict, mgw_ml: Fit) -> list[LrtVerdict]:
    return [lrt(key, fits[key], mgw_ml) for key in CANDIDATE_KEYS if key in fits]
