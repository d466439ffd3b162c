"""Report rendering and the JSON interchange format.

CSV reports use 3 decimals for log-likelihoods and 4 for parameters and
p-values; the JSON document keeps full precision (shortest round-trip float
form) and never embeds timestamps, so identical runs emit identical bytes.
"""

from __future__ import annotations

import json

import numpy as np

from .distributions import Family, MgwParams
from .estimators import Degeneracy, Fit, FitFailure, Method
from .pipeline import SampleSummary
from .selection import (
    CANDIDATE_KEYS,
    MGW_ML_KEY,
    LrtStatus,
    LrtVerdict,
    SelectionReport,
)

SCHEMA = "precipfit/run-v1"
ALL_FIT_KEYS = CANDIDATE_KEYS + (MGW_ML_KEY,)

_BYPASS_MIXTURE_FAMILY = {
    None: Family.MGW,
    "b1": Family.MGE,
    "b2": Family.MEW,
    "b3": Family.MIXED_EXPONENTIAL,
}
_BYPASS_KEY_FAMILY = {
    "exponential_ml": Family.EXPONENTIAL,
    "gamma_ml": Family.GAMMA,
    "weibull_ml": Family.WEIBULL,
    "mixed_exponential_ml": Family.MIXED_EXPONENTIAL,
    MGW_ML_KEY: Family.MGW,
}


def fit_to_dict(fit: Fit | FitFailure) -> dict:
    if isinstance(fit, FitFailure):
        return {"error": fit.reason, "detail": fit.detail}
    return {
        "family": fit.family.value,
        "method": fit.method.value,
        "params": fit.params.to_dict() if fit.params is not None else None,
        "log_lik": fit.log_lik,
        "n": fit.n,
        "degeneracy": None if fit.degeneracy is Degeneracy.NONE else fit.degeneracy.value,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "mixture_boundary": fit.mixture_boundary,
    }


def fit_from_dict(d: dict) -> Fit | FitFailure:
    if "error" in d:
        return FitFailure(reason=d["error"], detail=d.get("detail", ""))
    return Fit(
        family=Family(d["family"]),
        method=Method(d["method"]),
        params=None if d["params"] is None else MgwParams.from_dict(d["params"]),
        log_lik=d["log_lik"],
        n=d["n"],
        degeneracy=Degeneracy(d["degeneracy"]) if d["degeneracy"] else Degeneracy.NONE,
        iterations=d["iterations"],
        converged=d["converged"],
        mixture_boundary=d["mixture_boundary"],
    )


def verdict_to_dict(v: LrtVerdict) -> dict:
    return {"candidate": v.candidate, "status": v.status.value,
            "statistic": v.statistic, "df": v.df, "p_value": v.p_value}


def verdict_from_dict(d: dict) -> LrtVerdict:
    return LrtVerdict(candidate=d["candidate"], status=LrtStatus(d["status"]),
                      statistic=d["statistic"], df=d["df"], p_value=d["p_value"])


def selection_to_dict(s: SelectionReport, offset_mm: float) -> dict:
    return {
        "chosen": s.chosen,
        "label": s.label,
        "family": s.family.value,
        "method": s.method.value,
        "rule": s.rule.value,
        "p_value": s.p_value,
        "aic": s.aic,
        "log_lik": s.log_lik,
        "params": s.params.to_dict() if s.params is not None else None,
        "model": (None if s.params is None
                  else {"params": s.params.to_dict(), "offset_mm": offset_mm}),
    }


def summary_to_dict(s: SampleSummary) -> dict:
    return {"site": s.site, "month": s.month, "n": s.n, "mean": s.mean,
            "variance": s.variance, "cv_stat": s.cv_stat,
            "xs": [float(v) for v in s.xs]}


def summary_from_dict(d: dict) -> SampleSummary:
    return SampleSummary(site=d["site"], month=d["month"],
                         xs=np.asarray(d["xs"], dtype=float), n=d["n"],
                         mean=d["mean"], variance=d["variance"],
                         cv_stat=d["cv_stat"])


def document_to_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def load_document(text: str) -> dict:
    return json.loads(text)


# ---------------------------------------------------------------------------
# bypass input: externally supplied log-likelihoods and degeneracy flags


def bypass_group(row: dict) -> dict:
    """Build a fits mapping from one {site, month, log_lik, flags} row."""
    logliks = row["log_lik"]
    flags = row.get("flags", {})
    fits: dict[str, Fit | FitFailure] = {}
    for key in ALL_FIT_KEYS:
        flag = flags.get(key)
        if key == "mgw_mixture":
            if flag == "cv<1":
                fits[key] = FitFailure(reason="cv_stat_below_one")
                continue
            if key not in logliks or logliks[key] is None:
                fits[key] = FitFailure(reason="unavailable")
                continue
            deg = Degeneracy(flag) if flag in ("b1", "b2", "b3") else Degeneracy.NONE
            fits[key] = Fit(family=_BYPASS_MIXTURE_FAMILY.get(flag, Family.MGW),
                            method=Method.MIXTURE, params=None,
                            log_lik=float(logliks[key]), n=0, degeneracy=deg,
                            mixture_boundary=(flag == "boundary"))
            continue
        if key not in logliks or logliks[key] is None:
            fits[key] = FitFailure(reason="unavailable")
            continue
        deg = Degeneracy.NONE
        if key == "mixed_exponential_ml" and flag == "a":
            deg = Degeneracy.A
        if key == MGW_ML_KEY and flag == "c":
            deg = Degeneracy.C
        fits[key] = Fit(family=_BYPASS_KEY_FAMILY[key], method=Method.ML,
                        params=None, log_lik=float(logliks[key]), n=0,
                        degeneracy=deg)
    return {"site": row["site"], "month": int(row["month"]), "fits": fits}


# ---------------------------------------------------------------------------
# CSV tables


def _fmt(value: float, places: int) -> str:
    return f"{value:.{places}f}"


_DEGENERACY_CODE = {Degeneracy.A: "a", Degeneracy.B1: "b1", Degeneracy.B2: "b2",
                    Degeneracy.B3: "b3", Degeneracy.C: "c"}


def _loglik_cell(fit_dict: dict | None) -> str:
    if fit_dict is None:
        return ""
    if "error" in fit_dict:
        return "CV<1" if fit_dict["error"] == "cv_stat_below_one" else "failed"
    cell = _fmt(fit_dict["log_lik"], 3)
    deg = fit_dict.get("degeneracy")
    if deg:
        cell += f"({deg})"
    return cell


def render_loglik_csv(doc: dict) -> str:
    lines = ["site,month," + ",".join(ALL_FIT_KEYS)]
    for group in doc["groups"]:
        cells = [_loglik_cell(group["fits"].get(key)) for key in ALL_FIT_KEYS]
        lines.append(f"{group['site']},{group['month']}," + ",".join(cells))
    return "\n".join(lines) + "\n"


def _pvalue_cell(verdicts: dict[str, dict], key: str) -> str:
    v = verdicts.get(key)
    if v is None:
        return ""
    if v["status"] == LrtStatus.TESTED.value:
        return _fmt(v["p_value"], 4)
    if v["status"] == LrtStatus.CV_LESS_THAN_ONE.value:
        return "CV<1"
    return "not applicable"


def render_pvalue_csv(doc: dict) -> str:
    lines = ["site,month," + ",".join(CANDIDATE_KEYS)]
    for group in doc["groups"]:
        verdicts = {v["candidate"]: v for v in group.get("verdicts") or []}
        cells = [_pvalue_cell(verdicts, key) for key in CANDIDATE_KEYS]
        lines.append(f"{group['site']},{group['month']}," + ",".join(cells))
    return "\n".join(lines) + "\n"


def _masked_param_cells(family: str, params: dict | None) -> list[str]:
    if params is None:
        return ["", "", "", "", ""]
    cells = {name: _fmt(params[name], 4)
             for name in ("p", "alpha", "beta", "k", "lambda")}
    if family == Family.EXPONENTIAL.value:
        cells["p"] = ""
    elif family == Family.GAMMA.value:
        cells["p"] = cells["k"] = cells["lambda"] = ""
    elif family == Family.WEIBULL.value:
        cells["p"] = cells["alpha"] = cells["beta"] = ""
    return [cells[name] for name in ("p", "alpha", "beta", "k", "lambda")]


def render_selection_csv(doc: dict) -> str:
    lines = ["site,month,selected_model,p,alpha,beta,k,lambda"]
    for group in doc["groups"]:
        sel = group.get("selection")
        if not sel:
            err = group.get("selection_error") or "unavailable"
            lines.append(f"{group['site']},{group['month']},{err},,,,,")
            continue
        label = sel["label"]
        if "," in label:
            label = f'"{label}"'
        cells = _masked_param_cells(sel["family"], sel["params"])
        lines.append(f"{group['site']},{group['month']},{label}," + ",".join(cells))
    return "\n".join(lines) + "\n"
