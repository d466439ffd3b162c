"""Batch orchestration: ingest, fit every site-month group, select, emit.

Group work can run on a thread pool; results are gathered in submission
order over pre-sorted group keys, so output documents are byte-identical
for any parallelism setting.
"""

from __future__ import annotations

import datetime as dt
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from . import pipeline, reporting
from .estimators import (
    CvLessThanOneError,
    EstimationError,
    Fit,
    FitFailure,
    MixtureGridSpec,
    MlConfig,
    NoAdmissibleCandidateError,
    NonIdentifiableError,
    PriorFits,
    fit_exponential_ml,
    fit_gamma_ml,
    fit_mgw_ml,
    fit_mixed_exponential_em,
    fit_weibull_ml,
    mixture_estimate_mgw,
)
from .pipeline import SampleSummary
from .selection import (
    CANDIDATE_KEYS,
    MGW_ML_KEY,
    LrtVerdict,
    SelectionReport,
    run_lrts,
    select_model,
)


@dataclass(frozen=True)
class RunConfig:
    input_path: str | None = None
    output_dir: str | None = None
    calibration_start: dt.date = pipeline.CALIBRATION_START
    calibration_end: dt.date = pipeline.CALIBRATION_END
    wet_threshold: float = pipeline.WET_THRESHOLD_MM
    offset_mm: float = pipeline.OFFSET_MM
    variance_ddof: int = 1
    grid: MixtureGridSpec = field(default_factory=MixtureGridSpec)
    ml: MlConfig = field(default_factory=MlConfig)
    selection_threshold: float = 0.05
    formats: tuple[str, ...] = ("csv", "json")
    parallelism: int = 1

    def to_dict(self) -> dict:
        return {
            "input_path": self.input_path,
            "calibration_start": self.calibration_start.isoformat(),
            "calibration_end": self.calibration_end.isoformat(),
            "wet_threshold_mm": self.wet_threshold,
            "offset_mm": self.offset_mm,
            "variance_ddof": self.variance_ddof,
            "grid": {"p_step": self.grid.p_step, "skew_lo": self.grid.skew_lo,
                     "skew_hi": self.grid.skew_hi, "skew_step": self.grid.skew_step},
            "ml": {"score_tol": self.ml.score_tol, "eps0": self.ml.eps0,
                   "p_degeneracy_tol": self.ml.p_degeneracy_tol,
                   "prune_shape_cap": self.ml.prune_shape_cap,
                   "prune_var_floor": self.ml.prune_var_floor,
                   "max_inner_iters": self.ml.max_inner_iters,
                   "max_outer_iters": self.ml.max_outer_iters},
            "selection_threshold": self.selection_threshold,
            "formats": list(self.formats),
            "parallelism": self.parallelism,
        }


def config_from_dict(base: RunConfig, d: dict) -> RunConfig:
    """Overlay a (possibly partial) config mapping onto a base RunConfig."""
    kwargs = {}
    simple = {"input_path": str, "output_dir": str, "wet_threshold": float,
              "offset_mm": float, "variance_ddof": int,
              "selection_threshold": float, "parallelism": int}
    for key, cast in simple.items():
        if key in d and d[key] is not None:
            kwargs[key] = cast(d[key])
    if "wet_threshold_mm" in d:
        kwargs["wet_threshold"] = float(d["wet_threshold_mm"])
    for key in ("calibration_start", "calibration_end"):
        if key in d and d[key] is not None:
            v = d[key]
            kwargs[key] = v if isinstance(v, dt.date) else dt.date.fromisoformat(v)
    if "formats" in d and d["formats"] is not None:
        kwargs["formats"] = tuple(d["formats"])
    if "grid" in d and d["grid"] is not None:
        kwargs["grid"] = MixtureGridSpec(**{**base.grid.__dict__, **d["grid"]})
    if "ml" in d and d["ml"] is not None:
        ml = dict(d["ml"])
        for int_key in ("max_inner_iters", "max_outer_iters"):
            if int_key in ml:
                ml[int_key] = int(ml[int_key])
        kwargs["ml"] = MlConfig(**{**base.ml.__dict__, **ml})
    return replace(base, **kwargs)


@dataclass
class GroupResult:
    site: str
    month: int
    summary: SampleSummary | None
    fits: dict[str, Fit | FitFailure]
    verdicts: list[LrtVerdict] | None = None
    selection: SelectionReport | None = None
    selection_error: str | None = None


def fit_group(summary: SampleSummary, config: RunConfig) -> GroupResult:
    """All six fits for one site-month sample; failures are recorded, not raised."""
    xs = summary.xs
    fits: dict[str, Fit | FitFailure] = {}

    def attempt(key: str, min_n: int, fn):
        if summary.n < min_n:
            fits[key] = FitFailure(reason="too_few_observations",
                                   detail=f"n={summary.n} < {min_n}")
            return None
        try:
            fit = fn()
        except CvLessThanOneError as exc:
            fits[key] = FitFailure(reason="cv_stat_below_one",
                                   detail=f"cv_stat={exc.cv_stat:.6g}")
            return None
        except NonIdentifiableError as exc:
            fits[key] = FitFailure(reason="non_identifiable", detail=str(exc))
            return None
        except NoAdmissibleCandidateError as exc:
            fits[key] = FitFailure(reason="no_admissible_candidate", detail=str(exc))
            return None
        except EstimationError as exc:
            fits[key] = FitFailure(reason="estimation_failed", detail=str(exc))
            return None
        fits[key] = fit
        return fit

    attempt("exponential_ml", 1, lambda: fit_exponential_ml(xs))
    gam = attempt("gamma_ml", 2, lambda: fit_gamma_ml(xs))
    wei = attempt("weibull_ml", 2, lambda: fit_weibull_ml(xs))
    me = attempt("mixed_exponential_ml", 3, lambda: fit_mixed_exponential_em(xs))
    mix = attempt("mgw_mixture", 3,
                  lambda: mixture_estimate_mgw(xs, grid=config.grid,
                                               ddof=config.variance_ddof))
    prior = PriorFits(gamma=gam, weibull=wei, mixed_exp=me, mixture=mix)
    attempt(MGW_ML_KEY, 5, lambda: fit_mgw_ml(xs, cfg=config.ml, prior=prior))
    return GroupResult(site=summary.site, month=summary.month,
                       summary=summary, fits=fits)


def select_group(result: GroupResult, threshold: float) -> None:
    mgw = result.fits.get(MGW_ML_KEY)
    if not isinstance(mgw, Fit):
        result.selection_error = (mgw.reason if isinstance(mgw, FitFailure)
                                  else "comparative_base_unavailable")
        return
    candidates = {k: result.fits[k] for k in CANDIDATE_KEYS if k in result.fits}
    result.verdicts = run_lrts(candidates, mgw)
    result.selection = select_model(candidates, mgw, threshold=threshold)


def run_fit(config: RunConfig) -> tuple[list[GroupResult], int]:
    if config.input_path is None:
        raise ValueError("run_fit requires input_path")
    records, skipped = pipeline.read_csv(config.input_path)
    summaries = pipeline.ingest(
        records,
        calibration_start=config.calibration_start,
        calibration_end=config.calibration_end,
        wet_threshold=config.wet_threshold,
        offset=config.offset_mm,
        ddof=config.variance_ddof,
    )
    ordered = [summaries[key] for key in sorted(summaries)]
    if config.parallelism > 1:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            results = list(pool.map(lambda s: fit_group(s, config), ordered))
    else:
        results = [fit_group(s, config) for s in ordered]
    return results, skipped


def select_results(results: list[GroupResult], threshold: float) -> None:
    for result in results:
        select_group(result, threshold)


def build_document(config: RunConfig, results: list[GroupResult],
                   skipped: int) -> dict:
    groups = []
    for r in results:
        group: dict = {"site": r.site, "month": r.month}
        if r.summary is not None:
            group["summary"] = reporting.summary_to_dict(r.summary)
        group["fits"] = {key: reporting.fit_to_dict(r.fits[key])
                         for key in reporting.ALL_FIT_KEYS if key in r.fits}
        if r.verdicts is not None:
            group["verdicts"] = [reporting.verdict_to_dict(v) for v in r.verdicts]
        if r.selection is not None:
            group["selection"] = reporting.selection_to_dict(r.selection,
                                                             config.offset_mm)
        if r.selection_error is not None:
            group["selection_error"] = r.selection_error
        groups.append(group)
    return {
        "schema": reporting.SCHEMA,
        "config": config.to_dict(),
        "warnings": {"skipped_records": skipped},
        "groups": groups,
    }


def results_from_document(doc: dict) -> list[GroupResult]:
    results = []
    for group in doc["groups"]:
        summary = (reporting.summary_from_dict(group["summary"])
                   if "summary" in group else None)
        fits = {key: reporting.fit_from_dict(fd)
                for key, fd in group["fits"].items()}
        results.append(GroupResult(site=group["site"], month=group["month"],
                                   summary=summary, fits=fits))
    return results


def results_from_bypass(rows: list[dict]) -> list[GroupResult]:
    results = []
    for row in rows:
        group = reporting.bypass_group(row)
        results.append(GroupResult(site=group["site"], month=group["month"],
                                   summary=None, fits=group["fits"]))
    return results
