"""Batch command-line interface.

Subcommands: fit (ingest + fit every site-month group), select (fit plus
likelihood-ratio model selection, or selection over precomputed / external
log-likelihoods), sample (draw amounts from a selected model descriptor).

Exit codes: 0 success, 1 usage or configuration error, 2 I/O or malformed
input, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .distributions import MgwParams
from .estimators import EstimationError
from .pipeline import MalformedRecordError, restore_location
from .reporting import (
    document_to_json,
    render_loglik_csv,
    render_pvalue_csv,
    render_selection_csv,
)
from .runner import (
    RunConfig,
    build_document,
    config_from_dict,
    results_from_bypass,
    results_from_document,
    run_fit,
    select_results,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with config values; flags override")
    p.add_argument("--calibration-start")
    p.add_argument("--calibration-end")
    p.add_argument("--wet-threshold", type=float)
    p.add_argument("--offset", type=float, dest="offset_mm")
    p.add_argument("--variance-ddof", type=int)
    p.add_argument("--p-step", type=float)
    p.add_argument("--skew-lo", type=float)
    p.add_argument("--skew-hi", type=float)
    p.add_argument("--skew-step", type=float)
    p.add_argument("--score-tol", type=float)
    p.add_argument("--eps0", type=float)
    p.add_argument("--p-degeneracy-tol", type=float)
    p.add_argument("--prune-shape-cap", type=float)
    p.add_argument("--prune-var-floor", type=float)
    p.add_argument("--max-inner-iters", type=int)
    p.add_argument("--max-outer-iters", type=int)
    p.add_argument("--threshold", type=float, dest="selection_threshold")
    p.add_argument("--formats", help="comma-separated subset of csv,json")
    p.add_argument("--parallelism", type=int)


def _build_parser() -> _Parser:
    parser = _Parser(prog="precipfit",
                     description="Daily precipitation amount model fitting and selection")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit all five models per site-month")
    p_fit.add_argument("--input", required=True)
    p_fit.add_argument("--output-dir", required=True)
    _add_config_flags(p_fit)

    p_sel = sub.add_parser("select", help="fit and run model selection")
    p_sel.add_argument("--input")
    p_sel.add_argument("--fits", help="JSON document from a previous fit run")
    p_sel.add_argument("--bypass",
                       help="JSON list of {site, month, log_lik, flags} rows")
    p_sel.add_argument("--output-dir", required=True)
    _add_config_flags(p_sel)

    p_samp = sub.add_parser("sample", help="sample amounts from a model descriptor")
    p_samp.add_argument("--model", required=True,
                        help="model descriptor (params and offset_mm), "
                             "inline JSON or a path to a JSON file")
    p_samp.add_argument("--n", type=int, required=True)
    p_samp.add_argument("--seed", type=int, default=None)
    p_samp.add_argument("--output", help="output CSV; stdout when omitted")
    return parser


def _assemble_config(args) -> RunConfig:
    config = RunConfig()
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_values = json.load(fh)
        except OSError as exc:
            raise exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {args.config}: {exc}") from None
        try:
            config = config_from_dict(config, file_values)
        except (TypeError, ValueError, KeyError) as exc:
            raise UsageError(f"config file {args.config}: {exc}") from None
    overlay: dict = {}
    for key in ("calibration_start", "calibration_end", "wet_threshold",
                "offset_mm", "variance_ddof", "selection_threshold",
                "parallelism"):
        value = getattr(args, key, None)
        if value is not None:
            overlay[key] = value
    grid = {name: getattr(args, name) for name in
            ("p_step", "skew_lo", "skew_hi", "skew_step")
            if getattr(args, name, None) is not None}
    if grid:
        overlay["grid"] = grid
    ml = {name: getattr(args, name) for name in
          ("score_tol", "eps0", "p_degeneracy_tol", "prune_shape_cap",
           "prune_var_floor", "max_inner_iters", "max_outer_iters")
          if getattr(args, name, None) is not None}
    if ml:
        overlay["ml"] = ml
    if getattr(args, "formats", None):
        formats = tuple(f.strip() for f in args.formats.split(",") if f.strip())
        unknown = set(formats) - {"csv", "json"}
        if unknown:
            raise UsageError(f"unknown formats: {', '.join(sorted(unknown))}")
        overlay["formats"] = formats
    if getattr(args, "input", None):
        overlay["input_path"] = args.input
    if getattr(args, "output_dir", None):
        overlay["output_dir"] = args.output_dir
    try:
        return config_from_dict(config, overlay)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _write_outputs(config: RunConfig, doc: dict, tables: dict[str, str]) -> None:
    os.makedirs(config.output_dir, exist_ok=True)
    if "json" in config.formats:
        path = os.path.join(config.output_dir, "run.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(document_to_json(doc))
    if "csv" in config.formats:
        for name, text in tables.items():
            with open(os.path.join(config.output_dir, name), "w",
                      encoding="utf-8") as fh:
                fh.write(text)


def _cmd_fit(args) -> int:
    config = _assemble_config(args)
    results, skipped = run_fit(config)
    doc = build_document(config, results, skipped)
    _write_outputs(config, doc, {"logliks.csv": render_loglik_csv(doc)})
    return 0


def _cmd_select(args) -> int:
    sources = [s for s in (args.input, args.fits, args.bypass) if s]
    if len(sources) != 1:
        raise UsageError("select needs exactly one of --input, --fits, --bypass")
    config = _assemble_config(args)
    skipped = 0
    if args.bypass:
        with open(args.bypass, encoding="utf-8") as fh:
            rows = json.load(fh)
        if not isinstance(rows, list):
            raise MalformedRecordError(1, "bypass file must be a JSON list")
        results = results_from_bypass(rows)
    elif args.fits:
        with open(args.fits, encoding="utf-8") as fh:
            doc_in = json.load(fh)
        results = results_from_document(doc_in)
        skipped = doc_in.get("warnings", {}).get("skipped_records", 0)
        prior_input = doc_in.get("config", {}).get("input_path")
        if prior_input and config.input_path is None:
            config = config_from_dict(config, {"input_path": prior_input})
    else:
        results, skipped = run_fit(config)
    select_results(results, config.selection_threshold)
    doc = build_document(config, results, skipped)
    tables = {
        "logliks.csv": render_loglik_csv(doc),
        "pvalues.csv": render_pvalue_csv(doc),
        "selection.csv": render_selection_csv(doc),
    }
    _write_outputs(config, doc, tables)
    return 0


def _cmd_sample(args) -> int:
    if args.model.lstrip().startswith("{"):
        descriptor = json.loads(args.model)
    else:
        with open(args.model, encoding="utf-8") as fh:
            descriptor = json.load(fh)
    if args.n < 0:
        raise UsageError(f"--n must be nonnegative, got {args.n}")
    try:
        params = MgwParams.from_dict(descriptor["params"])
        offset = float(descriptor.get("offset_mm", 0.95))
    except (KeyError, TypeError, ValueError) as exc:
        raise EstimationError(f"invalid model descriptor: {exc}") from None
    values = restore_location(params, offset).sample(args.n, seed=args.seed)
    lines = ["amount_mm"] + [f"{v:.1f}" for v in values]
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "fit":
            return _cmd_fit(args)
        if args.command == "select":
            return _cmd_select(args)
        return _cmd_sample(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (MalformedRecordError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except (EstimationError, ValueError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
