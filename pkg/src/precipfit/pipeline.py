"""CSV ingestion and site-month sample preparation.

Input rows are (site, date, amount_mm).  Wet days (amount >= the 1.0 mm
threshold) inside the calibration window are kept, the 0.95 mm location
offset is subtracted, and samples are grouped by (site, calendar month).
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .distributions import MgwParams, mgw_moments, sample_mgw

CALIBRATION_START = dt.date(1961, 1, 1)
CALIBRATION_END = dt.date(1985, 12, 31)
WET_THRESHOLD_MM = 1.0
OFFSET_MM = 0.95

EXPECTED_HEADER = ["site", "date", "amount_mm"]


class MalformedRecordError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class DailyRecord:
    site: str
    date: dt.date
    amount_mm: float


@dataclass(frozen=True)
class SampleSummary:
    site: str
    month: int
    xs: np.ndarray
    n: int
    mean: float
    variance: float
    cv_stat: float


def read_csv(path) -> tuple[list[DailyRecord], int]:
    """Parse the input table; returns (records, skipped_blank_amount_count).

    Blank amounts are skipped and counted as warnings; anything else that
    fails to parse (bad date, bad number, negative amount, duplicate
    site+date) raises MalformedRecordError with the offending line number.
    """
    records: list[DailyRecord] = []
    skipped = 0
    seen: set[tuple[str, dt.date]] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRecordError(1, "empty file, expected a header row")
        if [h.strip() for h in header] != EXPECTED_HEADER:
            raise MalformedRecordError(
                1, f"expected header {','.join(EXPECTED_HEADER)}, got {','.join(header)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise MalformedRecordError(line_no, f"expected 3 fields, got {len(row)}")
            site = row[0].strip()
            if not site:
                raise MalformedRecordError(line_no, "empty site")
            try:
                date = dt.date.fromisoformat(row[1].strip())
            except ValueError:
                raise MalformedRecordError(line_no, f"bad ISO date {row[1]!r}") from None
            amount_text = row[2].strip()
            if not amount_text:
                skipped += 1
                continue
            try:
                amount = float(amount_text)
            except ValueError:
                raise MalformedRecordError(line_no, f"bad amount {row[2]!r}") from None
            if not math.isfinite(amount) or amount < 0.0:
                raise MalformedRecordError(line_no, f"amount must be finite and >= 0, got {amount}")
            key = (site, date)
            if key in seen:
                raise MalformedRecordError(line_no, f"duplicate record for {site} {date}")
            seen.add(key)
            records.append(DailyRecord(site=site, date=date, amount_mm=amount))
    return records, skipped


def summarize(site: str, month: int, xs: np.ndarray, ddof: int = 1) -> SampleSummary:
    xs = np.sort(np.asarray(xs, dtype=float))
    n = xs.size
    mean = float(xs.mean()) if n else 0.0
    variance = float(xs.var(ddof=ddof)) if n > ddof else 0.0
    cv_stat = variance / (mean * mean) if mean > 0.0 else 0.0
    return SampleSummary(site=site, month=month, xs=xs, n=n,
                         mean=mean, variance=variance, cv_stat=cv_stat)


def ingest(records: list[DailyRecord],
           calibration_start: dt.date = CALIBRATION_START,
           calibration_end: dt.date = CALIBRATION_END,
           wet_threshold: float = WET_THRESHOLD_MM,
           offset: float = OFFSET_MM,
           ddof: int = 1) -> dict[tuple[str, int], SampleSummary]:
    """Group offset-adjusted wet-day amounts by (site, month).

    Samples are value-sorted so summaries are invariant to input order.
    """
    groups: dict[tuple[str, int], list[float]] = {}
    for rec in records:
        if not calibration_start <= rec.date <= calibration_end:
            continue
        if rec.amount_mm < wet_threshold:
            continue
        groups.setdefault((rec.site, rec.date.month), []).append(rec.amount_mm - offset)
    return {key: summarize(key[0], key[1], np.array(vals), ddof=ddof)
            for key, vals in sorted(groups.items())}


@dataclass(frozen=True)
class ShiftedModel:
    """A fitted model with the location offset restored."""

    params: MgwParams
    offset_mm: float = OFFSET_MM

    def mean(self) -> float:
        return mgw_moments(self.params).mean + self.offset_mm

    def variance(self) -> float:
        return mgw_moments(self.params).variance

    def sample(self, n: int, seed: int | None = None) -> np.ndarray:
        return sample_mgw(self.params, n, seed=seed) + self.offset_mm


def restore_location(params: MgwParams, offset: float = OFFSET_MM) -> ShiftedModel:
    return ShiftedModel(params=params, offset_mm=offset)
