"""Station CSV ingestion with per-filter accounting.

Expected columns: station_id, lon, lat, date (ISO-8601), value,
station_type. Rows fall through a fixed filter chain (malformed, station
type, value cap, domain bounds, station-day duplicates, days under the
station threshold); the report counts every row exactly once, so
rows_in == rows_kept + sum(dropped values) always holds.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date as _date

import numpy as np

from .config import StationFilterConfig
from .errors import ValidationError
from .meanmodel import ObservationSet

REQUIRED_COLUMNS = ("station_id", "lon", "lat", "date", "value", "station_type")


@dataclass
class CleaningReport:
    """Where every input row went."""

    rows_in: int = 0
    rows_kept: int = 0
    dropped: dict = field(default_factory=dict)
    malformed: list = field(default_factory=list)  # (line number, reason)
    excluded_days: list = field(default_factory=list)  # (date, station count)

    def drop(self, reason: str, count: int = 1):
        self.dropped[reason] = self.dropped.get(reason, 0) + count

    @property
    def conserved(self) -> bool:
        return self.rows_in == self.rows_kept + sum(self.dropped.values())

    def as_dict(self) -> dict:
        return {
            "rows_in": self.rows_in,
            "rows_kept": self.rows_kept,
            "dropped": dict(sorted(self.dropped.items())),
            "malformed": [list(m) for m in self.malformed],
            "excluded_days": [list(d) for d in self.excluded_days],
        }


def _parse_row(row: dict, line_no: int):
    try:
        lon = float(row["lon"])
        lat = float(row["lat"])
        value = float(row["value"])
    except (TypeError, ValueError) as exc:
        raise ValueError(f"line {line_no}: bad numeric field ({exc})") from exc
    if not (np.isfinite(lon) and np.isfinite(lat) and np.isfinite(value)):
        raise ValueError(f"line {line_no}: non-finite numeric field")
    day = (row["date"] or "").strip()
    try:
        _date.fromisoformat(day)
    except ValueError as exc:
        raise ValueError(f"line {line_no}: bad date {day!r}") from exc
    sid = (row["station_id"] or "").strip()
    if not sid:
        raise ValueError(f"line {line_no}: empty station_id")
    return sid, lon, lat, day, value, (row["station_type"] or "").strip()


def ingest_stations(
    csv_path,
    cfg: StationFilterConfig | None = None,
    domain_bounds: tuple | None = None,
) -> tuple:
    """Read and clean a station CSV into per-day ObservationSets.

    Returns (days, report) where days is a date-sorted list of
    ObservationSet with an (intercept, lon, lat) design attached.
    Malformed rows are collected, not fatal; a wrong header aborts.
    """
    cfg = cfg or StationFilterConfig()
    report = CleaningReport()
    by_day: dict = {}

    with open(csv_path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ValidationError(f"{csv_path}: header lacks columns {missing}; got {header}")
        for line_no, row in enumerate(reader, start=2):
            report.rows_in += 1
            try:
                sid, lon, lat, day, value, stype = _parse_row(row, line_no)
            except ValueError as exc:
                report.malformed.append((line_no, str(exc)))
                report.drop("malformed")
                continue
            if cfg.background_only and stype != "background":
                report.drop("non_background")
                continue
            if value > cfg.max_value:
                report.drop("value_above_max")
                continue
            if domain_bounds is not None:
                xmin, xmax, ymin, ymax = domain_bounds
                if not (xmin <= lon <= xmax and ymin <= lat <= ymax):
                    report.drop("outside_domain")
                    continue
            key = (day, sid)
            by_day.setdefault(day, {}).setdefault(key, []).append((lon, lat, value))

    if report.rows_in == 0:
        raise ValidationError(f"{csv_path}: no data rows")

    days = []
    for day in sorted(by_day):
        stations = by_day[day]
        rows_here = sum(len(v) for v in stations.values())
        if len(stations) < cfg.min_active:
            report.drop("below_min_stations", rows_here)
            report.excluded_days.append((day, len(stations)))
            continue
        ids, lons, lats, vals = [], [], [], []
        for (d, sid), recs in sorted(stations.items()):
            if len(recs) > 1:
                report.drop("duplicate_station_day", len(recs) - 1)
            ids.append(sid)
            lons.append(np.mean([r[0] for r in recs]))
            lats.append(np.mean([r[1] for r in recs]))
            vals.append(np.mean([r[2] for r in recs]))
        report.rows_kept += len(ids)
        lons = np.asarray(lons)
        lats = np.asarray(lats)
        days.append(
            ObservationSet(
                locations=np.column_stack([lons, lats]),
                values=np.asarray(vals),
                covariates=np.column_stack([np.ones_like(lons), lons, lats]),
                covariate_names=("intercept", "lon", "lat"),
                day_id=day,
                station_ids=tuple(ids),
            )
        )
    return days, report
