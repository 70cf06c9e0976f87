"""Raw event ingestion: CSV parsing, validation and per-day bundling.

Three CSV streams are supported (UTF-8, header row required)::

    cgm.csv    subject,timestamp,bg
    bolus.csv  subject,timestamp,kind,units      kind in {correction,meal,total}
    meal.csv   subject,timestamp,carbs

Timestamps are device-local ``YYYY-MM-DDTHH:MM``; the calendar date of the
timestamp is the day boundary.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Sequence, Union

from .errors import CrossGPError, MalformedRow, OutOfRange

log = logging.getLogger(__name__)

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M"

BG_RANGE = (20.0, 600.0)
MAX_UNITS = 300.0
MAX_CARBS = 500.0

SCHEMAS: dict[str, tuple[str, ...]] = {
    "cgm": ("subject", "timestamp", "bg"),
    "bolus": ("subject", "timestamp", "kind", "units"),
    "meal": ("subject", "timestamp", "carbs"),
}

# csv column value -> InsulinEvent.kind
BOLUS_KINDS = {
    "correction": "CorrectionBolus",
    "meal": "MealBolus",
    "total": "TotalBolus",
}
_KIND_TO_CSV = {v: k for k, v in BOLUS_KINDS.items()}


@dataclass(frozen=True)
class CgmReading:
    subject: str
    timestamp: datetime
    bg: float


@dataclass(frozen=True)
class InsulinEvent:
    subject: str
    timestamp: datetime
    kind: str
    units: float


@dataclass(frozen=True)
class MealEvent:
    subject: str
    timestamp: datetime
    carbs: float


RawEvent = Union[CgmReading, InsulinEvent, MealEvent]


@dataclass
class SubjectDayBundle:
    """All events of one subject on one calendar date."""

    subject: str
    date: date
    cgm: list[CgmReading] = field(default_factory=list)
    insulin: list[InsulinEvent] = field(default_factory=list)
    meals: list[MealEvent] = field(default_factory=list)

    @property
    def n_events(self) -> int:
        return len(self.cgm) + len(self.insulin) + len(self.meals)


def format_timestamp(ts: datetime) -> str:
    return ts.strftime(TIMESTAMP_FORMAT)


def parse_timestamp(text: str) -> datetime:
    """Strict ``YYYY-MM-DDTHH:MM``; raises ValueError otherwise."""
    text = text.strip()
    # fromisoformat is fast but lenient, so pin the exact shape first
    if len(text) != 16 or text[4] != "-" or text[7] != "-" or text[10] != "T" or text[13] != ":":
        raise ValueError(text)
    return datetime.fromisoformat(text)


def _parse_timestamp(text: str, file: str, line: int) -> datetime:
    try:
        return parse_timestamp(text)
    except ValueError:
        raise MalformedRow(file, line, f"bad timestamp {text!r}") from None


def _parse_number(text: str, file: str, line: int, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise MalformedRow(file, line, f"bad {name} {text!r}") from None


def _parse_subject(text: str, file: str, line: int) -> str:
    subject = text.strip()
    if not subject:
        raise MalformedRow(file, line, "empty subject")
    return subject


def _parse_row(schema: str, row: list[str], file: str, line: int) -> RawEvent:
    expected = len(SCHEMAS[schema])
    if len(row) != expected:
        raise MalformedRow(file, line, f"expected {expected} fields, got {len(row)}")
    subject = _parse_subject(row[0], file, line)
    ts = _parse_timestamp(row[1], file, line)
    if schema == "cgm":
        bg = _parse_number(row[2], file, line, "bg")
        if not (math.isfinite(bg) and BG_RANGE[0] <= bg <= BG_RANGE[1]):
            raise OutOfRange(file, line, f"bg={bg}")
        return CgmReading(subject, ts, bg)
    if schema == "bolus":
        kind = BOLUS_KINDS.get(row[2].strip())
        if kind is None:
            raise MalformedRow(file, line, f"unknown bolus kind {row[2]!r}")
        units = _parse_number(row[3], file, line, "units")
        if not (math.isfinite(units) and 0.0 <= units <= MAX_UNITS):
            raise OutOfRange(file, line, f"units={units}")
        return InsulinEvent(subject, ts, kind, units)
    carbs = _parse_number(row[2], file, line, "carbs")
    if not (math.isfinite(carbs) and 0.0 <= carbs <= MAX_CARBS):
        raise OutOfRange(file, line, f"carbs={carbs}")
    return MealEvent(subject, ts, carbs)


def parse_event_file(
    path: str | Path, schema: str, *, strict: bool = False
) -> tuple[list[RawEvent], list[CrossGPError]]:
    """Parse a single CSV file of the given stream kind.

    Returns the well-formed events in file order together with the list of
    row errors. With ``strict=True`` the first error is raised instead.
    """
    if schema not in SCHEMAS:
        raise ValueError(f"unknown schema {schema!r}; expected one of {sorted(SCHEMAS)}")
    name = str(path)
    events: list[RawEvent] = []
    errors: list[CrossGPError] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != SCHEMAS[schema]:
            raise MalformedRow(name, 1, f"header must be {','.join(SCHEMAS[schema])}")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            try:
                events.append(_parse_row(schema, row, name, line))
            except (MalformedRow, OutOfRange) as exc:
                if strict:
                    raise
                log.warning("rejected row: %s", exc)
                errors.append(exc)
    return events, errors


def parse_event_files(
    paths: Iterable[str | Path], schema: str, *, strict: bool = False
) -> tuple[list[RawEvent], list[CrossGPError]]:
    """Parse several files of one stream kind, merged in sorted path order."""
    events: list[RawEvent] = []
    errors: list[CrossGPError] = []
    for path in sorted(str(p) for p in paths):
        ev, err = parse_event_file(path, schema, strict=strict)
        events.extend(ev)
        errors.extend(err)
    return events, errors


def bundle_by_day(*streams: Iterable[RawEvent]) -> list[SubjectDayBundle]:
    """Group events into one bundle per (subject, calendar date).

    Bundles come back sorted by (subject, date). Within a bundle CGM readings
    are sorted by timestamp and readings sharing a timestamp are collapsed,
    keeping the last one seen. Insulin and meal events keep input order.
    """
    cgm: dict[tuple[str, date], dict[datetime, CgmReading]] = defaultdict(dict)
    insulin: dict[tuple[str, date], list[InsulinEvent]] = defaultdict(list)
    meals: dict[tuple[str, date], list[MealEvent]] = defaultdict(list)
    keys: set[tuple[str, date]] = set()
    n_dup = 0
    for stream in streams:
        for ev in stream:
            key = (ev.subject, ev.timestamp.date())
            keys.add(key)
            if isinstance(ev, CgmReading):
                if ev.timestamp in cgm[key]:
                    n_dup += 1
                cgm[key][ev.timestamp] = ev
            elif isinstance(ev, InsulinEvent):
                insulin[key].append(ev)
            elif isinstance(ev, MealEvent):
                meals[key].append(ev)
            else:
                raise TypeError(f"not a raw event: {ev!r}")
    if n_dup:
        log.info("collapsed %d duplicate CGM timestamps", n_dup)
    bundles = []
    for key in sorted(keys):
        readings = cgm.get(key, {})
        bundles.append(
            SubjectDayBundle(
                subject=key[0],
                date=key[1],
                cgm=[readings[t] for t in sorted(readings)],
                insulin=list(insulin.get(key, ())),
                meals=list(meals.get(key, ())),
            )
        )
    return bundles


def load_raw_dir(
    directory: str | Path, *, strict: bool = False
) -> tuple[list[SubjectDayBundle], list[CrossGPError]]:
    """Parse ``cgm.csv``, ``bolus.csv`` and ``meal.csv`` from a directory and bundle them."""
    directory = Path(directory)
    streams = []
    errors: list[CrossGPError] = []
    for schema in ("cgm", "bolus", "meal"):
        path = directory / f"{schema}.csv"
        if not path.exists():
            raise FileNotFoundError(path)
        ev, err = parse_event_file(path, schema, strict=strict)
        streams.append(ev)
        errors.extend(err)
    return bundle_by_day(*streams), errors


# -- bundle files -----------------------------------------------------------
#
# One ``<subject>.jsonl`` file per subject, one line per day:
#   {"subject": "S01", "date": "2013-04-02",
#    "cgm": [["2013-04-02T08:05", 112.0], ...],
#    "insulin": [["2013-04-02T08:10", "meal", 4.0], ...],
#    "meals": [["2013-04-02T08:00", 45.0], ...]}


def bundle_to_record(bundle: SubjectDayBundle) -> dict:
    return {
        "subject": bundle.subject,
        "date": bundle.date.isoformat(),
        "cgm": [[format_timestamp(r.timestamp), r.bg] for r in bundle.cgm],
        "insulin": [
            [format_timestamp(e.timestamp), _KIND_TO_CSV[e.kind], e.units]
            for e in bundle.insulin
        ],
        "meals": [[format_timestamp(m.timestamp), m.carbs] for m in bundle.meals],
    }


def bundle_from_record(rec: dict) -> SubjectDayBundle:
    subject = rec["subject"]
    parse = parse_timestamp
    return SubjectDayBundle(
        subject=subject,
        date=date.fromisoformat(rec["date"]),
        cgm=[CgmReading(subject, parse(t), float(v)) for t, v in rec["cgm"]],
        insulin=[
            InsulinEvent(subject, parse(t), BOLUS_KINDS[k], float(u))
            for t, k, u in rec["insulin"]
        ],
        meals=[MealEvent(subject, parse(t), float(c)) for t, c in rec["meals"]],
    )


def write_bundles(bundles: Sequence[SubjectDayBundle], out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_subject: dict[str, list[SubjectDayBundle]] = defaultdict(list)
    for b in bundles:
        by_subject[b.subject].append(b)
    written = []
    for subject in sorted(by_subject):
        path = out_dir / f"{subject}.jsonl"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for b in by_subject[subject]:
                fh.write(json.dumps(bundle_to_record(b), separators=(",", ":")) + "\n")
        written.append(path)
    return written


def read_bundles(directory: str | Path) -> list[SubjectDayBundle]:
    bundles = []
    for path in sorted(Path(directory).glob("*.jsonl")):
        with open(path, encoding="utf-8") as fh:
            bundles.extend(bundle_from_record(json.loads(line)) for line in fh if line.strip())
    bundles.sort(key=lambda b: (b.subject, b.date))
    return bundles
