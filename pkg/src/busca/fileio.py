"""Reading series (plain text or JSON Lines) and writing CSV reports."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from typing import Iterable, List, Sequence, TextIO, Tuple

import numpy as np

from .core import EventSeries, SeriesError, validate_series


@dataclass(frozen=True)
class InputError:
    """A series that could not be read; ``line`` is 1-based (0 if unknown)."""

    source: str
    line: int
    message: str

    def __str__(self):
        where = f"{self.source}:{self.line}" if self.line else self.source
        return f"{where}: {self.message}"


def _is_jsonl(path: str, first: str) -> bool:
    ext = os.path.splitext(path)[1].lower()
    if ext in (".jsonl", ".ndjson", ".json"):
        return True
    if ext in (".txt", ".dat", ".csv"):
        return False
    return first.lstrip().startswith("{")


def _number(x, what):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValueError(f"{what} must be a number, got {x!r}")
    return float(x)


def parse_jsonl_record(text: str) -> EventSeries:
    obj = json.loads(text)
    if not isinstance(obj, dict):
        raise ValueError("expected a JSON object")
    if "timestamps" not in obj:
        raise ValueError("missing 'timestamps'")
    ts = obj["timestamps"]
    if not isinstance(ts, list):
        raise ValueError("'timestamps' must be a list")
    ts = [_number(v, "timestamp") for v in ts]
    a = _number(obj["a"], "a") if obj.get("a") is not None else None
    b = _number(obj["b"], "b") if obj.get("b") is not None else None
    sid = obj.get("id", "")
    return validate_series(ts, a, b, id=str(sid))


def read_jsonl(lines: Iterable[str], source: str = "<jsonl>"):
    """Parse JSON Lines; bad lines become :class:`InputError` entries."""
    series, errors = [], []
    for no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            s = parse_jsonl_record(line)
        except (ValueError, SeriesError) as exc:
            errors.append(InputError(source, no, str(exc)))
            continue
        if not s.id:
            s = EventSeries(s.timestamps, s.a, s.b, f"{source}:{no}")
        series.append(s)
    return series, errors


def read_plain(lines: Iterable[str], source: str = "<text>", sid: str = ""):
    """One timestamp per line; blank lines and ``#`` comments are skipped."""
    values = []
    for no, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            values.append(float(text))
        except ValueError:
            return [], [InputError(source, no, f"not a number: {text!r}")]
    try:
        return [validate_series(values, id=sid or source)], []
    except SeriesError as exc:
        return [], [InputError(source, 0, str(exc))]


def read_series_file(path: str) -> Tuple[List[EventSeries], List[InputError]]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    first = next((ln for ln in lines if ln.strip()), "")
    if _is_jsonl(path, first):
        return read_jsonl(lines, path)
    stem = os.path.splitext(os.path.basename(path))[0]
    return read_plain(lines, path, stem)


def series_to_json(series: EventSeries) -> str:
    return json.dumps({"id": series.id, "timestamps": series.timestamps.tolist(),
                       "a": series.a, "b": series.b})


def write_jsonl(path: str, records: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec + "\n")


def format_value(v) -> str:
    """Locale-free CSV cell: floats at 10 significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".10g")
    if hasattr(v, "value"):  # enums
        return str(v.value)
    return str(v)


class CsvSink:
    """Serialized CSV writer with a fixed header."""

    def __init__(self, stream: TextIO, header: Sequence[str]):
        self.header = list(header)
        self._w = csv.writer(stream, lineterminator="\n")
        self._w.writerow(self.header)

    def write(self, row: Sequence) -> None:
        if len(row) != len(self.header):
            raise ValueError(f"row has {len(row)} cells, header has {len(self.header)}")
        self._w.writerow([format_value(v) for v in row])


def read_csv(path: str) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
