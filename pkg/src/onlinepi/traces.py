"""Trace files: one step record per line, with a config echo up top.

The format is plain CSV preceded by ``# key = value`` comment lines carrying
the run's configuration (and the experiment manifest hash when run through
the CLI).  Floats are written with ``repr`` so reading a trace back recovers
the exact values and identical runs produce identical bytes.
"""

from __future__ import annotations

from typing import Dict, List, Sequence, Tuple

from .engine import StepRecord

__all__ = ["TRACE_COLUMNS", "write_trace", "read_trace", "format_trace", "parse_trace"]

TRACE_COLUMNS = (
    "step",
    "proportion",
    "lower",
    "upper",
    "raw_lower",
    "raw_upper",
    "y",
    "winkler",
    "reward",
    "crossed",
    "epsilon",
    "warmup",
)

_MAGIC = "# onlinepi trace v1"


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def format_trace(records: Sequence[StepRecord], echo: Dict[str, str] | None = None) -> str:
    lines = [_MAGIC]
    for key in sorted(echo or {}):
        lines.append(f"# {key} = {echo[key]}")
    lines.append(",".join(TRACE_COLUMNS))
    for r in records:
        lines.append(",".join(_fmt(getattr(r, col)) for col in TRACE_COLUMNS))
    return "\n".join(lines) + "\n"


def write_trace(path, records: Sequence[StepRecord], echo: Dict[str, str] | None = None) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(format_trace(records, echo))


def parse_trace(text: str) -> Tuple[List[StepRecord], Dict[str, str]]:
    echo: Dict[str, str] = {}
    records: List[StepRecord] = []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if "=" in body:
                key, _, value = body.partition("=")
                echo[key.strip()] = value.strip()
            continue
        if not header_seen:
            if tuple(line.split(",")) != TRACE_COLUMNS:
                raise ValueError(f"line {lineno}: unexpected trace header {line!r}")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != len(TRACE_COLUMNS):
            raise ValueError(f"line {lineno}: expected {len(TRACE_COLUMNS)} fields, got {len(parts)}")
        records.append(
            StepRecord(
                step=int(parts[0]),
                proportion=float(parts[1]),
                lower=float(parts[2]),
                upper=float(parts[3]),
                raw_lower=float(parts[4]),
                raw_upper=float(parts[5]),
                y=float(parts[6]),
                winkler=float(parts[7]),
                reward=float(parts[8]),
                crossed=parts[9] == "1",
                epsilon=float(parts[10]),
                warmup=parts[11] == "1",
            )
        )
    if not header_seen:
        raise ValueError("not a trace file (missing column header)")
    return records, echo


def read_trace(path) -> Tuple[List[StepRecord], Dict[str, str]]:
    with open(path) as fh:
        return parse_trace(fh.read())
