"""Line-oriented key=value reports.

A report is a header line followed by one line per record. Numbers are
written with 12 significant digits; exact rationals additionally keep their
``num/den`` form under a ``*_exact`` key so nothing is lost. The header
carries the tool version and a digest of the resolved configuration, plus a
timestamp unless the run is deterministic.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
from fractions import Fraction

from . import __version__


def fmt_number(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".12g")


def fmt_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, (bool, int, float, Fraction)):
        return fmt_number(v)
    if isinstance(v, (list, tuple)):
        return ",".join(fmt_value(x) for x in v)
    s = str(v)
    if any(c.isspace() for c in s) or "=" in s:
        raise ValueError(f"report value {s!r} contains whitespace or '='")
    return s or '""'


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else v.numerator
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


def config_digest(config: dict) -> str:
    blob = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def header(config: dict, deterministic: bool = True, now: _dt.datetime | None = None) -> str:
    parts = [f"# uind version={__version__} config_digest={config_digest(config)}"]
    if not deterministic:
        now = now or _dt.datetime.now(_dt.timezone.utc)
        parts.append(f"timestamp={now.strftime('%Y-%m-%dT%H:%M:%SZ')}")
    return " ".join(parts)


def format_record(rec: dict) -> str:
    fields = []
    for key, v in rec.items():
        fields.append(f"{key}={fmt_value(v)}")
        if isinstance(v, Fraction) and v.denominator != 1:
            fields.append(f"{key}_exact={v.numerator}/{v.denominator}")
    return " ".join(fields)


def emit_report(records, config: dict, deterministic: bool = True, fmt: str = "text") -> str:
    """Render ``records`` (a list of dicts) as text or JSON lines."""
    if fmt == "json":
        head = {"record": "header", "version": __version__, "config_digest": config_digest(config),
                "config": _jsonable(config)}
        if not deterministic:
            head["timestamp"] = _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        lines = [json.dumps(head, sort_keys=True)]
        lines += [json.dumps(_jsonable(rec)) for rec in records]
    elif fmt == "text":
        lines = [header(config, deterministic)]
        lines += [format_record(rec) for rec in records]
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return "\n".join(lines) + "\n"


def report_body(text: str) -> str:
    """Report text without its header line."""
    return text.split("\n", 1)[1] if "\n" in text else ""
