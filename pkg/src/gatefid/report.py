"""Analysis reports and their JSON, CSV and plain-text renderings."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

FORMATS = ("json", "csv", "text")
HINT_TOL = 1e-9
HINT_MAX_DENOMINATOR = 1000


def rational_hint(value: float, tol: float = HINT_TOL, max_den: int = HINT_MAX_DENOMINATOR) -> str | None:
    """``"p/q"`` when ``value`` is within ``tol`` of a fraction with ``q <= max_den``."""
    if value is None or not math.isfinite(value):
        return None
    frac = Fraction(value).limit_denominator(max_den)
    if abs(value - frac.numerator / frac.denominator) > tol:
        return None
    return f"{frac.numerator}/{frac.denominator}"


def _plain(value: Any) -> Any:
    """Convert numpy scalars and containers to JSON-native types."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


@dataclass
class Report:
    """Result of one CLI command.

    ``rows`` is the tabular part (one dict per channel, scale or grid point),
    ``totals`` holds scalar results and ``config`` the resolved configuration
    with every default expanded.
    """

    command: str
    config: dict
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    totals: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> "Report":
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "Report":
        return cls.from_dict(json.loads(text))

    def _column_types(self) -> dict[str, str]:
        types = {}
        for col in self.columns:
            seen = {type(_plain(r.get(col))) for r in self.rows} - {type(None)}
            if seen <= {float, int} and float in seen:
                types[col] = "float"
            elif seen == {int}:
                types[col] = "int"
            elif seen == {bool}:
                types[col] = "bool"
            elif seen <= {str}:
                types[col] = "str"
            else:
                types[col] = "json"
        return types

    def to_csv(self) -> str:
        """Rows as CSV; everything else rides along in one leading ``#`` line of JSON."""
        types = self._column_types()
        meta = {k: v for k, v in self.to_dict().items() if k != "rows"}
        meta["types"] = types
        buf = io.StringIO()
        buf.write("# " + json.dumps(meta, ensure_ascii=False) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            cells = []
            for col in self.columns:
                v = _plain(row.get(col))
                if v is None:
                    cells.append("")
                elif types[col] == "float":
                    cells.append(repr(float(v)))
                elif types[col] == "json":
                    cells.append(json.dumps(v))
                else:
                    cells.append(str(v))
            writer.writerow(cells)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Report":
        first, _, body = text.partition("\n")
        if not first.startswith("# "):
            raise ValueError("CSV report lacks its metadata line")
        meta = json.loads(first[2:])
        types = meta.pop("types")
        reader = csv.reader(io.StringIO(body))
        header = next(reader)
        parse = {
            "float": float,
            "int": int,
            "bool": lambda s: s == "True",
            "str": str,
            "json": json.loads,
        }
        rows = []
        for cells in reader:
            row = {}
            for col, cell in zip(header, cells):
                row[col] = None if cell == "" else parse[types[col]](cell)
            rows.append(row)
        return cls(rows=rows, **meta)

    def to_text(self) -> str:
        out = [f"gatefid {self.command}"]
        gate = self.config.get("gate", {})
        out.append(f"gate: {_describe_gate(gate)}")
        if self.rows:
            out.append("")
            out.extend(_table(self.columns, self.rows))
        if self.totals:
            out.append("")
            width = max(len(k) for k in self.totals)
            for key, value in self.totals.items():
                out.append(f"{key.ljust(width)}  {_fmt(value, hint=key.startswith(('infidelity', 'coefficient')))}")
        for w in self.warnings:
            out.append(f"warning: {w}")
        prov = self.provenance
        if prov:
            out.append("")
            out.append("provenance: " + ", ".join(f"{k}={_fmt(v)}" for k, v in prov.items()))
        return "\n".join(out) + "\n"

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return self.to_json() + "\n"
        if fmt == "csv":
            return self.to_csv()
        if fmt == "text":
            return self.to_text()
        raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")


def _describe_gate(gate: dict) -> str:
    name = gate.get("name", "?")
    if name == "parallel":
        return "parallel(" + ", ".join(_describe_gate(m) for m in gate.get("members", [])) + ")"
    params = gate.get("params", {})
    if not params:
        return name
    return name + " (" + ", ".join(f"{k}={_fmt(v)}" for k, v in params.items()) + ")"


def _fmt(value: Any, hint: bool = False) -> str:
    value = _plain(value)
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, float):
        text = f"{value:.12g}"
        if hint:
            h = rational_hint(value)
            if h is not None:
                text += f"  ≈ {h}"
        return text
    return str(value)


def _table(columns: list[str], rows: list[dict]) -> list[str]:
    cells = [["" if r.get(c) is None else _fmt(r.get(c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in cells:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
    return lines
