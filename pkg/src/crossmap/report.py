"""Experiment report tables: typed rows, CSV and markdown rendering.

Two report kinds exist.  ``exp1`` rows compare test mNNO(X, f(X)) against
mNNO(Y, f(X)) for one direction/model/loss; ``exp2`` rows hold the mean
Spearman correlation of one embedding variant (raw, lin, nn) on one
benchmark and similarity measure.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, ValidationError

SCHEMAS = {
    "exp1": (
        ("dataset", str),
        ("direction", str),
        ("model", str),
        ("loss", str),
        ("measure", str),
        ("k", int),
        ("mnno_x_fx", float),
        ("mnno_y_fx", float),
        ("mnno_x_y", float),
        ("p_value", float),
        ("p_adjusted", float),
        ("significant", bool),
        ("comparison", str),
        ("n_folds", int),
        ("learning_rate", float),
        ("hidden_units", int),
        ("margin", float),
        ("dropout", float),
        ("epochs", int),
        ("status", str),
    ),
    "exp2": (
        ("embedding", str),
        ("benchmark", str),
        ("measure", str),
        ("variant", str),
        ("spearman", float),
        ("spearman_std", float),
        ("coverage", float),
        ("runs", int),
        ("p_value", float),
        ("p_adjusted", float),
        ("significant", bool),
    ),
}


def _fmt(value, typ) -> str:
    if value is None:
        return ""
    if typ is bool:
        return "true" if value else "false"
    if typ is float:
        return repr(float(value))
    return str(value)


def _parse(text: str, typ):
    if text == "":
        return None
    if typ is bool:
        if text not in ("true", "false"):
            raise ValueError(f"not a boolean: {text!r}")
        return text == "true"
    return typ(text)


@dataclass
class ExperimentReport:
    kind: str
    rows: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in SCHEMAS:
            raise ValidationError(f"unknown report kind {self.kind!r}")
        self.rows = [self._normalize(r) for r in self.rows]

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(name for name, _ in SCHEMAS[self.kind])

    def _normalize(self, row: dict) -> dict:
        extra = set(row) - set(self.columns)
        if extra:
            raise ValidationError(f"unknown report columns {sorted(extra)}")
        out = {}
        for name, typ in SCHEMAS[self.kind]:
            v = row.get(name)
            if v is not None:
                v = bool(v) if typ is bool else typ(v)
                if typ is float and not math.isfinite(v):
                    v = None
                if typ is str and ("\x00" in v or "\r" in v):
                    raise ValidationError(f"column {name!r} contains a NUL or carriage return character")
            out[name] = v
        return out

    def __len__(self) -> int:
        return len(self.rows)


def to_csv(report: ExperimentReport) -> str:
    if not report.rows:
        raise ValidationError("report is empty")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report.columns)
    for row in report.rows:
        w.writerow([_fmt(row[name], typ) for name, typ in SCHEMAS[report.kind]])
    return buf.getvalue()


def parse_csv(text: str, kind: str | None = None) -> ExperimentReport:
    """Inverse of :func:`to_csv`.  The kind is inferred from the header if not given."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = tuple(next(reader))
    except StopIteration:
        raise ParseError("empty report") from None
    if kind is None:
        matches = [k for k, s in SCHEMAS.items() if tuple(n for n, _ in s) == header]
        if not matches:
            raise ParseError("header does not match any report schema")
        kind = matches[0]
    schema = SCHEMAS[kind]
    if header != tuple(n for n, _ in schema):
        raise ParseError(f"header does not match the {kind} schema")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != len(schema):
            raise ParseError(f"expected {len(schema)} fields, got {len(rec)}", line=lineno)
        try:
            rows.append({name: _parse(v, typ) for (name, typ), v in zip(schema, rec)})
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
    return ExperimentReport(kind, rows)


def _num(v, digits=3) -> str:
    return "" if v is None else f"{v:.{digits}f}"


def to_markdown(report: ExperimentReport) -> str:
    """Markdown table.

    exp1: the larger of the two mapped-overlap columns is bold and a
    significant difference is starred.  exp2: the best variant of each
    (embedding, benchmark, measure) group is bold.
    """
    if not report.rows:
        raise ValidationError("report is empty")
    lines = []
    if report.kind == "exp1":
        head = ["dataset", "direction", "model", "loss", "measure", "K", "X,f(X)", "Y,f(X)", "X,Y", "p (adj.)", "status"]
        lines.append("| " + " | ".join(head) + " |")
        lines.append("|" + "---|" * len(head))
        for r in report.rows:
            a, b = _num(r["mnno_x_fx"]), _num(r["mnno_y_fx"])
            star = "*" if r["significant"] else ""
            if r["mnno_x_fx"] is not None and r["mnno_y_fx"] is not None:
                if r["mnno_x_fx"] > r["mnno_y_fx"]:
                    a = f"**{a}**{star}"
                elif r["mnno_y_fx"] > r["mnno_x_fx"]:
                    b = f"**{b}**{star}"
            p = "" if r["p_adjusted"] is None else f"{r['p_adjusted']:.3g}"
            cells = [r["dataset"], r["direction"], r["model"], r["loss"], r["measure"], str(r["k"]), a, b,
                     _num(r["mnno_x_y"]), p, r["status"]]
            lines.append("| " + " | ".join(cells) + " |")
    else:
        best: dict = {}
        for r in report.rows:
            g = (r["embedding"], r["benchmark"], r["measure"])
            if r["spearman"] is not None and (g not in best or r["spearman"] > best[g]):
                best[g] = r["spearman"]
        head = ["embedding", "benchmark", "measure", "variant", "Spearman", "coverage", "p (adj.)"]
        lines.append("| " + " | ".join(head) + " |")
        lines.append("|" + "---|" * len(head))
        for r in report.rows:
            s = _num(r["spearman"])
            if r["spearman"] is not None and r["spearman"] == best[(r["embedding"], r["benchmark"], r["measure"])]:
                s = f"**{s}**"
            if r["significant"]:
                s += "*"
            p = "" if r["p_adjusted"] is None else f"{r['p_adjusted']:.3g}"
            cells = [r["embedding"], r["benchmark"], r["measure"], r["variant"], s, _num(r["coverage"]), p]
            lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def render_report(report: ExperimentReport, path, format: str = "csv") -> Path:
    """Write ``report`` to ``path`` as csv or markdown."""
    if format == "csv":
        text = to_csv(report)
    elif format == "markdown":
        text = to_markdown(report)
    else:
        raise ValidationError(f"unknown report format {format!r}")
    path = Path(path)
    path.write_bytes(text.encode("utf-8"))
    return path


def read_report(path) -> ExperimentReport:
    return parse_csv(Path(path).read_text(encoding="utf-8"))
