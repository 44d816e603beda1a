"""Emit and parse stability and performance tables (Markdown, CSV, JSON).

Markdown rounds to 4 decimals for readers; CSV and JSON keep full precision.
Absent (not applicable) metrics render as "-", undefined ones as "n/a".
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import fields
from typing import Sequence

from .models import EvalMetrics
from .stability import DOMAIN_SLOTS, METRIC_FIELDS, ContributionVector, StabilityRecord

FORMATS = ("md", "csv", "json")
KINDS = ("within", "scenario", "task")

ABSENT = "-"
UNDEFINED = "n/a"


class ReportParseError(ValueError):
    pass


def _num(v) -> str:
    if v is None:
        return ABSENT
    return repr(round(float(v), 4))


def _cell(rec: StabilityRecord, name: str) -> str:
    if name in rec.undefined:
        return UNDEFINED
    return _num(getattr(rec, name))


def _contrib_text(c: ContributionVector | None) -> str:
    if c is None:
        return ABSENT
    return "(" + ", ".join(_num(v) for v in c.as_tuple()) + ")"


def _md_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- markdown layouts

WITHIN_HEADER = ("Classifier", "Task", "ρ", "Robust ρ", "J@10", "τ", "Precision", "Recall")
WITHIN_FIELDS = ("rho", "robust_rho", "j10", "tau", "precision10", "recall10")

SCENARIO_HEADER = ("Task", "Pairwise Comparison", "ρ", "J@10", "J@20", "τ", "Sign")
SCENARIO_FIELDS = ("rho", "j10", "j20", "tau", "sign_consistency")

TASK_HEADER = ("Scenario", "ρ", "τ", "J@10", "J@20", "Sign", "Contribution Diagnosis",
               "Contribution Prognosis", "Mean Δ SHAP")
TASK_PAIRED = ("rho", "tau", "j10", "j20")

PAIR_ARROW = " ↔ "


def _pair_task_records(records: Sequence[StabilityRecord]):
    """Group task records into (FI-FI, SHAP-SHAP) pairs keyed by scenario, in first-seen order."""
    order, groups = [], {}
    for r in records:
        if r.task not in groups:
            order.append(r.task)
            groups[r.task] = {}
        groups[r.task][r.basis] = r
    return [(s, groups[s].get("FI-FI"), groups[s].get("SHAP-SHAP")) for s in order]


def to_markdown(records: Sequence[StabilityRecord], kind: str) -> str:
    if kind == "within":
        rows = [[r.left, (r.task or "").capitalize()] + [_cell(r, f) for f in WITHIN_FIELDS] for r in records]
        return _md_table(WITHIN_HEADER, rows)
    if kind == "scenario":
        rows = [[(r.task or "").capitalize(), r.left + PAIR_ARROW + r.right] + [_cell(r, f) for f in SCENARIO_FIELDS]
                for r in records]
        return _md_table(SCENARIO_HEADER, rows)
    if kind == "task":
        rows = []
        for scenario, fi, sh in _pair_task_records(records):
            row = [scenario or ""]
            for f in TASK_PAIRED:
                left = ABSENT if fi is None else _cell(fi, f)
                right = ABSENT if sh is None else _cell(sh, f)
                row.append(f"{left} / {right}")
            if sh is None:
                row += [ABSENT] * 4
            else:
                row += [_cell(sh, "sign_consistency"),
                        UNDEFINED if "contrib_diag" in sh.undefined else _contrib_text(sh.contrib_diag),
                        UNDEFINED if "contrib_prog" in sh.undefined else _contrib_text(sh.contrib_prog),
                        _cell(sh, "mean_delta_abs_shap")]
            rows.append(row)
        return _md_table(TASK_HEADER, rows)
    raise ValueError(f"unknown report kind {kind!r}")


def _split_md_row(line: str) -> list[str]:
    line = line.strip()
    if not (line.startswith("|") and line.endswith("|")):
        raise ValueError("table rows start and end with '|'")
    return [c.strip() for c in line[1:-1].split("|")]


def _parse_num(text: str, name: str, undefined: list):
    if text == ABSENT:
        return None
    if text == UNDEFINED:
        undefined.append(name)
        return None
    return float(text)


def _parse_contrib(text: str, name: str, undefined: list):
    if text == ABSENT:
        return None
    if text == UNDEFINED:
        undefined.append(name)
        return None
    if not (text.startswith("(") and text.endswith(")")):
        raise ValueError(f"contribution vector {text!r} must be parenthesised")
    return ContributionVector.from_sequence(float(v) for v in text[1:-1].split(","))


def from_markdown(text: str, kind: str) -> list[StabilityRecord]:
    header = {"within": WITHIN_HEADER, "scenario": SCENARIO_HEADER, "task": TASK_HEADER}.get(kind)
    if header is None:
        raise ValueError(f"unknown report kind {kind!r}")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2 or tuple(_split_md_row(lines[0])) != header:
        raise ReportParseError(f"line 1: expected header {' | '.join(header)}")
    out = []
    for lineno, line in enumerate(lines[2:], start=3):
        try:
            cells = _split_md_row(line)
            if len(cells) != len(header):
                raise ValueError(f"expected {len(header)} cells, got {len(cells)}")
            out.extend(_md_row(kind, cells))
        except ValueError as exc:
            raise ReportParseError(f"line {lineno}: {exc}") from None
    return out


def _md_row(kind, cells):
    if kind == "within":
        und: list[str] = []
        vals = {f: _parse_num(c, f, und) for f, c in zip(WITHIN_FIELDS, cells[2:])}
        return [StabilityRecord("within", "FI-SHAP", cells[0], cells[0], cells[1].lower() or None,
                                undefined=tuple(und), **vals)]
    if kind == "scenario":
        if PAIR_ARROW not in cells[1]:
            raise ValueError(f"pairwise comparison {cells[1]!r} lacks '{PAIR_ARROW.strip()}'")
        left, right = cells[1].split(PAIR_ARROW, 1)
        und = []
        vals = {f: _parse_num(c, f, und) for f, c in zip(SCENARIO_FIELDS, cells[2:])}
        return [StabilityRecord("scenario", "SHAP-SHAP", left, right, cells[0].lower() or None,
                                undefined=tuple(und), **vals)]
    scenario = cells[0] or None
    fi_und, sh_und = [], []
    fi_vals, sh_vals = {}, {}
    for f, c in zip(TASK_PAIRED, cells[1:5]):
        parts = [p.strip() for p in c.split(" / ")]
        if len(parts) != 2:
            raise ValueError(f"paired cell {c!r} must read 'FI / SHAP'")
        fi_vals[f] = _parse_num(parts[0], f, fi_und)
        sh_vals[f] = _parse_num(parts[1], f, sh_und)
    sh_vals["sign_consistency"] = _parse_num(cells[5], "sign_consistency", sh_und)
    sh_vals["contrib_diag"] = _parse_contrib(cells[6], "contrib_diag", sh_und)
    sh_vals["contrib_prog"] = _parse_contrib(cells[7], "contrib_prog", sh_und)
    sh_vals["mean_delta_abs_shap"] = _parse_num(cells[8], "mean_delta_abs_shap", sh_und)
    return [
        StabilityRecord("task", "FI-FI", "diagnosis", "prognosis", scenario, undefined=tuple(fi_und), **fi_vals),
        StabilityRecord("task", "SHAP-SHAP", "diagnosis", "prognosis", scenario, undefined=tuple(sh_und), **sh_vals),
    ]


# ---------------------------------------------------------------- machine formats

ID_COLUMNS = ("kind", "basis", "task", "left", "right")
CONTRIB_COLUMNS = tuple(f"contrib_{side}_{slot}" for side in ("diag", "prog") for slot in DOMAIN_SLOTS)
CSV_COLUMNS = ID_COLUMNS + METRIC_FIELDS + CONTRIB_COLUMNS + ("n_shared_features", "undefined", "notes")


def record_to_json(r: StabilityRecord) -> dict:
    out = {"kind": r.kind, "basis": r.basis, "left": r.left, "right": r.right}
    if r.task is not None:
        out["task"] = r.task
    for f in METRIC_FIELDS:
        v = getattr(r, f)
        if v is not None:
            out[f] = v
    for f in ("contrib_diag", "contrib_prog"):
        c = getattr(r, f)
        if c is not None:
            out[f] = list(c.as_tuple())
    if r.n_shared_features is not None:
        out["n_shared_features"] = r.n_shared_features
    if r.undefined:
        out["undefined"] = list(r.undefined)
    if r.notes:
        out["notes"] = list(r.notes)
    return out


def record_from_json(obj: dict) -> StabilityRecord:
    for key in ("kind", "basis", "left", "right"):
        if key not in obj:
            raise ReportParseError(f"record is missing field {key!r}")
    known = set(ID_COLUMNS) | set(METRIC_FIELDS) | {"contrib_diag", "contrib_prog", "n_shared_features",
                                                     "undefined", "notes"}
    extra = sorted(set(obj) - known)
    if extra:
        raise ReportParseError(f"unknown record fields {extra}")
    kw = {f: obj.get(f) for f in METRIC_FIELDS}
    for f in ("contrib_diag", "contrib_prog"):
        if obj.get(f) is not None:
            kw[f] = ContributionVector.from_sequence(obj[f])
    return StabilityRecord(obj["kind"], obj["basis"], obj["left"], obj["right"], obj.get("task"),
                           n_shared_features=obj.get("n_shared_features"),
                           undefined=tuple(obj.get("undefined", ())), notes=tuple(obj.get("notes", ())), **kw)


def to_json_text(records: Sequence[StabilityRecord], kind: str) -> str:
    return json.dumps({"kind": kind, "records": [record_to_json(r) for r in records]},
                      indent=1, ensure_ascii=False) + "\n"


def from_json_text(text: str) -> list[StabilityRecord]:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ReportParseError(f"line {exc.lineno}: {exc.msg}") from None
    out = []
    for i, r in enumerate(obj.get("records", [])):
        try:
            out.append(record_from_json(r))
        except (ValueError, TypeError) as exc:
            raise ReportParseError(f"record {i}: {exc}") from None
    return out


def _csv_value(v) -> str:
    return "" if v is None else repr(float(v))


def to_csv(records: Sequence[StabilityRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        row = [r.kind, r.basis, r.task or "", r.left, r.right]
        row += [_csv_value(getattr(r, f)) for f in METRIC_FIELDS]
        for f in ("contrib_diag", "contrib_prog"):
            c = getattr(r, f)
            if c is None:
                row += [""] * 5
            else:
                vals = list(c.as_tuple()) + ([None] if c.other is None else [])
                row += [_csv_value(v) for v in vals]
        row.append("" if r.n_shared_features is None else str(r.n_shared_features))
        row.append(";".join(r.undefined))
        row.append(";".join(r.notes))
        w.writerow(row)
    return buf.getvalue()


def from_csv(text: str) -> list[StabilityRecord]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise ReportParseError("line 1: unexpected CSV header")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(CSV_COLUMNS):
            raise ReportParseError(f"line {lineno}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
        d = dict(zip(CSV_COLUMNS, row))
        try:
            kw = {f: float(d[f]) if d[f] else None for f in METRIC_FIELDS}
            for side in ("diag", "prog"):
                vals = [d[f"contrib_{side}_{s}"] for s in DOMAIN_SLOTS]
                if any(vals):
                    nums = [float(v) for v in vals if v]
                    kw[f"contrib_{side}"] = ContributionVector.from_sequence(nums)
            out.append(StabilityRecord(
                d["kind"], d["basis"], d["left"], d["right"], d["task"] or None,
                n_shared_features=int(d["n_shared_features"]) if d["n_shared_features"] else None,
                undefined=tuple(d["undefined"].split(";")) if d["undefined"] else (),
                notes=tuple(d["notes"].split(";")) if d["notes"] else (), **kw))
        except ValueError as exc:
            raise ReportParseError(f"line {lineno}: {exc}") from None
    return out


def emit(records: Sequence[StabilityRecord], kind: str, fmt: str) -> str:
    if fmt == "md":
        return to_markdown(records, kind)
    if fmt == "csv":
        return to_csv(records)
    if fmt == "json":
        return to_json_text(records, kind)
    raise ValueError(f"unknown format {fmt!r}")


def parse(text: str, kind: str, fmt: str) -> list[StabilityRecord]:
    if fmt == "md":
        return from_markdown(text, kind)
    if fmt == "csv":
        return from_csv(text)
    if fmt == "json":
        return from_json_text(text)
    raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------- performance

PERF_HEADER = ("Scenario", "Task", "Model", "Accuracy", "AUC", "Recall", "Precision", "F1", "Kappa")


def performance_markdown(rows: Sequence[tuple[str, str, str, EvalMetrics]]) -> str:
    """Test-set metrics per scenario; recall/precision/F1 are macro averages."""
    body = [[name, task.capitalize(), model, _num(m.accuracy), _num(m.auc), _num(m.macro_recall),
             _num(m.macro_precision), _num(m.macro_f1), _num(m.kappa)] for name, task, model, m in rows]
    return _md_table(PERF_HEADER, body)


def performance_json(rows: Sequence[tuple[str, str, str, EvalMetrics]]) -> str:
    return json.dumps([{"scenario": n, "task": t, "model": mo, "metrics": m.to_json()} for n, t, mo, m in rows],
                      indent=1) + "\n"
