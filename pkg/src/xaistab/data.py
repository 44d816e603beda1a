"""Longitudinal tabular cohort: data model, file IO and scenario construction."""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class LoadError(ValueError):
    pass


class ScenarioError(ValueError):
    pass


class ClassLabel(enum.IntEnum):
    """Cognitive stage. Integer order is the progression order."""

    NC = 0
    MCI = 1
    AD = 2

    @classmethod
    def parse(cls, value) -> "ClassLabel":
        if isinstance(value, ClassLabel):
            return value
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown label {value!r}") from None


class DomainTag(str, enum.Enum):
    COGNITIVE = "cognitive"
    FUNCTIONAL = "functional"
    PACKET = "packet"
    LANGUAGE = "language"
    GENETIC = "genetic"
    OTHER = "other"

    @classmethod
    def parse(cls, value) -> "DomainTag":
        if isinstance(value, cls):
            return value
        if value is None or value == "":
            return cls.OTHER
        return cls(str(value).lower())


class ColumnKind(str, enum.Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Column:
    """One feature column.

    Numeric values are a float array with NaN marking Missing; categorical
    values are an object array of str with None marking Missing.
    """

    name: str
    kind: ColumnKind
    values: np.ndarray
    domain: DomainTag = DomainTag.OTHER

    def __post_init__(self):
        if self.kind is ColumnKind.NUMERIC:
            vals = np.asarray(self.values, dtype=np.float64)
            if np.isinf(vals).any():
                raise ValueError(f"column {self.name}: non-finite numeric cell")
        else:
            vals = np.array([None if v is None else str(v) for v in self.values], dtype=object)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def missing(self) -> np.ndarray:
        if self.kind is ColumnKind.NUMERIC:
            return np.isnan(self.values)
        return np.array([v is None for v in self.values], dtype=bool)

    def take(self, idx) -> "Column":
        return Column(self.name, self.kind, self.values[idx], self.domain)


@dataclass(frozen=True)
class Dataset:
    columns: tuple[Column, ...]
    subject_id: np.ndarray
    visit_index: np.ndarray
    visit_age: np.ndarray
    label: np.ndarray  # ClassLabel codes

    def __post_init__(self):
        sid = np.array([str(s) for s in self.subject_id], dtype=object)
        vis = np.asarray(self.visit_index, dtype=np.int64)
        age = np.asarray(self.visit_age, dtype=np.float64)
        lab = np.asarray(self.label, dtype=np.int64)
        n = sid.shape[0]
        for name, arr in (("visit_index", vis), ("visit_age", age), ("label", lab)):
            if arr.shape != (n,):
                raise ValueError(f"{name} has {arr.shape[0]} entries, expected {n}")
        for col in self.columns:
            if col.values.shape[0] != n:
                raise ValueError(f"column {col.name} has {col.values.shape[0]} entries, expected {n}")
        if (vis < 0).any():
            raise ValueError("visit_index must be non-negative")
        if (age < 0).any() or np.isnan(age).any():
            raise ValueError("visit_age must be a real >= 0")
        if not np.isin(lab, [int(c) for c in ClassLabel]).all():
            raise ValueError("label codes outside NC/MCI/AD")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("duplicate column names")
        seen: dict[tuple[str, int], int] = {}
        for i, key in enumerate(zip(sid, vis.tolist())):
            if key in seen:
                raise ValueError(f"duplicate (subject, visit) {key} at rows {seen[key]} and {i}")
            seen[key] = i
        order = np.lexsort((vis, sid))
        s_sorted, a_sorted = sid[order], age[order]
        same = s_sorted[1:] == s_sorted[:-1]
        if (same & (a_sorted[1:] < a_sorted[:-1])).any():
            raise ValueError("visit_age decreases with visit_index within a subject")
        for arr in (sid, vis, age, lab):
            arr.setflags(write=False)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "subject_id", sid)
        object.__setattr__(self, "visit_index", vis)
        object.__setattr__(self, "visit_age", age)
        object.__setattr__(self, "label", lab)

    @property
    def n_rows(self) -> int:
        return self.subject_id.shape[0]

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def subjects(self) -> list[str]:
        """Distinct subject ids in order of first appearance."""
        return list(dict.fromkeys(self.subject_id.tolist()))

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(
            tuple(c.take(idx) for c in self.columns),
            self.subject_id[idx],
            self.visit_index[idx],
            self.visit_age[idx],
            self.label[idx],
        )

    def rows_for_subjects(self, subjects) -> "Dataset":
        keep = np.isin(self.subject_id, np.array(list(subjects), dtype=object))
        return self.take(np.flatnonzero(keep))

    def domain_map(self) -> dict[str, DomainTag]:
        return {c.name: c.domain for c in self.columns}


@dataclass(frozen=True)
class Schema:
    columns: dict[str, tuple[ColumnKind, DomainTag]]
    subject_col: str
    visit_col: str
    age_col: str
    label_col: str

    @classmethod
    def from_json(cls, obj: dict) -> "Schema":
        special = {}
        for key in ("subject_col", "visit_col", "age_col", "label_col"):
            if key not in obj:
                raise LoadError(f"schema is missing key {key!r}")
            special[key] = str(obj[key])
        cols = {}
        for name, spec in obj.items():
            if name in special:
                continue
            if not isinstance(spec, dict):
                raise LoadError(f"schema entry {name!r} must be an object")
            try:
                kind = ColumnKind(str(spec.get("kind", "")).lower())
            except ValueError:
                raise LoadError(f"column {name!r}: bad kind {spec.get('kind')!r}") from None
            try:
                domain = DomainTag.parse(spec.get("domain"))
            except ValueError:
                raise LoadError(f"column {name!r}: bad domain {spec.get('domain')!r}") from None
            cols[name] = (kind, domain)
        return cls(cols, **special)

    def to_json(self) -> dict:
        out: dict = {
            name: {"kind": kind.value, "domain": domain.value}
            for name, (kind, domain) in self.columns.items()
        }
        out.update(
            subject_col=self.subject_col,
            visit_col=self.visit_col,
            age_col=self.age_col,
            label_col=self.label_col,
        )
        return out


def _parse_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        return math.nan
    return v if math.isfinite(v) else math.nan


def load_schema(schema_path) -> Schema:
    with open(schema_path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise LoadError(f"{schema_path}: invalid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise LoadError(f"{schema_path}: schema must be a JSON object")
    return Schema.from_json(obj)


def load_dataset(data_path, schema_path) -> Dataset:
    """Read a comma-delimited cohort file typed by a JSON schema."""
    schema = load_schema(schema_path)
    with open(data_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise LoadError(f"{data_path}: empty file") from None
        rows = list(reader)
    pos = {name: i for i, name in enumerate(header)}
    required = [schema.subject_col, schema.visit_col, schema.age_col, schema.label_col]
    for name in required + list(schema.columns):
        if name not in pos:
            raise LoadError(f"column {name!r} declared in schema but absent from data header")
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise LoadError(f"data row {i}: expected {len(header)} fields, got {len(row)}")

    sid, vis, age, lab = [], [], [], []
    for i, row in enumerate(rows):
        s = row[pos[schema.subject_col]].strip()
        if not s:
            raise LoadError(f"data row {i}: missing subject id")
        try:
            v = int(row[pos[schema.visit_col]])
            a = float(row[pos[schema.age_col]])
            lbl = ClassLabel.parse(row[pos[schema.label_col]])
        except ValueError as exc:
            raise LoadError(f"data row {i}: {exc}") from None
        sid.append(s)
        vis.append(v)
        age.append(a)
        lab.append(int(lbl))
    seen: dict[tuple[str, int], int] = {}
    for i, key in enumerate(zip(sid, vis)):
        if key in seen:
            raise LoadError(
                f"duplicate (subject, visit) {key[0]!r}/{key[1]} at data rows {seen[key]} and {i}"
            )
        seen[key] = i

    columns = []
    for name, (kind, domain) in schema.columns.items():
        raw = [row[pos[name]] for row in rows]
        if kind is ColumnKind.NUMERIC:
            values = np.array([_parse_float(t) if t.strip() else math.nan for t in raw])
        else:
            values = np.array([t if t != "" else None for t in raw], dtype=object)
        columns.append(Column(name, kind, values, domain))
    try:
        return Dataset(tuple(columns), np.array(sid, dtype=object), vis, age, lab)
    except ValueError as exc:
        raise LoadError(str(exc)) from None


def _fmt_num(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_dataset(d: Dataset, data_path, schema_path, *,
                  subject_col="subject_id", visit_col="visit", age_col="age",
                  label_col="label") -> None:
    """Write ``d`` in the loader's file formats (CSV + JSON schema)."""
    schema = Schema(
        {c.name: (c.kind, c.domain) for c in d.columns},
        subject_col, visit_col, age_col, label_col,
    )
    with open(data_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([subject_col, visit_col, age_col, label_col] + d.column_names)
        for i in range(d.n_rows):
            row = [d.subject_id[i], str(d.visit_index[i]), repr(float(d.visit_age[i])),
                   ClassLabel(d.label[i]).name]
            for c in d.columns:
                v = c.values[i]
                row.append(_fmt_num(v) if c.kind is ColumnKind.NUMERIC else ("" if v is None else v))
            w.writerow(row)
    Path(schema_path).write_text(json.dumps(schema.to_json(), indent=2) + "\n", encoding="utf-8")


class Task(str, enum.Enum):
    DIAGNOSIS = "diagnosis"
    PROGNOSIS = "prognosis"


@dataclass(frozen=True)
class ScenarioSpec:
    task: Task
    labels: tuple[ClassLabel, ...]
    horizon_years: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "task", Task(self.task))
        labels = tuple(ClassLabel.parse(v) for v in self.labels)
        if len(labels) not in (2, 3) or len(set(labels)) != len(labels):
            raise ValueError("a scenario needs 2 or 3 distinct labels")
        object.__setattr__(self, "labels", labels)
        if self.task is Task.PROGNOSIS:
            if self.horizon_years is None or not self.horizon_years > 0:
                raise ValueError("prognosis scenarios need horizon_years > 0")
        elif self.horizon_years is not None:
            raise ValueError("horizon_years only applies to prognosis")

    @property
    def is_binary(self) -> bool:
        return len(self.labels) == 2

    @property
    def name(self) -> str:
        return " vs ".join(lbl.name for lbl in self.labels)

    @property
    def slug(self) -> str:
        return f"{self.task.value}_" + "_vs_".join(lbl.name.lower() for lbl in self.labels)

    def to_json(self) -> dict:
        out = {"task": self.task.value, "labels": [lbl.name for lbl in self.labels]}
        if self.horizon_years is not None:
            out["horizon_years"] = self.horizon_years
        return out

    @classmethod
    def from_json(cls, obj) -> "ScenarioSpec":
        return cls(obj["task"], tuple(obj["labels"]), obj.get("horizon_years"))


FOLLOW_UP_WINDOW = 1.0


def select_scenario(d: Dataset, s: ScenarioSpec) -> Dataset:
    """Rows for one classification scenario.

    Diagnosis keeps visit rows whose label is in the scenario. Prognosis keeps
    each subject's baseline row relabelled with the stage at the follow-up
    visit nearest ``baseline age + horizon`` (within one year).
    """
    codes = [int(lbl) for lbl in s.labels]
    if s.task is Task.DIAGNOSIS:
        return d.take(np.flatnonzero(np.isin(d.label, codes)))

    by_subject: dict[str, list[int]] = {}
    for i, sid in enumerate(d.subject_id.tolist()):
        by_subject.setdefault(sid, []).append(i)
    keep, new_labels = [], []
    for rows in by_subject.values():
        if len(rows) < 2:
            continue
        rows = sorted(rows, key=lambda i: d.visit_index[i])
        base = rows[0]
        target = d.visit_age[base] + s.horizon_years
        best, best_gap = None, None
        for i in rows[1:]:
            gap = abs(d.visit_age[i] - target)
            if gap <= FOLLOW_UP_WINDOW and (best_gap is None or gap < best_gap):
                best, best_gap = i, gap
        if best is None or int(d.label[best]) not in codes:
            continue
        keep.append(base)
        new_labels.append(int(d.label[best]))
    if not keep:
        raise ScenarioError(f"prognosis scenario {s.name}: no subject has a qualifying follow-up visit")
    base = d.take(keep)
    return Dataset(base.columns, base.subject_id, base.visit_index, base.visit_age, new_labels)
