"""End-to-end experiment: eight scenario models, their explanations and the stability tables."""
from __future__ import annotations

import hashlib
import json
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import report
from .data import (Dataset, DomainTag, Schema, ScenarioSpec, Task, load_dataset, load_schema, select_scenario,
                   write_dataset)
from .models import (CandidateSpec, EvalMetrics, default_candidates, derive_seed, permutation_importance,
                     save_model, select_best_model)
from .plots import PlotSpec, beeswarm_svg, fi_bar_svg, write_svg
from .preprocess import (PreprocessConfig, apply_preprocessor, fit_preprocessor, kfold_subjects, subject_split,
                         write_feature_matrix)
from .shapley import (MAX_EXACT_FEATURES, Exact, ImportanceVector, Sampled, background_sample,
                      explain_targets, read_attributions, read_importance, summarize, write_attributions,
                      write_importance)
from .stability import (StabilityRecord, cross_scenario_analysis, cross_task_analysis, resolve_domains,
                        within_model_analysis)
from .synth import SynthConfig, generate_synthetic


class ExperimentError(RuntimeError):
    pass


def default_scenarios(horizon_years: float = 4.0) -> list[ScenarioSpec]:
    groups = [("NC", "AD"), ("NC", "MCI"), ("MCI", "AD"), ("NC", "MCI", "AD")]
    out = [ScenarioSpec(Task.DIAGNOSIS, g) for g in groups]
    out += [ScenarioSpec(Task.PROGNOSIS, g, horizon_years) for g in groups]
    return out


@dataclass(frozen=True)
class ShapSettings:
    method: str = "auto"  # "auto" | "exact" | "sampled"
    n_permutations: int = 200
    background_size: int = 100
    correct: bool = True
    exact_budget: float = 2e8  # max model evaluations for the exact engine under "auto"

    def __post_init__(self):
        if self.method not in ("auto", "exact", "sampled"):
            raise ValueError(f"unknown SHAP method {self.method!r}")
        if self.n_permutations < 2 or self.background_size < 1:
            raise ValueError("n_permutations must be >= 2 and background_size >= 1")

    def choose(self, n_rows: int, n_features: int, seed: int):
        if self.method == "exact":
            return Exact()
        if self.method == "auto" and n_features <= MAX_EXACT_FEATURES:
            if n_rows * self.background_size * (1 << n_features) <= self.exact_budget:
                return Exact()
        return Sampled(self.n_permutations, seed, self.correct)


@dataclass(frozen=True)
class ExperimentConfig:
    synth: SynthConfig | None = field(default_factory=SynthConfig)
    dataset: str | None = None
    schema: str | None = None
    scenarios: tuple[ScenarioSpec, ...] = field(default_factory=lambda: tuple(default_scenarios()))
    preprocess: PreprocessConfig = PreprocessConfig()
    candidates: tuple[CandidateSpec, ...] = field(default_factory=lambda: tuple(default_candidates()))
    k_folds: int = 10
    test_fraction: float = 0.2
    smote_k: int = 5
    fi_repeats: int = 5
    shap: ShapSettings = ShapSettings()
    plot: PlotSpec = PlotSpec()
    out_dir: str = "run"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if (self.synth is None) == (self.dataset is None):
            raise ValueError("configure exactly one data source: synth or dataset+schema")
        if self.dataset is not None and self.schema is None:
            raise ValueError("dataset needs a schema path")
        if not self.scenarios:
            raise ValueError("no scenarios configured")
        slugs = [s.slug for s in self.scenarios]
        if len(set(slugs)) != len(slugs):
            raise ValueError("duplicate scenarios")

    def to_json(self) -> dict:
        return {
            "synth": None if self.synth is None else self.synth.to_json(),
            "dataset": self.dataset,
            "schema": self.schema,
            "scenarios": [s.to_json() for s in self.scenarios],
            "preprocess": {"missing_threshold": self.preprocess.missing_threshold,
                           "cardinality_threshold": self.preprocess.cardinality_threshold},
            "candidates": [c.to_json() for c in self.candidates],
            "k_folds": self.k_folds,
            "test_fraction": self.test_fraction,
            "smote_k": self.smote_k,
            "fi_repeats": self.fi_repeats,
            "shap": {"method": self.shap.method, "n_permutations": self.shap.n_permutations,
                     "background_size": self.shap.background_size, "correct": self.shap.correct,
                     "exact_budget": self.shap.exact_budget},
            "plot": self.plot.to_json(),
            "out_dir": self.out_dir,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        known = {"synth", "dataset", "schema", "scenarios", "preprocess", "candidates", "k_folds",
                 "test_fraction", "smote_k", "fi_repeats", "shap", "plot", "out_dir", "seed"}
        extra = sorted(set(obj) - known)
        if extra:
            raise ValueError(f"unknown config fields {extra}")
        kw = {k: obj[k] for k in ("dataset", "schema", "k_folds", "test_fraction", "smote_k", "fi_repeats",
                                  "out_dir", "seed") if k in obj}
        if "synth" in obj:
            kw["synth"] = None if obj["synth"] is None else SynthConfig.from_json(obj["synth"])
        elif "dataset" in obj:
            kw["synth"] = None
        if "scenarios" in obj:
            kw["scenarios"] = tuple(ScenarioSpec.from_json(s) for s in obj["scenarios"])
        if "preprocess" in obj:
            kw["preprocess"] = PreprocessConfig(**obj["preprocess"])
        if "candidates" in obj:
            kw["candidates"] = tuple(CandidateSpec(**c) for c in obj["candidates"])
        if "shap" in obj:
            kw["shap"] = ShapSettings(**obj["shap"])
        if "plot" in obj:
            kw["plot"] = PlotSpec.from_json(obj["plot"])
        return cls(**kw)


def load_config(path) -> ExperimentConfig:
    """Read a JSON config; relative dataset/schema paths resolve against the config's directory."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    for key in ("dataset", "schema"):
        if obj.get(key) and not os.path.isabs(obj[key]):
            obj[key] = str(path.parent / obj[key])
    try:
        return ExperimentConfig.from_json(obj)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from None


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_json(), fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------- per-scenario pipeline

def scenario_seed(master: int, spec: ScenarioSpec, stage: int) -> int:
    return derive_seed(master, zlib.crc32(spec.slug.encode()), stage)


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _stage(spec: ScenarioSpec, stage: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except Exception as exc:  # noqa: BLE001 - rewrapped with context
        raise ExperimentError(f"scenario {spec.task.value} {spec.name}, stage {stage}: {exc}") from exc


def run_scenario(cfg: ExperimentConfig, data: Dataset, spec: ScenarioSpec, out_dir) -> dict:
    """Run one scenario and write its artifacts under ``out_dir/<slug>/``."""
    d = Path(out_dir) / spec.slug
    d.mkdir(parents=True, exist_ok=True)
    seed = lambda stage: scenario_seed(cfg.seed, spec, stage)  # noqa: E731

    sd = _stage(spec, "select", select_scenario, data, spec)
    plan = _stage(spec, "split", subject_split, sd, cfg.test_fraction, seed(1))
    train_ds = sd.rows_for_subjects(plan.train_subjects)
    test_ds = sd.rows_for_subjects(plan.test_subjects)
    prep = _stage(spec, "preprocess", fit_preprocessor, train_ds, cfg.preprocess)
    train_m = apply_preprocessor(prep, train_ds)
    test_m = apply_preprocessor(prep, test_ds)
    folds = _stage(spec, "folds", kfold_subjects, plan.train_subjects, cfg.k_folds, seed(2))
    plan = plan.with_folds(folds)
    classes = tuple(int(lbl) for lbl in sorted(spec.labels))
    sel = _stage(spec, "model selection", select_best_model, train_m, cfg.candidates, folds, seed(3),
                 cfg.smote_k, classes, test_m)
    model = sel.winner
    fi = _stage(spec, "feature importance", permutation_importance, model, test_m, cfg.fi_repeats, seed(4))
    meta = {"scenario": spec.name, "task": spec.task.value}
    fi = ImportanceVector(fi.feature_names, fi.scores, "FI", meta=meta)
    bg = background_sample(train_m, cfg.shap.background_size, seed(5))
    method = cfg.shap.choose(test_m.n_rows, len(test_m.feature_names), seed(6))
    mats = _stage(spec, "explain", explain_targets, model, test_m, bg, method)

    save_model(model, d / "model.json")
    _write_json(d / "metrics.json", sel.test_metrics.to_json())
    write_importance(d / "fi.json", fi)
    write_attributions(d / "shap.json", mats, meta)
    write_feature_matrix(test_m, d / "test_matrix.csv")
    _write_json(d / "selection.json", {
        "scenario": spec.to_json(),
        "train_subjects": list(plan.train_subjects),
        "test_subjects": list(plan.test_subjects),
        "folds": [{"train": list(tr), "validation": list(va)} for tr, va in plan.folds],
        "candidates": [c.label for c in sel.candidates],
        "candidate_scores": sel.candidate_scores,
        "winner": sel.candidates[sel.winner_index].label,
        "validation_synthetic_rows": sel.validation_synthetic_rows,
        "test_synthetic_rows": int(test_m.synthetic.sum()),
        "train_rows": train_m.n_rows,
        "test_rows": test_m.n_rows,
        "shap_method": method.describe(),
    })
    title = f"{spec.task.value.capitalize()} {spec.name}"
    write_svg(d / "beeswarm.svg", beeswarm_svg(mats[-1], test_m, cfg.plot, f"{title}: SHAP summary"))
    write_svg(d / "fi_bar.svg", fi_bar_svg(fi, cfg.plot, f"{title}: permutation importance"))
    return {"slug": spec.slug, "winner": sel.candidates[sel.winner_index].label}


# ---------------------------------------------------------------- comparisons over files

@dataclass
class _Entry:
    scenario: str
    task: str
    fi: ImportanceVector | None = None
    shap: ImportanceVector | None = None


def _load_entries(paths: Sequence) -> list[_Entry]:
    """Read FI and attribution files; pair them by (scenario, task) in first-seen order."""
    entries: dict[tuple[str, str], _Entry] = {}
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{p}: line {exc.lineno}: {exc.msg}") from None
        if isinstance(obj, dict) and "source" in obj:
            v = read_importance(p)
            key = (v.meta.get("scenario", str(p)), v.meta.get("task", ""))
            vec, slot = v, "fi" if v.source == "FI" else "shap"
        else:
            mats, meta = read_attributions(p)
            key = (meta.get("scenario", str(p)), meta.get("task", ""))
            vec, slot = summarize(mats), "shap"
        e = entries.setdefault(key, _Entry(*key))
        if getattr(e, slot) is not None:
            raise ValueError(f"{p}: a second {slot} input for {key[1]} {key[0]}")
        setattr(e, slot, vec)
    return list(entries.values())


def compare_entries(entries: Sequence[_Entry], mode: str,
                    column_domains: Mapping[str, object] | None = None) -> list[StabilityRecord]:
    if mode == "within":
        out = []
        for e in entries:
            if e.fi is None or e.shap is None:
                raise ValueError(f"within mode needs both FI and SHAP for {e.task} {e.scenario}")
            out.append(within_model_analysis(e.fi, e.shap, e.scenario, e.task or None))
        return out
    if mode == "scenario":
        out = []
        tasks = list(dict.fromkeys(e.task for e in entries))
        for t in tasks:
            group = [e for e in entries if e.task == t and e.shap is not None]
            for i in range(len(group)):
                for j in range(i + 1, len(group)):
                    out.append(cross_scenario_analysis(group[i].shap, group[j].shap, group[i].scenario,
                                                       group[j].scenario, t or None))
        if not out and len(entries) == 1 and entries[0].shap is not None:
            e = entries[0]
            out.append(cross_scenario_analysis(e.shap, e.shap, e.scenario, e.scenario, e.task or None))
        return out
    if mode == "task":
        out = []
        by = {(e.scenario, e.task): e for e in entries}
        for scen in dict.fromkeys(e.scenario for e in entries):
            dg, pg = by.get((scen, Task.DIAGNOSIS.value)), by.get((scen, Task.PROGNOSIS.value))
            if dg is None or pg is None:
                continue
            if None in (dg.fi, dg.shap, pg.fi, pg.shap):
                raise ValueError(f"task mode needs FI and SHAP for both tasks of {scen}")
            names = list(dict.fromkeys(dg.shap.feature_names + pg.shap.feature_names))
            dmap = resolve_domains(names, column_domains or {})
            out.extend(cross_task_analysis(dg.fi, dg.shap, pg.fi, pg.shap, dmap, scen))
        return out
    raise ValueError(f"unknown comparison mode {mode!r}")


def compare_files(paths: Sequence, mode: str, column_domains: Mapping[str, object] | None = None):
    return compare_entries(_load_entries(paths), mode, column_domains)


def schema_domains(schema: Schema) -> dict[str, DomainTag]:
    return {name: domain for name, (_, domain) in schema.columns.items()}


# ---------------------------------------------------------------- whole experiment

REPORT_KINDS = ("within", "scenario", "task")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Path, complete: bool, errors: Sequence[str] = ()) -> dict:
    files = []
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            rel = p.relative_to(out).as_posix()
            files.append({"path": rel, "sha256": _sha256(p), "bytes": p.stat().st_size})
    manifest = {"complete": complete, "errors": list(errors), "files": files}
    _write_json(out / "manifest.json", manifest)
    return manifest


def _load_data(cfg: ExperimentConfig) -> tuple[Dataset, Schema | None]:
    if cfg.synth is not None:
        return generate_synthetic(cfg.synth), None
    return load_dataset(cfg.dataset, cfg.schema), load_schema(cfg.schema)


def _scenario_worker(args):
    cfg, data, spec, out = args
    return run_scenario(cfg, data, spec, out)


def write_reports(out: Path, records: Mapping[str, Sequence[StabilityRecord]]) -> None:
    for kind, recs in records.items():
        for fmt in report.FORMATS:
            with open(out / f"report_{kind}.{fmt}", "w", encoding="utf-8", newline="\n") as fh:
                fh.write(report.emit(recs, kind, fmt))


def run_experiment(cfg: ExperimentConfig, out_dir=None, jobs: int = 1) -> dict:
    """Run every scenario, then the three stability analyses over the written files.

    Returns the manifest. Output bytes do not depend on ``jobs``.
    """
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.json")
    try:
        data, schema = _load_data(cfg)
    except Exception as exc:  # noqa: BLE001
        write_manifest(out, False, [f"load: {exc}"])
        raise ExperimentError(f"loading data: {exc}") from exc
    if schema is None:
        write_dataset(data, out / "data.csv", out / "schema.json")
        schema = load_schema(out / "schema.json")
    else:
        with open(out / "schema.json", "w", encoding="utf-8") as fh:
            json.dump(schema.to_json(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    work = [(cfg, data, spec, out) for spec in cfg.scenarios]
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_scenario_worker, work))
        else:
            results = [_scenario_worker(w) for w in work]
    except ExperimentError as exc:
        write_manifest(out, False, [str(exc)])
        raise

    shap_files = [out / s.slug / "shap.json" for s in cfg.scenarios]
    fi_files = [out / s.slug / "fi.json" for s in cfg.scenarios]
    entries = _load_entries([p for pair in zip(fi_files, shap_files) for p in pair])
    domains = schema_domains(schema)
    records = {kind: compare_entries(entries, kind, domains) for kind in REPORT_KINDS}
    write_reports(out, records)

    perf = []
    for spec, res in zip(cfg.scenarios, results):
        with open(out / spec.slug / "metrics.json", encoding="utf-8") as fh:
            perf.append((spec.name, spec.task.value, res["winner"], EvalMetrics.from_json(json.load(fh))))
    with open(out / "performance.md", "w", encoding="utf-8") as fh:
        fh.write(report.performance_markdown(perf))
    with open(out / "performance.json", "w", encoding="utf-8") as fh:
        fh.write(report.performance_json(perf))
    return write_manifest(out, True)


def degenerate(records: Mapping[str, Sequence[StabilityRecord]] | Sequence[StabilityRecord]) -> bool:
    recs = [r for rs in records.values() for r in rs] if isinstance(records, Mapping) else list(records)
    return any(r.undefined for r in recs)
