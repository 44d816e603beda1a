import json

import pytest

from conftest import small_config
from xaistab.data import ScenarioSpec, Task, load_schema
from xaistab.experiment import (ExperimentConfig, ExperimentError, ShapSettings, compare_files, load_config,
                                run_experiment, save_config, schema_domains)
from xaistab.report import to_json_text
from xaistab.shapley import Exact, Sampled

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    return small_config(), out, run_experiment(small_config(), out, jobs=1)


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = small_config()
        save_config(cfg, tmp_path / "c.json")
        assert load_config(tmp_path / "c.json") == cfg

    def test_relative_paths_follow_config(self, tmp_path):
        (tmp_path / "sub").mkdir()
        (tmp_path / "sub" / "c.json").write_text(json.dumps({"dataset": "d.csv", "schema": "s.json"}))
        cfg = load_config(tmp_path / "sub" / "c.json")
        assert cfg.synth is None and cfg.dataset == str(tmp_path / "sub" / "d.csv")

    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig.from_json({"bogus": 1})
        with pytest.raises(ValueError):
            small_config(scenarios=())
        with pytest.raises(ValueError):
            ShapSettings("kernel")

    def test_auto_method(self):
        s = ShapSettings(background_size=10, exact_budget=1e6)
        assert isinstance(s.choose(10, 8, 0), Exact)
        assert isinstance(s.choose(10, 23, 0), Sampled)
        assert isinstance(s.choose(1000, 12, 0), Sampled)


class TestRun:
    def test_layout(self, small_run):
        cfg, out, manifest = small_run
        assert manifest["complete"] and not manifest["errors"]
        paths = {f["path"] for f in manifest["files"]}
        for spec in cfg.scenarios:
            for name in ("model.json", "metrics.json", "fi.json", "shap.json", "test_matrix.csv",
                         "selection.json", "beeswarm.svg", "fi_bar.svg"):
                assert f"{spec.slug}/{name}" in paths
        for kind in ("within", "scenario", "task"):
            for fmt in ("md", "csv", "json"):
                assert f"report_{kind}.{fmt}" in paths
        assert {"config.json", "data.csv", "schema.json", "performance.md"} <= paths

    def test_parallel_matches_serial(self, small_run, tmp_path):
        cfg, out, manifest = small_run
        assert run_experiment(cfg, tmp_path, jobs=2) == manifest

    def test_reports_match_compare(self, small_run):
        cfg, out, _ = small_run
        files = [out / s.slug / n for s in cfg.scenarios for n in ("fi.json", "shap.json")]
        recs = compare_files(files, "task", schema_domains(load_schema(out / "schema.json")))
        assert to_json_text(recs, "task") == (out / "report_task.json").read_text()
        assert [r.task for r in recs] == ["NC vs AD", "NC vs AD"]

    def test_stage_error_names_scenario_and_stage(self, tmp_path):
        cfg = small_config(scenarios=(ScenarioSpec(Task.PROGNOSIS, ("NC", "AD"), 4.0),), k_folds=1000)
        with pytest.raises(ExperimentError, match=r"prognosis NC vs AD, stage folds"):
            run_experiment(cfg, tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["complete"] is False
        assert "stage folds" in manifest["errors"][0]
