import numpy as np
import pytest

from xaistab.preprocess import FeatureMatrix

CRITERIA = {
    1: "Shapley additivity and exact-engine runtime",
    2: "exact vs sampled agreement",
    3: "Shapley axioms (dummy, symmetry, linearity)",
    4: "rank-metric oracle equivalence",
    5: "identity and antisymmetry suite",
    6: "five-slot contribution vectors",
    7: "leakage freedom",
    8: "evaluation-metric oracle",
    9: "end-to-end default experiment",
    10: "reproducibility (manifests, compare)",
    11: "report format fixtures round-trip",
}

_outcomes: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_logreport(report):
    n = getattr(report, "criterion", None)
    if n is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes.setdefault(n, []).append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        rep.criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(CRITERIA):
        results = _outcomes.get(n)
        if not results:
            status = "NOT RUN"
        elif all(r == "passed" for r in results):
            status = "PASS"
        elif any(r == "failed" for r in results):
            status = "FAIL"
        else:
            status = "SKIPPED"
        tr.write_line(f"criterion {n:2d} [PRIMARY] {CRITERIA[n]}: {status} ({len(results or [])} checks)")


def make_matrix(X, y, names=None, subjects=None):
    X = np.asarray(X, dtype=float)
    names = names or tuple(f"f{j}" for j in range(X.shape[1]))
    subjects = subjects if subjects is not None else [f"s{i}" for i in range(X.shape[0])]
    return FeatureMatrix(tuple(names), X, np.asarray(y), subjects)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_config(**kw):
    from xaistab.data import ScenarioSpec, Task
    from xaistab.experiment import ExperimentConfig, ShapSettings
    from xaistab.models import CandidateSpec
    from xaistab.synth import SynthConfig

    base = dict(
        synth=SynthConfig(n_subjects=80, visits_per_subject=(2, 5), seed=3),
        scenarios=(ScenarioSpec(Task.DIAGNOSIS, ("NC", "AD")), ScenarioSpec(Task.DIAGNOSIS, ("NC", "MCI")),
                   ScenarioSpec(Task.PROGNOSIS, ("NC", "AD"), 4.0)),
        candidates=(CandidateSpec("tree", 3), CandidateSpec("forest", 3, 5, max_features=0.6)),
        k_folds=3, fi_repeats=2, shap=ShapSettings("sampled", n_permutations=10, background_size=10), seed=1,
    )
    base.update(kw)
    return ExperimentConfig(**base)
