"""Agreement metrics between feature rankings and the three comparison analyses.

Pairwise metrics first restrict both inputs to their shared feature names,
except the top-k overlap metrics, which select each side's top-k on its full
vector and then compare the sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Mapping, Sequence

import numpy as np

from .data import DomainTag
from .shapley import AttributionMatrix, ImportanceVector, summarize

SIGN_ZERO_BAND = 1e-12


class UndefinedMetricError(ValueError):
    """The metric is not computable for these inputs (degenerate ranking, too few features)."""


# ---------------------------------------------------------------- rankings

@dataclass(frozen=True)
class RankedList:
    names: tuple[str, ...]  # descending score, ties by name
    scores: tuple[float, ...]

    @classmethod
    def from_vector(cls, v: ImportanceVector) -> "RankedList":
        pairs = sorted(zip(v.feature_names, v.scores), key=lambda p: (-p[1], p[0]))
        return cls(tuple(n for n, _ in pairs), tuple(s for _, s in pairs))

    def top_k(self, k: int) -> tuple[str, ...]:
        return self.names[:k]

    def ranks(self) -> dict[str, float]:
        """Average ranks, 1 = highest score."""
        return dict(zip(self.names, average_ranks(-np.array(self.scores))))


def average_ranks(values) -> np.ndarray:
    """1-based ascending ranks with tied values sharing their mean rank."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    sv = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def top_k(v: ImportanceVector, k: int) -> tuple[str, ...]:
    return RankedList.from_vector(v).top_k(k)


def _shared(a: ImportanceVector, b: ImportanceVector, names=None):
    bd = b.as_dict()
    ad = a.as_dict()
    keep = [n for n in a.feature_names if n in bd and (names is None or n in names)]
    return keep, np.array([ad[n] for n in keep]), np.array([bd[n] for n in keep])


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc, yc = x - x.mean(), y - y.mean()
    den = math.sqrt(float((xc * xc).sum()) * float((yc * yc).sum()))
    if den == 0:
        raise UndefinedMetricError("zero rank variance: every score is tied on one side")
    return float(np.clip((xc * yc).sum() / den, -1.0, 1.0))


def _spearman_on(a, b, names=None) -> float:
    keep, x, y = _shared(a, b, names)
    if len(keep) < 2:
        raise UndefinedMetricError(f"Spearman needs >= 2 shared features, got {len(keep)}")
    return _pearson(average_ranks(x), average_ranks(y))


def spearman(a: ImportanceVector, b: ImportanceVector) -> float:
    """Spearman's rho over the shared features, average ranks for ties."""
    return _spearman_on(a, b)


def robust_spearman_top10(a: ImportanceVector, b: ImportanceVector, k: int = 10) -> float:
    """Spearman's rho re-ranked on the intersection of both top-k lists."""
    inter = set(top_k(a, k)) & set(top_k(b, k))
    if len(inter) < 2:
        raise UndefinedMetricError(f"top-{k} lists share {len(inter)} features; need >= 2")
    return _spearman_on(a, b, inter)


def kendall_tau(a: ImportanceVector, b: ImportanceVector) -> float:
    """Kendall's tau-b over the shared features."""
    keep, x, y = _shared(a, b)
    n = len(keep)
    if n < 2:
        raise UndefinedMetricError(f"Kendall tau needs >= 2 shared features, got {n}")
    iu = np.triu_indices(n, 1)
    sx = np.sign(x[:, None] - x[None, :])[iu]
    sy = np.sign(y[:, None] - y[None, :])[iu]
    n0 = sx.size
    untied_x = int(np.count_nonzero(sx))
    untied_y = int(np.count_nonzero(sy))
    if untied_x == 0 or untied_y == 0:
        raise UndefinedMetricError("every pair is tied on one side")
    s = float((sx * sy).sum())
    return float(np.clip(s / math.sqrt(untied_x * untied_y), -1.0, 1.0))


def effective_k(a: ImportanceVector, b: ImportanceVector, k: int) -> int:
    return min(k, len(a.feature_names), len(b.feature_names))


def jaccard_topk(a: ImportanceVector, b: ImportanceVector, k: int) -> float:
    """|top_k(a) & top_k(b)| / |top_k(a) | top_k(b)|, with k clamped to the shorter side."""
    k = effective_k(a, b, k)
    if k < 1:
        raise UndefinedMetricError("Jaccard@k needs at least one feature per side")
    ta, tb = set(top_k(a, k)), set(top_k(b, k))
    return len(ta & tb) / len(ta | tb)


def precision_recall_top10(fi: ImportanceVector, shap: ImportanceVector, k: int = 10) -> tuple[float, float]:
    """Share of top-k FI features among the top-k SHAP features, and the converse."""
    tf = set(top_k(fi, min(k, len(fi.feature_names))))
    ts = set(top_k(shap, min(k, len(shap.feature_names))))
    if not tf or not ts:
        raise UndefinedMetricError("precision/recall need at least one feature per side")
    inter = len(tf & ts)
    return inter / len(tf), inter / len(ts)


def _direction(v: float) -> int:
    if abs(v) < SIGN_ZERO_BAND:
        return 0
    return 1 if v > 0 else -1


def sign_consistency(a: ImportanceVector, b: ImportanceVector) -> float:
    """Fraction of shared features whose mean signed SHAP points the same way."""
    if a.signed_means is None or b.signed_means is None:
        raise TypeError("sign consistency needs summaries carrying signed means")
    sa = dict(zip(a.feature_names, a.signed_means))
    sb = dict(zip(b.feature_names, b.signed_means))
    keep = [n for n in a.feature_names if n in sb]
    if not keep:
        raise UndefinedMetricError("no shared features")
    return sum(_direction(sa[n]) == _direction(sb[n]) for n in keep) / len(keep)


def mean_delta_abs_shap(a: ImportanceVector, b: ImportanceVector) -> float:
    """Mean over shared features of |mean|SHAP|_a - mean|SHAP|_b|."""
    if a.source != "MeanAbsShap" or b.source != "MeanAbsShap":
        raise TypeError("mean delta |SHAP| compares two mean-|SHAP| summaries")
    keep, x, y = _shared(a, b)
    if not keep:
        raise UndefinedMetricError("no shared features")
    return float(np.abs(x - y).mean())


# ---------------------------------------------------------------- domains

DOMAIN_SLOTS = ("cognitive", "functional", "packet", "genetic", "other")
_SLOT_OF = {
    DomainTag.COGNITIVE: 0,
    DomainTag.FUNCTIONAL: 1,
    DomainTag.PACKET: 2,
    DomainTag.LANGUAGE: 2,
    DomainTag.GENETIC: 3,
    DomainTag.OTHER: 4,
}


@dataclass(frozen=True)
class ContributionVector:
    """Share of total mean-|SHAP| mass per domain: CDR, FAQ, Packet (+language), Genetic, Other.

    ``other`` may be None for externally reported four-slot vectors.
    """

    cognitive: float
    functional: float
    packet: float
    genetic: float
    other: float | None = 0.0

    def __post_init__(self):
        for v in self.as_tuple():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"contribution share {v} outside [0, 1]")

    def as_tuple(self) -> tuple[float, ...]:
        vals = (self.cognitive, self.functional, self.packet, self.genetic)
        return vals if self.other is None else vals + (self.other,)

    def total(self) -> float:
        return float(sum(self.as_tuple()))

    @classmethod
    def from_sequence(cls, seq) -> "ContributionVector":
        seq = [float(v) for v in seq]
        if len(seq) == 4:
            return cls(*seq, other=None)
        if len(seq) == 5:
            return cls(*seq)
        raise ValueError("contribution vectors have 4 or 5 slots")


def resolve_domains(feature_names: Sequence[str], column_domains: Mapping[str, object]) -> dict[str, DomainTag]:
    """Map encoded feature names (scaler_/freq_/ohe_ prefixes) back to source-column domains."""
    out = {}
    cols = sorted(column_domains, key=len, reverse=True)
    for f in feature_names:
        if f in column_domains:
            out[f] = DomainTag.parse(column_domains[f])
            continue
        tag = DomainTag.OTHER
        for prefix in ("scaler_", "freq_"):
            if f.startswith(prefix) and f[len(prefix):] in column_domains:
                tag = DomainTag.parse(column_domains[f[len(prefix):]])
        if f.startswith("ohe_"):
            for c in cols:
                if f.startswith(f"ohe_{c}_"):
                    tag = DomainTag.parse(column_domains[c])
                    break
        out[f] = tag
    return out


def domain_contributions(a, domain_map: Mapping[str, object]) -> ContributionVector:
    """Per-domain sum of mean |SHAP| divided by the total; unmapped features count as Other."""
    if isinstance(a, ImportanceVector):
        if a.source != "MeanAbsShap":
            raise TypeError("domain contributions are defined on mean-|SHAP| summaries")
        summary = a
    else:
        summary = summarize(a)
    total = float(sum(summary.scores))
    if not total > 0:
        raise UndefinedMetricError("all attributions are zero")
    slots = [0.0] * 5
    for name, score in zip(summary.feature_names, summary.scores):
        tag = domain_map.get(name, DomainTag.OTHER)
        slots[_SLOT_OF[DomainTag.parse(tag)]] += score
    shares = [s / total for s in slots]
    return ContributionVector(*[min(1.0, max(0.0, s)) for s in shares])


# ---------------------------------------------------------------- records

METRIC_FIELDS = ("rho", "robust_rho", "tau", "j10", "j20", "precision10", "recall10",
                 "sign_consistency", "mean_delta_abs_shap")


@dataclass(frozen=True)
class StabilityRecord:
    kind: str  # "within" | "scenario" | "task"
    basis: str  # "FI-SHAP" | "SHAP-SHAP" | "FI-FI"
    left: str
    right: str
    task: str | None = None
    rho: float | None = None
    robust_rho: float | None = None
    tau: float | None = None
    j10: float | None = None
    j20: float | None = None
    precision10: float | None = None
    recall10: float | None = None
    sign_consistency: float | None = None
    mean_delta_abs_shap: float | None = None
    contrib_diag: ContributionVector | None = None
    contrib_prog: ContributionVector | None = None
    n_shared_features: int | None = None
    undefined: tuple[str, ...] = ()
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("rho", "robust_rho", "tau"):
            v = getattr(self, name)
            if v is not None and not -1.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [-1, 1]")
        for name in ("j10", "j20", "precision10", "recall10", "sign_consistency"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.mean_delta_abs_shap is not None and self.mean_delta_abs_shap < 0:
            raise ValueError("mean_delta_abs_shap must be >= 0")

    @property
    def degenerate(self) -> bool:
        return bool(self.undefined)


class _Collector:
    def __init__(self):
        self.values: dict = {}
        self.undefined: list[str] = []
        self.notes: list[str] = []

    def run(self, name, fn, *args):
        try:
            self.values[name] = fn(*args)
        except UndefinedMetricError:
            self.values[name] = None
            self.undefined.append(name)

    def topk(self, name, a, b, k):
        kk = effective_k(a, b, k)
        if kk < k:
            self.notes.append(f"{name}:k={kk}")
        self.run(name, jaccard_topk, a, b, k)

    def record(self, **kw) -> StabilityRecord:
        return StabilityRecord(**kw, **self.values, undefined=tuple(self.undefined), notes=tuple(self.notes))


def _n_shared(a, b) -> int:
    return len(set(a.feature_names) & set(b.feature_names))


def _require(v: ImportanceVector, source: str, what: str):
    if v.source != source:
        raise TypeError(f"{what} must be a {source} importance vector, got {v.source}")


def within_model_analysis(fi: ImportanceVector, shap: ImportanceVector, scenario: str = "",
                          task: str | None = None) -> StabilityRecord:
    """FI versus mean-|SHAP| agreement for a single model."""
    _require(fi, "FI", "fi")
    _require(shap, "MeanAbsShap", "shap")
    c = _Collector()
    c.run("rho", spearman, fi, shap)
    c.run("robust_rho", robust_spearman_top10, fi, shap)
    c.topk("j10", fi, shap, 10)
    c.run("tau", kendall_tau, fi, shap)
    if min(len(fi.feature_names), len(shap.feature_names)) < 10:
        c.notes.append(f"precision10:k={min(10, len(fi.feature_names), len(shap.feature_names))}")
    try:
        c.values["precision10"], c.values["recall10"] = precision_recall_top10(fi, shap)
    except UndefinedMetricError:
        c.values["precision10"] = c.values["recall10"] = None
        c.undefined += ["precision10", "recall10"]
    return c.record(kind="within", basis="FI-SHAP", left=scenario, right=scenario, task=task,
                    n_shared_features=_n_shared(fi, shap))


def _shap_pair(c: _Collector, a: ImportanceVector, b: ImportanceVector):
    c.run("rho", spearman, a, b)
    c.topk("j10", a, b, 10)
    c.topk("j20", a, b, 20)
    c.run("tau", kendall_tau, a, b)
    c.run("sign_consistency", sign_consistency, a, b)


def _as_summary(x) -> ImportanceVector:
    return x if isinstance(x, ImportanceVector) else summarize(x)


def cross_scenario_analysis(shap_a, shap_b, left: str = "", right: str = "",
                            task: str | None = None) -> StabilityRecord:
    """SHAP-SHAP agreement between two scenarios of the same task."""
    a, b = _as_summary(shap_a), _as_summary(shap_b)
    _require(a, "MeanAbsShap", "shap_a")
    _require(b, "MeanAbsShap", "shap_b")
    c = _Collector()
    _shap_pair(c, a, b)
    return c.record(kind="scenario", basis="SHAP-SHAP", left=left, right=right, task=task,
                    n_shared_features=_n_shared(a, b))


def cross_task_analysis(fi_diag: ImportanceVector, shap_diag, fi_prog: ImportanceVector, shap_prog,
                        domain_map: Mapping[str, object], scenario: str = "",
                        ) -> tuple[StabilityRecord, StabilityRecord]:
    """Diagnosis versus prognosis agreement for one scenario.

    Returns the FI-FI record and the SHAP-SHAP record; only the latter carries
    J@20, sign consistency, mean delta |SHAP| and the two contribution vectors.
    """
    _require(fi_diag, "FI", "fi_diag")
    _require(fi_prog, "FI", "fi_prog")
    sd, sp = _as_summary(shap_diag), _as_summary(shap_prog)
    f = _Collector()
    f.run("rho", spearman, fi_diag, fi_prog)
    f.run("tau", kendall_tau, fi_diag, fi_prog)
    f.topk("j10", fi_diag, fi_prog, 10)
    fi_rec = f.record(kind="task", basis="FI-FI", left="diagnosis", right="prognosis", task=scenario,
                      n_shared_features=_n_shared(fi_diag, fi_prog))
    s = _Collector()
    _shap_pair(s, sd, sp)
    s.run("mean_delta_abs_shap", mean_delta_abs_shap, sd, sp)
    s.run("contrib_diag", domain_contributions, sd, domain_map)
    s.run("contrib_prog", domain_contributions, sp, domain_map)
    shap_rec = s.record(kind="task", basis="SHAP-SHAP", left="diagnosis", right="prognosis", task=scenario,
                        n_shared_features=_n_shared(sd, sp))
    return fi_rec, shap_rec
