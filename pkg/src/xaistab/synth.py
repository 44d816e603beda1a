"""Deterministic synthetic longitudinal cohort with clinical-style feature groups."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .data import ClassLabel, Column, ColumnKind, Dataset, DomainTag

# per-stage mean shift (in noise standard deviations) at separability 1
COGNITIVE_EFFECTS = {"MEMORY": 3.0, "JUDGMENT": 2.6, "ORIENT": 2.2, "COMMUN": 1.8}
FUNCTIONAL_EFFECTS = {"PAYATTN": 1.5, "BILLS": 1.2, "TAXES": 1.0, "TRAVEL": 0.8}

LANGUAGES = ("en", "es", "other")
ADGC_COHORTS = ("adc1", "adc7", "ome2")
N_SITES = 60

DEFAULT_MISSING = {"*": 0.02, "NPIQINF": 0.65}


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 500
    visits_per_subject: tuple[int, int] = (1, 8)
    label_prior: tuple[float, float, float] = (0.5, 0.25, 0.25)
    separability: float = 1.0
    missing_rate: float | dict = field(default_factory=lambda: dict(DEFAULT_MISSING))
    progression_rate: float = 0.15
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.visits_per_subject
        object.__setattr__(self, "visits_per_subject", (int(lo), int(hi)))
        object.__setattr__(self, "label_prior", tuple(float(p) for p in self.label_prior))
        if self.n_subjects < 1:
            raise ValueError("n_subjects must be >= 1")
        if not 1 <= lo <= hi:
            raise ValueError("visits_per_subject must satisfy 1 <= lo <= hi")
        if len(self.label_prior) != 3 or min(self.label_prior) < 0 or abs(sum(self.label_prior) - 1) > 1e-9:
            raise ValueError("label_prior must be 3 non-negative probabilities summing to 1")
        if not 0 <= self.separability <= 1:
            raise ValueError("separability must be in [0, 1]")
        if not 0 <= self.progression_rate <= 1:
            raise ValueError("progression_rate must be in [0, 1]")
        rates = self.missing_rate.values() if isinstance(self.missing_rate, dict) else [self.missing_rate]
        if any(not 0 <= r < 1 for r in rates):
            raise ValueError("missing rates must be in [0, 1)")

    def rate_for(self, column: str) -> float:
        if isinstance(self.missing_rate, dict):
            return float(self.missing_rate.get(column, self.missing_rate.get("*", 0.0)))
        return float(self.missing_rate)

    def to_json(self) -> dict:
        out = asdict(self)
        out["visits_per_subject"] = list(self.visits_per_subject)
        out["label_prior"] = list(self.label_prior)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "SynthConfig":
        obj = dict(obj)
        if "visits_per_subject" in obj:
            obj["visits_per_subject"] = tuple(obj["visits_per_subject"])
        if "label_prior" in obj:
            obj["label_prior"] = tuple(obj["label_prior"])
        return cls(**obj)


def generate_synthetic(cfg: SynthConfig) -> Dataset:
    """Simulate a cohort whose class signal lives in the cognitive/functional columns.

    Each subject draws a baseline stage and a latent severity. Stages only move
    forward, one step at a time, at a per-visit rate that grows with severity
    and with carrying the GWAS risk variant. Packet, language and genetic
    columns carry no information about the current stage.
    """
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.visits_per_subject
    n = cfg.n_subjects

    base_stage = rng.choice(3, size=n, p=cfg.label_prior)
    severity = rng.uniform(0.0, 1.0, size=n)
    n_visits = rng.integers(lo, hi + 1, size=n)
    base_age = np.clip(rng.normal(72.0, 6.0, size=n), 50.0, None)
    gwas = (rng.uniform(size=n) < 0.3).astype(float)
    exac = (rng.uniform(size=n) < 0.1).astype(float)
    adgc = rng.choice(len(ADGC_COHORTS), size=n)
    lang = rng.choice(len(LANGUAGES), size=n, p=(0.8, 0.15, 0.05))
    sex = rng.choice(2, size=n)
    educ = np.round(np.clip(rng.normal(15.0, 3.0, size=n), 6, 22))
    site = rng.integers(0, N_SITES, size=n)
    prog_p = np.clip(cfg.progression_rate * (0.5 + severity) * (1.0 + 0.5 * gwas), 0.0, 1.0)

    sid, vis, age, lab, subj = [], [], [], [], []
    for s in range(n):
        stage = int(base_stage[s])
        a = float(base_age[s])
        for v in range(int(n_visits[s])):
            if v > 0:
                a += 1.0 + rng.uniform(-0.2, 0.2)
                if stage < 2 and rng.uniform() < prog_p[s]:
                    stage += 1
            sid.append(f"S{s:05d}")
            vis.append(v)
            age.append(round(a, 3))
            lab.append(stage)
            subj.append(s)
    subj = np.array(subj)
    lab = np.array(lab)
    vis = np.array(vis)
    rows = lab.size

    sep = cfg.separability
    level = lab + 0.3 * severity[subj]
    columns = []
    for name, eff in COGNITIVE_EFFECTS.items():
        columns.append((name, ColumnKind.NUMERIC, DomainTag.COGNITIVE,
                        eff * sep * level + rng.normal(0.0, 1.0, rows)))
    for name, eff in FUNCTIONAL_EFFECTS.items():
        columns.append((name, ColumnKind.NUMERIC, DomainTag.FUNCTIONAL,
                        eff * sep * level + rng.normal(0.0, 1.0, rows)))
    packet = np.where(vis == 0, "I", np.where(rng.uniform(size=rows) < 0.2, "T", "F"))
    columns.append(("PACKET", ColumnKind.CATEGORICAL, DomainTag.PACKET, packet.astype(object)))
    columns.append(("MOCALANX", ColumnKind.CATEGORICAL, DomainTag.LANGUAGE,
                    np.array(LANGUAGES, dtype=object)[lang[subj]]))
    columns.append(("ADGCEXR", ColumnKind.CATEGORICAL, DomainTag.GENETIC,
                    np.array(ADGC_COHORTS, dtype=object)[adgc[subj]]))
    columns.append(("NGDSGWAC", ColumnKind.NUMERIC, DomainTag.GENETIC, gwas[subj]))
    columns.append(("NGDSEXAC", ColumnKind.NUMERIC, DomainTag.GENETIC, exac[subj]))
    columns.append(("SEX", ColumnKind.CATEGORICAL, DomainTag.OTHER,
                    np.array(["M", "F"], dtype=object)[sex[subj]]))
    columns.append(("EDUC", ColumnKind.NUMERIC, DomainTag.OTHER, educ[subj]))
    columns.append(("SITEID", ColumnKind.CATEGORICAL, DomainTag.OTHER,
                    np.array([f"site{k:02d}" for k in range(N_SITES)], dtype=object)[site[subj]]))
    columns.append(("NPIQINF", ColumnKind.NUMERIC, DomainTag.OTHER, rng.integers(1, 4, rows).astype(float)))

    out = []
    for name, kind, domain, values in columns:
        rate = cfg.rate_for(name)
        drop = rng.uniform(size=rows) < rate
        if kind is ColumnKind.NUMERIC:
            values = np.where(drop, np.nan, values)
        else:
            values = np.array([None if d else v for d, v in zip(drop, values)], dtype=object)
        out.append(Column(name, kind, values, domain))
    return Dataset(tuple(out), np.array(sid, dtype=object), vis, np.array(age), lab)
