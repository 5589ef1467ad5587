"""Virtual patient sampling.

Every patient draws the ten sampled quantities in a fixed order from an
independent PCG64 substream seeded by (master seed, patient index), so a
cohort is reproducible patient by patient, can be generated in any order
or in parallel, and overriding one parameter never perturbs the draws of
the others (the draw is always consumed, then replaced).

Sampling laws: uniform for the rates and fractions (delta2 included),
log-uniform for the initial burden T0 by default, which spans a decade;
CohortConfig flags switch either law.  r2 and alpha3 are derived
(r2 = r2_ratio * r1, alpha3 = alpha1), the remaining constants are fixed
for all patients.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterator, Sequence

import numpy as np

from ._defaults import load_defaults
from .model import FATAL_TUMOR_CELLS, PatientParams

__all__ = [
    "UNIFORM_RANGES",
    "FIXED_PARAMS",
    "SAMPLED_NAMES",
    "CohortConfig",
    "Cohort",
    "sample_patient",
    "sample_cohort",
    "median_patient",
    "cohort_to_csv",
    "cohort_from_csv",
]

# Uniform sampling windows for the per-patient rates and fractions.
UNIFORM_RANGES: dict[str, tuple[float, float]] = {
    "r1": (0.001, 0.025),
    "alpha1": (0.1, 1.0),
    "eps1": (0.1, 0.6),
    "rho1": (1.0 / 30.0, 1.0 / 7.0),
    "rho2": (0.2, 0.9),
    "rho3": (0.2, 0.9),
    "delta1": (0.1, 0.5),
}

RHO4_MIN = 0.01
DELTA2_RANGE = (1e-4, 0.1)

# Constants shared by every patient.
FIXED_PARAMS: dict[str, float] = {
    "K": 5e12,
    "g1": 1e10,
    "g2": 1e10,
    "g3": 2e9,
    "mu": 8.32,
    "alpha2": 2.5e-10,
}

# Draw order; also the set of quantities that vary across a default cohort.
SAMPLED_NAMES: tuple[str, ...] = (
    "r1", "alpha1", "eps1", "rho1", "rho2", "rho3", "rho4",
    "delta1", "delta2", "T0",
)

_PARAM_FIELDS = tuple(f.name for f in fields(PatientParams))


def _default_t0_range() -> tuple[float, float]:
    lo, hi = load_defaults()["cohort"]["t0_range"]
    return float(lo), float(hi)


@dataclass(frozen=True)
class CohortConfig:
    """Everything that determines a cohort, bit for bit."""

    n_patients: int = 10000
    seed: int = 12345
    r2_ratio: float = 0.5
    rho4_max: float = 0.1
    t0_range: tuple[float, float] | None = None
    t0_log: bool = True
    delta2_log: bool = False
    overrides: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n_patients <= 0:
            raise ValueError("n_patients must be positive")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.r2_ratio <= 0:
            raise ValueError("r2_ratio must be > 0")
        if not (RHO4_MIN < self.rho4_max <= 1.0):
            raise ValueError(
                f"rho4_max must lie in ({RHO4_MIN}, 1.0], got {self.rho4_max}")
        lo, hi = self.resolved_t0_range()
        if not (0 < lo < hi < FATAL_TUMOR_CELLS):
            raise ValueError(
                f"t0_range must satisfy 0 < lo < hi < {FATAL_TUMOR_CELLS:g}")
        unknown = set(self.overrides) - set(_PARAM_FIELDS)
        if unknown:
            raise ValueError(f"unknown override parameter(s): {sorted(unknown)}")

    def resolved_t0_range(self) -> tuple[float, float]:
        if self.t0_range is not None:
            return (float(self.t0_range[0]), float(self.t0_range[1]))
        return _default_t0_range()

    def with_(self, **changes) -> "CohortConfig":
        return replace(self, **changes)


@dataclass
class Cohort:
    """Sampled patients plus the config that generated them."""

    config: CohortConfig | None
    patients: list[PatientParams]

    def __len__(self) -> int:
        return len(self.patients)

    def __iter__(self) -> Iterator[PatientParams]:
        return iter(self.patients)

    def param_array(self, name: str) -> np.ndarray:
        """One parameter across the whole cohort, in patient order."""
        if name not in _PARAM_FIELDS:
            raise ValueError(f"unknown parameter {name!r}")
        return np.array([getattr(p, name) for p in self.patients])

    def same_patients(self, other: "Cohort") -> bool:
        return self.patients == other.patients


def _loguniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return math.exp(rng.uniform(math.log(lo), math.log(hi)))


def sample_patient(config: CohortConfig, index: int) -> PatientParams:
    """Draw patient `index` of the cohort the config describes."""
    if not (0 <= index < config.n_patients):
        raise ValueError(f"patient index {index} outside [0, {config.n_patients})")
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence((config.seed, index))))
    t0_lo, t0_hi = config.resolved_t0_range()

    draws: dict[str, float] = {}
    for name in SAMPLED_NAMES:
        if name == "rho4":
            draws[name] = rng.uniform(RHO4_MIN, config.rho4_max)
        elif name == "delta2":
            lo, hi = DELTA2_RANGE
            draws[name] = (_loguniform(rng, lo, hi) if config.delta2_log
                           else rng.uniform(lo, hi))
        elif name == "T0":
            draws[name] = (_loguniform(rng, t0_lo, t0_hi) if config.t0_log
                           else rng.uniform(t0_lo, t0_hi))
        else:
            lo, hi = UNIFORM_RANGES[name]
            draws[name] = rng.uniform(lo, hi)

    values = dict(FIXED_PARAMS)
    values.update(draws)
    for name, val in config.overrides.items():
        values[name] = float(val)
    values.setdefault("r2", config.r2_ratio * values["r1"])
    values.setdefault("alpha3", values["alpha1"])

    patient = PatientParams(**{name: values[name] for name in _PARAM_FIELDS})
    patient.validate()
    return patient


def sample_cohort(config: CohortConfig) -> Cohort:
    """Sample the full cohort in patient order."""
    patients = [sample_patient(config, i) for i in range(config.n_patients)]
    return Cohort(config=config, patients=patients)


def median_patient(config: CohortConfig | None = None) -> PatientParams:
    """The distribution-median virtual patient of a cohort config.

    Uniform laws contribute their midpoint, log-uniform laws their
    geometric mean (the median of a log-uniform variable); overrides pass
    through unchanged.
    """
    config = config or CohortConfig()
    t0_lo, t0_hi = config.resolved_t0_range()
    values = dict(FIXED_PARAMS)
    for name, (lo, hi) in UNIFORM_RANGES.items():
        values[name] = 0.5 * (lo + hi)
    values["rho4"] = 0.5 * (RHO4_MIN + config.rho4_max)
    lo, hi = DELTA2_RANGE
    values["delta2"] = (math.sqrt(lo * hi) if config.delta2_log
                        else 0.5 * (lo + hi))
    values["T0"] = (math.sqrt(t0_lo * t0_hi) if config.t0_log
                    else 0.5 * (t0_lo + t0_hi))
    for name, val in config.overrides.items():
        values[name] = float(val)
    values.setdefault("r2", config.r2_ratio * values["r1"])
    values.setdefault("alpha3", values["alpha1"])
    patient = PatientParams(**{name: values[name] for name in _PARAM_FIELDS})
    patient.validate()
    return patient


CSV_COLUMNS = ("patient_id", "seed") + _PARAM_FIELDS


def cohort_to_csv(cohort: Cohort, path) -> None:
    """Write one row per patient; floats keep full round-trip precision."""
    seed = cohort.config.seed if cohort.config is not None else ""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for i, p in enumerate(cohort.patients):
            writer.writerow([i, seed] + [repr(getattr(p, n)) for n in _PARAM_FIELDS])


def cohort_from_csv(path) -> Cohort:
    """Rebuild a cohort from `cohort_to_csv` output (config is not stored)."""
    patients: list[PatientParams] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"cohort CSV missing column(s): {sorted(missing)}")
        for row in reader:
            patients.append(PatientParams(
                **{n: float(row[n]) for n in _PARAM_FIELDS}))
    return Cohort(config=None, patients=patients)
