"""In-silico trials: run a cohort through a protocol and collect outcomes.

A trial outcome per patient is the survival time (first crossing of the
fatal tumor burden) or censoring at the horizon when the burden never gets
there within the simulated window (including eradicated patients, who are
alive at the horizon by construction).  Identical cohort + protocol +
dose + integrator settings reproduce outcomes bit for bit; threads only
partition patients, they never change results.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import _kernel
from .cohort import Cohort, CohortConfig, sample_cohort
from .integrator import IntegrationError, IntegratorConfig, _pack_events, _pack_params
from .model import ERADICATION_CELLS, FATAL_TUMOR_CELLS, PatientParams
from .protocol import DoseConfig, ProtocolSpec, expand, format_protocol, parse

__all__ = [
    "TrialOutcome",
    "TrialResult",
    "run_trial",
    "median_survival",
    "sweep_chemo_cycles",
    "sweep_cart_dose",
    "sweep_cart_split",
    "sweep_cart_gap",
    "sweep_rho4_max",
    "SweepPoint",
    "EquivalenceReport",
    "protocol_equivalence_sets",
]


@dataclass(frozen=True)
class TrialOutcome:
    patient_id: int
    survival_days: float
    censored: bool


@dataclass
class TrialResult:
    """All outcomes of one treatment arm, in patient order."""

    protocol_name: str
    outcomes: list[TrialOutcome]
    cohort: Cohort
    dose: DoseConfig
    integrator: IntegratorConfig

    @property
    def survival_days(self) -> np.ndarray:
        return np.array([o.survival_days for o in self.outcomes])

    @property
    def censored(self) -> np.ndarray:
        return np.array([o.censored for o in self.outcomes])

    @property
    def n_censored(self) -> int:
        return int(np.count_nonzero(self.censored))

    def median_survival(self) -> float:
        return float(np.median(self.survival_days))


def median_survival(result: TrialResult) -> float:
    return result.median_survival()


def _patient_survival(patient: PatientParams, ev_t, ev_comp, ev_amt_cells,
                      config: IntegratorConfig) -> tuple[float, bool]:
    """Survival days and censoring flag for one patient (no recording)."""
    state = patient.initial_state()
    y = state.as_array()
    y[:4] /= patient.K
    p_vec = _pack_params(patient, 0.0, 0.0)
    ev_amt = ev_amt_cells.copy()
    ev_amt[ev_comp == _kernel.COMP_CART] /= patient.K
    status, t_stop, _, _, _, _, _, _ = _kernel.simulate(
        y, 0.0, ev_t, ev_comp, ev_amt, p_vec,
        config.rel_tol, config.abs_tol, config.max_step, config.horizon,
        FATAL_TUMOR_CELLS / patient.K, ERADICATION_CELLS / patient.K,
        config.event_time_tol, False,
    )
    if status == _kernel.STOP_UNDERFLOW:
        raise IntegrationError(
            f"step size underflow at t={t_stop:.6g} days")
    if status == _kernel.STOP_FATAL:
        return float(t_stop), False
    return float(config.horizon), True


def run_trial(cohort: Cohort | CohortConfig,
              protocol: str | ProtocolSpec,
              dose: DoseConfig | None = None,
              integrator: IntegratorConfig | None = None,
              workers: int | None = None) -> TrialResult:
    """Simulate every patient under one protocol.

    Accepts a sampled Cohort or a CohortConfig (sampled here).  The dose
    config must carry v_per_injection when the protocol contains CAR-T
    blocks without explicit doses.
    """
    if isinstance(cohort, CohortConfig):
        cohort = sample_cohort(cohort)
    if isinstance(protocol, str):
        spec = parse(protocol)
    else:
        spec = protocol
    name = format_protocol(spec)
    dose = dose or DoseConfig()
    integrator = integrator or IntegratorConfig()
    events = expand(spec, dose)

    n = len(cohort)
    if n == 0:
        raise ValueError("cohort is empty")
    k_cap = cohort.patients[0].K
    for p in cohort.patients:
        if p.K != k_cap:
            raise ValueError("all patients in a trial must share K")
    # CAR-T amounts stay in cells here; the per-patient path rescales.
    ev_t, ev_comp, ev_amt_cells = _pack_events(events, 0.0, 1.0)

    survival = np.empty(n)
    censored = np.empty(n, dtype=bool)

    def run_range(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            try:
                s, c = _patient_survival(cohort.patients[i], ev_t, ev_comp,
                                         ev_amt_cells, integrator)
            except IntegrationError as exc:
                raise IntegrationError(f"patient {i}: {exc}") from None
            survival[i] = s
            censored[i] = c

    n_workers = workers if workers is not None else min(os.cpu_count() or 1, 8)
    if n_workers > 1 and n > 1:
        chunk = (n + n_workers - 1) // n_workers
        bounds = [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(run_range, lo, hi) for lo, hi in bounds]
            for fut in futures:
                fut.result()
    else:
        run_range(0, n)

    outcomes = [TrialOutcome(i, float(survival[i]), bool(censored[i]))
                for i in range(n)]
    return TrialResult(protocol_name=name, outcomes=outcomes, cohort=cohort,
                       dose=dose, integrator=integrator)


@dataclass(frozen=True)
class SweepPoint:
    """One grid point of a sweep: the varied value and the median outcome."""

    value: float
    median_days: float
    n_censored: int


def _sweep_point(value: float, result: TrialResult) -> SweepPoint:
    return SweepPoint(value=float(value), median_days=result.median_survival(),
                      n_censored=result.n_censored)


def sweep_chemo_cycles(config: CohortConfig, cycles: Sequence[int],
                       dose: DoseConfig | None = None,
                       integrator: IntegratorConfig | None = None,
                       workers: int | None = None) -> list[SweepPoint]:
    """Median survival versus the number of chemo-only cycles (0 = untreated)."""
    cohort = sample_cohort(config)
    out = []
    for n_cycles in cycles:
        if n_cycles < 0:
            raise ValueError("cycle counts must be >= 0")
        result = run_trial(cohort, f"{int(n_cycles)}T", dose=dose,
                           integrator=integrator, workers=workers)
        out.append(_sweep_point(n_cycles, result))
    return out


def sweep_cart_dose(config: CohortConfig, totals: Sequence[float],
                    n_injections: int = 2,
                    dose: DoseConfig | None = None,
                    integrator: IntegratorConfig | None = None,
                    workers: int | None = None) -> list[SweepPoint]:
    """Median survival versus total CAR-T dose split over n_injections."""
    cohort = sample_cohort(config)
    base = dose or DoseConfig()
    out = []
    for total in totals:
        d = base.with_total_cart(total, n_injections)
        result = run_trial(cohort, f"{int(n_injections)}C", dose=d,
                           integrator=integrator, workers=workers)
        out.append(_sweep_point(total, result))
    return out


def sweep_cart_split(config: CohortConfig, splits: Sequence[int], total: float,
                     dose: DoseConfig | None = None,
                     integrator: IntegratorConfig | None = None,
                     workers: int | None = None) -> list[SweepPoint]:
    """Median survival versus how many injections share a fixed total dose."""
    cohort = sample_cohort(config)
    base = dose or DoseConfig()
    out = []
    for m in splits:
        if m <= 0:
            raise ValueError("split counts must be >= 1")
        d = base.with_total_cart(total, int(m))
        result = run_trial(cohort, f"{int(m)}C", dose=d,
                           integrator=integrator, workers=workers)
        out.append(_sweep_point(m, result))
    return out


def sweep_cart_gap(config: CohortConfig, gaps: Sequence[float], total: float,
                   n_injections: int = 2,
                   dose: DoseConfig | None = None,
                   integrator: IntegratorConfig | None = None,
                   workers: int | None = None) -> list[SweepPoint]:
    """Median survival versus the spacing between CAR-T injections."""
    cohort = sample_cohort(config)
    base = dose or DoseConfig()
    out = []
    for gap in gaps:
        if gap <= 0:
            raise ValueError("gaps must be > 0 days")
        d = replace(base.with_total_cart(total, n_injections),
                    cart_gap=float(gap))
        result = run_trial(cohort, f"{int(n_injections)}C", dose=d,
                           integrator=integrator, workers=workers)
        out.append(_sweep_point(gap, result))
    return out


def sweep_rho4_max(config: CohortConfig, maxima: Sequence[float],
                   protocol: str = "2C", total: float = 1e9,
                   dose: DoseConfig | None = None,
                   integrator: IntegratorConfig | None = None,
                   workers: int | None = None) -> list[SweepPoint]:
    """Median survival versus the upper bound of the rho4 sampling window.

    Re-sampling with a different rho4_max only moves each patient's rho4
    draw; all other draws stay identical, so points differ through rho4
    alone.
    """
    base = dose or DoseConfig()
    spec = parse(protocol)
    out = []
    for m in maxima:
        cfg = config.with_(rho4_max=float(m))
        d = (base.with_total_cart(total, spec.n_injections)
             if spec.n_injections > 0 else base)
        result = run_trial(sample_cohort(cfg), spec, dose=d,
                           integrator=integrator, workers=workers)
        out.append(_sweep_point(m, result))
    return out


@dataclass
class EquivalenceReport:
    """Per-patient sets of near-best protocols at a relative margin."""

    protocols: list[str]
    margin: float
    suitable: list[list[str]]
    set_sizes: np.ndarray
    n_suitable_for_all: int

    @property
    def fraction_suitable_for_all(self) -> float:
        return self.n_suitable_for_all / len(self.suitable)


def equivalence_from_days(names: Sequence[str], days: np.ndarray,
                          margin: float) -> EquivalenceReport:
    """Equivalence sets from a (arms, patients) survival matrix.

    A protocol is suitable for a patient when its survival is at least
    (1 - margin) times the patient's best across the arms.  Rows must
    describe the same patients in the same order.
    """
    if len(names) < 2:
        raise ValueError("need at least two arms to compare")
    if not (0 < margin < 1):
        raise ValueError("margin must lie in (0, 1)")
    if len(set(names)) != len(names):
        raise ValueError("duplicate protocol names in comparison")
    days = np.asarray(days, dtype=float)
    if days.ndim != 2 or days.shape[0] != len(names) or days.shape[1] == 0:
        raise ValueError("days must be a (arms, patients) matrix")
    best = days.max(axis=0)
    ok = days >= (1.0 - margin) * best[None, :]
    suitable = [[names[a] for a in range(len(names)) if ok[a, i]]
                for i in range(days.shape[1])]
    set_sizes = ok.sum(axis=0)
    n_all = int(np.count_nonzero(set_sizes == len(names)))
    return EquivalenceReport(protocols=list(names), margin=margin,
                             suitable=suitable,
                             set_sizes=set_sizes.astype(int),
                             n_suitable_for_all=n_all)


def protocol_equivalence_sets(results: Sequence[TrialResult],
                              margin: float) -> EquivalenceReport:
    """For each patient, which protocols come within margin of their best.

    All results must stem from the same cohort (checked patient by
    patient).  See equivalence_from_days for the suitability rule.
    """
    if len(results) < 2:
        raise ValueError("need at least two arms to compare")
    first = results[0].cohort
    for r in results[1:]:
        if len(r.cohort) != len(first) or not first.same_patients(r.cohort):
            raise ValueError("equivalence sets need identical cohorts per arm")
    names = [r.protocol_name for r in results]
    days = np.stack([r.survival_days for r in results])  # (arms, patients)
    return equivalence_from_days(names, days, margin)
