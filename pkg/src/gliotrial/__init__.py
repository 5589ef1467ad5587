"""Impulsive-dose glioma therapy simulator and in-silico trial toolkit."""

from .cohort import Cohort, CohortConfig, median_patient, sample_cohort
from .integrator import (IntegrationError, IntegratorConfig, StopEvent,
                         StopKind, Trajectory, dense_sample, integrate)
from .model import (ERADICATION_CELLS, FATAL_TUMOR_CELLS, EradicationReport,
                    PatientParams, SystemState, eradication_analysis,
                    first_integrals, jacobian, jacobian_spectrum, rhs,
                    rhs_constant_treatment)
from .protocol import (CarTBlock, DoseConfig, DoseEvent, ProtocolError,
                       ProtocolSpec, TMZBlock, expand, format_protocol, parse)
from .stats import (CorrelationReport, CorrelationRow, QuantileSummary,
                    SurvivalCurve, correlation_report, kaplan_meier,
                    ks_two_sample, log_rank, median_shift, pearson,
                    quantile_summary)
from .trial import (EquivalenceReport, SweepPoint, TrialOutcome, TrialResult,
                    equivalence_from_days, protocol_equivalence_sets,
                    run_trial, sweep_cart_dose, sweep_cart_gap,
                    sweep_cart_split, sweep_chemo_cycles, sweep_rho4_max)

__version__ = "0.1.0"
