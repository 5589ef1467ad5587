"""Five-compartment glioma model under chemotherapy and CAR-T immunotherapy.

State variables (cells, except E which is a dimensionless drug efficacy):

    S    tumor cells sensitive to both therapies
    RC   tumor cells resistant to CAR-T, still chemo-sensitive
    RE   tumor cells resistant to chemotherapy (acquired under exposure)
    C    CAR-T cells
    E    chemotherapy efficacy, decaying exponentially between doses

Dynamics (rates per day):

    dS/dt  = r1*S*(1 - T/K) - (alpha1 + eps1)*E*S - alpha2*C*S
    dRC/dt = r1*RC*(1 - T/K) - (alpha1 + eps1)*E*RC
    dRE/dt = r2*RE*(1 - T/K) - alpha2*C*RE + eps1*(S + RC)*E
    dC/dt  = -rho1*C + rho2*S*C/(g1 + S) + rho3*RE*C/(g2 + RE)
             - rho4*T*C/(g3 + C) - alpha3*E*C
    dE/dt  = -mu*E

with T = S + RC + RE.  Doses act as impulses on C and E; the continuous
analogue (constant infusion V of CAR-T cells plus a constant chemo source
E0) is available as `rhs_constant_treatment` and supports a closed-form
stability analysis of the tumor-free state (`eradication_analysis`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

FATAL_TUMOR_CELLS = 1e12
ERADICATION_CELLS = 1.0

_STATE_NAMES = ("S", "RC", "RE", "C", "E")


@dataclass(frozen=True)
class PatientParams:
    """One virtual patient: all model rates and the initial tumor burden.

    Units: rates are per day, cell counts in cells; alpha2 is per cell per
    day; g1..g3 are half-saturation constants in cells.  delta1/delta2 are
    the initial fractions of the tumor that are CAR-T-resistant and
    chemo-resistant; T0 is the total initial tumor burden.
    """

    r1: float
    r2: float
    K: float
    alpha1: float
    alpha2: float
    alpha3: float
    eps1: float
    rho1: float
    rho2: float
    rho3: float
    rho4: float
    g1: float
    g2: float
    g3: float
    mu: float
    delta1: float
    delta2: float
    T0: float

    def validate(self) -> None:
        """Reject structurally inadmissible parameter sets.

        Rates may be zero (useful for reduced systems) but never negative;
        capacities and half-saturations must be strictly positive; the
        resistant fractions must leave a nonempty sensitive pool, and the
        initial burden must sit below the fatal threshold.
        """
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ValueError(f"parameter {f.name} is not finite: {v!r}")
            if v < 0:
                raise ValueError(f"parameter {f.name} must be >= 0, got {v!r}")
        for name in ("K", "g1", "g2", "g3", "mu", "T0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"parameter {name} must be > 0")
        if self.delta1 + self.delta2 >= 1:
            raise ValueError(
                f"delta1 + delta2 must be < 1, got {self.delta1 + self.delta2}"
            )
        if self.T0 >= FATAL_TUMOR_CELLS:
            raise ValueError(
                f"T0 must start below the fatal burden {FATAL_TUMOR_CELLS:g}"
            )

    def initial_state(self) -> "SystemState":
        """Treatment-naive initial condition at t = 0."""
        s0 = self.T0 * (1.0 - self.delta1 - self.delta2)
        return SystemState(
            t=0.0,
            S=s0,
            RC=self.delta1 * self.T0,
            RE=self.delta2 * self.T0,
            C=0.0,
            E=0.0,
        )

    def with_(self, **changes: float) -> "PatientParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class SystemState:
    """Model state at time t (days)."""

    t: float
    S: float
    RC: float
    RE: float
    C: float
    E: float

    @property
    def tumor_total(self) -> float:
        return self.S + self.RC + self.RE

    def as_array(self) -> np.ndarray:
        return np.array([self.S, self.RC, self.RE, self.C, self.E])

    @classmethod
    def from_array(cls, t: float, y: np.ndarray) -> "SystemState":
        return cls(t=float(t), S=float(y[0]), RC=float(y[1]), RE=float(y[2]),
                   C=float(y[3]), E=float(y[4]))


def _check_state(y: np.ndarray) -> None:
    y = np.asarray(y, dtype=float)
    if y.shape != (5,):
        raise ValueError(f"state must have 5 components, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        bad = [_STATE_NAMES[i] for i in range(5) if not math.isfinite(y[i])]
        raise ValueError(f"non-finite state component(s): {', '.join(bad)}")


def rhs(y: np.ndarray, p: PatientParams) -> np.ndarray:
    """Time derivative of [S, RC, RE, C, E] between doses."""
    return rhs_constant_treatment(y, p, v_rate=0.0, e0=0.0)


def rhs_constant_treatment(y: np.ndarray, p: PatientParams,
                           v_rate: float, e0: float) -> np.ndarray:
    """Derivative with a constant CAR-T infusion (cells/day) and chemo source.

    v_rate = e0 = 0 recovers the between-dose dynamics of the impulsive
    system.
    """
    _check_state(y)
    s, rc, re_, c, e = (float(v) for v in y)
    tot = s + rc + re_
    logistic = 1.0 - tot / p.K
    chemo_kill = (p.alpha1 + p.eps1) * e
    ds = p.r1 * s * logistic - chemo_kill * s - p.alpha2 * c * s
    drc = p.r1 * rc * logistic - chemo_kill * rc
    dre = p.r2 * re_ * logistic - p.alpha2 * c * re_ + p.eps1 * (s + rc) * e
    dc = (-p.rho1 * c
          + p.rho2 * s * c / (p.g1 + s)
          + p.rho3 * re_ * c / (p.g2 + re_)
          - p.rho4 * tot * c / (p.g3 + c)
          - p.alpha3 * e * c
          + v_rate)
    de = e0 - p.mu * e
    return np.array([ds, drc, dre, dc, de])


def jacobian(y: np.ndarray, p: PatientParams,
             v_rate: float = 0.0, e0: float = 0.0) -> np.ndarray:
    """Finite-difference Jacobian of the right-hand side at state y.

    Central differences with per-component steps: cell compartments use
    max(1e-6*|y_i|, 1e-3 cells); the efficacy component uses
    max(1e-6*|E|, 1e-9).  The tumor equations are quadratic in the cell
    counts, so central differences are exact for them up to rounding.
    """
    y = np.asarray(y, dtype=float)
    _check_state(y)
    jac = np.empty((5, 5))
    for j in range(5):
        if j == 4:
            h = max(1e-6 * abs(y[j]), 1e-9)
        else:
            h = max(1e-6 * abs(y[j]), 1e-3)
        up = y.copy()
        dn = y.copy()
        up[j] += h
        dn[j] -= h
        jac[:, j] = (rhs_constant_treatment(up, p, v_rate, e0)
                     - rhs_constant_treatment(dn, p, v_rate, e0)) / (2.0 * h)
    return jac


def jacobian_spectrum(y: np.ndarray, p: PatientParams,
                      v_rate: float = 0.0, e0: float = 0.0) -> np.ndarray:
    """Eigenvalues of the finite-difference Jacobian, sorted by real part."""
    eig = np.linalg.eigvals(jacobian(y, p, v_rate=v_rate, e0=e0))
    return eig[np.argsort(eig.real)]


@dataclass(frozen=True)
class EradicationReport:
    """Stability summary of the tumor-free state under constant treatment.

    The tumor-free equilibrium is (0, 0, 0, C*, E*) with
    C* = mu*V / (alpha3*E0 + rho1*mu) and E* = E0/mu.  `eigenvalues` are its
    exact Jacobian eigenvalues; `v_critical` is the infusion rate above
    which the CAR-T pressure clears the chemo-resistant clone, and
    `chemo_threshold` is the minimum total chemo kill+conversion rate
    (alpha1 + eps1) needed to clear the chemo-sensitive clones.
    """

    v_rate: float
    e0: float
    c_star: float
    e_star: float
    eigenvalues: tuple[float, float, float, float, float]
    v_critical: float
    chemo_threshold: float
    stable: bool


def eradication_analysis(p: PatientParams, v_rate: float, e0: float) -> EradicationReport:
    """Analyze eradication (tumor-free stability) under constant treatment.

    Requires e0 > 0: without a chemo source the tumor-free state keeps a
    growing sensitive clone and the thresholds below are meaningless.
    """
    if not (e0 > 0):
        raise ValueError("eradication analysis requires a chemo source e0 > 0")
    if v_rate < 0:
        raise ValueError("v_rate must be >= 0")
    denom = e0 * p.alpha3 + p.mu * p.rho1
    c_star = p.mu * v_rate / denom
    e_star = e0 / p.mu
    cart_pressure = p.alpha2 * v_rate * p.mu / denom
    lam1 = -p.mu
    lam2 = -denom / p.mu
    lam3 = p.r1 - (p.alpha1 + p.eps1) * e0 / p.mu
    lam4 = lam3 - cart_pressure
    lam5 = p.r2 - cart_pressure
    eigs = (lam1, lam2, lam3, lam4, lam5)
    v_critical = p.r2 * denom / (p.mu * p.alpha2)
    chemo_threshold = p.r1 * p.mu / e0
    stable = all(lam < 0 for lam in eigs)
    return EradicationReport(
        v_rate=v_rate,
        e0=e0,
        c_star=c_star,
        e_star=e_star,
        eigenvalues=eigs,
        v_critical=v_critical,
        chemo_threshold=chemo_threshold,
        stable=stable,
    )


def first_integrals(y: np.ndarray, p: PatientParams) -> tuple[float, float]:
    """Conserved quantities of the treatment-free tumor subsystem.

    With C = E = 0 the three tumor clones share the same logistic crowding
    factor, so I1 = S/RC and I2 = RE / RC**(r2/r1) are constant along
    trajectories.  Requires RC > 0 (and r1 > 0 for I2).
    """
    _check_state(np.asarray(y, dtype=float))
    s, rc, re_ = float(y[0]), float(y[1]), float(y[2])
    if rc <= 0:
        raise ValueError("first integrals need RC > 0")
    if p.r1 <= 0:
        raise ValueError("first integrals need r1 > 0")
    return s / rc, re_ / rc ** (p.r2 / p.r1)


def nondimensionalize(y: np.ndarray, K: float) -> np.ndarray:
    """Scale cell compartments by the carrying capacity; E is already scaled."""
    y = np.asarray(y, dtype=float)
    _check_state(y)
    out = y.copy()
    out[:4] /= K
    return out


def redimensionalize(x: np.ndarray, K: float) -> np.ndarray:
    """Inverse of `nondimensionalize`."""
    x = np.asarray(x, dtype=float)
    _check_state(x)
    out = x.copy()
    out[:4] *= K
    return out
