"""Adaptive integration of the impulsive treatment system.

Public entry point is `integrate`: it advances one patient from an initial
state through a dose schedule, stopping at the first fatal-burden
crossing, at eradication, or at the time horizon.  Internally the state is
capacity-scaled and handed to the compiled Dormand-Prince 5(4) kernel;
trajectories come back as step records with quartic interpolation
coefficients so `dense_sample` can evaluate the solution anywhere in the
covered span without re-integrating.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from . import _kernel
from .model import (ERADICATION_CELLS, FATAL_TUMOR_CELLS, PatientParams,
                    SystemState)
from .protocol import DoseEvent

__all__ = [
    "IntegratorConfig",
    "IntegrationError",
    "StopKind",
    "StopEvent",
    "Trajectory",
    "integrate",
    "dense_sample",
]


class IntegrationError(RuntimeError):
    """Raised when the adaptive step size collapses."""


class StopKind(Enum):
    FATAL_SIZE = "fatal_size"
    HORIZON = "horizon"
    ERADICATED = "eradicated"


@dataclass(frozen=True)
class StopEvent:
    """Why and where a simulation ended."""

    kind: StopKind
    time: float
    state: SystemState


@dataclass(frozen=True)
class IntegratorConfig:
    """Accuracy and termination settings.

    Tolerances apply to the capacity-scaled state.  event_time_tol bounds
    the bisection window around the fatal-burden crossing time.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_step: float = 1.0
    event_time_tol: float = 1e-3
    horizon: float = 3650.0

    def __post_init__(self) -> None:
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (0 < self.event_time_tol <= 1e-3):
            raise ValueError("event_time_tol must be in (0, 1e-3] days")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")


@dataclass
class Trajectory:
    """Accepted steps of one run, with dense-output coefficients.

    States are stored capacity-scaled; sampling converts back to cells.
    Step i spans [t0[i], t0[i] + h[i]].  A dose time appears as the start
    of the first post-impulse step, so sampling exactly at a dose time
    returns the post-impulse state.
    """

    K: float
    t0: np.ndarray
    h: np.ndarray
    y0: np.ndarray
    q: np.ndarray
    t_final: float
    y_final: np.ndarray

    @property
    def t_start(self) -> float:
        return float(self.t0[0]) if self.t0.size else self.t_final

    def span(self) -> tuple[float, float]:
        return (self.t_start, self.t_final)

    def states(self) -> list[SystemState]:
        """Dimensional states at every accepted step start plus the end."""
        out = [self._dim_state(self.t0[i], self.y0[i]) for i in range(self.t0.size)]
        out.append(self._dim_state(self.t_final, self.y_final))
        return out

    def _dim_state(self, t: float, y_scaled: np.ndarray) -> SystemState:
        y = y_scaled.copy()
        y[:4] *= self.K
        return SystemState.from_array(t, y)


def _pack_params(p: PatientParams, v_rate: float, e0_const: float) -> np.ndarray:
    out = np.empty(_kernel.NPARAMS)
    out[_kernel.P_R1] = p.r1
    out[_kernel.P_R2] = p.r2
    out[_kernel.P_ALPHA1] = p.alpha1
    out[_kernel.P_ALPHA2K] = p.alpha2 * p.K
    out[_kernel.P_ALPHA3] = p.alpha3
    out[_kernel.P_EPS1] = p.eps1
    out[_kernel.P_RHO1] = p.rho1
    out[_kernel.P_RHO2] = p.rho2
    out[_kernel.P_RHO3] = p.rho3
    out[_kernel.P_RHO4] = p.rho4
    out[_kernel.P_G1K] = p.g1 / p.K
    out[_kernel.P_G2K] = p.g2 / p.K
    out[_kernel.P_G3K] = p.g3 / p.K
    out[_kernel.P_MU] = p.mu
    out[_kernel.P_VK] = v_rate / p.K
    out[_kernel.P_E0C] = e0_const
    return out


def _pack_events(events: Sequence[DoseEvent], t_start: float,
                 K: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = len(events)
    ev_t = np.empty(n)
    ev_comp = np.empty(n, dtype=np.int64)
    ev_amt = np.empty(n)
    prev = -np.inf
    for i, ev in enumerate(events):
        if ev.time < t_start:
            raise ValueError(
                f"dose at t={ev.time} precedes the initial time {t_start}")
        if ev.time < prev:
            raise ValueError("dose events must be sorted by time")
        prev = ev.time
        ev_t[i] = ev.time
        if ev.kind == "chemo":
            ev_comp[i] = _kernel.COMP_CHEMO
            ev_amt[i] = ev.amount
        elif ev.kind == "cart":
            ev_comp[i] = _kernel.COMP_CART
            ev_amt[i] = ev.amount / K
        else:
            raise ValueError(f"unknown dose kind {ev.kind!r}")
        if not (np.isfinite(ev.amount) and ev.amount >= 0):
            raise ValueError(f"dose amount must be finite and >= 0, got {ev.amount}")
    return ev_t, ev_comp, ev_amt


_STOP_KINDS = {
    _kernel.STOP_HORIZON: StopKind.HORIZON,
    _kernel.STOP_FATAL: StopKind.FATAL_SIZE,
    _kernel.STOP_ERADICATED: StopKind.ERADICATED,
}


def integrate(initial: SystemState, params: PatientParams,
              events: Sequence[DoseEvent] = (),
              config: IntegratorConfig | None = None,
              record: bool = True,
              constant_treatment: tuple[float, float] | None = None,
              ) -> tuple[Trajectory | None, StopEvent]:
    """Run one patient forward and report how the run ended.

    events are applied as instantaneous jumps (chemo adds to E, CAR-T adds
    amount/K to the scaled C); doses scheduled at or after the horizon are
    never reached.  constant_treatment=(v_rate, e0) switches on the
    continuous-infusion variant.  With record=False only the stop event is
    computed, which is what trial runs use.
    """
    config = config or IntegratorConfig()
    params.validate()
    y = initial.as_array()
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state has non-finite components")
    if np.any(y < 0):
        raise ValueError("initial state components must be >= 0")
    if initial.t >= config.horizon:
        raise ValueError("initial time must precede the horizon")

    v_rate, e0_const = constant_treatment if constant_treatment else (0.0, 0.0)
    if v_rate < 0 or e0_const < 0:
        raise ValueError("constant treatment rates must be >= 0")

    k_cap = params.K
    y_scaled = y.copy()
    y_scaled[:4] /= k_cap
    ev_t, ev_comp, ev_amt = _pack_events(events, initial.t, k_cap)
    p_vec = _pack_params(params, v_rate, e0_const)

    if initial.tumor_total < ERADICATION_CELLS:
        stop = StopEvent(StopKind.ERADICATED, initial.t, initial)
        if record:
            traj = Trajectory(K=k_cap, t0=np.empty(0), h=np.empty(0),
                              y0=np.empty((0, 5)), q=np.empty((0, 5, 4)),
                              t_final=initial.t, y_final=y_scaled)
            return traj, stop
        return None, stop

    status, t_stop, y_stop, rec_t, rec_h, rec_y, rec_q, nrec = _kernel.simulate(
        y_scaled, initial.t, ev_t, ev_comp, ev_amt, p_vec,
        config.rel_tol, config.abs_tol, config.max_step, config.horizon,
        FATAL_TUMOR_CELLS / k_cap, ERADICATION_CELLS / k_cap,
        config.event_time_tol, record,
    )
    if status == _kernel.STOP_UNDERFLOW:
        y_dim = y_stop.copy()
        y_dim[:4] *= k_cap
        raise IntegrationError(
            f"step size underflow at t={t_stop:.6g} days, state "
            f"[S, RC, RE, C, E] = {np.array2string(y_dim, precision=4)}")

    y_dim = y_stop.copy()
    y_dim[:4] *= k_cap
    stop = StopEvent(_STOP_KINDS[status], float(t_stop),
                     SystemState.from_array(t_stop, y_dim))
    if not record:
        return None, stop
    traj = Trajectory(
        K=k_cap,
        t0=rec_t[:nrec].copy(),
        h=rec_h[:nrec].copy(),
        y0=rec_y[:nrec].copy(),
        q=rec_q[:nrec].copy(),
        t_final=float(t_stop),
        y_final=y_stop.copy(),
    )
    return traj, stop


def dense_sample(traj: Trajectory, times: Iterable[float]) -> list[SystemState]:
    """Evaluate a recorded trajectory at arbitrary times within its span.

    Times must lie in [start, final] and be given in ascending order.
    Sampling exactly at a recorded step start (or the final time) returns
    the stored state; anywhere else the quartic interpolant of the
    enclosing step is evaluated.
    """
    t_lo, t_hi = traj.span()
    starts = traj.t0
    out: list[SystemState] = []
    prev = -np.inf
    for t in times:
        t = float(t)
        if t < prev:
            raise ValueError("sample times must be ascending")
        prev = t
        if t < t_lo or t > t_hi:
            raise ValueError(f"sample time {t} outside trajectory span "
                             f"[{t_lo}, {t_hi}]")
        if t == t_hi:
            out.append(traj._dim_state(traj.t_final, traj.y_final))
            continue
        idx = int(np.searchsorted(starts, t, side="right")) - 1
        if idx < 0:
            idx = 0
        if starts[idx] == t:
            out.append(traj._dim_state(starts[idx], traj.y0[idx]))
            continue
        h = traj.h[idx]
        u = (t - starts[idx]) / h
        y = np.empty(5)
        for i in range(5):
            y[i] = _kernel._dense_eval(traj.y0[idx], traj.q[idx], h, u, i)
        out.append(traj._dim_state(t, y))
    return out
