"""Survival and association statistics for trial outcomes.

Everything here is self-contained numpy/stdlib: Kaplan-Meier with right
censoring, the two-sample log-rank test, Pearson correlation with a
Student-t p-value (regularized incomplete beta evaluated by continued
fraction), a two-sample Kolmogorov-Smirnov test for distribution checks,
and small summaries used by the reports.  p-values below 1e-300 are
reported as 0.0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "SurvivalCurve",
    "kaplan_meier",
    "log_rank",
    "pearson",
    "student_t_cdf",
    "ks_two_sample",
    "QuantileSummary",
    "quantile_summary",
    "median_shift",
    "CorrelationReport",
    "correlation_report",
]

_P_FLOOR = 1e-300


def _clean_inputs(durations, censored) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(durations, dtype=float)
    c = np.asarray(censored, dtype=bool)
    if t.ndim != 1 or t.shape != c.shape:
        raise ValueError("durations and censored must be 1-d and equal length")
    if t.size == 0:
        raise ValueError("need at least one observation")
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        raise ValueError("durations must be finite and >= 0")
    return t, c


@dataclass
class SurvivalCurve:
    """Product-limit estimate over the unique observed times.

    Row j: at time[j], n_at_risk[j] patients were still under observation,
    n_events[j] died and n_censored[j] left the risk set; survival[j] is
    the estimate just after time[j].  Censored patients stay at risk for
    deaths recorded at the same instant.
    """

    times: np.ndarray
    survival: np.ndarray
    n_at_risk: np.ndarray
    n_events: np.ndarray
    n_censored: np.ndarray

    def probability_at(self, t: float) -> float:
        """S(t): right-continuous step evaluation (1 before the first time)."""
        idx = np.searchsorted(self.times, t, side="right") - 1
        return 1.0 if idx < 0 else float(self.survival[idx])

    def median(self) -> float | None:
        """First time the curve reaches 0.5, or None if it never does."""
        below = np.nonzero(self.survival <= 0.5)[0]
        if below.size == 0:
            return None
        return float(self.times[below[0]])

    def at_risk_table(self, ticks: Sequence[float]) -> list[tuple[float, int]]:
        """Number still at risk at each requested tick.

        Exact for any tick: nobody leaves the risk set strictly between
        recorded times, so the count at a tick equals the count at the
        next recorded time (or zero past the last one).
        """
        out = []
        for tick in ticks:
            idx = int(np.searchsorted(self.times, tick, side="left"))
            n = 0 if idx >= self.times.size else int(self.n_at_risk[idx])
            out.append((float(tick), n))
        return out


def kaplan_meier(durations, censored) -> SurvivalCurve:
    """Kaplan-Meier estimate from durations and censoring flags."""
    t, c = _clean_inputs(durations, censored)
    order = np.argsort(t, kind="stable")
    t = t[order]
    c = c[order]
    times = np.unique(t)
    n = t.size
    n_at_risk = np.empty(times.size, dtype=int)
    n_events = np.empty(times.size, dtype=int)
    n_cens = np.empty(times.size, dtype=int)
    surv = np.empty(times.size)
    s = 1.0
    for j, tj in enumerate(times):
        at_risk = n - np.searchsorted(t, tj, side="left")
        mask = t == tj
        d = int(np.count_nonzero(mask & ~c))
        q = int(np.count_nonzero(mask & c))
        if d > 0:
            s *= 1.0 - d / at_risk
        n_at_risk[j] = at_risk
        n_events[j] = d
        n_cens[j] = q
        surv[j] = s
    return SurvivalCurve(times=times, survival=surv, n_at_risk=n_at_risk,
                         n_events=n_events, n_censored=n_cens)


def log_rank(durations_a, censored_a, durations_b, censored_b) -> tuple[float, float]:
    """Two-sample log-rank test; returns (chi-square statistic, p-value)."""
    ta, ca = _clean_inputs(durations_a, censored_a)
    tb, cb = _clean_inputs(durations_b, censored_b)
    event_times = np.unique(np.concatenate([ta[~ca], tb[~cb]]))
    o_minus_e = 0.0
    var = 0.0
    for tj in event_times:
        n1 = int(np.sum(ta >= tj))
        n2 = int(np.sum(tb >= tj))
        nj = n1 + n2
        if nj < 2:
            continue
        d1 = int(np.sum((ta == tj) & ~ca))
        d2 = int(np.sum((tb == tj) & ~cb))
        dj = d1 + d2
        if dj == 0:
            continue
        e1 = dj * n1 / nj
        o_minus_e += d1 - e1
        var += dj * (n1 / nj) * (n2 / nj) * (nj - dj) / (nj - 1)
    if var <= 0:
        return 0.0, 1.0
    chi2 = o_minus_e * o_minus_e / var
    p = math.erfc(math.sqrt(chi2 / 2.0))
    return float(chi2), 0.0 if p < _P_FLOOR else float(p)


def _betacf(a: float, b: float, x: float) -> float:
    # Continued fraction for the incomplete beta (modified Lentz).
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def _betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
             + a * math.log(x) + b * math.log1p(-x))
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def student_t_cdf(t: float, df: float) -> float:
    """CDF of Student's t distribution with df degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if t == 0.0:
        return 0.5
    tail = 0.5 * _betainc_reg(df / 2.0, 0.5, df / (df + t * t))
    return tail if t < 0 else 1.0 - tail


def pearson(x, y) -> tuple[float, float]:
    """Pearson correlation and two-sided p-value under the t distribution."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    n = x.size
    if n < 3:
        raise ValueError("need at least 3 points for a p-value")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("inputs must be finite")
    xd = x - x.mean()
    yd = y - y.mean()
    sx = float(np.sqrt(np.sum(xd * xd)))
    sy = float(np.sqrt(np.sum(yd * yd)))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("zero variance input")
    r = float(np.dot(xd, yd) / (sx * sy))
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    df = n - 2
    t = r * math.sqrt(df / (1.0 - r * r))
    p = _betainc_reg(df / 2.0, 0.5, df / (df + t * t))
    return r, 0.0 if p < _P_FLOOR else float(p)


def ks_two_sample(x, y) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    n, m = x.size, y.size
    if n == 0 or m == 0:
        raise ValueError("both samples must be nonempty")
    grid = np.concatenate([x, y])
    cdf_x = np.searchsorted(x, grid, side="right") / n
    cdf_y = np.searchsorted(y, grid, side="right") / m
    d = float(np.max(np.abs(cdf_x - cdf_y)))
    ne = n * m / (n + m)
    lam = (math.sqrt(ne) + 0.12 + 0.11 / math.sqrt(ne)) * d
    p = 0.0
    prev_term = 0.0
    for j in range(1, 101):
        term = 2.0 * (-1.0) ** (j - 1) * math.exp(-2.0 * j * j * lam * lam)
        p += term
        if abs(term) <= 1e-12 or abs(term) <= 1e-8 * prev_term:
            break
        prev_term = abs(term)
    else:
        # The series only fails to converge for tiny lam, where the
        # distance carries no evidence of a difference.
        p = 1.0
    p = min(max(p, 0.0), 1.0)
    return d, p


@dataclass(frozen=True)
class QuantileSummary:
    minimum: float
    q25: float
    median: float
    q75: float
    maximum: float


def quantile_summary(values) -> QuantileSummary:
    """Five-number summary with linearly interpolated quartiles."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("need at least one value")
    if not np.all(np.isfinite(v)):
        raise ValueError("values must be finite")
    q25, q50, q75 = np.percentile(v, [25, 50, 75])
    return QuantileSummary(minimum=float(v.min()), q25=float(q25),
                           median=float(q50), q75=float(q75),
                           maximum=float(v.max()))


def median_shift(population: dict[str, np.ndarray],
                 subgroup_idx) -> dict[str, float]:
    """Percent shift of each parameter's subgroup median off the population.

    population maps parameter name to the per-patient value array; the
    subgroup is given by indices (or a boolean mask) into those arrays.
    """
    idx = np.asarray(subgroup_idx)
    if idx.size == 0:
        raise ValueError("subgroup is empty")
    shifts: dict[str, float] = {}
    for name, values in population.items():
        values = np.asarray(values, dtype=float)
        sub = values[idx]
        if sub.size == 0:
            raise ValueError("subgroup is empty")
        pop_med = float(np.median(values))
        if pop_med == 0.0:
            raise ValueError(f"population median of {name} is zero")
        shifts[name] = 100.0 * (float(np.median(sub)) - pop_med) / pop_med
    return shifts


@dataclass(frozen=True)
class CorrelationRow:
    parameter: str
    r: float
    p_value: float


@dataclass
class CorrelationReport:
    """Parameter-outcome correlations, strongest first.

    rows keeps only associations with |r| >= min_abs_r and p < alpha;
    all_rows keeps every tested parameter for reference.
    """

    target: str
    min_abs_r: float
    alpha: float
    rows: list[CorrelationRow]
    all_rows: list[CorrelationRow]

    def r_of(self, parameter: str) -> float:
        for row in self.all_rows:
            if row.parameter == parameter:
                return row.r
        raise KeyError(parameter)


def correlation_report(params: dict[str, np.ndarray], target_values,
                       target_name: str = "survival",
                       min_abs_r: float = 0.1,
                       alpha: float = 0.05) -> CorrelationReport:
    """Correlate each varying parameter with a per-patient outcome.

    Parameters with zero variance across the cohort are skipped (their
    correlation is undefined), matching how fixed model constants should
    never show up in a sensitivity ranking.
    """
    y = np.asarray(target_values, dtype=float)
    all_rows: list[CorrelationRow] = []
    for name, values in params.items():
        v = np.asarray(values, dtype=float)
        if v.shape != y.shape:
            raise ValueError(f"parameter {name!r} length mismatch")
        if np.ptp(v) == 0.0:
            continue
        r, p = pearson(v, y)
        all_rows.append(CorrelationRow(parameter=name, r=r, p_value=p))
    all_rows.sort(key=lambda row: abs(row.r), reverse=True)
    rows = [row for row in all_rows
            if abs(row.r) >= min_abs_r and row.p_value < alpha]
    return CorrelationReport(target=target_name, min_abs_r=min_abs_r,
                             alpha=alpha, rows=rows, all_rows=all_rows)
