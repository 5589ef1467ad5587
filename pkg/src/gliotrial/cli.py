"""Command-line interface.

Commands: cohort, simulate, trial, sweep, analyze, check-eradication.
Every run that writes files drops a manifest.json beside them with the
fully resolved settings and the exact argv, so re-running the same
command line reproduces every CSV byte for byte.

Settings resolve in three layers: packaged defaults < --config YAML file
< explicit command-line flags.  Exit codes: 0 success, 1 usage or
configuration error, 2 numerical failure during integration.

File formats (all CSV, headers included):
  outcomes:  patient_id,protocol,survival_days,censored
  km curve:  time_days,survival,at_risk,events,censored
  cohort:    patient_id,seed,<all model parameters>,T0
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from ._defaults import deep_merge, load_defaults
from .cohort import (Cohort, CohortConfig, SAMPLED_NAMES, cohort_from_csv,
                     cohort_to_csv, median_patient, sample_cohort)
from .integrator import IntegrationError, IntegratorConfig, dense_sample, integrate
from .model import PatientParams, eradication_analysis
from .protocol import DoseConfig, ProtocolError, expand, parse
from .stats import (correlation_report, kaplan_meier, ks_two_sample, log_rank,
                    median_shift, pearson, quantile_summary)
from .trial import equivalence_from_days, run_trial
from .trial import (sweep_cart_dose, sweep_cart_gap, sweep_cart_split,
                    sweep_chemo_cycles, sweep_rho4_max)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we want exit 1
        raise UsageError(message)


def _fmt(x: float) -> str:
    """Shortest exact decimal form, stable across runs."""
    return repr(float(x))


def _build_parser() -> _Parser:
    parser = _Parser(prog="gliotrial", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, patients=True):
        p.add_argument("--config", type=Path, default=None,
                       help="YAML settings file layered over the defaults")
        p.add_argument("--seed", type=int, default=None)
        if patients:
            p.add_argument("--patients", type=int, default=None)
        p.add_argument("--r2-ratio", type=float, default=None,
                       choices=[0.5, 1.0, 2.0],
                       help="chemo-resistant growth rate as a multiple of r1")
        p.add_argument("--rho4-max", type=float, default=None)
        p.add_argument("--total-cart", type=str, default=None,
                       help="total CAR-T cells, split over a protocol's "
                            "injections (comma list makes one arm per value)")
        p.add_argument("--injections", type=int, default=None,
                       help="injection count for sweeps over '<n>C' protocols")
        p.add_argument("--gap", type=float, default=None,
                       help="days between CAR-T injections")
        p.add_argument("--cycles", type=int, default=None,
                       help="chemo cycle count for generated '<n>T' protocols")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (created if missing)")

    p = sub.add_parser("cohort", help="sample a virtual cohort to CSV")
    add_common(p)

    p = sub.add_parser("simulate", help="simulate one patient, daily time series")
    add_common(p, patients=False)
    p.add_argument("--protocol", default="NT")
    p.add_argument("--patient", default="mvp",
                   help="'mvp' or a row of --params-csv via --patient-id")
    p.add_argument("--params-csv", type=Path, default=None)
    p.add_argument("--patient-id", type=int, default=0)

    p = sub.add_parser("trial", help="run cohort trials for protocols")
    add_common(p)
    p.add_argument("--protocols", required=True,
                   help="comma-separated protocol names, e.g. NT,10T,5T2C5T")
    p.add_argument("--control", default=None,
                   help="arm label used as the gain baseline (default: NT "
                        "when present, else the first arm)")

    p = sub.add_parser("sweep", help="median survival over a parameter grid")
    add_common(p)
    p.add_argument("--kind", required=True,
                   choices=["chemo-cycles", "cart-dose", "cart-split",
                            "cart-gap", "rho4-max"])
    p.add_argument("--grid", required=True,
                   help="comma-separated grid values")

    p = sub.add_parser("analyze", help="statistics over saved outcome files")
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--mode", required=True,
                   choices=["km", "logrank", "correlate", "compare",
                            "equivalence", "median-shift"])
    p.add_argument("--outcomes", type=Path, nargs="+", default=[])
    p.add_argument("--cohort", type=Path, default=None)
    p.add_argument("--baseline", type=Path, default=None,
                   help="correlate the ratio to this arm instead of raw days")
    p.add_argument("--margin", type=float, default=0.1)
    p.add_argument("--subgroup-ids", type=Path, default=None,
                   help="file with one patient_id per line")
    p.add_argument("--ticks", type=float, default=100.0,
                   help="risk-table tick spacing in days for --mode km")
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("check-eradication",
                       help="tumor-free stability under constant treatment")
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--v-grid", required=True,
                   help="comma-separated constant infusion rates (cells/day)")
    p.add_argument("--e0", type=float, default=1.0)
    p.add_argument("--params-csv", type=Path, default=None)
    p.add_argument("--patient-id", type=int, default=0)
    p.add_argument("--simulate", action="store_true",
                   help="also integrate each grid point to the horizon")
    p.add_argument("--out", type=Path, default=None)

    return parser


def _load_settings(args) -> dict:
    settings = load_defaults()
    cfg_path = getattr(args, "config", None)
    if cfg_path is not None:
        with open(cfg_path) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise UsageError(f"config {cfg_path} must be a YAML mapping")
        settings = deep_merge(settings, user)
    return settings


def _cohort_config(args, settings) -> CohortConfig:
    c = settings["cohort"]
    return CohortConfig(
        n_patients=(args.patients if getattr(args, "patients", None) is not None
                    else int(c["n_patients"])),
        seed=args.seed if args.seed is not None else int(c["seed"]),
        r2_ratio=(args.r2_ratio if args.r2_ratio is not None
                  else float(c["r2_ratio"])),
        rho4_max=(args.rho4_max if args.rho4_max is not None
                  else float(c["rho4_max"])),
        t0_range=tuple(float(v) for v in c["t0_range"]),
        t0_log=bool(c["t0_log"]),
        delta2_log=bool(c["delta2_log"]),
    )


def _dose_config(args, settings) -> DoseConfig:
    d = settings["dose"]
    return DoseConfig(
        e0=float(d["e0"]),
        cycle_days=float(d["cycle_days"]),
        dosing_days=int(d["dosing_days"]),
        cart_gap=(args.gap if getattr(args, "gap", None) is not None
                  else float(d["cart_gap"])),
    )


def _integrator_config(settings) -> IntegratorConfig:
    i = settings["integrator"]
    return IntegratorConfig(
        rel_tol=float(i["rel_tol"]),
        abs_tol=float(i["abs_tol"]),
        max_step=float(i["max_step"]),
        event_time_tol=float(i["event_time_tol"]),
        horizon=float(i["horizon"]),
    )


def _totals(args, settings) -> list[float]:
    raw = getattr(args, "total_cart", None)
    if raw is None:
        return [float(settings["dose"]["total_cart"])]
    try:
        return [float(v) for v in str(raw).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad --total-cart value {raw!r}") from None


def _out_dir(args) -> Path | None:
    out = getattr(args, "out", None)
    if out is None:
        return None
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, args, settings, extra: dict | None = None) -> None:
    manifest = {
        "package_version": __version__,
        "command": args.command,
        "argv": sys.argv[1:] if sys.argv[0].endswith("gliotrial") else None,
        "resolved": settings,
    }
    if manifest["argv"] is None:
        manifest["argv"] = getattr(args, "_argv", [])
    if extra:
        manifest.update(extra)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _write_outcomes(path: Path, result) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patient_id", "protocol", "survival_days", "censored"])
        for o in result.outcomes:
            writer.writerow([o.patient_id, result.protocol_name,
                             _fmt(o.survival_days), int(o.censored)])


def _read_outcomes(path: Path) -> tuple[str, np.ndarray, np.ndarray]:
    days, cens, name = [], [], None
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"patient_id", "protocol", "survival_days", "censored"}
        missing = need - set(reader.fieldnames or ())
        if missing:
            raise UsageError(f"{path}: missing column(s) {sorted(missing)}")
        for row in reader:
            name = row["protocol"]
            days.append(float(row["survival_days"]))
            cens.append(bool(int(row["censored"])))
    if not days:
        raise UsageError(f"{path}: no outcome rows")
    return name or path.stem, np.array(days), np.array(cens)


def _write_km(path: Path, days: np.ndarray, cens: np.ndarray) -> None:
    curve = kaplan_meier(days, cens)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_days", "survival", "at_risk", "events", "censored"])
        for j in range(curve.times.size):
            writer.writerow([_fmt(curve.times[j]), _fmt(curve.survival[j]),
                             int(curve.n_at_risk[j]), int(curve.n_events[j]),
                             int(curve.n_censored[j])])


def _arm_label(protocol: str, total: float, needs_cart: bool) -> str:
    return f"{protocol}_2v{total:g}" if needs_cart else protocol


def cmd_cohort(args) -> int:
    settings = _load_settings(args)
    cfg = _cohort_config(args, settings)
    cohort = sample_cohort(cfg)
    out = _out_dir(args) or Path(".")
    cohort_to_csv(cohort, out / "cohort.csv")
    _write_manifest(out, args, settings)
    print(f"wrote {out / 'cohort.csv'} ({len(cohort)} patients, seed {cfg.seed})")
    return 0


def _pick_patient(args, settings) -> PatientParams:
    if args.params_csv is not None:
        patients = cohort_from_csv(args.params_csv).patients
        if not (0 <= args.patient_id < len(patients)):
            raise UsageError(f"--patient-id {args.patient_id} outside "
                             f"0..{len(patients) - 1}")
        return patients[args.patient_id]
    if args.patient != "mvp":
        raise UsageError("--patient must be 'mvp' unless --params-csv is given")
    return median_patient(_cohort_config_for_mvp(args, settings))


def _cohort_config_for_mvp(args, settings) -> CohortConfig:
    c = settings["cohort"]
    return CohortConfig(
        n_patients=1,
        seed=args.seed if args.seed is not None else int(c["seed"]),
        r2_ratio=(args.r2_ratio if args.r2_ratio is not None
                  else float(c["r2_ratio"])),
        rho4_max=(args.rho4_max if args.rho4_max is not None
                  else float(c["rho4_max"])),
        t0_range=tuple(float(v) for v in c["t0_range"]),
        t0_log=bool(c["t0_log"]),
        delta2_log=bool(c["delta2_log"]),
    )


def cmd_simulate(args) -> int:
    settings = _load_settings(args)
    patient = _pick_patient(args, settings)
    spec = parse(args.protocol)
    dose = _dose_config(args, settings)
    total = _totals(args, settings)[0]
    if spec.n_injections > 0:
        dose = dose.with_total_cart(total, spec.n_injections)
    events = expand(spec, dose)
    integ = _integrator_config(settings)
    traj, stop = integrate(patient.initial_state(), patient, events, integ)

    days = np.arange(math.floor(traj.t_start), stop.time, 1.0)
    times = list(days[days >= traj.t_start]) + [stop.time]
    states = dense_sample(traj, times)
    out = _out_dir(args) or Path(".")
    with open(out / "trajectory.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_days", "S", "RC", "RE", "C", "E"])
        for st in states:
            writer.writerow([_fmt(st.t), _fmt(st.S), _fmt(st.RC),
                             _fmt(st.RE), _fmt(st.C), _fmt(st.E)])
    with open(out / "doses.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_days", "kind", "amount"])
        for ev in events:
            if ev.time < stop.time:
                writer.writerow([_fmt(ev.time), ev.kind, _fmt(ev.amount)])
    _write_manifest(out, args, settings,
                    {"stop": {"kind": stop.kind.value, "time": stop.time}})
    print(f"{args.protocol}: {stop.kind.value} at day {stop.time:.2f} "
          f"(tumor {stop.state.tumor_total:.4g} cells)")
    return 0


def cmd_trial(args) -> int:
    settings = _load_settings(args)
    cohort_cfg = _cohort_config(args, settings)
    cohort = sample_cohort(cohort_cfg)
    base_dose = _dose_config(args, settings)
    integ = _integrator_config(settings)
    protocols = [p.strip() for p in args.protocols.split(",") if p.strip()]
    if not protocols:
        raise UsageError("--protocols is empty")
    totals = _totals(args, settings)

    out = _out_dir(args) or Path(".")
    cohort_to_csv(cohort, out / "cohort.csv")

    arms: dict[str, dict] = {}
    for name in protocols:
        spec = parse(name)
        arm_totals = totals if spec.n_injections > 0 else [totals[0]]
        for total in arm_totals:
            dose = (base_dose.with_total_cart(total, spec.n_injections)
                    if spec.n_injections > 0 else base_dose)
            result = run_trial(cohort, spec, dose=dose, integrator=integ)
            label = _arm_label(result.protocol_name, total, spec.n_injections > 0)
            _write_outcomes(out / f"outcomes_{label}.csv", result)
            _write_km(out / f"km_{label}.csv", result.survival_days,
                      result.censored)
            arms[label] = {
                "protocol": result.protocol_name,
                "total_cart": total if spec.n_injections > 0 else None,
                "median_days": result.median_survival(),
                "n_censored": result.n_censored,
            }
            print(f"{label}: median {arms[label]['median_days']:.1f} days, "
                  f"{arms[label]['n_censored']} censored")

    control = args.control
    if control is None:
        control = "NT" if "NT" in arms else next(iter(arms))
    if control not in arms:
        raise UsageError(f"--control {control!r} is not one of the arms "
                         f"{sorted(arms)}")
    base_median = arms[control]["median_days"]
    for label, info in arms.items():
        info["gain_days_vs_control"] = info["median_days"] - base_median
        info["gain_pct_vs_control"] = (100.0 * (info["median_days"] - base_median)
                                       / base_median)
    summary = {"control": control, "arms": arms}
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, args, settings)
    return 0


def cmd_sweep(args) -> int:
    settings = _load_settings(args)
    cohort_cfg = _cohort_config(args, settings)
    dose = _dose_config(args, settings)
    integ = _integrator_config(settings)
    grid = [float(v) for v in args.grid.split(",") if v.strip()]
    if not grid:
        raise UsageError("--grid is empty")
    total = _totals(args, settings)[0]
    n_inj = args.injections if args.injections is not None else 2

    if args.kind == "chemo-cycles":
        points = sweep_chemo_cycles(cohort_cfg, [int(v) for v in grid],
                                    dose=dose, integrator=integ)
    elif args.kind == "cart-dose":
        points = sweep_cart_dose(cohort_cfg, grid, n_injections=n_inj,
                                 dose=dose, integrator=integ)
    elif args.kind == "cart-split":
        points = sweep_cart_split(cohort_cfg, [int(v) for v in grid], total,
                                  dose=dose, integrator=integ)
    elif args.kind == "cart-gap":
        points = sweep_cart_gap(cohort_cfg, grid, total, n_injections=n_inj,
                                dose=dose, integrator=integ)
    else:
        protocol = (f"{args.cycles}T" if args.cycles is not None
                    else f"{n_inj}C")
        points = sweep_rho4_max(cohort_cfg, grid, protocol=protocol,
                                total=total, dose=dose, integrator=integ)

    out = _out_dir(args) or Path(".")
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "median_days", "n_censored"])
        for pt in points:
            writer.writerow([_fmt(pt.value), _fmt(pt.median_days),
                             pt.n_censored])
    _write_manifest(out, args, settings, {"kind": args.kind})
    for pt in points:
        print(f"{args.kind} {pt.value:g}: median {pt.median_days:.1f} days")
    return 0


def _params_dict(cohort: Cohort) -> dict[str, np.ndarray]:
    return {name: cohort.param_array(name) for name in SAMPLED_NAMES}


def cmd_analyze(args) -> int:
    out = _out_dir(args)

    if args.mode == "km":
        if len(args.outcomes) != 1:
            raise UsageError("--mode km needs exactly one --outcomes file")
        name, days, cens = _read_outcomes(args.outcomes[0])
        curve = kaplan_meier(days, cens)
        med = curve.median()
        print(f"{name}: n={days.size}, events={int(np.sum(~cens))}, "
              f"KM median={'not reached' if med is None else f'{med:.1f}'}")
        ticks = np.arange(0.0, days.max() + args.ticks, args.ticks)
        for tick, n in curve.at_risk_table(ticks):
            print(f"  day {tick:6.0f}: {n} at risk")
        if out:
            _write_km(out / f"km_{name}.csv", days, cens)
        return 0

    if args.mode == "logrank":
        if len(args.outcomes) != 2:
            raise UsageError("--mode logrank needs two --outcomes files")
        name_a, days_a, cens_a = _read_outcomes(args.outcomes[0])
        name_b, days_b, cens_b = _read_outcomes(args.outcomes[1])
        chi2, p = log_rank(days_a, cens_a, days_b, cens_b)
        print(f"log-rank {name_a} vs {name_b}: chi2={chi2:.4g}, p={p:.4g}")
        if out:
            with open(out / "logrank.json", "w") as fh:
                json.dump({"a": name_a, "b": name_b, "chi2": chi2, "p": p},
                          fh, indent=2)
                fh.write("\n")
        return 0

    if args.mode == "correlate":
        if len(args.outcomes) != 1 or args.cohort is None:
            raise UsageError("--mode correlate needs one --outcomes file "
                             "and --cohort")
        name, days, _ = _read_outcomes(args.outcomes[0])
        cohort = cohort_from_csv(args.cohort)
        if len(cohort) != days.size:
            raise UsageError("cohort and outcomes sizes differ")
        target = days
        target_name = name
        if args.baseline is not None:
            bname, bdays, _ = _read_outcomes(args.baseline)
            if bdays.size != days.size:
                raise UsageError("baseline and outcomes sizes differ")
            target = days / bdays
            target_name = f"{name}/{bname}"
        report = correlation_report(_params_dict(cohort), target,
                                    target_name=target_name)
        print(f"correlations with {target_name} "
              f"(|r| >= {report.min_abs_r}, p < {report.alpha}):")
        for row in report.rows:
            print(f"  {row.parameter:8s} r={row.r:+.3f}  p={row.p_value:.3g}")
        if out:
            selected = {row.parameter for row in report.rows}
            with open(out / "correlations.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["parameter", "r", "p_value", "selected"])
                for row in report.all_rows:
                    writer.writerow([row.parameter, _fmt(row.r),
                                     _fmt(row.p_value),
                                     int(row.parameter in selected)])
        return 0

    if args.mode == "compare":
        if len(args.outcomes) != 2:
            raise UsageError("--mode compare needs two --outcomes files")
        name_a, days_a, _ = _read_outcomes(args.outcomes[0])
        name_b, days_b, _ = _read_outcomes(args.outcomes[1])
        if days_a.size != days_b.size:
            raise UsageError("outcome files have different cohort sizes")
        r, p = pearson(days_a, days_b)
        qa, qb = quantile_summary(days_a), quantile_summary(days_b)
        print(f"{name_a} vs {name_b}: pearson r={r:.3f} (p={p:.3g})")
        print(f"  {name_a}: median {qa.median:.1f} [{qa.q25:.1f}, {qa.q75:.1f}]")
        print(f"  {name_b}: median {qb.median:.1f} [{qb.q25:.1f}, {qb.q75:.1f}]")
        if out:
            with open(out / "compare.json", "w") as fh:
                json.dump({"a": name_a, "b": name_b, "pearson_r": r, "p": p,
                           "median_a": qa.median, "median_b": qb.median},
                          fh, indent=2)
                fh.write("\n")
        return 0

    if args.mode == "equivalence":
        if len(args.outcomes) < 2:
            raise UsageError("--mode equivalence needs two or more "
                             "--outcomes files")
        names, mats = [], []
        for path in args.outcomes:
            name, days, _ = _read_outcomes(path)
            names.append(name)
            mats.append(days)
        sizes = {m.size for m in mats}
        if len(sizes) != 1:
            raise UsageError("outcome files have different cohort sizes")
        report = equivalence_from_days(names, np.stack(mats), args.margin)
        print(f"equivalence at {100 * args.margin:.0f}% margin over "
              f"{len(names)} protocols:")
        print(f"  all suitable for {report.n_suitable_for_all} of "
              f"{len(report.suitable)} patients "
              f"({100 * report.fraction_suitable_for_all:.1f}%)")
        for size in range(1, len(names) + 1):
            n = int(np.count_nonzero(report.set_sizes == size))
            print(f"  set size {size}: {n} patients")
        if out:
            with open(out / "equivalence.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["patient_id", "set_size",
                                 "suitable_protocols"])
                for i, prots in enumerate(report.suitable):
                    writer.writerow([i, int(report.set_sizes[i]),
                                     "|".join(prots)])
            with open(out / "equivalence.json", "w") as fh:
                json.dump({"margin": args.margin, "protocols": names,
                           "n_patients": len(report.suitable),
                           "n_suitable_for_all": report.n_suitable_for_all,
                           "fraction_suitable_for_all":
                               report.fraction_suitable_for_all},
                          fh, indent=2)
                fh.write("\n")
        return 0

    if args.mode == "median-shift":
        if args.cohort is None or args.subgroup_ids is None:
            raise UsageError("--mode median-shift needs --cohort and "
                             "--subgroup-ids")
        cohort = cohort_from_csv(args.cohort)
        ids = [int(line) for line in
               args.subgroup_ids.read_text().split() if line.strip()]
        shifts = median_shift(_params_dict(cohort), np.array(ids, dtype=int))
        for nm, shift in sorted(shifts.items(), key=lambda kv: -abs(kv[1])):
            print(f"  {nm:8s} {shift:+.1f}%")
        if out:
            with open(out / "median_shift.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["parameter", "percent_shift"])
                for nm, shift in sorted(shifts.items(),
                                        key=lambda kv: -abs(kv[1])):
                    writer.writerow([nm, _fmt(shift)])
        return 0

    raise UsageError(f"unknown analyze mode {args.mode!r}")


def cmd_check_eradication(args) -> int:
    settings = _load_settings(args)
    if args.params_csv is not None:
        patients = cohort_from_csv(args.params_csv).patients
        if not (0 <= args.patient_id < len(patients)):
            raise UsageError(f"--patient-id outside 0..{len(patients) - 1}")
        patient = patients[args.patient_id]
    else:
        patient = median_patient()
    grid = [float(v) for v in args.v_grid.split(",") if v.strip()]
    if not grid:
        raise UsageError("--v-grid is empty")

    integ = _integrator_config(settings)
    rows = []
    for v in grid:
        rep = eradication_analysis(patient, v_rate=v, e0=args.e0)
        row = {
            "v_rate": v,
            "v_critical": rep.v_critical,
            "chemo_threshold": rep.chemo_threshold,
            "eigenvalues": list(rep.eigenvalues),
            "stable": rep.stable,
        }
        line = (f"V={v:.4g}: stable={rep.stable} "
                f"(v_critical={rep.v_critical:.4g}, "
                f"chemo threshold={rep.chemo_threshold:.4g})")
        if args.simulate:
            _, stop = integrate(patient.initial_state(), patient, (),
                                integ, record=False,
                                constant_treatment=(v, args.e0))
            row["outcome"] = {"kind": stop.kind.value, "time": stop.time,
                              "tumor_cells": stop.state.tumor_total}
            line += (f" -> {stop.kind.value} at day {stop.time:.1f} "
                     f"(tumor {stop.state.tumor_total:.3g})")
        rows.append(row)
        print(line)
    out = _out_dir(args)
    if out:
        with open(out / "eradication.json", "w") as fh:
            json.dump({"e0": args.e0, "rows": rows}, fh, indent=2)
            fh.write("\n")
        _write_manifest(out, args, settings)
    return 0


_COMMANDS = {
    "cohort": cmd_cohort,
    "simulate": cmd_simulate,
    "trial": cmd_trial,
    "sweep": cmd_sweep,
    "analyze": cmd_analyze,
    "check-eradication": cmd_check_eradication,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        args._argv = argv
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ProtocolError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except IntegrationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
