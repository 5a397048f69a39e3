"""Command-line interface: simulate, analyze, fit, calibrate, oracle, report."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import SimConfig, emit_config, load_config, setting_file_tag
from .engine import Campaign, predicted_rate, run_setting, simulated_rate
from .estimation import (
    FidelityReport,
    afterpulse_correct,
    analyze_tables,
    fit_scaling,
    phase_calibration,
)
from .exceptions import ConfigError, DataError, GHZSimError, InvalidArgumentError, NoSignalError, UndefinedValueError
from .measurement import CoincidenceTable, make_setting, parse_setting_label
from .oracle import MAX_M, exact_distribution, exact_fidelity
from .phase import beta_phi

log = logging.getLogger("superatom_ghz")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from None


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _config_from_args(args) -> SimConfig:
    over = {
        "m": args.m,
        "trajectories": args.trajectories,
        "master_seed": args.seed,
        "mode": args.mode,
    }
    if getattr(args, "setting", None):
        over["settings"] = tuple(args.setting)
    return load_config(args.config, **over)


def read_table(path: str | os.PathLike) -> CoincidenceTable:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    try:
        if str(path).endswith(".json"):
            return CoincidenceTable.from_json(text)
        return CoincidenceTable.from_csv(text)
    except (KeyError, ValueError) as exc:
        if isinstance(exc, GHZSimError):
            raise
        raise DataError(f"{path}: {exc}") from None


def run_simulate(cfg: SimConfig, out_dir: Path, fmt: str = "csv", threads: int = 1) -> dict:
    """Write one table per setting plus ``rates.json``; returns the rate summary."""
    campaign = Campaign(cfg.m, cfg.params, cfg.phase, cfg.master_seed, cfg.mode, cfg.phi, threads)
    tables = []
    for setting in cfg.measurement_settings():
        table = run_setting(campaign, setting, cfg.trajectories)
        tables.append(table)
        name = f"table_m{cfg.m}_{setting_file_tag(setting)}.{fmt}"
        _write(out_dir / name, table.to_json() if fmt == "json" else table.to_csv())
        log.info("wrote %s (%d coincidences)", name, table.total)
    total = sum(t.total for t in tables)
    cycles = sum(t.total_cycles for t in tables)
    summary = {
        "m": cfg.m,
        "mode": cfg.mode,
        "efficiency_per_photon": cfg.params.efficiency,
        "cycle_rate_hz": cfg.cycle_rate,
        "predicted_per_hour": predicted_rate(cfg.m, cfg.params, cfg.cycle_rate),
        "simulated_per_hour": cfg.cycle_rate * 3600.0 * total / cycles if cycles else 0.0,
        "coincidences": {setting_file_tag(t.setting): t.total for t in tables},
        "trajectories_per_setting": cfg.trajectories,
    }
    _write(out_dir / "rates.json", _dump(summary))
    _write(out_dir / "config.ini", emit_config(cfg))
    return summary


def run_analyze(paths: Sequence[str], out_dir: Path | None = None, p_afterpulse: float = 0.0) -> FidelityReport:
    tables = [read_table(p) for p in paths]
    if p_afterpulse > 0:
        tables = [afterpulse_correct(t, p_afterpulse) for t in tables]
    report = analyze_tables(tables)
    report.metadata["sources"] = [Path(p).name for p in paths]
    if p_afterpulse > 0:
        report.metadata["afterpulse_corrected"] = p_afterpulse
    if out_dir is not None:
        _write(out_dir / f"report_m{report.m}.json", report.to_json())
        _write(out_dir / f"report_m{report.m}.txt", report.to_text())
    return report


def _read_report(path: str) -> FidelityReport:
    try:
        return FidelityReport.from_json(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: {exc}") from None


def run_fit(paths: Sequence[str], cfg: SimConfig, out_dir: Path | None = None):
    reports = [_read_report(p) for p in paths]
    ms = [r.m for r in reports]
    if len(set(ms)) < 2:
        raise DataError("fit needs reports for at least two different m")
    fe = {r.m: r.F_e.value for r in reports}
    fs = {r.m: r.F_s.value for r in reports}
    bp = {r.m: beta_phi(r.m, cfg.phase) for r in reports}
    try:
        fit = fit_scaling(fe, fs, bp)
    except InvalidArgumentError as exc:
        raise DataError(str(exc)) from None
    if out_dir is not None:
        _write(out_dir / "fit.json", fit.to_json())
    return fit


def run_calibrate(cfg: SimConfig, offset_deg: float, points: int, out_dir: Path | None, threads: int = 1) -> float:
    """Sweep the phase setting, simulate angle-0 tables and recover the phase offset."""
    sweep = []
    setting = make_setting(0, cfg.m)
    for k in range(points):
        phi_set = 2.0 * math.pi * k / points
        campaign = Campaign(cfg.m, cfg.params, cfg.phase, cfg.master_seed, cfg.mode,
                            phi_set - math.radians(offset_deg), threads, stream=(k,))
        table = run_setting(campaign, setting, cfg.trajectories)
        table.metadata["phi_set"] = phi_set
        sweep.append((phi_set, table))
        if out_dir is not None:
            _write(out_dir / f"sweep_m{cfg.m}_{k:02d}.csv", table.to_csv())
    phi0 = phase_calibration(sweep)
    if out_dir is not None:
        _write(out_dir / "calibration.json", _dump({"m": cfg.m, "phi0_rad": phi0, "phi0_deg": math.degrees(phi0)}))
    return phi0


def run_oracle(cfg: SimConfig, setting_label: str | None, beta_res: float, detection: bool) -> dict:
    m = cfg.m
    if m > MAX_M:
        raise ConfigError(f"oracle supports m <= {MAX_M}")
    out = {"m": m}
    if setting_label:
        setting = parse_setting_label(setting_label, m)
        dist = exact_distribution(m, cfg.params, cfg.phase, setting, phi=cfg.phi, detection=detection)
        out["setting"] = setting.label
        out["probabilities"] = dist.probs
        out["partial"] = dist.partial
        out["other"] = dist.other
    f_e, f_s, f = exact_fidelity(m, cfg.params, cfg.phase, beta_res, detection=detection)
    out.update({"F_e": f_e, "F_s": f_s, "F": f, "beta_res": beta_res, "detection": detection})
    return out


def run_report(paths: Sequence[str], out_dir: Path | None) -> str:
    reports = sorted((_read_report(p) for p in paths), key=lambda r: r.m)
    lines = ["m,F_e,F_e_err,F_s,F_s_err,F,F_err"]
    text = [f"{'m':>3} {'F_e':>16} {'F_s':>16} {'F':>16}"]
    for r in reports:
        lines.append(f"{r.m},{r.F_e.value!r},{r.F_e.error!r},{r.F_s.value!r},{r.F_s.error!r},"
                     f"{r.F.value!r},{r.F.error!r}")
        text.append(f"{r.m:>3} {str(r.F_e):>16} {str(r.F_s):>16} {str(r.F):>16}")
    if out_dir is not None:
        _write(out_dir / "fidelity_vs_m.csv", "\n".join(lines) + "\n")
        _write(out_dir / "fidelity_vs_m.txt", "\n".join(text) + "\n")
    return "\n".join(text) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="superatom-ghz", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def sim_flags(p, with_settings=True):
        p.add_argument("--config", help="INI file with [simulation], [errors], [phase] sections")
        p.add_argument("--m", "-m", type=int)
        p.add_argument("--trajectories", "-n", type=int, help="simulated generation cycles per setting")
        p.add_argument("--seed", type=int)
        p.add_argument("--mode", choices=("heralded", "physical"))
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out-dir", type=Path)
        if with_settings:
            p.add_argument("--setting", action="append", help="eigen or mi:<i>; repeatable (default: all)")

    p = sub.add_parser("simulate", help="run a Monte Carlo campaign and write coincidence tables")
    sim_flags(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("analyze", help="fidelity report from one eigen and m superposition tables")
    p.add_argument("tables", nargs="+")
    p.add_argument("--out-dir", type=Path)
    p.add_argument("--afterpulse", type=float, default=0.0, help="subtract expected afterpulse counts")
    p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("fit", help="fit alpha and beta_res from reports at several m")
    p.add_argument("reports", nargs="+")
    p.add_argument("--config")
    p.add_argument("--out-dir", type=Path)

    p = sub.add_parser("calibrate", help="simulate a phase sweep and recover the phase offset")
    sim_flags(p, with_settings=False)
    p.add_argument("--offset-deg", type=float, default=0.0)
    p.add_argument("--points", type=int, default=12)

    p = sub.add_parser("oracle", help="exact distribution and fidelity for m <= 4")
    p.add_argument("--config")
    p.add_argument("--m", "-m", type=int)
    p.add_argument("--setting")
    p.add_argument("--beta-res", type=float, default=1.0)
    p.add_argument("--detection", action="store_true", help="include loss and detector noise")

    p = sub.add_parser("report", help="tabulate F_e, F_s, F against m (plot data)")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out-dir", type=Path)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "simulate":
            cfg = _config_from_args(args)
            summary = run_simulate(cfg, args.out_dir or Path("."), args.format, args.threads)
            print(_dump(summary), end="")
        elif args.command == "analyze":
            report = run_analyze(args.tables, args.out_dir, args.afterpulse)
            print(report.to_json() if args.format == "json" else report.to_text(), end="")
        elif args.command == "fit":
            fit = run_fit(args.reports, load_config(args.config), args.out_dir)
            print(fit.to_json(), end="")
        elif args.command == "calibrate":
            cfg = _config_from_args(args)
            phi0 = run_calibrate(cfg, args.offset_deg, args.points, args.out_dir, args.threads)
            print(f"phi0 = {phi0:.4f} rad ({math.degrees(phi0):.2f} deg)")
        elif args.command == "oracle":
            cfg = load_config(args.config, m=args.m)
            print(_dump(run_oracle(cfg, args.setting, args.beta_res, args.detection)), end="")
        elif args.command == "report":
            print(run_report(args.reports, args.out_dir), end="")
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, UndefinedValueError, NoSignalError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
