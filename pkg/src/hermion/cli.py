"""Command line: evolve, norm, verify, report."""

from __future__ import annotations

import argparse
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .datum import DatumError, make_datum_report
from .hermite_basis import HermiteField
from .io import FormatError, read_trace, write_field_dump, write_plot_csv, write_trace
from .solver import EvolutionTrace, MonitorBreach, NonContractionError, evolve_nonlinear, monitor_values, picard_solve
from .tf_analysis import LatticeExtentError, TFLattice, lattice_for_cutoff, modulation_norm
from .verify import VerifySettings, resolve_ids, run_checks, thread_count

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


def version_string() -> str:
    """git describe of the source tree when available, else the installed version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "-C", str(here), "describe", "--always", "--tags", "--dirty"],
                             capture_output=True, text=True, timeout=10)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        from importlib.metadata import version
        return version("artifact")
    except Exception:
        return "unknown"


def _finite(obj):
    """Replace non-finite floats by strings so reports stay strict JSON."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_finite(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


def initial_field(cfg: RunConfig) -> HermiteField:
    return make_datum_report(cfg.datum(), cfg.cutoff, cfg.dim).field


def effective_cutoff(f: HermiteField) -> int:
    nz = np.argwhere(np.abs(f.coeffs) > 0)
    return int(nz.max()) + 1 if len(nz) else 1


def norm_lattice(cfg: RunConfig, f: HermiteField) -> TFLattice:
    """The configured lattice, widened if the datum reaches past it."""
    lat = cfg.lattice()
    need = lattice_for_cutoff(effective_cutoff(f), f.dim, lat.x_step)
    if need.x_extent <= min(lat.x_extent, lat.y_extent):
        return lat
    return TFLattice(f.dim, lat.x_step, lat.y_step, max(lat.x_extent, need.x_extent),
                     max(lat.y_extent, need.y_extent), lat.window_width)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def run_evolve(cfg: RunConfig) -> int:
    u0 = initial_field(cfg)
    scfg = cfg.solver()
    out = cfg.output
    out.mkdir(parents=True, exist_ok=True)
    meta = {"version": version_string(), "config_hash": cfg.digest(), "dim": cfg.dim, "cutoff": cfg.cutoff,
            "scheme": scfg.scheme, "datum": cfg["datum"]["type"], "nonlinearity": cfg["nonlinearity"]["type"]}
    status, message = EXIT_OK, ""
    try:
        if scfg.scheme == "picard":
            uT, hist = picard_solve(u0, scfg)
            trace = EvolutionTrace()
            for t, f in ((0.0, u0), (scfg.horizon, uT)):
                mon, flags = monitor_values(f, scfg)
                trace.append(t, f, mon, flags)
            meta["picard_differences"] = hist["differences"]
        else:
            trace = evolve_nonlinear(u0, scfg)
    except (MonitorBreach, NonContractionError) as exc:
        trace = getattr(exc, "trace", None) or EvolutionTrace()
        status, message = EXIT_FAIL, str(exc)
        meta["aborted"] = message
    write_trace(out / "trace.jsonl", trace, _finite(meta))
    if len(trace):
        write_plot_csv(out / "monitors.csv", trace.records())
    if cfg["run"]["snapshots"]:
        snap = out / "snapshots"
        snap.mkdir(exist_ok=True)
        for i, f in enumerate(trace.snapshots):
            write_field_dump(snap / f"snap_{i:04d}.bin", f)
    if message:
        print(f"evolve aborted: {message}", file=sys.stderr)
    print(f"wrote {len(trace)} records to {out}")
    return status


def run_norm(cfg: RunConfig, p: float, q: float) -> int:
    f = initial_field(cfg)
    lat = norm_lattice(cfg, f)
    value = modulation_norm(f, p, q, lat)
    print(json.dumps({"p": p, "q": q, "norm": value, "x_extent": lat.x_extent, "y_extent": lat.y_extent}))
    return EXIT_OK


def verify_settings(cfg: RunConfig) -> VerifySettings:
    v = cfg["verify"]
    return VerifySettings(seed=cfg.seed, family_size=v["family_size"], family_cutoff=v["family_cutoff"],
                          tamper_mode=v["tamper_mode"], seeds=tuple(v["seeds"]), family_decay=v["family_decay"])


def run_verify(cfg: RunConfig, only: str | None = None, threads: int | None = None) -> tuple[dict, dict]:
    """(report, timings); the report has no timings so identical runs give identical bytes."""
    ids = resolve_ids(only)
    settings = verify_settings(cfg)
    results, timings = run_checks(settings, ids, threads)
    report = {
        "format": "HERMION1",
        "kind": "verify_report",
        "version": version_string(),
        "config_hash": cfg.digest(),
        "settings": {k: getattr(settings, k) for k in settings.__dataclass_fields__},
        "checks": [r.as_dict() for r in results],
        "passed": all(r.passed for r in results),
        "summary": {"passed": sum(r.passed for r in results), "failed": sum(not r.passed for r in results)},
    }
    return report, timings


def _verify_cmd(cfg: RunConfig, only: str | None) -> int:
    try:
        report, timings = run_verify(cfg, only)
    except KeyError:
        print(f"unknown check id {only!r}", file=sys.stderr)
        return EXIT_USAGE
    out = cfg.output
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / "verify_report.json", report)
    _dump_json(out / "verify_timings.json", timings)
    for chk in report["checks"]:
        print(f"{'PASS' if chk['passed'] else 'FAIL'}  {chk['id']:<24} {chk['claim']}")
    print(f"{report['summary']['passed']} passed, {report['summary']['failed']} failed; "
          f"report in {out / 'verify_report.json'}")
    return EXIT_OK if report["passed"] else EXIT_FAIL


def summarize_trace(trace_dir) -> dict:
    header, records = read_trace(Path(trace_dir) / "trace.jsonl")
    if not records:
        raise FormatError("trace has no records")
    keys = sorted(k for k in records[0] if k not in ("t", "flags"))
    first = records[0]
    summary = {"records": len(records), "t_start": first["t"], "t_end": records[-1]["t"],
               "scheme": header.get("scheme"), "aborted": header.get("aborted")}
    for k in keys:
        vals = np.array([r[k] for r in records], dtype=float)
        drift = float(np.max(np.abs(vals - vals[0])) / abs(vals[0])) if vals[0] else float(np.max(np.abs(vals)))
        summary[k] = {"min": float(vals.min()), "max": float(vals.max()), "max_rel_change": drift}
    summary["flags"] = sorted({f for r in records for f in r.get("flags", [])})
    return summary


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hermion", description="Hermite-spectral NLS solver and time-frequency checks")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("evolve", help="run the solver and write a trace")
    p.add_argument("config")
    p = sub.add_parser("norm", help="modulation norm of the configured datum")
    p.add_argument("config")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("config")
    p.add_argument("--only", default=None, help="run a single check by id")
    p = sub.add_parser("report", help="summarize a trace directory")
    p.add_argument("trace_dir")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            print(json.dumps(_finite(summarize_trace(args.trace_dir)), indent=2, sort_keys=True))
            return EXIT_OK
        cfg = load_config(args.config)
        if args.command == "evolve":
            return run_evolve(cfg)
        if args.command == "norm":
            if not (args.p >= 1 and args.q >= 1):
                raise ConfigError("exponents must be at least 1")
            return run_norm(cfg, args.p, args.q)
        return _verify_cmd(cfg, args.only)
    except (ConfigError, DatumError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, FormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except LatticeExtentError as exc:
        print(f"check failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


__all__ = ["main", "run_evolve", "run_norm", "run_verify", "summarize_trace", "thread_count"]
