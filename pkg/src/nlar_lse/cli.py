"""Command-line entry point.

``nlar-lse <simulate|estimate|excite|report|run> --config PATH [--out DIR]
[--seed-override U64] [--replicates K]``

Exit status: 0 when every configured criterion passes, 1 when one fails,
2 on any error (bad config, unwritable output, numeric failure).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import kernels
from .config import ExperimentConfig, dump_config, parse_config
from .diagnostics import CriterionResult, DiagnosticsReport, aggregate, read_trace, write_trace
from .errors import NlarError
from .experiment import certify, estimate_replicate, run_replicates, simulate_replicate
from .simulator import read_trajectory, write_trajectory

log = logging.getLogger("nlar_lse")

EXIT_PASS, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _rep_name(r: int) -> str:
    return f"rep_{r:04d}.csv"


def _prepare(out: Path, cfg: ExperimentConfig) -> None:
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.json")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> int:
    _prepare(out, cfg)
    d = out / "trajectories"
    d.mkdir(exist_ok=True)
    for r, traj in enumerate(run_replicates(cfg, estimate=False)):
        write_trajectory(traj, d / _rep_name(r))
    return EXIT_PASS


def cmd_estimate(cfg: ExperimentConfig, out: Path) -> int:
    """Estimate from trajectories saved by ``simulate`` when present, otherwise simulate afresh."""
    _prepare(out, cfg)
    d = out / "traces"
    d.mkdir(exist_ok=True)
    model = cfg.build_model()
    noise = cfg.build_noise()
    tdir = out / "trajectories"
    for r in range(cfg.replicates):
        saved = tdir / _rep_name(r)
        traj = read_trajectory(saved) if saved.exists() else simulate_replicate(cfg, r, model, noise)
        write_trace(estimate_replicate(cfg, r, traj, model), d / _rep_name(r))
    return EXIT_PASS


def _certification_criterion(cfg: ExperimentConfig, cert: dict) -> CriterionResult:
    want = cfg.excitation["expect_certified"]
    return CriterionResult("excitation", cert["certified"] == want,
                           {"certified": cert["certified"], "expected": want,
                            "delta_star": cert["delta_star"], "infimum_value": cert["infimum_value"]})


def cmd_excite(cfg: ExperimentConfig, out: Path) -> int:
    if cfg.excitation is None:
        raise NlarError("config has no excitation block")
    _prepare(out, cfg)
    cert = certify(cfg)
    _write_json(out / "certification.json", cert)
    return EXIT_PASS if _certification_criterion(cfg, cert).passed else EXIT_FAIL


def build_report(cfg: ExperimentConfig, out: Path) -> DiagnosticsReport:
    """Rebuild the report from the CSV/JSON files in ``out`` alone."""
    traces = [read_trace(out / "traces" / _rep_name(r)) for r in range(cfg.replicates)]
    report = aggregate(traces, cfg)
    cert_path = out / "certification.json"
    if cfg.excitation is not None and cert_path.exists():
        report.criteria.append(_certification_criterion(cfg, json.loads(cert_path.read_text())))
    return report


def cmd_report(cfg: ExperimentConfig, out: Path) -> int:
    report = build_report(cfg, out)
    report.write(out)
    _print_verdicts(report)
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_run(cfg: ExperimentConfig, out: Path | None = None) -> int:
    """Full pipeline: replicates, traces, report and (if configured) certification."""
    out = Path(cfg.output if out is None else out)
    _prepare(out, cfg)
    d = out / "traces"
    d.mkdir(exist_ok=True)
    for res in run_replicates(cfg):
        write_trace(res.trace, d / _rep_name(res.trace.replicate))
    if cfg.excitation is not None:
        _write_json(out / "certification.json", certify(cfg))
    return cmd_report(cfg, out)


def _print_verdicts(report: DiagnosticsReport) -> None:
    for c in report.criteria:
        print(f"{c.name}: {'PASS' if c.passed else 'FAIL'}")
    agg = report.aggregate
    print(f"replicates={agg['replicates']} median_final_err2={agg['median_final_err2']:.6g} "
          f"median_N_T={agg['median_N_T']:.6g}")


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "excite": cmd_excite,
    "report": cmd_report,
    "run": cmd_run,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlar-lse", description="Nonlinear AR least-squares experiments.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, help="experiment JSON (report falls back to OUT/config.json)")
    p.add_argument("--out", type=Path, help="run directory (default: the config's output field)")
    p.add_argument("--seed-override", type=int, help="replace the base seed")
    p.add_argument("--replicates", type=int, help="replace the replicate count")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.info("kernel backend: %s", kernels.BACKEND)
    try:
        path = args.config
        if path is None:
            if args.command != "report" or args.out is None:
                raise NlarError("--config is required")
            path = args.out / "config.json"
        cfg = parse_config(path)
        if args.seed_override is not None or args.replicates is not None or args.out is not None:
            cfg = cfg.with_overrides(args.seed_override, args.replicates,
                                     None if args.out is None else str(args.out))
        return COMMANDS[args.command](cfg, Path(cfg.output))
    except (NlarError, OSError, ValueError) as exc:
        print(f"nlar-lse: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
