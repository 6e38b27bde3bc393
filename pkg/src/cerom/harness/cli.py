"""Command line entry point: ``cerom <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..exceptions import ConfigError, NumericalError, SnapshotFormatError
from ..snapshots import save_snapshots
from .config import ExperimentConfig
from .experiments import build_pipeline, build_snapshots, pod_report, run_ce_table, run_rom_table
from .verify import run_checks

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("cerom")


def _load_config(args) -> ExperimentConfig:
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.out is not None:
        overrides.append(f"output_dir={args.out}")
    if args.config is None:
        return ExperimentConfig.from_mapping({}, overrides)
    return ExperimentConfig.load(args.config, overrides)


def _cmd_dns(cfg, args):
    if cfg.problem == "external":
        raise ConfigError("dns needs a Burgers problem, not 'external'")
    snaps = build_snapshots(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "snapshots.roms"
    save_snapshots(snaps, path)
    manifest = {"config_hash": cfg.config_hash(), "config": cfg.raw, "file": path.name,
                "n_dof": snaps.n_dof, "n_snapshots": snaps.n_snapshots}
    (out / "dns.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path} ({snaps.n_dof} dofs x {snaps.n_snapshots} snapshots)")
    return EXIT_OK


def _cmd_pod(cfg, args):
    pipe = build_pipeline(cfg)
    report = pod_report(pipe)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "pod.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"d = {report['n_modes']}, orthonormality defect {report['orthonormality_defect']}")
    return EXIT_OK


def _cmd_table(runner):
    def run(cfg, args):
        report = runner(cfg, jobs=args.jobs)
        csv_path, _ = report.write(cfg.output_dir)
        sys.stdout.write(report.csv_text())
        log.info("wrote %s", csv_path)
        return EXIT_OK
    return run


def _cmd_verify(cfg, args):
    pipe = build_pipeline(cfg)
    results = run_checks(pipe, seed=cfg.seed)
    for res in results:
        print(res.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERICAL


COMMANDS = {
    "dns": (_cmd_dns, "run the Burgers DNS and write a snapshot file"),
    "pod": (_cmd_pod, "compute the POD basis and write diagnostics"),
    "ce-table": (_cmd_table(run_ce_table), "average commutation error per (r, filter)"),
    "rom-table": (_cmd_table(run_rom_table), "ROM error per variant and (r, filter)"),
    "verify": (_cmd_verify, "run the algebraic property suite"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cerom", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML experiment file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config value (dotted keys, repeatable)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for grid points")
        p.add_argument("--seed", type=int, help="random seed for the property suite")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handler, _ = COMMANDS[args.command]
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        cfg = _load_config(args)
        return handler(cfg, args)
    except (ConfigError, SnapshotFormatError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
