import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from fracwave.core.config import Settings
from fracwave.core.errors import FracwaveError
from fracwave.models.rng import RngStream
from fracwave.models.phase import Ensemble
from fracwave.services.config_service import ConfigService, validation_messages
from fracwave.services.experiment_service import ExperimentService
from fracwave.services.field_io_service import FieldIOService
from fracwave.services.gibbs_service import GibbsService
from fracwave.services.inflation_service import InflationService
from fracwave.services.random_field_service import RandomFieldService
from fracwave.services.report_service import ReportService
from fracwave.services.spectral_service import SpectralService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_VERDICT_FAILED = 2


def _int_list(text: str) -> List[int]:
    return [int(item) for item in text.split(",") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracwave", description="Pseudospectral lab for fractional nonlinear wave equations on the torus")
    parser.add_argument("--log-level", default=None, help="Overrides FRACWAVE_LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run the experiment of a config file and write its report")
    run.add_argument("config", type=Path)
    run.add_argument("--output-dir", type=Path, default=None)
    run.add_argument("--threads", type=int, default=None)

    sample = commands.add_parser("sample", help="Draw an ensemble of mu_N (or of rho_N with --gibbs)")
    sample.add_argument("config", type=Path)
    sample.add_argument("--count", type=int, default=None)
    sample.add_argument("--gibbs", action="store_true", help="Rejection-sample the Gibbs measure instead of weighting")
    sample.add_argument("--out", type=Path, default=None)

    ode = commands.add_parser("ode-check", help="Compare the integrated ODE period with the quadrature")
    ode.add_argument("--k", type=_int_list, default=[0, 1, 2, 3])
    ode.add_argument("--v0", type=float, default=1.0)
    ode.add_argument("--dt", type=float, default=1e-4)
    ode.add_argument("--out", type=Path, default=None, help="Directory for profile CSVs")

    dump = commands.add_parser("field-dump", help="Convert an FWF1 field to CSV grid values")
    dump.add_argument("field", type=Path)
    dump.add_argument("--grid", type=int, default=None)
    dump.add_argument("--out", type=Path, default=None)
    return parser


def command_run(args: argparse.Namespace) -> int:
    config = ConfigService.load_config(args.config)
    report = ExperimentService.run(config, threads=args.threads)
    directory = ReportService.write(report, args.output_dir)
    print(ReportService.summary(report))
    print(f"report written to {directory}")
    return EXIT_OK if report.passed else EXIT_VERDICT_FAILED


def command_sample(args: argparse.Namespace) -> int:
    config = ConfigService.load_config(args.config)
    cfg = config.sim
    count = args.count or config.samples
    out = args.out or Path(config.output_dir or Settings().output_dir) / "ensemble"
    if args.gibbs:
        draws = [GibbsService.sample_gibbs_rejection(cfg, cfg.N, cfg.potential, RngStream(cfg.seed, i)) for i in range(count)]
        tries = sum(draw.tries for draw in draws)
        ensemble = Ensemble(
            members=[draw.point for draw in draws],
            config=cfg,
            seeds=list(range(count)),
            metadata={"seed": str(cfg.seed), "N": f"{cfg.N:g}"},
        )
        extra = {"acceptance-rate": repr(count / tries)}
    else:
        ensemble = RandomFieldService.sample_ensemble(cfg, cfg.N, count, threads=config.threads)
        ensemble.weights = GibbsService.importance_weights(ensemble.members, cfg.N, cfg.potential, cfg.M, config.threads)
        extra = {}
    extra.update({"potential": cfg.potential.kind.value, "k": str(cfg.k)})
    FieldIOService.write_ensemble(out, ensemble, extra)
    print(f"{count} members written to {out}")
    return EXIT_OK


def command_ode_check(args: argparse.Namespace) -> int:
    print(f"{'k':>3} {'period (Verlet)':>20} {'period (quadrature)':>20} {'difference':>12}")
    for k in args.k:
        profile = InflationService.solve_profile(k, args.v0, args.dt)
        reference = InflationService.period_quadrature(k, args.v0)
        print(f"{k:>3} {profile.period:>20.12f} {reference:>20.12f} {abs(profile.period - reference):>12.3e}")
        if args.out is not None:
            FieldIOService.write_profile(args.out / f"profile_k{k}.csv", profile)
    return EXIT_OK


def command_field_dump(args: argparse.Namespace) -> int:
    field = FieldIOService.read(args.field)
    M = args.grid or 4 * field.maxmode + 4
    out = args.out or args.field.with_suffix(".csv")
    FieldIOService.write_grid(out, SpectralService.to_grid(field, M))
    print(f"{M}^{field.dim} grid values written to {out}")
    return EXIT_OK


COMMANDS = {
    "run": command_run,
    "sample": command_sample,
    "ode-check": command_ode_check,
    "field-dump": command_field_dump,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        logging.getLogger().setLevel(args.log_level.upper())
    try:
        return COMMANDS[args.command](args)
    except (FracwaveError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR
    except ValidationError as exc:
        for message in validation_messages(exc):
            print(f"error: {message}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR
