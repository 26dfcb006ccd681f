"""
Argument parsing for the experiment CLI. Defaults come from Settings; flags override them.
"""
from __future__ import annotations

import argparse
from pathlib import Path

from pydantic import BaseModel, ValidationError

from app.config import get_settings
from app.errors import ConfigurationError
from app.models import CappedUpdate, CoarseRankMode, ExperimentConfig, Variant
from app.problem import parse_triple
from app.runtime import DelayModel
from app.solvers import list_variants


class SweepConfig(BaseModel):
    base: ExperimentConfig
    local: tuple[int, int, int]
    procs: list[tuple[int, int, int]]
    variants: list[Variant]


def _triple(text: str) -> tuple[int, int, int]:
    try:
        return parse_triple(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def _delay(text: str) -> str:
    try:
        DelayModel.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e
    return text


def _add_common(parser: argparse.ArgumentParser) -> None:
    settings = get_settings()
    parser.add_argument("--variant", choices=list_variants(), default=Variant.SYNC_1L.value, help="Solver variant")
    parser.add_argument("--overlap", type=int, default=settings.default_overlap, help="Overlap in mesh layers (default 2)")
    parser.add_argument("--eps", type=float, default=settings.default_eps, help="Relative tolerance (default 1e-6)")
    parser.add_argument("--kmax", type=int, default=settings.default_k_max, help="Iteration cap")
    parser.add_argument("--max-corr", type=int, default=settings.default_max_corr, help="Corrections per coarse solution (accurate variant)")
    parser.add_argument("--i0", type=int, default=0, help="Coarse root rank (inline mode)")
    parser.add_argument("--coarse-rank-mode", choices=[m.value for m in CoarseRankMode], default=CoarseRankMode.INLINE.value)
    parser.add_argument("--reuse-decay", action="store_true", help="Halve each reuse of a coarse solution and scale it by the norm drop")
    parser.add_argument("--capped-update", choices=[c.value for c in CappedUpdate], default=CappedUpdate.PLAIN.value, help="Update once max_corr is reached")
    parser.add_argument("--delay", type=_delay, default="immediate", help="immediate | fixed:T | uniform:LO:HI")
    parser.add_argument("--coarse-delay", type=_delay, default=None, help="Delay model for the coarse reduce/broadcast path")
    parser.add_argument("--mode", choices=["free", "lockstep"], default="free", help="Scheduler mode for asynchronous variants")
    parser.add_argument("--seed", type=int, default=0, help="Seed of the first repetition")
    parser.add_argument("--reps", type=int, default=1, help="Repetitions (seed, seed+1, ...)")
    parser.add_argument("--csv", type=Path, default=None, help="Output CSV path (stdout when omitted)")
    parser.add_argument("--trace", type=Path, default=None, help="Write the message delivery trace here")
    parser.add_argument("--allow-nonconverged", action="store_true", help="Exit 0 even if a run did not converge")
    parser.add_argument("--log-level", default=settings.log_level, help="DEBUG, INFO, WARNING, ...")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Run sync/async one- and two-level RAS solvers on 3D Poisson")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run one configuration")
    run.add_argument("--grid", type=_triple, required=True, help="NXxNYxNZ interior nodes")
    run.add_argument("--proc", type=_triple, default=(1, 1, 1), help="PXxPYxPZ subdomains")
    _add_common(run)

    sweep = sub.add_parser("sweep", help="Weak-scaling sweep over processor grids")
    size = get_settings().weak_local_size
    sweep.add_argument("--local", type=_triple, default=(size, size, size), help="Owned nodes per subdomain, NXxNYxNZ")
    sweep.add_argument("--procs", type=_triple, action="append", required=True, help="PXxPYxPZ; repeat for each point")
    sweep.add_argument("--variants", type=str, default=None, help="Comma-separated variants (default: --variant)")
    _add_common(sweep)
    return parser


def _experiment(args: argparse.Namespace, grid: tuple[int, int, int], proc: tuple[int, int, int]) -> ExperimentConfig:
    return ExperimentConfig(
        grid=grid,
        proc=proc,
        overlap=args.overlap,
        variant=Variant(args.variant),
        eps=args.eps,
        k_max=args.kmax,
        max_corr=args.max_corr,
        i0=args.i0,
        coarse_rank_mode=CoarseRankMode(args.coarse_rank_mode),
        coarse_weight=get_settings().coarse_weight,
        reuse_decay=args.reuse_decay,
        capped_update=CappedUpdate(args.capped_update),
        delay=args.delay,
        coarse_delay=args.coarse_delay,
        mode=args.mode,
        seed=args.seed,
        repetitions=args.reps,
        csv_path=args.csv,
        trace_path=args.trace,
        allow_nonconverged=args.allow_nonconverged,
    )


def parse_cli(argv: list[str] | None = None) -> tuple[argparse.Namespace, ExperimentConfig | SweepConfig]:
    """Parse and validate. argparse usage errors exit 2; invalid combinations raise ConfigurationError."""
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return args, _experiment(args, args.grid, args.proc)
        if args.variants:
            names = [v.strip() for v in args.variants.split(",") if v.strip()]
            unknown = [v for v in names if v not in list_variants()]
            if unknown:
                raise ConfigurationError(f"Unknown variant(s): {unknown}. Known: {list_variants()}")
            variants = [Variant(v) for v in names]
        else:
            variants = [Variant(args.variant)]
        first = args.procs[0]
        grid = tuple(n * q for n, q in zip(args.local, first))
        base = _experiment(args, grid, first)
        return args, SweepConfig(base=base, local=args.local, procs=args.procs, variants=variants)
    except ValidationError as e:
        raise ConfigurationError(_first_message(e)) from e


def _first_message(e: ValidationError) -> str:
    errors = e.errors()
    if not errors:
        return str(e)
    loc = ".".join(str(part) for part in errors[0]["loc"])
    return f"{loc}: {errors[0]['msg']}" if loc else errors[0]["msg"]
