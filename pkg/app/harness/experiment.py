"""
Experiment driver: build the problem once, run seeded repetitions of a variant, flatten the
reports into one CSV row per rank per run.
"""
from __future__ import annotations

from pathlib import Path

from pydantic import ValidationError

from app.config import get_settings
from app.errors import ConfigurationError
from app.logging_config import get_logger, run_id_ctx
from app.models import CsvRow, ExperimentConfig, RunReport, SolverConfig, Variant
from app.problem import GridSpec, ProblemSet, build_problem_set, weak_scaled_grid
from app.runtime import DelayModel, SchedulerMode
from app.solvers import build_runtime, get_solver

logger = get_logger(__name__)


def run_id_for(config: ExperimentConfig, seed: int) -> str:
    px, py, pz = config.proc
    nx, ny, nz = config.grid
    return f"{config.variant.value}-g{nx}x{ny}x{nz}-p{px}x{py}x{pz}-s{seed}"


def solver_config(config: ExperimentConfig) -> SolverConfig:
    return SolverConfig(
        variant=config.variant,
        eps=config.eps,
        k_max=config.k_max,
        max_corr=config.max_corr,
        i0=config.i0,
        coarse_weight=config.coarse_weight,
        coarse_rank_mode=config.coarse_rank_mode,
        reuse_decay=config.reuse_decay,
        capped_update=config.capped_update,
        watchdog_factor=get_settings().watchdog_factor,
    )


def rows_from_report(config: ExperimentConfig, problem: ProblemSet, report: RunReport, run_id: str, seed: int) -> list[CsvRow]:
    px, py, pz = config.proc
    return [
        CsvRow(
            run_id=run_id,
            variant=report.variant,
            p=problem.p,
            px=px,
            py=py,
            pz=pz,
            local_n=problem.local_n(),
            overlap=config.overlap,
            eps=config.eps,
            seed=seed,
            rank=rank,
            k_rounds=report.rounds,
            k_local=report.k_local[rank],
            coarse_solves=report.coarse_solves,
            corrections=report.corrections[rank],
            wall_ms=round(report.wall_ms, 3),
            final_relres=report.final_relres,
            converged=report.converged,
        )
        for rank in range(problem.p)
    ]


def _trace_path(base: Path, repetition: int, repetitions: int) -> Path:
    if repetitions == 1:
        return base
    return base.with_name(f"{base.stem}-r{repetition}{base.suffix}")


def write_trace(lines: list[str], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("tick,src,dst,tag,seq\n" + "".join(f"{line}\n" for line in lines))


def run_experiment(
    config: ExperimentConfig,
    problem: ProblemSet | None = None,
    reports: list[RunReport] | None = None,
) -> list[CsvRow]:
    """Run `config.repetitions` seeded runs; repetition r uses seed `config.seed + r`.

    Pass `reports` to collect the full RunReport of each run.
    """
    if problem is None:
        nx, ny, nz = config.grid
        problem = build_problem_set(
            GridSpec(nx=nx, ny=ny, nz=nz),
            config.proc,
            config.overlap,
            with_coarse=config.variant.two_level,
        )
    solver = get_solver(config.variant)
    scfg = solver_config(config)
    rows: list[CsvRow] = []
    for rep in range(config.repetitions):
        seed = config.seed + rep
        run_id = run_id_for(config, seed)
        token = run_id_ctx.set(run_id)
        try:
            runtime = None
            if solver.asynchronous:
                delay = DelayModel.parse(config.delay, seed)
                coarse_delay = DelayModel.parse(config.coarse_delay, seed) if config.coarse_delay else None
                runtime = build_runtime(
                    problem,
                    scfg,
                    delay,
                    SchedulerMode(config.mode),
                    coarse_delay=coarse_delay,
                    trace=config.trace_path is not None,
                )
            logger.info("repetition_started", extra={"variant": config.variant.value, "p": problem.p, "seed": seed})
            report = solver.run(problem, scfg, runtime)
            if reports is not None:
                reports.append(report)
            if runtime is not None and config.trace_path is not None:
                path = _trace_path(config.trace_path, rep, config.repetitions)
                write_trace(runtime.trace, path)
                logger.info("trace_written", extra={"path": str(path)})
            rows.extend(rows_from_report(config, problem, report, run_id, seed))
        finally:
            run_id_ctx.reset(token)
    return rows


def weak_scaling_sweep(
    base: ExperimentConfig,
    proc_grids: list[tuple[int, int, int]],
    local_shape: tuple[int, int, int] | None = None,
    variants: list[Variant] | None = None,
) -> list[CsvRow]:
    """Rows for every (proc grid, variant) pair with the grid scaled to keep `local_shape` per subdomain."""
    if not proc_grids:
        raise ConfigurationError("weak-scaling sweep needs at least one processor grid")
    if local_shape is None:
        size = get_settings().weak_local_size
        local_shape = (size, size, size)
    variants = variants or [base.variant]
    rows: list[CsvRow] = []
    for proc in proc_grids:
        grid = weak_scaled_grid(local_shape, proc)
        problem = build_problem_set(grid, proc, base.overlap, with_coarse=any(v.two_level for v in variants))
        for variant in variants:
            try:
                config = ExperimentConfig(**{**base.model_dump(), "grid": grid.shape, "proc": proc, "variant": variant})
            except ValidationError as e:
                raise ConfigurationError(str(e)) from e
            rows.extend(run_experiment(config, problem))
    return rows
