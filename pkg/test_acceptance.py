"""End-to-end properties on desk-scale grids. Slow; run with `pytest -m slow`."""
import statistics

import pytest

from app.harness import run_experiment, weak_scaling_sweep
from app.models import CappedUpdate, ExperimentConfig, RunReport, Variant
from app.problem import GridSpec, ProblemSet, build_problem_set

pytestmark = pytest.mark.slow

SEEDS = 5


@pytest.fixture(scope="module")
def cube8_p8_no_overlap() -> ProblemSet:
    return build_problem_set(GridSpec(nx=8, ny=8, nz=8), (2, 2, 2), 0)


def _reports(problem: ProblemSet, **kwargs) -> list[RunReport]:
    kwargs.setdefault("overlap", problem.dec.overlap)
    config = ExperimentConfig(grid=(8, 8, 8), proc=(2, 2, 2), repetitions=SEEDS, seed=1, **kwargs)
    reports: list[RunReport] = []
    run_experiment(config, problem, reports)
    return reports


@pytest.mark.parametrize("delay", ["immediate", "uniform:0:10"])
@pytest.mark.parametrize("variant", list(Variant))
def test_every_variant_converges_with_final_check(cube8_p8, variant, delay):
    for report in _reports(cube8_p8, variant=variant, delay=delay):
        assert report.converged
        assert report.final_relres < 1e-6
        assert not report.timed_out
        if variant == Variant.ASYNC_2L_BASIC:
            assert report.corrections_applied == report.coarse_solves
            assert report.corrections == report.coarse_solves_seen
        if variant == Variant.ASYNC_2L_ACCURATE:
            assert report.max_corrections_per_version <= report.config.max_corr


def test_weak_scaling_iteration_trend():
    # small overlap relative to the subdomain width
    base = ExperimentConfig(grid=(10, 10, 10), overlap=0)
    rows = weak_scaling_sweep(base, [(2, 2, 2), (3, 3, 3), (4, 4, 4)], (10, 10, 10), [Variant.SYNC_1L, Variant.SYNC_2L])
    rounds: dict[Variant, list[int]] = {Variant.SYNC_1L: [], Variant.SYNC_2L: []}
    for row in rows:
        if row.rank == 0:
            rounds[row.variant].append(row.k_rounds)
    one_level, two_level = rounds[Variant.SYNC_1L], rounds[Variant.SYNC_2L]
    assert all(row.converged for row in rows)
    assert one_level[0] < one_level[1] < one_level[2]
    assert max(two_level) / min(two_level) < 2


def _repeated_correction_runs(problem, max_corr: int) -> list[RunReport]:
    return _reports(
        problem,
        variant=Variant.ASYNC_2L_ACCURATE,
        max_corr=max_corr,
        reuse_decay=True,
        capped_update=CappedUpdate.DAMPED,
        delay="uniform:0:1",
        coarse_delay="uniform:0:10",
    )


def test_repeated_corrections_reuse_each_coarse_solution(cube8_p8_no_overlap):
    for report in _repeated_correction_runs(cube8_p8_no_overlap, 5):
        assert report.converged
        assert report.corrections_applied >= 2 * report.coarse_solves
        assert report.max_corrections_per_version <= 5


def test_repeated_corrections_lower_median_iterations(cube8_p8_no_overlap):
    def median_k(max_corr: int) -> float:
        return statistics.median(max(r.k_local) for r in _repeated_correction_runs(cube8_p8_no_overlap, max_corr))

    assert median_k(5) < median_k(1)
