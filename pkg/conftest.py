import numpy as np
import pytest

from app.models import SolverConfig, Variant
from app.problem import GridSpec, ProblemSet, build_problem_set
from app.solvers import RankState


@pytest.fixture(scope="session")
def chain4() -> ProblemSet:
    """4-node chain split in two with one layer of overlap."""
    return build_problem_set(GridSpec(nx=4, ny=1, nz=1), (2, 1, 1), 1)


@pytest.fixture(scope="session")
def cube4_p1() -> ProblemSet:
    return build_problem_set(GridSpec(nx=4, ny=4, nz=4), (1, 1, 1), 2)


@pytest.fixture(scope="session")
def cube6_p8() -> ProblemSet:
    return build_problem_set(GridSpec(nx=6, ny=6, nz=6), (2, 2, 2), 2)


@pytest.fixture(scope="session")
def cube8_p8() -> ProblemSet:
    return build_problem_set(GridSpec(nx=8, ny=8, nz=8), (2, 2, 2), 2)


def make_config(variant: Variant, **kwargs) -> SolverConfig:
    return SolverConfig(variant=variant, **kwargs)


class TrajectoryRecorder:
    """Observer keeping each rank's owned values after every update, keyed by loop pass."""

    def __init__(self, problem: ProblemSet):
        self.problem = problem
        self.passes: dict[int, dict[int, np.ndarray]] = {}

    def __call__(self, state: RankState) -> None:
        owned = state.sub.owned_slots
        self.passes.setdefault(state.k_local, {})[state.rank] = state.x[owned].copy()

    def iterates(self) -> list[np.ndarray]:
        """Global iterates x^1, x^2, ... for passes every rank completed."""
        out = []
        for k in sorted(self.passes):
            ranks = self.passes[k]
            if len(ranks) < self.problem.p:
                break
            x = np.zeros(self.problem.grid.n)
            for sub in self.problem.subdomains:
                x[sub.global_indices[sub.owned_mask]] = ranks[sub.rank]
            out.append(x)
        return out


@pytest.fixture
def recorder_factory():
    return TrajectoryRecorder
