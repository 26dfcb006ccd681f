"""Registry of solvers by variant name. Explicit mapping."""
from app.errors import ConfigurationError
from app.models import Variant
from app.solvers.async_one_level import AsyncRasSolver
from app.solvers.async_two_level import AsyncTwoLevelAccurateSolver, AsyncTwoLevelBasicSolver
from app.solvers.base import BaseSolver
from app.solvers.sync import SyncRasSolver, SyncTwoLevelSolver

_SOLVERS: dict[str, type[BaseSolver]] = {
    Variant.SYNC_1L.value: SyncRasSolver,
    Variant.ASYNC_1L.value: AsyncRasSolver,
    Variant.SYNC_2L.value: SyncTwoLevelSolver,
    Variant.ASYNC_2L_BASIC.value: AsyncTwoLevelBasicSolver,
    Variant.ASYNC_2L_ACCURATE.value: AsyncTwoLevelAccurateSolver,
}


def list_variants() -> list[str]:
    return list(_SOLVERS.keys())


def get_solver(variant: str | Variant) -> BaseSolver:
    name = variant.value if isinstance(variant, Variant) else variant
    if name not in _SOLVERS:
        raise ConfigurationError(f"Unknown variant: {name}. Known: {list_variants()}")
    return _SOLVERS[name]()
