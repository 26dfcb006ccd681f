from .async_one_level import confirm_convergence, run_async_ras, start_rank
from .async_two_level import run_async_two_level_accurate, run_async_two_level_basic
from .base import BaseSolver, build_runtime, watchdog_ticks
from .kernels import corrected_update, final_residual_check, local_update, residual, reuse_scale
from .registry import get_solver, list_variants
from .state import RankState, SnapshotRecord
from .sync import exchange_ghosts, run_sync_ras, run_sync_two_level

__all__ = [
    "BaseSolver",
    "RankState",
    "SnapshotRecord",
    "build_runtime",
    "confirm_convergence",
    "corrected_update",
    "exchange_ghosts",
    "final_residual_check",
    "get_solver",
    "list_variants",
    "local_update",
    "residual",
    "reuse_scale",
    "run_async_ras",
    "run_async_two_level_accurate",
    "run_async_two_level_basic",
    "run_sync_ras",
    "run_sync_two_level",
    "start_rank",
    "watchdog_ticks",
]
