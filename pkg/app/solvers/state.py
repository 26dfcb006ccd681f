"""
Per-rank iteration state. Private to one worker; peers only see it through the runtime.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from app.problem import SubdomainProblem
from app.runtime import Request
from app.sparse import Vector


@dataclass
class SnapshotRecord:
    round: int
    xbar_owned: Vector
    rbar_owned: Vector


@dataclass
class RankState:
    rank: int
    sub: SubdomainProblem
    # extended layout: [x_i | x_halo]
    x: Vector
    r: Vector
    xbar: Vector
    rbar: Vector
    x0: Vector
    # consistent copy for the synchronous convergence check
    xcheck: Vector
    state0: int = 0
    # completed all-reduce rounds (stopping counter)
    k: int = 0
    # loop passes
    k_local: int = 0
    norm: float = float("inf")
    x0_version: int = 0
    corr_used: int = 0
    corrections: int = 0
    max_corr_seen: int = 0
    coarse_solves: int = 0
    coarse_solves_seen: int = 0
    snapshot_rounds: int = 0
    # approximate norm when the last snapshot was taken, and for the snapshot behind x0
    norm_at_snapshot: float = 0.0
    norm_ref: float = 0.0
    convergence_checks: int = 0
    timed_out: bool = False
    diverged: bool = False
    snapshots: list[SnapshotRecord] = field(default_factory=list)
    req_r: Request = field(default_factory=Request.null)
    req_r0: Request = field(default_factory=Request.null)
    req_x0: Request = field(default_factory=Request.null)
    reqs_xbar: list[Request] = field(default_factory=list)

    @classmethod
    def initial(cls, sub: SubdomainProblem, p: int) -> RankState:
        width = sub.n_local + sub.n_halo
        return cls(
            rank=sub.rank,
            sub=sub,
            x=np.zeros(width),
            r=np.array(sub.b_local, copy=True),
            xbar=np.zeros(width),
            xcheck=np.zeros(width),
            rbar=np.zeros(sub.n_local),
            x0=np.zeros(p),
        )

    @property
    def x_i(self) -> Vector:
        return self.x[: self.sub.n_local]

    @property
    def x_halo(self) -> Vector:
        return self.x[self.sub.n_local :]

    @property
    def xbar_i(self) -> Vector:
        return self.xbar[: self.sub.n_local]

    @property
    def xbar_halo(self) -> Vector:
        return self.xbar[self.sub.n_local :]

    def bump_x0_version(self) -> None:
        self.x0_version += 1
        self.corr_used = 0
        self.coarse_solves_seen += 1
        self.norm_ref = self.norm_at_snapshot
