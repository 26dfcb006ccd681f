"""
Simulated message-passing runtime.

Ranks are coroutines resumed one at a time by a tick scheduler, so every interleaving is
reproducible from the seeds. Messages are due `delay` ticks after the tick they are posted in
and never overtake an earlier message on the same (src, dst, tag) channel.

- lockstep: ranks step once per tick in rank order; deliveries happen at the tick boundary.
- free-running: ranks step once per tick in a seeded random order; due messages are delivered
  before each step, so a message can be seen by a rank stepping later in the same tick.

Collectives (all-reduce, gather-to-root, broadcast) run over the subdomain group 0..p-1 and
are matched by per-rank round counters.
"""
from __future__ import annotations

import asyncio
import heapq
import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Awaitable, Callable, Iterable, Sequence, TypeVar

import numpy as np
import numpy.typing as npt

from app.errors import ConfigurationError, ContractViolation, WatchdogExpired, WorkbenchError
from app.logging_config import get_logger
from app.runtime.delays import DelayModel, DelaySampler
from app.runtime.requests import Request, RequestKind, RequestState

logger = get_logger(__name__)

T = TypeVar("T")

TAG_ALLREDUCE = "allreduce"
TAG_REDUCE = "reduce"
TAG_BCAST = "bcast"
_COLLECTIVE_TAGS = (TAG_ALLREDUCE, TAG_REDUCE, TAG_BCAST)


class SchedulerMode(str, Enum):
    FREE = "free"
    LOCKSTEP = "lockstep"


@dataclass
class Message:
    src: int
    dst: int
    tag: str
    seq: int
    due: int
    payload: Any
    request: Request | None = None


@dataclass
class HaloRegistration:
    buffer: npt.NDArray[np.float64]
    sends: list[tuple[int, npt.NDArray[np.int64]]]
    recvs: dict[int, npt.NDArray[np.int64]]
    posts: int = 0


@dataclass
class AllreduceRound:
    captured: dict[int, float] = field(default_factory=dict)
    results: dict[int, float] = field(default_factory=dict)


class Runtime:
    def __init__(
        self,
        p: int,
        delay: DelayModel,
        mode: SchedulerMode = SchedulerMode.FREE,
        *,
        coarse_delay: DelayModel | None = None,
        extra_ranks: int = 0,
        trace: bool = False,
        record_allreduce: bool = False,
        watchdog_ticks: int | None = None,
    ):
        if p < 1:
            raise ConfigurationError(f"rank count must be >= 1, got {p}")
        if extra_ranks < 0:
            raise ConfigurationError("extra_ranks must be >= 0")
        self.p = p
        self.n_ranks = p + extra_ranks
        self.mode = SchedulerMode(mode)
        self.delay = delay
        self.coarse_delay = coarse_delay or delay
        self._halo_sampler = DelaySampler(delay, stream=0)
        self._coarse_sampler = DelaySampler(self.coarse_delay, stream=1)
        self._order_rng = np.random.default_rng([delay.seed, 2])
        self.watchdog_ticks = watchdog_ticks
        self.tick = 0

        self._heap: list[tuple[int, int, Message]] = []
        self._counter = itertools.count()
        self._channel_seq: dict[tuple[int, int, str], int] = {}
        self._channel_due: dict[tuple[int, int, str], int] = {}
        self._delivered_seq: dict[tuple[int, int, str], int] = {}
        self.fifo_violations = 0

        self._halo: dict[tuple[int, str], HaloRegistration] = {}
        self._recv_expect: dict[tuple[int, int, str], int] = {}
        self._pending_recvs: dict[tuple[int, int, str, int], Request] = {}

        self._ar_round = [0] * self.n_ranks
        self._ar_last: list[Request | None] = [None] * self.n_ranks
        self._ar_inbox: dict[tuple[int, int], dict[int, float]] = {}
        self._ar_requests: dict[tuple[int, int], Request] = {}
        # per-round contributions and results, kept only when recording
        self.record_allreduce = record_allreduce
        self.allreduce_log: dict[int, AllreduceRound] = {}

        self._red_round = [0] * self.n_ranks
        self._red_last: list[Request | None] = [None] * self.n_ranks
        self._red_inbox: dict[int, dict[int, float]] = {}
        self._red_root_requests: dict[int, Request] = {}

        self._bc_round = [0] * self.n_ranks
        self._bc_last: list[Request | None] = [None] * self.n_ranks
        self._bc_inbox: dict[tuple[int, int], npt.NDArray[np.float64]] = {}
        self._bc_requests: dict[tuple[int, int], tuple[Request, npt.NDArray[np.float64]]] = {}

        self._live: set[int] = set()
        self._live_refs: dict[int, Request] = {}

        self.trace_enabled = trace
        self.trace: list[str] = []

        self._resume_evt: list[asyncio.Event] = []
        self._parked_evt: asyncio.Event | None = None
        self._active: set[int] = set()
        self._exited: set[int] = set()
        self._expired = False
        self._aborted = False
        self._failure: BaseException | None = None
        self._comms = [Comm(self, r) for r in range(self.n_ranks)]

    # ------------------------------------------------------------------ requests

    def _new_request(self, kind: RequestKind, owner: int) -> Request:
        req = Request(kind=kind, owner=owner)
        self._live.add(id(req))
        self._live_refs[id(req)] = req
        return req

    def _complete(self, req: Request, result: Any = None) -> None:
        req._complete(result)
        if req.freed:
            self._release(req)

    def _release(self, req: Request) -> None:
        req.released = True
        self._live.discard(id(req))
        self._live_refs.pop(id(req), None)

    @property
    def live_requests(self) -> int:
        return len(self._live)

    def test(self, req: Request) -> bool:
        if req.freed:
            raise ContractViolation("test on a request handed to free_on_complete")
        if req.state == RequestState.PENDING:
            return False
        if not req.released and req.state == RequestState.COMPLETE:
            self._release(req)
        return True

    def test_all(self, reqs: Iterable[Request]) -> bool:
        reqs = list(reqs)
        # evaluate every handle so freed ones are always reported
        return all([self.test(r) for r in reqs])

    def free_on_complete(self, reqs: Iterable[Request]) -> None:
        for req in reqs:
            if req.freed:
                raise ContractViolation("request already freed")
            req.freed = True
            if req.done:
                self._release(req)

    # ------------------------------------------------------------------ messaging

    def _post(self, src: int, dst: int, tag: str, payload: Any, *, coarse: bool = False, request: Request | None = None) -> int:
        channel = (src, dst, tag)
        seq = self._channel_seq.get(channel, 0) + 1
        self._channel_seq[channel] = seq
        sampler = self._coarse_sampler if coarse else self._halo_sampler
        due = max(self.tick + sampler.draw(), self._channel_due.get(channel, 0))
        self._channel_due[channel] = due
        msg = Message(src=src, dst=dst, tag=tag, seq=seq, due=due, payload=payload, request=request)
        heapq.heappush(self._heap, (due, next(self._counter), msg))
        return seq

    def deliver_due(self, up_to: int | None = None) -> int:
        """Deliver every message due at or before `up_to` (default: current tick)."""
        limit = self.tick if up_to is None else up_to
        count = 0
        while self._heap and self._heap[0][0] <= limit:
            _, _, msg = heapq.heappop(self._heap)
            self._deliver(msg)
            count += 1
        return count

    def _deliver(self, msg: Message) -> None:
        channel = (msg.src, msg.dst, msg.tag)
        if msg.seq != self._delivered_seq.get(channel, 0) + 1:
            self.fifo_violations += 1
        self._delivered_seq[channel] = msg.seq
        if self.trace_enabled:
            self.trace.append(f"{self.tick},{msg.src},{msg.dst},{msg.tag},{msg.seq}")

        if msg.tag == TAG_ALLREDUCE:
            rnd, value = msg.payload
            # a rank that has returned never reads this round
            if msg.dst not in self._exited:
                self._ar_inbox.setdefault((msg.dst, rnd), {})[msg.src] = value
                self._try_complete_allreduce(msg.dst, rnd)
        elif msg.tag == TAG_REDUCE:
            rnd, value = msg.payload
            self._red_inbox.setdefault(rnd, {})[msg.src] = value
            self._try_complete_reduce(rnd)
        elif msg.tag == TAG_BCAST:
            rnd, value = msg.payload
            pending = self._bc_requests.pop((msg.dst, rnd), None)
            if pending is None:
                self._bc_inbox[(msg.dst, rnd)] = value
            else:
                req, buffer = pending
                np.copyto(buffer, value)
                self._complete(req, value)
        else:
            reg = self._halo.get((msg.dst, msg.tag))
            if reg is not None and msg.src in reg.recvs:
                # latest delivered value wins; FIFO per channel keeps it the newest sent
                reg.buffer[reg.recvs[msg.src]] = msg.payload
            recv_req = self._pending_recvs.pop((msg.dst, msg.src, msg.tag, msg.seq), None)
            if recv_req is not None:
                self._complete(recv_req)
        if msg.request is not None:
            self._complete(msg.request)

    def last_delivered_seq(self, src: int, dst: int, tag: str) -> int:
        return self._delivered_seq.get((src, dst, tag), 0)

    def pending_messages(self) -> int:
        return len(self._heap)

    # ------------------------------------------------------------------ halo exchange

    def register_halo(
        self,
        rank: int,
        tag: str,
        buffer: npt.NDArray[np.float64],
        sends: Sequence[tuple[int, npt.NDArray[np.int64]]],
        recvs: Sequence[tuple[int, npt.NDArray[np.int64]]],
    ) -> None:
        """Attach `buffer` to (rank, tag): sends read it at the given slots, receives write it."""
        self._check_rank(rank)
        if tag in _COLLECTIVE_TAGS:
            raise ContractViolation(f"tag {tag!r} is reserved for collectives")
        self._halo[(rank, tag)] = HaloRegistration(buffer=buffer, sends=list(sends), recvs=dict(recvs))

    def post_halo_exchange(self, rank: int, tag: str, values: npt.NDArray[np.float64] | None = None) -> list[Request]:
        """Send owned interface values to every neighbor; return one request per transfer.

        `values` defaults to the registered buffer and is read at call time.
        """
        reg = self._halo.get((rank, tag))
        if reg is None:
            raise ContractViolation(f"rank {rank}: no halo layout registered for tag {tag!r}")
        source = reg.buffer if values is None else values
        reg.posts += 1
        reqs: list[Request] = []
        for dst, slots in reg.sends:
            req = self._new_request(RequestKind.POINT_TO_POINT, rank)
            self._post(rank, dst, tag, np.array(source[slots], dtype=np.float64), request=req)
            reqs.append(req)
        for src in reg.recvs:
            key = (rank, src, tag)
            seq = self._recv_expect.get(key, 0) + 1
            self._recv_expect[key] = seq
            req = self._new_request(RequestKind.POINT_TO_POINT, rank)
            if self._delivered_seq.get((src, rank, tag), 0) >= seq:
                self._complete(req)
            else:
                self._pending_recvs[(rank, src, tag, seq)] = req
            reqs.append(req)
        return reqs

    # ------------------------------------------------------------------ collectives

    def _check_rank(self, rank: int) -> None:
        if not 0 <= rank < self.n_ranks:
            raise ContractViolation(f"rank {rank} out of range [0, {self.n_ranks})")

    def _check_root(self, root: int) -> None:
        if not 0 <= root < self.n_ranks:
            raise ContractViolation(f"root {root} out of range [0, {self.n_ranks})")

    @staticmethod
    def _check_outstanding(last: Request | None, what: str, rank: int) -> None:
        if last is not None and last.state == RequestState.PENDING:
            raise ContractViolation(f"rank {rank}: {what} posted while the previous one is outstanding")

    def i_allreduce_sum(self, rank: int, contribution: float) -> Request:
        if not 0 <= rank < self.p:
            raise ContractViolation(f"rank {rank} is not part of the all-reduce group")
        self._check_outstanding(self._ar_last[rank], "all-reduce", rank)
        rnd = self._ar_round[rank]
        self._ar_round[rank] += 1
        value = float(contribution)
        if self.record_allreduce:
            self.allreduce_log.setdefault(rnd, AllreduceRound()).captured[rank] = value
        req = self._new_request(RequestKind.ALLREDUCE, rank)
        self._ar_last[rank] = req
        self._ar_requests[(rank, rnd)] = req
        self._ar_inbox.setdefault((rank, rnd), {})[rank] = value
        for dst in range(self.p):
            if dst != rank:
                self._post(rank, dst, TAG_ALLREDUCE, (rnd, value))
        self._try_complete_allreduce(rank, rnd)
        return req

    def _try_complete_allreduce(self, rank: int, rnd: int) -> None:
        req = self._ar_requests.get((rank, rnd))
        inbox = self._ar_inbox.get((rank, rnd), {})
        if req is None or len(inbox) < self.p:
            return
        total = 0.0
        for src in range(self.p):
            total += inbox[src]
        del self._ar_requests[(rank, rnd)]
        del self._ar_inbox[(rank, rnd)]
        if self.record_allreduce:
            self.allreduce_log[rnd].results[rank] = total
        self._complete(req, total)

    def _drop_allreduce_state(self, rank: int) -> None:
        self._exited.add(rank)
        for key in [k for k in self._ar_inbox if k[0] == rank]:
            del self._ar_inbox[key]
        for key in [k for k in self._ar_requests if k[0] == rank]:
            del self._ar_requests[key]

    @property
    def allreduce_backlog(self) -> int:
        """Open all-reduce rounds still holding contributions."""
        return len(self._ar_inbox)

    def i_reduce_to_root(self, rank: int, contribution: float | None, root: int) -> Request:
        """Gather one scalar per subdomain rank into a length-p vector at `root`.

        A root outside the group (dedicated coarse rank) passes contribution=None.
        """
        self._check_rank(rank)
        self._check_root(root)
        self._check_outstanding(self._red_last[rank], "coarse reduction", rank)
        rnd = self._red_round[rank]
        self._red_round[rank] += 1
        req = self._new_request(RequestKind.REDUCE, rank)
        self._red_last[rank] = req
        if rank == root:
            self._red_root_requests[rnd] = req
            if rank < self.p:
                self._red_inbox.setdefault(rnd, {})[rank] = float(contribution)  # type: ignore[arg-type]
            self._try_complete_reduce(rnd)
        else:
            if rank >= self.p:
                raise ContractViolation(f"rank {rank} is not part of the coarse group")
            self._post(rank, root, TAG_REDUCE, (rnd, float(contribution)), coarse=True, request=req)  # type: ignore[arg-type]
        return req

    def _try_complete_reduce(self, rnd: int) -> None:
        req = self._red_root_requests.get(rnd)
        inbox = self._red_inbox.get(rnd, {})
        if req is None or len(inbox) < self.p:
            return
        r0 = np.array([inbox[src] for src in range(self.p)], dtype=np.float64)
        del self._red_root_requests[rnd]
        del self._red_inbox[rnd]
        self._complete(req, r0)

    def i_bcast(self, rank: int, buffer: npt.NDArray[np.float64], root: int) -> Request:
        self._check_rank(rank)
        self._check_root(root)
        self._check_outstanding(self._bc_last[rank], "broadcast", rank)
        rnd = self._bc_round[rank]
        self._bc_round[rank] += 1
        req = self._new_request(RequestKind.BROADCAST, rank)
        self._bc_last[rank] = req
        if rank == root:
            value = np.array(buffer, dtype=np.float64, copy=True)
            for dst in range(self.p):
                if dst != root:
                    self._post(root, dst, TAG_BCAST, (rnd, value), coarse=True)
            self._complete(req, value)
            return req
        early = self._bc_inbox.pop((rank, rnd), None)
        if early is not None:
            np.copyto(buffer, early)
            self._complete(req, early)
        else:
            self._bc_requests[(rank, rnd)] = (req, buffer)
        return req

    # ------------------------------------------------------------------ scheduling

    def comm(self, rank: int) -> Comm:
        self._check_rank(rank)
        return self._comms[rank]

    def advance(self, ticks: int = 1) -> None:
        """Close `ticks` ticks without running workers (delivering what falls due)."""
        for _ in range(ticks):
            self.deliver_due(self.tick)
            self.tick += 1

    async def run(self, workers: Sequence[Callable[[Comm], Awaitable[T]]]) -> list[T]:
        if len(workers) != self.n_ranks:
            raise ConfigurationError(f"{len(workers)} workers for {self.n_ranks} ranks")
        self._resume_evt = [asyncio.Event() for _ in range(self.n_ranks)]
        self._parked_evt = asyncio.Event()
        self._active = set(range(self.n_ranks))
        tasks = [asyncio.create_task(self._drive(r, fn)) for r, fn in enumerate(workers)]
        try:
            while self._active:
                if self.mode == SchedulerMode.LOCKSTEP:
                    order = sorted(self._active)
                else:
                    order = [int(r) for r in self._order_rng.permutation(sorted(self._active))]
                for r in order:
                    if r not in self._active:
                        continue
                    if self.mode == SchedulerMode.FREE:
                        self.deliver_due(self.tick)
                    await self._resume(r)
                if self.mode == SchedulerMode.LOCKSTEP:
                    self.deliver_due(self.tick)
                self.tick += 1
                if self.watchdog_ticks is not None and self.tick > self.watchdog_ticks and not self._expired:
                    self._expired = True
                    logger.warning("watchdog_expired", extra={"tick": self.tick})
        finally:
            results = await asyncio.gather(*tasks, return_exceptions=True)
        if self._failure is not None:
            raise self._failure
        for res in results:
            if isinstance(res, BaseException):
                raise res
        return list(results)  # type: ignore[arg-type]

    async def _drive(self, rank: int, fn: Callable[[Comm], Awaitable[T]]) -> T:
        await self._resume_evt[rank].wait()
        self._resume_evt[rank].clear()
        try:
            return await fn(self._comms[rank])
        except WatchdogExpired:
            raise
        except BaseException as e:
            if not self._aborted:
                self._aborted = True
                self._failure = e
            raise
        finally:
            self._active.discard(rank)
            self._drop_allreduce_state(rank)
            assert self._parked_evt is not None
            self._parked_evt.set()

    async def _resume(self, rank: int) -> None:
        assert self._parked_evt is not None
        self._parked_evt.clear()
        self._resume_evt[rank].set()
        await self._parked_evt.wait()

    async def _yield(self, rank: int) -> None:
        assert self._parked_evt is not None, "step() outside Runtime.run"
        self._parked_evt.set()
        await self._resume_evt[rank].wait()
        self._resume_evt[rank].clear()
        if self._aborted:
            raise WorkbenchError(f"rank {rank} stopped: a peer rank failed")
        if self._expired:
            raise WatchdogExpired(self.tick, self.watchdog_ticks or 0)

    def active_ranks(self) -> set[int]:
        return set(self._active)


class Comm:
    """Rank-bound view of the runtime handed to each worker."""

    def __init__(self, runtime: Runtime, rank: int):
        self.runtime = runtime
        self.rank = rank

    @property
    def tick(self) -> int:
        return self.runtime.tick

    @property
    def size(self) -> int:
        return self.runtime.p

    def register_halo(self, tag: str, buffer, sends, recvs) -> None:
        self.runtime.register_halo(self.rank, tag, buffer, sends, recvs)

    def post_halo_exchange(self, tag: str, values=None) -> list[Request]:
        return self.runtime.post_halo_exchange(self.rank, tag, values)

    def test(self, req: Request) -> bool:
        return self.runtime.test(req)

    def test_all(self, reqs: Iterable[Request]) -> bool:
        return self.runtime.test_all(reqs)

    def free_on_complete(self, reqs: Iterable[Request]) -> None:
        self.runtime.free_on_complete(reqs)

    def i_allreduce_sum(self, contribution: float) -> Request:
        return self.runtime.i_allreduce_sum(self.rank, contribution)

    def i_reduce_to_root(self, contribution: float | None, root: int) -> Request:
        return self.runtime.i_reduce_to_root(self.rank, contribution, root)

    def i_bcast(self, buffer, root: int) -> Request:
        return self.runtime.i_bcast(self.rank, buffer, root)

    async def step(self) -> None:
        """End this rank's current tick."""
        await self.runtime._yield(self.rank)

    async def wait(self, req: Request) -> None:
        while not self.test(req):
            await self.step()

    async def wait_all(self, reqs: Iterable[Request]) -> None:
        reqs = list(reqs)
        while not self.test_all(reqs):
            await self.step()

    async def allreduce_sum(self, contribution: float) -> float:
        req = self.i_allreduce_sum(contribution)
        await self.wait(req)
        return float(req.result)

    def others_active(self) -> bool:
        return bool(self.runtime.active_ranks() - {self.rank})


def spawn_ranks(
    p: int,
    delay: DelayModel,
    mode: SchedulerMode = SchedulerMode.FREE,
    **kwargs: Any,
) -> Runtime:
    return Runtime(p, delay, mode, **kwargs)
