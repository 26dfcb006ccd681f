import asyncio

import numpy as np
import pytest

from app.errors import ConfigurationError, ContractViolation, WatchdogExpired
from app.runtime import DelayModel, Request, RequestState, SchedulerMode, spawn_ranks


def _pair(delay: DelayModel, mode=SchedulerMode.LOCKSTEP, **kwargs):
    """Two ranks exchanging one slot each way on tag 'x'."""
    rt = spawn_ranks(2, delay, mode, **kwargs)
    bufs = [np.array([10.0, 0.0]), np.array([0.0, 20.0])]
    rt.register_halo(0, "x", bufs[0], sends=[(1, np.array([0]))], recvs=[(1, np.array([1]))])
    rt.register_halo(1, "x", bufs[1], sends=[(0, np.array([1]))], recvs=[(0, np.array([0]))])
    return rt, bufs


def test_delay_parse():
    assert DelayModel.parse("immediate").max_delay == 0
    assert DelayModel.parse("fixed:3").label() == "fixed:3"
    model = DelayModel.parse("uniform:0:10", seed=4)
    assert (model.lo, model.hi, model.seed) == (0, 10, 4)
    with pytest.raises(ValueError):
        DelayModel.parse("uniform:5:1")
    with pytest.raises(ValueError):
        DelayModel.parse("gaussian:1")


def test_null_request_tests_true():
    rt = spawn_ranks(1, DelayModel.immediate())
    req = Request.null()
    assert req.state == RequestState.NULL
    assert rt.test(req)


def test_fixed_delay_delivers_after_three_ticks():
    rt, bufs = _pair(DelayModel.fixed(3), trace=True)
    sends = rt.post_halo_exchange(0, "x")
    assert len(sends) == 2
    rt.advance(3)
    assert not rt.test(sends[0])
    assert bufs[1][0] == 0.0
    rt.advance(1)
    assert rt.test(sends[0])
    assert bufs[1][0] == 10.0
    assert rt.trace == ["3,0,1,x,1"]


def test_latest_value_wins_in_fifo_order():
    rt, bufs = _pair(DelayModel.uniform(0, 5, seed=3))
    for value in (1.0, 2.0, 3.0):
        bufs[0][0] = value
        rt.free_on_complete(rt.post_halo_exchange(0, "x"))
        rt.advance(1)
    rt.advance(10)
    assert bufs[1][0] == 3.0
    assert rt.fifo_violations == 0


def test_no_neighbors_gives_empty_request_set():
    rt = spawn_ranks(1, DelayModel.immediate())
    rt.register_halo(0, "x", np.zeros(3), sends=[], recvs=[])
    reqs = rt.post_halo_exchange(0, "x")
    assert reqs == []
    assert rt.test_all(reqs)


def test_tags_do_not_share_slots():
    rt, bufs = _pair(DelayModel.immediate())
    snap = [np.array([7.0, 0.0]), np.array([0.0, 0.0])]
    rt.register_halo(0, "snapshot", snap[0], sends=[(1, np.array([0]))], recvs=[(1, np.array([1]))])
    rt.register_halo(1, "snapshot", snap[1], sends=[(0, np.array([1]))], recvs=[(0, np.array([0]))])
    rt.post_halo_exchange(0, "snapshot")
    rt.advance(1)
    assert snap[1][0] == 7.0
    assert bufs[1][0] == 0.0


def test_unknown_tag_and_reserved_tag():
    rt, _ = _pair(DelayModel.immediate())
    with pytest.raises(ContractViolation):
        rt.post_halo_exchange(0, "nope")
    with pytest.raises(ContractViolation):
        rt.register_halo(0, "allreduce", np.zeros(1), [], [])


def test_test_all_with_pending_is_false():
    rt, _ = _pair(DelayModel.fixed(2))
    done = Request.null()
    pending = rt.post_halo_exchange(0, "x")[0]
    assert not rt.test_all([done, pending])


def test_free_then_delivery_still_happens():
    rt, bufs = _pair(DelayModel.fixed(1))
    reqs = rt.post_halo_exchange(0, "x")
    rt.free_on_complete(reqs)
    rt.advance(2)
    assert bufs[1][0] == 10.0
    with pytest.raises(ContractViolation):
        rt.test(reqs[0])


def test_free_twice_is_a_violation():
    rt, _ = _pair(DelayModel.immediate())
    reqs = rt.post_halo_exchange(0, "x")
    rt.free_on_complete(reqs)
    with pytest.raises(ContractViolation):
        rt.free_on_complete(reqs)


@pytest.mark.slow
def test_post_and_free_loop_keeps_live_requests_bounded():
    rt, _ = _pair(DelayModel.fixed(2))
    peak = 0
    for _ in range(100_000):
        rt.free_on_complete(rt.post_halo_exchange(0, "x"))
        rt.free_on_complete(rt.post_halo_exchange(1, "x"))
        rt.advance(1)
        peak = max(peak, rt.live_requests)
    assert peak <= 16


def test_allreduce_sums_in_rank_order():
    rt = spawn_ranks(3, DelayModel.immediate())
    reqs = [rt.i_allreduce_sum(r, float(r + 1)) for r in range(3)]
    rt.advance(1)
    assert all(rt.test(req) for req in reqs)
    assert [req.result for req in reqs] == [6.0, 6.0, 6.0]


def test_allreduce_single_rank_is_immediate():
    rt = spawn_ranks(1, DelayModel.fixed(5))
    req = rt.i_allreduce_sum(0, 4.5)
    assert rt.test(req)
    assert req.result == 4.5


def test_allreduce_rounds_never_mix():
    rt = spawn_ranks(2, DelayModel.uniform(0, 4, seed=11), record_allreduce=True)
    first = [rt.i_allreduce_sum(r, 1.0) for r in range(2)]
    rt.advance(6)
    assert all(rt.test(req) for req in first)
    second = [rt.i_allreduce_sum(0, 10.0), rt.i_allreduce_sum(1, 20.0)]
    rt.advance(6)
    assert [req.result for req in second] == [30.0, 30.0]
    assert rt.allreduce_log[1].captured == {0: 10.0, 1: 20.0}


def test_concurrent_allreduce_is_rejected():
    rt = spawn_ranks(2, DelayModel.fixed(3))
    rt.i_allreduce_sum(0, 1.0)
    with pytest.raises(ContractViolation):
        rt.i_allreduce_sum(0, 2.0)


def test_reduce_to_root_gathers_vector():
    rt = spawn_ranks(2, DelayModel.immediate())
    root_req = rt.i_reduce_to_root(0, 5.0, root=0)
    rt.i_reduce_to_root(1, 7.0, root=0)
    assert not rt.test(root_req)
    rt.advance(1)
    assert rt.test(root_req)
    assert root_req.result.tolist() == [5.0, 7.0]


def test_reduce_single_rank_is_immediate():
    rt = spawn_ranks(1, DelayModel.immediate())
    req = rt.i_reduce_to_root(0, 2.5, root=0)
    assert rt.test(req)
    assert req.result.tolist() == [2.5]


def test_reduce_respects_fixed_delay():
    rt = spawn_ranks(2, DelayModel.fixed(5))
    root_req = rt.i_reduce_to_root(0, 1.0, root=0)
    rt.i_reduce_to_root(1, 2.0, root=0)
    for _ in range(5):
        assert not rt.test(root_req)
        rt.advance(1)
    rt.advance(1)
    assert rt.test(root_req)


def test_bcast_captures_root_buffer_at_post():
    rt = spawn_ranks(3, DelayModel.fixed(1))
    root_buf = np.array([1.0, 2.0])
    recv = [np.zeros(2), np.zeros(2)]
    root_req = rt.i_bcast(0, root_buf, root=0)
    assert rt.test(root_req)
    root_buf[:] = -1.0
    reqs = [rt.i_bcast(r, recv[r - 1], root=0) for r in (1, 2)]
    rt.advance(2)
    assert all(rt.test(req) for req in reqs)
    assert [b.tolist() for b in recv] == [[1.0, 2.0], [1.0, 2.0]]


def test_bcast_single_rank_leaves_buffer():
    rt = spawn_ranks(1, DelayModel.immediate())
    buf = np.array([3.0, 4.0])
    assert rt.test(rt.i_bcast(0, buf, root=0))
    assert buf.tolist() == [3.0, 4.0]


def test_dedicated_root_outside_group():
    rt = spawn_ranks(2, DelayModel.immediate(), extra_ranks=1)
    root_req = rt.i_reduce_to_root(2, None, root=2)
    rt.i_reduce_to_root(0, 1.0, root=2)
    rt.i_reduce_to_root(1, 2.0, root=2)
    rt.advance(1)
    assert rt.test(root_req)
    assert root_req.result.tolist() == [1.0, 2.0]
    with pytest.raises(ContractViolation):
        rt.i_allreduce_sum(2, 1.0)


def _trace_of(seed: int) -> list[str]:
    rt = spawn_ranks(3, DelayModel.uniform(0, 10, seed=seed), SchedulerMode.FREE, trace=True)

    async def worker(comm):
        for _ in range(5):
            await comm.allreduce_sum(float(comm.rank))
        return comm.tick

    asyncio.run(rt.run([worker] * 3))
    return rt.trace


def test_same_seed_same_trace():
    assert _trace_of(7) == _trace_of(7)
    assert len(_trace_of(7)) == 5 * 3 * 2


def test_single_rank_collective_completes_after_one_step():
    rt = spawn_ranks(1, DelayModel.immediate(), SchedulerMode.LOCKSTEP)

    async def worker(comm):
        value = await comm.allreduce_sum(3.0)
        await comm.step()
        return value, comm.tick

    [(value, tick)] = asyncio.run(rt.run([worker]))
    assert value == 3.0
    assert tick == 1


def test_lockstep_worker_sees_message_next_tick():
    rt, bufs = _pair(DelayModel.immediate())
    seen = []

    async def sender(comm):
        comm.post_halo_exchange("x")
        await comm.step()

    async def receiver(comm):
        seen.append(float(bufs[1][0]))
        await comm.step()
        seen.append(float(bufs[1][0]))

    asyncio.run(rt.run([sender, receiver]))
    assert seen == [0.0, 10.0]


def test_watchdog_stops_workers():
    rt = spawn_ranks(2, DelayModel.immediate(), watchdog_ticks=5)
    stopped = []

    async def spinner(comm):
        try:
            while True:
                await comm.step()
        except WatchdogExpired as e:
            stopped.append(e.tick)
            return comm.tick

    asyncio.run(rt.run([spinner, spinner]))
    assert len(stopped) == 2
    assert all(t > 5 for t in stopped)


def test_worker_failure_propagates():
    rt = spawn_ranks(2, DelayModel.immediate())

    async def bad(comm):
        await comm.step()
        raise RuntimeError("boom")

    async def good(comm):
        while True:
            await comm.step()

    with pytest.raises(RuntimeError, match="boom"):
        asyncio.run(rt.run([bad, good]))


def test_run_needs_one_worker_per_rank():
    rt = spawn_ranks(2, DelayModel.immediate())

    async def idle(comm):
        return None

    with pytest.raises(ConfigurationError):
        asyncio.run(rt.run([idle]))


def test_halo_receives_match_rounds_by_sequence_number():
    rt, bufs = _pair(DelayModel.fixed(3))
    bufs[0][0] = 1.0
    rt.post_halo_exchange(0, "x")
    first = rt.post_halo_exchange(1, "x")[1]
    rt.advance(1)
    bufs[0][0] = 2.0
    rt.post_halo_exchange(0, "x")
    second = rt.post_halo_exchange(1, "x")[1]
    rt.advance(3)
    assert rt.test(first)
    assert not rt.test(second)
    assert bufs[1][0] == 1.0
    rt.advance(1)
    assert rt.test(second)
    assert bufs[1][0] == 2.0


def _allreduce_rounds(record: bool):
    rt = spawn_ranks(3, DelayModel.uniform(0, 3, seed=5), SchedulerMode.FREE, record_allreduce=record)

    async def worker(comm):
        total = 0.0
        for _ in range(4):
            total += await comm.allreduce_sum(float(comm.rank))
        return total

    totals = asyncio.run(rt.run([worker] * 3))
    return rt, totals


def test_allreduce_log_only_when_recording():
    rt, totals = _allreduce_rounds(False)
    assert totals == [12.0, 12.0, 12.0]
    assert rt.allreduce_log == {}
    assert rt.allreduce_backlog == 0

    rt, _ = _allreduce_rounds(True)
    assert sorted(rt.allreduce_log) == [0, 1, 2, 3]
    assert all(rnd.results == {0: 3.0, 1: 3.0, 2: 3.0} for rnd in rt.allreduce_log.values())


def test_allreduce_contributions_to_a_returned_rank_are_dropped():
    rt = spawn_ranks(2, DelayModel.fixed(2), SchedulerMode.LOCKSTEP)

    async def leaves(comm):
        return None

    async def posts(comm):
        req = comm.i_allreduce_sum(1.0)
        for _ in range(4):
            await comm.step()
        return comm.test(req)

    assert asyncio.run(rt.run([leaves, posts])) == [None, False]
    assert rt.allreduce_backlog == 0
