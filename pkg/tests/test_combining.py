"""The combining engine: batching, FIFO service, handoff, finalizers."""

import threading

import pytest

from depq.combining import Combiner
from depq.sched import ControlledScheduler


def test_batch_cap_must_be_positive():
    with pytest.raises(ValueError):
        Combiner(lambda r: r, batch_cap=0)


def test_single_caller_serves_itself_and_finalizes_once():
    finalized = []
    comb = Combiner(lambda r: r * 2, finalize=lambda: finalized.append(1))
    assert comb.announce(21) == 42
    assert finalized == [1]
    snap = comb.stats.snapshot()
    assert snap["applied"] == 1
    assert snap["batches"] == 1
    assert snap["batch_sizes"] == {1: 1}


def test_two_instances_are_independent():
    a = Combiner(lambda r: ("a", r))
    b = Combiner(lambda r: ("b", r))
    assert a.announce(1) == ("a", 1)
    assert b.announce(1) == ("b", 1)
    assert a.stats.snapshot()["batches"] == 1
    assert b.stats.snapshot()["batches"] == 1


def _park_announcers(sched, comb, count):
    """Spawn `count` workers announcing 0..count-1 and park each right after
    its announcement is published (before it first checks its wait flag),
    forcing a known announcement order."""
    for i in range(count):
        name = f"t{i}"
        sched.freeze(name, "cc-spin")
        sched.spawn(name, comb.announce, i)
        if i == 0:
            sched.start()
        sched.wait_frozen(name)


def test_scripted_batch_serves_all_in_announcement_order():
    applied = []

    def apply(req):
        applied.append(req)
        return req

    finalized = []
    comb = Combiner(apply, finalize=lambda: finalized.append(len(applied)))
    with ControlledScheduler() as sched:
        _park_announcers(sched, comb, 8)
        # First announcer becomes combiner and serves the whole batch.
        sched.thaw("t0")
        sched.join_worker("t0")
        for i in range(1, 8):
            sched.thaw(f"t{i}")
        sched.join_all()
        results = sched.results()

    assert applied == list(range(8))          # FIFO in announcement order
    assert results == {f"t{i}": i for i in range(8)}
    assert finalized == [8]                   # one finalize, after last apply
    assert comb.stats.snapshot()["batch_sizes"] == {8: 1}


def test_batch_cap_splits_into_two_batches_with_handoff():
    applied = []
    comb = Combiner(lambda r: applied.append(r) or r, batch_cap=4)
    with ControlledScheduler() as sched:
        _park_announcers(sched, comb, 8)
        sched.thaw("t0")
        sched.join_worker("t0")               # combiner #1 serves t0..t3
        assert applied == [0, 1, 2, 3]
        for i in range(1, 4):
            sched.thaw(f"t{i}")
            sched.join_worker(f"t{i}")
        sched.thaw("t4")                      # wakes as combiner #2
        sched.join_worker("t4")
        assert applied == list(range(8))
        for i in range(5, 8):
            sched.thaw(f"t{i}")
        sched.join_all()

    snap = comb.stats.snapshot()
    assert snap["batches"] == 2
    assert snap["finalizes"] == 2
    assert snap["batch_sizes"] == {4: 2}
    assert snap["gauge_violations"] == 0


def test_concurrent_announces_apply_exactly_once(fast_switching):
    per_thread = 300
    n_threads = 8
    seen = []
    lock = threading.Lock()

    def apply(req):
        with lock:
            seen.append(req)
        return req

    comb = Combiner(apply, batch_cap=16)
    errors = []

    def worker(base):
        try:
            for i in range(per_thread):
                req = (base, i)
                assert comb.announce(req) == req
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=worker, args=(t,)) for t in range(n_threads)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    assert not errors
    assert len(seen) == per_thread * n_threads
    assert len(set(seen)) == len(seen)        # exactly once, no duplicates
    snap = comb.stats.snapshot()
    assert snap["applied"] == per_thread * n_threads
    assert snap["finalizes"] == snap["batches"]
    assert snap["gauge_violations"] == 0
    assert sum(size * count for size, count in snap["batch_sizes"].items()) \
        == per_thread * n_threads
    assert max(snap["batch_sizes"]) <= 16


def test_every_announce_terminates_under_fair_stepping():
    # No lost wakeups: drive four announcers to completion with a seeded
    # random walk over every instrumented step, spins included.
    from depq.sched import ControlledScheduler, random_walk

    for seed in (1, 2, 3):
        comb = Combiner(lambda r: r * 10, batch_cap=2)
        sched = ControlledScheduler(stepping=True, step_limit=50_000)
        with sched:
            for i in range(4):
                sched.spawn(f"t{i}", comb.announce, i)
            sched.drive(random_walk(seed))
            assert sched.results() == {f"t{i}": i * 10 for i in range(4)}
        snap = comb.stats.snapshot()
        assert snap["applied"] == 4
        assert snap["finalizes"] == snap["batches"]


def check_fifo(spans, apply_seq):
    """If request a fully completed before request b was invoked, a must
    have been applied first.  Violation: some request applied after b has a
    response stamp below b's invocation stamp."""
    by_apply = sorted(apply_seq, key=apply_seq.get)
    n = len(by_apply)
    suffix_min_resp = [float("inf")] * (n + 1)
    for pos in range(n - 1, -1, -1):
        suffix_min_resp[pos] = min(suffix_min_resp[pos + 1], spans[by_apply[pos]][1])
    for pos, req in enumerate(by_apply):
        assert suffix_min_resp[pos + 1] >= spans[req][0], (
            f"request applied after {req} completed before it was invoked")


def test_fifo_respects_completion_order(fast_switching):
    clock = threading.Lock()
    stamp = [0]

    def tick():
        with clock:
            stamp[0] += 1
            return stamp[0]

    apply_seq = {}

    def apply(req):
        apply_seq[req] = tick()  # combiner-only, no extra locking needed
        return req

    comb = Combiner(apply, batch_cap=8)
    spans = {}
    span_lock = threading.Lock()

    def worker(base):
        for i in range(200):
            req = (base, i)
            t0 = tick()
            comb.announce(req)
            t1 = tick()
            with span_lock:
                spans[req] = (t0, t1)

    threads = [threading.Thread(target=worker, args=(t,)) for t in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    assert len(apply_seq) == 6 * 200
    check_fifo(spans, apply_seq)
