"""The generic two-queue construction and its multi-consumer wrappers."""

import random
import threading
from collections import Counter

import pytest

from depq.dual_depq import (COMBINING, TWO_LOCKS, DualDepq, make_multi_consumer)
from depq.items import MAX, MIN, Arena
from depq.lincheck import Recorder, Verdict, check
from depq.oracle import LockedHeapPq, SeqDepq
from depq.ordered_list import ListPair, ListPq
from depq.sched import ControlledScheduler
from depq import scenarios


def heap_dual(use_optional_delete=False):
    arena = Arena()
    return DualDepq(arena, LockedHeapPq(arena),
                    LockedHeapPq(arena, descending=True),
                    use_optional_delete=use_optional_delete)


def list_dual():
    arena = Arena()
    pair = ListPair(arena)
    return DualDepq(arena, ListPq(pair, MIN), ListPq(pair, MAX))


@pytest.fixture(params=["heap", "list"])
def dual(request):
    return heap_dual() if request.param == "heap" else list_dual()


def test_single_key_comes_back_from_either_end(dual):
    dual.insert(7)
    assert dual.extract_min() == 7
    dual.insert(7)
    assert dual.extract_max() == 7


def test_three_keys_drain_in_order(dual):
    for k in (1, 2, 3):
        dual.insert(k)
    assert dual.extract_min() == 1
    assert dual.extract_min() == 2
    assert dual.extract_min() == 3
    assert dual.extract_min() is None


def test_extract_max_order(dual):
    for k in (1, 2, 3):
        dual.insert(k)
    assert [dual.extract_max() for _ in range(4)] == [3, 2, 1, None]


def test_empty_queue_signals_none(dual):
    assert dual.extract_min() is None
    assert dual.extract_max() is None


def test_pre_reserved_item_is_skipped(dual):
    for k in (1, 2):
        dual.insert(k)
    # claim the smaller item behind the queue's back
    for i in dual.arena.all_indices():
        item = dual.arena.item(i)
        if item.key is not None and item.key.user_key == 1:
            assert item.reserved.test_and_set() == 0
    assert dual.extract_min() == 2
    assert dual.extract_min() is None


def test_random_traffic_matches_oracle(dual):
    rng = random.Random(5150)
    oracle = SeqDepq()
    for _ in range(3000):
        roll = rng.random()
        if roll < 0.5:
            k = rng.randrange(64)
            dual.insert(k)
            oracle.insert(k)
        elif roll < 0.75:
            assert dual.extract_min() == oracle.extract_min()
        else:
            assert dual.extract_max() == oracle.extract_max()


def test_optional_delete_requires_support_on_both_sides():
    assert heap_dual(use_optional_delete=True).use_optional_delete is True
    arena = Arena()
    pair = ListPair(arena)
    mixed = DualDepq(arena, ListPq(pair, MIN), ListPq(pair, MAX),
                     use_optional_delete=True)
    assert mixed.use_optional_delete is False  # lists advertise no delete


def test_optional_delete_strips_stale_items_from_other_queue():
    with_delete = heap_dual(use_optional_delete=True)
    naive = heap_dual(use_optional_delete=False)
    for d in (with_delete, naive):
        for k in (1, 2, 3):
            d.insert(k)
    assert with_delete.extract_min() == naive.extract_min() == 1
    assert len(with_delete.max_pq) == 2     # 1 deleted eagerly
    assert len(naive.max_pq) == 3           # 1 still parked as garbage
    assert with_delete.extract_min() == naive.extract_min() == 2
    assert len(with_delete.max_pq) == 1
    assert len(naive.max_pq) == 3           # now trails by two
    # the garbage never surfaces: both agree on every later answer
    assert with_delete.extract_max() == naive.extract_max() == 3
    assert with_delete.extract_max() is None and naive.extract_max() is None


def test_insert_frozen_between_queues_is_visible_to_min_only():
    d = heap_dual()
    recorder = Recorder()
    recorded = recorder.wrap(d)
    with ControlledScheduler() as sched:
        sched.freeze("ins", "between-pq-inserts")
        sched.spawn("ins", recorded.insert, 7)
        sched.start()
        sched.wait_frozen("ins")
        # the half-inserted key must never come out of the max end ...
        assert recorded.extract_max() is None
        # ... but the min end may already return it
        assert recorded.extract_min() == 7
        history = recorder.snapshot()
        sched.thaw("ins")
    assert check(history).verdict is Verdict.LINEARIZABLE


def test_counterexample_schedule_rejected_by_checker():
    outcome = scenarios.run_counterexample()
    assert outcome.ok, outcome.details
    assert outcome.details["verdict"] == "NOT_LINEARIZABLE"


def test_reserve_failures_are_charged_to_other_end_successes():
    d = heap_dual()
    log = []
    d.reserve_listener = lambda idx, end, won: log.append((idx, end, won))
    for k in range(40):
        d.insert(k)
    # interleave single-consumer extractions from both ends
    rng = random.Random(3)
    for _ in range(60):
        if rng.random() < 0.5:
            d.extract_min()
        else:
            d.extract_max()
    winners = {}
    for pos, (idx, end, won) in enumerate(log):
        if won:
            winners[idx] = (pos, end)
    for pos, (idx, end, won) in enumerate(log):
        if not won:
            assert idx in winners, "failed claim with no winner"
            win_pos, win_end = winners[idx]
            assert win_pos < pos, "claim failed before anyone succeeded"
            assert win_end != end, "winner was not the opposite end"


def test_adversary_schedule_starves_one_extractor():
    # One end can be made to retry without bound while the other end keeps
    # succeeding; retries grow linearly with adversary rounds.
    def run_rounds(rounds):
        d = heap_dual()
        sched = ControlledScheduler(stepping=True)
        stop = object()

        def victim(_state):
            return d.extract_max()

        def adversary(_state):
            for k in range(rounds):
                d.insert(k)
                assert d.extract_min() == k

        with sched:
            sched.spawn("victim", victim, None)
            sched.spawn("adversary", adversary, None)
            sched.start()
            for _ in range(rounds):
                # adversary inserts a key and immediately claims it ...
                sched.run_until("adversary", "pq-insert")
                sched.grant("adversary")          # insert into min queue
                sched.run_until("adversary", "pq-insert")
                sched.grant("adversary")          # insert into max queue
                sched.run_until("adversary", "reserve")
                sched.grant("adversary")          # claim succeeds
                # ... then the victim pops the stale item and fails its claim
                sched.run_until("victim", "pq-extract")
                sched.grant("victim")
                sched.run_until("victim", "reserve")
                sched.grant("victim")
            sched.run_to_completion("adversary")
            sched.run_to_completion("victim")
        return d.counters.reserve_failures[MAX].load()

    assert run_rounds(10) == 10
    assert run_rounds(100) == 100


@pytest.mark.parametrize("mode", [TWO_LOCKS, COMBINING])
def test_multi_consumer_single_threaded_equivalence(mode):
    plain = heap_dual()
    wrapped = make_multi_consumer(heap_dual(), mode)
    rng = random.Random(777)
    ops = []
    for _ in range(500):
        roll = rng.random()
        if roll < 0.5:
            ops.append(("insert", rng.randrange(32)))
        elif roll < 0.75:
            ops.append(("extract_min", None))
        else:
            ops.append(("extract_max", None))
    for name, arg in ops:
        a = getattr(plain, name)(*([arg] if arg is not None else []))
        b = getattr(wrapped, name)(*([arg] if arg is not None else []))
        assert a == b


@pytest.mark.parametrize("mode", [TWO_LOCKS, COMBINING])
def test_multi_consumer_window_histories_linearizable(mode):
    from depq.lincheck import Verdict
    from depq.workload import WorkloadConfig, run_stress

    cfg = WorkloadConfig(impl="dual-heap", mode=mode, seed=808)
    outcome = run_stress(cfg, windows=40)
    assert outcome.failed is None
    assert all(w.verdict is Verdict.LINEARIZABLE for w in outcome.windows)


@pytest.mark.parametrize("mode", [TWO_LOCKS, COMBINING])
def test_multi_consumer_stress_accounting(mode, fast_switching):
    wrapped = make_multi_consumer(heap_dual(), mode)
    inner = wrapped.inner
    per_thread = 1000
    inserted = Counter()
    returned = Counter()
    lock = threading.Lock()

    def inserter(seed):
        rng = random.Random(seed)
        mine = []
        for _ in range(per_thread):
            k = rng.randrange(100)
            wrapped.insert(k)
            mine.append(k)
        with lock:
            inserted.update(mine)

    def extractor(end):
        op = wrapped.extract_min if end == MIN else wrapped.extract_max
        mine = []
        for _ in range(per_thread):
            got = op()
            if got is not None:
                mine.append(got)
        with lock:
            returned.update(mine)

    threads = ([threading.Thread(target=inserter, args=(s,)) for s in (1, 2)]
               + [threading.Thread(target=extractor, args=(MIN,)) for _ in range(4)]
               + [threading.Thread(target=extractor, args=(MAX,)) for _ in range(4)])
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    remaining = Counter(inner.arena.item(i).user_key
                        for i in inner.min_pq.contents()
                        if inner.arena.item(i).reserved.load() == 0)
    assert inserted == returned + remaining
    # every claim failure at one end is covered by a success at the other
    fails = [c.load() for c in inner.counters.reserve_failures]
    wins = [c.load() for c in inner.counters.extract_successes]
    assert fails[MIN] <= wins[MAX]
    assert fails[MAX] <= wins[MIN]
