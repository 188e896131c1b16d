"""Generic double-ended queue built from two single-ended priority queues.

One queue is ordered ascending (serving extract-min), the other descending
(serving extract-max); every insert goes into both, ascending side first.
Extractions loop: pop the first item from their own queue and try to claim
it via its reservation flag.  A pop whose claim fails means the other end
already returned that item, so the loop simply pops again; emptiness of the
own queue means the whole structure is empty.

This composition is *dual-consumer*: at most one thread may run extract_min
and at most one extract_max at a time (inserters are unrestricted).  The
``make_multi_consumer`` wrappers lift it to arbitrary extractor counts,
either with one plain lock per end or with one combining instance per end;
inserts bypass both mechanisms.

When both underlying queues support arbitrary delete, an extraction can
optionally also delete its claimed item from the opposite queue.  That is
never needed for correctness (the claimed item would be skipped anyway) but
it stops stale items from accumulating.
"""

from __future__ import annotations

import threading
from typing import Callable

from .atomics import AtomicCell, SpinLock, checkpoint
from .combining import Combiner
from .items import MAX, MIN, Arena, PriorityQueue, try_reserve

TWO_LOCKS = "two-locks"
COMBINING = "combining"
MULTI_CONSUMER_MODES = (TWO_LOCKS, COMBINING)


class DualCounters:
    def __init__(self) -> None:
        lock = threading.Lock()
        self.reserve_failures = [AtomicCell(0, lock), AtomicCell(0, lock)]
        self.extract_successes = [AtomicCell(0, lock), AtomicCell(0, lock)]
        self.empty_returns = [AtomicCell(0, lock), AtomicCell(0, lock)]

    def snapshot(self) -> dict:
        return {
            "reserve_failures": [c.load() for c in self.reserve_failures],
            "extract_successes": [c.load() for c in self.extract_successes],
            "empty_returns": [c.load() for c in self.empty_returns],
        }


class DualDepq:
    """Dual-consumer double-ended priority queue over two PriorityQueues.

    ``reserve_listener``, when set, observes every reservation attempt as
    ``(item_index, end, won)``; the progress tests use it to show that every
    failed claim is explained by the other end's earlier success.
    """

    def __init__(self, arena: Arena, min_pq: PriorityQueue, max_pq: PriorityQueue,
                 use_optional_delete: bool = False):
        self.arena = arena
        self.min_pq = min_pq
        self.max_pq = max_pq
        # The delete shortcut needs delete support on both sides.
        self.use_optional_delete = (use_optional_delete
                                    and min_pq.has_delete and max_pq.has_delete)
        self.counters = DualCounters()
        self.reserve_listener: Callable[[int, int, bool], None] | None = None

    def insert(self, user_key: int) -> None:
        index = self.arena.new_item(user_key)
        self.min_pq.pq_insert(index)
        checkpoint("between-pq-inserts")
        self.max_pq.pq_insert(index)

    def extract_min(self) -> int | None:
        return self._extract(MIN)

    def extract_max(self) -> int | None:
        return self._extract(MAX)

    def _extract(self, end: int) -> int | None:
        # An extraction's first action is always a pop on its own queue, so
        # every extraction that runs at all touches shared state; there is
        # no "never started" case to reason about.
        own = self.min_pq if end == MIN else self.max_pq
        other = self.max_pq if end == MIN else self.min_pq
        while True:
            index = own.pq_extract_first()
            if index is None:
                self.counters.empty_returns[end].fetch_add(1)
                return None
            item = self.arena.item(index)
            won = try_reserve(item)
            if self.reserve_listener is not None:
                self.reserve_listener(index, end, won)
            if won:
                if self.use_optional_delete:
                    other.pq_delete(index)
                self.counters.extract_successes[end].fetch_add(1)
                return item.user_key
            self.counters.reserve_failures[end].fetch_add(1)


class LockedMultiDepq:
    """Multi-consumer wrapper: one mutual-exclusion lock per end.

    The locks are scheduler-aware spinlocks so that scripted and stepped
    tests can run through this wrapper without real blocking.
    """

    def __init__(self, inner: DualDepq):
        self.inner = inner
        self._end_locks = (SpinLock(), SpinLock())

    def insert(self, user_key: int) -> None:
        self.inner.insert(user_key)

    def extract_min(self) -> int | None:
        with self._end_locks[MIN]:
            return self.inner.extract_min()

    def extract_max(self) -> int | None:
        with self._end_locks[MAX]:
            return self.inner.extract_max()


class CombiningMultiDepq:
    """Multi-consumer wrapper: one combining instance per end.

    The per-request function is the dual-consumer extract; there is no
    batch-end maintenance to do here, so no finalizer is installed.
    """

    def __init__(self, inner: DualDepq, batch_cap: int = 64):
        self.inner = inner
        self._combiners = (
            Combiner(lambda _req: inner.extract_min(), batch_cap=batch_cap),
            Combiner(lambda _req: inner.extract_max(), batch_cap=batch_cap),
        )

    def insert(self, user_key: int) -> None:
        self.inner.insert(user_key)

    def extract_min(self) -> int | None:
        return self._combiners[MIN].announce(None)

    def extract_max(self) -> int | None:
        return self._combiners[MAX].announce(None)

    def combiner_stats(self, end: int):
        return self._combiners[end].stats


def make_multi_consumer(inner: DualDepq, mode: str, batch_cap: int = 64):
    if mode == TWO_LOCKS:
        return LockedMultiDepq(inner)
    if mode == COMBINING:
        return CombiningMultiDepq(inner, batch_cap=batch_cap)
    raise ValueError(f"unknown multi-consumer mode {mode!r}")
