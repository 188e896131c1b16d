"""Combining engine: a queue-structured lock whose holder serves a batch.

Threads announce a request by swapping a fresh record into the shared tail,
receiving the previous tail record as their own announcement cell.  They
publish the request into that cell, link the fresh record behind it, and
spin locally on the cell's wait flag.  The thread whose wait flag clears
with the completed flag still unset becomes the combiner: it walks the
record chain in FIFO order applying up to ``batch_cap`` requests, runs the
batch finalizer once, and hands the combiner role to the next record by
clearing its wait flag.

Consequences relied on elsewhere in this package: at most one combiner per
instance at a time, requests are served exactly once in announcement order,
and the finalizer runs after the batch's last request and before handoff.
The finalizer is therefore the right place for once-per-batch maintenance
such as physically deleting list prefixes.
"""

from __future__ import annotations

import threading
import time
from typing import Any, Callable

from .atomics import AtomicCell

_SPIN_BEFORE_YIELD = 64


class CombinerRecord:
    __slots__ = ("request", "result", "wait", "completed", "next_rec")

    def __init__(self, lock: threading.Lock):
        self.request: Any = None
        self.result: Any = None
        self.wait = AtomicCell(0, lock)
        self.completed = AtomicCell(0, lock)
        self.next_rec = AtomicCell(None, lock)


class CombinerStats:
    """Exact per-instance accounting (atomic, not sampled)."""

    def __init__(self) -> None:
        lock = threading.Lock()
        self.applied = AtomicCell(0, lock)
        self.batches = AtomicCell(0, lock)
        self.finalizes = AtomicCell(0, lock)
        self.gauge = AtomicCell(0, lock)            # combiners currently active
        self.gauge_violations = AtomicCell(0, lock)  # times a second combiner appeared
        self._hist_lock = lock
        self.batch_sizes: dict[int, int] = {}

    def record_batch(self, size: int) -> None:
        with self._hist_lock:
            self.batch_sizes[size] = self.batch_sizes.get(size, 0) + 1

    def snapshot(self) -> dict:
        return {
            "applied": self.applied.load(),
            "batches": self.batches.load(),
            "finalizes": self.finalizes.load(),
            "gauge_violations": self.gauge_violations.load(),
            "batch_sizes": dict(sorted(self.batch_sizes.items())),
        }


class Combiner:
    """One combining instance serving one hotspot (one end of a queue)."""

    def __init__(self, apply: Callable[[Any], Any],
                 finalize: Callable[[], None] | None = None,
                 batch_cap: int = 64):
        if batch_cap < 1:
            raise ValueError("batch_cap must be at least 1")
        self.batch_cap = batch_cap
        self._apply = apply
        self._finalize = finalize
        self._lock = threading.Lock()
        self._tail = AtomicCell(CombinerRecord(self._lock), self._lock)
        self._spare = threading.local()
        self.stats = CombinerStats()

    def _fresh_record(self) -> CombinerRecord:
        spare = getattr(self._spare, "rec", None)
        if spare is None:
            spare = CombinerRecord(self._lock)
        return spare

    def announce(self, request: Any) -> Any:
        """Submit a request; blocks until some combiner has applied it."""
        fresh = self._fresh_record()
        fresh.next_rec.store(None)
        fresh.wait.store(1)
        fresh.completed.store(0)
        cell = self._tail.swap(fresh, site="cc-swap")
        cell.request = request
        cell.next_rec.store(fresh, site="cc-link")
        # The received record is recycled as this thread's next fresh one.
        self._spare.rec = cell

        spins = 0
        while cell.wait.load(site="cc-spin"):
            spins += 1
            if spins % _SPIN_BEFORE_YIELD == 0:
                time.sleep(0)
        if cell.completed.load(site="cc-completed"):
            return cell.result

        # This thread is the combiner for the next batch.
        if self.stats.gauge.fetch_add(1) != 0:
            self.stats.gauge_violations.fetch_add(1)
        rec = cell
        served = 0
        while served < self.batch_cap:
            nxt = rec.next_rec.load(site="cc-read-next")
            if nxt is None:
                break
            rec.result = self._apply(rec.request)
            served += 1
            self.stats.applied.fetch_add(1)
            rec.completed.store(1, site="cc-set-completed")
            rec.wait.store(0, site="cc-clear-wait")
            rec = nxt
        if self._finalize is not None:
            self._finalize()
        self.stats.finalizes.fetch_add(1)
        self.stats.batches.fetch_add(1)
        self.stats.record_batch(served)
        self.stats.gauge.fetch_add(-1)
        # Handoff: whoever owns (or will receive) this record combines next.
        rec.wait.store(0, site="cc-handoff")
        return cell.result
