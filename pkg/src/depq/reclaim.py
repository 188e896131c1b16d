"""Safe reclamation for nodes shared between two lists.

A node physically removed from one list may still be reachable from the
other, so removal alone never frees anything.  Each item carries a retire
flag: the first removal's test-and-set arms it, the second one observes it
set, proving the node is unreachable from both lists and may be retired.

Retired nodes then wait out a grace period.  In ``deferred`` mode nothing
is freed until the structure is closed (the default for correctness tests,
so reclamation bugs cannot masquerade as algorithm bugs).  In ``epoch``
mode every operation brackets itself with enter()/exit(); the global epoch
advances only when no thread is still inside an older epoch, and buckets
two epochs old are freed.  Freeing poisons the arena slot, so any late
access trips an assertion.
"""

from __future__ import annotations

import threading

from .atomics import AtomicCell
from .items import Arena

_QUIESCENT = -1

DEFERRED = "deferred"
EPOCH = "epoch"


class RetireProtocolError(AssertionError):
    """A node was reported unlinked more than twice."""


class Reclaimer:
    def __init__(self, arena: Arena, mode: str = DEFERRED, debug: bool = True):
        if mode not in (DEFERRED, EPOCH):
            raise ValueError(f"unknown reclaim mode {mode!r}")
        self.arena = arena
        self.mode = mode
        self._debug = debug
        self._lock = threading.Lock()
        self._epoch = AtomicCell(0, self._lock)
        self._slots: dict[int, AtomicCell] = {}
        self._buckets: dict[int, list[int]] = {}
        self._deferred: list[int] = []
        self._closed = False
        self.unlink_first = AtomicCell(0, self._lock)
        self.retired = AtomicCell(0, self._lock)
        self.freed = AtomicCell(0, self._lock)

    # -- retire-bit protocol ---------------------------------------------------

    def on_unlink(self, index: int) -> bool:
        """Record one physical removal of a node from one list.

        Returns False on the first removal (the node may still be reachable
        from the other list), True on the second, at which point the node
        has been handed to the grace-period machinery.  A third call is a
        caller bug.
        """
        prior = self.arena.item(index).unlinked.fetch_add(1, site="unlink-flag")
        if prior == 0:
            self.unlink_first.fetch_add(1)
            return False
        if prior == 1:
            self._retire(index)
            self.retired.fetch_add(1)
            return True
        if self._debug:
            raise RetireProtocolError(f"item {index} unlinked {prior + 1} times")
        return True

    def _retire(self, index: int) -> None:
        with self._lock:
            if self.mode == DEFERRED:
                self._deferred.append(index)
            else:
                self._buckets.setdefault(self._epoch._value, []).append(index)

    # -- epoch machinery ---------------------------------------------------------

    def _slot(self) -> AtomicCell:
        ident = threading.get_ident()
        slot = self._slots.get(ident)
        if slot is None:
            with self._lock:
                slot = self._slots.setdefault(ident, AtomicCell(_QUIESCENT, self._lock))
        return slot

    def enter(self) -> None:
        """Mark this thread active in the current epoch."""
        if self.mode == EPOCH:
            self._slot().store(self._epoch.load(), site="epoch-enter")

    def exit(self) -> None:
        if self.mode == EPOCH:
            self._slot().store(_QUIESCENT, site="epoch-exit")

    def try_advance(self) -> bool:
        """Advance the epoch if every active thread has observed it.

        On success, frees the buckets that are now two epochs old.
        """
        if self.mode != EPOCH:
            return False
        current = self._epoch.load()
        for slot in list(self._slots.values()):
            seen = slot.load()
            if seen != _QUIESCENT and seen != current:
                return False
        if not self._epoch.compare_and_swap(current, current + 1):
            return False
        self._free_older_than(current + 1 - 2)
        return True

    def _free_older_than(self, threshold: int) -> None:
        with self._lock:
            ready = [e for e in self._buckets if e <= threshold]
            victims = [idx for e in ready for idx in self._buckets.pop(e)]
        for idx in victims:
            self.arena.poison(idx)
            self.freed.fetch_add(1)

    # -- teardown -----------------------------------------------------------------

    def close(self) -> None:
        """Free everything still pending; the structure is being dropped."""
        if self._closed:
            return
        self._closed = True
        with self._lock:
            victims = list(self._deferred)
            self._deferred.clear()
            for bucket in self._buckets.values():
                victims.extend(bucket)
            self._buckets.clear()
        for idx in victims:
            self.arena.poison(idx)
            self.freed.fetch_add(1)

    def pending(self) -> int:
        with self._lock:
            return len(self._deferred) + sum(len(b) for b in self._buckets.values())

    def snapshot(self) -> dict:
        return {
            "mode": self.mode,
            "unlink_first": self.unlink_first.load(),
            "retired": self.retired.load(),
            "freed": self.freed.load(),
            "pending": self.pending(),
        }
