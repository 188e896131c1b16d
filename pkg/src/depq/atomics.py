"""Single-word atomic cells and the instrumentation hook used by the
controlled scheduler.

Every shared word in this package lives in an :class:`AtomicCell`.  Plain
loads and stores of a Python attribute are already atomic under the GIL;
the read-modify-write operations (CAS, fetch-or, swap, ...) take a lock so
they are atomic on any Python implementation.

Each operation optionally names a *site* (a short label for the calling
code location).  When a controller is installed, the calling thread pauses
at that site before the operation executes.  This is what lets the test
scheduler freeze a thread "immediately before its CAS" or explore every
interleaving of two operations.  With no controller installed the check is
a single global load, so production use pays almost nothing.
"""

from __future__ import annotations

import threading
import time
from typing import Any, Protocol


class TraceController(Protocol):
    def pause(self, site: str) -> None: ...


_controller: TraceController | None = None


def set_controller(controller: TraceController | None) -> None:
    """Install (or clear) the global trace controller.

    Only one controller may be active at a time; tests install one around
    each scenario.
    """
    global _controller
    _controller = controller


def current_controller() -> TraceController | None:
    return _controller


def checkpoint(site: str) -> None:
    """A pure pause point with no associated memory operation.

    Used where a scenario needs to freeze a thread between two operations
    that live in different modules (e.g. between the two underlying
    priority-queue inserts of one logical insert).
    """
    c = _controller
    if c is not None:
        c.pause(site)


class SpinLock:
    """Mutual exclusion via test-and-set with bounded spin then yield.

    Unlike ``threading.Lock``, a blocked acquirer keeps reaching its pause
    site, so the controlled scheduler can still step or freeze it; never
    hold this lock across a real blocking call.
    """

    def __init__(self) -> None:
        self._held = AtomicCell(0)

    def acquire(self) -> None:
        spins = 0
        while self._held.test_and_set(site="lock-acquire") != 0:
            spins += 1
            if spins % 64 == 0:
                time.sleep(0)

    def release(self) -> None:
        self._held.store(0, site="lock-release")

    def __enter__(self) -> "SpinLock":
        self.acquire()
        return self

    def __exit__(self, *exc: object) -> None:
        self.release()


class AtomicCell:
    """One atomically updatable word holding an arbitrary value."""

    __slots__ = ("_value", "_lock")

    def __init__(self, value: Any = 0, lock: threading.Lock | None = None):
        self._value = value
        # RMW lock; may be shared between many cells of one structure.
        self._lock = lock if lock is not None else threading.Lock()

    def load(self, site: str | None = None) -> Any:
        if site is not None and _controller is not None:
            _controller.pause(site)
        return self._value

    def store(self, value: Any, site: str | None = None) -> None:
        if site is not None and _controller is not None:
            _controller.pause(site)
        self._value = value

    def swap(self, value: Any, site: str | None = None) -> Any:
        if site is not None and _controller is not None:
            _controller.pause(site)
        with self._lock:
            prior = self._value
            self._value = value
            return prior

    def compare_and_swap(self, expected: Any, new: Any, site: str | None = None) -> bool:
        """Set the cell to ``new`` iff it currently equals ``expected``."""
        if site is not None and _controller is not None:
            _controller.pause(site)
        with self._lock:
            if self._value == expected:
                self._value = new
                return True
            return False

    def fetch_or(self, bits: int, site: str | None = None) -> int:
        """OR ``bits`` into the cell; returns the prior value."""
        if site is not None and _controller is not None:
            _controller.pause(site)
        with self._lock:
            prior = self._value
            self._value = prior | bits
            return prior

    def fetch_add(self, delta: int, site: str | None = None) -> int:
        """Add ``delta`` to the cell; returns the prior value."""
        if site is not None and _controller is not None:
            _controller.pause(site)
        with self._lock:
            prior = self._value
            self._value = prior + delta
            return prior

    def test_and_set(self, site: str | None = None) -> int:
        """Set the low bit; returns the prior value (0 iff this call set it)."""
        return self.fetch_or(1, site)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"AtomicCell({self._value!r})"


class SpinLock:
    """Mutual exclusion via test-and-set with bounded spin then yield.

    Unlike ``threading.Lock``, a blocked acquirer keeps reaching its pause
    site, so the controlled scheduler can still step or freeze it; never
    hold this lock across a real blocking call.
    """

    def __init__(self) -> None:
        self._held = AtomicCell(0)

    def acquire(self) -> None:
        spins = 0
        while self._held.test_and_set(site="lock-acquire") != 0:
            spins += 1
            if spins % 64 == 0:
                time.sleep(0)

    def release(self) -> None:
        self._held.store(0, site="lock-release")

    def __enter__(self) -> "SpinLock":
        self.acquire()
        return self

    def __exit__(self, *exc: object) -> None:
        self.release()
