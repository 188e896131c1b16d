"""Controlled scheduler for deterministic concurrency scenarios.

Worker threads pause at every instrumented shared-memory operation (see
:mod:`depq.atomics`).  The scheduler runs in one of two modes:

* **free mode** (default): threads run at full speed; pause() only checks
  freeze rules.  A freeze rule parks one thread the Nth time it reaches a
  named site, which is how scenarios hold a thread "immediately before its
  CAS" while everything else makes progress.

* **stepping mode**: every registered thread parks at every site and a
  driver grants one step at a time.  Drivers include scripted runs
  (``run_until`` / ``grant``), a seeded random walk, and the exhaustive
  interleaving explorer below.

The scheduler only coordinates threads it spawned itself; the invoking
thread's operations never pause, so fixtures can be built inline.
"""

from __future__ import annotations

import random
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator

from . import atomics


class ScheduleError(RuntimeError):
    """A scripted or explored schedule could not be realized."""


_DEFAULT_TIMEOUT = 20.0


class _Worker:
    __slots__ = ("name", "thread", "fn", "done", "result", "error")

    def __init__(self, name: str, fn: Callable[[], Any]):
        self.name = name
        self.fn = fn
        self.thread: threading.Thread | None = None
        self.done = False
        self.result: Any = None
        self.error: BaseException | None = None


class _Freeze:
    __slots__ = ("site", "hits", "parked", "release")

    def __init__(self, site: str, hits: int):
        self.site = site
        self.hits = hits
        self.parked = threading.Event()
        self.release = threading.Event()


class ControlledScheduler:
    def __init__(self, stepping: bool = False, step_limit: int = 500_000):
        self._stepping = stepping
        self._step_limit = step_limit
        self._steps = 0
        self._cv = threading.Condition()
        self._names: dict[int, str] = {}       # thread ident -> worker name
        self._workers: dict[str, _Worker] = {}
        self._parked: dict[str, str] = {}      # name -> site (stepping mode)
        self._granted: set[str] = set()
        self._freezes: dict[str, _Freeze] = {}
        self._frozen: dict[str, str] = {}
        self._start = threading.Event()

    # -- lifecycle ---------------------------------------------------------

    def __enter__(self) -> "ControlledScheduler":
        atomics.set_controller(self)
        return self

    def __exit__(self, *exc: object) -> None:
        try:
            self._release_everything()
            self.join_all(timeout=_DEFAULT_TIMEOUT, reraise=exc == (None, None, None))
        finally:
            atomics.set_controller(None)

    def spawn(self, name: str, fn: Callable[..., Any], *args: Any, **kwargs: Any) -> None:
        if name in self._workers:
            raise ScheduleError(f"duplicate worker name {name!r}")
        worker = _Worker(name, lambda: fn(*args, **kwargs))
        self._workers[name] = worker
        thread = threading.Thread(target=self._run_worker, args=(worker,),
                                  name=f"depq-sched-{name}", daemon=True)
        worker.thread = thread
        thread.start()

    def start(self) -> None:
        """Release all spawned workers (they block until this is called)."""
        self._start.set()

    def _run_worker(self, worker: _Worker) -> None:
        self._start.wait()
        ident = threading.get_ident()
        with self._cv:
            self._names[ident] = worker.name
        try:
            worker.result = worker.fn()
        except BaseException as exc:  # reported at join_all
            worker.error = exc
        finally:
            with self._cv:
                worker.done = True
                self._names.pop(ident, None)
                self._cv.notify_all()

    def join_worker(self, name: str, timeout: float = _DEFAULT_TIMEOUT) -> Any:
        """Wait for one worker to finish (it must not be frozen); returns its result."""
        worker = self._workers[name]
        assert worker.thread is not None
        worker.thread.join(timeout=timeout)
        if worker.thread.is_alive():
            raise ScheduleError(f"worker {name!r} did not finish")
        return self.result(name)

    def join_all(self, timeout: float = _DEFAULT_TIMEOUT, reraise: bool = True) -> None:
        deadline = _Deadline(timeout)
        for worker in self._workers.values():
            assert worker.thread is not None
            worker.thread.join(timeout=deadline.remaining())
            if worker.thread.is_alive():
                raise ScheduleError(f"worker {worker.name!r} did not finish")
        if reraise:
            for worker in self._workers.values():
                if worker.error is not None:
                    raise worker.error

    def result(self, name: str) -> Any:
        worker = self._workers[name]
        if worker.error is not None:
            raise worker.error
        return worker.result

    def results(self) -> dict[str, Any]:
        return {n: self.result(n) for n in self._workers}

    # -- instrumentation callback -------------------------------------------

    def pause(self, site: str) -> None:
        name = self._names.get(threading.get_ident())
        if name is None:
            return
        if self._stepping:
            self._pause_stepping(name, site)
        else:
            self._pause_free(name, site)

    def _pause_free(self, name: str, site: str) -> None:
        rule = self._freezes.get(name)
        if rule is None or rule.site != site or rule.parked.is_set():
            return
        rule.hits -= 1
        if rule.hits > 0:
            return
        with self._cv:
            self._frozen[name] = site
            self._cv.notify_all()
        rule.parked.set()
        rule.release.wait()
        with self._cv:
            self._frozen.pop(name, None)

    def _pause_stepping(self, name: str, site: str) -> None:
        with self._cv:
            self._parked[name] = site
            self._cv.notify_all()
            while name not in self._granted:
                if not self._cv.wait(timeout=_DEFAULT_TIMEOUT):
                    raise ScheduleError(f"worker {name!r} starved waiting for a grant")
            self._granted.discard(name)
            del self._parked[name]

    # -- freeze mode ---------------------------------------------------------

    def freeze(self, name: str, site: str, hits: int = 1) -> None:
        """Park ``name`` the ``hits``-th time it is about to execute ``site``.

        The rule must be registered before the worker reaches the site; one
        rule per worker is active at a time (a new freeze after thawing
        replaces the spent rule).
        """
        if self._stepping:
            raise ScheduleError("freeze rules apply to free mode only")
        self._freezes[name] = _Freeze(site, hits)

    def wait_frozen(self, name: str, timeout: float = _DEFAULT_TIMEOUT) -> None:
        rule = self._find_freeze(name)
        if not rule.parked.wait(timeout):
            raise ScheduleError(f"worker {name!r} never reached its freeze point")

    def thaw(self, name: str) -> None:
        self._find_freeze(name).release.set()

    def is_frozen(self, name: str) -> bool:
        return name in self._frozen

    def _find_freeze(self, name: str) -> _Freeze:
        rule = self._freezes.get(name)
        if rule is None:
            raise ScheduleError(f"no freeze rule for worker {name!r}")
        return rule

    def _release_everything(self) -> None:
        # Unblock anything still parked so join_all can complete.
        for rule in self._freezes.values():
            rule.release.set()
        if self._stepping:
            with self._cv:
                self._granted.update(self._workers)
                self._stepping = False
                self._cv.notify_all()
        self._start.set()

    # -- stepping mode drivers ------------------------------------------------

    def wait_quiescent(self, timeout: float = _DEFAULT_TIMEOUT) -> tuple[str, ...]:
        """Block until every live worker is parked; returns parked names sorted.

        A worker with a grant it has not yet consumed still counts as
        running, otherwise the driver could observe its stale parked entry
        and double-grant it.
        """
        deadline = _Deadline(timeout)
        with self._cv:
            while True:
                live = [n for n, w in self._workers.items() if not w.done]
                if not self._granted and all(n in self._parked for n in live):
                    return tuple(sorted(self._parked))
                if not self._cv.wait(timeout=deadline.remaining()):
                    stuck = [n for n in live if n not in self._parked]
                    raise ScheduleError(f"workers never parked: {stuck}")

    def parked_site(self, name: str) -> str | None:
        with self._cv:
            return self._parked.get(name)

    def grant(self, name: str) -> None:
        """Let ``name`` execute its pending operation and run to its next pause."""
        self._steps += 1
        if self._steps > self._step_limit:
            raise ScheduleError("step limit exceeded")
        with self._cv:
            if name not in self._parked:
                raise ScheduleError(f"cannot grant {name!r}: not parked")
            self._granted.add(name)
            self._cv.notify_all()

    def run_until(self, name: str, site: str, timeout: float = _DEFAULT_TIMEOUT) -> None:
        """Advance only ``name`` until it parks at ``site``."""
        deadline = _Deadline(timeout)
        while True:
            self.wait_quiescent(timeout=deadline.remaining())
            parked = self.parked_site(name)
            if parked is None:
                raise ScheduleError(f"{name!r} finished before reaching {site!r}")
            if parked == site:
                return
            self.grant(name)

    def run_to_completion(self, name: str, timeout: float = _DEFAULT_TIMEOUT) -> Any:
        """Advance only ``name`` until it finishes; returns its result."""
        deadline = _Deadline(timeout)
        while True:
            self.wait_quiescent(timeout=deadline.remaining())
            if self._workers[name].done:
                return self.result(name)
            self.grant(name)

    def drive(self, choose: Callable[[tuple[str, ...]], str],
              timeout: float = _DEFAULT_TIMEOUT) -> list[tuple[str, tuple[str, ...]]]:
        """Step all workers to completion, picking each step with ``choose``.

        Returns the trace: one (chosen, runnable-set) entry per step.
        """
        self.start()
        trace: list[tuple[str, tuple[str, ...]]] = []
        deadline = _Deadline(timeout)
        while True:
            runnable = self.wait_quiescent(timeout=deadline.remaining())
            if not runnable:
                return trace
            pick = choose(runnable)
            if pick not in runnable:
                raise ScheduleError(f"chooser picked {pick!r}, runnable {runnable}")
            trace.append((pick, runnable))
            self.grant(pick)


class _Deadline:
    def __init__(self, seconds: float):
        self._deadline = time.monotonic() + seconds

    def remaining(self) -> float:
        return max(0.01, self._deadline - time.monotonic())


# -- exploration -------------------------------------------------------------


@dataclass
class RunOutcome:
    """One fully executed interleaving."""

    state: Any
    results: dict[str, Any]
    trace: list[tuple[str, tuple[str, ...]]] = field(repr=False)

    @property
    def schedule(self) -> list[str]:
        return [pick for pick, _ in self.trace]


ThreadSpec = list[tuple[str, Callable[[Any], Any]]]


def _run_once(factory: Callable[[], tuple[Any, ThreadSpec]],
              prefix: list[str], step_limit: int) -> RunOutcome:
    state, threads = factory()
    sched = ControlledScheduler(stepping=True, step_limit=step_limit)
    position = 0

    def choose(runnable: tuple[str, ...]) -> str:
        nonlocal position
        if position < len(prefix):
            pick = prefix[position]
            if pick not in runnable:
                raise ScheduleError(
                    f"replay diverged: wanted {pick!r} at step {position}, runnable {runnable}")
        else:
            pick = runnable[0]
        position += 1
        return pick

    with sched:
        for name, fn in threads:
            sched.spawn(name, fn, state)
        trace = sched.drive(choose)
        results = sched.results()
    return RunOutcome(state=state, results=results, trace=trace)


def explore_interleavings(factory: Callable[[], tuple[Any, ThreadSpec]],
                          max_runs: int | None = None,
                          step_limit: int = 100_000) -> Iterator[RunOutcome]:
    """Exhaustively enumerate interleavings of the given threads.

    ``factory`` builds fresh shared state plus named thread bodies for every
    run.  Enumeration is depth-first over scheduling choices with replay:
    each run re-executes from scratch under a forced prefix, then extends it
    with the first runnable thread.  Thread bodies must be deterministic.
    """
    prefix: list[str] = []
    alternatives: list[list[str]] = []
    runs = 0
    while True:
        outcome = _run_once(factory, prefix, step_limit)
        runs += 1
        yield outcome
        if max_runs is not None and runs >= max_runs:
            return
        trace = outcome.trace
        for i in range(len(alternatives), len(trace)):
            pick, runnable = trace[i]
            alternatives.append([r for r in runnable if r != pick])
        while alternatives and not alternatives[-1]:
            alternatives.pop()
        if not alternatives:
            return
        depth = len(alternatives) - 1
        nxt = alternatives[-1].pop(0)
        prefix = [trace[i][0] for i in range(depth)] + [nxt]


def random_walk(seed: int) -> Callable[[tuple[str, ...]], str]:
    """A seeded chooser for ControlledScheduler.drive."""
    rng = random.Random(seed)
    return lambda runnable: rng.choice(runnable)
