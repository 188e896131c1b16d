"""Shared test utilities: the brute-force checker oracle and a generator of
small randomized histories (optionally mutated into likely-wrong ones)."""

import itertools

from depq.lincheck import EMPTY, Event
from depq.oracle import SeqDepq


def ev(thread, kind, arg, result, invoke, response):
    return Event(thread=thread, kind=kind, arg=arg, result=result,
                 invoke=invoke, response=response)


def naive_check(events, initial_keys=()):
    """Enumerate every subset of pending operations and every permutation of
    the chosen operations; accept if any permutation respects real-time
    order and replays correctly.  No memoization, no pruning: this is the
    independent oracle for the real checker."""
    completed = [i for i, e in enumerate(events) if e.completed]
    pending = [i for i, e in enumerate(events) if not e.completed]

    def respects_realtime(perm):
        for pos, a in enumerate(perm):
            for b in perm[pos + 1:]:
                resp_b = events[b].response
                if resp_b is not None and resp_b < events[a].invoke:
                    return False
        return True

    def replays(perm):
        state = SeqDepq(initial_keys)
        for i in perm:
            e = events[i]
            if e.kind == "Insert":
                state.insert(e.arg)
                continue
            got = state.extract_min() if e.kind == "ExtractMin" else state.extract_max()
            if e.completed:
                expected = None if e.result == EMPTY else e.result
                if got != expected:
                    return False
        return True

    for take in range(len(pending) + 1):
        for extra in itertools.combinations(pending, take):
            chosen = completed + list(extra)
            for perm in itertools.permutations(chosen):
                if respects_realtime(perm) and replays(perm):
                    return True
    return False


def random_history(rng, max_ops=6, mutate=False):
    """A small concurrent history produced by simulating a correct queue,
    optionally mutated to be (probably) wrong."""
    n_threads = rng.randint(1, 3)
    state = SeqDepq()
    events = []
    clock = 0
    open_per_thread = {}
    for _ in range(rng.randint(1, max_ops)):
        for t in list(open_per_thread):
            if rng.random() < 0.6:
                e = open_per_thread.pop(t)
                e.response = clock
                clock += 1
        t = rng.randrange(n_threads)
        if t in open_per_thread:
            continue
        roll = rng.random()
        if roll < 0.45:
            key = rng.randrange(4)
            e = ev(t, "Insert", key, None, clock, None)
            state.insert(key)
        else:
            kind = "ExtractMin" if roll < 0.75 else "ExtractMax"
            got = state.extract_min() if kind == "ExtractMin" else state.extract_max()
            e = ev(t, kind, None, EMPTY if got is None else got, clock, None)
        clock += 1
        events.append(e)
        open_per_thread[t] = e
    for t, e in open_per_thread.items():
        if rng.random() < 0.8:
            e.response = clock
            clock += 1
    for e in events:
        if e.response is None:
            e.result = None
    if mutate and events:
        victim = rng.choice(events)
        if victim.kind == "Insert":
            victim.arg = (victim.arg or 0) + rng.randint(1, 3)
        elif victim.completed:
            victim.result = rng.choice([EMPTY, 0, 1, 2, 3])
    return events
