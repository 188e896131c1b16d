"""Deterministic replays of the scenarios that motivate the design.

Each scenario forces one specific interleaving with the controlled
scheduler and reports what it demonstrated:

* ``counterexample`` — two extract-min consumers at once (breaking the
  dual-consumer contract) produce a history the checker must reject.
* ``twist`` — concurrent inserts against an extraction leave the two lists
  in orders that are not reverses of each other, yet every audit passes and
  subsequent extractions still drain in priority order.
* ``single-item-race`` — extract-min and extract-max fight over the last
  item; in every interleaving exactly one of them gets it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dual_depq import DualDepq
from .items import MAX, MIN, Arena
from .lincheck import Recorder, Verdict, check
from .list_depq import ListDepq
from .oracle import LockedHeapPq
from .ordered_list import ListPair
from .sched import ControlledScheduler, explore_interleavings

SCENARIOS = ("counterexample", "twist", "single-item-race")


@dataclass
class ReplayOutcome:
    name: str
    ok: bool
    details: dict = field(default_factory=dict)

    def describe(self) -> str:
        lines = [f"replay {self.name}: {'ok' if self.ok else 'FAILED'}"]
        lines += [f"  {k}: {v}" for k, v in self.details.items()]
        return "\n".join(lines)


def run(name: str) -> ReplayOutcome:
    if name == "counterexample":
        return run_counterexample()
    if name == "twist":
        return run_twist()
    if name == "single-item-race":
        return run_single_item_race()
    raise ValueError(f"unknown scenario {name!r}; choose from {SCENARIOS}")


def run_counterexample() -> ReplayOutcome:
    """Two same-end consumers race; the recorded history is not linearizable.

    Forced order: consumer E1 pops key 1 from the ascending queue and stalls
    before claiming it.  A second min-consumer E2 then pops and returns 2.
    After E2 finishes, a max-consumer E3 pops 2 (claim fails), pops 1,
    claims it and returns 1.  E2 returning 2 while the later E3 returns 1
    admits no sequential explanation, so the checker must say no.
    """
    arena = Arena()
    dual = DualDepq(arena, LockedHeapPq(arena),
                    LockedHeapPq(arena, descending=True))
    recorder = Recorder()
    recorded = recorder.wrap(dual)

    with ControlledScheduler() as sched:
        recorded.insert(1)
        recorded.insert(2)
        sched.freeze("E1", "reserve")
        sched.spawn("E1", recorded.extract_min)
        sched.start()
        sched.wait_frozen("E1")
        got_e2 = recorded.extract_min()
        got_e3 = recorded.extract_max()
        history = recorder.snapshot()
        sched.thaw("E1")

    result = check(history)
    ok = (result.verdict is Verdict.NOT_LINEARIZABLE
          and got_e2 == 2 and got_e3 == 1)
    return ReplayOutcome("counterexample", ok, {
        "E2": got_e2,
        "E3": got_e3,
        "verdict": result.verdict.value,
        "history_len": len(history),
    })


def _list_walk_keys(lists: ListPair, end: int) -> list[int]:
    return [lists.arena.item(i).user_key
            for i in lists.walk(end) if i != lists.dummy]


def _same_order_pair(min_walk: list[int], max_walk: list[int]) -> tuple[int, int] | None:
    """A key pair appearing in the SAME relative order in both physical
    lists; its existence shows the lists are not opposite orders."""
    max_pos = {k: p for p, k in enumerate(max_walk)}
    for i, a in enumerate(min_walk):
        for b in min_walk[i + 1:]:
            if a in max_pos and b in max_pos and max_pos[a] < max_pos[b]:
                return (a, b)
    return None


def run_twist() -> ReplayOutcome:
    """Drive the lists into physically different orders and keep working.

    Starting from keys {1, 2, 5} with 1 logically deleted on the ascending
    side and 5 on the descending side: inserts of 3 and 4 finish their
    ascending-list step, 3 completes its descending step, an extract-max
    then logically deletes 3, and only afterwards does 4 link into the
    descending list, landing after the deleted prefix.  The two lists end
    up sharing a key pair in the same relative order.
    """
    d = ListDepq()
    for k in (1, 2, 5):
        d.insert(k)
    first_min = d.extract_min()    # logically deletes 1 on the ascending side
    first_max = d.extract_max()    # logically deletes 5 on the descending side

    with ControlledScheduler() as sched:
        sched.freeze("ins3", "between-list-inserts")
        sched.freeze("ins4", "between-list-inserts")
        sched.spawn("ins3", d.insert, 3)
        sched.start()
        sched.wait_frozen("ins3")      # 3 is on the ascending list only
        sched.spawn("ins4", d.insert, 4)
        sched.wait_frozen("ins4")      # 4 is on the ascending list only
        sched.thaw("ins3")
        sched.join_worker("ins3")      # 3 completes its descending-list step
        got_mid_max = d.extract_max()  # logically deletes 3 on the descending side
        sched.thaw("ins4")             # 4 links in after the deleted prefix

    min_walk = _list_walk_keys(d.lists, MIN)
    max_walk = _list_walk_keys(d.lists, MAX)
    pair = _same_order_pair(min_walk, max_walk)
    audits = [d.audit(MIN), d.audit(MAX)]
    drained = [d.extract_max(), d.extract_min(), d.extract_min(), d.extract_max()]

    ok = (first_min == 1 and first_max == 5 and got_mid_max == 3
          and pair is not None
          and all(rep.ok for rep in audits)
          and drained == [4, 2, None, None])
    return ReplayOutcome("twist", ok, {
        "min_list": min_walk,
        "max_list": max_walk,
        "same_order_pair": pair,
        "mid_extract_max": got_mid_max,
        "drain": drained,
        "audits_ok": all(rep.ok for rep in audits),
    })


def run_single_item_race() -> ReplayOutcome:
    """Explore every interleaving of both ends extracting the last item."""

    def factory():
        arena = Arena()
        lists = ListPair(arena)
        index = arena.new_item(7)
        lists.insert(index, MIN)
        lists.insert(index, MAX)

        def extract(end):
            def body(_state):
                got = lists.extract_first(end, reserve=True)
                return None if got is None else arena.item(got).user_key
            return body

        return lists, [("min", extract(MIN)), ("max", extract(MAX))]

    runs = 0
    winners: set[str] = set()
    exclusive = True
    audits_ok = True
    for outcome in explore_interleavings(factory):
        runs += 1
        got = {name: res for name, res in outcome.results.items()}
        hits = [name for name, res in got.items() if res == 7]
        misses = [name for name, res in got.items() if res is None]
        if len(hits) != 1 or len(misses) != 1:
            exclusive = False
        winners.update(hits)
        if not (outcome.state.audit(MIN).ok and outcome.state.audit(MAX).ok):
            audits_ok = False

    ok = exclusive and audits_ok and winners == {"min", "max"}
    return ReplayOutcome("single-item-race", ok, {
        "interleavings": runs,
        "exclusive_everywhere": exclusive,
        "winners_seen": sorted(winners),
        "audits_ok": audits_ok,
    })
