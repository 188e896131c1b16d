"""Shared-node, marked-link sorted lists.

A :class:`ListPair` keeps every item on two singly linked lists at once:
end ``MIN`` sorted ascending and end ``MAX`` sorted descending.  Each list
removes elements in two phases.  A consumer *logically deletes* the first
live node by setting the mark bit in the link word of the previous node
(one atomic fetch-or), so the logically deleted nodes always form a prefix
of the list.  Later the whole prefix is *physically deleted* in one step by
advancing the head pointer.

Insertion is lock-free: any number of threads may insert concurrently with
each other and with the per-end consumer.  A failed insert CAS resumes the
search from the node where it failed, never from the head, because nodes
are only ever removed from the front.

Ordering invariants are runtime-checkable through :meth:`ListPair.audit`,
which is meant to run at quiescent points or with other threads frozen by
the controlled scheduler.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from .atomics import AtomicCell
from .items import (MAX, MIN, NONE_IDX, Arena, Key, key_less, pack_link,
                    unpack_link)


def comes_before(a: Key, b: Key, end: int) -> bool:
    """Should key ``a`` sit before key ``b`` on the given end's list?"""
    if end == MIN:
        return key_less(a, b)
    return key_less(b, a)


class ListCounters:
    """Exact operation counters, shared by all threads of one ListPair."""

    def __init__(self) -> None:
        lock = threading.Lock()
        self.insert_cas_failures = AtomicCell(0, lock)
        self.inserts = AtomicCell(0, lock)
        self.marks = [AtomicCell(0, lock), AtomicCell(0, lock)]
        self.reserve_failures = [AtomicCell(0, lock), AtomicCell(0, lock)]
        self.extract_successes = [AtomicCell(0, lock), AtomicCell(0, lock)]
        self.empty_returns = [AtomicCell(0, lock), AtomicCell(0, lock)]

    def snapshot(self) -> dict:
        return {
            "inserts": self.inserts.load(),
            "insert_cas_failures": self.insert_cas_failures.load(),
            "marks": [c.load() for c in self.marks],
            "reserve_failures": [c.load() for c in self.reserve_failures],
            "extract_successes": [c.load() for c in self.extract_successes],
            "empty_returns": [c.load() for c in self.empty_returns],
        }


class ListPair:
    """Two sorted lists over one arena, plus their deletion bookkeeping.

    Concurrency contract: ``insert`` from any thread; ``extract_first``,
    ``mark_successor`` and ``sweep_head`` from at most one thread per end at
    a time (the combiner, or the sole consumer of a single-ended setup);
    ``audit`` only while the structure is quiescent or other threads are
    frozen at instrumented sites.
    """

    def __init__(self, arena: Arena, counters: ListCounters | None = None,
                 debug: bool = True, _skip_reserved_check: bool = False):
        self.arena = arena
        self.counters = counters if counters is not None else ListCounters()
        self._debug = debug
        # Deliberately broken variant for checker mutation tests: an extract
        # returns its node even when the reservation test-and-set failed.
        self._skip_reserved_check = _skip_reserved_check
        dummy = arena.new_dummy()
        dummy_item = arena.item(dummy)
        # The sentinel counts as logically deleted from the start.
        dummy_item.marked_into[MIN] = True
        dummy_item.marked_into[MAX] = True
        dummy_item.linked_into[MIN] = True
        dummy_item.linked_into[MAX] = True
        self.dummy = dummy
        lock = arena.rmw_lock
        self._head = [AtomicCell(dummy, lock), AtomicCell(dummy, lock)]
        self._last_deleted = [AtomicCell(dummy, lock), AtomicCell(dummy, lock)]

    # -- accessors -----------------------------------------------------------

    def head(self, end: int) -> int:
        return self._head[end].load()

    def last_deleted(self, end: int) -> int:
        return self._last_deleted[end].load()

    # -- operations ----------------------------------------------------------

    def insert(self, index: int, end: int) -> None:
        """Link a fresh node into the sorted position of one list.

        Retries the publish CAS until it lands; each retry resumes from the
        node whose link word changed underneath us.
        """
        arena = self.arena
        node = arena.item(index)
        k = node.key
        assert k is not None
        pred = self._head[end].load(site="ins-read-head")
        while True:
            succ, marked = unpack_link(
                arena.item(pred).link[end].load(site="ins-read-link"))
            while succ != NONE_IDX and (
                    marked or comes_before(arena.item(succ).key, k, end)):
                pred = succ
                succ, marked = unpack_link(
                    arena.item(pred).link[end].load(site="ins-read-link"))
            if self._debug and marked:
                # A marked end-of-list word is unreachable while consumers
                # honor their contract; retrying against it would spin forever.
                raise AssertionError("end-of-list link is marked")
            node.link[end].store(pack_link(succ, 0), site="ins-set-next")
            if arena.item(pred).link[end].compare_and_swap(
                    pack_link(succ, 0), pack_link(index, 0), site="ins-cas"):
                node.linked_into[end] = True
                self.counters.inserts.fetch_add(1)
                return
            self.counters.insert_cas_failures.fetch_add(1)

    def mark_successor(self, index: int, end: int) -> int:
        """Logically delete the successor of node ``index`` on one list.

        Caller must hold the consumer role for this end, ``index`` must be
        the current last-deleted node and its link must name a successor.
        Returns the prior link word; its successor field is the node that
        just became logically deleted.
        """
        prior = self.arena.item(index).link[end].fetch_or(1, site="ex-mark")
        succ, was_marked = unpack_link(prior)
        if self._debug:
            assert not was_marked, "link was already marked: consumer contract broken"
            assert succ != NONE_IDX, "marked an end-of-list link"
        # Auditor tag; written in the same step as the fetch-or above.
        self.arena.item(succ).marked_into[end] = True
        self.counters.marks[end].fetch_add(1)
        return prior

    def extract_first(self, end: int, reserve: bool = True) -> int | None:
        """Remove and return the first live node of one list, or None if empty.

        With ``reserve=True`` the node is also claimed via its reservation
        flag; nodes already claimed by the other end are deleted from this
        list and skipped.  With ``reserve=False`` this behaves as the
        extract-min of a plain single-ended priority queue and the caller
        owns the reservation step.
        """
        arena = self.arena
        while True:
            last = self._last_deleted[end].load(site="ex-read-lastdel")
            word = arena.item(last).link[end].load(site="ex-read-lastnext")
            succ, _ = unpack_link(word)
            if succ == NONE_IDX:
                # Linearized at the link read above; a racing insert that
                # lands afterwards does not invalidate the empty answer.
                self.counters.empty_returns[end].fetch_add(1)
                return None
            prior = self.mark_successor(last, end)
            target, _ = unpack_link(prior)
            self._last_deleted[end].store(target, site="ex-write-lastdel")
            if not reserve:
                self.counters.extract_successes[end].fetch_add(1)
                return target
            if arena.item(target).reserved.test_and_set(site="ex-reserve") == 0:
                self.counters.extract_successes[end].fetch_add(1)
                return target
            self.counters.reserve_failures[end].fetch_add(1)
            if self._skip_reserved_check:
                return target

    def sweep_head(self, end: int) -> list[int]:
        """Physically delete the logically deleted prefix, except its last node.

        Combiner-only.  Returns the unlinked node indices (oldest first) so
        the caller can run them through reclamation.
        """
        arena = self.arena
        head = self._head[end].load(site="uh-read-head")
        last = self._last_deleted[end].load(site="uh-read-lastdel")
        if head == last:
            return []
        removed = []
        node = head
        while node != last:
            removed.append(node)
            succ, marked = unpack_link(arena.item(node).link[end].load(site="uh-walk"))
            if self._debug:
                assert marked and succ != NONE_IDX, "prefix walk left the deleted prefix"
            node = succ
        self._head[end].store(last, site="uh-write-head")
        return removed

    # -- inspection ----------------------------------------------------------

    def walk(self, end: int) -> list[int]:
        """All node indices reachable from the head, in list order."""
        arena = self.arena
        out = []
        node = self._head[end].load()
        limit = len(arena) + 2
        while node != NONE_IDX and len(out) <= limit:
            out.append(node)
            node, _ = unpack_link(arena.item(node).link[end].load())
        return out

    def suffix_keys(self, end: int, include_reserved: bool = False) -> list[Key]:
        """Keys of the live suffix (after the deleted prefix), in list order."""
        arena = self.arena
        out = []
        node, _ = unpack_link(
            arena.item(self._last_deleted[end].load()).link[end].load())
        while node != NONE_IDX:
            item = arena.item(node)
            if include_reserved or item.reserved.load() == 0:
                assert item.key is not None
                out.append(item.key)
            node, _ = unpack_link(item.link[end].load())
        return out

    def audit(self, end: int, mid_extract_ok: bool = False) -> "AuditReport":
        """Check the structural invariants of one list.

        ``mid_extract_ok`` widens the last-deleted check to also accept the
        second-last node of the deleted prefix, which is the legal state of
        a consumer frozen between its marking fetch-or and its last-deleted
        write.
        """
        arena = self.arena
        report = AuditReport(end=end)
        limit = len(arena) + 2

        node = self._head[end].load()
        path: list[tuple[int, int | None, bool]] = []
        seen = 0
        incoming_marked: list[bool] = []  # incoming_marked[i]: edge path[i] -> path[i+1]
        while node != NONE_IDX:
            seen += 1
            if seen > limit:
                report.finite = False
                report.notes.append("walk exceeded arena size: cycle suspected")
                break
            item = arena.item(node)
            tagged = item.marked_into[end]
            path.append((node, None if item.key is None else item.key.user_key, tagged))
            succ, marked = unpack_link(item.link[end].load())
            if succ != NONE_IDX:
                incoming_marked.append(bool(marked))
            node = succ
        report.path = path

        # Deleted nodes must form a prefix, and the deletion tags must agree
        # with the mark bits on the edges inside the walk.
        tags = [tagged for (_, _, tagged) in path]
        in_prefix = True
        for pos, tagged in enumerate(tags):
            if tagged and not in_prefix:
                report.deleted_prefix = False
                report.notes.append(f"deleted node at position {pos} after live nodes")
            if not tagged:
                in_prefix = False
        for pos, marked in enumerate(incoming_marked):
            # Edge path[pos] -> path[pos+1]; marked iff the target is deleted.
            if pos + 1 < len(tags) and marked != tags[pos + 1]:
                report.deleted_prefix = False
                report.notes.append(
                    f"edge to position {pos + 1} mark bit disagrees with deletion tag")

        prefix = [idx for (idx, _, tagged) in path if tagged]
        suffix = [idx for (idx, _, tagged) in path if not tagged]

        keys = [self.arena.item(i).key for i in suffix]
        for a, b in zip(keys, keys[1:]):
            assert a is not None and b is not None
            if not comes_before(a, b, end):
                report.suffix_sorted = False
                report.notes.append(f"suffix out of order: {a} !< {b}")

        last = self._last_deleted[end].load()
        if not prefix:
            report.last_deleted_ok = False
            report.notes.append("no deleted prefix at all")
        elif last == prefix[-1]:
            pass
        elif mid_extract_ok and len(prefix) >= 2 and last == prefix[-2]:
            report.notes.append("last-deleted at second-last prefix node (extract in flight)")
        else:
            report.last_deleted_ok = False
            report.notes.append(f"last-deleted {last} not at the prefix end {prefix[-1:]}" )

        head = self._head[end].load()
        if not (arena.item(head).marked_into[end] and arena.item(last).marked_into[end]):
            report.heads_deleted = False
            report.notes.append("head or last-deleted names a live node")

        return report


@dataclass
class AuditReport:
    """Pass/fail per structural claim, with the walked path for diagnostics."""

    end: int
    finite: bool = True
    deleted_prefix: bool = True
    suffix_sorted: bool = True
    last_deleted_ok: bool = True
    heads_deleted: bool = True
    path: list[tuple[int, int | None, bool]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (self.finite and self.deleted_prefix and self.suffix_sorted
                and self.last_deleted_ok and self.heads_deleted)

    def describe(self) -> str:
        claims = [
            ("finite list", self.finite),
            ("deleted nodes form a prefix", self.deleted_prefix),
            ("live suffix sorted", self.suffix_sorted),
            ("last-deleted positioned", self.last_deleted_ok),
            ("head/last-deleted logically deleted", self.heads_deleted),
        ]
        lines = [f"audit end={self.end}"]
        lines += [f"  [{'ok' if good else 'FAIL'}] {name}" for name, good in claims]
        lines += [f"  note: {n}" for n in self.notes]
        lines.append("  path: " + " -> ".join(
            f"{idx}({'·' if key is None else key}{'*' if tagged else ''})"
            for idx, key, tagged in self.path))
        return "\n".join(lines)


class ListPq:
    """Single-consumer priority queue backed by one end of a ListPair.

    Two of these over the same pair (one per end) give a pair of priority
    queues that share their nodes; each uses its own link words, so they
    never interfere.  No arbitrary-delete support.

    The sole consumer doubles as the sweeper: each extraction physically
    deletes the logically deleted prefix behind it, otherwise inserts would
    wade through an ever-growing dead prefix.  Nodes it unlinks go to the
    reclaimer when one is attached.
    """

    has_delete = False

    def __init__(self, lists: ListPair, end: int, reclaimer=None):
        self.lists = lists
        self.end = end
        self.reclaimer = reclaimer

    def pq_insert(self, index: int) -> None:
        self.lists.insert(index, self.end)

    def pq_extract_first(self) -> int | None:
        got = self.lists.extract_first(self.end, reserve=False)
        removed = self.lists.sweep_head(self.end)
        if self.reclaimer is not None:
            for index in removed:
                self.reclaimer.on_unlink(index)
        return got

    def pq_delete(self, index: int) -> bool:
        raise NotImplementedError("list-backed queue has no arbitrary delete")
