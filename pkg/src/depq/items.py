"""Key model, items, and the arena that owns them.

Every element stored in a queue is an :class:`Item` living in an
:class:`Arena` and referenced by its arena index.  Indices stay valid until
reclamation retires the item; retired slots are replaced by a poison
sentinel so that any late access trips an assertion instead of silently
reading freed state.

Keys are ``(user_key, uid)`` pairs ordered lexicographically.  The uid is a
per-arena strictly increasing sequence number, so two items never compare
equal even when callers insert duplicate user keys.
"""

from __future__ import annotations

import threading
from typing import NamedTuple, Protocol, runtime_checkable

from .atomics import AtomicCell

MIN = 0
MAX = 1
ENDS = (MIN, MAX)

#: Absent successor in a link word.
NONE_IDX = -1


class Key(NamedTuple):
    user_key: int
    uid: int


def key_less(a: Key, b: Key) -> bool:
    """Strict total order on keys: lexicographic on (user_key, uid)."""
    return a < b


def pack_link(succ: int, mark: int) -> int:
    """Pack (successor index, mark bit) into one word.

    The mark lives in the low bit; NONE_IDX packs to successor bits 0 so the
    initial word of a fresh cell is ``0`` = (no successor, unmarked).
    """
    return ((succ + 1) << 1) | mark


def unpack_link(word: int) -> tuple[int, int]:
    return (word >> 1) - 1, word & 1


class Item:
    """A queue element: key, reservation flag, retire flag, two link words.

    ``reserved`` arbitrates which end's extraction claims the item; it is
    set 0->1 at most once.  ``unlinked`` counts physical removals (one per
    list); its second increment signals the item is unreachable from both
    lists.  ``linked_into`` / ``marked_into`` are auditor bookkeeping tags,
    written only in the same step as the publish CAS / marking fetch-or.
    """

    __slots__ = ("index", "key", "reserved", "unlinked", "link",
                 "linked_into", "marked_into")

    def __init__(self, index: int, key: Key | None, lock: threading.Lock):
        self.index = index
        self.key = key  # None only for the sentinel dummy
        self.reserved = AtomicCell(0, lock)
        self.unlinked = AtomicCell(0, lock)
        self.link = (AtomicCell(pack_link(NONE_IDX, 0), lock),
                     AtomicCell(pack_link(NONE_IDX, 0), lock))
        self.linked_into = [False, False]
        self.marked_into = [False, False]

    @property
    def user_key(self) -> int:
        assert self.key is not None, "sentinel key is never read"
        return self.key.user_key

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Item({self.index}, key={self.key})"


class _Poisoned:
    def __repr__(self) -> str:  # pragma: no cover
        return "<reclaimed>"


POISONED = _Poisoned()


class ReclaimedAccessError(AssertionError):
    """An operation touched an item after it was deallocated."""


class Arena:
    """Owner of all items of one queue instance.

    Items are referenced by index; the arena only grows, so indices are
    never reused (no ABA on link words).  Reclamation replaces the slot
    with a poison sentinel, dropping the item object itself.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._items: list[Item | _Poisoned] = []
        self._uid = AtomicCell(0, self._lock)

    @property
    def rmw_lock(self) -> threading.Lock:
        return self._lock

    def new_item(self, user_key: int) -> int:
        """Create a fresh item with the next uid; returns its index."""
        with self._lock:
            uid = self._uid._value
            self._uid._value = uid + 1
            index = len(self._items)
            self._items.append(Item(index, Key(user_key, uid), self._lock))
            return index

    def new_dummy(self) -> int:
        """Create a sentinel item whose key is never compared."""
        with self._lock:
            index = len(self._items)
            self._items.append(Item(index, None, self._lock))
            return index

    def item(self, index: int) -> Item:
        it = self._items[index]
        if it is POISONED:
            raise ReclaimedAccessError(f"item {index} accessed after reclamation")
        return it  # type: ignore[return-value]

    def poison(self, index: int) -> None:
        """Deallocate a slot; later access raises ReclaimedAccessError."""
        self._items[index] = POISONED

    def is_poisoned(self, index: int) -> bool:
        return self._items[index] is POISONED

    def __len__(self) -> int:
        return len(self._items)

    def all_indices(self) -> range:
        return range(len(self._items))


def try_reserve(item: Item) -> bool:
    """Atomically claim an item; True iff this call flipped reserved 0->1."""
    return item.reserved.test_and_set(site="reserve") == 0


def is_reserved(item: Item) -> bool:
    return item.reserved.load() != 0


@runtime_checkable
class PriorityQueue(Protocol):
    """Contract the generic two-queue construction consumes.

    ``pq_extract_first`` returns the arena index of a minimal item under
    the queue's own order, or None when empty at the linearization point.
    At most one consumer may run ``pq_extract_first`` at a time; inserts
    are unrestricted.  ``pq_delete`` exists only when ``has_delete``.
    """

    has_delete: bool

    def pq_insert(self, index: int) -> None: ...

    def pq_extract_first(self) -> int | None: ...

    def pq_delete(self, index: int) -> bool: ...
