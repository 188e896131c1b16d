"""Key model, item creation, and the reservation flag."""

import random
import threading

import pytest
from hypothesis import given, strategies as st

from depq.items import (MAX, MIN, NONE_IDX, Arena, Key, is_reserved, key_less,
                        pack_link, try_reserve, unpack_link)


def test_new_item_starts_unreserved():
    arena = Arena()
    for k in (5, -3, 0):
        item = arena.item(arena.new_item(k))
        assert item.key.user_key == k
        assert not is_reserved(item)
        assert item.unlinked.load() == 0
        assert unpack_link(item.link[MIN].load()) == (NONE_IDX, 0)
        assert unpack_link(item.link[MAX].load()) == (NONE_IDX, 0)


def test_duplicate_user_keys_get_distinct_uids():
    arena = Arena()
    a = arena.item(arena.new_item(5))
    b = arena.item(arena.new_item(5))
    assert a.key != b.key
    assert a.key.uid != b.key.uid
    assert key_less(a.key, b.key)  # earlier uid wins the tie


def test_uids_strictly_increase_per_arena():
    arena = Arena()
    uids = [arena.item(arena.new_item(0)).key.uid for _ in range(100)]
    assert uids == sorted(uids)
    assert len(set(uids)) == len(uids)


def test_try_reserve_first_wins_second_loses():
    arena = Arena()
    item = arena.item(arena.new_item(1))
    assert try_reserve(item) is True
    assert try_reserve(item) is False
    assert try_reserve(item) is False


def test_concurrent_reserve_has_exactly_one_winner():
    # 10^4 items, several threads race a test-and-set on each.
    arena = Arena()
    items = [arena.item(arena.new_item(i)) for i in range(10_000)]
    wins = [[] for _ in range(4)]

    def racer(slot):
        mine = wins[slot]
        for item in items:
            if item.reserved.test_and_set() == 0:
                mine.append(item.index)

    threads = [threading.Thread(target=racer, args=(i,)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    total = sum(len(w) for w in wins)
    assert total == len(items)
    claimed = set()
    for w in wins:
        for idx in w:
            assert idx not in claimed
            claimed.add(idx)


def test_key_less_is_lexicographic():
    assert key_less(Key(3, 10), Key(5, 1))
    assert key_less(Key(5, 1), Key(5, 2))
    assert not key_less(Key(5, 2), Key(5, 1))


def test_key_less_antisymmetric_on_random_pairs():
    rng = random.Random(2024)
    for _ in range(100_000):
        a = Key(rng.randrange(50), rng.randrange(1000))
        b = Key(rng.randrange(50), rng.randrange(1000))
        assert not (key_less(a, b) and key_less(b, a))


keys = st.builds(Key, st.integers(-1000, 1000), st.integers(0, 1000))


@given(keys)
def test_key_less_irreflexive(a):
    assert not key_less(a, a)


@given(keys, keys)
def test_key_less_total_on_distinct(a, b):
    if a != b:
        assert key_less(a, b) != key_less(b, a)


@given(keys, keys, keys)
def test_key_less_transitive(a, b, c):
    if key_less(a, b) and key_less(b, c):
        assert key_less(a, c)


def test_link_word_packing_roundtrip():
    for succ in (NONE_IDX, 0, 1, 7, 123456):
        for mark in (0, 1):
            assert unpack_link(pack_link(succ, mark)) == (succ, mark)
    assert pack_link(NONE_IDX, 0) == 0  # fresh cells start at zero


def test_poisoned_slot_access_raises():
    arena = Arena()
    idx = arena.new_item(1)
    arena.poison(idx)
    with pytest.raises(AssertionError):
        arena.item(idx)
