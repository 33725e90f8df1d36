"""Bounded double-ended priority queue of decoder paths.

A min-max heap (Atkinson et al.) over (score, push sequence) keys with a
position index, so pop-max, pop-min, and targeted removal are all
O(log D).  Equal scores resolve by push order: pop_max returns the most
recently pushed (depth-first bias), pop_min the oldest.
"""

from __future__ import annotations

from dataclasses import dataclass


class QueueContractError(RuntimeError):
    pass


@dataclass
class ScoredEntry:
    score: float
    path: int
    block: int
    seq: int = -1


def _level(i: int) -> int:
    return (i + 1).bit_length() - 1


class DoubleEndedQueue:
    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._a: list[ScoredEntry] = []
        self._pos: dict[int, int] = {}        # seq -> heap slot
        self._paths: set[int] = set()
        self._seq = 0

    def __len__(self) -> int:
        return len(self._a)

    def __bool__(self) -> bool:
        return bool(self._a)

    def _key(self, i: int):
        e = self._a[i]
        return (e.score, e.seq)

    def _swap(self, i: int, j: int) -> None:
        a = self._a
        a[i], a[j] = a[j], a[i]
        self._pos[a[i].seq] = i
        self._pos[a[j].seq] = j

    # -- push -------------------------------------------------------------

    def push(self, score: float, path: int, block: int) -> ScoredEntry:
        if len(self._a) >= self.capacity:
            raise QueueContractError("queue is at capacity")
        if path in self._paths:
            raise QueueContractError(f"path {path} already queued")
        entry = ScoredEntry(float(score), path, block, self._seq)
        self._seq += 1
        self._a.append(entry)
        self._pos[entry.seq] = len(self._a) - 1
        self._paths.add(path)
        self._bubble_up(len(self._a) - 1)
        return entry

    def _bubble_up(self, i: int) -> None:
        if i == 0:
            return
        parent = (i - 1) // 2
        if _level(i) % 2 == 0:      # min level
            if self._key(i) > self._key(parent):
                self._swap(i, parent)
                self._bubble_up_grand(parent, up=True)
            else:
                self._bubble_up_grand(i, up=False)
        else:
            if self._key(i) < self._key(parent):
                self._swap(i, parent)
                self._bubble_up_grand(parent, up=False)
            else:
                self._bubble_up_grand(i, up=True)

    def _bubble_up_grand(self, i: int, up: bool) -> None:
        # up=True: max-property chain; up=False: min-property chain
        while i > 2:
            g = ((i - 1) // 2 - 1) // 2
            if up:
                if self._key(i) > self._key(g):
                    self._swap(i, g)
                    i = g
                else:
                    return
            else:
                if self._key(i) < self._key(g):
                    self._swap(i, g)
                    i = g
                else:
                    return

    # -- pops -------------------------------------------------------------

    def _max_index(self) -> int:
        n = len(self._a)
        if n == 0:
            raise QueueContractError("queue is empty")
        if n == 1:
            return 0
        if n == 2:
            return 1
        return 1 if self._key(1) > self._key(2) else 2

    def peek_max(self) -> ScoredEntry:
        return self._a[self._max_index()]

    def pop_max(self) -> ScoredEntry:
        return self._remove_at(self._max_index())

    def pop_min(self) -> ScoredEntry:
        if not self._a:
            raise QueueContractError("queue is empty")
        return self._remove_at(0)

    def remove_if(self, predicate) -> int:
        """Remove every entry with predicate(block, path) true; returns count."""
        doomed = [e.seq for e in self._a if predicate(e.block, e.path)]
        for seq in doomed:
            self._remove_at(self._pos[seq])
        return len(doomed)

    def remove_path(self, path: int) -> ScoredEntry | None:
        for e in self._a:
            if e.path == path:
                return self._remove_at(self._pos[e.seq])
        return None

    def entries(self) -> list[ScoredEntry]:
        return list(self._a)

    def _remove_at(self, i: int) -> ScoredEntry:
        a = self._a
        removed = a[i]
        last = len(a) - 1
        if i != last:
            self._swap(i, last)
        a.pop()
        del self._pos[removed.seq]
        self._paths.discard(removed.path)
        if i < len(a):
            self._fix(i)
        return removed

    def _fix(self, i: int) -> None:
        seq = self._a[i].seq
        self._bubble_up(i)
        self._trickle_down(self._pos[seq])

    def _trickle_down(self, i: int) -> None:
        if _level(i) % 2 == 0:
            self._trickle(i, lambda x, y: x < y)
        else:
            self._trickle(i, lambda x, y: x > y)

    def _trickle(self, i: int, before) -> None:
        n = len(self._a)
        while True:
            best = -1
            grand = False
            for c in (2 * i + 1, 2 * i + 2):
                if c < n and (best < 0 or before(self._key(c), self._key(best))):
                    best, grand = c, False
            for g in range(4 * i + 3, min(4 * i + 7, n)):
                if best < 0 or before(self._key(g), self._key(best)):
                    best, grand = g, True
            if best < 0 or not before(self._key(best), self._key(i)):
                return
            self._swap(i, best)
            if not grand:
                return
            parent = (best - 1) // 2
            if before(self._key(parent), self._key(best)):
                self._swap(best, parent)
            i = best

    # -- validation (used by tests) ---------------------------------------

    def check_heap_property(self) -> bool:
        n = len(self._a)
        for i in range(n):
            lo = _level(i) % 2 == 0
            for c in list(range(2 * i + 1, min(2 * i + 3, n))) + \
                    list(range(4 * i + 3, min(4 * i + 7, n))):
                if lo and self._key(c) < self._key(i):
                    return False
                if not lo and self._key(c) > self._key(i):
                    return False
        return True
