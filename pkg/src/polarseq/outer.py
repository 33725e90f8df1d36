"""On-demand list decoders for the outer codes of the decomposition tree.

Contract: preprocess() builds a state from the leaf's LLR vector and coset
representative; get_next_codeword() then emits codewords of the (coset of
the) leaf code in non-increasing ellipsoidal weight, at most min(2^k, L)
of them.  hard_decision_shortcut() avoids all of that whenever the hard
decision is already a codeword; the expensive preprocessing is deferred
until a second codeword is actually requested.

Operation accounting: real-valued additions and comparisons are tallied on
an OpCount (bit operations and sign slicing are free, matching the n*log2(n)
convention used for plain successive cancellation).  Selection of the s
smallest of n values is costed as a tournament: (n-1) + (s-1)*ceil(log2 n)
comparisons; sorting c candidates as c*ceil(log2 c).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .decomposition import Leaf, OuterKind, leaf_generator_rows
from .kernel import polar_transform, wht

# Chase test error patterns for single parity check codes, indexed by the
# parity of the hard decision; entries index the reliability sort t[.].
SPC_PATTERNS_ODD = (
    (0,), (1,), (2,), (3,),
    (0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3),
    (4,), (5,), (6,), (7,),
    (0, 1, 4), (0, 1, 5), (0, 1, 6), (0, 2, 4), (0, 3, 4),
    (8,), (9,), (10,), (11,), (12,),
)
SPC_PATTERNS_EVEN = (
    (),
    (0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3),
    (0, 1, 2, 3),
    (0, 4), (0, 5), (0, 6), (0, 7),
    (1, 4), (1, 5), (1, 6), (1, 7),
    (2, 4), (2, 5), (2, 6), (3, 4), (3, 5),
    (0, 1, 2, 4),
    (0, 8), (0, 9), (0, 10), (0, 11),
)
RATE1_PATTERNS = ((), (0,), (1,), (0, 1), (2,))


class OpCount:
    """Mutable tally of real-valued additions and comparisons."""

    __slots__ = ("add", "cmp")

    def __init__(self):
        self.add = 0
        self.cmp = 0

    def tally(self, add: int = 0, cmp: int = 0) -> None:
        self.add += add
        self.cmp += cmp


def _log2ceil(n: int) -> int:
    return max(1, math.ceil(math.log2(max(2, n))))


def tally_select_smallest(ops: OpCount | None, n: int, s: int) -> None:
    if ops is not None and n > 1:
        ops.tally(cmp=(n - 1) + max(0, min(s, n) - 1) * _log2ceil(n))


def tally_sort(ops: OpCount | None, c: int) -> None:
    if ops is not None and c > 1:
        ops.tally(cmp=c * _log2ceil(c))


def tally_fht(ops: OpCount | None, length: int) -> None:
    if ops is not None and length > 1:
        ops.tally(add=length * _log2ceil(length))


@dataclass
class Emission:
    codeword: np.ndarray
    e: float
    more: bool
    estimated: bool = False
    next_bound: float | None = None


class OuterContractError(RuntimeError):
    pass


def _apply_coset(word: np.ndarray, coset: np.ndarray | None) -> np.ndarray:
    if coset is None:
        return word
    return word ^ coset


def _sign_adjust(s, coset: np.ndarray | None) -> np.ndarray:
    s_adj = np.array(s, dtype=np.float64, copy=True)
    if coset is not None and coset.any():
        s_adj[coset != 0] *= -1.0
    return s_adj


class OuterState:
    """Base of all kind-specific decoder states.

    Subclasses provide _candidate_count() and _emit(cursor) -> (word, e)
    where word is a codeword of the *base* leaf code and e its weight
    against the sign-adjusted LLR snapshot; coset correction and the
    emission-count contract live here.
    """

    def __init__(self, leaf: Leaf, s_adj: np.ndarray, coset: np.ndarray | None,
                 limit: int, ops: OpCount | None):
        self.leaf = leaf
        self.s_adj = s_adj
        self.coset = coset if coset is not None and coset.any() else None
        self.limit = min(limit, 1 << leaf.k_leaf)
        self.ops = ops
        self.emitted = 0
        self.cursor = 0
        self._skip_word: bytes | None = None

    def skip_word(self, word: np.ndarray) -> None:
        """Mark a base-code word as already emitted (hard-decision shortcut)."""
        self._skip_word = word.tobytes()

    def _candidate_count(self) -> int:
        raise NotImplementedError

    def _emit(self, cursor: int):
        raise NotImplementedError

    def _remaining(self) -> int:
        n_skip = 1 if self._skip_word is not None else 0
        return max(0, self._candidate_count() - self.cursor - n_skip)

    def next_codeword(self) -> Emission:
        if self.emitted >= self.limit or self._remaining() <= 0:
            raise OuterContractError("get_next_codeword called after exhaustion")
        while True:
            word, e = self._emit(self.cursor)
            self.cursor += 1
            if self._skip_word is not None and word.tobytes() == self._skip_word:
                self._skip_word = None
                continue
            break
        self.emitted += 1
        more = self.emitted < self.limit and self._remaining() > 0
        return Emission(codeword=_apply_coset(word, self.coset), e=e, more=more)


class _EnumState(OuterState):
    """Rate-0, repetition and k<=2 codes: sort all codewords by weight."""

    def __init__(self, leaf, s_adj, coset, limit, ops):
        super().__init__(leaf, s_adj, coset, limit, ops)
        rows = leaf_generator_rows(leaf)
        k = rows.shape[0]
        words = []
        for mask in range(1 << k):
            w = np.zeros(leaf.length, dtype=np.uint8)
            for b in range(k):
                if mask >> b & 1:
                    w ^= rows[b]
            words.append(w)
        abss = np.abs(s_adj)
        hard = s_adj < 0
        costs = np.array([abss[(w != 0) != hard].sum() for w in words])
        if ops is not None:
            ops.tally(add=len(words) * max(0, leaf.length - 1))
        tally_sort(ops, len(words))
        order = np.argsort(costs, kind="stable")
        self._words = [words[i] for i in order]
        self._costs = costs[order]

    def _candidate_count(self) -> int:
        return len(self._words)

    def _emit(self, cursor):
        return self._words[cursor], -float(self._costs[cursor])


class _SpcState(OuterState):
    """Chase-II over the fixed pattern table.

    The first two table entries are the two cheapest patterns for either
    parity, so the first two codewords need no sorting; the full list is
    materialized only from the third request on.
    """

    def __init__(self, leaf, s_adj, coset, limit, ops):
        super().__init__(leaf, s_adj, coset, limit, ops)
        n = leaf.length
        abss = np.abs(s_adj)
        self.hard = (s_adj < 0).astype(np.uint8)
        parity = int(self.hard.sum()) & 1
        table = SPC_PATTERNS_ODD if parity else SPC_PATTERNS_EVEN
        self.patterns = [p for p in table if not p or p[-1] < n]
        depth = min(13, n)
        tally_select_smallest(ops, n, depth)
        order = np.argsort(abss, kind="stable")[:depth]
        self.order = order
        self.abss = abss
        self._mat: list[tuple[float, int]] | None = None

    def _candidate_count(self) -> int:
        return len(self.patterns)

    def _materialize(self) -> None:
        if self._mat is not None:
            return
        costs = []
        adds = 0
        for i, pat in enumerate(self.patterns):
            cost = float(self.abss[self.order[list(pat)]].sum()) if pat else 0.0
            if i >= 2:
                adds += max(0, len(pat) - 1)
            costs.append((cost, i))
        if self.ops is not None:
            self.ops.tally(add=adds)
        tally_sort(self.ops, len(costs))
        costs.sort()
        self._mat = costs

    def _pattern_cost(self, pat) -> float:
        return float(self.abss[self.order[list(pat)]].sum()) if pat else 0.0

    def _word_for(self, pattern) -> np.ndarray:
        w = self.hard.copy()
        if pattern:
            w[self.order[list(pattern)]] ^= 1
        return w

    def _emit(self, cursor):
        if cursor < 2 and self._mat is None:
            pat = self.patterns[cursor]
            cost = self._pattern_cost(pat)
            if cursor == 1 and self.ops is not None:
                self.ops.tally(add=max(0, len(pat) - 1))
            return self._word_for(pat), -cost
        self._materialize()
        cost, i = self._mat[cursor]
        return self._word_for(self.patterns[i]), -cost


class _Rate1State(OuterState):
    """Full-rate leaves: hard decision plus four cheap flip patterns."""

    def __init__(self, leaf, s_adj, coset, limit, ops):
        super().__init__(leaf, s_adj, coset, limit, ops)
        n = leaf.length
        self.hard = (s_adj < 0).astype(np.uint8)
        abss = np.abs(s_adj)
        tally_select_smallest(ops, n, min(3, n))
        order = np.argsort(abss, kind="stable")[:3]
        pats = [p for p in RATE1_PATTERNS if not p or p[-1] < len(order)]
        costs = []
        adds = 0
        for i, pat in enumerate(pats):
            cost = float(abss[order[list(pat)]].sum()) if pat else 0.0
            adds += max(0, len(pat) - 1)
            costs.append((cost, i))
        if ops is not None:
            ops.tally(add=adds)
        tally_sort(ops, len(costs))
        costs.sort()
        self._order = order
        self._pats = pats
        self._mat = costs
        self.limit = min(self.limit, len(costs))

    def _candidate_count(self) -> int:
        return len(self._mat)

    def _emit(self, cursor):
        cost, i = self._mat[cursor]
        w = self.hard.copy()
        pat = self._pats[i]
        if pat:
            w[self._order[list(pat)]] ^= 1
        return w, -cost


class _FhtState(OuterState):
    """RM(1, mu), its repetition concatenations, and coset unions.

    One Hadamard transform per coset at preprocess time; the first two
    codewords need one max scan each, later ones a full deferred sort.
    Candidate identity is (coset index, transform index a, complement bit b).
    """

    def __init__(self, leaf, s_adj, coset, limit, ops):
        super().__init__(leaf, s_adj, coset, limit, ops)
        mu = leaf.mu
        n = leaf.length
        self.fold = leaf.extras.get("t", 0) if leaf.kind == OuterKind.RM1_REP else 0
        self.mu_eff = mu - self.fold
        if leaf.kind == OuterKind.RM1_COSETS:
            reps = leaf.extras["reps"]
            rows = [_row(r, mu) for r in reps]
            shifts = [np.zeros(n, dtype=np.uint8), rows[0]]
            if len(rows) == 2:
                shifts += [rows[1], rows[0] ^ rows[1]]
        else:
            shifts = [np.zeros(n, dtype=np.uint8)]
        self.shifts = shifts
        base = s_adj
        if self.fold:
            base = s_adj.reshape(-1, 1 << self.fold).sum(axis=1)
            if ops is not None:
                ops.tally(add=n - base.size)
        self.sumabs = float(np.abs(s_adj).sum())
        if ops is not None:
            ops.tally(add=max(0, n - 1))
        tables = []
        for q in shifts:
            s_q = base if not q.any() else _sign_adjust(
                base, q[:: 1 << self.fold] if self.fold else q)
            tally_fht(ops, s_q.size)
            tables.append(wht(s_q))
        self.tables = np.array(tables)          # [n_cosets, 2^mu_eff]
        self._order: np.ndarray | None = None
        self._scanned: list[tuple[int, int, int]] = []

    def _candidate_count(self) -> int:
        return self.tables.size * 2

    def _value(self, cand: tuple[int, int, int]) -> float:
        q, a, b = cand
        v = self.tables[q, a]
        return -v if b else v

    def _word(self, cand: tuple[int, int, int]) -> np.ndarray:
        q, a, b = cand
        n = self.leaf.length
        j = np.arange(n) >> self.fold
        bits = _parity_table(self.mu_eff)[a & ((1 << self.mu_eff) - 1), j]
        w = bits ^ (1 if b else 0)
        return (w ^ self.shifts[q]).astype(np.uint8)

    def _max_scan(self) -> tuple[int, int, int]:
        """Best remaining candidate by one pass over |T|."""
        flat = np.abs(self.tables).ravel()
        if self.ops is not None:
            self.ops.tally(cmp=max(0, flat.size - 1))
        taken = {(q, a) for q, a, _ in self._scanned}
        if len(taken) < flat.size:
            order = np.argsort(-flat, kind="stable")
            for idx in order:
                q, a = divmod(int(idx), self.tables.shape[1])
                if (q, a) not in taken:
                    b = 1 if self.tables[q, a] < 0 else 0
                    return (q, a, b)
        # every magnitude taken once: fall back to the complements
        q, a, b = self._scanned[0]
        return (q, a, 1 - b)

    def _emit(self, cursor):
        if self._order is None and cursor < 2:
            cand = self._max_scan()
            self._scanned.append(cand)
        else:
            if self._order is None:
                vals = np.concatenate([self.tables.ravel(), -self.tables.ravel()])
                tally_sort(self.ops, vals.size)
                self._order = np.argsort(-vals, kind="stable")
                self._pos = 0
            while True:
                flat_id = int(self._order[self._pos])
                self._pos += 1
                b, rest = divmod(flat_id, self.tables.size)
                q, a = divmod(rest, self.tables.shape[1])
                cand = (q, a, b)
                if cand in self._scanned:
                    continue    # already emitted via a max scan
                break
        if self.ops is not None:
            self.ops.tally(add=1)
        e = 0.5 * (self._value(cand) - self.sumabs)
        return self._word(cand), e


_PARITY_CACHE: dict[int, np.ndarray] = {}


def _parity_table(mu: int) -> np.ndarray:
    """Table[a, j] = popcount(a & j) mod 2 for a, j < 2^mu."""
    if mu not in _PARITY_CACHE:
        n = 1 << mu
        a = np.arange(n)
        masked = a[:, None] & a[None, :]
        counts = np.zeros_like(masked)
        for b in range(mu):
            counts += (masked >> b) & 1
        _PARITY_CACHE[mu] = (counts & 1).astype(np.uint8)
    return _PARITY_CACHE[mu]


def _row(i: int, mu: int) -> np.ndarray:
    j = np.arange(1 << mu)
    return ((j & i) == j).astype(np.uint8)


class _DpcState(OuterState):
    """Double parity: best-first merge of two interleaved SPC streams."""

    def __init__(self, leaf, s_adj, coset, limit, ops):
        super().__init__(leaf, s_adj, coset, limit, ops)
        half = _half_leaf(leaf)
        self.sub = [
            _SpcState(half, s_adj[0::2].copy(), None, 1 << half.k_leaf, ops),
            _SpcState(half, s_adj[1::2].copy(), None, 1 << half.k_leaf, ops),
        ]
        self._cache: list[list[tuple[np.ndarray, float]]] = [[], []]
        self._heap: list[tuple[float, int, int]] = []
        self._seen: set[tuple[int, int]] = set()
        self._push(0, 0)
        self._total = min(
            len(self.sub[0].patterns) * len(self.sub[1].patterns),
            1 << leaf.k_leaf,
        )

    def _stream_get(self, s: int, i: int):
        cache = self._cache[s]
        sub = self.sub[s]
        while len(cache) <= i:
            if sub.emitted >= sub._candidate_count():
                return None
            em = sub.next_codeword()
            cache.append((em.codeword, em.e))
        return cache[i]

    def _push(self, i: int, j: int) -> None:
        if (i, j) in self._seen:
            return
        a = self._stream_get(0, i)
        b = self._stream_get(1, j)
        if a is None or b is None:
            return
        self._seen.add((i, j))
        if self.ops is not None:
            self.ops.tally(add=1, cmp=_log2ceil(len(self._heap) + 1))
        # ties advance the even-interleave stream first (smaller j wins)
        heapq.heappush(self._heap, (-(a[1] + b[1]), j, i))

    def _candidate_count(self) -> int:
        return self._total

    def _emit(self, cursor):
        neg_e, j, i = heapq.heappop(self._heap)
        a = self._cache[0][i]
        b = self._cache[1][j]
        w = np.empty(self.leaf.length, dtype=np.uint8)
        w[0::2] = a[0]
        w[1::2] = b[0]
        self._push(i + 1, j)
        self._push(i, j + 1)
        return w, -neg_e


_HALF_CACHE: dict[int, Leaf] = {}


def _half_leaf(leaf: Leaf) -> Leaf:
    mu = leaf.mu - 1
    if mu not in _HALF_CACHE:
        _HALF_CACHE[mu] = Leaf(
            psi=-1, phi_start=0, phi_end=(1 << mu) - 1, mu=mu, layer=0,
            r=0, kind=OuterKind.SPC, extras={}, frozen_local=(0,),
            k_leaf=(1 << mu) - 1, d_min=2,
        )
    return _HALF_CACHE[mu]


_STATE_FOR = {
    OuterKind.RATE0: _EnumState,
    OuterKind.REP: _EnumState,
    OuterKind.LOW_RATE: _EnumState,
    OuterKind.SPC: _SpcState,
    OuterKind.DPC: _DpcState,
    OuterKind.RATE1: _Rate1State,
    OuterKind.RM1: _FhtState,
    OuterKind.RM1_REP: _FhtState,
    OuterKind.RM1_COSETS: _FhtState,
}


def preprocess(leaf: Leaf, s, coset: np.ndarray | None, limit: int,
               ops: OpCount | None = None) -> OuterState:
    """Sign-adjust the LLRs by the coset and build the kind-specific state."""
    coset = None if coset is None else np.asarray(coset, dtype=np.uint8)
    s_adj = _sign_adjust(s, coset)
    return _STATE_FOR[leaf.kind](leaf, s_adj, coset, limit, ops)


def get_next_codeword(state: OuterState) -> Emission:
    return state.next_codeword()


class DeferredState:
    """Snapshot taken when the hard-decision shortcut fires.

    Preprocessing is postponed; resolve() runs it and skips the word the
    shortcut already emitted.  `bound` is the guaranteed ceiling on any
    later codeword's weight, -d_min * min|S|.
    """

    __slots__ = ("leaf", "s_adj", "coset", "limit", "ops", "hard_word", "bound")

    def __init__(self, leaf, s_adj, coset, limit, ops, hard_word, bound):
        self.leaf = leaf
        self.s_adj = s_adj
        self.coset = coset
        self.limit = limit
        self.ops = ops
        self.hard_word = hard_word
        self.bound = bound

    def resolve(self) -> OuterState:
        state = _STATE_FOR[self.leaf.kind](
            self.leaf, self.s_adj, self.coset, self.limit, self.ops)
        state.emitted = 1           # the shortcut's word counts
        state.skip_word(self.hard_word)
        return state


def _is_member(leaf: Leaf, word: np.ndarray) -> bool:
    if leaf.kind == OuterKind.RATE1:
        return True
    if leaf.kind == OuterKind.RATE0:
        return not word.any()
    if leaf.kind == OuterKind.REP:
        return not word.any() or word.all()
    if leaf.kind == OuterKind.SPC:
        return int(word.sum()) % 2 == 0
    if leaf.kind == OuterKind.DPC:
        return int(word[0::2].sum()) % 2 == 0 and int(word[1::2].sum()) % 2 == 0
    u = polar_transform(word)
    return not u[list(leaf.frozen_local)].any()


def hard_decision_shortcut(leaf: Leaf, s, coset: np.ndarray | None, limit: int,
                           ops: OpCount | None = None):
    """Emit the hard decision directly when it is a codeword.

    Returns (Emission, DeferredState) or None.  The emission's weight is
    exactly zero; next_bound is the §-style bound -d_min * min|S| on any
    later codeword of this leaf.
    """
    coset = None if coset is None else np.asarray(coset, dtype=np.uint8)
    s_adj = _sign_adjust(s, coset)
    hard = (s_adj < 0).astype(np.uint8)
    if not _is_member(leaf, hard):
        return None
    limit = min(limit, 1 << leaf.k_leaf)
    more = limit > 1
    bound = None
    if leaf.length and more:
        if ops is not None:
            ops.tally(cmp=max(0, leaf.length - 1))
        bound = -leaf.d_min * float(np.abs(s_adj).min())
    word = hard if coset is None or not coset.any() else (hard ^ coset)
    emission = Emission(codeword=word, e=0.0, more=more, next_bound=bound)
    deferred = DeferredState(leaf, s_adj, coset, limit, ops, hard, bound)
    return emission, deferred
