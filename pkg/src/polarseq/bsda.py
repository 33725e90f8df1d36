"""Block sequential decoding over the Plotkin decomposition tree.

The decoder pops the best-scoring path from a double-ended priority queue,
folds up partial sums, optionally spawns one sibling path carrying the next
codeword of the previous block, then extends the popped path by the most
probable codeword of its current block and pushes it back.  Scores are
accumulated penalties offset by a precomputed bias table.

Score bookkeeping: a forward extension stores R <- R + e and pushes
R - psi[block]; a cloned sibling stores R' <- R~ + e and is pushed with
R' - psi[prev block].  The original worked trace of the algorithm instead
carries the pushed score itself forward in the sibling's accumulator,
permanently folding the bias at the clone point into its later scores;
that variant is reproduced by DecoderConfig.example_score_bookkeeping but
degrades the search badly on long codes, where bias magnitudes are large.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codespec import CodeSpec, crc_bits, crc_degree
from .decomposition import PDTree, TreePolicy, build_tree
from .depq import DoubleEndedQueue
from .kernel import polar_transform
from .outer import (
    DeferredState,
    OpCount,
    get_next_codeword,
    hard_decision_shortcut,
    preprocess,
)
from .pathstore import ArrayBank, PoolExhausted


@dataclass
class DecoderConfig:
    L: int = 32
    D: int | None = None                # queue capacity; default 4*L
    pool_capacity: int | None = None    # default min(D, 4L) * 2n entries
    psi: np.ndarray | None = None       # bias, one entry per tree leaf
    crc: int | None = None              # validate info CRC at full length
    count_ops: bool = True
    # Carry the biased score (not the raw penalty) in a cloned sibling's
    # accumulator, exactly as the reference worked trace does.
    example_score_bookkeeping: bool = False
    # When the hard-decision shortcut fired, score the sibling by the weight
    # bound -d_min * min|S| and only build its codeword if it is ever popped
    # (re-pushing when the true score no longer tops the queue).  Disable to
    # construct every sibling eagerly, as the published worked trace does.
    defer_siblings: bool = True

    def queue_capacity(self) -> int:
        return self.D if self.D is not None else max(4, 4 * self.L)

    def pool_entries(self, n: int) -> int:
        if self.pool_capacity is not None:
            return self.pool_capacity
        return min(self.queue_capacity(), 4 * self.L) * 2 * n


@dataclass
class DecodeResult:
    status: str                         # ok | queue-empty | pool-exhausted | crc-failed
    codeword: np.ndarray | None
    u: np.ndarray | None
    info: np.ndarray | None
    iterations: int
    ops_add: int
    ops_cmp: int
    visits: np.ndarray
    peak_pool: int
    crc_rejections: int = 0
    pushed_scores: list[float] | None = None
    leaf_llrs: list[np.ndarray] | None = None
    # with record_trace: per-CalcS records and per-push shadow accounting
    trace: list[dict] | None = None
    push_shadow: list[tuple[float, float, int]] | None = None

    @property
    def ops_total(self) -> int:
        return self.ops_add + self.ops_cmp


class DfPlan:
    """Precomputed dynamic-frozen-symbol bookkeeping for one tree.

    For every leaf: which constraint targets land inside it (with the
    A-row each contributes to the coset representative), and which watched
    support phases it contains (with the accumulator bitmask each flips).
    """

    def __init__(self, spec: CodeSpec, tree: PDTree):
        nontrivial = spec.nontrivial_constraints()
        self.f = len(nontrivial)
        self.coset_terms: list[list[tuple[int, np.ndarray]]] = []
        self.watch: list[list[tuple[int, int]]] = []
        masks: dict[int, int] = {}
        for s, (_, support) in enumerate(nontrivial):
            for j in support:
                masks[j] = masks.get(j, 0) | (1 << s)
        for leaf in tree.leaves:
            terms = []
            for s, (target, _) in enumerate(nontrivial):
                if leaf.phi_start <= target <= leaf.phi_end:
                    loc = target - leaf.phi_start
                    j = np.arange(leaf.length)
                    terms.append((s, ((j & loc) == j).astype(np.uint8)))
            self.coset_terms.append(terms)
            self.watch.append(sorted(
                (j - leaf.phi_start, masks[j]) for j in masks
                if leaf.phi_start <= j <= leaf.phi_end))


_PLANS: dict[int, DfPlan] = {}


def df_plan(spec: CodeSpec, tree: PDTree) -> DfPlan:
    key = id(tree)
    plan = _PLANS.get(key)
    if plan is None:
        plan = DfPlan(spec, tree)
        _PLANS[key] = plan
    return plan


def remove_bad_paths(queue: DoubleEndedQueue, bank: ArrayBank, capacity: int) -> int:
    """Pop-min and kill until at most capacity-2 entries remain."""
    removed = 0
    while len(queue) > capacity - 2:
        worst = queue.pop_min()
        bank.kill_path(worst.path)
        removed += 1
    return removed


def get_coset(plan: DfPlan, leaf_psi: int, w: int) -> np.ndarray | None:
    terms = plan.coset_terms[leaf_psi]
    if not terms:
        return None
    p = None
    for s, row in terms:
        if w >> s & 1:
            p = row.copy() if p is None else (p ^ row)
    return p


def accumulate_df(plan: DfPlan, leaf_psi: int, w: int, word: np.ndarray) -> int:
    """Fold the block's corrected codeword into the DFS accumulators."""
    watch = plan.watch[leaf_psi]
    if not watch:
        return w
    u_loc = polar_transform(word)
    for loc, mask in watch:
        if u_loc[loc]:
            w ^= mask
    return w


def decode(spec: CodeSpec, tree: PDTree, config: DecoderConfig, llrs,
           bank: ArrayBank | None = None, record_trace: bool = False) -> DecodeResult:
    """Run the block sequential decoder on one frame of channel LLRs."""
    if config.psi is None or len(config.psi) != tree.num_leaves:
        raise ValueError("config.psi must hold one bias value per tree leaf")
    psi_tab = np.asarray(config.psi, dtype=np.float64)
    plan = df_plan(spec, tree)
    n_leaves = tree.num_leaves
    L = config.L
    D = config.queue_capacity()
    if bank is None:
        bank = ArrayBank(spec.m, D, config.pool_entries(spec.n))
    else:
        bank.reset()
    ops = OpCount()
    counted = ops if config.count_ops else None
    queue = DoubleEndedQueue(D)
    visits = np.zeros(n_leaves + 1, dtype=np.int64)
    pushed: list[float] | None = [] if record_trace else None
    leaf_llrs: list[np.ndarray] | None = [] if record_trace else None
    trace: list[dict] | None = [] if record_trace else None
    push_shadow: list[tuple[float, float, int]] | None = [] if record_trace else None
    units: dict[int, tuple] = {}        # path -> decided u blocks (trace only)
    esum: dict[int, float] = {}
    esum_tilde: dict[int, float] = {}
    crc_rejections = 0
    iterations = 0
    closed = -1

    def fail(status: str) -> DecodeResult:
        if status == "queue-empty" and crc_rejections:
            status = "crc-failed"
        return DecodeResult(
            status=status, codeword=None, u=None, info=None,
            iterations=iterations, ops_add=ops.add, ops_cmp=ops.cmp,
            visits=visits, peak_pool=bank.peak_phi,
            crc_rejections=crc_rejections,
            pushed_scores=pushed, leaf_llrs=leaf_llrs,
            trace=trace, push_shadow=push_shadow)

    def forward(l: int) -> None:
        st = bank.paths[l]
        leaf = tree.leaves[st.psi]
        s_leaf = bank.calc_s(l, leaf.layer, leaf.r, counted)
        if record_trace:
            leaf_llrs.append(s_leaf.copy())
            prefix = np.concatenate(units[l]) if units[l] \
                else np.zeros(0, dtype=np.uint8)
            trace.append(dict(psi=leaf.psi, layer=leaf.layer, r=leaf.r,
                              u_prefix=prefix, s=s_leaf.copy()))
        coset = get_coset(plan, leaf.psi, st.w)
        limit = min(1 << leaf.k_leaf, L)
        hit = hard_decision_shortcut(leaf, s_leaf, coset, limit, counted)
        if hit is not None:
            em, st.Z = hit
        else:
            state = preprocess(leaf, s_leaf, coset, limit, counted)
            em = get_next_codeword(state)
            st.Z = state
        bank.c_write(l, leaf.layer, leaf.r)[:] = em.codeword
        st.B = em.more
        st.R_tilde = st.R
        st.R = st.R + em.e
        score = st.R - psi_tab[leaf.psi]
        st.w_tilde = st.w
        st.w = accumulate_df(plan, leaf.psi, st.w, em.codeword)
        st.psi += 1
        queue.push(score, l, st.psi)
        if record_trace:
            units[l] = units[l] + (polar_transform(em.codeword),)
            esum_tilde[l] = esum[l]
            esum[l] += em.e
            pushed.append(score)
            push_shadow.append((score, esum[l], leaf.psi))

    def backward(l: int) -> None:
        st = bank.paths[l]
        prev = tree.leaves[st.psi - 1]
        z = st.Z
        st.Z = None                      # replaced at this path's next forward
        if isinstance(z, DeferredState) and config.defer_siblings:
            # Score the sibling by the weight bound; detach its slice now so
            # the parent stays the exclusive owner of its own arrays, but
            # only construct the codeword if the sibling is ever popped.
            l2 = bank.clone_path(l)
            st2 = bank.paths[l2]
            bank.c_write(l2, prev.layer, prev.r)
            est = st.R_tilde + z.bound
            score = est - psi_tab[prev.psi]
            st2.R = score if config.example_score_bookkeeping else est
            st2.R_tilde = st.R_tilde
            st2.psi = st.psi
            st2.B = False
            st2.Z = z
            st2.w = st.w_tilde           # trued up at resolve time
            st2.w_tilde = st.w_tilde
            st2.pending = True
            queue.push(score, l2, st2.psi)
            if record_trace:
                units[l2] = units[l][:-1] + (None,)
                esum[l2] = esum_tilde[l]
                esum_tilde[l2] = esum_tilde[l]
                pushed.append(score)
                push_shadow.append((score, float("nan"), prev.psi))
            return
        if isinstance(z, DeferredState):
            z = z.resolve()
        em = get_next_codeword(z)
        l2 = bank.clone_path(l)
        st2 = bank.paths[l2]
        bank.c_write(l2, prev.layer, prev.r)[:] = em.codeword
        st2.B = em.more
        st2.Z = z                        # stream continues through the clone
        score = st.R_tilde + em.e - psi_tab[prev.psi]
        st2.R = score if config.example_score_bookkeeping else st.R_tilde + em.e
        st2.R_tilde = st.R_tilde
        st2.psi = st.psi
        st2.w = accumulate_df(plan, prev.psi, st.w_tilde, em.codeword)
        st2.w_tilde = st.w_tilde
        queue.push(score, l2, st2.psi)
        if record_trace:
            units[l2] = units[l][:-1] + (polar_transform(em.codeword),)
            esum[l2] = esum_tilde[l] + em.e
            esum_tilde[l2] = esum_tilde[l]
            pushed.append(score)
            push_shadow.append((score, esum[l2], prev.psi))

    try:
        l0 = bank.assign_initial_path()
        bank.load_channel_llrs(l0, llrs)
        queue.push(0.0, l0, 0)
        if record_trace:
            units[l0] = ()
            esum[l0] = esum_tilde[l0] = 0.0
        while True:
            if not queue:
                return fail("queue-empty")
            entry = queue.pop_max()
            l = entry.path
            iterations += 1
            st = bank.paths[l]
            if st.pending:
                # Build the deferred sibling codeword; if its true score no
                # longer tops the queue, re-queue it and move on.
                prev = tree.leaves[st.psi - 1]
                z = st.Z.resolve()
                em = get_next_codeword(z)
                bank.c_write(l, prev.layer, prev.r)[:] = em.codeword
                st.Z = z
                st.B = em.more
                st.pending = False
                true_r = st.R_tilde + em.e
                score = true_r - psi_tab[prev.psi]
                st.R = score if config.example_score_bookkeeping else true_r
                st.w = accumulate_df(plan, prev.psi, st.w_tilde, em.codeword)
                if record_trace:
                    units[l] = units[l][:-1] + (polar_transform(em.codeword),)
                    esum[l] = esum_tilde[l] + em.e
                if queue and score < queue.peek_max().score:
                    queue.push(score, l, st.psi)
                    if record_trace:
                        pushed.append(score)
                        push_shadow.append((score, esum.get(l, float("nan")),
                                            prev.psi))
                    continue
            psi = st.psi
            if psi > 0:
                prev = tree.leaves[psi - 1]
                if prev.r % 2 == 1:
                    bank.update_c(l, prev.layer, prev.r)
            if psi == n_leaves:
                codeword = bank.c_read(l, 0).copy()
                u = polar_transform(codeword)
                info = spec.extract_info(u)
                if config.crc is not None:
                    r = crc_degree(config.crc)
                    data, tail = info[:-r], info[-r:]
                    if not np.array_equal(crc_bits(data, config.crc), tail):
                        crc_rejections += 1
                        bank.kill_path(l)
                        continue
                return DecodeResult(
                    status="ok", codeword=codeword, u=u, info=info,
                    iterations=iterations, ops_add=ops.add, ops_cmp=ops.cmp,
                    visits=visits, peak_pool=bank.peak_phi,
                    crc_rejections=crc_rejections,
                    pushed_scores=pushed, leaf_llrs=leaf_llrs,
                    trace=trace, push_shadow=push_shadow)
            if st.B and psi > closed:
                remove_bad_paths(queue, bank, D)
                backward(l)
            forward(l)
            arrival = st.psi
            visits[arrival] += 1
            if visits[arrival] >= L:
                closed = max(closed, arrival)
                doomed: list[int] = []

                def mark(block: int, path: int) -> bool:
                    if path != l and block <= closed:
                        doomed.append(path)
                        return True
                    return False

                queue.remove_if(mark)
                for path in doomed:
                    bank.kill_path(path)
    except PoolExhausted:
        return fail("pool-exhausted")


# ---------------------------------------------------------------------------
# Bias estimation


def penalty_profile(spec: CodeSpec, snr_db: float, samples: int,
                    seed: int = 0, chunk: int = 1 << 14) -> np.ndarray:
    """Mean cumulative path penalty of the correct path, per phase.

    Monte-Carlo over all-zero-codeword BPSK/AWGN transmissions (sufficient
    by channel and min-sum sign symmetry): runs the min-sum SC recursion
    along the true path and averages the running penalty sums.
    """
    n = spec.n
    rate = spec.k / n
    sigma_sq = 1.0 / (2.0 * rate * 10.0 ** (snr_db / 10.0))
    sigma = np.sqrt(sigma_sq)
    rng = np.random.default_rng(seed)
    total = np.zeros(n, dtype=np.float64)
    done = 0
    while done < samples:
        batch = min(chunk, samples - done)
        y = 1.0 + sigma * rng.standard_normal((batch, n))
        llr = (2.0 / sigma_sq) * y
        pen = _zero_path_penalties(llr)
        total += np.cumsum(pen, axis=1).sum(axis=0)
        done += batch
    return total / samples


def _zero_path_penalties(s: np.ndarray) -> np.ndarray:
    """tau(S_m^(i), 0) for every phase i along the all-zero input path."""
    width = s.shape[1]
    if width == 1:
        return np.minimum(s, 0.0)
    h = width // 2
    a, b = s[:, :h], s[:, h:]
    sign = np.where((a < 0) != (b < 0), -1.0, 1.0)
    left = _zero_path_penalties(sign * np.minimum(np.abs(a), np.abs(b)))
    right = _zero_path_penalties(a + b)
    return np.concatenate([left, right], axis=1)


def psi_for_tree(profile: np.ndarray, tree: PDTree) -> np.ndarray:
    """Bias table for a tree: profile sampled at each leaf's last phase."""
    return np.array([profile[leaf.phi_end] for leaf in tree.leaves])


def estimate_bias(spec: CodeSpec, tree: PDTree, snr_db: float, samples: int,
                  seed: int = 0) -> np.ndarray:
    return psi_for_tree(penalty_profile(spec, snr_db, samples, seed), tree)


# ---------------------------------------------------------------------------
# Symbol-wise sequential decoding (degenerate tree)


_SDA_TREES: dict[int, PDTree] = {}


def sda_tree(spec: CodeSpec) -> PDTree:
    key = id(spec)
    tree = _SDA_TREES.get(key)
    if tree is None:
        tree = build_tree(spec, TreePolicy.symbolwise())
        _SDA_TREES[key] = tree
    return tree


def decode_sda(spec: CodeSpec, config: DecoderConfig, llrs,
               bank: ArrayBank | None = None, record_trace: bool = False) -> DecodeResult:
    """Symbol-by-symbol sequential decoding: the all-length-1 tree."""
    tree = sda_tree(spec)
    if config.psi is None or len(config.psi) != spec.n:
        raise ValueError("decode_sda needs a per-phase bias table")
    return decode(spec, tree, config, llrs, bank=bank, record_trace=record_trace)
