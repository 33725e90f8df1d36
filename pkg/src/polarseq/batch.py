"""Vectorized front-end for Monte-Carlo runs: many frames, no backtracking.

A frame whose best-first search never leaves the greedy path is fully
determined by one left-to-right sweep over the tree: every pop takes the
freshly pushed frontier entry, every backward clone is pushed and never
popped.  That condition is checkable from the sweep itself: the frontier
score after each block must dominate every sibling score pushed so far
(ties go to the frontier, which is pushed last).  Frames satisfying it are
decoded here, batched across the frame axis with numpy; the rest fall back
to the reference decoder.  Outputs, operation counts, visit tables and the
pool high-water mark match the reference decoder exactly; the equivalence
is pinned by tests.

Only the default score bookkeeping is supported; leaf kinds with awkward
vector forms (double parity, coset unions, exhaustive k<=2) are delegated
per-frame to the real outer decoders on the batched LLR rows.
"""

from __future__ import annotations

import math

import numpy as np

from .bsda import DecoderConfig, DecodeResult, df_plan
from .codespec import CodeSpec, crc_degree, crc_matrix
from .decomposition import OuterKind, PDTree
from .kernel import polar_transform, wht
from .outer import (
    DeferredState,
    OpCount,
    SPC_PATTERNS_EVEN,
    SPC_PATTERNS_ODD,
    _log2ceil,
    get_next_codeword,
    hard_decision_shortcut,
    preprocess,
)
from .pathstore import ArrayBank

_VECTOR_KINDS = {
    OuterKind.RATE0, OuterKind.REP, OuterKind.RATE1,
    OuterKind.SPC, OuterKind.RM1, OuterKind.RM1_REP,
}


def _spc_pattern_adds(n: int, parity: int) -> int:
    table = SPC_PATTERNS_ODD if parity else SPC_PATTERNS_EVEN
    pats = [p for p in table if not p or p[-1] < n]
    return sum(max(0, len(p) - 1) for p in pats)


def _spc_pattern_count(n: int, parity: int) -> int:
    table = SPC_PATTERNS_ODD if parity else SPC_PATTERNS_EVEN
    return len([p for p in table if not p or p[-1] < n])


def _sort_cost(c: int) -> int:
    return c * _log2ceil(c) if c > 1 else 0


def _select_cost(n: int, s: int) -> int:
    return (n - 1) + max(0, min(s, n) - 1) * _log2ceil(n) if n > 1 else 0


class BatchDecoder:
    """Shared state for decoding many frames of one code/config."""

    def __init__(self, spec: CodeSpec, tree: PDTree, config: DecoderConfig):
        if config.psi is None or len(config.psi) != tree.num_leaves:
            raise ValueError("config.psi must hold one bias value per leaf")
        self.spec = spec
        self.tree = tree
        self.config = config
        self.plan = df_plan(spec, tree)
        self.psi = np.asarray(config.psi, dtype=np.float64)
        self.bank = ArrayBank(spec.m, config.queue_capacity(),
                              config.pool_entries(spec.n))
        v = tree.num_leaves
        self.fast_ok = (not config.example_score_bookkeeping) and \
            config.defer_siblings and \
            (config.L == 1 or v <= config.queue_capacity() - 1)
        # B pattern: a sibling codeword exists whenever the block carries
        # information and the emission budget allows a second word.
        self.b_flag = [
            leaf.k_leaf >= 1 and min(1 << leaf.k_leaf, config.L) >= 2
            for leaf in tree.leaves]
        # Stage plan per leaf: ('p'|'q', source layer, width); mirrors calc_s.
        m = spec.m
        self.stages = []
        for leaf in tree.leaves:
            layer, r = leaf.layer, leaf.r
            plan = []
            if layer > 0:
                d = min((r & -r).bit_length() - 1, layer - 1) if r else layer - 1
                lam = layer - d
                width = 1 << (m - lam)
                if (r >> d) & 1:
                    plan.append(("p", lam, width))
                    lam += 1
                    width >>= 1
                while lam <= layer:
                    plan.append(("q", lam, width))
                    lam += 1
                    width >>= 1
            self.stages.append(plan)
        if self.fast_ok:
            self._constants()

    def _constants(self) -> None:
        """Clean-run iteration count and pool profile from one real decode."""
        spec, tree = self.spec, self.tree
        zero = np.zeros(spec.k, dtype=np.uint8)
        llrs = 8.0 * (1.0 - 2.0 * spec.encode(zero).astype(np.float64))
        from .bsda import decode
        ref = decode(spec, tree, self.config, llrs, bank=self.bank)
        if ref.status != "ok":
            self.fast_ok = False
            return
        self.clean_iterations = ref.iterations
        self.clean_peak_pool = ref.peak_pool
        self.clean_visits = ref.visits.copy()

    # ------------------------------------------------------------------

    def decode_batch(self, llrs: np.ndarray):
        """Decode a [frames, n] batch.

        Returns (accepted mask, results) where results[i] is a DecodeResult
        for accepted frames and None elsewhere; rejected frames must be run
        through the reference decoder.
        """
        frames, n = llrs.shape
        if not self.fast_ok:
            return np.zeros(frames, dtype=bool), [None] * frames
        m = self.spec.m
        tree, config = self.tree, self.config
        plan = self.plan
        f_cons = plan.f

        s_mem = [None] * (m + 1)
        s_mem[0] = np.array(llrs, dtype=np.float64)
        c_mem = [np.zeros((frames, 2, 1 << (m - lam)), dtype=np.uint8)
                 for lam in range(m + 1)]
        wmat = np.zeros((frames, max(f_cons, 1)), dtype=bool)
        ops_add = np.zeros(frames, dtype=np.int64)
        ops_cmp = np.zeros(frames, dtype=np.int64)
        r_cum = np.zeros(frames)
        # per-block records for the post-sweep pop-order analysis
        v = tree.num_leaves
        m_scores = np.empty((v, frames))
        sib_est = np.full((v, frames), -np.inf)     # pushed sibling score
        sib_true = np.full((v, frames), -np.inf)    # its resolved true score
        sib_fired = np.zeros((v, frames), dtype=bool)
        res_add = np.zeros((v, frames), dtype=np.int64)
        res_cmp = np.zeros((v, frames), dtype=np.int64)

        for leaf in tree.leaves:
            layer, r = leaf.layer, leaf.r
            nl = leaf.length
            # LLR stages
            for op, lam, width in self.stages[leaf.psi]:
                src = s_mem[lam - 1]
                a, b = src[:, :width], src[:, width:2 * width]
                if op == "p":
                    c_t = c_mem[lam][:, 0, :width]
                    out = a * (1.0 - 2.0 * c_t) + b
                    ops_add += width
                else:
                    out = np.where((a < 0) != (b < 0), -1.0, 1.0) \
                        * np.minimum(np.abs(a), np.abs(b))
                    ops_cmp += width
                s_mem[lam] = out
            s_leaf = s_mem[layer] if layer > 0 else s_mem[0]

            # coset from the dynamic-frozen accumulators
            terms = plan.coset_terms[leaf.psi]
            if terms:
                cols = np.array([s for s, _ in terms])
                rows = np.array([row for _, row in terms], dtype=np.uint8)
                coset = (wmat[:, cols].astype(np.uint8) @ rows) & 1
                s_adj = np.where(coset != 0, -s_leaf, s_leaf)
            else:
                coset = None
                s_adj = s_leaf

            psi_i = leaf.psi
            word, e1, e2, fired = self._decode_leaf(
                leaf, s_adj, ops_add, ops_cmp, res_add[psi_i], res_cmp[psi_i])
            if coset is not None:
                word = word ^ coset

            last = psi_i == tree.num_leaves - 1
            r_prev = r_cum
            r_cum = r_cum + e1
            m_scores[psi_i] = r_cum - self.psi[psi_i]
            if self.b_flag[psi_i] and not last:
                bound = -leaf.d_min * np.abs(s_adj).min(axis=1)
                sib_fired[psi_i] = fired
                sib_true[psi_i] = r_prev + e2 - self.psi[psi_i]
                sib_est[psi_i] = np.where(
                    fired, r_prev + bound - self.psi[psi_i], sib_true[psi_i])

            # dynamic-frozen accumulation
            watch = plan.watch[leaf.psi]
            if watch:
                u_loc = polar_transform(word)
                for loc, mask_bits in watch:
                    hit = u_loc[:, loc] == 1
                    for s in range(f_cons):
                        if mask_bits >> s & 1:
                            wmat[hit, s] ^= True

            # partial sums
            c_mem[layer][:, r & 1, :nl] = word
            lam, ph = layer, r
            while ph & 1 and lam > 0:
                w = 1 << (m - lam)
                parent = c_mem[lam - 1][:, (ph >> 1) & 1]
                np.bitwise_xor(c_mem[lam][:, 0], c_mem[lam][:, 1],
                               out=parent[:, :w])
                parent[:, w:2 * w] = c_mem[lam][:, 1]
                ph >>= 1
                lam -= 1

        # Pop-order analysis.  The frontier pop after block j must beat every
        # queued sibling.  An exact-scored sibling above any later frontier
        # means a real backtrack; a bound-scored one merely resolves (one
        # extra pop plus its preprocessing) provided its true score then
        # drops strictly below every later frontier.
        extra_iters = np.zeros(frames, dtype=np.int64)
        accepted = np.ones(frames, dtype=bool)
        smin = np.full(frames, np.inf)
        for j in range(v - 1, 0, -1):
            np.minimum(smin, m_scores[j], out=smin)
            est, true, fired = sib_est[j - 1], sib_true[j - 1], sib_fired[j - 1]
            live = np.isfinite(est)
            pops = live & (est > smin)
            resolved = pops & fired
            accepted &= ~pops | (fired & (true < smin))
            extra_iters += resolved
            ops_add += np.where(resolved, res_add[j - 1], 0)
            ops_cmp += np.where(resolved, res_cmp[j - 1], 0)

        codewords = c_mem[0][:, 0].copy()
        u = polar_transform(codewords)
        info_phases = list(self.spec.info_phases)
        info = u[:, info_phases]
        if config.crc is not None:
            r = crc_degree(config.crc)
            k = self.spec.k
            kmat = np.hstack([crc_matrix(config.crc, k - r),
                              np.eye(r, dtype=np.uint8)])
            accepted &= ~(((info @ kmat.T) & 1).any(axis=1))

        results: list[DecodeResult | None] = [None] * frames
        for i in np.nonzero(accepted)[0]:
            results[i] = DecodeResult(
                status="ok", codeword=codewords[i], u=u[i], info=info[i],
                iterations=self.clean_iterations + int(extra_iters[i]),
                ops_add=int(ops_add[i]), ops_cmp=int(ops_cmp[i]),
                visits=self.clean_visits, peak_pool=self.clean_peak_pool)
        return accepted, results

    # ------------------------------------------------------------------

    def _decode_leaf(self, leaf, s_adj, ops_add, ops_cmp, res_add, res_cmp):
        """Top-1 word, its weight, the true sibling weight, and op charges.

        `res_add`/`res_cmp` receive, for frames where the shortcut fired,
        the cost of the deferred resolve (charged later only if the sibling
        is ever popped).
        """
        frames, nl = s_adj.shape
        want_e2 = self.b_flag[leaf.psi] and leaf.psi != self.tree.num_leaves - 1
        kind = leaf.kind
        if kind in _VECTOR_KINDS:
            fn = getattr(self, "_leaf_" + kind.value)
            return fn(leaf, s_adj, ops_add, ops_cmp, want_e2, res_add, res_cmp)
        # Rare kinds: run the genuine outer decoder per frame.  Fired frames
        # resolve into a side tally so the cost can be charged if needed.
        word = np.empty((frames, nl), dtype=np.uint8)
        e1 = np.empty(frames)
        e2 = np.full(frames, -np.inf)
        fired = np.zeros(frames, dtype=bool)
        limit = min(1 << leaf.k_leaf, self.config.L)
        for i in range(frames):
            ops = OpCount()
            hit = hard_decision_shortcut(leaf, s_adj[i], None, limit, ops)
            if hit is not None:
                em, z = hit
                fired[i] = True
                if want_e2 and em.more:
                    side = OpCount()
                    z.ops = side
                    state = z.resolve()
                    e2[i] = get_next_codeword(state).e
                    res_add[i] = side.add
                    res_cmp[i] = side.cmp
            else:
                z = preprocess(leaf, s_adj[i], None, limit, ops)
                em = get_next_codeword(z)
                if want_e2 and em.more:
                    e2[i] = get_next_codeword(z).e
            word[i] = em.codeword
            e1[i] = em.e
            ops_add[i] += ops.add
            ops_cmp[i] += ops.cmp
        return word, e1, e2, fired

    def _leaf_rate0(self, leaf, s_adj, ops_add, ops_cmp, want_e2,
                    res_add, res_cmp):
        frames, nl = s_adj.shape
        neg = np.minimum(s_adj, 0.0)
        e1 = neg.sum(axis=1)
        fired = e1 == 0.0
        # miss: exhaustive preprocess of the one-word code
        ops_add += np.where(fired, 0, max(0, nl - 1))
        word = np.zeros((frames, nl), dtype=np.uint8)
        return word, e1, np.full(frames, -np.inf), fired

    def _leaf_rep(self, leaf, s_adj, ops_add, ops_cmp, want_e2,
                  res_add, res_cmp):
        frames, nl = s_adj.shape
        s_neg = -np.minimum(s_adj, 0.0).sum(axis=1)
        s_pos = np.maximum(s_adj, 0.0).sum(axis=1)
        pick_one = s_pos < s_neg
        e1 = -np.where(pick_one, s_pos, s_neg)
        e2 = -np.where(pick_one, s_neg, s_pos)
        fired = (s_neg == 0.0) | (s_pos == 0.0)
        enum_add = 2 * max(0, nl - 1)
        srt = _sort_cost(2)
        more = min(2, self.config.L) >= 2
        bound = max(0, nl - 1) if more else 0
        # missed frames preprocess at the forward pass; fired ones only ever
        # pay the bound scan; their deferred resolve costs go to res_*
        ops_add += np.where(fired, 0, enum_add)
        ops_cmp += np.where(fired, bound, srt)
        if want_e2:
            res_add[fired] = enum_add
            res_cmp[fired] = srt
        word = np.broadcast_to(pick_one[:, None], (frames, nl)).astype(np.uint8)
        return word, e1, e2, fired

    def _leaf_rate1(self, leaf, s_adj, ops_add, ops_cmp, want_e2,
                    res_add, res_cmp):
        frames, nl = s_adj.shape
        word = (s_adj < 0).astype(np.uint8)
        absd = np.abs(s_adj)
        s0 = absd.min(axis=1)
        e1 = np.zeros(frames)
        e2 = -s0
        fired = np.ones(frames, dtype=bool)
        limit = min(1 << leaf.k_leaf, self.config.L)
        if limit > 1:
            ops_cmp += max(0, nl - 1)               # shortcut bound scan
        if want_e2:
            pats = 2 if nl == 1 else (4 if nl == 2 else 5)
            res_cmp[:] = _select_cost(nl, min(3, nl)) + _sort_cost(pats)
            res_add[:] = 1 if nl >= 2 else 0
        return word, e1, e2, fired

    def _leaf_spc(self, leaf, s_adj, ops_add, ops_cmp, want_e2,
                  res_add, res_cmp):
        frames, nl = s_adj.shape
        hard = (s_adj < 0).astype(np.uint8)
        parity = hard.sum(axis=1) & 1
        absd = np.abs(s_adj)
        if nl >= 2:
            two = np.partition(absd, 1, axis=1)[:, :2]
            s0 = two[:, 0]
            s1 = two[:, 1]
        else:
            s0 = absd[:, 0]
            s1 = np.full(frames, np.inf)
        odd = parity == 1
        e1 = np.where(odd, -s0, 0.0)
        e2 = np.where(odd, -s1, -(s0 + s1))
        word = hard.copy()
        if odd.any():
            flip = np.argmin(absd, axis=1)
            rows = np.nonzero(odd)[0]
            word[rows, flip[rows]] ^= 1
        fired = ~odd
        limit = min(1 << leaf.k_leaf, self.config.L)
        more = limit > 1
        select = _select_cost(nl, min(13, nl))
        bound = max(0, nl - 1) if more else 0
        # fired frames only scan for the bound; the others preprocess at the
        # forward pass (their cheap second pattern costs no additions)
        ops_cmp += np.where(fired, bound, select)
        if want_e2:
            res_cmp[fired] = select
            res_add[fired] = 1      # the even-parity second pattern {0,1}
        return word, e1, e2, fired

    def _fht_common(self, leaf, s_adj, ops_add, ops_cmp, want_e2, fold,
                    res_add, res_cmp):
        frames, nl = s_adj.shape
        mu_eff = leaf.mu - fold
        base = s_adj if not fold else \
            s_adj.reshape(frames, -1, 1 << fold).sum(axis=2)
        sumabs = np.abs(s_adj).sum(axis=1)
        tab = wht(base)
        abst = np.abs(tab)
        amax = np.argmax(abst, axis=1)
        rows = np.arange(frames)
        t1 = abst[rows, amax]
        t2 = np.partition(abst, abst.shape[1] - 2, axis=1)[:, -2] \
            if abst.shape[1] >= 2 else -t1
        e1 = 0.5 * (t1 - sumabs)
        e2 = 0.5 * (t2 - sumabs)
        b = (tab[rows, amax] < 0).astype(np.uint8)
        j = np.arange(nl) >> fold
        par = _parity_of(amax[:, None] & j[None, :])
        word = (par ^ b[:, None]).astype(np.uint8)
        # hard-decision membership via the frozen syndrome
        hard_words = (s_adj < 0).astype(np.uint8)
        u_loc = polar_transform(hard_words)
        fired = ~(u_loc[:, list(leaf.frozen_local)].any(axis=1))
        word[fired] = hard_words[fired]
        e1[fired] = 0.0
        limit = min(1 << leaf.k_leaf, self.config.L)
        more = limit > 1
        fht = (nl - (1 << mu_eff)) if fold else 0     # fold adds
        fht += max(0, nl - 1)                         # sum of magnitudes
        fht += (1 << mu_eff) * mu_eff if mu_eff else 0
        scan = (1 << mu_eff) - 1
        bound = max(0, nl - 1) if more else 0
        if want_e2:
            # missed frames transform at the forward pass and pay a second
            # max scan at the backward pass; fired ones defer everything
            ops_add += np.where(fired, 0, fht + 2)
            ops_cmp += np.where(fired, bound, 2 * scan)
            res_add[fired] = fht + 2
            res_cmp[fired] = 2 * scan
        else:
            ops_add += np.where(fired, 0, fht + 1)
            ops_cmp += np.where(fired, bound, scan)
        return word, e1, e2, fired

    def _leaf_rm1(self, leaf, s_adj, ops_add, ops_cmp, want_e2,
                  res_add, res_cmp):
        return self._fht_common(leaf, s_adj, ops_add, ops_cmp, want_e2, 0,
                                res_add, res_cmp)

    def _leaf_rm1rep(self, leaf, s_adj, ops_add, ops_cmp, want_e2,
                     res_add, res_cmp):
        return self._fht_common(leaf, s_adj, ops_add, ops_cmp, want_e2,
                                leaf.extras["t"], res_add, res_cmp)


def _parity_of(x: np.ndarray) -> np.ndarray:
    out = np.zeros(x.shape, dtype=np.uint8)
    v = x.copy()
    while v.any():
        out ^= (v & 1).astype(np.uint8)
        v >>= 1
    return out
