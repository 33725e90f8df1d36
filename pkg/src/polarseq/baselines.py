"""Reference decoders: plain SC, list (SCL) and exhaustive ML.

sc_decode is the classic min-sum successive cancellation sweep with dynamic
frozen symbol support; it doubles as the independent oracle for the shared
storage engine (reference_llrs recomputes any intermediate LLR vector from
scratch).  scl_decode keeps up to L paths in path-major numpy arrays with
plain row copies on forks; its path metric is the same penalty sum the
block decoder uses, so metrics are directly comparable.  ml_decode walks
all 2^k codewords in Gray-code order with incremental weight updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codespec import CodeSpec, crc_bits, crc_degree
from .bsda import DecodeResult
from .kernel import polar_transform
from .outer import OpCount


def _q(a, b, out=None):
    res = np.minimum(np.abs(a), np.abs(b), out=out)
    res *= np.where((a < 0) != (b < 0), -1.0, 1.0)
    return res


def _p(c, a, b, out=None):
    res = np.multiply(a, 1.0 - 2.0 * c, out=out)
    res += b
    return res


def reference_llrs(llrs: np.ndarray, u_prefix: np.ndarray, layer: int,
                   phase: int) -> np.ndarray:
    """Recompute S_layer^(phase) from scratch for a given input prefix.

    u_prefix must cover at least phase * 2^(m - layer) input symbols.
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    if layer == 0:
        return llrs
    parent = reference_llrs(llrs, u_prefix, layer - 1, phase // 2)
    h = parent.size // 2
    a, b = parent[:h], parent[h:]
    if phase % 2 == 0:
        return _q(a, b)
    seg = np.asarray(u_prefix, dtype=np.uint8)[(phase - 1) * h: phase * h]
    return _p(polar_transform(seg).astype(np.float64), a, b)


def sc_decode(spec: CodeSpec, llrs, count_ops: bool = True) -> DecodeResult:
    """Min-sum successive cancellation with dynamic frozen symbols."""
    llrs = np.asarray(llrs, dtype=np.float64)
    n = spec.n
    ops = OpCount()
    u = np.zeros(n, dtype=np.uint8)
    frozen = np.zeros(n, dtype=bool)
    frozen[list(spec.frozen)] = True
    phase = 0
    penalty = 0.0

    def rec(s: np.ndarray) -> np.ndarray:
        nonlocal phase, penalty
        if s.size == 1:
            i = phase
            if frozen[i]:
                sup = spec.constraints[i]
                bit = int(u[list(sup)].sum()) & 1 if sup else 0
            else:
                bit = 1 if s[0] < 0 else 0
            u[i] = bit
            if (s[0] < 0) != bit:
                penalty -= abs(float(s[0]))
            phase += 1
            return np.array([bit], dtype=np.uint8)
        h = s.size // 2
        a, b = s[:h], s[h:]
        cl = rec(_q(a, b))
        if count_ops:
            ops.cmp += h
        cr = rec(_p(cl, a, b))
        if count_ops:
            ops.add += h
        return np.concatenate([cl ^ cr, cr])

    codeword = rec(llrs)
    return DecodeResult(
        status="ok", codeword=codeword, u=u.copy(),
        info=spec.extract_info(u), iterations=n,
        ops_add=ops.add, ops_cmp=ops.cmp,
        visits=np.ones(n, dtype=np.int64), peak_pool=0,
        pushed_scores=[penalty])


@dataclass
class SclConfig:
    L: int = 8
    crc: int | None = None


class _SclDfs:
    """Symbol-wise dynamic-frozen bookkeeping for the list decoder."""

    def __init__(self, spec: CodeSpec):
        nontrivial = spec.nontrivial_constraints()
        self.f = len(nontrivial)
        self.target_row = {}                 # phase -> constraint index
        self.watch = [None] * spec.n         # phase -> bool mask over constraints
        for s, (target, support) in enumerate(nontrivial):
            self.target_row[target] = s
            for j in support:
                if self.watch[j] is None:
                    self.watch[j] = np.zeros(self.f, dtype=bool)
                self.watch[j][s] = True


_SCL_DFS: dict[int, _SclDfs] = {}


def scl_decode(spec: CodeSpec, config: SclConfig, llrs) -> DecodeResult:
    """Tal-Vardy style list decoding with the penalty-sum path metric."""
    llrs = np.asarray(llrs, dtype=np.float64)
    n, m = spec.n, spec.m
    L = config.L
    dfs = _SCL_DFS.get(id(spec))
    if dfs is None:
        dfs = _SclDfs(spec)
        _SCL_DFS[id(spec)] = dfs
    ops = OpCount()

    # Flat per-path memories: S levels 0..m concatenated, C levels with two
    # parity slots each; one fancy-index row copy forks every level at once.
    s_off = np.zeros(m + 2, dtype=np.int64)
    for lam in range(m + 1):
        s_off[lam + 1] = s_off[lam] + (1 << (m - lam))
    c_off = 2 * s_off
    s_mem = np.zeros((1, int(s_off[-1])), dtype=np.float64)
    c_mem = np.zeros((1, int(c_off[-1])), dtype=np.uint8)
    s_mem[0, : n] = llrs
    metrics = np.zeros(1)
    wmat = np.zeros((1, dfs.f), dtype=bool)
    udec = np.zeros((1, n), dtype=np.uint8)

    def sview(lam):
        return s_mem[:, s_off[lam]:s_off[lam + 1]]

    def cview(lam, par):
        w = 1 << (m - lam)
        base = c_off[lam] + par * w
        return c_mem[:, base:base + w]

    frozen = np.zeros(n, dtype=bool)
    frozen[list(spec.frozen)] = True

    for phase in range(n):
        # LLR stages down to layer m
        d = min((phase & -phase).bit_length() - 1, m - 1) if phase else m - 1
        lam = m - d
        n_live = s_mem.shape[0]
        if (phase >> d) & 1:
            a = sview(lam - 1)
            h = 1 << (m - lam)
            _p(cview(lam, 0), a[:, :h], a[:, h:2 * h], out=sview(lam))
            ops.add += h * n_live
            lam += 1
        while lam <= m:
            a = sview(lam - 1)
            h = 1 << (m - lam)
            _q(a[:, :h], a[:, h:2 * h], out=sview(lam))
            ops.cmp += h * n_live
            lam += 1
        s_leaf = sview(m)[:, 0]
        n_paths = s_mem.shape[0]
        if frozen[phase]:
            s = dfs.target_row.get(phase)
            bits = wmat[:, s].astype(np.uint8) if s is not None \
                else np.zeros(n_paths, dtype=np.uint8)
            metrics = metrics + np.where((s_leaf < 0) != bits, -np.abs(s_leaf), 0.0)
            chosen_src = np.arange(n_paths)
            chosen_bit = bits
            forked = False
        else:
            hard = (s_leaf < 0).astype(np.uint8)
            cand_metric = np.concatenate([metrics, metrics - np.abs(s_leaf)])
            cand_src = np.concatenate([np.arange(n_paths)] * 2)
            cand_bit = np.concatenate([hard, hard ^ 1])
            if cand_metric.size > L:
                order = np.argsort(-cand_metric, kind="stable")[:L]
                ops.cmp += cand_metric.size * max(1, int(np.log2(cand_metric.size)))
            else:
                order = np.arange(cand_metric.size)
            chosen_src = cand_src[order]
            chosen_bit = cand_bit[order]
            metrics = cand_metric[order]
            forked = True
        if forked:
            s_mem = s_mem[chosen_src]
            c_mem = c_mem[chosen_src]
            wmat = wmat[chosen_src]
            udec = udec[chosen_src]
        udec[:, phase] = chosen_bit
        mask = dfs.watch[phase]
        if mask is not None:
            wmat[chosen_bit == 1] ^= mask
        # partial sum propagation
        cview(m, phase & 1)[:, 0] = chosen_bit
        lam, ph = m, phase
        while ph & 1 and lam > 0:
            w = 1 << (m - lam)
            parent = cview(lam - 1, (ph >> 1) & 1)
            parent[:, :w] = cview(lam, 0) ^ cview(lam, 1)
            parent[:, w:2 * w] = cview(lam, 1)
            ph >>= 1
            lam -= 1

    order = np.argsort(-metrics, kind="stable")
    best = int(order[0])
    status = "ok"
    if config.crc is not None:
        r = crc_degree(config.crc)
        best = -1
        for idx in order:
            info = spec.extract_info(udec[idx])
            if np.array_equal(crc_bits(info[:-r], config.crc), info[-r:]):
                best = int(idx)
                break
        if best < 0:
            best = int(order[0])
            status = "crc-failed"
    u = udec[best]
    return DecodeResult(
        status=status, codeword=polar_transform(u), u=u.copy(),
        info=spec.extract_info(u), iterations=n,
        ops_add=ops.add, ops_cmp=ops.cmp,
        visits=np.full(n, s_mem.shape[0], dtype=np.int64), peak_pool=0,
        pushed_scores=[float(metrics[order[0]])])


def ml_decode(spec: CodeSpec, llrs) -> tuple[np.ndarray, float]:
    """Exhaustive maximum likelihood: argmax ellipsoidal weight.

    Gray-code enumeration with incremental weight updates; ties resolve to
    the smallest information vector read as an integer.
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    k = spec.k
    if k > 24:
        raise ValueError("ml_decode refuses k > 24")
    info_phases = list(spec.info_phases)
    # Toggling info bit b flips the codeword by the transform of the unit
    # u-vector with that bit set plus every frozen target depending on it.
    flip_rows = []
    for b, phase in enumerate(info_phases):
        e = np.zeros(spec.n, dtype=np.uint8)
        e[phase] = 1
        for t, sup in spec.constraints.items():
            if phase in sup:
                e[t] ^= 1
        flip_rows.append(polar_transform(e))
    abss = np.abs(llrs)
    hard = llrs < 0
    word = spec.encode(np.zeros(k, dtype=np.uint8))
    weight = float(-abss[(word != 0) != hard].sum())
    best_word = word.copy()
    best_weight = weight
    best_info = 0
    gray = 0
    for step in range(1, 1 << k):
        b = (step & -step).bit_length() - 1
        gray ^= 1 << b
        row = flip_rows[b]
        idx = np.nonzero(row)[0]
        was_mismatch = (word[idx] != 0) != hard[idx]
        weight += float(abss[idx][was_mismatch].sum())
        weight -= float(abss[idx][~was_mismatch].sum())
        word[idx] ^= 1
        if weight > best_weight + 1e-15 or \
                (abs(weight - best_weight) <= 1e-15 and gray < best_info):
            best_weight = weight
            best_info = gray
            best_word = word.copy()
    return best_word, best_weight
