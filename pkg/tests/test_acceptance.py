"""Acceptance suite: one test per release criterion, printed pass/fail.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
lines as they complete.  The Monte-Carlo criteria take several minutes on
a small machine; everything is seeded and deterministic.
"""

import math
import os
import time

import numpy as np
import pytest

from polarseq.baselines import reference_llrs
from polarseq.batch import BatchDecoder
from polarseq.bsda import (
    DecoderConfig,
    decode,
    penalty_profile,
    psi_for_tree,
)
from polarseq.codespec import (
    CRC8_POLY,
    attach_crc,
    ebch_check_matrix,
    from_check_matrix,
    make_polar_spec,
)
from polarseq.decomposition import Leaf, OuterKind, build_tree, leaf_generator_rows
from polarseq.kernel import ellipsoidal_weight, polar_transform, q_op, p_op
from polarseq.outer import get_next_codeword, hard_decision_shortcut, preprocess
from polarseq.pathstore import ArrayBank
from polarseq.sim import Campaign, run_campaign, write_csv

WORKERS = 2 if (os.cpu_count() or 1) >= 2 else 1


def report(number: int, ok: bool, detail: str) -> None:
    print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {number}: {detail}"


# -- shared fixtures ---------------------------------------------------------


@pytest.fixture(scope="module")
def crc128():
    spec = attach_crc(make_polar_spec(7, 72, 2.0), CRC8_POLY, 2.0)
    assert (spec.n, spec.k) == (128, 64)
    return spec


@pytest.fixture(scope="module")
def ebch128():
    h = ebch_check_matrix(7, 22)
    return h, from_check_matrix(h)


# -- 1: Theorem 1 ------------------------------------------------------------


def _batch_q(a, b):
    return np.where((a < 0) != (b < 0), -1.0, 1.0) * np.minimum(np.abs(a), np.abs(b))


def _batch_penalties(s, u):
    """Per-phase penalties of u under a plain SC sweep, batched over rows."""
    if s.shape[1] == 1:
        agree = (s[:, 0] < 0) == (u[:, 0] != 0)
        return np.where(agree, 0.0, -np.abs(s[:, 0]))[:, None]
    h = s.shape[1] // 2
    a, b = s[:, :h], s[:, h:]
    left = _batch_penalties(_batch_q(a, b), u[:, :h])
    c_left = polar_transform(u[:, :h]).astype(np.float64)
    right = _batch_penalties(a * (1.0 - 2.0 * c_left) + b, u[:, h:])
    return np.concatenate([left, right], axis=1)


def test_criterion_1_theorem1_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    total = 0
    worst = 0.0
    for m in range(1, 7):
        count = 10_000 // 6 + 1
        n = 1 << m
        u = rng.integers(0, 2, (count, n), dtype=np.uint8)
        s = rng.normal(scale=3.0, size=(count, n))
        words = polar_transform(u)
        mism = (s < 0) != (words != 0)
        lhs = -(np.abs(s) * mism).sum(axis=1)
        rhs = _batch_penalties(s, u).sum(axis=1)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
        total += count
    elapsed = time.perf_counter() - start
    report(1, worst < 1e-9 and total >= 10_000 and elapsed < 10.0,
           f"{total} cases, max deviation {worst:.2e}, {elapsed:.1f}s")


# -- 2: Lemma 1 --------------------------------------------------------------


def test_criterion_2_lemma1_identity():
    start = time.perf_counter()
    rng = np.random.default_rng(102)
    worst = 0.0
    total = 0
    for n in (1, 2, 4, 8, 16):
        count = 2000
        c = rng.integers(0, 2, (count, 2 * n), dtype=np.uint8)
        s = rng.normal(scale=3.0, size=(count, 2 * n))
        cl, cr = c[:, :n], c[:, n:]
        st = _batch_q(s[:, :n], s[:, n:])
        sb = s[:, :n] * (1.0 - 2.0 * (cl ^ cr)) + s[:, n:]
        lhs = -(np.abs(s) * ((s < 0) != (c != 0))).sum(axis=1)
        rhs = -(np.abs(st) * ((st < 0) != ((cl ^ cr) != 0))).sum(axis=1) \
            - (np.abs(sb) * ((sb < 0) != (cr != 0))).sum(axis=1)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
        total += count
    elapsed = time.perf_counter() - start
    report(2, worst < 1e-9 and total >= 10_000 and elapsed < 5.0,
           f"{total} cases, max deviation {worst:.2e}, {elapsed:.1f}s")


# -- 3: the worked-example golden trace --------------------------------------


def test_criterion_3_example_trace(paper_spec16, example2_llrs):
    tree = build_tree(paper_spec16)
    psi = np.array([-0.47, -0.52, -0.56])
    cfg = DecoderConfig(L=2, D=4, psi=psi,
                        example_score_bookkeeping=True, defer_siblings=False)
    res = decode(paper_spec16, tree, cfg, example2_llrs, record_trace=True)
    ok = res.status == "ok" and not res.codeword.any() and res.iterations == 5
    got = sorted(res.pushed_scores)
    want = sorted([0.47, -0.09, -2.42, 0.43, 0.27])
    ok &= len(got) == 5 and all(abs(a - b) <= 0.01 for a, b in zip(got, want))
    printed = [
        [-0.44, 7.46, 2.02, -0.12],
        [6.08, 16.89, 9.2, -2.94],
        [5.19, 16.89, 9.2, 2.7],
        [-0.2, 16.84, 18.05, 15.82, 19.06, 19.2, 8.08, 13.08],
    ]
    ok &= len(res.leaf_llrs) == 4
    ok &= all(np.allclose(a, b, atol=0.01)
              for a, b in zip(res.leaf_llrs, printed))
    # the default configuration reproduces everything except the two pushes
    # whose printed values conflict with the score definition (see notes)
    res2 = decode(paper_spec16, tree, DecoderConfig(L=2, D=4, psi=psi),
                  example2_llrs, record_trace=True)
    ok &= res2.status == "ok" and not res2.codeword.any() \
        and res2.iterations == 5
    report(3, ok, f"all-zero in {res.iterations} iterations, "
                  f"pushed scores {sorted(round(s, 2) for s in res.pushed_scores)}")


# -- 4: bias reproduction ----------------------------------------------------


def test_criterion_4_bias_values(paper_spec16):
    start = time.perf_counter()
    tree = build_tree(paper_spec16)
    psi = psi_for_tree(penalty_profile(paper_spec16, 5.0, 1_000_000, seed=104),
                       tree)
    elapsed = time.perf_counter() - start
    want = np.array([-0.47, -0.52, -0.56])
    ok = bool(np.all(np.abs(psi - want) <= 0.05)) and elapsed < 60.0
    report(4, ok, f"psi(3,7,15) = {np.round(psi, 4).tolist()} "
                  f"(target {want.tolist()} +/-0.05), {elapsed:.1f}s")


# -- 5: outer decoders against the exhaustive oracle -------------------------


def _leaf(kind, mu, frozen, **extras):
    n = 1 << mu
    return Leaf(psi=0, phi_start=0, phi_end=n - 1, mu=mu, layer=0,
                r=(n - 1) >> mu, kind=kind, extras=extras,
                frozen_local=tuple(sorted(frozen)), k_leaf=n - len(frozen),
                d_min={OuterKind.RATE1: 1}.get(kind, 2))


ORACLE_LEAVES = {
    "spc": _leaf(OuterKind.SPC, 4, [0]),
    "dpc": _leaf(OuterKind.DPC, 3, [0, 1]),
    "rate1": _leaf(OuterKind.RATE1, 3, []),
    "rm1": _leaf(OuterKind.RM1, 4, [i for i in range(16)
                                    if i not in (15, 14, 13, 11, 7)]),
    "rm1rep": _leaf(OuterKind.RM1_REP, 4,
                    [i for i in range(16) if i not in (15, 11, 7)], t=2),
    "rm1cosets": _leaf(OuterKind.RM1_COSETS, 4,
                       [i for i in range(16) if i not in (15, 14, 13, 11, 7, 3, 5)],
                       reps=(3, 5)),
    "lowrate": _leaf(OuterKind.LOW_RATE, 4, [i for i in range(16)
                                             if i not in (7, 11)]),
}


def test_criterion_5_outer_ml_oracles():
    start = time.perf_counter()
    rng = np.random.default_rng(105)
    draws = 10_000
    failures = []
    for name, leaf in ORACLE_LEAVES.items():
        rows = leaf_generator_rows(leaf)
        words = np.zeros((1 << rows.shape[0], leaf.length), dtype=np.uint8)
        for mask in range(1, words.shape[0]):
            for b in range(rows.shape[0]):
                if mask >> b & 1:
                    words[mask] ^= rows[b]
        member = {w.tobytes() for w in words}
        signs = 1.0 - 2.0 * words.astype(np.float64)
        s = rng.normal(scale=1.8, size=(draws, leaf.length))
        sumabs = np.abs(s).sum(axis=1)
        best = 0.5 * ((s @ signs.T).max(axis=1) - sumabs)
        limit = min(1 << leaf.k_leaf, 8)
        bad = 0
        for d in range(draws):
            state = preprocess(leaf, s[d], None, limit)
            em = get_next_codeword(state)
            if abs(em.e - best[d]) > 1e-9:
                bad += 1
                continue
            while True:
                if em.codeword.tobytes() not in member or \
                        abs(em.e - ellipsoidal_weight(em.codeword, s[d])) > 1e-9:
                    bad += 1
                    break
                if not em.more:
                    break
                em = get_next_codeword(state)
        if bad:
            failures.append(f"{name}:{bad}")
    elapsed = time.perf_counter() - start
    report(5, not failures and elapsed < 30.0,
           f"{draws} draws x {len(ORACLE_LEAVES)} kinds, "
           f"failures: {failures or 'none'}, {elapsed:.1f}s")


# -- 6: list-decoder parity on the CRC-aided code ----------------------------


def test_criterion_6_bsda_matches_scl(crc128):
    start = time.perf_counter()
    snrs = (2.0, 2.5, 3.0)
    points = {}
    for decoder in ("bsda", "scl"):
        camp = Campaign.for_spec(
            crc128, decoder=decoder, snrs=snrs, L=8, D=64,
            max_frames=400_000, target_errors=200, seed=106, workers=WORKERS)
        points[decoder] = run_campaign(camp)
    gaps = []
    ok = True
    for pb, ps in zip(points["bsda"], points["scl"]):
        ok &= pb.frame_errors >= 200 and ps.frame_errors >= 200
        gap = abs(math.log10(pb.fer) - math.log10(ps.fer))
        gaps.append(round(gap, 3))
        ok &= gap <= 0.15
    elapsed = time.perf_counter() - start
    fers = [(p.snr_db, f"{p.fer:.2e}") for p in points["bsda"]]
    report(6, ok, f"log10-FER gaps {gaps} (limit 0.15) at {fers}, {elapsed:.0f}s")


# -- 7: complexity convergence -----------------------------------------------


def test_criterion_7_complexity():
    start = time.perf_counter()
    spec = make_polar_spec(10, 512, 2.0)
    snr = 2.5                         # FER close to 1e-3 for this code
    camp = Campaign.for_spec(spec, decoder="bsda", snrs=(snr,), L=32, D=240,
                             max_frames=60_000, target_errors=30,
                             seed=107, workers=WORKERS)
    pb = run_campaign(camp)[0]
    camp_sda = Campaign.for_spec(spec, decoder="sda", snrs=(snr,), L=32, D=240,
                                 max_frames=1024, target_errors=0,
                                 seed=107, workers=WORKERS)
    ps = run_campaign(camp_sda)[0]
    bsda_ops = pb.avg_add + pb.avg_cmp
    sda_ops = ps.avg_add + ps.avg_cmp
    n, m, L = 1024, 10, 32
    ok = 2e-4 <= pb.fer <= 5e-3 and pb.frame_errors >= 20
    ok &= bsda_ops <= 1.5 * n * m          # 15360
    ok &= sda_ops / bsda_ops >= 1.2
    # hard per-frame bound, checked frame by frame on the reference decoder
    tree = build_tree(spec)
    psi = psi_for_tree(penalty_profile(spec, snr, 100_000, seed=17), tree)
    cfg = DecoderConfig(L=L, D=240, psi=psi)
    bank = ArrayBank(10, 240, cfg.pool_entries(1024))
    rng = np.random.default_rng(1070)
    hard_ok = True
    for _ in range(150):
        info = rng.integers(0, 2, 512, dtype=np.uint8)
        sigma_sq = 1.0 / (10 ** (snr / 10))
        llrs = (2 / sigma_sq) * ((1 - 2.0 * spec.encode(info))
                                 + rng.normal(0, math.sqrt(sigma_sq), 1024))
        res = decode(spec, tree, cfg, llrs, bank=bank)
        hard_ok &= res.ops_add + res.ops_cmp <= 2 * L * m * n
        hard_ok &= res.ops_cmp <= L * m * n
    ok &= hard_ok
    elapsed = time.perf_counter() - start
    report(7, ok, f"fer {pb.fer:.2e}, bsda {bsda_ops:.0f} ops <= 15360, "
                  f"sda/bsda ratio {sda_ops / bsda_ops:.2f} >= 1.2, {elapsed:.0f}s")


# -- 8: the eBCH pipeline ----------------------------------------------------


def test_criterion_8_ebch_pipeline(ebch128):
    start = time.perf_counter()
    h, spec = ebch128
    ok = h.shape == (64, 128) and len(spec.frozen) == 64
    rng = np.random.default_rng(108)
    for _ in range(1000):
        cw = spec.encode(rng.integers(0, 2, 64, dtype=np.uint8))
        if ((h @ cw) % 2).any():
            ok = False
            break
    weights = []
    for _ in range(10_000):
        info = rng.integers(0, 2, 64, dtype=np.uint8)
        if not info.any():
            info[0] = 1
        weights.append(int(spec.encode(info).sum()))
    min_weight = min(weights)
    ok &= min_weight >= 22
    camp = Campaign.for_spec(spec, decoder="bsda", snrs=(3.5, 4.0, 4.5),
                             L=256, D=1024, max_frames=400_000,
                             target_errors=100, seed=108, workers=WORKERS)
    points = run_campaign(camp)
    fers = [p.fer for p in points]
    ok &= all(p.frame_errors >= 100 for p in points)
    ok &= fers[0] > fers[1] > fers[2]
    elapsed = time.perf_counter() - start
    report(8, ok, f"64 constraints, sampled min weight {min_weight} >= 22, "
                  f"FER {[f'{f:.2e}' for f in fers]} strictly decreasing, "
                  f"{elapsed:.0f}s")


# -- 9: storage integrity ----------------------------------------------------


class _AuditBank(ArrayBank):
    """Checks the refcount invariant after every structural operation."""

    def _audit(self):
        assert self.refcount_total() == self.mapped_count()
        assert self.bytes_copied == 0
        assert self.phi <= self.capacity

    def _get_w(self, l, layer):
        p = super()._get_w(l, layer)
        self._audit()
        return p

    def clone_path(self, l):
        l2 = super().clone_path(l)
        self._audit()
        return l2

    def kill_path(self, l):
        super().kill_path(l)
        self._audit()


def test_criterion_9_pathstore_integrity(crc128, ebch128):
    start = time.perf_counter()
    _, ebch = ebch128
    rng = np.random.default_rng(109)
    checked = 0
    frames = 0
    ok = True
    for spec, snr in ((crc128, 2.0), (ebch, 3.75)):
        tree = build_tree(spec)
        psi = psi_for_tree(penalty_profile(spec, snr, 50_000, seed=19), tree)
        cfg = DecoderConfig(L=16, D=64, psi=psi)
        bank = ArrayBank(spec.m, 64, cfg.pool_entries(spec.n))
        audit = _AuditBank(spec.m, 64, cfg.pool_entries(spec.n))
        rate = spec.k / spec.n
        for i in range(500):
            info = rng.integers(0, 2, spec.k, dtype=np.uint8)
            sigma_sq = 1.0 / (2 * rate * 10 ** (snr / 10))
            llrs = (2 / sigma_sq) * ((1 - 2.0 * spec.encode(info))
                                     + rng.normal(0, math.sqrt(sigma_sq), spec.n))
            use = audit if i < 25 else bank
            res = decode(spec, tree, cfg, llrs, bank=use, record_trace=True)
            frames += 1
            ok &= use.bytes_copied == 0
            ok &= use.refcount_total() == use.mapped_count()
            ok &= res.status in ("ok", "queue-empty") or \
                res.status == "pool-exhausted"
            ok &= use.peak_phi <= use.capacity
            for rec in res.trace[:: max(1, len(res.trace) // 8)]:
                ref = reference_llrs(llrs, rec["u_prefix"], rec["layer"],
                                     rec["r"])
                ok &= bool(np.allclose(rec["s"], ref, atol=1e-9))
                checked += 1
    elapsed = time.perf_counter() - start
    report(9, ok and frames >= 1000,
           f"{frames} frames, zero copy bytes, refcounts conserved, "
           f"{checked} LLR vectors vs recursive oracle, {elapsed:.0f}s")


# -- 10: determinism across workers ------------------------------------------


def test_criterion_10_worker_determinism(crc128, tmp_path):
    start = time.perf_counter()
    outs = {}
    for workers in (1, 4):
        camp = Campaign.for_spec(
            crc128, decoder="bsda", snrs=(2.0, 2.75), L=8, D=64,
            max_frames=3072, target_errors=50, seed=110, workers=workers)
        path = tmp_path / f"det_{workers}.csv"
        write_csv(run_campaign(camp), str(path))
        outs[workers] = path.read_text().splitlines()
    ok = len(outs[1]) == len(outs[4])
    # identical except the wall-clock column (measured time is not replayable)
    for a, b in zip(outs[1], outs[4]):
        ok &= a.rsplit(",", 1)[0] == b.rsplit(",", 1)[0]
    elapsed = time.perf_counter() - start
    report(10, ok, f"{len(outs[1]) - 1} CSV rows bit-identical "
                   f"(seconds column excluded), {elapsed:.0f}s")
