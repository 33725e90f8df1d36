import math

import numpy as np
import pytest

from polarseq.batch import BatchDecoder
from polarseq.bsda import DecoderConfig, decode, penalty_profile, psi_for_tree
from polarseq.codespec import (
    CRC8_POLY,
    attach_crc,
    ebch_check_matrix,
    from_check_matrix,
    make_polar_spec,
)
from polarseq.decomposition import build_tree
from polarseq.pathstore import ArrayBank


def _frames(spec, snr_db, n_frames, seed):
    rng = np.random.default_rng(seed)
    sigma_sq = 1.0 / (2 * (spec.k / spec.n) * 10 ** (snr_db / 10))
    infos = rng.integers(0, 2, (n_frames, spec.k)).astype(np.uint8)
    words = np.array([spec.encode(i) for i in infos])
    noise = rng.normal(0, math.sqrt(sigma_sq), (n_frames, spec.n))
    return (2 / sigma_sq) * ((1.0 - 2.0 * words) + noise)


def _assert_equivalent(spec, tree, cfg, llrs):
    bd = BatchDecoder(spec, tree, cfg)
    accepted, results = bd.decode_batch(llrs)
    bank = ArrayBank(spec.m, cfg.queue_capacity(), cfg.pool_entries(spec.n))
    clean_rejects = 0
    for i in range(llrs.shape[0]):
        ref = decode(spec, tree, cfg, llrs[i], bank=bank)
        if accepted[i]:
            fast = results[i]
            assert ref.status == "ok"
            assert np.array_equal(ref.codeword, fast.codeword)
            assert ref.iterations == fast.iterations
            assert ref.ops_add == fast.ops_add
            assert ref.ops_cmp == fast.ops_cmp
            assert ref.peak_pool == fast.peak_pool
        else:
            # a rejected frame must genuinely deviate from the greedy sweep
            clean = (ref.status == "ok"
                     and ref.iterations == tree.num_leaves + 1)
            clean_rejects += clean
    assert clean_rejects == 0
    return int(accepted.sum())


def test_batch_equivalence_small_polar():
    spec = make_polar_spec(4, 10, 3.0)
    tree = build_tree(spec)
    psi = psi_for_tree(penalty_profile(spec, 3.0, 20000, seed=1), tree)
    cfg = DecoderConfig(L=8, D=32, psi=psi)
    n_acc = _assert_equivalent(spec, tree, cfg, _frames(spec, 3.0, 250, 2))
    assert n_acc > 150


def test_batch_equivalence_crc_subcode():
    spec = attach_crc(make_polar_spec(6, 40, 2.0), CRC8_POLY, 2.0)
    tree = build_tree(spec)
    psi = psi_for_tree(penalty_profile(spec, 3.0, 20000, seed=3), tree)
    cfg = DecoderConfig(L=8, D=64, psi=psi)
    n_acc = _assert_equivalent(spec, tree, cfg, _frames(spec, 3.0, 250, 4))
    assert n_acc > 100


def test_batch_equivalence_ebch():
    spec = from_check_matrix(ebch_check_matrix(5, 8))
    tree = build_tree(spec)
    psi = psi_for_tree(penalty_profile(spec, 4.0, 20000, seed=5), tree)
    cfg = DecoderConfig(L=16, D=64, psi=psi)
    n_acc = _assert_equivalent(spec, tree, cfg, _frames(spec, 4.0, 250, 6))
    assert n_acc > 50


def test_batch_disabled_for_nonstandard_modes():
    spec = make_polar_spec(4, 10, 3.0)
    tree = build_tree(spec)
    psi = np.zeros(tree.num_leaves)
    for kw in (dict(example_score_bookkeeping=True),
               dict(defer_siblings=False),
               dict(L=8, D=2)):
        cfg = DecoderConfig(psi=psi, **({"L": 8, "D": 32} | kw))
        bd = BatchDecoder(spec, tree, cfg)
        acc, _ = bd.decode_batch(np.ones((4, 16)))
        assert not acc.any()


def test_batch_crc_filter_matches_reference():
    from polarseq.codespec import crc_bits
    spec = make_polar_spec(5, 20, 2.0)
    tree = build_tree(spec)
    psi = psi_for_tree(penalty_profile(spec, 3.0, 20000, seed=7), tree)
    cfg = DecoderConfig(L=4, D=16, psi=psi, crc=CRC8_POLY)
    rng = np.random.default_rng(8)
    data = rng.integers(0, 2, (120, 12), dtype=np.uint8)
    infos = np.array([np.concatenate([d, crc_bits(d, CRC8_POLY)]) for d in data])
    words = np.array([spec.encode(i) for i in infos])
    sigma_sq = 1.0 / (2 * (20 / 32) * 10 ** 0.3)
    llrs = (2 / sigma_sq) * ((1.0 - 2.0 * words)
                             + rng.normal(0, math.sqrt(sigma_sq), (120, 32)))
    _assert_equivalent(spec, tree, cfg, llrs)
