import numpy as np
import pytest

from polarseq.decomposition import Leaf, OuterKind, leaf_generator_rows
from polarseq.kernel import ellipsoidal_weight, polar_transform
from polarseq.outer import (
    OuterContractError,
    SPC_PATTERNS_EVEN,
    SPC_PATTERNS_ODD,
    get_next_codeword,
    hard_decision_shortcut,
    preprocess,
)


def make_leaf(kind, mu, frozen, **extras):
    n = 1 << mu
    d = {"t": extras.get("t"), "reps": extras.get("reps")}
    d = {k: v for k, v in d.items() if v is not None}
    return Leaf(psi=0, phi_start=0, phi_end=n - 1, mu=mu, layer=0,
                r=n - 1 >> mu, kind=kind, extras=d,
                frozen_local=tuple(sorted(frozen)), k_leaf=n - len(frozen),
                d_min={OuterKind.RATE1: 1}.get(kind, 2))


LEAVES = {
    "spc4": make_leaf(OuterKind.SPC, 2, [0]),
    "spc16": make_leaf(OuterKind.SPC, 4, [0]),
    "dpc8": make_leaf(OuterKind.DPC, 3, [0, 1]),
    "rate1_8": make_leaf(OuterKind.RATE1, 3, []),
    "rep8": make_leaf(OuterKind.REP, 3, range(7)),
    "rate0_4": make_leaf(OuterKind.RATE0, 2, range(4)),
    "rm1_8": make_leaf(OuterKind.RM1, 3, [0, 1, 2, 4]),
    "rm1rep16": make_leaf(OuterKind.RM1_REP, 4,
                          [i for i in range(16) if i not in (15, 11, 7)], t=2),
    "cosets8": make_leaf(OuterKind.RM1_COSETS, 3, [0, 2], reps=(1, 4)),
    "low8": make_leaf(OuterKind.LOW_RATE, 3, [0, 1, 2, 3, 4, 5]),
}


def all_codewords(leaf):
    rows = leaf_generator_rows(leaf)
    words = []
    for mask in range(1 << rows.shape[0]):
        w = np.zeros(leaf.length, dtype=np.uint8)
        for b in range(rows.shape[0]):
            if mask >> b & 1:
                w ^= rows[b]
        words.append(w)
    return words


def test_table_sizes():
    assert len(SPC_PATTERNS_ODD) == 22
    assert len(SPC_PATTERNS_EVEN) == 26


def test_spc_preprocess_example():
    s = np.array([-0.44, 7.46, 2.02, -0.12])
    state = preprocess(LEAVES["spc4"], s, None, 8)
    assert state.order.tolist() == [3, 0, 2, 1]
    assert state.hard.tolist() == [1, 0, 0, 1]


def test_spc_emission_example():
    s = np.array([-0.44, 7.46, 2.02, -0.12])
    state = preprocess(LEAVES["spc4"], s, None, 8)
    first = get_next_codeword(state)
    assert first.codeword.tolist() == [1, 0, 0, 1] and first.e == 0.0
    second = get_next_codeword(state)
    assert second.codeword.tolist() == [0, 0, 0, 0]
    assert second.e == pytest.approx(-0.56, abs=1e-12)


def test_rm1_mu2_correlations():
    leaf = make_leaf(OuterKind.RM1, 2, [0])
    state = preprocess(leaf, np.ones(4), None, 8)
    assert state.tables.ravel().tolist() == [4.0, 0.0, 0.0, 0.0]


def test_rm1_example_block():
    leaf = LEAVES["rm1_8"]
    s = np.array([-0.2, 16.84, 18.05, 15.82, 19.06, 19.2, 8.08, 13.08])
    em = get_next_codeword(preprocess(leaf, s, None, 8))
    assert not em.codeword.any()
    assert em.e == pytest.approx(-0.2, abs=1e-9)


def test_rate0_single_emission():
    leaf = LEAVES["rate0_4"]
    s = np.array([1.0, -2.0, 3.0, -4.0])
    state = preprocess(leaf, s, None, 8)
    em = get_next_codeword(state)
    assert not em.codeword.any()
    assert em.e == pytest.approx(-6.0)
    assert not em.more
    with pytest.raises(OuterContractError):
        get_next_codeword(state)


def test_coset_flip_equals_preflipped():
    rng = np.random.default_rng(0)
    for name in ("spc4", "rm1_8", "rep8", "rate1_8", "low8"):
        leaf = LEAVES[name]
        s = rng.normal(size=leaf.length)
        p = rng.integers(0, 2, leaf.length, dtype=np.uint8)
        a = preprocess(leaf, s, p, 4)
        b = preprocess(leaf, s * (1.0 - 2.0 * p), None, 4)
        for _ in range(3):
            ea = get_next_codeword(a)
            eb = get_next_codeword(b)
            assert np.array_equal(ea.codeword ^ p, eb.codeword)
            assert ea.e == pytest.approx(eb.e, abs=1e-12)
            if not (ea.more and eb.more):
                break


def test_shortcut_examples():
    leaf = LEAVES["spc4"]
    s = np.array([-0.44, 7.46, 2.02, -0.12])
    em, deferred = hard_decision_shortcut(leaf, s, None, 8)
    assert em.codeword.tolist() == [1, 0, 0, 1]
    assert em.e == 0.0 and em.more
    assert em.next_bound == pytest.approx(-2 * 0.12, abs=1e-12)
    state = deferred.resolve()
    nxt = get_next_codeword(state)
    assert nxt.e == pytest.approx(-0.56, abs=1e-12)

    s_all_pos = np.array([2.0, 3.0, 1.5, 2.5])
    em2, _ = hard_decision_shortcut(leaf, s_all_pos, None, 8)
    assert em2.next_bound == pytest.approx(-2 * 1.5)

    odd = np.array([-1.0, 2.0, 3.0, 4.0])
    assert hard_decision_shortcut(leaf, odd, None, 8) is None


def test_shortcut_membership_by_kind():
    rng = np.random.default_rng(1)
    for name, leaf in LEAVES.items():
        words = {w.tobytes() for w in all_codewords(leaf)}
        fired_count = 0
        for _ in range(200):
            s = rng.normal(size=leaf.length)
            hit = hard_decision_shortcut(leaf, s, None, 8)
            hard = (s < 0).astype(np.uint8)
            if hit is not None:
                fired_count += 1
                assert hard.tobytes() in words, name
                assert np.array_equal(hit[0].codeword, hard)
            else:
                assert hard.tobytes() not in words, name
        if leaf.kind == OuterKind.RATE1:
            assert fired_count == 200


@pytest.mark.parametrize("name", sorted(LEAVES))
def test_top1_is_ml_and_emissions_valid(name):
    leaf = LEAVES[name]
    words = all_codewords(leaf)
    rng = np.random.default_rng(hash(name) % 2**32)
    monotone_global = leaf.kind in (OuterKind.RATE0, OuterKind.REP,
                                    OuterKind.LOW_RATE, OuterKind.RM1,
                                    OuterKind.RM1_REP, OuterKind.RM1_COSETS)
    member_set = {w.tobytes() for w in words}
    limit = min(1 << leaf.k_leaf, 32)
    for _ in range(300):
        s = rng.normal(size=leaf.length) * 2.0
        best = max(ellipsoidal_weight(w, s) for w in words)
        state = preprocess(leaf, s, None, limit)
        prev_e = 0.0
        count = 0
        em = None
        while em is None or em.more:
            em = get_next_codeword(state)
            count += 1
            if count == 1:
                assert em.e == pytest.approx(best, abs=1e-9), name
            assert em.codeword.tobytes() in member_set, name
            assert em.e == pytest.approx(
                ellipsoidal_weight(em.codeword, s), abs=1e-9), name
            if count > 1 and monotone_global:
                assert em.e <= prev_e + 1e-12, name
            prev_e = em.e
        assert count <= limit


def test_emission_counts_capped():
    leaf = LEAVES["spc16"]
    rng = np.random.default_rng(2)
    s = rng.normal(size=16)
    state = preprocess(leaf, s, None, 3)
    ems = []
    em = get_next_codeword(state)
    ems.append(em)
    while em.more:
        em = get_next_codeword(state)
        ems.append(em)
    assert len(ems) == 3
    with pytest.raises(OuterContractError):
        get_next_codeword(state)


def test_spc_local_monotonicity():
    leaf = LEAVES["spc16"]
    rng = np.random.default_rng(3)
    for _ in range(100):
        s = rng.normal(size=16)
        state = preprocess(leaf, s, None, 32)
        es = []
        em = get_next_codeword(state)
        es.append(em.e)
        while em.more:
            em = get_next_codeword(state)
            es.append(em.e)
        assert all(a >= b - 1e-12 for a, b in zip(es, es[1:]))


def test_dpc_streams_interleave():
    leaf = LEAVES["dpc8"]
    rng = np.random.default_rng(4)
    for _ in range(100):
        s = rng.normal(size=8)
        state = preprocess(leaf, s, None, 16)
        em = get_next_codeword(state)
        assert int(em.codeword[0::2].sum()) % 2 == 0
        assert int(em.codeword[1::2].sum()) % 2 == 0
