import random

import pytest

from polarseq.depq import DoubleEndedQueue, QueueContractError


def test_push_pop_single():
    q = DoubleEndedQueue(8)
    q.push(1.5, path=0, block=0)
    assert q.pop_max().score == 1.5
    assert len(q) == 0


def test_example_scores():
    q = DoubleEndedQueue(8)
    q.push(0.47, 0, 0)
    q.push(-0.09, 1, 0)
    assert q.pop_max().score == 0.47
    q2 = DoubleEndedQueue(8)
    for i, s in enumerate((0.43, 0.27, -2.42)):
        q2.push(s, i, 0)
    assert q2.pop_max().score == 0.43
    assert q2.pop_min().score == -2.42


def test_lifo_tie_break():
    q = DoubleEndedQueue(8)
    q.push(1.0, 0, 0)
    q.push(1.0, 1, 0)
    q.push(1.0, 2, 0)
    assert q.pop_max().path == 2       # most recent wins at the max end
    assert q.pop_min().path == 0       # oldest goes first at the min end


def test_duplicate_path_rejected():
    q = DoubleEndedQueue(8)
    q.push(0.0, 7, 0)
    with pytest.raises(QueueContractError):
        q.push(1.0, 7, 1)


def test_capacity_contract():
    q = DoubleEndedQueue(2)
    q.push(0.0, 0, 0)
    q.push(1.0, 1, 0)
    with pytest.raises(QueueContractError):
        q.push(2.0, 2, 0)


def test_empty_pops_raise():
    q = DoubleEndedQueue(2)
    with pytest.raises(QueueContractError):
        q.pop_max()
    with pytest.raises(QueueContractError):
        q.pop_min()


def test_remove_if_counts():
    q = DoubleEndedQueue(8)
    for i, b in enumerate((0, 1, 2)):
        q.push(float(i), i, b)
    assert q.remove_if(lambda block, path: block <= 1) == 2
    assert q.remove_if(lambda block, path: False) == 0
    assert len(q) == 1 and q.pop_max().block == 2


def test_stress_against_sorted_list_oracle():
    rng = random.Random(7)
    q = DoubleEndedQueue(capacity=1500)
    oracle = []         # (score, seq, path, block)
    next_path = 0
    for step in range(100_000):
        roll = rng.random()
        if (roll < 0.5 and len(oracle) < 1500) or not oracle:
            score = rng.choice([rng.uniform(-5, 5), 0.0, 1.0])
            e = q.push(score, next_path, rng.randrange(8))
            oracle.append((score, e.seq, next_path, e.block))
            next_path += 1
        elif roll < 0.7:
            got = q.pop_max()
            exp = max(oracle, key=lambda t: (t[0], t[1]))
            assert (got.score, got.seq) == (exp[0], exp[1])
            oracle.remove(exp)
        elif roll < 0.9:
            got = q.pop_min()
            exp = min(oracle, key=lambda t: (t[0], t[1]))
            assert (got.score, got.seq) == (exp[0], exp[1])
            oracle.remove(exp)
        else:
            thr = rng.randrange(8)
            removed = q.remove_if(lambda block, path: block <= thr)
            keep = [t for t in oracle if t[3] > thr]
            assert removed == len(oracle) - len(keep)
            oracle = keep
        if step % 10_000 == 0:
            assert q.check_heap_property()
    assert q.check_heap_property()
