"""Min-sum LLR arithmetic, the polarizing transform and ellipsoidal weights.

These are the shared numeric primitives: every decoder in the package is
built out of the two LLR recursion operators Q and P, sign slicing, and the
non-positive ellipsoidal weight (correlation discrepancy) of a binary word
against an LLR vector.

Sign convention: sgn(0) is treated as +1 everywhere, so an exactly-zero LLR
hard-decides to bit 0.
"""

from __future__ import annotations

import numpy as np


def _check_pow2(n: int) -> None:
    if n < 1 or (n & (n - 1)) != 0:
        raise ValueError(f"length must be a power of two, got {n}")


def q_op(a, b):
    """Min-sum check-node operator sgn(a)*sgn(b)*min(|a|,|b|).

    Works elementwise on arrays; scalars come back as numpy scalars.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    sa = np.where(a < 0, -1.0, 1.0)
    sb = np.where(b < 0, -1.0, 1.0)
    return sa * sb * np.minimum(np.abs(a), np.abs(b))


def p_op(bit, a, b):
    """Variable-node operator (-1)^bit * a + b, elementwise."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    bit = np.asarray(bit)
    return np.where(bit != 0, -a, a) + b


def hard_decision(llrs) -> np.ndarray:
    """Slice signs to bits: negative LLR -> 1, zero or positive -> 0."""
    return (np.asarray(llrs) < 0).astype(np.uint8)


def tau(llr, bit):
    """Penalty of deciding `bit` against `llr`: 0 on agreement, -|llr| else."""
    llr = np.asarray(llr, dtype=np.float64)
    agree = (llr < 0) == (np.asarray(bit) != 0)
    return np.where(agree, 0.0, -np.abs(llr))


def ellipsoidal_weight(word, llrs) -> float:
    """Sum of penalties of `word` against `llrs`; always <= 0.

    Equals -sum(|llr_i|) over the coordinates where `word` disagrees with
    the hard decision of `llrs`.
    """
    word = np.asarray(word)
    llrs = np.asarray(llrs, dtype=np.float64)
    if word.shape != llrs.shape:
        raise ValueError(f"length mismatch: {word.shape} vs {llrs.shape}")
    mismatch = (llrs < 0) != (word != 0)
    return float(-np.abs(llrs[mismatch]).sum())


def polar_transform(u) -> np.ndarray:
    """u -> u @ F^{(x)m} over GF(2), F = [[1,0],[1,1]], no bit reversal.

    In-place butterfly on a copy, O(n log n) bit operations.  The transform
    is an involution.
    """
    c = np.array(u, dtype=np.uint8, copy=True) & 1
    n = c.shape[-1]
    _check_pow2(n)
    h = 1
    while h < n:
        for i in range(0, n, 2 * h):
            c[..., i:i + h] ^= c[..., i + h:i + 2 * h]
        h *= 2
    return c


def arikan_matrix(m: int) -> np.ndarray:
    """The m-fold Kronecker power of [[1,0],[1,1]] as a dense uint8 matrix."""
    n = 1 << m
    j = np.arange(n)
    return ((j[:, None] & j[None, :]) == j[None, :]).astype(np.uint8)


def wht(values: np.ndarray) -> np.ndarray:
    """Walsh-Hadamard transform along the last axis (natural ordering).

    Output index a holds sum_j (-1)^{popcount(a & j)} * values[j].
    """
    t = np.array(values, dtype=np.float64, copy=True)
    n = t.shape[-1]
    _check_pow2(n)
    h = 1
    while h < n:
        for i in range(0, n, 2 * h):
            lo = t[..., i:i + h].copy()
            hi = t[..., i + h:i + 2 * h]
            t[..., i:i + h] = lo + hi
            t[..., i + h:i + 2 * h] = lo - hi
        h *= 2
    return t
