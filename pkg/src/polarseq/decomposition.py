"""Plotkin decomposition trees and outer-code classification.

A code with frozen set F splits into the codes with frozen sets
F0 = F intersect [n/2] and F1 = {j | j + n/2 in F}; applied recursively this
yields a binary tree whose leaves are small codes that admit direct list
decoding.  classify() recognizes those leaf patterns from the local frozen
set alone; build_tree() drives the recursion under a length-cap policy.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .codespec import CodeSpec
from .kernel import wht


class OuterKind(enum.Enum):
    RATE0 = "rate0"
    REP = "rep"
    RATE1 = "rate1"
    SPC = "spc"
    DPC = "dpc"
    RM1 = "rm1"
    RM1_REP = "rm1rep"          # RM(1, mu-t) repeated over 2^t-blocks
    RM1_COSETS = "rm1cosets"
    LOW_RATE = "lowrate"        # k <= 2, exhaustive


@dataclass
class TreePolicy:
    max_spc: int = 64
    max_rate1: int = 64
    max_dpc: int = 64
    max_rm1: int = 128
    # Coset-union leaves absorb up to this many extra unfrozen indices on top
    # of the RM(1,mu) pattern.  2 would also catch codes (like the (8,6) node
    # of the 16/10 reference tree) that decompose into plain SPC pairs, so
    # the tree default stops at 1; the 4-coset decoder itself supports 2.
    max_coset_extras: int = 1
    allow_rep_concat: bool = True
    max_leaf: int | None = None     # cap on any leaf length; 1 = symbol-wise

    @staticmethod
    def symbolwise() -> "TreePolicy":
        return TreePolicy(max_leaf=1)


def split(frozen: set[int], half: int) -> tuple[set[int], set[int]]:
    """Children frozen sets of one Plotkin decomposition step."""
    f0 = {j for j in frozen if j < half}
    f1 = {j - half for j in frozen if j >= half}
    return f0, f1


def rm1_unfrozen(mu: int) -> set[int]:
    """Unfrozen phases generating RM(1, mu): all-ones row plus its 2^i dents."""
    top = (1 << mu) - 1
    return {top} | {top - (1 << i) for i in range(mu)}


def _rep_concat_order(unfrozen: set[int], mu: int) -> int | None:
    """If unfrozen matches RM(1, mu-t) concatenated with 2^t-repetition, return t."""
    top = (1 << mu) - 1
    for t in range(1, mu):
        want = {top} | {top - (1 << i) for i in range(t, mu)}
        if unfrozen == want:
            return t
    return None


def classify(frozen: set[int], mu: int, policy: TreePolicy) -> tuple[OuterKind, dict] | None:
    """Match the local frozen pattern to a decodable outer-code kind.

    Precedence on overlap: RATE0 > REP > RATE1 > SPC > DPC > RM1 > RM1_REP >
    RM1_COSETS > LOW_RATE (cheapest decoder first).  Returns None when the
    node must be split further.
    """
    n = 1 << mu
    nfull = set(range(n))
    if mu == 0:
        return (OuterKind.RATE0, {}) if frozen else (OuterKind.RATE1, {})
    if frozen == nfull:
        return OuterKind.RATE0, {}
    if frozen == nfull - {n - 1}:
        return OuterKind.REP, {}
    if not frozen:
        if n <= policy.max_rate1:
            return OuterKind.RATE1, {}
        return None
    if frozen == {0}:
        if n <= policy.max_spc:
            return OuterKind.SPC, {}
        return None
    if frozen == {0, 1}:
        if n <= policy.max_dpc:
            return OuterKind.DPC, {}
        return None
    unfrozen = nfull - frozen
    if n <= policy.max_rm1:
        if unfrozen == rm1_unfrozen(mu):
            return OuterKind.RM1, {}
        if policy.allow_rep_concat:
            t = _rep_concat_order(unfrozen, mu)
            if t is not None:
                return OuterKind.RM1_REP, {"t": t}
        if policy.max_coset_extras > 0:
            base = rm1_unfrozen(mu)
            extra = unfrozen - base
            if base <= unfrozen and 1 <= len(extra) <= min(2, policy.max_coset_extras):
                return OuterKind.RM1_COSETS, {"reps": tuple(sorted(extra))}
    if len(frozen) >= n - 2:
        return OuterKind.LOW_RATE, {}
    return None


def _arikan_row(i: int, mu: int) -> np.ndarray:
    j = np.arange(1 << mu)
    return ((j & i) == j).astype(np.uint8)


def leaf_generator_rows(leaf: "Leaf") -> np.ndarray:
    """Generator rows (unfrozen rows of A_mu) of the leaf base code."""
    mu = leaf.mu
    unfrozen = [i for i in range(1 << mu) if i not in set(leaf.frozen_local)]
    if not unfrozen:
        return np.zeros((0, 1 << mu), dtype=np.uint8)
    return np.array([_arikan_row(i, mu) for i in unfrozen], dtype=np.uint8)


def _min_distance(kind: OuterKind, mu: int, extras: dict, frozen: set[int]) -> int:
    n = 1 << mu
    if kind == OuterKind.RATE0:
        return n
    if kind == OuterKind.REP:
        return n
    if kind == OuterKind.RATE1:
        return 1
    if kind in (OuterKind.SPC, OuterKind.DPC):
        return 2
    if kind in (OuterKind.RM1, OuterKind.RM1_REP):
        return n // 2 if mu >= 1 else 1
    if kind == OuterKind.RM1_COSETS:
        # Coset min weight via one +/-1 Hadamard transform per coset.
        reps = extras["reps"]
        vecs = [np.zeros(n, dtype=np.uint8)]
        base = [_arikan_row(r, mu) for r in reps]
        combos = [base[0]] if len(base) == 1 else [base[0], base[1], base[0] ^ base[1]]
        vecs.extend(combos)
        best = n
        for q in vecs[1:]:
            t = wht(1.0 - 2.0 * q.astype(np.float64))
            w = int((n - np.abs(t).max()) // 2)
            best = min(best, w if w > 0 else n)
        return min(best, n // 2 if mu >= 1 else 1)
    # LOW_RATE: enumerate the <= 3 nonzero codewords.
    unfrozen = [i for i in range(n) if i not in frozen]
    best = n
    for mask in range(1, 1 << len(unfrozen)):
        c = np.zeros(n, dtype=np.uint8)
        for b, i in enumerate(unfrozen):
            if mask >> b & 1:
                c ^= _arikan_row(i, mu)
        best = min(best, int(c.sum()))
    return best


@dataclass
class Leaf:
    psi: int
    phi_start: int
    phi_end: int
    mu: int                      # log2 of leaf length
    layer: int                   # m - mu
    r: int                       # phi_end >> mu
    kind: OuterKind
    extras: dict
    frozen_local: tuple[int, ...]
    k_leaf: int
    d_min: int

    @property
    def length(self) -> int:
        return 1 << self.mu


@dataclass
class _Node:
    phi_start: int
    phi_end: int
    mu: int
    frozen: set[int]
    kind: OuterKind | None
    children: list = field(default_factory=list)


@dataclass
class PDTree:
    spec: CodeSpec
    policy: TreePolicy
    leaves: list[Leaf]
    root: _Node

    @property
    def num_leaves(self) -> int:
        return len(self.leaves)

    def dump(self) -> str:
        lines: list[str] = []

        def walk(node: _Node, depth: int) -> None:
            span = f"[{node.phi_start},{node.phi_end}]"
            if node.kind is None:
                lines.append("  " * depth + f"({1 << node.mu},{(1 << node.mu) - len(node.frozen)}) {span}")
                for ch in node.children:
                    walk(ch, depth + 1)
            else:
                k = (1 << node.mu) - len(node.frozen)
                lines.append("  " * depth + f"({1 << node.mu},{k}) {span} {node.kind.value}")

        walk(self.root, 0)
        return "\n".join(lines) + "\n"


def build_tree(spec: CodeSpec, policy: TreePolicy | None = None) -> PDTree:
    """Recursively decompose spec into classified outer-code leaves.

    A node becomes a leaf when its local frozen pattern classifies, its
    length respects the policy caps, and no dynamic freezing constraint
    targeting a phase inside the node has support inside the node (such
    constraints cannot be absorbed into a coset shift, so the node splits).
    """
    policy = policy or TreePolicy()
    nontrivial = spec.nontrivial_constraints()
    leaves: list[Leaf] = []

    def ok_for_cosets(phi_start: int, phi_end: int) -> bool:
        for target, support in nontrivial:
            if phi_start <= target <= phi_end and support and support[-1] >= phi_start:
                return False
        return True

    def rec(frozen: set[int], mu: int, phi_start: int) -> _Node:
        n_loc = 1 << mu
        phi_end = phi_start + n_loc - 1
        hit = None
        if policy.max_leaf is None or n_loc <= policy.max_leaf:
            hit = classify(frozen, mu, policy)
        if hit is not None and not ok_for_cosets(phi_start, phi_end):
            hit = None
        if hit is None and mu == 0:
            # length-1 nodes always terminate
            hit = (OuterKind.RATE0, {}) if frozen else (OuterKind.RATE1, {})
        if hit is not None:
            kind, extras = hit
            leaf = Leaf(
                psi=len(leaves), phi_start=phi_start, phi_end=phi_end,
                mu=mu, layer=spec.m - mu, r=phi_end >> mu,
                kind=kind, extras=extras,
                frozen_local=tuple(sorted(frozen)),
                k_leaf=n_loc - len(frozen),
                d_min=_min_distance(kind, mu, extras, frozen),
            )
            leaves.append(leaf)
            return _Node(phi_start, phi_end, mu, frozen, kind)
        f0, f1 = split(frozen, n_loc // 2)
        node = _Node(phi_start, phi_end, mu, frozen, None)
        node.children.append(rec(f0, mu - 1, phi_start))
        node.children.append(rec(f1, mu - 1, phi_start + n_loc // 2))
        return node

    root = rec(set(spec.frozen), spec.m, 0)
    return PDTree(spec=spec, policy=policy, leaves=leaves, root=root)
