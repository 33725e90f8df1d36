"""Code specifications: frozen sets and dynamic freezing constraint systems.

A CodeSpec fully describes a decodable code of length n = 2^m: which input
phases of the polarizing transform are frozen, and for each frozen phase the
(possibly empty) set of earlier phases whose GF(2) sum it must equal.  Plain
polar codes, polar subcodes, CRC-aided polar codes and eBCH codes all reduce
to this one representation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import polar_transform

CRC8_POLY = 0b1_0000_0111          # x^8 + x^2 + x + 1
CRC32_POLY = 0x1_04C1_1DB7         # IEEE 802.3

# Primitive polynomials for GF(2^m), coefficient bits, degree m.
_PRIMITIVE_POLY = {
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10001001,
    8: 0b100011101,
}


def mul_arikan_t(rows: np.ndarray) -> np.ndarray:
    """Multiply row vectors by A_m^T over GF(2) (subset-parity butterfly)."""
    out = np.array(rows, dtype=np.uint8, copy=True) & 1
    n = out.shape[-1]
    if n & (n - 1):
        raise ValueError("row length must be a power of two")
    h = 1
    while h < n:
        for i in range(0, n, 2 * h):
            out[..., i + h:i + 2 * h] ^= out[..., i:i + h]
        h *= 2
    return out


@dataclass(frozen=True)
class CodeSpec:
    """An (n=2^m, k) code given by its dynamic freezing constraint system.

    constraints maps each frozen phase to a sorted tuple of earlier,
    non-frozen phases; the frozen symbol equals the GF(2) sum of its support
    (empty support = statically zero).  Supports are normalized: a raw
    support index that is itself frozen gets substituted by that phase's own
    expression, so stored supports only reference information phases.
    """

    m: int
    frozen: tuple[int, ...]
    constraints: dict[int, tuple[int, ...]] = field(hash=False)

    @property
    def n(self) -> int:
        return 1 << self.m

    @property
    def k(self) -> int:
        return self.n - len(self.frozen)

    @property
    def info_phases(self) -> tuple[int, ...]:
        mask = np.ones(self.n, dtype=bool)
        mask[list(self.frozen)] = False
        return tuple(int(i) for i in np.nonzero(mask)[0])

    def nontrivial_constraints(self) -> list[tuple[int, tuple[int, ...]]]:
        """(target, support) pairs with nonempty support, targets ascending."""
        return [(t, s) for t, s in sorted(self.constraints.items()) if s]

    @staticmethod
    def create(m: int, frozen, constraints=None) -> "CodeSpec":
        n = 1 << m
        frozen = tuple(sorted(int(i) for i in frozen))
        if len(set(frozen)) != len(frozen):
            raise ValueError("duplicate frozen phases")
        if frozen and (frozen[0] < 0 or frozen[-1] >= n):
            raise ValueError("frozen phase out of range")
        raw = {t: () for t in frozen}
        if constraints:
            for t, sup in constraints.items():
                t = int(t)
                if t not in raw:
                    raise ValueError(f"constraint target {t} is not frozen")
                sup = tuple(sorted(int(j) for j in sup))
                if len(set(sup)) != len(sup):
                    raise ValueError(f"duplicate support index for target {t}")
                if any(j < 0 or j >= t for j in sup):
                    raise ValueError(f"support of target {t} must lie below it")
                raw[t] = sup
        frozen_set = set(frozen)
        # Normalize: substitute frozen support indices by their expressions,
        # tracked as bitmasks over phases (ascending targets make this valid).
        expr: dict[int, int] = {}
        norm: dict[int, tuple[int, ...]] = {}
        for t in frozen:
            mask = 0
            for j in raw[t]:
                if j in frozen_set:
                    mask ^= expr[j]
                else:
                    mask ^= 1 << j
            expr[t] = mask
            norm[t] = tuple(_bits_of(mask))
        return CodeSpec(m=m, frozen=frozen, constraints=norm)

    def encode(self, info) -> np.ndarray:
        """Map k information bits to a codeword of length n."""
        info = np.asarray(info, dtype=np.uint8) & 1
        if info.shape != (self.k,):
            raise ValueError(f"expected {self.k} info bits, got {info.shape}")
        u = self.expand(info)
        return polar_transform(u)

    def expand(self, info) -> np.ndarray:
        """Place info bits and evaluate frozen symbols; returns u, not u*A."""
        info = np.asarray(info, dtype=np.uint8) & 1
        u = np.zeros(self.n, dtype=np.uint8)
        u[list(self.info_phases)] = info
        for t in self.frozen:  # ascending; supports precede targets
            sup = self.constraints[t]
            if sup:
                u[t] = u[list(sup)].sum() & 1
        return u

    def extract_info(self, u) -> np.ndarray:
        return np.asarray(u, dtype=np.uint8)[list(self.info_phases)]

    def u_domain_rows(self) -> np.ndarray:
        """One GF(2) row per frozen phase: 1 at target and at each support."""
        rows = np.zeros((len(self.frozen), self.n), dtype=np.uint8)
        for r, t in enumerate(self.frozen):
            rows[r, t] = 1
            sup = self.constraints[t]
            if sup:
                rows[r, list(sup)] = 1
        return rows

    def check_matrix(self) -> np.ndarray:
        """A parity-check matrix H of the code (u-rows times A^T)."""
        return mul_arikan_t(self.u_domain_rows())


def _bits_of(mask: int):
    j = 0
    while mask:
        if mask & 1:
            yield j
        mask >>= 1
        j += 1


def from_check_matrix(h) -> CodeSpec:
    """Turn any full-rank parity check matrix into a CodeSpec.

    Computes W = H A^T and row-reduces right-to-left until every row ends in
    a distinct column; that column is the constraint target, the remaining
    ones its support.  Deterministic: on a collision the row that entered
    first is kept and added into the others.
    """
    h = np.asarray(h, dtype=np.uint8) & 1
    if h.ndim != 2:
        raise ValueError("check matrix must be two-dimensional")
    n = h.shape[1]
    if n & (n - 1):
        raise ValueError("check matrix must have 2^m columns")
    m = n.bit_length() - 1
    w = mul_arikan_t(h)

    owner: dict[int, int] = {}          # column -> row index that claimed it
    rows = [row.copy() for row in w]
    order = list(range(len(rows)))
    for idx in order:
        row = rows[idx]
        while True:
            nz = np.nonzero(row)[0]
            if nz.size == 0:
                raise ValueError("check matrix is rank deficient")
            last = int(nz[-1])
            if last not in owner:
                owner[last] = idx
                break
            row ^= rows[owner[last]]
    frozen = sorted(owner)
    constraints = {}
    for col, idx in owner.items():
        nz = np.nonzero(rows[idx])[0]
        constraints[col] = tuple(int(j) for j in nz[:-1])
    return CodeSpec.create(m, frozen, constraints)


# ---------------------------------------------------------------------------
# eBCH construction


class _GF2m:
    """Log/antilog arithmetic in GF(2^m), polynomial basis."""

    def __init__(self, m: int):
        if m not in _PRIMITIVE_POLY:
            raise ValueError(f"no primitive polynomial stored for m={m}")
        self.m = m
        self.q = 1 << m
        poly = _PRIMITIVE_POLY[m]
        self.exp = np.zeros(2 * self.q, dtype=np.int64)
        self.log = np.zeros(self.q, dtype=np.int64)
        x = 1
        for i in range(self.q - 1):
            self.exp[i] = x
            self.log[x] = i
            x <<= 1
            if x & self.q:
                x ^= poly
        self.exp[self.q - 1:2 * self.q - 2] = self.exp[:self.q - 1]

    def pow_all(self, b: int) -> np.ndarray:
        """element^b for every field element 0..q-1 (0^b = 0 for b >= 1)."""
        out = np.zeros(self.q, dtype=np.int64)
        idx = np.arange(1, self.q)
        out[1:] = self.exp[(self.log[idx] * b) % (self.q - 1)]
        return out


def _gf2_independent_rows(rows: np.ndarray) -> np.ndarray:
    """Keep a maximal independent subset of rows, in order."""
    kept = []
    pivots: dict[int, np.ndarray] = {}
    for row in rows:
        r = row.copy()
        while True:
            nz = np.nonzero(r)[0]
            if nz.size == 0:
                break
            p = int(nz[-1])
            if p in pivots:
                r ^= pivots[p]
            else:
                pivots[p] = r
                kept.append(row)
                break
    return np.array(kept, dtype=np.uint8)


def ebch_check_matrix(m: int, designed_distance: int) -> np.ndarray:
    """Full-rank parity check matrix of the (2^m, k, designed_distance) eBCH code.

    Coordinates are indexed by field elements in the polynomial basis
    (coordinate j evaluates at the element with coordinate bits j), which is
    the affine arrangement; the position of the zero element carries only the
    overall parity check.  Rows are the all-ones row plus, for each cyclotomic
    coset leader b in 1..d-2, the m bit-planes of x^b.
    """
    if m > 8:
        raise ValueError("m must be at most 8")
    d = int(designed_distance)
    if d < 2 or d > (1 << m):
        raise ValueError("designed distance out of range")
    gf = _GF2m(m)
    q = gf.q
    rows = [np.ones(q, dtype=np.uint8)]
    seen_cosets = set()
    for b in range(1, d - 1):
        coset = frozenset((b << i) % (q - 1) for i in range(m))
        if coset in seen_cosets:
            continue
        seen_cosets.add(coset)
        powered = gf.pow_all(b)
        for t in range(m):
            rows.append(((powered >> t) & 1).astype(np.uint8))
    h = _gf2_independent_rows(np.array(rows, dtype=np.uint8))
    if h.shape[0] >= q:
        raise ValueError("designed distance leaves no information bits")
    return h


# ---------------------------------------------------------------------------
# CRC machinery


def crc_degree(poly: int) -> int:
    if poly < 2:
        raise ValueError("CRC polynomial must have degree >= 1")
    return poly.bit_length() - 1


def crc_bits(data, poly: int) -> np.ndarray:
    """CRC remainder of data(x) * x^r mod poly, MSB-first shift register."""
    r = crc_degree(poly)
    reg = 0
    top = 1 << r
    for bit in np.asarray(data, dtype=np.uint8) & 1:
        reg = (reg << 1) | int(bit)
        if reg & top:
            reg ^= poly
    for _ in range(r):
        reg <<= 1
        if reg & top:
            reg ^= poly
    return np.array([(reg >> (r - 1 - i)) & 1 for i in range(r)], dtype=np.uint8)


def crc_matrix(poly: int, data_len: int) -> np.ndarray:
    """r x data_len GF(2) matrix: column i is the CRC of unit vector e_i."""
    r = crc_degree(poly)
    out = np.zeros((r, data_len), dtype=np.uint8)
    for i in range(data_len):
        e = np.zeros(data_len, dtype=np.uint8)
        e[i] = 1
        out[:, i] = crc_bits(e, poly)
    return out


def attach_crc(spec: CodeSpec, poly: int, design_snr_db: float = 2.0) -> CodeSpec:
    """Embed a CRC over the data bits as extra dynamic freezing constraints.

    The r CRC symbols are carried on the r least reliable non-frozen phases
    (Gaussian-approximation order at design_snr_db); remaining non-frozen
    phases carry data in ascending order.  The combined check matrix is run
    through from_check_matrix, so the result is an ordinary CodeSpec of
    dimension k - r.
    """
    r = poly.bit_length() - 1 if poly >= 1 else 0
    if r == 0:
        return spec
    info = list(spec.info_phases)
    if r >= len(info):
        raise ValueError("CRC longer than the number of information phases")
    rel = subchannel_reliabilities(spec.m, design_snr_db, rate=spec.k / spec.n)
    crc_phases = sorted(sorted(info, key=lambda i: (rel[i], i))[:r])
    data_phases = [i for i in info if i not in set(crc_phases)]
    cmat = crc_matrix(poly, len(data_phases))
    u_rows = np.zeros((r, spec.n), dtype=np.uint8)
    for t in range(r):
        u_rows[t, crc_phases[t]] = 1
        u_rows[t, data_phases] = cmat[t]
    h = np.vstack([spec.check_matrix(), mul_arikan_t(u_rows)])
    return from_check_matrix(h)


# ---------------------------------------------------------------------------
# Gaussian-approximation construction


def _phi(x: np.ndarray) -> np.ndarray:
    """Chung et al. piecewise fit of the GA phi-function."""
    x = np.asarray(x, dtype=np.float64)
    small = np.exp(-0.4527 * np.clip(x, 1e-12, None) ** 0.86 + 0.0218)
    big = np.sqrt(np.pi / np.clip(x, 1e-12, None)) * np.exp(-x / 4.0) \
        * (1.0 - 10.0 / (7.0 * np.clip(x, 1e-12, None)))
    return np.where(x < 10.0, small, big)


def _phi_inv(y: np.ndarray) -> np.ndarray:
    """Inverse of _phi; analytic below x=10, bisection above."""
    y = np.asarray(y, dtype=np.float64)
    y = np.clip(y, 1e-300, 1.0 - 1e-12)
    thresh = float(_phi(np.array(10.0)))
    out = ((0.0218 - np.log(y)) / 0.4527) ** (1.0 / 0.86)
    hard = y < thresh
    if np.any(hard):
        lo = np.full(y.shape, 10.0)
        hi = np.full(y.shape, 10.0)
        while np.any(_phi(hi)[hard] > y[hard]):
            hi[hard] *= 2.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            too_big = _phi(mid) > y
            lo = np.where(too_big, mid, lo)
            hi = np.where(too_big, hi, mid)
        out = np.where(hard, 0.5 * (lo + hi), out)
    return out


def subchannel_reliabilities(m: int, design_snr_db: float, rate: float = 1.0) -> np.ndarray:
    """GA mean LLR of each bit subchannel for BPSK/AWGN at the design SNR.

    design_snr_db is Eb/N0; sigma^2 = 1/(2 * rate * 10^(snr/10)).  Indexing
    follows the package's no-bit-reversal transform: even child = check
    combine (degraded), odd child = variable combine (upgraded).
    """
    snr = 10.0 ** (design_snr_db / 10.0)
    sigma_sq = 1.0 / (2.0 * rate * snr)
    mu = np.array([2.0 / sigma_sq])
    for _ in range(m):
        check = _phi_inv(1.0 - (1.0 - _phi(mu)) ** 2)
        var = 2.0 * mu
        mu = np.empty(2 * mu.size)
        mu[0::2] = check
        mu[1::2] = var
    return mu


def construct_frozen_set(m: int, k: int, design_snr_db: float) -> set[int]:
    """Indices of the 2^m - k least reliable subchannels under GA."""
    n = 1 << m
    if not 0 <= k <= n:
        raise ValueError("dimension out of range")
    mu = subchannel_reliabilities(m, design_snr_db, rate=k / n if k else 1.0)
    order = np.lexsort((np.arange(n), mu))
    return {int(i) for i in order[:n - k]}


def make_polar_spec(m: int, k: int, design_snr_db: float = 2.0) -> CodeSpec:
    """Plain polar code: GA frozen set, all symbols statically zero."""
    return CodeSpec.create(m, construct_frozen_set(m, k, design_snr_db))


# ---------------------------------------------------------------------------
# Text serialization


def save_spec(spec: CodeSpec) -> str:
    lines = ["POLARSPEC 1", f"M {spec.m}", f"K {spec.k}"]
    lines.append("FROZEN " + " ".join(str(i) for i in spec.frozen))
    for t, sup in sorted(spec.constraints.items()):
        if sup:
            lines.append(f"DFC {t}: " + " ".join(str(j) for j in sup))
    return "\n".join(lines) + "\n"


class SpecParseError(ValueError):
    pass


def load_spec(text: str) -> CodeSpec:
    m = k = None
    frozen = None
    constraints: dict[int, tuple[int, ...]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "POLARSPEC":
                if parts[1] != "1":
                    raise SpecParseError(f"line {lineno}: unsupported version")
            elif parts[0] == "M":
                m = int(parts[1])
            elif parts[0] == "K":
                k = int(parts[1])
            elif parts[0] == "FROZEN":
                frozen = [int(p) for p in parts[1:]]
            elif parts[0] == "DFC":
                head, _, tail = line.partition(":")
                target = int(head.split()[1])
                if target in constraints:
                    raise SpecParseError(f"line {lineno}: duplicate DFC target {target}")
                constraints[target] = tuple(int(j) for j in tail.split())
            else:
                raise SpecParseError(f"line {lineno}: unknown directive {parts[0]!r}")
        except SpecParseError:
            raise
        except (ValueError, IndexError) as exc:
            raise SpecParseError(f"line {lineno}: {exc}") from exc
    if m is None or frozen is None:
        raise SpecParseError("missing M or FROZEN line")
    if sorted(frozen) != frozen:
        raise SpecParseError("FROZEN indices must be ascending")
    try:
        spec = CodeSpec.create(m, frozen, constraints)
    except ValueError as exc:
        raise SpecParseError(str(exc)) from exc
    if k is not None and spec.k != k:
        raise SpecParseError(f"K line says {k} but frozen set implies {spec.k}")
    return spec
