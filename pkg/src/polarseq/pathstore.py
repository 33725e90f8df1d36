"""Shared per-path storage: LLR and partial-sum arrays with lazy reuse.

One ArrayBank serves one decode.  Paths map (path, layer) to pooled arrays
with reference counts; writers detach from shared arrays without copying
(the fresh array is always fully overwritten before any read), and the
odd-phase partial-sum array of a layer is co-located inside an ancestor
layer's array, halving partial-sum storage and removing the classic
copy-on-write of list decoding.

Layer 0 is the channel side (arrays of length n), layer m the input side.
"""

from __future__ import annotations

import numpy as np


class PoolExhausted(RuntimeError):
    """The decode consumed more array storage than the configured cap."""


class BankContractError(RuntimeError):
    pass


class PathState:
    __slots__ = ("R", "R_tilde", "psi", "B", "Z", "w", "w_tilde", "pending",
                 "alive")

    def __init__(self):
        self.reset()

    def reset(self):
        self.R = 0.0
        self.R_tilde = 0.0
        self.psi = 0
        self.B = False
        self.Z = None
        self.w = 0          # bitmask of dynamic-frozen accumulators
        self.w_tilde = 0    # value of w before the current block
        self.pending = False    # scored by estimate, codeword not yet built
        self.alive = False


def _v2(x: int) -> int:
    """Largest d with 2^d dividing x (x > 0)."""
    return (x & -x).bit_length() - 1


class ArrayBank:
    def __init__(self, m: int, max_paths: int, capacity: int):
        self.m = m
        self.n = 1 << m
        self.capacity = int(capacity)
        self.max_paths = max_paths
        self.pool_s = np.empty(self.capacity, dtype=np.float64)
        self.pool_c = np.empty(self.capacity, dtype=np.uint8)
        self.arr_offset: list[int] = []
        self.arr_layer: list[int] = []
        self.refcount: list[int] = []
        self.inactive: list[list[int]] = [[] for _ in range(m + 1)]
        self.path_to_arr = np.full((max_paths, m + 1), -1, dtype=np.int64)
        self.paths = [PathState() for _ in range(max_paths)]
        self.free_paths = list(range(max_paths - 1, -1, -1))
        self.phi = 0
        self.peak_phi = 0
        self.bytes_copied = 0       # must stay zero: no copy-on-write copies
        self.allocations = 0

    def reset(self) -> None:
        self.arr_offset.clear()
        self.arr_layer.clear()
        self.refcount.clear()
        for stack in self.inactive:
            stack.clear()
        self.path_to_arr.fill(-1)
        for p in self.paths:
            p.reset()
        self.free_paths = list(range(self.max_paths - 1, -1, -1))
        self.phi = 0
        self.peak_phi = 0
        self.bytes_copied = 0
        self.allocations = 0

    # -- path lifecycle ----------------------------------------------------

    def assign_initial_path(self) -> int:
        return self._new_path()

    def _new_path(self) -> int:
        if not self.free_paths:
            raise BankContractError("path table full")
        l = self.free_paths.pop()
        self.path_to_arr[l, :] = -1
        st = self.paths[l]
        st.reset()
        st.alive = True
        return l

    def clone_path(self, l: int) -> int:
        src = self.paths[l]
        if not src.alive:
            raise BankContractError("cloning a dead path")
        l2 = self._new_path()
        row = self.path_to_arr[l]
        self.path_to_arr[l2, :] = row
        for p in row:
            if p >= 0:
                self.refcount[p] += 1
        dst = self.paths[l2]
        dst.R = src.R
        dst.R_tilde = src.R_tilde
        dst.psi = src.psi
        dst.B = src.B
        dst.Z = src.Z
        dst.w = src.w
        dst.w_tilde = src.w_tilde
        dst.pending = src.pending
        return l2

    def kill_path(self, l: int) -> None:
        st = self.paths[l]
        if not st.alive:
            raise BankContractError("killing a dead path")
        for layer in range(self.m + 1):
            p = self.path_to_arr[l, layer]
            if p >= 0:
                self._release(int(p))
        self.path_to_arr[l, :] = -1
        st.reset()
        self.free_paths.append(l)

    def _release(self, p: int) -> None:
        self.refcount[p] -= 1
        if self.refcount[p] == 0:
            self.inactive[self.arr_layer[p]].append(p)

    # -- array allocation --------------------------------------------------

    def _allocate(self, layer: int) -> int:
        stack = self.inactive[layer]
        if stack:
            p = stack.pop()
            self.refcount[p] = 1
            return p
        size = 1 << (self.m - layer)
        if self.phi + size > self.capacity:
            raise PoolExhausted(
                f"pool cap {self.capacity} exceeded at layer {layer}")
        p = len(self.arr_offset)
        self.arr_offset.append(self.phi)
        self.arr_layer.append(layer)
        self.refcount.append(1)
        self.phi += size
        self.peak_phi = max(self.peak_phi, self.phi)
        self.allocations += 1
        return p

    def _get_w(self, l: int, layer: int) -> int:
        p = int(self.path_to_arr[l, layer])
        if p < 0:
            p = self._allocate(layer)
            self.path_to_arr[l, layer] = p
        elif self.refcount[p] > 1:
            self.refcount[p] -= 1
            p = self._allocate(layer)
            self.path_to_arr[l, layer] = p
        return p

    def _s_view(self, p: int) -> np.ndarray:
        off = self.arr_offset[p]
        return self.pool_s[off:off + (1 << (self.m - self.arr_layer[p]))]

    def _c_view(self, p: int) -> np.ndarray:
        off = self.arr_offset[p]
        return self.pool_c[off:off + (1 << (self.m - self.arr_layer[p]))]

    # -- read/write handles --------------------------------------------------

    def s_read(self, l: int, layer: int) -> np.ndarray:
        p = int(self.path_to_arr[l, layer])
        if p < 0:
            raise BankContractError(f"no S array at layer {layer}")
        return self._s_view(p)

    def c_read(self, l: int, layer: int) -> np.ndarray:
        p = int(self.path_to_arr[l, layer])
        if p < 0:
            raise BankContractError(f"no C array at layer {layer}")
        return self._c_view(p)

    def s_write(self, l: int, layer: int) -> np.ndarray:
        return self._s_view(self._get_w(l, layer))

    def c_write(self, l: int, layer: int, phase: int) -> np.ndarray:
        """Writable slice for the layer's partial sums at this phase.

        Odd phases live inside the array of layer - v2(phase+1), offset by
        the co-location rule; even phases at the head of the layer's own
        array.
        """
        delta = _v2(phase + 1) if phase % 2 == 1 else 0
        p = self._get_w(l, layer - delta)
        view = self._c_view(p)
        size = 1 << (self.m - layer)
        if phase % 2 == 1:
            off = size * ((1 << delta) - 1)
            return view[off:off + size]
        return view[:size]

    # -- LLR / partial-sum recursions ---------------------------------------

    def load_channel_llrs(self, l: int, llrs) -> None:
        s0 = self.s_write(l, 0)
        s0[:] = np.asarray(llrs, dtype=np.float64)

    def calc_s(self, l: int, layer: int, phase: int, ops=None) -> np.ndarray:
        """Iteratively compute the layer's LLR vector for this phase.

        Starts at the shallowest layer whose value changed (set by the
        divisibility of phase) and runs one P stage if that layer's local
        phase is odd, then Q stages down to `layer`.
        """
        if layer == 0:
            return self.s_read(l, 0)
        d = min(_v2(phase) if phase else layer - 1, layer - 1)
        lam = layer - d
        s_prev = self.s_read(l, lam - 1)
        size = 1 << (self.m - lam)
        if (phase >> d) & 1:
            c_tilde = self.c_read(l, lam)[:size]
            s_new = self.s_write(l, lam)
            a = s_prev[:size]
            b = s_prev[size:2 * size]
            np.multiply(a, 1.0 - 2.0 * c_tilde, out=s_new)
            s_new += b
            if ops is not None:
                ops.add += size
            s_prev = s_new
            lam += 1
            size >>= 1
        while lam <= layer:
            s_new = self.s_write(l, lam)
            a = s_prev[:size]
            b = s_prev[size:2 * size]
            np.minimum(np.abs(a), np.abs(b), out=s_new)
            s_new *= np.where((a < 0) != (b < 0), -1.0, 1.0)
            if ops is not None:
                ops.cmp += size
            s_prev = s_new
            lam += 1
            size >>= 1
        return s_prev

    def update_c(self, l: int, layer: int, phase: int) -> None:
        """Fold the layer's completed odd-phase partial sums upward."""
        if phase % 2 == 0:
            raise BankContractError("update_c on an even phase")
        delta = _v2(phase + 1)
        base_layer = layer - delta
        base = self._c_view(self._get_w(l, base_layer))
        size = 1 << (self.m - layer)
        tpos = size * ((1 << delta) - 2)
        cpos = tpos + size
        lam = layer
        while lam > base_layer:
            cp = self.c_read(l, lam)
            np.bitwise_xor(cp[:size], base[cpos:cpos + size],
                           out=base[tpos:tpos + size])
            size <<= 1
            cpos = tpos
            tpos -= size
            lam -= 1

    def live_path_count(self) -> int:
        return self.max_paths - len(self.free_paths)

    def refcount_total(self) -> int:
        return sum(rc for rc in self.refcount if rc > 0)

    def mapped_count(self) -> int:
        return int((self.path_to_arr >= 0).sum())
