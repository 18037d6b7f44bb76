"""Product replacement walks on generating tuples with an accumulator.

A state is ``(g_0 | g_1, ..., g_k)``.  A move is a Nielsen generator ``s``
acting by ``s.e = e o s^-1``, so ``L_ij^e`` replaces ``g_i`` by
``g_j^-e g_i`` and ``R_ij^e`` replaces it by ``g_i g_j^-e``; for ``i = 0``
the accumulator is updated.

Randomness comes from :class:`RngStream`: Philox-4x64-10 keyed by
``(seed, stream)``.  Each lazy step consumes exactly one raw 64-bit word
``w``: the walk moves iff the top bit is set, and the move label is
``(w & (2**63 - 1)) % n_labels`` (bias below ``n_labels / 2**63``).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .autf import NielsenGen, c_generators, n_generators
from .blackbox import Element, GroupHandle

Move = NielsenGen

PRAA = "PRAA"
PRA = "PRA"

_LOW63 = (1 << 63) - 1

# batch sampling builds multiplication tables up to this group order
TABLE_ORDER_LIMIT = 4096


@dataclass(frozen=True)
class WalkState:
    accumulator: Element
    tuple: tuple

    @property
    def k(self) -> int:
        return len(self.tuple)

    def elements(self) -> tuple:
        return (self.accumulator,) + self.tuple


def initial_state(handle: GroupHandle, gens: Sequence[Element]) -> WalkState:
    return WalkState(handle.identity(), tuple(gens))


def move_labels(k: int, mode: str = PRAA) -> list[Move]:
    """The move labels in sampling order: C-moves then N-moves for PRAA."""
    if mode == PRAA:
        return c_generators(k) + n_generators(k)
    if mode == PRA:
        if k < 2:
            raise ValueError("PRA needs k >= 2 (there are no N-moves for k = 1)")
        return n_generators(k)
    raise ValueError(f"unknown walk mode {mode!r}")


class RngStream:
    """Counter-based stream: Philox-4x64-10 with key ``(seed, stream)``."""

    _BLOCK = 1024

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & ((1 << 64) - 1)
        self.stream = int(stream) & ((1 << 64) - 1)
        self._bitgen = self._philox(self.seed, self.stream)
        self._buf = np.empty(0, dtype=np.uint64)
        self._pos = 0
        self.counter = 0

    def next_raw(self) -> int:
        if self._pos == len(self._buf):
            self._buf = self._bitgen.random_raw(self._BLOCK)
            self._pos = 0
        w = int(self._buf[self._pos])
        self._pos += 1
        self.counter += 1
        return w

    def lazy_draw(self, n_labels: int) -> int | None:
        """None for "stay put" (probability exactly 1/2), else a label index."""
        w = self.next_raw()
        if w >> 63 == 0:
            return None
        return (w & _LOW63) % n_labels

    @staticmethod
    def _philox(seed: int, stream: int) -> np.random.Philox:
        key = np.array([int(seed) & ((1 << 64) - 1), int(stream) & ((1 << 64) - 1)], dtype=np.uint64)
        return np.random.Philox(key=key)


def apply_move(handle: GroupHandle, s: WalkState, m: Move) -> WalkState:
    k = s.k
    if m.i > k or m.j > k:
        raise IndexError(f"move {m} outside rank {k}")
    g = s.tuple[m.j - 1]
    if m.sign == 1:
        g = handle.invert(g)
    cur = s.accumulator if m.i == 0 else s.tuple[m.i - 1]
    new = handle.multiply(g, cur) if m.side == "L" else handle.multiply(cur, g)
    if m.i == 0:
        return WalkState(new, s.tuple)
    tup = list(s.tuple)
    tup[m.i - 1] = new
    return WalkState(s.accumulator, tuple(tup))


def lazy_step(handle: GroupHandle, s: WalkState, rng: RngStream, mode: str = PRAA,
              labels: Sequence[Move] | None = None) -> WalkState:
    if labels is None:
        labels = move_labels(s.k, mode)
    idx = rng.lazy_draw(len(labels))
    if idx is None:
        return s
    return apply_move(handle, s, labels[idx])


def praa_sample(handle: GroupHandle, S0: Sequence[Element], t: int, rng: RngStream) -> Element:
    """Run ``t`` lazy steps from ``(1 | S0)`` and return the accumulator."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    s = initial_state(handle, S0)
    labels = move_labels(s.k, PRAA)
    for _ in range(t):
        s = lazy_step(handle, s, rng, PRAA, labels)
    return s.accumulator


def pra_walk(handle: GroupHandle, S0: Sequence[Element], t: int, rng: RngStream) -> tuple:
    """The classical product replacement walk: ``t`` lazy N-move steps from ``S0``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    s = initial_state(handle, S0)
    labels = move_labels(s.k, PRA)
    for _ in range(t):
        s = lazy_step(handle, s, rng, PRA, labels)
    return s.tuple


# --- batched sampling over a multiplication table -----------------------------


class _Table:
    def __init__(self, handle: GroupHandle, elements: list):
        self.elements = elements
        index = {x: n for n, x in enumerate(elements)}
        n = len(elements)
        self.index = index
        self.mul = np.empty((n, n), dtype=np.int32)
        for a, x in enumerate(elements):
            self.mul[a] = [index[handle.multiply(x, y)] for y in elements]
        self.inv = np.array([index[handle.invert(x)] for x in elements], dtype=np.int32)


def _label_arrays(labels: Sequence[Move]):
    left = np.array([m.side == "L" for m in labels])
    i = np.array([m.i for m in labels], dtype=np.int64)
    j = np.array([m.j for m in labels], dtype=np.int64)
    inv_j = np.array([m.sign == 1 for m in labels])
    return left, i, j, inv_j


@numba.njit(cache=True, nogil=True)
def _walk_kernel(state, raws, li, lj, left, inv_j, mul, inv):
    # state: (walks, k+1) element indices; raws: (walks, steps) raw words
    n_labels = np.uint64(li.shape[0])
    low = np.uint64(_LOW63)
    top = np.uint64(63)
    for w in range(state.shape[0]):
        row = state[w]
        for s in range(raws.shape[1]):
            x = raws[w, s]
            if (x >> top) == np.uint64(0):
                continue
            lab = np.int64((x & low) % n_labels)
            i = li[lab]
            g = row[lj[lab]]
            if inv_j[lab]:
                g = inv[g]
            if left[lab]:
                row[i] = mul[g, row[i]]
            else:
                row[i] = mul[row[i], g]


def _batch_walk(table: _Table, state: np.ndarray, raws: np.ndarray, labels: Sequence[Move]) -> np.ndarray:
    """Advance walks independently; ``state`` is (walks, k+1), ``raws`` is (walks, steps)."""
    left, li, lj, linv = _label_arrays(labels)
    state = np.ascontiguousarray(state, dtype=np.int64)
    _walk_kernel(state, np.ascontiguousarray(raws), li, lj, left, linv,
                 table.mul.astype(np.int64), table.inv.astype(np.int64))
    return state


def praa_sample_batch(handle: GroupHandle, S0: Sequence[Element], t: int, seed: int, count: int,
                      first_stream: int = 0, chunk: int = 4096, workers: int = 1,
                      time_block: int = 4096) -> list:
    """``count`` independent PRAA samples; sample ``n`` uses stream ``first_stream + n``.

    The result equals ``[praa_sample(handle, S0, t, RngStream(seed, first_stream + n))]``
    regardless of ``chunk`` and ``workers``.
    """
    elems = handle.enumerate()
    if elems is None or len(elems) > TABLE_ORDER_LIMIT:
        return [praa_sample(handle, S0, t, RngStream(seed, first_stream + n)) for n in range(count)]
    table = _Table(handle, elems)
    k = len(S0)
    labels = move_labels(k, PRAA)
    start_row = [table.index[handle.identity()]] + [table.index[g] for g in S0]

    def run(lo: int) -> list:
        hi = min(count, lo + chunk)
        streams = [RngStream._philox(seed, first_stream + n) for n in range(lo, hi)]
        state = np.tile(np.array(start_row, dtype=np.int32), (hi - lo, 1))
        for t0 in range(0, t, time_block):
            n = min(time_block, t - t0)
            raws = np.stack([bitgen.random_raw(n) for bitgen in streams])
            state = _batch_walk(table, state, raws, labels)
        return [table.elements[x] for x in state[:, 0]]

    starts = list(range(0, count, chunk))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(lo) for lo in starts]
    return [x for part in parts for x in part]


# --- mixing time --------------------------------------------------------------


def mixing_prefactor(k: int) -> float:
    """Steps per e-fold of TV decay: 8k^2 / (0.35 (k - 5)), or 8k^2 / 1.41 at k = 5."""
    if k < 5:
        raise ValueError(f"the mixing bound needs k >= 5, got k={k}")
    if k == 5:
        return 8 * k * k / 1.41
    return 8 * k * k / (0.35 * (k - 5))


def mixing_bound(k: int, order: int | None = None, epsilon: float = math.exp(-1), *,
                 log_order: float | None = None) -> int:
    """Number of lazy PRAA steps after which the output is epsilon-close to uniform.

    ``ceil(8k^2 / (0.35 (k-5)) * ((k+1) log|G| + log(1/epsilon)))`` for k > 5
    and ``ceil(8k^2 / 1.41 * (...))`` for k = 5; natural logarithms.  Give
    ``log_order`` instead of ``order`` when |G| is astronomically large.
    """
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if log_order is None:
        if order is None or order < 1:
            raise ValueError("need a positive group order or log_order")
        log_order = math.log(order)
    return math.ceil(mixing_prefactor(k) * ((k + 1) * log_order + math.log(1 / epsilon)))
