import math
from collections import Counter

import numpy as np
import pytest
import scipy.stats

from praa.autf import NielsenGen
from praa.blackbox import is_generating, make_cyclic, make_permutation, make_vector, pad_tuple
from praa.walker import (
    PRA,
    PRAA,
    RngStream,
    WalkState,
    apply_move,
    lazy_step,
    mixing_bound,
    mixing_prefactor,
    move_labels,
    pra_walk,
    praa_sample,
    praa_sample_batch,
)


def L(i, j, s=1):
    return NielsenGen("L", i, j, s)


def test_move_examples_z7():
    z7 = make_cyclic(7)
    s = WalkState(0, (1, 3))
    assert apply_move(z7, s, L(1, 2)) == WalkState(0, (5, 3))
    assert apply_move(z7, s, L(0, 1)) == WalkState(6, (1, 3))


def test_move_then_inverse():
    h = make_permutation(4, [[[1, 2]], [[1, 2, 3, 4]]])
    s = WalkState(h.identity(), tuple(h.generators) + (h.identity(),))
    for m in move_labels(3):
        assert apply_move(h, apply_move(h, s, m), m.inverse()) == s


def test_label_counts():
    assert len(move_labels(4, PRAA)) == 64
    assert len(move_labels(4, PRA)) == 48
    with pytest.raises(ValueError):
        move_labels(1, PRA)


class CountingHandle:
    """Wraps a handle and counts multiply / invert calls."""

    def __init__(self, inner):
        self.inner = inner
        self.mults = self.invs = 0

    def identity(self):
        return self.inner.identity()

    def multiply(self, a, b):
        self.mults += 1
        return self.inner.multiply(a, b)

    def invert(self, a):
        self.invs += 1
        return self.inner.invert(a)

    def encode(self, a):
        return self.inner.encode(a)


def test_one_multiplication_per_move():
    h = CountingHandle(make_permutation(3, [[2, 1, 3], [2, 3, 1]]))
    s = WalkState(h.identity(), pad_tuple(h.inner, h.inner.generators, 4))
    rng = RngStream(3, 0)
    labels = move_labels(4)
    for _ in range(2000):
        m0, i0 = h.mults, h.invs
        s2 = lazy_step(h, s, rng, PRAA, labels)
        moved = h.mults - m0
        assert moved in (0, 1) and h.invs - i0 <= moved
        assert len(s2.elements()) == 5
        s = s2


def test_rng_reproducible():
    a = [RngStream(42, 7).next_raw() for _ in range(1)]
    r1, r2 = RngStream(42, 7), RngStream(42, 7)
    assert [r1.next_raw() for _ in range(10)] == [r2.next_raw() for _ in range(10)]
    assert a[0] != RngStream(42, 8).next_raw()
    assert r1.counter == 10


def test_stay_probability():
    rng = RngStream(11, 0)
    trials = 10**6
    stays = sum(rng.lazy_draw(36) is None for _ in range(trials))
    assert abs(stays / trials - 0.5) < 0.002


def test_label_frequencies_uniform():
    rng = RngStream(12, 0)
    n = 36
    counts = Counter()
    while sum(counts.values()) < 200000:
        d = rng.lazy_draw(n)
        if d is not None:
            counts[d] += 1
    obs = [counts[c] for c in range(n)]
    assert scipy.stats.chisquare(obs).pvalue > 1e-3


def test_sample_t0_and_determinism():
    h = make_permutation(3, [[2, 1, 3], [2, 3, 1]])
    S0 = pad_tuple(h, h.generators, 5)
    assert praa_sample(h, S0, 0, RngStream(1, 0)) == h.identity()
    a = praa_sample(h, S0, 500, RngStream(9, 3))
    b = praa_sample(h, S0, 500, RngStream(9, 3))
    assert a == b


def test_batch_matches_scalar():
    h = make_permutation(4, [[[1, 2]], [[1, 2, 3, 4]]])
    S0 = pad_tuple(h, h.generators, 3)
    t = 333
    batch = praa_sample_batch(h, S0, t, 5, 40, first_stream=10, chunk=7, time_block=50)
    scalar = [praa_sample(h, S0, t, RngStream(5, 10 + n)) for n in range(40)]
    assert batch == scalar
    assert praa_sample_batch(h, S0, t, 5, 40, first_stream=10, workers=3, chunk=9) == scalar


def test_generation_preserved():
    h = make_vector(4, 2)
    S0 = ((1, 0), (0, 1))
    rng = RngStream(0, 0)
    s = WalkState(h.identity(), S0)
    labels = move_labels(2)
    for n in range(10000):
        s = lazy_step(h, s, rng, PRAA, labels)
        if n % 500 == 0:
            assert is_generating(h, s.tuple)
    assert is_generating(h, s.tuple)


def test_pra_reaches_only_base_vectors():
    h = make_vector(4, 2)
    firsts = Counter()
    for stream in range(300):
        tup = pra_walk(h, ((1, 0), (0, 1)), 200, RngStream(4, stream))
        firsts[tup[0]] += 1
    assert all(math.gcd(math.gcd(*v), 4) == 1 for v in firsts)
    assert pra_walk(h, ((1, 0), (0, 1)), 0, RngStream(4, 0)) == ((1, 0), (0, 1))


def test_mixing_bound_values():
    assert mixing_bound(6, 2, math.exp(-1)) == 4816
    assert mixing_bound(6, 2, 0.3678794) == 4816
    assert math.ceil(288 / 0.35 * (7 * math.log(2) + 1)) == 4816
    assert mixing_bound(6, 6, 0.01) == 14110
    assert mixing_prefactor(6) == pytest.approx(8 * 36 / 0.35)
    assert mixing_bound(5, log_order=math.log(2)) == math.ceil(200 / 1.41 * (6 * math.log(2) + 1))
    with pytest.raises(ValueError):
        mixing_bound(4, 2)
    with pytest.raises(ValueError):
        mixing_bound(6, 2, 1.5)


def test_halving_epsilon():
    k = 7
    a = mixing_prefactor(k) * (8 * math.log(10) + math.log(1 / 0.1))
    b = mixing_prefactor(k) * (8 * math.log(10) + math.log(1 / 0.05))
    assert b - a == pytest.approx(mixing_prefactor(k) * math.log(2))


def test_z2_samples_close_to_uniform():
    h = make_cyclic(2)
    S0 = pad_tuple(h, [1], 6)
    t = mixing_bound(6, 2, 0.01)
    xs = praa_sample_batch(h, S0, t, 2024, 20000)
    freq = np.bincount(xs, minlength=2) / len(xs)
    assert 0.5 * np.abs(freq - 0.5).sum() < 0.02
