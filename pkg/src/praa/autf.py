"""Free group Z*F_k on x_0..x_k, its automorphisms, and the Nielsen group A_k.

Words are tuples of ``(index, exponent)`` letters with exponent +1 or -1.
An automorphism is the tuple of images of x_0, ..., x_k.  Elements of A_k
carry their inverse automorphism along, so inversion never has to solve
for an inverse from images alone.
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

Letter = tuple[int, int]
Word = tuple[Letter, ...]

MAX_RANK = 8

IDENTITY_WORD: Word = ()


class RankError(ValueError):
    pass


def check_rank(k: int, max_rank: int | None = None) -> None:
    limit = MAX_RANK if max_rank is None else max_rank
    if k < 1:
        raise RankError(f"rank must be positive, got {k}")
    if k > limit:
        raise RankError(f"rank {k} exceeds the configured bound {limit}")


def reduce(letters: Iterable[Sequence[int]], k: int | None = None) -> Word:
    """Freely reduce a raw letter sequence.

    If ``k`` is given, every index must lie in 0..k.
    """
    out: list[Letter] = []
    for letter in letters:
        i, e = int(letter[0]), int(letter[1])
        if e not in (1, -1):
            raise ValueError(f"exponent must be +1 or -1, got {e}")
        if i < 0 or (k is not None and i > k):
            raise IndexError(f"letter index {i} out of range 0..{k}")
        if out and out[-1][0] == i and out[-1][1] == -e:
            out.pop()
        else:
            out.append((i, e))
    return tuple(out)


def word_invert(a: Word) -> Word:
    return tuple((i, -e) for i, e in reversed(a))


def word_multiply(a: Word, b: Word) -> Word:
    # only the seam can cancel when both inputs are reduced
    n = 0
    la, lb = len(a), len(b)
    while n < la and n < lb and a[la - 1 - n][0] == b[n][0] and a[la - 1 - n][1] == -b[n][1]:
        n += 1
    return a[: la - n] + b[n:]


def word_power(letter_index: int, exponent: int) -> Word:
    return ((letter_index, 1 if exponent > 0 else -1),) * abs(exponent)


def word_str(w: Word) -> str:
    if not w:
        return "1"
    return "".join(f"x{i}" if e == 1 else f"x{i}^-1" for i, e in w)


@dataclass(frozen=True)
class Automorphism:
    """Endomorphism of the free group on x_0..x_k given by generator images."""

    images: tuple[Word, ...]

    @property
    def rank(self) -> int:
        return len(self.images) - 1

    @classmethod
    def identity(cls, k: int) -> Automorphism:
        return cls(tuple(((i, 1),) for i in range(k + 1)))

    def __call__(self, w: Word) -> Word:
        return apply(self, w)

    def __str__(self) -> str:
        return "(" + ", ".join(word_str(w) for w in self.images) + ")"


def apply(aut: Automorphism, w: Word) -> Word:
    images = aut.images
    k = len(images) - 1
    out: Word = ()
    for i, e in w:
        if i > k:
            raise RankError(f"letter x{i} outside rank {k}")
        img = images[i] if e == 1 else word_invert(images[i])
        out = word_multiply(out, img)
    return out


def compose(a: Automorphism, b: Automorphism) -> Automorphism:
    """Return a o b (apply b first)."""
    if a.rank != b.rank:
        raise RankError(f"rank mismatch: {a.rank} vs {b.rank}")
    return Automorphism(tuple(apply(a, w) for w in b.images))


def extend(aut: Automorphism, K: int) -> Automorphism:
    """View a rank-k automorphism at rank K >= k (new letters fixed)."""
    k = aut.rank
    if K < k:
        raise RankError(f"cannot restrict rank {k} to {K}")
    return Automorphism(aut.images + tuple(((i, 1),) for i in range(k + 1, K + 1)))


def relabel(aut: Automorphism, perm: Sequence[int]) -> Automorphism:
    """Conjugate by the letter permutation x_i -> x_perm[i]."""
    images: list[Word] = [()] * len(aut.images)
    for i, w in enumerate(aut.images):
        images[perm[i]] = tuple((perm[j], e) for j, e in w)
    return Automorphism(tuple(images))


# --- Nielsen generators -------------------------------------------------------


@dataclass(frozen=True, order=True)
class NielsenGen:
    """Transvection: ``L`` sends x_i to x_j^sign x_i, ``R`` sends x_i to x_i x_j^sign."""

    side: str
    i: int
    j: int
    sign: int = 1

    def __post_init__(self) -> None:
        if self.side not in ("L", "R"):
            raise ValueError(f"side must be 'L' or 'R', got {self.side!r}")
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        if self.i == self.j:
            raise ValueError("i == j is not a transvection")
        if self.i < 0 or self.j < 1:
            raise ValueError(f"indices out of range: i={self.i}, j={self.j}")

    @property
    def is_c(self) -> bool:
        return self.i == 0

    def inverse(self) -> NielsenGen:
        return NielsenGen(self.side, self.i, self.j, -self.sign)

    def check(self, k: int) -> None:
        if self.i > k or self.j > k:
            raise IndexError(f"{self} outside rank {k}")

    def automorphism(self, k: int) -> Automorphism:
        self.check(k)
        images = [((m, 1),) for m in range(k + 1)]
        xi, xj = (self.i, 1), (self.j, self.sign)
        images[self.i] = (xj, xi) if self.side == "L" else (xi, xj)
        return Automorphism(tuple(images))

    def to_list(self) -> list:
        return [self.side, self.i, self.j, self.sign]

    @classmethod
    def from_list(cls, q: Sequence) -> NielsenGen:
        side, i, j, sign = q
        return cls(str(side), int(i), int(j), int(sign))

    def __str__(self) -> str:
        return f"{self.side}{self.i}{self.j}{'+' if self.sign == 1 else '-'}"


def c_generators(k: int, mode: str = "A") -> list[NielsenGen]:
    sides = ("L", "R") if mode == "A" else ("L",)
    return [NielsenGen(side, 0, j, s) for side in sides for j in range(1, k + 1) for s in (1, -1)]


def n_generators(k: int) -> list[NielsenGen]:
    return [
        NielsenGen(side, i, j, s)
        for side in ("L", "R")
        for i in range(1, k + 1)
        for j in range(1, k + 1)
        if i != j
        for s in (1, -1)
    ]


def generators(k: int, mode: str = "A") -> list[NielsenGen]:
    """All generators of A_k (4k^2 of them), C-generators first.

    ``mode="LA"`` drops the right C-transvections R_0j.
    """
    if mode not in ("A", "LA"):
        raise ValueError(f"unknown mode {mode!r}")
    return c_generators(k, mode) + n_generators(k)


# --- elements of A_k ----------------------------------------------------------


def _reduce_witness(gens: Iterable[NielsenGen]) -> tuple[NielsenGen, ...]:
    out: list[NielsenGen] = []
    for g in gens:
        if out and out[-1] == g.inverse():
            out.pop()
        else:
            out.append(g)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class AkElement:
    """Element of A_k: an automorphism together with its inverse.

    Equality and hashing look at ``fwd`` only.  ``witness`` is a word in the
    Nielsen generators that evaluates to the element, when known.
    """

    fwd: Automorphism
    inv: Automorphism
    witness: tuple[NielsenGen, ...] | None = None

    @property
    def rank(self) -> int:
        return self.fwd.rank

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AkElement):
            return NotImplemented
        return self.fwd.images == other.fwd.images

    def __hash__(self) -> int:
        return hash(self.fwd.images)

    def __mul__(self, other: AkElement) -> AkElement:
        return ak_multiply(self, other)

    def __invert__(self) -> AkElement:
        return ak_inverse(self)

    def inverse(self) -> AkElement:
        return ak_inverse(self)

    @property
    def length(self) -> int | None:
        return None if self.witness is None else len(self.witness)

    def key(self) -> bytes:
        return ak_key(self)

    def is_identity(self) -> bool:
        return all(w == ((i, 1),) for i, w in enumerate(self.fwd.images))

    def __repr__(self) -> str:
        if self.witness is not None:
            return "AkElement(" + ("*".join(map(str, self.witness)) or "1") + ")"
        return f"AkElement({self.fwd})"


def ak_identity(k: int) -> AkElement:
    ident = Automorphism.identity(k)
    return AkElement(ident, ident, ())


def nielsen(gen: NielsenGen, k: int) -> AkElement:
    check_rank(k)
    return AkElement(gen.automorphism(k), gen.inverse().automorphism(k), (gen,))


def ak_multiply(a: AkElement, b: AkElement) -> AkElement:
    witness = None
    if a.witness is not None and b.witness is not None:
        witness = _reduce_witness(a.witness + b.witness)
    return AkElement(compose(a.fwd, b.fwd), compose(b.inv, a.inv), witness)


def ak_inverse(a: AkElement) -> AkElement:
    witness = None
    if a.witness is not None:
        witness = tuple(g.inverse() for g in reversed(a.witness))
    return AkElement(a.inv, a.fwd, witness)


def from_witness(gens: Iterable[NielsenGen], k: int) -> AkElement:
    out = ak_identity(k)
    for g in gens:
        out = ak_multiply(out, nielsen(g, k))
    return out


def ak_extend(a: AkElement, K: int) -> AkElement:
    return AkElement(extend(a.fwd, K), extend(a.inv, K), a.witness)


def ak_relabel(a: AkElement, perm: Sequence[int]) -> AkElement:
    """Conjugate by the index permutation ``perm`` (a list with perm[0] == 0)."""
    witness = None
    if a.witness is not None:
        witness = tuple(NielsenGen(g.side, perm[g.i], perm[g.j], g.sign) for g in a.witness)
    return AkElement(relabel(a.fwd, perm), relabel(a.inv, perm), witness)


def word_key(w: Word) -> bytes:
    return struct.pack("<I", len(w)) + b"".join(struct.pack("<Hb", i, e) for i, e in w)


def ak_key(a: AkElement) -> bytes:
    """Canonical byte string of an element.

    Layout (little-endian): u16 rank, then for each image of x_0..x_k a u32
    letter count followed by (u16 index, i8 exponent) per letter.
    """
    images = a.fwd.images
    return struct.pack("<H", len(images) - 1) + b"".join(word_key(w) for w in images)


# --- the flip/permute symmetry group ------------------------------------------


@dataclass(frozen=True)
class PhiElement:
    """The automorphism x_i -> x_{perm[i]}^{flips[perm[i]]} of Z*F_k.

    ``perm`` is a permutation of 0..k fixing 0.  In ``LA`` mode ``flips[0]``
    must be +1.
    """

    flips: tuple[int, ...]
    perm: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.flips) != len(self.perm):
            raise ValueError("flips and perm lengths differ")
        if sorted(self.perm) != list(range(len(self.perm))) or self.perm[0] != 0:
            raise ValueError(f"perm must be a permutation fixing 0: {self.perm}")
        if any(f not in (1, -1) for f in self.flips):
            raise ValueError("flips must be +1 or -1")

    @property
    def rank(self) -> int:
        return len(self.perm) - 1

    @classmethod
    def identity(cls, k: int) -> PhiElement:
        return cls((1,) * (k + 1), tuple(range(k + 1)))

    def automorphism(self) -> Automorphism:
        images: list[Word] = [()] * len(self.perm)
        for i, p in enumerate(self.perm):
            images[i] = ((p, self.flips[p]),)
        return Automorphism(tuple(images))

    def inverse_automorphism(self) -> Automorphism:
        # phi(x_i) = x_p^f  =>  phi^-1(x_p) = x_i^f
        images: list[Word] = [()] * len(self.perm)
        for i, p in enumerate(self.perm):
            images[p] = ((i, self.flips[p]),)
        return Automorphism(tuple(images))

    def __mul__(self, other: PhiElement) -> PhiElement:
        """Composition self o other as automorphisms."""
        k = self.rank
        if other.rank != k:
            raise RankError("rank mismatch")
        # other: x_i -> x_q^{b_q}, q = other.perm[i]; self: x_q -> x_p^{a_p}, p = self.perm[q]
        flips = [1] * (k + 1)
        perm = [0] * (k + 1)
        for i in range(k + 1):
            q = other.perm[i]
            p = self.perm[q]
            perm[i] = p
            flips[p] = self.flips[p] * other.flips[q]
        return PhiElement(tuple(flips), tuple(perm))


def phi_elements(k: int, mode: str = "A") -> Iterable[PhiElement]:
    """Enumerate the whole group Phi (2^(k+1) k! elements, 2^k k! in LA mode)."""
    first = (1, -1) if mode == "A" else (1,)
    for perm in itertools.permutations(range(1, k + 1)):
        for f0 in first:
            for rest in itertools.product((1, -1), repeat=k):
                yield PhiElement((f0,) + rest, (0,) + perm)


def _check_phi(phi: PhiElement, k: int, mode: str) -> None:
    if phi.rank != k:
        raise RankError(f"Phi element of rank {phi.rank} acting on rank {k}")
    if mode == "LA" and phi.flips[0] != 1:
        raise ValueError("LA mode does not allow flipping x_0")


def phi_act_gen(phi: PhiElement, gen: NielsenGen, k: int | None = None, mode: str = "A") -> NielsenGen:
    """Image of a generator under conjugation by ``phi``.

    T_ij^e goes to T_pq^(e a_p a_q) with p, q the images of i, j, and the
    side swaps L <-> R exactly when x_p is inverted (a_p = -1).
    """
    k = phi.rank if k is None else k
    _check_phi(phi, k, mode)
    gen.check(k)
    p, q = phi.perm[gen.i], phi.perm[gen.j]
    ap, aq = phi.flips[p], phi.flips[q]
    side = gen.side
    if ap == -1 and not (mode == "LA" and gen.i == 0):
        side = "R" if side == "L" else "L"
    return NielsenGen(side, p, q, gen.sign * ap * aq)


def phi_act(phi: PhiElement, a: AkElement, mode: str = "A") -> AkElement:
    _check_phi(phi, a.rank, mode)
    f, finv = phi.automorphism(), phi.inverse_automorphism()
    witness = None
    if a.witness is not None:
        witness = tuple(phi_act_gen(phi, g, a.rank, mode) for g in a.witness)
    return AkElement(compose(f, compose(a.fwd, finv)), compose(f, compose(a.inv, finv)), witness)


# --- semidirect decomposition -------------------------------------------------


class NotInKernelError(ValueError):
    pass


def in_kernel(a: AkElement) -> bool:
    return all(w == ((i, 1),) for i, w in enumerate(a.fwd.images) if i > 0)


def kernel_decompose(a: AkElement) -> tuple[Word, Word]:
    """Split the image of x_0 as l x_0 r for an element fixing x_1..x_k."""
    if not in_kernel(a):
        raise NotInKernelError("element does not fix x_1..x_k pointwise")
    img = a.fwd.images[0]
    pos = [n for n, (i, _) in enumerate(img) if i == 0]
    if len(pos) != 1 or img[pos[0]][1] != 1:
        raise NotInKernelError(f"x_0 image {word_str(img)} is not of the form l x_0 r")
    n = pos[0]
    return img[:n], img[n + 1 :]


def kernel_coordinates(a: AkElement) -> tuple[Word, Word]:
    """The isomorphism ker(p) -> F_k x F_k, a -> (l^-1, r)."""
    l, r = kernel_decompose(a)
    return word_invert(l), r


def retract(a: AkElement) -> tuple[Word, ...]:
    """Restriction to <x_1..x_k>: the retraction onto SAut(F_k), as images of x_1..x_k."""
    return a.fwd.images[1:]
