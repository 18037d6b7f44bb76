"""Exact rational group rings, Laplacians of A_k and sum-of-squares certificates.

Ring elements are finitely supported maps from group elements to
``Fraction``.  Any group element type works as long as it supports ``*``,
``inverse()``, hashing, ``key()`` (a canonical byte string used for
ordering) and ``length`` (a word length upper bound, or None).  Elements of
A_k from :mod:`praa.autf` qualify, and so do :class:`ToyElement` values
from the finite-group mode below.
"""

from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Hashable, Iterable, Sequence

import numpy as np

from .autf import (
    AkElement,
    NielsenGen,
    ak_extend,
    ak_identity,
    ak_relabel,
    from_witness,
    nielsen,
)
from .blackbox import GroupHandle


class RingElement:
    """Element of Q[G] with exact rational coefficients; never stores zeros."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict | None = None):
        self.terms: dict = {}
        if terms:
            for g, c in terms.items():
                _accumulate(self.terms, g, Fraction(c))

    @classmethod
    def _raw(cls, terms: dict) -> RingElement:
        out = cls.__new__(cls)
        out.terms = terms
        return out

    @classmethod
    def basis(cls, g, coef=1) -> RingElement:
        return cls({g: coef})

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RingElement):
            return NotImplemented
        return self.terms == other.terms

    def coefficient(self, g) -> Fraction:
        return self.terms.get(g, Fraction(0))

    def items(self) -> list[tuple[Any, Fraction]]:
        """Terms in canonical order (by element key)."""
        return sorted(self.terms.items(), key=lambda kv: kv[0].key())

    def __add__(self, other: RingElement) -> RingElement:
        terms = dict(self.terms)
        for g, c in other.terms.items():
            _accumulate(terms, g, c)
        return RingElement._raw(terms)

    def __neg__(self) -> RingElement:
        return RingElement._raw({g: -c for g, c in self.terms.items()})

    def __sub__(self, other: RingElement) -> RingElement:
        return self + (-other)

    def scale(self, c) -> RingElement:
        c = Fraction(c)
        if c == 0:
            return RingElement()
        return RingElement._raw({g: c * x for g, x in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, RingElement):
            return multiply(self, other)
        return self.scale(other)

    def __rmul__(self, c):
        return self.scale(c)

    def star(self) -> RingElement:
        return RingElement._raw({g.inverse(): c for g, c in self.terms.items()})

    def augmentation(self) -> Fraction:
        return sum(self.terms.values(), Fraction(0))

    def l1_norm(self) -> Fraction:
        return sum((abs(c) for c in self.terms.values()), Fraction(0))

    def is_star_invariant(self) -> bool:
        return self == self.star()

    def support_wordlength(self) -> int:
        """Largest witness length over the support (an upper bound on word length)."""
        lengths = [g.length for g in self.terms]
        if any(x is None for x in lengths):
            raise ValueError("some support element has no recorded word length")
        return max(lengths, default=0)

    def __repr__(self) -> str:
        if not self.terms:
            return "RingElement(0)"
        parts = [f"{c}*{g!r}" for g, c in self.items()[:6]]
        more = "" if len(self.terms) <= 6 else f" + ... ({len(self.terms)} terms)"
        return "RingElement(" + " + ".join(parts) + more + ")"


def _accumulate(terms: dict, g, c: Fraction) -> None:
    if not c:
        return
    new = terms.get(g, 0) + c
    if new:
        terms[g] = new
    else:
        del terms[g]


def multiply(a: RingElement, b: RingElement) -> RingElement:
    terms: dict = {}
    for g, x in a.terms.items():
        for h, y in b.terms.items():
            _accumulate(terms, g * h, x * y)
    return RingElement._raw(terms)


def ring_sum(elements: Iterable[RingElement]) -> RingElement:
    terms: dict = {}
    for e in elements:
        for g, c in e.terms.items():
            _accumulate(terms, g, c)
    return RingElement._raw(terms)


def anticommutator(a: RingElement, b: RingElement) -> RingElement:
    return ring_sum([a * b, b * a])


def one(identity) -> RingElement:
    return RingElement.basis(identity)


def hermitian_square_of_difference(identity, g) -> RingElement:
    """(1 - g)(1 - g)^*."""
    x = one(identity) - RingElement.basis(g)
    return x * x.star()


# --- Laplacians of A_k -----------------------------------------------------------


@functools.lru_cache(maxsize=None)
def partial_laplacian(i: int, j: int, k: int, mode: str = "A") -> RingElement:
    """Delta_ij = (1 - L_ij)(1 - L_ij)^* + (1 - R_ij)(1 - R_ij)^*, with Delta_ii = 0.

    In ``LA`` mode Delta_0j keeps only the L term.
    """
    if not (0 <= i <= k and 1 <= j <= k):
        raise IndexError(f"partial Laplacian index ({i}, {j}) out of range for k={k}")
    if i == j:
        return RingElement()
    e = ak_identity(k)
    sides = ("L",) if (mode == "LA" and i == 0) else ("L", "R")
    return ring_sum(hermitian_square_of_difference(e, nielsen(NielsenGen(s, i, j), k)) for s in sides)


def _dd(i: int, j: int, k: int, mode: str) -> RingElement:
    return partial_laplacian(i, j, k, mode)


def laplacian_C(k: int, mode: str = "A") -> RingElement:
    return ring_sum(_dd(0, s, k, mode) for s in range(1, k + 1))


def laplacian_N(k: int, mode: str = "A") -> RingElement:
    return ring_sum(_dd(i, j, k, mode) for i in range(1, k + 1) for j in range(1, k + 1))


def laplacian(k: int, mode: str = "A") -> RingElement:
    if k < 2:
        raise ValueError("Laplacian of A_k needs k >= 2")
    return laplacian_C(k, mode) + laplacian_N(k, mode)


def _distinct(n: int, k: int):
    return (t for t in itertools.permutations(range(1, k + 1), n))


TERM_NAMES = ("SqC", "AdjC", "AdjCN", "OppCN", "SqN", "AdjN", "OppN")


@functools.lru_cache(maxsize=None)
def decomposition_term(name: str, k: int, mode: str = "A") -> RingElement:
    """One of the seven pieces of Delta_k^2 (indices range over 1..k)."""
    d = lambda i, j: _dd(i, j, k, mode)  # noqa: E731
    idx = range(1, k + 1)
    if name == "SqC":
        return ring_sum(d(0, s) * d(0, s) for s in idx)
    if name == "AdjC":
        return ring_sum(d(0, s) * d(0, t) for s, t in _distinct(2, k))
    if name == "AdjCN":
        return ring_sum(anticommutator(d(0, i) + d(0, j), d(i, j)) for i, j in _distinct(2, k))
    if name == "OppCN":
        return ring_sum(anticommutator(d(0, s), d(i, j)) for s, i, j in _distinct(3, k))
    if name == "SqN":
        sq = ring_sum((d(i, j) + d(j, i)) * (d(i, j) + d(j, i)) for i, j in _distinct(2, k))
        return sq.scale(Fraction(1, 2))
    if name == "AdjN":
        return ring_sum(d(i, j) * ring_sum([d(i, l), d(l, i), d(j, l), d(l, j)]) for i, j, l in _distinct(3, k))
    if name == "OppN":
        return ring_sum(d(i, j) * d(l, m) for i, j, l, m in _distinct(4, k))
    raise ValueError(f"unknown decomposition term {name!r}")


def decomposition_identities(k: int, mode: str = "A") -> dict[str, bool]:
    """Exact checks of the splitting of Delta_k^2 into its seven pieces."""
    dc, dn = laplacian_C(k, mode), laplacian_N(k, mode)
    t = {name: decomposition_term(name, k, mode) for name in TERM_NAMES}
    full = dc + dn
    return {
        "(Delta^C)^2 = SqC + AdjC": dc * dc == t["SqC"] + t["AdjC"],
        "{Delta^C, Delta^N} = AdjCN + OppCN": anticommutator(dc, dn) == t["AdjCN"] + t["OppCN"],
        "(Delta^N)^2 = SqN + AdjN + OppN": dn * dn == ring_sum([t["SqN"], t["AdjN"], t["OppN"]]),
        "Delta^2 = sum of seven terms": full * full == ring_sum(t.values()),
    }


# --- symmetrization --------------------------------------------------------------

SYMMETRIZATION_BUDGET = 6


def symmetrize(xi: RingElement, k: int, K: int, budget: int = SYMMETRIZATION_BUDGET) -> RingElement:
    """Sum of the conjugates of ``xi`` (viewed in A_K) by all permutations of 1..K."""
    if K < k:
        raise ValueError(f"cannot symmetrize from rank {k} down to {K}")
    if K > budget:
        raise RuntimeError(f"K = {K} exceeds the symmetrization budget {budget} ({math.factorial(K)} permutations)")
    lifted = [(ak_extend(g, K), c) for g, c in xi.terms.items()]
    terms: dict = {}
    for perm in itertools.permutations(range(1, K + 1)):
        p = (0,) + perm
        for g, c in lifted:
            _accumulate(terms, ak_relabel(g, p), c)
    return RingElement._raw(terms)


def _ff(n: int) -> int | None:
    return math.factorial(n) if n >= 0 else None


def symmetrization_coefficient(name: str, k: int, K: int) -> int | None:
    """The scalar c with S(term_k) = c * term_K; None where a factorial argument is negative."""
    table = {
        "DeltaC": (K - 1, [k]),
        "DeltaN": (K - 2, [k - 1, k]),
        "AdjC": (K - 2, [k - 1, k]),
        "AdjCN": (K - 2, [k - 1, k]),
        "OppCN": (K - 3, [k - 2, k - 1, k]),
        "SqN": (K - 2, [k - 1, k]),
        "AdjN": (K - 3, [k - 2, k - 1, k]),
        "OppN": (K - 4, [k - 3, k - 2, k - 1, k]),
    }
    fact_arg, factors = table[name]
    f = _ff(fact_arg)
    if f is None:
        return None
    return f * math.prod(factors)


SYMMETRIZED_NAMES = ("DeltaC", "DeltaN", "AdjC", "AdjCN", "OppCN", "SqN", "AdjN", "OppN")


def _named(name: str, k: int) -> RingElement:
    if name == "DeltaC":
        return laplacian_C(k)
    if name == "DeltaN":
        return laplacian_N(k)
    return decomposition_term(name, k)


def symmetrization_identities(k: int, K: int) -> dict[str, bool]:
    """Check S(term_k) = c(k, K) term_K exactly for the eight scaling formulas.

    When term_k is the zero element (empty index set) the identity reads 0 = 0.
    """
    out = {}
    for name in SYMMETRIZED_NAMES:
        lhs = symmetrize(_named(name, k), k, K)
        if not _named(name, k):
            out[name] = not lhs
            continue
        c = symmetrization_coefficient(name, k, K)
        out[name] = c is not None and lhs == _named(name, K).scale(c)
    return out


# --- targets ---------------------------------------------------------------------

LAMBDA_5 = Fraction(141, 100)


def induction_element(k: int, mode: str = "A") -> RingElement:
    """AdjC + AdjCN + OppCN + (Delta^N)^2 in Q[A_k]."""
    dn = laplacian_N(k, mode)
    return ring_sum([decomposition_term("AdjC", k, mode), decomposition_term("AdjCN", k, mode),
                     decomposition_term("OppCN", k, mode), dn * dn])


def induction_target(k: int = 5, mode: str = "A") -> RingElement:
    """AdjC + AdjCN + OppCN + (Delta^N)^2 - 1.41 Delta at k = 5."""
    if k != 5:
        raise ValueError(f"the induction target is defined for k = 5 only, got {k}")
    return induction_element(k, mode) - laplacian(k, mode).scale(LAMBDA_5)


def named_target(name: str, k: int, mode: str = "A") -> RingElement:
    if name == "delta_squared":
        d = laplacian(k, mode)
        return d * d
    if name == "induction_element":
        return induction_element(k, mode)
    raise ValueError(f"unknown certificate target {name!r}")


# --- sum-of-squares certificates ---------------------------------------------------


def _to_fraction_matrix(Q) -> list[list[Fraction]]:
    return [[Fraction(x) for x in row] for row in Q]


def gram(Q: Sequence[Sequence]) -> list[list[Fraction]]:
    """Q^T Q exactly, via integer arithmetic over a common denominator."""
    Qf = _to_fraction_matrix(Q)
    if not Qf:
        return []
    den = math.lcm(*(x.denominator for row in Qf for x in row)) if any(Qf) else 1
    Qi = np.array([[x.numerator * (den // x.denominator) for x in row] for row in Qf], dtype=object)
    M = Qi.T.dot(Qi)
    d2 = den * den
    return [[Fraction(int(x), d2) for x in row] for row in M]


def sos_eval(E: Sequence, Q: Sequence[Sequence], includes_identity: bool = False) -> RingElement:
    """x^* Q^T Q x with x = (1 - g_1, ..., 1 - g_m) and E = (1, g_1, ..., g_m).

    With ``includes_identity`` the matrix is indexed by all of E (its identity
    row and column multiply 1 - 1 = 0 and drop out).
    """
    m = len(E) - 1
    n = len(Q)
    if any(len(row) != n for row in Q):
        raise ValueError("Q must be square")
    expected = m + 1 if includes_identity else m
    if n != expected:
        raise ValueError(f"Q is {n}x{n}, expected {expected}x{expected} for |E| = {len(E)}")
    M = gram(Q)
    if includes_identity:
        M = [row[1:] for row in M[1:]]
    basis = list(E[1:])
    e = E[0]
    terms: dict = {}
    total = Fraction(0)
    for a, gi in enumerate(basis):
        gi_inv = gi.inverse()
        row = M[a]
        for b, gj in enumerate(basis):
            c = row[b]
            if not c:
                continue
            # (1 - g_i)^* (1 - g_j) = 1 - g_j - g_i^-1 + g_i^-1 g_j
            total += c
            _accumulate(terms, gj, -c)
            _accumulate(terms, gi_inv, -c)
            _accumulate(terms, gi_inv * gj, c)
    _accumulate(terms, e, total)
    return RingElement._raw(terms)


def residual(xi: RingElement, lambda0, Q, E: Sequence, delta: RingElement,
             includes_identity: bool = False) -> RingElement:
    """r = xi - lambda0 Delta - x^* Q^T Q x."""
    return ring_sum([xi, delta.scale(-Fraction(lambda0)), -sos_eval(E, Q, includes_identity)])


@dataclass
class CertificationResult:
    success: bool
    lam: Fraction
    lambda0: Fraction
    residual_l1: Fraction
    wordlength: int
    correction: Fraction

    def summary(self) -> dict:
        return {
            "certified": self.success,
            "lambda": str(self.lam),
            "lambda_float": float(self.lam),
            "lambda0": str(self.lambda0),
            "residual_l1": str(self.residual_l1),
            "residual_l1_float": float(self.residual_l1),
            "wordlength_bound": self.wordlength,
            "correction": float(self.correction),
        }


def certify_element(xi: RingElement, delta: RingElement, lambda0, Q, E: Sequence,
                    includes_identity: bool = False) -> CertificationResult:
    """Certify xi - lam Delta >= 0 with lam = lambda0 - m^2 |r|_1.

    ``m`` bounds the word length over the support of the residual ``r``.
    Fails (without raising) when lam <= 0.
    """
    if not xi.is_star_invariant():
        raise ValueError("target is not star-invariant")
    if xi.augmentation() != 0:
        raise ValueError("target is not in the augmentation ideal")
    lambda0 = Fraction(lambda0)
    r = residual(xi, lambda0, Q, E, delta, includes_identity)
    m = r.support_wordlength()
    norm = r.l1_norm()
    correction = m * m * norm
    lam = lambda0 - correction
    return CertificationResult(lam > 0, lam, lambda0, norm, m, correction)


@dataclass
class CertificateInput:
    rank: int
    basis: list
    lambda0: Fraction
    Q: list[list[Fraction]]
    target: str
    includes_identity: bool = False
    mode: str = "A"


def certify(cert: CertificateInput, k: int | None = None) -> CertificationResult:
    k = cert.rank if k is None else k
    if k != cert.rank:
        raise ValueError(f"certificate is for rank {cert.rank}, not {k}")
    basis = list(cert.basis)
    if not basis or not basis[0].is_identity():
        raise ValueError("the first basis element must be the identity")
    if len(set(basis)) != len(basis):
        raise ValueError("basis elements are not distinct")
    xi = named_target(cert.target, k, cert.mode)
    return certify_element(xi, laplacian(k, cert.mode), cert.lambda0, cert.Q, basis, cert.includes_identity)


def load_certificate(path: str | Path) -> CertificateInput:
    """Read a certificate file.

    Format: ``{"rank": k, "lambda0": "1.41", "basis": [[[side, i, j, sign], ...], ...],
    "Q": [["0.5", ...], ...], "target": "delta_squared" | "induction_element",
    "includes_identity": false, "mode": "A"}``.  Decimal strings are read
    exactly as rationals.
    """
    with open(path) as fh:
        data = json.load(fh)
    return certificate_from_json(data)


def certificate_from_json(data: dict) -> CertificateInput:
    k = int(data["rank"])
    basis = [from_witness([NielsenGen.from_list(q) for q in word], k) for word in data["basis"]]
    return CertificateInput(
        rank=k,
        basis=basis,
        lambda0=Fraction(str(data["lambda0"])),
        Q=[[Fraction(str(x)) for x in row] for row in data["Q"]],
        target=str(data.get("target", "delta_squared")),
        includes_identity=bool(data.get("includes_identity", False)),
        mode=str(data.get("mode", "A")),
    )


def certificate_to_json(cert: CertificateInput) -> dict:
    return {
        "rank": cert.rank,
        "lambda0": str(cert.lambda0),
        "basis": [[g.to_list() for g in (b.witness or ())] for b in cert.basis],
        "Q": [[str(x) for x in row] for row in cert.Q],
        "target": cert.target,
        "includes_identity": cert.includes_identity,
        "mode": cert.mode,
    }


# --- finite-group mode --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ToyElement:
    group: ToyGroup
    value: Hashable

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ToyElement) and self.value == other.value

    def __hash__(self) -> int:
        return hash(self.value)

    def __mul__(self, other: ToyElement) -> ToyElement:
        return self.group.element(self.group.handle.multiply(self.value, other.value))

    def inverse(self) -> ToyElement:
        return self.group.element(self.group.handle.invert(self.value))

    def key(self) -> bytes:
        return self.group.handle.encode(self.value)

    @property
    def length(self) -> int:
        return self.group.distance[self.value]

    def is_identity(self) -> bool:
        return self.value == self.group.handle.identity()

    def __repr__(self) -> str:
        return f"<{self.value}>"


class ToyGroup:
    """A small finite group with a chosen generating list, for exercising the certifier.

    The Laplacian is sum over ``generators`` of (1 - s)(1 - s)^*; word
    lengths are exact distances in the Cayley graph of generators and inverses.
    """

    def __init__(self, handle: GroupHandle, generators: Sequence[Hashable]):
        self.handle = handle
        self.generators = list(generators)
        self.elements_list = handle.elements()
        sym = self.generators + [handle.invert(s) for s in self.generators]
        one = handle.identity()
        self.distance = {one: 0}
        frontier = [one]
        while frontier:
            nxt = []
            for x in frontier:
                for s in sym:
                    y = handle.multiply(x, s)
                    if y not in self.distance:
                        self.distance[y] = self.distance[x] + 1
                        nxt.append(y)
            frontier = nxt
        if len(self.distance) != len(self.elements_list):
            raise ValueError("generators do not generate the group")
        one_first = [one] + [x for x in self.elements_list if x != one]
        self.elements_list = one_first

    def element(self, value) -> ToyElement:
        return ToyElement(self, value)

    @property
    def identity(self) -> ToyElement:
        return self.element(self.handle.identity())

    def basis(self) -> list[ToyElement]:
        return [self.element(x) for x in self.elements_list]

    def laplacian(self) -> RingElement:
        e = self.identity
        return ring_sum(hermitian_square_of_difference(e, self.element(s)) for s in self.generators)

    def regular_matrix(self, xi: RingElement) -> np.ndarray:
        """Left multiplication by ``xi`` on Q[G], as a float matrix in the basis order."""
        elems = self.elements_list
        index = {x: n for n, x in enumerate(elems)}
        mat = np.zeros((len(elems), len(elems)))
        for g, c in xi.terms.items():
            for n, h in enumerate(elems):
                mat[index[self.handle.multiply(g.value, h)], n] += float(c)
        return mat

    def optimal_lambda(self) -> float:
        """Largest lam with Delta^2 - lam Delta >= 0: the smallest nonzero eigenvalue of Delta."""
        w = np.linalg.eigvalsh(self.regular_matrix(self.laplacian()))
        return float(min(x for x in w if x > 1e-9))

    def oracle_certificate(self, lambda0) -> tuple[list[ToyElement], list[list[Fraction]]]:
        """Basis and Q for Delta^2 - lambda0 Delta from the square root in the regular representation."""
        L = self.regular_matrix(self.laplacian())
        mu, v = np.linalg.eigh((L + L.T) / 2)
        lam = float(lambda0)
        # sqrt(mu^2 - lambda0 mu) on the spectrum of Delta, exactly 0 on its kernel
        f = np.where(mu > 1e-9, np.sqrt(np.clip(mu * (mu - lam), 0, None)), 0.0)
        root = (v * f) @ v.T
        y = root[:, 0]  # coefficients of the square root, since e_1 is the identity
        m = len(self.elements_list) - 1
        row = [Fraction(-float(c)) for c in y[1:]]
        Q = [row] + [[Fraction(0)] * m for _ in range(m - 1)]
        return self.basis(), Q

    def is_nonnegative(self, xi: RingElement, tol: float = 1e-9) -> bool:
        """xi >= 0 in a finite group ring iff its regular representation is PSD."""
        X = self.regular_matrix(xi)
        return float(np.linalg.eigvalsh((X + X.T) / 2).min()) >= -tol
