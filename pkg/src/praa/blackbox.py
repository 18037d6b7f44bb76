"""Black-box finite groups.

A handle owns the group law; elements are plain hashable values (ints,
tuples) with no back-reference, so the caller always passes the handle.
"""

from __future__ import annotations

import json
import struct
from abc import ABC, abstractmethod
from collections import deque
from pathlib import Path
from typing import Any, Hashable, Sequence

Element = Hashable

DEFAULT_ENUMERATION_BOUND = 10**6


class GroupError(ValueError):
    pass


class EnumerationError(RuntimeError):
    """The element list is unavailable or larger than the configured bound."""


class GroupHandle(ABC):
    enumeration_bound = DEFAULT_ENUMERATION_BOUND

    @abstractmethod
    def identity(self) -> Element: ...

    @abstractmethod
    def multiply(self, a: Element, b: Element) -> Element: ...

    @abstractmethod
    def invert(self, a: Element) -> Element: ...

    @abstractmethod
    def encode(self, a: Element) -> bytes: ...

    def order_hint(self) -> int | None:
        return None

    def enumerate(self) -> list[Element] | None:
        """All elements (identity first), or None when too large to list."""
        return None

    def elements(self) -> list[Element]:
        elems = self.enumerate()
        if elems is None:
            raise EnumerationError(f"{self!r} cannot be enumerated within {self.enumeration_bound} elements")
        return elems

    def order(self) -> int:
        hint = self.order_hint()
        return hint if hint is not None else len(self.elements())


def closure(handle: GroupHandle, gens: Sequence[Element], bound: int | None = None) -> list[Element]:
    """Subgroup generated by ``gens``, by breadth-first right multiplication."""
    bound = handle.enumeration_bound if bound is None else bound
    one = handle.identity()
    seen = {one}
    out = [one]
    queue = deque([one])
    while queue:
        x = queue.popleft()
        for g in gens:
            y = handle.multiply(x, g)
            if y not in seen:
                if len(out) >= bound:
                    raise EnumerationError(f"closure exceeds {bound} elements")
                seen.add(y)
                out.append(y)
                queue.append(y)
    return out


class CyclicGroup(GroupHandle):
    """Z_n, written additively."""

    def __init__(self, n: int):
        if n < 1:
            raise GroupError(f"cyclic group order must be positive, got {n}")
        self.n = n

    def identity(self) -> int:
        return 0

    def multiply(self, a: int, b: int) -> int:
        return (a + b) % self.n

    def invert(self, a: int) -> int:
        return -a % self.n

    def encode(self, a: int) -> bytes:
        return struct.pack("<Q", a)

    def order_hint(self) -> int:
        return self.n

    def enumerate(self) -> list[int] | None:
        return list(range(self.n)) if self.n <= self.enumeration_bound else None

    def __repr__(self) -> str:
        return f"CyclicGroup({self.n})"


class VectorGroup(GroupHandle):
    """Z_n^d as tuples of residues."""

    def __init__(self, n: int, d: int):
        if n < 1 or d < 1:
            raise GroupError(f"invalid vector group parameters n={n}, d={d}")
        self.n, self.d = n, d

    def identity(self) -> tuple[int, ...]:
        return (0,) * self.d

    def multiply(self, a, b):
        n = self.n
        return tuple((x + y) % n for x, y in zip(a, b))

    def invert(self, a):
        return tuple(-x % self.n for x in a)

    def encode(self, a) -> bytes:
        return struct.pack(f"<{self.d}Q", *a)

    def order_hint(self) -> int:
        return self.n**self.d

    def enumerate(self):
        if self.n**self.d > self.enumeration_bound:
            return None
        out = [()]
        for _ in range(self.d):
            out = [v + (x,) for v in out for x in range(self.n)]
        return out

    def __repr__(self) -> str:
        return f"VectorGroup({self.n}, {self.d})"


def _check_perm(p: Sequence[int], degree: int) -> tuple[int, ...]:
    p = tuple(int(x) for x in p)
    if sorted(p) != list(range(degree)):
        raise GroupError(f"not a permutation of degree {degree}: {p}")
    return p


class PermutationGroup(GroupHandle):
    """Subgroup of S_degree generated by the given permutations.

    Elements are 0-based image tuples; ``multiply(a, b)`` applies ``a`` first.
    """

    def __init__(self, degree: int, generators: Sequence[Sequence[int]] = ()):
        if degree < 1:
            raise GroupError(f"degree must be positive, got {degree}")
        self.degree = degree
        self.generators = [_check_perm(g, degree) for g in generators]
        self._elements: list | None = None

    @classmethod
    def from_one_based(cls, degree: int, generators: Sequence[Sequence[int]]) -> PermutationGroup:
        return cls(degree, [[x - 1 for x in g] for g in generators])

    @classmethod
    def from_cycles(cls, degree: int, generators: Sequence[Sequence[Sequence[int]]]) -> PermutationGroup:
        """Generators as lists of 1-based cycles, e.g. ``[[(1, 2)], [(1, 2, 3)]]``."""
        return cls(degree, [cycles_to_perm(c, degree) for c in generators])

    def identity(self):
        return tuple(range(self.degree))

    def multiply(self, a, b):
        return tuple(b[x] for x in a)

    def invert(self, a):
        out = [0] * len(a)
        for i, x in enumerate(a):
            out[x] = i
        return tuple(out)

    def encode(self, a) -> bytes:
        return struct.pack(f"<{self.degree}H", *a)

    def enumerate(self):
        if self._elements is None:
            try:
                self._elements = closure(self, self.generators)
            except EnumerationError:
                return None
        return list(self._elements)

    def __repr__(self) -> str:
        return f"PermutationGroup({self.degree}, {len(self.generators)} generators)"


def cycles_to_perm(cycles: Sequence[Sequence[int]], degree: int) -> tuple[int, ...]:
    p = list(range(degree))
    for cyc in cycles:
        for a, b in zip(cyc, list(cyc[1:]) + [cyc[0]]):
            p[a - 1] = b - 1
    return _check_perm(p, degree)


class MatrixGroup(GroupHandle):
    """Matrices over Z_m under multiplication, generated by the given matrices.

    Invertibility is only checked when inverting.
    """

    def __init__(self, m: int, dim: int, generators: Sequence[Sequence[Sequence[int]]] = ()):
        if m < 2 or dim < 1:
            raise GroupError(f"invalid matrix group parameters m={m}, dim={dim}")
        self.m, self.dim = m, dim
        self.generators = [self._coerce(g) for g in generators]
        self._elements: list | None = None

    def _coerce(self, a) -> tuple[tuple[int, ...], ...]:
        rows = tuple(tuple(int(x) % self.m for x in row) for row in a)
        if len(rows) != self.dim or any(len(r) != self.dim for r in rows):
            raise GroupError(f"expected a {self.dim}x{self.dim} matrix")
        return rows

    def identity(self):
        return tuple(tuple(int(i == j) for j in range(self.dim)) for i in range(self.dim))

    def multiply(self, a, b):
        m, d = self.m, self.dim
        return tuple(tuple(sum(a[i][t] * b[t][j] for t in range(d)) % m for j in range(d)) for i in range(d))

    def invert(self, a):
        # adjugate / determinant: works for composite moduli too
        det = _det(a) % self.m
        try:
            det_inv = pow(det, -1, self.m)
        except ValueError:
            raise GroupError(f"matrix is not invertible mod {self.m}") from None
        adj = _adjugate(a)
        return tuple(tuple(x * det_inv % self.m for x in row) for row in adj)

    def encode(self, a) -> bytes:
        return struct.pack(f"<{self.dim * self.dim}Q", *(x for row in a for x in row))

    def enumerate(self):
        if self._elements is None:
            try:
                self._elements = closure(self, self.generators)
            except EnumerationError:
                return None
        return list(self._elements)

    def __repr__(self) -> str:
        return f"MatrixGroup(mod {self.m}, dim {self.dim})"


def _minor(a, i, j):
    return [row[:j] + row[j + 1 :] for n, row in enumerate(a) if n != i]


def _det(a) -> int:
    a = [list(r) for r in a]
    if len(a) == 1:
        return a[0][0]
    return sum((-1) ** j * a[0][j] * _det(_minor(a, 0, j)) for j in range(len(a)))


def _adjugate(a):
    d = len(a)
    if d == 1:
        return ((1,),)
    a = [list(r) for r in a]
    return tuple(tuple((-1) ** (i + j) * _det(_minor(a, j, i)) for j in range(d)) for i in range(d))


def make_cyclic(n: int) -> CyclicGroup:
    if n < 2:
        raise GroupError(f"need n >= 2, got {n}")
    return CyclicGroup(n)


def make_vector(n: int, d: int) -> VectorGroup:
    if n < 2 or d < 1:
        raise GroupError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
    return VectorGroup(n, d)


def make_permutation(degree: int, generators: Sequence) -> PermutationGroup:
    """Generators given either as 1-based image arrays or as lists of 1-based cycles."""
    gens = []
    for g in generators:
        if g and isinstance(g[0], (list, tuple)):
            gens.append(cycles_to_perm(g, degree))
        else:
            gens.append([x - 1 for x in g])
    return PermutationGroup(degree, gens)


def make_matrix(m: int, dim: int, generators: Sequence) -> MatrixGroup:
    return MatrixGroup(m, dim, generators)


def is_generating(handle: GroupHandle, tup: Sequence[Element]) -> bool:
    elems = handle.enumerate()
    if elems is None:
        raise EnumerationError("generation is unverifiable: the group cannot be enumerated")
    return len(closure(handle, list(tup), bound=len(elems) + 1)) == len(elems)


def check_axioms(handle: GroupHandle, rng, trials: int = 100) -> None:
    """Randomized group-axiom checks; raises AssertionError on failure."""
    elems = handle.elements()
    one = handle.identity()
    for _ in range(trials):
        a, b, c = (elems[rng.randrange(len(elems))] for _ in range(3))
        ab_c = handle.multiply(handle.multiply(a, b), c)
        a_bc = handle.multiply(a, handle.multiply(b, c))
        assert handle.encode(ab_c) == handle.encode(a_bc), "associativity"
        assert handle.multiply(a, one) == a and handle.multiply(one, a) == a, "identity"
        assert handle.encode(handle.multiply(a, handle.invert(a))) == handle.encode(one), "inverse"
    assert len({handle.encode(x) for x in elems}) == len(elems), "encode is not injective"


# --- group specification files ------------------------------------------------


def element_from_json(handle: GroupHandle, value: Any) -> Element:
    if isinstance(handle, CyclicGroup):
        return int(value) % handle.n
    if isinstance(handle, VectorGroup):
        v = tuple(int(x) % handle.n for x in value)
        if len(v) != handle.d:
            raise GroupError(f"vector of length {len(v)} in Z_{handle.n}^{handle.d}")
        return v
    if isinstance(handle, PermutationGroup):
        if value and isinstance(value[0], (list, tuple)):
            return cycles_to_perm(value, handle.degree)
        return _check_perm([x - 1 for x in value], handle.degree)
    if isinstance(handle, MatrixGroup):
        return handle._coerce(value)
    raise GroupError(f"no JSON element format for {handle!r}")


def element_to_json(handle: GroupHandle, a: Element) -> Any:
    if isinstance(handle, PermutationGroup):
        return [x + 1 for x in a]
    if isinstance(handle, (VectorGroup, MatrixGroup)):
        return [list(r) if isinstance(r, tuple) else r for r in a]
    return a


def group_from_spec(spec: dict) -> tuple[GroupHandle, list[Element]]:
    """Build ``(handle, generators)`` from a parsed group specification.

    Formats::

        {"type": "cyclic", "n": 7, "generators": [1]}
        {"type": "vector", "n": 4, "d": 2, "generators": [[1, 0], [0, 1]]}
        {"type": "permutation", "degree": 3, "generators": [[2, 1, 3], [2, 3, 1]]}
        {"type": "matrix", "modulus": 5, "dim": 2, "generators": [[[1, 1], [0, 1]], ...]}

    Permutations are 1-based image arrays (or lists of 1-based cycles).
    """
    kind = spec.get("type")
    try:
        if kind == "cyclic":
            handle: GroupHandle = make_cyclic(int(spec["n"]))
            default = [1]
        elif kind == "vector":
            handle = make_vector(int(spec["n"]), int(spec["d"]))
            default = [tuple(int(i == j) for j in range(handle.d)) for i in range(handle.d)]
        elif kind == "permutation":
            handle = make_permutation(int(spec["degree"]), spec["generators"])
            default = None
        elif kind == "matrix":
            handle = make_matrix(int(spec["modulus"]), int(spec["dim"]), spec["generators"])
            default = None
        else:
            raise GroupError(f"unknown group type {kind!r}")
    except KeyError as exc:
        raise GroupError(f"group spec is missing field {exc}") from None
    if "generators" in spec:
        gens = [element_from_json(handle, g) for g in spec["generators"]]
    elif default is not None:
        gens = default
    else:
        raise GroupError("group spec needs 'generators'")
    return handle, gens


def load_group(path: str | Path) -> tuple[GroupHandle, list[Element]]:
    with open(path) as fh:
        return group_from_spec(json.load(fh))


def pad_tuple(handle: GroupHandle, gens: Sequence[Element], k: int) -> tuple[Element, ...]:
    """Extend a generator list with identities to a k-tuple."""
    if len(gens) > k:
        raise GroupError(f"{len(gens)} generators do not fit in a {k}-tuple")
    return tuple(gens) + (handle.identity(),) * (k - len(gens))
