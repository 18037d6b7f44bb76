"""Exhaustive analysis of the walk graphs Sigma'_k(G) and Gamma'_k(G).

Graphs are built by breadth-first search over walk states.  Distributions
evolve either exactly (integer numerators over a common denominator) or in
certified fixed point: numerators are floored at every step, so the stored
vector is an entrywise lower bound of the true one and the missing mass is
known exactly.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph
import scipy.sparse.linalg

from .autf import generators as ak_generators
from .blackbox import GroupHandle
from .walker import PRA, PRAA, WalkState, apply_move, move_labels

CN = "CN"
N_ONLY = "N"

DEFAULT_VERTEX_BUDGET = 2 * 10**6
DENSE_EIG_LIMIT = 4000
RESIDUAL_TOL = 1e-9


class ResourceError(RuntimeError):
    def __init__(self, message: str, partial: int):
        super().__init__(f"{message} (stopped after {partial} vertices)")
        self.partial = partial


class DisconnectedGraphError(ValueError):
    pass


@dataclass
class LabeledGraph:
    """Regular labeled multigraph.  ``targets[v, n]`` is the end of the edge from
    ``v`` labeled ``labels[n]``; ``states`` are the walk states behind the vertices.
    """

    vertices: list[bytes]
    targets: np.ndarray
    labels: list
    states: list = field(default_factory=list)
    family: str = CN

    @property
    def degree(self) -> int:
        return self.targets.shape[1]

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def k(self) -> int:
        return len(self.states[0].tuple) if self.states else 0


def _encode_state(handle: GroupHandle, s: WalkState, family: str) -> bytes:
    elems = s.elements() if family == CN else s.tuple
    return b"".join(handle.encode(x) for x in elems)


def enumerate_component(handle: GroupHandle, root, family: str = CN,
                        budget: int = DEFAULT_VERTEX_BUDGET) -> LabeledGraph:
    """BFS from ``root`` (a WalkState, or a generator tuple) using all moves of ``family``.

    ``family`` is ``"CN"`` for Sigma'_k(G) (all 4k^2 moves) or ``"N"`` for
    Gamma'_k(G) (the 4k(k-1) N-moves, accumulator ignored).
    """
    if family not in (CN, N_ONLY):
        raise ValueError(f"unknown move family {family!r}")
    if not isinstance(root, WalkState):
        root = WalkState(handle.identity(), tuple(root))
    if family == N_ONLY:
        root = WalkState(handle.identity(), root.tuple)
    labels = move_labels(root.k, PRAA if family == CN else PRA)
    index = {_encode_state(handle, root, family): 0}
    states = [root]
    rows: list[list[int]] = []
    head = 0
    while head < len(states):
        s = states[head]
        row = []
        for m in labels:
            nxt = apply_move(handle, s, m)
            key = _encode_state(handle, nxt, family)
            n = index.get(key)
            if n is None:
                if len(states) >= budget:
                    raise ResourceError(f"component exceeds the vertex budget {budget}", len(states))
                n = index[key] = len(states)
                states.append(nxt)
            row.append(n)
        rows.append(row)
        head += 1
    vertices = [b""] * len(states)
    for key, n in index.items():
        vertices[n] = key
    return LabeledGraph(vertices, np.array(rows, dtype=np.int64), labels, states, family)


def check_regular_symmetric(g: LabeledGraph) -> None:
    """Out-degree = in-degree = degree, and u -s-> v implies v -s^-1-> u."""
    n, deg = g.targets.shape
    indeg = np.bincount(g.targets.ravel(), minlength=n)
    if not (indeg == deg).all():
        raise AssertionError("in-degrees differ from the degree")
    position = {lab: c for c, lab in enumerate(g.labels)}
    for c, lab in enumerate(g.labels):
        back = position[lab.inverse()]
        if not (g.targets[g.targets[:, c], back] == np.arange(n)).all():
            raise AssertionError(f"edge label {lab} has no matching inverse edge")


def adjacency(g: LabeledGraph) -> scipy.sparse.csr_matrix:
    """Integer multiplicity adjacency matrix (loops and multi-edges counted)."""
    n, deg = g.targets.shape
    rows = np.repeat(np.arange(n), deg)
    data = np.ones(n * deg, dtype=np.int64)
    return scipy.sparse.csr_matrix((data, (rows, g.targets.ravel())), shape=(n, n))


def lazy_matrix(g: LabeledGraph) -> scipy.sparse.csr_matrix:
    """P = I/2 + A/(2 deg) in floating point."""
    n = len(g)
    return (0.5 * scipy.sparse.identity(n, format="csr") + adjacency(g) / (2.0 * g.degree)).tocsr()


def lazy_matrix_exact(g: LabeledGraph) -> list[dict[int, Fraction]]:
    """P as rows of exact rationals."""
    deg = g.degree
    out = []
    for v, row in enumerate(g.targets):
        entries: dict[int, Fraction] = {v: Fraction(1, 2)}
        for w, c in Counter(row.tolist()).items():
            entries[w] = entries.get(w, Fraction(0)) + Fraction(c, 2 * deg)
        out.append(entries)
    return out


# --- distributions -------------------------------------------------------------


@dataclass
class Distribution:
    """Weights ``numer / denom``.

    ``deficit`` is the mass missing from the stored weights: the true
    distribution is the stored one plus a nonnegative vector of total mass
    ``deficit``.  Exact distributions have ``deficit == 0``.
    """

    numer: np.ndarray
    denom: int
    deficit: Fraction = Fraction(0)

    def __len__(self) -> int:
        return len(self.numer)

    @property
    def exact(self) -> bool:
        return self.deficit == 0

    def weights(self) -> list[Fraction]:
        return [Fraction(int(x), self.denom) for x in self.numer]

    def __getitem__(self, n: int) -> Fraction:
        return Fraction(int(self.numer[n]), self.denom)

    def total(self) -> Fraction:
        return Fraction(sum(int(x) for x in self.numer), self.denom)


def point_mass(n: int, at: int = 0) -> Distribution:
    numer = np.zeros(n, dtype=object)
    numer[:] = 0
    numer[at] = 1
    return Distribution(numer, 1)


def uniform(n: int) -> Distribution:
    numer = np.empty(n, dtype=object)
    numer[:] = 1
    return Distribution(numer, n)


def distribution(weights: Sequence) -> Distribution:
    """Exact distribution from rationals (or anything Fraction accepts)."""
    fr = [Fraction(w) for w in weights]
    if any(w < 0 for w in fr) or sum(fr) != 1:
        raise ValueError("weights must be nonnegative and sum to 1")
    denom = math.lcm(*(w.denominator for w in fr))
    numer = np.empty(len(fr), dtype=object)
    numer[:] = [w.numerator * (denom // w.denominator) for w in fr]
    return Distribution(numer, denom)


def _fixed_shift(deg: int) -> int:
    # deg * x + (sum of deg neighbours) <= 2 deg * 2^shift must stay below 2^63
    return 62 - (2 * deg).bit_length()


def evolve(g: LabeledGraph, mu0: Distribution, t: int, mode: str = "auto",
           every: int | None = None, callback: Callable[[int, Distribution], None] | None = None
           ) -> Distribution:
    """Return mu0 P^t for the lazy walk on ``g``.

    ``mode`` is ``"exact"``, ``"fixed"`` (floored int64 fixed point with
    exact deficit tracking) or ``"auto"`` (exact while the numerators stay
    small enough to be cheap, fixed otherwise).  If ``callback`` is given it
    is called as ``callback(s, mu_s)`` for ``s = 0, every, 2 every, ...`` and
    at ``s = t``.
    """
    if len(mu0) != len(g):
        raise ValueError(f"distribution has {len(mu0)} entries for a graph with {len(g)} vertices")
    if t < 0:
        raise ValueError("t must be nonnegative")
    deg = g.degree
    if mode == "auto":
        growth = t * (2 * deg).bit_length()
        mode = "exact" if growth * len(g) * deg <= 5 * 10**8 else "fixed"
    targets = g.targets

    def report(s: int, mu: Distribution) -> None:
        if callback is not None and (s == t or (every and s % every == 0)):
            callback(s, mu)

    if mode == "exact":
        if not mu0.exact:
            raise ValueError("exact evolution needs an exact starting distribution")
        numer = np.array(mu0.numer, dtype=object)
        denom = mu0.denom
        report(0, Distribution(numer, denom))
        for s in range(1, t + 1):
            numer = deg * numer + numer[targets].sum(axis=1)
            denom *= 2 * deg
            report(s, Distribution(numer, denom))
        return Distribution(numer, denom)
    if mode != "fixed":
        raise ValueError(f"unknown evolution mode {mode!r}")
    shift = _fixed_shift(deg)
    scale = 1 << shift
    start = [int(x) * scale // mu0.denom for x in mu0.numer]
    numer = np.array(start, dtype=np.int64)
    lost = Fraction(sum(int(x) for x in mu0.numer) * scale - sum(start) * mu0.denom, mu0.denom * scale)
    deficit = mu0.deficit + lost
    report(0, Distribution(numer, scale, deficit))
    two_deg = 2 * deg
    for s in range(1, t + 1):
        numer = (deg * numer + numer[targets].sum(axis=1)) // two_deg
        if callback is not None and (s == t or (every and s % every == 0)):
            deficit = 1 - Fraction(int(numer.sum()), scale)
            report(s, Distribution(numer, scale, deficit))
    deficit = 1 - Fraction(int(numer.sum()), scale)
    return Distribution(numer, scale, deficit)


def _as_distribution(x) -> Distribution:
    return x if isinstance(x, Distribution) else distribution(x)


def tv(mu, nu) -> Fraction:
    """Total variation distance 1/2 sum |mu - nu| of the stored weights, exactly."""
    mu, nu = _as_distribution(mu), _as_distribution(nu)
    if len(mu) != len(nu):
        raise ValueError(f"dimension mismatch: {len(mu)} vs {len(nu)}")
    dm, dn = mu.denom, nu.denom
    total = sum(abs(int(a) * dn - int(b) * dm) for a, b in zip(mu.numer, nu.numer))
    return Fraction(total, 2 * dm * dn)


def tv_bounds(mu: Distribution, nu: Distribution) -> tuple[Fraction, Fraction]:
    """Rigorous bounds on the TV distance between the true distributions."""
    d = tv(mu, nu)
    slack = (mu.deficit + nu.deficit) / 2
    return max(Fraction(0), d - slack), min(Fraction(1), d + slack)


def pushforward(mu: Distribution, classes: Sequence[Hashable]) -> tuple[Distribution, list]:
    """Sum weights per class; ``classes[v]`` is the class of vertex ``v``.

    Returns the distribution on classes and the class list (first-seen order).
    """
    if len(classes) != len(mu):
        raise ValueError("projection must be defined on every vertex")
    order: dict = {}
    for c in classes:
        order.setdefault(c, len(order))
    numer = np.empty(len(order), dtype=object)
    numer[:] = 0
    for x, c in zip(mu.numer, classes):
        numer[order[c]] += int(x)
    return Distribution(numer, mu.denom, mu.deficit), list(order)


def fiber_sizes(classes: Sequence[Hashable]) -> Counter:
    return Counter(classes)


def accumulator_classes(handle: GroupHandle, g: LabeledGraph) -> list[bytes]:
    """pi_C: the accumulator of every vertex."""
    return [handle.encode(s.accumulator) for s in g.states]


def tuple_classes(handle: GroupHandle, g: LabeledGraph) -> list[bytes]:
    """pi_N: the generator tuple of every vertex."""
    return [b"".join(handle.encode(x) for x in s.tuple) for s in g.states]


# --- spectra -------------------------------------------------------------------


@dataclass
class GapResult:
    gap: float
    residual: float
    method: str
    eigenvalues: np.ndarray | None = None


def _check_connected(a: scipy.sparse.spmatrix) -> None:
    n_comp, _ = scipy.sparse.csgraph.connected_components(a, directed=False)
    if n_comp != 1:
        raise DisconnectedGraphError(f"graph has {n_comp} connected components")


def spectral_analysis(g: LabeledGraph, dense_limit: int = DENSE_EIG_LIMIT) -> GapResult:
    """Smallest nonzero eigenvalue of I - A/deg with the residual of its eigenvector."""
    a = adjacency(g).astype(float)
    _check_connected(a)
    n, deg = len(g), float(g.degree)
    if n == 1:
        raise DisconnectedGraphError("a single vertex has no spectral gap")
    if n <= dense_limit:
        lap = np.eye(n) - a.toarray() / deg
        w, v = scipy.linalg.eigh(lap)
        vec = v[:, 1]
        res = float(np.linalg.norm(lap @ vec - w[1] * vec))
        return GapResult(float(w[1]), res, "dense", w)
    # deflate the constant vector and take the top of A/deg
    ones = np.full(n, 1 / math.sqrt(n))
    op = scipy.sparse.linalg.LinearOperator(
        (n, n), matvec=lambda x: a @ x / deg - ones * (ones @ x), dtype=float)
    w, v = scipy.sparse.linalg.eigsh(op, k=1, which="LA", tol=1e-12)
    vec = v[:, 0]
    lap_vec = vec - a @ vec / deg
    gap = 1.0 - float(w[0])
    res = float(np.linalg.norm(lap_vec - gap * vec))
    return GapResult(gap, res, "lanczos")


def spectral_gap(g: LabeledGraph) -> float:
    result = spectral_analysis(g)
    if result.residual > RESIDUAL_TOL:
        raise ArithmeticError(f"eigensolver residual {result.residual:.2e} exceeds {RESIDUAL_TOL}")
    return result.gap


def gap_lower_bound(k: int) -> float:
    """Guaranteed normalized gap: 0.35(k-5)/(4k^2) for k > 5, 1.41/(4k^2) for k = 5."""
    if k < 5:
        raise ValueError(f"no gap guarantee for k = {k} < 5")
    lam = 1.41 if k == 5 else 0.35 * (k - 5)
    return lam / (4 * k * k)


def spectral_mixing_bound(gap: float, k: int, order: int, epsilon: float) -> int:
    """The mixing bound with a given normalized gap in place of the k >= 5 guarantee:
    ceil(2/gap ((k+1) log|G| + log(1/epsilon))).
    """
    if gap <= 0:
        raise ValueError("gap must be positive")
    return math.ceil(2 / gap * ((k + 1) * math.log(order) + math.log(1 / epsilon)))


# --- structural checks ---------------------------------------------------------


def returns_to_start(g: LabeledGraph, moves: Sequence) -> bool:
    """Whether following ``moves`` (first move first) from every vertex returns to it."""
    position = {lab: c for c, lab in enumerate(g.labels)}
    cur = np.arange(len(g))
    for m in moves:
        cur = g.targets[cur, position[m]]
    return bool((cur == np.arange(len(g))).all())


def c_fibers_are_cayley(handle: GroupHandle, g: LabeledGraph) -> bool:
    """On each pi_N fiber, C-edges are the left-right Cayley graph Cay(S, G, S).

    The edge ``(x|S) -L_0i^e-> (y|S)`` must satisfy ``y = g_i^-e x`` (and
    ``y = x g_i^-e`` for R), i.e. be the Cayley edge labeled L_i^-e.
    """
    for v, s in enumerate(g.states):
        for c, lab in enumerate(g.labels):
            if lab.i != 0:
                continue
            w = g.states[g.targets[v, c]]
            if w.tuple != s.tuple:
                return False
            gi = s.tuple[lab.j - 1]
            h = handle.invert(gi) if lab.sign == 1 else gi
            want = handle.multiply(h, s.accumulator) if lab.side == "L" else handle.multiply(s.accumulator, h)
            if handle.encode(want) != handle.encode(w.accumulator):
                return False
    return True


def n_fibers_match(handle: GroupHandle, sigma: LabeledGraph, gamma: LabeledGraph) -> bool:
    """On each pi_C fiber, N-edges reproduce Gamma'_k(G) with the same labels."""
    gamma_index = {key: n for n, key in enumerate(gamma.vertices)}
    gamma_pos = {lab: c for c, lab in enumerate(gamma.labels)}
    tup = tuple_classes(handle, sigma)
    acc = accumulator_classes(handle, sigma)
    fibers = Counter(acc)
    if any(size != len(gamma) for size in fibers.values()):
        return False
    for v in range(len(sigma)):
        for c, lab in enumerate(sigma.labels):
            if lab.i == 0:
                continue
            w = sigma.targets[v, c]
            if acc[w] != acc[v]:
                return False
            if gamma.targets[gamma_index[tup[v]], gamma_pos[lab]] != gamma_index[tup[w]]:
                return False
    return True


# --- sharpness example -----------------------------------------------------------


@dataclass
class SharpnessResult:
    k: int
    vertex_count: int
    norm_sq: int
    rayleigh: Fraction
    displacement_sq: list[int]
    max_displacement_sq: int


def _nonzero_vectors(k: int, p: int = 3) -> list[tuple[int, ...]]:
    return [v for v in itertools.product(range(p), repeat=k) if any(v)]


def transvection_action(k: int, p: int = 3) -> tuple[list[tuple[int, ...]], dict]:
    """Permutations of Z_p^k minus 0 induced by the generators of A_k.

    A_k acts through A_k -> SAut(F_k) -> SL_k(Z) -> SL_k(Z_p): L_ij^e and
    R_ij^e both become w -> w + e w_i e_j; C-generators act trivially.
    Returns the vertex list and ``{generator: permutation array}``.
    """
    vecs = _nonzero_vectors(k, p)
    index = {v: n for n, v in enumerate(vecs)}
    perms = {}
    for gen in ak_generators(k):
        if gen.i == 0:
            perms[gen] = np.arange(len(vecs))
            continue
        i, j = gen.i - 1, gen.j - 1
        img = []
        for v in vecs:
            w = list(v)
            w[j] = (w[j] + gen.sign * v[i]) % p
            img.append(index[tuple(w)])
        perms[gen] = np.array(img)
    return vecs, perms


def sharpness_check(k: int) -> SharpnessResult:
    """Rayleigh quotient of the test vector sum_i (delta_{e_i} - delta_{-e_i}).

    ``rayleigh`` is <rho(Delta) v, v> / |v|^2 with Delta the A_k Laplacian;
    ``displacement_sq`` lists |rho(s) v - v|^2 over the 4k^2 generators.
    """
    if not 2 <= k <= 7:
        raise ValueError(f"sharpness check supports 2 <= k <= 7, got {k}")
    vecs, perms = transvection_action(k)
    index = {v: n for n, v in enumerate(vecs)}
    v = np.zeros(len(vecs), dtype=np.int64)
    for i in range(k):
        e = [0] * k
        e[i] = 1
        v[index[tuple(e)]] += 1
        e[i] = 2
        v[index[tuple(e)]] -= 1
    norm_sq = int(v @ v)
    disp = []
    for gen, perm in perms.items():
        moved = np.zeros_like(v)
        moved[perm] = v  # (rho(s) v)(s.w) = v(w)
        d = moved - v
        disp.append(int(d @ d))
    # Delta = sum over the 2k^2 positive generators of (1 - s)(1 - s)^*
    quad = sum(d for d in disp) // 2
    return SharpnessResult(k, len(vecs), norm_sq, Fraction(quad, norm_sq), disp, max(disp))


def representation_laplacian(k: int, p: int = 3) -> np.ndarray:
    """rho(Delta_k) = 4k^2 I - sum_s rho(s) on Z_p^k minus 0, as an integer matrix."""
    vecs, perms = transvection_action(k, p)
    n = len(vecs)
    lap = np.zeros((n, n), dtype=np.int64)
    lap[np.diag_indices(n)] = len(perms)
    for perm in perms.values():
        np.subtract.at(lap, (perm, np.arange(n)), 1)
    return lap


def representation_gap(k: int, p: int = 3) -> GapResult:
    """Smallest nonzero eigenvalue of the (non-normalized) rho(Delta_k)."""
    lap = representation_laplacian(k, p).astype(float)
    w, vec = scipy.linalg.eigh(lap)
    x = vec[:, 1]
    return GapResult(float(w[1]), float(np.linalg.norm(lap @ x - w[1] * x)), "dense", w)
