"""Low-discrepancy point generation on the unit hypercube.

Faure sequences in a prime base, optionally Faure-Tezuka scrambled, plus a
counter-based pseudorandom stream with the same interface.  Every generator
is a pure function of ``(spec, index)``, so shards can be produced by cloning
a generator and seeking it to the start of its index range.

The digit recursion used by :meth:`FaureSequence.fill` relies on the fact that
incrementing ``n`` changes each carried digit by exactly ``+1 mod b``
(``b-1 -> 0`` is also ``+1``), so the output digits ``y = G a`` are updated by
adding one column of ``G`` per changed input digit.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ._numba import HAVE_NUMBA, njit

MAX_INDEX = 2**63 - 1

KINDS = ("faure", "pseudorandom")
SCRAMBLES = ("none", "faure-tezuka")


class SequenceError(ValueError):
    pass


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def next_prime(n: int) -> int:
    """Smallest prime >= n (and >= 2)."""
    p = max(n, 2)
    while not is_prime(p):
        p += 1
    return p


def n_digits(base: int) -> int:
    """Digits needed to resolve 64-bit indices in ``base``."""
    return math.ceil(64 * math.log(2) / math.log(base) - 1e-12)


@dataclass(frozen=True)
class SequenceSpec:
    dimension: int
    base: int | None = None
    scramble: str = "faure-tezuka"
    seed: int = 0
    kind: str = "faure"

    def __post_init__(self):
        if self.dimension < 1:
            raise SequenceError(f"dimension must be >= 1, got {self.dimension}")
        if self.kind not in KINDS:
            raise SequenceError(f"unknown sequence kind {self.kind!r}")
        if self.scramble not in SCRAMBLES:
            raise SequenceError(f"unknown scramble {self.scramble!r}")
        if self.kind == "faure" and self.base is not None:
            if not is_prime(self.base):
                raise SequenceError(f"base {self.base} is not prime")
            if self.base < self.dimension:
                raise SequenceError(
                    f"base {self.base} is smaller than dimension {self.dimension}")

    @property
    def resolved_base(self) -> int:
        return self.base if self.base is not None else next_prime(self.dimension)

    def with_dimension(self, dimension: int) -> "SequenceSpec":
        """Same scramble/seed/kind for another dimension (default base)."""
        return SequenceSpec(dimension, None, self.scramble, self.seed, self.kind)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["base"] = self.resolved_base if self.kind == "faure" else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SequenceSpec":
        return cls(int(d["dimension"]), d.get("base"), d.get("scramble", "faure-tezuka"),
                   int(d.get("seed", 0)), d.get("kind", "faure"))


def pascal_power(i: int, k: int, b: int) -> np.ndarray:
    """``P**i mod b`` truncated to ``k x k``; entry ``[j, l] = C(l, j) i^(l-j)``."""
    P = np.zeros((k, k), dtype=np.int64)
    for j in range(k):
        for l in range(j, k):
            P[j, l] = (math.comb(l, j) % b) * pow(i, l - j, b) % b
    return P


def nut_matrix(k: int, b: int, seed: int) -> np.ndarray:
    """Random nonsingular upper-triangular matrix mod ``b``.

    Entries come from a Philox stream keyed by ``seed``; the diagonal is drawn
    from ``1..b-1`` so the matrix is invertible mod ``b``.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    U = np.triu(rng.integers(0, b, size=(k, k), dtype=np.int64), 1)
    U[np.diag_indices(k)] = rng.integers(1, b, size=k, dtype=np.int64)
    return U


def generator_matrices(spec: SequenceSpec) -> np.ndarray:
    """Stacked ``C^(i) = P^(i) U mod b`` for coordinates ``i = 0..D-1``.

    A single scramble matrix ``U`` is shared by all coordinates; with a common
    right factor every ``(0, s)`` net property of the plain Faure matrices is
    preserved.
    """
    b = spec.resolved_base
    k = n_digits(b)
    U = nut_matrix(k, b, spec.seed) if spec.scramble == "faure-tezuka" else np.eye(k, dtype=np.int64)
    G = np.empty((spec.dimension, k, k), dtype=np.int64)
    for i in range(spec.dimension):
        G[i] = pascal_power(i, k, b) @ U % b
    return G


def index_digits(index: int, b: int, k: int) -> np.ndarray:
    a = np.zeros(k, dtype=np.int64)
    j = 0
    while index and j < k:
        index, a[j] = divmod(index, b)
        j += 1
    return a


# --------------------------------------------------------------------------
# kernels

ONE_MINUS = 1.0 - 2.0**-53


@njit
def _faure_fill(G, b, digits, y, out):
    D, K, _ = G.shape
    count = out.shape[0]
    inv_b = 1.0 / b
    for p in range(count):
        for i in range(D):
            x = 0.0
            for kk in range(K - 1, -1, -1):
                x = (x + y[i, kk]) * inv_b
            if x >= 1.0:
                x = ONE_MINUS
            out[p, i] = x
        # advance: every carried digit changes by +1 mod b
        j = 0
        while j < K:
            digits[j] += 1
            for i in range(D):
                for kk in range(K):
                    v = y[i, kk] + G[i, kk, j]
                    if v >= b:
                        v -= b
                    y[i, kk] = v
            if digits[j] == b:
                digits[j] = 0
                j += 1
            else:
                break


def _faure_fill_numpy(G, b, start, out):
    count = out.shape[0]
    D, K, _ = G.shape
    idx = start + np.arange(count, dtype=np.uint64)
    A = np.empty((count, K), dtype=np.int64)
    rem = idx.copy()
    for j in range(K):
        A[:, j] = (rem % np.uint64(b)).astype(np.int64)
        rem //= np.uint64(b)
    Y = np.einsum("ikj,pj->pik", G, A) % b
    x = np.zeros((count, D))
    for kk in range(K - 1, -1, -1):
        x = (x + Y[:, :, kk]) * (1.0 / b)
    out[:] = np.minimum(x, ONE_MINUS)


class FaureSequence:
    """Stateful Faure / Faure-Tezuka generator positioned at ``index``."""

    def __init__(self, spec: SequenceSpec):
        if spec.kind != "faure":
            raise SequenceError("FaureSequence needs kind='faure'")
        self.spec = spec
        self.base = spec.resolved_base
        self.G = generator_matrices(spec)
        self.K = self.G.shape[1]
        self.seek(0)

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    def seek(self, index: int) -> "FaureSequence":
        if index < 0 or index > MAX_INDEX:
            raise SequenceError(f"index {index} outside [0, 2^63-1]")
        self.index = int(index)
        self.digits = index_digits(self.index, self.base, self.K)
        self.y = np.einsum("ikj,j->ik", self.G, self.digits) % self.base
        return self

    def clone(self) -> "FaureSequence":
        other = object.__new__(FaureSequence)
        other.spec, other.base, other.G, other.K = self.spec, self.base, self.G, self.K
        other.index, other.digits, other.y = self.index, self.digits.copy(), self.y.copy()
        return other

    def fill(self, out: np.ndarray) -> np.ndarray:
        """Write the next ``len(out)`` points into ``out`` and advance."""
        count = out.shape[0]
        if self.index + count - 1 > MAX_INDEX:
            raise SequenceError("sequence index overflow past 2^63-1")
        if HAVE_NUMBA:
            _faure_fill(self.G, self.base, self.digits, self.y, out)
            self.index += count
        else:
            _faure_fill_numpy(self.G, self.base, self.index, out)
            self.seek(self.index + count)
        return out

    def points(self, count: int) -> np.ndarray:
        return self.fill(np.empty((count, self.dimension)))

    def next_point(self) -> "HypercubePoint":
        idx = self.index
        return HypercubePoint(self.points(1)[0], idx)


class PseudoRandomSequence:
    """Counter-based (Philox) uniform points; point ``k`` is a pure function of ``k``."""

    def __init__(self, spec: SequenceSpec):
        self.spec = spec
        self.stride = 4 * math.ceil(spec.dimension / 4)
        self.seek(0)

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    def seek(self, index: int) -> "PseudoRandomSequence":
        if index < 0 or index > MAX_INDEX:
            raise SequenceError(f"index {index} outside [0, 2^63-1]")
        self.index = int(index)
        return self

    def clone(self) -> "PseudoRandomSequence":
        return PseudoRandomSequence(self.spec).seek(self.index)

    def fill(self, out: np.ndarray) -> np.ndarray:
        count = out.shape[0]
        if self.index + count - 1 > MAX_INDEX:
            raise SequenceError("sequence index overflow past 2^63-1")
        # one Philox counter step yields four 64-bit words
        counter = (self.index * self.stride) // 4
        bg = np.random.Philox(key=self.spec.seed, counter=counter)
        raw = bg.random_raw(count * self.stride).reshape(count, self.stride)[:, : self.dimension]
        out[:] = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53
        self.index += count
        return out

    def points(self, count: int) -> np.ndarray:
        return self.fill(np.empty((count, self.dimension)))

    def next_point(self) -> "HypercubePoint":
        idx = self.index
        return HypercubePoint(self.points(1)[0], idx)


@dataclass(frozen=True, eq=False)
class HypercubePoint:
    coords: np.ndarray
    index: int


def make_sequence(spec: SequenceSpec):
    """Generator for ``spec`` positioned at index 0."""
    if spec.kind == "faure":
        return FaureSequence(spec)
    return PseudoRandomSequence(spec)


def next_point(state) -> HypercubePoint:
    return state.next_point()


def seek(state, index: int):
    return state.seek(index)


def star_discrepancy_2d(pts: np.ndarray) -> float:
    """Exact star discrepancy of a 2-d point set (O(n^2) over critical boxes)."""
    pts = np.asarray(pts, dtype=float)
    n = len(pts)
    xs = np.unique(np.concatenate([pts[:, 0], [1.0]]))
    ys = np.unique(np.concatenate([pts[:, 1], [1.0]]))
    ix = np.searchsorted(xs, pts[:, 0])
    iy = np.searchsorted(ys, pts[:, 1])
    H = np.zeros((len(xs), len(ys)), dtype=np.int64)
    np.add.at(H, (ix, iy), 1)
    closed = H.cumsum(0).cumsum(1)  # points with x <= xs[i], y <= ys[j]
    opn = np.zeros_like(closed)  # points with x < xs[i], y < ys[j]
    opn[1:, 1:] = closed[:-1, :-1]
    vol = np.outer(xs, ys)
    return float(max((closed / n - vol).max(), (vol - opn / n).max()))
