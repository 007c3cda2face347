"""Positive-partial-transpose separability tests for 2x2 and 2x3 systems.

A 6x6 matrix can be partially transposed in two inequivalent ways:

* grouping ``A``: the four 3x3 blocks are transposed in place,
* grouping ``B``: the nine 2x2 blocks are transposed in place.

With index ``p = I*s + k`` (``s`` the block size), the in-place transpose is
``PT[(I,k),(J,l)] = rho[(I,l),(J,k)]``.  For 4x4 both groupings coincide.

The hot-loop kernels (``_pt_into``, ``_psd_cholesky``, ``_herm_min_eig``) are
allocation-light numba functions; the public functions wrap them for single
matrices.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._numba import njit


class SepTestError(ValueError):
    pass


class Grouping(enum.Enum):
    A = "A"
    B = "B"

    @classmethod
    def parse(cls, g) -> "Grouping":
        if isinstance(g, Grouping):
            return g
        try:
            return cls(str(g).upper())
        except ValueError:
            raise SepTestError(f"unknown grouping {g!r}") from None


def default_dims(N: int) -> tuple[int, int]:
    if N == 4:
        return (2, 2)
    if N == 6:
        return (2, 3)
    raise SepTestError(f"no default bipartition for N={N}")


def block_size(N: int, grouping, dims=None) -> int:
    """Size of the blocks transposed in place for ``grouping``."""
    d1, d2 = dims if dims is not None else default_dims(N)
    if d1 * d2 != N:
        raise SepTestError(f"dims {d1}x{d2} do not factor N={N}")
    return d2 if Grouping.parse(grouping) is Grouping.A else d1


def transpose_blocks(rho, s: int):
    """Transpose every ``s x s`` block of ``rho`` in place (works on object arrays)."""
    rho = np.asarray(rho)
    N = rho.shape[0]
    if rho.shape != (N, N) or N % s:
        raise SepTestError(f"matrix of shape {rho.shape} has no {s}x{s} block structure")
    m = N // s
    return rho.reshape(m, s, m, s).transpose(0, 3, 2, 1).reshape(N, N)


def partial_transpose(rho, grouping="A", dims=None):
    """Partial transpose of ``rho`` under ``grouping`` (exact entry permutation)."""
    rho = np.asarray(rho)
    return transpose_blocks(rho, block_size(rho.shape[0], grouping, dims))


# --------------------------------------------------------------------------
# kernels


@njit
def _pt_into(rho, s, out):
    N = rho.shape[0]
    for p in range(N):
        I = p // s
        k = p - I * s
        for q in range(N):
            J = q // s
            l = q - J * s
            out[I * s + l, J * s + k] = rho[p, q]


@njit
def _psd_cholesky(A, eps, work):
    """True if ``A + eps*I`` admits a Cholesky factorization (Hermitian A).

    Positive definite matrices pass; a matrix with a negative eigenvalue
    below ``-eps`` always fails.  Exactly singular inputs are a measure-zero
    boundary and may go either way.
    """
    n = A.shape[0]
    for i in range(n):
        for j in range(n):
            work[i, j] = A[i, j]
        work[i, i] += eps
    for j in range(n):
        d = work[j, j].real
        for k in range(j):
            v = work[j, k]
            d -= v.real * v.real + v.imag * v.imag
        if not d > 0.0:
            return False
        ljj = np.sqrt(d)
        work[j, j] = ljj
        inv = 1.0 / ljj
        for i in range(j + 1, n):
            acc = work[i, j]
            for k in range(j):
                acc -= work[i, k] * work[j, k].conjugate()
            work[i, j] = acc * inv
    return True


@njit
def _tridiagonalize(A, d, e):
    """Householder reduction of Hermitian ``A`` (destroyed) to real tridiagonal.

    ``d`` receives the diagonal and ``e[:n-1]`` the moduli of the
    sub-diagonal; the phases are removable by a diagonal unitary similarity.
    """
    n = A.shape[0]
    v = np.empty(n, dtype=np.complex128)
    p = np.empty(n, dtype=np.complex128)
    for k in range(n - 2):
        alpha2 = 0.0
        for i in range(k + 1, n):
            x = A[i, k]
            alpha2 += x.real * x.real + x.imag * x.imag
        x0 = A[k + 1, k]
        ax0 = abs(x0)
        if alpha2 - ax0 * ax0 <= 0.0:
            # already tridiagonal in this column
            e[k] = ax0
            continue
        alpha = np.sqrt(alpha2)
        ph = x0 / ax0 if ax0 > 0.0 else 1.0 + 0.0j
        for i in range(k + 1, n):
            v[i] = A[i, k]
        v[k + 1] += ph * alpha
        vv = 0.0
        for i in range(k + 1, n):
            vv += v[i].real * v[i].real + v[i].imag * v[i].imag
        tau = 2.0 / vv
        # p = tau * A22 v
        for i in range(k + 1, n):
            acc = 0.0 + 0.0j
            for j in range(k + 1, n):
                acc += A[i, j] * v[j]
            p[i] = tau * acc
        K = 0.0 + 0.0j
        for i in range(k + 1, n):
            K += v[i].conjugate() * p[i]
        K *= 0.5 * tau
        for i in range(k + 1, n):
            p[i] -= K * v[i]
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i, j] -= v[i] * p[j].conjugate() + p[i] * v[j].conjugate()
        e[k] = alpha
    if n >= 2:
        e[n - 2] = abs(A[n - 1, n - 2])
    for i in range(n):
        d[i] = A[i, i].real
    e[n - 1] = 0.0


@njit
def _ql_eigenvalues(d, e):
    """Eigenvalues of the symmetric tridiagonal ``(d, e)`` by implicit QL.

    Returns False if an eigenvalue fails to converge in 60 sweeps (never
    observed for Hermitian input).
    """
    n = d.shape[0]
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= 2.2e-16 * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > 60:
                return False
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0.0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return True


@njit
def _herm_eigvals(A, work, d, e):
    n = A.shape[0]
    for i in range(n):
        for j in range(n):
            work[i, j] = A[i, j]
    _tridiagonalize(work, d, e)
    ok = _ql_eigenvalues(d, e)
    return ok


@njit
def _herm_min_eig(A, work, d, e):
    ok = _herm_eigvals(A, work, d, e)
    if not ok:
        return np.nan
    m = d[0]
    for i in range(1, d.shape[0]):
        if d[i] < m:
            m = d[i]
    return m


@njit
def _det_hermitian(A, work):
    """Real determinant of a Hermitian matrix by partial-pivot LU."""
    n = A.shape[0]
    for i in range(n):
        for j in range(n):
            work[i, j] = A[i, j]
    det = 1.0 + 0.0j
    for k in range(n):
        piv = k
        best = abs(work[k, k])
        for i in range(k + 1, n):
            if abs(work[i, k]) > best:
                best = abs(work[i, k])
                piv = i
        if best == 0.0:
            return 0.0
        if piv != k:
            for j in range(n):
                t = work[k, j]
                work[k, j] = work[piv, j]
                work[piv, j] = t
            det = -det
        det *= work[k, k]
        inv = 1.0 / work[k, k]
        for i in range(k + 1, n):
            f = work[i, k] * inv
            for j in range(k + 1, n):
                work[i, j] -= f * work[k, j]
    return det.real


# --------------------------------------------------------------------------
# public wrappers


def hermitian_eigenvalues(A) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian matrix via Householder + QL."""
    A = np.ascontiguousarray(np.asarray(A, dtype=np.complex128))
    n = A.shape[0]
    work = np.empty_like(A)
    d = np.empty(n)
    e = np.empty(n)
    if not _herm_eigvals(A, work, d, e):  # pragma: no cover
        raise SepTestError("tridiagonal QL failed to converge")
    return np.sort(d)


def min_eigenvalue(A) -> float:
    return float(hermitian_eigenvalues(A)[0])


def is_ppt(rho, grouping="A", eps: float = 0.0, dims=None, method: str = "eig"):
    """PPT test.  Returns ``(passed, min_eigenvalue)``.

    ``method="det"`` (4x4 only) decides by the sign of ``det PT(rho)``, which
    is sufficient for two qubits since their partial transpose has at most
    one negative eigenvalue.  The returned eigenvalue is always computed.
    """
    if eps < 0:
        raise SepTestError("tolerance must be >= 0")
    rho = np.asarray(rho, dtype=np.complex128)
    pt = np.ascontiguousarray(partial_transpose(rho, grouping, dims))
    lmin = min_eigenvalue(pt)
    if method == "eig":
        return bool(lmin >= -eps), lmin
    if method == "det":
        if rho.shape[0] != 4:
            raise SepTestError("determinant test only applies to 4x4 matrices")
        return bool(ppt_determinant(pt) >= 0.0), lmin
    raise SepTestError(f"unknown method {method!r}")


def ppt_determinant(pt) -> float:
    pt = np.ascontiguousarray(np.asarray(pt, dtype=np.complex128))
    return float(_det_hermitian(pt, np.empty_like(pt)))


@dataclass(frozen=True)
class SampleClassification:
    pass_A: bool
    pass_B: bool
    min_eig_A: float
    min_eig_B: float

    @property
    def either(self) -> bool:
        return self.pass_A or self.pass_B

    @property
    def both(self) -> bool:
        return self.pass_A and self.pass_B


def classify(rho, eps: float = 0.0, dims=None) -> SampleClassification:
    """Run the PPT test under both groupings."""
    a, la = is_ppt(rho, "A", eps, dims)
    b, lb = is_ppt(rho, "B", eps, dims)
    return SampleClassification(a, b, la, lb)


# --------------------------------------------------------------------------
# fixtures


def _hermitian_from_upper(diag, upper) -> list[list]:
    n = len(diag)
    M = [[0 for _ in range(n)] for _ in range(n)]
    for i, v in enumerate(diag):
        M[i][i] = v
    for (i, j), v in upper.items():
        M[i][j] = v
        M[j][i] = v.conjugate()
    return M


class GaussianRational:
    """Exact complex rational ``re + i*im`` with Fraction parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __eq__(self, other):
        other = _as_gr(other)
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __add__(self, other):
        other = _as_gr(other)
        return GaussianRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-_as_gr(other))

    def __rsub__(self, other):
        return _as_gr(other) - self

    def __mul__(self, other):
        o = _as_gr(other)
        return GaussianRational(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __repr__(self):
        return f"({self.re}{'+' if self.im >= 0 else '-'}{abs(self.im)}i)"


def _as_gr(x) -> GaussianRational:
    if isinstance(x, GaussianRational):
        return x
    if isinstance(x, complex):
        raise TypeError("refusing to mix floats into exact matrices")
    return GaussianRational(x, 0)


def _q(re=0, im=0):
    return GaussianRational(re, im)


F = Fraction
_DIAG = [_q(F(2, 9)), _q(F(1, 7)), _q(F(1, 5)), _q(F(1, 7)), _q(F(1, 6)), _q(F(79, 630))]

RHO1_EXACT = np.array(_hermitian_from_upper(_DIAG, {
    (1, 5): _q(F(-1, 24), F(1, 38)),
    (2, 3): _q(0, F(1, 23)),
    (2, 4): _q(0, F(-1, 41)),
    (2, 5): _q(F(-1, 10), F(-1, 21)),
    (3, 5): _q(0, F(1, 13)),
}), dtype=object)

RHO2_EXACT = np.array(_hermitian_from_upper(_DIAG, {
    (1, 4): _q(0, F(1, 23)),
    (1, 5): _q(0, F(-1, 41)),
    (2, 4): _q(F(-1, 24), F(1, 38)),
    (3, 4): _q(F(-1, 10), F(-1, 21)),
    (3, 5): _q(0, F(-1, 13)),
}), dtype=object)

RHO1_SPECTRUM = (0.322635, 0.222222, 0.1721, 0.149677, 0.119158, 0.0142076)
RHO2_SPECTRUM = (0.300489, 0.222222, 0.204982, 0.168304, 0.0992763, 0.00472644)
RHO1_MIN_EIG_B = -0.00129836

# 1-based relabelling between the 2x3 and 3x2 orderings of the product basis
SWAP_PERMUTATION = (1, 4, 2, 5, 3, 6)


def to_complex(M) -> np.ndarray:
    return np.array([[complex(x) for x in row] for row in np.asarray(M, dtype=object)],
                    dtype=np.complex128)


def rho1() -> np.ndarray:
    return to_complex(RHO1_EXACT)


def rho2() -> np.ndarray:
    return to_complex(RHO2_EXACT)


def permutation_matrix(perm=SWAP_PERMUTATION) -> np.ndarray:
    """Integer matrix ``P`` with ``(P x)[i] = x[perm[i] - 1]``."""
    n = len(perm)
    P = np.zeros((n, n), dtype=np.int64)
    for i, j in enumerate(perm):
        P[i, j - 1] = 1
    return P


def permute_basis(M, perm=SWAP_PERMUTATION):
    """``P M P^T`` as an entry permutation (exact on object arrays)."""
    idx = np.asarray(perm) - 1
    return np.asarray(M)[np.ix_(idx, idx)]


def _a2(M):
    return transpose_blocks(M, 2)


def _a3(M):
    return transpose_blocks(M, 3)


def _power(f, g, M, k):
    X = M
    for _ in range(k):
        X = f(g(X))
    return X


def _equal(X, Y, tol):
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.dtype == object or Y.dtype == object:
        return bool(np.all(X == Y))
    return bool(np.max(np.abs(X - Y), initial=0.0) <= tol)


def alternation_order(M, limit: int = 64) -> int:
    """Smallest ``k`` with ``(a2 a3)^k M = M`` (0 if none up to ``limit``)."""
    X = M
    for k in range(1, limit + 1):
        X = _a2(_a3(X))
        if _equal(X, M, 0.0):
            return k
    return 0


@dataclass
class AlgebraReport:
    checks: dict = field(default_factory=dict)
    order: int = 0

    @property
    def failures(self) -> list[str]:
        return [k for k, v in self.checks.items() if not v]

    @property
    def ok(self) -> bool:
        return not self.failures


def grouping_algebra_check(M, tol: float = 1e-12, fixtures: bool = True) -> AlgebraReport:
    """Verify the group relations of the two in-place transpositions on ``M``.

    Exact for object arrays of rationals, within ``tol`` for floats.  The
    relation with the basis swap is ``a2(M) = P a3(P^T M P)^T P^T`` with
    ``P`` the permutation matrix of :data:`SWAP_PERMUTATION`.  ``order``
    records the true order of ``a2 a3`` on ``M``; the report keeps the
    sixfold relation as a separate named check.
    """
    M = np.asarray(M)
    if M.shape != (6, 6):
        raise SepTestError("grouping algebra is defined on 6x6 matrices")
    rep = AlgebraReport()
    c = rep.checks
    c["a2^2 = I"] = _equal(_a2(_a2(M)), M, tol)
    c["a3^2 = I"] = _equal(_a3(_a3(M)), M, tol)
    c["(a2 a3)^6 = I"] = _equal(_power(_a2, _a3, M, 6), M, tol)
    c["(a3 a2)^6 = I"] = _equal(_power(_a3, _a2, M, 6), M, tol)
    c["(a2 a3)^12 = I"] = _equal(_power(_a2, _a3, M, 12), M, tol)
    inv = tuple(int(i) for i in np.argsort(np.asarray(SWAP_PERMUTATION) - 1) + 1)
    lhs = _a2(M)
    rhs = permute_basis(_a3(permute_basis(M, inv)).T, SWAP_PERMUTATION)
    c["a2 = P a3(P^T . P)^T P^T"] = _equal(lhs, rhs, tol)
    rep.order = alternation_order(M)
    if fixtures:
        c.update(fixture_checks())
    return rep


def fixture_checks(tol: float = 1e-6) -> dict:
    """Named pass/fail checks on the two embedded fixture matrices."""
    r1, r2 = rho1(), rho2()
    out = {}
    out["rho1 spectrum"] = bool(np.allclose(hermitian_eigenvalues(r1)[::-1], RHO1_SPECTRUM, atol=tol))
    out["rho2 spectrum"] = bool(np.allclose(hermitian_eigenvalues(r2)[::-1], RHO2_SPECTRUM, atol=tol))
    ok_b, lb = is_ppt(r1, "B")
    ok_a, _ = is_ppt(r1, "A")
    out["rho1 grouping B min eigenvalue"] = abs(lb - RHO1_MIN_EIG_B) <= tol and not ok_b
    out["rho1 grouping A PSD"] = ok_a
    out["rho2 B-transpose = rho1 A-transpose"] = bool(
        np.all(partial_transpose(RHO2_EXACT, "B") == partial_transpose(RHO1_EXACT, "A")))
    return out


def random_rational_matrix(rng, n: int = 6, denom: int = 97) -> np.ndarray:
    """Random complex rational ``n x n`` object array (for exact identity checks)."""
    re = rng.integers(-denom, denom + 1, size=(n, n))
    im = rng.integers(-denom, denom + 1, size=(n, n))
    den = rng.integers(1, denom + 1, size=(n, n))
    return np.array([[_q(F(int(re[i, j]), int(den[i, j])), F(int(im[i, j]), int(den[i, j])))
                      for j in range(n)] for i in range(n)], dtype=object)
