"""Metrics on density matrices and their volume elements.

Six monotone metrics are given by their Morozova-Chentsov kernels ``c(a, b)``
through ``g(X, X) = 1/4 sum_ab |<a|X|b>|^2 c(lam_a, lam_b)``; the flat
Hilbert-Schmidt metric is ``g(X, X) = Tr X^2``.

In the coordinates of :mod:`sepvol.param` the tangent ``U^dagger dRho U`` has
diagonal ``dlam`` and off-diagonal ``(lam_b - lam_a) omega_ab``, so the
Gram determinant factorizes into a simplex part, one factor per eigenvalue
pair and the Haar density:

* monotone: ``sphere_density * prod_{a<b} (lam_a - lam_b)^2 c / 2 * haar``
* HS: ``sqrt(r) * eigenvalue_jacobian * prod_{a<b} 2 (lam_a - lam_b)^2 * haar``

Pairs inside the null block do not contribute on rank-deficient strata.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import param
from ._numba import njit

LOG2 = math.log(2.0)
LOG4 = math.log(4.0)

DEFAULT_FLOOR = 1e-18


class MetricKind(enum.Enum):
    BURES = "bures"
    KM = "km"
    ARITH = "arith"
    WY = "wy"
    GKS = "gks"
    GEOM = "geom"
    HS = "hs"

    @property
    def code(self) -> int:
        return _CODES[self]

    @property
    def monotone(self) -> bool:
        return self is not MetricKind.HS

    @property
    def divergent_volume(self) -> bool:
        """Totals look infinite (weights finite pointwise but not integrable)."""
        return self is MetricKind.GEOM

    @property
    def divergent_boundary(self) -> bool:
        """Kernel blows up at a zero eigenvalue, so boundary weights need a floor."""
        return self in (MetricKind.KM, MetricKind.GEOM)

    @classmethod
    def parse(cls, tag) -> "MetricKind":
        if isinstance(tag, cls):
            return tag
        try:
            return cls(str(tag).strip().lower())
        except ValueError:
            raise ValueError(f"unknown metric tag {tag!r}; expected one of "
                             f"{', '.join(m.value for m in cls)}") from None


ALL_METRICS = tuple(MetricKind)
_CODES = {m: i for i, m in enumerate(ALL_METRICS)}
HS_CODE = _CODES[MetricKind.HS]


# --------------------------------------------------------------------------
# scalar kernels (shared with the compiled hot loop)


@njit
def _atanh_over_t(t):
    if abs(t) < 1e-4:
        t2 = t * t
        return 1.0 + t2 * (1.0 / 3.0 + t2 * 0.2)
    return math.atanh(t) / t


@njit
def _xlogx(x):
    if x == 0.0:
        return 0.0
    return x * math.log(x)


@njit
def log_mc(code, a, b):
    """Log of the Morozova-Chentsov kernel; ``+inf`` where it diverges."""
    s = a + b
    if code == 0:  # Bures
        return LOG2 - math.log(s)
    if code == 1:  # Kubo-Mori
        if a == 0.0 or b == 0.0:
            return math.inf
        t = (a - b) / s
        if abs(t) > 0.5:
            return math.log((math.log(a) - math.log(b)) / (a - b))
        return LOG2 - math.log(s) + math.log(_atanh_over_t(t))
    if code == 2:  # arithmetic average
        return LOG4 + math.log(s) - math.log(a * a + 6.0 * a * b + b * b)
    if code == 3:  # Wigner-Yanase
        return LOG4 - 2.0 * math.log(math.sqrt(a) + math.sqrt(b))
    if code == 4:  # GKS / quasi-Bures
        t = (a - b) / s
        at = abs(t)
        if at < 1e-3:
            t2 = t * t
            return -math.log(0.5 * s) + t2 * (1.0 / 6.0 + t2 * (1.0 / 20.0 + t2 / 42.0))
        if at > 0.5:
            return 1.0 - (_xlogx(a) - _xlogx(b)) / (a - b)
        q = _atanh_over_t(t) + 0.5 * math.log1p(-t * t)
        return 1.0 - math.log(0.5 * s) - q
    if code == 5:  # geometric average
        if a == 0.0 or b == 0.0:
            return math.inf
        return -0.5 * (math.log(a) + math.log(b))
    return math.nan


def mc_function(kind, a: float, b: float) -> float:
    """Morozova-Chentsov function ``c(a, b)``; symmetric, ``c(a, a) = 1/a``.

    Divergent values (KM or geometric kernel at a zero eigenvalue) come back
    as ``inf`` rather than raising.
    """
    kind = MetricKind.parse(kind)
    if kind is MetricKind.HS:
        raise ValueError("the Hilbert-Schmidt metric has no Morozova-Chentsov kernel")
    a, b = float(a), float(b)
    if a < 0 or b < 0 or (a == 0 and b == 0) or not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"kernel arguments must be >= 0 and not both zero, got {a}, {b}")
    return math.exp(log_mc(kind.code, a, b))


def log_mc_array(code: int, a, b):
    """Vectorized :func:`log_mc` used by the numpy fallback path."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        if code == 0:
            return LOG2 - np.log(s)
        if code == 1:
            t = (a - b) / s
            small = np.abs(t) < 1e-4
            far = np.abs(t) > 0.5
            t2 = t * t
            tt = np.where(small | far, 0.25, t)
            r = np.where(small, 1.0 + t2 * (1.0 / 3.0 + t2 * 0.2), np.arctanh(tt) / tt)
            direct = np.log((np.log(a) - np.log(b)) / np.where(far, a - b, 1.0))
            out = np.where(far, direct, LOG2 - np.log(s) + np.log(r))
            return np.where((a == 0) | (b == 0), np.inf, out)
        if code == 2:
            return LOG4 + np.log(s) - np.log(a * a + 6 * a * b + b * b)
        if code == 3:
            return LOG4 - 2.0 * np.log(np.sqrt(a) + np.sqrt(b))
        if code == 4:
            t = (a - b) / s
            at = np.abs(t)
            t2 = t * t
            series = -np.log(0.5 * s) + t2 * (1.0 / 6.0 + t2 * (1.0 / 20.0 + t2 / 42.0))
            xa = np.where(a > 0, a * np.log(np.where(a > 0, a, 1.0)), 0.0)
            xb = np.where(b > 0, b * np.log(np.where(b > 0, b, 1.0)), 0.0)
            direct = 1.0 - (xa - xb) / np.where(at > 0.5, a - b, 1.0)
            tt = np.where((at >= 1e-3) & (at <= 0.5), t, 0.25)
            q = np.arctanh(tt) / tt + 0.5 * np.log1p(-tt * tt)
            mid = 1.0 - np.log(0.5 * s) - q
            return np.where(at < 1e-3, series, np.where(at > 0.5, direct, mid))
        if code == 5:
            out = -0.5 * (np.log(a) + np.log(b))
            return np.where((a == 0) | (b == 0), np.inf, out)
    raise ValueError(f"no kernel for metric code {code}")


# --------------------------------------------------------------------------
# volume weights


@dataclass(frozen=True)
class WeightValue:
    value: float
    finite: bool
    log_value: float
    regularized: bool = False


@njit
def log_weight(code, lam, r, log_simplex_mono, log_simplex_hs, log_haar, floor):
    """Log volume element for one metric.

    ``lam`` holds ``r`` nonzero eigenvalues followed by zeros.  Returns
    ``-inf`` when two eigenvalues coincide or the Jacobian vanishes.
    """
    N = lam.shape[0]
    if code == 6:
        acc = log_simplex_hs + log_haar
    else:
        acc = log_simplex_mono + log_haar
    if acc == -math.inf:
        # vanishing Jacobian: measure-zero face, weight 0 even if a kernel diverges
        return -math.inf
    for a in range(r):
        la = lam[a]
        for b in range(a + 1, N):
            lb = lam[b]
            d = la - lb
            if d == 0.0:
                return -math.inf
            if code == 6:
                acc += LOG2 + 2.0 * math.log(abs(d))
            else:
                if b >= r and (code == 1 or code == 5):
                    lb = floor
                acc += 2.0 * math.log(abs(d)) + log_mc(code, la, lb) - LOG2
    return acc


def _log_or_ninf(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def simplex_logs(theta) -> tuple[float, float]:
    """``(log sphere_density, log sqrt(r) * eigenvalue_jacobian)``."""
    r = len(theta) + 1
    return (_log_or_ninf(param.sphere_density(theta)),
            0.5 * math.log(r) + _log_or_ninf(param.eigenvalue_jacobian(theta)))


def volume_weight(kind, sample: param.StateSample, floor: float = DEFAULT_FLOOR) -> WeightValue:
    """Integrand of the metric volume in the angle coordinates of ``sample``."""
    kind = MetricKind.parse(kind)
    lmono, lhs = simplex_logs(sample.spectrum.angles)
    lh = _log_or_ninf(sample.unitary.haar_density)
    lw = log_weight(kind.code, np.ascontiguousarray(sample.spectrum.eigenvalues), sample.rank,
                    lmono, lhs, lh, floor)
    v = math.exp(lw) if lw < 709.0 else math.inf
    reg = kind.divergent_boundary and sample.n > 0
    return WeightValue(v, math.isfinite(v), lw, reg)


# --------------------------------------------------------------------------
# numeric metric tensor


class IllConditioned(RuntimeWarning):
    pass


@dataclass
class MetricTensor:
    """``g = A^T A`` with ``A`` the weighted real tangent factor.

    The determinant is taken from a QR factorization of ``A``, which keeps
    the boundary-floored metrics (condition numbers far beyond 1e12) usable.
    """
    g: np.ndarray
    factor: np.ndarray
    condition: float

    @property
    def log_sqrt_det(self) -> float:
        R = np.linalg.qr(self.factor, mode="r")
        d = np.abs(np.diag(R))
        return float(np.sum(np.log(d))) if np.all(d > 0) else -math.inf

    @property
    def sqrt_det(self) -> float:
        return math.exp(self.log_sqrt_det)

    @property
    def ill_conditioned(self) -> bool:
        return self.condition > 1e12


def tangents(sample: param.StateSample, step: float = 1e-6) -> np.ndarray:
    """Central-difference tangents ``d rho / d angle_i`` (shape ``D x N x N``)."""
    N, n = sample.N, sample.n
    x0 = np.concatenate([sample.spectrum.angles, sample.unitary.euler])
    X = np.empty((len(x0), N, N), dtype=complex)
    for i in range(len(x0)):
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += step
        xm[i] -= step
        X[i] = (param.rho_from_angles(xp, N, n) - param.rho_from_angles(xm, N, n)) / (2 * step)
    return X


def metric_tensor_numeric(kind, sample: param.StateSample, basis=None, step: float = 1e-6,
                          floor: float = DEFAULT_FLOOR) -> MetricTensor:
    """Metric tensor from the defining quadratic form applied to tangents.

    ``basis`` defaults to central-difference tangents of the stratum angles.
    """
    kind = MetricKind.parse(kind)
    X = tangents(sample, step) if basis is None else np.asarray(basis)
    U = sample.unitary.matrix
    lam = sample.spectrum.eigenvalues
    N, r = sample.N, sample.rank
    Xt = np.einsum("ai,kab,bj->kij", U.conj(), X, U)
    if kind is MetricKind.HS:
        W = np.ones((N, N))
    else:
        W = np.zeros((N, N))
        for a in range(N):
            for b in range(N):
                if a >= r and b >= r:
                    continue
                la, lb = lam[a], lam[b]
                if kind.divergent_boundary:
                    la = la if a < r else floor
                    lb = lb if b < r else floor
                W[a, b] = 0.25 * math.exp(log_mc(kind.code, la, lb))
    keep = W.ravel() > 0
    F = Xt.reshape(len(X), -1)[:, keep] * np.sqrt(W.ravel()[keep])
    A = np.concatenate([F.real, F.imag], axis=1).T
    g = A.T @ A
    sv = np.linalg.svd(A, compute_uv=False)
    cond = float((sv[0] / sv[-1]) ** 2) if sv[-1] > 0 else math.inf
    return MetricTensor(g, A, cond)


# interior of the unit box used for finite-difference checks; near the faces
# central differences straddle the coordinate singularities
INTERIOR_MARGIN = 0.05


def interior_sample(rng, N: int, n: int = 0, margin: float = INTERIOR_MARGIN) -> param.StateSample:
    u = rng.uniform(margin, 1.0 - margin, param.stratum_dim(N, n))
    return param.point_to_sample(u, N, n, "linear")


def tensor_mismatch(kind, sample: param.StateSample, floor: float = DEFAULT_FLOOR) -> float:
    """Relative gap between ``volume_weight`` and ``sqrt(det g)`` of the numeric tensor."""
    w = volume_weight(kind, sample, floor)
    t = metric_tensor_numeric(kind, sample, floor=floor)
    return abs(math.expm1(w.log_value - t.log_sqrt_det))
