"""Fused per-sample integration kernels.

``accumulate_points`` maps a batch of hypercube points to states, evaluates
the volume weight of every requested metric, classifies each state with the
PPT test under both groupings and adds the weights into compensated sums.

Two implementations share the signature: a numba loop (one sample at a
time, no allocation per sample) and a vectorized numpy path used when
numba is disabled.  Both write into the same accumulator arrays:

``sums[m, c]``, ``comps[m, c]``
    Neumaier-compensated weight sums, metric ``m`` by class ``c``.
``sumsq[m]``
    Sum of squared weights over all samples (diagnostic).
``counts[c]``
    Raw sample counts per class.
``diverged[m]``
    Samples whose weight overflowed (only for metrics flagged divergent).
"""
from __future__ import annotations

import math

import numpy as np

from . import metrics
from ._numba import HAVE_NUMBA, njit
from .septest import _psd_cholesky, _pt_into

CLASSES = ("all", "sep_A", "sep_B", "sep_either", "sep_both")
N_CLASSES = len(CLASSES)

LOG2 = math.log(2.0)
LOG_MAX = 709.0

# bump whenever the arithmetic of a sample's weight or class changes; keys
# cached results
NUMERICS_VERSION = 1

# status codes returned by the kernels
OK = 0
NONFINITE = 1


@njit
def _neumaier_add(sums, comps, m, c, x):
    s = sums[m, c]
    t = s + x
    if abs(s) >= abs(x):
        comps[m, c] += (s - t) + x
    else:
        comps[m, c] += (x - t) + s
    sums[m, c] = t


@njit
def _build_state(u, N, n, ranges, haar_map, lam, Ub, rho):
    """Fill ``lam``, ``Ub`` (unreversed ladder) and ``rho`` from coordinates ``u``.

    Returns ``(log sphere density, log sqrt(r) J, log haar)``, the Haar term
    taken per unit of the map's polar parameters.
    """
    r = N - n
    # spectrum
    s = 1.0
    lsphere = 0.0
    ljac = (r - 1) * LOG2
    for k in range(r - 1):
        t = u[k] * ranges[k]
        c = math.cos(t)
        sn = math.sin(t)
        lam[k] = s * c * c
        s *= sn * sn
        kk = k + 1
        if r - 1 - kk > 0:
            lsphere += (r - 1 - kk) * math.log(abs(sn)) if sn != 0.0 else -math.inf
        ljac += math.log(abs(c)) if c != 0.0 else -math.inf
        ljac += (2 * (r - kk) - 1) * math.log(abs(sn)) if sn != 0.0 else -math.inf
    lam[r - 1] = s
    for k in range(r, N):
        lam[k] = 0.0
    lhs = 0.5 * math.log(r) + ljac
    # unitary ladder
    for i in range(N):
        for j in range(N):
            Ub[i, j] = 0.0
        Ub[i, i] = 1.0
    pos = r - 1
    lhaar = 0.0
    for m in range(N, n, -1):
        k = m - 1
        for j in range(k):
            ph = u[pos + k + j] * ranges[pos + k + j]
            if haar_map:
                sn = (u[pos + j] * ranges[pos + j]) ** (1.0 / (2 * j + 2))
                c = math.sqrt((1.0 - sn) * (1.0 + sn))
                lhaar -= math.log(2 * j + 2)
            else:
                th = u[pos + j] * ranges[pos + j]
                c = math.cos(th)
                sn = math.sin(th)
                lc = math.log(abs(c)) if c != 0.0 else -math.inf
                ls = math.log(abs(sn)) if sn != 0.0 else -math.inf
                lhaar += lc + (2 * j + 1) * ls
            e = complex(math.cos(ph), math.sin(ph))
            es = e * sn
            ecs = e.conjugate() * sn
            for i in range(N):
                cj = Ub[i, j]
                ck = Ub[i, j + 1]
                Ub[i, j] = cj * c + ck * es
                Ub[i, j + 1] = ck * c - cj * ecs
        pos += 2 * k
    # rho = sum_a lam_a v_a v_a^dagger, v_a = column N-1-a of the ladder
    for i in range(N):
        for j in range(i, N):
            acc = 0.0 + 0.0j
            for a in range(r):
                col = N - 1 - a
                acc += lam[a] * Ub[i, col] * Ub[j, col].conjugate()
            rho[i, j] = acc
            if i != j:
                rho[j, i] = acc.conjugate()
            else:
                rho[i, i] = acc.real
    return lsphere, lhs, lhaar


@njit
def _log_weights(codes, lam, r, lsphere, lhs, lhaar, floor, out):
    """Log volume weights for every metric code into ``out``.

    A vanishing Jacobian or a repeated eigenvalue gives weight 0 (``-inf``)
    even where a kernel factor diverges; such points have measure zero.
    """
    N = lam.shape[0]
    nm = codes.shape[0]
    dead = lhaar == -math.inf
    for q in range(nm):
        base = lhs if codes[q] == metrics.HS_CODE else lsphere
        out[q] = base + lhaar
    if dead:
        for q in range(nm):
            out[q] = -math.inf
        return
    for a in range(r):
        la = lam[a]
        for b in range(a + 1, N):
            lb = lam[b]
            d = abs(la - lb)
            if d == 0.0:
                for q in range(nm):
                    out[q] = -math.inf
                return
            ld = 2.0 * math.log(d)
            for q in range(nm):
                code = codes[q]
                if code == metrics.HS_CODE:
                    out[q] += LOG2 + ld
                else:
                    lbe = lb
                    if b >= r and (code == 1 or code == 5):
                        lbe = floor
                    out[q] += ld + metrics.log_mc(code, la, lbe) - LOG2
    for q in range(nm):
        base = lhs if codes[q] == metrics.HS_CODE else lsphere
        if base == -math.inf:
            out[q] = -math.inf


@njit
def accumulate_numba(pts, N, n, ranges, haar_map, s_a, s_b, codes, flagged, eps, floor,
                     sums, comps, sumsq, counts, diverged):
    nm = codes.shape[0]
    r = N - n
    lam = np.empty(N)
    Ub = np.empty((N, N), dtype=np.complex128)
    rho = np.empty((N, N), dtype=np.complex128)
    pt = np.empty((N, N), dtype=np.complex128)
    work = np.empty((N, N), dtype=np.complex128)
    lw = np.empty(nm)
    cls = np.zeros(N_CLASSES, dtype=np.bool_)
    for p in range(pts.shape[0]):
        u = pts[p]
        lsphere, lhs, lhaar = _build_state(u, N, n, ranges, haar_map, lam, Ub, rho)
        _pt_into(rho, s_a, pt)
        pa = _psd_cholesky(pt, eps, work)
        if s_b == s_a:
            pb = pa
        else:
            _pt_into(rho, s_b, pt)
            pb = _psd_cholesky(pt, eps, work)
        cls[0] = True
        cls[1] = pa
        cls[2] = pb
        cls[3] = pa or pb
        cls[4] = pa and pb
        for c in range(N_CLASSES):
            if cls[c]:
                counts[c] += 1
        _log_weights(codes, lam, r, lsphere, lhs, lhaar, floor, lw)
        for q in range(nm):
            x = lw[q]
            if x != x:
                return NONFINITE
            if x > LOG_MAX:
                if flagged[q]:
                    diverged[q] += 1
                    continue
                return NONFINITE
            w = math.exp(x)
            sumsq[q] += w * w
            for c in range(N_CLASSES):
                if cls[c]:
                    _neumaier_add(sums, comps, q, c, w)
    return OK


# --------------------------------------------------------------------------
# numpy path


def _states_numpy(pts, N, n, ranges, haar_map=False):
    """Vectorized version of ``_build_state`` for a batch."""
    r = N - n
    M = pts.shape[0]
    ang = pts * ranges
    lam = np.zeros((M, N))
    s = np.ones(M)
    with np.errstate(divide="ignore"):
        lsphere = np.zeros(M)
        ljac = np.full(M, (r - 1) * LOG2)
        for k in range(r - 1):
            c, sn = np.cos(ang[:, k]), np.sin(ang[:, k])
            lam[:, k] = s * c * c
            s = s * sn * sn
            kk = k + 1
            if r - 1 - kk > 0:
                lsphere += (r - 1 - kk) * np.log(np.abs(sn))
            ljac += np.log(np.abs(c)) + (2 * (r - kk) - 1) * np.log(np.abs(sn))
        lam[:, r - 1] = s
        lhs = 0.5 * math.log(r) + ljac
        U = np.zeros((M, N, N), dtype=np.complex128)
        U[:, np.arange(N), np.arange(N)] = 1.0
        pos = r - 1
        lhaar = np.zeros(M)
        for m in range(N, n, -1):
            k = m - 1
            for j in range(k):
                ph = ang[:, pos + k + j]
                if haar_map:
                    sn = ang[:, pos + j] ** (1.0 / (2 * j + 2))
                    c = np.sqrt((1.0 - sn) * (1.0 + sn))
                    lhaar -= math.log(2 * j + 2)
                else:
                    th = ang[:, pos + j]
                    c, sn = np.cos(th), np.sin(th)
                    lhaar += np.log(np.abs(c)) + (2 * j + 1) * np.log(np.abs(sn))
                e = np.exp(1j * ph)
                cj = U[:, :, j].copy()
                ck = U[:, :, j + 1].copy()
                U[:, :, j] = cj * c[:, None] + ck * (e * sn)[:, None]
                U[:, :, j + 1] = ck * c[:, None] - cj * (e.conj() * sn)[:, None]
            pos += 2 * k
    V = U[:, :, ::-1]
    rho = np.einsum("mia,ma,mja->mij", V[:, :, :r], lam[:, :r], V[:, :, :r].conj())
    rho = 0.5 * (rho + np.conj(np.swapaxes(rho, 1, 2)))
    return lam, rho, lsphere, lhs, lhaar


def _pt_batch(rho, s):
    M, N, _ = rho.shape
    m = N // s
    return rho.reshape(M, m, s, m, s).transpose(0, 1, 4, 3, 2).reshape(M, N, N)


def _log_weights_numpy(codes, lam, r, lsphere, lhs, lhaar, floor):
    M, N = lam.shape
    out = np.empty((len(codes), M))
    dead = lhaar == -np.inf
    for q, code in enumerate(codes):
        out[q] = (lhs if code == metrics.HS_CODE else lsphere) + lhaar
    with np.errstate(divide="ignore", invalid="ignore"):
        for a in range(r):
            la = lam[:, a]
            for b in range(a + 1, N):
                lb = lam[:, b]
                d = np.abs(la - lb)
                dead |= d == 0.0
                ld = 2.0 * np.log(d)
                for q, code in enumerate(codes):
                    if code == metrics.HS_CODE:
                        out[q] += LOG2 + ld
                    else:
                        lbe = np.full(M, floor) if (b >= r and code in (1, 5)) else lb
                        out[q] += ld + metrics.log_mc_array(code, la, lbe) - LOG2
    for q, code in enumerate(codes):
        base = lhs if code == metrics.HS_CODE else lsphere
        out[q][dead | (base == -np.inf)] = -np.inf
    return out


def _neumaier_add_scalar(sums, comps, m, c, x):
    s = sums[m, c]
    t = s + x
    if abs(s) >= abs(x):
        comps[m, c] += (s - t) + x
    else:
        comps[m, c] += (x - t) + s
    sums[m, c] = t


def accumulate_numpy(pts, N, n, ranges, haar_map, s_a, s_b, codes, flagged, eps, floor,
                     sums, comps, sumsq, counts, diverged):
    r = N - n
    lam, rho, lsphere, lhs, lhaar = _states_numpy(pts, N, n, ranges, haar_map)
    pa = np.linalg.eigvalsh(_pt_batch(rho, s_a))[:, 0] > -eps
    pb = pa if s_b == s_a else np.linalg.eigvalsh(_pt_batch(rho, s_b))[:, 0] > -eps
    cls = [np.ones(len(pts), dtype=bool), pa, pb, pa | pb, pa & pb]
    for c, mask in enumerate(cls):
        counts[c] += int(mask.sum())
    lw = _log_weights_numpy(codes, lam, r, lsphere, lhs, lhaar, floor)
    if np.isnan(lw).any():
        return NONFINITE
    for q in range(len(codes)):
        big = lw[q] > LOG_MAX
        if big.any():
            if not flagged[q]:
                return NONFINITE
            diverged[q] += int(big.sum())
        w = np.where(big, 0.0, np.exp(np.minimum(lw[q], LOG_MAX)))
        sumsq[q] += float(np.sum(w * w))
        for c, mask in enumerate(cls):
            _neumaier_add_scalar(sums, comps, q, c, float(math.fsum(w[mask])))
    return OK


def accumulate_points(pts, N, n, ranges, haar_map, s_a, s_b, codes, flagged, eps, floor,
                      sums, comps, sumsq, counts, diverged, use_numba=None) -> int:
    """Dispatch to the numba or numpy kernel; returns a status code."""
    if use_numba is None:
        use_numba = HAVE_NUMBA
    fn = accumulate_numba if use_numba else accumulate_numpy
    return fn(pts, N, n, ranges, haar_map, s_a, s_b, codes, flagged, eps, floor,
              sums, comps, sumsq, counts, diverged)


def new_arrays(n_metrics: int):
    """Fresh ``(sums, comps, sumsq, counts, diverged)``."""
    return (np.zeros((n_metrics, N_CLASSES)), np.zeros((n_metrics, N_CLASSES)),
            np.zeros(n_metrics), np.zeros(N_CLASSES, dtype=np.int64),
            np.zeros(n_metrics, dtype=np.int64))

