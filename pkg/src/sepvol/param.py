"""Hypercube -> density matrix parameterization.

A state on the rank-``r = N - n`` stratum is ``rho = U diag(lam) U^dagger``:

* ``lam`` comes from ``r - 1`` hyperspherical angles,
  ``lam_1 = cos^2 t_1``, ``lam_k = cos^2 t_k prod_{j<k} sin^2 t_j``,
  ``lam_r = prod_j sin^2 t_j``; the trailing ``n`` entries are pinned to 0.
* ``U`` is a product of complex Givens rotations (Hurwitz ladder).  Level
  ``m`` (``m = N, N-1, ..., n+1``) applies rotations in the planes
  ``(1,2), (2,3), ..., (m-1,m)``; the rotation in plane ``(j, j+1)`` has polar
  angle ``theta in [0, pi/2]`` and phase ``phi in [0, 2 pi)``.  Levels
  ``m <= n`` only rotate inside the null space and are dropped.

Hypercube layout: ``[spectrum angles | level N thetas, level N phis | ...]``.
Two coordinate maps are offered:

``linear``
    every coordinate is mapped linearly onto its angle range;
``haar``
    the polar angle of the rotation with plane index ``j`` (0-based) is
    parameterized by ``x = sin(theta)^(2j+2)`` in ``[0, 1]``, under which the
    Haar density is the constant ``1/(2j+2)``.  Spectrum angles and phases
    stay linear.  Same integral, far smaller integrand variance.

Weights are always densities with respect to the map's parameters (angles
for ``linear``, ``x`` for the Haar polar coordinates), so a volume is
``box_measure * mean(weight) / multiplicity`` for either map.

The Haar density ``prod cos(theta) sin(theta)^(2j-1)`` (``j`` = plane index
inside a level) is the square root of the Gram determinant of the coframe
``{Re, Im omega_ab}``, ``omega = U^dagger dU``, over all pairs not inside the
null block.  Integrated over the Euler box it gives
``prod_m pi^(m-1)/(m-1)!``, the volume of ``U(N)/(T^r x U(n))`` for the line
element ``sum_{a<b} |omega_ab|^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

HALF_PI = 0.5 * math.pi
TWO_PI = 2.0 * math.pi


class ParamError(ValueError):
    pass


def stratum_dim(N: int, n: int = 0) -> int:
    """Real dimension of the rank-(N-n) stratum of N x N density matrices."""
    return (N - n) * (N + n) - 1


def n_euler(N: int, n: int = 0) -> int:
    return sum(2 * (m - 1) for m in range(n + 1, N + 1))


def check_stratum(N: int, n: int) -> None:
    if N < 1 or not 0 <= n <= N - 1:
        raise ParamError(f"invalid stratum N={N}, n={n}")


ANGLE_MAPS = ("haar", "linear")


def check_map(angle_map: str) -> str:
    if angle_map not in ANGLE_MAPS:
        raise ParamError(f"unknown angle map {angle_map!r}; expected one of {ANGLE_MAPS}")
    return angle_map


def angle_ranges(N: int, n: int = 0, angle_map: str = "linear") -> np.ndarray:
    """Length of each parameter range in hypercube order."""
    check_stratum(N, n)
    polar = 1.0 if check_map(angle_map) == "haar" else HALF_PI
    r = N - n
    widths = [HALF_PI] * (r - 1)
    for m in range(N, n, -1):
        widths += [polar] * (m - 1) + [TWO_PI] * (m - 1)
    return np.array(widths)


def polar_mask(N: int, n: int = 0) -> np.ndarray:
    """Boolean mask of unitary polar-angle slots; ``plane_index`` gives their j."""
    return plane_index(N, n) >= 0


def plane_index(N: int, n: int = 0) -> np.ndarray:
    """Plane index ``j`` of each polar slot in hypercube order, -1 elsewhere."""
    r = N - n
    idx = [-1] * (r - 1)
    for m in range(N, n, -1):
        idx += list(range(m - 1)) + [-1] * (m - 1)
    return np.array(idx, dtype=np.int64)


def box_measure(N: int, n: int = 0, angle_map: str = "linear") -> float:
    """Lebesgue measure of the parameter box."""
    return float(np.prod(angle_ranges(N, n, angle_map)))


def multiplicity(N: int, n: int = 0) -> int:
    """Number of box points mapping to one generic state (eigenvalue relabelings)."""
    return math.factorial(N - n)


def coords_to_angles(u, N: int, n: int = 0, angle_map: str = "linear") -> np.ndarray:
    """Hypercube coordinates -> angles under ``angle_map``."""
    u = np.asarray(u, dtype=float)
    ang = u * angle_ranges(N, n, angle_map)
    if angle_map == "haar":
        j = plane_index(N, n)
        m = j >= 0
        ang[m] = np.arcsin(ang[m] ** (1.0 / (2 * j[m] + 2)))
    return ang


def map_log_jacobian(angles, N: int, n: int = 0, angle_map: str = "linear") -> float:
    """``log |d angles / d parameters|`` of the coordinate map."""
    if check_map(angle_map) == "linear":
        return 0.0
    angles = np.asarray(angles, dtype=float)
    j = plane_index(N, n)
    m = j >= 0
    t = angles[m]
    e = 2 * j[m] + 2
    with np.errstate(divide="ignore"):
        return float(-np.sum(np.log(e) + np.log(np.cos(t)) + (e - 1) * np.log(np.sin(t))))


def split_angles(angles, N: int, n: int = 0):
    """Split flat angles into ``(spectrum_angles, [(thetas, phis) per level])``."""
    r = N - n
    angles = np.asarray(angles, dtype=float)
    spec = angles[: r - 1]
    levels = []
    pos = r - 1
    for m in range(N, n, -1):
        k = m - 1
        levels.append((angles[pos: pos + k], angles[pos + k: pos + 2 * k]))
        pos += 2 * k
    return spec, levels


# --------------------------------------------------------------------------
# spectrum


def spectrum_from_angles(theta, N: int) -> np.ndarray:
    """Eigenvalues of length ``N`` from ``len(theta)`` hyperspherical angles.

    Entries past ``len(theta) + 1`` are exactly zero.
    """
    theta = np.asarray(theta, dtype=float)
    r = len(theta) + 1
    lam = np.zeros(N)
    s = 1.0
    for k in range(r - 1):
        c = math.cos(theta[k])
        lam[k] = s * c * c
        sn = math.sin(theta[k])
        s *= sn * sn
    lam[r - 1] = s
    return lam


def eigenvalue_jacobian(theta) -> float:
    """``|det d(lam_1..lam_{r-1}) / d(theta)|`` for the hyperspherical map."""
    theta = np.asarray(theta, dtype=float)
    r = len(theta) + 1
    J = 2.0 ** (r - 1)
    for k in range(1, r):
        t = theta[k - 1]
        J *= math.cos(t) * math.sin(t) ** (2 * (r - k) - 1)
    return abs(J)


def sphere_density(theta) -> float:
    """Round-sphere density ``prod sin(t_k)^(r-1-k)``.

    Equals ``prod_a (4 lam_a)^(-1/2) * 2 * eigenvalue_jacobian``: the volume
    element of the Fisher line element ``1/4 sum dlam^2/lam`` on the simplex.
    """
    theta = np.asarray(theta, dtype=float)
    r = len(theta) + 1
    d = 1.0
    for k in range(1, r):
        d *= math.sin(theta[k - 1]) ** (r - 1 - k)
    return d


# --------------------------------------------------------------------------
# unitary factor


def unitary_from_angles(euler, N: int, n: int = 0) -> np.ndarray:
    """Unitary whose column ``a`` is the eigenvector of ``lam_a``."""
    check_stratum(N, n)
    _, levels = split_angles(np.concatenate([np.zeros(N - n - 1), euler]), N, n)
    U = np.eye(N, dtype=complex)
    for th, ph in levels:
        for j in range(len(th)):
            c, s = math.cos(th[j]), math.sin(th[j])
            e = complex(math.cos(ph[j]), math.sin(ph[j]))
            cj = U[:, j].copy()
            ck = U[:, j + 1]
            U[:, j] = cj * c + ck * (e * s)
            U[:, j + 1] = ck * c - cj * (e.conjugate() * s)
    # built with the null block first; reverse so pinned zeros trail
    return U[:, ::-1].copy()


def haar_density(euler, N: int, n: int = 0) -> float:
    """Haar density of the Euler angles on ``U(N)/(T^r x U(n))``.

    For ``N = 1`` there are no angles and the density is the constant 1.
    """
    check_stratum(N, n)
    _, levels = split_angles(np.concatenate([np.zeros(N - n - 1), euler]), N, n)
    d = 1.0
    for th, _ph in levels:
        for j in range(len(th)):
            d *= math.cos(th[j]) * math.sin(th[j]) ** (2 * j + 1)
    return abs(d)


def flag_volume(N: int, n: int = 0) -> float:
    """Integral of :func:`haar_density` over the Euler box."""
    return math.prod(math.pi ** (m - 1) / math.factorial(m - 1) for m in range(n + 1, N + 1))


# --------------------------------------------------------------------------
# samples


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    angles: np.ndarray


@dataclass
class UnitaryFactor:
    matrix: np.ndarray
    euler: np.ndarray
    haar_density: float


@dataclass
class StateSample:
    spectrum: Spectrum
    unitary: UnitaryFactor
    rho: np.ndarray
    n: int
    jacobian: float
    map_log_jacobian: float = 0.0

    @property
    def N(self) -> int:
        return self.rho.shape[0]

    @property
    def rank(self) -> int:
        return self.N - self.n


def angles_to_sample(angles, N: int, n: int = 0) -> StateSample:
    check_stratum(N, n)
    angles = np.asarray(angles, dtype=float)
    r = N - n
    theta = angles[: r - 1]
    euler = angles[r - 1:]
    lam = spectrum_from_angles(theta, N)
    U = unitary_from_angles(euler, N, n)
    rho = (U * lam) @ U.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return StateSample(
        Spectrum(lam, theta),
        UnitaryFactor(U, euler, haar_density(euler, N, n)),
        rho,
        n,
        eigenvalue_jacobian(theta),
    )


def point_to_sample(p, N: int, n: int = 0, angle_map: str = "linear") -> StateSample:
    """Map a hypercube point (array or ``HypercubePoint``) onto the stratum.

    ``map_log_jacobian`` of the result converts angle densities into
    densities over the map's parameters.
    """
    check_stratum(N, n)
    u = np.asarray(getattr(p, "coords", p), dtype=float)
    D = stratum_dim(N, n)
    if u.shape != (D,):
        raise ParamError(f"point has dimension {u.shape}, stratum N={N}, n={n} needs {D}")
    if np.any(u < 0.0) or np.any(u >= 1.0):
        raise ParamError("hypercube coordinates must lie in [0, 1)")
    ang = coords_to_angles(u, N, n, angle_map)
    sample = angles_to_sample(ang, N, n)
    sample.map_log_jacobian = map_log_jacobian(ang, N, n, angle_map)
    return sample


def rho_from_angles(angles, N: int, n: int = 0) -> np.ndarray:
    return angles_to_sample(angles, N, n).rho
