import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sepvol import exact, kernels, param
from sepvol.lds import SequenceSpec, make_sequence
from sepvol.param import ParamError


@pytest.mark.parametrize("N", [2, 3, 4, 6, 9])
def test_stratum_dimension_matches_exact_module(N):
    for n in range(N):
        assert param.stratum_dim(N, n) == exact.d_n(N, n, 2)
        assert len(param.angle_ranges(N, n)) == param.stratum_dim(N, n)
    assert param.stratum_dim(6, 0) == 35 and param.stratum_dim(6, 1) == 34
    assert param.stratum_dim(6, 2) == 31
    assert param.n_euler(6, 0) == 30


def test_center_point_is_a_density_matrix():
    s = param.point_to_sample(np.full(15, 0.5), 4)
    rho = s.rho
    assert np.allclose(rho, rho.conj().T)
    assert np.trace(rho).real == pytest.approx(1.0)
    assert np.linalg.eigvalsh(rho).min() > -1e-14


def test_pure_state_corner():
    lam = param.spectrum_from_angles(np.zeros(5), 6)
    assert lam.tolist() == [1.0, 0, 0, 0, 0, 0]


def test_rank_five_slice_has_exact_zero():
    u = make_sequence(SequenceSpec(34, seed=3)).points(200)
    for p in u:
        s = param.point_to_sample(p, 6, 1)
        assert s.spectrum.eigenvalues[5] == 0.0
        assert s.rank == 5


def _spectrum_fd(theta, h=1e-6):
    r = len(theta) + 1
    J = np.empty((r - 1, r - 1))
    for k in range(r - 1):
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        lp = param.spectrum_from_angles(tp, r)
        lm = param.spectrum_from_angles(tm, r)
        J[:, k] = (lp - lm)[: r - 1] / (2 * h)
    return abs(np.linalg.det(J))


@pytest.mark.parametrize("r", [2, 3, 4, 6])
def test_eigenvalue_jacobian_matches_finite_differences(r):
    rng = np.random.default_rng(r)
    for _ in range(50):
        theta = rng.uniform(0.1, math.pi / 2 - 0.1, r - 1)
        assert param.eigenvalue_jacobian(theta) == pytest.approx(_spectrum_fd(theta), rel=1e-6)


def test_two_level_jacobian_is_sin_two_theta():
    for t in np.linspace(0.01, 1.5, 9):
        assert param.eigenvalue_jacobian([t]) == pytest.approx(abs(math.sin(2 * t)))


def test_boundary_slice_jacobian_positive():
    # N=4 pinned to rank 3: the restricted map has 2 angles and a positive Jacobian
    rng = np.random.default_rng(0)
    for _ in range(10):
        theta = rng.uniform(0.1, 1.4, 2)
        assert param.eigenvalue_jacobian(theta) == pytest.approx(_spectrum_fd(theta), rel=1e-6)
        assert param.eigenvalue_jacobian(theta) > 0


def test_haar_density_nonnegative():
    pts = make_sequence(SequenceSpec(30, seed=1)).points(20_000)
    euler = pts * param.angle_ranges(6, 0)[5:]
    assert all(param.haar_density(e, 6) >= 0 for e in euler)


def test_single_level_has_constant_density():
    assert param.haar_density(np.array([]), 1) == 1.0
    assert param.flag_volume(1) == 1.0


def test_haar_density_integrates_to_flag_volume():
    N = 3
    pts = make_sequence(SequenceSpec(param.n_euler(N), seed=2)).points(200_000)
    euler = pts * param.angle_ranges(N, 0)[N - 1:]
    box = float(np.prod(param.angle_ranges(N, 0)[N - 1:]))
    est = box * np.mean([param.haar_density(e, N) for e in euler])
    assert est == pytest.approx(param.flag_volume(N), rel=1e-2)


def _moments(U, w):
    w = w / w.sum()
    a = np.abs(U) ** 2
    return (np.einsum("k,kij->ij", w, a), np.einsum("k,kij->ij", w, a**2),
            np.einsum("k,kij->ij", w, U.real), np.einsum("k,kij->ij", w, U.real**2))


def test_unitary_moments_match_ginibre_qr():
    N, M = 3, 50_000
    pts = make_sequence(SequenceSpec(param.n_euler(N), seed=8)).points(M)
    euler = pts * param.angle_ranges(N, 0)[N - 1:]
    Us = np.array([param.unitary_from_angles(e, N) for e in euler])
    w = np.array([param.haar_density(e, N) for e in euler])
    # a random diagonal phase makes the Euler factor Haar on U(N)
    ph = np.exp(2j * np.pi * np.random.default_rng(0).random((M, N)))
    ours = _moments(Us * ph[:, None, :], w)
    rng = np.random.default_rng(1)
    Z = (rng.standard_normal((M, N, N)) + 1j * rng.standard_normal((M, N, N))) / math.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R, axis1=1, axis2=2)
    Q = Q * (d / np.abs(d))[:, None, :]
    ref = _moments(Q, np.ones(M))
    for a, b in zip(ours, ref):
        assert np.max(np.abs(a - b)) < 1e-2
    assert np.allclose(ours[0], 1 / N, atol=1e-2)
    assert np.allclose(ours[1], 2 / (N * (N + 1)), atol=1e-2)


@pytest.mark.parametrize("N,n", [(2, 0), (3, 1), (4, 0), (4, 2), (6, 0), (6, 1)])
def test_rank_and_spectrum(N, n):
    pts = make_sequence(SequenceSpec(param.stratum_dim(N, n), seed=6)).points(300)[1:]
    for p in pts:
        s = param.point_to_sample(p, N, n)
        ev = np.linalg.eigvalsh(s.rho)
        assert np.sum(ev > 1e-14) == N - n
        assert np.allclose(np.sort(ev), np.sort(s.spectrum.eigenvalues), atol=1e-10)
        assert np.allclose(s.unitary.matrix.conj().T @ s.unitary.matrix, np.eye(N), atol=1e-12)


@pytest.mark.parametrize("N", [2, 3, 4, 6])
@pytest.mark.parametrize("angle_map", ["linear", "haar"])
def test_every_point_gives_a_density_matrix(N, angle_map):
    n = 0
    pts = make_sequence(SequenceSpec(param.stratum_dim(N, n), seed=N)).points(100_000)
    lam, rho, *_ = kernels._states_numpy(pts, N, n, param.angle_ranges(N, n, angle_map),
                                          angle_map == "haar")
    assert np.allclose(np.trace(rho, axis1=1, axis2=2), 1.0, atol=1e-12)
    assert np.allclose(rho, np.conj(np.swapaxes(rho, 1, 2)))
    assert np.linalg.eigvalsh(rho).min() > -1e-12
    assert np.all(lam >= 0) and np.allclose(lam.sum(axis=1), 1.0)


def test_haar_map_jacobian_matches_finite_differences():
    N, n = 4, 1
    rng = np.random.default_rng(3)
    j = param.plane_index(N, n)
    for _ in range(20):
        u = rng.uniform(0.1, 0.9, param.stratum_dim(N, n))
        ang = param.coords_to_angles(u, N, n, "haar")
        fd = 1.0
        for i in np.nonzero(j >= 0)[0]:
            up, um = u.copy(), u.copy()
            up[i] += 1e-6
            um[i] -= 1e-6
            d = (param.coords_to_angles(up, N, n, "haar")[i]
                 - param.coords_to_angles(um, N, n, "haar")[i]) / 2e-6
            fd *= d
        assert param.map_log_jacobian(ang, N, n, "haar") == pytest.approx(math.log(fd), abs=1e-6)


def test_haar_map_flattens_the_haar_density():
    N = 4
    rng = np.random.default_rng(5)
    vals = []
    for _ in range(20):
        u = rng.uniform(0.05, 0.95, param.stratum_dim(N))
        s = param.point_to_sample(u, N, 0, "haar")
        vals.append(math.log(s.unitary.haar_density) + s.map_log_jacobian)
    # density per unit of x is prod 1/(2j+2), a constant
    want = -sum(math.log(2 * j + 2) for m in range(N, 0, -1) for j in range(m - 1))
    assert np.allclose(vals, want)


def test_box_measures():
    assert param.box_measure(2, 0) == pytest.approx(math.pi / 2 * math.pi / 2 * 2 * math.pi)
    assert param.box_measure(2, 0, "haar") == pytest.approx(math.pi / 2 * 2 * math.pi)
    assert param.multiplicity(6, 1) == 120


def test_point_validation():
    with pytest.raises(ParamError):
        param.point_to_sample(np.full(14, 0.5), 4)
    with pytest.raises(ParamError):
        param.point_to_sample(np.full(15, 1.0), 4)
    with pytest.raises(ParamError):
        param.check_stratum(4, 4)
    with pytest.raises(ParamError):
        param.angle_ranges(4, 0, "sobol")


@given(st.lists(st.floats(0.0, math.pi / 2), min_size=1, max_size=6))
def test_spectrum_is_on_the_simplex(theta):
    lam = param.spectrum_from_angles(theta, len(theta) + 1)
    assert np.all(lam >= 0)
    assert lam.sum() == pytest.approx(1.0)
