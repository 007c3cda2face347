import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sepvol import metrics, param
from sepvol.metrics import MetricKind, mc_function

MONOTONE = [m for m in metrics.ALL_METRICS if m.monotone]
pos = st.floats(1e-6, 1.0)


def test_kernel_examples():
    assert mc_function("bures", 0.5, 0.5) == pytest.approx(2.0)
    assert mc_function("geom", 4, 9) == pytest.approx(1 / 6)
    assert mc_function("wy", 0.25, 0.25) == pytest.approx(4.0)


@pytest.mark.parametrize("a", [1e-3, 0.1, 0.7])
def test_gks_diagonal_limit(a):
    # symmetric difference: the first-order term cancels
    for eps in (1e-5 * a, 1e-4 * a):
        lim = 0.5 * (mc_function("gks", a, a + eps) + mc_function("gks", a, a - eps))
        assert lim == pytest.approx(1 / a, rel=1e-8)


@pytest.mark.parametrize("kind", MONOTONE)
@given(a=pos, b=pos)
def test_kernel_symmetry(kind, a, b):
    assert mc_function(kind, a, b) == pytest.approx(mc_function(kind, b, a), rel=1e-12)


@pytest.mark.parametrize("kind", MONOTONE)
@given(a=pos)
def test_kernel_diagonal(kind, a):
    assert abs(mc_function(kind, a, a) * a - 1) < 1e-12


@pytest.mark.parametrize("kind", MONOTONE)
@given(a=pos, b=pos)
def test_vectorized_kernel_matches_scalar(kind, a, b):
    v = metrics.log_mc_array(kind.code, np.array([a]), np.array([b]))[0]
    assert v == pytest.approx(metrics.log_mc(kind.code, a, b), rel=1e-12, abs=1e-12)


def test_kernel_ordering_on_grid():
    grid = np.linspace(0.01, 1.0, 40)
    for a in grid:
        for b in grid:
            lo = mc_function("bures", a, b)
            hi = mc_function("geom", a, b)
            for k in ("km", "wy", "gks", "arith"):
                c = mc_function(k, a, b)
                assert lo * (1 - 1e-12) <= c <= hi * (1 + 1e-12)


@pytest.mark.parametrize("kind,limit", [("bures", 2.0), ("wy", 4.0), ("arith", 4.0),
                                         ("gks", math.e)])
def test_boundary_limits(kind, limit):
    for lam in (0.3, 0.01):
        assert mc_function(kind, lam, 0.0) == pytest.approx(limit / lam, rel=1e-12)


def test_divergent_kernels_at_zero():
    assert mc_function("km", 0.3, 0.0) == math.inf
    assert mc_function("geom", 0.0, 0.3) == math.inf
    with pytest.raises(ValueError):
        mc_function("hs", 0.1, 0.2)
    with pytest.raises(ValueError):
        mc_function("bures", -0.1, 0.2)
    with pytest.raises(ValueError):
        MetricKind.parse("fubini")


def test_bures_weight_matches_tensor_at_random_n4_sample():
    rng = np.random.default_rng(4)
    for _ in range(5):
        s = metrics.interior_sample(rng, 4)
        assert metrics.tensor_mismatch("bures", s) < 1e-4


@pytest.mark.parametrize("kind", metrics.ALL_METRICS)
def test_equal_eigenvalues_give_zero_weight(kind):
    s = param.angles_to_sample([0.3, 0.7, 0.2, 2.0, 0.5, 1.0, 4.0, 0.4], 3)
    s.spectrum.eigenvalues[:] = [0.25, 0.25, 0.5]
    w = metrics.volume_weight(kind, s)
    assert w.value == 0.0 and w.finite


def test_geometric_weight_with_tiny_eigenvalue_is_huge_but_finite():
    rng = np.random.default_rng(2)
    ang = rng.uniform(0.3, 1.2, 35)
    ang[4] = 1e-15  # lam_6 ~ 1e-30
    s = param.angles_to_sample(ang, 6)
    assert 0 < s.spectrum.eigenvalues[5] < 1e-29
    w = metrics.volume_weight("geom", s)
    b = metrics.volume_weight("bures", s)
    assert w.finite and w.value / b.value > 1e40


def test_two_level_bures_volume_by_quadrature():
    # 3-dim: spectrum angle, one polar angle, one phase (weight does not depend on it)
    x, wq = np.polynomial.legendre.leggauss(64)
    t = (x + 1) * math.pi / 4
    wt = wq * math.pi / 4
    total = 0.0
    for t1, w1 in zip(t, wt):
        for t2, w2 in zip(t, wt):
            s = param.angles_to_sample([t1, t2, 0.0], 2)
            total += w1 * w2 * metrics.volume_weight("bures", s).value
    vol = total * 2 * math.pi / param.multiplicity(2)
    assert vol == pytest.approx(math.pi**2 / 8, rel=1e-3)


@pytest.mark.parametrize("N,n", [(2, 0), (3, 0), (3, 1), (4, 1)])
def test_hs_weight_is_gram_determinant(N, n):
    rng = np.random.default_rng(N + n)
    for _ in range(5):
        s = metrics.interior_sample(rng, N, n)
        X = metrics.tangents(s)
        G = np.einsum("kij,lji->kl", X, X).real  # Tr(X_k X_l)
        direct = math.sqrt(np.linalg.det(G))
        assert metrics.volume_weight("hs", s).value == pytest.approx(direct, rel=1e-6)
        assert metrics.tensor_mismatch("hs", s) < 1e-6


def test_scaling_one_tangent_doubles_sqrt_det():
    s = metrics.interior_sample(np.random.default_rng(0), 3)
    X = metrics.tangents(s)
    base = metrics.metric_tensor_numeric("wy", s, basis=X)
    X2 = X.copy()
    X2[3] *= 2
    scaled = metrics.metric_tensor_numeric("wy", s, basis=X2)
    assert scaled.sqrt_det == pytest.approx(2 * base.sqrt_det, rel=1e-12)


@pytest.mark.parametrize("kind", metrics.ALL_METRICS)
@pytest.mark.parametrize("N,n", [(2, 0), (3, 1), (4, 0), (6, 1)])
def test_weight_matches_tensor(kind, N, n):
    rng = np.random.default_rng(hash((kind.value, N, n)) % 2**32)
    for _ in range(4):
        assert metrics.tensor_mismatch(kind, metrics.interior_sample(rng, N, n)) < 1e-4


def test_boundary_weights_flag_regularization():
    s = metrics.interior_sample(np.random.default_rng(1), 4, 1)
    assert metrics.volume_weight("km", s).regularized
    assert not metrics.volume_weight("bures", s).regularized
    lo = metrics.volume_weight("km", s, floor=1e-18).value
    hi = metrics.volume_weight("km", s, floor=1e-12).value
    assert lo > hi > 0
