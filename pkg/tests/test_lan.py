import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from qubitrisk.errors import CutoffTooSmall, DimensionCap, DomainError
from qubitrisk.lan import (
    annihilation,
    build_block_state,
    gaussian_displaced_thermal,
    lan_trace_distance,
    nearest_block,
    quadrature_means,
    spin_matrices,
    suggested_cutoff,
    thermal_ratio,
    trace_distance,
)
from qubitrisk.states import LocalTheta, reconstruct


class TestSpin:
    @pytest.mark.parametrize("j", [0.5, 1, 1.5, 4, 7.5])
    def test_commutators(self, j):
        jx, jy, jz = spin_matrices(j)
        assert_allclose(jx @ jy - jy @ jx, 1j * jz, atol=1e-12)
        assert_allclose(jy @ jz - jz @ jy, 1j * jx, atol=1e-12)
        casimir = jx @ jx + jy @ jy + jz @ jz
        assert_allclose(casimir, j * (j + 1) * np.eye(int(2 * j + 1)), atol=1e-12)

    def test_half_is_pauli(self):
        jx, jy, jz = spin_matrices(0.5)
        assert_allclose(2 * jx, [[0, 1], [1, 0]])
        assert_allclose(2 * jy, [[0, -1j], [1j, 0]])
        assert_allclose(2 * jz, [[1, 0], [0, -1]])

    def test_bad_j(self):
        with pytest.raises(DomainError):
            spin_matrices(0.3)


class TestBlockState:
    def test_diagonal_example(self):
        rho = build_block_state(1, 10, 0.25, (0, 0))
        norm = (1 - 1 / 3) / (1 - 1 / 27)
        assert norm == pytest.approx(0.6923, abs=1e-4)
        assert_allclose(np.diag(rho).real, norm * np.array([1, 1 / 3, 1 / 9]))

    def test_qubit_block_is_rotated_qubit(self):
        for lam, u, v, n in [(0.1, 0.7, -0.3, 9), (0.3, 2.0, 1.0, 100), (0.05, -1.0, 0.0, 4)]:
            rho = build_block_state(0.5, n, lam, (u, v))
            ref = reconstruct(LocalTheta(lam, u, v, n)).density_matrix()
            assert_allclose(rho, ref, atol=1e-13)

    @settings(max_examples=40, deadline=None)
    @given(twoj=st.integers(0, 40), lam=st.floats(0.01, 0.49),
           u=st.floats(-3, 3), v=st.floats(-3, 3), n=st.integers(1, 500))
    def test_density_matrix(self, twoj, lam, u, v, n):
        rho = build_block_state(twoj / 2, n, lam, (u, v))
        assert abs(np.trace(rho) - 1) < 1e-12
        assert_allclose(rho, rho.conj().T, atol=1e-14)
        assert np.linalg.eigvalsh(rho).min() > -1e-12

    def test_unrotated_commutes_with_jz(self):
        rho = build_block_state(3, 20, 0.2, (0, 0))
        jz = spin_matrices(3)[2]
        assert_allclose(rho @ jz, jz @ rho, atol=1e-15)

    def test_cap(self):
        with pytest.raises(DimensionCap):
            build_block_state(256, 600, 0.2, (0, 0))
        build_block_state(255.5, 600, 0.2, (0, 0))


class TestGaussian:
    def test_thermal(self):
        lam = 0.25
        p = thermal_ratio(lam)
        rho = gaussian_displaced_thermal(lam, (0, 0), 30)
        assert_allclose(np.diag(rho).real, (1 - p) * p ** np.arange(30))
        assert np.count_nonzero(rho - np.diag(np.diag(rho))) == 0

    @pytest.mark.parametrize("lam,w", [(0.25, (1.0, 0.0)), (0.1, (0.3, -0.8)),
                                       (0.4, (-1.5, 0.5))])
    def test_quadrature_means(self, lam, w):
        rho = gaussian_displaced_thermal(lam, w, suggested_cutoff(lam, w))
        u, v = w
        expected = math.sqrt(1 - 2 * lam) * np.array([-v, u])
        assert_allclose(quadrature_means(rho), expected, atol=1e-6)

    def test_displacement_shrinks_toward_half(self):
        w = (1.0, 1.0)
        lams = np.array([0.3, 0.4, 0.45])
        amps = [np.hypot(*quadrature_means(gaussian_displaced_thermal(x, w, suggested_cutoff(x, w))))
                for x in lams]
        assert_allclose(amps, np.sqrt(2 * (1 - 2 * lams)), atol=1e-6)

    def test_truncated_trace(self):
        rho = gaussian_displaced_thermal(0.25, (1.0, 0.0), suggested_cutoff(0.25, (1.0, 0.0)))
        assert np.trace(rho).real >= 1 - 1e-8
        assert np.linalg.eigvalsh(rho).min() > -1e-12

    def test_cutoff_too_small(self):
        with pytest.raises(CutoffTooSmall) as info:
            gaussian_displaced_thermal(0.25, (1.0, 0.0), 5)
        assert info.value.suggested == suggested_cutoff(0.25, (1.0, 0.0))
        assert info.value.trace < 1 - 1e-8
        gaussian_displaced_thermal(0.25, (1.0, 0.0), info.value.suggested)

    def test_annihilation(self):
        a = annihilation(5)
        assert_allclose(np.diag(a.conj().T @ a).real[:4], np.arange(4))


class TestTraceDistance:
    def test_diagonal_case(self):
        lam, n = 0.25, 40
        p = thermal_ratio(lam)
        j = 10
        cutoff = 200
        d = lan_trace_distance(j, n, lam, (0, 0), cutoff)
        dim = 2 * j + 1
        # block excess on k < dim is p^dim; Gaussian tail beyond is p^dim - p^cutoff
        assert d == pytest.approx(0.5 * (2 * p**dim - p**cutoff), rel=1e-10)

    def test_simple(self):
        a = np.diag([1.0, 0.0])
        b = np.diag([0.0, 1.0])
        assert trace_distance(a, b) == 1.0

    def test_decreasing_w0(self):
        lam = 0.25
        ds = [lan_trace_distance(nearest_block(n, lam), n, lam, (0, 0), 120)
              for n in (50, 100, 200, 400)]
        assert all(b <= a for a, b in zip(ds, ds[1:]))

    def test_decreasing_with_slope(self):
        lam, w = 0.25, (1.0, 0.0)
        ns = np.array([50, 100, 200, 400])
        cutoff = suggested_cutoff(lam, w)
        ds = np.array([lan_trace_distance(nearest_block(n, lam), n, lam, w, cutoff) for n in ns])
        assert np.all(np.diff(ds) < 0)
        slope = np.polyfit(np.log(ns), np.log(ds), 1)[0]
        assert slope <= -0.15


class TestNearestBlock:
    def test_parity(self):
        for n in range(1, 60):
            j = nearest_block(n, 0.2)
            assert (2 * j - n) % 2 == 0
            assert abs(j - n * 0.3) <= 1

    def test_offset(self):
        assert nearest_block(100, 0.25, 2.0) == 27
        assert nearest_block(100, 0.25, -100) == 0
