import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from qubitrisk.errors import DomainError, Singular
from qubitrisk.metrics import (
    BinaryDist,
    bures_sq,
    bures_sq_expansion,
    bures_weight_bloch,
    bures_weight_local,
    fidelity,
    fisher_pauli,
    hellinger_sq,
    kl,
    qre,
    qre_expansion,
)
from qubitrisk.states import (
    BlochState,
    LocalTheta,
    Rotation,
    random_direction,
    reconstruct,
)

Z = BlochState([0, 0, 1])
MIXED = BlochState([0, 0, 0])


def _random_state(rng, rmax=1.0):
    return BlochState(rmax * rng.uniform() ** (1 / 3) * random_direction(rng))


def _sqrtm_psd(a):
    w, v = np.linalg.eigh(a)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def _logm_psd(a):
    w, v = np.linalg.eigh(a)
    with np.errstate(divide="ignore"):
        return (v * np.log(w)) @ v.conj().T


class TestFidelity:
    def test_examples(self):
        assert fidelity(Z, Z) == 1.0
        assert fidelity(Z, BlochState([0, 0, -1])) == 0.0
        assert fidelity(MIXED, Z) == pytest.approx(0.5)

    def test_against_matrix_formula(self, rng):
        for _ in range(100):
            a, b = _random_state(rng), _random_state(rng)
            sa = _sqrtm_psd(a.density_matrix())
            ref = np.linalg.svd(sa @ _sqrtm_psd(b.density_matrix()), compute_uv=False).sum() ** 2
            assert fidelity(a, b) == pytest.approx(ref, abs=1e-7)

    def test_symmetric_and_rotation_invariant(self, rng):
        for _ in range(200):
            a, b = _random_state(rng), _random_state(rng)
            rot = Rotation.random(rng)
            ra, rb = BlochState(rot.apply(a.r)), BlochState(rot.apply(b.r))
            assert abs(fidelity(a, b) - fidelity(b, a)) < 1e-12
            assert abs(bures_sq(a, b) - bures_sq(b, a)) < 1e-12
            assert abs(fidelity(a, b) - fidelity(ra, rb)) < 1e-12
            assert abs(bures_sq(a, b) - bures_sq(ra, rb)) < 1e-12


class TestBures:
    def test_examples(self):
        s = BlochState([0.3, -0.1, 0.5])
        assert bures_sq(s, s) == pytest.approx(0.0, abs=1e-15)
        assert bures_sq(Z, BlochState([0, 0, -1])) == 2.0
        assert bures_sq(MIXED, Z) == pytest.approx(2 * (1 - math.sqrt(0.5)), rel=1e-14)

    def test_range(self, rng):
        vals = [bures_sq(_random_state(rng), _random_state(rng)) for _ in range(500)]
        assert min(vals) >= 0 and max(vals) <= 2

    def test_small_distance_precision(self):
        # cancellation-free form keeps relative accuracy for nearby states
        eps = 1e-7
        a = BlochState([0, 0, 0.5])
        b = BlochState([eps, 0, 0.5])
        expected = 0.25 * eps**2
        assert bures_sq(a, b) == pytest.approx(expected, rel=1e-5)


class TestHellinger:
    def test_examples(self):
        assert hellinger_sq(0.3, 0.3) == 0.0
        assert hellinger_sq(0.0, 1.0) == pytest.approx(2.0)
        assert hellinger_sq(0.0, 0.5) == pytest.approx(2 - math.sqrt(2))
        assert hellinger_sq(BinaryDist(0.0), BinaryDist(0.5)) == pytest.approx(2 - math.sqrt(2))

    def test_naive_formula(self, rng):
        p, q = rng.uniform(size=1000), rng.uniform(size=1000)
        ref = (np.sqrt(p) - np.sqrt(q)) ** 2 + (np.sqrt(1 - p) - np.sqrt(1 - q)) ** 2
        assert_allclose(hellinger_sq(p, q), ref, rtol=1e-10, atol=1e-15)

    def test_bounds_on_grid(self):
        g = np.linspace(0, 1, 200)
        p, q = np.meshgrid(g, g)
        h, k = hellinger_sq(p, q), kl(p, q)
        assert np.all(h <= k + 1e-12)
        assert np.all(h <= 2 * np.abs(p - q) + 1e-12)

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_triangle(self, a, b, c):
        d = lambda x, y: math.sqrt(hellinger_sq(x, y))
        assert d(a, c) <= d(a, b) + d(b, c) + 1e-12

    def test_binary_dist_validation(self):
        with pytest.raises(DomainError):
            BinaryDist(1.2)


class TestKL:
    def test_examples(self):
        assert kl(0.4, 0.4) == 0.0
        assert kl(0.5, 0.25) == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(2 / 3))
        assert kl(0.5, 0.0) == math.inf
        assert kl(0.0, 0.0) == 0.0

    def test_zero_times_log_zero(self):
        assert kl(0.0, 0.3) == pytest.approx(-math.log(0.7))


class TestQRE:
    def test_examples(self):
        s = BlochState([0.2, 0.2, -0.6])
        assert qre(s, s) == pytest.approx(0.0, abs=1e-15)
        assert qre(Z, MIXED) == pytest.approx(math.log(2))
        assert qre(MIXED, Z) == math.inf
        assert qre(Z, Z) == 0.0

    def test_against_matrix_log(self, rng):
        for _ in range(200):
            a, b = _random_state(rng, 0.999), _random_state(rng, 0.999)
            ra, rb = a.density_matrix(), b.density_matrix()
            ref = np.trace(ra @ (_logm_psd(ra) - _logm_psd(rb))).real
            assert qre(a, b) == pytest.approx(ref, abs=1e-9)

    def test_bloch_formula(self, rng):
        for _ in range(200):
            a, b = _random_state(rng, 0.99), _random_state(rng, 0.99)
            na, nb = a.norm, b.norm
            cos = float(a.r @ b.r) / (na * nb)
            ref = 0.5 * (
                math.log(1 - na**2) - math.log(1 - nb**2)
                + na * math.log((1 + na) / (1 - na))
                - na * cos * math.log((1 + nb) / (1 - nb))
            )
            assert qre(a, b) == pytest.approx(ref, abs=1e-10)

    def test_nonnegative_and_asymmetric(self, rng):
        asym = 0
        for _ in range(500):
            a, b = _random_state(rng), _random_state(rng, 0.999)
            v = qre(a, b)
            assert v >= 0
            if b.norm < 1 and a.norm < 1 and abs(v - qre(b, a)) > 1e-6:
                asym += 1
        assert asym > 400

    def test_pure_estimate_of_other_state(self):
        assert qre(BlochState([1, 0, 0]), Z) == math.inf


def _rotated_pair(lam, lam_hat, phi):
    a = BlochState([0, 0, 1 - 2 * lam])
    b = BlochState((1 - 2 * lam_hat) * np.array([math.sin(phi), 0, math.cos(phi)]))
    return a, b


class TestBuresExpansion:
    def test_trivial(self):
        d = bures_sq_expansion(0.25, 0.25, 0.0)
        assert d.eigen_term == 0 and d.rotation_term == 0

    def test_pure_coefficient(self):
        for phi in (0.01, 0.1, 0.3):
            assert bures_sq_expansion(0, 0, phi).rotation_term == pytest.approx(phi**2 / 4)

    def test_example_point(self):
        d = bures_sq_expansion(0.1, 0.12, 0.05)
        exact = bures_sq(*_rotated_pair(0.1, 0.12, 0.05))
        assert abs(exact - d.total) <= 0.05**4
        assert d.remainder_bound == pytest.approx(abs(exact - d.total))

    def test_remainder_grid(self):
        worst = 0.0
        for lam in np.linspace(0, 0.45, 10):
            for lam_hat in np.linspace(0, 0.45, 10):
                for phi in np.linspace(0.01, 0.3, 8):
                    d = bures_sq_expansion(lam, lam_hat, phi)
                    worst = max(worst, d.remainder_bound / phi**4)
        assert worst <= 1.0

    def test_domain(self):
        with pytest.raises(DomainError):
            bures_sq_expansion(0.6, 0.1, 0.1)
        with pytest.raises(DomainError):
            bures_sq_expansion(0.1, 0.1, 0.6)


class TestQREExpansion:
    def test_trivial(self):
        assert qre_expansion(0.2, 0.2, 0.0).total == 0.0

    def test_example_point(self):
        lam, lam_hat, phi = 0.1, 0.12, 0.05
        d = qre_expansion(lam, lam_hat, phi)
        exact = qre(*_rotated_pair(lam, lam_hat, phi))
        assert abs(exact - d.total) <= phi**4 * math.log(1 / lam_hat)

    def test_remainder_scales_as_phi4(self):
        r1 = qre_expansion(0.1, 0.12, 0.1).remainder_bound
        r2 = qre_expansion(0.1, 0.12, 0.05).remainder_bound
        assert r1 / r2 == pytest.approx(16, rel=0.05)

    def test_pure_truth_lower_bound(self):
        # for a pure truth the loss exceeds the eigenvalue term plus a log-weighted tilt
        n, c = 1000, 1.0
        lam_hat = c / (4 * n)
        d = qre_expansion(0.0, lam_hat, 0.0)
        assert d.total >= math.log(1 / (1 - lam_hat)) - 1e-15
        tilt = 2 * math.sqrt(c / (4 * n))
        d = qre_expansion(0.0, lam_hat, tilt)
        assert d.total >= math.log(1 / (1 - lam_hat)) + (c / (4 * n)) * math.log(
            (1 - lam_hat) / lam_hat) - 1e-12

    def test_lam_hat_zero(self):
        with pytest.raises(DomainError):
            qre_expansion(0.1, 0.0, 0.1)


class TestFisher:
    def test_examples(self):
        assert_allclose(fisher_pauli(MIXED), np.eye(3))
        assert_allclose(fisher_pauli(BlochState([0, 0, 0.8])), np.diag([1, 1, 1 / 0.36]))

    def test_dominates_identity(self, rng):
        for _ in range(200):
            I = fisher_pauli(_random_state(rng, 0.999))
            assert np.linalg.eigvalsh(I - np.eye(3)).min() >= -1e-12

    def test_singular(self):
        with pytest.raises(Singular):
            fisher_pauli(Z)


class TestBuresWeight:
    def test_examples(self):
        assert_allclose(bures_weight_bloch(MIXED), 0.25 * np.eye(3))
        assert_allclose(bures_weight_bloch(BlochState([0, 0, 0.6])),
                        np.diag([0.25, 0.25, 0.390625]))

    def test_singular(self):
        with pytest.raises(Singular):
            bures_weight_bloch(Z)

    def test_finite_difference(self, rng):
        for _ in range(100):
            s = _random_state(rng, 0.95)
            G = bures_weight_bloch(s)
            d = random_direction(rng)
            for h in (1e-3, 1e-4):
                t = BlochState(s.r + h * d)
                # symmetric difference cancels the cubic term
                u = BlochState(s.r - h * d)
                fd = 0.5 * (bures_sq(s, t) + bures_sq(s, u)) / h**2
                assert fd == pytest.approx(d @ G @ d, rel=1e-4)


class TestLocalWeight:
    def test_examples(self):
        assert_allclose(bures_weight_local(0.25), np.diag([4 / 3, 0.25, 0.25]))
        g = bures_weight_local(0.5 - 1e-8)
        assert g[1, 1] < 1e-15 and g[2, 2] < 1e-15

    @pytest.mark.parametrize("lam0", [0.0, 0.5])
    def test_singular(self, lam0):
        with pytest.raises(Singular):
            bures_weight_local(lam0)

    def test_domain(self):
        with pytest.raises(DomainError):
            bures_weight_local(0.7)

    @pytest.mark.parametrize("lam0", [0.05, 0.25, 0.4])
    def test_quadratic_form(self, lam0, rng):
        gamma = bures_weight_local(lam0)
        errs = []
        for n in (10**4, 10**6, 10**8):
            worst = 0.0
            for _ in range(20):
                u, v = rng.uniform(-1, 1, 2)
                h = rng.uniform(-1, 1, 3)
                a = reconstruct(LocalTheta(lam0, u, v, n))
                b = reconstruct(LocalTheta(lam0 + h[0] / math.sqrt(n), u + h[1], v + h[2], n))
                worst = max(worst, abs(n * bures_sq(a, b) - h @ gamma @ h))
            errs.append(worst)
        # error shrinks at least like n^(-1/2)
        assert errs[1] < errs[0] / 5 and errs[2] < errs[1] / 5
        assert errs[2] < 1e-2
