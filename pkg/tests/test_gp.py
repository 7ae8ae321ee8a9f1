import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import special

from vgwarp.exceptions import DomainError, ParameterError
from vgwarp.geometry import Partition
from vgwarp.gp import (
    KernelField,
    build_cov_matrix,
    kernel_range,
    make_rng,
    ns_matern_cov,
    regular_grid,
    simulate,
)
from vgwarp.variogram import matern_correlation


def kernel_cov_oracle(si, sj, Ki, Kj, sgi, sgj, nu):
    A = (Ki + Kj) / 2
    d = np.asarray(si) - np.asarray(sj)
    Q = d @ np.linalg.solve(A, d)
    pref = sgi * sgj * np.linalg.det(Ki) ** 0.25 * np.linalg.det(Kj) ** 0.25 / np.sqrt(np.linalg.det(A))
    if Q == 0:
        return pref
    x = 2 * np.sqrt(nu * Q)
    return pref * x ** nu * special.kv(nu, x) / (2 ** (nu - 1) * special.gamma(nu))


@pytest.fixture
def field(two_regions):
    K = np.array([[[0.04, 0.01], [0.01, 0.05]], [[0.1849, 0.0], [0.0, 0.1]]])
    return KernelField(two_regions, K, [1.0, 1.5], 0.6)


class TestCovariance:
    def test_matches_oracle_across_regions(self, field):
        for si, sj in [([0.3, 0.4], [1.6, 1.1]), ([0.3, 0.4], [0.5, 0.9]), ([1.2, 1.2], [1.9, 0.1])]:
            ri, rj = field.partition.regions_of([si, sj])
            want = kernel_cov_oracle(si, sj, field.kernels[ri], field.kernels[rj],
                                     field.sigmas[ri], field.sigmas[rj], field.nu)
            assert_allclose(ns_matern_cov(si, sj, field), want, rtol=1e-12)

    def test_constant_kernel_is_stationary_matern(self, two_regions):
        f = KernelField.isotropic(two_regions, 0.1849, 1.0, 0.6)
        X = make_rng(0).uniform(0, 2, (40, 2))
        D = np.linalg.norm(X[:, None] - X[None], axis=2)
        want = matern_correlation(D, kernel_range(0.1849, 0.6), 0.6)
        assert_allclose(build_cov_matrix(X, f), want, atol=1e-12)

    def test_matrix_symmetric_positive_definite(self, field):
        C = build_cov_matrix(regular_grid(nx=12, ny=12), field)
        assert_allclose(C, C.T)
        assert np.linalg.eigvalsh(C).min() > 0
        assert_allclose(np.diag(C)[:6], 1.0)

    def test_rejects_bad_kernels(self, two_regions):
        with pytest.raises(ParameterError):
            KernelField(two_regions, np.array([np.eye(2), -np.eye(2)]), 1.0, 0.5)
        with pytest.raises(ParameterError):
            KernelField(two_regions, np.array([[[1, 0.5], [0, 1]], np.eye(2)]), 1.0, 0.5)
        with pytest.raises(ParameterError):
            KernelField(two_regions, np.array([np.eye(2)]), 1.0, 0.5)

    def test_sites_must_be_planar(self, field):
        with pytest.raises(DomainError):
            build_cov_matrix(np.zeros((3, 3)), field)


class TestSimulate:
    def test_seeded(self, field):
        X = regular_grid(nx=8, ny=8)
        a = simulate(X, field, 42).values
        assert_allclose(simulate(X, field, 42).values, a, rtol=0, atol=0)
        assert not np.allclose(simulate(X, field, 43).values, a)

    def test_replicate_covariance(self, field):
        X = regular_grid(nx=5, ny=5)
        reps = simulate(X, field, 1, n_replicates=20000)
        assert reps.shape == (20000, 25)
        # Sampling sd of a covariance entry is about 2.25 * sqrt(2 / 20000).
        assert_allclose(np.cov(reps.T), build_cov_matrix(X, field), atol=0.1)

    def test_grid_order(self):
        g = regular_grid(0, 1, 0, 2, 3, 2)
        assert_allclose(g, [[0, 0], [0.5, 0], [1, 0], [0, 2], [0.5, 2], [1, 2]])

    def test_rng_is_philox(self):
        assert isinstance(make_rng(0).bit_generator, np.random.Philox)
