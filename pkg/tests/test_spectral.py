"""Eigendecomposition invariants and spectrum utilities."""

import json

import numpy as np
import pytest

import specband as sb
from specband.spectral import SpectralError, save_spectrum


def _random_graph(rng, n):
    edges = set()
    for i in range(n - 1):
        edges.add((i, i + 1))
    for _ in range(2 * n):
        u, v = rng.integers(0, n, size=2)
        if u != v:
            edges.add((min(u, v), max(u, v)))
    return sb.Graph(n, tuple(edges))


class TestEigendecompose:
    def test_identity(self):
        spec = sb.eigendecompose(np.eye(5))
        np.testing.assert_allclose(spec.eigenvalues, np.ones(5))
        u = spec.eigenvectors
        assert np.max(np.abs(u.T @ u - np.eye(5))) <= 1e-8

    def test_single_edge(self):
        spec = sb.eigendecompose(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(spec.eigenvalues, [-1.0, 1.0], atol=1e-12)

    def test_star_characteristic_polynomial_oracle(self):
        # char poly of the normalized star adjacency is x^2 (x^2 - 1)
        a = sb.normalized_adjacency(sb.Graph(4, ((0, 1), (0, 2), (0, 3))))
        spec = sb.eigendecompose(a)
        for lam in spec.eigenvalues:
            assert abs(lam ** 2 * (lam ** 2 - 1.0)) <= 1e-8
        np.testing.assert_allclose(spec.eigenvalues, [-1, 0, 0, 1], atol=1e-8)

    def test_rejects_asymmetric(self):
        a = np.array([[0.0, 1.0], [0.5, 0.0]])
        with pytest.raises(SpectralError, match="asymmetry"):
            sb.eigendecompose(a)

    def test_rejects_non_finite(self):
        a = np.array([[0.0, np.nan], [np.nan, 0.0]])
        with pytest.raises(SpectralError, match="non-finite"):
            sb.eigendecompose(a)

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        a = sb.normalized_adjacency(_random_graph(rng, 30))
        s1, s2 = sb.eigendecompose(a), sb.eigendecompose(a)
        assert np.array_equal(s1.eigenvalues, s2.eigenvalues)
        assert np.array_equal(s1.eigenvectors, s2.eigenvectors)

    @pytest.mark.parametrize("seed", range(10))
    def test_reconstruction_and_orthonormality(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 60))
        a = sb.normalized_adjacency(_random_graph(rng, n))
        spec = sb.eigendecompose(a)
        u, lam = spec.eigenvectors, spec.eigenvalues
        assert np.max(np.abs(u @ np.diag(lam) @ u.T - a)) <= 1e-8
        assert np.max(np.abs(u.T @ u - np.eye(n))) <= 1e-8
        assert np.all(np.abs(lam) <= 1.0 + 1e-8)


class TestDistinctEigenvalues:
    def test_exact_grouping(self):
        spec = sb.Spectrum(np.array([-1.0, 0.0, 0.0, 1.0]), np.eye(4), 4)
        ds = sb.distinct_eigenvalues(spec, tol=1e-8)
        np.testing.assert_allclose(ds.values, [-1.0, 0.0, 1.0])
        assert ds.multiplicities.tolist() == [1, 2, 1]

    def test_sub_tolerance_merge(self):
        spec = sb.Spectrum(np.array([0.0, 0.5e-9, 1.0]), np.eye(3), 3)
        ds = sb.distinct_eigenvalues(spec, tol=1e-8)
        assert ds.s == 2
        assert ds.multiplicities.tolist() == [2, 1]

    def test_multiplicities_sum_to_n(self):
        rng = np.random.default_rng(3)
        a = sb.normalized_adjacency(_random_graph(rng, 25))
        spec = sb.eigendecompose(a)
        ds = sb.distinct_eigenvalues(spec)
        assert int(ds.multiplicities.sum()) == 25
        assert np.all(np.diff(ds.values) > ds.tolerance)

    def test_rejects_bad_tolerance(self):
        spec = sb.Spectrum(np.zeros(2), np.eye(2), 2)
        with pytest.raises(SpectralError):
            sb.distinct_eigenvalues(spec, tol=0.0)


class TestZeroMultiplicity:
    def test_star(self):
        a = sb.normalized_adjacency(sb.Graph(4, ((0, 1), (0, 2), (0, 3))))
        assert sb.zero_multiplicity(sb.eigendecompose(a)) == 2

    def test_single_edge(self):
        a = sb.normalized_adjacency(sb.Graph(2, ((0, 1),)))
        assert sb.zero_multiplicity(sb.eigendecompose(a)) == 0


class TestMinimalPolyResidual:
    def test_identity(self):
        spec = sb.eigendecompose(np.eye(4))
        ds = sb.distinct_eigenvalues(spec)
        x = np.zeros(4)
        x[0] = 1.0
        assert sb.minimal_poly_residual(np.eye(4), ds, x) == 0.0

    def test_involution(self):
        a = np.array([[0.0, 1.0], [1.0, 0.0]])
        ds = sb.distinct_eigenvalues(sb.eigendecompose(a))
        x = np.array([1.0, 0.0])
        assert sb.minimal_poly_residual(a, ds, x) == 0.0

    def test_dimension_mismatch(self):
        a = np.eye(3)
        ds = sb.distinct_eigenvalues(sb.eigendecompose(a))
        with pytest.raises(SpectralError, match="mismatch"):
            sb.minimal_poly_residual(a, ds, np.ones(4))

    def test_matches_full_product_oracle(self):
        rng = np.random.default_rng(11)
        g = _random_graph(rng, 20)
        a = sb.normalized_adjacency(g)
        ds = sb.distinct_eigenvalues(sb.eigendecompose(a))
        x = rng.standard_normal(20)
        x /= np.linalg.norm(x)
        res = sb.minimal_poly_residual(a, ds, x)
        full = np.eye(20)
        for v in ds.values:
            full = (a - v * np.eye(20)) @ full
        oracle = float(np.max(np.abs(full @ x)))
        assert res <= 1e-6 * 20
        assert oracle <= 1e-6 * 20
        assert abs(res - oracle) <= 1e-6 * 20

    @pytest.mark.parametrize("seed", range(10))
    def test_residual_bound_random_graphs(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(8, 64))
        a = sb.normalized_adjacency(_random_graph(rng, n))
        ds = sb.distinct_eigenvalues(sb.eigendecompose(a))
        x = rng.standard_normal(n)
        x /= np.linalg.norm(x)
        assert sb.minimal_poly_residual(a, ds, x) <= 1e-6 * n


class TestSaveSpectrum:
    def test_writes_metadata_and_values(self, tmp_path):
        a = sb.normalized_adjacency(sb.Graph(4, ((0, 1), (0, 2), (0, 3))))
        spec = sb.eigendecompose(a)
        out = save_spectrum(spec, tmp_path, include_vectors=True)
        assert out["n"] == 4 and out["nu0"] == 2
        lam = np.loadtxt(out["paths"]["eigenvalues"], delimiter=",")
        np.testing.assert_allclose(lam, spec.eigenvalues)
        u = np.load(out["paths"]["eigenvectors"])
        assert u.shape == (4, 4)
        meta = json.loads(open(out["paths"]["meta"]).read())
        assert meta["nu0"] == 2
