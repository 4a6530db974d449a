"""Tests for sphere_measure.py - sampling, exact monomial integrals and integration."""

from fractions import Fraction

import numpy as np
import pytest

from src.core.covering_domain import ComplexPoint2, CoveringMap
from src.core.errors import ConfigurationError, DomainError, EmptyInputError, NonFiniteError
from src.core.sphere_measure import (
    BoundarySampleSet,
    IntegralEstimate,
    MultiIndex,
    cap_measure,
    derive_seed,
    estimate_cap_measure,
    integrate_boundary,
    integrate_values,
    load_sample_set,
    mixed_monomial_integral,
    monomial_integral,
    pulled_back_monomial_integral,
    sample_boundary,
    sample_sphere,
    save_sample_set,
)


class TestSampling:
    """Tests for seeded sphere and boundary sampling."""

    def test_sphere_points_have_unit_norm(self):
        points = sample_sphere(seed=1, count=500)
        assert points.shape == (500, 2)
        assert np.allclose(np.linalg.norm(points, axis=1), 1.0)

    def test_same_seed_same_points(self):
        """Test bit-identical reruns for a fixed seed."""
        covering = CoveringMap(2)
        first = sample_boundary(covering, seed=42, count=300)
        second = sample_boundary(covering, seed=42, count=300)
        assert np.array_equal(first.points, second.points)
        assert np.array_equal(first.weights, second.weights)

    def test_different_seeds_differ(self):
        covering = CoveringMap(1)
        first = sample_boundary(covering, seed=1, count=10)
        second = sample_boundary(covering, seed=2, count=10)
        assert not np.array_equal(first.points, second.points)

    @pytest.mark.parametrize("q", [1, 2, 3])
    def test_boundary_sample_mass_and_membership(self, q):
        """Test total mass N, uniform weights N/count and boundary membership."""
        covering = CoveringMap(q)
        samples = sample_boundary(covering, seed=3, count=1000)
        assert samples.mass == q
        assert samples.weights.sum() == pytest.approx(q)
        assert np.allclose(samples.weights, q / 1000)
        assert np.all(covering.is_on_boundary(samples.points))
        assert samples.uniform
        assert samples.label == "sigma_M"

    def test_sheets_are_all_used(self):
        """Test that sheets are drawn uniformly, so every sheet appears."""
        covering = CoveringMap(3)
        samples = sample_boundary(covering, seed=5, count=600)
        sheets = {covering.sheet_index(ComplexPoint2(*row)) for row in samples.points[:200]}
        assert sheets == {0, 1, 2}

    def test_ramification_guard_resamples(self):
        """Test that a huge guard forces replacements and every point clears it."""
        covering = CoveringMap(2, ramification_guard=0.3)
        samples = sample_boundary(covering, seed=8, count=500)
        assert samples.resample_count > 0
        assert np.all(np.abs(samples.points[:, 1]) ** 2 >= 0.3 - 1e-12)

    def test_empty_count(self):
        with pytest.raises(EmptyInputError):
            sample_boundary(CoveringMap(1), seed=1, count=0)
        with pytest.raises(EmptyInputError):
            sample_sphere(seed=1, count=0)

    def test_derive_seed_is_stable_and_distinct(self):
        assert derive_seed(7, "samples") == derive_seed(7, "samples")
        assert derive_seed(7, "samples") != derive_seed(7, "probes")
        assert derive_seed(7, 1, "signs") != derive_seed(7, 2, "signs")
        assert 0 <= derive_seed(2**64 - 1, "x") < 2**64


class TestMonomialIntegrals:
    """Tests for the exact closed forms."""

    @pytest.mark.parametrize(
        "alpha, expected",
        [
            ((0, 0), Fraction(1)),
            ((1, 0), Fraction(1, 2)),
            ((0, 1), Fraction(1, 2)),
            ((1, 1), Fraction(1, 6)),
            ((2, 0), Fraction(1, 3)),
            ((2, 3), Fraction(2 * 6, 720)),
        ],
    )
    def test_monomial_integral(self, alpha, expected):
        """Test alpha!/(1 + |alpha|)!."""
        assert monomial_integral(alpha) == expected

    def test_mixed_off_diagonal_vanishes(self):
        assert mixed_monomial_integral((1, 0), (0, 1)) == 0
        assert mixed_monomial_integral((2, 1), (2, 1)) == Fraction(2, 24)

    def test_pulled_back_scales_by_sheets(self):
        assert pulled_back_monomial_integral(CoveringMap(3), (1, 1), (1, 1)) == Fraction(1, 2)

    def test_negative_index(self):
        with pytest.raises(DomainError):
            monomial_integral((-1, 0))

    def test_multi_index(self):
        index = MultiIndex(2, 3)
        assert index.degree == 5
        assert index.factorial() == 12

    def test_cap_measure(self):
        assert cap_measure(0.5) == pytest.approx(0.25)
        assert cap_measure(1.0) == 1.0

    @pytest.mark.parametrize("delta", [0.0, -0.1, 1.5])
    def test_cap_measure_domain(self, delta):
        with pytest.raises(DomainError):
            cap_measure(delta)


class TestIntegration:
    """Tests for integrate_values / integrate_boundary."""

    def test_constant_integrand_is_exact(self, samples_q2):
        """Test that constants integrate to c * N with zero error."""
        estimate = integrate_boundary(lambda pts: np.full(pts.shape[0], 3.0), samples_q2)
        assert estimate.value == pytest.approx(6.0)
        assert estimate.std_error == 0.0

    def test_monomial_estimate_within_error(self, covering_q2, samples_q2):
        """Test |f1|^2 integrates to N/2 within four standard errors."""
        images = covering_q2.images(samples_q2.points)
        estimate = integrate_values(np.abs(images[:, 0]) ** 2, samples_q2)
        assert estimate.within(1.0, sigmas=4.0)
        assert 0 < estimate.std_error < 0.05

    def test_same_seed_same_estimate(self, covering_q2):
        """Test bit-identical estimates for a fixed seed and chunk size."""
        values = []
        for _ in range(2):
            samples = sample_boundary(covering_q2, seed=21, count=3000)
            images = covering_q2.images(samples.points)
            estimate = integrate_values(np.abs(images[:, 1]) ** 4, samples, chunk_size=512)
            values.append(estimate.value)
        assert values[0] == values[1]

    def test_non_finite_integrand(self, samples_q2):
        values = np.zeros(samples_q2.count)
        values[3] = np.nan
        with pytest.raises(NonFiniteError):
            integrate_values(values, samples_q2)

    def test_wrong_value_count(self, samples_q2):
        with pytest.raises(DomainError):
            integrate_values(np.zeros(5), samples_q2)

    def test_weighted_measure(self, covering_q2, samples_q2):
        """Test integration against a reweighted (non-uniform) measure."""
        images = covering_q2.images(samples_q2.points)
        density = np.abs(images[:, 0]) ** 2
        mu = samples_q2.reweighted(density)
        assert not mu.uniform
        estimate = integrate_values(np.ones(mu.count) * 2.0, mu)
        assert estimate.value == pytest.approx(2.0 * mu.mass)
        varying = integrate_values(density, mu)
        assert np.isfinite(varying.std_error)
        assert varying.value > 0

    def test_mass_on_a_single_point(self, samples_q2):
        """Test that a measure concentrated on one sample has no finite jackknife error."""
        density = np.zeros(samples_q2.count)
        density[3] = 1.0
        mu = samples_q2.reweighted(density)
        estimate = integrate_values(np.arange(mu.count, dtype=float), mu)
        assert estimate.value == pytest.approx(3.0 * mu.mass)
        assert estimate.std_error == float("inf")

    def test_reweighted_rejects_negative_density(self, samples_q2):
        density = np.ones(samples_q2.count)
        density[0] = -1.0
        with pytest.raises(DomainError):
            samples_q2.reweighted(density)

    def test_reweighted_rejects_zero_mass(self, samples_q2):
        with pytest.raises(DomainError):
            samples_q2.reweighted(np.zeros(samples_q2.count))

    def test_head_keeps_mass(self, samples_q2):
        head = samples_q2.head(100)
        assert head.count == 100
        assert head.weights.sum() == pytest.approx(samples_q2.mass)

    def test_point_mass(self):
        atom = BoundarySampleSet.point_mass(np.array([1.0, 0.0]), q=1, mass=2.0)
        assert atom.count == 1
        assert integrate_values(np.array([3.0]), atom).value == pytest.approx(6.0)
        with pytest.raises(DomainError):
            BoundarySampleSet.point_mass(np.array([1.0, 0.0]), q=1, mass=0.0)


class TestIntegralEstimate:
    """Tests for the estimate record."""

    def test_within_and_deviation(self):
        estimate = IntegralEstimate(1.1, 0.05, 100)
        assert estimate.within(1.0, sigmas=3.0)
        assert not estimate.within(1.0, sigmas=1.0)
        assert estimate.deviation(1.0) == pytest.approx(2.0)

    def test_exact_deviation(self):
        assert IntegralEstimate(1.0, 0.0, 10).deviation(1.0) == 0.0
        assert IntegralEstimate(1.0, 0.0, 10).deviation(2.0) == float("inf")

    def test_to_dict_complex(self):
        data = IntegralEstimate(1 + 2j, 0.1, 5).to_dict()
        assert data["value"] == [1.0, 2.0]


class TestCapEstimate:
    """Tests for Monte Carlo cap counting."""

    def test_cap_law(self):
        """Test sigma(E(eta, delta)) = delta^2 within four binomial errors."""
        spheres = sample_sphere(seed=13, count=20000)
        center = np.array([1.0, 0.0], dtype=complex)
        for delta in (0.2, 0.5, 0.8):
            estimate = estimate_cap_measure(center, delta, spheres)
            error = np.sqrt(delta**2 * (1 - delta**2) / 20000)
            assert abs(estimate.value - delta**2) <= 4 * error

    def test_empty_sphere_set(self):
        with pytest.raises(EmptyInputError):
            estimate_cap_measure(np.array([1.0, 0.0]), 0.5, np.zeros((0, 2), dtype=complex))


class TestSampleSetFiles:
    """Tests for CSV export and import."""

    def test_save_and_load(self, tmp_path, samples_q2):
        """Test that a saved sample set loads back with identical points and metadata."""
        head = samples_q2.head(50)
        path = tmp_path / "samples.csv"
        sidecar = save_sample_set(head, path)
        assert sidecar.exists()
        loaded = load_sample_set(path)
        assert np.array_equal(loaded.points, head.points)
        assert np.array_equal(loaded.weights, head.weights)
        assert loaded.q == 2
        assert loaded.mass == head.mass

    def test_load_missing(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_sample_set(tmp_path / "missing.csv")

    def test_load_inconsistent_count(self, tmp_path, samples_q2):
        path = tmp_path / "samples.csv"
        save_sample_set(samples_q2.head(10), path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(ConfigurationError):
            load_sample_set(path)
