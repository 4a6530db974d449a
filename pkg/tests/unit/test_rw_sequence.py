"""Tests for rw_sequence.py - random-sign kernel polynomials and their certificates."""

import numpy as np
import pytest

from src.core.config import DEFAULT_PROBE_COUNT
from src.core.covering_domain import CoveringMap
from src.core.errors import DegreeError, DomainError
from src.core.f_polynomials import certify_homogeneity, evaluate_images, norm_squared
from src.core.metric_packing import PackingResult
from src.core.rw_sequence import (
    MAX_RW_DEGREE,
    SignVector,
    adapt_to_measure,
    build_Q,
    evaluate_rw,
    exact_l2_values,
    haar_unitary,
    kernel_gram,
    normalize_to_W,
    search_signs,
    shell_sigma_constant,
)
from src.core.sphere_measure import BoundarySampleSet, sample_boundary


def single_center(point, q: int = 1) -> PackingResult:
    return PackingResult(
        centers=np.asarray(point, dtype=complex).reshape(1, 2),
        radius=1.0,
        candidate_count=1,
        seed=None,
        q=q,
    )


class TestShellConstant:
    """Tests for Sigma = sum (m + 2)^2 exp(-m^2 / 2)."""

    def test_value(self):
        assert shell_sigma_constant() == pytest.approx(11.914, abs=1e-3)

    def test_cutoff_truncates(self):
        assert shell_sigma_constant(cutoff=3.0) == pytest.approx(4.0 + 9.0 * np.exp(-0.5))

    def test_stable_across_tail_cutoffs(self):
        """Test that moving the tail cutoff from 1e-10 to 1e-14 changes Sigma by under 1e-10."""
        assert abs(shell_sigma_constant(cutoff=1e-10) - shell_sigma_constant(cutoff=1e-14)) < 1e-10


class TestBuildQ:
    """Tests for the monomial expansion of sum_j s_j <f(z), f(w_j)>^k."""

    def test_unit_value_at_center(self, covering):
        """Test Q(w) = <f(w), f(w)>^1 = 1 for a single center."""
        w = np.array([0.6, 0.8j])
        q_poly = build_Q(single_center(w), SignVector((1,), 0), 1, covering)
        assert evaluate_images(q_poly, w.reshape(1, 2))[0] == pytest.approx(1.0)

    @pytest.mark.parametrize("k", [1, 4, 9])
    def test_homogeneous_of_degree_k(self, k, packing_k8, covering):
        signs = SignVector(tuple([1] * packing_k8.K), 0)
        q_poly = build_Q(packing_k8, signs, k, covering)
        assert certify_homogeneity(q_poly).degree == k
        assert len(q_poly) <= k + 1

    @pytest.mark.parametrize("q, k", [(1, 1), (1, 7), (2, 3), (3, 12)])
    def test_single_kernel_norm(self, q, k):
        """Test int |<f(z), f(w)>|^(2k) d sigma_M = N/(1 + k) exactly."""
        covering = CoveringMap(q)
        w = sample_boundary(covering, seed=q + k, count=1).points[0]
        q_poly = build_Q(single_center(w, q), SignVector((1,), 0), k, covering)
        assert norm_squared(q_poly, covering) == pytest.approx(q / (1.0 + k), rel=1e-10)

    def test_flipping_signs_negates(self, packing_k8, covering):
        rng = np.random.default_rng(0)
        signs = SignVector(tuple(int(s) for s in rng.choice([-1, 1], packing_k8.K)), 3)
        q_poly = build_Q(packing_k8, signs, 8, covering)
        flipped = build_Q(packing_k8, signs.flipped(), 8, covering)
        assert flipped.allclose(-q_poly, atol=1e-14)

    def test_expansion_matches_kernel_sum(self, packing_k8, covering, probes):
        """Test the coefficient expansion against direct kernel evaluation."""
        certificate = search_signs(packing_k8, 8, seed=1, trials=4, probes=probes)
        w_poly = normalize_to_W(certificate, build_Q(packing_k8, certificate.signs, 8, covering))
        images = covering.images(probes[:100])
        assert np.allclose(evaluate_images(w_poly, images), evaluate_rw(certificate, images))

    def test_exact_l2_matches_polynomial_norm(self, packing_k8, covering):
        """Test N/(k + 1) s^T G s against the exact norm of the expanded Q."""
        signs = SignVector(tuple([1, -1] * (packing_k8.K // 2) + [1] * (packing_k8.K % 2)), 0)
        q_poly = build_Q(packing_k8, signs, 8, covering)
        gram = kernel_gram(covering.images(packing_k8.centers), 8)
        value = exact_l2_values(gram, signs.as_array().reshape(1, -1), 8, 1)[0]
        assert value == pytest.approx(norm_squared(q_poly, covering), rel=1e-9)

    def test_degree_limits(self, packing_k8, covering):
        signs = SignVector(tuple([1] * packing_k8.K), 0)
        with pytest.raises(DegreeError):
            build_Q(packing_k8, signs, 0, covering)
        with pytest.raises(DegreeError):
            build_Q(packing_k8, signs, MAX_RW_DEGREE + 1, covering)

    def test_sign_length_mismatch(self, packing_k8, covering):
        with pytest.raises(DomainError):
            build_Q(packing_k8, SignVector((1,), 0), 8, covering)


class TestSearchSigns:
    """Tests for the sign search and its certificate."""

    def test_certificate_bounds(self, packing_k8, covering, probes):
        """Test the mean floor K N/(1 + k) and the sampled sup of |W|."""
        certificate = search_signs(packing_k8, 8, seed=2, trials=32, probes=probes)
        assert certificate.trial_count == 33
        assert certificate.meets_mean_floor
        assert certificate.sup_within_bound
        assert certificate.mean_l2 == pytest.approx(packing_k8.K / 9.0)
        assert certificate.c5_floor == pytest.approx(8 / 36)
        assert certificate.l2_mass.std_error == 0.0
        assert certificate.l2_mass.value == certificate.trial_summary["max"]

    def test_deterministic(self, packing_k8, probes):
        first = search_signs(packing_k8, 8, seed=5, trials=8, probes=probes)
        second = search_signs(packing_k8, 8, seed=5, trials=8, probes=probes)
        assert first.signs == second.signs
        assert first.l2_mass.value == second.l2_mass.value

    def test_ties_resolve_to_lowest_trial(self, covering):
        """Test that a single center (all signs equivalent) keeps the all-plus vector."""
        packing = single_center(np.array([1.0, 0.0]))
        certificate = search_signs(packing, 4, seed=0, trials=5, probes=np.array([[1.0, 0.0]]))
        assert certificate.signs == SignVector((1,), 0)

    def test_needs_a_trial(self, packing_k8):
        with pytest.raises(DomainError):
            search_signs(packing_k8, 8, seed=0, trials=0)

    def test_to_dict(self, packing_k8, probes):
        data = search_signs(packing_k8, 8, seed=2, trials=4, probes=probes).to_dict()
        assert data["k"] == 8
        assert len(data["signs"]) == packing_k8.K
        assert data["sup_bound_check"]["probe_count"] == probes.shape[0]
        assert set(data["anchors"]) == {"mean_l2", "sup_bound_check"}
        assert "rotation" not in data


class TestAdaptToMeasure:
    """Tests for the unitary adaptation of W to a positive measure."""

    def test_haar_unitary(self):
        unitary = haar_unitary(np.random.default_rng(3))
        assert np.allclose(unitary @ unitary.conj().T, np.eye(2))

    def test_identity_is_trial_zero(self, packing_k8, covering, probes):
        """Test that the chosen ratio is the best over trials, identity included."""
        mu = sample_boundary(covering, seed=8, count=800)
        certificate = search_signs(packing_k8, 8, seed=2, trials=8, probes=probes)
        adapted = adapt_to_measure(
            packing_k8, 8, mu, seed=4, rotation_trials=6, certificate=certificate, probes=probes
        )
        assert len(adapted.rotation_ratios) == 7
        assert adapted.measure_ratio == max(adapted.rotation_ratios)
        assert adapted.rotation_ratios[0] > 0
        assert np.allclose(adapted.rotation @ adapted.rotation.conj().T, np.eye(2))
        assert adapted.sup_within_bound
        assert adapted.signs == certificate.signs

    def test_point_mass_measure(self, packing_k8, covering, probes):
        """Test adaptation to a single atom: the ratio is |W|^2 at the atom."""
        atom = BoundarySampleSet.point_mass(probes[0], q=1)
        adapted = adapt_to_measure(packing_k8, 8, atom, seed=6, rotation_trials=4, probes=probes)
        value = evaluate_rw(adapted, covering.images(probes[:1]))[0]
        assert adapted.measure_ratio == pytest.approx(abs(value) ** 2)
        data = adapted.to_dict()
        assert "rotation" in data
        assert "measure_ratio" in data["anchors"]

    def test_sup_recomputed_on_default_probes(self, packing_k8, covering, probes):
        """Test that without probes the rotated W is checked on the seeded default set."""
        mu = sample_boundary(covering, seed=8, count=400)
        certificate = search_signs(packing_k8, 8, seed=2, trials=8, probes=probes)
        adapted = adapt_to_measure(
            packing_k8, 8, mu, seed=4, rotation_trials=3, certificate=certificate
        )
        default = sample_boundary(covering, 4, DEFAULT_PROBE_COUNT).points
        sampled = np.abs(evaluate_rw(adapted, covering.images(default))).max()
        assert adapted.probe_count == DEFAULT_PROBE_COUNT
        assert adapted.sup_bound_check == pytest.approx(sampled, rel=1e-10)
        assert adapted.sup_within_bound
