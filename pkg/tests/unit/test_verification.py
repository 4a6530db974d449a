"""Tests for verification.py - the sphere-measure identity suite."""

import numpy as np
import pytest

from src.core.config import RunConfig
from src.core.covering_domain import CoveringMap
from src.core.reports import IDENTITY_ANCHORS
from src.core.sphere_measure import sample_boundary, sample_sphere
from src.core.verification import (
    CAP_DELTAS,
    IdentityCheck,
    VerificationReport,
    check_cap_law,
    check_kernel_power,
    check_monomial_identities,
    check_norm_identity,
    check_pushforward_balls,
    check_quasi_triangle,
    check_sign_average,
    check_tube_mass,
    run_integral_suite,
)


def make_check(name: str, passed: bool) -> IdentityCheck:
    return IdentityCheck(
        name=name,
        identity="x = y",
        estimate=1.0,
        target=1.0,
        std_error=0.0,
        tolerance="exact",
        passed=passed,
    )


class TestVerificationReport:
    """Tests for the report container."""

    def test_summary_counts_per_family(self):
        report = VerificationReport(q=1, seed=0, sample_count=10)
        report.extend([make_check("a", True), make_check("a", False), make_check("b", True)])
        assert report.summary() == {
            "a": {"passed": 1, "failed": 1},
            "b": {"passed": 1, "failed": 0},
        }
        assert not report.passed
        assert len(report.failures) == 1

    def test_errors_fail_the_report(self):
        report = VerificationReport(q=1, seed=0, sample_count=10)
        report.add(make_check("a", True))
        assert report.passed
        report.errors.append("boom")
        assert not report.passed

    def test_to_dict(self):
        check = make_check("monomial", True)
        data = VerificationReport(q=2, seed=5, sample_count=10, checks=[check]).to_dict()
        assert data["q"] == 2
        assert data["checks"][0]["estimate"] == 1.0
        assert data["checks"][0]["anchor"] == IDENTITY_ANCHORS["monomial"]
        assert data["passed"] is True

    def test_complex_estimate_serializes_as_pair(self):
        check = make_check("norm", True)
        check.estimate = 1 + 2j
        assert check.to_dict()["estimate"] == [1.0, 2.0]


class TestStatisticalIdentities:
    """Tests for the Monte Carlo identity checks."""

    def test_monomial_identities(self, covering_q2, samples_q2):
        """Test every pair |alpha|, |beta| <= 2 within five null standard errors."""
        checks = check_monomial_identities(covering_q2, samples_q2, max_degree=2, sigmas=5.0)
        assert len(checks) == 36
        assert all(c.passed for c in checks), [c.parameters for c in checks if not c.passed]
        diagonal = [c for c in checks if c.parameters["alpha"] == c.parameters["beta"]]
        assert all(c.target > 0 for c in diagonal)

    def test_constant_monomial_is_exact(self, covering_q2, samples_q2):
        check = check_monomial_identities(covering_q2, samples_q2, max_degree=0)[0]
        assert check.estimate == pytest.approx(2.0)
        assert check.std_error == 0.0

    def test_cap_law(self):
        spheres = sample_sphere(seed=4, count=5000)
        checks = check_cap_law(spheres, np.array([0.6, 0.8j]), sigmas=5.0)
        assert [c.parameters["delta"] for c in checks] == list(CAP_DELTAS)
        assert all(c.passed for c in checks)

    def test_pushforward_balls(self, covering_q2, samples_q2):
        center = samples_q2.points[0]
        checks = check_pushforward_balls(covering_q2, samples_q2, center, sigmas=5.0)
        assert all(c.passed for c in checks)
        assert checks[-1].target == pytest.approx(2 * 0.81)

    def test_tube_mass(self, covering_q2, samples_q2):
        """Test sigma_M{|z2| < w} = N w^(2q)."""
        checks = check_tube_mass(covering_q2, samples_q2, sigmas=5.0)
        assert all(c.passed for c in checks)
        assert checks[0].parameters["width"] == pytest.approx(0.25**0.25)

    def test_wrong_measure_is_detected(self, covering_q2):
        """Test that a mis-weighted sample set fails the constant-free monomial checks."""
        samples = sample_boundary(covering_q2, seed=3, count=4000)
        images = covering_q2.images(samples.points)
        tilted = samples.reweighted(0.5 + np.abs(images[:, 0]) ** 2)
        checks = check_monomial_identities(covering_q2, tilted, max_degree=1, sigmas=3.0)
        assert not all(c.passed for c in checks)


class TestExactIdentities:
    """Tests for the identities computed through the coefficient algebra."""

    @pytest.mark.parametrize("q", [1, 3])
    def test_norm_identity(self, q):
        assert all(c.passed for c in check_norm_identity(CoveringMap(q), max_degree=4))

    def test_kernel_power(self, covering_q2):
        checks = check_kernel_power(covering_q2, seed=1, degrees=(1, 5, 10))
        assert all(c.passed for c in checks)
        assert checks[1].target == pytest.approx(2 / 6)

    def test_sign_average(self, covering_q2):
        check = check_sign_average(covering_q2, seed=3, k=6, center_count=6)
        assert check.passed
        assert check.target == pytest.approx(6 * 2 / 7)

    def test_quasi_triangle(self, covering_q2, samples_q2):
        check = check_quasi_triangle(covering_q2, samples_q2)
        assert check.passed
        assert check.parameters["triples"] == samples_q2.count // 3

    def test_quasi_triangle_skipped_for_tiny_sets(self, covering_q2):
        check = check_quasi_triangle(covering_q2, sample_boundary(covering_q2, seed=1, count=2))
        assert check.passed
        assert check.tolerance.startswith("skipped")


class TestIntegralSuite:
    """Tests for run_integral_suite."""

    def test_suite_passes(self, tmp_path):
        """Test a full small run with a wide acceptance band."""
        config = RunConfig(
            q=2,
            seed=3,
            sample_count=4000,
            monomial_degree=2,
            sigma_threshold=5.0,
            output_dir=tmp_path,
        )
        report = run_integral_suite(config)
        assert report.passed, [c.to_dict() for c in report.failures]
        assert set(report.summary()) == {
            "cap_law",
            "kernel_power",
            "monomial",
            "norm",
            "pushforward",
            "quasi_triangle",
            "sign_average",
            "tube_mass",
        }
        for check in report.to_dict()["checks"]:
            assert check["anchor"] == IDENTITY_ANCHORS[check["name"]]
            assert check["tolerance"]

    def test_suite_is_deterministic(self, tmp_path):
        config = RunConfig(q=1, seed=9, sample_count=500, monomial_degree=1, output_dir=tmp_path)
        first = run_integral_suite(config).to_dict()
        second = run_integral_suite(config).to_dict()
        assert first == second

    def test_tiny_sample_count(self, tmp_path):
        """Test that ten samples widen the error bars instead of breaking the suite."""
        config = RunConfig(
            q=1,
            seed=2,
            sample_count=10,
            monomial_degree=1,
            sigma_threshold=4.0,
            output_dir=tmp_path,
        )
        report = run_integral_suite(config)
        statistical = [c for c in report.checks if c.std_error > 0]
        assert statistical
        assert all(c.std_error > 0.01 for c in statistical)
