"""Information values and matrix-gradient identities.

The frozen scalar information value comes from an independent adaptive
quadrature of the 1-D output-density reduction (see test module docstring
in test_estimator for the companion error values).

Conventions under test: all closed-form gradients are conjugate-coordinate
gradients, so a real directional perturbation moves the information at
``2 Re Tr(D^H grad)``.  The factor of two is pinned by two independent
anchors below; every other gradient test inherits it.
"""

import numpy as np
import pytest

from codedflow import (
    EngineSpec,
    GradientReport,
    GradientSet,
    InputDistribution,
    MmseMatrix,
    NATS_PER_BIT,
    StepTooSmallError,
    SystemMatrices,
    WIRTINGER_SCALE,
    directional_derivative,
    gaussian_logdet_gradient,
    gaussian_mutual_information,
    grad_mi_cut,
    grad_mi_decoding,
    grad_mi_precoding,
    grad_mi_topology,
    grad_oracle,
    mmse_matrix,
    mutual_information,
    verify_gradients,
)
from codedflow.estimator import quadrature_moments
from codedflow.infogradients import MutualInformationValue, closed_gradient

FROZEN_SCALAR_INFO_M1 = 0.500072136066845  # two-point input, unit gain, nats

QUAD64 = EngineSpec(method="quadrature", nodes=64)


def _random_system(rng, n=2, scale=0.6):
    def mat():
        return scale * (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))

    return SystemMatrices.from_factors(mat(), mat(), mat(), form="compact")


def _zero_mmse(n):
    return MmseMatrix.checked(np.zeros((n, n), dtype=complex), "exact", 0, np.eye(n))


class TestMutualInformation:
    def test_deterministic_input_has_no_information(self):
        dist = InputDistribution.point(np.array([1.0 + 0.5j]))
        mi = mutual_information(np.array([[2.0 + 0j]]), dist, QUAD64)
        assert abs(mi.nats) < 1e-12
        mi_mc = mutual_information(
            np.array([[2.0 + 0j]]), dist, EngineSpec(method="mc", samples=2000, seed=3)
        )
        assert abs(mi_mc.nats) < 1e-12

    def test_gaussian_closed_forms(self):
        dist = InputDistribution.gaussian(2)
        assert mutual_information(np.zeros((2, 2)), dist).nats == pytest.approx(0.0, abs=1e-14)
        mi = mutual_information(np.eye(2), dist)
        assert mi.nats == pytest.approx(2 * np.log(2.0), abs=1e-12)

    def test_scalar_two_point_matches_frozen_value(self):
        dist = InputDistribution.bpsk(1)
        mi = mutual_information(np.array([[1.0 + 0j]]), dist, QUAD64)
        assert mi.nats == pytest.approx(FROZEN_SCALAR_INFO_M1, abs=5e-9)
        assert mi.method == "quadrature"

    def test_sampling_estimate_agrees_with_quadrature(self):
        dist = InputDistribution.bpsk(1)
        mi_q = mutual_information(np.array([[1.0 + 0j]]), dist, QUAD64)
        mi_mc = mutual_information(
            np.array([[1.0 + 0j]]), dist, EngineSpec(method="mc", samples=200000, seed=8)
        )
        assert abs(mi_mc.nats - mi_q.nats) <= 3.0 * mi_mc.standard_error

    def test_units_conversion_is_exact(self):
        value = MutualInformationValue.checked(0.75, "exact", 0)
        assert value.bits == 0.75 / NATS_PER_BIT

    def test_bounds_enforced(self):
        with pytest.raises(ValueError):
            MutualInformationValue.checked(-1.0, "exact", 0)
        with pytest.raises(ValueError):
            MutualInformationValue.checked(2.0, "quadrature", 64, entropy_limit=np.log(2))

    def test_discrete_information_capped_by_entropy(self):
        # high gain drives the value to the input entropy, never beyond
        dist = InputDistribution.bpsk(1)
        mi = mutual_information(np.array([[40.0 + 0j]]), dist, QUAD64)
        assert mi.nats <= np.log(2) + 1e-9
        assert mi.nats == pytest.approx(np.log(2), rel=1e-6)


class TestClosedForms:
    def test_zero_error_matrix_zeroes_all_gradients(self, rng):
        sys = _random_system(rng)
        E = _zero_mmse(2)
        for fn in (grad_mi_decoding, grad_mi_topology, grad_mi_precoding):
            np.testing.assert_array_equal(fn(sys, E), np.zeros((2, 2)))

    def test_scalar_pattern(self):
        a, g, b = 0.8 + 0.3j, -0.5 + 0.9j, 1.1 - 0.2j
        e = 0.37
        sys = SystemMatrices.from_factors(
            np.array([[a]]), np.array([[g]]), np.array([[b]]), form="compact"
        )
        E = MmseMatrix.checked(np.array([[e + 0j]]), "exact", 0, np.eye(1))
        assert grad_mi_decoding(sys, E)[0, 0] == pytest.approx(a * abs(g) ** 2 * abs(b) ** 2 * e)
        assert grad_mi_topology(sys, E)[0, 0] == pytest.approx(abs(a) ** 2 * g * abs(b) ** 2 * e)
        assert grad_mi_precoding(sys, E)[0, 0] == pytest.approx(abs(a) ** 2 * abs(g) ** 2 * b * e)

    def test_identity_readout_and_precoder_reduce_topology_gradient(self, rng):
        G = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        sys = SystemMatrices.from_factors(np.eye(2), G, np.eye(2), form="compact")
        E = mmse_matrix(sys.M, InputDistribution.gaussian(2), EngineSpec())
        np.testing.assert_allclose(grad_mi_topology(sys, E), G @ E.matrix, atol=1e-12)

    def test_identity_chain_matches_source_cut_form(self, rng):
        B = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        sys = SystemMatrices.from_factors(np.eye(2), np.eye(2), B, form="compact")
        E = mmse_matrix(sys.M, InputDistribution.gaussian(2), EngineSpec())
        np.testing.assert_array_equal(
            grad_mi_precoding(sys, E), grad_mi_cut("source", "B", sys, E)
        )


class TestCutGradients:
    def test_zero_error_matrix(self, rng):
        sys = _random_system(rng)
        E = _zero_mmse(2)
        for cut, which in (("source", "B"), ("mid", "B"), ("mid", "G")):
            np.testing.assert_array_equal(grad_mi_cut(cut, which, sys, E), np.zeros((2, 2)))

    def test_mid_cut_with_identity_topology_matches_source(self, rng):
        B = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        sys = SystemMatrices.from_factors(np.eye(2), np.eye(2), B, form="compact")
        E = mmse_matrix(sys.B, InputDistribution.gaussian(2), EngineSpec())
        np.testing.assert_array_equal(
            grad_mi_cut("mid", "B", sys, E), grad_mi_cut("source", "B", sys, E)
        )

    def test_source_cut_has_no_topology_gradient(self, rng):
        sys = _random_system(rng)
        with pytest.raises(ValueError):
            grad_mi_cut("source", "G", sys, _zero_mmse(2))

    def test_unknown_cut_rejected(self, rng):
        sys = _random_system(rng)
        with pytest.raises(ValueError):
            grad_mi_cut("everywhere", "B", sys, _zero_mmse(2))

    def test_mid_cut_gradients_match_oracle_scalar(self):
        """1-D network: both mid-cut closed forms against finite differences."""
        sys = SystemMatrices.from_factors(
            np.array([[1.0 + 0j]]), np.array([[0.8 - 0.4j]]), np.array([[1.1 + 0.2j]]),
            form="compact",
        )
        dist = InputDistribution.qpsk(1)
        E_mid = mmse_matrix(sys.G @ sys.B, dist, QUAD64)
        for which in ("B", "G"):
            closed = grad_mi_cut("mid", which, sys, E_mid)
            oracle = grad_oracle(sys, dist, which, QUAD64, objective="mid")
            np.testing.assert_allclose(closed, oracle, rtol=1e-4, atol=1e-9)


class TestCalibration:
    """The two anchors that pin the real-perturbation factor of 2."""

    def test_scalar_information_error_anchor(self):
        dist = InputDistribution.bpsk(1)
        spec = EngineSpec(method="quadrature", nodes=192)
        for snr in (0.25, 1.0, 4.0):
            m = np.sqrt(snr)
            E = mmse_matrix(np.array([[m + 0j]]), dist, spec)
            e_val = E.matrix[0, 0].real
            h = 1e-5 * max(snr, 1.0)
            mi_p, _, _ = quadrature_moments(np.array([[np.sqrt(snr + h) + 0j]]), dist, 192, want_mmse=False)
            mi_m, _, _ = quadrature_moments(np.array([[np.sqrt(snr - h) + 0j]]), dist, 192, want_mmse=False)
            fd = (mi_p - mi_m) / (2 * h)
            assert fd == pytest.approx(e_val, rel=1e-3)
            # chain rule through the entry gradient: dI/dsnr = c Re(grad) / (2 sqrt(snr))
            sys = SystemMatrices.from_factors(np.eye(1), np.eye(1), np.array([[m + 0j]]), form="compact")
            chain = WIRTINGER_SCALE * grad_mi_precoding(sys, E)[0, 0].real / (2 * m)
            assert chain == pytest.approx(e_val, rel=1e-9)

    def test_gaussian_logdet_anchor(self, rng):
        sys = _random_system(rng)
        dist = InputDistribution.gaussian(2)
        E = mmse_matrix(sys.M, dist, EngineSpec())
        for target in ("A", "G", "B"):
            closed = closed_gradient(sys, E, target, "full")
            analytic = gaussian_logdet_gradient(sys, target)
            np.testing.assert_allclose(closed, analytic, rtol=1e-9, atol=1e-12)

    def test_directional_derivative_contract(self, rng):
        sys = _random_system(rng)
        dist = InputDistribution.qpsk(2)
        spec = EngineSpec(method="quadrature", nodes=16)
        E = mmse_matrix(sys.M, dist, spec)
        for target in ("A", "G", "B"):
            direction = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            fd = directional_derivative(sys, dist, target, direction, spec, step=1e-4)
            closed = closed_gradient(sys, E, target, "full")
            predicted = WIRTINGER_SCALE * float(
                np.real(np.trace(direction.conj().T @ closed))
            )
            assert fd == pytest.approx(predicted, rel=1e-3)

    def test_gaussian_oracle_matches_analytic_logdet(self, rng):
        sys = _random_system(rng)
        dist = InputDistribution.gaussian(2)
        oracle = grad_oracle(sys, dist, "B", EngineSpec(), step=1e-4)
        analytic = gaussian_logdet_gradient(sys, "B")
        np.testing.assert_allclose(oracle, analytic, rtol=1e-6, atol=1e-9)


class TestOracle:
    def test_structurally_irrelevant_entries_read_zero(self):
        G = np.array([[0.9, 0.0], [0.0, 0.0]], dtype=complex)
        B = np.array([[1.1, 0.0], [0.0, 0.0]], dtype=complex)
        A = np.array([[0.7, 0.2], [0.3, 0.5]], dtype=complex)
        sys = SystemMatrices.from_factors(A, G, B, form="compact")
        dist = InputDistribution.qpsk(2)
        spec = EngineSpec(method="quadrature", nodes=16)
        oracle = grad_oracle(sys, dist, "A", spec)
        E = mmse_matrix(sys.M, dist, spec)
        closed = grad_mi_decoding(sys, E)
        np.testing.assert_array_equal(closed[:, 1], 0.0)
        np.testing.assert_allclose(oracle[:, 1], 0.0, atol=1e-8)

    def test_step_bounds(self, rng):
        sys = _random_system(rng)
        with pytest.raises(ValueError):
            grad_oracle(sys, InputDistribution.gaussian(2), "B", EngineSpec(), step=1.0)

    def test_sampling_oracle_with_common_draws(self):
        dist = InputDistribution.bpsk(1)
        sys = SystemMatrices.from_factors(
            np.eye(1), np.eye(1), np.array([[1.0 + 0j]]), form="compact"
        )
        spec = EngineSpec(method="mc", samples=200000, seed=21)
        oracle = grad_oracle(sys, dist, "B", spec, step=1e-2)
        E = mmse_matrix(sys.M, dist, QUAD64)
        closed = grad_mi_precoding(sys, E)
        np.testing.assert_allclose(oracle, closed, rtol=3e-2, atol=1e-4)

    def test_noise_floor_reported(self):
        dist = InputDistribution.bpsk(1)
        sys = SystemMatrices.from_factors(
            np.eye(1), np.eye(1), np.array([[1.0 + 0j]]), form="compact"
        )
        spec = EngineSpec(method="mc", samples=1000, seed=4)
        with pytest.raises(StepTooSmallError):
            grad_oracle(sys, dist, "B", spec, step=1e-5, noise_ratio_limit=1e-4)


class TestVerifyGradients:
    def test_identity_scalar_deterministic_input_passes_with_zeros(self):
        sys = SystemMatrices.from_factors(np.eye(1), np.eye(1), np.eye(1), form="compact")
        dist = InputDistribution.point(np.array([1.0 + 0j]))
        report = verify_gradients(sys, dist, QUAD64)
        for target in ("A", "G", "B"):
            np.testing.assert_allclose(report.closed.by_target(target), 0.0, atol=1e-12)
            np.testing.assert_allclose(report.oracles[target], 0.0, atol=1e-9)
        assert report.passed(1e-3)

    def test_corrupted_closed_form_fails_with_located_entry(self, rng):
        sys = _random_system(rng)
        dist = InputDistribution.gaussian(2)
        report = verify_gradients(sys, dist, EngineSpec(), step=1e-4)
        assert report.passed(1e-3)
        corrupted_topology = np.array(report.closed.topology)
        corrupted_topology[1, 0] += 0.25
        corrupted = GradientReport(
            closed=GradientSet(
                mmse=report.closed.mmse,
                form=report.closed.form,
                decoding=report.closed.decoding,
                topology=corrupted_topology,
                precoding=report.closed.precoding,
            ),
            oracles=report.oracles,
            step=report.step,
            calibration=report.calibration,
        )
        assert not corrupted.passed(1e-3)
        disc = corrupted.discrepancy("G")
        assert disc["entry"] == (1, 0)
        assert disc["max_rel"] > 1e-2

    def test_report_records_calibration_and_refinement(self, rng):
        sys = _random_system(rng, n=1)
        dist = InputDistribution.bpsk(1)
        report = verify_gradients(sys, dist, QUAD64)
        assert report.calibration == WIRTINGER_SCALE
        assert set(report.refinement) == {"A", "G", "B"}
        assert report.passed(1e-3)


def test_gaussian_information_formula(rng):
    M = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    direct = np.log(np.linalg.det(np.eye(3) + M @ M.conj().T).real)
    assert gaussian_mutual_information(M) == pytest.approx(direct, rel=1e-12)
