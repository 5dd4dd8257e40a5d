import numpy as np
import pytest
from dataclasses import replace

from pilotveil import (
    AmScheme,
    CoincidentPoint,
    DelayCovariances,
    GeneralizedFimMatrix,
    MODE_PAPER_LITERAL,
    MODE_TRUE_COVARIANCE,
    SingularA,
    SingularGeometry,
    SPEED_OF_LIGHT as C,
    crb_position,
    delay_hessian_diag,
    delay_jacobian,
    generalized_fims,
    lb_position,
    mcrb_position,
    pseudo_true_position,
    run_bounds,
    true_delays,
)
from pilotveil.signal_model import Anchor, make_rng

from conftest import rel_err

EVES = np.array([[0.0, 0.0], [80.0, 160.0]])
ALICE = np.array([80.0, 80.0])
BOX = [(0.0, 200.0), (0.0, 200.0)]


def intersection_oracle(bias_m):
    """Closed-form near-Alice intersection of the two inflated circles."""
    d_true = np.linalg.norm(ALICE - EVES, axis=1)
    r1, r2 = d_true[0] + bias_m, d_true[1] + bias_m
    c1, c2 = EVES
    d = np.linalg.norm(c2 - c1)
    a = (d * d + r1 * r1 - r2 * r2) / (2 * d)
    h = np.sqrt(max(r1 * r1 - a * a, 0.0))
    e = (c2 - c1) / d
    perp = np.array([-e[1], e[0]])
    cands = [c1 + a * e + h * perp, c1 + a * e - h * perp]
    return min(cands, key=lambda q: np.linalg.norm(q - ALICE))


class TestTrueDelays:
    def test_three_four_five(self):
        tau = true_delays(np.array([3.0, 4.0]), np.array([[0.0, 0.0]]), C)
        assert tau[0] == pytest.approx(5.0 / C, rel=1e-15)

    def test_scene_distance(self):
        tau = true_delays(ALICE, EVES, C)
        assert tau[0] == pytest.approx(np.hypot(80, 80) / C, rel=1e-12)

    def test_translation_invariance(self):
        shift = np.array([13.7, -4.2])
        a = true_delays(ALICE, EVES, C)
        b = true_delays(ALICE + shift, EVES + shift, C)
        assert np.allclose(a, b, rtol=1e-14)

    def test_coincident_raises(self):
        with pytest.raises(CoincidentPoint):
            true_delays(np.array([0.0, 0.0]), EVES, C)


class TestDelayJacobian:
    def test_axis_aligned_row(self):
        J = delay_jacobian(np.array([10.0, 0.0]), np.array([[0.0, 0.0]]), C)
        assert np.allclose(J[0], [1.0 / C, 0.0], atol=1e-20)

    def test_rows_have_norm_inv_c(self):
        J = delay_jacobian(ALICE, EVES, C)
        assert np.allclose(np.linalg.norm(J, axis=1), 1.0 / C, rtol=1e-12)

    def test_matches_finite_differences(self):
        h = 1e-4
        J = delay_jacobian(ALICE, EVES, C)
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            fd = (true_delays(ALICE + e, EVES, C) - true_delays(ALICE - e, EVES, C)) / (2 * h)
            # scale by the row norm 1/c: components can be exactly zero
            assert np.max(np.abs(J[:, k] - fd) * C) < 1e-6


class TestDelayHessianDiag:
    def test_three_four_five(self):
        psi = delay_hessian_diag(np.array([3.0, 4.0]), np.array([[0.0, 0.0]]), C)
        assert psi[0] == pytest.approx(1.0 / (5.0 * C), rel=1e-15)

    def test_inverse_distance_scaling(self):
        p1 = delay_hessian_diag(np.array([10.0, 0.0]), np.array([[0.0, 0.0]]), C)
        p2 = delay_hessian_diag(np.array([20.0, 0.0]), np.array([[0.0, 0.0]]), C)
        assert p1[0] == pytest.approx(2 * p2[0], rel=1e-14)

    def test_matches_structural_trace_fd(self):
        # the adopted curvature form equals the finite-difference trace of the
        # exact Hessian of ||p - p_i||/c (whose trace is 1/(c d) in 2-D)
        h = 1e-3
        psi = delay_hessian_diag(ALICE, EVES, C)
        trace_fd = np.zeros(len(EVES))
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            trace_fd += (true_delays(ALICE + e, EVES, C) - 2 * true_delays(ALICE, EVES, C)
                         + true_delays(ALICE - e, EVES, C)) / h**2
        assert np.max(np.abs(psi - trace_fd) / psi) < 1e-4


class TestPseudoTruePosition:
    def test_zero_residual_at_truth(self):
        tau = true_delays(ALICE, EVES, C)
        p, _ = pseudo_true_position(EVES, tau, np.array([1e-21, 1e-21]), BOX, c=C, prefer=ALICE)
        assert np.linalg.norm(p - ALICE) < 1e-9

    def test_linearized_displacement_oracle(self):
        # equal range inflation b: linearization gives dp = (2.4142 b, -b)
        b = 1e-3
        tau = true_delays(ALICE, EVES, C) + b / C
        p, _ = pseudo_true_position(EVES, tau, np.array([1e-21, 1e-21]), BOX, c=C, prefer=ALICE)
        lin = ALICE + np.array([(np.sqrt(2) + 1) * b, -b])
        assert np.linalg.norm(p - lin) < 1e-6
        assert np.linalg.norm(p - intersection_oracle(b)) < 1e-9

    def test_matches_intersection_oracle_at_scene_bias(self):
        b = 3.07
        tau = true_delays(ALICE, EVES, C) + b / C
        p, runner = pseudo_true_position(EVES, tau, np.array([1e-21, 0.5e-21]), BOX, c=C, prefer=ALICE)
        assert np.linalg.norm(p - intersection_oracle(b)) < 1e-8
        # the mirror-side intersection also has zero residual and is reported
        assert runner is not None
        assert np.linalg.norm(runner - p) > 10.0

    def test_weight_free_for_two_anchors(self):
        tau = true_delays(ALICE, EVES, C) + 2.0 / C
        p1, _ = pseudo_true_position(EVES, tau, np.array([1e-21, 1e-21]), BOX, c=C, prefer=ALICE)
        p2, _ = pseudo_true_position(EVES, tau, np.array([9e-21, 1e-21]), BOX, c=C, prefer=ALICE)
        assert np.linalg.norm(p1 - p2) < 1e-8


class TestGeneralizedFims:
    def test_degenerate_gives_classical_crb(self):
        tau = true_delays(ALICE, EVES, C)
        xi = np.array([1.3e-21, 0.7e-21])
        cov = DelayCovariances(mcrb=xi, crb=xi)
        gf = generalized_fims(ALICE, EVES, tau, cov, mode=MODE_PAPER_LITERAL, c=C)
        mcrb = mcrb_position(gf)
        classical = crb_position(ALICE, EVES, xi, C)
        assert np.max(np.abs(mcrb - classical)) < 1e-9 * np.trace(classical)

    def test_modes_coincide_when_covariances_equal(self):
        tau = true_delays(ALICE, EVES, C) + 3.0 / C  # genuine mismatch
        p_bar = intersection_oracle(3.0)
        xi = np.array([1.3e-21, 0.7e-21])
        cov = DelayCovariances(mcrb=xi, crb=xi)
        tau_phys = true_delays(ALICE, EVES, C)
        g1 = generalized_fims(p_bar, EVES, tau_phys, cov, mode=MODE_PAPER_LITERAL, c=C)
        g2 = generalized_fims(p_bar, EVES, tau_phys, cov, mode=MODE_TRUE_COVARIANCE, c=C)
        assert np.allclose(g1.a, g2.a, rtol=1e-14)
        assert np.allclose(g1.b, g2.b, rtol=1e-14)

    def test_mode_validation(self):
        cov = DelayCovariances(mcrb=np.array([1e-21]), crb=np.array([1e-21]))
        with pytest.raises(Exception):
            generalized_fims(ALICE, EVES[:1], true_delays(ALICE, EVES[:1], C), cov, mode="bogus", c=C)


class TestMcrbPosition:
    def test_sandwich_identity(self):
        gf = GeneralizedFimMatrix(a=-np.eye(2), b=np.eye(2), mode=MODE_PAPER_LITERAL)
        assert np.allclose(mcrb_position(gf), np.eye(2))

    def test_singular_a_raises(self):
        gf = GeneralizedFimMatrix(a=np.zeros((2, 2)), b=np.eye(2), mode=MODE_PAPER_LITERAL)
        with pytest.raises(SingularA):
            mcrb_position(gf)

    def test_output_symmetric_psd(self, am10_scenario):
        _, pos = run_bounds(am10_scenario)
        m = pos.mcrb_matrix
        assert np.allclose(m, m.T)
        eig = np.linalg.eigvalsh(m)
        assert eig.min() >= -1e-12 * np.trace(m)


class TestLbPosition:
    def test_zero_bias_collapse(self):
        m = np.diag([1.0, 2.0])
        rep = lb_position(ALICE, ALICE, m)
        assert np.array_equal(rep.lb_matrix, m)
        assert rep.bias_norm == 0.0

    def test_decomposition_identity(self):
        m = np.array([[2.0, 0.3], [0.3, 1.0]])
        p_bar = ALICE + np.array([3.0, -4.0])
        rep = lb_position(ALICE, p_bar, m)
        assert np.trace(rep.lb_matrix) == pytest.approx(np.trace(m) + 25.0, rel=1e-14)
        assert rep.rmse_lb**2 == pytest.approx(rep.mcrb_rmse**2 + rep.bias_norm**2, rel=1e-9)

    def test_paper_spot_identities(self):
        # internal-consistency identities of the reference series
        assert 9.39340**2 == pytest.approx(5.79052**2 + 7.39633**2, rel=1e-5)
        assert 38.4402**2 == pytest.approx(12.3347**2 + 36.4075**2, rel=1e-5)


class TestCrbPosition:
    def test_orthogonal_unit_geometry(self):
        anchors = np.array([[10.0, 0.0], [0.0, 10.0]])
        p = np.array([0.0, 0.0])
        sigma2 = 4e-21
        crb = crb_position(p, anchors, np.array([sigma2, sigma2]), C)
        assert np.allclose(crb, C**2 * sigma2 * np.eye(2), rtol=1e-10)

    def test_collinear_raises(self):
        anchors = np.array([[0.0, 0.0], [10.0, 0.0], [20.0, 0.0]])
        with pytest.raises(SingularGeometry):
            crb_position(np.array([5.0, 0.0]), anchors, np.array([1e-21] * 3), C)

    def test_scene_floor_matches_reference(self, base_scenario):
        _, pos = run_bounds(base_scenario)
        assert rel_err(pos.rmse_lb, 0.0190399733047829) < 1e-6


class TestDegeneracyChain:
    def test_clean_chain(self, base_scenario):
        reports, pos = run_bounds(base_scenario)
        eve = [r for r in reports if r.anchor_id.startswith("eve")]
        for r in eve:
            assert abs(r.bias) < 1e-12
            assert rel_err(r.mcrb, r.crb) < 1e-9
        assert np.linalg.norm(pos.pseudo_true_position - base_scenario.alice_position) < 1e-9
        assert rel_err(pos.rmse_lb, pos.mcrb_rmse) < 1e-9


class TestRigidMotionEquivariance:
    def test_rotation_translation(self, am10_scenario):
        theta = 0.7
        R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        t = np.array([-35.0, 12.0])

        def xf(p):
            return R @ np.asarray(p) + t

        moved = replace(
            am10_scenario,
            alice_position=xf(am10_scenario.alice_position),
            anchors=tuple(
                Anchor(position=xf(a.position), role=a.role, gain=a.gain, name=a.name)
                for a in am10_scenario.anchors
            ),
            seed_box=tuple((lo - 250.0, hi + 250.0) for lo, hi in am10_scenario.seed_box),
        )
        _, pos0 = run_bounds(am10_scenario)
        _, pos1 = run_bounds(moved)
        assert np.linalg.norm(pos1.pseudo_true_position - xf(pos0.pseudo_true_position)) < 1e-6
        expected = R @ pos0.mcrb_matrix @ R.T
        assert np.max(np.abs(pos1.mcrb_matrix - expected)) < 1e-9 * np.trace(expected)
        assert rel_err(pos1.rmse_lb, pos0.rmse_lb) < 1e-9


class TestHighSnrSaturation:
    def test_bounds_saturate_in_power(self, am10_scenario):
        _, pos10 = run_bounds(am10_scenario)
        cfg20 = replace(am10_scenario.config, tx_power=10 ** (20 / 10) / 1000)
        _, pos20 = run_bounds(replace(am10_scenario, config=cfg20))
        assert rel_err(pos20.bias_norm, pos10.bias_norm) < 1e-3
        assert rel_err(pos20.mcrb_rmse, pos10.mcrb_rmse) < 1e-3
        assert rel_err(pos20.rmse_lb, pos10.rmse_lb) < 1e-3
