import numpy as np
import pytest

from secure_dfrc import sdp
from secure_dfrc.fractional import AuxiliaryState, transformed_objective, update_auxiliaries
from secure_dfrc.irs_design import (
    PhiObjective,
    RepairFailed,
    SnrSurrogate,
    build_phi_objective,
    build_snr_surrogate,
    build_subproblem2,
    extract_phases,
    guarded_phase_search,
    project_unit_modulus,
    relaxed_phases,
    relaxed_views,
    solve_subproblem2,
    vectorized_snr_matrix,
)
from secure_dfrc.metrics import DesignState, radar_snr, secrecy_rate
from secure_dfrc.scenario import ArrayGeometry, build_scenario, random_phases

from .conftest import crandn, random_design, small_scenario


def snr_via_z(d, s, phi):
    Z, ub = vectorized_snr_matrix(d, s)
    u = ub(phi)
    return abs(s.beta) ** 2 / s.sigma2_r * np.real(np.vdot(u, Z @ u))


class TestPhiObjective:
    def test_zero_aux(self, rng):
        s = small_scenario(0)
        obj = build_phi_objective(random_design(rng, s), AuxiliaryState(), s)
        assert not np.any(obj.Q) and not np.any(obj.lin)

    def test_no_an_quadratic_from_beam_only(self, rng):
        s = small_scenario(1)
        d = random_design(rng, s)
        d = d.with_(W_n=np.zeros_like(d.W_n))
        obj = build_phi_objective(d, update_auxiliaries(d, s), s)
        # with W_n = 0 the covariance is w w^H, so Q has rank at most two
        assert np.sum(np.abs(np.linalg.eigvalsh(obj.Q)) > 1e-12 * np.abs(obj.Q).max()) <= 2

    def test_matches_transformed_objective(self, rng):
        for seed in range(5):
            s = small_scenario(seed)
            d = random_design(rng, s)
            aux = update_auxiliaries(random_design(rng, s), s)  # any aux works
            obj = build_phi_objective(d, aux, s)
            for _ in range(10):
                phi = random_phases(rng, s.geometry.n_irs)
                assert obj.value(phi) == pytest.approx(transformed_objective(d.with_(phi=phi), aux, s), abs=1e-9)

    def test_value_is_real_quadratic(self, rng):
        s = small_scenario(2)
        d = random_design(rng, s)
        obj = build_phi_objective(d, update_auxiliaries(d, s), s)
        np.testing.assert_allclose(obj.Q, obj.Q.conj().T, atol=1e-15)


class TestSnrMatrix:
    def test_zero_design(self):
        s = small_scenario(0)
        n = s.geometry.n_tx
        Z, _ = vectorized_snr_matrix(DesignState(np.zeros(n), np.zeros((n, n)), np.ones(s.geometry.n_irs)), s)
        assert not np.any(Z)

    def test_kronecker_identity_n2(self, rng):
        geo = ArrayGeometry(n_tx=3, n_rx=2, irs_rows=1, irs_cols=2)
        s = small_scenario(0, geo)
        d = random_design(rng, s)
        Z, _ = vectorized_snr_matrix(d, s)
        A = s.H_ul.conj().T @ s.H_ul
        B = s.H_dl @ (np.outer(d.w, d.w.conj()) + d.W_n @ d.W_n.conj().T) @ s.H_dl.conj().T
        for _ in range(5):
            U = crandn(rng, 2, 2)
            u = U.ravel(order="F")
            assert np.vdot(u, Z @ u) == pytest.approx(np.trace(U.conj().T @ A @ U @ B), rel=1e-12)

    def test_quartic_identity(self, rng):
        for seed in range(10):
            s = small_scenario(seed)
            d = random_design(rng, s)
            assert snr_via_z(d, s, d.phi) == pytest.approx(radar_snr(d, s), rel=1e-9)

    def test_psd(self, rng):
        s = small_scenario(3)
        Z, _ = vectorized_snr_matrix(random_design(rng, s), s)
        ev = np.linalg.eigvalsh(Z)
        assert ev[0] >= -1e-10 * np.abs(ev).max()


class TestSurrogate:
    def test_tangency_and_minorization(self, rng):
        for seed in range(5):
            s = small_scenario(seed)
            d = random_design(rng, s)
            sur = build_snr_surrogate(d.phi, d, s)
            assert sur.value(d.phi) == pytest.approx(radar_snr(d, s), abs=1e-8)
            for _ in range(50):
                phi = random_phases(rng, s.geometry.n_irs)
                assert sur.value(phi) <= radar_snr(d.with_(phi=phi), s) + 1e-8

    def test_matches_linearization_of_z(self, rng):
        s = small_scenario(4)
        d = random_design(rng, s)
        Z, ub = vectorized_snr_matrix(d, s)
        c = abs(s.beta) ** 2 / s.sigma2_r
        ut = ub(d.phi)
        sur = build_snr_surrogate(d.phi, d, s)
        for _ in range(10):
            phi = random_phases(rng, s.geometry.n_irs)
            u = ub(phi)
            ref = c * np.real(np.vdot(u, Z @ ut) + np.vdot(ut, Z @ u) - np.vdot(ut, Z @ ut))
            assert sur.value(phi) == pytest.approx(ref, rel=1e-10, abs=1e-12)

    def test_zero_z(self):
        s = small_scenario(0)
        n = s.geometry.n_tx
        d = DesignState(np.zeros(n), np.zeros((n, n)), np.ones(s.geometry.n_irs))
        sur = build_snr_surrogate(d.phi, d, s)
        assert sur.value(random_phases(np.random.default_rng(0), s.geometry.n_irs)) == 0

    def test_shifted_threshold_bookkeeping(self, rng):
        s = small_scenario(5)
        d = random_design(rng, s)
        g = 0.8 * radar_snr(d, s)
        sur = build_snr_surrogate(d.phi, d, s, gamma_th=g)
        for _ in range(20):
            phi = random_phases(rng, s.geometry.n_irs)
            assert (sur.value(phi) >= g) == (sur.pair(phi).real >= sur.gamma_th_shifted)


class TestSubproblem2:
    def test_vacuous_snr_row(self):
        obj = PhiObjective(np.diag([0.5, -0.2]), np.array([1.0, 1j]), 0.0)
        sur = SnrSurrogate(np.zeros((2, 2)), np.zeros((2, 2)), 0.0, 0.0)
        p = build_subproblem2(obj, sur)
        assert [c.name for c in p.constraints] == ["unit_0", "unit_1", "corner"]

    @pytest.mark.parametrize("lin", [1.0 + 1.0j, -2.0, 0.3 - 2j])
    def test_scalar_closed_form(self, lin):
        obj = PhiObjective(np.array([[0.7]]), np.array([lin]), 0.0)
        sur = SnrSurrogate(np.zeros((1, 1)), np.zeros((1, 1)), 0.0, 0.0)
        p = build_subproblem2(obj, sur)
        sol = solve_subproblem2(p)
        np.testing.assert_allclose(relaxed_phases(sol, p), [np.exp(-1j * np.angle(lin))], atol=1e-4)
        assert sol.objective == pytest.approx(0.7 + abs(lin), abs=1e-6)

    def test_table_size(self, rng):
        s = build_scenario(np.random.default_rng(0))
        d = random_design(rng, s)
        p = build_subproblem2(build_phi_objective(d, update_auxiliaries(d, s), s),
                              build_snr_surrogate(d.phi, d, s, 10 ** -1.1))
        assert p.blocks == [51]
        assert sum(c.name.startswith("unit_") for c in p.constraints) == 25
        assert any(c.name == "radar_snr" for c in p.constraints)

    def test_explicit_modulus_rows_agree(self, rng):
        """The |R2_nn| <= 1 family is implied; adding it must not move the optimum."""
        for seed in range(3):
            s = small_scenario(seed)
            d = random_design(rng, s)
            obj = build_phi_objective(d, update_auxiliaries(d, s), s)
            sur = build_snr_surrogate(d.phi, d, s, 0.5 * radar_snr(d, s))
            a = solve_subproblem2(build_subproblem2(obj, sur))
            b = solve_subproblem2(build_subproblem2(obj, sur, explicit_r2_bound=True))
            assert a.objective == pytest.approx(b.objective, rel=1e-6, abs=1e-6)

    def test_solution_constraints(self, rng):
        s = small_scenario(6)
        d = random_design(rng, s)
        obj = build_phi_objective(d, update_auxiliaries(d, s), s)
        sur = build_snr_surrogate(d.phi, d, s, 0.5 * radar_snr(d, s))
        p = build_subproblem2(obj, sur, explicit_r2_bound=True)
        sol = solve_subproblem2(p)
        assert sdp.verify(sol, p).ok
        N = s.geometry.n_irs
        phi, R1, R2 = relaxed_views(sol.X[0], N)
        np.testing.assert_allclose(np.diag(R1).real, 1.0, atol=1e-6)
        assert np.all(np.abs(np.diag(R2)) <= 1 + 1e-6)
        lifted = np.block([[R1, phi[:, None]], [phi.conj()[None, :], np.ones((1, 1))]])
        assert np.linalg.eigvalsh(lifted)[0] >= -1e-6

    def test_views_of_rank_one_lift(self, rng):
        phi = np.exp(1j * rng.uniform(0, 6, 4))
        x = np.concatenate([phi.real, phi.imag, [1.0]])
        _, R1, R2 = relaxed_views(np.outer(x, x), 4)
        np.testing.assert_allclose(R1, np.outer(phi, phi.conj()), atol=1e-14)
        np.testing.assert_allclose(R2, np.outer(phi, phi), atol=1e-14)


class TestExtraction:
    def test_projection(self):
        np.testing.assert_allclose(project_unit_modulus([2, 0.5j]), [1, 1j])
        np.testing.assert_allclose(project_unit_modulus([0.0, -3.0]), [1, -1])
        phi = np.exp(1j * np.arange(4))
        np.testing.assert_allclose(project_unit_modulus(phi), phi)

    def test_guarded_ascent(self, rng):
        for seed in range(5):
            s = small_scenario(seed)
            d = random_design(rng, s)
            g = 0.5 * radar_snr(d, s)
            obj = build_phi_objective(d, update_auxiliaries(d, s), s)
            p = build_subproblem2(obj, build_snr_surrogate(d.phi, d, s, g))
            upd = extract_phases(solve_subproblem2(p), p, d, s, g)
            np.testing.assert_allclose(np.abs(upd.phi), 1.0)
            d2 = d.with_(phi=upd.phi)
            assert secrecy_rate(d2, s) >= secrecy_rate(d, s) - 1e-6
            assert radar_snr(d2, s) >= g * (1 - 1e-6)
            if not upd.accepted:
                np.testing.assert_array_equal(upd.phi, d.phi)

    def test_repair_failure(self, rng):
        s = small_scenario(0)
        d = random_design(rng, s)
        with pytest.raises(RepairFailed):
            guarded_phase_search(random_phases(rng, s.geometry.n_irs), d, s, 1e6 * radar_snr(d, s) + 1)
