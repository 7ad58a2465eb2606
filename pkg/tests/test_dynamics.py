import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from rbtensor.dynamics import (
    COMPONENTS,
    SYMPLECTIC_FORM,
    JointGaussianState,
    Scenario,
    ScenarioConfig,
    beamsplitter_exact_map,
    clone_exact_map,
    condition_on_homodyne,
    evolve_gaussian,
    evolve_mean_field,
    precession_closed_form,
    quadrature_frame,
    quadrature_map,
    run_scenario,
    sample_homodyne,
    swap_coupling,
    tangent_map,
)
from rbtensor.exceptions import DegenerateState
from rbtensor.hamiltonian import ClassicalVectors, HamiltonianCoefficients, mean_field_energy

ISO = HamiltonianCoefficients(1.0, 1.0)


def random_vectors(seed):
    rng = np.random.default_rng(seed)
    return ClassicalVectors(rng.normal(size=3), rng.normal(size=3))


def rel(x, y):
    return float(np.max(np.abs(np.asarray(x) - y)) / max(np.max(np.abs(y)), 1e-300))


class TestMeanField:
    def test_zero_pseudo_spin_leaves_stokes_fixed(self):
        v = ClassicalVectors([0.3, -1.0, 2.0], [0, 0, 0])
        tr = evolve_mean_field(v, HamiltonianCoefficients(0.4, -1.3), 5.0, 200)
        assert np.all(tr.S == v.S) and np.all(tr.J == 0)

    def test_zero_coupling_is_identity(self):
        v = random_vectors(3)
        tr = evolve_mean_field(v, ISO, 0.0, 10)
        assert np.all(tr.S == v.S) and np.all(tr.J == v.J)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_swap(self, seed):
        rng = np.random.default_rng(seed)
        S, J = rng.normal(size=3), rng.normal(size=3)
        J *= np.linalg.norm(S) / np.linalg.norm(J)
        v = ClassicalVectors(S, J)
        final = evolve_mean_field(v, ISO, swap_coupling(v), 1000).final
        assert rel(final.J, S) < 1e-6 and rel(final.S, J) < 1e-6

    @pytest.mark.parametrize("seed, coupling", [(0, 1.0), (1, 0.37), (2, -2.0)])
    def test_closed_form_matches_rk4(self, seed, coupling):
        v = random_vectors(seed)
        c = HamiltonianCoefficients(coupling, coupling)
        kappa = 2 * math.pi / abs(coupling * np.linalg.norm(v.S + v.J))
        tr = evolve_mean_field(v, c, kappa, 1000)
        S_cf, J_cf = precession_closed_form(v, coupling, tr.s)
        assert np.max(np.abs(S_cf - tr.S)) < 1e-8
        assert np.max(np.abs(J_cf - tr.J)) < 1e-8

    def test_closed_form_starts_at_input(self):
        v = random_vectors(5)
        S, J = precession_closed_form(v, 1.0, 0.0)
        np.testing.assert_allclose(S, v.S, atol=1e-14)
        np.testing.assert_allclose(J, v.J, atol=1e-14)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_isotropic_conservation(self, seed):
        v = random_vectors(seed)
        L0 = v.S + v.J
        tr = evolve_mean_field(v, ISO, 4 * math.pi / np.linalg.norm(L0), 4000)
        nS, nJ = np.linalg.norm(tr.S, axis=1), np.linalg.norm(tr.J, axis=1)
        assert rel(nS, np.linalg.norm(v.S)) < 1e-10
        assert rel(nJ, np.linalg.norm(v.J)) < 1e-10
        assert np.max(np.linalg.norm(tr.S + tr.J - L0, axis=1)) / np.linalg.norm(L0) < 1e-10
        dots = np.einsum("ni,ni->n", tr.S, tr.J)
        assert rel(dots, float(v.S @ v.J)) < 1e-10

    @pytest.mark.parametrize("a, b", [(1.0, 0.0), (0.0, 1.0), (1.0, -0.4), (-0.3, 2.0)])
    def test_general_conservation(self, a, b):
        v = random_vectors(7)
        c = HamiltonianCoefficients(a, b)
        tr = evolve_mean_field(v, c, 3.0, 2000)
        lz = tr.S[:, 2] + tr.J[:, 2]
        assert np.max(np.abs(lz - lz[0])) < 1e-12
        e = [mean_field_energy(c, ClassicalVectors(s, j)) for s, j in zip(tr.S, tr.J)]
        assert np.max(np.abs(np.subtract(e, e[0]))) < 1e-10 * max(abs(e[0]), 1.0)


class TestGaussianState:
    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda x: np.linalg.norm(x) > 0.1),
        st.floats(1.0, 1e6),
    )
    def test_coherent_invariant(self, direction, length):
        n = np.asarray(direction) / np.linalg.norm(direction)
        st_ = JointGaussianState.coherent(length * n, [0, 0, 3.0], 1e6, 3.0)
        block = st_.cov[:3, :3]
        t1 = np.cross(n, [1, 0, 0] if abs(n[0]) < 0.9 else [0, 1, 0])
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(n, t1)
        assert t1 @ block @ t1 == pytest.approx(length / 2, rel=1e-12)
        assert t2 @ block @ t2 == pytest.approx(length / 2, rel=1e-12)
        assert abs(t1 @ block @ t2) < 1e-9 * length
        assert abs(n @ block @ n) < 1e-9 * length
        assert np.all(st_.cov[:3, 3:] == 0)

    def test_validation(self):
        cov = np.eye(6)
        with pytest.raises(ValueError):
            JointGaussianState(np.zeros(6), cov - 2 * np.eye(6), 1, 1)
        bad = cov.copy()
        bad[0, 1] = 0.5
        with pytest.raises(ValueError):
            JointGaussianState(np.zeros(6), bad, 1, 1)
        with pytest.raises(ValueError):
            JointGaussianState(np.zeros(5), cov, 1, 1)

    def test_read_only(self):
        s = JointGaussianState.coherent([1, 0, 0], [0, 0, 1], 1, 1)
        with pytest.raises(ValueError):
            s.mean[0] = 2.0

    def test_unknown_observable(self):
        s = JointGaussianState.coherent([1, 0, 0], [0, 0, 1], 1, 1)
        with pytest.raises(ValueError):
            s.variance("Sw")


class TestEvolveGaussian:
    def test_zero_kappa_is_identity(self):
        s = JointGaussianState.coherent([3, 1, 0], [0, 2, 2], 5, 5)
        out = evolve_gaussian(s, HamiltonianCoefficients(0.3, 0.9), 0.0, 10)
        assert np.all(out.mean == s.mean) and np.all(out.cov == s.cov)

    def test_degenerate_mean_raises(self):
        s = JointGaussianState(np.array([0, 0, 0, 1.0, 0, 0]), np.eye(6), 10, 10)
        with pytest.raises(DegenerateState):
            evolve_gaussian(s, ISO, 1.0)
        with pytest.raises(DegenerateState):
            JointGaussianState.coherent([0, 0, 0], [1, 0, 0], 1, 1)

    def test_qnd_z_components_invariant(self):
        S0, J0 = 5e5, 5e5
        s = JointGaussianState.coherent([S0, 0, 0], [J0, 0, 0], S0, J0)
        out = evolve_gaussian(s, HamiltonianCoefficients(1.0, 0.0), 3 / math.sqrt(S0 * J0), 500)
        for k in (2, 5):
            assert out.mean[k] == s.mean[k]
            assert out.cov[k, k] == s.cov[k, k]
        assert out.variance("Sy") > s.variance("Sy")

    def test_qnd_first_order_mean_map(self):
        # <S_y> gains kappa a <J_z> <S_x> to first order
        S = np.array([1.0, 0.0, 0.0])
        J = np.array([0.8, 0.0, 0.6])
        c = HamiltonianCoefficients(1.0, 0.0)
        residuals = []
        for kappa in (1e-4, 1e-3, 1e-2):
            s = JointGaussianState.coherent(S, J, 1.0, 1.0)
            sy = evolve_gaussian(s, c, kappa, 100).mean[1]
            first = kappa * c.a * J[2] * S[0]
            residuals.append(abs(sy - first) / abs(first))
        ratios = [residuals[i + 1] / residuals[i] for i in range(2)]
        assert all(r == pytest.approx(100, rel=0.05) for r in ratios)
        assert residuals[1] < 1e-6

    @pytest.mark.parametrize("a, b", [(1.0, 1.0), (1.0, 0.0), (0.0, 1.0), (0.4, -1.1)])
    def test_psd_and_symmetric(self, a, b):
        s = JointGaussianState.coherent([30, -20, 50], [10, 40, -5], 100, 100)
        out = evolve_gaussian(s, HamiltonianCoefficients(a, b), 0.05, 400)
        assert np.array_equal(out.cov, out.cov.T)
        assert np.min(np.linalg.eigvalsh(out.cov)) > -1e-9 * np.max(np.abs(out.cov))

    def test_tangent_map_matches_finite_difference(self):
        s = JointGaussianState.coherent([3, 1, 2], [1, -2, 1], 5, 5)
        c = HamiltonianCoefficients(0.7, -0.2)
        M = tangent_map(s, c, 0.5, 400)
        eps = 1e-6
        for k in range(6):
            dx = np.zeros(6)
            dx[k] = eps
            plus = evolve_mean_field(ClassicalVectors(s.mean[:3] + dx[:3], s.mean[3:] + dx[3:]), c, 0.5, 400).final
            minus = evolve_mean_field(ClassicalVectors(s.mean[:3] - dx[:3], s.mean[3:] - dx[3:]), c, 0.5, 400).final
            col = (np.concatenate([plus.S, plus.J]) - np.concatenate([minus.S, minus.J])) / (2 * eps)
            np.testing.assert_allclose(M[:, k], col, atol=1e-7)


class TestHomodyne:
    def qnd_state(self, kappa):
        S0 = J0 = 5e5
        s = JointGaussianState.coherent([S0, 0, 0], [J0, 0, 0], S0, J0)
        return s, evolve_gaussian(s, HamiltonianCoefficients(1.0, 0.0), kappa, 200)

    def test_uncorrelated_observable(self):
        s, _ = self.qnd_state(0.0)
        out = condition_on_homodyne(s, "Sy", 12.0)
        assert out.variance("Jz") == s.variance("Jz")
        assert out.mean[5] == s.mean[5]

    def test_two_by_two_oracle(self):
        kappa = 2e-6
        s, out = self.qnd_state(kappa)
        vj, vs, cjs = out.cov[5, 5], out.cov[1, 1], out.cov[5, 1]
        cond = condition_on_homodyne(out, "Sy", out.mean[1] + 40.0)
        assert cond.variance("Jz") == pytest.approx(vj - cjs**2 / vs, rel=1e-12)
        assert cond.mean[5] == pytest.approx(out.mean[5] + cjs * 40.0 / vs, rel=1e-12, abs=1e-12)
        # linear QND: Var(Jz | Sy) = Var(Jz) / (1 + kappa^2 a^2 S0^2 Var(Jz) / Var(Sy)_in)
        k2 = (kappa * s.mean[0]) ** 2
        expected = s.variance("Jz") / (1 + k2 * s.variance("Jz") / s.variance("Sy"))
        assert cond.variance("Jz") == pytest.approx(expected, rel=1e-9)
        assert cond.variance("Jz") < s.J0 / 2

    @pytest.mark.parametrize("floor", [1e30, math.inf])
    def test_noisy_measurement_carries_no_information(self, floor):
        _, out = self.qnd_state(2e-6)
        cond = condition_on_homodyne(out, "Sy", out.mean[1] + 5.0, noise_floor=floor)
        np.testing.assert_allclose(cond.cov, out.cov, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(cond.mean, out.mean, rtol=1e-12, atol=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(
        st.integers(0, 2**32 - 1),
        st.sampled_from(COMPONENTS),
        st.floats(-10, 10),
        st.floats(0, 10),
    )
    def test_never_increases_diagonal(self, seed, obs, outcome, floor):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(6, 6))
        cov = A @ A.T + 1e-3 * np.eye(6)
        s = JointGaussianState(rng.normal(size=6), cov, 1, 1)
        out = condition_on_homodyne(s, obs, outcome, floor)
        assert np.all(np.diag(out.cov) <= np.diag(s.cov) + 1e-12 * np.max(cov))

    def test_zero_variance_rejected(self):
        s = JointGaussianState.coherent([1, 0, 0], [0, 0, 1], 1, 1)
        with pytest.raises(ValueError):
            condition_on_homodyne(s, "Sx", 0.0)

    def test_seeded_sampler(self):
        _, out = self.qnd_state(2e-6)
        assert sample_homodyne(out, "Sy", rng=3) == sample_homodyne(out, "Sy", rng=3)


class TestQuadratures:
    def pole(self):
        return JointGaussianState.coherent([0, 0, 400.0], [0, 0, 900.0], 400.0, 900.0)

    def test_beamsplitter_quarter_cycle_against_expm(self):
        s = self.pole()
        b = 0.5
        eta = b * math.sqrt(400.0 * 900.0)
        kappa = math.pi / (2 * eta)
        T = quadrature_map(quadrature_frame(s, "Sx", "Sy"), tangent_map(s, HamiltonianCoefficients(0.0, b), kappa))
        G = np.array([[0, 0, 0, 1], [0, 0, -1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]], dtype=float)
        assert np.max(np.abs(T - expm(G * eta * kappa))) < 1e-8
        xl, pl = 0.3, -1.7
        xa, pa = (T @ [xl, pl, 0.0, 0.0])[2:]
        assert xa == pytest.approx(pl, abs=1e-8) and pa == pytest.approx(-xl, abs=1e-8)

    def test_clone_is_two_mode_squeezer(self):
        s = JointGaussianState.coherent([0, 0, -400.0], [0, 0, 900.0], 400.0, 900.0)
        b = 0.5
        beta = b * math.sqrt(400.0 * 900.0)
        T = quadrature_map(quadrature_frame(s, "Sy", "Sx"), tangent_map(s, HamiltonianCoefficients(0.0, b), 1.3 / beta))
        assert np.max(np.abs(T - clone_exact_map(1.3))) < 1e-8
        assert np.max(np.abs(T @ SYMPLECTIC_FORM @ T.T - SYMPLECTIC_FORM)) < 1e-8
        # equal rates and hyperbolic growth
        assert T[0, 2] == pytest.approx(T[2, 0]) and T[1, 3] == pytest.approx(T[3, 1])
        assert T[0, 0] == pytest.approx(math.cosh(1.3), rel=1e-8)
        assert T[0, 2] == pytest.approx(math.sinh(1.3), rel=1e-8)

    @pytest.mark.parametrize("x", [0.0, 0.4, 2.0])
    def test_exact_maps_are_symplectic(self, x):
        for T in (clone_exact_map(x), beamsplitter_exact_map(x)):
            np.testing.assert_allclose(T @ SYMPLECTIC_FORM @ T.T, SYMPLECTIC_FORM, atol=1e-14)

    def test_frame_needs_z_polarisation(self):
        s = JointGaussianState.coherent([1, 0, 0], [0, 0, 1], 1, 1)
        with pytest.raises(DegenerateState):
            quadrature_frame(s)


class TestScenarios:
    @pytest.mark.parametrize("scenario", list(Scenario))
    def test_first_row_is_prepared_state(self, scenario):
        ts = run_scenario(ScenarioConfig(scenario, steps=50))
        S0 = J0 = 5e5
        first = ts.mean[0]
        assert np.linalg.norm(first[:3]) == pytest.approx(S0, rel=1e-12)
        assert np.linalg.norm(first[3:]) == pytest.approx(J0, rel=1e-12)
        assert ts.t[0] == 0.0 and ts.t[-1] == 1.0

    def test_csv_header(self):
        ts = run_scenario(ScenarioConfig("qnd", steps=4))
        lines = ts.to_csv().splitlines()
        assert lines[0] == "t,Sx,Sy,Sz,Jx,Jy,Jz,var_Jz,var_Sy,var_Jy,var_Sz,cov_Jz_Sy"
        assert len(lines) == 6

    def test_atom_number_azimuth_invariance(self):
        readouts = [
            run_scenario(ScenarioConfig("atom-number", azimuth=phi, steps=200)).summary["readout"]
            for phi in (0.0, 0.7, 2.0, -2.9)
        ]
        assert np.ptp(readouts) < 1e-9 * abs(readouts[0])

    def test_atom_number_first_order(self):
        ts = run_scenario(ScenarioConfig("atom-number", kappa=1e-10, steps=50))
        s = ts.summary
        assert s["readout"] == pytest.approx(s["first_order_readout"], rel=1e-6)
        assert s["n_atoms_estimate"] == pytest.approx(1e6, rel=1e-6)

    def test_qnd_zero_kappa(self):
        s = run_scenario(ScenarioConfig("qnd", kappa=0.0, steps=10)).summary
        assert s["var_Jz_conditioned"] == s["projection_noise"] == 2.5e5

    def test_qnd_squeezes(self):
        s = run_scenario(ScenarioConfig("qnd", steps=200)).summary
        assert s["var_Jz_conditioned"] < s["projection_noise"]
        assert s["var_Jz"] == pytest.approx(s["projection_noise"], rel=1e-12)

    def test_memory_swap(self):
        s = run_scenario(ScenarioConfig("memory-swap")).summary
        assert s["swap_error"] < 1e-6 and s["reverse_swap_error"] < 1e-6

    def test_beamsplitter_negated_mapping(self):
        s = run_scenario(ScenarioConfig("memory-bs", light_quadratures=(1.0, 0.5))).summary
        assert s["map_error"] < 1e-8 and s["symplectic_error"] < 1e-8
        assert s["XA_out"] == pytest.approx(s["PL_in"], abs=1e-4)
        assert s["PA_out"] == pytest.approx(-s["XL_in"], abs=1e-4)

    def test_clone_amplifies(self):
        ts = run_scenario(ScenarioConfig("clone", light_quadratures=(1.0, 0.5)))
        s = ts.summary
        assert s["map_error"] < 1e-8
        assert s["XL_out"] == pytest.approx(math.cosh(1.0) * s["XL_in"] + math.sinh(1.0) * s["XA_in"], rel=1e-4)
        assert s["PL_out"] == pytest.approx(math.cosh(1.0) * s["PL_in"] - math.sinh(1.0) * s["PA_in"], rel=1e-4)
        var_xl = ts.extra[-1, ts.columns.index("var_XL")]
        assert var_xl == pytest.approx(0.5 * math.cosh(2.0), rel=1e-4)

    def test_explicit_coefficients_override(self):
        ts = run_scenario(ScenarioConfig("memory-swap", coefficients=HamiltonianCoefficients(2.0, 2.0)))
        assert ts.coefficients.a == 2.0 and ts.line is None
        assert ts.summary["swap_error"] < 1e-6

    @pytest.mark.parametrize("scenario", list(Scenario))
    def test_step_halving_convergence(self, scenario):
        a = run_scenario(ScenarioConfig(scenario, steps=1000))
        b = run_scenario(ScenarioConfig(scenario, steps=2000))
        assert rel(b.mean[-1], a.mean[-1]) < 1e-8
        assert rel(b.extra[-1], a.extra[-1]) < 1e-8

    @pytest.mark.parametrize("kwargs", [dict(steps=0), dict(kappa=math.nan), dict(n_atoms=0)])
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            ScenarioConfig("qnd", **kwargs)
