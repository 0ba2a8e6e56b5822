import numpy as np
import pytest

from lowrankrec.burer_monteiro import (
    UnitDiagSDP,
    objective,
    opnorm_estimate,
    phasecut_cost,
    random_factor,
    reference_rank,
    reference_sdp_solve,
    retract,
    riemannian_gd,
    riemannian_grad,
    round_factor,
    sdp_from_dict,
    sdp_to_dict,
    sosp_probe,
    sync_cost,
)
from lowrankrec.errors import RankDeficient
from lowrankrec.numerics import RngStream, hermitian_eigen, hermitize, least_squares, sample_gaussian
from lowrankrec.phase_sync import fixed_point_residual, gpm, mle_objective, torus_project
from lowrankrec.problems import dist_mod_phase, gen_phase_retrieval, gen_sync, rel_error_mod_phase


def random_cost(rng, n):
    return UnitDiagSDP(n, hermitize(sample_gaussian(rng, n * n, "real").reshape(n, n)), "raw", None)


class TestPhasecutCost:
    def test_zero_at_truth_phases(self):
        inst = gen_phase_retrieval(6, 30, "complex-gaussian", RngStream(1))
        prob = phasecut_cost(inst)
        u = torus_project(inst.matrix @ inst.x_true)
        val = float(np.real(np.vdot(u, prob.cost @ u)))
        assert abs(val) <= 1e-10 * opnorm_estimate(prob.cost) * inst.m

    def test_variational_contract(self):
        # u* C u equals the least-squares residual of fitting the phased
        # moduli, for random unit-modulus u
        rng = RngStream(2)
        inst = gen_phase_retrieval(5, 20, "complex-gaussian", rng.split(0))
        prob = phasecut_cost(inst)
        for i in range(20):
            u = np.exp(2j * np.pi * rng.split(1, i).generator.random(20))
            lhs = float(np.real(np.vdot(u, prob.cost @ u)))
            y = inst.moduli * u
            x = least_squares(inst.matrix, y)
            rhs = float(np.linalg.norm(inst.matrix @ x - y) ** 2)
            assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-10)

    def test_positive_semidefinite(self):
        inst = gen_phase_retrieval(4, 16, "complex-gaussian", RngStream(3))
        prob = phasecut_cost(inst)
        w, _ = hermitian_eigen(prob.cost)
        assert w[0] >= -1e-10 * max(abs(w[-1]), 1.0)

    def test_rank_deficient_when_undersampled(self):
        inst = gen_phase_retrieval(8, 4, "complex-gaussian", RngStream(4))
        with pytest.raises(RankDeficient):
            phasecut_cost(inst)


class TestSyncCost:
    def test_rank_one_optimum_value(self):
        inst = gen_sync(12, 0.0, RngStream(5))
        prob = sync_cost(inst)
        val = float(np.real(np.vdot(inst.z_true, prob.cost @ inst.z_true)))
        assert val == pytest.approx(-144.0, rel=1e-12)

    def test_cost_hermitian(self):
        inst = gen_sync(9, 0.7, RngStream(6))
        prob = sync_cost(inst)
        assert np.array_equal(prob.cost, prob.cost.conj().T)

    def test_matches_mle_objective(self):
        inst = gen_sync(15, 0.4, RngStream(7))
        prob = sync_cost(inst)
        report, _ = gpm(inst)
        z = report.estimate
        assert objective(prob, z.reshape(-1, 1)) == pytest.approx(
            -mle_objective(inst.observations, z), rel=1e-10)


class TestRiemannianGrad:
    def test_zero_at_global_minimizer(self):
        inst = gen_sync(10, 0.0, RngStream(8))
        prob = sync_cost(inst)
        H = riemannian_grad(prob, inst.z_true.reshape(-1, 1))
        assert np.linalg.norm(H) <= 1e-10 * 10

    def test_rows_tangent(self):
        rng = RngStream(9)
        prob = random_cost(rng.split(0), 12)
        V = random_factor(rng.split(1), 12, 3)
        H = riemannian_grad(prob, V)
        radial = np.real(np.einsum("ij,ij->i", V.conj(), H))
        assert np.max(np.abs(radial)) <= 1e-10 * opnorm_estimate(prob.cost)

    def test_directional_derivative(self):
        rng = RngStream(10)
        prob = random_cost(rng.split(0), 8)
        V = random_factor(rng.split(1), 8, 2)
        for i in range(10):
            G = sample_gaussian(rng.split(2, i), 16, "complex").reshape(8, 2)
            H = G - np.real(np.einsum("ij,ij->i", V.conj(), G))[:, None] * V
            eps = 1e-6
            fd = (objective(prob, V + eps * H) - objective(prob, V - eps * H)) / (2 * eps)
            an = float(np.real(np.vdot(riemannian_grad(prob, V), H)))
            assert fd == pytest.approx(an, rel=1e-6, abs=1e-8)


class TestRetract:
    def test_zero_tangent_identity(self):
        V = random_factor(RngStream(11), 7, 2)
        assert np.allclose(retract(V, np.zeros_like(V)), V, atol=1e-15)

    def test_p1_matches_torus_projection(self):
        rng = RngStream(12)
        z = torus_project(sample_gaussian(rng.split(0), 9, "complex")).reshape(-1, 1)
        h = 1j * z * rng.split(1).generator.standard_normal((9, 1))  # tangent rows
        assert np.allclose(retract(z, h), torus_project(z + h).reshape(-1, 1), atol=1e-12)

    def test_second_order_agreement(self):
        rng = RngStream(13)
        V = random_factor(rng.split(0), 10, 3)
        G = sample_gaussian(rng.split(1), 30, "complex").reshape(10, 3)
        H = G - np.real(np.einsum("ij,ij->i", V.conj(), G))[:, None] * V
        for t in (1e-2, 1e-3):
            gap = np.linalg.norm(retract(V, t * H) - (V + t * H))
            assert gap <= 2.0 * t ** 2 * np.linalg.norm(H) ** 2

    def test_zero_row_convention(self):
        V = np.array([[1.0 + 0j, 0.0]])
        out = retract(V, -V)
        assert np.allclose(out, np.array([[1.0 + 0j, 0.0]]))


class TestRiemannianGD:
    def test_immediate_stop_at_minimizer(self):
        inst = gen_sync(14, 0.0, RngStream(14))
        prob = sync_cost(inst)
        V, rep = riemannian_gd(prob, 1, RngStream(15), v0=inst.z_true.reshape(-1, 1))
        assert rep.converged
        assert rep.iterations == 0

    def test_feasibility_preserved(self):
        rng = RngStream(16)
        prob = random_cost(rng.split(0), 15)
        V, rep = riemannian_gd(prob, 3, rng.split(1), max_iter=2000)
        assert np.allclose(np.linalg.norm(V, axis=1), 1.0, atol=1e-10)

    def test_objective_trace_non_increasing(self):
        rng = RngStream(17)
        prob = random_cost(rng.split(0), 12)
        _, rep = riemannian_gd(prob, 2, rng.split(1), max_iter=500)
        assert np.all(np.diff(rep.objective_trace) <= 0)

    def test_gauge_invariance_of_objective(self):
        rng = RngStream(18)
        prob = random_cost(rng.split(0), 10)
        V = random_factor(rng.split(1), 10, 3)
        q, _ = np.linalg.qr(sample_gaussian(rng.split(2), 9, "complex").reshape(3, 3))
        assert objective(prob, V @ q) == pytest.approx(objective(prob, V), rel=1e-10)

    def test_p1_sync_limit_is_gpm_fixed_point(self):
        inst = gen_sync(40, 0.3, RngStream(19))
        prob = sync_cost(inst)
        V, rep = riemannian_gd(prob, 1, RngStream(20), max_iter=30000)
        z = V[:, 0]
        assert fixed_point_residual(inst.observations, z) <= 1e-5 * np.sqrt(40)

    def test_multistart_consistency(self):
        # no spurious second-order critical values when p(p+1)/2 > n
        rng = RngStream(21)
        for i in range(5):
            prob = random_cost(rng.split(0, i), 16)
            vals = []
            for s in range(3):
                _, rep = riemannian_gd(prob, 7, rng.split(1, i, s), max_iter=30000)
                vals.append(rep.objective_trace[-1])
            spread = max(vals) - min(vals)
            assert spread <= 1e-6 * abs(min(vals))


class TestRoundFactor:
    def test_rank_one_passthrough(self):
        rng = RngStream(22)
        inst = gen_sync(11, 0.2, rng.split(0))
        prob = sync_cost(inst)
        z = torus_project(sample_gaussian(rng.split(1), 11, "complex"))
        out = round_factor(prob, z.reshape(-1, 1))
        assert dist_mod_phase(out, z) <= 1e-9 * np.sqrt(11)

    def test_wide_factor_of_rank_one_matrix(self):
        inst = gen_sync(9, 0.0, RngStream(23))
        prob = sync_cost(inst)
        q, _ = np.linalg.qr(sample_gaussian(RngStream(24), 9, "complex").reshape(3, 3))
        V = np.outer(inst.z_true, q[0].conj())  # V V* = z z*
        out = round_factor(prob, V)
        assert dist_mod_phase(out, inst.z_true) <= 1e-9 * 3

    def test_phasecut_pipeline_end_to_end(self):
        inst = gen_phase_retrieval(8, 64, "complex-gaussian", RngStream(25))
        prob = phasecut_cost(inst)
        u = torus_project(inst.matrix @ inst.x_true).reshape(-1, 1)  # a global optimum
        x = round_factor(prob, u)
        assert rel_error_mod_phase(x, inst.x_true, inst.field) < 1e-6


class TestSOSPProbe:
    def test_global_minimum_nonnegative(self):
        inst = gen_sync(12, 0.0, RngStream(26))
        prob = sync_cost(inst)
        cert = sosp_probe(prob, inst.z_true.reshape(-1, 1), trials=40, rng=RngStream(27))
        assert cert.min_quadform >= -1e-8 * 12
        assert cert.factor_rank == 1

    def test_quadform_matches_finite_differences(self):
        # the probe itself raises FDInconsistent beyond 5%; 50 random pairs
        rng = RngStream(28)
        for i in range(50):
            prob = random_cost(rng.split(0, i), 8)
            V = random_factor(rng.split(1, i), 8, 2)
            sosp_probe(prob, V, trials=1, rng=rng.split(2, i))

    def test_rank_deficient_limit_is_global(self):
        # a converged factor with numerical rank < p matches the best of 10
        # multistarts
        inst = gen_sync(16, 0.2, RngStream(29))
        prob = sync_cost(inst)
        V, rep = riemannian_gd(prob, 3, RngStream(30), max_iter=40000)
        cert = sosp_probe(prob, V, trials=20, rng=RngStream(31))
        vals = []
        for s in range(10):
            _, r = riemannian_gd(prob, 3, RngStream(32).split(s), max_iter=40000)
            vals.append(r.objective_trace[-1])
        if cert.factor_rank < 3:
            assert rep.objective_trace[-1] <= min(vals) + 1e-6 * abs(min(vals))


class TestReferenceSolve:
    def test_zero_noise_sync_value(self):
        inst = gen_sync(16, 0.0, RngStream(33))
        prob = sync_cost(inst)
        val, _ = reference_sdp_solve(prob, RngStream(34))
        assert val == pytest.approx(-(16.0 ** 2), rel=1e-6)

    def test_phasecut_exact_data_value_zero(self):
        inst = gen_phase_retrieval(6, 24, "complex-gaussian", RngStream(35))
        prob = phasecut_cost(inst)
        val, _ = reference_sdp_solve(prob, RngStream(36))
        assert abs(val) <= 1e-8 * opnorm_estimate(prob.cost) * inst.m

    def test_reference_rank_inequality(self):
        for n in (5, 20, 100, 256):
            p = reference_rank(n)
            assert p * (p + 1) // 2 > n


class TestSerialization:
    def test_roundtrip(self):
        prob = random_cost(RngStream(37), 6)
        back = sdp_from_dict(sdp_to_dict(prob))
        assert back.dim == 6
        assert np.allclose(back.cost, prob.cost, atol=1e-15)
        assert back.provenance == "raw"
