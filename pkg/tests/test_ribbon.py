"""Ribbon system: energies, metric, gradients, slope machinery, recovery shift."""

import numpy as np
import pytest
from numpy.polynomial import Polynomial

from vkribbon.fem import BoundaryData, Mesh1D
from vkribbon.forms import MaterialPair
from vkribbon.ribbon import RibbonForces, RibbonSystem, mutual_shift

BUMP = Polynomial.fromroots([-0.5, -0.5, 0.5, 0.5])  # (x^2 - 1/4)^2


@pytest.fixture
def mesh():
    return Mesh1D(l=1.0, n=12)


@pytest.fixture
def mat_h1():
    return MaterialPair.isotropic(1.0, 0.0, 1.0, 0.0)


@pytest.fixture
def system(mesh, mat_h1):
    return RibbonSystem(mesh, mat_h1)


def random_state(system, rng, amp=0.3):
    u = system.zero_state()
    u[system.free] += amp * rng.standard_normal(int(system.free.sum()))
    return u


class TestEnergy:
    def test_zero_state(self, system):
        assert system.energy(system.zero_state()) == 0.0

    def test_pure_stretch(self, mesh, mat_h1):
        bc = BoundaryData.from_coeffs(u1=(0.0, 1.0))
        s = RibbonSystem(mesh, mat_h1, bc)
        u = s.interpolate((0.0, 1.0), (0.0,), (0.0,), (0.0,))
        # 0.5 * C0 * |xi1'|^2 * l = 0.5 * 2 * 1
        assert s.energy(u) == pytest.approx(1.0, rel=1e-13)

    def test_pure_xi2_bending(self, mesh, mat_h1):
        bc = BoundaryData.from_coeffs(u2=(0.0, 0.0, 0.5))
        s = RibbonSystem(mesh, mat_h1, bc)
        u = s.interpolate((0.0,), (0.0, 0.0, 0.5), (0.0,), (0.0,))
        # (1/24) * C0 * |xi2''|^2 * l = 2/24
        assert s.energy(u) == pytest.approx(1.0 / 12.0, rel=1e-13)

    def test_force_linear_term(self, mesh, mat_h1):
        forces = RibbonForces.from_coeffs(f=(1.0,), g1=(0.5,))
        s = RibbonSystem(mesh, mat_h1, forces=forces)
        u = s.zero_state()
        u[s.slices["w"]] = s.h3.interpolate(BUMP, BUMP.deriv())
        u[s.bc_mask] = s.bc_values[s.bc_mask]
        # independent quadrature of f times the interpolated deflection
        from vkribbon.fem import GaussRule, Quadrature1D

        q9 = Quadrature1D(mesh, GaussRule(9))
        expect_force = float(
            np.dot(q9.weights, s.h3.evaluate(u[s.slices["w"]], q9.points, 0))
        )
        parts = s.energy_parts(u)
        assert parts["force"] == pytest.approx(expect_force, rel=1e-13)

    def test_extended_form_representation(self, mesh):
        # two independent code paths for the same integral
        rng = np.random.default_rng(7)
        mat = MaterialPair.isotropic(1.3, 0.8, 0.7, 0.4)
        s = RibbonSystem(mesh, mat)
        for _ in range(10):
            u = random_state(s, rng)
            v = random_state(s, rng)
            e1 = s.energy(u)
            e2 = s.energy_via_extended_form(u)
            assert e2 == pytest.approx(e1, rel=1e-12)
            d1 = s.sqdist(u, v)
            d2 = s.sqdist_via_extended_form(u, v)
            assert d2 == pytest.approx(d1, rel=1e-12)


class TestMetric:
    def test_diagonal_zero(self, system):
        rng = np.random.default_rng(8)
        u = random_state(system, rng)
        assert system.metric(u, u) == 0.0

    def test_xi2_difference(self, system):
        ua = system.zero_state()
        ub = ua.copy()
        p = Polynomial((0.0, 0.0, 0.5))
        ub[system.slices["xi2"]] += system.h3.interpolate(p, p.deriv())
        assert system.metric(ua, ub) ** 2 == pytest.approx(1.0 / 6.0, rel=1e-13)
        assert system.metric(ub, ua) == system.metric(ua, ub)

    def test_triangle_inequality(self, system):
        rng = np.random.default_rng(9)
        for _ in range(15):
            a, b, c = (random_state(system, rng) for _ in range(3))
            assert system.metric(a, c) <= system.metric(a, b) + system.metric(b, c) + 1e-12

    def test_definite_on_difference(self, system):
        rng = np.random.default_rng(10)
        u = random_state(system, rng)
        v = u.copy()
        v[system.slices["theta"]][3] += 1e-3
        assert system.metric(u, v) > 0.0


class TestChannelExpansion:
    def test_g_minus_g_equals_h_minus_quadratic(self, system):
        # G(u) - G(v) = H(u - v | w_u) - ((w_u' - w_v')^2, 0, 0) / 2 pointwise
        rng = np.random.default_rng(11)
        u = random_state(system, rng)
        v = random_state(system, rng)
        Gu = system.channels(u)
        Gv = system.channels(v)
        wprime_u = system.B_w_1 @ u[system.slices["w"]]
        dwprime = wprime_u - system.B_w_1 @ v[system.slices["w"]]
        H = system.h_channels(u - v, wprime_u)
        scale = 1.0 + max(np.abs(Gu.m).max(), np.abs(Gu.kappa).max())
        assert np.abs((Gu.a - Gv.a) - (H.a - 0.5 * dwprime**2)).max() < 1e-12 * scale
        assert np.abs((Gu.m - Gv.m) - H.m).max() < 1e-12 * scale
        assert np.abs((Gu.kappa - Gv.kappa) - H.kappa).max() < 1e-12 * scale
        assert np.abs((Gu.t - Gv.t) - H.t).max() < 1e-12 * scale


class TestGradients:
    def test_fd_energy(self):
        mesh = Mesh1D(l=1.0, n=10)
        mat = MaterialPair.isotropic(1.1, 0.6, 0.9, 0.2)
        forces = RibbonForces.from_coeffs(f=(0.4, 1.0), g1=(0.2,), g2=(0.1, -0.3))
        s = RibbonSystem(mesh, mat, forces=forces)
        rng = np.random.default_rng(12)
        h = 1e-5
        for _ in range(6):
            u = random_state(s, rng)
            g = s.grad_energy(u)
            d = np.zeros_like(u)
            d[s.free] = rng.standard_normal(int(s.free.sum()))
            d /= np.linalg.norm(d)
            fd = (s.energy(u + h * d) - s.energy(u - h * d)) / (2 * h)
            assert abs(fd - g @ d) <= 1e-6 * max(abs(fd), 1e-8)

    def test_fd_halfsqdist(self, system):
        rng = np.random.default_rng(13)
        h = 1e-5
        anchor = random_state(system, rng)
        for _ in range(6):
            u = random_state(system, rng)
            g = system.grad_halfsqdist(anchor, u)
            d = np.zeros_like(u)
            d[system.free] = rng.standard_normal(int(system.free.sum()))
            d /= np.linalg.norm(d)
            fd = (
                system.sqdist(anchor, u + h * d) - system.sqdist(anchor, u - h * d)
            ) / (4 * h)
            assert abs(fd - g @ d) <= 1e-6 * max(abs(fd), 1e-8)

    def test_gradient_zero_at_anchor(self, system):
        rng = np.random.default_rng(14)
        u = random_state(system, rng)
        assert np.abs(system.grad_halfsqdist(u, u)).max() == 0.0

    def test_decoupled_critical_point(self, system):
        # zero state with zero data is a critical point of the xi2 block
        g = system.grad_energy(system.zero_state())
        assert np.abs(g[system.slices["xi2"]]).max() == 0.0

    def test_hessians_match_fd(self, system):
        rng = np.random.default_rng(15)
        u = random_state(system, rng)
        anchor = random_state(system, rng)
        h = 1e-6
        d = np.zeros_like(u)
        d[system.free] = rng.standard_normal(int(system.free.sum()))
        for hess, grad in (
            (system.hess_energy(u), lambda v: system.grad_energy(v)),
            (
                system.hess_halfsqdist(anchor, u),
                lambda v: system.grad_halfsqdist(anchor, v),
            ),
        ):
            fd = (grad(u + h * d) - grad(u - h * d)) / (2 * h)
            hv = hess @ d
            assert (
                np.linalg.norm((hv - fd)[system.free])
                <= 1e-6 * np.linalg.norm(hv[system.free]) + 1e-10
            )


class TestSlope:
    def test_zero_state_zero_slope(self, system):
        assert system.local_slope(system.zero_state()) == 0.0

    def test_pure_xi2_dense_oracle(self, mesh):
        mat = MaterialPair.isotropic(1.0, 0.0, 2.0, 0.0)
        s = RibbonSystem(mesh, mat)
        u = s.zero_state()
        u[s.slices["xi2"]] = s.h3.interpolate(BUMP, BUMP.deriv())
        u[s.bc_mask] = s.bc_values[s.bc_mask]
        # dense oracle: slope^2 = g^T K^{-1} g on the assembled matrices
        g = s.grad_energy(u)[s.free]
        K = s.metric_tensor(u)[s.free][:, s.free].toarray()
        expect = float(g @ np.linalg.solve(K, g))
        assert s.local_slope(u) ** 2 == pytest.approx(expect, rel=1e-10)

    def test_representation_and_orthogonality(self, system):
        rng = np.random.default_rng(16)
        u = random_state(system, rng)
        sol = system.local_slope(u, detailed=True)
        assert sol.representation == pytest.approx(sol.value, rel=1e-10)
        assert sol.orthogonality <= 1e-8 * max(sol.L_norm, 1e-30)

    def test_sampling_lower_bound(self, system):
        # slope >= (phi(u) - phi(u + d))^+ / D(u, u + d) - o(1) on small d
        rng = np.random.default_rng(17)
        u = random_state(system, rng)
        slope = system.local_slope(u)
        phi_u = system.energy(u)
        worst = 0.0
        for _ in range(1000):
            d = np.zeros_like(u)
            d[system.free] = 1e-4 * rng.standard_normal(int(system.free.sum()))
            drop = phi_u - system.energy(u + d)
            if drop > 0:
                worst = max(worst, drop / system.metric(u, u + d))
        assert slope >= worst - 1e-4 * max(worst, 1.0)


class TestWeakResidual:
    def test_critical_point_zero(self, system):
        z = system.zero_state()
        assert system.weak_residual(z, z, 0.1) == 0.0

    def test_positive_after_perturbation(self, system):
        rng = np.random.default_rng(18)
        u = random_state(system, rng)
        v = u.copy()
        idx = np.flatnonzero(system.free)[7]
        v[idx] += 1e-3
        assert system.weak_residual(u, v, 0.1) > 0.0

    def test_accepted_step_residual(self, system):
        from vkribbon.flow import SolverOptions, incremental_step

        rng = np.random.default_rng(19)
        u = random_state(system, rng)
        opts = SolverOptions(tol=1e-10)
        tau = 0.05
        v, rep = incremental_step(system, tau, u, opts)
        scale = 1.0 + abs(system.energy(u))
        assert system.weak_residual(u, v, tau) <= 10.0 * opts.tol * scale

    def test_matches_incremental_gradient(self, system):
        rng = np.random.default_rng(20)
        u = random_state(system, rng)
        v = random_state(system, rng)
        tau = 0.03
        res = system.weak_residual_vector(u, v, tau)
        ref = system.grad_energy(v) + system.grad_halfsqdist(u, v) / tau
        assert np.array_equal(res, ref)

    def test_w_block_is_third_equation(self, mesh, mat_h1):
        # hand-check: the w-block pairs the third weak equation against the
        # deflection basis (difference quotients in the viscous channels)
        forces = RibbonForces.from_coeffs(f=(0.7,))
        s = RibbonSystem(mesh, mat_h1, forces=forces)
        rng = np.random.default_rng(21)
        prev = random_state(s, rng, amp=0.2)
        nxt = random_state(s, rng, amp=0.2)
        tau = 0.02
        res = s.weak_residual_vector(prev, nxt, tau)

        m = s.material
        a_n = s.channels(nxt)
        a_p = s.channels(prev)
        wprime = s.B_w_1 @ nxt[s.slices["w"]]
        # membrane stress with difference quotient + bending pair
        sigma = m.W0.C0 * a_n.a + m.R0.C0 * (a_n.a - a_p.a) / tau
        bend1 = (
            m.W1.C[0, 0] * a_n.kappa
            + m.W1.C[0, 1] * a_n.t
            + (m.R1.C[0, 0] * (a_n.kappa - a_p.kappa) + m.R1.C[0, 1] * (a_n.t - a_p.t)) / tau
        )
        wq = s.wq
        expect = (
            s.B_w_1.T @ (wq * sigma * wprime)
            + s.B_w_2.T @ (wq * bend1 / 12.0)
            - s.B_w_0.T @ (wq * s.f_q)
        )
        got = res[s.slices["w"]]
        free_w = s.free[s.slices["w"]]
        scale = 1.0 + np.abs(expect).max()
        assert np.abs((got - expect)[free_w]).max() < 1e-12 * scale


class TestMutualShift:
    def test_recovers_target_when_base_matches(self, system):
        rng = np.random.default_rng(22)
        z = system.state(random_state(system, rng))
        u = system.state(random_state(system, rng))
        u_k = mutual_shift(z, z, u)
        assert np.abs(u_k.vector - u.vector).max() < 1e-14

    def test_metric_preserved_for_equal_w(self, system):
        rng = np.random.default_rng(23)
        z = system.state(random_state(system, rng))
        zk_vec = random_state(system, rng)
        zk_vec[system.slices["w"]] = z.w  # same deflection
        z_k = system.state(zk_vec)
        u = system.state(random_state(system, rng))
        u_k = mutual_shift(z_k, z, u)
        d1 = system.metric(z_k.vector, u_k.vector)
        d2 = system.metric(z.vector, u.vector)
        assert d1 == pytest.approx(d2, rel=1e-12)

    def test_convergence_along_sequence(self, system):
        rng = np.random.default_rng(24)
        z = system.state(random_state(system, rng))
        u = system.state(random_state(system, rng))
        pert = np.zeros(system.n_dofs)
        pert[system.free] = rng.standard_normal(int(system.free.sum()))
        d_ref = system.metric(z.vector, u.vector)
        e_ref = system.energy(z.vector) - system.energy(u.vector)
        gaps_d, gaps_e = [], []
        for k in (1, 4, 16, 64):
            z_k = system.state(z.vector + pert / k)
            u_k = mutual_shift(z_k, z, u)
            gaps_d.append(abs(system.metric(z_k.vector, u_k.vector) - d_ref))
            gaps_e.append(
                abs(
                    (system.energy(z_k.vector) - system.energy(u_k.vector)) - e_ref
                )
            )
        assert all(a > b for a, b in zip(gaps_d, gaps_d[1:]))
        assert all(a > b for a, b in zip(gaps_e, gaps_e[1:]))
        assert gaps_d[-1] < 1e-2 * max(gaps_d[0], 1e-12)
        assert gaps_e[-1] < 1e-2 * max(gaps_e[0], 1e-12)


class TestSobolevBound:
    def test_metric_controls_bending_norms(self, system, capsys):
        # |w - w~|_{2,2} + |theta - theta~|_{1,2} <= C * D0; C calibrated, logged
        rng = np.random.default_rng(25)
        ratios = []
        for _ in range(30):
            u, v = random_state(system, rng), random_state(system, rng)
            d = system.metric(u, v)
            gap = system.sobolev_gap(u, v)
            if d > 1e-12:
                ratios.append(gap / d)
        C = max(ratios)
        assert np.isfinite(C)
        assert all(r <= C for r in ratios)
        print(f"calibrated Sobolev/metric constant C = {C:.4f}")


class TestAdmissibility:
    def test_check_admissible(self, mesh, mat_h1):
        bc = BoundaryData.from_coeffs(u1=(0.3,))
        s = RibbonSystem(mesh, mat_h1, bc)
        u = s.zero_state()
        s.check_admissible(u)
        u[0] += 1e-6
        with pytest.raises(ValueError):
            s.check_admissible(u)
