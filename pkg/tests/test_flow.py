"""Minimizing movements: closed-form steps, decay oracles, De Giorgi ledger."""

import numpy as np
import pytest
import scipy.sparse as sp
from numpy.polynomial import Polynomial

from vkribbon.fem import Mesh1D
from vkribbon.flow import (
    SolverOptions,
    StepFailure,
    dissipation_ledger,
    incremental_step,
    run_trajectory,
)
from vkribbon.forms import MaterialPair
from vkribbon.ribbon import RibbonForces, RibbonSystem

BUMP = Polynomial.fromroots([-0.5, -0.5, 0.5, 0.5])


class OneDof:
    """phi = u^2/2 with the flat metric; the step halves the state at tau = 1."""

    n_dofs = 1
    free = np.array([True])

    def energy(self, u):
        return 0.5 * float(u[0]) ** 2

    def sqdist(self, a, b):
        return float((a[0] - b[0]) ** 2)

    def grad_energy(self, u):
        return np.array([u[0]])

    def grad_halfsqdist(self, a, u):
        return np.array([u[0] - a[0]])

    def hess_energy(self, u):
        return sp.eye(1)

    def hess_halfsqdist(self, a, u):
        return sp.eye(1)


def hermite_beam_stiffness(n, l):
    """Textbook 4x4 Euler-Bernoulli element stiffness, assembled densely."""
    h = l / n
    ke = (
        np.array(
            [
                [12, 6 * h, -12, 6 * h],
                [6 * h, 4 * h**2, -6 * h, 2 * h**2],
                [-12, -6 * h, 12, -6 * h],
                [6 * h, 2 * h**2, -6 * h, 4 * h**2],
            ]
        )
        / h**3
    )
    K = np.zeros((2 * (n + 1), 2 * (n + 1)))
    for e in range(n):
        idx = slice(2 * e, 2 * e + 4)
        K[idx, idx] += ke
    return K


def xi2_system(n=16, mu_w=1.0, mu_r=1.0):
    mesh = Mesh1D(l=1.0, n=n)
    mat = MaterialPair.isotropic(mu_w, 0.0, mu_r, 0.0)
    s = RibbonSystem(mesh, mat)
    u0 = s.zero_state()
    u0[s.slices["xi2"]] = s.h3.interpolate(BUMP, BUMP.deriv())
    u0[s.bc_mask] = s.bc_values[s.bc_mask]
    return s, u0


class TestIncrementalStep:
    def test_one_dof_closed_form(self):
        u, rep = incremental_step(OneDof(), 1.0, np.array([1.0]))
        assert u[0] == pytest.approx(0.5, abs=1e-12)
        assert rep.converged

    def test_xi2_dense_oracle(self):
        # the step's optimality system is K (C_W xi + (C_R / tau)(xi - xi_prev)) = 0
        s, u0 = xi2_system(n=8, mu_w=1.0, mu_r=2.0)
        tau = 0.05
        u1, _ = incremental_step(s, tau, u0)
        K = hermite_beam_stiffness(8, 1.0)
        free = s.free[s.slices["xi2"]]
        Kff = K[np.ix_(free, free)]
        C_W, C_R = s.material.W0.C0, s.material.R0.C0
        prev = u0[s.slices["xi2"]][free]
        rhs = (C_R / tau) * (Kff @ prev)
        sol = np.linalg.solve((C_W + C_R / tau) * Kff, rhs)
        assert np.abs(u1[s.slices["xi2"]][free] - sol).max() < 1e-9

    def test_critical_point_fixed(self):
        s, _ = xi2_system()
        z = s.zero_state()
        u, rep = incremental_step(s, 0.1, z)
        assert np.array_equal(u, z)
        assert rep.newton_iters == 0

    def test_one_step_energy_inequality(self):
        s, u0 = xi2_system()
        tau = 0.02
        u1, rep = incremental_step(s, tau, u0)
        assert s.energy(u1) + s.sqdist(u0, u1) / (2 * tau) <= s.energy(u0) + 1e-9

    def test_invalid_tau(self):
        with pytest.raises(ValueError):
            incremental_step(OneDof(), -1.0, np.array([1.0]))


class TestTrajectory:
    def test_short_horizon_single_step(self):
        traj = run_trajectory(OneDof(), np.array([1.0]), 1.0, 0.5)
        assert traj.n_steps == 1

    def test_geometric_decay(self):
        s, u0 = xi2_system(n=12)
        tau = 0.01
        traj = run_trajectory(s, u0, tau, 0.2)
        rho = 1.0 / (1.0 + tau)
        for n in range(1, traj.n_steps + 1):
            gap = np.linalg.norm(traj.states[n] - rho * traj.states[n - 1])
            assert gap <= 1e-9 * np.linalg.norm(traj.states[n - 1])

    def test_energy_monotone_nonlinear(self):
        mesh = Mesh1D(l=1.0, n=12)
        mat = MaterialPair.isotropic(1.0, 0.4, 0.8, 0.2)
        forces = RibbonForces.from_coeffs(f=(0.5,))
        s = RibbonSystem(mesh, mat, forces=forces)
        u0 = s.interpolate((0.0,), (0.0,), 1.5 * BUMP, (0.0,))
        traj = run_trajectory(s, u0, 0.05, 0.5)
        e = traj.energies()
        assert np.all(np.diff(e) <= 1e-9)

    def test_interpolant_indexing(self):
        traj = run_trajectory(OneDof(), np.array([1.0]), 0.25, 1.0)
        assert traj.index_at(0.0) == 0
        assert traj.index_at(0.25) == 1
        assert traj.index_at(0.2500001) == 2  # right-continuous at grid points only
        assert traj.index_at(0.26) == 2
        assert traj.index_at(1.0) == 4

    def test_kkt_residual_checked(self):
        s, u0 = xi2_system(n=8)
        traj = run_trajectory(s, u0, 0.05, 0.2, check_residual=True)
        assert all(np.isfinite(r.grad_norm) for r in traj.reports[1:])


class TestDissipationLedger:
    def test_equilibrium_all_zero(self):
        s, _ = xi2_system()
        z = s.zero_state()
        traj = run_trajectory(s, z, 0.1, 0.3)
        led = dissipation_ledger(s, traj, s.local_slope)
        assert led.velocity_term == 0.0
        assert led.slope_term == 0.0
        assert led.residual == 0.0

    def test_xi2_closed_form_geometric_sums(self):
        # all interior DOFs scale by rho per step, so every ledger term is a
        # geometric sum in rho^2 driven by the initial bending energy
        n, tau, T = 12, 0.02, 0.4
        s, u0 = xi2_system(n=n)
        traj = run_trajectory(s, u0, tau, T)
        led = dissipation_ledger(s, traj, s.local_slope)

        K = hermite_beam_stiffness(n, 1.0)
        xi0 = u0[s.slices["xi2"]]
        E0 = float(xi0 @ (K @ xi0))  # int |xi2''|^2
        C = s.material.W0.C0  # = C0_R here
        rho = 1.0 / (1.0 + tau)
        N = traj.n_steps
        # D_n^2 = (C/12) (1-rho)^2 rho^{2(n-1)} E0; slope(U_n)^2 = (C/12) rho^{2n} E0
        geo = sum(rho ** (2 * (k - 1)) for k in range(1, N + 1))
        vel = 0.5 * tau * (C / 12.0) * E0 * ((1 - rho) / tau) ** 2 * geo
        slo = 0.5 * tau * (C / 12.0) * E0 * rho**2 * geo
        drop = (C / 24.0) * E0 * (rho ** (2 * N) - 1.0)
        expect = vel + slo + drop
        assert led.residual == pytest.approx(expect, abs=1e-10 * max(1.0, abs(expect)))
        assert led.residual < 0.0

    def test_refinement_shrinks_residual(self):
        mesh = Mesh1D(l=1.0, n=16)
        mat = MaterialPair.isotropic(1.0, 0.0, 1.0, 0.0)
        forces = RibbonForces.from_coeffs(f=(1.0,))
        s = RibbonSystem(mesh, mat, forces=forces)
        u0 = s.interpolate((0.0,), (0.0,), BUMP, (0.0,))
        residuals = []
        for tau in (0.08, 0.04):
            traj = run_trajectory(s, u0, tau, 0.8)
            residuals.append(abs(dissipation_ledger(s, traj, s.local_slope).residual))
        assert residuals[1] <= 0.7 * residuals[0]


class TestFailureModes:
    def test_nonconvergence_reported_with_step_index(self):
        s, u0 = xi2_system(n=8)
        opts = SolverOptions(tol=1e-10, max_newton=0)
        with pytest.raises(StepFailure) as err:
            run_trajectory(s, u0, 0.05, 0.2, opts)
        assert err.value.step_index == 1
