"""The effective 1D gradient system for a viscoelastic von Karman ribbon.

State fields on I = (-l/2, l/2): axial stretch xi1 (P1), orthogonal
in-plane displacement xi2 (Hermite3), deflection w (Hermite3), twist
theta (P1).  The in-plane displacement of the underlying strip is the
Bernoulli-Navier combination y1 = xi1 - x2 * xi2', y2 = xi2.

Energy and squared dissipation distance are integrals of the extended
quadratic forms of the strain triple

    G(u) = (xi1' + |w'|^2 / 2 - x2 * xi2'',  w'',  theta'),

where the transverse variable is integrated analytically through the
moments  int x2 = 0  and  int x2^2 = 1/12.  Every integral below is
therefore one-dimensional; the x2-moment of the first channel travels
as a separate sample array (the xi2'' channel).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.polynomial import Polynomial

from .fem import (
    BoundaryData,
    GaussRule,
    Hermite3Space,
    Mesh1D,
    P1Space,
    Quadrature1D,
    dirichlet_1d,
    poly_from_coeffs,
    triple_product,
)
from .forms import MaterialPair

BEND_FACTOR = 1.0 / 12.0  # transverse second moment of the unit-width strip


@dataclass(frozen=True)
class RibbonForces:
    """Time-independent load densities on I: vertical f, in-plane (g1, g2)."""

    f: Polynomial
    g1: Polynomial
    g2: Polynomial

    @classmethod
    def from_coeffs(cls, f=(0.0,), g1=(0.0,), g2=(0.0,)) -> "RibbonForces":
        return cls(poly_from_coeffs(f), poly_from_coeffs(g1), poly_from_coeffs(g2))

    @classmethod
    def zero(cls) -> "RibbonForces":
        return cls.from_coeffs()


@dataclass
class RibbonState:
    """Coefficient vectors of (xi1, xi2, w, theta); a point of the 1D metric space."""

    mesh: Mesh1D
    bc: BoundaryData
    xi1: np.ndarray
    xi2: np.ndarray
    w: np.ndarray
    theta: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.xi1, self.xi2, self.w, self.theta])


@dataclass
class ChannelSamples:
    """Strain channels at the quadrature points.

    ``a`` is the transverse average of the first channel; ``m`` its
    x2-moment channel (the xi2'' samples); ``kappa`` and ``t`` are the
    bending and twist channels w'' and theta'.
    """

    a: np.ndarray
    m: np.ndarray
    kappa: np.ndarray
    t: np.ndarray

    def minus(self, other: "ChannelSamples") -> "ChannelSamples":
        return ChannelSamples(
            self.a - other.a, self.m - other.m, self.kappa - other.kappa, self.t - other.t
        )


@dataclass
class SlopeSolution:
    """Local slope of the energy with the auxiliary-problem diagnostics.

    ``value`` is |dphi|(u); ``minimizer`` the solution of the quadratic
    auxiliary problem on the zero-trace test space; ``representation``
    the same number recomputed from the pointwise operator field
    L = Cbar_R H(u*) - Cbar_W G; ``orthogonality`` the largest pairing
    of L against the discrete test basis.
    """

    value: float
    minimizer: np.ndarray
    L: dict
    representation: float
    orthogonality: float
    L_norm: float


class RibbonSystem:
    """Discrete gradient system (energy, metric, derivatives) on a fixed mesh.

    Instances are read-only after construction and safe to share; all
    methods operate on packed DOF vectors (xi1 | xi2 | w | theta).
    """

    def __init__(
        self,
        mesh: Mesh1D,
        material: MaterialPair,
        bc: BoundaryData | None = None,
        forces: RibbonForces | None = None,
        quad_order: int = 5,
    ):
        self.mesh = mesh
        self.material = material
        self.bc = bc or BoundaryData.zero()
        self.forces = forces or RibbonForces.zero()
        self.quad = Quadrature1D(mesh, GaussRule(quad_order))

        self.p1 = P1Space(mesh)
        self.h3 = Hermite3Space(mesh)
        sizes = [self.p1.n_dofs, self.h3.n_dofs, self.h3.n_dofs, self.p1.n_dofs]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.n_dofs = int(self.offsets[-1])
        self.slices = {
            "xi1": slice(self.offsets[0], self.offsets[1]),
            "xi2": slice(self.offsets[1], self.offsets[2]),
            "w": slice(self.offsets[2], self.offsets[3]),
            "theta": slice(self.offsets[3], self.offsets[4]),
        }

        mask, values = dirichlet_1d(mesh, self.bc)
        self.bc_mask = mask
        self.bc_values = values
        self.free = ~mask

        q = self.quad
        self.B_xi1_0 = self.p1.sample_matrix(q, 0)
        self.B_xi1_1 = self.p1.sample_matrix(q, 1)
        self.B_xi2_0 = self.h3.sample_matrix(q, 0)
        self.B_xi2_2 = self.h3.sample_matrix(q, 2)
        self.B_w_0 = self.B_xi2_0
        self.B_w_1 = self.h3.sample_matrix(q, 1)
        self.B_w_2 = self.B_xi2_2
        self.B_th_1 = self.B_xi1_1

        self.wq = q.weights
        self.f_q = self.forces.f(q.points)
        self.g1_q = self.forces.g1(q.points)
        self.g2_q = self.forces.g2(q.points)
        self._has_forces = any(
            np.any(v != 0.0) for v in (self.f_q, self.g1_q, self.g2_q)
        )

    # -- state handling ----------------------------------------------------

    def split(self, u: np.ndarray):
        return (
            u[self.slices["xi1"]],
            u[self.slices["xi2"]],
            u[self.slices["w"]],
            u[self.slices["theta"]],
        )

    def state(self, u: np.ndarray) -> RibbonState:
        xi1, xi2, w, theta = self.split(u)
        return RibbonState(self.mesh, self.bc, xi1.copy(), xi2.copy(), w.copy(), theta.copy())

    def pack(self, xi1, xi2, w, theta) -> np.ndarray:
        return np.concatenate([xi1, xi2, w, theta])

    def interpolate(self, xi1_poly, xi2_poly, w_poly, theta_poly) -> np.ndarray:
        """Interpolate polynomial data into the FEM spaces and enforce the BCs."""
        xi1p = poly_from_coeffs(xi1_poly) if not isinstance(xi1_poly, Polynomial) else xi1_poly
        xi2p = poly_from_coeffs(xi2_poly) if not isinstance(xi2_poly, Polynomial) else xi2_poly
        wp = poly_from_coeffs(w_poly) if not isinstance(w_poly, Polynomial) else w_poly
        thp = poly_from_coeffs(theta_poly) if not isinstance(theta_poly, Polynomial) else theta_poly
        u = self.pack(
            self.p1.interpolate(xi1p),
            self.h3.interpolate(xi2p, xi2p.deriv()),
            self.h3.interpolate(wp, wp.deriv()),
            self.p1.interpolate(thp),
        )
        u[self.bc_mask] = self.bc_values[self.bc_mask]
        return u

    def zero_state(self) -> np.ndarray:
        u = np.zeros(self.n_dofs)
        u[self.bc_mask] = self.bc_values[self.bc_mask]
        return u

    def check_admissible(self, u: np.ndarray, tol: float = 1e-12) -> None:
        gap = np.abs(u[self.bc_mask] - self.bc_values[self.bc_mask])
        if gap.size and gap.max() > tol:
            raise ValueError(f"state violates boundary data by {gap.max():.3e}")

    # -- strain channels ----------------------------------------------------

    def channels(self, u: np.ndarray) -> ChannelSamples:
        xi1, xi2, w, theta = self.split(u)
        wprime = self.B_w_1 @ w
        return ChannelSamples(
            a=self.B_xi1_1 @ xi1 + 0.5 * wprime**2,
            m=self.B_xi2_2 @ xi2,
            kappa=self.B_w_2 @ w,
            t=self.B_th_1 @ theta,
        )

    def h_channels(self, du: np.ndarray, w_anchor_prime: np.ndarray) -> ChannelSamples:
        """Linearized channels H(du | w): membrane slot xi1' + w' * dw'."""
        xi1, xi2, w, theta = self.split(du)
        return ChannelSamples(
            a=self.B_xi1_1 @ xi1 + w_anchor_prime * (self.B_w_1 @ w),
            m=self.B_xi2_2 @ xi2,
            kappa=self.B_w_2 @ w,
            t=self.B_th_1 @ theta,
        )

    # -- energy / metric ----------------------------------------------------

    def _quad_value(self, C0: float, Q1: np.ndarray, ch: ChannelSamples) -> float:
        """0.5 * int Q0(a channel) + (1/24) * int [Q0(m) + Q1(kappa, t)]."""
        wq = self.wq
        mem = 0.5 * C0 * np.dot(wq, ch.a**2)
        bend = (
            C0 * np.dot(wq, ch.m**2)
            + Q1[0, 0] * np.dot(wq, ch.kappa**2)
            + 2.0 * Q1[0, 1] * np.dot(wq, ch.kappa * ch.t)
            + Q1[1, 1] * np.dot(wq, ch.t**2)
        )
        return float(mem + bend / 24.0)

    def _force_value(self, u: np.ndarray) -> float:
        if not self._has_forces:
            return 0.0
        xi1, xi2, w, _ = self.split(u)
        wq = self.wq
        return float(
            np.dot(wq * self.f_q, self.B_w_0 @ w)
            + np.dot(wq * self.g1_q, self.B_xi1_0 @ xi1)
            + np.dot(wq * self.g2_q, self.B_xi2_0 @ xi2)
        )

    def energy(self, u: np.ndarray) -> float:
        m = self.material
        return self._quad_value(m.W0.C0, m.W1.C, self.channels(u)) - self._force_value(u)

    def energy_parts(self, u: np.ndarray) -> dict:
        m = self.material
        ch = self.channels(u)
        wq = self.wq
        stretch = 0.5 * m.W0.C0 * np.dot(wq, ch.a**2)
        bend_xi2 = m.W0.C0 * np.dot(wq, ch.m**2) / 24.0
        Q1 = m.W1.C
        bend_tw = (
            Q1[0, 0] * np.dot(wq, ch.kappa**2)
            + 2.0 * Q1[0, 1] * np.dot(wq, ch.kappa * ch.t)
            + Q1[1, 1] * np.dot(wq, ch.t**2)
        ) / 24.0
        return {
            "stretching": float(stretch),
            "bending_xi2": float(bend_xi2),
            "bending_twist": float(bend_tw),
            "force": self._force_value(u),
        }

    def sqdist(self, ua: np.ndarray, ub: np.ndarray) -> float:
        m = self.material
        d = self.channels(ua).minus(self.channels(ub))
        return 2.0 * self._quad_value(m.R0.C0, m.R1.C, d)

    def metric(self, ua: np.ndarray, ub: np.ndarray) -> float:
        return float(np.sqrt(max(self.sqdist(ua, ub), 0.0)))

    # -- extended-form evaluation (independent code path for tests) --------

    def energy_via_extended_form(self, u: np.ndarray) -> float:
        """0.5 * int_S Qbar_W(G) using the assembled 3x3 matrix; no forces."""
        M = self.material.Wbar.M
        ch = self.channels(u)
        return 0.5 * self._extended_integral(M, ch)

    def sqdist_via_extended_form(self, ua: np.ndarray, ub: np.ndarray) -> float:
        M = self.material.Rbar.M
        d = self.channels(ua).minus(self.channels(ub))
        return self._extended_integral(M, d)

    def _extended_integral(self, M: np.ndarray, ch: ChannelSamples) -> float:
        v = np.stack([ch.a, ch.kappa, ch.t], axis=-1)
        dens = np.einsum("qi,ij,qj->q", v, M, v) + BEND_FACTOR * M[0, 0] * ch.m**2
        return float(np.dot(self.wq, dens))

    # -- gradients and Hessians ---------------------------------------------

    def _quad_grad(self, C0, Q1, ch: ChannelSamples, wprime) -> np.ndarray:
        wq = self.wq
        s_a = wq * (C0 * ch.a)
        s_m = wq * (C0 * ch.m) / 12.0
        s_k = wq * (Q1[0, 0] * ch.kappa + Q1[0, 1] * ch.t) / 12.0
        s_t = wq * (Q1[1, 0] * ch.kappa + Q1[1, 1] * ch.t) / 12.0
        g = np.empty(self.n_dofs)
        g[self.slices["xi1"]] = self.B_xi1_1.T @ s_a
        g[self.slices["xi2"]] = self.B_xi2_2.T @ s_m
        g[self.slices["w"]] = self.B_w_1.T @ (s_a * wprime) + self.B_w_2.T @ s_k
        g[self.slices["theta"]] = self.B_th_1.T @ s_t
        return g

    def _force_grad(self) -> np.ndarray:
        g = np.zeros(self.n_dofs)
        if self._has_forces:
            wq = self.wq
            g[self.slices["xi1"]] = self.B_xi1_0.T @ (wq * self.g1_q)
            g[self.slices["xi2"]] = self.B_xi2_0.T @ (wq * self.g2_q)
            g[self.slices["w"]] = self.B_w_0.T @ (wq * self.f_q)
        return g

    def grad_energy(self, u: np.ndarray) -> np.ndarray:
        m = self.material
        wprime = self.B_w_1 @ u[self.slices["w"]]
        g = self._quad_grad(m.W0.C0, m.W1.C, self.channels(u), wprime) - self._force_grad()
        g[self.bc_mask] = 0.0
        return g

    def grad_halfsqdist(self, anchor: np.ndarray, u: np.ndarray) -> np.ndarray:
        m = self.material
        wprime = self.B_w_1 @ u[self.slices["w"]]
        d = self.channels(u).minus(self.channels(anchor))
        g = self._quad_grad(m.R0.C0, m.R1.C, d, wprime)
        g[self.bc_mask] = 0.0
        return g

    def _quad_hess(self, C0, Q1, stress_a, wprime) -> sp.csr_matrix:
        """Hessian of the quadratic-form integral at given membrane stress.

        ``stress_a`` is the membrane stress C0 * (a or a-difference); it
        feeds the geometric term of the w-block.
        """
        wq = self.wq
        blocks = {}
        blocks[("xi1", "xi1")] = triple_product(self.B_xi1_1, wq * C0, self.B_xi1_1)
        blocks[("xi1", "w")] = triple_product(self.B_xi1_1, wq * C0 * wprime, self.B_w_1)
        blocks[("xi2", "xi2")] = triple_product(self.B_xi2_2, wq * C0 / 12.0, self.B_xi2_2)
        blocks[("w", "w")] = (
            triple_product(self.B_w_1, wq * (C0 * wprime**2 + stress_a), self.B_w_1)
            + triple_product(self.B_w_2, wq * Q1[0, 0] / 12.0, self.B_w_2)
        )
        blocks[("w", "theta")] = triple_product(self.B_w_2, wq * Q1[0, 1] / 12.0, self.B_th_1)
        blocks[("theta", "theta")] = triple_product(self.B_th_1, wq * Q1[1, 1] / 12.0, self.B_th_1)
        return self._assemble_blocks(blocks)

    def _assemble_blocks(self, blocks) -> sp.csr_matrix:
        names = ["xi1", "xi2", "w", "theta"]
        grid = [[None] * 4 for _ in range(4)]
        for (rn, cn), mat in blocks.items():
            i, j = names.index(rn), names.index(cn)
            grid[i][j] = mat if grid[i][j] is None else grid[i][j] + mat
            if i != j:
                grid[j][i] = mat.T if grid[j][i] is None else grid[j][i] + mat.T
        return sp.bmat(grid, format="csr")

    def hess_energy(self, u: np.ndarray) -> sp.csr_matrix:
        m = self.material
        ch = self.channels(u)
        wprime = self.B_w_1 @ u[self.slices["w"]]
        return self._quad_hess(m.W0.C0, m.W1.C, m.W0.C0 * ch.a, wprime)

    def hess_halfsqdist(self, anchor: np.ndarray, u: np.ndarray) -> sp.csr_matrix:
        m = self.material
        d = self.channels(u).minus(self.channels(anchor))
        wprime = self.B_w_1 @ u[self.slices["w"]]
        return self._quad_hess(m.R0.C0, m.R1.C, m.R0.C0 * d.a, wprime)

    # -- weak residual -------------------------------------------------------

    def weak_residual_vector(self, prev: np.ndarray, nxt: np.ndarray, tau: float) -> np.ndarray:
        """Pairings of the four weak equations against every interior basis
        function, with difference quotients in the viscous channels.

        The blocks (xi1 | xi2 | w | theta) are exactly the four equations;
        the assembled object coincides with the DOF gradient of the
        incremental functional v -> phi(v) + D^2(prev, v) / (2 tau).
        """
        if tau <= 0.0:
            raise ValueError("tau must be positive")
        return self.grad_energy(nxt) + self.grad_halfsqdist(prev, nxt) / tau

    def weak_residual(self, prev, nxt, tau: float) -> float:
        return float(np.linalg.norm(self.weak_residual_vector(prev, nxt, tau)))

    # -- local slope ----------------------------------------------------------

    def metric_tensor(self, u: np.ndarray) -> sp.csr_matrix:
        """Hessian of v -> D^2(u, v)/2 at v = u; SPD on the free DOFs."""
        return self.hess_halfsqdist(u, u)

    def local_slope(self, u: np.ndarray, detailed: bool = False):
        """Local slope |dphi|(u) via the auxiliary quadratic problem.

        Solves  K h* = g  with K the metric tensor at u and g the energy
        gradient, both restricted to the zero-trace test space; then
        |dphi|(u)^2 = g . h*.  With ``detailed`` the operator field L and
        its orthogonality/representation diagnostics are returned.
        """
        g = self.grad_energy(u)[self.free]
        K = self.metric_tensor(u)[self.free][:, self.free]
        hstar = spla.spsolve(K.tocsc(), g)
        slope_sq = float(np.dot(g, hstar))
        value = float(np.sqrt(max(slope_sq, 0.0)))
        if not detailed:
            return value

        full = np.zeros(self.n_dofs)
        full[self.free] = hstar
        m = self.material
        wprime = self.B_w_1 @ u[self.slices["w"]]
        H = self.h_channels(full, wprime)
        G = self.channels(u)
        # L = Cbar_R H(u*) - Cbar_W G, split into transverse-average and
        # moment parts of the first channel
        CR, CW = m.Rbar.M, m.Wbar.M
        vH = np.stack([H.a, H.kappa, H.t], axis=-1)
        vG = np.stack([G.a, G.kappa, G.t], axis=-1)
        L_avg = vH @ CR.T - vG @ CW.T
        L_m = CR[0, 0] * H.m - CW[0, 0] * G.m
        l_norm = float(
            np.sqrt(
                np.dot(self.wq, np.einsum("qi,qi->q", L_avg, L_avg))
                + BEND_FACTOR * np.dot(self.wq, L_m**2)
            )
        )
        # representation: | sqrt(CR)^{-1} (Cbar_W G + L) | = | sqrt(CR) H(u*) |
        z = vG @ CW.T + L_avg
        z_m = CW[0, 0] * G.m + L_m
        inv = m.Rbar.invsqrt
        r = z @ inv.T
        r_m = inv[:, 0] * z_m[:, None]
        rep_sq = np.dot(self.wq, np.einsum("qi,qi->q", r, r)) + BEND_FACTOR * np.dot(
            self.wq, np.einsum("qi,qi->q", r_m, r_m)
        )
        representation = float(np.sqrt(max(rep_sq, 0.0)))
        resid = K @ hstar - g
        orto = float(np.abs(resid).max()) if resid.size else 0.0
        if not (
            abs(representation - value) <= 1e-10 * max(value, 1.0)
        ):
            raise AssertionError(
                f"slope representation mismatch: {representation} vs {value}"
            )
        return SlopeSolution(
            value=value,
            minimizer=full,
            L={"avg": L_avg, "moment": L_m},
            representation=representation,
            orthogonality=orto,
            L_norm=l_norm,
        )

    # -- misc -----------------------------------------------------------------

    def sobolev_gap(self, ua: np.ndarray, ub: np.ndarray) -> float:
        """|w - w~|_{W^{2,2}} + |theta - theta~|_{W^{1,2}} via quadrature."""
        _, _, wa, tha = self.split(ua)
        _, _, wb, thb = self.split(ub)
        dw = wa - wb
        dth = tha - thb
        wq = self.wq
        w_sq = (
            np.dot(wq, (self.B_w_0 @ dw) ** 2)
            + np.dot(wq, (self.B_w_1 @ dw) ** 2)
            + np.dot(wq, (self.B_w_2 @ dw) ** 2)
        )
        th_sq = np.dot(wq, (self.B_xi1_0 @ dth) ** 2) + np.dot(wq, (self.B_th_1 @ dth) ** 2)
        return float(np.sqrt(w_sq) + np.sqrt(th_sq))


def mutual_shift(z_k: RibbonState, z: RibbonState, u: RibbonState) -> RibbonState:
    """1D mutual recovery: u_k = z_k + (u - z), componentwise in the DOFs.

    The (xi2, w, theta)-differences of (z_k, u_k) equal those of (z, u)
    exactly, which pins the bending/twist parts of energy and metric.
    """
    if z_k.mesh != z.mesh or z.mesh != u.mesh:
        raise ValueError("mutual shift requires a shared mesh")
    return RibbonState(
        mesh=z_k.mesh,
        bc=u.bc,
        xi1=z_k.xi1 + (u.xi1 - z.xi1),
        xi2=z_k.xi2 + (u.xi2 - z.xi2),
        w=z_k.w + (u.w - z.w),
        theta=z_k.theta + (u.theta - z.theta),
    )
