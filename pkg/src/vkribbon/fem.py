"""Conforming finite element spaces on the interval I and the fixed strip S.

1D fields live on I = (-l/2, l/2):
    P1        linear hats for the W^{1,2}-fields (axial stretch, twist)
    Hermite3  cubic Hermite, C^1 conforming, for the W^{2,2}-fields

2D fields live on S = I x (-1/2, 1/2), tensor-product rectangles:
    Q1   bilinear for the in-plane displacements
    BFS  Bogner-Fox-Schmit bicubic, C^1 conforming, for the deflection;
         DOFs per node: value, d1, d2, d12

All meshes are uniform.  Evaluation at quadrature points is exposed as
sparse sampling matrices (rows = quadrature points, columns = DOFs) so
that energies, gradients, and Hessians reduce to vectorized array work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import Polynomial


class FemError(ValueError):
    pass


# ---------------------------------------------------------------------------
# meshes


@dataclass(frozen=True)
class Mesh1D:
    """Uniform mesh of the interval I = (-l/2, l/2) with n >= 2 elements."""

    l: float = 1.0
    n: int = 64

    def __post_init__(self):
        if self.l <= 0.0:
            raise FemError(f"mesh: length l must be positive, got {self.l}")
        if self.n < 2:
            raise FemError(f"mesh: need at least 2 elements, got {self.n}")

    @property
    def h(self) -> float:
        return self.l / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-0.5 * self.l, 0.5 * self.l, self.n + 1)

    def locate(self, x) -> np.ndarray:
        """Element index of each point (clamped to valid range)."""
        x = np.asarray(x, dtype=float)
        idx = np.floor((x + 0.5 * self.l) / self.h).astype(int)
        return np.clip(idx, 0, self.n - 1)


@dataclass(frozen=True)
class Mesh2D:
    """Tensor-product mesh of S = I x (-1/2, 1/2), nx x ny rectangles."""

    l: float = 1.0
    nx: int = 64
    ny: int = 8

    def __post_init__(self):
        if self.l <= 0.0:
            raise FemError(f"mesh: length l must be positive, got {self.l}")
        if self.nx < 2 or self.ny < 2:
            raise FemError(f"mesh: need nx, ny >= 2, got ({self.nx}, {self.ny})")

    @property
    def hx(self) -> float:
        return self.l / self.nx

    @property
    def hy(self) -> float:
        return 1.0 / self.ny

    @property
    def x_nodes(self) -> np.ndarray:
        return np.linspace(-0.5 * self.l, 0.5 * self.l, self.nx + 1)

    @property
    def y_nodes(self) -> np.ndarray:
        return np.linspace(-0.5, 0.5, self.ny + 1)

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    def node_index(self, i, j):
        """Global node number of grid node (i, j); x-major ordering."""
        return np.asarray(i) * (self.ny + 1) + np.asarray(j)

    def node_coords(self) -> tuple[np.ndarray, np.ndarray]:
        xi, yj = np.meshgrid(self.x_nodes, self.y_nodes, indexing="ij")
        return xi.ravel(), yj.ravel()


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class GaussRule:
    """Gauss-Legendre points/weights on the reference interval [0, 1].

    ``order`` points integrate polynomials up to degree 2*order - 1
    exactly.  The default order 5 makes the quartic membrane nonlinearity
    |w'|^4 of a cubic Hermite field (degree 8) exact.
    """

    order: int = 5

    def __post_init__(self):
        if self.order < 1:
            raise FemError("quadrature order must be >= 1")
        pts, wts = np.polynomial.legendre.leggauss(self.order)
        object.__setattr__(self, "_pts", 0.5 * (pts + 1.0))
        object.__setattr__(self, "_wts", 0.5 * wts)

    @property
    def points(self) -> np.ndarray:
        return self._pts

    @property
    def weights(self) -> np.ndarray:
        return self._wts


class Quadrature1D:
    """Gauss rule replicated over every element of a 1D mesh."""

    def __init__(self, mesh: Mesh1D, rule: GaussRule | None = None):
        self.mesh = mesh
        self.rule = rule or GaussRule()
        p = self.rule.order
        e = np.arange(mesh.n)
        self.ref = np.tile(self.rule.points, mesh.n)
        self.element = np.repeat(e, p)
        self.points = mesh.nodes[self.element] + self.ref * mesh.h
        self.weights = np.tile(self.rule.weights * mesh.h, mesh.n)
        self.n_points = self.points.size


class Quadrature2D:
    """Tensor Gauss rule on a 2D mesh.

    Point layout is (ex, kx, ey, ky)-major so each x1-station (ex, kx)
    owns a contiguous block of ny*order transverse points; x2-averages
    reduce to a reshape + weighted sum.
    """

    def __init__(self, mesh: Mesh2D, rule: GaussRule | None = None):
        self.mesh = mesh
        self.rule = rule or GaussRule()
        p = self.rule.order
        nx, ny = mesh.nx, mesh.ny
        sx = np.repeat(np.tile(self.rule.points, nx), ny * p)
        ex = np.repeat(np.arange(nx), p * ny * p)
        block = np.tile(np.repeat(np.arange(ny), p), nx * p)
        sy = np.tile(np.tile(self.rule.points, ny), nx * p)
        self.ref_x, self.ref_y = sx, sy
        self.element_x, self.element_y = ex, block
        self.x = mesh.x_nodes[ex] + sx * mesh.hx
        self.y = mesh.y_nodes[block] + sy * mesh.hy
        wx = np.repeat(np.tile(self.rule.weights * mesh.hx, nx), ny * p)
        wy = np.tile(np.tile(self.rule.weights * mesh.hy, ny), nx * p)
        self.weights = wx * wy
        self.wy_station = np.tile(self.rule.weights * mesh.hy, ny)
        self.n_stations = nx * p
        self.n_transverse = ny * p
        self.n_points = self.x.size

    def x_stations(self) -> np.ndarray:
        """The distinct x1 coordinates, one per station."""
        return self.x.reshape(self.n_stations, self.n_transverse)[:, 0]

    def x2_average(self, values: np.ndarray) -> np.ndarray:
        """Transverse average per x1-station (the strip has unit width)."""
        v = np.asarray(values).reshape(self.n_stations, self.n_transverse)
        return v @ self.wy_station

    def spread(self, station_values: np.ndarray) -> np.ndarray:
        """Broadcast per-station values back to the full point set."""
        return np.repeat(np.asarray(station_values), self.n_transverse)


# ---------------------------------------------------------------------------
# 1D reference bases


def _p1_ref(s: np.ndarray, deriv: int, h: float) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if deriv == 0:
        return np.stack([1.0 - s, s], axis=-1)
    if deriv == 1:
        one = np.ones_like(s)
        return np.stack([-one / h, one / h], axis=-1)
    raise FemError("P1 supports derivative orders 0 and 1")


def _hermite_ref(s: np.ndarray, deriv: int, h: float) -> np.ndarray:
    """Cubic Hermite shape functions with physical-slope DOFs (v0, v0', v1, v1')."""
    s = np.asarray(s, dtype=float)
    if deriv == 0:
        return np.stack(
            [
                1.0 - 3.0 * s**2 + 2.0 * s**3,
                h * (s - 2.0 * s**2 + s**3),
                3.0 * s**2 - 2.0 * s**3,
                h * (-(s**2) + s**3),
            ],
            axis=-1,
        )
    if deriv == 1:
        return np.stack(
            [
                (-6.0 * s + 6.0 * s**2) / h,
                1.0 - 4.0 * s + 3.0 * s**2,
                (6.0 * s - 6.0 * s**2) / h,
                -2.0 * s + 3.0 * s**2,
            ],
            axis=-1,
        )
    if deriv == 2:
        return np.stack(
            [
                (-6.0 + 12.0 * s) / h**2,
                (-4.0 + 6.0 * s) / h,
                (6.0 - 12.0 * s) / h**2,
                (-2.0 + 6.0 * s) / h,
            ],
            axis=-1,
        )
    if deriv == 3:
        one = np.ones_like(s)
        return np.stack(
            [12.0 * one / h**3, 6.0 * one / h**2, -12.0 * one / h**3, 6.0 * one / h**2],
            axis=-1,
        )
    raise FemError("Hermite3 supports derivative orders 0..3")


# ---------------------------------------------------------------------------
# 1D spaces


class P1Space:
    """W^{1,2}-conforming nodal space; one DOF per node."""

    kind = "P1"
    max_deriv = 1

    def __init__(self, mesh: Mesh1D):
        self.mesh = mesh
        self.n_dofs = mesh.n + 1

    def element_dofs(self, e: np.ndarray) -> np.ndarray:
        e = np.asarray(e)
        return np.stack([e, e + 1], axis=-1)

    def ref_basis(self, s, deriv):
        return _p1_ref(s, deriv, self.mesh.h)

    def boundary_dofs(self):
        return {"value": np.array([0, self.mesh.n])}

    def interpolate(self, f) -> np.ndarray:
        return np.asarray(f(self.mesh.nodes), dtype=float)

    def sample_matrix(self, quad: Quadrature1D, deriv: int) -> sp.csr_matrix:
        return _sample_matrix_1d(self, quad, deriv)

    def evaluate(self, coeffs, x, deriv: int = 0):
        return _evaluate_1d(self, coeffs, x, deriv)


class Hermite3Space:
    """C^1 / W^{2,2}-conforming cubic Hermite space; DOFs (value, slope) per node."""

    kind = "Hermite3"
    max_deriv = 3

    def __init__(self, mesh: Mesh1D):
        self.mesh = mesh
        self.n_dofs = 2 * (mesh.n + 1)

    def element_dofs(self, e: np.ndarray) -> np.ndarray:
        e = np.asarray(e)
        return np.stack([2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3], axis=-1)

    def ref_basis(self, s, deriv):
        return _hermite_ref(s, deriv, self.mesh.h)

    def boundary_dofs(self):
        n = self.mesh.n
        return {"value": np.array([0, 2 * n]), "slope": np.array([1, 2 * n + 1])}

    def interpolate(self, f, df) -> np.ndarray:
        coeffs = np.empty(self.n_dofs)
        coeffs[0::2] = f(self.mesh.nodes)
        coeffs[1::2] = df(self.mesh.nodes)
        return coeffs

    def sample_matrix(self, quad: Quadrature1D, deriv: int) -> sp.csr_matrix:
        return _sample_matrix_1d(self, quad, deriv)

    def evaluate(self, coeffs, x, deriv: int = 0):
        return _evaluate_1d(self, coeffs, x, deriv)


def _sample_matrix_1d(space, quad: Quadrature1D, deriv: int) -> sp.csr_matrix:
    vals = space.ref_basis(quad.ref, deriv)
    cols = space.element_dofs(quad.element)
    rows = np.repeat(np.arange(quad.n_points), cols.shape[1])
    mat = sp.coo_matrix(
        (vals.ravel(), (rows, cols.ravel())), shape=(quad.n_points, space.n_dofs)
    )
    return mat.tocsr()


def _evaluate_1d(space, coeffs, x, deriv):
    coeffs = np.asarray(coeffs, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    e = space.mesh.locate(x)
    s = (x - space.mesh.nodes[e]) / space.mesh.h
    vals = space.ref_basis(s, deriv)
    dofs = space.element_dofs(e)
    out = np.sum(vals * coeffs[dofs], axis=-1)
    return out


def eval_field_1d(mesh: Mesh1D, kind: str, coeffs, deriv: int, points):
    """Evaluate a 1D field (P1 or Hermite3) at arbitrary points."""
    if kind == "P1":
        space = P1Space(mesh)
    elif kind == "Hermite3":
        space = Hermite3Space(mesh)
    else:
        raise FemError(f"unknown 1D field kind {kind!r}")
    if deriv < 0 or deriv > (1 if kind == "P1" else 2):
        raise FemError(f"derivative order {deriv} out of range for {kind}")
    return space.evaluate(coeffs, points, deriv)


# ---------------------------------------------------------------------------
# 2D spaces


class Q1Space:
    """Bilinear W^{1,2}-conforming space; one DOF per node."""

    kind = "Bilinear"

    def __init__(self, mesh: Mesh2D):
        self.mesh = mesh
        self.n_dofs = mesh.n_nodes

    def element_dofs(self, ex, ey):
        m = self.mesh
        n00 = m.node_index(ex, ey)
        n10 = m.node_index(ex + 1, ey)
        n01 = m.node_index(ex, ey + 1)
        n11 = m.node_index(ex + 1, ey + 1)
        return np.stack([n00, n10, n01, n11], axis=-1)

    def ref_basis(self, sx, sy, dx, dy):
        bx = _p1_ref(sx, dx, self.mesh.hx)
        by = _p1_ref(sy, dy, self.mesh.hy)
        # tensor order must match element_dofs: (00, 10, 01, 11)
        return np.stack(
            [
                bx[..., 0] * by[..., 0],
                bx[..., 1] * by[..., 0],
                bx[..., 0] * by[..., 1],
                bx[..., 1] * by[..., 1],
            ],
            axis=-1,
        )

    def lateral_dofs(self):
        m = self.mesh
        j = np.arange(m.ny + 1)
        return np.concatenate([m.node_index(0, j), m.node_index(m.nx, j)])

    def interpolate(self, f) -> np.ndarray:
        x, y = self.mesh.node_coords()
        return np.asarray(f(x, y), dtype=float)

    def sample_matrix(self, quad: Quadrature2D, dx: int, dy: int) -> sp.csr_matrix:
        return _sample_matrix_2d(self, quad, dx, dy)

    def evaluate(self, coeffs, x, y, dx=0, dy=0):
        return _evaluate_2d(self, coeffs, x, y, dx, dy)


class BFSSpace:
    """Bogner-Fox-Schmit bicubic space, C^1 across edges.

    DOFs per node: (w, d1 w, d2 w, d12 w); element shape functions are
    tensor products of the 1D Hermite cubics.
    """

    kind = "BFS"

    def __init__(self, mesh: Mesh2D):
        self.mesh = mesh
        self.n_dofs = 4 * mesh.n_nodes

    def element_dofs(self, ex, ey):
        nodes = [
            self.mesh.node_index(ex, ey),
            self.mesh.node_index(ex + 1, ey),
            self.mesh.node_index(ex, ey + 1),
            self.mesh.node_index(ex + 1, ey + 1),
        ]
        cols = []
        for n in nodes:
            for k in range(4):
                cols.append(4 * n + k)
        return np.stack(cols, axis=-1)

    def ref_basis(self, sx, sy, dx, dy):
        bx = _hermite_ref(sx, dx, self.mesh.hx)
        by = _hermite_ref(sy, dy, self.mesh.hy)
        # per node (ix, iy): value/slope combinations map onto DOFs
        # (w, wx, wy, wxy) = (Hv*Hv, Hs*Hv, Hv*Hs, Hs*Hs)
        out = []
        for (ix, iy) in ((0, 0), (1, 0), (0, 1), (1, 1)):
            vx, sx_ = bx[..., 2 * ix], bx[..., 2 * ix + 1]
            vy, sy_ = by[..., 2 * iy], by[..., 2 * iy + 1]
            out.extend([vx * vy, sx_ * vy, vx * sy_, sx_ * sy_])
        return np.stack(out, axis=-1)

    def lateral_dofs(self):
        m = self.mesh
        j = np.arange(m.ny + 1)
        nodes = np.concatenate([m.node_index(0, j), m.node_index(m.nx, j)])
        return (4 * nodes[:, None] + np.arange(4)[None, :]).ravel()

    def interpolate(self, f, fx, fy, fxy) -> np.ndarray:
        x, y = self.mesh.node_coords()
        coeffs = np.empty(self.n_dofs)
        coeffs[0::4] = f(x, y)
        coeffs[1::4] = fx(x, y)
        coeffs[2::4] = fy(x, y)
        coeffs[3::4] = fxy(x, y)
        return coeffs

    def sample_matrix(self, quad: Quadrature2D, dx: int, dy: int) -> sp.csr_matrix:
        return _sample_matrix_2d(self, quad, dx, dy)

    def evaluate(self, coeffs, x, y, dx=0, dy=0):
        return _evaluate_2d(self, coeffs, x, y, dx, dy)


def _sample_matrix_2d(space, quad: Quadrature2D, dx: int, dy: int) -> sp.csr_matrix:
    vals = space.ref_basis(quad.ref_x, quad.ref_y, dx, dy)
    cols = space.element_dofs(quad.element_x, quad.element_y)
    rows = np.repeat(np.arange(quad.n_points), cols.shape[1])
    mat = sp.coo_matrix(
        (vals.ravel(), (rows, cols.ravel())), shape=(quad.n_points, space.n_dofs)
    )
    return mat.tocsr()


def _evaluate_2d(space, coeffs, x, y, dx, dy):
    coeffs = np.asarray(coeffs, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    m = space.mesh
    ex = np.clip(np.floor((x + 0.5 * m.l) / m.hx).astype(int), 0, m.nx - 1)
    ey = np.clip(np.floor((y + 0.5) / m.hy).astype(int), 0, m.ny - 1)
    sx = (x - m.x_nodes[ex]) / m.hx
    sy = (y - m.y_nodes[ey]) / m.hy
    vals = space.ref_basis(sx, sy, dx, dy)
    dofs = space.element_dofs(ex, ey)
    return np.sum(vals * coeffs[dofs], axis=-1)


# ---------------------------------------------------------------------------
# boundary data


def poly_from_coeffs(coeffs) -> Polynomial:
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if c.size == 0:
        c = np.array([0.0])
    return Polynomial(c)


@dataclass(frozen=True)
class BoundaryData:
    """Lateral boundary data (u1hat, u2hat, vhat) as polynomials on I.

    Traces and trace derivatives are evaluated exactly from the
    coefficients; the twist always carries zero traces.
    """

    u1hat: Polynomial
    u2hat: Polynomial
    vhat: Polynomial

    @classmethod
    def from_coeffs(cls, u1=(0.0,), u2=(0.0,), v=(0.0,)) -> "BoundaryData":
        return cls(poly_from_coeffs(u1), poly_from_coeffs(u2), poly_from_coeffs(v))

    @classmethod
    def zero(cls) -> "BoundaryData":
        return cls.from_coeffs()

    def is_zero(self) -> bool:
        return all(
            np.allclose(p.coef, 0.0) for p in (self.u1hat, self.u2hat, self.vhat)
        )


def dirichlet_1d(mesh: Mesh1D, bc: BoundaryData):
    """Constrained DOFs of the packed 1D state (xi1 | xi2 | w | theta).

    xi1 carries the values of u1hat; xi2 and w carry values and slopes of
    u2hat and vhat; theta has zero traces.  Only endpoint DOFs are
    constrained.  Returns (mask, values) over the packed vector.
    """
    p1 = P1Space(mesh)
    h3 = Hermite3Space(mesh)
    sizes = [p1.n_dofs, h3.n_dofs, h3.n_dofs, p1.n_dofs]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    mask = np.zeros(offsets[-1], dtype=bool)
    values = np.zeros(offsets[-1])
    ends = np.array([-0.5 * mesh.l, 0.5 * mesh.l])

    bd_p1 = p1.boundary_dofs()["value"]
    bd_val = h3.boundary_dofs()["value"]
    bd_slope = h3.boundary_dofs()["slope"]

    mask[offsets[0] + bd_p1] = True
    values[offsets[0] + bd_p1] = bc.u1hat(ends)
    for off, poly in ((offsets[1], bc.u2hat), (offsets[2], bc.vhat)):
        mask[off + bd_val] = True
        values[off + bd_val] = poly(ends)
        mask[off + bd_slope] = True
        values[off + bd_slope] = poly.deriv()(ends)
    mask[offsets[3] + bd_p1] = True
    return mask, values


def dirichlet_2d(mesh: Mesh2D, bc: BoundaryData):
    """Constrained DOFs of the packed 2D state (y1 | y2 | w).

    On the lateral boundary: y1 = u1hat - x2 * u2hat', y2 = u2hat,
    w = vhat, d1 w = vhat' (hence d2 w = d12 w = 0 there).  Top and
    bottom stay free; they carry the natural conditions.
    """
    q1 = Q1Space(mesh)
    bfs = BFSSpace(mesh)
    sizes = [q1.n_dofs, q1.n_dofs, bfs.n_dofs]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    mask = np.zeros(offsets[-1], dtype=bool)
    values = np.zeros(offsets[-1])

    j = np.arange(mesh.ny + 1)
    x2 = mesh.y_nodes[j]
    du2 = bc.u2hat.deriv()
    dv = bc.vhat.deriv()
    for side_i in (0, mesh.nx):
        x1 = mesh.x_nodes[side_i]
        nodes = mesh.node_index(side_i, j)
        # y1 trace is affine in x2; Q1 reproduces it exactly on the edge
        mask[offsets[0] + nodes] = True
        values[offsets[0] + nodes] = bc.u1hat(x1) - x2 * du2(x1)
        mask[offsets[1] + nodes] = True
        values[offsets[1] + nodes] = bc.u2hat(x1)
        wdofs = offsets[2] + 4 * nodes
        mask[wdofs] = True
        values[wdofs] = bc.vhat(x1)
        mask[wdofs + 1] = True
        values[wdofs + 1] = dv(x1)
        mask[wdofs + 2] = True
        mask[wdofs + 3] = True
    return mask, values


def apply_dirichlet(vector: np.ndarray, mask: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Overwrite constrained DOFs with their boundary values (idempotent)."""
    out = np.array(vector, dtype=float, copy=True)
    out[mask] = values[mask]
    return out


# ---------------------------------------------------------------------------
# scaled differential operators


def scaled_operators_2d(mesh: Mesh2D, eps: float, fields: dict, points) -> dict:
    """Sample the scaled operators E^eps y, grad_eps w, hess_eps w.

    ``fields`` holds coefficient vectors for "y1", "y2" (Q1) and "w" (BFS);
    ``points`` is an (npts, 2) array.  The 1/eps and 1/eps^2 factors sit on
    the transverse derivatives exactly as in the scaled formulation.
    Returns symmetric matrices in (11, 12, 22) component order.
    """
    if eps <= 0.0:
        raise FemError(f"scaled operators: eps must be positive, got {eps}")
    pts = np.asarray(points, dtype=float)
    x, y = pts[..., 0].ravel(), pts[..., 1].ravel()
    q1 = Q1Space(mesh)
    bfs = BFSSpace(mesh)
    d1y1 = q1.evaluate(fields["y1"], x, y, 1, 0)
    d2y1 = q1.evaluate(fields["y1"], x, y, 0, 1)
    d1y2 = q1.evaluate(fields["y2"], x, y, 1, 0)
    d2y2 = q1.evaluate(fields["y2"], x, y, 0, 1)
    E = np.stack(
        [d1y1, (d2y1 + d1y2) / (2.0 * eps), d2y2 / eps**2], axis=-1
    )
    w = fields["w"]
    grad = np.stack(
        [bfs.evaluate(w, x, y, 1, 0), bfs.evaluate(w, x, y, 0, 1) / eps], axis=-1
    )
    hess = np.stack(
        [
            bfs.evaluate(w, x, y, 2, 0),
            bfs.evaluate(w, x, y, 1, 1) / eps,
            bfs.evaluate(w, x, y, 0, 2) / eps**2,
        ],
        axis=-1,
    )
    return {"E": E, "grad_w": grad, "hess_w": hess}


# ---------------------------------------------------------------------------
# generic quadratic assembly


def assemble_quadratic(row, col, density, quad) -> sp.csr_matrix:
    """Assemble the matrix of (u, v) -> sum_q w_q c(x_q) (D_r u)(x_q) (D_c v)(x_q).

    ``row`` and ``col`` are (space, deriv) pairs sharing the quadrature;
    ``density`` is a scalar, an array over quadrature points, or a callable
    of the points.  The result is symmetric whenever row == col and the
    density is symmetric in its arguments.
    """
    space_r, deriv_r = row
    space_c, deriv_c = col
    if isinstance(quad, Quadrature1D):
        Br = space_r.sample_matrix(quad, deriv_r)
        Bc = space_c.sample_matrix(quad, deriv_c)
        pts = quad.points
    else:
        Br = space_r.sample_matrix(quad, *deriv_r)
        Bc = space_c.sample_matrix(quad, *deriv_c)
        pts = np.stack([quad.x, quad.y], axis=-1)
    if callable(density):
        c = np.asarray(density(pts), dtype=float)
    else:
        c = np.broadcast_to(np.asarray(density, dtype=float), (quad.n_points,))
    return triple_product(Br, quad.weights * c, Bc)


def triple_product(Ba: sp.csr_matrix, diag: np.ndarray, Bb: sp.csr_matrix) -> sp.csr_matrix:
    """Ba^T diag(d) Bb as CSR; the workhorse of every assembly."""
    return (Ba.T @ sp.diags(diag) @ Bb).tocsr()
