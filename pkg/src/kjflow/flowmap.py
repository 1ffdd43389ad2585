"""Truncated half-plane flow solvers: the flow operator, the mixed
(Neumann/Dirichlet) elliptic solver, the Neumann-flow map, its duality
identity with the boundary trace, and the coupled resolvent system.

Grid convention: arrays have shape (nx, nz) with x the first index,
z = 0 the physical boundary at j = 0, and homogeneous Neumann conditions
on the artificial boundaries x = +-Lx, z = Lz.  The structure interval
(-1, 1) is node-aligned on the z = 0 row; the outward normal there is -z,
so the normal derivative is -d/dz.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .plate import PlateGrid, biharmonic_matrix

__all__ = [
    "HalfPlaneGrid",
    "FlowField",
    "apply_A0",
    "yf_inner",
    "solve_zaremba",
    "neumann_flow_map",
    "check_duality_identity",
    "resolvent_solve",
    "ResolventResult",
]


@dataclass(frozen=True)
class HalfPlaneGrid:
    """Rectangle [-Lx, Lx] x [0, Lz] with (-1, 1) node-aligned at z = 0."""

    Lx: float = 4.0
    Lz: float = 2.0
    hx: float = 0.125
    hz: float = 0.125

    def __post_init__(self):
        if self.hx <= 0 or self.hz <= 0:
            raise ValueError("spacings must be positive")
        for val, name in ((1.0 / self.hx, "1/hx"), (self.Lx / self.hx, "Lx/hx"),
                          (self.Lz / self.hz, "Lz/hz")):
            if abs(val - round(val)) > 1e-12:
                raise ValueError(f"{name} must be an integer (node alignment)")
        if self.Lx <= 1.5:
            raise ValueError("Lx must exceed the structure with a margin")

    @property
    def nx(self) -> int:
        return int(round(2 * self.Lx / self.hx)) + 1

    @property
    def nz(self) -> int:
        return int(round(self.Lz / self.hz)) + 1

    @property
    def x(self) -> np.ndarray:
        return -self.Lx + self.hx * np.arange(self.nx)

    @property
    def z(self) -> np.ndarray:
        return self.hz * np.arange(self.nz)

    @property
    def shape(self):
        return (self.nx, self.nz)

    @property
    def omega_mask(self) -> np.ndarray:
        """z = 0 nodes strictly inside (-1, 1)."""
        return np.abs(self.x) < 1.0 - 1e-12

    def refine(self) -> "HalfPlaneGrid":
        return HalfPlaneGrid(self.Lx, self.Lz, self.hx / 2, self.hz / 2)

    def plate_grid(self) -> PlateGrid:
        return PlateGrid(int(np.count_nonzero(self.omega_mask)), dim=1)

    def node_weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights (times hx*hz)."""
        wx = np.ones(self.nx)
        wx[[0, -1]] = 0.5
        wz = np.ones(self.nz)
        wz[[0, -1]] = 0.5
        return self.hx * self.hz * np.outer(wx, wz)


@dataclass
class FlowField:
    grid: HalfPlaneGrid
    phi: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.psi = np.asarray(self.psi, dtype=float)
        for f in (self.phi, self.psi):
            if f.shape != self.grid.shape:
                raise ValueError("field shape does not match grid")
            if not np.all(np.isfinite(f)):
                raise ValueError("non-finite field samples")

    def kj_defect(self) -> float:
        """Largest |psi| on the z = 0 boundary outside the structure."""
        off = ~self.grid.omega_mask
        return float(np.max(np.abs(self.psi[off, 0]))) if np.any(off) else 0.0

    @classmethod
    def zero(cls, grid: HalfPlaneGrid) -> "FlowField":
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape))


def _dx(a, grid):
    return np.gradient(a, grid.hx, axis=0, edge_order=2)


def _dz(a, grid):
    return np.gradient(a, grid.hz, axis=1, edge_order=2)


def _d2(a, h, axis):
    """Second difference: centered inside, shifted (still consistent) rows
    at the two boundary slices."""
    out = np.empty_like(a)
    s = [slice(None)] * a.ndim

    def sl(idx):
        s2 = list(s)
        s2[axis] = idx
        return tuple(s2)

    out[sl(slice(1, -1))] = (a[sl(slice(2, None))] - 2 * a[sl(slice(1, -1))]
                             + a[sl(slice(0, -2))]) / h**2
    out[sl(0)] = (a[sl(0)] - 2 * a[sl(1)] + a[sl(2)]) / h**2
    out[sl(-1)] = (a[sl(-1)] - 2 * a[sl(-2)] + a[sl(-3)]) / h**2
    return out


def _laplacian(a, grid):
    return _d2(a, grid.hx, 0) + _d2(a, grid.hz, 1)


def apply_A0(field: FlowField, U: float) -> FlowField:
    """(phi, psi) -> (-U phi_x + psi, -U psi_x + Lap phi)."""
    phi_out = -U * _dx(field.phi, field.grid) + field.psi
    psi_out = -U * _dx(field.psi, field.grid) + _laplacian(field.phi, field.grid)
    return FlowField(field.grid, phi_out, psi_out)


def yf_inner(a: FlowField, b: FlowField) -> float:
    """Flow energy inner product: (grad phi, grad phi') + (psi, psi')."""
    g = a.grid
    w = g.node_weights()
    val = np.sum(w * (_dx(a.phi, g) * _dx(b.phi, g) + _dz(a.phi, g) * _dz(b.phi, g)))
    val += np.sum(w * a.psi * b.psi)
    return float(val)


def _idx(grid):
    nx, nz = grid.shape
    return np.arange(nx * nz).reshape(nx, nz)


class _RowBuilder:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []
        self.rhs = []

    def add(self, entries, rhs_val):
        r = len(self.rhs)
        for c, v in entries:
            self.rows.append(r)
            self.cols.append(c)
            self.vals.append(v)
        self.rhs.append(rhs_val)

    def build(self, ncols):
        A = sp.csr_matrix(
            (self.vals, (self.rows, self.cols)), shape=(len(self.rhs), ncols)
        )
        return A, np.asarray(self.rhs)


def _one_sided(idx_line, h, sign=1.0):
    """Second-order one-sided first derivative at idx_line[0]."""
    i0, i1, i2 = idx_line
    c = sign / (2 * h)
    return [(i0, -3 * c), (i1, 4 * c), (i2, -c)]


def _scalar_elliptic_rows(grid, cxx, czz, cx, c0, f, neumann_rhs, robin_U, dirichlet_rhs):
    """Assemble the mixed problem
        cxx w_xx + czz w_zz + cx w_x + c0 w = f           (interior)
        dw/dz = neumann_rhs                                (z=0 on the structure)
        robin:  U w_x - w = 0 (if robin_U is not None)     (z=0 off-structure)
        w = dirichlet_rhs (if robin_U is None)             (z=0 off-structure)
        homogeneous Neumann on artificial boundaries.

    Artificial-boundary Neumann conditions are imposed through ghost-node
    reflection: the interior stencil is written at the boundary node with the
    out-of-range neighbor mirrored, which keeps the row second order.
    """
    nx, nz = grid.shape
    hx, hz = grid.hx, grid.hz
    K = _idx(grid)
    omega = grid.omega_mask
    b = _RowBuilder()
    for i in range(nx):
        for j in range(nz):
            k = K[i, j]
            if j == 0:
                if omega[i]:
                    b.add(_one_sided((K[i, 0], K[i, 1], K[i, 2]), hz, -1.0),
                          -neumann_rhs[i])
                elif robin_U is not None:
                    if 0 < i < nx - 1:
                        ent = [(K[i - 1, 0], -robin_U / (2 * hx)),
                               (K[i + 1, 0], robin_U / (2 * hx))]
                    elif i == 0:
                        ent = _one_sided((K[0, 0], K[1, 0], K[2, 0]), hx, robin_U)
                    else:
                        ent = _one_sided((K[nx - 1, 0], K[nx - 2, 0], K[nx - 3, 0]),
                                         hx, -robin_U)
                    b.add(ent + [(k, -1.0)], 0.0)
                else:
                    b.add([(k, 1.0)], dirichlet_rhs[i])
            else:
                reflected_x = i in (0, nx - 1)
                im = i + 1 if i == 0 else i - 1
                ip = i - 1 if i == nx - 1 else i + 1
                jp = j - 1 if j == nz - 1 else j + 1
                acc = {}

                def put(col, val):
                    acc[col] = acc.get(col, 0.0) + val

                put(K[im, j], cxx / hx**2)
                put(K[ip, j], cxx / hx**2)
                if not reflected_x:
                    put(K[im, j], -cx / (2 * hx))
                    put(K[ip, j], cx / (2 * hx))
                put(K[i, j - 1], czz / hz**2)
                put(K[i, jp], czz / hz**2)
                put(k, -2 * cxx / hx**2 - 2 * czz / hz**2 + c0)
                b.add(list(acc.items()), f[i, j])
    return b.build(nx * nz)


def solve_zaremba(grid: HalfPlaneGrid, f, g_N, g_D, U: float):
    """Solve (1 - U^2) w_xx + w_zz = f with normal-derivative data g_N on
    the structure, Dirichlet data g_D on the rest of z = 0, homogeneous
    Neumann on the artificial boundaries.  Returns (w, interior residual).
    """
    if not (0 <= U < 1):
        raise ValueError("U must lie in [0, 1)")
    f = np.asarray(f, dtype=float)
    # dw/dnu = -dw/dz = g_N  =>  dw/dz = -g_N
    gn_full = np.zeros(grid.nx)
    gn_full[grid.omega_mask] = -np.asarray(g_N, dtype=float)
    A, rhs = _scalar_elliptic_rows(grid, 1 - U**2, 1.0, 0.0, 0.0, f,
                                   gn_full, None,
                                   np.asarray(g_D, dtype=float))
    w = spsolve(A.tocsc(), rhs).reshape(grid.shape)
    resid = (1 - U**2) * _d2(w, grid.hx, 0) + _d2(w, grid.hz, 1) - f
    interior = np.max(np.abs(resid[1:-1, 1:-1]))
    return w, float(interior)


def neumann_flow_map(g, U: float, grid: HalfPlaneGrid) -> FlowField:
    """Static flow pair (phi, psi) driven by normal data g on the structure.

    phi solves (1 - U^2) phi_xx + phi_zz + 2 U phi_x - phi = 0 with
    dphi/dz = g on the structure (normal is -z), the oblique condition
    U phi_x - phi = 0 on the rest of z = 0, and homogeneous Neumann on the
    artificial boundaries; then psi = U phi_x - phi, set to zero exactly on
    z = 0 off the structure.
    """
    if not (0 <= U < 1):
        raise ValueError("U must lie in [0, 1)")
    g = np.asarray(g, dtype=float)
    omega = grid.omega_mask
    g_full = np.zeros(grid.nx)
    g_full[omega] = g
    zeros = np.zeros(grid.shape)
    A, rhs = _scalar_elliptic_rows(grid, 1 - U**2, 1.0, 2 * U, -1.0, zeros,
                                   g_full, U, None)
    phi = spsolve(A.tocsc(), rhs).reshape(grid.shape)
    psi = U * _dx(phi, grid) - phi
    psi[~omega, 0] = 0.0
    return FlowField(grid, phi, psi)


def gamma_trace(field: FlowField) -> np.ndarray:
    """psi restricted to the structure nodes at z = 0."""
    return field.psi[field.grid.omega_mask, 0]


def omega_inner(grid: HalfPlaneGrid, a, b) -> float:
    return float(grid.hx * np.sum(np.asarray(a) * np.asarray(b)))


def check_duality_identity(field: FlowField, g, U: float) -> float:
    """Mismatch of the adjoint identity pairing the static flow map with the
    boundary trace: (([A0* + I] y, Ng))_{Yf} = <gamma[psi], g> on the
    structure, for y = (phi, psi) satisfying the flow-domain boundary
    conditions (normal derivative of phi zero on the structure, psi zero
    off it)."""
    grid = field.grid
    ng = neumann_flow_map(g, U, grid)
    a0y = apply_A0(field, U)
    adj_plus = FlowField(grid, -a0y.phi + field.phi, -a0y.psi + field.psi)
    lhs = yf_inner(adj_plus, ng)
    rhs = omega_inner(grid, gamma_trace(field), g)
    return abs(lhs - rhs)


@dataclass
class ResolventResult:
    field: FlowField
    u: np.ndarray
    v: np.ndarray
    estimate_constant: float
    residual: float


def _y_norm_sq(grid, field, u, v, plate_A):
    m = grid.hx
    flow = yf_inner(field, field)
    plate = m * float(np.dot(plate_A @ u, u)) + m * float(np.dot(v, v))
    return flow + plate


def resolvent_solve(lam: float, f1, f2, g1, g2, U: float,
                    grid: HalfPlaneGrid) -> ResolventResult:
    """Solve the static coupled system (A + lam) y = (f1, f2; g1, g2).

    Unknowns are phi and psi on the grid plus the plate displacement u on
    the structure nodes; the velocity is eliminated via v = g1 - lam u.
    Verifies the a-priori bound lam ||y||_Y^2 <= C ||rhs||_Y^2 and reports C.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    nx, nz = grid.shape
    hx, hz = grid.hx, grid.hz
    n = nx * nz
    K = _idx(grid)
    omega = grid.omega_mask
    om_idx = np.nonzero(omega)[0]
    m = len(om_idx)
    pgrid = grid.plate_grid()
    plate_A = biharmonic_matrix(pgrid)
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    g1 = np.asarray(g1, dtype=float)
    g2 = np.asarray(g2, dtype=float)

    PHI, PSI, UOF = 0, n, 2 * n
    u_of = {i: UOF + a for a, i in enumerate(om_idx)}
    b = _RowBuilder()

    def dx_entries(base, i, j, coef):
        if 0 < i < nx - 1:
            return [(base + K[i - 1, j], -coef / (2 * hx)),
                    (base + K[i + 1, j], coef / (2 * hx))]
        if i == 0:
            return [(base + K[0, j], -3 * coef / (2 * hx)),
                    (base + K[1, j], 4 * coef / (2 * hx)),
                    (base + K[2, j], -coef / (2 * hx))]
        return [(base + K[nx - 1, j], 3 * coef / (2 * hx)),
                (base + K[nx - 2, j], -4 * coef / (2 * hx)),
                (base + K[nx - 3, j], coef / (2 * hx))]

    # first flow equation at every node: -U phi_x + psi + lam phi = f1
    for i in range(nx):
        for j in range(nz):
            ent = dx_entries(PHI, i, j, -U) + [(PSI + K[i, j], 1.0),
                                               (PHI + K[i, j], lam)]
            b.add(ent, f1[i, j])

    # second slot: interior flow equation / boundary rows
    for i in range(nx):
        for j in range(nz):
            if j == 0:
                if omega[i]:
                    # coupling: dphi/dz = v = g1 - lam u
                    ent = [(PHI + K[i, 0], -3 / (2 * hz)),
                           (PHI + K[i, 1], 4 / (2 * hz)),
                           (PHI + K[i, 2], -1 / (2 * hz)),
                           (u_of[i], lam)]
                    b.add(ent, g1[np.searchsorted(om_idx, i)])
                else:
                    b.add([(PSI + K[i, 0], 1.0)], 0.0)
            elif j == nz - 1:
                b.add([(PHI + K[i, nz - 1], 3 / (2 * hz)),
                       (PHI + K[i, nz - 2], -4 / (2 * hz)),
                       (PHI + K[i, nz - 3], 1 / (2 * hz))], 0.0)
            elif i in (0, nx - 1):
                ii = (0, 1, 2) if i == 0 else (nx - 1, nx - 2, nx - 3)
                sgn = 1.0 if i == 0 else -1.0
                b.add([(PHI + K[ii[0], j], -3 * sgn / (2 * hx)),
                       (PHI + K[ii[1], j], 4 * sgn / (2 * hx)),
                       (PHI + K[ii[2], j], -sgn / (2 * hx))], 0.0)
            else:
                ent = dx_entries(PSI, i, j, -U)
                ent += [(PHI + K[i - 1, j], 1 / hx**2),
                        (PHI + K[i + 1, j], 1 / hx**2),
                        (PHI + K[i, j - 1], 1 / hz**2),
                        (PHI + K[i, j + 1], 1 / hz**2),
                        (PHI + K[i, j], -2 / hx**2 - 2 / hz**2),
                        (PSI + K[i, j], lam)]
                b.add(ent, f2[i, j])

    # plate rows: (biharmonic + lam^2) u - gamma[psi] = lam g1 - g2
    for a, i in enumerate(om_idx):
        ent = [(UOF + c, plate_A[a, c]) for c in plate_A[a].indices]
        ent.append((UOF + a, lam**2))
        ent.append((PSI + K[i, 0], -1.0))
        b.add(ent, lam * g1[a] - g2[a])

    A, rhs = b.build(2 * n + m)
    sol = spsolve(A.tocsc(), rhs)
    phi = sol[:n].reshape(grid.shape)
    psi = sol[n:2 * n].reshape(grid.shape)
    u = sol[2 * n:]
    v = g1 - lam * u
    field = FlowField(grid, phi, psi)

    rhs_field = FlowField(grid, f1, f2)
    y_sq = _y_norm_sq(grid, field, u, v, plate_A)
    rhs_sq = _y_norm_sq(grid, rhs_field, g1, g2, plate_A)
    const = lam * y_sq / rhs_sq if rhs_sq > 0 else 0.0

    # residual of the first equation through the shared difference stencils
    res1 = -U * _dx(phi, grid) + psi + lam * phi - f1
    a0 = apply_A0(field, U)
    res2 = a0.psi[1:-1, 1:-1] + lam * psi[1:-1, 1:-1] - f2[1:-1, 1:-1]
    residual = max(float(np.max(np.abs(res1))), float(np.max(np.abs(res2))))
    return ResolventResult(field, u, v, const, residual)
