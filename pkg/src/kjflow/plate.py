"""Clamped plate operator and structural nonlinearities with potentials.

The displacement lives on interior nodes of a 1D interval or a 2D rectangle;
the clamped condition u = du/dn = 0 is built into the difference operators
(zero Dirichlet values plus a reflected ghost layer for the biharmonic).
Forces are assembled in conservative (transpose) form so that each force is
the exact discrete gradient of its potential.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh, splu

__all__ = [
    "PlateGrid",
    "PlateState",
    "biharmonic_matrix",
    "biharmonic_apply",
    "biharmonic_lambda1",
    "vk_bracket",
    "airy_solve",
    "plate_force",
    "plate_potential",
    "potential_gradient_check",
    "potential_lower_bound",
]


@dataclass(frozen=True)
class PlateGrid:
    """Interior nodes of (-1,1) (1D) or (0,1)x(0,1) (2D), clamped boundary."""

    n: int                    # interior nodes per direction
    dim: int = 1

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("need at least 4 interior nodes")
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")

    @property
    def h(self) -> float:
        length = 2.0 if self.dim == 1 else 1.0
        return length / (self.n + 1)

    @property
    def x(self) -> np.ndarray:
        start = -1.0 if self.dim == 1 else 0.0
        return start + self.h * (1 + np.arange(self.n))

    @property
    def shape(self):
        return (self.n,) if self.dim == 1 else (self.n, self.n)

    @property
    def size(self) -> int:
        return self.n if self.dim == 1 else self.n * self.n

    @property
    def mass(self) -> float:
        """Quadrature weight per interior node."""
        return self.h**self.dim

    def refine(self) -> "PlateGrid":
        return PlateGrid(2 * self.n + 1, self.dim)

    def inner(self, u, w) -> float:
        return float(self.mass * np.sum(np.asarray(u) * np.asarray(w)))


@dataclass
class PlateState:
    u: np.ndarray
    v: np.ndarray
    grid: PlateGrid

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.u.shape != self.grid.shape or self.v.shape != self.grid.shape:
            raise ValueError("field shape does not match grid")


def _d2_dirichlet(n, h):
    """Second difference with zero boundary values."""
    return sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n), format="csr") / h**2


def _d1_dirichlet(n, h):
    """Centered first difference with zero boundary values (antisymmetric)."""
    return sp.diags([-1.0, 1.0], [-1, 1], shape=(n, n), format="csr") / (2 * h)


def biharmonic_matrix(grid: PlateGrid) -> sp.csr_matrix:
    """Clamped discrete biharmonic.

    1D: squared Dirichlet second difference plus the 2/h^4 end corrections
    from the reflected ghost value (clamped du/dx = 0), giving the first row
    [7, -4, 1]/h^4.  2D: D4 x I + I x D4 + 2 D2 x D2 on the square.
    """
    n, h = grid.n, grid.h
    d2 = _d2_dirichlet(n, h)
    d4 = (d2 @ d2).tolil()
    d4[0, 0] += 2.0 / h**4
    d4[-1, -1] += 2.0 / h**4
    d4 = d4.tocsr()
    if grid.dim == 1:
        return d4
    eye = sp.identity(n, format="csr")
    return sp.kron(d4, eye) + sp.kron(eye, d4) + 2 * sp.kron(d2, d2)


def biharmonic_apply(u: np.ndarray, grid: PlateGrid) -> np.ndarray:
    A = _op_cache(grid)["A"]
    return (A @ np.asarray(u).ravel()).reshape(grid.shape)


_cache: dict = {}


def _op_cache(grid: PlateGrid):
    key = (grid.n, grid.dim)
    if key not in _cache:
        entry = {"A": biharmonic_matrix(grid)}
        entry["d2"] = _d2_dirichlet(grid.n, grid.h)
        entry["d1"] = _d1_dirichlet(grid.n, grid.h)
        _cache[key] = entry
    return _cache[key]


def _airy_factor(grid: PlateGrid):
    entry = _op_cache(grid)
    if "airy" not in entry:
        entry["airy"] = splu(_op_cache(grid)["A"].tocsc())
    return entry["airy"]


def biharmonic_lambda1(grid: PlateGrid) -> float:
    """Smallest clamped-biharmonic eigenvalue, Richardson-extrapolated
    over the grid and its refinement (the stencil is second order)."""
    vals = []
    for g in (grid, grid.refine()):
        A = biharmonic_matrix(g)
        lam = eigsh(A.tocsc(), k=1, sigma=0.0, which="LM", return_eigenvectors=False)
        vals.append(float(lam[0]))
    lam_h, lam_h2 = vals
    return (4 * lam_h2 - lam_h) / 3


def _second_derivs(u: np.ndarray, h: float):
    ux = np.gradient(u, h, axis=0, edge_order=2)
    uy = np.gradient(u, h, axis=1, edge_order=2)
    uxx = np.gradient(ux, h, axis=0, edge_order=2)
    uyy = np.gradient(uy, h, axis=1, edge_order=2)
    uxy = np.gradient(ux, h, axis=1, edge_order=2)
    return uxx, uyy, uxy


def vk_bracket(u: np.ndarray, w: np.ndarray, grid: PlateGrid) -> np.ndarray:
    """[u, w] = u_xx w_yy + u_yy w_xx - 2 u_xy w_xy, centered differences.

    Derivatives are taken from the supplied samples themselves (no boundary
    extension), so polynomial examples are exact in the interior.
    """
    if grid.dim != 2:
        raise ValueError("the bracket is defined in 2D mode only")
    uxx, uyy, uxy = _second_derivs(np.asarray(u, dtype=float), grid.h)
    wxx, wyy, wxy = _second_derivs(np.asarray(w, dtype=float), grid.h)
    return uxx * wyy + uyy * wxx - 2 * uxy * wxy


def _bracket_clamped(u_flat, w_flat, grid: PlateGrid):
    """Bracket with clamped (zero-extended) difference operators; this is
    the bilinear form whose transpose yields the exact potential gradient."""
    ops = _op_cache(grid)
    d2, d1 = ops["d2"], ops["d1"]
    n = grid.n
    U = u_flat.reshape(n, n)
    W = w_flat.reshape(n, n)
    uxx, wxx = d2 @ U, d2 @ W
    uyy, wyy = U @ d2.T, W @ d2.T
    uxy, wxy = d1 @ U @ d1.T, d1 @ W @ d1.T
    return (uxx * wyy + uyy * wxx - 2 * uxy * wxy).ravel()


def _bracket_transpose(u_flat, w_flat, grid: PlateGrid):
    """h such that <[u, z], w> = <z, B_u^T w> for all z (exact adjoint)."""
    ops = _op_cache(grid)
    d2, d1 = ops["d2"], ops["d1"]
    n = grid.n
    U = u_flat.reshape(n, n)
    W = w_flat.reshape(n, n)
    uxx = d2 @ U
    uyy = U @ d2.T
    uxy = d1 @ U @ d1.T
    out = (uxx * W) @ d2 + d2 @ (uyy * W) - 2 * (d1.T @ (uxy * W) @ d1)
    return out.ravel()


def airy_solve(u: np.ndarray, grid: PlateGrid) -> np.ndarray:
    """Clamped solve of (biharmonic) v = -[u, u] with the zero-extension
    bracket (consistent with the potential assembly)."""
    if grid.dim != 2:
        raise ValueError("Airy problem is 2D only")
    rhs = -_bracket_clamped(np.asarray(u).ravel(), np.asarray(u).ravel(), grid)
    return _airy_factor(grid).solve(rhs).reshape(grid.shape)


def airy_solve_source(source: np.ndarray, grid: PlateGrid) -> np.ndarray:
    """Clamped biharmonic solve with an explicit right-hand side."""
    return _airy_factor(grid).solve(np.asarray(source, dtype=float).ravel()).reshape(grid.shape)


@dataclass
class Kirchhoff:
    """Pointwise force f(s) with antiderivative F (F' = f)."""
    f: callable
    F: callable


@dataclass
class VonKarman:
    F0: np.ndarray | float = 0.0


@dataclass
class Berger:
    kappa: float = 1.0
    gamma: float = 0.0


def _laplacian(grid: PlateGrid):
    d2 = _op_cache(grid)["d2"]
    if grid.dim == 1:
        return d2
    eye = sp.identity(grid.n, format="csr")
    return sp.kron(d2, eye) + sp.kron(eye, d2)


def _dirichlet_energy(u_flat, grid: PlateGrid) -> float:
    """Discrete integral of |grad u|^2 via -<Lap u, u> (exact by parts)."""
    L = _laplacian(grid)
    return float(-grid.mass * np.dot(L @ u_flat, u_flat))


def plate_force(u: np.ndarray, kind, grid: PlateGrid) -> np.ndarray:
    """Nonlinear force f(u); the exact discrete gradient of plate_potential."""
    uf = np.asarray(u, dtype=float).ravel()
    if isinstance(kind, Kirchhoff):
        out = kind.f(uf)
        s = np.max(np.abs(uf))
        if s > 0:
            entry = _op_cache(grid)
            if "lambda1" not in entry:
                entry["lambda1"] = biharmonic_lambda1(grid)
            lam1 = entry["lambda1"]
            probe = np.linspace(-2 * s - 1, 2 * s + 1, 41)
            probe = probe[np.abs(probe) > 1e-9]
            if np.min(kind.f(probe) / probe) <= -lam1:
                warnings.warn(
                    "pointwise force dips below the first biharmonic "
                    "eigenvalue on the sampled range; global bounds may fail",
                    RuntimeWarning,
                )
        return out.reshape(grid.shape)
    if isinstance(kind, VonKarman):
        if grid.dim != 2:
            raise ValueError("von Karman force requires 2D mode")
        v = airy_solve(u, grid).ravel()
        f0 = np.broadcast_to(np.asarray(kind.F0, dtype=float), grid.shape).ravel()
        return -_bracket_transpose(uf, v + f0, grid).reshape(grid.shape)
    if isinstance(kind, Berger):
        E = _dirichlet_energy(uf, grid)
        L = _laplacian(grid)
        return (-(kind.kappa * E - kind.gamma) * (L @ uf)).reshape(grid.shape)
    raise ValueError(f"unknown nonlinearity kind {kind!r}")


def plate_potential(u: np.ndarray, kind, grid: PlateGrid) -> float:
    uf = np.asarray(u, dtype=float).ravel()
    if isinstance(kind, Kirchhoff):
        return float(grid.mass * np.sum(kind.F(uf)))
    if isinstance(kind, VonKarman):
        if grid.dim != 2:
            raise ValueError("von Karman potential requires 2D mode")
        b = _bracket_clamped(uf, uf, grid)
        v = airy_solve(u, grid).ravel()
        A = _op_cache(grid)["A"]
        quad = 0.25 * grid.mass * float(np.dot(A @ v, v))
        if np.ndim(kind.F0) == 0:
            lift = 0.5 * grid.mass * float(kind.F0) * float(np.sum(b))
        else:
            lift = 0.5 * grid.mass * float(np.dot(b, np.asarray(kind.F0).ravel()))
        return quad - lift
    if isinstance(kind, Berger):
        E = _dirichlet_energy(uf, grid)
        return 0.25 * kind.kappa * E**2 - 0.5 * kind.gamma * E
    raise ValueError(f"unknown nonlinearity kind {kind!r}")


def potential_gradient_check(u, h_dir, kind, grid: PlateGrid, eps=1e-5) -> float:
    """Relative mismatch between <f(u), h> and the central difference of
    the potential along h."""
    u = np.asarray(u, dtype=float)
    h_dir = np.asarray(h_dir, dtype=float)
    pairing = grid.inner(plate_force(u, kind, grid), h_dir)
    fd = (plate_potential(u + eps * h_dir, kind, grid)
          - plate_potential(u - eps * h_dir, kind, grid)) / (2 * eps)
    return abs(pairing - fd) / (abs(pairing) + 1.0)


def potential_lower_bound(u, kind, grid: PlateGrid, delta=0.1,
                          c_range=(-10.0, 10.0), dc=0.1):
    """Scan scaling rays c -> c*u: report C_delta with
    delta ||Lap(c u)||^2 + Pi(c u) + C_delta >= 0 on the scan, and the
    scan values for external assertion."""
    L = _laplacian(grid)
    uf = np.asarray(u, dtype=float).ravel()
    lap_sq = grid.mass * float(np.dot(L @ uf, L @ uf))
    cs = np.arange(c_range[0], c_range[1] + dc / 2, dc)
    vals = np.array([delta * c**2 * lap_sq + plate_potential(c * uf.reshape(grid.shape), kind, grid)
                     for c in cs])
    c_delta = max(0.0, -float(np.min(vals)))
    return c_delta, cs, vals
