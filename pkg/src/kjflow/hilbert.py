"""Finite Hilbert transform on the interval (-1, 1).

Functions are represented by their smooth part sampled at Chebyshev-Gauss
nodes together with a symbolic endpoint-weight tag, so the singular factors
1/sqrt(1-x^2) and sqrt(1-x^2) are never evaluated at the endpoints.  The
forward transform and the Tricomi-type inversion are computed through exact
identities on the Chebyshev basis rather than quadrature across the
principal-value singularity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct
from scipy.optimize import minimize

WEIGHT_CLASSES = ("smooth", "inv_sqrt", "sqrt")

__all__ = [
    "ChebFunction",
    "FHTConvergenceError",
    "PseudoinverseResult",
    "cheb_nodes",
    "fht_forward",
    "fht_tricomi_inverse",
    "fht_pseudoinverse",
    "range_defect",
]


class FHTConvergenceError(RuntimeError):
    """Raised when a pseudoinverse residual stays above tolerance."""


def cheb_nodes(n: int) -> np.ndarray:
    """Chebyshev-Gauss nodes x_k = cos((2k+1) pi / (2n)), decreasing in x."""
    k = np.arange(n)
    return np.cos((2 * k + 1) * np.pi / (2 * n))


def _cheb_angles(n: int) -> np.ndarray:
    k = np.arange(n)
    return (2 * k + 1) * np.pi / (2 * n)


@dataclass(frozen=True)
class ChebFunction:
    """Smooth part sampled at N Chebyshev-Gauss nodes plus a weight tag.

    The represented function is values(x) * w(x) with w = 1,
    1/sqrt(1-x^2) or sqrt(1-x^2) according to ``weight_class``.
    """

    values: np.ndarray
    weight_class: str = "smooth"

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if v.shape[0] < 8:
            raise ValueError(f"need at least 8 nodes, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite samples")
        if self.weight_class not in WEIGHT_CLASSES:
            raise ValueError(f"unknown weight_class {self.weight_class!r}")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def nodes(self) -> np.ndarray:
        return cheb_nodes(self.n)

    @classmethod
    def from_callable(cls, f, n: int, weight_class: str = "smooth") -> "ChebFunction":
        """Sample the *smooth part* f at n Chebyshev-Gauss nodes."""
        x = cheb_nodes(n)
        return cls(np.asarray([f(xi) for xi in x], dtype=complex if np.iscomplexobj(f(x[0])) else float), weight_class)

    @classmethod
    def from_coeffs(cls, coeffs, n: int, weight_class: str = "smooth") -> "ChebFunction":
        vals = np.polynomial.chebyshev.chebval(cheb_nodes(n), coeffs)
        return cls(vals, weight_class)

    def coeffs(self) -> np.ndarray:
        """Chebyshev T-coefficients of the smooth part (interpolatory)."""
        v = self.values
        if np.iscomplexobj(v):
            a = dct(v.real, type=2) / self.n + 1j * dct(v.imag, type=2) / self.n
        else:
            a = dct(v, type=2) / self.n
        a[0] *= 0.5
        return a

    def weight_at(self, x: np.ndarray) -> np.ndarray:
        if self.weight_class == "smooth":
            return np.ones_like(np.asarray(x, dtype=float))
        w = np.sqrt(1.0 - np.asarray(x, dtype=float) ** 2)
        return 1.0 / w if self.weight_class == "inv_sqrt" else w

    def sample(self) -> np.ndarray:
        """Full function values at the nodes (weight included)."""
        return self.values * self.weight_at(self.nodes)

    def __call__(self, x) -> np.ndarray:
        """Evaluate at points strictly inside (-1, 1)."""
        x = np.asarray(x, dtype=float)
        smooth = np.polynomial.chebyshev.chebval(x, self.coeffs())
        return smooth * self.weight_at(x)

    def _check_comparable(self, other: "ChebFunction"):
        if self.n != other.n or self.weight_class != other.weight_class:
            raise ValueError("ChebFunctions comparable only on equal N and weight_class")

    def __add__(self, other: "ChebFunction") -> "ChebFunction":
        self._check_comparable(other)
        return ChebFunction(self.values + other.values, self.weight_class)

    def __sub__(self, other: "ChebFunction") -> "ChebFunction":
        self._check_comparable(other)
        return ChebFunction(self.values - other.values, self.weight_class)

    def __mul__(self, scalar) -> "ChebFunction":
        return ChebFunction(self.values * scalar, self.weight_class)

    __rmul__ = __mul__


def _t_to_u_coeffs(a: np.ndarray) -> np.ndarray:
    """Rewrite sum a_n T_n as sum c_n U_n via T_n = (U_n - U_{n-2})/2."""
    n = a.shape[0]
    c = np.zeros_like(a)
    ap = np.concatenate([a, np.zeros(2, dtype=a.dtype)])
    c[0] = ap[0] - 0.5 * ap[2]
    for m in range(1, n):
        c[m] = 0.5 * (ap[m] - ap[m + 2])
    return c


def _u_values_at_nodes(n: int) -> np.ndarray:
    """Matrix U[m, k] = U_m(x_k) at the n Chebyshev-Gauss nodes."""
    theta = _cheb_angles(n)
    m = np.arange(n)[:, None]
    return np.sin((m + 1) * theta[None, :]) / np.sin(theta)[None, :]


def _forward_smooth(values: np.ndarray) -> np.ndarray:
    """Transform of a polynomial interpolant via the T_n recurrence.

    g_0 = (1/pi) log((1+x)/(1-x)),
    g_{n+1} = 2 x g_n - g_{n-1} - (2/pi) int T_n,
    where int T_n over (-1,1) is 0 for odd n and 2/(1-n^2) for even n.
    """
    n = values.shape[0]
    f = ChebFunction(values, "smooth")
    a = f.coeffs()
    x = cheb_nodes(n)
    g_prev = np.log((1 + x) / (1 - x)) / np.pi
    out = a[0] * g_prev
    g_cur = x * g_prev - 2.0 / np.pi
    if n > 1:
        out = out + a[1] * g_cur
    for m in range(1, n - 1):
        int_tm = 0.0 if m % 2 == 1 else 2.0 / (1.0 - m**2)
        g_next = 2 * x * g_cur - g_prev - (2.0 / np.pi) * int_tm
        out = out + a[m + 1] * g_next
        g_prev, g_cur = g_cur, g_next
    return out


def fht_forward(f: ChebFunction) -> ChebFunction:
    """g(x) = (1/pi) PV int f(y)/(x-y) dy on (-1, 1).

    Exact on the Chebyshev basis:
      T_n/sqrt(1-x^2)    -> -U_{n-1}  (n >= 1; n = 0 is the null space),
      sqrt(1-x^2) U_{n-1} ->  T_n,
    and for plain polynomials via the moment recurrence.
    The result is a smooth-class function at the same nodes.
    """
    n = f.n
    if f.weight_class == "smooth":
        return ChebFunction(_forward_smooth(f.values), "smooth")

    a = f.coeffs()
    x = cheb_nodes(n)
    umat = _u_values_at_nodes(n)
    if f.weight_class == "inv_sqrt":
        # sum_{n>=1} a_n T_n / sqrt -> -sum a_n U_{n-1}
        g = -(a[1:, None] * umat[: n - 1]).sum(axis=0)
        return ChebFunction(g, "smooth")

    # sqrt class: rewrite the smooth part in the U basis, then U_m -> T_{m+1}
    c = _t_to_u_coeffs(a)
    tcoeffs = np.zeros(n + 1, dtype=c.dtype)
    tcoeffs[1:] = c
    g = np.polynomial.chebyshev.chebval(x, tcoeffs)
    return ChebFunction(g, "smooth")


def fht_tricomi_inverse(g: ChebFunction, c_null: complex = 0.0) -> ChebFunction:
    """Invert the finite Hilbert transform with explicit null coefficient.

    For g = sum b_n T_n the inverse is
        f(x) = [ (1 - x^2) sum_{n>=1} b_n U_{n-1}(x) - b_0 x + C ] / sqrt(1-x^2),
    returned as an inv_sqrt-class function; C parametrises the kernel
    C / sqrt(1-x^2).
    """
    if g.weight_class != "smooth":
        raise ValueError("Tricomi inverse expects a smooth-class right-hand side")
    n = g.n
    b = g.coeffs()
    x = cheb_nodes(n)
    umat = _u_values_at_nodes(n)
    s = (b[1:, None] * umat[: n - 1]).sum(axis=0)
    q = (1.0 - x**2) * s - b[0] * x + c_null
    return ChebFunction(q, "inv_sqrt")


def range_defect(g: ChebFunction) -> complex:
    """int g(x)/sqrt(1-x^2) dx by Gauss-Chebyshev quadrature.

    Vanishes exactly on the range of the forward transform over the
    sqrt-weighted class (Chebyshev orthogonality).
    """
    if g.weight_class == "inv_sqrt":
        raise ValueError("defect integral diverges for inv_sqrt-class input")
    w = np.ones(g.n) if g.weight_class == "smooth" else np.sqrt(1.0 - cheb_nodes(g.n) ** 2)
    val = (np.pi / g.n) * np.sum(g.values * w)
    return val


def weighted_lp_norm(f: ChebFunction, p: float) -> float:
    """Discrete L_p norm of the full function, Gauss-Chebyshev weights."""
    x = f.nodes
    full = np.abs(f.sample()) ** p
    return float(((np.pi / f.n) * np.sum(full * np.sqrt(1.0 - x**2))) ** (1.0 / p))


def _l2_norm(f: ChebFunction) -> float:
    return weighted_lp_norm(f, 2.0)


@dataclass
class PseudoinverseResult:
    solution: ChebFunction
    c_null: complex
    residual: float
    norm: float = field(default=np.nan)


def fht_pseudoinverse(
    g: ChebFunction,
    p: float = 1.5,
    tol: float | None = None,
    raise_on_failure: bool = True,
) -> PseudoinverseResult:
    """Minimum-weighted-norm solution of the forward transform equation.

    Selects the null coefficient C minimising the discrete L_p norm of the
    Tricomi inverse (p in (1, 2), where the transform is Fredholm of index 1
    and therefore onto).  Reports the residual of the forward map applied to
    the result.
    """
    if not (1.0 < p < 2.0):
        raise ValueError("p must lie in (1, 2)")
    if np.max(np.abs(g.values)) == 0.0:
        zero = fht_tricomi_inverse(g, 0.0)
        return PseudoinverseResult(zero, 0.0, 0.0, 0.0)

    base = fht_tricomi_inverse(g, 0.0)
    complex_input = np.iscomplexobj(g.values)

    def norm_of(cval):
        q = ChebFunction(base.values + cval, "inv_sqrt")
        return weighted_lp_norm(q, p)

    if complex_input:
        res = minimize(lambda z: norm_of(z[0] + 1j * z[1]), x0=[0.0, 0.0], method="Powell")
        c_opt = res.x[0] + 1j * res.x[1]
    else:
        res = minimize(lambda z: norm_of(z[0]), x0=[0.0], method="Powell")
        c_opt = float(res.x[0])

    f = ChebFunction(base.values + c_opt, "inv_sqrt")
    resid_fun = fht_forward(f) - g if g.weight_class == "smooth" else fht_forward(f)
    residual = _l2_norm(resid_fun)
    if tol is None:
        tol = 1e-8 * max(1.0, _l2_norm(g))
    if residual > tol and raise_on_failure:
        raise FHTConvergenceError(
            f"pseudoinverse residual {residual:.3e} exceeds tolerance {tol:.3e}; "
            "right-hand side outside the numerical range"
        )
    return PseudoinverseResult(f, c_opt, residual, norm_of(c_opt))
