"""Fourier-Laplace symbol algebra for the linearized flow trace problem.

Evaluates the dispersion quantity D, the normal-derivative multiplier
m = -sqrt(D)/(tau + i U eta_x), its factorization m = j * S into the Hilbert
symbol j and the auxiliary elliptic factor S, and the normalized reciprocal
M = 1/(S (1+eta^2)^{1/4}) whose boundedness carries the trace estimate.
Case-by-case bounds on |M| are certified on grids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SymbolPoint",
    "MFactored",
    "MRecord",
    "BoundReport",
    "eval_D",
    "eval_m_factored",
    "eval_M",
    "case_bound",
    "corrected_case_b_bound",
    "verify_multiplier_bounds",
    "apply_S_multiplier",
]


@dataclass(frozen=True)
class SymbolPoint:
    """One Fourier-Laplace evaluation point.

    tau = alpha + i*beta with alpha > 0; U in [0, 1) subsonic.
    z_U = beta + U*eta_x is always derived, never stored.
    """

    alpha: float
    beta: float
    eta_x: float
    eta_y: float = 0.0
    U: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be strictly positive")
        if not (0 <= self.U < 1):
            raise ValueError("U must lie in [0, 1)")

    @property
    def tau(self) -> complex:
        return self.alpha + 1j * self.beta

    @property
    def z_U(self) -> float:
        return self.beta + self.U * self.eta_x


def eval_D(p: SymbolPoint) -> complex:
    """D = (tau + i U eta_x)^2 + |eta|^2.

    Also evaluated through the expanded real/imaginary split and the two
    forms are asserted to agree to 1e-14 relative.
    """
    tau = p.tau
    direct = tau**2 + 2 * p.U * 1j * p.eta_x * tau + (1 - p.U**2) * p.eta_x**2 + p.eta_y**2
    split = (
        p.alpha**2
        - p.beta**2
        + (1 - p.U**2) * p.eta_x**2
        + p.eta_y**2
        - 2 * p.U * p.beta * p.eta_x
        + 2j * p.alpha * (p.U * p.eta_x + p.beta)
    )
    scale = max(1.0, abs(direct))
    assert abs(direct - split) < 1e-14 * scale, "split form of D disagrees"
    return direct


@dataclass
class MFactored:
    m: complex
    j: complex | None
    S: complex | None
    degenerate: bool = False      # eta_x = 0: j has no sign, only m returned
    branch_ambiguous: bool = False  # sqrt(D) evaluated on its branch cut


def eval_m_factored(p: SymbolPoint) -> MFactored:
    """m = -sqrt(D)/(tau + i U eta_x) with principal square root, and the
    factorization m = j(eta_x) * S(tau, eta) when eta_x != 0."""
    D = eval_D(p)
    denom = p.tau + 1j * p.U * p.eta_x
    branch = D.real < 0 and abs(D.imag) < 1e-14 * max(1.0, abs(D))
    m = -np.sqrt(complex(D)) / denom
    if p.eta_x == 0:
        return MFactored(m, None, None, degenerate=True, branch_ambiguous=branch)
    j = -1j * abs(p.eta_x) / p.eta_x
    ratio = p.tau / p.eta_x + 1j * p.U
    S = -1j * np.sqrt(ratio**2 + 1 + (p.eta_y / p.eta_x) ** 2) / ratio
    if not branch:
        assert abs(j * S - m) < 1e-12 * max(1.0, abs(m)), "factorization identity failed"
    return MFactored(m, j, S, branch_ambiguous=branch)


def _abs_M(alpha, z_u, eta):
    """|M| = sqrt(a^2+z^2) / [(1+eta^2)^{1/4} ((a^2-z^2+eta^2)^2+4a^2 z^2)^{1/4}]."""
    num = np.sqrt(alpha**2 + z_u**2)
    den = (1 + eta**2) ** 0.25 * ((alpha**2 - z_u**2 + eta**2) ** 2 + 4 * alpha**2 * z_u**2) ** 0.25
    return num / den


def _case_labels(z_u, eta):
    """A: |z_U| < |eta|/2; C: |z_U| > 2|eta|; B otherwise (ties closed)."""
    az, ae = np.abs(z_u), np.abs(eta)
    lab = np.full(np.broadcast(az, ae).shape, "B", dtype="U1")
    lab[az < 0.5 * ae] = "A"
    lab[az > 2.0 * ae] = "C"
    return lab


@dataclass
class MRecord:
    M: complex
    case: str


def eval_M(p: SymbolPoint) -> MRecord:
    """M = [S(z_U, eta) (1+eta^2)^{1/4}]^{-1} in the 1D reduction, with the
    case label of the |z_U|-vs-|eta| region split."""
    if p.eta_y != 0:
        raise ValueError("M is defined in the 1D reduction (eta_y = 0)")
    eta = p.eta_x
    w = p.alpha + 1j * p.z_U
    M = w / (np.sqrt(w**2 + eta**2) * (1 + eta**2) ** 0.25)
    case = str(_case_labels(np.asarray(p.z_U), np.asarray(eta)))
    return MRecord(complex(M), case)


def case_bound(case, alpha, eta):
    """Printed per-case upper bounds for |M|."""
    b = np.where(
        case == "A",
        (2.0 / (1 + eta**2)) ** 0.25,
        np.where(case == "C", (81.0 / (1 + eta**2)) ** 0.25, (5.0 + 8.0 * alpha**2) ** 0.25),
    )
    return b


def corrected_case_b_bound(alpha):
    """Valid replacement for the middle-region constant: (5 + 8/alpha^2)^{1/4}.

    The stated middle-region constant (5 + 8 alpha^2)^{1/4} fails for small
    alpha (e.g. alpha = 0.1, eta = z_U = 10 gives |M| ~ 2.23 against a bound
    of ~1.50).  With |z_U| <= 2|eta| one has alpha^2 + z_U^2 <= alpha^2 +
    4 eta^2, and the denominator dominates (5/2) alpha^2 eta^2 + alpha^4;
    comparing coefficients in t = eta^2 shows
    (alpha^2 + 4t)^2 <= (5 + 8/alpha^2)((5/2) alpha^2 t + alpha^4) for all
    t >= 0, alpha > 0, which yields the corrected bound.
    """
    return (5.0 + 8.0 / alpha**2) ** 0.25


@dataclass
class BoundReport:
    n_points: int
    violations_printed: int
    violations_corrected: int
    worst_margin_printed: float      # min over grid of bound - |M| (printed constants)
    worst_margin_corrected: float
    fitted_C: float                  # smallest C in |M| <= C [1+alpha^2+1/(1+eta^2)]^{1/4}
    fitted_c: float                  # largest c in |S|(1+eta^2)^{1/4} >= c [...]^{1/4}
    worst_points: list = field(default_factory=list)  # (alpha, eta, z_U, case, absM, bound, margin)
    case_counts: dict = field(default_factory=dict)

    @property
    def passed_printed(self) -> bool:
        return self.violations_printed == 0

    @property
    def passed_corrected(self) -> bool:
        return self.violations_corrected == 0


def verify_multiplier_bounds(
    alpha_range=(0.1, 10.0),
    eta_range=(-100.0, 100.0),
    z_u_range=(-100.0, 100.0),
    resolution=100,
    slack=1e-12,
    bound_scale=1.0,
) -> BoundReport:
    """Certify the case bounds for |M| on a product grid.

    resolution is the point count per axis (resolution**3 total points).
    bound_scale multiplies all printed bounds; it exists as a test hook for
    the negative path of the certification pipeline and defaults to 1.
    """
    al = np.linspace(*alpha_range, resolution)
    et = np.linspace(*eta_range, resolution)
    zu = np.linspace(*z_u_range, resolution)
    A, E, Z = np.meshgrid(al, et, zu, indexing="ij", sparse=True)

    absM = _abs_M(A, Z, E)
    case = _case_labels(np.broadcast_to(Z, absM.shape), np.broadcast_to(E, absM.shape))
    printed = bound_scale * case_bound(case, np.broadcast_to(A, absM.shape), np.broadcast_to(E, absM.shape))
    corrected = np.where(
        case == "B",
        bound_scale * np.broadcast_to(corrected_case_b_bound(A), absM.shape),
        printed,
    )

    margin_p = printed - absM
    margin_c = corrected - absM
    viol_p = int(np.count_nonzero(margin_p < -slack))
    viol_c = int(np.count_nonzero(margin_c < -slack))

    global_env = (1 + A**2 + 1.0 / (1 + E**2)) ** 0.25
    fitted_C = float(np.max(absM / np.broadcast_to(global_env, absM.shape)))
    lower_env = ((1 + E**2) / ((1 + E**2) * (1 + A**2) + 1)) ** 0.25
    fitted_c = float(np.min((1.0 / absM) / np.broadcast_to(lower_env, absM.shape)))

    # record the handful of worst printed-bound margins for the CSV report
    flat = np.argsort(margin_p, axis=None)[:10]
    ai, ei, zi = np.unravel_index(flat, absM.shape)
    worst = [
        (
            float(al[i]),
            float(et[j]),
            float(zu[k]),
            str(case[i, j, k]),
            float(absM[i, j, k]),
            float(printed[i, j, k]),
            float(margin_p[i, j, k]),
        )
        for i, j, k in zip(ai, ei, zi)
    ]
    counts = {c: int(np.count_nonzero(case == c)) for c in "ABC"}
    return BoundReport(
        n_points=absM.size,
        violations_printed=viol_p,
        violations_corrected=viol_c,
        worst_margin_printed=float(np.min(margin_p)),
        worst_margin_corrected=float(np.min(margin_c)),
        fitted_C=fitted_C,
        fitted_c=fitted_c,
        worst_points=worst,
        case_counts=counts,
    )


def s_multiplier_values(eta, alpha, beta, U):
    """S(tau, eta) on an eta-grid, with the eta = 0 mode set from m directly.

    At eta = 0 the factorization degenerates (j has no sign, the S formula
    divides by eta); m itself is smooth there and equals -1, which is the
    value used.
    """
    eta = np.asarray(eta, dtype=float)
    z_u = beta + U * eta
    w = alpha + 1j * z_u
    out = np.empty(eta.shape, dtype=complex)
    nz = eta != 0
    e = eta[nz]
    out[nz] = -1j * e * np.sqrt((w[nz] ** 2 + e**2) / e**2) / w[nz]
    out[~nz] = -1.0
    return out


def apply_S_multiplier(psi_hat, eta, tau, U, inverse=False):
    """Pointwise Fourier multiplication by S (or 1/S).

    eta must be a uniform symmetric grid; raises if |S| degenerates below
    1e-14 at any mode (cannot happen for alpha > 0).
    """
    psi_hat = np.asarray(psi_hat, dtype=complex)
    eta = np.asarray(eta, dtype=float)
    if psi_hat.shape != eta.shape:
        raise ValueError("psi_hat and eta grids must match")
    alpha, beta = float(np.real(tau)), float(np.imag(tau))
    if alpha <= 0:
        raise ValueError("alpha must be strictly positive")
    vals = s_multiplier_values(eta, alpha, beta, U)
    if np.any(np.abs(vals) < 1e-14):
        raise RuntimeError("S multiplier degenerates below 1e-14 at a retained mode")
    return psi_hat / vals if inverse else psi_hat * vals
