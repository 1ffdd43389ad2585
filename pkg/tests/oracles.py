"""Independent slow oracles used to freeze expected values in the tests.

The principal-value oracle integrates with singularity subtraction:
    g(x) = (1/pi) int (f(y) - f(x))/(x - y) dy  +  f(x) log((1+x)/(1-x)) / pi,
so the integrand is bounded and adaptive quadrature applies.
"""

import numpy as np
from scipy.integrate import quad


def pv_finite_hilbert(f, x, limit=400):
    """(1/pi) PV int_{-1}^{1} f(y)/(x-y) dy for -1 < x < 1.

    f must be the *full* function (any integrable endpoint behavior handled
    by quad's algebraic-singularity weighting via points splitting).
    """
    fx = f(x)

    def integrand(y):
        if y == x:
            return 0.0
        return (f(y) - fx) / (x - y)

    val = 0.0
    for a, b in ((-1.0, x), (x, 1.0)):
        r, _ = quad(integrand, a, b, limit=limit, points=[x] if a < x < b else None)
        val += r
    return (val + fx * np.log((1.0 + x) / (1.0 - x))) / np.pi


def pv_finite_hilbert_weighted(smooth, weight_class, x, limit=400):
    """Same oracle for smooth(y) * w(y) with endpoint weights.

    The subtraction trick still works because the weighted integrand is
    integrable; quad handles the endpoint algebraic singularities with
    generous subdivision limits.
    """
    if weight_class == "smooth":
        return pv_finite_hilbert(smooth, x, limit)
    if weight_class == "sqrt":
        return pv_finite_hilbert(lambda y: smooth(y) * np.sqrt(1 - y**2), x, limit)
    if weight_class == "inv_sqrt":
        return pv_finite_hilbert(lambda y: smooth(y) / np.sqrt(1 - y**2), x, limit)
    raise ValueError(weight_class)
