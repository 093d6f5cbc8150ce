"""Scalar toy RHP fixtures on [-1, 1].

Two jumps sharing a smooth bump phi with max 1/2:

    nu-problem:  nu+ = nu-  (1 + phi(x)),                  closed form known
    mu-problem:  mu+ = mu- (1 + phi(x)(1 + xi^{-1/2} e^{i xi x})).

The nu solution is nu = exp(C log(1+phi)); the mu solution approaches it
in L2 at rate xi^{-1/2}, which is the regression target for the slope
fixture.  The bump is polynomial, (1 - x^2)^8 / 2, so that collocation at
n = 32 resolves it to machine precision while still vanishing to high
order at the endpoints (the jump is I there, as isolated endpoints
require).
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad

from .cauchy import (
    TWO_PI_I,
    SegmentKernel,
    _endpoint_mu,
    chebyshev_weights,
    interval_apply_boundary,
    interval_rows_off,
    vals2coeffs,
    vals2coeffs_matrix,
)
from .contours import ContourSet, chebyshev_points, line_segment
from .errors import SolveError
from .sie import CollocationKernel, Density, JumpFunction, assemble, scalar_jump, solve


def bump(x):
    """Smooth bump with max exactly 1/2 at 0, vanishing to order 8 at +-1."""
    x = np.asarray(x)
    return 0.5 * (1.0 - x**2) ** 8


def nu_jump_fn(x):
    return 1.0 + bump(x)


def mu_jump_fn(x, xi: float):
    return 1.0 + bump(x) * (1.0 + np.exp(1j * xi * x) / np.sqrt(xi))


def toy_contour(n: int) -> ContourSet:
    return ContourSet((line_segment(-1.0, 1.0, n),))


def nu_jump() -> JumpFunction:
    return scalar_jump(nu_jump_fn, name="toy-nu")


def mu_jump(xi: float) -> JumpFunction:
    return scalar_jump(lambda z: mu_jump_fn(z, xi), name=f"toy-mu(xi={xi:g})")


# ---------------------------------------------------------------------------
# closed forms

def nu_density_oracle(x) -> np.ndarray:
    """u_nu = nu+ - nu- at interior points, by independent quadrature.

    Uses only scipy.quad on the principal-value-regularized integrand;
    shares no code with the collocation kernel.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))

    def f(s):
        return np.log(1.0 + bump(s))

    out = np.empty(len(x), dtype=complex)
    for i, x0 in enumerate(x):
        f0 = f(x0)

        def reg(s):
            if abs(s - x0) < 1e-14:
                h = 1e-7
                return (reg(x0 + h) + reg(x0 - h)) / 2
            return (f(s) - f0) / (s - x0)

        pv = quad(reg, -1, 1, limit=400, points=[x0])[0] + f0 * np.log((1 - x0) / (1 + x0))
        base = pv / TWO_PI_I
        out[i] = np.exp(base + f0 / 2) - np.exp(base - f0 / 2)
    return out


def nu_density_reference(x) -> np.ndarray:
    """Fast accurate u_nu via a resolved interpolant of log(1 + phi).

    Reference-quality (about 1e-13); used for dense comparison grids where
    per-point quadrature would be too slow.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = 160
    t = chebyshev_points(n)
    coeffs = vals2coeffs(np.log(1.0 + bump(t)).astype(complex))
    cp = interval_apply_boundary(coeffs, x, +1)
    cm = interval_apply_boundary(coeffs, x, -1)
    return np.exp(cp) - np.exp(cm)


# ---------------------------------------------------------------------------
# solvers

def solve_nu(n: int = 32, method: str = "direct"):
    """Collocation solution of the nu-problem; returns the RHSolution."""
    contours = toy_contour(n)
    return solve(assemble(contours, nu_jump()), method=method)


_DENSE_LIMIT = 2600


def resolved_order(xi: float) -> int:
    """Node count resolving exp(i xi x) on [-1, 1] with spectral margin."""
    return int(xi + 12.0 * xi ** (1.0 / 3.0) + 240)


def solve_mu(xi: float, n: int = None, rtol: float = 1e-11):
    """Solve the oscillatory mu-problem at parameter xi.

    Dense direct solve for moderate n; above _DENSE_LIMIT unknowns a
    matrix-free GMRES path is used (the operator is I minus a contraction,
    so unpreconditioned GMRES converges in a few dozen iterations).

    Returns (x_nodes, u_values, n).
    """
    if n is None:
        n = resolved_order(xi)
    if n <= _DENSE_LIMIT:
        sol = solve(assemble(toy_contour(n), mu_jump(xi)))
        return sol.contours.segments[0].nodes.real, sol.density.values[0][:, 0, 0], n

    x = chebyshev_points(n)
    g1 = mu_jump_fn(x, xi) - 1.0

    mu_p = _endpoint_mu(n, True) / TWO_PI_I
    mu_m = _endpoint_mu(n, False) / TWO_PI_I
    # approach-direction constants for the lone endpoints, minus side
    w_end = np.log(np.exp(1j * (np.pi + np.pi / 2)) / 2.0) / TWO_PI_I
    w_start = np.log(-2.0 * np.exp(-1j * (-np.pi / 2))) / TWO_PI_I

    def cminus(u):
        a = vals2coeffs(u.astype(complex))
        out = np.empty(n, dtype=complex)
        out[1:-1] = interval_apply_boundary(a, x[1:-1], -1)
        out[0] = mu_m @ a + w_start * u[0]
        out[-1] = mu_p @ a + w_end * u[-1]
        return out

    def op(u):
        return u - g1 * cminus(u)

    from scipy.sparse.linalg import LinearOperator, gmres

    A = LinearOperator((n, n), matvec=op, dtype=complex)
    u, info = gmres(A, g1.astype(complex), rtol=rtol, atol=0.0, restart=80, maxiter=20)
    if info != 0:
        raise SolveError(f"toy GMRES did not converge (info={info})")
    return x, u, n


def mu_nu_l2_distance(xi: float, n: int = None) -> float:
    """|| u_mu - u_nu ||_{L2(-1,1)} with the mu grid's quadrature."""
    x, u_mu, n = solve_mu(xi, n)
    u_nu = nu_density_reference(x[1:-1])
    w = chebyshev_weights(n)[1:-1]
    return float(np.sqrt(np.sum(w * np.abs(u_mu[1:-1] - u_nu) ** 2)))


def decay_slope(xis, dists) -> float:
    """Least-squares slope of log dist against log xi."""
    lx = np.log(np.asarray(xis, dtype=float))
    ld = np.log(np.asarray(dists, dtype=float))
    return float(np.polyfit(lx, ld, 1)[0])
