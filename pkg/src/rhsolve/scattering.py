"""Zakharov-Shabat scattering for the mKdV reflection coefficient.

Optional plumbing: the solver pipeline accepts a closed-form reflection
coefficient; this module computes one from decaying initial data by
integrating the 2x2 linear system

    phi_x = [[-i z, q(x)], [r(x), i z]] phi,        r = +q,

across a truncated domain and reading off rho(z) = b(z)/a(z) from the
Jost asymptotics.  The r = +q reduction belongs to the defocusing flow
u_t - 6 u^2 u_x + u_xxx = 0: |a|^2 - |b|^2 = 1, so |rho| < 1 and a is
zero-free in the closed upper half plane (no solitons), which keeps the
analyticity strip pole-free.  The oscillation-free variables
w1 = phi1 e^{i z x}, w2 = phi2 e^{-i z x} are integrated instead, so

    w1' = q e^{ 2 i z x} w2,    w2' = q e^{-2 i z x} w1,

with w(-L) = (1, 0); then a = w1(L), b = w2(L).  For analytic decaying
data the integration extends to complex z in a strip, which is what the
deformed contours require.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import TruncationError


def default_domain(u0, tail: float = 1e-14, max_half_width: float = 60.0) -> float:
    """Half-width L with |u0| below tail at +-L."""
    L = 4.0
    while L <= max_half_width:
        if abs(u0(L)) < tail and abs(u0(-L)) < tail:
            return L
        L *= 1.4
    raise TruncationError(f"initial data does not decay below {tail:g} within |x| <= {max_half_width}")


def scatter_one(u0, z: complex, L: float, rtol: float = 1e-11, atol: float = 1e-12):
    """(a(z), b(z)) for one spectral point."""

    def rhs(x, w):
        q = u0(x)
        e = np.exp(2j * z * x)
        return [q * e * w[1], q / e * w[0]]

    sol = solve_ivp(rhs, (-L, L), np.array([1.0 + 0j, 0.0 + 0j]), method="DOP853",
                    rtol=rtol, atol=atol, dense_output=False)
    if not sol.success:
        raise RuntimeError(f"scattering integration failed at z={z}: {sol.message}")
    a, b = sol.y[0, -1], sol.y[1, -1]
    return complex(a), complex(b)


def scatter_rho(u0, z_grid, L: float = None, rtol: float = 1e-11):
    """Samples of rho(z) = b/a on a grid (real or complex z in the strip)."""
    if L is None:
        L = default_domain(u0)
    out = np.empty(len(z_grid), dtype=complex)
    for i, z in enumerate(z_grid):
        a, b = scatter_one(u0, complex(z), L, rtol=rtol)
        out[i] = b / a
    return out


@dataclass
class RhoModel:
    """Chebyshev model of rho on [-zmax, zmax], valid in a surrounding strip."""

    coeffs: np.ndarray
    zmax: float
    strip: float
    check_error: float

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        from numpy.polynomial import chebyshev as C

        return C.chebval(z / self.zmax, self.coeffs)


def build_rho_model(u0, zmax: float = 8.5, degree: int = 200, strip: float = 1.1,
                    L: float = None, rtol: float = 1e-11) -> RhoModel:
    """Fit a polynomial model of rho from scattering samples.

    Sampling happens on the real axis; validity of the model in the strip
    is verified against direct complex-z integrations so the deformed
    contours can evaluate it off the axis (check_error reports the worst
    probe deviation).
    """
    if L is None:
        L = default_domain(u0)
    t = -np.cos(np.pi * np.arange(degree + 1) / degree)
    samples = scatter_rho(u0, zmax * t, L=L, rtol=rtol)
    from .cauchy import vals2coeffs

    coeffs = vals2coeffs(samples)
    probes = np.array([0.3 + 1j * strip * 0.9, -1.2 - 1j * strip * 0.9,
                       2.3 + 1j * strip * 0.6, -0.4 - 1j * strip * 0.6])
    direct = scatter_rho(u0, probes, L=L, rtol=rtol)
    from numpy.polynomial import chebyshev as C

    model = C.chebval(probes / zmax, coeffs)
    err = float(np.max(np.abs(model - direct)))
    return RhoModel(coeffs=coeffs, zmax=zmax, strip=strip, check_error=err)
