"""Cauchy transforms of Chebyshev interpolants on mapped segments.

Densities live as values at mapped Chebyshev nodes.  Transforms are
computed in coefficient space through the Cauchy transforms R_k of the
Chebyshev polynomials on [-1, 1], which satisfy the same three-term
recurrence as T_k with a constant forcing:

    R_0(z)   = (1/2 pi i) Log((z-1)/(z+1)),
    R_1(z)   = 1/(pi i) + z R_0(z),
    R_{k+1}  = 2 z R_k - R_{k-1} + tau_k/(pi i),   tau_k = int T_k dt.

The growing homogeneous mode rho(z)^{-k} (rho = inverse Joukowsky
variable, |rho| <= 1) makes the forward recurrence unstable far from the
interval, so targets with |rho| < 0.9 are handled by a backward-stable
tridiagonal solve closed with the asymptotic ratio R_{K+1} = rho R_K.

A Moebius map M with pole preimage t_p reduces segment transforms to two
interval ones:  C_Gamma f(z) = C[f o M](M^{-1}(z)) - C[f o M](t_p),
with plus/minus sides preserved because M is conformal.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .contours import ContourSegment, chebyshev_points
from .errors import NearSingularTargetError, GeometryError

TWO_PI_I = 2j * np.pi
_FORWARD_RHO = 0.9   # forward recurrence is accurate for |rho| >= this
_TRI_TAIL = 420      # recurrence tail beyond the highest needed degree


# ---------------------------------------------------------------------------
# Chebyshev transforms on [-1, 1]

@lru_cache(maxsize=256)
def vals2coeffs_matrix(n: int) -> np.ndarray:
    """Map values at ascending Chebyshev points to T_k coefficients."""
    if n == 1:
        return np.ones((1, 1))
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    B = np.cos(np.pi * k * i / (n - 1)) * (2.0 / (n - 1))
    B[:, 0] *= 0.5
    B[:, -1] *= 0.5
    B[0, :] *= 0.5
    B[-1, :] *= 0.5
    return np.ascontiguousarray(B[:, ::-1])  # our nodes ascend, DCT grid descends


def vals2coeffs(values: np.ndarray) -> np.ndarray:
    """FFT-path value->coefficient transform along axis 0."""
    import scipy.fft

    v = np.asarray(values)
    n = v.shape[0]
    if n == 1:
        return v.copy()
    X = scipy.fft.dct(v[::-1], type=1, axis=0)
    a = X / (n - 1)
    a[0] *= 0.5
    a[-1] *= 0.5
    return a


@lru_cache(maxsize=256)
def chebyshev_weights(n: int) -> np.ndarray:
    """Clenshaw-Curtis weights on ascending Chebyshev points (dt measure)."""
    import scipy.fft

    if n == 1:
        return np.array([2.0])
    if n <= 600:
        w = _tau_vector(n) @ vals2coeffs_matrix(n)
        w.setflags(write=False)
        return w
    # FFT path: w = V2C^T tau without forming the matrix
    y = _tau_vector(n).copy()
    y[0] *= 0.5
    y[-1] *= 0.5
    X = scipy.fft.dct(y, type=1)
    S = 0.5 * (X + y[0] + ((-1.0) ** np.arange(n)) * y[-1])
    colw = np.ones(n)
    colw[0] = colw[-1] = 0.5
    w_desc = (2.0 / (n - 1)) * colw * S
    w = np.ascontiguousarray(w_desc[::-1])
    w.setflags(write=False)
    return w


@lru_cache(maxsize=512)
def _tau_vector_cached(nk: int):
    k = np.arange(nk)
    tau = np.zeros(nk)
    tau[0] = 2.0
    even = k[2::2]
    tau[2::2] = 2.0 / (1.0 - even.astype(float) ** 2)
    tau.setflags(write=False)
    return tau


def _tau_vector(nk: int) -> np.ndarray:
    return _tau_vector_cached(nk)


# ---------------------------------------------------------------------------
# R_k rows in coefficient space

def inverse_joukowsky(z):
    """rho with z = (rho + 1/rho)/2 and |rho| <= 1.

    Uses whichever of  z - s  and  1/(z + s),  s = sqrt(z-1) sqrt(z+1),
    avoids cancellation; the two agree since (z - s)(z + s) = 1.
    """
    z = np.asarray(z, dtype=complex)
    s = np.sqrt(z - 1.0) * np.sqrt(z + 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(np.abs(z - s) <= np.abs(z + s), z - s, 1.0 / (z + s))
    bad = np.abs(w) > 1.0
    if np.any(bad):
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(bad, 1.0 / w, w)
    return w


def _log_ratio(z):
    return np.log((z - 1.0) / (z + 1.0))


def _forward_rows(z, nk, R0, R1):
    """R_k(z) for k < nk by forward recurrence; rows (len(z), nk)."""
    m = len(z)
    out = np.empty((m, nk), dtype=complex)
    out[:, 0] = R0
    if nk == 1:
        return out
    out[:, 1] = R1
    tau = _tau_vector(nk)
    for k in range(1, nk - 1):
        out[:, k + 1] = 2.0 * z * out[:, k] - out[:, k - 1] + tau[k] / (1j * np.pi)
    return out


def _tridiag_core(z, nk, R0, rho, K):
    m = len(z)
    tau = _tau_vector(K + 1)
    c = tau / (1j * np.pi)

    diag = np.empty((K, m), dtype=complex)
    rhs = np.empty((K, m), dtype=complex)
    diag[:] = -2.0 * z[None, :]
    diag[K - 1] += rho
    rhs[:] = c[1:K + 1, None]
    rhs[0] -= R0

    # forward elimination
    for k in range(1, K):
        w = 1.0 / diag[k - 1]
        diag[k] -= w
        rhs[k] -= w * rhs[k - 1]
    # back substitution, keeping only k < nk
    out = np.empty((m, nk), dtype=complex)
    out[:, 0] = R0
    prev = rhs[K - 1] / diag[K - 1]
    if K - 1 < nk:
        out[:, K - 1] = prev
    for k in range(K - 2, 0, -1):
        prev = (rhs[k - 1] - prev) / diag[k - 1]
        if k < nk:
            out[:, k] = prev
    return out


# recurrence tail needed so the closure error |rho|^{2 tail} stays below eps
_TAIL_BANDS = ((0.35, 40), (0.6, 78), (0.8, 174), (_FORWARD_RHO, _TRI_TAIL))


def _tridiag_rows(z, nk, R0, rho):
    """R_k(z) for k < nk via the recurrence as a tridiagonal solve.

    Vectorized Thomas elimination over targets, banded by |rho| so nearby
    targets get the long recurrence tail they need while far ones stay
    cheap.
    """
    m = len(z)
    out = np.empty((m, nk), dtype=complex)
    arho = np.abs(rho)
    lo = 0.0
    for hi, tail in _TAIL_BANDS:
        sel = (arho >= lo) & (arho < hi) if lo > 0 else (arho < hi)
        lo = hi
        if not np.any(sel):
            continue
        out[sel] = _tridiag_core(z[sel], nk, R0[sel], rho[sel], nk + tail)
    return out


def interval_rows_off(z, nk: int) -> np.ndarray:
    """Coefficient-space rows of C[.](z) for z off [-1, 1]."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.empty((len(z), nk), dtype=complex)
    far = np.abs(z) > 1e8
    if np.any(far):
        # leading moment term; relative error O(1/|z|^2) < eps here
        out[far] = (-_tau_vector(nk) / TWO_PI_I)[None, :] / z[far, None]
    zz = z[~far]
    if len(zz):
        R0 = _log_ratio(zz) / TWO_PI_I
        rho = inverse_joukowsky(zz)
        sub = np.empty((len(zz), nk), dtype=complex)
        near = np.abs(rho) >= _FORWARD_RHO
        if np.any(near):
            zn = zz[near]
            R0n = R0[near]
            R1n = 1.0 / (1j * np.pi) + zn * R0n
            sub[near] = _forward_rows(zn, nk, R0n, R1n)
        if np.any(~near):
            zf = zz[~near]
            sub[~near] = _tridiag_rows(zf, nk, R0[~near], rho[~near])
        out[~far] = sub
    return out


def interval_rows_boundary(x, nk: int, side: int) -> np.ndarray:
    """Rows of C^+/C^- at real x strictly inside (-1, 1)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.abs(x) >= 1.0):
        raise GeometryError("boundary rows need interior points; endpoints use junction bundles")
    R0 = np.log((1.0 - x) / (1.0 + x)) / TWO_PI_I + 0.5 * side
    R0 = R0.astype(complex)
    R1 = 1.0 / (1j * np.pi) + x * R0
    return _forward_rows(x.astype(complex), nk, R0, R1)


def interval_apply_boundary(coeffs, x, side):
    """sum_k a_k R_k^side(x) without forming rows; coeffs is 1-D.

    O(nk * len(x)) time, O(len(x)) memory; this is the matrix-free path
    for single-segment problems too large to hold dense rows.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(coeffs, dtype=complex)
    nk = a.shape[0]
    tau = _tau_vector(nk)
    R_prev = (np.log((1.0 - x) / (1.0 + x)) / TWO_PI_I + 0.5 * side).astype(complex)
    acc = a[0] * R_prev
    if nk == 1:
        return acc
    R_cur = 1.0 / (1j * np.pi) + x * R_prev
    acc += a[1] * R_cur
    for k in range(1, nk - 1):
        R_next = 2.0 * x * R_cur - R_prev + tau[k] / (1j * np.pi)
        acc += a[k + 1] * R_next
        R_prev, R_cur = R_cur, R_next
    return acc


# ---------------------------------------------------------------------------
# endpoint finite parts

@lru_cache(maxsize=256)
def _endpoint_mu(nk: int, at_end: bool) -> np.ndarray:
    """mu_k = int (T_k(s) - T_k(e))/(s - e) ds at e = +-1, exactly.

    At e = +1 the recurrence I_{k+1} = 2 I_k - I_{k-1} + 2 tau_k holds with
    I_0 = 0, I_1 = 2 (homogeneous solutions are linear in k, so it is
    stable); e = -1 follows by s -> -s symmetry.
    """
    tau = _tau_vector(max(nk, 2))
    mu = np.zeros(max(nk, 2))
    mu[1] = 2.0
    for k in range(1, nk - 1):
        mu[k + 1] = 2.0 * mu[k] - mu[k - 1] + 2.0 * tau[k]
    mu = mu[:nk]
    if not at_end:
        mu = -((-1.0) ** np.arange(nk)) * mu
    mu.setflags(write=False)
    return mu


# ---------------------------------------------------------------------------
# per-segment kernel

class SegmentKernel:
    """Cached transform machinery for one segment."""

    def __init__(self, segment: ContourSegment):
        self.segment = segment
        self.n = segment.n
        self.V2C = vals2coeffs_matrix(self.n)
        m = segment.map
        self.affine = (m.c == 0)
        if self.affine:
            self._pole_row = np.zeros(self.n, dtype=complex)
        else:
            tp = np.array([m.pole_param], dtype=complex)
            self._pole_row = interval_rows_off(tp, self.n)[0]
        # complex quadrature weights: int_Gamma f ds = sum w_q f(nodes_q)
        t = chebyshev_points(self.n)
        self.complex_weights = chebyshev_weights(self.n).astype(complex) * np.asarray(
            m.derivative(t), dtype=complex
        )

    # -- plain rows (value space) -------------------------------------------

    def rows_off(self, z) -> np.ndarray:
        """(m, n) value-space rows of C_Gamma at points off the segment."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        t = self.segment.map.inverse(z)
        rows = interval_rows_off(t, self.n) - self._pole_row[None, :]
        return rows @ self.V2C

    def rows_boundary_param(self, t, side: int) -> np.ndarray:
        """Value-space C^side rows at interior parameters t in (-1, 1)."""
        rows = interval_rows_boundary(t, self.n, side) - self._pole_row[None, :]
        return rows @ self.V2C

    def distance_parameter(self, z):
        """Approximate distance from z to the segment via the parameter plane."""
        t = np.asarray(self.segment.map.inverse(z))
        tc = np.clip(t.real, -1.0, 1.0)
        return np.abs(self.segment.map(tc) - z)

    # -- endpoint finite part -----------------------------------------------

    def endpoint_row(self, at_end: bool, phi: float) -> np.ndarray:
        """Finite part of the bundle contribution of this segment at its own
        endpoint, for approach direction phi.

        This is the value-space row of the operator

          g  |->  lim_{d->0} [ C_Gamma g(p + d e^{i phi}) - zs/(2 pi i) g(p) ln d ]

        (zs = +1 at the segment end, -1 at the start); the removed log term
        is exactly the zero-sum divergence.
        """
        mu = _endpoint_mu(self.n, at_end)
        row = (mu / TWO_PI_I - self._pole_row) @ self.V2C
        node = self.n - 1 if at_end else 0
        m = self.segment.map
        if at_end:
            w = cmath.exp(1j * phi) / (2.0 * complex(m.derivative(1.0)))
        else:
            w = -2.0 * complex(m.derivative(-1.0)) * cmath.exp(-1j * phi)
        row[node] += cmath.log(w) / TWO_PI_I
        return row


# ---------------------------------------------------------------------------
# public operations and matrix assembly

@dataclass
class CauchyMatrix:
    """Dense map from node values on one segment to transform values."""

    entries: np.ndarray      # (targets, source nodes)
    side: str                # 'off' | 'plus' | 'minus'
    source: int              # segment id in the caller's contour set
    targets: np.ndarray


def cauchy_off(segment: ContourSegment, density, z):
    """Cauchy transform of the interpolant of density at off-segment z."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    kern = SegmentKernel(segment)
    dist = kern.distance_parameter(z_arr)
    limit = 1e-14 * max(1.0, segment.length_scale)
    if np.any(dist <= limit):
        raise NearSingularTargetError(
            "target is on (or within 1e-14 of) the segment; use the boundary-value variant"
        )
    vals = kern.rows_off(z_arr) @ np.asarray(density, dtype=complex)
    return vals if np.ndim(z) else vals[0]


def cauchy_boundary(segment: ContourSegment, density, side: str, targets):
    """Left (+) / right (-) boundary values at interior points of the segment."""
    sgn = {"plus": 1, "minus": -1}[side]
    z_arr = np.atleast_1d(np.asarray(targets, dtype=complex))
    t = np.asarray(segment.map.inverse(z_arr))
    if np.any(np.abs(t.imag) > 1e-8) or np.any(np.abs(t.real) > 1.0 - 1e-12):
        raise GeometryError("targets must lie strictly inside the segment")
    kern = SegmentKernel(segment)
    vals = kern.rows_boundary_param(t.real, sgn) @ np.asarray(density, dtype=complex)
    return vals if np.ndim(targets) else vals[0]


def cauchy_matrix(segment: ContourSegment, targets, side: str = "off") -> CauchyMatrix:
    """Dense transform matrix for one segment; deterministic entries."""
    z_arr = np.atleast_1d(np.asarray(targets, dtype=complex))
    kern = SegmentKernel(segment)
    if side == "off":
        ent = kern.rows_off(z_arr)
    elif side in ("plus", "minus"):
        t = np.asarray(segment.map.inverse(z_arr))
        ent = kern.rows_boundary_param(t.real, 1 if side == "plus" else -1)
    else:
        raise ValueError(f"unknown side {side!r}")
    return CauchyMatrix(entries=ent, side=side, source=-1, targets=z_arr)
