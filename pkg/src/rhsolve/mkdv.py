"""mKdV in the Painleve region x = -12 c^2 t^{1/3} via a fixed scaled contour.

With z0 = c t^{-1/3} and k = z / z0, the phase 2izx + 8iz^3 t becomes
8 i c^3 (k^3 - 3k) with stationary points k = +-1, independent of t.  The
jump on [-1, 1] is the scaled original matrix; beyond +-1 the real line is
lensed into rays along the local steepest-descent directions,

    [-1,1]:            G~(k) = [[1 - r(k) r(-k), -r(-k) e^{-th}], [r(k) e^{th}, 1]]
    Gamma_1, Gamma_2:  [[1, 0], [r(k) e^{th(k)}, 1]]      (lower)
    Gamma_3, Gamma_4:  [[1, -r(-k) e^{-th(k)}], [0, 1]]   (upper)

where r = rho~ (rho at z0 k) and th = theta~.  Gamma_1/Gamma_3 leave +1,
Gamma_2/Gamma_4 run into -1 (inheriting the real-line orientation), which
is exactly what the junction product conditions at +-1 require.

The assembled contour is independent of (t, c): only jump samples change.
Because the phase swings through ~32 c^3 radians on [-1, 1], that segment
is subdivided into phase-equidistributed pieces and the rays are split
near their base; "n points per contour" then means n per piece of this
fixed decomposition.

Reconstruction: u(x, t) = 2 i z0 lim k Phi~_12(k).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .contours import ContourSet, line_segment
from .errors import AnalyticityError, GeometryError
from .scaleshift import ScaledGroup, ScaledProblem
from .sie import (
    CollocationKernel,
    JumpFunction,
    RHSolution,
    assemble,
    density_moment,
    jump_residual,
    solve,
)

DEFAULT_INTERVAL_SEGMENTS = 144   # tuned for c <= 3/2; raise for larger c
_RAY_OUTER = 2.0
# Ray breakpoints: equidistribute the decay exponent 24 c^3 r^2 (levels
# below), so a handful of nodes per piece resolves the Gaussian die-off
# of the density; everything past the last break is numerically dead.
_RAY_DECAY_LEVELS = (0.7, 1.8, 3.5, 6.0, 10.0, 16.0, 24.0, 34.0)


@dataclass
class ReflectionCoefficient:
    """Analytic reflection coefficient with strip metadata.

    evaluator must accept complex arguments within |Im z| < strip; decay
    describes how fast |rho| falls off on the real axis (informational).
    """

    evaluator: object
    strip: float = math.inf
    name: str = "rho"
    decay: str = "rapid"

    def __call__(self, z):
        return np.asarray(self.evaluator(np.asarray(z, dtype=complex)), dtype=complex)


def builtin_rho() -> ReflectionCoefficient:
    """Entire, rapidly decaying test coefficient (i/4) e^{-z^2}."""
    return ReflectionCoefficient(lambda z: 0.25j * np.exp(-z * z), strip=math.inf,
                                 name="builtin")


@dataclass(frozen=True)
class MKdVProblem:
    t: float
    c: float

    def __post_init__(self):
        if self.t <= 0 or self.c <= 0:
            raise GeometryError("need t > 0 and c > 0")

    @property
    def x(self) -> float:
        return -12.0 * self.c**2 * self.t ** (1.0 / 3.0)

    @property
    def z0(self) -> float:
        return self.c * self.t ** (-1.0 / 3.0)


def mkdv_theta(z, x, t):
    """theta(z) = 2 i z x + 8 i z^3 t."""
    z = np.asarray(z, dtype=complex)
    return 2j * z * x + 8j * z**3 * t


def scaled_theta(k, c):
    """theta in the Painleve-region variable: 8 i c^3 (k^3 - 3 k)."""
    k = np.asarray(k, dtype=complex)
    return 8j * c**3 * (k**3 - 3.0 * k)


def descent_angle(c: float, k0: float, exp_sign: int) -> float:
    """Steepest-descent departure angle of e^{exp_sign * theta~} at k0 = +-1.

    Computed from the phase Hessian: along e^{i phi}, Re(exp_sign th'' w^2)/2
    is most negative for 2 phi = pi - arg(exp_sign th''); of the two roots
    the one leaving the real axis on the factorization's side is returned
    (upper half for the lower-triangular factor, lower half for the upper).
    """
    hess = exp_sign * 48j * c**3 * k0
    phi = (math.pi - cmath.phase(hess)) / 2.0
    want_upper = exp_sign > 0
    for cand in (phi, phi + math.pi):
        s = math.sin(cand)
        if abs(s) > 1e-12 and (s > 0) == want_upper:
            a = cand % (2 * math.pi)
            return a - 2 * math.pi if a > math.pi else a
    raise GeometryError("no valid descent direction")


def interval_breakpoints(m: int, c: float = 1.5) -> np.ndarray:
    """Phase-equidistributed partition of [-1, 1].

    The cumulative phase Phi(k) = 24 c^3 int (1 - s^2) ds is split evenly;
    this reference c sets only the resolution heuristic, never the shape.
    """
    total = 32.0 * c**3

    def cum(k):
        return 24.0 * c**3 * (k - k**3 / 3.0 + 2.0 / 3.0)

    pts = [-1.0]
    for i in range(1, m):
        target = total * i / m
        pts.append(brentq(lambda k: cum(k) - target, -1.0, 1.0, xtol=1e-14))
    pts.append(1.0)
    return np.asarray(pts)


def mkdv_contour(n: int = 10, m: int = None):
    """The fixed k-plane contour Sigma with its segment-kind table.

    Returns (ContourSet, kinds); kinds[i] in {'interval', 'lower', 'upper'}.
    Deterministic and independent of (t, c).
    """
    if m is None:
        m = DEFAULT_INTERVAL_SEGMENTS
    segs = []
    kinds = []
    bps = interval_breakpoints(m)
    for k0, k1 in zip(bps[:-1], bps[1:]):
        segs.append(line_segment(k0, k1, n))
        kinds.append("interval")
    c_ref = 1.5
    breaks = [math.sqrt(s / (24.0 * c_ref**3)) for s in _RAY_DECAY_LEVELS]
    radii = [0.0] + breaks + [_RAY_OUTER]
    ray_spec = (
        (1.0, descent_angle(c_ref, 1.0, +1), "lower", False),
        (-1.0, descent_angle(c_ref, -1.0, +1), "lower", True),
        (1.0, descent_angle(c_ref, 1.0, -1), "upper", False),
        (-1.0, descent_angle(c_ref, -1.0, -1), "upper", True),
    )
    for base, ang, kind, into_base in ray_spec:
        w = cmath.exp(1j * ang)
        pts = [base + r * w for r in radii]
        pairs = list(zip(pts[:-1], pts[1:]))
        if into_base:
            pairs = [(b, a) for a, b in reversed(pairs)]
        for a, b in pairs:
            segs.append(line_segment(a, b, n))
            kinds.append(kind)
    return ContourSet(tuple(segs)), tuple(kinds)


def mkdv_jump(problem: MKdVProblem, rho: ReflectionCoefficient, kinds) -> JumpFunction:
    z0 = problem.z0
    c = problem.c

    def ev(segment_index, k):
        k = np.atleast_1d(np.asarray(k, dtype=complex))
        kind = kinds[segment_index]
        out = np.zeros((len(k), 2, 2), dtype=complex)
        out[:, 0, 0] = 1.0
        out[:, 1, 1] = 1.0
        th = scaled_theta(k, c)
        if kind == "interval":
            rp = rho(z0 * k)
            rm = rho(-z0 * k)
            out[:, 0, 0] = 1.0 - rp * rm
            out[:, 0, 1] = -rm * np.exp(-th)
            out[:, 1, 0] = rp * np.exp(th)
        elif kind == "lower":
            out[:, 1, 0] = rho(z0 * k) * np.exp(th)
        else:
            out[:, 0, 1] = -rho(-z0 * k) * np.exp(-th)
        return out

    return JumpFunction(ev, d=2, name=f"mkdv(t={problem.t:g},c={problem.c:g})")


def _check_strip(contours: ContourSet, problem: MKdVProblem, rho: ReflectionCoefficient):
    if not math.isfinite(rho.strip):
        return
    max_im = max(
        float(np.max(np.abs(np.asarray(s.map(np.linspace(-1, 1, 17))).imag)))
        for s in contours.segments
    )
    strip_k = rho.strip / problem.z0
    if max_im >= 0.95 * strip_k:
        raise AnalyticityError(
            f"deformed contour reaches |Im k| = {max_im:.3f} but the declared "
            f"strip allows only {strip_k:.3f} at t = {problem.t:g}"
        )


def build_mkdv_rhp(problem: MKdVProblem, rho: ReflectionCoefficient,
                   n: int = 10, m: int = None,
                   contours: ContourSet = None, kinds=None) -> ScaledProblem:
    """Single-group scaled problem on the fixed contour Sigma."""
    if contours is None:
        contours, kinds = mkdv_contour(n=n, m=m)
    _check_strip(contours, problem, rho)
    jump = mkdv_jump(problem, rho, kinds)
    return ScaledProblem([ScaledGroup(contours, 1.0, 0.0, jump, "sigma")],
                         name=f"mkdv(t={problem.t:g})")


def mkdv_reconstruct(solution, problem: MKdVProblem) -> complex:
    """u(x, t) = 2 i z0 lim k Phi~_12(k) from the density first moment."""
    if isinstance(solution, RHSolution):
        m = density_moment(solution, solution.density)
        lim = (-1.0 / (2j * math.pi)) * m[0, 1]
    else:
        lim = solution.first_moment()[0, 1]
    return complex(2j * problem.z0 * lim)


@dataclass
class MKdVResult:
    t: float
    c: float
    x: float
    u: complex
    n: int
    jump_residual: float
    cond_estimate: float
    solution: object = field(repr=False, default=None)


def solve_mkdv(t: float, c: float = 1.5, rho: ReflectionCoefficient = None,
               n: int = 10, m: int = None, method: str = "direct",
               cache: dict = None, keep_solution: bool = False,
               residual: bool = True) -> MKdVResult:
    """Solve the Painleve-region mKdV RHP at one (t, c) point.

    cache, when supplied, reuses the fixed contour and its geometry-only
    collocation matrices across calls with equal (n, m): a (t, c) sweep
    then only refills jump samples and refactors.
    """
    if rho is None:
        rho = builtin_rho()
    problem = MKdVProblem(t=t, c=c)
    key = (n, m if m is not None else DEFAULT_INTERVAL_SEGMENTS)
    entry = cache.get(key) if cache is not None else None
    if entry is None:
        contours, kinds = mkdv_contour(n=n, m=m)
        kern = CollocationKernel(contours)
        if cache is not None:
            cache[key] = (contours, kinds, kern)
    else:
        contours, kinds, kern = entry
    _check_strip(contours, problem, rho)
    jump = mkdv_jump(problem, rho, kinds)
    sol = solve(assemble(contours, jump, kernel=kern), method=method)
    res = jump_residual(sol) if residual else float("nan")
    return MKdVResult(t=t, c=c, x=problem.x, u=mkdv_reconstruct(sol, problem),
                      n=n, jump_residual=res, cond_estimate=sol.cond_estimate,
                      solution=sol if keep_solution else None)
