"""Painleve II via the deformed, scaled Riemann-Hilbert problem, x < 0.

Setup: six rays from the origin carry triangular jumps built from Stokes
constants (s1, s2, s3), s_{k+3} = -s_k, with the cyclic constraint
s1 - s2 + s3 + s1 s2 s3 = 0.  After rescaling by sqrt(|x|) the phase is

    theta(z) = (8i/3) z^3 - 2i z,     xi = |x|^{3/2},

with stationary points +-1/2.  For xi above the splitting threshold the
contour is deformed through +-1/2, lensed with the LDU factorization of
the merged jump G6 G1 G2, the constant middle factor removed by the
diagonal parametrix P, and everything scaled onto two copies of a fixed
contour Omega (unit circle split at e^{+-i pi/4}, e^{+-3i pi/4} plus four
radial stubs r in (1,2)):

    Gamma_{1,2} = +-1/2 + xi^{-1/2} Omega.

Jumps per piece (w = e^{xi theta}, kappa = 1/(1 - s1 s3)):

  disk at +1/2: stubs (conjugated by P):  NE G1, NW [[1, s3 kappa/w],[0,1]],
    SW L^{-1}, SE G6;  arcs: E: P, N: P G1^{-1}, W: P_up U G2^{-1} G1^{-1},
    S: P G6.
  disk at -1/2: stubs:  NE U, NW G3, SW G4, SE [[1,0],[-s3 kappa w,1]];
    arcs: E: P_dn, N: P U^{-1} D^{-1}, W: P G3^{-1} U^{-1} D^{-1},
    S: P G4^{-1} G3^{-1} U^{-1} D^{-1}.

P_up / P_dn are P continued analytically through the branch cut from
above / below (P_up = P D below the axis, P_dn = P D^{-1} above).  Every
multi-segment junction then satisfies the zeroth-order product condition
identically; the builder verifies this numerically and refuses to emit a
geometry that does not.

Below the threshold (xi <= 16, where the scaled disks would collide) the
original six-ray problem is solved directly on truncated rays.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .contours import ContourSet, arc_segment, line_segment
from .errors import AssemblyError, FactorizationError, GeometryError, BranchCutError
from .scaleshift import (
    IterativeSolution,
    Ray,
    ScaledGroup,
    ScaledProblem,
    merge_to_global,
    solve_iterative,
    truncate,
)
from .sie import (
    JumpFunction,
    RHSolution,
    assemble,
    condition_checks,
    density_moment,
    jump_residual,
    solve,
)

SPLIT_XI = 16.0          # below this the scaled disks would overlap
_STUB_OUTER = 2.0        # Omega stub outer radius
_MONODROMY_TOL = 1e-10


@dataclass(frozen=True)
class StokesData:
    """Stokes constants for PII; s4, s5, s6 are forced to -s1, -s2, -s3."""

    s1: complex
    s2: complex
    s3: complex

    def __post_init__(self):
        defect = abs(self.s1 - self.s2 + self.s3 + self.s1 * self.s2 * self.s3)
        scale = max(1.0, abs(self.s1), abs(self.s2), abs(self.s3))
        if defect > _MONODROMY_TOL * scale:
            raise GeometryError(
                f"Stokes constants violate s1 - s2 + s3 + s1 s2 s3 = 0 (defect {defect:.2e})"
            )

    @property
    def s(self):
        return (self.s1, self.s2, self.s3, -self.s1, -self.s2, -self.s3)

    @property
    def deformable(self) -> bool:
        """The lensing deformation assumes s1 s3 > 1 (real and above 1)."""
        p = self.s1 * self.s3
        return abs(p.imag) < 1e-14 and p.real > 1.0

    @property
    def trivial(self) -> bool:
        return self.s1 == 0 and self.s2 == 0 and self.s3 == 0


@dataclass(frozen=True)
class PIIProblem:
    x: float
    stokes: StokesData
    circle_radius: float = 1.0
    stub_outer: float = _STUB_OUTER

    def __post_init__(self):
        if self.x >= 0:
            raise GeometryError("this deformation handles x < 0 only")

    @property
    def xi(self) -> float:
        return abs(self.x) ** 1.5


def pii_theta(z):
    """Phase for x < 0: theta(z) = (8i/3) z^3 - 2i z; theta'(+-1/2) = 0."""
    z = np.asarray(z, dtype=complex)
    return (8j / 3.0) * z**3 - 2j * z


def _xitheta_local(k, xi: float, sign: int):
    """xi * theta(beta + xi^{-1/2} k) for beta = sign/2, exactly.

    theta(+-1/2 + w) = -+2i/3 +- 4i w^2 + (8i/3) w^3 is an identity, so
    evaluating in the local variable avoids the catastrophic cancellation
    of xi*theta(z) at large xi.
    """
    k = np.asarray(k, dtype=complex)
    return (-sign * 2j / 3.0) * xi + sign * 4j * k**2 + (8j / 3.0) * k**3 / math.sqrt(xi)


def ldu_factor(stokes: StokesData, xi: float, z):
    """LDU factorization of the merged jump G6 G1 G2 at a point z.

    Returns (L, D, U) with L D U = [[1-s1s3, s1/w],[s1 w, (1+s1^2)/(1-s1s3)]],
    w = e^{xi theta(z)}; D = diag(1-s1s3, 1/(1-s1s3)).
    """
    s1, s3 = stokes.s1, stokes.s3
    a = 1.0 - s1 * s3
    if abs(a) < 1e-14:
        raise FactorizationError("1 - s1 s3 = 0: LDU factorization is singular")
    w = np.exp(xi * pii_theta(z))
    L = np.array([[1.0, 0.0], [s1 * w / a, 1.0]], dtype=complex)
    D = np.array([[a, 0.0], [0.0, 1.0 / a]], dtype=complex)
    U = np.array([[1.0, s1 / (w * a)], [0.0, 1.0]], dtype=complex)
    return L, D, U


def merged_jump(stokes: StokesData, xi: float, z):
    """G6 G1 G2 evaluated directly from the ray jumps."""
    w = np.exp(xi * pii_theta(z))
    s1, s2, s3 = stokes.s1, stokes.s2, stokes.s3
    G6 = np.array([[1.0, -s3 / w], [0.0, 1.0]], dtype=complex)
    G1 = np.array([[1.0, 0.0], [s1 * w, 1.0]], dtype=complex)
    G2 = np.array([[1.0, s2 / w], [0.0, 1.0]], dtype=complex)
    return G6 @ G1 @ G2


def parametrix_P(z, d1: complex, d2: complex):
    """Diagonal solution of P+ = P- diag(d1, d2) on (-1/2, 1/2), P(inf) = I.

    Entries ((2z+1)/(2z-1))^{i log d_k / (2 pi)} with the principal branch.
    Note that principal logs of a reciprocal pair (d2 = 1/d1 < 0) give
    det P != 1; the PII assembly therefore uses exponents (a, -a), see
    _pii_parametrix_exponent.
    """
    z = np.asarray(z, dtype=complex)
    p = (2.0 * z + 1.0) / (2.0 * z - 1.0)
    on_cut = (np.abs(z.imag) < 1e-300) & (np.abs(z.real) < 0.5)
    if np.any(on_cut):
        raise BranchCutError("parametrix evaluated on its branch cut (-1/2, 1/2)")
    a1 = 1j * cmath.log(d1) / (2.0 * math.pi)
    a2 = 1j * cmath.log(d2) / (2.0 * math.pi)
    out = np.zeros(z.shape + (2, 2), dtype=complex)
    lp = np.log(p)
    out[..., 0, 0] = np.exp(a1 * lp)
    out[..., 1, 1] = np.exp(a2 * lp)
    return out


def _pii_parametrix_exponent(stokes: StokesData) -> complex:
    """Exponent a with P = diag(p^a, p^-a): a = i Log(1 - s1 s3)/(2 pi)."""
    return 1j * cmath.log(1.0 - stokes.s1 * stokes.s3) / (2.0 * math.pi)


# ---------------------------------------------------------------------------
# deformed geometry

_ARC_BOUNDS = [(0.25, 0.75), (0.75, 1.25), (1.25, 1.75), (1.75, 2.25)]  # x pi
_STUB_ANGLES = [0.25, 0.75, 1.25, 1.75]                                 # x pi
ARC_N, ARC_W, ARC_S, ARC_E = 0, 1, 2, 3
STUB_NE, STUB_NW, STUB_SW, STUB_SE = 4, 5, 6, 7


def omega_contour(n: int, stub_outer: float = _STUB_OUTER) -> ContourSet:
    """The bare contour Omega as quoted: unit circle in four arcs + four stubs."""
    segs = [arc_segment(0.0, 1.0, a0 * math.pi, a1 * math.pi, n) for a0, a1 in _ARC_BOUNDS]
    for a in _STUB_ANGLES:
        w = cmath.exp(1j * a * math.pi)
        segs.append(line_segment(w, stub_outer * w, n))
    return ContourSet(tuple(segs))


# Extended decomposition actually used by the solver: the circle is split
# additionally where it crosses the real axis (the parametrix branch cut
# passes through one of those points), the lens rays continue inside the
# circle to the stationary point, and the short piece of the original
# interval inside the disk keeps the constant jump D.  With those interior
# pieces the function is left unconjugated inside, so every arc carries
# the plain parametrix jump P and all jump entries stay moderate.
_ARC6 = [(0.25, 0.75), (0.75, 1.0), (1.0, 1.25), (1.25, 1.75), (1.75, 2.0), (2.0, 2.25)]
EXT_ARCS = (0, 1, 2, 3, 4, 5)           # N, Wu, Wl, S, El, Eu
EXT_STUBS = (6, 7, 8, 9)                # NE, NW, SW, SE (r: 1 -> outer)
EXT_RAYS = (10, 11, 12, 13)             # interior, r: 0 -> 1
EXT_INTERVAL = 14


def omega_extended(n: int, sign: int, stub_outer: float = _STUB_OUTER) -> ContourSet:
    """Extended Omega for the disk at sign/2 (interval stub side differs)."""
    segs = [arc_segment(0.0, 1.0, a0 * math.pi, a1 * math.pi, n) for a0, a1 in _ARC6]
    for a in _STUB_ANGLES:
        w = cmath.exp(1j * a * math.pi)
        segs.append(line_segment(w, stub_outer * w, n))
    for a in _STUB_ANGLES:
        w = cmath.exp(1j * a * math.pi)
        segs.append(line_segment(0.0, w, n))
    if sign > 0:
        segs.append(line_segment(-1.0, 0.0, n))   # west circle point to center
    else:
        segs.append(line_segment(0.0, 1.0, n))    # center to east circle point
    return ContourSet(tuple(segs))


def _pack(rows):
    """Stack entry arrays [[a,b],[c,d]] into (m, 2, 2)."""
    a, b = rows[0]
    c, d = rows[1]
    m = np.broadcast(a, b, c, d).shape[0]
    out = np.empty((m, 2, 2), dtype=complex)
    out[:, 0, 0] = a
    out[:, 0, 1] = b
    out[:, 1, 0] = c
    out[:, 1, 1] = d
    return out


def _upper(b, m=None):
    b = np.asarray(b, dtype=complex)
    return _pack([[np.ones_like(b), b], [np.zeros_like(b), np.ones_like(b)]])


def _lower(c, m=None):
    c = np.asarray(c, dtype=complex)
    return _pack([[np.ones_like(c), np.zeros_like(c)], [c, np.ones_like(c)]])


class _DiskJump:
    """Jump table on one scaled disk (sign = +1 for +1/2, -1 for -1/2)."""

    def __init__(self, stokes: StokesData, xi: float, sign: int):
        self.stokes = stokes
        self.xi = xi
        self.sign = sign
        self.alpha = 1.0 / math.sqrt(xi)
        self.a_exp = _pii_parametrix_exponent(stokes)
        self.kappa = 1.0 / (1.0 - stokes.s1 * stokes.s3)
        d1 = 1.0 - stokes.s1 * stokes.s3
        self.D = np.array([[d1, 0.0], [0.0, 1.0 / d1]], dtype=complex)

    # local building blocks ---------------------------------------------
    def w(self, k):
        return np.exp(_xitheta_local(k, self.xi, self.sign))

    def p(self, k):
        """(z + 1/2)/(z - 1/2) at z = sign/2 + alpha k, in stable local form."""
        ak = self.alpha * np.asarray(k, dtype=complex)
        if self.sign > 0:
            return (1.0 + ak) / ak
        return ak / (ak - 1.0)

    def P(self, k, cut_side: int = 0):
        """Parametrix diag(p^a, p^-a) in the local frame.

        cut_side forces the branch for points landing on the cut itself
        (the arcs adjacent to the interval evaluate there): +1 takes the
        limit from above (arg p -> -pi), -1 from below (arg p -> +pi).
        """
        k = np.atleast_1d(np.asarray(k, dtype=complex))
        p = self.p(k)
        lp = np.log(p)
        if cut_side != 0:
            on_cut = (np.abs(k.imag) < 1e-12) & (p.real < 0)
            if np.any(on_cut):
                lp = lp.copy()
                lp[on_cut] = np.log(np.abs(p[on_cut])) - 1j * np.pi * cut_side
        out = np.zeros((len(k), 2, 2), dtype=complex)
        out[:, 0, 0] = np.exp(self.a_exp * lp)
        out[:, 1, 1] = np.exp(-self.a_exp * lp)
        return out

    def conj_by_P(self, k, raw):
        P = self.P(k)
        Pinv = np.zeros_like(P)
        Pinv[:, 0, 0] = 1.0 / P[:, 0, 0]
        Pinv[:, 1, 1] = 1.0 / P[:, 1, 1]
        return P @ raw @ Pinv

    # raw jumps on the four lens directions (NE, NW, SW, SE), valid both for
    # the interior rays and (conjugated by P) for the exterior stubs
    def raw_lens(self, direction: int, k):
        s1, s3 = self.stokes.s1, self.stokes.s3
        w = self.w(k)
        if self.sign > 0:
            if direction == 0:
                return _lower(s1 * w)                       # G1
            if direction == 1:
                return _upper(s3 * self.kappa / w)          # U^{-1} G2 merged
            if direction == 2:
                return _lower(-s1 * self.kappa * w)         # L^{-1}
            return _upper(-s3 / w)                          # G6
        if direction == 0:
            return _upper(s1 * self.kappa / w)              # U
        if direction == 1:
            return _lower(s3 * w)                           # G3
        if direction == 2:
            return _upper(-s1 / w)                          # G4
        return _lower(-s3 * self.kappa * w)                 # L G5 merged

    # per-segment jump ----------------------------------------------------
    def __call__(self, segment_index: int, k):
        k = np.atleast_1d(np.asarray(k, dtype=complex))
        if segment_index in EXT_ARCS:
            above = 1 if self.sign > 0 else 5   # arc ending on the cut from above
            below = 2 if self.sign > 0 else 4
            if segment_index == above:
                return self.P(k, cut_side=+1)
            if segment_index == below:
                return self.P(k, cut_side=-1)
            return self.P(k)
        if segment_index in EXT_STUBS:
            return self.conj_by_P(k, self.raw_lens(segment_index - EXT_STUBS[0], k))
        if segment_index in EXT_RAYS:
            return self.raw_lens(segment_index - EXT_RAYS[0], k)
        if segment_index == EXT_INTERVAL:
            return np.broadcast_to(self.D, (len(k), 2, 2)).copy()
        raise AssemblyError(f"unknown segment index {segment_index}")


def build_pii_rhp(problem: PIIProblem, n: int = 16, product_tol: float = 1e-8) -> ScaledProblem:
    """Two-group scaled problem for xi > SPLIT_XI; junction-validated."""
    xi = problem.xi
    if xi <= SPLIT_XI:
        raise GeometryError(
            f"xi = {xi:.3g} <= {SPLIT_XI}: scaled disks would overlap; "
            "use the undeformed six-ray solver"
        )
    if not problem.stokes.deformable and not problem.stokes.trivial:
        raise GeometryError("deformation requires s1 s3 > 1")
    alpha = 1.0 / math.sqrt(xi)
    om_l = omega_extended(n, -1, problem.stub_outer)
    om_r = omega_extended(n, +1, problem.stub_outer)
    left = ScaledGroup(om_l, alpha, -0.5, JumpFunction(_DiskJump(problem.stokes, xi, -1), d=2,
                                                       name="pii-left"), "left")
    right = ScaledGroup(om_r, alpha, +0.5, JumpFunction(_DiskJump(problem.stokes, xi, +1), d=2,
                                                        name="pii-right"), "right")
    prob = ScaledProblem([left, right], name=f"pii(x={problem.x:g})")

    contours, gjump = merge_to_global(prob)
    report = condition_checks(gjump, contours)
    worst = max(
        (j["product_defect"] for j in report["junctions"] if j["multiplicity"] >= 2),
        default=0.0,
    )
    if worst > product_tol:
        raise AssemblyError(f"junction product defect {worst:.2e} exceeds {product_tol:g}")
    return prob


# ---------------------------------------------------------------------------
# undeformed six-ray problem (small xi and cross-checks)

def build_pii_undeformed(problem: PIIProblem, n: int = 24, eps: float = 2.2e-16,
                         max_radius: float = 60.0):
    """Truncated six-ray contour with the raw triangular jumps."""
    xi = problem.xi
    s = problem.stokes.s
    segs = []
    seg_ray = []
    for i in range(1, 7):
        if s[i - 1] == 0:
            continue
        ang = math.pi * (2 * i - 1) / 6.0

        def dev(z, i=i):
            z = np.asarray(z, dtype=complex)
            w = np.exp(xi * pii_theta(z))
            m = np.zeros((len(z), 2, 2), dtype=complex)
            m[:, 0, 0] = 1.0
            m[:, 1, 1] = 1.0
            if i % 2 == 1:
                m[:, 1, 0] = s[i - 1] * w
            else:
                m[:, 0, 1] = s[i - 1] / w
            return m

        seg = truncate(Ray(0.0, ang), dev, eps=eps, n=n, max_radius=max_radius)
        if seg is None:
            continue
        segs.append(seg)
        seg_ray.append(i)
    if not segs:
        return None, None
    contours = ContourSet(tuple(segs))

    def ev(segment_index, z):
        i = seg_ray[segment_index]
        z = np.asarray(z, dtype=complex)
        w = np.exp(xi * pii_theta(z))
        if i % 2 == 1:
            return _lower(s[i - 1] * w)
        return _upper(s[i - 1] / w)

    return contours, JumpFunction(ev, d=2, name=f"pii-undeformed(x={problem.x:g})")


# ---------------------------------------------------------------------------
# reconstruction and driver

def pii_reconstruct(solution, problem: PIIProblem) -> complex:
    """u(x) = -2 sqrt|x| lim z Phi_12(z), from the density first moment.

    The -2 is pinned by the PII equation itself (the raw moment satisfies
    u'' - xu - 8u^3 = 0) and by the Hastings-McLeod asymptotics for
    Stokes data (i, 0, -i); with this jump convention the bare limit
    formula is off by that constant.
    """
    root = math.sqrt(abs(problem.x))
    if isinstance(solution, IterativeSolution):
        return complex(-2.0 * root * solution.first_moment()[0, 1])
    m = density_moment(solution, solution.density)
    return complex(-2.0 * root * (-1.0 / (2j * math.pi)) * m[0, 1])


@dataclass
class PIIResult:
    x: float
    u: complex
    mode: str
    n: int
    jump_residual: float
    cond_estimate: float
    solution: object = field(repr=False, default=None)


def solve_pii(x: float, stokes: StokesData, n: int = 16, mode: str = "auto",
              method: str = "direct", keep_solution: bool = False) -> PIIResult:
    """Solve PII at one x < 0 value with n collocation points per segment.

    mode: 'auto' picks 'undeformed' for xi <= 16 and 'iterative' above;
    'global' solves the deformed two-disk geometry as one dense system.
    """
    problem = PIIProblem(x=x, stokes=stokes)
    if stokes.trivial:
        return PIIResult(x=x, u=0.0, mode="trivial", n=n, jump_residual=0.0,
                         cond_estimate=1.0)
    if mode == "auto":
        mode = "undeformed" if problem.xi <= SPLIT_XI else "iterative"

    if mode == "undeformed":
        contours, jump = build_pii_undeformed(problem, n=n)
        if contours is None:
            return PIIResult(x=x, u=0.0, mode=mode, n=n, jump_residual=0.0,
                             cond_estimate=1.0)
        sol = solve(assemble(contours, jump), method=method)
        return PIIResult(x=x, u=pii_reconstruct(sol, problem), mode=mode, n=n,
                         jump_residual=jump_residual(sol),
                         cond_estimate=sol.cond_estimate,
                         solution=sol if keep_solution else None)

    prob = build_pii_rhp(problem, n=n)
    if mode == "iterative":
        it = solve_iterative(prob, method=method)
        res = max(jump_residual(st.solution) for st in it.stages)
        cond = max(st.solution.cond_estimate for st in it.stages)
        return PIIResult(x=x, u=pii_reconstruct(it, problem), mode=mode, n=n,
                         jump_residual=res, cond_estimate=cond,
                         solution=it if keep_solution else None)
    if mode == "global":
        contours, gjump = merge_to_global(prob)
        sol = solve(assemble(contours, gjump), method=method)
        return PIIResult(x=x, u=pii_reconstruct(sol, problem), mode=mode, n=n,
                         jump_residual=jump_residual(sol),
                         cond_estimate=sol.cond_estimate,
                         solution=sol if keep_solution else None)
    raise ValueError(f"unknown mode {mode!r}")
