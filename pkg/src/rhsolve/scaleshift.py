"""Iterative RH solver over disjoint scaled contour groups.

Each group j lives on a fixed contour Omega_j placed in the plane as
alpha_j Omega_j + beta_j.  Groups are solved in order; the jump of group
j is conjugated by all earlier solutions evaluated at alpha_j k + beta_j,

    H~_j = Phi_{j-1,j} ... Phi_{1,j} H_j Phi_{1,j}^{-1} ... Phi_{j-1,j}^{-1},

and the global solution is the product Phi = Phi_l ... Phi_1.  Because
the groups are disjoint, all cross evaluations are plain off-contour
Cauchy transforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cauchy import chebyshev_weights
from .contours import ContourSegment, ContourSet, chebyshev_points, line_segment, scale_shift
from .errors import GeometryError, SolveError, TruncationError
from .sie import (
    CollocationKernel,
    Density,
    JumpFunction,
    RHSolution,
    assemble,
    density_moment,
    jump_residual,
    solve,
)


@dataclass
class ScaledGroup:
    """One group: contour Omega, placement alpha*Omega + beta, local jump H."""

    omega: ContourSet
    alpha: complex
    beta: complex
    jump: JumpFunction
    name: str = ""


@dataclass
class ScaledProblem:
    groups: list
    name: str = ""

    def __post_init__(self):
        if not self.groups:
            raise GeometryError("scaled problem needs at least one group")
        d = self.groups[0].jump.d
        if any(g.jump.d != d for g in self.groups):
            raise GeometryError("all groups must share the matrix dimension")

    @property
    def d(self) -> int:
        return self.groups[0].jump.d

    def scaled_contour(self, j: int) -> ContourSet:
        g = self.groups[j]
        return scale_shift(g.omega, g.alpha, g.beta)

    def min_group_distance(self) -> float:
        """Minimum pairwise distance between the placed groups (sampled)."""
        clouds = []
        for j in range(len(self.groups)):
            pts = []
            for seg in self.scaled_contour(j).segments:
                pts.append(seg.map(np.linspace(-1, 1, 33)))
            clouds.append(np.concatenate(pts))
        dmin = math.inf
        for a in range(len(clouds)):
            for b in range(a + 1, len(clouds)):
                dd = np.abs(clouds[a][:, None] - clouds[b][None, :]).min()
                dmin = min(dmin, float(dd))
        return dmin if len(clouds) > 1 else math.inf


@dataclass
class StageSolution:
    index: int
    group: ScaledGroup
    solution: RHSolution
    conjugated_jump: JumpFunction


@dataclass
class IterativeSolution:
    """Product solution Phi = Phi_l ... Phi_1 of a ScaledProblem."""

    problem: ScaledProblem
    stages: list

    @property
    def d(self) -> int:
        return self.problem.d

    def group_phi(self, j: int, z) -> np.ndarray:
        """Phi_j at global points z (must avoid group j's own contour)."""
        stage = self.stages[j]
        g = stage.group
        k = (np.atleast_1d(np.asarray(z, dtype=complex)) - g.beta) / g.alpha
        d = self.d
        out = np.zeros((len(k), d, d), dtype=complex)
        out[:, range(d), range(d)] = 1.0
        rows = stage.solution.kernel.rows_off_all(k)
        out += (rows @ stage.solution.density.flatten()).reshape(len(k), d, d)
        return out

    def phi_eval(self, z) -> np.ndarray:
        z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
        prod = self.group_phi(len(self.stages) - 1, z_arr)
        for j in range(len(self.stages) - 2, -1, -1):
            prod = prod @ self.group_phi(j, z_arr)
        return prod if np.ndim(z) else prod[0]

    def first_moment(self) -> np.ndarray:
        """lim z (Phi(z) - I): the sum of scaled density moments.

        Each factor is I + O(1/z), so the leading moments add; the moment
        of group j picks up a factor alpha_j from the change of variables.
        """
        d = self.d
        total = np.zeros((d, d), dtype=complex)
        for stage in self.stages:
            total += stage.group.alpha * (-1.0 / (2j * np.pi)) * density_moment(
                stage.solution, stage.solution.density
            )
        return total

    def max_stage_residual(self) -> float:
        return max(s.solution.residual for s in self.stages)


def _conjugated_jump(partial: IterativeSolution, group: ScaledGroup, index: int) -> JumpFunction:
    base = group.jump

    def ev(segment_index, k):
        h = base(segment_index, k)
        if index == 0:
            return h
        z = group.alpha * np.asarray(k, dtype=complex) + group.beta
        conj = partial.group_phi(index - 1, z)
        for i in range(index - 2, -1, -1):
            conj = conj @ partial.group_phi(i, z)
        dets = np.linalg.det(conj)
        if np.min(np.abs(dets)) < 1e-12:
            raise SolveError(f"conjugator singular while building stage {index} jump")
        return conj @ h @ np.linalg.inv(conj)

    return JumpFunction(ev, d=base.d, smoothness=base.smoothness,
                        name=f"{base.name}~stage{index}")


def solve_iterative(problem: ScaledProblem, method: str = "direct") -> IterativeSolution:
    """Algorithm: solve each group in order, conjugating by earlier solutions."""
    if len(problem.groups) > 1 and problem.min_group_distance() <= 0:
        raise GeometryError("scaled groups overlap; iterative solver needs disjoint groups")
    result = IterativeSolution(problem=problem, stages=[])
    for j, group in enumerate(problem.groups):
        jump_j = _conjugated_jump(result, group, j)
        try:
            sol = solve(assemble(group.omega, jump_j), method=method)
        except SolveError as exc:
            raise SolveError(f"stage {j} ({group.name or 'unnamed'}) failed: {exc}",
                             cond=getattr(exc, "cond", None)) from exc
        result.stages.append(StageSolution(index=j, group=group, solution=sol,
                                           conjugated_jump=jump_j))
    return result


def merge_to_global(problem: ScaledProblem):
    """One flat (ContourSet, JumpFunction) over all placed groups.

    This is the one-shot dense alternative to the iterative algorithm,
    used as its equivalence oracle.
    """
    segs = []
    seg_to_group = []
    for j, g in enumerate(problem.groups):
        placed = problem.scaled_contour(j)
        for li, s in enumerate(placed.segments):
            segs.append(s)
            seg_to_group.append((j, li))
    contours = ContourSet(tuple(segs))

    def ev(segment_index, z):
        j, li = seg_to_group[segment_index]
        g = problem.groups[j]
        k = (np.asarray(z, dtype=complex) - g.beta) / g.alpha
        return g.jump(li, k)

    return contours, JumpFunction(ev, d=problem.d, name=f"{problem.name}-global")


# ---------------------------------------------------------------------------
# contour truncation

@dataclass(frozen=True)
class Ray:
    """Half line origin + r * exp(i angle), r >= start_radius."""

    origin: complex
    angle: float
    start_radius: float = 0.0

    def point(self, r):
        return self.origin + np.asarray(r) * complex(math.cos(self.angle), math.sin(self.angle))


def _jump_deviation(jump_fn, z) -> np.ndarray:
    g = np.asarray(jump_fn(np.atleast_1d(np.asarray(z, dtype=complex))))
    d = g.shape[-1]
    return np.linalg.norm(g - np.eye(d)[None], axis=(1, 2))


def truncate(geometry, jump_fn, eps: float = 2.2e-16, n: int = 8,
             max_radius: float = 1e4, n_probe: int = 9):
    """Shorten a ray or segment to where the jump is I to within eps.

    jump_fn maps points to (m, d, d) jump values.  The deviation ||G - I||
    must decay (monotonically, eventually) along the geometry; probing uses
    a geometric sequence of radii and a bisection refinement.

    Returns a bounded ContourSegment with n nodes, or None when the jump is
    below eps everywhere (fully truncated).  An unbounded ray whose jump
    never decays below eps within max_radius raises TruncationError.
    """
    if isinstance(geometry, Ray):
        r0 = max(geometry.start_radius, 0.0)
        dev0 = float(_jump_deviation(jump_fn, [geometry.point(max(r0, 1e-30))])[0])
        if dev0 < eps:
            return None
        r_lo = max(r0, 1e-12)
        r_hi = r_lo
        found = None
        r = max(2 * r_lo, 1e-3)
        while r <= max_radius:
            if float(_jump_deviation(jump_fn, [geometry.point(r)])[0]) < eps:
                found = r
                break
            r_hi = r
            r *= 1.6
        if found is None:
            raise TruncationError(
                f"||G - I|| never fell below {eps:g} within radius {max_radius:g}"
            )
        lo, hi = r_hi, found
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if float(_jump_deviation(jump_fn, [geometry.point(mid)])[0]) < eps:
                hi = mid
            else:
                lo = mid
            if hi - lo < 1e-12 * hi:
                break
        return line_segment(geometry.point(r0), geometry.point(hi), n)

    if isinstance(geometry, ContourSegment):
        t = np.linspace(-1, 1, 65)
        dev = _jump_deviation(jump_fn, geometry.map(t))
        if np.all(dev < eps):
            return None
        keep = np.nonzero(dev >= eps)[0]
        last = keep.max()
        if last == len(t) - 1:
            return geometry  # never decays below eps inside; keep whole segment
        lo, hi = t[last], t[last + 1]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if float(_jump_deviation(jump_fn, [complex(geometry.map(mid))])[0]) < eps:
                hi = mid
            else:
                lo = mid
        return _sub_segment(geometry, hi)

    raise TypeError("geometry must be a Ray or a ContourSegment")


def _sub_segment(seg: ContourSegment, t_end: float) -> ContourSegment:
    """Restrict a mapped segment to parameters [-1, t_end]."""
    a = (t_end + 1.0) / 2.0
    b = (t_end - 1.0) / 2.0
    # compose with the affine parameter map s -> a s + b
    m = seg.map
    from .contours import MoebiusMap

    comp = MoebiusMap(m.a * a, m.a * b + m.b, m.c * a, m.c * b + m.d)
    return ContourSegment(comp, seg.n)


# ---------------------------------------------------------------------------
# inter-group coupling

def coupling_bound(g1: ContourSet, g2: ContourSet, n_quad: int = 64) -> float:
    """Hilbert-Schmidt bound (int int |dx dk| / |x-k|^2)^{1/2} by quadrature.

    Upper estimate of the norm of the Cauchy operator mapping densities on
    g1 to values on g2; it vanishes with the group scales.
    """
    def cloud(cs):
        pts, wts = [], []
        for seg in cs.segments:
            t = chebyshev_points(n_quad)
            pts.append(np.asarray(seg.map(t), dtype=complex))
            wts.append(chebyshev_weights(n_quad) * np.abs(seg.map.derivative(t)))
        return np.concatenate(pts), np.concatenate(wts)

    x, wx = cloud(g1)
    k, wk = cloud(g2)
    dist2 = np.abs(x[:, None] - k[None, :]) ** 2
    if dist2.min() < 1e-28:
        raise GeometryError("groups overlap; coupling bound undefined")
    return float(math.sqrt(np.sum(wx[:, None] * wk[None, :] / dist2)))


def stage_report(problem: ScaledProblem, solution: IterativeSolution) -> dict:
    """Per-stage residuals and conditioning plus pairwise coupling bounds."""
    stages = []
    for st in solution.stages:
        stages.append({
            "stage": st.index,
            "name": st.group.name,
            "alpha": st.group.alpha,
            "beta": st.group.beta,
            "solve_residual": st.solution.residual,
            "cond_estimate": st.solution.cond_estimate,
            "jump_residual": jump_residual(st.solution),
        })
    couplings = []
    for a in range(len(problem.groups)):
        for b in range(a + 1, len(problem.groups)):
            couplings.append({
                "pair": (a, b),
                "bound": coupling_bound(problem.scaled_contour(a), problem.scaled_contour(b)),
            })
    return {"stages": stages, "couplings": couplings,
            "min_group_distance": problem.min_group_distance()}
