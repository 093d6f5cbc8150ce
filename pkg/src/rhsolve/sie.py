"""Assemble and solve the collocated singular integral equation.

The RHP  Phi+ = Phi- G,  Phi(inf) = I  with ansatz  Phi = I + C_Gamma u
is equivalent to

    u(z) - C^-_Gamma u(z) (G(z) - I) = G(z) - I,

collocated at mapped Chebyshev nodes.  Right multiplication by (G - I)
couples the two columns of u but not its rows, so one dense operator of
size (d N) serves both row blocks with different right-hand sides.

Junction handling: at every junction one incident node's collocation
rows are replaced by explicit zeroth-order zero-sum constraint rows; the
remaining incident nodes collocate the SIE through bundle-evaluated
boundary rows whose common log divergence (the zero-sum functional) is
subtracted.  The discrete operator therefore agrees with the continuous
one on densities satisfying the zero-sum condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .cauchy import SegmentKernel, chebyshev_weights, TWO_PI_I
from .contours import ContourSet, chebyshev_points
from .errors import AssemblyError, SolveError, GeometryError

_COND_LIMIT = 1e14


# ---------------------------------------------------------------------------
# jumps and densities

@dataclass
class JumpFunction:
    """Matrix-valued jump sampled per segment.

    evaluator(segment_index, z_array) returns (len(z), d, d) complex.
    smoothness is the declared classical order k; factor_tags is free-form
    metadata (lensing factors and the like).
    """

    evaluator: object
    d: int = 2
    smoothness: int = 1
    name: str = ""
    factor_tags: dict = field(default_factory=dict)

    def __call__(self, segment_index: int, z) -> np.ndarray:
        z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.asarray(self.evaluator(segment_index, z_arr), dtype=complex)
        if out.shape != (len(z_arr), self.d, self.d):
            raise AssemblyError(
                f"jump evaluator returned shape {out.shape}, expected {(len(z_arr), self.d, self.d)}"
            )
        return out


def identity_jump(d: int = 2) -> JumpFunction:
    def ev(_i, z):
        out = np.zeros((len(z), d, d), dtype=complex)
        out[:, range(d), range(d)] = 1.0
        return out

    return JumpFunction(ev, d=d, name="identity")


def scalar_jump(fn, name: str = "") -> JumpFunction:
    """Wrap a scalar callable g(z) as a 1x1 jump."""

    def ev(_i, z):
        return np.asarray(fn(z), dtype=complex).reshape(len(z), 1, 1)

    return JumpFunction(ev, d=1, name=name or getattr(fn, "__name__", "scalar"))


@dataclass
class Density:
    """Node values of the SIE unknown, one (n, d, d) block per segment."""

    values: tuple

    @property
    def d(self) -> int:
        return self.values[0].shape[1]

    def block(self, i: int) -> np.ndarray:
        return self.values[i]

    def flatten(self) -> np.ndarray:
        return np.concatenate([v.reshape(v.shape[0], -1) for v in self.values], axis=0)

    @staticmethod
    def zeros_like(contours: ContourSet, d: int) -> "Density":
        return Density(tuple(np.zeros((s.n, d, d), dtype=complex) for s in contours.segments))

    def norm_l2(self, contours: ContourSet) -> float:
        """L2(Gamma) norm with arclength measure, Frobenius in the matrix slots."""
        total = 0.0
        for seg, v in zip(contours.segments, self.values):
            w = chebyshev_weights(seg.n) * np.abs(seg.map.derivative(chebyshev_points(seg.n)))
            total += float(np.sum(w * np.sum(np.abs(v) ** 2, axis=(1, 2))))
        return math.sqrt(total)


# ---------------------------------------------------------------------------
# node-to-node Cauchy matrices with junction bundles

def _sector_phi(junction, which: int, side: int) -> float:
    """Approach direction inside the sector on `side` of incident end #which."""
    ends = junction.incident
    psi = [e.away_angle for e in ends]
    e = ends[which]
    m = len(ends)
    if m == 1:
        # lone endpoint: any direction off the segment; pick the normal on `side`
        return e.away_angle + (-side if e.at_end else side) * (math.pi / 2)
    order = sorted(range(m), key=lambda k: psi[k])
    pos = order.index(which)
    if (side < 0) == (not e.at_end):
        # cw-adjacent sector
        prev = order[pos - 1]
        lo, hi = psi[prev], psi[which]
    else:
        nxt = order[(pos + 1) % m]
        lo, hi = psi[which], psi[nxt]
    if hi <= lo:
        hi += 2 * math.pi
    if hi - lo < 1e-9:
        raise GeometryError("tangential junction: cannot pick an approach sector")
    return 0.5 * (lo + hi)


class CollocationKernel:
    """Per-contour cache: segment kernels and node-to-node C^± matrices."""

    def __init__(self, contours: ContourSet):
        self.contours = contours
        self.kernels = [SegmentKernel(s) for s in contours.segments]
        self.offsets = contours.node_offsets()
        self.N = self.offsets[-1]
        self._K = {}

    def node_index(self, incident_end) -> int:
        seg = incident_end.segment
        return self.offsets[seg] + (self.contours.segments[seg].n - 1 if incident_end.at_end else 0)

    def cauchy_nodes_matrix(self, side: int) -> np.ndarray:
        """(N, N) matrix of C^side of the full density at every node.

        Junction endpoint rows are bundle finite parts; on zero-sum densities
        they equal the honest boundary values.  Assembly is source-major so
        each source segment runs its transform recurrence once over all
        targets (this keeps many-segment contours fast).
        """
        if side in self._K:
            return self._K[side]
        cs = self.contours
        N = self.N
        K = np.zeros((N, N), dtype=complex)

        interior = np.ones(N, dtype=bool)
        for junction in cs.junctions:
            for e in junction.incident:
                interior[self.node_index(e)] = False
        all_nodes = np.concatenate([s.nodes for s in cs.segments])

        for j, kern_j in enumerate(self.kernels):
            cols = slice(self.offsets[j], self.offsets[j] + cs.segments[j].n)
            own = np.zeros(N, dtype=bool)
            own[self.offsets[j]:self.offsets[j] + cs.segments[j].n] = True
            off_mask = interior & ~own
            if np.any(off_mask):
                K[off_mask, cols] = kern_j.rows_off(all_nodes[off_mask])
            own_int = interior & own
            if np.any(own_int):
                t = chebyshev_points(cs.segments[j].n)[1:-1]
                K[own_int, cols] = kern_j.rows_boundary_param(t, side)

        for junction in cs.junctions:
            incident = {e.segment: e for e in junction.incident}
            inc_rows = {
                j: self.kernels[j].rows_off(np.array([junction.point]))[0]
                for j in range(len(self.kernels)) if j not in incident
            }
            for which, e in enumerate(junction.incident):
                phi = _sector_phi(junction, which, side)
                q = self.node_index(e)
                K[q, :] = 0.0
                for j, kern_j in enumerate(self.kernels):
                    cols = slice(self.offsets[j], self.offsets[j] + cs.segments[j].n)
                    ej = incident.get(j)
                    if ej is not None:
                        K[q, cols] = kern_j.endpoint_row(ej.at_end, phi)
                    else:
                        K[q, cols] = inc_rows[j]
        self._K[side] = K
        return K

    def apply_cauchy(self, side: int, density: Density) -> np.ndarray:
        """C^side of the density at all nodes, shape (N, d, d)."""
        K = self.cauchy_nodes_matrix(side)
        flat = density.flatten()
        out = K @ flat
        d = density.d
        return out.reshape(self.N, d, d)

    def rows_off_all(self, z) -> np.ndarray:
        """(m, N) off-contour rows of the full-contour transform."""
        z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.empty((len(z_arr), self.N), dtype=complex)
        for j, kern in enumerate(self.kernels):
            out[:, self.offsets[j]:self.offsets[j] + self.contours.segments[j].n] = kern.rows_off(z_arr)
        return out

    def boundary_rows_batched(self, t_list, side: int) -> np.ndarray:
        """(M, N) C^side rows at interior parameters t_list[i] on segment i.

        Batched source-major assembly; target points must be strictly inside
        their segments.
        """
        cs = self.contours
        counts = [len(t) for t in t_list]
        M = sum(counts)
        starts = np.concatenate([[0], np.cumsum(counts)]).astype(int)
        z_all = np.concatenate([
            np.asarray(cs.segments[i].map(np.asarray(t)), dtype=complex)
            for i, t in enumerate(t_list)
        ]) if M else np.empty(0, dtype=complex)
        out = np.empty((M, self.N), dtype=complex)
        for j, kern in enumerate(self.kernels):
            cols = slice(self.offsets[j], self.offsets[j] + cs.segments[j].n)
            own = np.zeros(M, dtype=bool)
            own[starts[j]:starts[j + 1]] = True
            if np.any(~own):
                out[~own, cols] = kern.rows_off(z_all[~own])
            if counts[j]:
                out[starts[j]:starts[j + 1], cols] = kern.rows_boundary_param(
                    np.asarray(t_list[j], dtype=float), side
                )
        return out


# ---------------------------------------------------------------------------
# system assembly

@dataclass
class SIESystem:
    contours: ContourSet
    jump: JumpFunction
    kernel: CollocationKernel
    matrix: np.ndarray          # (dN, dN)
    rhs: np.ndarray             # (dN, d), one column per density row index
    g_nodes: np.ndarray         # (N, d, d)
    constrained_rows: np.ndarray

    @property
    def d(self) -> int:
        return self.jump.d

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def assemble(contours: ContourSet, jump: JumpFunction, kernel: CollocationKernel = None) -> SIESystem:
    """Build the dense collocation system for u - C^- u (G - I) = G - I."""
    if kernel is None:
        kernel = CollocationKernel(contours)
    elif kernel.contours is not contours:
        raise AssemblyError("kernel was built for a different contour set")
    d = jump.d
    N = kernel.N
    g_nodes = np.empty((N, d, d), dtype=complex)
    for i, seg in enumerate(contours.segments):
        g_nodes[kernel.offsets[i]:kernel.offsets[i] + seg.n] = jump(i, seg.nodes)
    dets = np.linalg.det(g_nodes)
    bad = np.abs(dets) <= 1e-10
    if np.any(bad):
        q = int(np.argmax(bad))
        i = int(np.searchsorted(kernel.offsets, q, side="right")) - 1
        raise AssemblyError(
            f"jump is numerically singular (|det|={abs(dets[q]):.3e}) "
            f"on segment {i} at node {q - kernel.offsets[i]}"
        )

    K = kernel.cauchy_nodes_matrix(-1)
    gmi = g_nodes - np.eye(d)[None, :, :]
    A = np.zeros((d * N, d * N), dtype=complex)
    for c in range(d):
        for m in range(d):
            blk = A[c * N:(c + 1) * N, m * N:(m + 1) * N]
            blk -= gmi[:, m, c][:, None] * K
            if c == m:
                blk[np.diag_indices(N)] += 1.0

    rhs = np.empty((d * N, d), dtype=complex)
    for r in range(d):
        for c in range(d):
            rhs[c * N:(c + 1) * N, r] = gmi[:, r, c]

    constrained = []
    for junction in contours.junctions:
        if junction.multiplicity < 2:
            continue
        star = min(junction.incident, key=lambda e: (e.segment, e.at_end))
        q_star = kernel.node_index(star)
        for c in range(d):
            row = c * N + q_star
            A[row, :] = 0.0
            for e in junction.incident:
                A[row, c * N + kernel.node_index(e)] += e.zero_sum_sign
            rhs[row, :] = 0.0
            constrained.append(row)

    return SIESystem(
        contours=contours,
        jump=jump,
        kernel=kernel,
        matrix=A,
        rhs=rhs,
        g_nodes=g_nodes,
        constrained_rows=np.asarray(constrained, dtype=int),
    )


@dataclass
class RHSolution:
    """Solved RHP: density plus evaluators and diagnostics."""

    contours: ContourSet
    jump: JumpFunction
    density: Density
    kernel: CollocationKernel
    residual: float
    cond_estimate: float
    method: str = "direct"

    @property
    def d(self) -> int:
        return self.jump.d


def _unflatten(kernel: CollocationKernel, X: np.ndarray, d: int) -> Density:
    N = kernel.N
    vals = []
    for i, seg in enumerate(kernel.contours.segments):
        block = np.empty((seg.n, d, d), dtype=complex)
        for r in range(d):
            for c in range(d):
                block[:, r, c] = X[c * N + kernel.offsets[i]:c * N + kernel.offsets[i] + seg.n, r]
        vals.append(block)
    return Density(tuple(vals))


def solve(system: SIESystem, method: str = "direct", gmres_tol: float = 1e-12) -> RHSolution:
    """Solve the assembled system; direct dense LU by default.

    The iterative path (method="gmres") is for large systems where the LU
    is the bottleneck; the operator is a compact perturbation of the
    identity so unrestarted GMRES converges quickly.
    """
    A, rhs = system.matrix, system.rhs
    cond = float("nan")
    if method == "direct":
        anorm = np.linalg.norm(A, 1)
        lu, piv = scipy.linalg.lu_factor(A)
        X = scipy.linalg.lu_solve((lu, piv), rhs)
        gecon = scipy.linalg.get_lapack_funcs("gecon", (A,))
        rcond, _ = gecon(lu, anorm, norm="1")
        cond = float(1.0 / rcond) if rcond > 0 else float("inf")
        if cond > _COND_LIMIT:
            raise SolveError(f"collocation matrix numerically singular (cond ~ {cond:.2e})", cond=cond)
    elif method == "gmres":
        from scipy.sparse.linalg import gmres as _gmres

        X = np.empty_like(rhs)
        for r in range(rhs.shape[1]):
            x, info = _gmres(A, rhs[:, r], rtol=gmres_tol, atol=0.0,
                             restart=min(300, A.shape[0]), maxiter=40)
            if info != 0:
                raise SolveError(f"GMRES failed to converge (info={info})")
            X[:, r] = x
    else:
        raise ValueError(f"unknown solve method {method!r}")

    bnorm = np.linalg.norm(rhs)
    resid = float(np.linalg.norm(A @ X - rhs) / bnorm) if bnorm > 0 else 0.0
    density = _unflatten(system.kernel, X, system.d)
    return RHSolution(
        contours=system.contours,
        jump=system.jump,
        density=density,
        kernel=system.kernel,
        residual=resid,
        cond_estimate=cond,
        method=method,
    )


# ---------------------------------------------------------------------------
# evaluation and diagnostics

def phi_eval(sol: RHSolution, z):
    """Phi(z) = I + sum of segment Cauchy transforms, z off the contour."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    d = sol.d
    out = np.zeros((len(z_arr), d, d), dtype=complex)
    out[:, range(d), range(d)] = 1.0
    flat = sol.density.flatten()
    rows = sol.kernel.rows_off_all(z_arr)
    out += (rows @ flat).reshape(len(z_arr), d, d)
    return out if np.ndim(z) else out[0]


def phi_boundary(sol: RHSolution, segment_index: int, t_params, side: int):
    """Phi^side at interior parameters of one segment (plus I)."""
    cs = sol.contours
    d = sol.d
    t = np.atleast_1d(np.asarray(t_params, dtype=float))
    z = cs.segments[segment_index].map(t)
    out = np.zeros((len(t), d, d), dtype=complex)
    out[:, range(d), range(d)] = 1.0
    for j, kern in enumerate(sol.kernel.kernels):
        vj = sol.density.values[j].reshape(cs.segments[j].n, -1)
        if j == segment_index:
            rows = kern.rows_boundary_param(t, side)
        else:
            rows = kern.rows_off(z)
        out += (rows @ vj).reshape(len(t), d, d)
    return out


def jump_residual(sol: RHSolution, samples_per_segment: int = None) -> float:
    """max over off-node points of || Phi+ - Phi- G ||_F; the primary check."""
    d = sol.d
    t_list = []
    for seg in sol.contours.segments:
        if samples_per_segment is None:
            t = chebyshev_points(seg.n)
            t_list.append(0.5 * (t[1:] + t[:-1]))
        else:
            t_list.append(np.linspace(-1, 1, samples_per_segment + 2)[1:-1])
    flat = sol.density.flatten()
    rows_p = sol.kernel.boundary_rows_batched(t_list, +1)
    rows_m = sol.kernel.boundary_rows_batched(t_list, -1)
    M = rows_p.shape[0]
    eye = np.zeros((M, d, d), dtype=complex)
    eye[:, range(d), range(d)] = 1.0
    plus = eye + (rows_p @ flat).reshape(M, d, d)
    minus = eye + (rows_m @ flat).reshape(M, d, d)
    g = np.concatenate([
        sol.jump(i, seg.map(t_list[i]))
        for i, seg in enumerate(sol.contours.segments)
    ], axis=0)
    r = np.linalg.norm(plus - minus @ g, axis=(1, 2))
    return float(np.max(r)) if M else 0.0


def condition_checks(jump: JumpFunction, contours: ContourSet, density: Density = None) -> dict:
    """Per-junction product-condition and zero-sum defects (diagnostic only)."""
    report = {"junctions": []}
    d = jump.d
    for junction in contours.junctions:
        p = np.array([junction.point])
        prod = np.eye(d, dtype=complex)
        for e in junction.incident:
            g = jump(e.segment, p)[0]
            prod = prod @ (g if e.outward else np.linalg.inv(g))
        entry = {
            "point": junction.point,
            "multiplicity": junction.multiplicity,
            "product_defect": float(np.linalg.norm(prod - np.eye(d))),
        }
        if density is not None:
            zs = np.zeros((d, d), dtype=complex)
            for e in junction.incident:
                seg_vals = density.values[e.segment]
                v = seg_vals[-1] if e.at_end else seg_vals[0]
                zs = zs + e.zero_sum_sign * v
            entry["zero_sum_defect"] = float(np.linalg.norm(zs))
        report["junctions"].append(entry)
    report["max_product_defect"] = max((j["product_defect"] for j in report["junctions"]), default=0.0)
    if density is not None:
        report["max_zero_sum_defect"] = max(
            (j["zero_sum_defect"] for j in report["junctions"]), default=0.0
        )
    return report


def forward_apply(sol_or_system, density: Density) -> Density:
    """Apply the SIE operator  u -> u - C^- u (G - I)  at the nodes."""
    kernel = sol_or_system.kernel
    jump = sol_or_system.jump
    d = jump.d
    g_nodes = getattr(sol_or_system, "g_nodes", None)
    if g_nodes is None:
        g_nodes = np.concatenate(
            [jump(i, s.nodes) for i, s in enumerate(kernel.contours.segments)], axis=0
        )
    cm = kernel.apply_cauchy(-1, density)
    u = np.concatenate([v for v in density.values], axis=0)
    out = u - cm @ (g_nodes - np.eye(d)[None])
    vals, off = [], 0
    for seg in kernel.contours.segments:
        vals.append(out[off:off + seg.n])
        off += seg.n
    return Density(tuple(vals))


def inverse_apply(sol: RHSolution, v: Density) -> Density:
    """Apply the explicit inverse  C+[v Psi+] (Psi^-1)+ - C-[v Psi+] (Psi^-1)-.

    Psi is the solved Phi; composing with forward_apply recovers v, which
    is the operator-inverse consistency diagnostic.
    """
    kernel = sol.kernel
    d = sol.d
    eye = np.eye(d)[None]
    psi_p = eye + kernel.apply_cauchy(+1, sol.density)
    psi_m = eye + kernel.apply_cauchy(-1, sol.density)
    if np.min(np.abs(np.linalg.det(psi_p))) < 1e-12:
        raise SolveError("Psi+ singular at a node; inverse formula unusable")
    u = np.concatenate([b for b in v.values], axis=0)
    w_flat = u @ psi_p
    vals, off = [], 0
    for seg in kernel.contours.segments:
        vals.append(w_flat[off:off + seg.n])
        off += seg.n
    w = Density(tuple(vals))
    cp = kernel.apply_cauchy(+1, w)
    cm = kernel.apply_cauchy(-1, w)
    out = cp @ np.linalg.inv(psi_p) - cm @ np.linalg.inv(psi_m)
    vals, off = [], 0
    for seg in kernel.contours.segments:
        vals.append(out[off:off + seg.n])
        off += seg.n
    return Density(tuple(vals))


def density_moment(sol_or_kernel, density: Density) -> np.ndarray:
    """int_Gamma u(s) ds, entrywise (complex contour measure)."""
    kernel = sol_or_kernel.kernel if hasattr(sol_or_kernel, "kernel") else sol_or_kernel
    d = density.d
    total = np.zeros((d, d), dtype=complex)
    for kern, v in zip(kernel.kernels, density.values):
        total += np.tensordot(kern.complex_weights, v, axes=(0, 0))
    return total
