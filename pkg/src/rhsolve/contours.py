"""Oriented piecewise-smooth contours as Moebius images of [-1, 1].

Every segment is the image of the unit interval under a non-degenerate
Moebius map M(t) = (a t + b)/(c t + d).  Lines are affine maps (c = 0),
circular arcs genuinely use the pole.  Collocation grids are mapped
Chebyshev points of the second kind, ascending, endpoints exact.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    AmbiguousGeometryError,
    DegenerateScalingError,
    GeometryError,
    InvalidOrderError,
)


def chebyshev_points(n: int) -> np.ndarray:
    """Chebyshev points of the second kind, ascending from -1 to 1.

    Returns {-1, cos(pi (1 - 1/(n-1))), ..., cos(pi/(n-1)), 1}; endpoints
    are exact so junction points always appear in collocation grids.
    """
    if n < 2:
        raise InvalidOrderError(f"need at least 2 points, got n={n}")
    x = -np.cos(np.pi * np.arange(n) / (n - 1))
    x[0] = -1.0
    x[-1] = 1.0
    if n % 2 == 1:
        x[n // 2] = 0.0
    return x


@dataclass(frozen=True)
class MoebiusMap:
    """t -> (a t + b)/(c t + d) with a d - b c != 0."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        scale = max(abs(self.a), abs(self.b), abs(self.c), abs(self.d), 1e-300)
        if abs(det) <= 1e-14 * scale * scale:
            raise GeometryError("degenerate Moebius map (a d - b c = 0)")
        if self.c != 0:
            pole = -self.d / self.c
            # injectivity on [-1,1] requires the pole off the interval
            if abs(pole.imag) < 1e-12 and -1.0 - 1e-9 <= pole.real <= 1.0 + 1e-9:
                raise GeometryError(f"map pole {pole} lies on [-1, 1]")

    def __call__(self, t):
        t = np.asarray(t)
        return (self.a * t + self.b) / (self.c * t + self.d)

    def inverse(self, z):
        """Pull z back to the parameter plane: M(inverse(z)) = z.

        The pole image M(inf) = a/c maps to parameter infinity; downstream
        transform code handles that limit, so the division may overflow.
        """
        z = np.asarray(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.d * z - self.b) / (-self.c * z + self.a)

    def derivative(self, t):
        t = np.asarray(t)
        det = self.a * self.d - self.b * self.c
        return det / (self.c * t + self.d) ** 2

    @property
    def pole_param(self) -> complex:
        """Preimage of infinity (inf itself for affine maps)."""
        if self.c == 0:
            return complex(np.inf)
        return -self.d / self.c

    def scaled_shifted(self, alpha: complex, beta: complex) -> "MoebiusMap":
        """The map t -> alpha M(t) + beta, again in Moebius form."""
        return MoebiusMap(
            alpha * self.a + beta * self.c,
            alpha * self.b + beta * self.d,
            self.c,
            self.d,
        )

    def reversed(self) -> "MoebiusMap":
        """Compose with t -> -t (reverses traversal of the image)."""
        return MoebiusMap(-self.a, self.b, -self.c, self.d)

    @staticmethod
    def through_points(w_start: complex, w_mid: complex, w_end: complex) -> "MoebiusMap":
        """Unique Moebius map with M(-1), M(0), M(1) = given points."""
        A, C, B = complex(w_start), complex(w_mid), complex(w_end)
        if abs(B - A) < 1e-300:
            raise GeometryError("coincident endpoints")
        c = (2 * C - A - B) / (B - A)
        m = MoebiusMap(B * (c + 1) - C, C, c, 1.0)
        for t, w in ((-1.0, A), (0.0, C), (1.0, B)):
            if abs(m(t) - w) > 1e-9 * max(1.0, abs(w)):
                raise GeometryError("three-point construction failed")
        return m


@dataclass(frozen=True)
class ContourSegment:
    """One smooth oriented piece: the Moebius image of [-1, 1].

    nodes = map(chebyshev_points(n)) exactly; orientation is normalized to
    +1 at construction (a -1 request re-parameterizes the map by t -> -t).
    """

    map: MoebiusMap
    n: int
    orientation: int = 1
    nodes: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 2:
            raise InvalidOrderError(f"segment needs n >= 2 nodes, got {self.n}")
        if self.orientation not in (-1, 1):
            raise GeometryError("orientation must be +1 or -1")
        if self.orientation == -1:
            object.__setattr__(self, "map", self.map.reversed())
            object.__setattr__(self, "orientation", 1)
        nodes = np.asarray(self.map(chebyshev_points(self.n)), dtype=complex)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def start(self) -> complex:
        return complex(self.map(-1.0))

    @property
    def end(self) -> complex:
        return complex(self.map(1.0))

    @property
    def length_scale(self) -> float:
        """Crude arclength scale used for tolerances."""
        t = np.linspace(-1, 1, 17)
        pts = self.map(t)
        return float(np.sum(np.abs(np.diff(pts))))

    def with_order(self, n: int) -> "ContourSegment":
        return ContourSegment(self.map, n)

    def reversed(self) -> "ContourSegment":
        return ContourSegment(self.map.reversed(), self.n)

    def param_of(self, z):
        return self.map.inverse(z)

    def direction_at(self, t: float) -> complex:
        """Unit tangent in the direction of traversal."""
        d = complex(self.map.derivative(t))
        return d / abs(d)


def line_segment(z0: complex, z1: complex, n: int) -> ContourSegment:
    """Straight segment from z0 to z1."""
    a = (complex(z1) - complex(z0)) / 2
    b = (complex(z1) + complex(z0)) / 2
    return ContourSegment(MoebiusMap(a, b, 0.0, 1.0), n)


def arc_segment(center: complex, radius: float, ang0: float, ang1: float, n: int) -> ContourSegment:
    """Circular arc from angle ang0 to ang1 (radians, traversed monotonically).

    Arcs close to a half circle push the map pole toward the interval; keep
    individual arcs at 120 degrees or less and split circles into 3-4 arcs.
    """
    if abs(ang1 - ang0) > 1.05 * math.pi:
        raise GeometryError("arc longer than a half circle; split the circle into 2-4 arcs")
    zc = complex(center)
    w0 = zc + radius * cmath.exp(1j * ang0)
    wm = zc + radius * cmath.exp(1j * (ang0 + ang1) / 2)
    w1 = zc + radius * cmath.exp(1j * ang1)
    return ContourSegment(MoebiusMap.through_points(w0, wm, w1), n)


@dataclass(frozen=True)
class IncidentEnd:
    """One segment endpoint meeting a junction."""

    segment: int        # index into ContourSet.segments
    at_end: bool        # True: junction is the segment's end (t = +1)
    outward: bool       # True: junction is the start point (Def-style flag)
    away_angle: float   # direction of the segment leaving the junction

    @property
    def zero_sum_sign(self) -> int:
        """+1 for inward ends, -1 for outward starts."""
        return 1 if self.at_end else -1


@dataclass(frozen=True)
class Junction:
    point: complex
    incident: tuple  # of IncidentEnd, sorted counterclockwise by away_angle

    @property
    def multiplicity(self) -> int:
        return len(self.incident)


def _away_angle(seg: ContourSegment, at_end: bool) -> float:
    d = seg.direction_at(1.0 if at_end else -1.0)
    if at_end:
        d = -d
    return math.atan2(d.imag, d.real) % (2 * math.pi)


def detect_junctions(segments, tol: float = None):
    """Group segment endpoints within tol into junctions.

    Isolated endpoints get singleton entries.  Junctions closer together
    than 10 tol are rejected as ambiguous geometry.
    """
    ends = []
    maxmag = 1.0
    for i, seg in enumerate(segments):
        for at_end in (False, True):
            p = seg.end if at_end else seg.start
            ends.append((p, i, at_end))
            maxmag = max(maxmag, abs(p))
    if tol is None:
        tol = 1e-12 * maxmag
    if tol <= 0:
        raise GeometryError("junction tolerance must be positive")

    clusters = []  # (representative point, [(i, at_end), ...])
    for p, i, at_end in ends:
        for k, (q, members) in enumerate(clusters):
            if abs(p - q) <= tol:
                members.append((i, at_end))
                pts = [segments[j].end if e else segments[j].start for j, e in members]
                clusters[k] = (sum(pts) / len(pts), members)
                break
        else:
            clusters.append((p, [(i, at_end)]))

    for a in range(len(clusters)):
        for b in range(a + 1, len(clusters)):
            d = abs(clusters[a][0] - clusters[b][0])
            if d < 10 * tol:
                raise AmbiguousGeometryError(
                    f"junctions at {clusters[a][0]} and {clusters[b][0]} are only {d} apart"
                )

    junctions = []
    for q, members in clusters:
        inc = []
        for i, at_end in members:
            inc.append(
                IncidentEnd(
                    segment=i,
                    at_end=at_end,
                    outward=not at_end,
                    away_angle=_away_angle(segments[i], at_end),
                )
            )
        inc.sort(key=lambda e: (e.away_angle, e.segment))
        junctions.append(Junction(point=complex(q), incident=tuple(inc)))
    junctions.sort(key=lambda j: (j.point.real, j.point.imag))
    return junctions


@dataclass(frozen=True)
class ContourSet:
    """A full contour: segments plus junction metadata.

    scaling, when present, records (alpha, beta) per connected group for
    the scale-shift solver; it is bookkeeping only.
    """

    segments: tuple
    junctions: tuple = None
    scaling: tuple = None
    junction_tol: float = None

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if self.junctions is None:
            object.__setattr__(
                self, "junctions", tuple(detect_junctions(segs, self.junction_tol))
            )

    def __len__(self):
        return len(self.segments)

    @property
    def total_nodes(self) -> int:
        return sum(s.n for s in self.segments)

    def node_offsets(self):
        off = [0]
        for s in self.segments:
            off.append(off[-1] + s.n)
        return off

    def all_nodes(self) -> np.ndarray:
        return np.concatenate([s.nodes for s in self.segments])

    def with_orders(self, n) -> "ContourSet":
        """Same geometry with node count n (scalar or per-segment list)."""
        if np.isscalar(n):
            ns = [int(n)] * len(self.segments)
        else:
            ns = [int(v) for v in n]
            if len(ns) != len(self.segments):
                raise GeometryError("order list length mismatch")
        segs = tuple(s.with_order(k) for s, k in zip(self.segments, ns))
        return ContourSet(segs, scaling=self.scaling, junction_tol=self.junction_tol)

    def junction_of(self, seg_index: int, at_end: bool):
        for j in self.junctions:
            for e in j.incident:
                if e.segment == seg_index and e.at_end == at_end:
                    return j, e
        raise GeometryError("endpoint not found in junction table")


def scale_shift(omega: ContourSet, alpha: complex, beta: complex) -> ContourSet:
    """Image contour alpha * omega + beta with node counts preserved."""
    if alpha == 0:
        raise DegenerateScalingError("alpha = 0 collapses the contour")
    segs = tuple(
        ContourSegment(s.map.scaled_shifted(alpha, beta), s.n) for s in omega.segments
    )
    tol = omega.junction_tol
    if tol is not None:
        tol = tol * abs(alpha)
    return ContourSet(segs, scaling=omega.scaling, junction_tol=tol)
