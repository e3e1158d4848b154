"""Planar sets, Hausdorff metrics, and generators of approximating domains.

Conventions
-----------
Coordinates are float64 pairs ``(x, y)`` in abstract length units. A
:class:`CompactSet` is a finite union of closed pieces: filled simple
polygons, polylines (segments, arcs and other curves given as vertex
chains), and isolated points. Open sets are described by a
:class:`DomainSpec`: either a bounded region (simple outer polygon minus
obstacles) or the exterior of obstacles in the plane, together with a
confining box used for complement-based computations.

Set distances are evaluated on samples at a caller-chosen spacing and carry
an O(spacing) error; see :func:`hausdorff_compact`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import shapely
from scipy.spatial import cKDTree
from shapely.geometry import LineString, Point as ShapelyPoint, Polygon as ShapelyPolygon
from shapely.ops import nearest_points

from .defaults import DEFAULTS

POLYGON = "polygon"
POLYLINE = "polyline"
POINT = "point"

_FAMILIES = (
    "rugosity",
    "shrink_segment",
    "shrink_point",
    "thicken_arc",
    "closing_arc",
    "jordan_approx",
)


class GeometryError(ValueError):
    pass


def _as_coords(coords) -> np.ndarray:
    a = np.asarray(coords, dtype=float)
    if a.ndim == 1 and a.size == 2:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != 2 or not np.all(np.isfinite(a)):
        raise GeometryError("coordinates must be a finite (m, 2) array")
    return a


@dataclass(frozen=True)
class Piece:
    """One closed piece of a compact set."""

    kind: str
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", _as_coords(self.coords))
        if self.kind not in (POLYGON, POLYLINE, POINT):
            raise GeometryError(f"unknown piece kind {self.kind!r}")
        if self.kind == POLYGON and len(self.coords) < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        if self.kind == POLYGON and not ShapelyPolygon(self.coords).is_simple:
            raise GeometryError("polygon must be simple (non-self-intersecting)")
        if self.kind == POLYLINE and len(self.coords) < 2:
            raise GeometryError("polyline needs at least 2 vertices")
        if self.kind == POINT and len(self.coords) != 1:
            raise GeometryError("point piece holds exactly one coordinate")

    def shapely_geometry(self):
        if self.kind == POLYGON:
            return ShapelyPolygon(self.coords)
        if self.kind == POLYLINE:
            return LineString(self.coords)
        return ShapelyPoint(self.coords[0])

    def boundary_samples(self, spacing: float) -> np.ndarray:
        """Points along the piece boundary at most ``spacing`` apart."""
        if self.kind == POINT:
            return self.coords.copy()
        ring = self.coords
        if self.kind == POLYGON:
            ring = np.vstack([ring, ring[:1]])
        out = []
        for a, b in zip(ring[:-1], ring[1:]):
            seg = np.linalg.norm(b - a)
            n = max(1, int(math.ceil(seg / spacing)))
            t = np.arange(n) / n
            out.append(a[None, :] + t[:, None] * (b - a)[None, :])
        out.append(ring[-1:])
        return np.vstack(out)

    def filled_samples(self, spacing: float) -> np.ndarray:
        """Boundary samples plus, for polygons, an interior grid fill."""
        pts = [self.boundary_samples(spacing)]
        if self.kind == POLYGON:
            poly = self.shapely_geometry()
            x0, y0, x1, y1 = poly.bounds
            nx = max(1, int(math.ceil((x1 - x0) / spacing)))
            ny = max(1, int(math.ceil((y1 - y0) / spacing)))
            xs = x0 + (np.arange(nx) + 0.5) * (x1 - x0) / nx
            ys = y0 + (np.arange(ny) + 0.5) * (y1 - y0) / ny
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            inside = shapely.contains_xy(poly, X.ravel(), Y.ravel())
            if inside.any():
                pts.append(np.column_stack([X.ravel()[inside], Y.ravel()[inside]]))
        return np.vstack(pts)

    def to_json(self) -> dict:
        return {"type": self.kind, "coords": self.coords.tolist()}

    @staticmethod
    def from_json(d: dict) -> "Piece":
        return Piece(d["type"], np.asarray(d["coords"], dtype=float))


@dataclass(frozen=True)
class CompactSet:
    """Compact subset of the plane: disjoint closed pieces of one obstacle."""

    pieces: tuple[Piece, ...]

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if not pieces:
            raise GeometryError("empty compact set")
        object.__setattr__(self, "pieces", pieces)
        if len(pieces) > 1:
            geoms = [p.shapely_geometry() for p in pieces]
            for i in range(len(geoms)):
                for j in range(i + 1, len(geoms)):
                    if geoms[i].distance(geoms[j]) == 0.0:
                        raise GeometryError("pieces of one compact set must be disjoint")

    @staticmethod
    def polygon(coords) -> "CompactSet":
        return CompactSet((Piece(POLYGON, coords),))

    @staticmethod
    def polyline(coords) -> "CompactSet":
        return CompactSet((Piece(POLYLINE, coords),))

    @staticmethod
    def point(xy) -> "CompactSet":
        return CompactSet((Piece(POINT, xy),))

    @staticmethod
    def disk(center, radius: float, n: int = 64) -> "CompactSet":
        t = 2 * np.pi * np.arange(n) / n
        c = np.asarray(center, dtype=float)
        return CompactSet.polygon(c + radius * np.column_stack([np.cos(t), np.sin(t)]))

    def shapely_geometry(self):
        geoms = [p.shapely_geometry() for p in self.pieces]
        return geoms[0] if len(geoms) == 1 else shapely.union_all(geoms)

    def bounds(self) -> tuple[float, float, float, float]:
        return self.shapely_geometry().bounds

    def diameter(self) -> float:
        x0, y0, x1, y1 = self.bounds()
        return max(math.hypot(x1 - x0, y1 - y0), 1e-12)

    def sample(self, spacing: float) -> np.ndarray:
        return np.vstack([p.filled_samples(spacing) for p in self.pieces])

    def boundary_samples(self, spacing: float) -> np.ndarray:
        return np.vstack([p.boundary_samples(spacing) for p in self.pieces])

    def n_components(self) -> int:
        return len(self.pieces)

    def to_json(self) -> dict:
        return {"pieces": [p.to_json() for p in self.pieces]}

    @staticmethod
    def from_json(d: dict) -> "CompactSet":
        return CompactSet(tuple(Piece.from_json(p) for p in d["pieces"]))


@dataclass(frozen=True)
class DomainSpec:
    """Open set of the flow: bounded region minus obstacles, or an exterior.

    ``box`` confines the domain for Hausdorff/complement computations and is
    the grid extent used by the elliptic solvers.
    """

    kind: str
    obstacles: tuple[CompactSet, ...]
    box: tuple[float, float, float, float]
    outer: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("bounded", "exterior"):
            raise GeometryError(f"unknown domain kind {self.kind!r}")
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        x0, x1, y0, y1 = self.box
        if not (x1 > x0 and y1 > y0):
            raise GeometryError("degenerate confining box")
        if self.kind == "bounded":
            if self.outer is None:
                raise GeometryError("bounded domain needs an outer polygon")
            object.__setattr__(self, "outer", _as_coords(self.outer))
            poly = ShapelyPolygon(self.outer)
            if not poly.is_simple:
                raise GeometryError("outer boundary must be a simple polygon")
            for obs in self.obstacles:
                g = obs.shapely_geometry()
                if not poly.contains(g):
                    raise GeometryError("obstacles must lie strictly inside the outer boundary")
            ox0, oy0, ox1, oy1 = poly.bounds
            if ox0 < x0 - 1e-12 or ox1 > x1 + 1e-12 or oy0 < y0 - 1e-12 or oy1 > y1 + 1e-12:
                raise GeometryError("outer boundary must lie inside the confining box")
        else:
            if self.outer is not None:
                raise GeometryError("exterior domain has no outer polygon")

    @property
    def n_obstacles(self) -> int:
        return len(self.obstacles)

    def complement_components(self) -> int:
        """Connected components of box-minus-domain (the Sverak count)."""
        k = sum(obs.n_components() for obs in self.obstacles)
        return k + 1 if self.kind == "bounded" else k

    def classify(self, x: np.ndarray, y: np.ndarray, line_radius: float) -> np.ndarray:
        """Mask codes for points: 0 fluid, -1 beyond outer boundary, i >= 1
        inside obstacle i.  Polyline/point pieces count as solid within
        ``line_radius``."""
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        out = np.zeros(x.shape, dtype=np.int16)
        if self.kind == "bounded":
            poly = ShapelyPolygon(self.outer)
            shapely.prepare(poly)
            out[~shapely.contains_xy(poly, x, y)] = -1
        for idx, obs in enumerate(self.obstacles, start=1):
            hit = np.zeros(x.shape, dtype=bool)
            for piece in obs.pieces:
                g = piece.shapely_geometry()
                if piece.kind == POLYGON:
                    shapely.prepare(g)
                    hit |= shapely.contains_xy(g, x, y)
                    # capture the boundary itself at grid precision
                    bx0, by0, bx1, by1 = g.bounds
                else:
                    bx0, by0, bx1, by1 = g.bounds
                if piece.kind != POLYGON or line_radius > 0:
                    r = line_radius
                    cand = (
                        (x >= bx0 - r) & (x <= bx1 + r) & (y >= by0 - r) & (y <= by1 + r)
                    )
                    if piece.kind != POLYGON and cand.any():
                        pts = shapely.points(x[cand], y[cand])
                        hit[cand] |= shapely.dwithin(pts, g, r)
            out[hit & (out == 0)] = idx
        return out

    def to_json(self) -> dict:
        d = {
            "kind": self.kind,
            "box": list(self.box),
            "obstacles": [o.to_json() for o in self.obstacles],
        }
        if self.outer is not None:
            d["outer"] = self.outer.tolist()
        return d

    @staticmethod
    def from_json(d: dict) -> "DomainSpec":
        return DomainSpec(
            kind=d["kind"],
            obstacles=tuple(CompactSet.from_json(o) for o in d["obstacles"]),
            box=tuple(d["box"]),
            outer=np.asarray(d["outer"], dtype=float) if "outer" in d else None,
        )


# ---------------------------------------------------------------------------
# Hausdorff distances
# ---------------------------------------------------------------------------


def _directed(a: np.ndarray, b: np.ndarray) -> float:
    return float(cKDTree(b).query(a)[0].max())


def hausdorff_compact(k1: CompactSet, k2: CompactSet, spacing: float | None = None) -> float:
    """Hausdorff distance between compact sets, on samples at ``spacing``.

    max(rho(K1, K2), rho(K2, K1)) with rho the directed sup-distance; error
    is O(spacing).
    """
    if not isinstance(k1, CompactSet) or not isinstance(k2, CompactSet):
        raise GeometryError("empty compact set" if not k1 or not k2 else "expected CompactSet")
    if spacing is None:
        spacing = max(k1.diameter(), k2.diameter()) * DEFAULTS["hausdorff_rel_spacing"]
    a, b = k1.sample(spacing), k2.sample(spacing)
    return max(_directed(a, b), _directed(b, a))


def _complement_samples(spec: DomainSpec, box, spacing: float) -> np.ndarray:
    """Sample points of box-minus-domain: solid grid fill plus boundary
    chains (so zero-thickness obstacles are seen)."""
    x0, x1, y0, y1 = box
    nx = max(2, int(math.ceil((x1 - x0) / spacing)))
    ny = max(2, int(math.ceil((y1 - y0) / spacing)))
    xs = x0 + (np.arange(nx) + 0.5) * (x1 - x0) / nx
    ys = y0 + (np.arange(ny) + 0.5) * (y1 - y0) / ny
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    codes = spec.classify(X.ravel(), Y.ravel(), line_radius=0.0)
    parts = [np.column_stack([X.ravel(), Y.ravel()])[codes != 0]]
    for obs in spec.obstacles:
        parts.append(obs.boundary_samples(spacing))
    if spec.kind == "bounded":
        parts.append(Piece(POLYGON, spec.outer).boundary_samples(spacing))
    pts = np.vstack([p for p in parts if len(p)])
    keep = (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
    pts = pts[keep]
    if len(pts) == 0:
        # complement of an all-fluid domain in its own box: the box frame
        t = np.linspace(0, 1, 4 * nx)
        frame = np.vstack(
            [
                np.column_stack([x0 + t * (x1 - x0), np.full_like(t, y0)]),
                np.column_stack([x0 + t * (x1 - x0), np.full_like(t, y1)]),
                np.column_stack([np.full_like(t, x0), y0 + t * (y1 - y0)]),
                np.column_stack([np.full_like(t, x1), y0 + t * (y1 - y0)]),
            ]
        )
        return frame
    return pts


def hausdorff_open(
    o1: DomainSpec,
    o2: DomainSpec,
    box: tuple[float, float, float, float] | None = None,
    spacing: float | None = None,
) -> float:
    """Hausdorff distance between confined open sets: d_H of their
    complements in ``box``.  Independent of enlarging the box."""
    if box is None:
        b1, b2 = o1.box, o2.box
        box = (min(b1[0], b2[0]), max(b1[1], b2[1]), min(b1[2], b2[2]), max(b1[3], b2[3]))
    x0, x1, y0, y1 = box
    for spec in (o1, o2):
        sx0, sx1, sy0, sy1 = spec.box
        if sx0 < x0 - 1e-9 or sx1 > x1 + 1e-9 or sy0 < y0 - 1e-9 or sy1 > y1 + 1e-9:
            raise GeometryError("domain not contained in the given box")
    if spacing is None:
        spacing = max(x1 - x0, y1 - y0) * 2 * DEFAULTS["hausdorff_rel_spacing"]
    a = _complement_samples(o1, box, spacing)
    b = _complement_samples(o2, box, spacing)
    return max(_directed(a, b), _directed(b, a))


# ---------------------------------------------------------------------------
# Reducing the complement component count
# ---------------------------------------------------------------------------


def simply_connectify(spec: DomainSpec, eps: float) -> DomainSpec:
    """Open one obstacle to the outer complement through a straight cut of
    width <= eps/2, dropping the complement component count by one.

    The cut runs from the outer boundary to the nearest obstacle (ties broken
    by lowest obstacle index); the obstacle merges with the unbounded
    complement component.  Already simply connected input is returned
    unchanged.
    """
    if spec.kind != "bounded":
        raise GeometryError("simply_connectify expects a bounded polygonal domain")
    if spec.n_obstacles == 0:
        return spec
    for obs in spec.obstacles:
        for p in obs.pieces:
            if p.kind != POLYGON:
                raise GeometryError("simply_connectify expects polygonal obstacles")

    outer_poly = ShapelyPolygon(spec.outer)
    outer_ring = outer_poly.exterior
    geoms = [o.shapely_geometry() for o in spec.obstacles]
    dists = [outer_ring.distance(g) for g in geoms]
    target = int(np.argmin(dists))

    p_out, p_obs = nearest_points(outer_ring, geoms[target])
    cut = LineString([p_out, p_obs])
    # extend slightly past both ends so the strip genuinely joins the parts
    dvec = np.array(p_obs.coords[0]) - np.array(p_out.coords[0])
    L = np.linalg.norm(dvec)
    if L == 0:
        raise GeometryError("obstacle touches the outer boundary")
    dvec = dvec / L
    a = np.array(p_out.coords[0]) - dvec * eps
    b = np.array(p_obs.coords[0]) + dvec * eps
    strip = LineString([a, b]).buffer(eps / 4, cap_style="flat")

    domain = outer_poly
    for g in geoms:
        domain = domain.difference(g)
    new_domain = domain.difference(strip)
    if new_domain.geom_type == "MultiPolygon":
        new_domain = max(new_domain.geoms, key=lambda g: g.area)
    obstacles = tuple(
        CompactSet.polygon(np.asarray(ring.coords)[:-1]) for ring in new_domain.interiors
    )
    result = DomainSpec(
        kind="bounded",
        outer=np.asarray(new_domain.exterior.coords)[:-1],
        obstacles=obstacles,
        box=spec.box,
    )
    if result.complement_components() != spec.complement_components() - 1:
        raise GeometryError("cut failed to merge exactly one complement component")
    return result


# ---------------------------------------------------------------------------
# Approximating families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DomainSequence:
    """A family n -> domain converging in the Hausdorff sense to a limit."""

    family: str
    params: dict
    indices: tuple[int, ...]
    members: tuple[DomainSpec, ...]
    limit: DomainSpec
    probe_box: tuple[float, float, float, float]

    def complement_counts(self) -> list[int]:
        return [m.complement_components() for m in self.members]

    def hausdorff_to_limit(self, spacing: float | None = None) -> np.ndarray:
        return np.array(
            [hausdorff_open(m, self.limit, self.limit.box, spacing) for m in self.members]
        )

    def verify(self, spacing: float | None = None, slack: float = 1.05) -> np.ndarray:
        """Check non-increasing Hausdorff distance to the limit; returns the
        measured distances."""
        d = self.hausdorff_to_limit(spacing)
        if np.any(d[1:] > slack * d[:-1] + 1e-12):
            raise GeometryError(f"family {self.family}: Hausdorff distances not decreasing: {d}")
        counts = self.complement_counts()
        if len(counts) >= 3 and all(b > a for a, b in zip(counts[:-1], counts[1:])):
            warnings.warn("complement component count grows along the family "
                          "(Sverak hypothesis at risk)")
        return d

    def to_json(self) -> dict:
        return {"family": self.family, "params": self.params, "n": list(self.indices)}


def _arc_points(radius, a0, a1, n, center=(0.0, 0.0)):
    t = np.linspace(a0, a1, n)
    c = np.asarray(center, dtype=float)
    return c + radius * np.column_stack([np.cos(t), np.sin(t)])


def _square(half):
    return np.array([[-half, -half], [half, -half], [half, half], [-half, half]])


def _rugosity(n, alpha):
    eps = 1.0 / n
    amp = eps**alpha
    lx, ly = math.pi, 1.0
    if amp >= 0.4 * ly:
        raise GeometryError(f"rugosity amplitude {amp} too large for the channel (need n >= 2)")
    xs = np.linspace(0.0, lx, max(64, int(8 * lx / (2 * math.pi * eps)) * 8 + 1))
    wall = np.column_stack([xs, amp * np.cos(xs / eps)])
    outer = np.vstack([wall, [[lx, ly], [0.0, ly]]])
    return DomainSpec("bounded", (), (0.0, lx, -0.45, ly), outer=outer)


def _rugosity_limit():
    lx, ly = math.pi, 1.0
    outer = np.array([[0.0, 0.0], [lx, 0.0], [lx, ly], [0.0, ly]])
    return DomainSpec("bounded", (), (0.0, lx, -0.45, ly), outer=outer)


_SEGMENT = np.array([[-0.25, 0.0], [0.25, 0.0]])


def _tube(path: np.ndarray, width: float) -> CompactSet:
    poly = LineString(path).buffer(width / 2, quad_segs=8)
    return CompactSet.polygon(np.asarray(poly.exterior.coords)[:-1])


def _box_domain(obstacles, half=1.0) -> DomainSpec:
    return DomainSpec(
        "bounded", tuple(obstacles), (-half, half, -half, half), outer=_square(half)
    )


_ARC = _arc_points(0.55, 0.0, math.pi, 129)


def _family_member(family, n, params):
    alpha = params.get("alpha", 2.0)
    if family == "rugosity":
        return _rugosity(n, alpha)
    if family == "shrink_segment":
        return _box_domain([_tube(_SEGMENT, 2.0**-n)])
    if family == "shrink_point":
        return _box_domain([CompactSet.disk((0.0, 0.0), 2.0**-n, n=32)])
    if family == "thicken_arc":
        return _box_domain([_tube(_ARC, 2.0**-n)])
    if family == "closing_arc":
        gap = 1.0 / n
        arc = _arc_points(0.5, gap / 2, 2 * math.pi - gap / 2, 257)
        return DomainSpec("exterior", (CompactSet.polyline(arc),), (-1.0, 1.0, -1.0, 1.0))
    if family == "jordan_approx":
        r = 1.0 - 1.0 / (n + 1)
        t = np.linspace(0, 2 * math.pi, 257)[:-1]
        z = r * np.exp(1j * t)
        w = z + 0.15 * z**3
        outer = np.column_stack([w.real, w.imag])
        return DomainSpec("bounded", (), (-1.25, 1.25, -1.25, 1.25), outer=outer)
    raise GeometryError(f"unknown family {family!r}")


def _family_limit(family, params):
    if family == "rugosity":
        return _rugosity_limit()
    if family == "shrink_segment":
        return _box_domain([CompactSet.polyline(_SEGMENT)])
    if family == "shrink_point":
        return _box_domain([CompactSet.point((0.0, 0.0))])
    if family == "thicken_arc":
        return _box_domain([CompactSet.polyline(_ARC)])
    if family == "closing_arc":
        ring = _arc_points(0.5, 0.0, 2 * math.pi, 257)
        return DomainSpec("exterior", (CompactSet.polyline(ring),), (-1.0, 1.0, -1.0, 1.0))
    if family == "jordan_approx":
        t = np.linspace(0, 2 * math.pi, 257)[:-1]
        z = np.exp(1j * t)
        w = z + 0.15 * z**3
        outer = np.column_stack([w.real, w.imag])
        return DomainSpec("bounded", (), (-1.25, 1.25, -1.25, 1.25), outer=outer)
    raise GeometryError(f"unknown family {family!r}")


_PROBE_BOXES = {
    "rugosity": (0.25 * math.pi, 0.75 * math.pi, 0.35, 0.85),
    "shrink_segment": (-0.6, 0.6, 0.25, 0.75),
    "shrink_point": (0.3, 0.75, -0.25, 0.25),
    "thicken_arc": (-0.45, 0.45, -0.8, -0.25),
    "closing_arc": (0.7, 0.95, -0.2, 0.2),
    "jordan_approx": (-0.35, 0.35, -0.35, 0.35),
}


def make_sequence(
    family: str,
    n_max: int,
    indices: list[int] | None = None,
    verify: bool = True,
    **params,
) -> DomainSequence:
    """Build one of the named approximating families.

    ``indices`` selects which members n to materialize (default 1..n_max,
    starting from 2 for rugosity where n=1 degenerates).
    """
    if family not in _FAMILIES:
        raise GeometryError(f"unknown family {family!r}")
    if n_max < 2:
        raise GeometryError("n_max must be at least 2")
    if indices is None:
        start = 2 if family == "rugosity" else 1
        indices = list(range(start, n_max + 1))
    members = tuple(_family_member(family, n, params) for n in indices)
    seq = DomainSequence(
        family=family,
        params=dict(params),
        indices=tuple(indices),
        members=members,
        limit=_family_limit(family, params),
        probe_box=_PROBE_BOXES[family],
    )
    if verify:
        seq.verify()
    return seq
