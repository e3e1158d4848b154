"""Masked-grid Dirichlet solver, capacity, harmonic measures, gamma-gaps.

Grids are uniform with square cells over the domain's confining box; values
live at cell centers, indexed ``[i, j]`` for ``(x_i, y_j)``.  A node is solid
when its center lies in an obstacle (or beyond the outer boundary); fields on
solid nodes carry their Dirichlet data, so discrete gradients and energies
read correct boundary values.  Extension by zero beyond the box gives the
H^1_0 semantics of the confining disk D used throughout.

The 5-point Laplacian with node masking handles arbitrarily rough obstacles
uniformly; solves are conjugate gradient with an algebraic-multigrid
preconditioner, relative tolerance 1e-10.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import pyamg
import scipy.sparse as sp
from scipy.sparse.linalg import cg, splu
from scipy.spatial import cKDTree

from .defaults import DEFAULTS
from .geometry import DomainSequence, DomainSpec

FLUID = 0
OUTER = -1


class SolveError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class CapacityError(RuntimeError):
    pass


@dataclass
class MaskedGrid:
    """Uniform grid over ``box`` with fluid/solid node classification."""

    box: tuple[float, float, float, float]
    h: float
    mask: np.ndarray  # int16, 0 fluid, -1 outer solid, i>=1 obstacle i
    n_obstacles: int
    kind: str = "bounded"
    warnings: list[str] = field(default_factory=list)

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    @cached_property
    def xc(self) -> np.ndarray:
        return self.box[0] + (np.arange(self.shape[0]) + 0.5) * self.h

    @cached_property
    def yc(self) -> np.ndarray:
        return self.box[2] + (np.arange(self.shape[1]) + 0.5) * self.h

    @cached_property
    def X(self) -> np.ndarray:
        return np.broadcast_to(self.xc[:, None], self.shape)

    @cached_property
    def Y(self) -> np.ndarray:
        return np.broadcast_to(self.yc[None, :], self.shape)

    @cached_property
    def fluid(self) -> np.ndarray:
        return self.mask == FLUID

    @cached_property
    def interior_fluid(self) -> np.ndarray:
        """Fluid nodes whose four neighbors are fluid (grid edge excluded)."""
        f = self.fluid
        out = np.zeros_like(f)
        out[1:-1, 1:-1] = (
            f[1:-1, 1:-1] & f[2:, 1:-1] & f[:-2, 1:-1] & f[1:-1, 2:] & f[1:-1, :-2]
        )
        return out

    @cached_property
    def solver(self) -> "DirichletSolver":
        return DirichletSolver(self)

    @cached_property
    def _fluid_tree(self) -> cKDTree:
        pts = np.column_stack([self.X[self.fluid], self.Y[self.fluid]])
        return cKDTree(pts)

    @cached_property
    def _fluid_indices(self) -> np.ndarray:
        return np.argwhere(self.fluid)

    def nearest_fluid_node(self, pts: np.ndarray) -> np.ndarray:
        """(m, 2) integer indices of the fluid node nearest to each point."""
        _, idx = self._fluid_tree.query(pts)
        return self._fluid_indices[idx]

    def integrate(self, values: np.ndarray) -> float:
        """Grid quadrature of a nodal field over the fluid region."""
        return float(values[self.fluid].sum() * self.h**2)


def discretize(spec: DomainSpec, resolution: int) -> MaskedGrid:
    """Rasterize a domain: solid iff the cell center lies in an obstacle or
    beyond the outer boundary.  ``resolution`` counts cells along x; halving
    comes from doubling it.  Zero-thickness pieces (polylines, points) are
    kept visible as one-cell-wide solids."""
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    x0, x1, y0, y1 = spec.box
    h = (x1 - x0) / resolution
    ny = max(1, round((y1 - y0) / h))
    box = (x0, x1, y0, y0 + ny * h)
    xc = x0 + (np.arange(resolution) + 0.5) * h
    yc = y0 + (np.arange(ny) + 0.5) * h
    X, Y = np.meshgrid(xc, yc, indexing="ij")
    mask = spec.classify(X.ravel(), Y.ravel(), line_radius=h / 2).reshape(X.shape)

    grid = MaskedGrid(box=box, h=h, mask=mask, n_obstacles=spec.n_obstacles, kind=spec.kind)
    for idx, obs in enumerate(spec.obstacles, start=1):
        nodes = int((mask == idx).sum())
        if nodes == 0:
            grid.warnings.append(
                f"under-resolved obstacle {idx}: no solid nodes, capacity reads 0"
            )
            continue
        thin = False
        for piece in obs.pieces:
            if piece.kind == "polygon":
                g = piece.shapely_geometry()
                if g.buffer(-h).is_empty:
                    thin = True
        if thin:
            grid.warnings.append(f"under-resolved obstacle {idx}: thinner than 2h")
    for w in grid.warnings:
        warnings.warn(w)
    return grid


_SHIFTS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def _shift_view(a: np.ndarray, di: int, dj: int, fill) -> np.ndarray:
    """out[i, j] = a[i + di, j + dj] where that index exists, else ``fill``."""
    n0, n1 = a.shape
    out = np.full(a.shape, fill, dtype=a.dtype)
    out[max(0, -di) : n0 - max(0, di), max(0, -dj) : n1 - max(0, dj)] = a[
        max(0, di) : n0 + min(0, di), max(0, dj) : n1 + min(0, dj)
    ]
    return out


def _shifted(ids: np.ndarray, di: int, dj: int) -> np.ndarray:
    """Neighbor ids at offset (di, dj); -2 marks beyond-grid."""
    return _shift_view(ids, di, dj, fill=np.int64(-2))


class DirichletSolver:
    """Masked 5-point Laplacian with Dirichlet data on solid nodes and on the
    zero extension beyond the box; CG with an AMG preconditioner."""

    def __init__(self, grid: MaskedGrid, free: np.ndarray | None = None):
        self.grid = grid
        self.free = grid.fluid if free is None else free
        n = int(self.free.sum())
        if n == 0:
            raise SolveError("no free nodes to solve on")
        ids = np.full(grid.shape, -1, dtype=np.int64)
        ids[self.free] = np.arange(n)
        self.ids = ids
        h2 = grid.h**2

        rows, cols, vals = [], [], []
        bc_rows, bc_flat = [], []
        own = ids[self.free]
        for di, dj in _SHIFTS:
            nb = _shifted(ids, di, dj)[self.free]
            nb_flat = _shifted_flat(grid.shape, di, dj)[self.free]
            inside = nb >= 0
            rows.append(own[inside])
            cols.append(nb[inside])
            vals.append(np.full(inside.sum(), -1.0 / h2))
            dirich = (nb == -1)  # solid neighbor carries Dirichlet data
            bc_rows.append(own[dirich])
            bc_flat.append(nb_flat[dirich])
        rows.append(own)
        cols.append(own)
        vals.append(np.full(n, 4.0 / h2))
        A = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        )
        self.A = A
        self.B = sp.csr_matrix(
            (
                np.full(sum(len(r) for r in bc_rows), 1.0 / h2),
                (np.concatenate(bc_rows), np.concatenate(bc_flat)),
            ),
            shape=(n, grid.mask.size),
        )
        # pyamg's spectral-radius estimate draws from numpy's global RNG;
        # pin it so repeated runs build bit-identical hierarchies
        state = np.random.get_state()
        np.random.seed(0x5EED)
        try:
            self._ml = pyamg.smoothed_aggregation_solver(A, max_coarse=16)
        finally:
            np.random.set_state(state)
        self._M = self._ml.aspreconditioner(cycle="V")

    def solve(
        self,
        f: np.ndarray | float | None = None,
        bc: np.ndarray | None = None,
        rtol: float = DEFAULTS["cg_rtol"],
        maxiter: int = DEFAULTS["cg_maxiter"],
    ) -> np.ndarray:
        """Solve lap(psi) = f on free nodes with psi = bc on solid nodes and
        zero beyond the box; returns the full nodal array carrying bc."""
        n = self.A.shape[0]
        b = np.zeros(n)
        if f is not None:
            fa = np.broadcast_to(np.asarray(f, dtype=float), self.grid.shape)
            b -= fa[self.free]
        if bc is not None:
            b += self.B @ bc.ravel()
        if not b.any():
            x = np.zeros(n)
        else:
            x, info = cg(self.A, b, rtol=rtol, atol=0.0, maxiter=maxiter, M=self._M)
            if info != 0:
                res = float(np.linalg.norm(b - self.A @ x))
                raise SolveError(f"CG did not converge (info={info})", residual=res)
        out = np.zeros(self.grid.shape) if bc is None else np.array(bc, dtype=float)
        out[self.free] = x
        return out


def _shifted_flat(shape, di, dj) -> np.ndarray:
    flat = np.arange(shape[0] * shape[1], dtype=np.int64).reshape(shape)
    return _shift_view(flat, di, dj, fill=np.int64(0))


def solve_dirichlet(grid: MaskedGrid, f, rtol: float = DEFAULTS["cg_rtol"]) -> np.ndarray:
    """Solve the Dirichlet problem lap(psi) = f, psi = 0 on solid nodes."""
    return grid.solver.solve(f=f, rtol=rtol)


def harmonic_measure(grid: MaskedGrid, i: int) -> np.ndarray:
    """Harmonic field equal to 1 on obstacle i, 0 on the other boundary
    components; bounded domains only."""
    if grid.kind != "bounded":
        raise ValueError("harmonic measures require bounded domain")
    if not 1 <= i <= grid.n_obstacles:
        raise ValueError(f"obstacle index {i} out of range")
    bc = (grid.mask == i).astype(float)
    return grid.solver.solve(bc=bc)


def dirichlet_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Discrete Dirichlet inner product sum over edges of da*db, including
    edges to the zero extension beyond the box (h-independent in 2D)."""
    ap = np.pad(a, 1)
    bp = np.pad(b, 1)
    dax, dbx = np.diff(ap, axis=0), np.diff(bp, axis=0)
    day, dby = np.diff(ap, axis=1), np.diff(bp, axis=1)
    return float((dax * dbx).sum() + (day * dby).sum())


def dirichlet_energy(a: np.ndarray) -> float:
    return dirichlet_inner(a, a)


def node_capacity(grid: MaskedGrid, nodes: np.ndarray) -> float:
    """Discrete capacity of an arbitrary node set relative to the confining
    region: Dirichlet energy of the potential with v = 1 on the set, 0 on
    the outer boundary and beyond the box, harmonic in between."""
    if not nodes.any():
        return 0.0
    free = ~nodes & (grid.mask != OUTER)
    bc = nodes.astype(float)
    v = DirichletSolver(grid, free=free).solve(bc=bc)
    return dirichlet_energy(v)


def capacity(grid: MaskedGrid, i: int) -> float:
    """Dirichlet energy of the capacitary potential of obstacle i (other
    obstacles are ignored, matching the capacity-relative-to-the-box
    definition)."""
    if not 1 <= i <= grid.n_obstacles:
        raise ValueError(f"obstacle index {i} out of range")
    solid = grid.mask == i
    if not solid.any():
        warnings.warn(f"obstacle {i} has no solid nodes: capacity reads 0")
        return 0.0
    return node_capacity(grid, solid)


@dataclass
class HodgeBasis:
    """Harmonic measures, their Gram matrix P, coefficients C = -P^-1, and
    the unit-circulation harmonic streams psi^i = sum_j C[i, j] phi^j."""

    grid: MaskedGrid
    phi: list[np.ndarray]
    P: np.ndarray
    C: np.ndarray
    psi: list[np.ndarray]

    @property
    def k(self) -> int:
        return len(self.phi)


def gram_and_coefficients(grid: MaskedGrid, phis: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Gram matrix of the harmonic measures by the volume identity
    P_ij = sum grad(phi_i).grad(phi_j), and C = -P^-1."""
    k = len(phis)
    P = np.empty((k, k))
    for a in range(k):
        for b in range(a, k):
            P[a, b] = P[b, a] = dirichlet_inner(phis[a], phis[b])
    if np.linalg.cond(P) > DEFAULTS["condition_limit"]:
        raise CapacityError(
            "Gram matrix numerically singular: zero-capacity obstacle suspected"
        )
    C = -np.linalg.inv(P)
    return P, C


def build_hodge_basis(grid: MaskedGrid) -> HodgeBasis:
    if grid.n_obstacles == 0:
        return HodgeBasis(grid, [], np.zeros((0, 0)), np.zeros((0, 0)), [])
    phis = [harmonic_measure(grid, i) for i in range(1, grid.n_obstacles + 1)]
    P, C = gram_and_coefficients(grid, phis)
    psis = [sum(C[i, j] * phis[j] for j in range(len(phis))) for i in range(len(phis))]
    return HodgeBasis(grid, phis, P, C, psis)


@dataclass
class GammaGapResult:
    gaps: np.ndarray
    complement_counts: list[int]
    warnings: list[str]


def gamma_gap(seq: DomainSequence, f, resolution: int) -> GammaGapResult:
    """H^1_0(D) gaps |grad(psi_n - psi_limit)| for the Dirichlet problem with
    a fixed source, all domains rasterized on the common confining box
    (matched-resolution policy: only the masks differ)."""
    box = seq.limit.box
    for m in seq.members:
        if not np.allclose(m.box, box):
            raise ValueError("gamma_gap needs all domains confined in one box")
    notes = []
    counts = seq.complement_counts()
    if len(counts) >= 3 and all(b > a for a, b in zip(counts[:-1], counts[1:])):
        notes.append("Sverak hypothesis violated: complement component count grows")
        warnings.warn(notes[-1])

    def solve_on(spec):
        g = discretize(spec, resolution)
        fa = f(g.X, g.Y) if callable(f) else np.broadcast_to(float(f), g.shape)
        return g.solver.solve(f=fa)

    psi_lim = solve_on(seq.limit)
    gaps = np.array(
        [math.sqrt(dirichlet_energy(solve_on(m) - psi_lim)) for m in seq.members]
    )
    return GammaGapResult(gaps=gaps, complement_counts=counts, warnings=notes)


def poincare_constant(
    grid: MaskedGrid,
    window: tuple[float, float, float, float],
    rtol: float = DEFAULTS["eig_rtol"],
) -> float:
    """1/sqrt(lambda_1) for the smallest eigenvalue of the masked Laplacian
    on fluid nodes inside the window: Dirichlet toward solid nodes, natural
    (Neumann) at window cuts and at the open box edge of exterior grids.

    With no solid in the window the constant degenerates to the window-size
    Poincare constant (Dirichlet at the cuts), with a warning.
    """
    x0, x1, y0, y1 = window
    sel = (
        grid.fluid
        & (grid.X >= x0)
        & (grid.X <= x1)
        & (grid.Y >= y0)
        & (grid.Y <= y1)
    )
    if not sel.any():
        raise ValueError("window contains no fluid nodes")
    in_window = (
        (grid.X >= x0) & (grid.X <= x1) & (grid.Y >= y0) & (grid.Y <= y1)
    )
    has_obstacle = bool(((grid.mask != FLUID) & in_window).any())
    dirichlet_cuts = False
    if not has_obstacle:
        warnings.warn(
            "no obstacle in window: constant degenerates to the window-size "
            "Poincare constant"
        )
        dirichlet_cuts = True

    n = int(sel.sum())
    ids = np.full(grid.shape, -1, dtype=np.int64)
    ids[sel] = np.arange(n)
    h2 = grid.h**2
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    own = ids[sel]
    solid = grid.mask != FLUID
    for di, dj in _SHIFTS:
        nb = _shifted(ids, di, dj)[sel]
        nb_solid = _shifted_mask(solid, di, dj, fill=grid.kind == "bounded")[sel]
        inside = nb >= 0
        rows.append(own[inside])
        cols.append(nb[inside])
        vals.append(np.full(int(inside.sum()), -1.0 / h2))
        diag[inside] += 1.0 / h2
        # neighbor is solid (or beyond the box of a bounded grid): Dirichlet
        diag[(~inside) & nb_solid] += 1.0 / h2
        if dirichlet_cuts:
            diag[(~inside) & ~nb_solid] += 1.0 / h2
    rows.append(own)
    cols.append(own)
    vals.append(diag)
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsc()

    lu = splu(A)
    v = np.ones(n) / math.sqrt(n)
    lam_prev = None
    for _ in range(DEFAULTS["eig_maxiter"]):
        w = lu.solve(v)
        lam = float(v @ w / (w @ w))  # Rayleigh quotient of A at w
        nw = np.linalg.norm(w)
        if nw == 0:
            raise SolveError("inverse power iteration broke down")
        v = w / nw
        if lam_prev is not None and abs(lam - lam_prev) <= rtol * abs(lam):
            break
        lam_prev = lam
    if lam <= 0:
        raise SolveError("window eigenproblem returned a non-positive eigenvalue")
    return 1.0 / math.sqrt(lam)


def _shifted_mask(m: np.ndarray, di: int, dj: int, fill: bool) -> np.ndarray:
    return _shift_view(m, di, dj, fill=fill)
