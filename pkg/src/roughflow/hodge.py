"""Velocity assembly from vorticity and circulations; weak-form diagnostics.

A velocity field is always built as a perpendicular gradient of a stream
function, so tangency (stream constant on each boundary component) and the
divergence-free property hold by construction rather than by penalty.

Stencils are centered differences.  Their composition
``curl(perp_grad(psi))`` therefore equals the spacing-2h five-point Laplacian
``laplacian_2h(psi)`` exactly (same floating-point operations), which the
tests check bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .defaults import DEFAULTS
from .elliptic import FLUID, HodgeBasis, MaskedGrid, _shift_view, solve_dirichlet


class HodgeError(ValueError):
    pass


def _dx(a: np.ndarray, h: float) -> np.ndarray:
    """Centered x-derivative, zero extension beyond the grid."""
    return (_shift_view(a, 1, 0, 0.0) - _shift_view(a, -1, 0, 0.0)) / (2 * h)


def _dy(a: np.ndarray, h: float) -> np.ndarray:
    return (_shift_view(a, 0, 1, 0.0) - _shift_view(a, 0, -1, 0.0)) / (2 * h)


def perp_grad(grid: MaskedGrid, psi: np.ndarray) -> np.ndarray:
    """u = (-d_y psi, d_x psi) on fluid nodes (zero on solid).

    The stencil reads the Dirichlet values carried on solid nodes, so the
    field is consistent up to the masked boundary.
    """
    u = np.stack([-_dy(psi, grid.h), _dx(psi, grid.h)])
    u[:, ~grid.fluid] = 0.0
    return u


def _deep_fluid(grid: MaskedGrid, margin: int) -> np.ndarray:
    """Fluid nodes at Manhattan distance >= margin from any non-fluid node
    (grid edge included)."""
    plus = ndimage.generate_binary_structure(2, 1)
    return ndimage.binary_erosion(grid.fluid, structure=plus, iterations=margin, border_value=0)


def curl(grid: MaskedGrid, u: np.ndarray, margin: int = 5) -> np.ndarray:
    """d_x u2 - d_y u1 on fluid nodes.

    Centered differences are trusted only ``margin`` cells away from solid:
    the discrete stream has grid-scale kinks along staircase boundaries, and
    the composed stencil turns them into O(1) spurious curl there.  The
    kinks decay like exp(-d/h), so nodes inside the margin copy the nearest
    trusted value instead.
    """
    if u.shape[1:] != grid.shape:
        raise HodgeError("velocity field does not match the grid")
    w = _dx(u[1], grid.h) - _dy(u[0], grid.h)
    w[~grid.fluid] = 0.0
    deep = _deep_fluid(grid, margin)
    layer = grid.fluid & ~deep
    if layer.any():
        if deep.any():
            pts = np.column_stack([grid.X[deep], grid.Y[deep]])
            tree = cKDTree(pts)
            q = np.column_stack([grid.X[layer], grid.Y[layer]])
            _, idx = tree.query(q)
            w[layer] = w[deep][idx]
        else:
            w[layer] = 0.0
    return w


def laplacian_2h(grid: MaskedGrid, psi: np.ndarray) -> np.ndarray:
    """Five-point Laplacian at spacing 2h, written as the composition of the
    centered stencils (bitwise identical to curl(perp_grad(psi)))."""
    h = grid.h
    dxp = (_shift_view(psi, 2, 0, 0.0) - psi) / (2 * h)
    dxm = (psi - _shift_view(psi, -2, 0, 0.0)) / (2 * h)
    dyp = (_shift_view(psi, 0, 2, 0.0) - psi) / (2 * h)
    dym = (psi - _shift_view(psi, 0, -2, 0.0)) / (2 * h)
    return (dxp - dxm) / (2 * h) + (dyp - dym) / (2 * h)


def divergence(grid: MaskedGrid, u: np.ndarray) -> np.ndarray:
    return _dx(u[0], grid.h) + _dy(u[1], grid.h)


# ---------------------------------------------------------------------------
# Cutoffs and weak circulations
# ---------------------------------------------------------------------------


@dataclass
class CutoffField:
    """Plateau cutoff around one obstacle: 1 within distance eps, 0 beyond
    2*eps, quintic ramp between."""

    index: int
    eps: float
    chi: np.ndarray


def cutoff_field(grid: MaskedGrid, i: int, eps: float) -> CutoffField:
    if not 1 <= i <= grid.n_obstacles:
        raise HodgeError(f"obstacle index {i} out of range")
    solid = grid.mask == i
    if not solid.any():
        raise HodgeError(f"obstacle {i} has no solid nodes")
    pts = np.column_stack([grid.X[solid], grid.Y[solid]])
    tree = cKDTree(pts)
    d = tree.query(np.column_stack([grid.X.ravel(), grid.Y.ravel()]))[0].reshape(grid.shape)
    d[solid] = 0.0
    s = np.clip((d - eps) / eps, 0.0, 1.0)
    chi = 1.0 - (10 * s**3 - 15 * s**4 + 6 * s**5)
    support = d < 2 * eps
    other_solid = (grid.mask != FLUID) & ~solid
    if (support & other_solid).any():
        raise HodgeError(
            f"cutoff of width {eps} around obstacle {i} reaches another boundary component"
        )
    return CutoffField(index=i, eps=eps, chi=chi)


def weak_circulation(grid: MaskedGrid, u: np.ndarray, omega: np.ndarray, chi: CutoffField) -> float:
    """gamma = -int(chi * omega) - int(u . perp_grad(chi)) over the fluid.

    Equals the line-integral circulation for smooth fields; the value is
    independent of the cutoff width once the ramp is resolved.
    """
    c = chi.chi
    gx = -_dy(c, grid.h)
    gy = _dx(c, grid.h)
    term1 = grid.integrate(c * omega)
    term2 = grid.integrate(u[0] * gx + u[1] * gy)
    return -term1 - term2


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


@dataclass
class FlowState:
    """One snapshot: vorticity, circulations, harmonic coefficients, and the
    assembled velocity u = perp_grad(psi0 + sum_i alpha_i psi_i)."""

    t: float
    omega: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    u: np.ndarray
    psi: np.ndarray | None = None


def assemble_velocity(
    grid: MaskedGrid,
    omega: np.ndarray,
    gamma,
    basis: HodgeBasis,
    t: float = 0.0,
) -> FlowState:
    """Velocity with curl u = omega and weak circulations gamma.

    alpha_i = int(phi_i * omega) + gamma_i; the stream is the Dirichlet
    solution for omega plus the alpha-weighted harmonic streams.
    """
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    if basis.k != len(gamma):
        raise HodgeError(f"got {len(gamma)} circulations for {basis.k} obstacles")
    psi = solve_dirichlet(grid, omega)
    alpha = np.array(
        [grid.integrate(basis.phi[i] * omega) + gamma[i] for i in range(basis.k)]
    )
    for i in range(basis.k):
        psi = psi + alpha[i] * basis.psi[i]
    u = perp_grad(grid, psi)
    return FlowState(t=t, omega=omega, gamma=gamma, alpha=alpha, u=u, psi=psi)


def energy(grid: MaskedGrid, u: np.ndarray) -> float:
    """Grid quadrature of |u|^2 over the fluid."""
    return grid.integrate(u[0] ** 2 + u[1] ** 2)


def lq_norm(grid: MaskedGrid, omega: np.ndarray, q) -> float:
    if q == math.inf:
        vals = np.abs(omega[grid.fluid])
        return float(vals.max()) if vals.size else 0.0
    if q < 1:
        raise HodgeError("L^q norms require q >= 1")
    return float(grid.integrate(np.abs(omega) ** q) ** (1.0 / q))


def l2_fluid(grid: MaskedGrid, u: np.ndarray, region: np.ndarray | None = None) -> float:
    """L^2 norm of a vector field over the fluid (optionally windowed)."""
    sel = grid.fluid if region is None else (grid.fluid & region)
    return math.sqrt(float(((u[0] ** 2 + u[1] ** 2)[sel]).sum()) * grid.h**2)


# ---------------------------------------------------------------------------
# Divergence-free space-time test fields and the weak Euler residual
# ---------------------------------------------------------------------------


class BumpTestField:
    """phi(t, x) = s(t) * perp_grad(b(x)): divergence free, compactly
    supported in the ball of radius r0 around the center and in t < t1.

    b = (1 - rho^2/r0^2)^4 inside the ball, s = (1 - (t/t1)^2)^3 for t < t1;
    all derivatives are closed-form polynomials.
    """

    def __init__(self, center=(0.0, 0.0), r0=0.5, t1=1.0, amplitude=1.0):
        self.center = np.asarray(center, dtype=float)
        self.r0 = float(r0)
        self.t1 = float(t1)
        self.amplitude = float(amplitude)

    def _s(self, t):
        tau = t / self.t1
        return self.amplitude * np.where(np.abs(tau) < 1, (1 - tau**2) ** 3, 0.0)

    def _ds(self, t):
        tau = t / self.t1
        return self.amplitude * np.where(
            np.abs(tau) < 1, -6 * tau * (1 - tau**2) ** 2 / self.t1, 0.0
        )

    def _bump_parts(self, X, Y):
        x = X - self.center[0]
        y = Y - self.center[1]
        v = (x**2 + y**2) / self.r0**2
        inside = v < 1
        q1 = np.where(inside, -4 * (1 - v) ** 3, 0.0) / self.r0**2  # dq/dv
        q2 = np.where(inside, 12 * (1 - v) ** 2, 0.0) / self.r0**4  # d2q/dv2
        return x, y, q1, q2

    def eval(self, t, X, Y) -> np.ndarray:
        x, y, q1, _ = self._bump_parts(X, Y)
        return self._s(t) * np.stack([-2 * y * q1, 2 * x * q1])

    def dt(self, t, X, Y) -> np.ndarray:
        x, y, q1, _ = self._bump_parts(X, Y)
        return self._ds(t) * np.stack([-2 * y * q1, 2 * x * q1])

    def grad(self, t, X, Y) -> np.ndarray:
        """grad[a, b] = d phi_a / d x_b."""
        x, y, q1, q2 = self._bump_parts(X, Y)
        s = self._s(t)
        g = np.empty((2, 2) + np.shape(X))
        g[0, 0] = -4 * x * y * q2
        g[0, 1] = -2 * (q1 + 2 * y**2 * q2)
        g[1, 0] = 2 * (q1 + 2 * x**2 * q2)
        g[1, 1] = 4 * x * y * q2
        return s * g

    def support_mask(self, grid: MaskedGrid) -> np.ndarray:
        x = grid.X - self.center[0]
        y = grid.Y - self.center[1]
        return (x**2 + y**2) < self.r0**2


def canonical_test_fields(scale: float = 1.0, t1: float = 1.0) -> list[BumpTestField]:
    """The three stock space-time test bumps used by the residual checks."""
    return [
        BumpTestField(center=(0.0, 0.0), r0=0.55 * scale, t1=t1),
        BumpTestField(center=(0.2 * scale, 0.1 * scale), r0=0.4 * scale, t1=0.8 * t1),
        BumpTestField(center=(-0.15 * scale, 0.2 * scale), r0=0.35 * scale, t1=t1, amplitude=0.7),
    ]


def euler_weak_residual(grid: MaskedGrid, states: list[FlowState], test: BumpTestField) -> float:
    """| int int (u . dphi/dt + (u x u) : grad phi) + int u0 . phi(0) |.

    Space by grid quadrature, time by the trapezoid rule over the snapshot
    times; vanishes to first order in (h, dt) for true solutions.
    """
    if len(states) < 2:
        raise HodgeError("need at least two snapshots")
    sup = test.support_mask(grid)
    if (sup & (grid.mask != FLUID)).any():
        raise HodgeError("test field support touches solid nodes")
    times = np.array([s.t for s in states])
    vals = np.empty(len(states))
    for m, st in enumerate(states):
        dphi = test.dt(st.t, grid.X, grid.Y)
        gphi = test.grad(st.t, grid.X, grid.Y)
        conv = (
            st.u[0] * st.u[0] * gphi[0, 0]
            + st.u[0] * st.u[1] * gphi[0, 1]
            + st.u[1] * st.u[0] * gphi[1, 0]
            + st.u[1] * st.u[1] * gphi[1, 1]
        )
        vals[m] = grid.integrate(st.u[0] * dphi[0] + st.u[1] * dphi[1] + conv)
    phi0 = test.eval(states[0].t, grid.X, grid.Y)
    init = grid.integrate(states[0].u[0] * phi0[0] + states[0].u[1] * phi0[1])
    return abs(float(np.trapezoid(vals, times)) + init)
