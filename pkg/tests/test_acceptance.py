"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
report.  Tolerances are pinned here and nowhere else.
"""

import math
import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from roughflow.conformal import (
    VortexEnsemble,
    biot_savart_exterior,
    caratheodory_gap,
    ellipse_map,
    identity_map,
    joukowski_map,
    support_growth_constant,
)
from roughflow.elliptic import build_hodge_basis, capacity, discretize, gamma_gap
from roughflow.experiments import arc_flow_study, capacity_dichotomy_study, domain_continuity_study
from roughflow.geometry import CompactSet, DomainSpec, make_sequence
from roughflow.hodge import (
    assemble_velocity,
    canonical_test_fields,
    curl,
    cutoff_field,
    euler_weak_residual,
    l2_fluid,
    perp_grad,
    weak_circulation,
)
from roughflow.transport import run_exterior, run_grid
from conftest import circle_coords

CAP_EXACT = 2 * math.pi / math.log(4)


def criterion(name, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f"  ({detail})"
    print("\n" + line)
    assert ok, line


def bump(X, Y, cx, cy, r0, amp=1.0):
    v = ((X - cx) ** 2 + (Y - cy) ** 2) / r0**2
    return amp * np.where(v < 1, (1 - v) ** 3, 0.0)


def test_capacity_oracle():
    """capacity(disk r=1/4 in disk R=1) within 2% of 2 pi / ln 4 at h=1/256."""
    t0 = time.perf_counter()
    spec = DomainSpec(
        "bounded", (CompactSet.disk((0, 0), 0.25, n=128),), (-1, 1, -1, 1),
        outer=circle_coords(),
    )
    grid = discretize(spec, 512)  # box width 2 at 512 cells: h = 1/256
    cap = capacity(grid, 1)
    elapsed = time.perf_counter() - t0
    rel = abs(cap - CAP_EXACT) / CAP_EXACT
    criterion(
        "capacity oracle (2%, h=1/256, <30s)",
        rel <= 0.02 and elapsed < 30,
        f"cap={cap:.4f} vs {CAP_EXACT:.4f}, rel={rel:.3%}, {elapsed:.1f}s",
    )


def test_capacity_dichotomy():
    """Point capacities strictly decreasing toward 0 (n=1..8 with
    refinement); segment capacities within 5% of a fine-grid limit over the
    last three members."""
    rep = capacity_dichotomy_study(8, include_velocity=False)
    caps = rep.summary["point_capacities"]
    point_ok = rep.flags["point_caps_strictly_decreasing"] and caps[-1] < 0.3 * caps[0]
    seg_ok = rep.flags["segment_caps_near_reference"]
    criterion(
        "capacity dichotomy (point -> 0 strictly, segment within 5%)",
        point_ok and seg_ok,
        f"point {caps[0]:.2f}->{caps[-1]:.2f}, segment last three "
        f"{[round(c, 3) for c in rep.summary['segment_capacities'][-3:]]} vs "
        f"ref {rep.summary['segment_reference_capacity']:.3f}",
    )


def test_gamma_convergence_thicken_arc():
    """H^1_0 gaps strictly decreasing for the 6-member thicken_arc family at
    res 256; final gap <= 25% of the initial one; runtime < 5 min."""
    t0 = time.perf_counter()
    seq = make_sequence("thicken_arc", 6, verify=False)
    res = gamma_gap(seq, -4.0, 256)
    elapsed = time.perf_counter() - t0
    strict = bool(np.all(np.diff(res.gaps) < 0))
    frac = res.gaps[-1] / res.gaps[0]
    criterion(
        "gamma-convergence thicken_arc (strict decrease, final <= 25%, <5min)",
        strict and frac <= 0.25 and elapsed < 300,
        f"gaps {np.round(res.gaps, 3).tolist()}, final/initial={frac:.2%}, {elapsed:.0f}s",
    )


def test_hodge_circulation_duality(two_obstacle_grid_256, two_obstacle_basis_256):
    """gamma^j(perp_grad psi^i) = delta_ij within 0.02 on a two-obstacle
    domain at res 256."""
    g, basis = two_obstacle_grid_256, two_obstacle_basis_256
    chis = [cutoff_field(g, 1, 0.1), cutoff_field(g, 2, 0.09)]
    worst = 0.0
    for i in range(2):
        u = perp_grad(g, basis.psi[i])
        om = np.zeros(g.shape)
        for j, chi in enumerate(chis):
            val = weak_circulation(g, u, om, chi)
            worst = max(worst, abs(val - (1.0 if i == j else 0.0)))
    criterion("Hodge circulation duality (delta_ij +- 0.02)", worst <= 0.02,
              f"max deviation {worst:.4f}")


def test_hodge_uniqueness_round_trip(two_obstacle_grid_256, two_obstacle_basis_256):
    """Reassembly from (curl u, weak circulations of u) returns u within
    1e-3 relative L2 on three randomized states."""
    g, basis = two_obstacle_grid_256, two_obstacle_basis_256
    rng = np.random.default_rng(42)
    chis = [cutoff_field(g, 1, 0.1), cutoff_field(g, 2, 0.09)]
    worst = 0.0
    for _ in range(3):
        om = bump(g.X, g.Y, rng.uniform(-0.15, 0.15), rng.uniform(0.3, 0.55),
                  0.27, rng.uniform(0.5, 2.0))
        om += bump(g.X, g.Y, rng.uniform(-0.2, 0.2), rng.uniform(-0.55, -0.3),
                   0.25, rng.uniform(-1.5, -0.3))
        om[~g.fluid] = 0.0
        gamma = rng.uniform(-1, 1, 2)
        st = assemble_velocity(g, om, gamma, basis)
        om_hat = curl(g, st.u)
        gamma_hat = [weak_circulation(g, st.u, om_hat, c) for c in chis]
        st2 = assemble_velocity(g, om_hat, gamma_hat, basis)
        worst = max(worst, l2_fluid(g, st2.u - st.u) / l2_fluid(g, st.u))
    criterion("Hodge uniqueness round trip (<= 1e-3, 3 states)", worst <= 1e-3,
              f"worst relative residual {worst:.2e}")


def test_exterior_tangency():
    """Point vortex outside the unit disk: radial velocity <= 1e-10 on 1000
    boundary samples."""
    ens = VortexEnsemble(np.array([1.8 + 0.3j]), np.array([1.0]))
    th = 2 * np.pi * (np.arange(1000) + 0.37) / 1000
    zb = (1 + 1e-13) * np.exp(1j * th)
    u = biot_savart_exterior(identity_map(), ens, zb)
    radial = np.abs(u[:, 0] * np.cos(th) + u[:, 1] * np.sin(th)).max()
    criterion("exterior tangency (radial <= 1e-10)", radial <= 1e-10, f"max {radial:.2e}")


def test_conservation_suite(disk_grid_256):
    """Steady radial vortex, T=1 at 256^2: energy drift <= 1%, omega L2
    drift <= 2%, max norm non-increasing exactly, gamma constant bitwise."""
    g = disk_grid_256
    basis = build_hodge_basis(g)
    om0 = bump(g.X, g.Y, 0.0, 0.0, 0.7)
    run = run_grid(g, basis, om0, [], t_final=1.0)
    d = run.diagnostics
    e_drift = abs(d[-1]["energy"] - d[0]["energy"]) / d[0]["energy"]
    l1_drift = abs(d[-1]["omega_l1"] - d[0]["omega_l1"]) / d[0]["omega_l1"]
    l2_drift = abs(d[-1]["omega_l2"] - d[0]["omega_l2"]) / d[0]["omega_l2"]
    linf_monotone = all(b["omega_linf"] <= a["omega_linf"] for a, b in zip(d[:-1], d[1:]))
    gammas_bitwise = all(
        np.array_equal(st.gamma, run.states[0].gamma) for st in run.states
    )
    criterion(
        "conservation suite (energy 1%, L2 2%, Linf monotone, gamma bitwise)",
        e_drift <= 0.01 and l2_drift <= 0.02 and l1_drift <= 0.05
        and linf_monotone and gammas_bitwise,
        f"energy {e_drift:.3%}, L1 {l1_drift:.3%}, L2 {l2_drift:.3%}, "
        f"Linf monotone {linf_monotone}",
    )


def test_vortex_pair_trajectory():
    """Pair outside the unit disk matches the 4-image point-vortex ODE
    oracle within 1% position error over T=5."""
    z0 = np.array([2.0 + 0.8j, 2.0 - 0.8j])
    G = np.array([1.0, -1.0])

    def oracle_rhs(t, y):
        z = y[:2] + 1j * y[2:]
        out = np.zeros(2, dtype=complex)
        for i in range(2):
            v = 0j
            for j in range(2):
                if j != i:
                    v += G[j] * 1j / (2 * np.pi * np.conj(z[i] - z[j]))
                zs = z[j] / abs(z[j]) ** 2
                v += -G[j] * 1j / (2 * np.pi * np.conj(z[i] - zs))
            out[i] = v
        return np.concatenate([out.real, out.imag])

    sol = solve_ivp(oracle_rhs, (0, 5), np.concatenate([z0.real, z0.imag]),
                    rtol=1e-11, atol=1e-12)
    run = run_exterior(identity_map(), VortexEnsemble(z0, G), 0.0, t_final=5.0, dt=0.01)
    zo = sol.y[:2, -1] + 1j * sol.y[2:, -1]
    err = np.abs(run.particles[-1].positions - zo).max()
    scale = float(np.abs(z0).max())
    criterion("vortex pair vs 4-image ODE (1% over T=5)", err <= 0.01 * scale,
              f"position error {err:.2e} (scale {scale:.1f})")


def test_support_growth():
    """Exterior cloud: measured support radius <= rho0 + C_eff t at every
    step, with C_eff from the far-field bound."""
    rng = np.random.default_rng(12)
    n = 60
    centers = np.array([2.2 + 0.5j, -0.2 + 2.4j])
    pos = np.concatenate(
        [c + 0.3 * (rng.random(n // 2) + 1j * rng.random(n // 2) - 0.5 * (1 + 1j))
         for c in centers]
    )
    g = np.concatenate([np.full(n // 2, 0.5 / n), np.full(n // 2, -0.3 / n)])
    ens = VortexEnsemble(pos, g, blob_delta=0.05)
    alpha = float(g.sum())
    rho0 = float(np.abs(pos).max()) + ens.blob_delta
    l1 = float(np.abs(g).sum())
    c_eff = support_growth_constant(identity_map(), l1, l1, rho0, 1.2 * rho0, math.inf, alpha)
    run = run_exterior(identity_map(), ens, alpha, t_final=3.0, dt=0.05)
    ok = all(r["support_radius"] <= rho0 + c_eff * r["t"] + 1e-12 for r in run.diagnostics)
    criterion("support growth dominated by (2C0+1)(2+|alpha|)", ok,
              f"C_eff={c_eff:.2f}, final radius {run.diagnostics[-1]['support_radius']:.2f}")


def test_caratheodory_ellipse_to_slit():
    """sup_{|z|>=2} |T_n - T| decreasing with ratio <= 0.7 per step for
    ellipse(1 + 2^-n) -> slit, n = 1..8."""
    J = joukowski_map()
    probe = np.concatenate(
        [r * np.exp(1j * 2 * np.pi * np.arange(128) / 128) for r in (2.0, 2.5, 3.0, 4.0)]
    )
    gaps = []
    for n in range(1, 9):
        gm, _, _ = caratheodory_gap(ellipse_map(1 + 2.0**-n), J, probe)
        gaps.append(gm)
    ratios = np.array(gaps[1:]) / np.array(gaps[:-1])
    criterion("Caratheodory ellipse->slit (ratio <= 0.7)", bool(np.all(ratios <= 0.7)),
              f"ratios {np.round(ratios, 3).tolist()}")


def test_arc_endpoint_exponent():
    """Steady circulation flow around the slit: fitted log-log slope of the
    speed toward each endpoint lies in [-0.6, -0.4]."""
    _, rep = arc_flow_study(alpha=1.0)
    slopes = rep.summary["endpoint_slopes"]
    ok = all(-0.6 <= s <= -0.4 for s in slopes)
    criterion("arc endpoint exponent in [-0.6, -0.4]", ok,
              f"slopes {[round(s, 3) for s in slopes]}")


def test_domain_continuity_rugosity():
    """rugosity(alpha=2), eps = 1/2..1/16 at res 256, T=0.5: probe-compact
    velocity gaps non-increasing and final <= 30% of initial; < 15 min."""
    t0 = time.perf_counter()
    seq = make_sequence("rugosity", 16, indices=[2, 4, 8, 16], alpha=2.0, verify=False)
    rep = domain_continuity_study(
        seq,
        lambda X, Y: bump(X, Y, math.pi / 2, 0.55, 0.25),
        [],
        t_final=0.5,
        resolution=256,
    )
    elapsed = time.perf_counter() - t0
    gaps = rep.summary["gaps"]
    ok = rep.flags["non_increasing"] and rep.flags["final_fraction_ok"] and elapsed < 900
    criterion(
        "domain continuity rugosity (non-increasing, final <= 30%, <15min)",
        ok,
        f"gaps {[f'{g:.2e}' for g in gaps]}, final/initial "
        f"{gaps[-1] / gaps[0]:.1%}, {elapsed:.0f}s",
    )


def test_weak_euler_residual_halves(disk_spec):
    """Steady radial run, three canonical test fields: the weak-form
    residual halves when h and dt halve."""
    fields = canonical_test_fields(scale=0.8, t1=0.45)
    residuals = {}
    for res in (128, 256):
        g = discretize(disk_spec, res)
        basis = build_hodge_basis(g)
        om0 = bump(g.X, g.Y, 0.0, 0.0, 0.7)
        run = run_grid(g, basis, om0, [], t_final=0.5, dt=g.h)
        residuals[res] = np.array([euler_weak_residual(g, run.states, f) for f in fields])
    ratios = residuals[256] / residuals[128]
    criterion("weak Euler residual halves under refinement",
              bool(np.all(ratios <= 0.6)),
              f"ratios {np.round(ratios, 3).tolist()}")
