"""Scripted convergence studies: domain continuity, the capacity dichotomy,
arc endpoint behavior, and gamma-convergence of the Dirichlet problem.

Reports measure trends and compare them against configured thresholds; they
never assert monotonicity a priori.  All studies are deterministic, so a
report is reproducible bit-identically from its manifest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conformal import (
    VortexEnsemble,
    biot_savart_exterior,
    harmonic_velocity,
    joukowski_map,
)
from .elliptic import MaskedGrid, build_hodge_basis, capacity, discretize, gamma_gap
from .geometry import DomainSequence, make_sequence
from .hodge import assemble_velocity, l2_fluid
from .transport import run_exterior, run_grid


@dataclass
class StudyReport:
    study: str
    params: dict
    rows: list[dict]
    summary: dict
    flags: dict
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "study": self.study,
            "params": self.params,
            "summary": self.summary,
            "flags": self.flags,
            "warnings": self.warnings,
        }


def _window_mask(grid: MaskedGrid, box) -> np.ndarray:
    x0, x1, y0, y1 = box
    return (grid.X >= x0) & (grid.X <= x1) & (grid.Y >= y0) & (grid.Y <= y1)


def _dc_worker(args):
    spec, resolution, omega0, gamma, t_final, dt, probe_box = args
    _, u, times, _ = _probe_velocity_series(
        spec, resolution, omega0, gamma, t_final, dt, probe_box
    )
    return u, times


def _non_increasing(vals, slack=1e-12) -> bool:
    v = np.asarray(vals, dtype=float)
    return bool(np.all(v[1:] <= v[:-1] + slack))


def _probe_velocity_series(spec, resolution, omega0, gamma, t_final, dt, probe_box):
    """One member run; returns (h, probe-window velocity snapshots, times).
    Top-level so study fan-out can ship it to worker processes."""
    grid = discretize(spec, resolution)
    basis = build_hodge_basis(grid)
    om0 = omega0(grid.X, grid.Y)
    run = run_grid(grid, basis, om0, gamma, t_final, dt=dt)
    sel = _window_mask(grid, probe_box)
    if (sel & ~grid.fluid).any():
        raise ValueError("probe compact touches an obstacle; shrink it")
    return grid.h, [st.u[:, sel] for st in run.states], [st.t for st in run.states], run.meta["dt"]


def domain_continuity_study(
    seq: DomainSequence,
    omega0,
    gamma,
    t_final: float,
    resolution: int,
    dt: float | None = None,
    probe_box=None,
    final_fraction: float = 0.3,
    jobs: int = 1,
) -> StudyReport:
    """Run the same initial data on every member and on the limit domain at
    matched resolution (one grid, different masks) and report
    sup_{t<=T} |u_n - u_limit|_{L^2(K)} on a fixed probe compact K.

    With jobs > 1 the member runs fan out over a process pool (omega0 must
    then be picklable); results are folded in member order, so the report is
    identical for any job count.
    """
    probe_box = probe_box or seq.probe_box
    warnings_ = []
    counts = seq.complement_counts()
    if len(counts) >= 3 and all(b > a for a, b in zip(counts[:-1], counts[1:])):
        warnings_.append("Sverak hypothesis violated: complement component count grows")

    h, u_lim, times_lim, dt_used = _probe_velocity_series(
        seq.limit, resolution, omega0, gamma, t_final, dt, probe_box
    )
    args = [
        (member, resolution, omega0, gamma, t_final, dt_used, probe_box)
        for member in seq.members
    ]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            member_runs = list(pool.map(_dc_worker, args))
    else:
        member_runs = [_dc_worker(a) for a in args]

    rows = []
    for n, member, (u_n, times_n) in zip(seq.indices, seq.members, member_runs):
        if len(times_n) != len(times_lim):
            raise RuntimeError("member run desynchronized from the limit run")
        gap = max(float(np.sqrt(((a - b) ** 2).sum()) * h) for a, b in zip(u_n, u_lim))
        rows.append({"n": n, "velocity_gap": gap, "complement_count": member.complement_components()})
    gaps = [r["velocity_gap"] for r in rows]
    flags = {
        "non_increasing": _non_increasing(gaps),
        "final_fraction_ok": gaps[-1] <= final_fraction * gaps[0] if gaps[0] > 0 else True,
    }
    return StudyReport(
        study="domain_continuity",
        params={
            "family": seq.family,
            "indices": list(seq.indices),
            "resolution": resolution,
            "t_final": t_final,
            "dt": dt_used,
            "probe_box": list(probe_box),
            "final_fraction": final_fraction,
        },
        rows=rows,
        summary={"gaps": gaps, "initial_gap": gaps[0], "final_gap": gaps[-1]},
        flags=flags,
        warnings=warnings_,
    )


def _point_resolution(n: int) -> int:
    return int(min(2048, max(128, 2 ** (n + 3))))


def capacity_dichotomy_study(
    n_max: int,
    t_final: float = 0.0,
    segment_reference_resolution: int = 1024,
    probe_outer: float = 0.8,
    include_velocity: bool = True,
) -> StudyReport:
    """Contrast the shrinking segment (positive capacity limit) against the
    shrinking point (capacity to zero, velocity norm diverging near the
    point).  The velocity probe annulus (2 r_n, probe_outer) needs room and
    a resolved obstacle at the capped velocity resolution, so degenerate
    members are skipped in the velocity diagnostics.  With t_final > 0 the
    segment side also gets a velocity-gap run via
    :func:`domain_continuity_study`."""
    rows = []
    point_seq = make_sequence("shrink_point", n_max, verify=False)
    seg_seq = make_sequence("shrink_segment", n_max, verify=False)

    point_caps, seg_caps = [], []
    point_unorm, unorm_ns = [], []
    for n, spec in zip(point_seq.indices, point_seq.members):
        res = _point_resolution(n)
        grid = discretize(spec, res)
        cap = capacity(grid, 1)
        point_caps.append(cap)
        row = {"family": "shrink_point", "n": n, "resolution": res, "capacity": cap}
        rn = 2.0**-n
        vel_res = min(res, 512)
        if include_velocity and 2 * rn < 0.9 * probe_outer and rn >= 4.0 / vel_res:
            vgrid = grid if vel_res == res else discretize(spec, vel_res)
            basis = build_hodge_basis(vgrid)
            st = assemble_velocity(vgrid, np.zeros(vgrid.shape), [1.0], basis)
            r = np.sqrt(vgrid.X**2 + vgrid.Y**2)
            annulus = (r > 2 * rn) & (r < probe_outer)
            unorm = l2_fluid(vgrid, st.u, region=annulus)
            point_unorm.append(unorm)
            unorm_ns.append(n)
            row["velocity_l2_annulus"] = unorm
        rows.append(row)
    for n, spec in zip(seg_seq.indices, seg_seq.members):
        res = _point_resolution(n)
        grid = discretize(spec, res)
        cap = capacity(grid, 1)
        seg_caps.append(cap)
        rows.append({"family": "shrink_segment", "n": n, "resolution": res, "capacity": cap})
    ref_grid = discretize(seg_seq.limit, segment_reference_resolution)
    seg_ref = capacity(ref_grid, 1)

    # velocity norm slope against the log-divergence oracle
    ns = np.asarray(unorm_ns, dtype=float)
    u2 = np.asarray(point_unorm) ** 2
    slope = float(np.polyfit(ns * math.log(2.0), u2, 1)[0]) if len(ns) >= 2 else math.nan
    oracle_slope = 1.0 / (2 * math.pi)

    flags = {
        "point_caps_strictly_decreasing": bool(np.all(np.diff(point_caps) < 0)),
        "segment_caps_near_reference": bool(
            np.all(np.abs(np.asarray(seg_caps[-3:]) - seg_ref) <= 0.05 * seg_ref)
        ),
    }
    if include_velocity:
        flags["point_velocity_increasing"] = bool(np.all(np.diff(point_unorm) > 0))
        flags["log_divergence_slope_ok"] = bool(
            abs(slope - oracle_slope) <= 0.3 * oracle_slope
        )
    summary = {
        "point_capacities": point_caps,
        "segment_capacities": seg_caps,
        "segment_reference_capacity": seg_ref,
        "point_velocity_l2": point_unorm,
        "point_velocity_ns": unorm_ns,
        "velocity_sq_slope_per_log": slope,
        "oracle_slope": oracle_slope,
    }
    report = StudyReport(
        study="capacity_dichotomy",
        params={"n_max": n_max, "t_final": t_final,
                "segment_reference_resolution": segment_reference_resolution},
        rows=rows,
        summary=summary,
        flags=flags,
    )
    if t_final > 0:
        seg_small = make_sequence(
            "shrink_segment", n_max, indices=list(seg_seq.indices)[: min(4, n_max)], verify=False
        )
        sub = domain_continuity_study(
            seg_small,
            omega0=lambda X, Y: np.where((X**2 + (Y - 0.5) ** 2) < 0.09,
                                         (1 - (X**2 + (Y - 0.5) ** 2) / 0.09) ** 3, 0.0),
            gamma=[0.0],
            t_final=t_final,
            resolution=256,
        )
        report.summary["segment_velocity_gaps"] = sub.summary["gaps"]
        report.flags["segment_gaps_non_increasing"] = sub.flags["non_increasing"]
    return report


@dataclass
class ArcJump:
    s: np.ndarray
    jump: np.ndarray
    endpoint_slopes: tuple[float, float]


def arc_flow_study(
    ensemble: VortexEnsemble | None = None,
    alpha: float = 1.0,
    t_final: float = 0.0,
    fit_window: tuple[float, float] = (1e-3, 0.2),
    offset: float = 5e-3,
    margin: float = 0.05,
) -> tuple[ArcJump, StudyReport]:
    """Flow around the slit [-1, 1] via the Joukowski map: sample speeds
    along rays toward each endpoint, fit the log-log slope over the declared
    window, and sample the tangential velocity jump across the arc."""
    if offset >= fit_window[1]:
        raise ValueError("offset under-resolved: must sit below the fit window top")
    tmap = joukowski_map()
    ens = ensemble
    if ens is not None and t_final > 0:
        run = run_exterior(tmap, ens, alpha, t_final)
        ens = run.particles[-1]

    def velocity(z):
        v = alpha * harmonic_velocity(tmap, z)
        if ens is not None and len(ens.positions):
            v = v + biot_savart_exterior(tmap, ens, z)
        return v

    dists = np.geomspace(fit_window[0], fit_window[1], 24)
    angles = np.array([0.25, 0.5, 0.75]) * math.pi
    slopes = []
    rows = []
    for endpoint, outward in ((1.0, 1.0), (-1.0, -1.0)):
        speeds = np.zeros_like(dists)
        for a in angles:
            pts = endpoint + outward * dists * np.exp(1j * a)
            v = velocity(pts)
            speeds += np.hypot(v[:, 0], v[:, 1]) / len(angles)
        coef = np.polyfit(np.log(dists), np.log(speeds), 1)
        slopes.append(float(coef[0]))
        for d, sp in zip(dists, speeds):
            rows.append({"endpoint": endpoint, "distance": d, "speed": sp})

    s = np.linspace(-1 + margin, 1 - margin, 101)
    above = velocity(s + 1j * offset)
    below = velocity(s - 1j * offset)
    jump = above[:, 0] - below[:, 0]  # tangential direction along the slit is +x
    arc = ArcJump(s=s, jump=jump, endpoint_slopes=(slopes[0], slopes[1]))

    flags = {
        "slopes_in_band": all(-0.6 <= sl <= -0.4 for sl in slopes),
        "jump_finite": bool(np.all(np.isfinite(jump))),
    }
    report = StudyReport(
        study="arc_flow",
        params={
            "alpha": alpha,
            "t_final": t_final,
            "fit_window": list(fit_window),
            "offset": offset,
            "margin": margin,
            "n_particles": 0 if ensemble is None else len(ensemble.positions),
        },
        rows=rows,
        summary={"endpoint_slopes": slopes},
        flags=flags,
    )
    return arc, report


def gamma_dirichlet_study(
    seq: DomainSequence,
    f,
    resolutions: tuple[int, ...] = (128, 256),
) -> StudyReport:
    """gamma_gap across grid resolutions, separating discretization error
    from domain error by comparing matched members between resolutions
    (Richardson-style: the cross-resolution drift estimates the former)."""
    results = {res: gamma_gap(seq, f, res) for res in resolutions}
    finest = max(resolutions)
    rows = []
    for i, n in enumerate(seq.indices):
        row = {"n": n}
        for res in resolutions:
            row[f"gap_res{res}"] = float(results[res].gaps[i])
        row["discretization_drift"] = abs(
            row[f"gap_res{finest}"] - row[f"gap_res{min(resolutions)}"]
        )
        rows.append(row)
    gaps_fine = results[finest].gaps
    flags = {
        "non_increasing_at_finest": _non_increasing(gaps_fine),
        "domain_error_dominates": bool(
            np.median([r["discretization_drift"] for r in rows])
            <= max(gaps_fine[0], 1e-14)
        ),
    }
    warn = []
    for res in resolutions:
        warn += results[res].warnings
    return StudyReport(
        study="gamma_dirichlet",
        params={"family": seq.family, "indices": list(seq.indices),
                "resolutions": list(resolutions)},
        rows=rows,
        summary={
            "gaps_finest": [float(g) for g in gaps_fine],
            "complement_counts": results[finest].complement_counts,
        },
        flags=flags,
        warnings=warn,
    )
