"""Command-line entry point: simulate, capacity, gamma, conformal, study,
validate.

Configs are JSON, schema-validated before execution; every run writes its
outputs plus a manifest into the output directory.  Exit codes: 0 success,
2 validation failure, 1 runtime error.  ``--strict`` escalates geometry
warnings (under-resolved obstacles) to errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
import warnings as _warnings
from pathlib import Path

import numpy as np
import jsonschema

from . import __version__
from .conformal import VortexEnsemble, circle_map, ellipse_map, fit_exterior_map, joukowski_map
from .defaults import DEFAULTS
from .elliptic import build_hodge_basis, capacity, discretize, gamma_gap
from .experiments import (
    arc_flow_study,
    capacity_dichotomy_study,
    domain_continuity_study,
    gamma_dirichlet_study,
)
from .fieldio import (
    read_ensemble_csv,
    write_csv,
    write_ensemble_csv,
    write_laurent_map,
    write_manifest,
    write_matrix_csv,
    write_snapshot,
)
from .geometry import DomainSpec, make_sequence
from .hodge import energy, lq_norm
from .transport import run_exterior, run_grid

_NUM = {"type": "number"}
_INT = {"type": "integer"}

SIMULATE_SCHEMA = {
    "type": "object",
    "required": ["method", "numerics"],
    "properties": {
        "method": {"enum": ["grid", "particles"]},
        "domain": {"type": "object"},
        "family": {"type": "object"},
        "map": {"type": "object"},
        "particles": {"type": "array", "items": {"type": "array", "minItems": 3, "maxItems": 3}},
        "alpha": _NUM,
        "initial": {"type": "object"},
        "circulations": {"type": "array", "items": _NUM},
        "numerics": {
            "type": "object",
            "required": ["t_final"],
            "properties": {
                "resolution": _INT,
                "dt": _NUM,
                "t_final": _NUM,
                "snapshot_every": _INT,
            },
        },
        "seed": _INT,
    },
}

PATCHES = {
    "radial_bump": lambda X, Y, p: _bump(X, Y, p.get("center", [0, 0]), p.get("radius", 0.5),
                                         p.get("amplitude", 1.0)),
    "offcenter_blob": lambda X, Y, p: _bump(X, Y, p.get("center", [0.2, 0.1]),
                                            p.get("radius", 0.3), p.get("amplitude", 1.0)),
    "vortex_pair": lambda X, Y, p: (
        _bump(X, Y, p.get("center_a", [-0.3, 0.0]), p.get("radius", 0.25), p.get("amplitude", 1.0))
        + _bump(X, Y, p.get("center_b", [0.3, 0.0]), p.get("radius", 0.25),
                -p.get("amplitude", 1.0))
    ),
}


def _bump(X, Y, center=(0.0, 0.0), radius=0.5, amplitude=1.0):
    v = ((X - center[0]) ** 2 + (Y - center[1]) ** 2) / radius**2
    return amplitude * np.where(v < 1, (1 - v) ** 3, 0.0)


class ValidationFailure(Exception):
    pass


def _load_config(path, schema):
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationFailure(f"cannot read config: {e}") from e
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as e:
        raise ValidationFailure(f"config schema violation: {e.message}") from e
    return cfg


def _domain_from_config(cfg) -> DomainSpec:
    if "domain" in cfg:
        return DomainSpec.from_json(cfg["domain"])
    if "family" in cfg:
        fam = cfg["family"]
        seq = make_sequence(fam["name"], max(2, fam["n"]), indices=[fam["n"]],
                            verify=False, **fam.get("params", {}))
        return seq.members[0]
    raise ValidationFailure("config needs either 'domain' or 'family'")


def _map_from_config(m):
    kind = m.get("kind", "joukowski")
    if kind == "joukowski":
        return joukowski_map()
    if kind == "circle":
        return circle_map(m.get("radius", 1.0), complex(*m.get("center", [0.0, 0.0])))
    if kind == "ellipse":
        return ellipse_map(m["rho"])
    raise ValidationFailure(f"unknown map kind {kind!r}")


def _check_strict(grid, strict):
    if strict and grid.warnings:
        raise RuntimeError("strict mode: " + "; ".join(grid.warnings))


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config, SIMULATE_SCHEMA)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    num = cfg["numerics"]
    outputs = []
    if cfg["method"] == "grid":
        spec = _domain_from_config(cfg)
        res = args.res or num.get("resolution", 128)
        with _warnings.catch_warnings():
            _warnings.simplefilter("ignore")
            grid = discretize(spec, res)
        _check_strict(grid, args.strict)
        basis = build_hodge_basis(grid)
        init = cfg.get("initial", {"kind": "radial_bump"})
        omega0 = PATCHES[init.get("kind", "radial_bump")](grid.X, grid.Y, init)
        gamma = cfg.get("circulations", [0.0] * grid.n_obstacles)
        run = run_grid(grid, basis, omega0, gamma, num["t_final"], dt=num.get("dt"),
                       snapshot_every=num.get("snapshot_every", 10))
        write_csv(out / "diagnostics.csv", run.diagnostics)
        outputs.append("diagnostics.csv")
        for i, st in enumerate(run.states):
            name = f"snapshot_{i:04d}"
            write_snapshot(out / name, grid, st,
                           {"l1": lq_norm(grid, st.omega, 1),
                            "l2": lq_norm(grid, st.omega, 2),
                            "linf": lq_norm(grid, st.omega, math.inf)},
                           energy(grid, st.u))
            outputs += [name + ".field", name + ".json"]
        if basis.k:
            write_matrix_csv(out / "gram_P.csv", basis.P)
            write_matrix_csv(out / "coefficients_C.csv", basis.C)
            outputs += ["gram_P.csv", "coefficients_C.csv"]
    else:
        tmap = _map_from_config(cfg.get("map", {}))
        parts = np.asarray(cfg.get("particles", []), dtype=float)
        if parts.size == 0:
            raise ValidationFailure("particle simulation needs a 'particles' list")
        ens = VortexEnsemble(parts[:, 0] + 1j * parts[:, 1], parts[:, 2],
                             blob_delta=cfg.get("blob_delta", 0.0))
        run = run_exterior(tmap, ens, cfg.get("alpha", 0.0), num["t_final"], dt=num.get("dt"))
        write_csv(out / "diagnostics.csv", run.diagnostics)
        outputs.append("diagnostics.csv")
        for i, e in enumerate(run.particles):
            name = f"particles_{i:04d}.csv"
            write_ensemble_csv(out / name, e)
            outputs.append(name)
    write_manifest(out / "manifest.json", cfg, outputs, time.perf_counter() - t0)
    print(f"simulate: wrote {len(outputs)} outputs to {out}")
    return 0


def cmd_capacity(args) -> int:
    spec = DomainSpec.from_json(json.loads(Path(args.domain).read_text(encoding="utf-8")))
    with _warnings.catch_warnings():
        _warnings.simplefilter("ignore")
        grid = discretize(spec, args.res)
    _check_strict(grid, args.strict)
    rows = []
    for i in range(1, grid.n_obstacles + 1):
        cap = capacity(grid, i)
        rows.append({"obstacle": i, "capacity": cap, "resolution": args.res})
        print(f"capacity[{i}] = {cap:.6g}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "capacity.csv", rows)
        write_manifest(out / "manifest.json",
                       {"domain": spec.to_json(), "res": args.res}, ["capacity.csv"], 0.0)
    return 0


def cmd_gamma(args) -> int:
    seq = make_sequence(args.family, args.n_max, alpha=args.alpha)
    res = gamma_gap(seq, float(args.f), args.res)
    rows = [
        {"n": n, "gap": g, "complement_count": c}
        for n, g, c in zip(seq.indices, res.gaps, res.complement_counts)
    ]
    for r in rows:
        print(f"n={r['n']}: H1 gap {r['gap']:.6g}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "gamma_gaps.csv", rows)
        write_manifest(out / "manifest.json",
                       {"family": args.family, "n_max": args.n_max, "res": args.res,
                        "f": args.f}, ["gamma_gaps.csv"], 0.0)
    return 0


def cmd_conformal(args) -> int:
    if args.fit:
        import csv as _csv

        with open(args.fit, newline="", encoding="utf-8") as f:
            pts = [(float(r["x"]), float(r["y"])) for r in _csv.DictReader(f)]
        z = np.array([complex(x, y) for x, y in pts])
        m = fit_exterior_map(z, n_terms=args.terms, defect_tol=args.defect_tol)
        print(f"fitted map: beta={m.beta:.6g}, defect={m.defect:.3g}")
    else:
        m = _map_from_config({"kind": args.kind, "rho": args.rho, "radius": args.radius})
        print(f"closed-form map {m.name}: beta={m.beta:.6g}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_laurent_map(out / "map.json", m)
        write_manifest(out / "manifest.json", {"command": "conformal"}, ["map.json"], 0.0)
    return 0


def cmd_study(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    if args.kind == "domain-continuity":
        import functools
        import os

        seq = make_sequence(args.family, args.n_max, alpha=args.alpha,
                            indices=[int(s) for s in args.indices.split(",")] if args.indices else None)
        omega0 = functools.partial(
            _bump,
            center=[sum(seq.probe_box[0:2]) / 2, sum(seq.probe_box[2:4]) / 2],
            radius=0.2,
            amplitude=1.0,
        )
        k = seq.limit.n_obstacles
        rep = domain_continuity_study(seq, omega0, [0.0] * k, args.T, args.res,
                                      jobs=args.jobs or os.cpu_count() or 1)
    elif args.kind == "capacity-dichotomy":
        rep = capacity_dichotomy_study(args.n_max, t_final=args.T)
    elif args.kind == "arc-flow":
        _, rep = arc_flow_study(alpha=1.0, t_final=args.T)
    elif args.kind == "gamma-dirichlet":
        seq = make_sequence(args.family, args.n_max, alpha=args.alpha)
        rep = gamma_dirichlet_study(seq, -4.0, resolutions=(args.res // 2, args.res))
    else:
        raise ValidationFailure(f"unknown study kind {args.kind!r}")
    write_csv(out / "report.csv", rep.rows)
    Path(out / "summary.json").write_text(
        json.dumps(rep.to_json(), sort_keys=True, indent=1, default=float) + "\n",
        encoding="utf-8",
    )
    write_manifest(out / "manifest.json", {"study": args.kind, "argv": vars(args) | {"func": None}},
                   ["report.csv", "summary.json"], time.perf_counter() - t0)
    print(f"study {args.kind}: flags {rep.flags}")
    return 0


def cmd_validate(args) -> int:
    _load_config(args.config, SIMULATE_SCHEMA)
    print("config ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roughflow",
                                description="2D ideal flow in irregular domains")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--strict", action="store_true",
                        help="escalate under-resolution warnings to errors")
        sp.add_argument("--jobs", type=int, default=None,
                        help="worker pool size (default: logical cores)")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("simulate", help="run a simulation from a JSON config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--res", type=int, default=None, help="override grid resolution")
    common(sp)
    sp.set_defaults(func=cmd_simulate, out="runs/simulate")

    sp = sub.add_parser("capacity", help="capacities of a domain's obstacles")
    sp.add_argument("--domain", required=True, help="DomainSpec JSON file")
    sp.add_argument("--res", type=int, default=256)
    common(sp)
    sp.set_defaults(func=cmd_capacity)

    sp = sub.add_parser("gamma", help="gamma-convergence gaps for a family")
    sp.add_argument("--family", default="thicken_arc")
    sp.add_argument("--n-max", type=int, default=6)
    sp.add_argument("--res", type=int, default=256)
    sp.add_argument("--alpha", type=float, default=2.0)
    sp.add_argument("--f", type=float, default=-4.0, help="constant source term")
    common(sp)
    sp.set_defaults(func=cmd_gamma)

    sp = sub.add_parser("conformal", help="build or fit an exterior map")
    sp.add_argument("--fit", default=None, help="CSV of boundary samples (x,y)")
    sp.add_argument("--terms", type=int, default=32)
    sp.add_argument("--defect-tol", type=float, default=DEFAULTS["fit_defect_tol"])
    sp.add_argument("--kind", default="joukowski")
    sp.add_argument("--rho", type=float, default=1.5)
    sp.add_argument("--radius", type=float, default=1.0)
    common(sp)
    sp.set_defaults(func=cmd_conformal)

    sp = sub.add_parser("study", help="run a named convergence study")
    sp.add_argument("kind", choices=["domain-continuity", "capacity-dichotomy",
                                     "arc-flow", "gamma-dirichlet"])
    sp.add_argument("--family", default="rugosity")
    sp.add_argument("--alpha", type=float, default=2.0)
    sp.add_argument("--n-max", type=int, default=6)
    sp.add_argument("--indices", default=None, help="comma-separated member indices")
    sp.add_argument("--res", type=int, default=128)
    sp.add_argument("--T", type=float, default=0.25)
    common(sp)
    sp.set_defaults(func=cmd_study, out="runs/study")

    sp = sub.add_parser("validate", help="schema-check a config file")
    sp.add_argument("--config", required=True)
    common(sp)
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.func(args)
    except ValidationFailure as e:
        print(f"validation error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
