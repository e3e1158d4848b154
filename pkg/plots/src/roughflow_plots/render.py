"""Render report figures from roughflow output files.

The readers here parse the documented on-disk formats directly (CSV tables,
JSON summaries, field binaries with a JSON header line); nothing imports the
simulation package.  Figures are deterministic vector files: fixed style, no
timestamps, fixed hash salt, so re-rendering a spec reproduces the bytes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams.update(
    {
        "svg.hashsalt": "roughflow-plots",
        "figure.figsize": (5.0, 3.4),
        "font.size": 9,
        "axes.grid": True,
        "grid.alpha": 0.3,
        "savefig.bbox": "tight",
    }
)

import matplotlib.pyplot as plt  # noqa: E402  (after backend selection)

KINDS = (
    "gamma_decay",
    "velocity_gaps",
    "capacity_dichotomy",
    "arc_exponent",
    "vorticity_snapshot",
)


class SchemaError(ValueError):
    pass


@dataclass
class FigureSpec:
    kind: str
    inputs: list[str]
    output: str
    scales: dict = field(default_factory=dict)
    title: str | None = None

    @staticmethod
    def from_json(path) -> "FigureSpec":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        missing = {"kind", "inputs", "output"} - set(d)
        if missing:
            raise SchemaError(f"figure spec missing keys: {sorted(missing)}")
        spec = FigureSpec(
            kind=d["kind"],
            inputs=list(d["inputs"]),
            output=d["output"],
            scales=d.get("scales", {}),
            title=d.get("title"),
        )
        base = Path(path).parent
        spec.inputs = [str((base / p)) if not Path(p).is_absolute() else p for p in spec.inputs]
        if not Path(spec.output).is_absolute():
            spec.output = str(base / spec.output)
        return spec


def read_table(path, required: tuple[str, ...]) -> dict[str, list]:
    if not Path(path).exists():
        raise SchemaError(f"input file missing: {path}")
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(
                f"{path}: missing columns {missing}; expected header with {list(required)}"
            )
        rows = list(reader)
    out: dict[str, list] = {c: [] for c in header}
    for r in rows:
        for c in header:
            out[c].append(r[c])
    return out


def read_field(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        header = json.loads(f.readline().decode())
        if header.get("magic") != "roughflow-field":
            raise SchemaError(f"{path}: not a roughflow field file")
        nx, ny = header["dims"]
        arrays = {}
        for name in header["arrays"]:
            buf = f.read(nx * ny * 8)
            arrays[name] = np.frombuffer(buf, dtype="<f8").reshape(nx, ny)
    return header, arrays


def _floats(col):
    return np.array([float(v) for v in col])


def _new_axes(title):
    fig, ax = plt.subplots()
    if title:
        ax.set_title(title)
    return fig, ax


def _gamma_decay(spec: FigureSpec):
    t = read_table(spec.inputs[0], ("n", "gap"))
    fig, ax = _new_axes(spec.title or "Dirichlet-energy gaps")
    ax.semilogy(_floats(t["n"]), _floats(t["gap"]), "o-", color="#1f4e79")
    ax.set_xlabel("member n")
    ax.set_ylabel(r"$\|\nabla(\psi_n-\psi_\infty)\|_{L^2}$")
    return fig


def _velocity_gaps(spec: FigureSpec):
    t = read_table(spec.inputs[0], ("n", "velocity_gap"))
    fig, ax = _new_axes(spec.title or "velocity gaps on the probe compact")
    ax.semilogy(_floats(t["n"]), _floats(t["velocity_gap"]), "s-", color="#7a1f2b")
    ax.set_xlabel("member n")
    ax.set_ylabel(r"$\sup_t \|u_n-u_\infty\|_{L^2(K)}$")
    return fig


def _capacity_dichotomy(spec: FigureSpec):
    t = read_table(spec.inputs[0], ("family", "n", "capacity"))
    fig, ax = _new_axes(spec.title or "capacity dichotomy")
    fams = sorted(set(t["family"]))
    colors = {"shrink_point": "#b05a00", "shrink_segment": "#1f6e43"}
    for fam in fams:
        sel = [i for i, f in enumerate(t["family"]) if f == fam]
        ax.plot(
            [float(t["n"][i]) for i in sel],
            [float(t["capacity"][i]) for i in sel],
            "o-",
            label=fam,
            color=colors.get(fam),
        )
    ax.set_xlabel("member n")
    ax.set_ylabel("discrete capacity")
    ax.legend()
    return fig


def _arc_exponent(spec: FigureSpec):
    t = read_table(spec.inputs[0], ("endpoint", "distance", "speed"))
    fig, ax = _new_axes(spec.title or "speed toward the arc endpoints")
    d = _floats(t["distance"])
    s = _floats(t["speed"])
    ep = _floats(t["endpoint"])
    for val, marker in ((1.0, "o"), (-1.0, "^")):
        sel = ep == val
        if sel.any():
            ax.loglog(d[sel], s[sel], marker, ms=3.5, label=f"endpoint {val:+.0f}")
    dd = np.array([d.min(), d.max()])
    ref = s.max() * (dd / d[np.argmax(s)]) ** -0.5
    ax.loglog(dd, ref, "k--", lw=1, label=r"slope $-1/2$")
    ax.set_xlabel("distance to endpoint")
    ax.set_ylabel("|u|")
    ax.legend()
    return fig


def _vorticity_snapshot(spec: FigureSpec):
    header, arrays = read_field(spec.inputs[0])
    if "omega" not in arrays:
        raise SchemaError(f"{spec.inputs[0]}: field file has no 'omega' array")
    x0, x1, y0, y1 = header["box"]
    fig, ax = _new_axes(spec.title or "vorticity")
    om = arrays["omega"]
    lim = max(abs(float(om.min())), abs(float(om.max())), 1e-30)
    m = ax.contourf(
        np.linspace(x0, x1, om.shape[0]),
        np.linspace(y0, y1, om.shape[1]),
        om.T,
        levels=21,
        cmap="RdBu_r",
        vmin=-lim,
        vmax=lim,
    )
    fig.colorbar(m, ax=ax, shrink=0.85)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    return fig


_RENDERERS = {
    "gamma_decay": _gamma_decay,
    "velocity_gaps": _velocity_gaps,
    "capacity_dichotomy": _capacity_dichotomy,
    "arc_exponent": _arc_exponent,
    "vorticity_snapshot": _vorticity_snapshot,
}


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the output path."""
    if spec.kind not in _RENDERERS:
        raise SchemaError(f"unknown figure kind {spec.kind!r}; known: {list(KINDS)}")
    if not spec.inputs:
        raise SchemaError("figure spec has no inputs")
    fig = _RENDERERS[spec.kind](spec)
    if spec.scales.get("x"):
        fig.axes[0].set_xscale(spec.scales["x"])
    if spec.scales.get("y"):
        fig.axes[0].set_yscale(spec.scales["y"])
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format=out.suffix.lstrip(".") or "svg", metadata={"Date": None})
    plt.close(fig)
    return str(out)
