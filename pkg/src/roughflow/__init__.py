"""2D incompressible ideal flow in irregular, multiply-connected domains.

Submodules
----------
geometry    planar sets, Hausdorff metrics, approximating families
elliptic    masked-grid Dirichlet solver, capacity, harmonic measures
hodge       velocity assembly, weak circulations, weak-form residuals
conformal   exterior maps and the image-form Biot-Savart law
transport   vorticity advection and conservation diagnostics
experiments scripted convergence studies
fieldio     on-disk formats (fields, CSV, manifests)
cli         command-line front end
"""

__version__ = "0.1.0"

from .geometry import CompactSet, DomainSequence, DomainSpec, hausdorff_compact, hausdorff_open
from .elliptic import MaskedGrid, HodgeBasis, capacity, discretize, solve_dirichlet

__all__ = [
    "CompactSet",
    "DomainSequence",
    "DomainSpec",
    "MaskedGrid",
    "HodgeBasis",
    "capacity",
    "discretize",
    "solve_dirichlet",
    "hausdorff_compact",
    "hausdorff_open",
    "__version__",
]
