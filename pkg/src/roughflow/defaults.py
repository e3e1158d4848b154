"""Physical and numerical defaults, collected in one table.

Every tolerance or rule that the solvers and the CLI rely on is looked up
here, so a report's manifest plus this table pins the run exactly.
"""

DEFAULTS = {
    # linear solves (conjugate gradient, AMG-preconditioned)
    "cg_rtol": 1e-10,
    "cg_maxiter": 100_000,
    # eigenvalue solve for the windowed Poincare constant
    "eig_rtol": 1e-8,
    "eig_maxiter": 10_000,
    # Gram matrix conditioning above which an obstacle is declared
    # capacity-degenerate
    "condition_limit": 1e12,
    # capacity below this floor is treated as zero for positivity checks
    "capacity_floor": 1e-8,
    # time stepping: dt = h / max(1, |u|_inf); advection refuses CFL above cap
    "cfl_max": 4.0,
    # particle blob radius = blob_factor * inter-particle spacing
    "blob_factor": 2.0,
    # vorticity support threshold = factor * |omega0|_inf
    "support_threshold_factor": 1e-8,
    # exterior-map least squares
    "fit_ridge": 1e-12,
    "fit_defect_tol": 1e-6,
    # samples per curve when measuring image-plane separations
    "far_field_boundary_samples": 4096,
    # boundary sampling density for set distances, as a fraction of diameter
    "hausdorff_rel_spacing": 1 / 512,
}
