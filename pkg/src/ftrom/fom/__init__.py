"""Full-order models and snapshot generators."""
from .fd import PointStencil, fd_derivative, gradient, laplacian, neighbor_indices
from .grid import Grid, grid1d, grid2d
from .integrate import OdeResult, dopri5
from .problems import (
    FomProblem,
    VortexPairSpec,
    advection_1d,
    ard_2d,
    reaction_diffusion_1d,
    rhs,
    rhs_at,
    vortex_velocity,
)
from .snapshots import (
    Trajectory,
    advection_exact,
    advection_front,
    advection_grid,
    advection_profile,
    advection_trajectory,
    analytic_rd_solution,
    ard_grid,
    ard_initial_condition,
    disk_grid,
    integrate,
    moving_disk_levelset,
    moving_disk_snapshots,
    rd_front,
    rd_grid,
    rd_trajectory,
    sine_velocity,
    topo_grid,
    topo_merge_levelset,
    topo_merge_snapshots,
    traveling_front_snapshots,
)
