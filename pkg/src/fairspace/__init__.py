"""Envy-free and proportional convex partitions of sampled measures."""
from .combinatorics import birkhoff_decompose, bottleneck_assignment, secretive_feasible
from .delta_spaces import Join, PowerFixedSites, TwoLineDisk, Trivial, evaluate, interval_space, nested_space
from .envyfree_convex import ConvexOptions, GroupInstance, solve_group_allocation, solve_simultaneous
from .geometry import Ball, ConvexCell, HalfSpace, PowerDiagramConfig, power_cells
from .kkm_solver import SolveOptions, brute_force_oracle, solve_envy_free, solve_levi
from .measures import Measure, MeasureSpec, realize, value_table
from .power_equipartition import emp_partition, equalize_weights
from .proportional import prime_power_factor, solve_proportional

__version__ = "0.1.0"

__all__ = [
    "Ball", "ConvexCell", "ConvexOptions", "GroupInstance", "HalfSpace", "Join", "Measure",
    "MeasureSpec", "PowerDiagramConfig", "PowerFixedSites", "SolveOptions", "Trivial", "TwoLineDisk",
    "birkhoff_decompose", "bottleneck_assignment", "brute_force_oracle", "emp_partition",
    "equalize_weights", "evaluate", "interval_space", "nested_space", "power_cells",
    "prime_power_factor", "realize", "secretive_feasible", "solve_envy_free", "solve_group_allocation",
    "solve_levi", "solve_proportional", "solve_simultaneous", "value_table",
]
