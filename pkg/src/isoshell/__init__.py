"""Isothermal gas in a spherical shell: IVP profiles, high-order BVP solver and pathfollowing."""
from .ivp import IvpConfig, IvpError, UProfile, WExtremum, eval_W, extrema_of_W, integrate_U
from .representation import (Thresholds, WRoot, count_solutions, critical_thresholds,
                             reconstruct, rescale_solution, roots_of_W)
from .hofid import (BvpSolution, Mesh, MeshError, NoConvergence, RightCondition,
                    condition_estimate, solve_bvp)
from .continuation import (Branch, BranchPoint, ContinuationConfig, EnumerationResult,
                           InitialSolveFailed, enumerate_solutions, find_fold)
from .physics import CharacteristicNumbers, PhysicalParams, characteristic_numbers, mass_residual
from .gelfand import CountQuery, CountResult, count_radial_solutions

__version__ = "0.1.0"
