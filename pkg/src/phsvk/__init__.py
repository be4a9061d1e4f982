"""Structure-preserving mixed finite elements for geometrically nonlinear elastodynamics.

The model is a finite-dimensional port-Hamiltonian system in velocity,
second Piola-Kirchhoff stress and deformation gradient, integrated with the
implicit midpoint rule.
"""

from .assembly import Assembler, Material, MixedSpaces, mixed_spaces
from .config import ConfigError, ScenarioConfig, default_config, load_config, parse_config
from .integrator import IntegratorConfig, NewtonDiverged, StepFailed, newton_solve, run, step_midpoint
from .mesh import BoundaryTag, Mesh, interval_mesh, rect_tri_mesh
from .scenarios import run_beam, run_rod, run_scenario
from .system import BoundaryInput, PHSystem, State

__version__ = "0.1.0"

__all__ = [
    "Assembler",
    "BoundaryInput",
    "BoundaryTag",
    "ConfigError",
    "IntegratorConfig",
    "Material",
    "Mesh",
    "MixedSpaces",
    "NewtonDiverged",
    "PHSystem",
    "ScenarioConfig",
    "State",
    "StepFailed",
    "default_config",
    "interval_mesh",
    "load_config",
    "mixed_spaces",
    "newton_solve",
    "parse_config",
    "rect_tri_mesh",
    "run",
    "run_beam",
    "run_rod",
    "run_scenario",
    "step_midpoint",
]
