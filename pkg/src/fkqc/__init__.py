"""Goal-oriented adaptive quasicontinuum for a Frenkel-Kontorova chain."""
from .adapt import AdaptConfig, AdaptResult, initial_mesh, mark, run
from .assembly import FactorizationError, assemble_system, discretize, solve
from .estimator import dislocation_goal, estimate, exact_goal_error
from .fk_model import ModelParams, Partition, assemble_quadratic, energy_ac
from .mesh import Mesh, NestedMeshPair, bisect, partial_refine
from .oracle import build_reference

__version__ = "0.1.0"
