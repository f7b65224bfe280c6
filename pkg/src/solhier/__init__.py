"""Soliton hierarchies from loop-algebra splittings.

Modules:

* :mod:`solhier.lie` -- matrix Lie algebras, involutions, Cartan data and
  nested decompositions.
* :mod:`solhier.loops` -- Laurent loop elements and the five splittings.
* :mod:`solhier.grid` -- grids, derivatives and quadrature.
* :mod:`solhier.hierarchy` -- the ``Q`` recursion, flows and integration.
* :mod:`solhier.zero_curvature` -- connections, curvature, frames, Lax
  pairs and the generalized sine-Gordon equation.
* :mod:`solhier.factorization` -- Birkhoff factorization, inverse
  scattering and dressing.
* :mod:`solhier.cli` -- scenario-driven command line.
"""

from .errors import (ConfigurationError, DomainError, FactorizationError, FlatnessError, IntegrationError,
                     ResourceError, SingularityError, SolhierError, StructuralError, UnsupportedOperationError)
from .grid import Axis, Grid, GridField, line_grid
from .hierarchy import HierarchyInstance, compute_Q, evolve, flow_rhs, vacuum_frame
from .loops import LoopElement, make_family, membership, project_split, vacuum_generator

__version__ = "0.1.0"

__all__ = [
    "Axis", "ConfigurationError", "DomainError", "FactorizationError", "FlatnessError", "Grid", "GridField",
    "HierarchyInstance", "IntegrationError", "LoopElement", "ResourceError", "SingularityError",
    "SolhierError", "StructuralError", "UnsupportedOperationError", "compute_Q", "evolve", "flow_rhs",
    "line_grid", "make_family", "membership", "project_split", "vacuum_frame", "vacuum_generator",
]
