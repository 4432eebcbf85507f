"""Numerical toolkit for two-dimensional superintegrable potentials with third-order integrals.

Submodules are imported on demand so that thread limits set by the command
line take effect before numpy loads.
"""

__version__ = "0.1.0"

__all__ = ["potentials", "special_functions", "integrals", "dynamics", "trajectory_algebraic",
           "cubic_algebra", "schrodinger", "cli"]
