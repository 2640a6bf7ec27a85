"""Numerical laboratory for the super-Liouville system on planar domains.

Modules
-------
grid, spin2d, fields, transforms, exact, solver, diagnostics, blowup_lab, cli.
The stencil kernels come from a compiled extension when it is available and
from NumPy otherwise (see :mod:`superl.kernels`).
"""
__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402
from .grid import Domain, Grid, make_grid, ConfigurationError, DomainError  # noqa: E402
from .fields import ScalarField, SpinorField, CouplingField  # noqa: E402

__all__ = ["__version__", "BACKEND", "Domain", "Grid", "make_grid", "ConfigurationError",
           "DomainError", "ScalarField", "SpinorField", "CouplingField"]
