"""Monge-Ampere equations for (n-1)-plurisubharmonic functions on flat complex tori.

Subpackages:

* :mod:`torusma.forms`   pointwise (1,1) / (n-1,n-1) form algebra
* :mod:`torusma.fields`  periodic fields with spectral differentiation
* :mod:`torusma.solver`  Newton-continuity solver for the (u, b) pair
* :mod:`torusma.verify`  randomized certification of the exact identities
* :mod:`torusma.cli`     config-driven command line runner
"""

from . import fields, forms, solver, verify

__all__ = ["fields", "forms", "solver", "verify"]
__version__ = "0.1.0"
