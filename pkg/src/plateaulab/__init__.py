"""plateaulab: a desk-scale laboratory for anisotropic Plateau problems.

Surfaces are finite sets of dyadic cubical faces plus polyhedral
fragments, spanning conditions are checked algebraically over Z/2 or by
exact linking-number intersection tests, and the deformation, projection
and density constructions of the underlying theory run as instrumented
algorithms whose quantitative bounds are verified on every call.
"""

__version__ = "0.1.0"
