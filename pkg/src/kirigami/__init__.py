"""Strain-mismatch buckling of trilayer Kirigami composites.

Modules
-------
materials
    Mooney-Rivlin material under equibiaxial stretch.
laminate
    Membrane and bending stiffness of the bonded stack.
analytic
    Energy-balance shape laws and inverse design.
pattern
    Cut patterns, substrates, coverage and meshing.
shellsim
    Discrete-shell equilibria and snap-through.
cli
    Batch front end.
"""
from .materials import MooneyRivlin

__version__ = "0.1.0"
__all__ = ["MooneyRivlin", "__version__"]
