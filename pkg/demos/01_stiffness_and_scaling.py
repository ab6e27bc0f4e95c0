"""
Stiffness and the analytic height estimate
==========================================

Walks through the closed-form layers: layer stiffnesses, the trilayer
bending stiffness as a function of coverage, the curvature that balances
released stretch against bending, and the H/L plateau.
"""

import numpy as np

from kirigami.analytic import AnalyticInput, height_ratio, inverse_design
from kirigami.laminate import (
    LayerSpec,
    TrilayerSpec,
    bending_stiffness_bilayer,
    bending_stiffness_trilayer,
    membrane_stiffness,
)
from kirigami.materials import KIRIGAMI_G, SUBSTRATE, young_modulus

# Two materials, both Mooney-Rivlin. Units are mm and kPa throughout.
sub = LayerSpec(SUBSTRATE, 1.1)
face = LayerSpec(KIRIGAMI_G, 1.6)
print(f"E substrate {young_modulus(SUBSTRATE):.1f} kPa, E face {young_modulus(KIRIGAMI_G):.1f} kPa")

# Membrane stiffness of the substrate; kPa*mm reads directly as N/m.
c_s = membrane_stiffness(sub)
print(f"C_s = {c_s:.2f} N/m")

# Covering more of the substrate with face material stiffens it in bending.
# The symmetric sandwich beats a one-sided bilayer by a wide margin.
print("\ncoverage   D_tri (uJ)   D_bi (uJ)")
for n in (0.0, 0.25, 0.5, 0.75, 1.0):
    spec = TrilayerSpec(sub, face, 1.6, n)
    print(f"{n:8.2f} {bending_stiffness_trilayer(spec):12.1f} {bending_stiffness_bilayer(spec):11.1f}")

# A cross 60 mm long and 10 mm wide on a 60 mm square covers 11/36 of it.
d_eq = bending_stiffness_trilayer(TrilayerSpec(sub, face, 1.6, 11 / 36))

# H/L rises with pre-stretch and levels off below one half.
print("\nlambda   H/L (pyramid)   H/L (cap)")
for lam in np.arange(1.2, 2.61, 0.2):
    pyr = height_ratio(AnalyticInput(c_s, d_eq, 60.0, lam, "pyramid"))
    cap = height_ratio(AnalyticInput(c_s, d_eq, 60.0, lam, "spherical_cap"))
    print(f"{lam:6.2f} {pyr:14.4f} {cap:11.4f}")

# Inverse design: which pre-stretch gives H/L = 0.3 at this size?
lam = inverse_design(0.3, "prestretch", AnalyticInput(c_s, d_eq, 60.0, 1.5))
print(f"\nH/L = 0.3 needs lambda = {lam:.4f}")

# And which size gives 0.3 at lambda = 1.6?
size = inverse_design(0.3, "size", AnalyticInput(c_s, d_eq, 60.0, 1.6))
print(f"at lambda 1.6 it needs L = {size:.1f} mm")
