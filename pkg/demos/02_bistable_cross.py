"""
Two stable shapes of a pre-stretched cross
==========================================

Meshes a cross-shaped face layer on a square substrate, releases the
pre-stretch in the simulator and collects the equilibria it lands in.

The specimen here is a third of the desk-scale one (20 mm instead of 60 mm,
layers a third as thick), so L/t matches and the run takes seconds. Pass
``--full`` for the 60 mm specimen (a couple of minutes).
"""

import sys
from pathlib import Path

from kirigami import pattern, shellsim
from kirigami.analytic import AnalyticInput, height_ratio
from kirigami.laminate import LayerSpec, TrilayerSpec, bending_stiffness_trilayer, membrane_stiffness
from kirigami.materials import KIRIGAMI_G, SUBSTRATE

scale = 1.0 if "--full" in sys.argv else 1 / 3
size, lam = 60 * scale, 1.6
sub = LayerSpec(SUBSTRATE, 1.1 * scale)
face = LayerSpec(KIRIGAMI_G, 1.6 * scale)

# Geometry: the cross and the square it sits on.
cross = pattern.cross(size, size / 6)
square = pattern.square(size)
print(f"coverage {pattern.coverage_fraction(cross, square):.4f}")

# Mesh once, then attach rest metrics for the chosen pre-stretch.
mesh = pattern.generate_mesh(cross, square, 1.25 * scale)
mesh = pattern.assign_rest_metrics(mesh, lam)
print(f"{mesh.n_vertices} vertices, smallest angle {mesh.min_angle_deg():.1f} deg")

model = shellsim.ShellModel(mesh, sub, face, reference_length=size)

# Search from an upward and a downward seed. Each search pushes gently on
# the sheet, then lets go and relaxes.
failures = []
states = shellsim.find_stable_states(model, failures=failures)
for st in states:
    print(f"{st.label:>9}: H/L {st.height_ratio:.4f}, energy {st.energy:.3f} uJ, {st.iterations} Newton steps")
for f in failures:
    print("no equilibrium:", f)

# Compare with the closed-form estimate. The simulated cross sits lower:
# the bare substrate corners soak up part of the released stretch.
n = pattern.coverage_fraction(cross, square)
d_eq = bending_stiffness_trilayer(TrilayerSpec(sub, face, lam, n))
print(f"analytic H/L {height_ratio(AnalyticInput(membrane_stiffness(sub), d_eq, size, lam)):.4f}")

out = Path("demo_output")
out.mkdir(exist_ok=True)
for st in states:
    shellsim.write_state_obj(out / f"cross_{st.label}.obj", model, st)
print(f"shapes written to {out}/")
