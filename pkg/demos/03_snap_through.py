"""
Snap-through under displacement control
=======================================

Starts in the upward state of the small cross and drives the arm tips down
through the centre plane. Along the way the reaction force drops while the
tips keep moving: that stretch of the curve is where the sheet pulls itself
through, and it lands in the other well.
"""

from kirigami import pattern, shellsim
from kirigami.laminate import LayerSpec
from kirigami.materials import KIRIGAMI_G, SUBSTRATE

mesh = pattern.generate_mesh(pattern.cross(20, 20 / 6), pattern.square(20), 0.8)
mesh = pattern.assign_rest_metrics(mesh, 1.6)
model = shellsim.ShellModel(
    mesh, LayerSpec(SUBSTRATE, 1.1 / 3), LayerSpec(KIRIGAMI_G, 1.6 / 3), reference_length=20.0
)

start = shellsim.minimize(model, seed_perturbation="+")
print(f"start: {start.label}, H/L {start.height_ratio:.4f}")

curve = shellsim.snap_through(model, start, n_steps=24)

print("\n  u (mm)    F (mN)    E (uJ)")
for u, f, e in zip(curve.displacement, curve.force, curve.energy):
    print(f"{u:8.3f} {f:9.4f} {e:9.4f}")

print(f"\nnegative-stiffness segments: {curve.negative_stiffness_segments()}")
if curve.final_state is not None:
    print(f"released into: {curve.final_state.label}, H/L {curve.final_state.height_ratio:.4f}")
curve.to_csv("snap_curve.csv")
