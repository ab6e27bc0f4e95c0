"""Plate stiffness of the bonded substrate / Kirigami stack.

Bending stiffnesses are returned in kPa·mm³ (= µJ = 1e-6 N·m); membrane
stiffness in kPa·mm (= N/m).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .materials import MooneyRivlin, young_modulus


@dataclass(frozen=True)
class LayerSpec:
    material: MooneyRivlin
    thickness: float  # mm

    def __post_init__(self):
        if not self.thickness > 0:
            raise ValueError(f"layer thickness must be positive, got {self.thickness}")

    @property
    def modulus(self) -> float:
        return young_modulus(self.material)


@dataclass(frozen=True)
class TrilayerSpec:
    """Substrate sandwiched between two identical face (Kirigami) layers.

    ``coverage`` is the fraction of the substrate area covered by the face
    pattern; ``prestretch`` is the equibiaxial substrate stretch at bonding.
    """

    substrate: LayerSpec
    face: LayerSpec
    prestretch: float = 1.0
    coverage: float = 1.0
    poisson: float = 0.5

    def __post_init__(self):
        if self.prestretch < 1.0:
            raise ValueError(f"prestretch must be >= 1, got {self.prestretch}")
        if not 0.0 <= self.coverage <= 1.0:
            raise ValueError(f"coverage must lie in [0, 1], got {self.coverage}")
        if not 0.0 <= self.poisson <= 0.5:
            raise ValueError(f"Poisson ratio must lie in [0, 0.5], got {self.poisson}")

    @property
    def eps(self) -> float:
        return self.prestretch - 1.0

    def with_coverage(self, coverage: float) -> "TrilayerSpec":
        return replace(self, coverage=coverage)


def _plate_factor(nu: float) -> float:
    if nu >= 1.0 or nu <= -1.0:
        raise ValueError(f"Poisson ratio must lie in (-1, 1), got {nu}")
    return 1.0 / (1.0 - nu * nu)


def membrane_stiffness(layer: LayerSpec, nu: float = 0.5) -> float:
    """In-plane stretching rigidity ``E t / (1 - nu^2)``."""
    return layer.modulus * layer.thickness * _plate_factor(nu)


def plate_bending_stiffness(layer: LayerSpec, nu: float = 0.5) -> float:
    """Single homogeneous plate, ``E t^3 / (12 (1 - nu^2))``."""
    return layer.modulus * layer.thickness**3 / 12.0 * _plate_factor(nu)


def bending_stiffness_trilayer(spec: TrilayerSpec) -> float:
    """Equivalent bending stiffness of the symmetric trilayer.

    The neutral axis sits at the substrate mid-plane; covered and uncovered
    regions are mixed by area fraction.
    """
    es, ts = spec.substrate.modulus, spec.substrate.thickness
    ek, tk = spec.face.modulus, spec.face.thickness
    f = _plate_factor(spec.poisson)
    bare = es * ts**3 / 12.0
    covered = 2.0 * ek * (tk**3 / 12.0 + tk * (tk / 2.0 + ts / 2.0) ** 2) + bare
    n = spec.coverage
    return n * covered * f + (1.0 - n) * bare * f


def neutral_axis_bilayer(substrate: LayerSpec, face: LayerSpec) -> float:
    """Height of the bilayer neutral axis above the bottom of the substrate (mm)."""
    ts, tk = substrate.thickness, face.thickness
    r = substrate.modulus / face.modulus
    return (tk * (tk / 2.0 + ts) + r * ts * (ts / 2.0)) / (tk + r * ts)


def bending_stiffness_bilayer(spec: TrilayerSpec) -> float:
    """Equivalent bending stiffness when only one face layer is bonded."""
    es, ts = spec.substrate.modulus, spec.substrate.thickness
    ek, tk = spec.face.modulus, spec.face.thickness
    f = _plate_factor(spec.poisson)
    zbar = neutral_axis_bilayer(spec.substrate, spec.face)
    covered = ek * (tk**3 / 12.0 + tk * (tk / 2.0 + ts - zbar) ** 2) + es * (
        ts**3 / 12.0 + ts * (ts / 2.0 - zbar) ** 2
    )
    bare = es * ts**3 / 12.0
    n = spec.coverage
    return n * covered * f + (1.0 - n) * bare * f


def stiffness_ratio(spec: TrilayerSpec) -> float:
    """``D_tri / D_bi`` for the same coverage; tends to 8 for a vanishing substrate."""
    return bending_stiffness_trilayer(spec) / bending_stiffness_bilayer(spec)
