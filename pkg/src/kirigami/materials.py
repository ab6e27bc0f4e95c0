"""Incompressible two-constant Mooney-Rivlin material under equibiaxial stretch.

Units throughout the package: mm, kPa, mN, µJ (1 kPa·mm³ = 1 µJ).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InvalidMaterialError(ValueError):
    """Raised when a material has a non-positive small-strain shear modulus."""


def _check_stretch(lam):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError(f"stretch ratio must be positive, got {lam}")
    return lam


@dataclass(frozen=True)
class MooneyRivlin:
    """Mooney-Rivlin constants in kPa.

    ``c1`` may be negative as long as the shear modulus ``2 (c1 + c2)`` is
    positive.
    """

    c1: float
    c2: float

    def __post_init__(self):
        if not 2.0 * (self.c1 + self.c2) > 0.0:
            raise InvalidMaterialError(
                f"shear modulus 2(c1 + c2) must be positive, got c1={self.c1}, c2={self.c2}"
            )

    @property
    def shear_modulus(self) -> float:
        return 2.0 * (self.c1 + self.c2)


# Table of fitted constants (kPa) and sheet thicknesses (mm).
SUBSTRATE = MooneyRivlin(22.1, 1.7)
KIRIGAMI_G = MooneyRivlin(17.9, 84.5)
KIRIGAMI_W = MooneyRivlin(-2.6, 185.8)

DEFAULT_MATERIALS = {
    "substrate": {"c1": 22.1, "c2": 1.7, "thickness": 1.1},
    "kirigami_g": {"c1": 17.9, "c2": 84.5, "thickness": 1.6},
    "kirigami_w": {"c1": -2.6, "c2": 185.8, "thickness": 1.4},
}


def cauchy_stress_equibiaxial(mat: MooneyRivlin, lam):
    """In-plane Cauchy stress (kPa) of an incompressible sheet stretched
    equally in both in-plane directions, with zero through-thickness stress."""
    lam = _check_stretch(lam)
    return 2.0 * mat.c1 * (lam**2 - lam**-4) - 2.0 * mat.c2 * (lam**-2 - lam**4)


def strain_energy_density_equibiaxial(mat: MooneyRivlin, lam):
    """Stored energy per unit reference volume (kPa = µJ/mm³)."""
    lam = _check_stretch(lam)
    return mat.c1 * (2.0 * lam**2 + lam**-4 - 3.0) + mat.c2 * (lam**4 + 2.0 * lam**-2 - 3.0)


def strain_energy_density_equibiaxial_derivative(mat: MooneyRivlin, lam):
    """d/dλ of :func:`strain_energy_density_equibiaxial`."""
    lam = _check_stretch(lam)
    return mat.c1 * (4.0 * lam - 4.0 * lam**-5) + mat.c2 * (4.0 * lam**3 - 4.0 * lam**-3)


def young_modulus(mat: MooneyRivlin) -> float:
    """Small-strain Young's modulus ``E = 3 mu = 6 (c1 + c2)`` of the
    incompressible material."""
    mu = 2.0 * (mat.c1 + mat.c2)
    if mu <= 0.0:
        raise InvalidMaterialError(f"non-positive shear modulus {mu}")
    return 3.0 * mu


def small_strain_stretch_energy(c_s: float, area: float, eps):
    """Quadratic stretching energy ``A C_s eps^2 / 2``.

    ``c_s`` in kPa·mm (numerically N/m), ``area`` in mm², result in µJ.
    """
    if area < 0:
        raise ValueError(f"area must be non-negative, got {area}")
    eps = np.asarray(eps, dtype=float)
    return 0.5 * area * c_s * eps**2
