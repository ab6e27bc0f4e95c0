"""Energy-balance model: pre-stretch -> curvature -> normalized height.

The released substrate stretching energy is assumed to be converted into
bending energy of the composite at a uniform curvature. Two shape laws relate
that curvature to the height of the buckled structure: a pyramid (cross
patterns on square substrates) and a spherical cap (lobe patterns).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .materials import MooneyRivlin, strain_energy_density_equibiaxial


class ShapeClass(str, Enum):
    PYRAMID = "pyramid"
    SPHERICAL_CAP = "spherical_cap"


class InfeasibleTargetError(ValueError):
    """Requested height ratio lies outside what the shape law can reach."""

    def __init__(self, target, bound, message=None):
        self.target = target
        self.bound = bound
        super().__init__(
            message or f"target H/L={target!r} not attainable; attainable range is [0, {bound!r})"
        )


@dataclass(frozen=True)
class AnalyticInput:
    """``c_s`` in kPa·mm, ``d_eq`` in kPa·mm³, ``length_l`` in mm."""

    c_s: float
    d_eq: float
    length_l: float
    prestretch: float
    shape_class: ShapeClass = ShapeClass.PYRAMID

    def __post_init__(self):
        if not (self.c_s > 0 and self.d_eq > 0):
            raise ValueError("stiffnesses must be positive")
        if not self.length_l > 0:
            raise ValueError("length must be positive")
        if self.prestretch < 1.0:
            raise ValueError("prestretch must be >= 1")
        object.__setattr__(self, "shape_class", ShapeClass(self.shape_class))

    @property
    def eps(self) -> float:
        return self.prestretch - 1.0


def curvature_from_prestretch(c_s, d_eq, eps):
    """Curvature (1/mm) at which bending energy equals the released
    small-strain stretching energy."""
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0):
        raise ValueError("strain must be non-negative")
    return np.sqrt(c_s / d_eq) * eps / (1.0 + eps)


def pyramid_height_ratio(kappa, length_l):
    """H/L of a four-sided pyramid whose arms (half-length L/2) bend at
    curvature ``kappa``. Bounded above by 1/2."""
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa < 0) or np.any(np.asarray(length_l) <= 0):
        raise ValueError("kappa must be >= 0 and length positive")
    return np.sin(np.arctan(kappa * length_l / 4.0)) / 2.0


def cap_height_ratio(kappa, length_l):
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa < 0) or np.any(np.asarray(length_l) <= 0):
        raise ValueError("kappa must be >= 0 and length positive")
    return kappa * length_l / 8.0


def cap_chord_length(rho, height):
    """Arc length ``L`` of a cap of radius ``rho`` and height ``H`` from
    ``(L/2)^2 = rho^2 - (rho - H)^2 + H^2``."""
    return 2.0 * np.sqrt(rho**2 - (rho - height) ** 2 + height**2)


def scaling_law_height_ratio(c_s, d_eq, length_l, eps):
    """Cap-shape height ratio written directly in terms of stiffness and strain."""
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0):
        raise ValueError("strain must be non-negative")
    return length_l / 8.0 * np.sqrt(c_s / d_eq) * eps / (1.0 + eps)


def height_ratio(inp: AnalyticInput):
    kappa = curvature_from_prestretch(inp.c_s, inp.d_eq, inp.eps)
    if inp.shape_class is ShapeClass.PYRAMID:
        return float(pyramid_height_ratio(kappa, inp.length_l))
    return float(cap_height_ratio(kappa, inp.length_l))


def unstretched_area(length_l, lam, substrate_shape="square", radius=None):
    """Area (mm²) of the substrate before pre-stretching.

    For the square-like substrate ``L`` is the diagonal of the stretched
    square, ``A = (L / (sqrt(2) lam))^2``; for a circle of released radius
    ``radius``, ``A = pi R^2 / lam^2``.
    """
    if lam < 1.0:
        raise ValueError("prestretch must be >= 1")
    if substrate_shape == "square":
        return (length_l / (math.sqrt(2.0) * lam)) ** 2
    if substrate_shape == "circle":
        r = length_l / 2.0 if radius is None else radius
        return math.pi * r * r / lam**2
    raise ValueError(f"unknown substrate shape {substrate_shape!r}")


def stretch_energy_total(mat: MooneyRivlin, lam, area, t_s):
    """Exact Mooney-Rivlin stretching energy (µJ) stored in the substrate."""
    return strain_energy_density_equibiaxial(mat, lam) * area * t_s


def bending_energy_total(d_eq, area, kappa):
    return 0.5 * area * d_eq * np.asarray(kappa, dtype=float) ** 2


def attainable_bound(inp: AnalyticInput, free_variable: str) -> float:
    """Supremum of H/L reachable by varying ``free_variable`` alone."""
    s = math.sqrt(inp.c_s / inp.d_eq)
    if free_variable == "prestretch":
        kappa_max = s
        if inp.shape_class is ShapeClass.PYRAMID:
            return float(pyramid_height_ratio(kappa_max, inp.length_l))
        return float(cap_height_ratio(kappa_max, inp.length_l))
    if free_variable == "size":
        return 0.5 if inp.shape_class is ShapeClass.PYRAMID else math.inf
    raise ValueError(f"free_variable must be 'prestretch' or 'size', got {free_variable!r}")


def _bracket_and_solve(f, lo, hi0, xtol, maxiter):
    hi = hi0
    while f(hi) < 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e15:
            raise RuntimeError("failed to bracket the root")
    return brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=maxiter)


def inverse_design(
    target_h_over_l: float,
    free_variable: str,
    fixed: AnalyticInput,
    xtol: float = 1e-12,
    maxiter: int = 200,
) -> float:
    """Solve for the pre-stretch or the size ``L`` giving a target H/L.

    ``fixed`` supplies everything else; its value of the free variable is
    only used as the initial bracket scale.
    """
    bound = attainable_bound(fixed, free_variable)
    if not 0.0 <= target_h_over_l < bound:
        raise InfeasibleTargetError(target_h_over_l, bound)

    if free_variable == "prestretch":
        if target_h_over_l == 0.0:
            return 1.0

        def residual(lam):
            return height_ratio(replace(fixed, prestretch=lam)) - target_h_over_l

        return float(_bracket_and_solve(residual, 1.0, max(fixed.prestretch, 1.5), xtol, maxiter))

    if target_h_over_l == 0.0:
        raise InfeasibleTargetError(target_h_over_l, bound, "size L must be positive; H/L = 0 needs L = 0")
    if fixed.eps == 0.0:
        raise InfeasibleTargetError(target_h_over_l, 0.0, "zero pre-stretch gives H/L = 0 at every size")

    def residual(length):
        return height_ratio(replace(fixed, length_l=length)) - target_h_over_l

    lo = 1e-12 * fixed.length_l
    return float(_bracket_and_solve(residual, lo, fixed.length_l, xtol, maxiter))
