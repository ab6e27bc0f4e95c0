"""Shared fixtures that are not pytest fixtures: regular lattice patches."""
import math

import numpy as np
from scipy.spatial import Delaunay


def hex_patch(radius, h):
    """Equilateral-triangle lattice filling a lattice-aligned hexagon of
    circumradius ``radius`` (every face equilateral, boundary straight)."""
    n = int(round(radius / h))
    pts = [
        (h * (i + 0.5 * j), h * j * math.sqrt(3) / 2)
        for j in range(-n, n + 1)
        for i in range(-n, n + 1)
        if abs(i + j) <= n
    ]
    pts = np.array(pts)
    return pts, Delaunay(pts).simplices


def wrap_on_cylinder(xy, rho, angle_deg=0.0):
    """Isometric wrap of planar points onto a cylinder of radius ``rho``
    whose axis makes ``angle_deg`` with the y axis."""
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    u = c * xy[:, 0] + s * xy[:, 1]
    v = -s * xy[:, 0] + c * xy[:, 1]
    return np.column_stack([rho * np.sin(u / rho), v, rho * (1 - np.cos(u / rho))])
