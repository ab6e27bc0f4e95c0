"""Discrete-shell simulator for the released trilayer.

The composite is a single triangulated mid-surface. Each face carries a
substrate membrane (rest metric shrunk by the pre-stretch) and, where the
pattern covers it, the two face-layer membranes (rest metric = bonded planar
metric). Bending lives on interior edges (hinges) with the local laminate
stiffness. Equilibria are found by minimising the total energy with a damped Newton
method (L-BFGS is available as an alternative).

Units: mm, kPa, mN, µJ.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .laminate import (
    LayerSpec,
    TrilayerSpec,
    bending_stiffness_trilayer,
    membrane_stiffness,
    plate_bending_stiffness,
)
from .pattern import TriMesh

log = logging.getLogger(__name__)

# Hinge energy k * theta^2 with k = BEND_COEFF * D * |e| / (h1 + h2), h1, h2 the
# heights of the two adjacent triangles over the hinge. On near-equilateral
# meshes this converges to D kappa^2 / 2 per unit area for cylindrical bending.
BEND_COEFF = 1.0


class ElementInversionError(FloatingPointError):
    def __init__(self, face):
        self.face = int(face)
        super().__init__(f"degenerate or inverted element at face {self.face}")


class NonConvergenceError(RuntimeError):
    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


def _scatter_matrix(index, n_vertices):
    """Sparse ``(n_vertices, index.size)`` summing per-corner rows into vertices."""
    flat = index.T.ravel()  # corner-major: all corner-0 rows, then corner-1, ...
    return sp.csr_matrix(
        (np.ones(flat.size), (flat, np.arange(flat.size))), shape=(n_vertices, flat.size)
    )


@dataclass
class _Layer:
    faces: np.ndarray  # face indices carrying this layer
    ginv: np.ndarray  # (k, 2, 2) inverse rest metric
    gbar: np.ndarray  # (k, 3) rest metric entries 00, 01, 11
    volume: np.ndarray  # rest area * thickness
    c1: float
    c2: float


@dataclass(eq=False)
class ShellModel:
    """Energy model over a mesh with rest metrics already assigned."""

    mesh: TriMesh
    substrate: LayerSpec
    face: LayerSpec
    poisson: float = 0.5
    pinned: np.ndarray | None = None  # (V, 3) boolean DOF mask
    reference_length: float | None = None  # L used for H/L and tolerances (mm)
    layers: list = field(init=False, repr=False)
    hinge_stiffness: np.ndarray = field(init=False, repr=False)
    hinge_d: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = self.mesh
        nf = len(m.faces)
        self.layers = []
        gs = m.rest_metric_substrate
        self.layers.append(self._make_layer(np.arange(nf), gs, self.substrate.thickness, self.substrate))
        cov = np.flatnonzero(m.face_covered)
        if cov.size:
            gf = m.rest_metric_face[cov]
            self.layers.append(self._make_layer(cov, gf, 2.0 * self.face.thickness, self.face))

        d_cov = bending_stiffness_trilayer(
            TrilayerSpec(self.substrate, self.face, 1.0, 1.0, self.poisson)
        )
        d_bare = plate_bending_stiffness(self.substrate, self.poisson)
        face_d = np.where(m.face_covered, d_cov, d_bare)
        self.hinge_d = face_d[m.hinge_faces].mean(axis=1)

        x = m.vertices
        h = m.hinges
        e = x[h[:, 1]] - x[h[:, 0]]
        elen = np.linalg.norm(e, axis=1)
        ha = np.linalg.norm(np.cross(e, x[h[:, 2]] - x[h[:, 0]]), axis=1) / elen
        hb = np.linalg.norm(np.cross(e, x[h[:, 3]] - x[h[:, 0]]), axis=1) / elen
        self.hinge_stiffness = BEND_COEFF * self.hinge_d * elen / (ha + hb)

        self._face_scatter = _scatter_matrix(m.faces, m.n_vertices)
        self._hinge_scatter = _scatter_matrix(h, m.n_vertices)
        if self.pinned is None:
            self.pinned = default_pins(m)
        self.pinned = np.asarray(self.pinned, dtype=bool).reshape(m.n_vertices, 3)

    @staticmethod
    def _make_layer(faces, gbar, thickness, layer):
        det = gbar[:, 0, 0] * gbar[:, 1, 1] - gbar[:, 0, 1] ** 2
        ginv = np.empty_like(gbar)
        ginv[:, 0, 0] = gbar[:, 1, 1] / det
        ginv[:, 1, 1] = gbar[:, 0, 0] / det
        ginv[:, 0, 1] = ginv[:, 1, 0] = -gbar[:, 0, 1] / det
        area = 0.5 * np.sqrt(det)
        gb = np.column_stack([gbar[:, 0, 0], gbar[:, 0, 1], gbar[:, 1, 1]])
        return _Layer(faces, ginv, gb, area * thickness, layer.material.c1, layer.material.c2)

    # -- derived scalars ---------------------------------------------------

    @property
    def length_scale(self) -> float:
        """``reference_length`` if given, else the planar diameter of the mesh."""
        if self.reference_length is not None:
            return float(self.reference_length)
        xy = self.mesh.vertices[:, :2]
        return float(np.max(np.linalg.norm(xy - xy.mean(axis=0), axis=1)) * 2.0)

    @property
    def c_s(self) -> float:
        return membrane_stiffness(self.substrate, self.poisson)

    # -- energies ------------------------------------------------------------

    def _membrane(self, x, want_grad):
        f = self.mesh.faces
        e1 = x[f[:, 1]] - x[f[:, 0]]
        e2 = x[f[:, 2]] - x[f[:, 0]]
        g00 = np.einsum("ij,ij->i", e1, e1)
        g11 = np.einsum("ij,ij->i", e2, e2)
        g01 = np.einsum("ij,ij->i", e1, e2)
        detg = g00 * g11 - g01 * g01
        bad = detg <= 1e-14 * (g00 * g11 + 1e-300)
        if np.any(bad):
            raise ElementInversionError(np.flatnonzero(bad)[0])
        energy = 0.0
        s00 = np.zeros(len(f))
        s01 = np.zeros(len(f))
        s11 = np.zeros(len(f))
        for L in self.layers:
            idx = L.faces
            a00, a01, a11 = L.ginv[:, 0, 0], L.ginv[:, 0, 1], L.ginv[:, 1, 1]
            G00, G01, G11, dg = g00[idx], g01[idx], g11[idx], detg[idx]
            # invariants written in terms of g - gbar so a face at rest gives
            # exactly zero energy: tr C = 2 + ta, det C = 1 + db
            b00, b01, b11 = L.gbar[:, 0], L.gbar[:, 1], L.gbar[:, 2]
            d00, d01, d11 = G00 - b00, G01 - b01, G11 - b11
            ta = a00 * d00 + 2.0 * a01 * d01 + a11 * d11
            db = (b11 * d00 - 2.0 * b01 * d01 + b00 * d11 + d00 * d11 - d01 * d01) / (b00 * b11 - b01 * b01)
            tr = 2.0 + ta
            det = 1.0 + db
            inv_det = 1.0 / det
            w = L.c1 * (ta - db * inv_det) + L.c2 * (db + (ta - 2.0 * db) * inv_det)
            energy += float(np.dot(w, L.volume))
            if want_grad:
                dw_tr = L.c1 + L.c2 * inv_det
                dw_det = -L.c1 * inv_det**2 + L.c2 - L.c2 * tr * inv_det**2
                # d det / d g = det * g^{-1}
                k = dw_det * det / dg
                v = L.volume
                s00[idx] += v * (dw_tr * a00 + k * G11)
                s11[idx] += v * (dw_tr * a11 + k * G00)
                s01[idx] += v * (dw_tr * a01 - k * G01)
        if not want_grad:
            return energy, None
        ge1 = 2.0 * (s00[:, None] * e1 + s01[:, None] * e2)
        ge2 = 2.0 * (s01[:, None] * e1 + s11[:, None] * e2)
        corners = np.concatenate([-(ge1 + ge2), ge1, ge2])
        return energy, self._face_scatter @ corners

    def _bending(self, x, want_grad):
        h = self.mesh.hinges
        x0, x1, x2, x3 = x[h[:, 0]], x[h[:, 1]], x[h[:, 2]], x[h[:, 3]]
        e = x1 - x0
        na = np.cross(e, x2 - x0)
        nb = np.cross(x3 - x0, e)
        elen = np.linalg.norm(e, axis=1)
        ehat = e / elen[:, None]
        na2 = np.einsum("ij,ij->i", na, na)
        nb2 = np.einsum("ij,ij->i", nb, nb)
        sin_t = np.einsum("ij,ij->i", np.cross(na, nb), ehat)
        cos_t = np.einsum("ij,ij->i", na, nb)
        theta = np.arctan2(sin_t, cos_t)
        k = self.hinge_stiffness
        energy = float(np.dot(k, theta * theta))
        if not want_grad:
            return energy, None
        ua = na / na2[:, None]
        ub = nb / nb2[:, None]
        d2 = -elen[:, None] * ua
        d3 = -elen[:, None] * ub
        pa0 = np.einsum("ij,ij->i", x2 - x1, ehat)
        pb0 = np.einsum("ij,ij->i", x3 - x1, ehat)
        pa1 = np.einsum("ij,ij->i", x2 - x0, ehat)
        pb1 = np.einsum("ij,ij->i", x3 - x0, ehat)
        d0 = -(pa0[:, None] * ua + pb0[:, None] * ub)
        d1 = pa1[:, None] * ua + pb1[:, None] * ub
        c = (2.0 * k * theta)[:, None]
        corners = np.concatenate([c * d0, c * d1, c * d2, c * d3])
        return energy, self._hinge_scatter @ corners

    def dihedral_angles(self, x):
        h = self.mesh.hinges
        x0, x1, x2, x3 = x[h[:, 0]], x[h[:, 1]], x[h[:, 2]], x[h[:, 3]]
        e = x1 - x0
        na = np.cross(e, x2 - x0)
        nb = np.cross(x3 - x0, e)
        ehat = e / np.linalg.norm(e, axis=1)[:, None]
        return np.arctan2(np.einsum("ij,ij->i", np.cross(na, nb), ehat), np.einsum("ij,ij->i", na, nb))

    def membrane_energy(self, x) -> float:
        return self._membrane(np.asarray(x, dtype=float), False)[0]

    def bending_energy(self, x) -> float:
        return self._bending(np.asarray(x, dtype=float), False)[0]

    def energy(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return self._membrane(x, False)[0] + self._bending(x, False)[0]

    def energy_and_gradient(self, x, project=True):
        """Total energy (µJ) and its gradient (mN) per vertex; pinned DOFs zeroed."""
        x = np.asarray(x, dtype=float)
        em, gm = self._membrane(x, True)
        eb, gb = self._bending(x, True)
        g = gm + gb
        if project:
            g = np.where(self.pinned, 0.0, g)
        return em + eb, g


def total_energy_and_gradient(model: ShellModel, positions):
    return model.energy_and_gradient(positions)


def membrane_energy(model: ShellModel, positions) -> float:
    return model.membrane_energy(positions)


def bending_energy(model: ShellModel, positions) -> float:
    return model.bending_energy(positions)


def default_pins(mesh: TriMesh) -> np.ndarray:
    """Centre vertex fixed in x, y, z plus one in-plane rotation gauge (the
    y coordinate of the nearest vertex on the +x side of the centre)."""
    x = mesh.vertices
    c = x[:, :2].mean(axis=0)
    d = np.linalg.norm(x[:, :2] - c, axis=1)
    center = int(np.argmin(d))
    pins = np.zeros((len(x), 3), dtype=bool)
    pins[center] = True
    rel = x[:, :2] - x[center, :2]
    cand = np.flatnonzero((rel[:, 0] > 1e-9) & (np.abs(rel[:, 1]) < 1e-9 + 1e-6 * np.abs(rel[:, 0])))
    if cand.size == 0:
        cand = np.flatnonzero(rel[:, 0] > 1e-9)
    gauge = cand[np.argmin(np.linalg.norm(rel[cand], axis=1))]
    pins[gauge, 1] = True
    return pins


def center_vertex(mesh: TriMesh) -> int:
    x = mesh.vertices
    return int(np.argmin(np.linalg.norm(x[:, :2] - x[:, :2].mean(axis=0), axis=1)))


# ---------------------------------------------------------------------------
# minimisation


@dataclass
class MinimizeResult:
    x: np.ndarray
    energy: float
    gradient_norm: float
    iterations: int
    evaluations: int
    converged: bool
    energies: list = field(default_factory=list, repr=False)


def lbfgs(
    fun: Callable,
    x0: np.ndarray,
    free: np.ndarray,
    gtol: float,
    max_iter: int = 20000,
    memory: int = 20,
    max_step: float | None = None,
    record: bool = False,
) -> MinimizeResult:
    """Limited-memory BFGS over the free DOFs with a backtracking Armijo line
    search; every accepted iterate strictly lowers ``fun``.

    ``fun(x) -> (f, g)`` on full ``(V, 3)`` arrays; ``free`` is the boolean DOF
    mask. Trial points where ``fun`` raises :class:`ElementInversionError`
    count as infinite energy. Converged when ``||g_free||_2 < gtol``.
    """
    x = np.array(x0, dtype=float)
    shape = x.shape
    mask = free.ravel()

    def f_and_g(xf):
        xx = x.ravel().copy()
        xx[mask] = xf
        f, g = fun(xx.reshape(shape))
        return f, g.ravel()[mask]

    xf = x.ravel()[mask].copy()
    f, g = f_and_g(xf)
    n_eval = 1
    s_hist, y_hist, rho_hist = [], [], []
    energies = [f] if record else []
    gnorm = float(np.linalg.norm(g))
    it = 0
    while gnorm >= gtol and it < max_iter:
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * np.dot(s, q)
            alphas.append(a)
            q -= a * y
        if s_hist:
            gamma = np.dot(s_hist[-1], y_hist[-1]) / np.dot(y_hist[-1], y_hist[-1])
        else:
            gamma = 1.0 / max(gnorm, 1e-300)
        r = gamma * q
        for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            b = rho * np.dot(y, r)
            r += s * (a - b)
        d = -r
        slope = float(np.dot(g, d))
        if slope >= 0.0:
            s_hist.clear(), y_hist.clear(), rho_hist.clear()
            d = -g / max(gnorm, 1e-300)
            slope = float(np.dot(g, d))
        if max_step is not None:
            dmax = np.max(np.abs(d))
            if dmax > max_step:
                d *= max_step / dmax
                slope = float(np.dot(g, d))

        t = 1.0
        accepted = False
        for _ in range(60):
            xt = xf + t * d
            try:
                ft, gt = f_and_g(xt)
                n_eval += 1
            except ElementInversionError:
                n_eval += 1
                t *= 0.25
                continue
            if ft <= f + 1e-4 * t * slope and ft < f:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if s_hist:
                s_hist.clear(), y_hist.clear(), rho_hist.clear()
                it += 1
                continue
            break
        s = xt - xf
        y = gt - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * float(np.dot(y, y)):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > memory:
                s_hist.pop(0), y_hist.pop(0), rho_hist.pop(0)
        xf, f, g = xt, ft, gt
        gnorm = float(np.linalg.norm(g))
        it += 1
        if record:
            energies.append(f)

    out = x.ravel().copy()
    out[mask] = xf
    return MinimizeResult(out.reshape(shape), f, gnorm, it, n_eval, gnorm < gtol, energies)


# ---------------------------------------------------------------------------
# damped Newton with a coloured finite-difference Hessian


def vertex_stencil(mesh: TriMesh) -> sp.csr_matrix:
    """Boolean vertex-vertex pattern of pairs sharing a face or a hinge."""
    n = mesh.n_vertices
    rows, cols = [], []
    for cells in (mesh.faces, mesh.hinges):
        k = cells.shape[1]
        for a in range(k):
            for b in range(k):
                rows.append(cells[:, a])
                cols.append(cells[:, b])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    s = sp.csr_matrix((np.ones(r.size, dtype=bool), (r, c)), shape=(n, n))
    s.sum_duplicates()
    return s


def distance2_coloring(stencil: sp.csr_matrix) -> np.ndarray:
    """Greedy colouring such that no two vertices of one colour share a
    stencil row, so their Hessian columns can be probed together."""
    s = stencil.astype(np.int32)
    conflict = (s.T @ s).tocsr()
    n = conflict.shape[0]
    color = np.full(n, -1, dtype=np.int64)
    order = np.argsort(-np.diff(conflict.indptr), kind="stable")
    for v in order:
        nbr = conflict.indices[conflict.indptr[v] : conflict.indptr[v + 1]]
        used = set(color[nbr].tolist())
        c = 0
        while c in used:
            c += 1
        color[v] = c
    return color


class FDHessian:
    """Sparse Hessian by finite differences of the gradient, probing all
    vertices of one colour and one axis at a time.

    Forward differences (the default) cost one gradient per probe and are
    accurate to O(step); ``central=True`` doubles the cost for O(step^2).
    """

    def __init__(self, mesh: TriMesh, step: float, central: bool = False):
        self.n = mesh.n_vertices
        self.step = step
        self.central = central
        s = vertex_stencil(mesh).tocoo()
        self.rows, self.cols = s.row, s.col
        self.color = distance2_coloring(s.tocsr())
        self.n_colors = int(self.color.max()) + 1
        self.groups = [np.flatnonzero(self.color == c) for c in range(self.n_colors)]
        self.entry_groups = [np.flatnonzero(self.color[self.cols] == c) for c in range(self.n_colors)]

    @property
    def evaluations(self) -> int:
        return 3 * self.n_colors * (2 if self.central else 1)

    def __call__(self, grad: Callable, x: np.ndarray, g0: np.ndarray | None = None) -> sp.csr_matrix:
        h = self.step
        if not self.central and g0 is None:
            g0 = grad(x)
        data, ri, ci = [], [], []
        for c in range(self.n_colors):
            verts = self.groups[c]
            ent = self.entry_groups[c]
            r, col = self.rows[ent], self.cols[ent]
            for a in range(3):
                xp = x.copy()
                xp[verts, a] += h
                if self.central:
                    xm = x.copy()
                    xm[verts, a] -= h
                    d = (grad(xp) - grad(xm)) / (2.0 * h)
                else:
                    d = (grad(xp) - g0) / h
                for b in range(3):
                    data.append(d[r, b])
                    ri.append(3 * r + b)
                    ci.append(3 * col + a)
        hmat = sp.csr_matrix(
            (np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))), shape=(3 * self.n, 3 * self.n)
        )
        return (0.5 * (hmat + hmat.T)).tocsr()


def newton(
    model: ShellModel,
    x0: np.ndarray,
    gtol: float,
    max_iter: int = 200,
    load: np.ndarray | None = None,
    hessian: FDHessian | None = None,
    free: np.ndarray | None = None,
    record: bool = False,
) -> MinimizeResult:
    """Levenberg-Marquardt damped Newton iteration on ``model.energy`` minus
    the work of an optional dead ``load`` (V, 3). Every accepted step strictly
    lowers the objective; trial points that invert an element are rejected.

    ``free`` is a (V, 3) boolean DOF mask, by default the model's unpinned DOFs.
    """
    from scipy.sparse.linalg import splu

    x = np.array(x0, dtype=float)
    free = ~model.pinned.ravel() if free is None else np.asarray(free, dtype=bool).ravel()
    load = np.zeros_like(x) if load is None else np.asarray(load, dtype=float)
    if hessian is None:
        hessian = FDHessian(model.mesh, 1e-5 * model.length_scale, central=True)

    def obj(xx):
        e, g = model.energy_and_gradient(xx, project=False)
        return e - float(np.sum(load * xx)), g - load

    def grad(xx):
        return obj(xx)[1]

    f, g = obj(x)
    gf = g.ravel()[free]
    gnorm = float(np.linalg.norm(gf))
    mu = 0.0
    n_eval, it = 1, 0
    energies = [f] if record else []
    history = [f]
    while gnorm >= gtol and it < max_iter:
        # stalled on a saddle of a symmetric subspace: no relative progress in 20 steps
        if len(history) > 20 and history[-21] - f <= 1e-12 * abs(f):
            break
        hm = hessian(grad, x, g)[free][:, free].tocsc()
        n_eval += hessian.evaluations
        diag = np.abs(hm.diagonal())
        scale = float(np.mean(diag)) if diag.size else 1.0
        eye = sp.identity(hm.shape[0], format="csc")
        accepted = False
        for _ in range(40):
            try:
                p = -splu((hm + (mu * scale) * eye).tocsc()).solve(gf)
            except RuntimeError:
                mu = max(4.0 * mu, 1e-8)
                continue
            slope = float(np.dot(gf, p))
            if not np.all(np.isfinite(p)) or slope >= 0.0:
                mu = max(4.0 * mu, 1e-8)
                continue
            step = np.zeros(x.size)
            step[free] = p
            xt = x + step.reshape(x.shape)
            try:
                ft, gt = obj(xt)
                n_eval += 1
            except ElementInversionError:
                n_eval += 1
                mu = max(4.0 * mu, 1e-8)
                continue
            if ft < f or (ft <= f + 1e-13 * abs(f) and np.linalg.norm(gt.ravel()[free]) < gnorm):
                accepted = True
                break
            mu = max(4.0 * mu, 1e-8)
        if not accepted:
            break
        x, f, g = xt, ft, gt
        gf = g.ravel()[free]
        gnorm = float(np.linalg.norm(gf))
        mu = mu / 4.0 if mu > 1e-8 else 0.0
        it += 1
        history.append(f)
        if record:
            energies.append(f)
        log.debug("newton it=%d f=%.12g |g|=%.3e mu=%.1e", it, f, gnorm, mu)
    return MinimizeResult(x, f, gnorm, it, n_eval, gnorm < gtol, energies)


# ---------------------------------------------------------------------------
# equilibrium search


@dataclass
class SolverOptions:
    """``gtol_rel`` scales the convergence threshold ``gtol_rel * C_s * L``;
    ``load_rel`` the symmetry-breaking pressure ``load_rel * C_s / L``;
    ``seed_rel`` the initial out-of-plane perturbation ``seed_rel * L``."""

    method: str = "newton"
    gtol_rel: float = 1e-8
    max_iter: int | None = None
    load_rel: float = 1e-4
    seed_rel: float = 1e-2

    def __post_init__(self):
        if self.method not in ("newton", "lbfgs"):
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def iteration_cap(self) -> int:
        if self.max_iter is not None:
            return int(self.max_iter)
        return 200 if self.method == "newton" else 20000


SEEDS = ("+", "-", "mode2+", "mode2-")


@dataclass
class EquilibriumState:
    positions: np.ndarray
    energy: float
    membrane_energy: float
    bending_energy: float
    height: float
    height_ratio: float
    sign: int  # +1, -1, or 0 for flat
    mode: str  # "flat", "mode1" or "mode2"
    seed: str = ""
    iterations: int = 0
    gradient_norm: float = 0.0
    converged: bool = True

    @property
    def label(self) -> str:
        if self.mode == "flat":
            return "flat"
        s = "positive" if self.sign > 0 else "negative"
        return s if self.mode == "mode1" else f"mode2_{s}"

    def summary(self) -> dict:
        return {
            "label": self.label,
            "seed": self.seed,
            "sign": self.sign,
            "mode": self.mode,
            "energy_uJ": self.energy,
            "membrane_energy_uJ": self.membrane_energy,
            "bending_energy_uJ": self.bending_energy,
            "height_mm": self.height,
            "height_ratio": self.height_ratio,
            "iterations": self.iterations,
            "gradient_norm_mN": self.gradient_norm,
            "converged": self.converged,
        }


def arm_tip_vertices(model: ShellModel) -> np.ndarray:
    """Covered vertices furthest along +x, -x, +y, -y from the centre; ties
    go to the vertex closest to the axis."""
    m = model.mesh
    cov = np.unique(m.faces[m.face_covered]) if np.any(m.face_covered) else np.arange(m.n_vertices)
    xy = m.vertices[cov, :2] - m.vertices[center_vertex(m), :2]
    tips = []
    for d in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        along = xy @ np.array(d, float)
        perp = np.abs(xy @ np.array((-d[1], d[0]), float))
        best = along.max()
        cand = np.flatnonzero(along >= best - 1e-9 * max(1.0, abs(best)))
        tips.append(cov[cand[np.argmin(perp[cand])]])
    return np.array(tips)


def height_of(positions: np.ndarray) -> float:
    """Out-of-plane extent ``max z - min z`` (mm)."""
    z = np.asarray(positions, dtype=float)[:, 2]
    return float(z.max() - z.min())


def _plane_residual(positions) -> float:
    """Out-of-plane spread after removing the least-squares plane (rigid tilt)."""
    p = positions - positions.mean(axis=0)
    normal = np.linalg.svd(p, full_matrices=False)[2][-1]
    d = p @ normal
    return float(d.max() - d.min())


def classify(model: ShellModel, positions: np.ndarray, flat_tol: float = 1e-6):
    """(sign, mode) from the arm-tip heights relative to the centre vertex."""
    ell = model.length_scale
    z = positions[:, 2]
    if height_of(positions) < flat_tol * ell or _plane_residual(positions) < flat_tol * ell:
        return 0, "flat"
    dz = z[arm_tip_vertices(model)] - z[center_vertex(model.mesh)]
    sign = 1 if dz.mean() > 0 else -1
    thresh = 1e-3 * ell
    xs, ys = dz[:2].mean(), dz[2:].mean()
    if abs(xs) > thresh and abs(ys) > thresh and np.sign(xs) != np.sign(ys):
        sign = 1 if xs > 0 else -1
        return sign, "mode2"
    return sign, "mode1"


def level(model: ShellModel, positions: np.ndarray) -> np.ndarray:
    """Remove the free rigid tilt: rotate about the centre vertex so both
    arm-tip pairs (+x/-x and +y/-y) sit level. Energy is unchanged."""
    x = np.asarray(positions, dtype=float)
    tips = arm_tip_vertices(model)
    a = x[tips[0]] - x[tips[1]]
    b = x[tips[2]] - x[tips[3]]
    n = np.cross(a, b)
    norm = np.linalg.norm(n)
    if norm == 0.0:
        return x.copy()
    n /= norm
    if n[2] < 0:
        n = -n
    axis = np.cross(n, [0.0, 0.0, 1.0])
    s = np.linalg.norm(axis)
    if s < 1e-15:
        return x.copy()
    axis /= s
    ang = math.atan2(s, n[2])
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    rot = np.eye(3) + math.sin(ang) * k + (1 - math.cos(ang)) * (k @ k)
    c = x[center_vertex(model.mesh)]
    return (x - c) @ rot.T + c


def make_state(model: ShellModel, positions, seed="", iterations=0, gradient_norm=0.0, converged=True):
    x = level(model, positions)
    em, eb = model.membrane_energy(x), model.bending_energy(x)
    h = height_of(x)
    sign, mode = classify(model, x)
    return EquilibriumState(
        x, em + eb, em, eb, h, h / model.length_scale, sign, mode, seed, iterations, gradient_norm, converged
    )


def lumped_areas(mesh: TriMesh) -> np.ndarray:
    a = mesh.face_areas() / 3.0
    out = np.zeros(mesh.n_vertices)
    for k in range(3):
        np.add.at(out, mesh.faces[:, k], a)
    return out


def _seed_field(model: ShellModel, seed: str):
    """Unit-amplitude out-of-plane shape and pressure sign pattern for a seed."""
    x = model.mesh.vertices
    c = x[center_vertex(model.mesh), :2]
    dx, dy = x[:, 0] - c[0], x[:, 1] - c[1]
    r2 = dx * dx + dy * dy
    r2max = max(float(r2.max()), 1e-300)
    if seed in ("+", "-"):
        s = 1.0 if seed == "+" else -1.0
        return s * r2 / r2max, np.full(len(x), s)
    if seed in ("mode2+", "mode2-"):
        s = 1.0 if seed == "mode2+" else -1.0
        q = dx * dx - dy * dy
        return s * q / r2max, s * np.sign(q)
    raise ValueError(f"unknown seed {seed!r}; expected one of {SEEDS}")


def _solve(model, x0, opts: SolverOptions, load=None, free=None, hessian=None):
    gtol = opts.gtol_rel * model.c_s * model.length_scale
    if opts.method == "newton":
        return newton(model, x0, gtol, opts.iteration_cap, load=load, hessian=hessian, free=free)
    load_ = np.zeros_like(x0) if load is None else load
    mask = ~model.pinned if free is None else free

    def fun(xx):
        e, g = model.energy_and_gradient(xx, project=False)
        return e - float(np.sum(load_ * xx)), g - load_

    return lbfgs(fun, x0, mask, gtol, opts.iteration_cap)


def minimize(
    model: ShellModel,
    start_positions: np.ndarray | None = None,
    seed_perturbation: str = "+",
    options: SolverOptions | None = None,
    hessian: FDHessian | None = None,
) -> EquilibriumState:
    """Two-phase equilibrium search: relax under a small transverse pressure
    whose sign pattern follows ``seed_perturbation``, then remove the load
    and relax again.

    Raises
    ------
    NonConvergenceError
        If either phase hits the iteration cap; ``.state`` holds the last iterate.
    """
    opts = options or SolverOptions()
    ell = model.length_scale
    shape, pattern_sign = _seed_field(model, seed_perturbation)
    x = np.array(model.mesh.vertices if start_positions is None else start_positions, dtype=float)
    x[:, 2] += opts.seed_rel * ell * shape
    load = np.zeros_like(x)
    load[:, 2] = opts.load_rel * model.c_s / ell * lumped_areas(model.mesh) * pattern_sign
    if hessian is None and opts.method == "newton":
        hessian = FDHessian(model.mesh, 1e-5 * ell, central=True)
    iters = 0
    for phase_load in (load, None):
        res = _solve(model, x, opts, load=phase_load, hessian=hessian)
        iters += res.iterations
        x = res.x
        if not res.converged:
            state = make_state(model, x, seed_perturbation, iters, res.gradient_norm, False)
            raise NonConvergenceError(
                f"seed {seed_perturbation!r}: |g|={res.gradient_norm:.3e} after {iters} iterations", state
            )
    return make_state(model, x, seed_perturbation, iters, res.gradient_norm, True)


def rigid_align(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``b`` rigidly moved (rotation without reflection, translation) onto ``a``."""
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    u, _, vt = np.linalg.svd((b - cb).T @ (a - ca))
    d = np.sign(np.linalg.det(u @ vt))
    r = u @ np.diag([1.0, 1.0, d]) @ vt
    return (b - cb) @ r + ca


def same_state(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    return float(np.max(np.linalg.norm(rigid_align(a, b) - a, axis=1))) < tol


def find_stable_states(
    model: ShellModel,
    seeds: Sequence[str] = ("+", "-"),
    options: SolverOptions | None = None,
    failures: list | None = None,
) -> list[EquilibriumState]:
    """Minimise from each seed and keep the distinct equilibria.

    Seeds that fail to converge are skipped; their errors are appended to
    ``failures`` when given.
    """
    opts = options or SolverOptions()
    hess = FDHessian(model.mesh, 1e-5 * model.length_scale, central=True) if opts.method == "newton" else None
    tol = 1e-3 * model.length_scale
    states: list[EquilibriumState] = []
    for seed in seeds:
        try:
            st = minimize(model, None, seed, opts, hessian=hess)
        except NonConvergenceError as exc:
            log.warning("%s", exc)
            if failures is not None:
                failures.append(exc)
            continue
        if not any(same_state(s.positions, st.positions, tol) for s in states):
            states.append(st)
    return states


# ---------------------------------------------------------------------------
# snap-through


@dataclass
class SnapCurve:
    force: np.ndarray  # mN, total push on the actuated vertices
    displacement: np.ndarray  # mm, travel of the actuated vertices
    energy: np.ndarray  # µJ
    snapped: bool
    final_state: EquilibriumState | None = None

    def negative_stiffness_segments(self) -> int:
        df = np.diff(self.force)
        du = np.diff(self.displacement)
        return int(np.sum((du > 0) & (df < 0)))

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["force_mN", "displacement_mm", "energy_uJ"])
            for f, u, e in zip(self.force, self.displacement, self.energy):
                w.writerow([f"{f:.9g}", f"{u:.9g}", f"{e:.9g}"])
            if not self.snapped:
                w.writerow(["no-snap", "", ""])


def snap_through(
    model: ShellModel,
    from_state: EquilibriumState,
    n_steps: int = 40,
    travel: float | None = None,
    actuation_vertices: np.ndarray | None = None,
    options: SolverOptions | None = None,
) -> SnapCurve:
    """Displacement-controlled push of the actuated vertices toward the
    opposite side of the centre.

    At each step the actuated out-of-plane coordinates are prescribed and the
    rest relaxed; the reported force is the reaction needed to hold them. Once
    that force drops to zero or below, or the travel is exhausted, the
    actuators are released and the structure relaxed unloaded. The run counts
    as a snap when this lands in an equilibrium of opposite sign.
    """
    opts = options or SolverOptions()
    ell = model.length_scale
    act = arm_tip_vertices(model) if actuation_vertices is None else np.asarray(actuation_vertices)
    x = from_state.positions.copy()
    zc = x[center_vertex(model.mesh), 2]
    rel0 = x[act, 2] - zc
    direction = -1.0 if rel0.mean() > 0 else 1.0
    if travel is None:
        travel = 2.2 * max(float(np.abs(rel0).mean()), 0.05 * ell)
    free = ~model.pinned.copy()
    free[act, 2] = False
    hess = FDHessian(model.mesh, 1e-5 * ell, central=True) if opts.method == "newton" else None
    z0 = x[act, 2].copy()

    forces, disps, energies = [0.0], [0.0], [from_state.energy]
    released = None
    for k in range(1, n_steps + 1):
        u = travel * k / n_steps
        x[act, 2] = z0 + direction * u
        res = _solve(model, x, opts, free=free, hessian=hess)
        x = res.x
        e, g = model.energy_and_gradient(x, project=False)
        force = float(direction * g[act, 2].sum())
        forces.append(force)
        disps.append(u)
        energies.append(e)
        # release only once the actuators are past the centre plane; before
        # that the symmetric push can leave the structure on the flat saddle
        crossed = direction * (x[act, 2].mean() - zc) > 1e-2 * ell
        if (force <= 0.0 and crossed) or k == n_steps:
            try:
                rel = _solve(model, x, opts, hessian=hess)
            except ElementInversionError:
                continue
            if not rel.converged:
                continue
            st = make_state(model, rel.x, "snap", rel.iterations, rel.gradient_norm)
            if st.sign == -from_state.sign and st.sign != 0:
                released = st
                break
            if k == n_steps:
                released = st
    if released is not None:
        u_rel = float(direction * (released.positions[act, 2].mean() - z0.mean()))
        if u_rel > disps[-1]:
            forces.append(0.0)
            disps.append(u_rel)
            energies.append(released.energy)
    snapped = released is not None and released.sign == -from_state.sign and released.sign != 0
    return SnapCurve(np.array(forces), np.array(disps), np.array(energies), snapped, released)


def write_state_obj(path, model: ShellModel, state: EquilibriumState) -> None:
    from .pattern import write_obj

    write_obj(path, state.positions, model.mesh.faces)
