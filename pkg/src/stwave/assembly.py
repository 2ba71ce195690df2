"""P1 element matrices, global assembly and load vectors.

Element matrices use closed-form P1 formulas.  Quadrature only enters
through target-dependent integrals (load vectors, error norms).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .fespace import ControlSpace, DofMap
from .mesh import Mesh


class DegenerateElement(ValueError):
    pass


class Kernel(enum.Enum):
    STIFFNESS = "stiffness"
    WAVE = "wave"
    MASS = "mass"


@dataclass(frozen=True)
class ElementGeometry:
    """Batched element data: ``coords`` (M, 3, 2), ``area`` (M,), ``grads`` (M, 3, 2).

    ``grads[:, i]`` is the constant gradient (d/dx, d/dt) of barycentric
    coordinate ``i``.
    """

    coords: np.ndarray
    area: np.ndarray
    grads: np.ndarray


def element_geometry(coords) -> ElementGeometry:
    c = np.asarray(coords, dtype=float)
    single = c.ndim == 2
    if single:
        c = c[None]
    d1 = c[:, 1] - c[:, 0]
    d2 = c[:, 2] - c[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(det <= 0.0):
        raise DegenerateElement("element with nonpositive area (degenerate or clockwise)")
    # rows of inv(J)^T give grads of lambda_1, lambda_2
    g1 = np.column_stack([d2[:, 1], -d2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-d1[:, 1], d1[:, 0]]) / det[:, None]
    grads = np.stack([-g1 - g2, g1, g2], axis=1)
    return ElementGeometry(c, 0.5 * det, grads)


def _maybe_single(mat, geom):
    return mat[0] if geom.coords.shape[0] == 1 and mat.shape[0] == 1 else mat


def local_stiffness(geom: ElementGeometry, *, batched=False) -> np.ndarray:
    mat = geom.area[:, None, None] * np.einsum("mid,mjd->mij", geom.grads, geom.grads)
    return mat if batched else _maybe_single(mat, geom)


def local_wave_form(geom: ElementGeometry, *, batched=False) -> np.ndarray:
    """Entry (j, k) = |tau| (g_kx g_jx - g_kt g_jt); rows test, columns trial."""
    g = geom.grads
    mat = geom.area[:, None, None] * (
        np.einsum("mj,mk->mjk", g[..., 0], g[..., 0]) - np.einsum("mj,mk->mjk", g[..., 1], g[..., 1])
    )
    return mat if batched else _maybe_single(mat, geom)


_MASS_REF = (np.ones((3, 3)) + np.eye(3)) / 12.0


def local_mass(geom: ElementGeometry, *, batched=False) -> np.ndarray:
    mat = geom.area[:, None, None] * _MASS_REF[None]
    return mat if batched else _maybe_single(mat, geom)


_KERNELS = {
    Kernel.STIFFNESS: local_stiffness,
    Kernel.WAVE: local_wave_form,
    Kernel.MASS: local_mass,
}


def scatter(mesh: Mesh, row_dofmap: DofMap, col_dofmap: DofMap, local: np.ndarray) -> sp.csr_matrix:
    """Sum (M, 3, 3) element blocks into a global matrix through two dof maps."""
    if row_dofmap.mesh is not mesh or col_dofmap.mesh is not mesh:
        raise ValueError("dof maps were built on a different mesh")
    rows = row_dofmap.node_to_dof[mesh.elements]
    cols = col_dofmap.node_to_dof[mesh.elements]
    R = np.broadcast_to(rows[:, :, None], local.shape)
    C = np.broadcast_to(cols[:, None, :], local.shape)
    keep = (R >= 0) & (C >= 0)
    A = sp.coo_matrix(
        (local[keep], (R[keep], C[keep])), shape=(row_dofmap.count, col_dofmap.count)
    ).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def assemble(mesh: Mesh, row_dofmap: DofMap, col_dofmap: DofMap, kernel) -> sp.csr_matrix:
    kernel = Kernel(kernel)
    geom = element_geometry(mesh.element_coords())
    local = _KERNELS[kernel](geom, batched=True)
    return scatter(mesh, row_dofmap, col_dofmap, local)


def assemble_weighted_stiffness(mesh: Mesh, dofmap: DofMap, weights: np.ndarray) -> sp.csr_matrix:
    """Sum over elements of ``weights[k]`` times the local stiffness matrix."""
    geom = element_geometry(mesh.element_coords())
    local = local_stiffness(geom, batched=True) * np.asarray(weights, float)[:, None, None]
    return scatter(mesh, dofmap, dofmap, local)


# ---------------------------------------------------------------- quadrature


@dataclass(frozen=True)
class QuadratureRule:
    """Rule on a triangle in barycentric coordinates; weights sum to 1."""

    points: np.ndarray  # (Q, 3)
    weights: np.ndarray  # (Q,)
    degree: int

    def split(self, times: int = 1) -> QuadratureRule:
        """Composite rule on ``4**times`` congruent subtriangles."""
        rule = self
        for _ in range(times):
            subs = np.array(
                [
                    [[1, 0, 0], [0.5, 0.5, 0], [0.5, 0, 0.5]],
                    [[0.5, 0.5, 0], [0, 1, 0], [0, 0.5, 0.5]],
                    [[0.5, 0, 0.5], [0, 0.5, 0.5], [0, 0, 1]],
                    [[0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]],
                ]
            )
            pts = np.einsum("qj,sjk->sqk", rule.points, subs).reshape(-1, 3)
            w = np.tile(rule.weights, 4) / 4.0
            rule = QuadratureRule(pts, w, rule.degree)
        return rule


def dunavant4() -> QuadratureRule:
    """6-point symmetric rule, exact for degree 4."""
    a, wa = 0.445948490915965, 0.223381589678011
    b, wb = 0.091576213509771, 0.109951743655322
    pts = []
    for s, w in ((a, wa), (b, wb)):
        c = 1.0 - 2.0 * s
        pts += [(c, s, s, w), (s, c, s, w), (s, s, c, w)]
    arr = np.array(pts)
    return QuadratureRule(arr[:, :3], arr[:, 3], 4)


@lru_cache(maxsize=None)
def collapsed_gauss(degree: int) -> QuadratureRule:
    """Conical-product Gauss rule (Duffy collapse of a square), exact to ``degree``."""
    n = degree // 2 + 1
    xi, wx = np.polynomial.legendre.leggauss(n)
    u = (xi + 1) / 2
    wu = wx / 2
    # the collapse introduces a factor (1 - v); one extra point keeps the degree
    xj, wj = np.polynomial.legendre.leggauss(n + 1)
    v = (xj + 1) / 2
    wv = wj / 2
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv) * (1 - V)
    l1 = U * (1 - V)
    l2 = V
    pts = np.column_stack([1 - l1.ravel() - l2.ravel(), l1.ravel(), l2.ravel()])
    w = 2.0 * W.ravel()  # reference area 1/2 -> normalise to sum 1
    return QuadratureRule(pts, w, degree)


def default_rule(target=None) -> QuadratureRule:
    rule = dunavant4()
    if target is not None and getattr(target, "discontinuous", False):
        rule = rule.split(1)
    return rule


def assemble_load(mesh: Mesh, dofmap: DofMap, target, quad: QuadratureRule | None = None) -> np.ndarray:
    """f_l = integral of target * phi_l over Q by element-wise quadrature."""
    quad = quad or default_rule(target)
    vals = target.sample(mesh, quad.points)  # (M, Q)
    area = mesh.areas()
    local = area[:, None] * np.einsum("mq,q,qi->mi", vals, quad.weights, quad.points)
    dofs = dofmap.node_to_dof[mesh.elements]
    keep = dofs >= 0
    return np.bincount(dofs[keep], weights=local[keep], minlength=dofmap.count)


def assemble_coupling(fine_mesh: Mesh, y_dofmap: DofMap, control: ControlSpace) -> sp.csr_matrix:
    """P[r, j] = integral of psi_j over coarse element r."""
    if control.fine_mesh is not fine_mesh or y_dofmap.mesh is not fine_mesh:
        raise ValueError("control space and test space do not belong to this mesh hierarchy")
    coarse = control.mesh
    parent = fine_mesh.parent
    if parent.max() >= coarse.num_elements or fine_mesh.level != coarse.level + 1:
        raise ValueError("fine mesh is not a refinement of the control mesh")
    area = fine_mesh.areas()
    if not np.allclose(np.bincount(parent, weights=area, minlength=coarse.num_elements),
                       coarse.areas(), rtol=1e-10, atol=1e-14):
        raise ValueError("fine elements do not tile their parents")
    cols = y_dofmap.node_to_dof[fine_mesh.elements]
    rows = np.broadcast_to(parent[:, None], cols.shape)
    vals = np.broadcast_to(area[:, None] / 3.0, cols.shape)
    keep = cols >= 0
    P = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(control.count, y_dofmap.count)).tocsr()
    P.sum_duplicates()
    P.sort_indices()
    return P


def integrate(mesh: Mesh, target, quad: QuadratureRule | None = None) -> np.ndarray:
    """Per-element integrals of a target."""
    quad = quad or default_rule(target)
    return mesh.areas() * (target.sample(mesh, quad.points) @ quad.weights)
