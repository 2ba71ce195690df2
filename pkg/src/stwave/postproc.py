"""Error indicators, convergence tables and control reconstruction."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from . import sparsela
from .assembly import Kernel, QuadratureRule, assemble, assemble_coupling, default_rule
from .fespace import DofMap, SpaceKind, build_control_space, build_dofmap
from .mesh import Mesh, MeshHierarchy, prolongate, refine_uniform
from .optcontrol import Regularization


@dataclass(frozen=True)
class ErrorField:
    eta: np.ndarray  # per-element L2 errors

    @property
    def global_error(self) -> float:
        return float(np.sqrt(np.sum(self.eta**2)))


def element_errors(mesh: Mesh, dofmap: DofMap, u, target, quad: QuadratureRule | None = None) -> ErrorField:
    """eta_k = ||u_h - target||_{L2(tau_k)}, u_h the P1 function with coefficients ``u``."""
    quad = quad or default_rule(target)
    nodal = dofmap.expand(u)
    uh = nodal[mesh.elements] @ quad.points.T  # (M, Q)
    diff2 = (uh - target.sample(mesh, quad.points)) ** 2
    eta2 = mesh.areas() * (diff2 @ quad.weights)
    return ErrorField(np.sqrt(np.maximum(eta2, 0.0)))


def target_norm(mesh: Mesh, target, quad: QuadratureRule | None = None) -> float:
    """||target||_{L2(Q)} with the same rule as the error indicators."""
    quad = quad or default_rule(target)
    vals = target.sample(mesh, quad.points)
    return float(np.sqrt(np.sum(mesh.areas() * ((vals**2) @ quad.weights))))


@dataclass(frozen=True)
class ConvergenceRecord:
    level: int
    dofs: int
    elements: int
    h: float
    rho: float
    error: float
    eoc: float | None = None


def compute_eoc(records):
    """Fill ``eoc`` from consecutive records: log(e0/e1) / log(h0/h1)."""
    out = list(records[:1])
    for prev, rec in zip(records, records[1:]):
        eoc = None
        if prev.error > 0 and rec.error > 0 and prev.h != rec.h:
            eoc = math.log(prev.error / rec.error) / math.log(prev.h / rec.h)
        out.append(replace(rec, eoc=eoc))
    if out:
        out[0] = replace(out[0], eoc=None)
    return out


def fitted_eoc(records, last: int = 3) -> float:
    """Least-squares slope of log(error) against log(h) over the last records."""
    recs = list(records)[-last:]
    if len(recs) < 2:
        raise ValueError("need at least two records to fit a rate")
    x = np.log([r.h for r in recs])
    y = np.log([r.error for r in recs])
    return float(np.polyfit(x, y, 1)[0])


def fitted_dof_rate(records, last: int | None = None) -> float:
    """Least-squares slope of log(error) against log(dofs)."""
    recs = list(records) if last is None else list(records)[-last:]
    x = np.log([r.dofs for r in recs])
    y = np.log([r.error for r in recs])
    return float(np.polyfit(x, y, 1)[0])


CSV_HEADER = ["level", "dofs", "elements", "h", "rho", "error", "eoc"]


def _fmt(v):
    return "" if v is None else f"{v:.17e}"


def write_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([r.level, r.dofs, r.elements, _fmt(r.h), _fmt(r.rho), _fmt(r.error), _fmt(r.eoc)])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        ConvergenceRecord(
            int(r["level"]), int(r["dofs"]), int(r["elements"]), float(r["h"]), float(r["rho"]),
            float(r["error"]), float(r["eoc"]) if r["eoc"] else None,
        )
        for r in rows
    ]


# ---------------------------------------------------------------- controls


@dataclass
class ControlReconstruction:
    z: np.ndarray
    kind: Regularization
    psi: np.ndarray | None = None
    P: sp.csr_matrix | None = None
    A: sp.csr_matrix | None = None
    Bu: np.ndarray | None = None
    mesh: Mesh | None = None  # mesh carrying z (coarse mesh for energy, fine for L2)


def _control_blocks(hierarchy, fine_level, u):
    fine = hierarchy[fine_level]
    control = build_control_space(hierarchy, fine_level)
    xmap = build_dofmap(fine, SpaceKind.TRIAL_X)
    ymap = build_dofmap(fine, SpaceKind.TEST_Y)
    if len(u) != xmap.count:
        raise ValueError(f"state has {len(u)} coefficients, fine trial space has {xmap.count}")
    A = assemble(fine, ymap, ymap, Kernel.STIFFNESS)
    B = assemble(fine, ymap, xmap, Kernel.WAVE)
    P = assemble_coupling(fine, ymap, control)
    return control, ymap, A, P, B @ np.asarray(u, float)


def reconstruct_control(hierarchy: MeshHierarchy, fine_level: int, u, regularization,
                        *, p=None, rho=None) -> ControlReconstruction:
    """Recover the control from a computed state.

    Energy: solve [[A, P^T], [P, 0]] (psi, z) = (B u, 0) with z piecewise
    constant on ``hierarchy[fine_level - 1]``.  L2: z = -p / rho at the
    test-space nodes of ``hierarchy[fine_level]``.
    """
    reg = Regularization(regularization)
    if reg is Regularization.L2:
        if p is None or rho is None:
            raise ValueError("L2 control reconstruction needs the adjoint p and rho")
        return ControlReconstruction(-np.asarray(p, float) / rho, reg, mesh=hierarchy[fine_level])
    control, ymap, A, P, Bu = _control_blocks(hierarchy, fine_level, u)
    my, nh = ymap.count, control.count
    K = sp.bmat([[A, P.T], [P, None]], format="csr")
    rhs = np.concatenate([Bu, np.zeros(nh)])
    try:
        fac = sparsela.lu_factor(K)
    except sparsela.SingularMatrix as exc:
        raise sparsela.SingularMatrix(
            f"control saddle system is singular ({exc}); refine the test space further relative to the control mesh"
        ) from exc
    x = sparsela.solve(fac, rhs)
    return ControlReconstruction(x[my:], reg, x[:my], P, A, Bu, control.mesh)


def control_explicit(hierarchy: MeshHierarchy, fine_level: int, u) -> np.ndarray:
    """z = (P A^{-1} P^T)^{-1} P A^{-1} B u, with dense N_H x N_H Schur matrix."""
    control, ymap, A, P, Bu = _control_blocks(hierarchy, fine_level, u)
    fac = sparsela.lu_factor(A)
    AinvPt = sparsela.solve(fac, P.T.toarray())
    S = P @ AinvPt
    return np.linalg.solve(S, P @ sparsela.solve(fac, Bu))


def reconstruct_control_adaptive(mesh: Mesh, xmap: DofMap, u, regularization=Regularization.ENERGY,
                                 *, p=None, rho=None) -> ControlReconstruction:
    """Control on ``mesh`` itself, test space on its red refinement (h = H/2)."""
    reg = Regularization(regularization)
    if reg is Regularization.L2:
        return reconstruct_control(MeshHierarchy([mesh]), 0, u, reg, p=p, rho=rho)
    fine = refine_uniform(mesh)
    h = MeshHierarchy([mesh, fine])
    nodal = prolongate(mesh, fine, xmap.expand(u))
    fine_x = build_dofmap(fine, SpaceKind.TRIAL_X)
    return reconstruct_control(h, 1, fine_x.restrict(nodal), reg)


def discrete_h1_seminorm(mesh: Mesh, nodal: np.ndarray) -> float:
    """|v_h|_{H1(Q)} of the P1 function with nodal values ``nodal``."""
    free = build_dofmap(mesh, SpaceKind.FREE)
    K = assemble(mesh, free, free, Kernel.STIFFNESS)
    return float(np.sqrt(max(nodal @ (K @ nodal), 0.0)))


def jump_seminorm(mesh: Mesh, cellvals: np.ndarray) -> float:
    """Broken H1-type seminorm of a piecewise constant: sum over interior edges of
    |jump|^2 (edge length / distance between centroids), square-rooted."""
    edges, ee = mesh.edges()
    owner = np.full((len(edges), 2), -1, dtype=np.int64)
    flat = ee.ravel()
    elem = np.repeat(np.arange(mesh.num_elements), 3)
    order = np.argsort(flat, kind="stable")
    fs, es = flat[order], elem[order]
    first = np.r_[True, fs[1:] != fs[:-1]]
    owner[fs[first], 0] = es[first]
    owner[fs[~first], 1] = es[~first]
    inner = owner[:, 1] >= 0
    a, b = owner[inner, 0], owner[inner, 1]
    c = mesh.centroids()
    length = np.linalg.norm(mesh.nodes[edges[inner, 0]] - mesh.nodes[edges[inner, 1]], axis=1)
    dist = np.linalg.norm(c[a] - c[b], axis=1)
    return float(np.sqrt(np.sum((cellvals[a] - cellvals[b]) ** 2 * length / dist)))
