"""Discrete optimality systems for the tracking problem with wave-equation state.

Unknowns are the adjoint ``p`` (test space Y_h) and the state ``u`` (trial
space X_h).  The block system is

    [ C     B ] [p]   [0]
    [ -B^T  M ] [u] = [f]

with ``C = A_h / rho`` (energy regularization) or ``C = Mbar_h / rho``
(L2 regularization).  Eliminating ``p`` gives the SPD Schur system
``(M + B^T C^{-1} B) u = f``.
"""
from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import sparsela
from .assembly import Kernel, QuadratureRule, assemble, assemble_load, assemble_weighted_stiffness, default_rule
from .fespace import DofMap, SpaceKind, build_dofmap
from .mesh import Mesh, mesh_size

log = logging.getLogger(__name__)


class Regularization(enum.Enum):
    ENERGY = "energy"
    L2 = "l2"


class Unsupported(ValueError):
    pass


def choose_rho(regularization, h: float, power: float | None = None) -> float:
    """rho = h^2 for energy, h^4 for L2 regularization, or h^power if given."""
    if h <= 0:
        raise ValueError("mesh size must be positive")
    reg = Regularization(regularization)
    if power is None:
        power = 2 if reg is Regularization.ENERGY else 4
    return float(h) ** power


@dataclass(eq=False)
class OptimalitySystem:
    regularization: Regularization
    rho: float | np.ndarray  # per-element array in variable mode
    A: sp.csr_matrix  # A_h (energy) or Mbar_h (L2), unscaled
    C: sp.csr_matrix  # upper-left block
    B: sp.csr_matrix
    M: sp.csr_matrix
    f: np.ndarray
    xmap: DofMap
    ymap: DofMap
    mesh: Mesh
    target: object = None
    quad: QuadratureRule | None = None
    h: float = 0.0

    @property
    def shape(self):
        n = self.ymap.count + self.xmap.count
        return (n, n)

    @property
    def variable(self) -> bool:
        return np.ndim(self.rho) > 0

    def matrix(self) -> sp.csr_matrix:
        K = sp.bmat([[self.C, self.B], [-self.B.T, self.M]], format="csr")
        K.sum_duplicates()
        K.sort_indices()
        return K

    def rhs(self) -> np.ndarray:
        return np.concatenate([np.zeros(self.ymap.count), self.f])

    def residuals(self, p, u) -> tuple[float, float]:
        """Relative residuals of the two block rows."""
        r1 = self.C @ p + self.B @ u
        r2 = -(self.B.T @ p) + self.M @ u - self.f
        s1 = np.linalg.norm(self.C @ p) + np.linalg.norm(self.B @ u)
        s2 = np.linalg.norm(self.B.T @ p) + np.linalg.norm(self.M @ u) + np.linalg.norm(self.f)
        return (np.linalg.norm(r1) / s1 if s1 else 0.0, np.linalg.norm(r2) / s2 if s2 else 0.0)


@dataclass
class Solution:
    u: np.ndarray
    p: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def _level_mesh(hierarchy, level) -> Mesh:
    if isinstance(hierarchy, Mesh):
        return hierarchy
    if not 0 <= level < len(hierarchy):
        raise IndexError(f"hierarchy has no level {level}")
    return hierarchy[level]


def build_system(hierarchy, level: int, target, regularization=Regularization.ENERGY,
                 rho_override: float | None = None, *, rho_power: float | None = None,
                 h_mode: str = "max", quad: QuadratureRule | None = None) -> OptimalitySystem:
    """Assemble the block system on ``hierarchy[level]``.

    ``h_mode`` selects the mesh size entering rho: ``"max"`` for uniform
    meshes, ``"min"`` for adaptive ones.
    """
    reg = Regularization(regularization)
    mesh = _level_mesh(hierarchy, level)
    h_max, h_min = mesh_size(mesh)
    h = {"max": h_max, "min": h_min}[h_mode]
    rho = float(rho_override) if rho_override is not None else choose_rho(reg, h, rho_power)
    if rho <= 0:
        raise ValueError("rho must be positive")
    xmap = build_dofmap(mesh, SpaceKind.TRIAL_X)
    ymap = build_dofmap(mesh, SpaceKind.TEST_Y)
    A = assemble(mesh, ymap, ymap, Kernel.STIFFNESS if reg is Regularization.ENERGY else Kernel.MASS)
    B = assemble(mesh, ymap, xmap, Kernel.WAVE)
    M = assemble(mesh, xmap, xmap, Kernel.MASS)
    quad = quad or default_rule(target)
    f = assemble_load(mesh, xmap, target, quad)
    return OptimalitySystem(reg, rho, A, A * (1.0 / rho), B, M, f, xmap, ymap, mesh, target, quad, h)


def variable_rho_system(hierarchy, level: int, target, regularization=Regularization.ENERGY,
                        *, quad: QuadratureRule | None = None) -> OptimalitySystem:
    """Energy system with rho = h_tau^2 element by element."""
    if Regularization(regularization) is not Regularization.ENERGY:
        raise Unsupported("variable regularization is only available for the energy norm")
    base = build_system(hierarchy, level, target, Regularization.ENERGY, quad=quad)
    mesh = base.mesh
    rho_el = mesh.diameters() ** 2
    base.C = assemble_weighted_stiffness(mesh, base.ymap, 1.0 / rho_el)
    base.rho = rho_el
    return base


def solve_block(sys: OptimalitySystem, *, pivot_threshold: float = 0.1, refine: bool = False) -> Solution:
    """Sparse LU solve of the full block system."""
    t0 = time.perf_counter()
    K = sys.matrix()
    fac = sparsela.lu_factor(K, pivot_threshold=pivot_threshold, refine=refine)
    x = sparsela.solve(fac, sys.rhs())
    my = sys.ymap.count
    p, u = x[:my], x[my:]
    r1, r2 = sys.residuals(p, u)
    diag = {
        "solver": "lu",
        "unknowns": K.shape[0],
        "nnz": K.nnz,
        "lu_nnz": fac.nnz,
        "residual_adjoint": r1,
        "residual_state": r2,
        "seconds": time.perf_counter() - t0,
    }
    log.debug("block solve: %s", diag)
    return Solution(u, p, diag)


def solve_schur(sys: OptimalitySystem, tol: float = 1e-12, maxit: int | None = None) -> Solution:
    """CG on (M + B^T C^{-1} B) u = f, then p = -C^{-1} B u."""
    t0 = time.perf_counter()
    Cfac = sparsela.lu_factor(sys.C)
    B, M = sys.B, sys.M

    def op(v):
        return M @ v + B.T @ sparsela.solve(Cfac, B @ v)

    stats = sparsela.CGStats()
    u = sparsela.cg_solve(op, sys.f, tol=tol, maxit=maxit, stats=stats)
    p = -sparsela.solve(Cfac, B @ u)
    r1, r2 = sys.residuals(p, u)
    diag = {
        "solver": "schur-cg",
        "cg_iterations": stats.iterations,
        "residual_adjoint": r1,
        "residual_state": r2,
        "seconds": time.perf_counter() - t0,
    }
    return Solution(u, p, diag)


def solve(sys: OptimalitySystem, solver: str = "lu", **kw) -> Solution:
    if solver == "lu":
        return solve_block(sys, **kw)
    if solver in ("schur-cg", "schur"):
        return solve_schur(sys, **kw)
    raise ValueError(f"unknown solver {solver!r}")


def state_norm(sys: OptimalitySystem, u: np.ndarray) -> float:
    """sqrt(u^T M_h u), the L2(Q) norm of the discrete state."""
    return float(np.sqrt(max(u @ (sys.M @ u), 0.0)))
