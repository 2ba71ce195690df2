"""Adaptive loop: solve, estimate element errors, mark, refine."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh, MeshHierarchy, refine_marked
from .optcontrol import Regularization, build_system, solve, variable_rho_system
from .postproc import ConvergenceRecord, ErrorField, compute_eoc, element_errors
from .sparsela import SolverError

log = logging.getLogger(__name__)


class AlreadyConverged(Exception):
    """All error indicators vanish; there is nothing to refine."""


@dataclass
class AdaptiveConfig:
    theta: float = 0.5
    max_levels: int = 10
    max_dofs: int | None = None
    rho_mode: str = "scalar"  # "scalar" (rho = h_min^2) or "variable" (rho = h_tau^2)
    marking: str = "maximum"  # "maximum" or "bulk"
    solver: str = "lu"

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if self.rho_mode not in ("scalar", "variable"):
            raise ValueError(f"unknown rho mode {self.rho_mode!r}")
        if self.marking not in ("maximum", "bulk"):
            raise ValueError(f"unknown marking {self.marking!r}")
        if self.max_levels < 0:
            raise ValueError("max_levels must be nonnegative")


def mark(errors, theta: float = 0.5, strategy: str = "maximum") -> np.ndarray:
    """Indices of the elements to refine.

    ``maximum``: eta_k >= theta * max(eta).  ``bulk``: the smallest set of
    largest indicators whose squares sum to at least theta * sum(eta^2).
    """
    eta = errors.eta if isinstance(errors, ErrorField) else np.asarray(errors, float)
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    top = eta.max(initial=0.0)
    if top <= 0.0:
        raise AlreadyConverged("all error indicators are zero")
    if strategy == "maximum":
        return np.flatnonzero(eta >= theta * top)
    if strategy == "bulk":
        order = np.argsort(-eta, kind="stable")
        cum = np.cumsum(eta[order] ** 2)
        n = int(np.searchsorted(cum, theta * cum[-1]) + 1)
        return np.sort(order[:n])
    raise ValueError(f"unknown marking strategy {strategy!r}")


@dataclass
class AdaptiveResult:
    records: list
    hierarchy: MeshHierarchy
    marked: list = field(default_factory=list)
    solutions: list = field(default_factory=list)
    systems: list = field(default_factory=list)
    error: Exception | None = None


def adaptive_loop(initial: Mesh, target, regularization=Regularization.ENERGY,
                  config: AdaptiveConfig | None = None, *, keep_solutions: bool = False) -> AdaptiveResult:
    config = config or AdaptiveConfig()
    hierarchy = MeshHierarchy([initial])
    result = AdaptiveResult([], hierarchy)
    records = []
    for it in range(config.max_levels + 1):
        mesh = hierarchy[it]
        try:
            if config.rho_mode == "variable":
                sys = variable_rho_system(hierarchy, it, target, regularization)
                rho = float(np.min(sys.rho))
            else:
                sys = build_system(hierarchy, it, target, regularization, h_mode="min")
                rho = sys.rho
            sol = solve(sys, config.solver)
        except SolverError as exc:
            log.error("adaptive level %d failed: %s", it, exc)
            result.error = exc
            break
        err = element_errors(mesh, sys.xmap, sol.u, target, sys.quad)
        h_min = float(mesh.diameters().min())
        records.append(ConvergenceRecord(it, sys.xmap.count, mesh.num_elements, h_min, rho, err.global_error))
        log.info("adaptive level %d: %d elements, %d dofs, error %.6e", it, mesh.num_elements,
                 sys.xmap.count, err.global_error)
        if keep_solutions:
            result.solutions.append(sol)
            result.systems.append(sys)
        if it == config.max_levels or (config.max_dofs is not None and sys.xmap.count >= config.max_dofs):
            break
        try:
            marked = mark(err, config.theta, config.marking)
        except AlreadyConverged:
            break
        result.marked.append(marked)
        hierarchy.append(refine_marked(mesh, marked))
    result.records = compute_eoc(records)
    return result
