"""Degree-of-freedom maps for the P1 trial/test spaces and the P0 control space."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .mesh import Boundary, Mesh, MeshHierarchy


class SpaceKind(enum.Enum):
    TRIAL_X = "trial"  # u = 0 on x=0, x=1 and t=0
    TEST_Y = "test"  # q = 0 on x=0, x=1 and t=T
    FREE = "free"


ESSENTIAL_TAGS = {
    SpaceKind.TRIAL_X: Boundary.LEFT | Boundary.RIGHT | Boundary.BOTTOM,
    SpaceKind.TEST_Y: Boundary.LEFT | Boundary.RIGHT | Boundary.TOP,
    SpaceKind.FREE: Boundary.NONE,
}


@dataclass(frozen=True, eq=False)
class DofMap:
    mesh: Mesh
    kind: SpaceKind
    node_to_dof: np.ndarray  # -1 for constrained nodes
    dof_to_node: np.ndarray

    @property
    def count(self) -> int:
        return len(self.dof_to_node)

    def expand(self, coeffs: np.ndarray) -> np.ndarray:
        """Nodal values of the P1 function with the given coefficients,
        zero on constrained nodes."""
        out = np.zeros(self.mesh.num_nodes)
        out[self.dof_to_node] = coeffs
        return out

    def restrict(self, nodal: np.ndarray) -> np.ndarray:
        return np.asarray(nodal)[self.dof_to_node]


def build_dofmap(mesh: Mesh, kind: SpaceKind) -> DofMap:
    kind = SpaceKind(kind)
    free = (mesh.boundary_tags & int(ESSENTIAL_TAGS[kind])) == 0
    dof_to_node = np.flatnonzero(free)
    node_to_dof = np.full(mesh.num_nodes, -1, dtype=np.int64)
    node_to_dof[dof_to_node] = np.arange(len(dof_to_node))
    node_to_dof.setflags(write=False)
    dof_to_node.setflags(write=False)
    return DofMap(mesh, kind, node_to_dof, dof_to_node)


@dataclass(frozen=True, eq=False)
class ControlSpace:
    """Piecewise constants on the mesh one level below ``fine_mesh``."""

    mesh: Mesh
    fine_mesh: Mesh

    @property
    def count(self) -> int:
        return self.mesh.num_elements


def build_control_space(hierarchy: MeshHierarchy, fine_level: int) -> ControlSpace:
    if fine_level < 1:
        raise ValueError("no coarser mesh: the control space needs fine_level >= 1")
    if fine_level >= len(hierarchy):
        raise IndexError(f"hierarchy has no level {fine_level}")
    return ControlSpace(hierarchy[fine_level - 1], hierarchy[fine_level])
