"""Triangulations of the space-time square Q = (0,1) x (0,1).

Coordinates are stored as ``(x, t)``.  Every element is a vertex triple
``(v0, v1, v2)`` in counterclockwise order whose refinement edge is
``(v0, v1)``; ``v2`` is the newest vertex.  Both uniform red refinement and
newest-vertex bisection preserve that convention, so the two can be mixed.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

GEOM_TOL = 1e-12


class Boundary(enum.IntFlag):
    NONE = 0
    LEFT = 1
    RIGHT = 2
    BOTTOM = 4  # t = 0
    TOP = 8  # t = T


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming simplicial mesh of the unit space-time square.

    ``parent[k]`` is the index of the element of the previous mesh that
    contains element ``k`` (``k`` itself at level 0).
    """

    nodes: np.ndarray
    elements: np.ndarray
    parent: np.ndarray
    level: int = 0
    boundary_tags: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        parent = np.ascontiguousarray(self.parent, dtype=np.int64)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise ValueError("nodes must have shape (N, 2)")
        if elements.ndim != 2 or elements.shape[1] != 3:
            raise ValueError("elements must have shape (M, 3)")
        if parent.shape != (len(elements),):
            raise ValueError("parent must hold one entry per element")
        for name, arr in (("nodes", nodes), ("elements", elements), ("parent", parent)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "boundary_tags", _tag_nodes(nodes))

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_elements(self) -> int:
        return len(self.elements)

    def element_coords(self) -> np.ndarray:
        """Vertex coordinates, shape (M, 3, 2)."""
        return self.nodes[self.elements]

    def areas(self) -> np.ndarray:
        c = self.element_coords()
        d1 = c[:, 1] - c[:, 0]
        d2 = c[:, 2] - c[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def diameters(self) -> np.ndarray:
        """Longest edge of every element."""
        c = self.element_coords()
        lengths = np.stack(
            [np.linalg.norm(c[:, (i + 1) % 3] - c[:, i], axis=1) for i in range(3)], axis=1
        )
        return lengths.max(axis=1)

    def centroids(self) -> np.ndarray:
        return self.element_coords().mean(axis=1)

    def min_angles(self) -> np.ndarray:
        c = self.element_coords()
        angles = []
        for i in range(3):
            a = c[:, (i + 1) % 3] - c[:, i]
            b = c[:, (i + 2) % 3] - c[:, i]
            cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angles.append(np.arccos(np.clip(cos, -1.0, 1.0)))
        return np.min(angles, axis=0)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique undirected edges and the per-element edge ids.

        Returns ``(edges, elem_edges)`` where ``elem_edges[k]`` lists the ids
        of edges ``(v0,v1)``, ``(v1,v2)``, ``(v2,v0)`` of element ``k``.
        """
        return _edge_table(self.elements)


def _tag_nodes(nodes: np.ndarray) -> np.ndarray:
    x, t = nodes[:, 0], nodes[:, 1]
    tags = np.zeros(len(nodes), dtype=np.int64)
    tags[np.abs(x) <= GEOM_TOL] |= Boundary.LEFT
    tags[np.abs(x - 1.0) <= GEOM_TOL] |= Boundary.RIGHT
    tags[np.abs(t) <= GEOM_TOL] |= Boundary.BOTTOM
    tags[np.abs(t - 1.0) <= GEOM_TOL] |= Boundary.TOP
    return tags


def _edge_table(elements):
    local = elements[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 3, 2)
    pairs = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    return edges, inverse.reshape(-1, 3)


def make_initial_mesh(cells_per_side: int) -> Mesh:
    """Criss-cross mesh: every square cell is cut into 4 triangles at its center."""
    n = int(cells_per_side)
    if n < 1:
        raise ValueError("cells_per_side must be >= 1")
    g = np.linspace(0.0, 1.0, n + 1)
    xx, tt = np.meshgrid(g, g)
    grid = np.column_stack([xx.ravel(), tt.ravel()])
    c = (g[:-1] + g[1:]) / 2
    cx, ct = np.meshgrid(c, c)
    centers = np.column_stack([cx.ravel(), ct.ravel()])
    nodes = np.vstack([grid, centers])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    i, j = i.ravel(), j.ravel()
    a = i + j * (n + 1)
    b = a + 1
    d = a + n + 1
    cc = d + 1
    m = (n + 1) ** 2 + i + j * n
    # refinement edge = cell side, newest vertex = cell center
    elements = np.stack(
        [np.column_stack(v) for v in ((a, b, m), (b, cc, m), (cc, d, m), (d, a, m))], axis=1
    ).reshape(-1, 3)
    return Mesh(nodes, elements, np.arange(len(elements)), level=0)


def refine_uniform(mesh: Mesh) -> Mesh:
    """Red refinement: each triangle is split into 4 congruent children."""
    edges, ee = mesh.edges()
    nn = mesh.num_nodes
    mids = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
    nodes = np.vstack([mesh.nodes, mids])
    v0, v1, v2 = mesh.elements.T
    m01, m12, m20 = (ee + nn).T
    children = np.stack(
        [
            np.column_stack([v0, m01, m20]),
            np.column_stack([m01, v1, m12]),
            np.column_stack([m20, m12, v2]),
            np.column_stack([m12, m20, m01]),
        ],
        axis=1,
    ).reshape(-1, 3)
    parent = np.repeat(np.arange(mesh.num_elements), 4)
    return Mesh(nodes, children, parent, level=mesh.level + 1)


def refine_marked(mesh: Mesh, marked) -> Mesh:
    """Newest-vertex bisection of the marked elements plus conforming closure.

    All three edges of a marked element are bisected, so every marked
    element is split into four children.  Neighbours are bisected as far as
    needed to remove hanging nodes.
    """
    marked = np.unique(np.asarray(list(marked) if not isinstance(marked, np.ndarray) else marked,
                                  dtype=np.int64))
    if marked.size == 0:
        raise ValueError("refine_marked needs a nonempty set of marked elements")
    if marked.min() < 0 or marked.max() >= mesh.num_elements:
        raise IndexError("marked element index out of range")

    edges, ee = mesh.edges()
    edge_marked = np.zeros(len(edges), dtype=bool)
    edge_marked[ee[marked].ravel()] = True
    # closure: any element with a marked edge must also bisect its refinement edge
    while True:
        need = edge_marked[ee].any(axis=1) & ~edge_marked[ee[:, 0]]
        if not need.any():
            break
        edge_marked[ee[need, 0]] = True

    nn = mesh.num_nodes
    new_ids = np.full(len(edges), -1, dtype=np.int64)
    new_ids[edge_marked] = nn + np.arange(edge_marked.sum())
    mids = 0.5 * (mesh.nodes[edges[edge_marked, 0]] + mesh.nodes[edges[edge_marked, 1]])
    nodes = np.vstack([mesh.nodes, mids])

    v0, v1, v2 = mesh.elements.T
    m = new_ids[ee[:, 0]]
    m1 = new_ids[ee[:, 1]]
    m2 = new_ids[ee[:, 2]]
    ref = m >= 0
    split1 = m1 >= 0
    split2 = m2 >= 0

    # (a, b, c) bisected at mid(a, b) -> (c, a, mid), (b, c, mid)
    # first child (v2, v0, m) may be bisected on (v2, v0); second (v1, v2, m) on (v1, v2)
    slots = np.full((mesh.num_elements, 4, 3), -1, dtype=np.int64)
    valid = np.zeros((mesh.num_elements, 4), dtype=bool)

    keep = ~ref
    slots[keep, 0] = mesh.elements[keep]
    valid[keep, 0] = True

    a_whole = ref & ~split2
    slots[a_whole, 0] = np.column_stack([v2, v0, m])[a_whole]
    valid[a_whole, 0] = True
    a_split = ref & split2
    slots[a_split, 0] = np.column_stack([m, v2, m2])[a_split]
    slots[a_split, 1] = np.column_stack([v0, m, m2])[a_split]
    valid[a_split, :2] = True

    b_whole = ref & ~split1
    slots[b_whole, 2] = np.column_stack([v1, v2, m])[b_whole]
    valid[b_whole, 2] = True
    b_split = ref & split1
    slots[b_split, 2] = np.column_stack([m, v1, m1])[b_split]
    slots[b_split, 3] = np.column_stack([v2, m, m1])[b_split]
    valid[b_split, 2:] = True

    elements = slots[valid]
    parent = np.repeat(np.arange(mesh.num_elements), valid.sum(axis=1))
    return Mesh(nodes, elements, parent, level=mesh.level + 1)


def mesh_size(mesh: Mesh) -> tuple[float, float]:
    """(h_max, h_min) with h the longest edge of an element."""
    d = mesh.diameters()
    return float(d.max()), float(d.min())


def is_conforming(mesh: Mesh) -> bool:
    """Edge audit: interior edges are shared by exactly two elements, and
    edges owned by a single element lie on the boundary of Q."""
    local = mesh.elements[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    pairs = np.sort(local, axis=1)
    edges, counts = np.unique(pairs, axis=0, return_counts=True)
    if (counts > 2).any():
        return False
    single = edges[counts == 1]
    tags = mesh.boundary_tags
    a, b = tags[single[:, 0]], tags[single[:, 1]]
    # both endpoints must share a side of the square
    return bool(np.all((a & b) != 0))


def prolongate(coarse: Mesh, fine: Mesh, values: np.ndarray) -> np.ndarray:
    """Interpolate nodal P1 values from ``coarse`` onto the nested ``fine`` mesh."""
    values = np.asarray(values, dtype=float)
    out = np.empty(fine.num_nodes)
    # every fine element lies inside coarse[parent]; express its nodes in the
    # parent's barycentric coordinates
    pc = coarse.element_coords()[fine.parent]  # (Mf, 3, 2)
    pts = fine.element_coords()  # (Mf, 3, 2)
    lam = barycentric(pc, pts)
    vals = np.einsum("mqi,mi->mq", lam, values[coarse.elements[fine.parent]])
    out[fine.elements.ravel()] = vals.ravel()
    return out


def barycentric(tri: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of ``pts`` (M, Q, 2) in triangles ``tri`` (M, 3, 2)."""
    p0 = tri[:, 0][:, None, :]
    T = np.stack([tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]], axis=2)  # (M, 2, 2)
    rhs = (pts - p0).transpose(0, 2, 1)  # (M, 2, Q)
    l12 = np.linalg.solve(T, rhs).transpose(0, 2, 1)
    return np.concatenate([1.0 - l12.sum(axis=2, keepdims=True), l12], axis=2)


class MeshHierarchy:
    """Nested sequence of meshes; ``meshes[l + 1].parent`` indexes ``meshes[l]``."""

    def __init__(self, meshes=None):
        self.meshes: list[Mesh] = list(meshes or [])

    def __len__(self):
        return len(self.meshes)

    def __getitem__(self, level) -> Mesh:
        return self.meshes[level]

    def __iter__(self):
        return iter(self.meshes)

    def append(self, mesh: Mesh):
        if self.meshes and mesh.parent.max(initial=-1) >= self.meshes[-1].num_elements:
            raise ValueError("parent map does not fit the previous mesh")
        self.meshes.append(mesh)

    @classmethod
    def uniform(cls, cells_per_side: int, levels: int) -> MeshHierarchy:
        """Levels ``0..levels`` of red refinement of the criss-cross mesh."""
        h = cls([make_initial_mesh(cells_per_side)])
        for _ in range(levels):
            h.append(refine_uniform(h.meshes[-1]))
        return h

    def child_to_parent(self, level: int) -> np.ndarray:
        if level == 0:
            raise ValueError("level 0 has no parent mesh")
        return self.meshes[level].parent
