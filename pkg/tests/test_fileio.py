import numpy as np
import pytest

from stwave.fileio import read_mesh, read_vtk_counts, write_mesh, write_vtk
from stwave.mesh import make_initial_mesh, refine_marked


def test_mesh_round_trip(tmp_path):
    m = refine_marked(make_initial_mesh(3), [0, 4, 11])
    write_mesh(tmp_path / "m.txt", m)
    r = read_mesh(tmp_path / "m.txt")
    np.testing.assert_array_equal(r.nodes, m.nodes)
    np.testing.assert_array_equal(r.elements, m.elements)
    np.testing.assert_array_equal(r.boundary_tags, m.boundary_tags)


def test_mesh_bad_header(tmp_path):
    (tmp_path / "m.txt").write_text("vertices 3 triangles 1\n0 0\n1 0\n0 1\n0 1 2\n")
    with pytest.raises(ValueError):
        read_mesh(tmp_path / "m.txt")


def test_mesh_truncated(tmp_path):
    (tmp_path / "m.txt").write_text("nodes 3 elements 1\n0 0\n1 0\n0 1\n0 1\n")
    with pytest.raises(ValueError):
        read_mesh(tmp_path / "m.txt")


def test_vtk_counts_and_fields(tmp_path):
    m = make_initial_mesh(2)
    write_vtk(tmp_path / "a.vtk", m, point_data={"u": m.nodes[:, 0]}, cell_data={"eta": m.areas()})
    info = read_vtk_counts(tmp_path / "a.vtk")
    assert info == {"fields": ["u", "eta"], "points": m.num_nodes, "cells": m.num_elements}
    text = (tmp_path / "a.vtk").read_text()
    assert text.startswith("# vtk DataFile Version 3.0\n")
    assert f"CELL_TYPES {m.num_elements}\n" in text


def test_vtk_rejects_wrong_field_length(tmp_path):
    m = make_initial_mesh(1)
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "a.vtk", m, cell_data={"eta": np.ones(3)})
