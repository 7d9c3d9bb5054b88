import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from podmci.errors import PreconditionError
from podmci.mesh import (REFLECTIVE, ZERO_FLUX, build_cartesian_mesh, build_lra_mesh,
                         build_spherical_mesh, load_region_map, lra_region_map)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 50.0), st.integers(1, 200))
def test_sphere_volumes_sum_to_ball(r_b, n):
    m = build_spherical_mesh(r_b, n)
    assert m.volumes.sum() == pytest.approx(4 / 3 * np.pi * r_b**3, rel=1e-12)
    assert m.n_faces == n + 1
    assert m.face_area[0] == 0.0 and m.face_tag[0] == REFLECTIVE and m.face_tag[-1] == ZERO_FLUX


def test_sphere_centroids_and_distances():
    m = build_spherical_mesh(2.0, 4)
    np.testing.assert_allclose(m.centroids[:, 0], [0.25, 0.75, 1.25, 1.75])
    np.testing.assert_allclose(m.face_d_in[1:4], 0.5)
    np.testing.assert_allclose(m.face_d_if, 0.25)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.floats(0.1, 10), st.floats(0.1, 10))
def test_cartesian_counts_and_measure(nx, ny, dx, dy):
    m = build_cartesian_mesh(nx, ny, dx, dy)
    assert m.n_cells == nx * ny
    assert m.n_faces == (nx + 1) * ny + (ny + 1) * nx
    assert m.volumes.sum() == pytest.approx(nx * dx * ny * dy)
    # every cell has exactly four faces
    assert all(len(f) == 4 for f in m.cell_faces)
    # interior faces: owner and neighbor are distinct, center distance positive
    inner = m.interior
    assert np.all(m.face_owner[inner] != m.face_neighbor[inner])
    assert np.all(m.face_d_in[inner] > 0)


def test_cartesian_numbering_x_fastest():
    m = build_cartesian_mesh(3, 2, 1.0, 2.0)
    np.testing.assert_allclose(m.centroids[1], [1.5, 1.0])
    np.testing.assert_allclose(m.centroids[3], [0.5, 3.0])


def test_cartesian_unknown_region_is_reported():
    with pytest.raises(PreconditionError, match="region"):
        build_cartesian_mesh(2, 2, 1.0, 1.0, region_map=lambda x, y: 9, valid_regions={1, 2})


def test_region_map_parsing_flips_rows():
    grid = load_region_map("# comment\n1 2\n3 4\n")
    np.testing.assert_array_equal(grid, [[3, 4], [1, 2]])
    with pytest.raises(PreconditionError):
        load_region_map("1 2\n3\n")


def test_lra_map_and_mesh():
    grid = lra_region_map()
    assert grid.shape == (11, 11)
    # symmetric about the diagonal of the quarter core
    np.testing.assert_array_equal(grid, grid.T)
    m = build_lra_mesh()
    assert m.n_cells == 484
    np.testing.assert_allclose(m.volumes, 56.25)
    core = np.isin(m.region_ids, [1, 2, 3, 4, 6])
    # fuel region spans 0..135 cm in each direction less the reflector corner
    assert m.volumes[core].sum() == pytest.approx(17550.0)
