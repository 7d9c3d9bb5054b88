"""Orthogonal finite-volume meshes: 1-D spheres and 2-D Cartesian grids.

Geometry is stored as flat numpy arrays so the operator assembly can be
vectorized; :attr:`FVMesh.cells` and :attr:`FVMesh.faces` expose the same
data as lightweight records for inspection and tests.
"""

from dataclasses import dataclass
from functools import cached_property
from importlib import resources

import numpy as np

from .errors import PreconditionError

__all__ = [
    "INTERIOR",
    "ZERO_FLUX",
    "REFLECTIVE",
    "Cell",
    "Face",
    "FVMesh",
    "build_spherical_mesh",
    "build_cartesian_mesh",
    "load_region_map",
    "lra_region_map",
    "build_lra_mesh",
]

INTERIOR = "interior"
ZERO_FLUX = "zero_flux"
REFLECTIVE = "reflective"
_TAGS = (INTERIOR, ZERO_FLUX, REFLECTIVE)


@dataclass(frozen=True)
class Cell:
    id: int
    volume: float
    centroid: tuple
    region_id: int


@dataclass(frozen=True)
class Face:
    id: int
    area: float
    owner: int
    neighbor: int | None
    d_if: float
    d_in: float | None
    boundary_tag: str


class FVMesh:
    """Immutable cell/face description of an orthogonal grid.

    Parameters
    ----------
    dimension : int
        1 for spherical radial grids, 2 for Cartesian grids.
    volumes : ndarray, shape (n_cells,)
    centroids : ndarray, shape (n_cells, dimension)
    region_ids : ndarray of int, shape (n_cells,)
    face_area, face_d_if, face_d_in : ndarray, shape (n_faces,)
        ``face_d_in`` is NaN on boundary faces.
    face_owner, face_neighbor : ndarray of int, shape (n_faces,)
        ``face_neighbor`` is -1 on boundary faces.
    face_tag : ndarray of str, shape (n_faces,)
    domain_measure : float
        Exact volume (area for 2-D) of the domain, for sanity checks.
    """

    def __init__(self, dimension, volumes, centroids, region_ids, face_area, face_owner,
                 face_neighbor, face_d_if, face_d_in, face_tag, domain_measure):
        self.dimension = int(dimension)
        self.volumes = np.asarray(volumes, dtype=float)
        self.centroids = np.asarray(centroids, dtype=float).reshape(len(self.volumes), -1)
        self.region_ids = np.asarray(region_ids, dtype=int)
        self.face_area = np.asarray(face_area, dtype=float)
        self.face_owner = np.asarray(face_owner, dtype=int)
        self.face_neighbor = np.asarray(face_neighbor, dtype=int)
        self.face_d_if = np.asarray(face_d_if, dtype=float)
        self.face_d_in = np.asarray(face_d_in, dtype=float)
        self.face_tag = np.asarray(face_tag, dtype=object)
        self.domain_measure = float(domain_measure)
        for arr in (self.volumes, self.centroids, self.region_ids, self.face_area,
                    self.face_owner, self.face_neighbor, self.face_d_if, self.face_d_in):
            arr.setflags(write=False)

    @property
    def n_cells(self):
        return len(self.volumes)

    @property
    def n_faces(self):
        return len(self.face_area)

    @cached_property
    def interior(self):
        """Boolean mask of interior faces."""
        return self.face_neighbor >= 0

    @cached_property
    def cells(self):
        return [
            Cell(id=i, volume=float(self.volumes[i]), centroid=tuple(self.centroids[i]),
                 region_id=int(self.region_ids[i]))
            for i in range(self.n_cells)
        ]

    @cached_property
    def faces(self):
        out = []
        for f in range(self.n_faces):
            nb = int(self.face_neighbor[f])
            out.append(Face(
                id=f,
                area=float(self.face_area[f]),
                owner=int(self.face_owner[f]),
                neighbor=nb if nb >= 0 else None,
                d_if=float(self.face_d_if[f]),
                d_in=float(self.face_d_in[f]) if nb >= 0 else None,
                boundary_tag=str(self.face_tag[f]),
            ))
        return out

    @cached_property
    def cell_faces(self):
        """For each cell, the ids of the faces it touches."""
        lists = [[] for _ in range(self.n_cells)]
        for f in range(self.n_faces):
            lists[self.face_owner[f]].append(f)
            if self.face_neighbor[f] >= 0:
                lists[self.face_neighbor[f]].append(f)
        return lists

    def cells_in_regions(self, regions):
        return np.isin(self.region_ids, list(regions))


def build_spherical_mesh(r_b, n_cells, region_id=0):
    """Equally spaced radial shells of a sphere of radius ``r_b``.

    The face at ``r = 0`` is kept as a reflective face of zero area so the
    center needs no special treatment; the outer face is zero-flux.
    """
    if not r_b > 0.0:
        raise PreconditionError(f"sphere radius must be positive, got {r_b}")
    if int(n_cells) != n_cells or n_cells < 1:
        raise PreconditionError(f"n_cells must be a positive integer, got {n_cells}")
    n = int(n_cells)
    edges = np.linspace(0.0, r_b, n + 1)
    r_in, r_out = edges[:-1], edges[1:]
    volumes = 4.0 / 3.0 * np.pi * (r_out**3 - r_in**3)
    centers = 0.5 * (r_in + r_out)

    # face f sits at edges[f]; owner is the cell on its inner side (or cell 0
    # for the center face)
    owner = np.concatenate([[0], np.arange(n)])
    neighbor = np.concatenate([[-1], np.arange(1, n), [-1]])
    area = 4.0 * np.pi * edges**2
    d_if = np.abs(edges - centers[owner])
    d_in = np.full(n + 1, np.nan)
    d_in[1:n] = centers[1:] - centers[:-1]
    tags = np.array([REFLECTIVE] + [INTERIOR] * (n - 1) + [ZERO_FLUX], dtype=object)
    return FVMesh(
        dimension=1, volumes=volumes, centroids=centers[:, None],
        region_ids=np.full(n, region_id), face_area=area, face_owner=owner,
        face_neighbor=neighbor, face_d_if=d_if, face_d_in=d_in, face_tag=tags,
        domain_measure=4.0 / 3.0 * np.pi * r_b**3,
    )


def build_cartesian_mesh(nx, ny, dx, dy, region_map=None, boundary_tags=None, valid_regions=None):
    """Uniform ``nx`` by ``ny`` rectangle grid with per-unit-height volumes.

    Cells are numbered with x fastest: ``id = j * nx + i``.

    Parameters
    ----------
    region_map : callable, optional
        ``region_map(x, y) -> region id`` evaluated at each cell center.
        Defaults to region 0 everywhere.
    boundary_tags : dict, optional
        Tag for each of ``"left"``, ``"right"``, ``"bottom"``, ``"top"``.
        Defaults to reflective left/bottom and zero-flux right/top.
    valid_regions : iterable of int, optional
        If given, a region id outside this set raises an error naming the
        offending cell center.
    """
    if nx < 1 or ny < 1:
        raise PreconditionError(f"grid needs at least one cell per direction, got {nx}x{ny}")
    if not (dx > 0.0 and dy > 0.0):
        raise PreconditionError(f"cell sizes must be positive, got dx={dx}, dy={dy}")
    tags = {"left": REFLECTIVE, "bottom": REFLECTIVE, "right": ZERO_FLUX, "top": ZERO_FLUX}
    if boundary_tags:
        tags.update(boundary_tags)
    for side, tag in tags.items():
        if tag not in (ZERO_FLUX, REFLECTIVE):
            raise PreconditionError(f"unknown boundary tag {tag!r} on side {side!r}")

    xc = (np.arange(nx) + 0.5) * dx
    yc = (np.arange(ny) + 0.5) * dy
    X, Y = np.meshgrid(xc, yc)  # shape (ny, nx), x fastest after ravel
    centroids = np.column_stack([X.ravel(), Y.ravel()])
    n = nx * ny
    if region_map is None:
        regions = np.zeros(n, dtype=int)
    else:
        regions = np.array([region_map(x, y) for x, y in centroids])
        if valid_regions is not None:
            allowed = set(valid_regions)
            for (x, y), reg in zip(centroids, regions):
                if reg not in allowed:
                    raise PreconditionError(f"region map returned unknown region {reg!r} at cell center ({x}, {y})")

    ids = np.arange(n).reshape(ny, nx)
    owner, neighbor, area, d_if, d_in, tag = [], [], [], [], [], []

    def add(o, nb, a, dif, din, t):
        owner.append(o), neighbor.append(nb), area.append(a)
        d_if.append(dif), d_in.append(din), tag.append(t)

    # x-normal faces
    for j in range(ny):
        add(ids[j, 0], -1, dy, 0.5 * dx, np.nan, tags["left"])
        for i in range(nx - 1):
            add(ids[j, i], ids[j, i + 1], dy, 0.5 * dx, dx, INTERIOR)
        add(ids[j, nx - 1], -1, dy, 0.5 * dx, np.nan, tags["right"])
    # y-normal faces
    for i in range(nx):
        add(ids[0, i], -1, dx, 0.5 * dy, np.nan, tags["bottom"])
        for j in range(ny - 1):
            add(ids[j, i], ids[j + 1, i], dx, 0.5 * dy, dy, INTERIOR)
        add(ids[ny - 1, i], -1, dx, 0.5 * dy, np.nan, tags["top"])

    return FVMesh(
        dimension=2, volumes=np.full(n, dx * dy), centroids=centroids, region_ids=regions,
        face_area=area, face_owner=owner, face_neighbor=neighbor, face_d_if=d_if,
        face_d_in=d_in, face_tag=np.array(tag, dtype=object), domain_measure=nx * dx * ny * dy,
    )


def load_region_map(text):
    """Parse an assembly region map.

    One line per assembly row, listed top row first (largest y), each line
    holding whitespace separated integer region ids from left to right.
    Blank lines and ``#`` comments are ignored. Returns an int array whose
    row 0 is the *bottom* assembly row, so ``grid[j, i]`` is region of
    assembly column ``i``, row ``j``.
    """
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append([int(tok) for tok in line.split()])
    if not rows:
        raise PreconditionError("region map is empty")
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise PreconditionError(f"region map rows have inconsistent lengths {sorted(width)}")
    return np.array(rows[::-1], dtype=int)


def lra_region_map():
    """The 11 x 11 LRA assembly map bundled with the package."""
    text = resources.files("podmci.data").joinpath("lra_regions.txt").read_text()
    return load_region_map(text)


def build_lra_mesh(cells_per_assembly=2, assembly_pitch=15.0, assembly_map=None):
    """LRA quarter core: 11 x 11 assemblies refined into square cells.

    The default refinement of 2 gives the 22 x 22 grid of 7.5 cm cells.
    Region ids follow the bundled map, where region 6 marks the rodded
    region-3 assemblies whose absorption is ramped during the transient.
    """
    grid = lra_region_map() if assembly_map is None else np.asarray(assembly_map)
    na_y, na_x = grid.shape
    h = assembly_pitch / cells_per_assembly

    def region(x, y):
        return int(grid[int(y // assembly_pitch), int(x // assembly_pitch)])

    return build_cartesian_mesh(
        na_x * cells_per_assembly, na_y * cells_per_assembly, h, h, region_map=region,
        boundary_tags={"left": REFLECTIVE, "bottom": REFLECTIVE, "right": ZERO_FLUX, "top": ZERO_FLUX},
        valid_regions=np.unique(grid),
    )
