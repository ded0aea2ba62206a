"""Country outlines, raster masks and the no-flux grid Laplacian.

Boundary documents are GeoJSON (Polygon / MultiPolygon, 2-D coordinates).
Coordinates are used as planar; the grid length unit is that of the
document (degrees for the bundled outlines).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy import ndimage

from .errors import GeometryError

Projection = Callable[[np.ndarray, np.ndarray], tuple]


@dataclass
class PolygonSet:
    rings: list
    bbox: tuple
    named_regions: dict = field(default_factory=dict)

    @classmethod
    def from_rings(cls, rings, named_regions=None) -> PolygonSet:
        if not rings:
            raise GeometryError("polygon set has no rings")
        pts = np.vstack(rings)
        bbox = (float(pts[:, 0].min()), float(pts[:, 1].min()), float(pts[:, 0].max()), float(pts[:, 1].max()))
        return cls(list(rings), bbox, dict(named_regions or {}))

    def contains(self, x, y) -> np.ndarray:
        """Even-odd point-in-polygon test over all rings."""
        return points_in_rings(np.asarray(x, dtype=float), np.asarray(y, dtype=float), self.rings)


def points_in_rings(x: np.ndarray, y: np.ndarray, rings) -> np.ndarray:
    # crossing-number test; holes and disjoint parts fall out of the parity
    inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
    for ring in rings:
        xa, ya = ring[:-1, 0], ring[:-1, 1]
        xb, yb = ring[1:, 0], ring[1:, 1]
        for x1, y1, x2, y2 in zip(xa, ya, xb, yb):
            if y1 == y2:
                continue
            straddles = (y1 > y) != (y2 > y)
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            inside ^= straddles & (x < x_cross)
    return inside


def _parse_ring(coords, where: str, projection: Optional[Projection]) -> np.ndarray:
    try:
        ring = np.asarray(coords, dtype=float)
    except (TypeError, ValueError):
        raise GeometryError(f"{where}: malformed coordinates") from None
    if ring.ndim != 2 or ring.shape[1] != 2:
        raise GeometryError(f"{where}: expected a list of 2-D positions")
    if len(ring) < 4:
        raise GeometryError(f"{where}: a ring needs at least 4 positions")
    if not np.array_equal(ring[0], ring[-1]):
        raise GeometryError(f"{where}: ring is not closed (first position != last)")
    if projection is not None:
        px, py = projection(ring[:, 0], ring[:, 1])
        ring = np.column_stack([px, py])
    return ring


def _geometry_rings(geom, where: str, projection) -> list:
    if not isinstance(geom, dict) or "type" not in geom:
        raise GeometryError(f"{where}: geometry object expected")
    kind = geom["type"]
    coords = geom.get("coordinates")
    if kind == "Polygon":
        polygons = [coords]
    elif kind == "MultiPolygon":
        polygons = coords
    else:
        raise GeometryError(f"{where}: unsupported geometry type {kind!r}")
    if not isinstance(polygons, list):
        raise GeometryError(f"{where}: coordinates must be an array")
    rings = []
    for i, poly in enumerate(polygons):
        for j, ring in enumerate(poly):
            rings.append(_parse_ring(ring, f"{where}.polygon[{i}].ring[{j}]", projection))
    return rings


def load_polygons(source, projection: Optional[Projection] = None) -> PolygonSet:
    """Read a GeoJSON document into a :class:`PolygonSet`.

    ``source`` is a path, a JSON string, or an already decoded mapping.
    Features whose ``level`` property is 0 or missing form the outline;
    every feature with a ``name`` property is also available in
    ``named_regions``.
    """
    if isinstance(source, dict):
        doc = source
    else:
        text = Path(source).read_text() if isinstance(source, Path) or not str(source).lstrip().startswith("{") else source
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise GeometryError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None

    kind = doc.get("type") if isinstance(doc, dict) else None
    if kind == "FeatureCollection":
        features = doc.get("features", [])
    elif kind == "Feature":
        features = [doc]
    elif kind in ("Polygon", "MultiPolygon"):
        features = [{"type": "Feature", "properties": {}, "geometry": doc}]
    else:
        raise GeometryError(f"unsupported document type {kind!r}")

    outline, named, all_rings = [], {}, []
    for n, feat in enumerate(features):
        props = feat.get("properties") or {}
        rings = _geometry_rings(feat.get("geometry"), f"features[{n}].geometry", projection)
        all_rings.extend(rings)
        if props.get("level", 0) == 0:
            outline.extend(rings)
        if props.get("name"):
            named[str(props["name"])] = PolygonSet.from_rings(rings)
    return PolygonSet.from_rings(outline or all_rings, named)


def bundled_geometry(name: str) -> Path:
    """Path of a bundled boundary document ('germany' or 'cameroon')."""
    path = resources.files("epidiff") / "data" / f"{name.lower()}.geojson"
    if not path.is_file():
        raise GeometryError(f"no bundled geometry named {name!r}")
    return Path(str(path))


@dataclass
class RasterMask:
    nx: int
    ny: int
    h: float
    origin: tuple
    active: np.ndarray  # (ny, nx) bool, row 0 at the bottom
    index_map: np.ndarray  # (ny, nx) int, -1 where inactive

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Centers of the active cells in compact-index order."""
        rows, cols = np.nonzero(self.active)
        return self.origin[0] + (cols + 0.5) * self.h, self.origin[1] + (rows + 0.5) * self.h

    def locate(self, x: float, y: float) -> int:
        """Compact index of the cell containing (x, y), or -1."""
        col = math.floor((x - self.origin[0]) / self.h)
        row = math.floor((y - self.origin[1]) / self.h)
        if 0 <= row < self.ny and 0 <= col < self.nx:
            return int(self.index_map[row, col])
        return -1

    def region(self, poly: PolygonSet) -> np.ndarray:
        """Boolean per active cell: is its center inside ``poly``."""
        cx, cy = self.cell_centers()
        return poly.contains(cx, cy)

    def to_grid(self, values: np.ndarray, fill=0.0) -> np.ndarray:
        grid = np.full((self.ny, self.nx), fill, dtype=float)
        grid[self.active] = values
        return grid

    def to_pgm(self, path) -> None:
        write_pgm(path, self.active.astype(int), maxval=1)


def rasterize(poly: PolygonSet, nx: int = 128, shift=(0.0, 0.0), prune_fraction: float = 0.01) -> RasterMask:
    """Active-cell mask from an even-odd test at cell centers.

    The grid spans the bounding box with ``nx`` columns; ``shift`` moves the
    origin by a fraction of a cell (one extra row/column keeps the outline
    covered). Components smaller than ``prune_fraction`` of the largest are
    dropped.
    """
    if nx < 8:
        raise GeometryError("nx must be at least 8")
    xmin, ymin, xmax, ymax = poly.bbox
    h = (xmax - xmin) / nx
    if not h > 0:
        raise GeometryError("degenerate bounding box")
    ny = max(1, math.ceil((ymax - ymin) / h - 1e-9))
    sx, sy = shift
    ox, oy = xmin - sx * h, ymin - sy * h
    ncols = nx + (1 if sx else 0)
    nrows = ny + (1 if sy else 0)
    cols, rows = np.meshgrid(np.arange(ncols), np.arange(nrows))
    active = poly.contains(ox + (cols + 0.5) * h, oy + (rows + 0.5) * h)
    if not active.any():
        raise GeometryError("no cell center falls inside the polygon")

    labels, count = ndimage.label(active)  # default structure is 4-connectivity
    if count > 1:
        sizes = np.bincount(labels.ravel())[1:]
        keep = np.flatnonzero(sizes >= prune_fraction * sizes.max()) + 1
        active = np.isin(labels, keep)

    index_map = np.full(active.shape, -1, dtype=np.int64)
    index_map[active] = np.arange(int(active.sum()))
    return RasterMask(ncols, nrows, h, (ox, oy), active, index_map)


@dataclass
class LaplacianOperator:
    """Negative grid Laplacian with no-flux closure (symmetric, PSD).

    The integer-valued ``stencil`` is stored and ``1/h^2`` is applied after
    each product, so rows sum to zero exactly and constants are mapped to
    exact zeros.
    """

    stencil: sp.csr_matrix
    h: float

    @property
    def inv_h2(self) -> float:
        return 1.0 / self.h**2

    @property
    def matrix(self) -> sp.csr_matrix:
        """The operator with its ``1/h^2`` scaling applied."""
        return (self.stencil * self.inv_h2).tocsr()

    def __matmul__(self, u):
        return (self.stencil @ u) * self.inv_h2

    @property
    def shape(self):
        return self.stencil.shape


def build_laplacian(mask: RasterMask) -> LaplacianOperator:
    """5-point stencil restricted to active neighbours.

    Row i holds ``(#active neighbours)/h^2`` on the diagonal and ``-1/h^2``
    for each active neighbour, so every row sums to zero.
    """
    idx = mask.index_map
    rows, cols = [], []
    # pair each active cell with its right and upper neighbour once
    for a, b in ((idx[:, :-1], idx[:, 1:]), (idx[:-1, :], idx[1:, :])):
        both = (a >= 0) & (b >= 0)
        rows.append(a[both])
        cols.append(b[both])
    i = np.concatenate(rows)
    j = np.concatenate(cols)
    n = mask.n_active
    off = sp.coo_matrix((np.full(len(i), -1.0), (i, j)), shape=(n, n))
    off = off + off.T
    degree = -np.asarray(off.sum(axis=1)).ravel()
    stencil = (off + sp.diags(degree)).tocsr()
    stencil.sort_indices()
    return LaplacianOperator(stencil, mask.h)


def write_pgm(path, grid: np.ndarray, maxval: int = 65535) -> None:
    """Plain (P2) graymap; the grid's row 0 is written at the bottom."""
    img = np.flipud(np.asarray(grid, dtype=np.int64))
    with open(path, "w") as fh:
        fh.write(f"P2\n{img.shape[1]} {img.shape[0]}\n{maxval}\n")
        for row in img:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def read_pgm(path) -> tuple[np.ndarray, int]:
    tokens = []
    for line in Path(path).read_text().splitlines():
        tokens.extend(line.split("#", 1)[0].split())
    if not tokens or tokens[0] != "P2":
        raise GeometryError(f"{path}: not a plain PGM file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array(tokens[4:4 + w * h], dtype=np.int64).reshape(h, w)
    return np.flipud(data), maxval
