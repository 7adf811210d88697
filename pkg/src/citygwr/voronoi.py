"""Bounded Voronoi partition by half-plane clipping.

Each cell starts as the bounding rectangle and is clipped against the
perpendicular-bisector half-plane toward every other generator
(Sutherland-Hodgman). With n generators this is O(n^2) work per build,
which is fine at the few hundred generators this package produces; the
partition is built on demand for export and membership queries, never
maintained incrementally.

Cells are closed convex polygons that tile the box; points on shared
boundaries belong to the lowest region id, the same tie rule the match
scan uses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePartitionError, InputError
from .geo import BoundingBox

__all__ = ["VoronoiCell", "VoronoiPartition", "build_partition"]


@dataclass(frozen=True)
class VoronoiCell:
    region_id: int
    generator: tuple[float, float]
    vertices: np.ndarray  # (k, 2) counter-clockwise, not closed

    @property
    def area(self) -> float:
        v = self.vertices
        if len(v) < 3:
            return 0.0
        x = v[:, 0]
        y = v[:, 1]
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

    def centroid(self) -> tuple[float, float]:
        v = self.vertices
        x = v[:, 0]
        y = v[:, 1]
        cross = x * np.roll(y, -1) - np.roll(x, -1) * y
        a = float(cross.sum()) / 2.0
        if abs(a) < 1e-300:
            return float(x.mean()), float(y.mean())
        cx = float(((x + np.roll(x, -1)) * cross).sum()) / (6.0 * a)
        cy = float(((y + np.roll(y, -1)) * cross).sum()) / (6.0 * a)
        return cx, cy


def _clip_half_plane(vertices: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Keep the part of a convex polygon with normal . p <= offset."""
    kept: list[np.ndarray] = []
    k = len(vertices)
    values = vertices @ normal - offset
    for i in range(k):
        p, fp = vertices[i], values[i]
        q, fq = vertices[(i + 1) % k], values[(i + 1) % k]
        if fp <= 0.0:
            kept.append(p)
            if fq > 0.0:
                t = fp / (fp - fq)
                kept.append(p + t * (q - p))
        elif fq <= 0.0:
            t = fp / (fp - fq)
            kept.append(p + t * (q - p))
    if not kept:
        return np.zeros((0, 2), dtype=np.float64)
    return np.asarray(kept, dtype=np.float64)


def build_partition(
    generators: list[tuple[int, tuple[float, float]]], bbox: BoundingBox
) -> "VoronoiPartition":
    """Clip one cell per generator against all bisectors and the box.

    ``generators`` is a list of (region_id, (x, y)); ids need not be
    contiguous but must be unique. Duplicate generator positions make the
    partition undefined and raise DegeneratePartitionError naming the pair.
    """
    if len(generators) < 2:
        raise InputError("a partition needs at least 2 generators")
    ids = [g[0] for g in generators]
    if len(set(ids)) != len(ids):
        raise InputError("generator region ids must be unique")
    pts = np.asarray([g[1] for g in generators], dtype=np.float64)
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if pts[i, 0] == pts[j, 0] and pts[i, 1] == pts[j, 1]:
                raise DegeneratePartitionError(
                    f"generators for regions {ids[i]} and {ids[j]} coincide at "
                    f"({pts[i, 0]}, {pts[i, 1]})"
                )

    rect = np.array(
        [
            [bbox.x_min, bbox.y_min],
            [bbox.x_max, bbox.y_min],
            [bbox.x_max, bbox.y_max],
            [bbox.x_min, bbox.y_max],
        ],
        dtype=np.float64,
    )
    cells = []
    n = len(pts)
    for i in range(n):
        poly = rect
        wi = pts[i]
        for j in range(n):
            if j == i or len(poly) == 0:
                continue
            normal = pts[j] - wi
            offset = float(normal @ (wi + pts[j])) / 2.0
            poly = _clip_half_plane(poly, normal, offset)
        cells.append(
            VoronoiCell(region_id=ids[i], generator=(float(wi[0]), float(wi[1])), vertices=poly)
        )
    cells.sort(key=lambda c: c.region_id)
    return VoronoiPartition(cells=cells, bbox=bbox)


@dataclass(frozen=True)
class VoronoiPartition:
    cells: list[VoronoiCell]
    bbox: BoundingBox

    def cell(self, region_id: int) -> VoronoiCell:
        for c in self.cells:
            if c.region_id == region_id:
                return c
        raise InputError(f"no cell for region {region_id}")

    def locate(self, x: float, y: float) -> int:
        """Region id of the cell containing (x, y); boundary ties -> lowest id."""
        p = np.array([x, y], dtype=np.float64)
        eps = 1e-9 * max(1.0, self.bbox.diagonal)
        for c in self.cells:  # ascending region id
            if _contains(c.vertices, p, eps):
                return c.region_id
        # Numerical crack between cells: retry with a coarser tolerance.
        eps *= 1e3
        for c in self.cells:
            if _contains(c.vertices, p, eps):
                return c.region_id
        raise InputError(f"point ({x}, {y}) is outside the partition's bounding box")

    def total_area(self) -> float:
        return float(sum(c.area for c in self.cells))


def _contains(vertices: np.ndarray, p: np.ndarray, eps: float) -> bool:
    k = len(vertices)
    if k < 3:
        return False
    for i in range(k):
        a = vertices[i]
        b = vertices[(i + 1) % k]
        cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
        if cross < -eps:
            return False
    return True
