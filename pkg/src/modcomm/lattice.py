"""Triangular-lattice geometry for coarse-grained disks.

Cells are axial integer pairs ``(q, r)``.  The six neighbours of a cell are
``(q±1, r)``, ``(q, r±1)`` and ``(q±1, r±1)`` (same sign), and the cell
centre sits at ``(q - r/2, r*sqrt(3)/2)`` in the plane.  All adjacency and
orientation tests use integer arithmetic only.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import Disconnects, OutOfBounds, TooSmall

Cell = tuple[int, int]
Region = frozenset  # frozenset[Cell]

NEIGHBOR_OFFSETS: tuple[Cell, ...] = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1))
# the two triangles anchored at each cell (up and down faces)
_FACE_OFFSETS = (((1, 0), (1, 1)), ((0, 1), (1, 1)))
REGION_LABELS = ("A", "B", "C")
_SQRT3_2 = math.sqrt(3) / 2


def neighbors(cell: Cell) -> list[Cell]:
    q, r = cell
    return [(q + dq, r + dr) for dq, dr in NEIGHBOR_OFFSETS]


def adjacent(a: Cell, b: Cell) -> bool:
    return (b[0] - a[0], b[1] - a[1]) in NEIGHBOR_OFFSETS


def hex_distance(a: Cell, b: Cell) -> int:
    dq, dr = a[0] - b[0], a[1] - b[1]
    return max(abs(dq), abs(dr), abs(dq - dr))


def position(cell: Cell) -> tuple[float, float]:
    """Cartesian centre of a cell (unit nearest-neighbour spacing)."""
    q, r = cell
    return (q - r / 2, r * _SQRT3_2)


def _scaled(cell: Cell) -> tuple[int, int]:
    # (2x, 2y/sqrt3): integer coordinates with the same orientation as the plane
    q, r = cell
    return (2 * q - r, r)


def orientation(a: Cell, b: Cell, c: Cell) -> int:
    """+1 if a->b->c runs counterclockwise, -1 if clockwise, 0 if collinear."""
    (xa, ya), (xb, yb), (xc, yc) = _scaled(a), _scaled(b), _scaled(c)
    cross = (xb - xa) * (yc - ya) - (yb - ya) * (xc - xa)
    return (cross > 0) - (cross < 0)


def cell_at(x: float, y: float, spacing: float = 1.0) -> Cell:
    """Nearest cell to a planar point, for cells of the given spacing."""
    r = y / (_SQRT3_2 * spacing)
    q = x / spacing + r / 2
    # cube rounding with cube = (q, r - q, -r)
    cx, cy, cz = q, r - q, -r
    rx, ry, rz = round(cx), round(cy), round(cz)
    ex, ey, ez = abs(rx - cx), abs(ry - cy), abs(rz - cz)
    if ex > ey and ex > ez:
        rx = -ry - rz
    elif ey > ez:
        ry = -rx - rz
    else:
        rz = -rx - ry
    return (int(rx), int(-rz))


def faces_of(cells: Iterable[Cell]) -> frozenset:
    cells = frozenset(cells)
    out = set()
    for q, r in cells:
        for (d1q, d1r), (d2q, d2r) in _FACE_OFFSETS:
            face = frozenset({(q, r), (q + d1q, r + d1r), (q + d2q, r + d2r)})
            if face <= cells:
                out.add(face)
    return frozenset(out)


def edges_of(cells: Iterable[Cell]) -> frozenset:
    cells = frozenset(cells)
    return frozenset(
        frozenset({c, n}) for c in cells for n in neighbors(c) if n in cells
    )


def is_connected(cells: Iterable[Cell]) -> bool:
    cells = set(cells)
    if not cells:
        return False
    start = next(iter(cells))
    seen = {start}
    todo = deque([start])
    while todo:
        for n in neighbors(todo.popleft()):
            if n in cells and n not in seen:
                seen.add(n)
                todo.append(n)
    return len(seen) == len(cells)


def is_simply_connected(cells: Iterable[Cell]) -> bool:
    """Connected, and the complement inside a padded bounding box is connected."""
    cells = frozenset(cells)
    if not is_connected(cells):
        return False
    qs = [c[0] for c in cells]
    rs = [c[1] for c in cells]
    box = {
        (q, r)
        for q in range(min(qs) - 1, max(qs) + 2)
        for r in range(min(rs) - 1, max(rs) + 2)
    }
    return is_connected(box - cells)


def is_chain_like(x: Iterable[Cell], y: Iterable[Cell], z: Iterable[Cell]) -> bool:
    """True iff X, Y, Z are simply connected and X shares no edge with Z."""
    x, y, z = frozenset(x), frozenset(y), frozenset(z)
    if not all(is_simply_connected(s) for s in (x, y, z)):
        return False
    return not any(n in z for c in x for n in neighbors(c))


@dataclass(frozen=True)
class TriLattice:
    """A parallelogram patch ``0 <= q < extent[0]``, ``0 <= r < extent[1]``."""

    extent: tuple[int, int]

    def __contains__(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.extent[0] and 0 <= cell[1] < self.extent[1]

    @property
    def cells(self) -> frozenset:
        return frozenset(
            (q, r) for q in range(self.extent[0]) for r in range(self.extent[1])
        )


@dataclass(frozen=True)
class Disk:
    cells: frozenset
    interior: frozenset = field(init=False)
    boundary: frozenset = field(init=False)
    faces: frozenset = field(init=False)
    edges: frozenset = field(init=False)
    boundary_edges: frozenset = field(init=False)

    def __post_init__(self):
        cells = frozenset(self.cells)
        if not is_simply_connected(cells):
            raise Disconnects("disk cells must be connected and simply connected")
        interior = frozenset(c for c in cells if all(n in cells for n in neighbors(c)))
        edges = edges_of(cells)
        boundary = cells - interior
        put = object.__setattr__
        put(self, "cells", cells)
        put(self, "interior", interior)
        put(self, "boundary", boundary)
        put(self, "faces", faces_of(cells))
        put(self, "edges", edges)
        put(self, "boundary_edges", frozenset(e for e in edges if e <= boundary))

    @property
    def centroid(self) -> tuple[float, float]:
        pts = [position(c) for c in self.cells]
        return (sum(p[0] for p in pts) / len(pts), sum(p[1] for p in pts) / len(pts))

    def depth(self, cell: Cell) -> int:
        """1 for boundary cells, 2 for their inner neighbours, and so on."""
        if cell in self.boundary:
            return 1
        return 1 + min(hex_distance(cell, b) for b in self.boundary)

    def boundary_ring(self) -> list[Cell]:
        """Boundary cells sorted counterclockwise by angle about the centroid."""
        cx, cy = self.centroid

        def angle(c):
            x, y = position(c)
            return math.atan2(y - cy, x - cx) % (2 * math.pi)

        return sorted(self.boundary, key=angle)


def hex_cells(center: Cell, radius: int) -> frozenset:
    q0, r0 = center
    return frozenset(
        (q0 + dq, r0 + dr)
        for dq in range(-radius, radius + 1)
        for dr in range(-radius, radius + 1)
        if abs(dq - dr) <= radius
    )


def build_disk(lattice: TriLattice | None, center: Cell, radius: int) -> Disk:
    """Hexagonal disk of all cells within hex distance ``radius`` of ``center``."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    cells = hex_cells(center, radius)
    if lattice is not None and not all(c in lattice for c in cells):
        raise OutOfBounds(f"disk of radius {radius} at {center} leaves the lattice")
    return Disk(cells)


# --- sectors -----------------------------------------------------------------
# Dividing rays sit at 30, 150 and 270 degrees.  s(theta) below is the z-component
# of ray x point; s >= 0 means the point lies counterclockwise of (or on) the ray.

def _sector_from_signs(s30, s150, s270) -> str:
    if s30 >= 0 and s150 < 0:
        return "B"
    if s150 >= 0 and s270 < 0:
        return "C"
    return "A"


def sector_of_cell(cell: Cell, center: Cell = (0, 0)) -> str:
    """Exact 120-degree sector label; the centre and rays follow the tie-break."""
    x, y = _scaled((cell[0] - center[0], cell[1] - center[1]))
    if x == 0 and y == 0:
        return "A"
    # true coords are (x/2, y*sqrt3/2); signs reduce to integer tests
    return _sector_from_signs(3 * y - x, -3 * y - x, x)


def sector_of_point(x: float, y: float, eps: float = 1e-12) -> str:
    """Float version of :func:`sector_of_cell` for arbitrary planar points."""
    if abs(x) <= eps and abs(y) <= eps:
        return "A"

    def sgn(v):
        return 0 if abs(v) <= eps else v

    s30 = sgn(_SQRT3_2 * y - 0.5 * x)
    s150 = sgn(-_SQRT3_2 * y - 0.5 * x)
    return _sector_from_signs(s30, s150, sgn(x))


# --- partitions --------------------------------------------------------------

def _triple_faces(a, b, c):
    out = []
    for cell in a:
        for nb in neighbors(cell):
            if nb not in b:
                continue
            for nc in neighbors(nb):
                if nc in c and adjacent(cell, nc):
                    out.append((cell, nb, nc))
    return sorted(out)


@dataclass(frozen=True)
class DiskPartition:
    a: frozenset
    b: frozenset
    c: frozenset
    lattice: TriLattice | None = None
    orientation: int = field(init=False)
    triple_point: tuple[float, float] = field(init=False)

    def __post_init__(self):
        a, b, c = (frozenset(s) for s in (self.a, self.b, self.c))
        if a & b or b & c or a & c:
            raise ValueError("regions must be disjoint")
        if not (a and b and c):
            raise TooSmall("every region must be nonempty")
        for name, reg in zip(REGION_LABELS, (a, b, c)):
            if not is_simply_connected(reg):
                raise Disconnects(f"region {name} is not simply connected")
        if not is_simply_connected(a | b | c):
            raise Disconnects("A∪B∪C is not a disk")
        triples = _triple_faces(a, b, c)
        signs = {orientation(*t) for t in triples}
        if len(signs) != 1:
            raise Disconnects("regions do not meet at a single triple point")
        face = triples[0]
        pts = [position(x) for x in face]
        put = object.__setattr__
        put(self, "a", a)
        put(self, "b", b)
        put(self, "c", c)
        put(self, "orientation", signs.pop())
        put(self, "triple_point", (sum(p[0] for p in pts) / 3, sum(p[1] for p in pts) / 3))

    @property
    def regions(self) -> dict[str, frozenset]:
        return {"A": self.a, "B": self.b, "C": self.c}

    @property
    def disk(self) -> Disk:
        return Disk(self.a | self.b | self.c)

    def region(self, label: str) -> frozenset:
        if label == "D":
            if self.lattice is None:
                raise ValueError("region D needs a bounded lattice")
            return self.lattice.cells - self.a - self.b - self.c
        return self.regions[label]

    def relabel(self, order: str) -> "DiskPartition":
        """Reassign regions, e.g. ``relabel("CBA")`` swaps A and C."""
        regs = self.regions
        return DiskPartition(regs[order[0]], regs[order[1]], regs[order[2]], self.lattice)

    def to_json(self) -> str:
        data = {k: sorted([list(c) for c in v]) for k, v in self.regions.items()}
        data["orientation"] = self.orientation
        data["triple_point"] = [round(v, 12) for v in self.triple_point]
        if self.lattice is not None:
            data["extent"] = list(self.lattice.extent)
        return json.dumps(data, sort_keys=True)

    @classmethod
    def from_json(cls, text: str | Mapping) -> "DiskPartition":
        data = json.loads(text) if isinstance(text, str) else text
        regs = [frozenset(tuple(c) for c in data[k]) for k in REGION_LABELS]
        lat = TriLattice(tuple(data["extent"])) if "extent" in data else None
        part = cls(*regs, lattice=lat)
        if "orientation" in data and data["orientation"] != part.orientation:
            raise ValueError("stored orientation disagrees with the geometry")
        return part


def standard_partition(disk: Disk, center: Cell | None = None,
                       lattice: TriLattice | None = None) -> DiskPartition:
    """Three 120-degree sectors about ``center`` (default: the cell nearest the centroid)."""
    if center is None:
        center = cell_at(*disk.centroid)
    regs = {k: set() for k in REGION_LABELS}
    for c in disk.cells:
        regs[sector_of_cell(c, center)].add(c)
    if not all(regs.values()):
        raise TooSmall("disk too small for a three-sector partition")
    try:
        part = DiskPartition(regs["A"], regs["B"], regs["C"], lattice)
    except (Disconnects, TooSmall) as exc:
        raise TooSmall(f"disk too small for a three-sector partition: {exc}") from exc
    if any(not (r & disk.interior) for r in (part.a, part.b, part.c)):
        raise TooSmall("each sector needs an interior cell")
    return part


@dataclass(frozen=True)
class Deformation:
    partition: DiskPartition
    touches_b: bool


def deform(partition: DiskPartition, cells: Cell | Iterable[Cell],
           source: str, target: str) -> Deformation:
    """Move ``cells`` from region ``source`` to region ``target`` ("A"-"D")."""
    if isinstance(cells, tuple) and len(cells) == 2 and all(isinstance(v, int) for v in cells):
        cells = [cells]
    moved = frozenset(cells)
    if source == target:
        raise ValueError("source and target must differ")
    if source == "D":
        abc = partition.a | partition.b | partition.c
        if moved & abc or (partition.lattice and not all(c in partition.lattice for c in moved)):
            raise ValueError("moved cells are not in region D")
    elif not moved <= partition.regions[source]:
        raise ValueError(f"moved cells are not all in region {source}")
    if target != "D":
        dest = partition.regions[target]
        if not any(n in dest for c in moved for n in neighbors(c)):
            raise ValueError(f"moved cells are not adjacent to region {target}")
    regs = dict(partition.regions)
    if source != "D":
        regs[source] = regs[source] - moved
    if target != "D":
        regs[target] = regs[target] | moved
    try:
        new = DiskPartition(regs["A"], regs["B"], regs["C"], partition.lattice)
    except TooSmall as exc:
        raise Disconnects(str(exc)) from exc
    return Deformation(new, "B" in (source, target))
