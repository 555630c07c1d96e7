"""Domains, structured grids, crack sets and crack covers.

Cracks are restricted to grid-conforming polylines (sets of grid edges), so
their length is exact and the cracked function space is a plain
duplicated-node space (see :func:`cut_grid`).

Edge encoding: ``("h", i, j)`` joins nodes (i, j)-(i+1, j); ``("v", i, j)``
joins (i, j)-(i, j+1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cs_components

from .errors import BudgetTooLarge, NonConformingCrack

SIDES = ("left", "right", "bottom", "top")

Edge = tuple  # ("h"|"v", i, j)


@dataclass(frozen=True)
class BoundarySegment:
    """Piece of one rectangle side, parametrized by the physical coordinate
    running along that side (y for left/right, x for bottom/top)."""

    side: str
    lo: float
    hi: float

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"unknown side {self.side!r}")
        if not self.hi > self.lo:
            raise ValueError("segment needs hi > lo")

    @property
    def length(self):
        return self.hi - self.lo


@dataclass(frozen=True)
class Domain:
    """Axis-aligned rectangle with a Dirichlet/Neumann boundary split."""

    x0: float
    y0: float
    x1: float
    y1: float
    dirichlet_part: tuple = ()

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("degenerate rectangle")
        for seg in self.dirichlet_part:
            lo, hi = self._side_range(seg.side)
            if seg.lo < lo - 1e-12 or seg.hi > hi + 1e-12:
                raise ValueError(f"segment {seg} outside side {seg.side}")

    @classmethod
    def rectangle(cls, x0, y0, x1, y1, dirichlet="all"):
        """Build a rectangle domain; `dirichlet` is "all", side names, or
        explicit BoundarySegment instances."""
        if dirichlet == "all":
            dirichlet = SIDES
        segs = []
        for item in dirichlet:
            if isinstance(item, BoundarySegment):
                segs.append(item)
            else:
                lo, hi = cls(x0, y0, x1, y1)._side_range(item)
                segs.append(BoundarySegment(item, lo, hi))
        return cls(x0, y0, x1, y1, tuple(segs))

    @classmethod
    def unit_square(cls, dirichlet="all", centered=False):
        if centered:
            return cls.rectangle(-0.5, -0.5, 0.5, 0.5, dirichlet)
        return cls.rectangle(0.0, 0.0, 1.0, 1.0, dirichlet)

    def _side_range(self, side):
        if side in ("left", "right"):
            return self.y0, self.y1
        return self.x0, self.x1

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    @property
    def neumann_part(self):
        """Complement of the Dirichlet part, per side."""
        out = []
        for side in SIDES:
            lo, hi = self._side_range(side)
            cuts = sorted((s.lo, s.hi) for s in self.dirichlet_part if s.side == side)
            cur = lo
            for a, b in cuts:
                if a > cur + 1e-12:
                    out.append(BoundarySegment(side, cur, a))
                cur = max(cur, b)
            if hi > cur + 1e-12:
                out.append(BoundarySegment(side, cur, hi))
        return tuple(out)

    def dirichlet_length(self):
        return sum(s.length for s in self.dirichlet_part)

    def contains(self, x, y):
        return (self.x0 - 1e-12 <= x <= self.x1 + 1e-12) and (
            self.y0 - 1e-12 <= y <= self.y1 + 1e-12
        )

    def distance_to_boundary(self, x, y):
        """Distance from an interior point to the rectangle boundary."""
        return min(x - self.x0, self.x1 - x, y - self.y0, self.y1 - y)

    def project_to_boundary(self, x, y):
        """Nearest boundary point of the rectangle."""
        cands = [
            (x - self.x0, (self.x0, min(max(y, self.y0), self.y1))),
            (self.x1 - x, (self.x1, min(max(y, self.y0), self.y1))),
            (y - self.y0, (min(max(x, self.x0), self.x1), self.y0)),
            (self.y1 - y, (min(max(x, self.x0), self.x1), self.y1)),
        ]
        return min(cands, key=lambda c: abs(c[0]))[1]


class Grid:
    """Uniform square-cell grid covering a rectangle domain exactly.

    Node id = i + j*(nx+1); cell id = i + j*nx; corner order within a cell
    is (i,j), (i+1,j), (i,j+1), (i+1,j+1).
    """

    def __init__(self, domain: Domain, nx: int, ny: int = None):
        if ny is None:
            ny = round(nx * domain.height / domain.width)
        if nx < 2 or ny < 2:
            raise ValueError("need nx, ny >= 2")
        hx = domain.width / nx
        hy = domain.height / ny
        if abs(hx - hy) > 1e-9 * hx:
            raise ValueError(f"cells must be square: hx={hx} hy={hy}")
        self.domain = domain
        self.nx = int(nx)
        self.ny = int(ny)
        self.h = hx

    # --- counts and coordinates -------------------------------------------

    @property
    def n_nodes(self):
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_cells(self):
        return self.nx * self.ny

    def node_ij(self, ids):
        ids = np.asarray(ids)
        return ids % (self.nx + 1), ids // (self.nx + 1)

    def node_id(self, i, j):
        return i + j * (self.nx + 1)

    def node_xy(self, ids=None):
        if ids is None:
            ids = np.arange(self.n_nodes)
        i, j = self.node_ij(ids)
        return self.domain.x0 + i * self.h, self.domain.y0 + j * self.h

    def cell_id(self, i, j):
        return i + j * self.nx

    def cell_ij(self, ids):
        ids = np.asarray(ids)
        return ids % self.nx, ids // self.nx

    def cell_centers(self):
        ids = np.arange(self.n_cells)
        i, j = self.cell_ij(ids)
        return (
            self.domain.x0 + (i + 0.5) * self.h,
            self.domain.y0 + (j + 0.5) * self.h,
        )

    def cell_corner_nodes(self):
        """(n_cells, 4) node ids in corner order."""
        ids = np.arange(self.n_cells)
        i, j = self.cell_ij(ids)
        n00 = self.node_id(i, j)
        return np.stack(
            [n00, n00 + 1, n00 + (self.nx + 1), n00 + (self.nx + 2)], axis=1
        )

    # --- edges --------------------------------------------------------------

    def edge_valid(self, edge: Edge):
        kind, i, j = edge
        if kind == "h":
            return 0 <= i < self.nx and 0 <= j <= self.ny
        if kind == "v":
            return 0 <= i <= self.nx and 0 <= j < self.ny
        return False

    def edge_nodes(self, edge: Edge):
        kind, i, j = edge
        a = self.node_id(i, j)
        return (a, a + 1) if kind == "h" else (a, a + self.nx + 1)

    def edge_midpoint(self, edge: Edge):
        kind, i, j = edge
        x = self.domain.x0 + (i + (0.5 if kind == "h" else 0.0)) * self.h
        y = self.domain.y0 + (j + (0.5 if kind == "v" else 0.0)) * self.h
        return x, y

    def edge_flank_cells(self, edge: Edge):
        """Cell ids on the two sides of an edge (None outside the grid).

        For "h" edges: (below, above); for "v" edges: (left, right).
        """
        kind, i, j = edge
        if kind == "h":
            below = self.cell_id(i, j - 1) if j > 0 else None
            above = self.cell_id(i, j) if j < self.ny else None
            return below, above
        left = self.cell_id(i - 1, j) if i > 0 else None
        right = self.cell_id(i, j) if i < self.nx else None
        return left, right

    def edge_normal(self, edge: Edge):
        """Unit normal pointing into the second flank cell side."""
        return (0.0, 1.0) if edge[0] == "h" else (1.0, 0.0)

    # --- boundary -------------------------------------------------------------

    def side_nodes(self, side):
        nx, ny = self.nx, self.ny
        if side == "left":
            return self.node_id(0, np.arange(ny + 1))
        if side == "right":
            return self.node_id(nx, np.arange(ny + 1))
        if side == "bottom":
            return self.node_id(np.arange(nx + 1), 0)
        if side == "top":
            return self.node_id(np.arange(nx + 1), ny)
        raise ValueError(side)

    def boundary_nodes(self):
        return np.unique(np.concatenate([self.side_nodes(s) for s in SIDES]))

    def dirichlet_nodes(self):
        """Node ids lying on the closure of the Dirichlet part."""
        out = []
        tol = 1e-9 * self.h
        for seg in self.domain.dirichlet_part:
            ids = self.side_nodes(seg.side)
            x, y = self.node_xy(ids)
            t = y if seg.side in ("left", "right") else x
            out.append(ids[(t >= seg.lo - tol) & (t <= seg.hi + tol)])
        if not out:
            return np.empty(0, dtype=int)
        return np.unique(np.concatenate(out))

    def boundary_edges(self, side):
        nx, ny = self.nx, self.ny
        if side == "left":
            return [("v", 0, j) for j in range(ny)]
        if side == "right":
            return [("v", nx, j) for j in range(ny)]
        if side == "bottom":
            return [("h", i, 0) for i in range(nx)]
        if side == "top":
            return [("h", i, ny) for i in range(nx)]
        raise ValueError(side)


# ---------------------------------------------------------------------------
# crack sets
# ---------------------------------------------------------------------------


class CrackSet:
    """Finite union of grid edges; equality and hashing use the edge set."""

    def __init__(self, grid: Grid, edges: Iterable[Edge] = ()):
        self.grid = grid
        edges = frozenset(tuple(e) for e in edges)
        for e in edges:
            if not grid.edge_valid(e):
                raise NonConformingCrack(f"edge {e} not on the grid")
        self.edges = edges

    def __len__(self):
        return len(self.edges)

    def __eq__(self, other):
        return isinstance(other, CrackSet) and self.edges == other.edges

    def __hash__(self):
        return hash(self.edges)

    def __repr__(self):
        return f"CrackSet({len(self.edges)} edges, h1={self.h1():.6g})"

    @property
    def is_empty(self):
        return not self.edges

    def h1(self):
        """Total length: every grid edge has physical length h."""
        return len(self.edges) * self.grid.h

    def nodes(self):
        """Sorted array of endpoint node ids."""
        ids = set()
        for e in self.edges:
            a, b = self.grid.edge_nodes(e)
            ids.add(a)
            ids.add(b)
        return np.array(sorted(ids), dtype=int)

    def union(self, other: "CrackSet"):
        return CrackSet(self.grid, self.edges | other.edges)

    def sorted_edges(self):
        return sorted(self.edges)

    def points(self):
        """(n, 2) array of endpoint coordinates (for covers and bboxes)."""
        ids = self.nodes()
        x, y = self.grid.node_xy(ids)
        return np.stack([x, y], axis=1)


def h1_measure(crack: CrackSet) -> float:
    """Length of the crack (sum of member edge lengths); 0 for the empty set."""
    return crack.h1()


def connected_components(crack: CrackSet):
    """Split a crack into edge-adjacency components (shared endpoint nodes)."""
    if crack.is_empty:
        return []
    edges = crack.sorted_edges()
    parent = {}

    def find(a):
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    def link(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for e in edges:
        a, b = crack.grid.edge_nodes(e)
        parent.setdefault(a, a)
        parent.setdefault(b, b)
        link(a, b)
    groups = {}
    for e in edges:
        a, _ = crack.grid.edge_nodes(e)
        groups.setdefault(find(a), []).append(e)
    return [CrackSet(crack.grid, gs) for _, gs in sorted(groups.items())]


# ---------------------------------------------------------------------------
# cut topology
# ---------------------------------------------------------------------------

# fan bookkeeping around a node (i, j): incident cells with the corner index
# that node occupies there, and the incident edge separating consecutive cells.
_FAN = (
    # (cell di, cell dj, corner index) in cyclic order NE, NW, SW, SE
    ((0, 0, 0), (-1, 0, 1), (-1, -1, 3), (0, -1, 2)),
    # edge separating fan[k] from fan[k+1]: up, left, down, right
    (("v", 0, 0), ("h", -1, 0), ("v", 0, -1), ("h", 0, 0)),
)


class CutTopology:
    """Grid connectivity with nodes duplicated across crack edges.

    Degrees of freedom 0..n_nodes-1 are the original grid nodes; duplicated
    instances are appended after them.  A field value lives on every dof;
    cells address dofs through ``cell_dofs``.
    """

    def __init__(self, grid: Grid, crack: CrackSet):
        self.grid = grid
        self.crack = crack
        self.cell_dofs = grid.cell_corner_nodes()
        self.n_dofs = grid.n_nodes
        self.dof_node = np.arange(grid.n_nodes)
        self._crack_nodes = crack.nodes()
        if not crack.is_empty:
            self._split_nodes()

    def _split_nodes(self):
        grid = self.grid
        cut = self.crack.edges
        extra_nodes = []
        cells_off, edges_off = _FAN
        for node in self._crack_nodes:
            i = int(node % (grid.nx + 1))
            j = int(node // (grid.nx + 1))
            entries = []  # (cell_id, corner)
            for di, dj, corner in cells_off:
                ci, cj = i + di, j + dj
                if 0 <= ci < grid.nx and 0 <= cj < grid.ny:
                    entries.append((grid.cell_id(ci, cj), corner))
                else:
                    entries.append(None)
            # union-find over the up-to-4 fan positions
            parent = list(range(4))

            def find(a):
                while parent[a] != a:
                    parent[a] = parent[parent[a]]
                    a = parent[a]
                return a

            for k in range(4):
                nk = (k + 1) % 4
                if entries[k] is None or entries[nk] is None:
                    continue
                ek, ei, ej = edges_off[k]
                sep = (ek, i + ei, j + ej)
                if sep not in cut:
                    ra, rb = find(k), find(nk)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
            roots = {}
            for k in range(4):
                if entries[k] is None:
                    continue
                r = find(k)
                if r not in roots:
                    roots[r] = node if not roots else self.n_dofs + len(extra_nodes)
                    if roots[r] != node:
                        extra_nodes.append(node)
                cell, corner = entries[k]
                self.cell_dofs[cell, corner] = roots[r]
        if extra_nodes:
            self.dof_node = np.concatenate(
                [self.dof_node, np.array(extra_nodes, dtype=int)]
            )
            self.n_dofs += len(extra_nodes)

    @property
    def n_duplicates(self):
        return self.n_dofs - self.grid.n_nodes

    def constrained_dofs(self):
        """Dofs carrying the Dirichlet datum: grid Dirichlet nodes minus
        nodes touched by the crack (the datum is released on the crack)."""
        dn = self.grid.dirichlet_nodes()
        if len(self._crack_nodes):
            dn = np.setdiff1d(dn, self._crack_nodes, assume_unique=False)
        return dn

    def dof_xy(self):
        return self.grid.node_xy(self.dof_node)

    def dof_components(self):
        """Label dofs by cell-connected component (for pinning floaters)."""
        cd = self.cell_dofs
        rows = np.concatenate([cd[:, 0], cd[:, 1], cd[:, 2]])
        cols = np.concatenate([cd[:, 1], cd[:, 3], cd[:, 3]])
        data = np.ones(len(rows), dtype=np.int8)
        adj = coo_matrix((data, (rows, cols)), shape=(self.n_dofs, self.n_dofs))
        n, labels = _cs_components(adj, directed=False)
        return n, labels

    def edge_side_dofs(self, edge: Edge):
        """Per endpoint, the dof on each flank side of a cut edge.

        Returns ((a_minus, a_plus), (b_minus, b_plus)) where "plus" is the
        side the edge normal points into; entries are None outside the grid.
        """
        grid = self.grid
        kind, i, j = edge
        below, above = grid.edge_flank_cells(edge)
        if kind == "h":
            # endpoints (i,j) and (i+1,j); corners: below 2,3  above 0,1
            a = (
                None if below is None else int(self.cell_dofs[below, 2]),
                None if above is None else int(self.cell_dofs[above, 0]),
            )
            b = (
                None if below is None else int(self.cell_dofs[below, 3]),
                None if above is None else int(self.cell_dofs[above, 1]),
            )
        else:
            left, right = below, above
            a = (
                None if left is None else int(self.cell_dofs[left, 1]),
                None if right is None else int(self.cell_dofs[right, 0]),
            )
            b = (
                None if left is None else int(self.cell_dofs[left, 3]),
                None if right is None else int(self.cell_dofs[right, 2]),
            )
        return a, b


def cut_grid(grid: Grid, crack: CrackSet = None) -> CutTopology:
    """Connectivity with nodes duplicated per side of each crack edge.

    An empty crack returns a topology identical to the plain grid.
    """
    if crack is None:
        crack = CrackSet(grid)
    if crack.grid is not grid and crack.grid.h != grid.h:
        raise NonConformingCrack("crack was built on a different grid")
    return CutTopology(grid, crack)


# ---------------------------------------------------------------------------
# crack covers (balls and boundary rectangles)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Disk:
    cx: float
    cy: float
    r: float

    def metric(self, x, y):
        """1 on the member boundary, 2 on the doubled boundary."""
        return np.hypot(np.asarray(x) - self.cx, np.asarray(y) - self.cy) / self.r

    @property
    def diameter(self):
        return 2.0 * self.r

    @property
    def scale(self):
        """Ramp width of the cutoff transition (metric 1 -> 2)."""
        return self.r

    def grad_bound(self):
        return 2.0 / self.r


@dataclass(frozen=True)
class BoundaryRect:
    """Axis-aligned rectangle centered at a boundary point.

    With a flat (rectangle) boundary the Lipschitz graph of the generic
    construction degenerates to g == 0, so the frame is the coordinate frame
    and the member is the sup-metric box with half-widths (hx, hy).
    """

    cx: float
    cy: float
    hx: float
    hy: float

    def metric(self, x, y):
        return np.maximum(
            np.abs(np.asarray(x) - self.cx) / self.hx,
            np.abs(np.asarray(y) - self.cy) / self.hy,
        )

    @property
    def diameter(self):
        return 2.0 * math.hypot(self.hx, self.hy)

    @property
    def scale(self):
        return min(self.hx, self.hy)

    def grad_bound(self):
        return 2.0 / self.scale


@dataclass(frozen=True)
class Cover:
    """Cover of a crack by disjoint doubled members."""

    members: tuple
    constant_C: float
    rounds: int
    smallness_threshold: float

    def __len__(self):
        return len(self.members)


def _doubled_overlap(a, b):
    """Do the doubled regions of two members intersect?"""
    def box(m):
        if isinstance(m, Disk):
            return m.cx - 2 * m.r, m.cx + 2 * m.r, m.cy - 2 * m.r, m.cy + 2 * m.r
        return m.cx - 2 * m.hx, m.cx + 2 * m.hx, m.cy - 2 * m.hy, m.cy + 2 * m.hy

    if isinstance(a, Disk) and isinstance(b, Disk):
        return math.hypot(a.cx - b.cx, a.cy - b.cy) < 2 * a.r + 2 * b.r
    ax0, ax1, ay0, ay1 = box(a)
    bx0, bx1, by0, by1 = box(b)
    if isinstance(a, Disk) or isinstance(b, Disk):
        disk, rect = (a, b) if isinstance(a, Disk) else (b, a)
        rx0, rx1, ry0, ry1 = box(rect)
        px = min(max(disk.cx, rx0), rx1)
        py = min(max(disk.cy, ry0), ry1)
        return math.hypot(disk.cx - px, disk.cy - py) < 2 * disk.r
    return ax0 < bx1 and bx0 < ax1 and ay0 < by1 and by0 < ay1


def _doubled_bbox(members):
    xs0, xs1, ys0, ys1 = [], [], [], []
    for m in members:
        if isinstance(m, Disk):
            xs0.append(m.cx - 2 * m.r)
            xs1.append(m.cx + 2 * m.r)
            ys0.append(m.cy - 2 * m.r)
            ys1.append(m.cy + 2 * m.r)
        else:
            xs0.append(m.cx - 2 * m.hx)
            xs1.append(m.cx + 2 * m.hx)
            ys0.append(m.cy - 2 * m.hy)
            ys1.append(m.cy + 2 * m.hy)
    return min(xs0), max(xs1), min(ys0), max(ys1)


def _doubled_diameter(group):
    """Diameter of the union of the doubled members (pairwise formula)."""
    best = 0.0
    for a in group:
        ra = 2 * a.r if isinstance(a, Disk) else 2 * math.hypot(a.hx, a.hy)
        for b in group:
            rb = 2 * b.r if isinstance(b, Disk) else 2 * math.hypot(b.hx, b.hy)
            d = math.hypot(a.cx - b.cx, a.cy - b.cy) + ra + rb
            best = max(best, d)
    return best


def cover_crack(crack: CrackSet, domain: Domain, m: int, margin_cells: float = 2.5) -> Cover:
    """Cover the crack with at most m members whose doubled regions are disjoint.

    Starts from one ball per connected component with radius H1 of the
    component, then repeatedly merges members whose doubled regions overlap;
    members whose doubled region leaves the domain become boundary rectangles.
    Raises BudgetTooLarge when no admissible cover exists at the crack's scale
    (threshold: member diameter <= 0.5 * min(width, height), so that a member
    can never span the domain and boundary rectangles keep the required aspect).
    """
    threshold = 0.5 * min(domain.width, domain.height)
    if crack.is_empty:
        return Cover((), 0.0, 0, threshold)
    comps = connected_components(crack)
    if len(comps) > m:
        raise ValueError(f"crack has {len(comps)} components, budget is m={m}")
    h = crack.grid.h
    margin = margin_cells * h

    members = []
    for comp in comps:
        pts = comp.points()
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        c = 0.5 * (lo + hi)
        half_diag = 0.5 * math.hypot(*(hi - lo))
        r = max(comp.h1(), half_diag + margin, 4 * h)
        members.append(Disk(c[0], c[1], r))

    def in_open_domain(mem):
        if isinstance(mem, Disk):
            return (
                mem.cx - 2 * mem.r > domain.x0
                and mem.cx + 2 * mem.r < domain.x1
                and mem.cy - 2 * mem.r > domain.y0
                and mem.cy + 2 * mem.r < domain.y1
            )
        return True

    def to_boundary_rect(mem_group):
        # the rectangle's inner region must contain the inner regions of the
        # group (they carry the crack with its margin); the doubled rectangle
        # supplies the collar, mirroring the doubled ball.
        x0s, x1s, y0s, y1s = [], [], [], []
        for mm in mem_group:
            rx = mm.r if isinstance(mm, Disk) else mm.hx
            ry = mm.r if isinstance(mm, Disk) else mm.hy
            x0s.append(mm.cx - rx)
            x1s.append(mm.cx + rx)
            y0s.append(mm.cy - ry)
            y1s.append(mm.cy + ry)
        x0, x1, y0, y1 = min(x0s), max(x1s), min(y0s), max(y1s)
        bx, by = domain.project_to_boundary(0.5 * (x0 + x1), 0.5 * (y0 + y1))
        hx = max(abs(x0 - bx), abs(x1 - bx))
        hy = max(abs(y0 - by), abs(y1 - by))
        s = max(hx, hy, 4 * h)
        return BoundaryRect(bx, by, s, s)

    rounds = 0
    for rounds in range(1, 2 * m + 3):
        changed = False
        # convert disks whose doubled region leaves the open domain
        for idx, mem in enumerate(members):
            if isinstance(mem, Disk) and not in_open_domain(mem):
                members[idx] = to_boundary_rect([mem])
                changed = True
        # merge overlapping doubled regions
        k = len(members)
        parent = list(range(k))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for a in range(k):
            for b in range(a + 1, k):
                if _doubled_overlap(members[a], members[b]):
                    ra, rb = find(a), find(b)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
        groups = {}
        for idx in range(k):
            groups.setdefault(find(idx), []).append(members[idx])
        merged = []
        for _, group in sorted(groups.items()):
            if len(group) == 1:
                merged.append(group[0])
                continue
            changed = True
            if any(isinstance(g, BoundaryRect) for g in group):
                merged.append(to_boundary_rect(group))
            else:
                x0, x1, y0, y1 = _doubled_bbox(group)
                newr = _doubled_diameter(group)
                disk = Disk(0.5 * (x0 + x1), 0.5 * (y0 + y1), newr)
                if in_open_domain(disk):
                    merged.append(disk)
                else:
                    merged.append(to_boundary_rect(group))
        members = merged
        for mem in members:
            if mem.diameter > threshold:
                raise BudgetTooLarge(
                    f"cover member diameter {mem.diameter:.4g} exceeds the "
                    f"smallness threshold {threshold:.4g}; crack not small here"
                )
        if not changed:
            break
    else:
        raise BudgetTooLarge(f"cover did not stabilize in {2 * m + 2} rounds")

    # achieved covering constant and containment check
    mids = np.array([crack.grid.edge_midpoint(e) for e in crack.sorted_edges()])
    lengths_in = np.zeros(len(members))
    owner = np.full(len(mids), -1, dtype=int)
    for idx, mem in enumerate(members):
        inside = mem.metric(mids[:, 0], mids[:, 1]) <= 1.0
        owner[inside] = idx
        lengths_in[idx] = inside.sum() * h
    if (owner < 0).any():
        raise BudgetTooLarge("constructed members fail to cover the crack")
    constant_C = float(max(mem.diameter / li for mem, li in zip(members, lengths_in)))
    return Cover(tuple(members), constant_C, rounds, threshold)


# ---------------------------------------------------------------------------
# crack files
# ---------------------------------------------------------------------------


def write_crack_file(path, crack: CrackSet):
    """One edge per line: x0 y0 x1 y1 (endpoint coordinates)."""
    grid = crack.grid
    lines = []
    for e in crack.sorted_edges():
        a, b = grid.edge_nodes(e)
        xa, ya = grid.node_xy(np.array([a]))
        xb, yb = grid.node_xy(np.array([b]))
        lines.append(f"{float(xa[0])!r} {float(ya[0])!r} "
                     f"{float(xb[0])!r} {float(yb[0])!r}")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + ("\n" if lines else ""))


def read_crack_file(path, grid: Grid) -> CrackSet:
    """Parse a crack file, validating that every segment is a grid edge."""
    edges = []
    tol = 1e-6 * grid.h
    with open(path, "r", encoding="utf-8") as f:
        for ln, raw in enumerate(f, 1):
            raw = raw.strip()
            if not raw or raw.startswith("#"):
                continue
            parts = raw.split()
            if len(parts) != 4:
                raise NonConformingCrack(f"{path}:{ln}: expected 'x0 y0 x1 y1'")
            x0, y0, x1, y1 = map(float, parts)
            fi0 = (x0 - grid.domain.x0) / grid.h
            fj0 = (y0 - grid.domain.y0) / grid.h
            fi1 = (x1 - grid.domain.x0) / grid.h
            fj1 = (y1 - grid.domain.y0) / grid.h
            i0, j0, i1, j1 = (round(v) for v in (fi0, fj0, fi1, fj1))
            snap = max(
                abs(fi0 - i0), abs(fj0 - j0), abs(fi1 - i1), abs(fj1 - j1)
            ) * grid.h
            if snap > tol:
                raise NonConformingCrack(f"{path}:{ln}: endpoint off-grid by {snap:g}")
            if (i0, j0) > (i1, j1):
                i0, j0, i1, j1 = i1, j1, i0, j0
            if i1 == i0 + 1 and j1 == j0:
                edges.append(("h", i0, j0))
            elif i1 == i0 and j1 == j0 + 1:
                edges.append(("v", i0, j0))
            else:
                raise NonConformingCrack(f"{path}:{ln}: segment is not a grid edge")
    return CrackSet(grid, edges)
