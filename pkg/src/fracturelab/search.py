"""Brute-force minimization of the total energy over finite crack families.

Families are finite and declared up front; candidate solves are independent
and cached by edge set, and every reduction is a deterministic
tolerance-then-enumeration-order argmin, so results do not depend on the
worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EmptyFamily, InvalidProbe
from .geometry import CrackSet, Grid
from .solver import bulk_energy, solve

ARGMIN_RTOL = 1e-9


def ordered_map(fn, items, workers: int = 1):
    """Map preserving item order; thread-parallel when workers > 1."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def argmin_with_tolerance(values, rtol: float = ARGMIN_RTOL):
    """Index of the first value within rtol of the minimum.

    The tolerance band makes the selection stable under exact energy
    rescalings (datum scaling) despite floating-point noise.
    """
    values = np.asarray(values, dtype=float)
    vmin = values.min()
    band = vmin + rtol * (abs(vmin) + 1.0)
    return int(np.nonzero(values <= band)[0][0])


# ---------------------------------------------------------------------------
# the solve cache
# ---------------------------------------------------------------------------


class EnergyLandscape:
    """One boundary-value problem; bulk energies cached per crack."""

    def __init__(self, grid: Grid, integrand, psi, tol: float = 1e-10):
        self.grid = grid
        self.integrand = integrand
        self.psi = psi
        self.tol = tol
        self._bulk = {}
        self.empty_crack = CrackSet(grid)

    def solve_field(self, crack: CrackSet = None):
        fld, _ = solve(self.grid, self.integrand, self.psi,
                       crack or self.empty_crack, tol=self.tol)
        return fld

    def bulk(self, crack: CrackSet = None) -> float:
        crack = crack or self.empty_crack
        key = crack.edges
        if key not in self._bulk:
            self._bulk[key] = bulk_energy(self.solve_field(crack))
        return self._bulk[key]

    def bulk_many(self, cracks, workers: int = 1):
        cracks = list(cracks)
        missing = []
        seen = set()
        for c in cracks:
            if c.edges not in self._bulk and c.edges not in seen:
                seen.add(c.edges)
                missing.append(c)
        results = ordered_map(lambda c: bulk_energy(self.solve_field(c)),
                              missing, workers)
        for c, val in zip(missing, results):
            self._bulk[c.edges] = val
        return [self._bulk[c.edges] for c in cracks]


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrackFamily:
    """Finite enumerated family; member ids are enumeration indices."""

    kind: str
    members: tuple

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def max_components(self):
        from .geometry import connected_components
        return max((len(connected_components(c)) for c in self.members), default=0)


def segments_family(grid: Grid, stride: int, lengths, orientations=("h", "v"),
                    bbox=None) -> CrackFamily:
    """Axis-aligned straight polylines anchored on a node sub-lattice.

    lengths are edge counts; bbox (x0, y0, x1, y1) restricts anchors.
    """
    members = []
    dom = grid.domain
    x0, y0, x1, y1 = bbox if bbox is not None else (dom.x0, dom.y0, dom.x1, dom.y1)
    for orient in orientations:
        for n in lengths:
            for j in range(0, grid.ny + 1, stride):
                for i in range(0, grid.nx + 1, stride):
                    px = dom.x0 + i * grid.h
                    py = dom.y0 + j * grid.h
                    if not (x0 <= px <= x1 and y0 <= py <= y1):
                        continue
                    if orient == "h":
                        if i + n > grid.nx:
                            continue
                        edges = [("h", i + kk, j) for kk in range(n)]
                    else:
                        if j + n > grid.ny:
                            continue
                        edges = [("v", i, j + kk) for kk in range(n)]
                    members.append(CrackSet(grid, edges))
    if not members:
        raise EmptyFamily("segments family enumerated to nothing")
    return CrackFamily("segments", tuple(members))


def circle_crack(grid: Grid, center, r: float) -> CrackSet:
    """Grid staircase approximating the circle boundary around center.

    Takes the cells whose centers lie inside B_r and returns the edges
    separating them from outside cells; cutting them disconnects the inside.
    """
    cx, cy = float(center[0]), float(center[1])
    if grid.domain.distance_to_boundary(cx, cy) <= r + grid.h:
        raise InvalidProbe(f"circle of radius {r:g} at ({cx:g},{cy:g}) not interior")
    xc, yc = grid.cell_centers()
    inside = ((xc - cx) ** 2 + (yc - cy) ** 2 <= r * r).reshape(grid.ny, grid.nx).T
    edges = []
    for i in range(grid.nx):
        for j in range(grid.ny):
            if not inside[i, j]:
                continue
            if i == 0 or not inside[i - 1, j]:
                edges.append(("v", i, j))
            if i == grid.nx - 1 or not inside[i + 1, j]:
                edges.append(("v", i + 1, j))
            if j == 0 or not inside[i, j - 1]:
                edges.append(("h", i, j))
            if j == grid.ny - 1 or not inside[i, j + 1]:
                edges.append(("h", i, j + 1))
    if not edges:
        raise InvalidProbe(f"circle of radius {r:g} encloses no cell centers")
    return CrackSet(grid, edges)


def circles_family(grid: Grid, center, radii) -> CrackFamily:
    """Grid-approximated circles around a declared probe point."""
    members = [circle_crack(grid, center, r) for r in radii]
    if not members:
        raise EmptyFamily("circles family enumerated to nothing")
    return CrackFamily("circles", tuple(members))


def boundary_debond_family(grid: Grid, spans, sides=None, stride: int = None) -> CrackFamily:
    """Contiguous runs of Dirichlet boundary edges (debonding competitors).

    spans are run lengths in edges; runs are anchored every ``stride`` edges
    (default: span length, i.e. non-overlapping tiles) plus the full side.
    """
    dom = grid.domain
    if sides is None:
        sides = sorted({seg.side for seg in dom.dirichlet_part})
    members = []
    for side in sides:
        all_edges = grid.boundary_edges(side)
        n = len(all_edges)
        for span in spans:
            span = min(span, n)
            step = stride or span
            for start in range(0, n - span + 1, step):
                members.append(CrackSet(grid, all_edges[start:start + span]))
        members.append(CrackSet(grid, all_edges))
    # dedupe, preserving enumeration order
    seen = set()
    uniq = []
    for c in members:
        if c.edges not in seen:
            seen.add(c.edges)
            uniq.append(c)
    if not uniq:
        raise EmptyFamily("boundary debond family enumerated to nothing")
    return CrackFamily("boundary_debond", tuple(uniq))


def explicit_family(cracks) -> CrackFamily:
    cracks = tuple(cracks)
    if not cracks:
        raise EmptyFamily("explicit family is empty")
    return CrackFamily("explicit", cracks)


def concat_families(*fams) -> CrackFamily:
    members = tuple(c for f in fams for c in f.members)
    if not members:
        raise EmptyFamily("concatenated family is empty")
    return CrackFamily("+".join(f.kind for f in fams), members)


# ---------------------------------------------------------------------------
# minimization
# ---------------------------------------------------------------------------


@dataclass
class MinimizeResult:
    budget: float
    k: float
    n_candidates: int
    W: float                    # min bulk over the admissible candidates
    bulk_argmin_id: int         # -1 is the empty crack
    bulk_argmin: CrackSet
    total: float                # min bulk + k H1
    total_argmin_id: int
    total_argmin: CrackSet


def minimize_total(landscape: EnergyLandscape, family: CrackFamily,
                   budget: float, k: float, workers: int = 1) -> MinimizeResult:
    """Exhaustive minimization over family members with H1 <= budget.

    The empty crack is always admissible (id -1).  Reports both the bulk
    argmin (the W(l) minimizer) and the total-energy argmin; ties resolve to
    the lexicographically first candidate within a relative tolerance band.
    """
    if len(family) == 0:
        raise EmptyFamily("family has no members")
    cands = [(-1, landscape.empty_crack)]
    cands += [(i, c) for i, c in enumerate(family.members)
              if c.h1() <= budget * (1 + 1e-12)]
    bulks = landscape.bulk_many([c for _, c in cands], workers)
    totals = [b + k * c.h1() for b, (_, c) in zip(bulks, cands)]
    ib = argmin_with_tolerance(bulks)
    it = argmin_with_tolerance(totals)
    return MinimizeResult(
        budget=budget,
        k=k,
        n_candidates=len(cands),
        W=bulks[ib],
        bulk_argmin_id=cands[ib][0],
        bulk_argmin=cands[ib][1],
        total=totals[it],
        total_argmin_id=cands[it][0],
        total_argmin=cands[it][1],
    )


@dataclass
class ReleaseCurve:
    budgets: list
    W: list
    rates: list                # (W(0) - W(l)) / l
    argmin_ids: list
    argmin_cracks: list
    totals: list
    W0: float


def release_curve(landscape: EnergyLandscape, family: CrackFamily, budgets,
                  k: float = 1.0, workers: int = 1) -> ReleaseCurve:
    """W(l) and release rates over a decreasing budget ladder."""
    budgets = list(budgets)
    if sorted(budgets, reverse=True) != budgets:
        raise ValueError("budgets must decrease")
    W0 = landscape.bulk()
    Ws, rates, ids, cracks, totals = [], [], [], [], []
    # warm the cache over the largest budget in one parallel sweep
    all_cands = [c for c in family.members if c.h1() <= budgets[0] * (1 + 1e-12)]
    landscape.bulk_many(all_cands, workers)
    for l in budgets:
        res = minimize_total(landscape, family, l, k, workers)
        Ws.append(res.W)
        rates.append((W0 - res.W) / l if l > 0 else 0.0)
        ids.append(res.bulk_argmin_id)
        cracks.append(res.bulk_argmin)
        totals.append(res.total)
    return ReleaseCurve(budgets, Ws, rates, ids, cracks, totals, W0)


@dataclass
class LocalizationReport:
    x_sing: tuple
    neighborhoods: list       # radii
    thresholds: list          # largest budget below which all minimizers meet U

def localization_check(minimizers, x_sing, neighborhoods, grid: Grid) -> LocalizationReport:
    """minimizers: list of (budget, CrackSet) pairs from a budget ladder.

    For each neighborhood U = B_rho(x_sing), reports the largest budget B
    such that every minimizer with budget <= B meets U (None if none does).
    """
    px, py = float(x_sing[0]), float(x_sing[1])
    if not grid.domain.contains(px, py):
        raise InvalidProbe(f"singularity probe ({px}, {py}) outside the domain")

    def meets(crack: CrackSet, rho):
        if crack.is_empty:
            return False
        pts = crack.points()
        return bool(np.any((pts[:, 0] - px) ** 2 + (pts[:, 1] - py) ** 2 <= rho * rho))

    pairs = sorted(minimizers, key=lambda t: t[0])
    thresholds = []
    for rho in neighborhoods:
        best = None
        for budget, crack in pairs:
            if meets(crack, rho):
                best = budget
            else:
                break
        thresholds.append(best)
    return LocalizationReport((px, py), list(neighborhoods), thresholds)
