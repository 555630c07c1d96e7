"""Minimize the bulk energy over a cut grid with Dirichlet data.

Discretization: bilinear quadrilateral cells with one-point quadrature at
cell centers (exact for linear fields).  Quadratic-form integrands (p = 2)
are solved by preconditioned conjugate gradients; general p-power densities
by damped Newton with an epsilon-regularized Hessian metric (the energy
itself is never regularized).

Connected components of the cut topology that carry no Dirichlet datum are
pinned to the value 0.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .energy import Integrand
from .errors import NoConvergence, SingularSystem
from .geometry import CrackSet, CutTopology, Grid, cut_grid

DEFAULT_TOL = 1e-10
NEWTON_MAX_ITER = 200


# ---------------------------------------------------------------------------
# discrete operators
# ---------------------------------------------------------------------------

# center-gradient coefficients per corner (order 00, 10, 01, 11), times 2h
_AX = np.array([-1.0, 1.0, -1.0, 1.0])
_AY = np.array([-1.0, -1.0, 1.0, 1.0])


def cell_gradients(topology: CutTopology, values, cells=None):
    """Gradient of a dof field at cell centers; (n_cells, 2) or subset."""
    cd = topology.cell_dofs if cells is None else topology.cell_dofs[cells]
    u = np.asarray(values)[cd]
    inv = 1.0 / (2.0 * topology.grid.h)
    return np.stack([u @ _AX * inv, u @ _AY * inv], axis=1)


def scatter_weak_divergence(topology: CutTopology, cell_field, cells=None, out=None):
    """Per-dof residual r_a = sum_c h^2 w_c . grad(phi_a)|_c for a cell field w.

    This is the discrete pairing <w, grad phi_a>; it vanishes at free dofs
    when w is an equilibrated stress.
    """
    cd = topology.cell_dofs if cells is None else topology.cell_dofs[cells]
    w = np.asarray(cell_field)
    if cells is not None and w.shape[0] != len(cells):
        w = w[cells]
    r = np.zeros(topology.n_dofs) if out is None else out
    half_h = 0.5 * topology.grid.h  # h^2 / (2h)
    for k in range(4):
        np.add.at(r, cd[:, k], half_h * (w[:, 0] * _AX[k] + w[:, 1] * _AY[k]))
    return r


def assemble_metric(topology: CutTopology, metric_cells, cells=None):
    """Stiffness sum_c h^2 G^T M_c G as CSR over all dofs.

    metric_cells: (n, 2, 2) symmetric metric per (selected) cell.
    """
    cd = topology.cell_dofs if cells is None else topology.cell_dofs[cells]
    M = np.asarray(metric_cells)
    G = np.stack([_AX, _AY]) / (2.0 * topology.grid.h)  # (2, 4)
    h2 = topology.grid.h ** 2
    kloc = h2 * np.einsum("cab,ai,bj->cij", M, G, G)
    rows = np.repeat(cd, 4, axis=1).ravel()
    cols = np.tile(cd, (1, 4)).ravel()
    K = sp.coo_matrix(
        (kloc.ravel(), (rows, cols)), shape=(topology.n_dofs, topology.n_dofs)
    )
    return K.tocsr()


def pcg(A, b, tol=1e-10, maxiter=None, deflate=(), x0=None):
    """Jacobi-preconditioned conjugate gradients with optional deflation.

    deflate: orthonormal null vectors of A; b and the iterates are kept in
    their orthogonal complement.  Returns (x, iterations, relative residual).
    """
    n = A.shape[0]
    if maxiter is None:
        maxiter = 20 * n + 2000

    def project(v):
        for q in deflate:
            v = v - (v @ q) * q
        return v

    b = project(np.asarray(b, dtype=float))
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0, 0.0
    d = A.diagonal().copy()
    d[d <= 0] = 1.0
    x = np.zeros(n) if x0 is None else project(np.asarray(x0, dtype=float))
    r = b - A @ x
    r = project(r)
    z = r / d
    p = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ap = project(A @ p)
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r)
        if res <= tol * bnorm:
            return project(x), it, res / bnorm
        z = r / d
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NoConvergence(
        f"pcg stalled at relative residual {res / bnorm:.3e}",
        iterations=maxiter,
        residual=res / bnorm,
    )


def checkerboard_vector(topology: CutTopology, dofs=None):
    """+-1 by node parity; exact null vector of every cell-metric stiffness."""
    nodes = topology.dof_node if dofs is None else topology.dof_node[dofs]
    i, j = topology.grid.node_ij(nodes)
    return np.where((i + j) % 2 == 0, 1.0, -1.0)


# ---------------------------------------------------------------------------
# fields and reports
# ---------------------------------------------------------------------------


@dataclass
class SolveReport:
    iterations: int
    residual: float
    bulk_energy: float
    wall_time: float
    method: str
    converged: bool = True


class ScalarField:
    """Nodal displacement on a cut topology, plus its generating data."""

    def __init__(self, topology: CutTopology, integrand: Integrand, values,
                 psi=None, constrained=None):
        self.topology = topology
        self.integrand = integrand
        self.values = np.asarray(values, dtype=float)
        self.psi = psi
        self.constrained = constrained if constrained is not None else np.empty(0, int)
        self._grads = None

    @property
    def grid(self) -> Grid:
        return self.topology.grid

    @property
    def crack(self) -> CrackSet:
        return self.topology.crack

    def gradients(self):
        if self._grads is None:
            self._grads = cell_gradients(self.topology, self.values)
        return self._grads

    def free_dofs(self):
        mask = np.ones(self.topology.n_dofs, dtype=bool)
        mask[self.constrained] = False
        return np.nonzero(mask)[0]

    def perturbed(self, delta):
        """Copy with values + delta (delta must vanish on constrained dofs)."""
        return ScalarField(self.topology, self.integrand, self.values + delta,
                           self.psi, self.constrained)


@dataclass
class StressField:
    """Cell-wise stress with its equilibrium diagnostics."""

    field: ScalarField
    sigma: np.ndarray           # (n_cells, 2)
    residual_per_dof: np.ndarray
    div_residual: float         # normalized max at interior free dofs
    neumann_residual: float     # normalized max at boundary / crack-face dofs

    def weak_divergence(self, test_fn):
        """| sum_c h^2 sigma_c . grad(w)(x_c) | for a smooth test function w.

        grad(w) is approximated by central differences of test_fn; a
        refinement study of this number measures physical divergence-freeness.
        """
        grid = self.field.grid
        xc, yc = grid.cell_centers()
        d = 1e-6 * grid.h
        gx = (test_fn(xc + d, yc) - test_fn(xc - d, yc)) / (2 * d)
        gy = (test_fn(xc, yc + d) - test_fn(xc, yc - d)) / (2 * d)
        h2 = grid.h ** 2
        return abs(h2 * np.sum(self.sigma[:, 0] * gx + self.sigma[:, 1] * gy))


# ---------------------------------------------------------------------------
# boundary data and pinning
# ---------------------------------------------------------------------------


def _dirichlet_setup(topology: CutTopology, psi):
    """Constrained dofs, their values, and zero-pins for floating components."""
    grid = topology.grid
    if not grid.domain.dirichlet_part or len(grid.dirichlet_nodes()) == 0:
        raise SingularSystem("domain declares no Dirichlet boundary")
    constrained = topology.constrained_dofs()
    x, y = grid.node_xy(constrained)
    vals = np.asarray(psi(x, y), dtype=float)
    if vals.shape != x.shape:
        vals = np.broadcast_to(vals, x.shape).copy()
    # pin whole components that the datum cannot reach
    n_comp, labels = topology.dof_components()
    has_data = np.zeros(n_comp, dtype=bool)
    has_data[labels[constrained]] = True
    floating = np.nonzero(~has_data[labels])[0]
    fixed = np.concatenate([constrained, floating])
    fixed_vals = np.concatenate([vals, np.zeros(len(floating))])
    order = np.argsort(fixed, kind="stable")
    return constrained, fixed[order], fixed_vals[order]


def datum_scale(psi, grid: Grid):
    x, y = grid.node_xy(grid.dirichlet_nodes())
    if len(x) == 0:
        return 1.0
    v = np.abs(np.asarray(psi(x, y), dtype=float))
    return float(v.max()) if v.size and v.max() > 0 else 1.0


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def solve(grid: Grid, integrand: Integrand, psi, crack: CrackSet = None,
          tol: float = DEFAULT_TOL, maxiter: int = None):
    """Elastic solution for the datum psi on the cracked grid.

    Returns (ScalarField, SolveReport).  psi is a vectorized callable
    psi(x, y) evaluated on Dirichlet nodes (values elsewhere are ignored).
    """
    t0 = time.time()
    topology = cut_grid(grid, crack)
    constrained, fixed, fixed_vals = _dirichlet_setup(topology, psi)
    u = np.zeros(topology.n_dofs)
    u[fixed] = fixed_vals
    free = np.ones(topology.n_dofs, dtype=bool)
    free[fixed] = False
    free = np.nonzero(free)[0]

    if integrand.is_quadratic_form:
        u, iters, res = _solve_quadratic(topology, integrand, u, free, tol)
        method = "cg"
    else:
        u, iters, res = _solve_newton(topology, integrand, psi, u, free, tol,
                                      maxiter or NEWTON_MAX_ITER)
        method = "newton"

    field = ScalarField(topology, integrand, u, psi, constrained)
    report = SolveReport(
        iterations=iters,
        residual=res,
        bulk_energy=bulk_energy(field),
        wall_time=time.time() - t0,
        method=method,
    )
    return field, report


def _solve_quadratic(topology, integrand, u, free, tol):
    xc, yc = topology.grid.cell_centers()
    K = assemble_metric(topology, integrand.cell_metric(xc, yc))
    if len(free) == 0:
        return u, 0, 0.0
    Kff = K[free][:, free]
    b = -(K @ u)[free]
    x, iters, res = pcg(Kff, b, tol=tol)
    u = u.copy()
    u[free] += x
    return u, iters, res


def _energy_and_gradient(topology, integrand, u):
    xc, yc = topology.grid.cell_centers()
    g = cell_gradients(topology, u)
    h2 = topology.grid.h ** 2
    E = h2 * float(np.sum(integrand.eval_f(xc, yc, g)))
    sigma = integrand.grad_f(xc, yc, g)
    grad = scatter_weak_divergence(topology, sigma)
    return E, grad, g


def _solve_newton(topology, integrand, psi, u, free, tol, maxiter):
    """Damped Newton with (eps^2 + |g|^2)^((p-2)/2) Hessian regularization.

    eps enters only the Newton metric; energies and gradients are exact.
    """
    p = integrand.p
    xc, yc = topology.grid.cell_centers()
    c = integrand.coeff.scalar(xc, yc)
    eps = 1e-8 * datum_scale(psi, topology.grid)
    u = u.copy()
    # warm start from the quadratic problem with the same coefficient
    M0 = np.zeros((len(c), 2, 2))
    M0[:, 0, 0] = c
    M0[:, 1, 1] = c
    K0 = assemble_metric(topology, M0)
    if len(free):
        b0 = -(K0 @ u)[free]
        x0, _, _ = pcg(K0[free][:, free], b0, tol=1e-8)
        u[free] += x0

    E, grad, g = _energy_and_gradient(topology, integrand, u)
    g0norm = max(np.linalg.norm(grad[free]), 1e-30)
    total_iters = 0
    stagnant = 0
    for it in range(1, maxiter + 1):
        gn = np.linalg.norm(grad[free])
        # regularized Hessian metric per cell
        r2 = eps * eps + np.sum(g * g, axis=1)
        fac = c * r2 ** ((p - 2.0) / 2.0)
        H = np.zeros((len(c), 2, 2))
        H[:, 0, 0] = fac
        H[:, 1, 1] = fac
        H += ((p - 2.0) * c * r2 ** ((p - 4.0) / 2.0))[:, None, None] * (
            g[:, :, None] * g[:, None, :]
        )
        K = assemble_metric(topology, H)
        delta = np.zeros_like(u)
        rhs = -grad[free]
        dx, inner, _ = pcg(K[free][:, free], rhs, tol=1e-6)
        total_iters += inner
        delta[free] = dx
        slope = grad[free] @ dx
        alpha = 1.0
        for _ in range(50):
            E_new, grad_new, g_new = _energy_and_gradient(
                topology, integrand, u + alpha * delta
            )
            if E_new <= E + 1e-4 * alpha * slope or alpha < 1e-12:
                break
            alpha *= 0.5
        decrement = E - E_new
        u = u + alpha * delta
        E, grad, g = E_new, grad_new, g_new
        gn = np.linalg.norm(grad[free])
        if decrement <= tol * (1.0 + abs(E)) and gn <= max(1e-8 * g0norm, 1e-12):
            return u, it, gn / g0norm
        # stalled at the floating-point floor of the energy with the gradient
        # already reduced: accept (monotone descent guarantees near-optimality)
        stagnant = stagnant + 1 if decrement <= 1e-15 * (1.0 + abs(E)) else 0
        if stagnant >= 3 and gn <= 1e-5 * g0norm:
            return u, it, gn / g0norm
    raise NoConvergence(
        f"newton did not converge in {maxiter} iterations",
        iterations=maxiter,
        residual=float(np.linalg.norm(grad[free]) / g0norm),
    )


# ---------------------------------------------------------------------------
# stress and energies
# ---------------------------------------------------------------------------


def stress(field: ScalarField) -> StressField:
    """Cell stress sigma = grad_f(x, grad u) with equilibrium residuals."""
    topology = field.topology
    grid = topology.grid
    xc, yc = grid.cell_centers()
    sigma = field.integrand.grad_f(xc, yc, field.gradients())
    r = scatter_weak_divergence(topology, sigma)
    scale = grid.h * max(1.0, float(np.abs(sigma).max(initial=0.0)))
    free = field.free_dofs()
    on_boundary = np.zeros(grid.n_nodes, dtype=bool)
    on_boundary[grid.boundary_nodes()] = True
    is_interior = (~on_boundary[topology.dof_node[free]]) & (free < grid.n_nodes)
    interior = free[is_interior]
    other = free[~is_interior]
    div_res = float(np.abs(r[interior]).max(initial=0.0) / scale)
    neu_res = float(np.abs(r[other]).max(initial=0.0) / scale)
    return StressField(field, sigma, r, div_res, neu_res)


def bulk_energy(field: ScalarField) -> float:
    """Midpoint-quadrature bulk energy sum_c h^2 f(x_c, grad u|_c)."""
    grid = field.grid
    xc, yc = grid.cell_centers()
    return grid.h ** 2 * float(np.sum(field.integrand.eval_f(xc, yc, field.gradients())))


def total_energy(field: ScalarField, crack: CrackSet, k: float) -> float:
    """Bulk energy plus toughness times crack length."""
    return bulk_energy(field) + k * crack.h1()


def field_from_function(topology: CutTopology, integrand: Integrand, fn) -> ScalarField:
    """Evaluate an analytic displacement on a cut topology.

    Evaluation points are nudged slightly toward the mean of each dof's
    incident cell centers, which places duplicated instances on their own
    side of the crack (branch disambiguation for discontinuous fields).
    """
    grid = topology.grid
    x, y = topology.dof_xy()
    xc, yc = grid.cell_centers()
    sx = np.zeros(topology.n_dofs)
    sy = np.zeros(topology.n_dofs)
    cnt = np.zeros(topology.n_dofs)
    for k in range(4):
        np.add.at(sx, topology.cell_dofs[:, k], xc)
        np.add.at(sy, topology.cell_dofs[:, k], yc)
        np.add.at(cnt, topology.cell_dofs[:, k], 1.0)
    cnt[cnt == 0] = 1.0
    lam = 0.01
    px = x + lam * (sx / cnt - x)
    py = y + lam * (sy / cnt - y)
    vals = np.asarray(fn(px, py), dtype=float)
    return ScalarField(topology, integrand, vals)
