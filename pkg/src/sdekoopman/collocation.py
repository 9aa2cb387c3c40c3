"""Kernel collocation for the nonlinear-correction PDE.

Enforcing ``G . grad h + (1/2) Tr[a hess h] - lambda h = -w^T F`` at N nodes
with the ansatz ``h(x) = sum_j alpha_j k(x, x_j)`` gives the dense system

    (L + D - lambda K + gamma I) alpha = -f,

with ``K_ij = k(x_i, x_j)``, ``L_ij = G(x_i) . grad_x k(x_i, x_j)``,
``D_ij`` the half Hessian-trace entries and ``f_i = w^T F(x_i)``.  The system
matrix is generically nonsymmetric and is solved by LU with partial pivoting;
the reported condition number is the 2-norm value of the regularized matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .errors import AssemblyError, SingularSystemError
from .kernels import GaussianKernel
from .models import Domain, EigenPair, LinearDecomposition, SdeSystem

Array = np.ndarray

GRID_KINDS = ("uniform_1d", "tensor", "sobol")


@dataclass(frozen=True)
class GridSpec:
    """Collocation grid recipe: 'uniform_1d', 'tensor' or 'sobol' with a count.

    For 'tensor' the count is per axis; for the others it is the total.
    """

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in GRID_KINDS:
            raise ValueError(f"unknown grid kind '{self.kind}'; expected one of {GRID_KINDS}")
        if self.n < 2:
            raise ValueError("grid counts must be >= 2")


@dataclass(frozen=True)
class CollocationGrid:
    """Distinct collocation nodes, shape (N, d)."""

    points: Array

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid points must be finite")
        d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        if d2.min() <= 1e-12**2:
            i, j = np.unravel_index(int(d2.argmin()), d2.shape)
            raise ValueError(f"grid points {i} and {j} coincide")
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def make_grid(domain: Domain, spec: GridSpec) -> CollocationGrid:
    """Build a collocation grid spanning the domain box (boundary inclusive)."""
    d = domain.dim
    if spec.kind == "uniform_1d":
        if d != 1:
            raise ValueError("uniform_1d requires a 1-dimensional domain")
        pts = np.linspace(domain.lower[0], domain.upper[0], spec.n)[:, None]
    elif spec.kind == "tensor":
        axes = [np.linspace(domain.lower[i], domain.upper[i], spec.n) for i in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
    else:  # sobol
        sampler = qmc.Sobol(d=d, scramble=False)
        n_pow2 = 1 << max(1, int(np.ceil(np.log2(spec.n))))
        u = sampler.random_base2(int(np.log2(n_pow2)))[: spec.n]
        pts = qmc.scale(u, domain.lower, domain.upper)
    if not domain.contains(pts).all():
        raise ValueError("generated grid points fall outside the domain box")
    return CollocationGrid(points=pts)


@dataclass(frozen=True)
class AssembledSystem:
    """Gram/drift/diffusion matrices, source vector, and the system matrix."""

    gram: Array
    drift_mat: Array
    diff_mat: Array
    source: Array
    system_matrix: Array
    regularization: float

    @property
    def n_points(self) -> int:
        return self.source.size


def assemble(system: SdeSystem, decomp: LinearDecomposition, eigenpair: EigenPair,
             kern: GaussianKernel, grid: CollocationGrid, gamma: float,
             degenerate_mode: bool = False) -> AssembledSystem:
    """Assemble the collocation system ``(L + D - lambda K + gamma I, f)``.

    With ``degenerate_mode`` the diffusion entries use the vector-field form
    ``(1/2) sum_k (sigma_k . grad)^2 k``, which stays well defined when the
    diffusion tensor is singular; otherwise the equivalent Hessian-trace form
    is used.  Both reduce to D = 0 exactly when sigma vanishes.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    X = grid.points
    N, d = X.shape
    l2 = kern.lengthscale**2

    K = kern.eval_matrix(X, X)
    diff = X[:, None, :] - X[None, :, :]  # diff[i, j] = x_i - x_j
    G = system.drift_at(X)
    L = -(np.einsum("id,ijd->ij", G, diff) / l2) * K

    S = system.sigma_at(X)  # (N, d, m)
    if degenerate_mode:
        proj = np.einsum("idm,ijd->ijm", S, diff)
        sq_norms = (S**2).sum(axis=(1, 2))  # Tr[a(x_i)]
        D = 0.5 * K * ((proj**2).sum(axis=2) / l2**2 - sq_norms[:, None] / l2)
    else:
        a = np.einsum("idm,iem->ide", S, S)  # a(x_i) = sigma sigma^T
        quad = np.einsum("ijd,ide,ije->ij", diff, a, diff)
        tr = np.einsum("idd->i", a)
        D = 0.5 * K * (quad / l2**2 - tr[:, None] / l2)

    f = decomp.nonlinear_at(X) @ eigenpair.left_eigenvector
    M = L + D - eigenpair.eigenvalue * K + gamma * np.eye(N)

    for name, mat in (("gram", K), ("drift", L), ("diffusion", D)):
        bad = ~np.isfinite(mat)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise AssemblyError(f"non-finite {name} entry at ({i}, {j})")
    if not np.all(np.isfinite(f)):
        i = int(np.argwhere(~np.isfinite(f))[0])
        raise AssemblyError(f"non-finite source entry at ({i},)")

    return AssembledSystem(gram=K, drift_mat=L, diff_mat=D, source=f,
                           system_matrix=M, regularization=float(gamma))


def solve(asys: AssembledSystem):
    """Solve ``M alpha = -f`` by LU with partial pivoting.

    Returns ``(alpha, condition_number)`` where the condition number is the
    2-norm value of the regularized system matrix, from its singular values.
    """
    M = asys.system_matrix
    svals = np.linalg.svd(M, compute_uv=False)
    if svals[-1] < 1e-300:
        raise SingularSystemError("collocation matrix is numerically singular",
                                  condition_estimate=float(svals[0] / max(svals[-1], 1e-300)))
    cond = float(svals[0] / svals[-1])
    try:
        alpha = np.linalg.solve(M, -asys.source)
    except np.linalg.LinAlgError:
        raise SingularSystemError("LU factorization failed", condition_estimate=cond)
    return alpha, cond


@dataclass(frozen=True)
class CollocationSolution:
    """Kernel expansion of the nonlinear correction h, with phi = w^T x + h.

    ``decomp`` may be None for solutions restored from JSON; evaluation only
    needs the coefficients, grid, kernel, eigenpair and equilibrium.
    """

    coefficients: Array
    grid: CollocationGrid
    kernel: GaussianKernel
    eigenpair: EigenPair
    decomp: Optional[LinearDecomposition] = None
    equilibrium: Optional[Array] = None

    def __post_init__(self):
        alpha = np.asarray(self.coefficients, dtype=float)
        if alpha.shape != (self.grid.n_points,):
            raise ValueError("coefficient vector length must match the grid")
        if not np.all(np.isfinite(alpha)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coefficients", alpha)
        eq = self.equilibrium
        if eq is None:
            eq = (self.decomp.equilibrium if self.decomp is not None
                  else np.zeros(self.grid.dim))
        object.__setattr__(self, "equilibrium", np.asarray(eq, dtype=float))

    def _krow(self, X):
        return self.kernel.eval_matrix(np.atleast_2d(X), self.grid.points)

    def eval_h(self, x: Array):
        """Nonlinear correction ``h(x) = sum_j alpha_j k(x, x_j)``; batched."""
        x = np.asarray(x, dtype=float)
        vals = self._krow(x) @ self.coefficients
        return float(vals[0]) if x.ndim == 1 else vals

    def eval_phi(self, x: Array):
        """Eigenfunction ``phi(x) = w^T (x - x*) + h(x)``; batched."""
        x = np.asarray(x, dtype=float)
        w = self.eigenpair.left_eigenvector
        lin = (np.atleast_2d(x) - self.equilibrium) @ w
        vals = lin + self._krow(x) @ self.coefficients
        return float(vals[0]) if x.ndim == 1 else vals

    def grad_h(self, X: Array) -> Array:
        """Exact gradient of h at each row of X, shape (n, d)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        diff = X[:, None, :] - self.grid.points[None, :, :]
        Kx = self._krow(X)
        l2 = self.kernel.lengthscale**2
        return -np.einsum("njd,nj,j->nd", diff, Kx, self.coefficients) / l2

    def hessian_trace_h(self, X: Array, a_all: Array) -> Array:
        """``Tr[a(x) hess h(x)]`` at each row of X given a(x) stacked (n, d, d)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        diff = X[:, None, :] - self.grid.points[None, :, :]
        Kx = self._krow(X)
        l2 = self.kernel.lengthscale**2
        quad = np.einsum("njd,nde,nje->nj", diff, a_all, diff)
        tr = np.einsum("ndd->n", a_all)
        per_node = Kx * (quad / l2**2 - tr[:, None] / l2)
        return per_node @ self.coefficients


def solve_system(system: SdeSystem, decomp: LinearDecomposition, eigenpair: EigenPair,
                 kern: GaussianKernel, grid: CollocationGrid, gamma: float,
                 degenerate_mode: bool = False):
    """Assemble and solve in one step; returns (solution, assembled, cond)."""
    asys = assemble(system, decomp, eigenpair, kern, grid, gamma, degenerate_mode)
    alpha, cond = solve(asys)
    sol = CollocationSolution(coefficients=alpha, grid=grid, kernel=kern,
                              eigenpair=eigenpair, decomp=decomp,
                              equilibrium=decomp.equilibrium)
    return sol, asys, cond


@dataclass(frozen=True)
class ResidualStats:
    mean: float
    max: float
    per_point: Array


def pde_residual(sol: CollocationSolution, system: SdeSystem, test_points) -> ResidualStats:
    """Pointwise PDE residual of phi over the test points.

    Evaluates ``r(x) = G . grad phi + (1/2) Tr[a hess h] - lambda phi`` with
    exact kernel derivatives (the linear part w^T x has zero Hessian).  The
    kernel expansion is globally defined, so test points may extend beyond
    the collocation box; residuals grow quickly outside it.
    """
    X = np.atleast_2d(np.asarray(test_points, dtype=float))
    G = system.drift_at(X)
    S = system.sigma_at(X)
    a_all = np.einsum("ndm,nem->nde", S, S)
    w = sol.eigenpair.left_eigenvector
    lam = sol.eigenpair.eigenvalue
    grad_phi = w[None, :] + sol.grad_h(X)
    phi = sol.eval_phi(X)
    r = np.einsum("nd,nd->n", G, grad_phi) + 0.5 * sol.hessian_trace_h(X, a_all) - lam * phi
    r = np.abs(r)
    return ResidualStats(mean=float(r.mean()), max=float(r.max()), per_point=r)


def residual_test_points(domain: Domain, expand: float = 0.25,
                         n_1d: int = 200, n_per_axis: int = 20) -> Array:
    """Uniform residual-evaluation grid on the box expanded per side.

    200 uniform points in 1d, an ``n x n`` tensor grid otherwise.  The 25%
    default expansion matches the benchmark convention used by the reference
    experiments (see the validation module).
    """
    center = 0.5 * (domain.lower + domain.upper)
    half = 0.5 * (domain.upper - domain.lower) * (1.0 + expand)
    lo, hi = center - half, center + half
    if domain.dim == 1:
        return np.linspace(lo[0], hi[0], n_1d)[:, None]
    axes = [np.linspace(lo[i], hi[i], n_per_axis) for i in range(domain.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


# --- JSON serialization -----------------------------------------------------
#
# Schema (all arrays as nested lists):
#   lengthscale, lambda, w, gamma, grid, coefficients   -- always present
#   gram, drift, diffusion, source                      -- when assembled
#     system is attached


def solution_to_json_dict(sol: CollocationSolution,
                          asys: Optional[AssembledSystem] = None) -> dict:
    doc = {
        "lengthscale": sol.kernel.lengthscale,
        "lambda": sol.eigenpair.eigenvalue,
        "w": sol.eigenpair.left_eigenvector.tolist(),
        "gamma": asys.regularization if asys is not None else None,
        "grid": sol.grid.points.tolist(),
        "coefficients": sol.coefficients.tolist(),
    }
    if asys is not None:
        doc["gram"] = asys.gram.tolist()
        doc["drift"] = asys.drift_mat.tolist()
        doc["diffusion"] = asys.diff_mat.tolist()
        doc["source"] = asys.source.tolist()
    return doc


def solution_from_json_dict(doc: dict) -> CollocationSolution:
    grid = CollocationGrid(points=np.asarray(doc["grid"], dtype=float))
    return CollocationSolution(
        coefficients=np.asarray(doc["coefficients"], dtype=float),
        grid=grid,
        kernel=GaussianKernel(lengthscale=float(doc["lengthscale"])),
        eigenpair=EigenPair(eigenvalue=float(doc["lambda"]),
                            left_eigenvector=np.asarray(doc["w"], dtype=float)),
    )


def save_solution(path, sol: CollocationSolution, asys: Optional[AssembledSystem] = None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(solution_to_json_dict(sol, asys), fh)


def load_solution(path) -> CollocationSolution:
    with open(path, encoding="utf-8") as fh:
        return solution_from_json_dict(json.load(fh))
