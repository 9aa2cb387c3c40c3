"""Euler-Maruyama simulation and Monte Carlo estimation of h.

The nonlinear correction admits the probabilistic representation

    h(x) = E_x[ e^{-lambda tau} psi(X_tau) + int_0^tau e^{-lambda t} w^T F(X_t) dt ],

with tau the first exit time from the domain box.  Paths are simulated with
Euler-Maruyama steps; the running source integral uses the left-endpoint rule
(accumulate at the current state, then step), accepting the O(dt) bias.  Exit
is detected at discrete steps and the exit position is the componentwise
clamp of the first out-of-box state onto the box.

Randomness is counter-based: the normals for simulation step ``s`` of query
stream ``q`` come from a Philox generator keyed by ``(seed, q)`` with counter
block ``s``, with paths laid out as rows of the drawn block.  Results are
therefore bit-reproducible and independent of evaluation order and thread
count.

For negative eigenvalues the discount e^{-lambda t} grows without bound, so
paths are also stopped once it would exceed ``DISCOUNT_GUARD``; such paths
count as capped and set the ``discount_overflow`` flag.  When every path is
capped the estimate is dominated by the truncation and should be treated as
unreliable (``all_capped``).
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .collocation import CollocationGrid, CollocationSolution
from .errors import EvaluationError, SingularSystemError
from .kernels import GaussianKernel
from .models import Domain, EigenPair, LinearDecomposition, SdeSystem

Array = np.ndarray

DISCOUNT_GUARD = 1e12


@dataclass(frozen=True)
class FkConfig:
    """Path-simulation parameters for the Monte Carlo estimator."""

    dt: float = 0.01
    n_paths: int = 10_000
    t_max: float = 50.0
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_max < self.dt:
            raise ValueError("t_max must be >= dt")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class FkEstimate:
    """Monte Carlo value with error and exit-time statistics for one point."""

    value: float
    std_error: float
    n_capped: int
    mean_exit_time: float
    discount_overflow: bool
    n_paths: int
    failure: Optional[str] = None

    @property
    def all_capped(self) -> bool:
        """True when no path exited; the boundary term is then never sampled."""
        return self.n_capped == self.n_paths


def counter_normals(seed: int, stream: int, step: int, n: int, m: int) -> Array:
    """Standard normals for one simulation step of one stream, shape (n, m)."""
    key = np.array([seed % 2**64, stream % 2**64], dtype=np.uint64)
    counter = np.array([0, 0, step, 0], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(counter=counter, key=key))
    return gen.standard_normal((n, m))


def _step_normals(cfg: FkConfig, stream: int, step: int, n: int, m: int) -> Array:
    if not cfg.antithetic:
        return counter_normals(cfg.seed, stream, step, n, m)
    half = (n + 1) // 2
    Z = counter_normals(cfg.seed, stream, step, half, m)
    return np.vstack([Z, -Z[: n - half]])


def em_step(system: SdeSystem, x: Array, dt: float, z: Array) -> Array:
    """One Euler-Maruyama step ``x + G(x) dt + sigma(x) sqrt(dt) z``.

    Accepts a single state ``(d,)`` with noise ``(m,)`` or batches
    ``(n, d)`` / ``(n, m)``.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    Z = np.atleast_2d(z)
    S = system.sigma_at(X)
    out = X + system.drift_at(X) * dt + np.sqrt(dt) * np.einsum("ndm,nm->nd", S, Z)
    if not np.all(np.isfinite(out)):
        bad = X[~np.isfinite(out).all(axis=1)][0]
        raise EvaluationError(f"Euler-Maruyama step blew up from state {bad}")
    return out[0] if single else out


def _horizon(lam: float, cfg: FkConfig):
    """Effective time cap and whether the discount guard shortens it."""
    if lam < 0:
        t_guard = np.log(DISCOUNT_GUARD) / (-lam)
        if t_guard < cfg.t_max:
            return t_guard, True
    return cfg.t_max, False


def fk_estimate(system: SdeSystem, decomp: LinearDecomposition, eigenpair: EigenPair,
                domain: Domain, x: Array, cfg: FkConfig,
                query_index: int = 0) -> FkEstimate:
    """Monte Carlo Feynman-Kac estimate of h(x) for one interior point.

    Each path accumulates ``e^{-lambda t} w^T F(X_t) dt`` until it leaves the
    box (adding ``e^{-lambda tau} psi`` at the clamped exit state) or the time
    cap is hit.  Capped paths contribute their running integral without a
    boundary term and are counted in ``n_capped``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (system.dim_state,):
        raise ValueError(f"query point must have shape ({system.dim_state},)")
    if not domain.contains_strict(x):
        raise ValueError(f"query point {x} must lie strictly inside the domain")
    lam = eigenpair.eigenvalue
    w = eigenpair.left_eigenvector
    K, dt = cfg.n_paths, cfg.dt
    t_cap, guard_active = _horizon(lam, cfg)
    n_steps = int(np.floor(t_cap / dt + 1e-9))

    X = np.tile(x, (K, 1))
    running = np.zeros(K)
    payoff = np.zeros(K)
    alive = np.ones(K, dtype=bool)
    tau = np.full(K, np.nan)
    for s in range(n_steps):
        if not alive.any():
            break
        Z = _step_normals(cfg, query_index, s, K, system.dim_noise)
        t = s * dt
        Xa = X[alive]
        running[alive] += np.exp(-lam * t) * (decomp.nonlinear_at(Xa) @ w) * dt
        Sa = system.sigma_at(Xa)
        Xn = Xa + system.drift_at(Xa) * dt + np.sqrt(dt) * np.einsum("ndm,nm->nd", Sa, Z[alive])
        if not np.all(np.isfinite(Xn)):
            bad = Xa[~np.isfinite(Xn).all(axis=1)][0]
            raise EvaluationError(f"path blew up from state {bad} at t={t:.4g}")
        X[alive] = Xn
        t_next = (s + 1) * dt
        newly_out = alive.copy()
        newly_out[alive] = ~domain.contains(Xn)
        if newly_out.any():
            tau[newly_out] = t_next
            exit_pos = domain.clamp(X[newly_out])
            payoff[newly_out] = np.exp(-lam * t_next) * domain.psi_at(exit_pos)
            alive[newly_out] = False

    vals = running + payoff
    n_capped = int(alive.sum())
    exited = ~np.isnan(tau)
    mean_exit = float(tau[exited].mean()) if exited.any() else float("nan")
    if K == 1 or np.ptp(vals) == 0.0:
        se = 0.0
    else:
        se = float(vals.std(ddof=1) / np.sqrt(K))
    return FkEstimate(value=float(vals.mean()), std_error=se, n_capped=n_capped,
                      mean_exit_time=mean_exit,
                      discount_overflow=bool(guard_active and n_capped > 0),
                      n_paths=K)


def fk_batch(system: SdeSystem, decomp: LinearDecomposition, eigenpair: EigenPair,
             domain: Domain, query_points, cfg: FkConfig) -> list[FkEstimate]:
    """Independent estimates per query point, streams derived from the index.

    Per-point failures are recorded on the estimate (``failure`` message,
    NaN value) instead of aborting the batch.  Results do not depend on
    evaluation order.
    """
    pts = np.atleast_2d(np.asarray(query_points, dtype=float))
    out = []
    for i, x in enumerate(pts):
        try:
            out.append(fk_estimate(system, decomp, eigenpair, domain, x, cfg,
                                   query_index=i))
        except (EvaluationError, ValueError) as exc:
            out.append(FkEstimate(value=float("nan"), std_error=float("nan"),
                                  n_capped=cfg.n_paths, mean_exit_time=float("nan"),
                                  discount_overflow=False, n_paths=cfg.n_paths,
                                  failure=str(exc)))
    return out


def krr_fit(kern: GaussianKernel, grid: CollocationGrid, values, eta: float,
            eigenpair: Optional[EigenPair] = None,
            equilibrium: Optional[Array] = None) -> CollocationSolution:
    """Kernel ridge fit ``(K + eta I) alpha = values`` of pointwise estimates.

    Returns an evaluable solution object; pass the eigenpair to make
    ``eval_phi`` meaningful (defaults to a placeholder with w = 0-padded 1).
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    vals = np.asarray(values, dtype=float)
    if vals.shape != (grid.n_points,):
        raise ValueError("values must be one scalar per grid point")
    K = kern.eval_matrix(grid.points, grid.points) + eta * np.eye(grid.n_points)
    try:
        alpha = np.linalg.solve(K, vals)
    except np.linalg.LinAlgError:
        raise SingularSystemError("ridge system factorization failed",
                                  condition_estimate=float(np.linalg.cond(K)))
    if eigenpair is None:
        w = np.zeros(grid.dim)
        w[0] = 1.0
        eigenpair = EigenPair(eigenvalue=0.0, left_eigenvector=w)
    return CollocationSolution(coefficients=alpha, grid=grid, kernel=kern,
                               eigenpair=eigenpair, equilibrium=equilibrium)


def mc_convergence_probe(system: SdeSystem, decomp: LinearDecomposition,
                         eigenpair: EigenPair, domain: Domain, x: Array,
                         cfg: FkConfig, path_counts) -> list[dict]:
    """Standard error versus path count; expected to scale like K^{-1/2}."""
    counts = list(path_counts)
    if any(b <= a for a, b in zip(counts, counts[1:])):
        raise ValueError("path_counts must be strictly increasing")
    rows = []
    for K in counts:
        est = fk_estimate(system, decomp, eigenpair, domain, x,
                          FkConfig(dt=cfg.dt, n_paths=int(K), t_max=cfg.t_max,
                                   seed=cfg.seed, antithetic=cfg.antithetic))
        rows.append({"n_paths": int(K), "value": est.value, "std_error": est.std_error})
    return rows


def simulate_terminal(system: SdeSystem, x0: Array, t: float, cfg: FkConfig,
                      stream: int = 0, snapshot_times=None):
    """Unstopped Euler-Maruyama ensemble from x0; used for semigroup checks.

    Returns the (n_paths, d) states at time ``t``, or a dict of snapshots
    ``{t_i: states}`` when ``snapshot_times`` is given (each snapshot equals
    what a separate run to that horizon would produce, because the normals
    are keyed by step index).
    """
    x0 = np.asarray(x0, dtype=float)
    n_steps = int(round(t / cfg.dt))
    if n_steps < 1:
        raise ValueError("horizon must cover at least one step")
    want = {}
    if snapshot_times is not None:
        want = {int(round(ti / cfg.dt)): float(ti) for ti in snapshot_times}
        n_steps = max(n_steps, max(want))
    X = np.tile(x0, (cfg.n_paths, 1))
    snaps = {}
    for s in range(n_steps):
        Z = _step_normals(cfg, stream, s, cfg.n_paths, system.dim_noise)
        X = em_step(system, X, cfg.dt, Z)
        if (s + 1) in want:
            snaps[want[s + 1]] = X.copy()
    return snaps if snapshot_times is not None else X


FK_CSV_COLUMNS = ("query_index", "x", "value", "std_error", "n_capped",
                  "mean_exit_time", "overflow_flag")


def estimates_to_csv(estimates, query_points) -> str:
    """Render batch estimates as CSV with one row per query point.

    Columns: query_index, the point coordinates (x1..xd), value, std_error,
    n_capped, mean_exit_time, overflow_flag.  Floats use their shortest
    round-trip representation.
    """
    pts = np.atleast_2d(np.asarray(query_points, dtype=float))
    d = pts.shape[1]
    buf = io.StringIO()
    coords = ["x"] if d == 1 else [f"x{i + 1}" for i in range(d)]
    buf.write(",".join(["query_index", *coords, "value", "std_error", "n_capped",
                        "mean_exit_time", "overflow_flag"]) + "\n")
    for i, (x, est) in enumerate(zip(pts, estimates)):
        row = [str(i), *(repr(float(c)) for c in x), repr(est.value),
               repr(est.std_error), str(est.n_capped), repr(est.mean_exit_time),
               str(est.discount_overflow)]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()
