"""Backward regression solver for the quadratic-driver value equation.

The replication value Y and its diffusion exposures Z solve, up to the
stopping time tau (first exit of price/volatility from [1/L, L]),

    Y_t = terminal + lambda * int_t^tau Lambda_u Z_{1,u}^2 du - int Z dB.

The solver marches backward over the grid.  At each step the exposures
are estimated by regressing Y_{k+1} * dB_j / dt on polynomial features of
(S, U, V); the value is the regression of Y_{k+1} plus the driver term,
with a Picard loop refreshing Z_1 through a control-variate re-estimate
until the value stabilizes.  Stopped paths carry their value unchanged
with zero exposures, which realizes the conditional expectation at tau
through the tower property (no separate estimator).

Regressions use ridge-stabilized least squares on standardized features
with an unpenalized intercept, so cross-path means are preserved exactly:
the cross-path value at node 0 equals the plain Monte Carlo mean of the
terminal plus accumulated driver.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    InvalidParams,
    MissingHatHedge,
    PicardDiverged,
    RegressionRankDeficient,
    SingularSystem,
)
from .market import PathBundle, driver_coefficient_paths, zeta_coeff
from .payoffs import TruncatedPayoff
from .swaps import invert_hedge, psi_matrix


@dataclass(frozen=True)
class BsdeConfig:
    """Solver knobs: truncation levels, basis, Picard control."""

    l_trunc: float
    n_trunc: float
    degree: int = 2
    picard_iters: int = 5
    picard_tol: float = 1e-8
    min_paths_per_regression: int | None = None
    ridge: float = 1e-8

    def __post_init__(self):
        if self.l_trunc <= 1.0:
            raise InvalidParams("truncation threshold l_trunc must exceed 1")
        if self.n_trunc <= 0.0:
            raise InvalidParams("payoff truncation level n_trunc must be positive")
        if self.degree < 1:
            raise InvalidParams("basis degree must be at least 1")


@dataclass(frozen=True)
class DriverState:
    """Quadratic-driver data: Lambda per node, impact fraction, unit count."""

    lambda_vals: np.ndarray
    lam: float
    x_units: float = 1.0


def driver_state(bundle: PathBundle, lam: float, x_units: float = 1.0) -> DriverState:
    return DriverState(lambda_vals=driver_coefficient_paths(bundle), lam=lam, x_units=x_units)


@dataclass(frozen=True)
class TerminalCondition:
    """Per-path terminal values x * h^N(adjusted terminal price)."""

    values: np.ndarray
    s_tilde: np.ndarray
    x_units: float
    lam: float
    payoff_bound: float


def stopping_index(bundle: PathBundle, l_trunc: float) -> np.ndarray:
    """First grid node where S <= 1/L or Sigma leaves [1/L, L], else the last node."""
    if l_trunc <= 1.0:
        raise InvalidParams("truncation threshold must exceed 1")
    inv = 1.0 / l_trunc
    bad = (bundle.s <= inv) | (bundle.sigma >= l_trunc) | (bundle.sigma <= inv)
    hit = bad.any(axis=1)
    return np.where(hit, bad.argmax(axis=1), bundle.n_nodes - 1)


def terminal_condition(
    bundle: PathBundle,
    payoff: TruncatedPayoff,
    x_units: float,
    lam: float,
    hat_hedge: np.ndarray | None = None,
) -> TerminalCondition:
    """Terminal values against the impact-adjusted terminal price.

    The adjustment subtracts 2 lambda x times the depth-weighted turnover
    of the frictionless delta: S~ = S_T - 2 lambda x sum Xhat_{k} dM_{k+1}.
    hat_hedge may be omitted only when the adjustment vanishes (lambda = 0
    or constant depth).
    """
    dm = np.diff(bundle.m, axis=1)
    needs_hat = lam != 0.0 and np.any(dm != 0.0)
    if hat_hedge is None:
        if needs_hat:
            raise MissingHatHedge("frictionless delta required when impact is active")
        s_tilde = bundle.s[:, -1].copy()
    else:
        hat = np.asarray(hat_hedge, dtype=float)
        if hat.shape != (bundle.n_paths, bundle.n_nodes):
            raise MissingHatHedge("hat hedge path does not match the bundle grid")
        s_tilde = bundle.s[:, -1] - 2.0 * lam * x_units * np.sum(hat[:, :-1] * dm, axis=1)
    values = x_units * payoff(s_tilde)
    return TerminalCondition(values=values, s_tilde=s_tilde, x_units=x_units,
                             lam=lam, payoff_bound=payoff.bound)


def _n_features(degree: int) -> int:
    # monomials in 3 variables with total degree <= degree
    return (degree + 1) * (degree + 2) * (degree + 3) // 6


def _design(s, u, v, degree: int) -> np.ndarray:
    cols = [np.ones_like(s)]
    for total in range(1, degree + 1):
        for i in range(total + 1):
            for j in range(total - i + 1):
                k = total - i - j
                cols.append(s ** i * u ** j * v ** k)
    raw = np.column_stack(cols)
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)
    keep = std > 1e-12 * (np.abs(mean) + 1.0)
    out = np.zeros_like(raw)
    out[:, 0] = 1.0
    out[:, 1:] = np.where(keep[1:], (raw[:, 1:] - mean[1:]) / np.where(keep[1:], std[1:], 1.0), 0.0)
    return out


class _RidgeSolver:
    """Shared design and Gram matrix for all regressions at one time step.

    The intercept column is unpenalized so fitted values preserve the
    sample mean of any target exactly.
    """

    def __init__(self, design: np.ndarray, ridge: float):
        self.design = design
        gram = design.T @ design
        penalty = np.ones(design.shape[1])
        penalty[0] = 0.0
        gram_reg = gram + ridge * design.shape[0] * np.diag(penalty)
        self.cond = float(np.linalg.cond(gram_reg))
        self._gram_reg = gram_reg

    def fit(self, target: np.ndarray) -> np.ndarray:
        beta = np.linalg.solve(self._gram_reg, self.design.T @ target)
        return self.design @ beta


@dataclass(frozen=True)
class BsdeDiagnostics:
    alive_counts: np.ndarray
    cond_numbers: np.ndarray
    picard_deltas: list
    lambda_bound: float
    y_bound: float
    max_abs_y: float
    smallness_ok: bool
    bound_violated: bool

    def to_rows(self):
        rows = []
        for k in range(len(self.alive_counts)):
            deltas = self.picard_deltas[k]
            rows.append({
                "step": k,
                "alive": int(self.alive_counts[k]),
                "cond": float(self.cond_numbers[k]),
                "picard_iters": len(deltas),
                "last_picard_delta": float(deltas[-1]) if deltas else 0.0,
            })
        return rows


@dataclass(frozen=True)
class BsdeSolution:
    """Value and exposure paths, recovered hedge, and run diagnostics.

    xi is the per-path estimator (terminal plus accumulated driver) whose
    mean is y0; its spread gives the Monte Carlo standard error.
    """

    y: np.ndarray
    z: np.ndarray
    tau_index: np.ndarray
    y0: float
    y0_stderr: float
    xi: np.ndarray
    diagnostics: BsdeDiagnostics
    degenerate: bool = False
    x: np.ndarray | None = None
    chi1: np.ndarray | None = None
    chi2: np.ndarray | None = None


def solve_quadratic_bsde(
    bundle: PathBundle,
    driver: DriverState,
    terminal: TerminalCondition,
    config: BsdeConfig,
) -> BsdeSolution:
    """Backward pass over the grid; see the module docstring for the scheme."""
    values = np.asarray(terminal.values, dtype=float)
    if values.shape != (bundle.n_paths,):
        raise InvalidParams("terminal values must be one per path")
    if not np.all(np.isfinite(values)):
        raise InvalidParams("terminal values must be finite")

    n_paths, n_nodes = bundle.n_paths, bundle.n_nodes
    n_steps = n_nodes - 1
    dt = bundle.grid.dt
    tau = stopping_index(bundle, config.l_trunc)

    y = np.empty((n_paths, n_nodes))
    z = np.zeros((n_paths, n_nodes, 3))
    y[:, n_steps] = values
    xi = values.copy()

    if np.all(tau == 0):
        y[:, :] = values[:, None]
        y0 = float(values.mean())
        diag = BsdeDiagnostics(
            alive_counts=np.zeros(n_steps, dtype=int),
            cond_numbers=np.zeros(n_steps),
            picard_deltas=[[] for _ in range(n_steps)],
            lambda_bound=0.0, y_bound=abs(terminal.x_units) * terminal.payoff_bound,
            max_abs_y=float(np.abs(values).max()), smallness_ok=True, bound_violated=False,
        )
        stderr = float(values.std(ddof=1) / np.sqrt(n_paths)) if n_paths > 1 else 0.0
        return BsdeSolution(y=y, z=z, tau_index=tau, y0=y0, y0_stderr=stderr,
                            xi=xi, diagnostics=diag, degenerate=True)

    n_feat = _n_features(config.degree)
    min_alive = max(config.min_paths_per_regression or 0, n_feat)
    alive_counts = np.zeros(n_steps, dtype=int)
    cond_numbers = np.zeros(n_steps)
    picard_deltas: list = [[] for _ in range(n_steps)]
    lambda_bound = 0.0

    for k in range(n_steps - 1, -1, -1):
        alive = tau > k
        stopped = ~alive
        y[stopped, k] = y[stopped, k + 1]
        n_alive = int(alive.sum())
        alive_counts[k] = n_alive
        if n_alive == 0:
            continue
        if n_alive < min_alive:
            raise RegressionRankDeficient(
                f"step {k}: {n_alive} alive paths < required {min_alive}",
                diagnostics={"step": k, "alive": n_alive, "required": min_alive},
            )

        design = _design(bundle.s[alive, k], bundle.u[alive, k], bundle.v[alive, k],
                         config.degree)
        solver = _RidgeSolver(design, config.ridge)
        cond_numbers[k] = solver.cond
        target = y[alive, k + 1]
        db_k = bundle.noise.db[alive, k, :]

        y_proj = solver.fit(target)
        z_fit = np.empty((n_alive, 3))
        for j in range(3):
            z_fit[:, j] = solver.fit((target - y_proj) * db_k[:, j] / dt)

        lam_vals = driver.lambda_vals[alive, k]
        driver_active = driver.lam != 0.0 and np.any(lam_vals != 0.0)
        if driver_active:
            lambda_bound = max(lambda_bound, float(lam_vals.max()))
            y_new = solver.fit(target + driver.lam * lam_vals * z_fit[:, 0] ** 2 * dt)
            prev_delta = None
            growing = 0
            for _ in range(1, config.picard_iters):
                z1 = solver.fit((target - y_new) * db_k[:, 0] / dt)
                y_next = solver.fit(target + driver.lam * lam_vals * z1 ** 2 * dt)
                delta = float(np.abs(y_next - y_new).max())
                picard_deltas[k].append(delta)
                z_fit[:, 0] = z1
                y_new = y_next
                if prev_delta is not None and delta > prev_delta:
                    growing += 1
                    if growing >= 3:
                        raise PicardDiverged(
                            f"step {k}: Picard deltas grew 3 times in a row",
                            diagnostics={"step": k, "deltas": picard_deltas[k]},
                        )
                else:
                    growing = 0
                prev_delta = delta
                if delta < config.picard_tol:
                    break
            for j in (1, 2):
                z_fit[:, j] = solver.fit((target - y_new) * db_k[:, j] / dt)
            xi[alive] += driver.lam * lam_vals * z_fit[:, 0] ** 2 * dt
        else:
            y_new = y_proj

        y[alive, k] = y_new
        z[alive, k, :] = z_fit

    y0 = float(y[:, 0].mean())
    stderr = float(xi.std(ddof=1) / np.sqrt(n_paths)) if n_paths > 1 else 0.0
    y_bound = abs(terminal.x_units) * terminal.payoff_bound
    smallness = driver.lam * 2.0 * lambda_bound * terminal.payoff_bound
    smallness_ok = smallness * abs(terminal.x_units) < 0.5
    max_abs_y = float(np.abs(y).max())
    diag = BsdeDiagnostics(
        alive_counts=alive_counts, cond_numbers=cond_numbers,
        picard_deltas=picard_deltas, lambda_bound=lambda_bound,
        y_bound=y_bound, max_abs_y=max_abs_y, smallness_ok=smallness_ok,
        bound_violated=bool(smallness_ok and max_abs_y > y_bound * (1 + 1e-9)),
    )
    return BsdeSolution(y=y, z=z, tau_index=tau, y0=y0, y0_stderr=stderr,
                        xi=xi, diagnostics=diag)


def hedge_from_solution(solution: BsdeSolution, bundle: PathBundle) -> BsdeSolution:
    """Invert the exposures into (stock, swap1, swap2) positions node by node.

    The hedge is zero at and after the stopping node, which also encodes
    liquidation at maturity for paths that never stop.
    """
    t1, t2 = bundle.grid.require_maturities()
    params = bundle.params
    times = bundle.grid.times()
    n_paths, n_nodes = bundle.n_paths, bundle.n_nodes
    x = np.zeros((n_paths, n_nodes))
    chi1 = np.zeros((n_paths, n_nodes))
    chi2 = np.zeros((n_paths, n_nodes))
    for k in range(n_nodes):
        alive = solution.tau_index > k
        if not alive.any():
            continue
        u_k = bundle.u[alive, k]
        v_k = bundle.v[alive, k]
        s_k = bundle.s[alive, k]
        psi = psi_matrix(times[k], u_k, v_k, s_k, params, t1, t2)
        if np.any(psi.degenerate):
            raise SingularSystem(f"node {k}: degenerate loading matrix on an alive path")
        sigma_s = bundle.sigma[alive, k] * s_k
        zeta_u = zeta_coeff(u_k, params)
        xk, c1, c2 = invert_hedge(solution.z[alive, k, :], psi, sigma_s, zeta_u, params)
        x[alive, k] = xk
        chi1[alive, k] = c1
        chi2[alive, k] = c2
    return replace(solution, x=x, chi1=chi1, chi2=chi2)
