"""Replication-cost experiments built on the backward solver.

The frictionless benchmark ("hat" problem: zero impact fraction, zero
illiquidity scale) prices the payoff h(S_T) and yields the delta used as
the market's perceived hedge.  For each unit count x the lab solves the
quadratic problem with the impact-adjusted terminal, tracks the per-unit
cost H0(x) = Y0(x) / x against the benchmark value, estimates the
liquidity premium per unit (the derivative of H0 at zero) both
analytically and by finite differences, and measures the mean squared gap
between the realized impacted terminal quote and the adjusted terminal
price used in the payoff.

All runs on one report share a single path bundle (common random
numbers), so x-comparisons are paired and low-variance.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .bsde import (
    BsdeConfig,
    BsdeSolution,
    driver_state,
    hedge_from_solution,
    solve_quadratic_bsde,
    terminal_condition,
)
from .errors import InconsistentSeeds, InvalidParams, MissingDerivative
from .market import ModelParams, PathBundle, mu_coeff, simulate_paths, with_epsilon
from .noise import TimeGrid
from .order_book import impacted_quote_path
from .payoffs import Payoff, TruncatedPayoff, truncate_payoff


@dataclass(frozen=True)
class HatSolution:
    """Frictionless value process and hedge, solved on a zero-illiquidity bundle."""

    solution: BsdeSolution
    yhat0: float
    yhat0_stderr: float
    trunc: TruncatedPayoff

    @property
    def x(self) -> np.ndarray:
        return self.solution.x

    @property
    def xi(self) -> np.ndarray:
        return self.solution.xi


def hat_solution(bundle_lin: PathBundle, payoff: Payoff, config: BsdeConfig) -> HatSolution:
    """Solve the zero-impact problem with terminal h(S_T) and recover the hedge.

    The payoff is truncated at the configured level; pick the level beyond
    the payoff's range to make the truncation inert for bounded payoffs.
    """
    if bundle_lin.params.epsilon != 0.0:
        raise InvalidParams("hat solution expects a bundle simulated with epsilon = 0")
    trunc = truncate_payoff(payoff, config.n_trunc)
    terminal = terminal_condition(bundle_lin, trunc, x_units=1.0, lam=0.0)
    driver = driver_state(bundle_lin, lam=0.0)
    sol = solve_quadratic_bsde(bundle_lin, driver, terminal, config)
    sol = hedge_from_solution(sol, bundle_lin)
    return HatSolution(solution=sol, yhat0=sol.y0, yhat0_stderr=sol.y0_stderr, trunc=trunc)


def h_prime_zero(
    bundle: PathBundle,
    hat: HatSolution,
    lam: float,
    params: ModelParams | None = None,
):
    """Monte Carlo estimate of the liquidity premium per unit at x = 0.

    Two terms: the accumulated depth drift weighted by the squared
    frictionless delta, minus twice the payoff slope (inside the
    truncation band) times the delta-weighted depth turnover.  Both sums
    run to the stopping node, where the hedge is already zero.
    """
    if params is None:
        params = bundle.params
    if hat.trunc.base.derivative is None:
        raise MissingDerivative(f"payoff {hat.trunc.base.label} has no derivative")
    dt = bundle.grid.dt
    x_hat = hat.x[:, :-1]
    term1 = lam * np.sum(mu_coeff(bundle.u[:, :-1], params) * x_hat ** 2, axis=1) * dt
    dm = np.diff(bundle.m, axis=1)
    s_term = bundle.s[:, -1]
    slope = hat.trunc.base.d(s_term) * (s_term <= hat.trunc.level)
    term2 = 2.0 * lam * slope * np.sum(x_hat * dm, axis=1)
    omega = term1 - term2
    n = omega.shape[0]
    return float(omega.mean()), float(omega.std(ddof=1) / np.sqrt(n))


def impact_error(
    bundle: PathBundle,
    hat: HatSolution,
    solution_x: BsdeSolution,
    x_units: float,
    lam: float,
):
    """Mean squared gap between the impacted terminal quote and the
    adjusted terminal price, under the recovered hedge of the x-run."""
    if solution_x.x is None:
        raise InvalidParams("solution has no recovered hedge; call hedge_from_solution")
    terminal = terminal_condition(bundle, hat.trunc, x_units, lam, hat.x)
    quotes = impacted_quote_path(bundle, solution_x.x, lam)
    gap = quotes.s0_post[:, -1] - terminal.s_tilde
    sq = gap ** 2
    n = sq.shape[0]
    return float(sq.mean()), float(sq.std(ddof=1) / np.sqrt(n))


@dataclass(frozen=True)
class ReplicationReport:
    """Per-unit cost curve with paired errors and the impact-gap study."""

    xs: np.ndarray
    y0s: np.ndarray
    h0s: np.ndarray
    h0_stderrs: np.ndarray
    diff_means: np.ndarray          # H0(x) - yhat0, paired per x
    diff_stderrs: np.ndarray
    delta_l2: np.ndarray            # mean square of (X^x / x - Xhat) over alive nodes
    impact_errs: np.ndarray
    impact_stderrs: np.ndarray
    yhat0: float
    yhat0_stderr: float
    hprime0_analytic: float
    hprime0_analytic_stderr: float
    hprime0_fd: float
    hprime0_fd_stderr: float
    h0_slope: float
    impact_slope: float
    smallness_warning: bool

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "Y0", "H0", "stderr", "impact_err", "impact_stderr"])
            for i in range(len(self.xs)):
                writer.writerow([format(v, ".17g") for v in (
                    self.xs[i], self.y0s[i], self.h0s[i], self.h0_stderrs[i],
                    self.impact_errs[i], self.impact_stderrs[i])])

    def summary(self) -> dict:
        return {
            "H0_limit": self.yhat0,
            "H0_limit_stderr": self.yhat0_stderr,
            "Hprime0_analytic": self.hprime0_analytic,
            "Hprime0_analytic_stderr": self.hprime0_analytic_stderr,
            "Hprime0_fd": self.hprime0_fd,
            "Hprime0_fd_stderr": self.hprime0_fd_stderr,
            "h0_slope": self.h0_slope,
            "impact_slope": self.impact_slope,
            "smallness_warning": self.smallness_warning,
        }

    def to_json(self, path) -> None:
        payload = {
            "summary": self.summary(),
            "rows": [
                {
                    "x": float(self.xs[i]),
                    "Y0": float(self.y0s[i]),
                    "H0": float(self.h0s[i]),
                    "stderr": float(self.h0_stderrs[i]),
                    "diff_mean": float(self.diff_means[i]),
                    "diff_stderr": float(self.diff_stderrs[i]),
                    "delta_l2": float(self.delta_l2[i]),
                    "impact_err": float(self.impact_errs[i]),
                    "impact_stderr": float(self.impact_stderrs[i]),
                }
                for i in range(len(self.xs))
            ],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)


def _loglog_slope(xs, ys) -> float:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    good = ys > 0
    if good.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(xs[good]), np.log(ys[good]), 1)[0])


def check_common_bundle(bundles) -> None:
    """All experiment bundles must share seed, shape and grid."""
    first = bundles[0]
    for other in bundles[1:]:
        if not first.same_noise_as(other):
            raise InconsistentSeeds("x-runs must share one bundle (common random numbers)")


def replication_cost_curve(
    params: ModelParams,
    grid: TimeGrid,
    payoff: Payoff,
    xs,
    n_paths: int,
    seed: int,
    config: BsdeConfig,
    compute_impact: bool = True,
) -> ReplicationReport:
    """Run the full per-unit-cost experiment over a grid of unit counts."""
    xs = np.asarray(list(xs), dtype=float)
    if np.any(xs == 0.0):
        raise InvalidParams("unit counts must be nonzero")
    params.validate(require_swap_hedging=True)
    lam = params.lambda_impact

    bundle = simulate_paths(params, grid, n_paths, seed)
    bundle_lin = simulate_paths(with_epsilon(params, 0.0), grid, n_paths, seed)
    check_common_bundle([bundle, bundle_lin])
    hat = hat_solution(bundle_lin, payoff, config)

    n = bundle.n_paths
    y0s, h0s, h0_errs = [], [], []
    diff_means, diff_errs, delta_l2 = [], [], []
    imp_errs, imp_stderrs = [], []
    per_path_diffs = {}
    smallness_warning = False

    for x in xs:
        terminal = terminal_condition(bundle, hat.trunc, x, lam, hat.x)
        driver = driver_state(bundle, lam, x_units=x)
        sol = solve_quadratic_bsde(bundle, driver, terminal, config)
        if not sol.diagnostics.smallness_ok:
            smallness_warning = True
            warnings.warn(f"x = {x:g} outside the contraction smallness regime",
                          RuntimeWarning, stacklevel=2)
        sol = hedge_from_solution(sol, bundle)
        y0s.append(sol.y0)
        h0s.append(sol.y0 / x)
        h0_errs.append(sol.y0_stderr / abs(x))
        d = sol.xi / x - hat.xi
        per_path_diffs[float(x)] = d
        diff_means.append(float(d.mean()))
        diff_errs.append(float(d.std(ddof=1) / np.sqrt(n)))
        alive = np.arange(bundle.n_nodes)[None, :] < sol.tau_index[:, None]
        gap = (sol.x / x - hat.x)[alive]
        delta_l2.append(float(np.mean(gap ** 2)) if gap.size else 0.0)
        if compute_impact:
            mse, mse_err = impact_error(bundle, hat, sol, x, lam)
            imp_errs.append(mse)
            imp_stderrs.append(mse_err)
        else:
            imp_errs.append(float("nan"))
            imp_stderrs.append(float("nan"))

    hp_an, hp_an_err = h_prime_zero(bundle, hat, lam, params)
    order = np.argsort(np.abs(xs))
    x2 = float(xs[order[0]])
    if len(xs) >= 2:
        x1 = float(xs[order[1]])
        fd_pp = 2.0 * per_path_diffs[x2] / x2 - per_path_diffs[x1] / x1
    else:
        fd_pp = per_path_diffs[x2] / x2
    hp_fd = float(fd_pp.mean())
    hp_fd_err = float(fd_pp.std(ddof=1) / np.sqrt(n))

    report = ReplicationReport(
        xs=xs, y0s=np.array(y0s), h0s=np.array(h0s), h0_stderrs=np.array(h0_errs),
        diff_means=np.array(diff_means), diff_stderrs=np.array(diff_errs),
        delta_l2=np.array(delta_l2),
        impact_errs=np.array(imp_errs), impact_stderrs=np.array(imp_stderrs),
        yhat0=hat.yhat0, yhat0_stderr=hat.yhat0_stderr,
        hprime0_analytic=hp_an, hprime0_analytic_stderr=hp_an_err,
        hprime0_fd=hp_fd, hprime0_fd_stderr=hp_fd_err,
        h0_slope=_loglog_slope(np.abs(xs), np.abs(diff_means)),
        impact_slope=_loglog_slope(np.abs(xs), imp_errs) if compute_impact else float("nan"),
        smallness_warning=smallness_warning,
    )
    return report
