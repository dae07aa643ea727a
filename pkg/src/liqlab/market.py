"""Exogenous market simulation: price, variance factors, order-book depth.

The traded asset follows dS = Sigma * S dW1 with Sigma^2 = U + V, where

    dU = gamma * (U + eta) dt + Phi(U) dW2
    dV = alpha * (V + a)  dt + Theta(V) dW3

and the order-book depth is M = epsilon * Gamma(U).  U and V are advanced
with a full-truncation explicit Euler step (drift and diffusion evaluated
at max(state, 0)); the price uses an exact-log step so it stays positive.
The stored U, V are the truncated values, which keeps Sigma^2 = U + V and
M = epsilon * Gamma(U) node-exact.

mu_coeff / zeta_coeff / lambda_coeff are the depth drift, the depth
diffusion weight and the quadratic-driver coefficient used by the
backward solver.  They take the U-state directly: the depth is a known
monotone function of U, so there is no need to invert it numerically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import DegenerateState, InvalidParams, ZeroPaths
from .noise import CorrelationDecomposition, NoiseBlock, TimeGrid, draw_noise

_STATE_FLOOR = 1e-14


@dataclass(frozen=True)
class GammaMap:
    """Strictly increasing C^2 map from the U-factor to order-book depth units."""

    kind: str
    fn: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray]

    @staticmethod
    def identity() -> "GammaMap":
        return GammaMap(
            kind="identity",
            fn=lambda u: np.asarray(u, dtype=float),
            d1=lambda u: np.ones_like(np.asarray(u, dtype=float)),
            d2=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        )

    @staticmethod
    def square() -> "GammaMap":
        return GammaMap(
            kind="square",
            fn=lambda u: np.asarray(u, dtype=float) ** 2,
            d1=lambda u: 2.0 * np.asarray(u, dtype=float),
            d2=lambda u: np.full_like(np.asarray(u, dtype=float), 2.0),
        )

    @staticmethod
    def custom(fn, d1, d2) -> "GammaMap":
        return GammaMap(kind="custom", fn=fn, d1=d1, d2=d2)


@dataclass(frozen=True)
class VolCoeff:
    """Diffusion coefficient spec for a variance factor.

    kind "power" evaluates v**exponent * scale, "constant" a fixed level.
    condition_ok records whether the coefficient qualifies for the swap
    representation (power exponent in [0, 1/2], or Lipschitz: a constant,
    a linear power, or a custom function declared Lipschitz).
    """

    kind: str
    exponent: float = 0.5
    scale: float = 1.0
    level: float = 0.0
    fn: Callable[[np.ndarray], np.ndarray] | None = None
    lipschitz: bool = False

    @staticmethod
    def power(exponent: float, scale: float = 1.0) -> "VolCoeff":
        if exponent < 0:
            raise InvalidParams("power exponent must be nonnegative")
        return VolCoeff(kind="power", exponent=exponent, scale=scale,
                        lipschitz=(exponent in (0.0, 1.0)))

    @staticmethod
    def constant(level: float) -> "VolCoeff":
        return VolCoeff(kind="constant", level=level, lipschitz=True)

    @staticmethod
    def custom(fn, lipschitz: bool = False) -> "VolCoeff":
        return VolCoeff(kind="custom", fn=fn, lipschitz=lipschitz)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "power":
            return self.scale * np.power(v, self.exponent)
        if self.kind == "constant":
            return np.full_like(v, self.level)
        return np.asarray(self.fn(v), dtype=float)

    @property
    def condition_ok(self) -> bool:
        if self.kind == "power" and 0.0 <= self.exponent <= 0.5:
            return True
        return self.lipschitz


@dataclass(frozen=True)
class ModelParams:
    """All model constants plus the correlation decomposition."""

    gamma: float
    eta: float
    alpha: float
    a: float
    epsilon: float
    lambda_impact: float
    gamma_map: GammaMap
    phi: VolCoeff
    theta: VolCoeff
    s0: float
    u0: float
    v0: float
    decomp: CorrelationDecomposition

    def validate(self, require_swap_hedging: bool = False) -> None:
        if not (0.0 <= self.lambda_impact <= 1.0):
            raise InvalidParams("lambda_impact must lie in [0,1]")
        if self.epsilon < 0:
            raise InvalidParams("epsilon must be nonnegative")
        if self.s0 <= 0 or self.u0 <= 0 or self.v0 <= 0:
            raise InvalidParams("initial states s0, u0, v0 must be positive")
        if require_swap_hedging and self.alpha == self.gamma:
            raise InvalidParams(
                "alpha must differ from gamma when variance-swap hedging is requested"
            )

    @property
    def swaps_condition_ok(self) -> bool:
        """Phi and Theta admissible for the swap market representation."""
        return self.phi.condition_ok and self.theta.condition_ok

    @property
    def submartingale_ok(self) -> bool:
        """Sufficient condition for nonnegative depth drift (no-arbitrage harness)."""
        return self.gamma_map.kind == "identity" and self.gamma > 0 and self.eta > 0


@dataclass(frozen=True)
class PathBundle:
    """Simulated grid paths of (S, U, V, Sigma, M) and running realized variance."""

    grid: TimeGrid
    params: ModelParams
    noise: NoiseBlock
    s: np.ndarray
    u: np.ndarray
    v: np.ndarray
    sigma: np.ndarray
    m: np.ndarray
    rv: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.s.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.s.shape[1]

    def same_noise_as(self, other: "PathBundle") -> bool:
        return (
            self.noise.seed == other.noise.seed
            and self.noise.db.shape == other.noise.db.shape
            and self.grid == other.grid
        )


def simulate_paths(
    params: ModelParams,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
) -> PathBundle:
    """Simulate the exogenous system on the grid.

    U and V evolve as raw accumulators with coefficients evaluated at the
    truncated state; the bundle stores the truncated values.  S uses the
    exact-log step S_{k+1} = S_k exp(Sigma_k dW1 - Sigma_k^2 dt / 2), a
    discrete-time martingale.  Realized variance accumulates Sigma^2 dt
    with the left-endpoint rule.
    """
    params.validate()
    if n_paths == 0:
        raise ZeroPaths("n_paths must be at least 1")
    noise = draw_noise(grid, params.decomp, n_paths, seed)
    dt = grid.dt
    n_nodes = grid.n_nodes

    u = np.empty((n_paths, n_nodes))
    v = np.empty((n_paths, n_nodes))
    s = np.empty((n_paths, n_nodes))
    rv = np.empty((n_paths, n_nodes))
    u[:, 0] = params.u0
    v[:, 0] = params.v0
    s[:, 0] = params.s0
    rv[:, 0] = 0.0

    u_raw = np.full(n_paths, params.u0)
    v_raw = np.full(n_paths, params.v0)
    dw = noise.dw
    for k in range(grid.n_steps):
        u_plus = np.maximum(u_raw, 0.0)
        v_plus = np.maximum(v_raw, 0.0)
        sig2 = u[:, k] + v[:, k]
        sig = np.sqrt(sig2)
        s[:, k + 1] = s[:, k] * np.exp(sig * dw[:, k, 0] - 0.5 * sig2 * dt)
        rv[:, k + 1] = rv[:, k] + sig2 * dt
        u_raw = u_raw + params.gamma * (u_plus + params.eta) * dt + params.phi(u_plus) * dw[:, k, 1]
        v_raw = v_raw + params.alpha * (v_plus + params.a) * dt + params.theta(v_plus) * dw[:, k, 2]
        u[:, k + 1] = np.maximum(u_raw, 0.0)
        v[:, k + 1] = np.maximum(v_raw, 0.0)

    sigma = np.sqrt(u + v)
    m = params.epsilon * params.gamma_map.fn(u)
    return PathBundle(grid=grid, params=params, noise=noise,
                      s=s, u=u, v=v, sigma=sigma, m=m, rv=rv)


def mu_coeff(u_state, params: ModelParams):
    """Drift of the depth process M = epsilon * Gamma(U), evaluated in U."""
    u = np.asarray(u_state, dtype=float)
    g = params.gamma_map
    drift = params.epsilon * g.d1(u) * params.gamma * (u + params.eta)
    ito = 0.5 * params.epsilon * g.d2(u) * params.phi(u) ** 2
    return drift + ito


def zeta_coeff(u_state, params: ModelParams):
    """Depth diffusion weight epsilon * Phi(U)^2 * Gamma'(U), evaluated in U."""
    u = np.asarray(u_state, dtype=float)
    return params.epsilon * params.phi(u) ** 2 * params.gamma_map.d1(u)


def lambda_coeff(u_state, v_state, s_state, params: ModelParams):
    """Quadratic-driver coefficient mu / (sigma1^2 * Sigma^2 * S^2)."""
    u = np.asarray(u_state, dtype=float)
    v = np.asarray(v_state, dtype=float)
    s = np.asarray(s_state, dtype=float)
    sig2 = u + v
    if np.any(s < _STATE_FLOOR) or np.any(sig2 < _STATE_FLOOR):
        raise DegenerateState("price or total variance too close to zero")
    return mu_coeff(u, params) / (params.decomp.sigma1 ** 2 * sig2 * s ** 2)


def driver_coefficient_paths(bundle: PathBundle) -> np.ndarray:
    """lambda_coeff on every node with a guarded denominator.

    Nodes where the state has degenerated (possible only after the solver's
    stopping time, where the value is never consumed) get a zero instead of
    an error.
    """
    params = bundle.params
    sig2 = bundle.u + bundle.v
    den = params.decomp.sigma1 ** 2 * sig2 * bundle.s ** 2
    good = den > _STATE_FLOOR
    out = np.zeros_like(den)
    out[good] = mu_coeff(bundle.u[good], params) / den[good]
    return out


def export_paths_csv(bundle: PathBundle, path) -> None:
    """Write (path, step, t, S, U, V, Sigma, M, RV) rows, one per grid node."""
    times = bundle.grid.times()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "step", "t", "S", "U", "V", "Sigma", "M", "RV"])
        for p in range(bundle.n_paths):
            for k in range(bundle.n_nodes):
                writer.writerow(
                    [p, k, _fmt(times[k]), _fmt(bundle.s[p, k]), _fmt(bundle.u[p, k]),
                     _fmt(bundle.v[p, k]), _fmt(bundle.sigma[p, k]), _fmt(bundle.m[p, k]),
                     _fmt(bundle.rv[p, k])]
                )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def with_epsilon(params: ModelParams, epsilon: float) -> ModelParams:
    """Copy of the params with a different illiquidity scale."""
    return replace(params, epsilon=epsilon)
