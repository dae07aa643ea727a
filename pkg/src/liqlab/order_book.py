"""Linear supply curve, execution cost and the impacted quote.

A market order of signed size x executes against the linear curve
S + M x (dollar outlay S x + M x^2).  A fraction lambda of the book
displacement persists: each trade dX shifts the quote by 2 lambda M dX
while the book density 1 / (2 M) is unchanged.  The pre-trade quote at a
node excludes the impact of the trade placed at that node; the post-trade
quote includes it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateState, GridMismatch

_DEPTH_FLOOR = 0.0


def unaffected_price(s, m, x):
    """Price per share on the unaffected curve for an order of size x."""
    return s + m * x


def execution_cost(s, m, x):
    """Dollar outlay for x shares: s*x + m*x**2 (cash received when x < 0)."""
    return s * x + m * x * x


def book_density(m):
    """Shares offered per unit price: 1 / (2 M).  Requires positive depth."""
    m = np.asarray(m, dtype=float)
    if np.any(m <= _DEPTH_FLOOR):
        raise DegenerateState("order-book density undefined at zero depth")
    return 1.0 / (2.0 * m)


def apply_impact(quote, m, lam, dx):
    """Post-trade quote after a market order of size dx."""
    return quote + 2.0 * lam * m * dx


@dataclass(frozen=True)
class ImpactedQuotePath:
    """Pre- and post-trade quotes along every path.

    s0_pre[p, k] is the quote seen by the trade at node k (impact of that
    trade not yet reflected); s0_post[p, k] includes it.
    """

    s0_pre: np.ndarray
    s0_post: np.ndarray


def positions_2d(x, n_paths: int, n_nodes: int) -> np.ndarray:
    """Normalize a position path to (n_paths, n_nodes), broadcasting a 1-d profile."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.shape[0] != n_nodes:
            raise GridMismatch(f"position path has {x.shape[0]} nodes, grid has {n_nodes}")
        return np.broadcast_to(x, (n_paths, n_nodes))
    if x.shape != (n_paths, n_nodes):
        raise GridMismatch(f"position array {x.shape} does not match ({n_paths}, {n_nodes})")
    return x


def impacted_quote_path(bundle, strategy, lam: float) -> ImpactedQuotePath:
    """Quote path under a grid trading strategy.

    The cumulative displacement after the node-k trade is
    2 lambda * sum_{i<=k} M_i dX_i, which realizes the depth-at-trade-time
    convention (M at the left node plus the covariation of depth and
    position over the step ending at the trade).
    """
    x = getattr(strategy, "x", strategy)
    x = positions_2d(x, bundle.n_paths, bundle.n_nodes)
    dx = np.diff(x, axis=1, prepend=0.0)          # node-0 trade jumps from flat
    impact = 2.0 * lam * np.cumsum(bundle.m * dx, axis=1)
    s0_post = bundle.s + impact
    s0_pre = bundle.s.copy()
    s0_pre[:, 1:] += impact[:, :-1]
    return ImpactedQuotePath(s0_pre=s0_pre, s0_post=s0_post)


def export_quotes_csv(bundle, quotes: ImpactedQuotePath, strategy, path) -> None:
    """Write (path, step, t, S, S0_pre, S0_post, X) rows."""
    import csv

    x = positions_2d(getattr(strategy, "x", strategy), bundle.n_paths, bundle.n_nodes)
    times = bundle.grid.times()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "step", "t", "S", "S0_pre", "S0_post", "X"])
        for p in range(bundle.n_paths):
            for k in range(bundle.n_nodes):
                writer.writerow([
                    p, k, format(times[k], ".17g"),
                    format(bundle.s[p, k], ".17g"),
                    format(quotes.s0_pre[p, k], ".17g"),
                    format(quotes.s0_post[p, k], ".17g"),
                    format(x[p, k], ".17g"),
                ])
