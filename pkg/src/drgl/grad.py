"""Envelope gradients of the total margin through the transport LP.

The training loss is the LP optimal value, so by Danskin's theorem its
sensitivity to a cost entry is the budget dual times the optimal plan mass on
that entry: d(margin)/dC[i, j] = sum_m lambda_m * gamma_m[i, j]. Chaining
through the cost function gives the gradient with respect to the support
embeddings. At degenerate bases the returned quantity is a valid subgradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lfd import COST_EUCLIDEAN, COST_SQUARED, LfdSolution, pairwise_costs

_EUCLIDEAN_EPS = 1e-9


@dataclass
class MarginGradient:
    """d(total margin)/d(xi) for each support embedding coordinate."""

    dJ_dxi: np.ndarray


def grad_margin_wrt_costs(sol: LfdSolution) -> np.ndarray:
    """Per-class (s, s) matrices lambda_m * gamma_m; all entries >= 0."""
    return sol.duals[:, None, None] * sol.plans


def grad_margin_wrt_embeddings(sol: LfdSolution, xi: np.ndarray,
                               cost_kind: str = COST_EUCLIDEAN) -> MarginGradient:
    """Chain the cost-space gradient through the pairwise cost function.

    For the squared cost, dC[i,j]/dxi_i = 2(xi_i - xi_j); for the euclidean
    cost, (xi_i - xi_j)/C[i,j], defined as zero at coincident points (the
    norm's subdifferential at zero contains zero).
    """
    xi = np.asarray(xi, dtype=np.float64)
    G = grad_margin_wrt_costs(sol).sum(axis=0)
    S = G + G.T                      # C is used symmetrically in xi
    if cost_kind == COST_SQUARED:
        row_mass = S.sum(axis=1)
        grad = 2.0 * (row_mass[:, None] * xi - S @ xi)
    elif cost_kind == COST_EUCLIDEAN:
        C = pairwise_costs(xi, COST_EUCLIDEAN)
        W = np.where(C > _EUCLIDEAN_EPS, S / np.where(C > _EUCLIDEAN_EPS, C, 1.0), 0.0)
        row_mass = W.sum(axis=1)
        grad = row_mass[:, None] * xi - W @ xi
    else:
        raise ValueError(f"unknown cost_kind {cost_kind!r}")
    if not np.isfinite(grad).all():
        raise FloatingPointError("non-finite margin gradient")
    return MarginGradient(dJ_dxi=grad)
