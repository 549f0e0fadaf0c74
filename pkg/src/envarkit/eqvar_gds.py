"""Greedy conditional-variance baseline for contemporaneous structure.

Works on the reduced-form residuals: nodes are ordered greedily by minimal
conditional variance given the already-selected nodes, each node's
contemporaneous coefficients are estimated by regressing its residual on its
predecessors and pruning insignificant coefficients, and the lagged matrix is
recovered algebraically as ``a1_hat = (I - a0_hat) phi_hat``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DimensionError, RankError
from .model_core import TimeSeries, _freeze
from .reduced_estimation import OlsFit

_VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class GdsResult:
    """Inferred ordering, pruned contemporaneous matrix, and lagged matrix.

    ``ordering`` lists 0-based node indices; permuting rows and columns of
    ``a0_hat`` by it gives a strictly lower-triangular matrix.
    """

    ordering: tuple[int, ...]
    a0_hat: np.ndarray
    a1_hat: np.ndarray
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "a0_hat", _freeze(self.a0_hat))
        object.__setattr__(self, "a1_hat", _freeze(self.a1_hat))


def _conditional_variance(target: np.ndarray, predictors: np.ndarray | None) -> float:
    """Residual variance of ``target`` after projecting onto ``predictors`` rows."""
    n = target.shape[0]
    if predictors is None or predictors.shape[0] == 0:
        resid = target
    else:
        coef, *_ = np.linalg.lstsq(predictors.T, target, rcond=None)
        resid = target - predictors.T @ coef
    return float(resid @ resid) / n


def fit_eqvar_gds(ts: TimeSeries, fit: OlsFit, alpha: float = 0.05) -> GdsResult:
    """Estimate ``(ordering, a0_hat, a1_hat)`` from a fitted reduced form.

    ``alpha`` is the two-sided t-test level used to prune regression
    coefficients; ties in conditional variance break toward the smallest node
    index, making the procedure deterministic.
    """
    if not ts.centered:
        raise DimensionError("series must be centered (see center())")
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise DimensionError(f"alpha must be in (0, 1), got {alpha}")
    u = np.asarray(fit.residuals)
    p, n = u.shape
    if ts.p != p:
        raise DimensionError(f"series has {ts.p} rows but fit has {p}")

    ordering: list[int] = []
    remaining = list(range(p))
    while remaining:
        selected_rows = u[ordering] if ordering else None
        best_node = -1
        best_var = np.inf
        for node in remaining:
            cond_var = _conditional_variance(u[node], selected_rows)
            # strict < keeps the smallest node index on ties
            if cond_var < best_var:
                best_var = cond_var
                best_node = node
        if best_var <= _VARIANCE_FLOOR:
            raise RankError(
                f"conditional variance of node {best_node} is {best_var:.3e}; "
                "residuals are numerically degenerate"
            )
        ordering.append(best_node)
        remaining.remove(best_node)

    a0_hat = np.zeros((p, p))
    for position in range(1, p):
        node = ordering[position]
        parents = ordering[:position]
        x = u[parents].T
        target = u[node]
        coef, *_ = np.linalg.lstsq(x, target, rcond=None)
        resid = target - x @ coef
        df = n - position - 1
        if df < 1:
            raise RankError(f"too few residual samples (n={n}) for {position} regressors")
        s2 = float(resid @ resid) / df
        gram_inv = np.linalg.pinv(x.T @ x)
        se = np.sqrt(np.maximum(s2 * np.diag(gram_inv), 0.0))
        for j, parent in enumerate(parents):
            if se[j] <= 0.0:
                continue
            t_stat = coef[j] / se[j]
            p_value = 2.0 * stats.t.sf(abs(t_stat), df)
            if p_value < alpha:
                a0_hat[node, parent] = coef[j]

    a1_hat = (np.eye(p) - a0_hat) @ fit.phi_hat
    return GdsResult(
        ordering=tuple(ordering), a0_hat=a0_hat, a1_hat=a1_hat, alpha=alpha
    )
