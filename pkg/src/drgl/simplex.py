"""Dense revised simplex for small linear programs, with exact basic duals.

Solves

    min  c @ x
    s.t. A_eq @ x == b_eq
         A_ub @ x <= b_ub
         x >= 0

by the revised simplex method on the slack-extended standard form. The basis
inverse is held explicitly and refreshed periodically; pricing uses Dantzig's
rule and switches to Bland's rule during runs of degenerate pivots, which
keeps the method finite without paying Bland's slow pace everywhere.

Returned duals follow the value-function convention: duals_eq[i] and
duals_ub[i] are d(objective)/d(b_i), so a binding <= row of a minimization
has a nonpositive dual.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_REFACTOR_EVERY = 64
_BLAND_AFTER = 12          # consecutive degenerate pivots before Bland kicks in
_DEGENERATE_STEP = 1e-12


class SimplexError(RuntimeError):
    """Solve failed: infeasible, unbounded, or out of iterations."""

    def __init__(self, message: str, status: str, trace: list | None = None):
        super().__init__(message)
        self.status = status
        self.trace = trace or []


@dataclass
class LpResult:
    x: np.ndarray
    objective: float
    duals_eq: np.ndarray
    duals_ub: np.ndarray
    basis: tuple
    iterations: int
    trace: list = field(default_factory=list)


def _pivot_update(B_inv, x_B, d, r, theta):
    piv = d[r]
    row = B_inv[r] / piv
    x_B -= theta * d
    x_B[r] = theta
    B_inv -= np.outer(d, row)
    B_inv[r] = row
    np.maximum(x_B, 0.0, out=x_B, where=np.abs(x_B) < 1e-13)


def _iterate(A, b, c, basis, B_inv, enterable, tol, max_iter, trace):
    """Run simplex pivots until optimality. Mutates basis and B_inv."""
    m, n = A.shape
    x_B = B_inv @ b
    in_basis = np.zeros(n, dtype=bool)
    in_basis[basis] = True
    c = np.asarray(c, dtype=np.float64)
    bland = False
    degenerate_streak = 0
    it = 0
    while True:
        if it and it % _REFACTOR_EVERY == 0:
            B_inv[:] = np.linalg.inv(A[:, basis])
            x_B = B_inv @ b
            np.maximum(x_B, 0.0, out=x_B, where=np.abs(x_B) < 1e-11)
        y = c[basis] @ B_inv
        reduced = c - y @ A
        candidates = (~in_basis) & enterable & (reduced < -tol)
        if not candidates.any():
            return x_B, it
        if bland:
            j = int(np.flatnonzero(candidates)[0])
        else:
            idx = np.flatnonzero(candidates)
            j = int(idx[np.argmin(reduced[idx])])
        d = B_inv @ A[:, j]
        pos = d > 1e-10
        if not pos.any():
            raise SimplexError("objective unbounded below", "unbounded", trace)
        ratios = np.full(m, np.inf)
        ratios[pos] = x_B[pos] / d[pos]
        theta = ratios.min()
        ties = np.flatnonzero(np.abs(ratios - theta) <= 1e-12 * (1.0 + theta))
        # leaving tie-break: smallest basic variable index (Bland-compatible)
        r = int(ties[np.argmin(np.asarray(basis)[ties])])
        theta = max(theta, 0.0)
        in_basis[basis[r]] = False
        in_basis[j] = True
        _pivot_update(B_inv, x_B, d, r, theta)
        basis[r] = j
        if theta <= _DEGENERATE_STEP:
            degenerate_streak += 1
            if degenerate_streak >= _BLAND_AFTER:
                bland = True
        else:
            degenerate_streak = 0
            bland = False
        it += 1
        if it >= max_iter:
            trace.append(f"iteration limit {max_iter} reached")
            raise SimplexError(
                f"simplex did not converge within {max_iter} iterations",
                "iteration_limit", trace,
            )


def _drive_out_artificials(A, b, basis, B_inv, n_real, trace):
    """Pivot basic artificials out, dropping redundant rows where needed.

    Returns the reduced system plus the surviving original row indices.
    """
    keep_rows = np.ones(A.shape[0], dtype=bool)
    basic_set = set(basis)
    for r in range(A.shape[0]):
        if basis[r] < n_real:
            continue
        row = B_inv[r] @ A[:, :n_real]
        cand = [int(j) for j in np.flatnonzero(np.abs(row) > 1e-9)
                if int(j) not in basic_set]
        if cand:
            j = cand[0]
            d = B_inv @ A[:, j]
            _pivot_update(B_inv, np.zeros(A.shape[0]), d, r, 0.0)
            basic_set.discard(basis[r])
            basic_set.add(j)
            basis[r] = j
        else:
            keep_rows[r] = False
            trace.append(f"dropped redundant row {r}")
    row_index = np.flatnonzero(keep_rows)
    if keep_rows.all():
        return A, b, basis, B_inv, row_index
    A = A[keep_rows]
    b = b[keep_rows]
    basis = [basis[r] for r in range(len(keep_rows)) if keep_rows[r]]
    B_inv = np.linalg.inv(A[:, basis])
    return A, b, basis, B_inv, row_index


def solve_lp(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None, *,
             tol: float = 1e-9, max_iter: int | None = None,
             basis: list | None = None) -> LpResult:
    """Solve the LP; all variables are nonnegative.

    basis, when given, must be a list of standard-form column indices (slack
    for <= row i lives at column n + i) forming a feasible starting basis;
    the solver falls back to the two-phase method if it is unusable.
    """
    c = np.atleast_1d(np.asarray(c, dtype=np.float64))
    n = c.size
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=np.float64).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.atleast_1d(np.asarray(b_eq, dtype=np.float64))
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=np.float64).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.atleast_1d(np.asarray(b_ub, dtype=np.float64))
    m_eq, m_ub = A_eq.shape[0], A_ub.shape[0]
    m = m_eq + m_ub
    if m == 0:
        raise ValueError("LP needs at least one constraint")

    A = np.zeros((m, n + m_ub))
    A[:m_eq, :n] = A_eq
    A[m_eq:, :n] = A_ub
    A[m_eq:, n:] = np.eye(m_ub)
    b = np.concatenate([b_eq, b_ub]).astype(np.float64)
    c_full = np.concatenate([c, np.zeros(m_ub)])
    row_sign = np.ones(m)
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    row_sign[neg] = -1.0

    n_real = n + m_ub
    if max_iter is None:
        max_iter = max(2000, 80 * m)
    trace: list = []
    iterations = 0

    start_basis = None
    if basis is not None:
        cand = list(int(j) for j in basis)
        if len(cand) == m and len(set(cand)) == m and max(cand) < n_real:
            B = A[:, cand]
            try:
                B_inv = np.linalg.inv(B)
            except np.linalg.LinAlgError:
                B_inv = None
            if B_inv is not None:
                x_B = B_inv @ b
                if (x_B >= -1e-9).all():
                    start_basis = (cand, B_inv)
                else:
                    trace.append("warm basis infeasible; two-phase fallback")
            else:
                trace.append("warm basis singular; two-phase fallback")

    row_index = np.arange(m)
    if start_basis is None:
        # Phase 1: artificial identity basis, minimize artificial mass.
        A1 = np.hstack([A, np.eye(m)])
        c1 = np.concatenate([np.zeros(n_real), np.ones(m)])
        basis_l = list(range(n_real, n_real + m))
        B_inv = np.eye(m)
        enter1 = np.ones(n_real + m, dtype=bool)
        x_B, it1 = _iterate(A1, b, c1, basis_l, B_inv, enter1, tol, max_iter, trace)
        iterations += it1
        feas_gap = float(c1[basis_l] @ x_B)
        if feas_gap > 1e-7:
            raise SimplexError(
                f"infeasible: phase-1 objective {feas_gap:.3e}", "infeasible", trace
            )
        A1, b, basis_l, B_inv, row_index = _drive_out_artificials(
            A1, b, basis_l, B_inv, n_real, trace)
        A = A1[:, :n_real]
    else:
        basis_l, B_inv = start_basis

    enter2 = np.ones(n_real, dtype=bool)
    x_B, it2 = _iterate(A, b, c_full, basis_l, B_inv, enter2, tol,
                        max_iter - iterations, trace)
    iterations += it2

    x = np.zeros(n_real)
    x[basis_l] = x_B
    y = c_full[basis_l] @ B_inv
    objective = float(c_full @ x)
    # duals of dropped redundant rows are a valid subgradient choice at zero
    duals = np.zeros(m)
    duals[row_index] = y * row_sign[row_index]
    return LpResult(
        x=x[:n],
        objective=objective,
        duals_eq=duals[:m_eq],
        duals_ub=duals[m_eq:],
        basis=tuple(int(j) for j in basis_l),
        iterations=iterations,
        trace=trace,
    )
