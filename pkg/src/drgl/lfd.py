"""Least-favorable-distribution solver.

Per mini-set, the adversary redistributes each class's empirical mass inside
a Wasserstein ball to make the classes as confusable as possible. With the
empirical weights phat_m over s support points and a transport cost matrix C,
the worst case solves the linear program

    min  sum_i t_i                                  (total margin)
    s.t. t_i >= p_m[i]                              for all m, i
         sum_j gamma_m[i, j] = p_m[i]               LFD marginal
         sum_i gamma_m[i, j] = phat_m[j]            empirical marginal
         sum_{i,j} gamma_m[i, j] * C[i, j] <= theta_m   transport budget
         gamma_m >= 0, p_m >= 0

The optimal value, the total margin, lies in [1, M]; M minus the margin is
the worst-case classification risk. The budget duals lambda_m feed the
envelope gradients in grad.py.

The LP always admits the diagonal plan gamma_m = diag(phat_m), so the solver
starts from that basis directly and never needs a feasibility phase.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass

import numpy as np

from .simplex import LpResult, SimplexError, solve_lp

COST_EUCLIDEAN = "euclidean"
COST_SQUARED = "squared_euclidean"
RADIUS_ABSOLUTE = "absolute"
RADIUS_MEDIAN_FRACTION = "median_fraction"


class LfdSolverError(RuntimeError):
    """LP solve failed; the offending instance is dumped to dump_path."""

    def __init__(self, message: str, dump_path: str | None = None):
        super().__init__(message)
        self.dump_path = dump_path


@dataclass(frozen=True)
class DroConfig:
    """Uncertainty-set configuration.

    radii gives the per-class transport budgets when radius_rule is
    "absolute" (a scalar is broadcast). With "median_fraction" the budget is
    radius_fraction times the median off-diagonal cost, recomputed from each
    instance so it stays meaningful as embeddings move during training.
    """

    radii: object = None
    cost_kind: str = COST_EUCLIDEAN
    solver_tolerance: float = 1e-9
    radius_rule: str = RADIUS_MEDIAN_FRACTION
    radius_fraction: float = 0.1

    def __post_init__(self):
        if self.cost_kind not in (COST_EUCLIDEAN, COST_SQUARED):
            raise ValueError(f"unknown cost_kind {self.cost_kind!r}")
        if self.radius_rule not in (RADIUS_ABSOLUTE, RADIUS_MEDIAN_FRACTION):
            raise ValueError(f"unknown radius_rule {self.radius_rule!r}")
        if self.solver_tolerance <= 0:
            raise ValueError("solver_tolerance must be > 0")
        if self.radius_fraction < 0:
            raise ValueError("radius_fraction must be >= 0")
        if self.radii is not None:
            r = np.atleast_1d(np.asarray(self.radii, dtype=np.float64))
            if (r < 0).any():
                raise ValueError("radii must be >= 0")


@dataclass
class MiniSet:
    """A batch of labelled support points; must cover every class."""

    support: np.ndarray
    labels: np.ndarray
    repaired: tuple = ()

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.support.shape != self.labels.shape or self.support.ndim != 1:
            raise ValueError("support and labels must be 1-d arrays of equal length")

    @property
    def size(self) -> int:
        return int(self.support.size)

    def validate(self, M: int) -> None:
        present = set(int(y) for y in self.labels)
        missing = sorted(set(range(M)) - present)
        if missing:
            raise ValueError(f"mini-set misses class {missing[0]}")


@dataclass
class EmpiricalDistribution:
    """Per-class Dirac weights over the mini-set support.

    weights[m, i] is 1/count(class m) when labels[i] == m, else 0; each row
    sums to one.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise ValueError("weights must be an (M, s) matrix")
        if (w < 0).any():
            raise ValueError("empirical weights must be nonnegative")
        if not np.allclose(w.sum(axis=1), 1.0, atol=1e-12, rtol=0):
            raise ValueError("each empirical distribution must sum to 1")
        self.weights = w

    @property
    def M(self) -> int:
        return self.weights.shape[0]

    @property
    def s(self) -> int:
        return self.weights.shape[1]


@dataclass
class LfdSolution:
    """Primal-dual output of one least-favorable-distribution solve.

    weights[m]  LFD mass over support points (rows of the transport plan)
    plans[m]    transport plan; axis 0 marginal is the LFD, axis 1 the
                empirical distribution
    duals[m]    nonnegative multiplier of class m's transport budget
    radii[m]    budget actually used (resolved from the config)
    """

    weights: np.ndarray
    plans: np.ndarray
    duals: np.ndarray
    radii: np.ndarray
    total_margin: float
    worst_case_risk: float
    basis: tuple
    iterations: int


def pairwise_costs(xi: np.ndarray, cost_kind: str = COST_EUCLIDEAN) -> np.ndarray:
    """Symmetric zero-diagonal transport costs between support embeddings."""
    xi = np.asarray(xi, dtype=np.float64)
    if not np.isfinite(xi).all():
        raise ValueError("non-finite embedding in cost computation")
    diff = xi[:, None, :] - xi[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    if cost_kind == COST_SQUARED:
        return sq
    if cost_kind == COST_EUCLIDEAN:
        return np.sqrt(sq)
    raise ValueError(f"unknown cost_kind {cost_kind!r}")


def empirical_distributions(ms: MiniSet, M: int) -> EmpiricalDistribution:
    """Uniform Dirac weights per class over the mini-set support."""
    counts = np.bincount(ms.labels, minlength=M)
    if ms.labels.size and (ms.labels.min() < 0 or ms.labels.max() >= M):
        raise ValueError("mini-set label outside [0, M)")
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise ValueError(f"mini-set misses class {int(empty[0])}")
    w = np.zeros((M, ms.size))
    w[ms.labels, np.arange(ms.size)] = 1.0 / counts[ms.labels]
    return EmpiricalDistribution(weights=w)


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    """Total variation distance (1/2) sum |p - q| between weight vectors."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if not (np.isclose(p.sum(), 1.0, atol=1e-9) and np.isclose(q.sum(), 1.0, atol=1e-9)):
        raise ValueError("total_variation expects probability vectors")
    return 0.5 * float(np.abs(p - q).sum())


def resolve_radii(C: np.ndarray, cfg: DroConfig, M: int) -> np.ndarray:
    """Per-class transport budgets for this cost matrix under cfg."""
    if cfg.radius_rule == RADIUS_ABSOLUTE:
        if cfg.radii is None:
            raise ValueError("radius_rule 'absolute' needs explicit radii")
        r = np.atleast_1d(np.asarray(cfg.radii, dtype=np.float64))
        if r.size == 1:
            r = np.full(M, float(r[0]))
        if r.size != M:
            raise ValueError(f"expected {M} radii, got {r.size}")
        return r
    s = C.shape[0]
    if s < 2:
        return np.zeros(M)
    off = C[~np.eye(s, dtype=bool)]
    return np.full(M, cfg.radius_fraction * float(np.median(off)))


def _check_cost_matrix(C: np.ndarray) -> np.ndarray:
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("cost matrix must be square")
    if not np.isfinite(C).all():
        raise ValueError("non-finite cost")
    if (C < 0).any():
        raise ValueError("costs must be nonnegative")
    if np.abs(np.diag(C)).max(initial=0.0) > 0:
        raise ValueError("cost diagonal must be zero")
    if not np.array_equal(C, C.T):
        if not np.allclose(C, C.T, atol=1e-9, rtol=0):
            raise ValueError("cost matrix must be symmetric")
        C = 0.5 * (C + C.T)
    return C


def _crash_basis(phat: np.ndarray, M: int, s: int) -> list:
    """Feasible starting basis at the diagonal transport plan.

    Basic columns: gamma_m[j, j], all p_m, all t, every budget slack, and the
    cap slack of every (m, i) except the per-point argmax class. The basis
    matrix is block-triangular, hence always nonsingular.
    """
    n_gamma = M * s * s
    cols = []
    for m in range(M):
        cols.extend(m * s * s + np.arange(s) * s + np.arange(s))  # gamma diag
    cols.extend(n_gamma + np.arange(M * s))                       # p block
    cols.extend(n_gamma + M * s + np.arange(s))                   # t block
    n_var = n_gamma + M * s + s
    cols.extend(n_var + np.arange(M))                             # budget slacks
    arg = phat.argmax(axis=0)                                     # m*(i)
    for m in range(M):
        for i in range(s):
            if m != arg[i]:
                cols.append(n_var + M + m * s + i)                # cap slacks
    return [int(j) for j in cols]


def _dump_instance(C, phat, radii, exc: SimplexError) -> str:
    fd, path = tempfile.mkstemp(prefix="lfd-failure-", suffix=".txt")
    with open(fd, "w", encoding="utf-8") as f:
        f.write(f"status: {exc.status}\nmessage: {exc}\n")
        f.write(f"radii: {radii.tolist()}\n")
        f.write("cost matrix C:\n")
        np.savetxt(f, C)
        f.write("empirical weights phat:\n")
        np.savetxt(f, phat)
        f.write("trace:\n")
        for line in exc.trace:
            f.write(f"  {line}\n")
    return path


def solve_lfd(C: np.ndarray, phat: EmpiricalDistribution, cfg: DroConfig) -> LfdSolution:
    """Solve the least-favorable-distribution LP for one mini-set.

    Returns the per-class LFD weights, transport plans and budget duals,
    the total margin (LP objective) and the worst-case risk M - margin.
    """
    C = _check_cost_matrix(C)
    M, s = phat.M, phat.s
    if C.shape[0] != s:
        raise ValueError(f"cost matrix size {C.shape[0]} != support size {s}")
    radii = resolve_radii(C, cfg, M)

    n_gamma = M * s * s
    n_var = n_gamma + M * s + s
    c = np.zeros(n_var)
    c[n_gamma + M * s:] = 1.0                       # minimize sum of t

    A_eq = np.zeros((2 * M * s, n_var))
    b_eq = np.zeros(2 * M * s)
    for m in range(M):
        for j in range(s):
            A_eq[m * s + j, m * s * s + np.arange(s) * s + j] = 1.0
        b_eq[m * s: (m + 1) * s] = phat.weights[m]
        for i in range(s):
            row = M * s + m * s + i
            A_eq[row, m * s * s + i * s + np.arange(s)] = 1.0
            A_eq[row, n_gamma + m * s + i] = -1.0

    A_ub = np.zeros((M + M * s, n_var))
    b_ub = np.zeros(M + M * s)
    flat_C = C.ravel()
    for m in range(M):
        A_ub[m, m * s * s: (m + 1) * s * s] = flat_C
        b_ub[m] = radii[m]
        for i in range(s):
            row = M + m * s + i
            A_ub[row, n_gamma + m * s + i] = 1.0
            A_ub[row, n_gamma + M * s + i] = -1.0

    try:
        res: LpResult = solve_lp(
            c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub,
            tol=cfg.solver_tolerance,
            basis=_crash_basis(phat.weights, M, s),
        )
    except SimplexError as exc:
        path = _dump_instance(C, phat.weights, radii, exc)
        raise LfdSolverError(
            f"LFD solve failed ({exc.status}); instance dumped to {path}", path
        ) from exc

    gamma = res.x[:n_gamma].reshape(M, s, s)
    p = res.x[n_gamma: n_gamma + M * s].reshape(M, s)
    if gamma.min(initial=0.0) < -1e-8 or p.min(initial=0.0) < -1e-8:
        raise LfdSolverError("solver returned a materially negative mass")
    gamma = np.maximum(gamma, 0.0)
    p = np.maximum(p, 0.0)

    lam = -res.duals_ub[:M]
    if lam.min(initial=0.0) < -1e-6:
        raise LfdSolverError(f"budget dual has wrong sign: {lam.min():.3e}")
    lam = np.maximum(lam, 0.0)

    margin = float(res.objective)
    _validate_solution(C, phat.weights, radii, gamma, p, margin, M)
    return LfdSolution(
        weights=p,
        plans=gamma,
        duals=lam,
        radii=radii,
        total_margin=margin,
        worst_case_risk=float(M) - margin,
        basis=res.basis,
        iterations=res.iterations,
    )


def _validate_solution(C, phat_w, radii, gamma, p, margin, M, atol=1e-6):
    emp_marginal = gamma.sum(axis=1)
    if np.abs(emp_marginal - phat_w).max() > atol:
        raise LfdSolverError("transport plan violates the empirical marginal")
    lfd_marginal = gamma.sum(axis=2)
    if np.abs(lfd_marginal - p).max() > atol:
        raise LfdSolverError("transport plan violates the LFD marginal")
    transport = np.einsum("mij,ij->m", gamma, C)
    if (transport > radii + atol).any():
        raise LfdSolverError("transport plan exceeds its budget")
    if np.abs(p.sum(axis=1) - 1.0).max() > atol:
        raise LfdSolverError("an LFD does not sum to one")
    if not (1.0 - atol) <= margin <= (M + atol):
        raise LfdSolverError(f"total margin {margin} outside [1, M]")
    direct = float(p.max(axis=0).sum())
    if abs(direct - margin) > 1e-7 * max(1.0, abs(margin)):
        raise LfdSolverError(
            f"objective {margin} inconsistent with sum of pointwise maxima {direct}"
        )
