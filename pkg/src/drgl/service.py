"""FastAPI service wrapping the core package.

Endpoints cover dataset inspection, a direct least-favorable-distribution
solve, encoder training, experiment evaluation and sweeps, 2-D embedding
export, and a dependency-free self-test. The CLI talks to this app in
process; `uvicorn drgl.service:app` serves it over the network.
"""

from __future__ import annotations

import base64

import numpy as np
from fastapi import FastAPI, HTTPException

from . import __version__
from .classify import entropy
from .encoder import backward, forward, init_encoder
from .experiments import (
    ConfigError,
    run_experiment_artifacts,
    run_sweep,
    run_train,
    run_viz,
)
from .graph import DatasetFormatError, feature_std, load_graph
from .grad import grad_margin_wrt_costs, grad_margin_wrt_embeddings
from .lfd import (
    DroConfig,
    LfdSolverError,
    MiniSet,
    empirical_distributions,
    pairwise_costs,
    solve_lfd,
    total_variation,
)
from .schemas import (
    ExperimentModel,
    HealthResponse,
    InspectRequest,
    InspectResponse,
    LfdRequest,
    LfdResponse,
    RunResponse,
    SelftestCheck,
    SelftestResponse,
    SweepModel,
    TableRowModel,
)

app = FastAPI(
    title="drgl",
    version=__version__,
    description="Distributionally robust graph learning service",
)


def _config_error(exc: Exception) -> HTTPException:
    return HTTPException(status_code=400,
                         detail={"code": "config_error", "message": str(exc)})


def _solver_error(exc: LfdSolverError) -> HTTPException:
    return HTTPException(status_code=500,
                         detail={"code": "solver_failure", "message": str(exc),
                                 "dump_path": exc.dump_path})


def _run_response(artifacts) -> RunResponse:
    rows = [TableRowModel(model=r.model, classifier=r.classifier, noise=r.noise,
                          accuracies=[float(a) for a in r.accuracies], mean=r.mean)
            for r in artifacts.table.rows]
    ckpt = (base64.b64encode(artifacts.checkpoint).decode("ascii")
            if artifacts.checkpoint else None)
    return RunResponse(table=rows, report_lines=artifacts.report_lines,
                       timing_lines=artifacts.timing_lines,
                       checkpoint_b64=ckpt, viz_csv=artifacts.viz_csv)


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/datasets/inspect", response_model=InspectResponse)
def inspect_dataset(req: InspectRequest) -> InspectResponse:
    try:
        g, labels = load_graph(req.path)
    except DatasetFormatError as exc:
        raise _config_error(exc)
    return InspectResponse(
        name=g.name, n=g.n, d=g.d, M=labels.M,
        undirected_pairs=g.undirected_pairs, directed_edges=g.directed_edges,
        feature_std=feature_std(g) if g.n * g.d >= 2 else 0.0,
        observed=len(labels.observed), unobserved=len(labels.unobserved),
        test=len(labels.test),
    )


@app.post("/solver/lfd", response_model=LfdResponse)
def solve_lfd_endpoint(req: LfdRequest) -> LfdResponse:
    xi = np.asarray(req.embeddings, dtype=np.float64)
    labels = np.asarray(req.labels, dtype=np.int64)
    if xi.ndim != 2 or labels.ndim != 1 or xi.shape[0] != labels.size:
        raise _config_error(ValueError("embeddings and labels shapes disagree"))
    M = req.M if req.M is not None else int(labels.max()) + 1
    cfg = req.dro.to_config()
    try:
        ms = MiniSet(support=np.arange(xi.shape[0]), labels=labels)
        phat = empirical_distributions(ms, M)
        C = pairwise_costs(xi, cfg.cost_kind)
        sol = solve_lfd(C, phat, cfg)
    except (ValueError, ConfigError) as exc:
        raise _config_error(exc)
    except LfdSolverError as exc:
        raise _solver_error(exc)
    resp = LfdResponse(
        total_margin=sol.total_margin,
        worst_case_risk=sol.worst_case_risk,
        weights=sol.weights.tolist(),
        plans=sol.plans.tolist(),
        duals=sol.duals.tolist(),
        radii=sol.radii.tolist(),
    )
    if req.return_gradients:
        resp.cost_gradients = grad_margin_wrt_costs(sol).tolist()
        resp.embedding_gradient = grad_margin_wrt_embeddings(
            sol, xi, cfg.cost_kind).dJ_dxi.tolist()
    return resp


@app.post("/train", response_model=RunResponse)
def train_endpoint(req: ExperimentModel) -> RunResponse:
    try:
        return _run_response(run_train(req.to_config()))
    except (DatasetFormatError, ConfigError, ValueError) as exc:
        raise _config_error(exc)
    except LfdSolverError as exc:
        raise _solver_error(exc)


@app.post("/experiments/eval", response_model=RunResponse)
def eval_endpoint(req: ExperimentModel) -> RunResponse:
    try:
        return _run_response(run_experiment_artifacts(req.to_config()))
    except (DatasetFormatError, ConfigError, ValueError) as exc:
        raise _config_error(exc)
    except LfdSolverError as exc:
        raise _solver_error(exc)


@app.post("/experiments/sweep", response_model=RunResponse)
def sweep_endpoint(req: SweepModel) -> RunResponse:
    grid = [m.to_spec() for m in req.sweep.noise_grid] or [req.noise.to_spec()]
    modes = list(req.sweep.modes) or [req.mode]
    try:
        return _run_response(run_sweep(req.to_config(), grid, modes))
    except (DatasetFormatError, ConfigError, ValueError) as exc:
        raise _config_error(exc)
    except LfdSolverError as exc:
        raise _solver_error(exc)


@app.post("/viz", response_model=RunResponse)
def viz_endpoint(req: ExperimentModel) -> RunResponse:
    try:
        return _run_response(run_viz(req.to_config()))
    except (DatasetFormatError, ConfigError, ValueError) as exc:
        raise _config_error(exc)
    except LfdSolverError as exc:
        raise _solver_error(exc)


def _selftest_checks() -> list[SelftestCheck]:
    checks: list[SelftestCheck] = []

    def record(name, passed, detail=""):
        checks.append(SelftestCheck(name=name, passed=bool(passed), detail=detail))

    rng = np.random.default_rng(0)

    # zero-budget solves must reproduce the empirical distributions
    worst = 0.0
    for _ in range(5):
        s = int(rng.integers(3, 7))
        xi = rng.normal(size=(s, 3))
        labels = np.concatenate([[0, 1], rng.integers(0, 2, size=s - 2)])
        phat = empirical_distributions(MiniSet(support=np.arange(s), labels=labels), 2)
        sol = solve_lfd(pairwise_costs(xi), phat,
                        DroConfig(radii=0.0, radius_rule="absolute"))
        worst = max(worst, float(np.abs(sol.weights - phat.weights).max()))
        tv = total_variation(phat.weights[0], phat.weights[1])
        worst = max(worst, abs(sol.total_margin - (1.0 + tv)))
    record("zero_budget_identity", worst <= 1e-10, f"max deviation {worst:.2e}")

    # margins shrink as the budget grows and bottom out at one
    xi = rng.normal(size=(5, 3))
    labels = np.array([0, 1, 0, 1, 0])
    phat = empirical_distributions(MiniSet(support=np.arange(5), labels=labels), 2)
    C = pairwise_costs(xi)
    margins = [solve_lfd(C, phat, DroConfig(radii=float(r), radius_rule="absolute")).total_margin
               for r in np.linspace(0, C.max() * 1.1, 8)]
    mono = all(b <= a + 1e-7 for a, b in zip(margins, margins[1:]))
    record("margin_monotone_and_saturates",
           mono and abs(margins[-1] - 1.0) <= 1e-6,
           f"margins {['%.4f' % m for m in margins]}")

    # encoder gradients are linear in the upstream signal
    from .graph import Graph, normalize_adjacency
    g = Graph(n=5, d=3, features=rng.normal(size=(5, 3)).astype(np.float32),
              edges=[(0, 1), (1, 2), (2, 3), (3, 4)])
    a_hat = normalize_adjacency(g)
    params = init_encoder(3, 4, 2, seed=1)
    ga = rng.normal(size=(5, 2))
    out1 = backward(params, forward(params, a_hat, g.features)[1], ga)
    out2 = backward(params, forward(params, a_hat, g.features)[1], 2.0 * ga)
    lin = np.abs(out2.dW1 - 2 * out1.dW1).max()
    record("encoder_backward_linear", lin <= 1e-10, f"max deviation {lin:.2e}")

    # entropy contracts
    h_onehot = entropy([1.0, 0.0, 0.0])
    h_uniform = entropy([0.25] * 4)
    record("entropy_contracts",
           h_onehot == 0.0 and abs(h_uniform - np.log(4)) <= 1e-12,
           f"onehot {h_onehot}, uniform gap {abs(h_uniform - np.log(4)):.2e}")

    # deterministic replay of a tiny training run
    from .synthetic import sbm_graph
    from .training import TrainConfig, train
    g2, l2 = sbm_graph(n=30, classes=2, p_intra=0.25, p_inter=0.03,
                       feature_dim=4, feature_shift=1.0, seed=3)
    enc = init_encoder(4, 8, 4, seed=4)
    cfg = TrainConfig(learning_rate=1e-3, epochs=3, seed=5,
                      dro=DroConfig(radius_fraction=0.3))
    p1, r1 = train(g2, l2, enc, cfg)
    p2, r2 = train(g2, l2, enc, cfg)
    same = (np.array_equal(p1.W1, p2.W1)
            and r1.epochs[-1].mean_total_margin == r2.epochs[-1].mean_total_margin)
    record("training_deterministic", same, "two replays compared")
    return checks


@app.post("/selftest", response_model=SelftestResponse)
def selftest_endpoint() -> SelftestResponse:
    checks = _selftest_checks()
    return SelftestResponse(passed=all(c.passed for c in checks), checks=checks)
