"""Experiment orchestration: repeated corrupted-graph runs and their reports.

One experiment fixes (dataset, noise level, training mode, classifier) and
averages test accuracy over repetitions. Repetition r derives every random
stream from base_seed + r, so a config replays byte-identically; noise is
resampled per repetition from that seed. All deterministic outputs live in
the report line records; wall-clock timings are kept in a separate stream so
reports stay reproducible.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .classify import (
    PredictionSet,
    entropy_rows,
    kde_lfd_predict,
    knn_predict,
    label_propagation,
    train_softmax_head,
)
from .encoder import checkpoint_bytes, forward, init_encoder
from .graph import Graph, LabelSet, load_graph, normalize_adjacency
from .lfd import MiniSet, empirical_distributions, pairwise_costs, solve_lfd
from .noise import NoiseSpec, add_feature_noise, remove_edges
from .rng import derive_seed, stream
from .training import TrainConfig, train

MODES = ("vanilla", "drgl")
CLASSIFIERS = ("softmax", "knn", "kde", "label_propagation")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class EncoderConfig:
    hidden: int = 16
    embedding: int = 16
    dropout: float = 0.5


@dataclass(frozen=True)
class ClassifierConfig:
    kind: str = "softmax"
    head_epochs: int = 500
    head_lr: float = 1e-2
    head_hidden: int = 16
    k: int = 5
    bandwidth: float | None = None
    iterations: int = 50

    def __post_init__(self):
        if self.kind not in CLASSIFIERS:
            raise ConfigError(f"unknown classifier {self.kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    shots: int = 5
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    repetitions: int = 3
    base_seed: int = 0
    mode: str = "drgl"

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.shots < 1:
            raise ConfigError("shots must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")


@dataclass
class ResultRow:
    model: str
    classifier: str
    noise: str
    accuracies: list

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)


@dataclass
class RunArtifacts:
    table: ResultTable
    report_lines: list
    timing_lines: list
    checkpoint: bytes | None = None
    viz_csv: str | None = None


def noise_label(spec: NoiseSpec) -> str:
    return f"sigma={spec.sigma_multiplier:g}sd,drop={spec.edge_removal_rate:g}"


def few_shot_labels(labels: LabelSet, shots: int, seed: int) -> LabelSet:
    """Sample shots observed nodes per class; the rest become unobserved."""
    pools: dict = {}
    for node, y in sorted(labels.observed):
        pools.setdefault(y, []).append(node)
    rng = stream(seed, "fewshot")
    chosen = []
    for c in range(labels.M):
        pool = pools.get(c, [])
        if len(pool) < shots:
            raise ConfigError(
                f"class {c} has only {len(pool)} observed nodes, need {shots}"
            )
        pick = rng.choice(len(pool), size=shots, replace=False)
        chosen.extend((pool[j], c) for j in sorted(pick))
    chosen_nodes = {i for i, _ in chosen}
    test = list(labels.test)
    unobserved = [i for i in labels.known_labels
                  if i not in chosen_nodes and i not in set(test)]
    out = LabelSet(M=labels.M, observed=sorted(chosen), unobserved=sorted(unobserved),
                   test=test, known_labels=labels.known_labels)
    return out


def corrupt(g: Graph, spec: NoiseSpec, rep_seed: int) -> Graph:
    """Apply feature noise then edge removal with repetition-derived seeds."""
    eff = NoiseSpec(sigma_multiplier=spec.sigma_multiplier,
                    edge_removal_rate=spec.edge_removal_rate,
                    seed=derive_seed(rep_seed, "noise", spec.seed))
    out = add_feature_noise(g, eff)
    return remove_edges(out, eff)


def _classify_all(kind, cfg: ClassifierConfig, a_hat, emb_matrix, run_labels,
                  train_cfg: TrainConfig, seed: int) -> PredictionSet:
    """Probabilities for every node; callers slice the rows they need."""
    obs = np.array(run_labels.observed_nodes, dtype=np.int64)
    y_obs = np.array([y for _, y in run_labels.observed], dtype=np.int64)
    if kind == "softmax":
        head = train_softmax_head(emb_matrix, run_labels, epochs=cfg.head_epochs,
                                  lr=cfg.head_lr, seed=seed, hidden=cfg.head_hidden)
        return head.predict(emb_matrix)
    if kind == "knn":
        k = min(cfg.k, obs.size)
        return knn_predict(emb_matrix[obs], y_obs, emb_matrix, k=k, M=run_labels.M)
    if kind == "kde":
        ms = MiniSet(support=obs, labels=y_obs)
        phat = empirical_distributions(ms, run_labels.M)
        C = pairwise_costs(emb_matrix[obs], train_cfg.dro.cost_kind)
        sol = solve_lfd(C, phat, train_cfg.dro)
        return kde_lfd_predict(sol, emb_matrix[obs], emb_matrix,
                               bandwidth=cfg.bandwidth)
    if kind == "label_propagation":
        return label_propagation(a_hat, run_labels, iterations=cfg.iterations)
    raise ConfigError(f"unknown classifier {kind!r}")


def run_repetition(g: Graph, labels: LabelSet, cfg: ExperimentConfig, rep: int):
    """One corrupted, sampled, trained, classified repetition."""
    rep_seed = cfg.base_seed + rep
    run_labels = few_shot_labels(labels, cfg.shots, rep_seed)
    noisy = corrupt(g, cfg.noise, rep_seed)
    enc = init_encoder(noisy.d, cfg.encoder.hidden, cfg.encoder.embedding,
                       seed=derive_seed(rep_seed, "encoder-init"),
                       dropout_rate=cfg.encoder.dropout)
    epoch_lines: list = []
    timing_lines: list = []
    if cfg.mode == "drgl":
        train_cfg = dataclasses.replace(cfg.train, seed=derive_seed(rep_seed, "train"))
        params, report = train(noisy, run_labels, enc, train_cfg)
        for e in report.epochs:
            epoch_lines.append({
                "record": "epoch", "rep": rep, "epoch": e.epoch,
                "mean_total_margin": e.mean_total_margin,
                "mean_worst_case_risk": e.mean_worst_case_risk,
                "grad_norm": e.grad_norm, "repaired": e.repaired,
            })
            timing_lines.append({"record": "epoch_time", "rep": rep,
                                 "epoch": e.epoch, "wall_clock_s": e.wall_clock_s})
        replicated = list(report.replicated_nodes)
    else:
        params, replicated = enc, []
    a_hat = normalize_adjacency(noisy)
    emb, _ = forward(params, a_hat, noisy.features, training=False)
    preds = _classify_all(cfg.classifier.kind, cfg.classifier, a_hat, emb.matrix,
                          run_labels, cfg.train, seed=derive_seed(rep_seed, "classifier"))
    test = np.array(run_labels.test, dtype=np.int64)
    test_preds = PredictionSet(nodes=test, probs=preds.probs[test],
                               flagged=tuple(i for i in preds.flagged if i in set(test.tolist())))
    truth = {i: run_labels.known_labels[i] for i in run_labels.test}
    accuracy = test_preds.accuracy(truth)
    run_line = {
        "record": "run", "rep": rep, "seed": rep_seed, "mode": cfg.mode,
        "classifier": cfg.classifier.kind, "noise": noise_label(cfg.noise),
        "accuracy": accuracy, "replicated": replicated,
    }
    return accuracy, epoch_lines, timing_lines, run_line, params, emb, preds, run_labels


def run_experiment_artifacts(cfg: ExperimentConfig, graph_and_labels=None) -> RunArtifacts:
    g, labels = graph_and_labels if graph_and_labels else load_graph(cfg.dataset)
    report_lines = [{
        "record": "run_meta", "dataset": g.name, "n": g.n, "d": g.d,
        "M": labels.M, "undirected_pairs": g.undirected_pairs,
        "directed_edges": g.directed_edges, "mode": cfg.mode,
        "classifier": cfg.classifier.kind, "noise": noise_label(cfg.noise),
        "shots": cfg.shots, "repetitions": cfg.repetitions,
        "base_seed": cfg.base_seed,
        "noise_policy": "resampled per repetition from base_seed + rep",
        "test_split": "dataset splits.json test set",
    }]
    timing_lines: list = []
    accs: list = []
    checkpoint = None
    for rep in range(cfg.repetitions):
        acc, epoch_lines, times, run_line, params, _, _, _ = run_repetition(
            g, labels, cfg, rep)
        report_lines.extend(epoch_lines)
        report_lines.append(run_line)
        timing_lines.extend(times)
        accs.append(acc)
        checkpoint = checkpoint_bytes(params)
    table = ResultTable(rows=[ResultRow(model=cfg.mode, classifier=cfg.classifier.kind,
                                        noise=noise_label(cfg.noise), accuracies=accs)])
    report_lines.append({
        "record": "summary",
        "rows": [{"model": r.model, "classifier": r.classifier, "noise": r.noise,
                  "accuracies": r.accuracies, "mean": r.mean} for r in table.rows],
    })
    return RunArtifacts(table=table, report_lines=report_lines,
                        timing_lines=timing_lines, checkpoint=checkpoint)


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    return run_experiment_artifacts(cfg).table


def run_train(cfg: ExperimentConfig) -> RunArtifacts:
    """Train one encoder (repetition 0) and return its report and checkpoint."""
    g, labels = load_graph(cfg.dataset)
    rep_seed = cfg.base_seed
    run_labels = few_shot_labels(labels, cfg.shots, rep_seed)
    noisy = corrupt(g, cfg.noise, rep_seed)
    enc = init_encoder(noisy.d, cfg.encoder.hidden, cfg.encoder.embedding,
                       seed=derive_seed(rep_seed, "encoder-init"),
                       dropout_rate=cfg.encoder.dropout)
    report_lines = [{"record": "run_meta", "dataset": g.name, "n": g.n, "d": g.d,
                     "M": labels.M, "mode": cfg.mode,
                     "noise": noise_label(cfg.noise), "shots": cfg.shots,
                     "base_seed": cfg.base_seed}]
    timing_lines: list = []
    if cfg.mode == "drgl":
        train_cfg = dataclasses.replace(cfg.train, seed=derive_seed(rep_seed, "train"))
        params, report = train(noisy, run_labels, enc, train_cfg)
        for e in report.epochs:
            report_lines.append({
                "record": "epoch", "rep": 0, "epoch": e.epoch,
                "mean_total_margin": e.mean_total_margin,
                "mean_worst_case_risk": e.mean_worst_case_risk,
                "grad_norm": e.grad_norm, "repaired": e.repaired,
            })
            timing_lines.append({"record": "epoch_time", "rep": 0,
                                 "epoch": e.epoch, "wall_clock_s": e.wall_clock_s})
    else:
        params = enc
    return RunArtifacts(table=ResultTable(rows=[]), report_lines=report_lines,
                        timing_lines=timing_lines, checkpoint=checkpoint_bytes(params))


def run_sweep(cfg: ExperimentConfig, noise_grid: list, modes: list) -> RunArtifacts:
    """Grid of (mode, noise) cells sharing the dataset, seeds, and splits."""
    g, labels = load_graph(cfg.dataset)
    rows: list = []
    report_lines: list = []
    timing_lines: list = []
    for spec in noise_grid:
        for mode in modes:
            cell = dataclasses.replace(cfg, noise=spec, mode=mode)
            art = run_experiment_artifacts(cell, graph_and_labels=(g, labels))
            rows.extend(art.table.rows)
            report_lines.extend(art.report_lines)
            timing_lines.extend(art.timing_lines)
    table = ResultTable(rows=rows)
    report_lines.append({
        "record": "sweep_summary",
        "rows": [{"model": r.model, "classifier": r.classifier, "noise": r.noise,
                  "accuracies": r.accuracies, "mean": r.mean} for r in rows],
    })
    return RunArtifacts(table=table, report_lines=report_lines,
                        timing_lines=timing_lines)


def pca_2d(x: np.ndarray):
    """Deterministic 2-component PCA with a fixed sign convention.

    Falls back to the first two raw coordinates (flagged) when the centered
    covariance has rank below two.
    """
    x = np.asarray(x, dtype=np.float64)
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / max(x.shape[0] - 1, 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    tol = max(x.shape) * np.finfo(np.float64).eps * max(evals[0], 0.0)
    rank = int((evals > max(tol, 1e-30)).sum())
    meta = {"degenerate": bool(evals[0] <= 1e-30), "fallback": rank < 2,
            "rank": rank,
            "variance_total": float(np.trace(cov)),
            "variance_kept": float(evals[:2].clip(min=0.0).sum())}
    if rank < 2:
        proj = centered[:, :2] if x.shape[1] >= 2 else np.pad(
            centered, ((0, 0), (0, 2 - x.shape[1])))
        return proj, meta
    comps = evecs[:, :2]
    for k in range(2):
        col = comps[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            comps[:, k] = -col
    return centered @ comps, meta


def export_embeddings_2d(xi, predictions: PredictionSet, labels: LabelSet):
    """Rows of plot data: projection, truth, prediction, entropy, split role.

    Returns (csv_text, meta). Projection is PCA with the sign of each
    component's first nonzero loading positive.
    """
    mat = xi.matrix if hasattr(xi, "matrix") else np.asarray(xi, dtype=np.float64)
    proj, meta = pca_2d(mat)
    roles = {}
    for i in labels.observed_nodes:
        roles[i] = "observed"
    for i in labels.test:
        roles[i] = "test"
    header = "node,x,y,true,predicted,p_predicted,entropy,role"
    lines = [header]
    probs = predictions.probs
    ent = entropy_rows(probs)
    for k, node in enumerate(predictions.nodes):
        node = int(node)
        true = labels.known_labels.get(node, -1)
        pred = int(predictions.predicted[k])
        lines.append(",".join([
            str(node),
            repr(float(proj[node, 0])), repr(float(proj[node, 1])),
            str(true), str(pred),
            repr(float(probs[k, pred])), repr(float(ent[k])),
            roles.get(node, "unobserved"),
        ]))
    return "\n".join(lines) + "\n", meta


def run_viz(cfg: ExperimentConfig) -> RunArtifacts:
    """Train one repetition and export the 2-D embedding scatter data."""
    g, labels = load_graph(cfg.dataset)
    _, epoch_lines, timing_lines, run_line, params, emb, preds, run_labels = \
        run_repetition(g, labels, cfg, rep=0)
    csv_text, meta = export_embeddings_2d(emb, preds, run_labels)
    report_lines = [run_line,
                    {"record": "viz", "degenerate": meta["degenerate"],
                     "fallback": meta["fallback"], "rank": meta["rank"],
                     "variance_total": meta["variance_total"],
                     "variance_kept": meta["variance_kept"]}]
    return RunArtifacts(table=ResultTable(rows=[]), report_lines=report_lines,
                        timing_lines=timing_lines, checkpoint=checkpoint_bytes(params),
                        viz_csv=csv_text)


def emit_table(table: ResultTable, fmt: str = "csv") -> str:
    """Serialize a result table deterministically as csv, markdown, or json."""
    if not table.rows:
        raise ValueError("empty result table")
    n_runs = max(len(r.accuracies) for r in table.rows)
    if fmt == "csv":
        header = "model,classifier,noise,mean," + ",".join(
            f"run_{i}" for i in range(n_runs))
        lines = [header]
        for r in table.rows:
            cells = [r.model, r.classifier, r.noise, repr(r.mean)]
            cells += [repr(float(a)) for a in r.accuracies]
            cells += [""] * (n_runs - len(r.accuracies))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        head = "| Model | Classifier | Noise | Mean acc (%) | Runs |"
        sep = "|---|---|---|---|---|"
        lines = [head, sep]
        for r in table.rows:
            runs = ", ".join(f"{a:.2f}" for a in r.accuracies)
            lines.append(f"| {r.model} | {r.classifier} | {r.noise} | {r.mean:.2f} | {runs} |")
        return "\n".join(lines) + "\n"
    if fmt == "json":
        payload = [{"model": r.model, "classifier": r.classifier, "noise": r.noise,
                    "mean": r.mean, "accuracies": [float(a) for a in r.accuracies]}
                   for r in table.rows]
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"
    raise ValueError(f"unknown table format {fmt!r}")
