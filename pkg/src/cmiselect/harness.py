"""Experiment harness: ROC sweeps, calibration studies, MI comparisons,
and windowed CSV ingestion for tabular time-series data."""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .ci_test import CiConfig, ci_test
from .data import Dataset
from .knn_estimators import KnnConfig, ksg_mi
from .mapper import MappingModel, TrainConfig, train
from .markov_blanket import find_markov_blanket, relation_suite
from .synthetic import (BullseyeConfig, DEFAULT_RINGS, gen_bullseye_2d,
                        gen_bullseye_dag, mi_oracle_bullseye)

EXPERIMENT_KINDS = ("mi_vs_eps", "mi_vs_n", "ci_roc", "mb_select", "calibrate")


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    parameters: dict = field(default_factory=dict)
    out: str = None

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")


@dataclass
class RocTable:
    rows: list  # (threshold, tpr, fpr), sorted by threshold
    auc: float

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["threshold", "tpr", "fpr"])
            for t, tpr, fpr in self.rows:
                w.writerow([repr(t), repr(tpr), repr(fpr)])


def _coerce_labels(labels):
    out = []
    for lab in labels:
        if isinstance(lab, str):
            if lab not in ("independent", "dependent"):
                raise ValueError(f"unknown label {lab!r}")
            out.append(lab == "independent")
        else:
            out.append(bool(lab))
    return np.array(out, dtype=bool)


def roc_sweep(labels, scores):
    """ROC over score thresholds; positive class = independent declared.

    Higher score means more independent (e.g. a p-value). AUC is the
    trapezoid rule over the swept (FPR, TPR) points.
    """
    labels = _coerce_labels(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape[0] != scores.shape[0]:
        raise ValueError("labels and scores must have equal length")
    pos = int(labels.sum())
    neg = int(labels.size - pos)
    if pos == 0 or neg == 0:
        raise ValueError("AUC undefined: labels contain a single class")
    rows = []
    points = [(0.0, 0.0)]
    for t in np.unique(scores):  # ascending thresholds
        pred = scores >= t
        tpr = float(np.count_nonzero(pred & labels)) / pos
        fpr = float(np.count_nonzero(pred & ~labels)) / neg
        rows.append((float(t), tpr, fpr))
        points.append((fpr, tpr))
    points.append((1.0, 1.0))
    points = sorted(set(points))
    auc = 0.0
    for (f0, t0), (f1, t1) in zip(points[:-1], points[1:]):
        auc += (f1 - f0) * (t0 + t1) / 2.0
    return RocTable(rows=rows, auc=float(auc))


def ingest_timeseries(path, window, stride=1):
    """Flatten per-entity time series into fixed-width feature blocks.

    Expects a CSV with columns: entity id, time index, feature columns,
    terminal label (in that order). For each entity, every feature's
    last `window` values (sampled every `stride` steps, ending at the
    final time step) become one block; the terminal label becomes y.
    Returns (Dataset, dropped_entity_count).
    """
    if window < 1 or stride < 1:
        raise ValueError("window and stride must be >= 1")
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        if len(header) < 4:
            raise ValueError(f"{path}: need entity, time, features, label columns")
        n_feat = len(header) - 3
        entities = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValueError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                t = float(row[1])
                feats = [float(v) for v in row[2:-1]]
                label = float(row[-1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value") from None
            entities.setdefault(row[0], []).append((t, feats, label))
    needed = (window - 1) * stride + 1
    blocks = [[] for _ in range(n_feat)]
    ys = []
    dropped = 0
    for key in entities:
        steps = sorted(entities[key], key=lambda s: s[0])
        if len(steps) < needed:
            dropped += 1
            continue
        picked = steps[len(steps) - needed::stride]
        for j in range(n_feat):
            blocks[j].append([s[1][j] for s in picked])
        ys.append(1.0 if steps[-1][2] != 0 else 0.0)
    if not ys:
        raise ValueError("no entity has enough history for the requested window")
    dataset = Dataset(blocks=[np.array(b) for b in blocks], y=np.array(ys))
    return dataset, dropped


# ---------------------------------------------------------------------
# experiment implementations
# ---------------------------------------------------------------------

def train_bullseye2d_mapper(x, y, lam, iterations=3000, seed=0, map_dim=2,
                            hidden=8, batch_size=256):
    """Fit the single-feature bullseye map (gaussian head, no mask)."""
    model = MappingModel([x.shape[1]], map_dim=map_dim, head_kind="gaussian",
                         map_hidden=hidden, head_hidden=hidden, seed=seed)
    ds = Dataset(blocks=[x], y=np.asarray(y).reshape(-1))
    cfg = TrainConfig(lam=lam, iterations=iterations, seed=seed,
                      batch_size=batch_size)
    history = train(model, ds, cfg)
    return model, history


def bullseye_mi_comparison(epsilon, n, seed, rings=DEFAULT_RINGS, k=5,
                           iterations=3000, hidden=8, map_dim=2):
    """Estimates of I(X;Y) on one 2D bullseye draw, plus the oracle value.

    Returns a dict with raw/k-NN(R)/nominal/regularized estimates.
    """
    cfg = BullseyeConfig(epsilon=epsilon, n=n, radius_rings=rings, seed=seed)
    x, y, r = gen_bullseye_2d(cfg)
    knn_cfg = KnnConfig(k=k)
    out = {
        "oracle": mi_oracle_bullseye(epsilon, rings),
        "raw": ksg_mi(x, y, knn_cfg),
        "knn_r": ksg_mi(r, y, knn_cfg),
    }
    for name, lam in (("nominal", 0.0), ("regularized", 0.1)):
        model, _ = train_bullseye2d_mapper(
            x, y, lam, iterations=iterations, seed=seed,
            map_dim=map_dim, hidden=hidden)
        mapped = model.map_features([x])[0]
        out[name] = ksg_mi(mapped, y, knn_cfg)
    return out


def mi_sweep(kind, grid, n=2000, epsilon=0.3, seeds=(0,), rings=DEFAULT_RINGS,
             **kwargs):
    """Tidy rows for the MI-vs-epsilon / MI-vs-n comparison sweeps."""
    if kind not in ("mi_vs_eps", "mi_vs_n"):
        raise ValueError(f"unknown sweep kind {kind!r}")
    rows = []
    for value in grid:
        eps = value if kind == "mi_vs_eps" else epsilon
        nn = value if kind == "mi_vs_n" else n
        for seed in seeds:
            est = bullseye_mi_comparison(eps, nn, seed, rings=rings, **kwargs)
            for name, val in est.items():
                rows.append({"param": value, "seed": seed,
                             "estimator": name, "mi_nats": val})
    return rows


def train_dag_mapper(dataset, delta, lam=0.1, iterations=3000, seed=0,
                     map_dim=1, map_hidden=32, head_hidden=164,
                     batch_size=256, head_kind="gaussian"):
    """Fit the multi-feature mapping model used by mapped_knn backends."""
    model = MappingModel(dataset.feature_dims, map_dim=map_dim,
                         head_kind=head_kind, delta=delta,
                         map_hidden=map_hidden, head_hidden=head_hidden,
                         seed=seed)
    cfg = TrainConfig(lam=lam, iterations=iterations, delta=delta, seed=seed,
                      batch_size=batch_size)
    history = train(model, dataset, cfg)
    return model, history


def ci_roc_experiment(dag, n, seed, delta, backend, ci_cfg=None,
                      mapping_model=None, score="p_value",
                      train_kwargs=None):
    """Score every relation of the suite and sweep an ROC over the scores.

    Returns (RocTable, rows) where rows carry per-relation details.
    """
    if ci_cfg is None:
        ci_cfg = CiConfig()
    dataset = gen_bullseye_dag(dag, n, seed=seed)
    if backend == "mapped_knn":
        if mapping_model is None:
            mapping_model, _ = train_dag_mapper(
                dataset, delta, seed=seed, **(train_kwargs or {}))
        blocks = mapping_model.map_features(dataset.blocks)
    elif backend == "raw_knn":
        blocks = dataset.blocks
    else:
        raise ValueError(f"roc backend must be mapped_knn or raw_knn, got {backend!r}")
    y = dataset.y.reshape(-1, 1)
    relations = relation_suite(dag, delta)
    labels, scores, rows = [], [], []
    cache = {}  # conditioning sets repeat across relations
    for rel_idx, (i, subset, indep) in enumerate(relations):
        z = np.hstack([blocks[j] for j in subset]) if subset else None
        res = ci_test(blocks[i], y, z,
                      replace(ci_cfg, seed=ci_cfg.seed + 7919 * rel_idx),
                      cache=cache)
        value = res.p_value if score == "p_value" else -res.statistic
        labels.append(indep)
        scores.append(value)
        rows.append({"i": i, "S": subset, "independent_truth": indep,
                     "statistic": res.statistic, "p_value": res.p_value})
    return roc_sweep(labels, scores), rows


def calibration_study(trials=200, n=500, cfg=None, seed=0, rho=0.7):
    """Empirical false-positive rate on jointly Gaussian X ind Y given Z.

    X and Y are noisy copies of Z, so X and Y are dependent but
    conditionally independent given Z. Returns (fpr, p_values).
    """
    if cfg is None:
        cfg = CiConfig()
    p_values = []
    for t in range(trials):
        rng = np.random.default_rng(seed + t)
        z = rng.normal(size=(n, 1))
        x = rho * z + np.sqrt(1 - rho ** 2) * rng.normal(size=(n, 1))
        y = rho * z + np.sqrt(1 - rho ** 2) * rng.normal(size=(n, 1))
        res = ci_test(x, y, z, replace(cfg, seed=seed + t))
        p_values.append(res.p_value)
    p = np.array(p_values)
    fpr = float(np.mean(p <= cfg.alpha))
    return fpr, p_values


def mb_select_experiment(dataset, mb_cfg, dag=None, mapping_model=None,
                         train_kwargs=None):
    """Select the Markov blanket, training a mapping model if needed."""
    if mb_cfg.backend == "mapped_knn" and mapping_model is None:
        mapping_model, _ = train_dag_mapper(
            dataset, mb_cfg.delta, **(train_kwargs or {}))
    result = find_markov_blanket(dataset, mb_cfg, mapping_model=mapping_model,
                                 dag=dag)
    return result, mapping_model


def run_experiment(spec):
    """Dispatch an ExperimentSpec to its implementation."""
    p = dict(spec.parameters)
    if spec.kind in ("mi_vs_eps", "mi_vs_n"):
        return mi_sweep(spec.kind, **p)
    if spec.kind == "ci_roc":
        return ci_roc_experiment(**p)
    if spec.kind == "calibrate":
        return calibration_study(**p)
    if spec.kind == "mb_select":
        return mb_select_experiment(**p)
    raise ValueError(f"unknown experiment kind {spec.kind!r}")
