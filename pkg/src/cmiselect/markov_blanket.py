"""Markov blanket search driven by a pluggable CI-test backend.

Adjacency search grows the conditioning set size from 0 to delta,
removing a feature as soon as a separating set is found; coparents are
then recovered by testing the remaining features against the adjacency
set, followed by an iterative shrink pass that drops any candidate
rendered independent by the rest of the selection.
"""

import csv
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from .ci_test import CiConfig, ci_test
from .synthetic import Y_NODE, d_separated, feature_node

BACKENDS = ("mapped_knn", "raw_knn", "oracle")


@dataclass(frozen=True)
class MbConfig:
    delta: int = 3
    backend: str = "raw_knn"
    ci: CiConfig = field(default_factory=CiConfig)

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")


@dataclass
class TestRecord:
    feature: int
    subset: tuple
    statistic: float
    p_value: float
    independent: bool


@dataclass
class MbResult:
    adjacents: set
    coparents: set
    test_log: list

    @property
    def selected(self):
        return self.adjacents | self.coparents

    def write_log_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["i", "S", "statistic", "p_value", "decision"])
            for rec in self.test_log:
                w.writerow([rec.feature,
                            ";".join(str(j) for j in rec.subset),
                            repr(rec.statistic),
                            repr(rec.p_value),
                            "independent" if rec.independent else "dependent"])


def _oracle_backend(dag):
    def test(i, subset, seed):
        given = {feature_node(j) for j in subset}
        indep = d_separated(dag, Y_NODE, feature_node(i), given)
        return TestRecord(i, tuple(subset), 0.0 if indep else 1.0,
                          1.0 if indep else 0.0, indep)
    return test


def _knn_backend(blocks, y, ci_cfg):
    cache = {}  # shared neighbor structures for repeated conditioning sets

    def test(i, subset, seed):
        z = np.hstack([blocks[j] for j in subset]) if subset else None
        res = ci_test(blocks[i], y, z, replace(ci_cfg, seed=seed), cache=cache)
        return TestRecord(i, tuple(subset), res.statistic, res.p_value,
                          res.independent)
    return test


def _test_seed(base_seed, i, subset):
    # deterministic per-test seed regardless of execution order
    ss = np.random.SeedSequence([int(base_seed) & 0xFFFFFFFF, i + 1, *subset])
    return int(ss.generate_state(1)[0])


def find_markov_blanket(dataset, cfg, mapping_model=None, dag=None):
    """Run the adjacency + coparent search; returns an MbResult.

    `dag` supplies ground truth for the oracle backend; `mapping_model`
    supplies the feature maps for the mapped_knn backend.
    """
    m = dataset.m
    if cfg.backend == "oracle":
        if dag is None:
            raise ValueError("oracle backend requires a DagSpec")
        test = _oracle_backend(dag)
    else:
        if cfg.backend == "mapped_knn":
            if mapping_model is None:
                raise ValueError("mapped_knn backend requires a trained MappingModel")
            if mapping_model.feature_dims != dataset.feature_dims:
                raise ValueError("mapping model dims do not match dataset")
            blocks = mapping_model.map_features(dataset.blocks)
        else:
            blocks = dataset.blocks
        if dataset.n <= cfg.ci.k_cmi:
            raise ValueError(
                f"n={dataset.n} too small for k_cmi={cfg.ci.k_cmi}")
        test = _knn_backend(blocks, dataset.y.reshape(-1, 1), cfg.ci)

    log = []

    def run_test(i, subset):
        rec = test(i, tuple(subset), _test_seed(cfg.ci.seed, i, subset))
        log.append(rec)
        return rec

    # adjacency phase: growing conditioning sets
    adj = list(range(m))
    for c in range(cfg.delta + 1):
        for i in list(adj):
            if i not in adj:
                continue
            candidates = [j for j in adj if j != i]
            if len(candidates) < c:
                continue
            for subset in combinations(candidates, c):
                rec = run_test(i, subset)
                if rec.independent:
                    adj.remove(i)
                    break

    # coparent phase: dependence given the full adjacency set
    adj_set = set(adj)
    coparents = set()
    for i in range(m):
        if i in adj_set:
            continue
        rec = run_test(i, tuple(sorted(adj_set)))
        if not rec.independent:
            coparents.add(i)

    # shrink pass: drop anything the rest of the selection separates.
    # False adjacents can survive the growth phase when their separating
    # set was already removed from Adj; at this point the selection
    # contains the whole blanket, so one conditional test per candidate
    # settles membership.
    changed = True
    while changed:
        changed = False
        for i in sorted(adj_set | coparents):
            others = sorted((adj_set | coparents) - {i})
            rec = run_test(i, tuple(others))
            if rec.independent:
                adj_set.discard(i)
                coparents.discard(i)
                changed = True
    return MbResult(adjacents=adj_set, coparents=coparents, test_log=log)


def relation_suite(dag, delta):
    """All (i, S, independent) relations Y vs X_i given X_S with |S| <= delta."""
    out = []
    m = dag.m
    for i in range(m):
        others = [j for j in range(m) if j != i]
        for c in range(delta + 1):
            for subset in combinations(others, c):
                given = {feature_node(j) for j in subset}
                indep = d_separated(dag, Y_NODE, feature_node(i), given)
                out.append((i, subset, indep))
    return out
