"""Command-line front end.

Subcommands: gen, train-maps, estimate, ci-test, roc, select,
calibrate, ingest. Numeric flags override values from --config JSON,
which override built-in defaults; the effective configuration is
echoed into every JSON output. Exit codes: 0 success, 2 usage error,
1 runtime error.
"""

import argparse
import json
import sys

import numpy as np

from . import __version__
from .ci_test import CiConfig, ci_test
from .data import Dataset
from .harness import (calibration_study, ci_roc_experiment, ingest_timeseries,
                      mb_select_experiment, train_dag_mapper,
                      train_bullseye2d_mapper)
from .knn_estimators import KnnConfig, fp_cmi, ksg_mi
from .mapper import MappingModel, TrainConfig, train
from .markov_blanket import MbConfig
from .synthetic import (BullseyeConfig, DagSpec, default_dag, gen_bullseye_2d,
                        gen_bullseye_dag)

_DEFAULTS = {
    "seed": 0, "k": 5, "perms": 1000, "k_perm": 5, "alpha": 0.05,
    "epsilon": 0.3, "n": 2000, "delta": 3, "lambda": 0.1, "map_dim": 1,
    "iterations": 3000, "batch_size": 256, "map_hidden": 32,
    "head_hidden": 64, "window": 3, "stride": 1, "trials": 200,
}


def _build_parser():
    p = argparse.ArgumentParser(prog="cmiselect")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--config", help="JSON file with default parameter values")

    sp = sub.add_parser("gen", help="generate a synthetic dataset CSV")
    common(sp)
    sp.add_argument("--kind", choices=["bullseye2d", "dag"], required=True)
    sp.add_argument("--n", type=int)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--dag", help="DagSpec JSON (dag kind); default benchmark DAG")
    sp.add_argument("--dag-out", help="write the effective DagSpec JSON here")

    sp = sub.add_parser("train-maps", help="fit a mapping model checkpoint")
    common(sp)
    sp.add_argument("data", help="dataset CSV")
    sp.add_argument("--map-dim", type=int)
    sp.add_argument("--delta", type=int)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--iterations", type=int)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--map-hidden", type=int)
    sp.add_argument("--head-hidden", type=int)
    sp.add_argument("--head", choices=["gaussian", "bernoulli"], default="gaussian")

    sp = sub.add_parser("estimate", help="MI/CMI estimate on CSV columns")
    common(sp)
    sp.add_argument("data")
    group = sp.add_mutually_exclusive_group(required=True)
    group.add_argument("--mi", action="store_true")
    group.add_argument("--cmi", action="store_true")
    sp.add_argument("--x", required=True, help="block prefix (e.g. x0) or column")
    sp.add_argument("--y", required=True)
    sp.add_argument("--z", action="append", default=[])
    sp.add_argument("--k", type=int)
    sp.add_argument("--tie-mode", choices=["strict", "mixed"], default="strict")

    sp = sub.add_parser("ci-test", help="single permutation CI test")
    common(sp)
    sp.add_argument("data")
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--z", action="append", default=[])
    sp.add_argument("--k", type=int, help="k for the CMI statistic")
    sp.add_argument("--perms", type=int)
    sp.add_argument("--k-perm", type=int)
    sp.add_argument("--alpha", type=float)

    sp = sub.add_parser("roc", help="CI-test ROC sweep over a relation suite")
    common(sp)
    sp.add_argument("--dag", help="DagSpec JSON; default benchmark DAG")
    sp.add_argument("--n", type=int)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--delta", type=int)
    sp.add_argument("--backend", choices=["mapped_knn", "raw_knn"],
                    default="mapped_knn")
    sp.add_argument("--score", choices=["p_value", "statistic"],
                    default="p_value")
    sp.add_argument("--k", type=int)
    sp.add_argument("--perms", type=int)
    sp.add_argument("--k-perm", type=int)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--iterations", type=int)
    sp.add_argument("--map-dim", type=int)
    sp.add_argument("--checkpoint", help="reuse a trained mapping model")

    sp = sub.add_parser("select", help="Markov blanket selection")
    common(sp)
    sp.add_argument("--data", help="dataset CSV (omit to generate from --dag)")
    sp.add_argument("--dag", help="DagSpec JSON for oracle truth / generation")
    sp.add_argument("--n", type=int)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--delta", type=int)
    sp.add_argument("--backend", choices=["mapped_knn", "raw_knn", "oracle"],
                    default="mapped_knn")
    sp.add_argument("--k", type=int)
    sp.add_argument("--perms", type=int)
    sp.add_argument("--k-perm", type=int)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--iterations", type=int)
    sp.add_argument("--map-dim", type=int)
    sp.add_argument("--checkpoint")

    sp = sub.add_parser("calibrate", help="null false-positive-rate study")
    common(sp)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--k", type=int)
    sp.add_argument("--perms", type=int)
    sp.add_argument("--k-perm", type=int)
    sp.add_argument("--alpha", type=float)

    sp = sub.add_parser("ingest", help="window a time-series CSV into a dataset")
    common(sp)
    sp.add_argument("data")
    sp.add_argument("--window", type=int)
    sp.add_argument("--stride", type=int)

    return p


class _Cfg:
    """Resolves flag > config-file > default."""

    def __init__(self, args):
        self.args = args
        self.file = {}
        if getattr(args, "config", None):
            with open(args.config) as f:
                self.file = json.load(f)
        self.effective = {}

    def get(self, name, attr=None):
        attr = attr or name
        val = getattr(self.args, attr, None)
        if val is None:
            val = self.file.get(name, _DEFAULTS.get(name))
        self.effective[name] = val
        return val


def _emit(doc, out):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _result_doc(cfg, results):
    return {"spec": cfg.effective, "results": results, "version": __version__}


def _select_columns(ds, name):
    if name == "y":
        return ds.y.reshape(-1, 1)
    if name in ds.extras:
        return np.asarray(ds.extras[name]).reshape(-1, 1)
    if name.startswith("x") and name[1:].isdigit():
        i = int(name[1:])
        if i < ds.m:
            return ds.blocks[i]
    raise ValueError(f"unknown column or block {name!r}")


def _ci_config(cfg):
    return CiConfig(k_cmi=cfg.get("k"), num_permutations=cfg.get("perms"),
                    k_perm=cfg.get("k_perm"), alpha=cfg.get("alpha"),
                    seed=cfg.get("seed"))


def _load_dag(path, epsilon):
    if path:
        return DagSpec.from_json(path)
    return default_dag(epsilon=epsilon)


def _cmd_gen(args, cfg):
    kind = args.kind
    n = cfg.get("n")
    eps = cfg.get("epsilon")
    seed = cfg.get("seed")
    out = cfg.get("out")
    if not out:
        raise ValueError("gen requires --out")
    if kind == "bullseye2d":
        x, y, r = gen_bullseye_2d(BullseyeConfig(epsilon=eps, n=n, seed=seed))
        ds = Dataset(blocks=[x], y=y.reshape(-1), extras={"r": r.reshape(-1)})
    else:
        dag = _load_dag(args.dag, eps)
        ds = gen_bullseye_dag(dag, n, seed=seed)
        if args.dag_out:
            dag.to_json(args.dag_out)
    ds.to_csv(out)
    return 0


def _cmd_train_maps(args, cfg):
    ds = Dataset.from_csv(args.data)
    out = cfg.get("out")
    if not out:
        raise ValueError("train-maps requires --out for the checkpoint")
    model = MappingModel(ds.feature_dims, map_dim=cfg.get("map_dim"),
                         head_kind=args.head, delta=cfg.get("delta"),
                         map_hidden=cfg.get("map_hidden"),
                         head_hidden=cfg.get("head_hidden"),
                         seed=cfg.get("seed"))
    tc = TrainConfig(lam=cfg.get("lambda", "lam"), delta=cfg.get("delta"),
                     iterations=cfg.get("iterations"),
                     batch_size=cfg.get("batch_size"), seed=cfg.get("seed"))
    history = train(model, ds, tc)
    model.save(out)
    _emit(_result_doc(cfg, {"checkpoint": out,
                            "final_loss": history[-1],
                            "initial_loss": history[0]}), None)
    return 0


def _cmd_estimate(args, cfg):
    ds = Dataset.from_csv(args.data)
    x = _select_columns(ds, args.x)
    y = _select_columns(ds, args.y)
    knn_cfg = KnnConfig(k=cfg.get("k"), tie_mode=args.tie_mode)
    if args.cmi:
        if not args.z:
            raise ValueError("--cmi requires at least one --z")
        z = np.hstack([_select_columns(ds, name) for name in args.z])
        results = {"cmi_nats": fp_cmi(x, y, z, knn_cfg)}
    else:
        results = {"mi_nats": ksg_mi(x, y, knn_cfg)}
    _emit(_result_doc(cfg, results), cfg.get("out"))
    return 0


def _cmd_ci_test(args, cfg):
    ds = Dataset.from_csv(args.data)
    x = _select_columns(ds, args.x)
    y = _select_columns(ds, args.y)
    z = (np.hstack([_select_columns(ds, name) for name in args.z])
         if args.z else None)
    res = ci_test(x, y, z, _ci_config(cfg))
    _emit(_result_doc(cfg, {"statistic": res.statistic,
                            "p_value": res.p_value,
                            "independent": res.independent,
                            "null_samples": res.null_samples}), cfg.get("out"))
    return 0


def _cmd_roc(args, cfg):
    out = cfg.get("out")
    if not out:
        raise ValueError("roc requires --out for the ROC CSV")
    eps = cfg.get("epsilon")
    dag = _load_dag(args.dag, eps)
    model = MappingModel.load(args.checkpoint) if args.checkpoint else None
    table, rows = ci_roc_experiment(
        dag, cfg.get("n"), cfg.get("seed"), cfg.get("delta"),
        args.backend, ci_cfg=_ci_config(cfg), mapping_model=model,
        score=args.score,
        train_kwargs={"lam": cfg.get("lambda", "lam"),
                      "iterations": cfg.get("iterations"),
                      "map_dim": cfg.get("map_dim"),
                      "seed": cfg.get("seed")})
    table.to_csv(out)
    detail = [{"i": r["i"], "S": list(r["S"]),
               "independent_truth": r["independent_truth"],
               "statistic": r["statistic"], "p_value": r["p_value"]}
              for r in rows]
    _emit(_result_doc(cfg, {"auc": table.auc, "roc_csv": out,
                            "relations": detail}), out + ".json")
    return 0


def _cmd_select(args, cfg):
    out = cfg.get("out")
    if not out:
        raise ValueError("select requires --out prefix")
    eps = cfg.get("epsilon")
    dag = _load_dag(args.dag, eps) if (args.dag or args.backend == "oracle"
                                       or not args.data) else None
    if args.data:
        ds = Dataset.from_csv(args.data)
    else:
        ds = gen_bullseye_dag(dag, cfg.get("n"), seed=cfg.get("seed"))
    model = MappingModel.load(args.checkpoint) if args.checkpoint else None
    mb_cfg = MbConfig(delta=cfg.get("delta"), backend=args.backend,
                      ci=_ci_config(cfg))
    result, model = mb_select_experiment(
        ds, mb_cfg, dag=dag, mapping_model=model,
        train_kwargs={"lam": cfg.get("lambda", "lam"),
                      "iterations": cfg.get("iterations"),
                      "map_dim": cfg.get("map_dim"),
                      "seed": cfg.get("seed")})
    result.write_log_csv(out + "_log.csv")
    _emit(_result_doc(cfg, {
        "adjacents": sorted(result.adjacents),
        "coparents": sorted(result.coparents),
        "selected": sorted(result.selected),
        "num_tests": len(result.test_log),
        "log_csv": out + "_log.csv",
    }), out + ".json")
    return 0


def _cmd_calibrate(args, cfg):
    fpr, p_values = calibration_study(trials=cfg.get("trials"),
                                      n=cfg.get("n"), cfg=_ci_config(cfg),
                                      seed=cfg.get("seed"))
    _emit(_result_doc(cfg, {"fpr": fpr, "p_values": p_values}), cfg.get("out"))
    return 0


def _cmd_ingest(args, cfg):
    out = cfg.get("out")
    if not out:
        raise ValueError("ingest requires --out")
    ds, dropped = ingest_timeseries(args.data, cfg.get("window"),
                                    cfg.get("stride"))
    ds.to_csv(out)
    _emit(_result_doc(cfg, {"rows": ds.n, "dropped_entities": dropped,
                            "feature_dims": ds.feature_dims,
                            "csv": out}), None)
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "train-maps": _cmd_train_maps,
    "estimate": _cmd_estimate,
    "ci-test": _cmd_ci_test,
    "roc": _cmd_roc,
    "select": _cmd_select,
    "calibrate": _cmd_calibrate,
    "ingest": _cmd_ingest,
}


def cli(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    cfg = _Cfg(args)
    try:
        return _COMMANDS[args.command](args, cfg)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli())
