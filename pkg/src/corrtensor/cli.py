"""``corrtensor`` command-line harness.

Four tasks share one option set:

``reconstruct``   inlier reconstruction error over an NPC grid (CSV)
``classify``      center classifier accuracy over trials (JSON)
``cluster``       density-peak seeded k-means on cores (JSON + CSVs)
``loss-surface``  Corr-Loss on a 2-D residual grid (CSV per alpha)

Settings resolve as built-in defaults, then an optional JSON ``--config``
file, then explicit flags. Every run writes ``manifest.json`` with the
resolved settings next to its outputs. Outputs are written as
``*.partial`` and renamed only after the whole task succeeds.

Exit codes: 0 ok, 1 configuration error, 2 I/O or format error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .correntropy import CorrParams
from .data_io.datasets import (
    Dataset,
    derive_rng,
    inject_outliers,
    load_dataset,
    parse_outlier_spec,
    sha256_file,
    split,
    synthetic_lowrank,
)
from .decomp2d import FitConfig, fit_method, reconstruction_error
from .errors import ConvergenceWarning, CorrTensorError, DomainError, FormatError
from .evaluation import classify, cluster_cores, confusion_matrix, fit_classifier
from .linalg import BACKEND
from .modelio import save_model
from .tensor import fit_corr_tensor, tensor_reconstruction_error

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

TASKS = ("reconstruct", "classify", "cluster", "loss-surface")
METHODS = ("2dpca", "2dsvd", "r1-2dsvd", "corr-2dsvd", "corr-tensor")
CORR_METHODS = ("corr-2dsvd", "corr-tensor")

DEFAULTS = {
    "method": "2dsvd,corr-2dsvd",
    "alpha": "1.6",
    "beta": "0.8",
    "p": 2.0,
    "k1": 10,
    "k2": None,
    "k3": None,
    "npc": None,
    "outliers": "none",
    "data": "synthetic",
    "labels": None,
    "test_data": None,
    "test_labels": None,
    "train_per_class": 100,
    "test_per_class": None,
    "normalize": "none",
    "seed": 0,
    "trials": 1,
    "max_iters": 100,
    "tol": 1e-5,
    "clusters": None,
    "neighbor_fraction": 0.02,
    "save_models": False,
    "synthetic_classes": None,
    "synthetic_per_class": 40,
    "synthetic_shape": "16x16",
    "synthetic_ranks": None,
    "synthetic_noise": 0.01,
    "synthetic_class_scale": None,
    "grid_min": -3.0,
    "grid_max": 3.0,
    "grid_steps": 61,
}

TASK_DEFAULTS = {
    "classify": {"alpha": "4", "synthetic_classes": 2, "synthetic_class_scale": 2.0},
    "cluster": {"alpha": "6", "synthetic_classes": 3, "synthetic_class_scale": 2.0},
    "loss-surface": {"alpha": "1,2,5"},
    "reconstruct": {"synthetic_classes": 1, "synthetic_class_scale": 0.0},
}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# ------------------------------------------------------------------ parsing


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="corrtensor", description="Correntropy-robust matrix and tensor decomposition experiments.")
    parser.add_argument("--version", action="version", version=f"corrtensor {__version__}")
    sub = parser.add_subparsers(dest="task", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    S = argparse.SUPPRESS
    g = common.add_argument_group("model")
    g.add_argument("--method", default=S, help="comma list of " + ", ".join(METHODS))
    g.add_argument("--alpha", default=S, help="kernel shape; a comma list sweeps it")
    g.add_argument("--beta", default=S, help="kernel width; a comma list sweeps it")
    g.add_argument("--p", type=float, default=S, help="loss order (2 gives the plain Corr-Loss)")
    g.add_argument("--k1", type=int, default=S, help="left rank")
    g.add_argument("--k2", type=int, default=S, help="right rank (defaults to k1)")
    g.add_argument("--k3", type=int, default=S, help="channel rank for 3-mode data (defaults to full)")
    g.add_argument("--npc", default=S, help="comma list of k1=k2 values (reconstruct)")
    g.add_argument("--max-iters", type=int, default=S)
    g.add_argument("--tol", type=float, default=S)
    g = common.add_argument_group("data")
    g.add_argument("--data", default=S, help="IDX image file, PGM/PPM directory, or 'synthetic'")
    g.add_argument("--labels", default=S, help="IDX/text label file, or 'prefix' for filename prefixes")
    g.add_argument("--test-data", default=S)
    g.add_argument("--test-labels", default=S)
    g.add_argument("--train-per-class", type=int, default=S)
    g.add_argument("--test-per-class", type=int, default=S, help="fixed held-out count per class")
    g.add_argument("--normalize", choices=("none", "unit"), default=S, help="'unit' scales every sample to unit Frobenius norm")
    g.add_argument("--outliers", default=S, help="none | dummy:N | magnitude:fraction=F,m=M | block:fraction=F,area=A")
    g.add_argument("--synthetic-classes", type=int, default=S)
    g.add_argument("--synthetic-per-class", type=int, default=S)
    g.add_argument("--synthetic-shape", default=S, help="e.g. 16x16 or 8x8x3")
    g.add_argument("--synthetic-ranks", default=S, help="e.g. 10x10")
    g.add_argument("--synthetic-noise", type=float, default=S)
    g.add_argument("--synthetic-class-scale", type=float, default=S)
    g = common.add_argument_group("run")
    g.add_argument("--seed", type=int, default=S)
    g.add_argument("--trials", type=int, default=S)
    g.add_argument("--clusters", type=int, default=S, help="k for k-means (defaults to the class count)")
    g.add_argument("--neighbor-fraction", type=float, default=S)
    g.add_argument("--grid-min", type=float, default=S)
    g.add_argument("--grid-max", type=float, default=S)
    g.add_argument("--grid-steps", type=int, default=S)
    g.add_argument("--save-models", action="store_true", default=S, help="write trial-0 model files")
    g.add_argument("--config", default=S, help="JSON file of settings; flags take precedence")
    g.add_argument("--out", required=True, help="output directory")
    for task in TASKS:
        sub.add_parser(task, parents=[common])
    return parser


def _split_list(value, cast, name):
    items = value if isinstance(value, (list, tuple)) else str(value).split(",")
    try:
        out = [cast(v) for v in items if str(v).strip() != ""]
    except (TypeError, ValueError):
        raise ConfigError(f"--{name}: cannot parse {value!r}") from None
    if not out:
        raise ConfigError(f"--{name}: empty list")
    return out


def _dims(value, name):
    if value is None:
        return None
    items = value if isinstance(value, (list, tuple)) else str(value).lower().split("x")
    try:
        return tuple(int(v) for v in items)
    except ValueError:
        raise ConfigError(f"--{name}: expected sizes like 16x16, got {value!r}") from None


def resolve_config(argv=None) -> dict:
    """Merge defaults, the optional config file and explicit flags."""
    ns = vars(build_parser().parse_args(argv))
    task = ns.pop("task")
    out = ns.pop("out")
    cfg = dict(DEFAULTS)
    cfg.update(TASK_DEFAULTS.get(task, {}))
    path = ns.pop("config", None)
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise OSError(f"config file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        doc = {k.replace("-", "_"): v for k, v in doc.items()}
        unknown = sorted(set(doc) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(doc)
    cfg.update(ns)

    cfg["method"] = _split_list(cfg["method"], str, "method")
    bad = [m for m in cfg["method"] if m not in METHODS]
    if bad:
        raise ConfigError(f"unknown method(s): {', '.join(bad)}")
    cfg["alpha"] = _split_list(cfg["alpha"], float, "alpha")
    cfg["beta"] = _split_list(cfg["beta"], float, "beta")
    cfg["npc"] = None if cfg["npc"] is None else _split_list(cfg["npc"], int, "npc")
    cfg["synthetic_shape"] = _dims(cfg["synthetic_shape"], "synthetic-shape")
    cfg["synthetic_ranks"] = _dims(cfg["synthetic_ranks"], "synthetic-ranks")
    if cfg["k2"] is None:
        cfg["k2"] = cfg["k1"]
    for key in ("trials", "max_iters", "synthetic_per_class", "grid_steps"):
        if int(cfg[key]) < 1:
            raise ConfigError(f"{key} must be positive")
    if cfg["normalize"] not in ("none", "unit"):
        raise ConfigError("normalize must be 'none' or 'unit'")
    try:
        # constructing these validates every parameter range
        for a in cfg["alpha"]:
            for b in cfg["beta"]:
                CorrParams(a, b, cfg["p"])
        FitConfig(cfg["k1"], cfg["k2"], cfg["max_iters"], cfg["tol"], cfg["seed"])
        parse_outlier_spec(cfg["outliers"], cfg["seed"])
    except (CorrTensorError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    cfg = {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.items()}
    return {"task": task, "out": out, **cfg}


# ------------------------------------------------------------------ helpers


def _trial_seed(seed, trial):
    return int(derive_rng(seed, f"trial/{trial}").integers(0, 2**63))


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


class _Outputs:
    """Collects output files as ``.partial`` and publishes them together."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.names = []

    def _partial(self, name):
        p = self.root / f"{name}.partial"
        p.parent.mkdir(parents=True, exist_ok=True)
        self.names.append(name)
        return p

    def csv(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        self._partial(name).write_text(buf.getvalue())

    def json(self, name, doc):
        self._partial(name).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def model(self, name, model):
        save_model(self._partial(name), model)

    def publish(self, config):
        for name in self.names:
            os.replace(self.root / f"{name}.partial", self.root / name)
        manifest = {
            "tool": "corrtensor",
            "version": __version__,
            "backend": BACKEND,
            "config": config,
            "files": {n: sha256_file(self.root / n) for n in sorted(self.names)},
        }
        tmp = self.root / "manifest.json.partial"
        tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        os.replace(tmp, self.root / "manifest.json")


def _normalize(data: Dataset, mode):
    if mode == "none":
        return data
    flat = data.samples.reshape(len(data), -1)
    norms = np.linalg.norm(flat, axis=1)
    if np.any(norms == 0):
        raise ConfigError("cannot unit-normalize an all-zero sample")
    x = data.samples / norms.reshape((-1,) + (1,) * (data.samples.ndim - 1))
    return Dataset(x, data.labels, data.outlier_mask, {**data.provenance, "normalize": mode})


def _load(cfg, test=False):
    path = cfg["test_data"] if test else cfg["data"]
    labels = cfg["test_labels"] if test else cfg["labels"]
    if path == "synthetic":
        data = synthetic_lowrank(
            cfg["synthetic_classes"],
            cfg["synthetic_per_class"],
            shape=cfg["synthetic_shape"],
            ranks=cfg["synthetic_ranks"],
            noise=cfg["synthetic_noise"],
            class_scale=cfg["synthetic_class_scale"],
            seed=cfg["seed"] + (1 if test else 0),
        )
    else:
        data = load_dataset(path, labels)
    return _normalize(data, cfg["normalize"])


def _ranks(cfg, shape, k1, k2):
    if len(shape) == 2:
        return (k1, k2)
    if len(shape) == 3:
        return (k1, k2, cfg["k3"] or shape[2])
    raise ConfigError(f"unsupported sample shape {shape}")


def _check_methods(cfg, shape):
    if len(shape) != 2:
        bad = [m for m in cfg["method"] if m != "corr-tensor"]
        if bad:
            raise ConfigError(f"{', '.join(bad)} need matrix samples; data has shape {shape}")


def _variants(cfg):
    """(method, params) pairs; correntropy methods expand over alpha x beta."""
    out = []
    for m in cfg["method"]:
        if m in CORR_METHODS:
            out += [(m, CorrParams(a, b, cfg["p"])) for a in cfg["alpha"] for b in cfg["beta"]]
        else:
            out.append((m, None))
    return out


def _variant_name(method, params, suffix=""):
    if params is None:
        return f"{method}{suffix}"
    return f"{method}_a{params.alpha:g}_b{params.beta:g}_p{params.p:g}{suffix}"


def _fit(method, samples, ranks, cfg, params):
    conf = FitConfig(ranks[0], ranks[1], cfg["max_iters"], cfg["tol"], cfg["seed"])
    if method == "corr-tensor":
        return fit_corr_tensor(samples, ranks, conf, params)
    return fit_method(method, samples, conf, params)


def _check_rank_range(shape, ranks):
    if any(not 1 <= r <= d for r, d in zip(ranks, shape)):
        raise ConfigError(f"ranks {tuple(ranks)} out of range for sample shape {tuple(shape)}")


def _params_dict(params):
    return None if params is None else params.to_dict()


# -------------------------------------------------------------------- tasks


def cmd_reconstruct(cfg, out: _Outputs, log):
    data = _load(cfg)
    shape = data.sample_shape
    _check_methods(cfg, shape)
    grid = cfg["npc"] or [cfg["k1"]]
    for k in grid:
        _check_rank_range(shape, _ranks(cfg, shape, k, k))
    rows = []
    for method, params in _variants(cfg):
        for k in grid:
            ranks = _ranks(cfg, shape, k, k)
            errs = []
            for t in range(cfg["trials"]):
                spec = parse_outlier_spec(cfg["outliers"], _trial_seed(cfg["seed"], t))
                d = inject_outliers(data, spec)
                model = _fit(method, d.samples, ranks, cfg, params)
                excl = np.flatnonzero(d.outlier_mask)
                if method == "corr-tensor":
                    errs.append(tensor_reconstruction_error(model, d.samples, excl))
                else:
                    errs.append(reconstruction_error(model, d.samples, excl))
                if t == 0 and cfg["save_models"]:
                    out.model(f"models/{_variant_name(method, params, f'_npc{k}')}.model", model)
            p = params
            rows.append((k, method, p and p.alpha, p and p.beta, float(np.mean(errs)), float(np.std(errs))))
            log(f"{method} npc={k}: {rows[-1][4]:.6g} +- {rows[-1][5]:.3g}")
    out.csv("reconstruct.csv", ["npc", "method", "alpha", "beta", "mean_error", "std"], rows)


def _class_splits(cfg, data, test_data):
    """Fixed test set (when requested) and the per-trial training draws."""
    try:
        return list(_draw_splits(cfg, data, test_data))
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def _draw_splits(cfg, data, test_data):
    if test_data is not None:
        test = test_data
        if cfg["test_per_class"] is not None:
            test, _ = split(test_data, per_class=cfg["test_per_class"], seed=cfg["seed"])
        pool = data
    elif cfg["test_per_class"] is not None:
        test, pool = split(data, per_class=cfg["test_per_class"], seed=cfg["seed"])
    else:
        test, pool = None, data
    for t in range(cfg["trials"]):
        ts = _trial_seed(cfg["seed"], t)
        train, rest = split(pool, per_class=cfg["train_per_class"], seed=ts)
        yield t, ts, train, (rest if test is None else test)


def cmd_classify(cfg, out: _Outputs, log):
    data = _load(cfg)
    if data.labels is None:
        raise ConfigError("classify needs labels (--labels)")
    test_data = _load(cfg, test=True) if cfg["test_data"] is not None else None
    if test_data is not None and test_data.labels is None:
        raise ConfigError("test data needs labels (--test-labels)")
    shape = data.sample_shape
    _check_methods(cfg, shape)
    ranks = _ranks(cfg, shape, cfg["k1"], cfg["k2"])
    _check_rank_range(shape, ranks)
    classes = [int(c) for c in np.unique(data.labels)]
    variants = _variants(cfg)
    results = {i: [] for i in range(len(variants))}
    n_train = n_test = None
    for t, ts, train, test in _class_splits(cfg, data, test_data):
        train = inject_outliers(train, parse_outlier_spec(cfg["outliers"], ts))
        n_train, n_test = len(train), len(test)
        for i, (method, params) in enumerate(variants):
            model = _fit(method, train.samples, ranks, cfg, params)
            clf_params = params or CorrParams(cfg["alpha"][0], cfg["beta"][0], cfg["p"])
            # non-correntropy methods use unit weights for the class centers
            clf = fit_classifier(model, train.labels, clf_params, uniform_weights=params is None)
            pred = classify(clf, test.samples)
            cm = confusion_matrix(test.labels, pred, classes)
            per_class = {str(c): float(cm[j, j] / max(cm[j].sum(), 1)) for j, c in enumerate(classes)}
            acc = float(np.mean(pred == test.labels))
            results[i].append({
                "trial": t,
                "seed": ts,
                "accuracy": acc,
                "per_class_accuracy": per_class,
                "confusion_matrix": cm.tolist(),
                "iterations": model.iterations,
                "converged": bool(model.converged),
            })
            if t == 0 and cfg["save_models"]:
                out.model(f"models/{_variant_name(method, params)}.model", model)
            log(f"trial {t} {_variant_name(method, params)}: {acc:.4f}")
    report = {"classes": classes, "n_train": n_train, "n_test": n_test, "results": []}
    for i, (method, params) in enumerate(variants):
        accs = [r["accuracy"] for r in results[i]]
        report["results"].append({
            "method": method,
            "params": _params_dict(params),
            "mean_accuracy": float(np.mean(accs)),
            "std_accuracy": float(np.std(accs)),
            "trials": results[i],
        })
    out.json("classify.json", report)


def cmd_cluster(cfg, out: _Outputs, log):
    data = _load(cfg)
    if data.labels is None:
        raise ConfigError("cluster needs labels (--labels) to score AC and NMI")
    shape = data.sample_shape
    _check_methods(cfg, shape)
    ranks = _ranks(cfg, shape, cfg["k1"], cfg["k2"])
    _check_rank_range(shape, ranks)
    k = cfg["clusters"] or int(np.unique(data.labels).size)
    variants = _variants(cfg)
    report = {"clusters": k, "results": []}
    sweep = {}
    for method, params in variants:
        sim_params = params or CorrParams(cfg["alpha"][0], cfg["beta"][0], cfg["p"])
        trials = []
        for t in range(cfg["trials"]):
            ts = _trial_seed(cfg["seed"], t)
            d = inject_outliers(data, parse_outlier_spec(cfg["outliers"], ts))
            model = _fit(method, d.samples, ranks, cfg, params)
            keep = ~d.outlier_mask
            rep = cluster_cores(model.cores[keep], d.labels[keep], k, sim_params, cfg["neighbor_fraction"])
            trials.append({"trial": t, "seed": ts, "ac": float(rep.ac), "nmi": float(rep.nmi),
                           "iterations": rep.iterations, "labels": rep.labels.tolist()})
            if t == 0:
                name = _variant_name(method, params)
                out.csv(f"decision_graph_{name}.csv", ["index", "rho", "delta", "selected"],
                        rep.peaks.decision_graph_rows())
                out.csv(f"similarity_{name}.csv", [f"s{j}" for j in range(rep.similarity.shape[1])],
                        rep.similarity.tolist())
                if cfg["save_models"]:
                    out.model(f"models/{name}.model", model)
        ac = [r["ac"] for r in trials]
        nm = [r["nmi"] for r in trials]
        entry = {"method": method, "params": _params_dict(params),
                 "ac_mean": float(np.mean(ac)), "ac_std": float(np.std(ac)),
                 "nmi_mean": float(np.mean(nm)), "nmi_std": float(np.std(nm)), "trials": trials}
        report["results"].append(entry)
        if params is not None:
            sweep.setdefault((method, params.beta), []).append((params.alpha, entry["ac_mean"], entry["nmi_mean"]))
        log(f"{_variant_name(method, params)}: AC {entry['ac_mean']:.4f} NMI {entry['nmi_mean']:.4f}")
    out.json("cluster.json", report)
    for (method, beta), rows in sweep.items():
        out.csv(f"alpha_sweep_{method}_b{beta:g}.csv", ["alpha", "ac", "nmi"], rows)


def cmd_loss_surface(cfg, out: _Outputs, log):
    grid = np.linspace(cfg["grid_min"], cfg["grid_max"], cfg["grid_steps"])
    for a in cfg["alpha"]:
        for b in cfg["beta"]:
            params = CorrParams(a, b)
            a1, a2 = np.meshgrid(grid, grid, indexing="ij")
            norms = np.hypot(a1, a2).ravel()
            # one residual per grid point: the distance of A = [a1, a2] from B = 0
            loss = -params.gamma * np.expm1(-params.lam * norms**a)
            rows = zip(a1.ravel(), a2.ravel(), loss)
            out.csv(f"loss_surface_a{a:g}_b{b:g}.csv", ["a1", "a2", "loss"], rows)
            log(f"alpha={a:g} beta={b:g}: max loss {float(loss.max()):.6g}")


COMMANDS = {
    "reconstruct": cmd_reconstruct,
    "classify": cmd_classify,
    "cluster": cmd_cluster,
    "loss-surface": cmd_loss_surface,
}


def run(cfg: dict, log=None) -> None:
    """Run one resolved task; raises on failure."""
    log = log or (lambda msg: print(msg, file=sys.stderr))
    out = _Outputs(cfg["out"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        with np.errstate(over="raise", invalid="raise", divide="raise", under="ignore"):
            COMMANDS[cfg["task"]](cfg, out, log)
    out.publish({k: v for k, v in cfg.items() if k != "out"})


def main(argv=None) -> int:
    try:
        cfg = resolve_config(argv)
    except ConfigError as exc:
        print(f"corrtensor: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"corrtensor: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        run(cfg)
    except ConfigError as exc:
        print(f"corrtensor: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, FormatError) as exc:
        print(f"corrtensor: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CorrTensorError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"corrtensor: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
