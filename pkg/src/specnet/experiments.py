"""Config-driven experiment runners behind the command line.

A run is described by a flat ``key = value`` configuration (see ``KEYS``).
Every runner resolves defaults, validates all keys, echoes the effective
configuration into the output directory and writes fixed-header CSV files.
Relative errors and objective gaps need the dense oracle; above the oracle
cap those fields hold the ``no-reference`` marker instead.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular

from .data import (
    clustering_accuracy,
    gen_one_moon,
    gen_two_moons,
    kmeans_1d,
    load_mnist_idx,
    read_points_csv,
    surrogate_digits_idx,
    write_points_csv,
)
from .errors import ConfigError, DegenerateEmbeddingError, DivergenceError, InputError
from .graph import (
    PointCloud,
    build_gaussian_affinity,
    build_knn_affinity,
    largest_component,
    load_coo,
    save_coo,
    subgraph,
)
from .la import (
    BatchPlan,
    Pencil,
    WorkCounter,
    f1_value,
    f2_value,
    init_embedding,
    load_embedding,
    rayleigh_ritz,
    run_solver,
    save_embedding,
)
from .nn import init_mlp, load_mlp, mlp_forward, save_mlp, train
from .oracle import ORACLE_CAP, cholesky_spd, relative_error, subspace_error

log = logging.getLogger(__name__)

NO_REF = "no-reference"
DATASETS = ("one-moon", "two-moons", "mnist", "points", "none")
GRAPHS = ("gaussian", "knn", "coo")


def _bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text):
    parts = [t for t in str(text).replace(" ", "").split(",") if t]
    return [int(t) for t in parts]


def _alpha(text):
    return "theory" if str(text).strip() == "theory" else float(text)


def _opt_float(text):
    return None if str(text).strip() in ("", "default") else float(text)


# key -> (parser, default, choices or None, help)
KEYS = {
    "dataset": (str, "one-moon", DATASETS, "point generator or source"),
    "n": (int, 500, None, "number of training points (generators, mnist subset)"),
    "test_n": (int, 0, None, "number of test points; 0 disables the test split"),
    "data_seed": (int, 0, None, "seed for data generation and subset selection"),
    "noise_var": (_opt_float, None, None, "generator noise variance; default per generator"),
    "points_file": (str, "", None, "point CSV for dataset=points"),
    "test_points_file": (str, "", None, "test point CSV for dataset=points"),
    "mnist_images": (str, "", None, "IDX image file for dataset=mnist"),
    "mnist_labels": (str, "", None, "IDX label file for dataset=mnist"),
    "mnist_surrogate": (_bool, False, None, "write surrogate IDX digits when no MNIST files are given"),
    "graph": (str, "gaussian", GRAPHS, "affinity construction"),
    "sigma": (float, 0.1, None, "Gaussian bandwidth"),
    "threshold": (float, 0.6, None, "Gaussian truncation threshold"),
    "knn_k": (int, 16, None, "neighbors per node for graph=knn"),
    "graph_file": (str, "", None, "COO text file for graph=coo"),
    "component": (str, "largest", ("largest", "all"), "restrict to the largest connected component"),
    "objective": (str, "f2", ("f1", "f2"), "linear-algebra objective"),
    "scheme": (str, "neighbor", ("local", "full", "neighbor"), "gradient evaluation scheme"),
    "model": (str, "specnet2", ("specnet2", "specnet1"), "network model for train-nn"),
    "K": (int, 2, None, "number of nontrivial eigenvectors sought"),
    "deflate": (_bool, True, None, "remove the constant eigenvector (f2 and SpecNet2)"),
    "batch_size": (int, 4, None, "batch size"),
    "batch_order": (str, "random", ("random", "contiguous"), "how batches partition the nodes"),
    "epochs": (int, 100, None, "number of epochs"),
    "alpha": (_alpha, "theory", None, "step size for solve-la, or 'theory'"),
    "init_scale": (float, 0.0, None, "uniform init half-width for solve-la; 0 uses the theory ball"),
    "lr": (float, 1e-3, None, "Adam learning rate for train-nn"),
    "hidden": (_int_list, [128], None, "comma-separated hidden layer widths"),
    "out_dim": (int, 0, None, "network output width; 0 derives it from model and K"),
    "xi_grad": (_bool, True, None, "Adam update of the SpecNet1 orthogonalization layer"),
    "seeds": (_int_list, [0], None, "comma-separated run seeds"),
    "record_every": (int, 1, None, "epochs between CSV rows"),
    "count_work": (_bool, True, None, "instrument multiply-add counts in solve-la"),
    "checkpoint": (str, "", None, "checkpoint file for eval"),
    "out": (str, "out", None, "output directory"),
}


@dataclass
class Config:
    values: dict

    def __getattr__(self, key):
        try:
            return self.__dict__["values"][key]
        except KeyError:
            raise AttributeError(key) from None

    def dump(self):
        lines = []
        for key in KEYS:
            v = self.values[key]
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            elif v is None:
                v = "default"
            elif isinstance(v, float):
                v = repr(v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"


def parse_config_text(text, origin="config"):
    """Raw ``key -> string`` pairs; ``#`` starts a comment."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (t.strip() for t in line.split("=", 1))
        raw[key] = value
    return raw


def resolve_config(*layers):
    """Merge raw string layers (later wins) over the defaults and validate every key."""
    merged = {}
    for layer in layers:
        merged.update({k: v for k, v in layer.items() if v is not None})
    unknown = sorted(set(merged) - set(KEYS))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    values = {}
    for key, (parse, default, choices, _) in KEYS.items():
        if key in merged:
            try:
                val = parse(merged[key]) if isinstance(merged[key], str) else merged[key]
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
        else:
            val = list(default) if isinstance(default, list) else default
        if choices is not None and val not in choices:
            raise ConfigError(f"{key} must be one of {', '.join(choices)} (got {val!r})")
        values[key] = val
    cfg = Config(values)
    _validate(cfg)
    return cfg


def _validate(cfg):
    positive = ("n", "K", "batch_size", "knn_k", "record_every")
    for key in positive:
        if cfg.values[key] < 1:
            raise ConfigError(f"{key} must be >= 1")
    if cfg.epochs < 0 or cfg.test_n < 0 or cfg.out_dim < 0:
        raise ConfigError("epochs, test_n and out_dim must be >= 0")
    if not cfg.seeds:
        raise ConfigError("seeds must list at least one seed")
    if not cfg.hidden or min(cfg.hidden) < 1:
        raise ConfigError("hidden widths must be positive")
    if cfg.sigma <= 0 or not 0 <= cfg.threshold < 1:
        raise ConfigError("need sigma > 0 and threshold in [0, 1)")
    if cfg.alpha != "theory" and not cfg.alpha > 0:
        raise ConfigError("alpha must be positive or 'theory'")
    if not cfg.lr > 0 or cfg.init_scale < 0:
        raise ConfigError("lr must be positive and init_scale nonnegative")
    if cfg.out_dim and cfg.out_dim != expected_out_dim(cfg):
        raise ConfigError(
            f"out_dim={cfg.out_dim} does not match model {cfg.model} with K={cfg.K} "
            f"(expected {expected_out_dim(cfg)})"
        )


def expected_out_dim(cfg):
    """SpecNet2 outputs the K nontrivial directions; SpecNet1 also carries the constant one."""
    return cfg.K if cfg.model == "specnet2" else cfg.K + 1


def load_config(path=None, overrides=None):
    layers = []
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        layers.append(parse_config_text(text, str(path)))
    if overrides:
        layers.append(dict(overrides))
    return resolve_config(*layers)


def _outdir(cfg):
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from None
    (out / "config.txt").write_text(cfg.dump())
    return out


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row.get(h)) for h in header])


# ---------------------------------------------------------------- data


@dataclass
class Dataset:
    train: PointCloud | None
    test: PointCloud | None = None


def _generate(cfg, n, seed):
    if cfg.dataset == "one-moon":
        kw = {} if cfg.noise_var is None else {"noise_var": cfg.noise_var}
        return gen_one_moon(n, seed=seed, **kw)
    kw = {} if cfg.noise_var is None else {"noise_var": cfg.noise_var}
    return gen_two_moons(n, seed=seed, **kw)


def _mnist_paths(cfg, out):
    if cfg.mnist_images and cfg.mnist_labels:
        return Path(cfg.mnist_images), Path(cfg.mnist_labels)
    if not cfg.mnist_surrogate:
        raise ConfigError("dataset=mnist needs mnist_images and mnist_labels, or mnist_surrogate = true")
    total = cfg.n + cfg.test_n
    return surrogate_digits_idx(Path(out) / "mnist", n=total, seed=cfg.data_seed)


def load_dataset(cfg, out=None):
    """Training (and optional test) points. The test split is an independent draw."""
    if cfg.dataset == "none":
        return Dataset(None)
    if cfg.dataset in ("one-moon", "two-moons"):
        train_pc = _generate(cfg, cfg.n, cfg.data_seed)
        test_pc = _generate(cfg, cfg.test_n, cfg.data_seed + 1) if cfg.test_n else None
        return Dataset(train_pc, test_pc)
    if cfg.dataset == "points":
        if not cfg.points_file:
            raise ConfigError("dataset=points needs points_file")
        test_pc = read_points_csv(cfg.test_points_file) if cfg.test_points_file else None
        return Dataset(read_points_csv(cfg.points_file), test_pc)
    img, lab = _mnist_paths(cfg, out or cfg.out)
    full = load_mnist_idx(img, lab)
    if cfg.n + cfg.test_n > full.n:
        raise ConfigError(f"n + test_n = {cfg.n + cfg.test_n} exceeds the {full.n} available images")
    mixed = full.subset(cfg.n + cfg.test_n, seed=cfg.data_seed)
    train_pc = PointCloud(mixed.images[: cfg.n], mixed.labels[: cfg.n])
    test_pc = PointCloud(mixed.images[cfg.n:], mixed.labels[cfg.n:]) if cfg.test_n else None
    return Dataset(train_pc, test_pc)


def build_graph(cfg, pc):
    """Affinity for ``pc`` and the indices of the nodes kept (largest component by default)."""
    if cfg.graph == "coo":
        if not cfg.graph_file:
            raise ConfigError("graph=coo needs graph_file")
        W = load_coo(cfg.graph_file)
        if pc is not None and pc.n != W.n:
            raise InputError(f"graph has {W.n} nodes but the dataset has {pc.n} points")
    elif pc is None:
        raise ConfigError(f"graph={cfg.graph} needs a dataset")
    elif cfg.graph == "gaussian":
        W = build_gaussian_affinity(pc, cfg.sigma, cfg.threshold)
    else:
        W = build_knn_affinity(pc, cfg.knn_k)
    nodes = np.arange(W.n)
    if cfg.component == "largest":
        nodes = largest_component(W)
        if nodes.size < W.n:
            log.info("keeping largest component: %d of %d nodes", nodes.size, W.n)
            W = subgraph(W, nodes)
    return W, nodes


def _restrict(pc, nodes):
    if pc is None or nodes.size == pc.n:
        return pc
    labels = pc.labels[nodes] if pc.labels is not None else None
    return PointCloud(pc.points[nodes], labels)


@dataclass
class Problem:
    """A pencil on the kept nodes with its points (None for graph-only runs)."""

    pencil: Pencil
    points: PointCloud | None

    @property
    def has_reference(self):
        return self.pencil.n <= ORACLE_CAP


def make_problem(cfg, pc, deflate):
    W, nodes = build_graph(cfg, pc)
    return Problem(Pencil.from_affinity(W, deflate=deflate), _restrict(pc, nodes))


# ---------------------------------------------------------------- commands


def cmd_gen_data(cfg):
    out = _outdir(cfg)
    if cfg.dataset in ("none", "points"):
        raise ConfigError("gen-data needs a generator; dataset must be one of one-moon, two-moons, mnist")
    ds = load_dataset(cfg, out)
    paths = [out / "points.csv"]
    write_points_csv(ds.train, paths[0])
    if ds.test is not None:
        paths.append(out / "test_points.csv")
        write_points_csv(ds.test, paths[1])
    return paths


def cmd_build_graph(cfg):
    out = _outdir(cfg)
    ds = load_dataset(cfg, out)
    W, nodes = build_graph(cfg, ds.train)
    save_coo(W, out / "graph.coo")
    np.savetxt(out / "nodes.txt", nodes, fmt="%d")
    deg = np.asarray(W.matrix.sum(axis=1)).ravel()
    row = {
        "n": W.n,
        "nnz": W.nnz,
        "mean_row_nnz": W.nnz / W.n,
        "min_degree": deg.min(),
        "max_degree": deg.max(),
        "dropped_nodes": (ds.train.n if ds.train is not None else W.n) - W.n,
    }
    write_csv(out / "graph_info.csv", list(row), [row])
    return out / "graph.coo"


SOLVE_HEADER_HEAD = ["epoch", "objective_value", "objective_gap", "grad_norm"]
SOLVE_HEADER_TAIL = [
    "ball_radius",
    "wall_time_s",
    "madds",
    "mean_neighborhood",
    "cost_full_axis",
    "cost_neighbor_axis",
]


def solve_header(K):
    return SOLVE_HEADER_HEAD + [f"rel_err_{j}" for j in range(1, K + 1)] + SOLVE_HEADER_TAIL


def optimal_value(objective, eigenvalues, K):
    """``f2* = -sum(lambda^2)`` and ``f1* = K - sum(lambda)`` over the leading ``K``."""
    lam = eigenvalues[:K]
    return float(-np.sum(lam * lam)) if objective == "f2" else float(K - np.sum(lam))


def _solve_rows(p, report, K, eig, plan, ref_ok, objective):
    rows, cum_full, cum_nb = [], 0.0, 0.0
    fstar = optimal_value(objective, eig.eigenvalues, K) if ref_ok else None
    prev_epoch = 0
    for rec in report.records:
        span = rec.epoch - prev_epoch
        prev_epoch = rec.epoch
        cum_full += p.n * p.n / plan.max_size * span
        cum_nb += p.n * rec.mean_neighborhood / plan.max_size * span
        row = {
            "epoch": rec.epoch,
            "objective_value": rec.objective,
            "objective_gap": rec.objective - fstar if ref_ok else NO_REF,
            "grad_norm": rec.grad_norm,
            "ball_radius": rec.ball_radius,
            "wall_time_s": rec.wall_time,
            "madds": rec.madds,
            "mean_neighborhood": rec.mean_neighborhood,
            "cost_full_axis": cum_full,
            "cost_neighbor_axis": cum_nb,
        }
        for j in range(K):
            row[f"rel_err_{j + 1}"] = NO_REF if not ref_ok else rec.extra.get(f"rel_err_{j + 1}")
        rows.append(row)
    return rows


def _plan(cfg, n, seed):
    if cfg.batch_size >= n:
        return BatchPlan.single(n)
    if cfg.batch_order == "contiguous":
        return BatchPlan.contiguous(n, cfg.batch_size, seed=seed)
    return BatchPlan.random(n, cfg.batch_size, seed=seed)


def cmd_solve_la(cfg):
    """One CSV per seed (``solve_seed{s}.csv``) plus ``embedding_seed{s}.txt``.

    Divergence keeps the partial CSV, writes ``error_seed{s}.txt`` and re-raises.
    """
    out = _outdir(cfg)
    ds = load_dataset(cfg, out)
    deflate = cfg.deflate
    prob = make_problem(cfg, ds.train, deflate)
    p = prob.pencil
    K = cfg.K
    ref_ok = prob.has_reference
    eig = p.oracle() if ref_ok else None
    if ref_ok and K > p.n:
        raise ConfigError(f"K={K} exceeds n={p.n}")
    written = []
    for seed in cfg.seeds:
        plan = _plan(cfg, p.n, seed)
        alpha = None if cfg.alpha == "theory" else cfg.alpha
        if cfg.init_scale > 0:
            Y0 = np.random.default_rng(seed).uniform(-cfg.init_scale, cfg.init_scale, (p.n, K))
        else:
            Y0 = init_embedding(p, K, seed=seed)
        counter = WorkCounter() if cfg.count_work else None

        def on_record(rec, emb):
            if ref_ok:
                try:
                    U, _ = rayleigh_ritz(p, emb.Y)
                    for j in range(K):
                        rec.extra[f"rel_err_{j + 1}"] = relative_error(eig.eigenvectors[:, j], U[:, j])
                except DegenerateEmbeddingError:
                    for j in range(K):
                        rec.extra[f"rel_err_{j + 1}"] = math.nan
            return False

        path = out / f"solve_seed{seed}.csv"
        try:
            emb, report = run_solver(
                p, K, cfg.objective, cfg.scheme, plan=plan, alpha=alpha, epochs=cfg.epochs,
                Y0=Y0, counter=counter, record_every=cfg.record_every, callback=on_record,
            )
        except DivergenceError as exc:
            if exc.report is not None:
                rows = _solve_rows(p, exc.report, K, eig, plan, ref_ok, cfg.objective)
                write_csv(path, solve_header(K), rows)
            (out / f"error_seed{seed}.txt").write_text(f"{exc.category}: {exc}\n")
            raise
        rows = _solve_rows(p, report, K, eig, plan, ref_ok, cfg.objective)
        write_csv(path, solve_header(K), rows)
        save_embedding(emb.Y, out / f"embedding_seed{seed}.txt")
        written.append(path)
        log.info("seed %d: %d epochs, objective %.6g", seed, report.epochs_completed, report.records[-1].objective)
    return written


def train_header(K):
    errs = [f"train_rel_err_{j}" for j in range(1, K + 1)] + [f"test_rel_err_{j}" for j in range(1, K + 1)]
    return (
        ["seed", "epoch", "f2_loss", "f2_gap", "f1_loss", "f1_gap"]
        + errs
        + ["accuracy_train", "accuracy_test", "wall_time_s", "status"]
    )


SUMMARY_HEADER = [
    "epoch",
    "n_seeds",
    "accuracy_mean",
    "accuracy_std",
    "train_rel_err_1_mean",
    "train_rel_err_1_std",
]


@dataclass
class _Split:
    """Evaluation data for one split: inputs, pencil, oracle and labels."""

    X: np.ndarray
    pencil: Pencil
    eig: object
    labels: np.ndarray | None


def _make_split(cfg, pc, deflate):
    if pc is None:
        return None
    prob = make_problem(cfg, pc, deflate)
    p = prob.pencil
    eig = p.oracle() if prob.has_reference else None
    labels = prob.points.labels if cfg.dataset == "two-moons" else None
    return _Split(prob.points.points, p, eig, labels)


def network_embedding(Y, split, K, skip):
    """Rayleigh-Ritz vectors of the network output on the split's pencil."""
    U, _ = rayleigh_ritz(split.pencil, Y)
    if U.shape[1] < skip + K:
        raise InputError(f"network output has {U.shape[1]} columns, need {skip + K}")
    return U[:, skip:skip + K]


def split_metrics(Y, split, K, skip, prefix):
    row = {}
    try:
        U = network_embedding(Y, split, K, skip)
    except DegenerateEmbeddingError:
        U = None
    for j in range(K):
        key = f"{prefix}_rel_err_{j + 1}"
        if split.eig is None:
            row[key] = NO_REF
        elif U is None:
            row[key] = math.nan
        else:
            row[key] = relative_error(split.eig.eigenvectors[:, skip + j], U[:, j])
    if split.labels is not None and U is not None:
        acc_key = "accuracy_train" if prefix == "train" else "accuracy_test"
        try:
            row[acc_key] = clustering_accuracy(kmeans_1d(U[:, 0]), split.labels)
        except DegenerateEmbeddingError:
            row[acc_key] = math.nan
    return row


def _loss_row(model, params, orth, split, K):
    p = split.pencil
    Y = mlp_forward(params, split.X)
    row = {}
    if model == "specnet2":
        row["f2_loss"] = f2_value(p, Y)
        if split.eig is not None:
            row["f2_gap"] = row["f2_loss"] - optimal_value("f2", split.eig.eigenvalues, K)
        else:
            row["f2_gap"] = NO_REF
    else:
        # f1 is defined on Y^T D Y = n^2 I; evaluate at the normalized output
        Yt = Y @ orth.Xi
        try:
            L = cholesky_spd(Yt.T @ (p.d[:, None] * Yt))
        except DegenerateEmbeddingError:
            return {"f1_loss": math.nan, "f1_gap": math.nan}
        Yt = p.n * solve_triangular(L, Yt.T, lower=True).T
        row["f1_loss"] = f1_value(p, Yt)
        if split.eig is not None:
            row["f1_gap"] = row["f1_loss"] - optimal_value("f1", split.eig.eigenvalues, K + 1)
        else:
            row["f1_gap"] = NO_REF
    return row


def cmd_train_nn(cfg):
    """Per-seed CSVs and checkpoints, the merged ``train.csv`` and ``summary.csv``."""
    out = _outdir(cfg)
    ds = load_dataset(cfg, out)
    if ds.train is None:
        raise ConfigError("train-nn needs a dataset")
    # SpecNet1 keeps the constant eigenvector; SpecNet2 removes it by deflation
    deflate = cfg.model == "specnet2" and cfg.deflate
    skip = 0 if deflate else 1
    train_split = _make_split(cfg, ds.train, deflate)
    test_split = None
    if ds.test is not None and cfg.graph != "coo":
        test_split = _make_split(cfg, ds.test, deflate)
    K = cfg.K
    sizes = [train_split.X.shape[1]] + list(cfg.hidden) + [expected_out_dim(cfg)]
    if sizes[-1] < skip + K:
        raise ConfigError("network output too narrow for K")
    header = train_header(K)
    merged = []
    per_seed = []
    for seed in cfg.seeds:
        params = init_mlp(sizes, seed=seed)

        def callback(epoch, prm, orth):
            if epoch % cfg.record_every and epoch != cfg.epochs:
                return {"skip": True}
            xi = orth.Xi if orth is not None else None
            Y = mlp_forward(prm, train_split.X)
            Y = Y @ xi if xi is not None else Y
            row = _loss_row(cfg.model, prm, orth, train_split, K)
            row.update(split_metrics(Y, train_split, K, skip, "train"))
            if test_split is not None:
                Yt = mlp_forward(prm, test_split.X)
                Yt = Yt @ xi if xi is not None else Yt
                row.update(split_metrics(Yt, test_split, K, skip, "test"))
            return row

        result = train(
            params, train_split.X, train_split.pencil, cfg.model, cfg.scheme,
            batch_size=cfg.batch_size, lr=cfg.lr, epochs=cfg.epochs, seed=seed,
            callback=callback, xi_grad=cfg.xi_grad,
        )
        rows = []
        for h in result.history:
            if h.get("skip"):
                continue
            row = dict(h)
            row["seed"] = seed
            row["status"] = "ok"
            rows.append(row)
        if result.failed:
            rows.append({"seed": seed, "epoch": rows[-1]["epoch"] if rows else 0, "status": f"failed {result.failed}"})
            log.warning("seed %d failed: %s", seed, result.failed)
        write_csv(out / f"train_seed{seed}.csv", header, rows)
        save_mlp(result.params, out / f"model_seed{seed}.txt", xi=result.orth.Xi if result.orth else None)
        merged += rows
        per_seed.append(rows)
    write_csv(out / "train.csv", header, merged)
    write_csv(out / "summary.csv", SUMMARY_HEADER, summarize(per_seed))
    return out / "train.csv"


def _num(v):
    return float(v) if isinstance(v, (int, float, np.floating)) and not isinstance(v, bool) else math.nan


def summarize(per_seed):
    """Mean and population std over seeds of accuracy and the first relative error, per epoch."""
    epochs = sorted({r["epoch"] for rows in per_seed for r in rows if r.get("status") == "ok"})
    out = []
    for ep in epochs:
        acc = [_num(r.get("accuracy_train")) for rows in per_seed for r in rows
               if r["epoch"] == ep and r.get("status") == "ok"]
        err = [_num(r.get("train_rel_err_1")) for rows in per_seed for r in rows
               if r["epoch"] == ep and r.get("status") == "ok"]
        acc = np.array([a for a in acc if not math.isnan(a)])
        err = np.array([e for e in err if not math.isnan(e)])
        out.append({
            "epoch": ep,
            "n_seeds": len([1 for rows in per_seed if any(r["epoch"] == ep and r.get("status") == "ok" for r in rows)]),
            "accuracy_mean": acc.mean() if acc.size else "",
            "accuracy_std": acc.std() if acc.size else "",
            "train_rel_err_1_mean": err.mean() if err.size else "",
            "train_rel_err_1_std": err.std() if err.size else "",
        })
    return out


EVAL_HEADER = ["split", "eigenvector", "rel_err", "subspace_error", "accuracy"]


def _is_mlp_file(path):
    with open(path) as fh:
        return fh.readline().startswith("sizes ")


def cmd_eval(cfg):
    """Metrics of an embedding checkpoint (solve-la) or a network checkpoint (train-nn)."""
    out = _outdir(cfg)
    if not cfg.checkpoint:
        raise ConfigError("eval needs checkpoint")
    try:
        is_mlp = _is_mlp_file(cfg.checkpoint)
    except OSError as exc:
        raise ConfigError(f"cannot read checkpoint {cfg.checkpoint}: {exc.strerror}") from None
    K = cfg.K
    rows = []
    if not is_mlp:
        ds = load_dataset(cfg, out)
        prob = make_problem(cfg, ds.train, cfg.deflate)
        Y = load_embedding(cfg.checkpoint)
        if Y.shape[0] != prob.pencil.n:
            raise InputError(f"checkpoint has {Y.shape[0]} rows but the pencil has {prob.pencil.n} nodes")
        if Y.shape[1] != K:
            raise InputError(f"checkpoint has {Y.shape[1]} columns, expected K={K}")
        labels = prob.points.labels if (prob.points is not None and cfg.dataset == "two-moons") else None
        split = _Split(None, prob.pencil, prob.pencil.oracle() if prob.has_reference else None, labels)
        rows += _eval_rows("train", Y, split, K, 0)
    else:
        params, xi = load_mlp(cfg.checkpoint)
        deflate = cfg.model == "specnet2" and cfg.deflate
        skip = 0 if deflate else 1
        if params.sizes[-1] != expected_out_dim(cfg):
            raise InputError(
                f"checkpoint output width {params.sizes[-1]} does not match model {cfg.model} with K={K}"
            )
        ds = load_dataset(cfg, out)
        for name, pc in (("train", ds.train), ("test", ds.test)):
            if pc is None or (name == "test" and cfg.graph == "coo"):
                continue
            split = _make_split(cfg, pc, deflate)
            if split.X.shape[1] != params.sizes[0]:
                raise InputError(f"checkpoint input width {params.sizes[0]} != data dimension {split.X.shape[1]}")
            Y = mlp_forward(params, split.X)
            if xi is not None:
                Y = Y @ xi
            rows += _eval_rows(name, Y, split, K, skip)
    write_csv(out / "eval.csv", EVAL_HEADER, rows)
    return out / "eval.csv"


def _eval_rows(name, Y, split, K, skip):
    if split.eig is None:
        return [{"split": name, "eigenvector": j + 1, "rel_err": NO_REF, "subspace_error": NO_REF}
                for j in range(K)]
    try:
        U = network_embedding(Y, split, K, skip)
    except DegenerateEmbeddingError:
        return [{"split": name, "eigenvector": j + 1, "rel_err": math.nan, "subspace_error": math.nan}
                for j in range(K)]
    ref = split.eig.eigenvectors[:, skip:skip + K]
    sub = subspace_error(ref, U, split.pencil.d)
    acc = None
    if split.labels is not None:
        acc = clustering_accuracy(kmeans_1d(U[:, 0]), split.labels)
    return [
        {
            "split": name,
            "eigenvector": j + 1,
            "rel_err": relative_error(ref[:, j], U[:, j]),
            "subspace_error": sub,
            "accuracy": acc,
        }
        for j in range(K)
    ]


COMMANDS = {
    "gen-data": cmd_gen_data,
    "build-graph": cmd_build_graph,
    "solve-la": cmd_solve_la,
    "train-nn": cmd_train_nn,
    "eval": cmd_eval,
}
