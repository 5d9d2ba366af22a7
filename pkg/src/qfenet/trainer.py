"""Training loop, evaluation, checkpoints and the ansatz sweep."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import shutil
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import data as data_mod
from .circuits import PRESETS
from .config import ConfigError, RunConfig, parse_config_text
from .layers import softmax_cross_entropy
from .model import model_from_config
from .optim import STEPPED, AdamState, PlateauHalver, Schedule, adam_step
from .statevector import counter

log = logging.getLogger(__name__)

METRICS_FIELDS = ("epoch", "split", "cost", "accuracy", "seconds", "sims")
CHECKPOINT_MAGIC = b"QFENETCK"
CHECKPOINT_VERSION = 1


class NonFiniteLossError(FloatingPointError):
    pass


@dataclass
class MetricsRecord:
    epoch: int
    split: str
    cost: float
    accuracy: float
    seconds: float
    sims: int


# ----------------------------------------------------------------- data

def load_datasets(config: RunConfig):
    classes = config.classes
    if config.data_source == "stub":
        full = data_mod.stub_dataset(config.data_n_train + config.data_n_test,
                                     config.data_stub_size, classes, config.seed)
        cut = config.data_n_train
        return full.subset(np.arange(cut)), full.subset(np.arange(cut, len(full)))
    images, labels = data_mod.load_mnist(config.data_dir, "train")
    try:
        test_images, test_labels = data_mod.load_mnist(config.data_dir, "test")
    except FileNotFoundError:
        test_images = test_labels = None
    return data_mod.balanced_subset(
        images, labels, config.data_n_train, config.data_n_test, classes, config.seed,
        test_images, test_labels, config.data_downsample,
    )


# ----------------------------------------------------------- evaluation

def _map(fn, items, workers):
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def evaluate(model, dataset, workers=1):
    """Return ``(mean cost, accuracy, confusion matrix)``; argmax ties go to the lowest class."""
    def one(i):
        logits, _ = model.forward(dataset.images[i])
        return logits

    logits = _map(one, range(len(dataset)), workers)
    n_classes = dataset.labels.shape[1]
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    total = 0.0
    for i, z in enumerate(logits):
        loss, _ = softmax_cross_entropy(z, dataset.labels[i])
        total += loss
        confusion[dataset.labels[i].argmax(), int(np.argmax(z))] += 1
    n = max(len(dataset), 1)
    return total / n, float(np.trace(confusion)) / n, confusion


# ----------------------------------------------------------- checkpoint

def save_checkpoint(path, config: RunConfig, params, adam: AdamState, meta=None):
    """Write the magic header, format version, resolved config text and arrays."""
    arrays = {f"p/{k}": v for k, v in params.items()}
    arrays.update({f"m/{k}": v for k, v in adam.m.items()})
    arrays.update({f"v/{k}": v for k, v in adam.v.items()})
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    meta = dict(meta or {})
    meta["adam"] = {"t": adam.t, "lr": adam.lr, "beta1": adam.beta1,
                    "beta2": adam.beta2, "eps": adam.eps}
    cfg = config.to_text().encode()
    meta_raw = json.dumps(meta, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack(">HII", CHECKPOINT_VERSION, len(cfg), len(meta_raw)))
        fh.write(cfg)
        fh.write(meta_raw)
        fh.write(buf.getvalue())


def load_checkpoint(path):
    """Return ``(config, params, adam_state, meta)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a qfenet checkpoint")
    version, n_cfg, n_meta = struct.unpack(">HII", raw[8:18])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos = 18
    config = parse_config_text(raw[pos:pos + n_cfg].decode())
    pos += n_cfg
    meta = json.loads(raw[pos:pos + n_meta].decode())
    pos += n_meta
    with np.load(io.BytesIO(raw[pos:])) as npz:
        arrays = {k: npz[k] for k in npz.files}
    params = {k[2:]: v for k, v in arrays.items() if k.startswith("p/")}
    a = meta["adam"]
    adam = AdamState(lr=a["lr"], beta1=a["beta1"], beta2=a["beta2"], eps=a["eps"], t=a["t"],
                     m={k[2:]: v for k, v in arrays.items() if k.startswith("m/")},
                     v={k[2:]: v for k, v in arrays.items() if k.startswith("v/")})
    return config, params, adam, meta


def model_from_checkpoint(path, input_shape=None):
    config, params, _, meta = load_checkpoint(path)
    shape = tuple(meta.get("input_shape") or input_shape)
    model = model_from_config(config, shape, np.random.default_rng(config.seed))
    model.set_parameters(params)
    return model, config


# ------------------------------------------------------------- training

def _schedule(config):
    kind = config.train_schedule.strip().lower()
    if kind == "stepped":
        if config.train_epochs > STEPPED.epochs:
            raise ConfigError(f"stepped schedule covers {STEPPED.epochs} epochs")
        return STEPPED
    if kind in ("constant", "plateau"):
        return Schedule([(1, config.train_epochs, config.train_lr, config.train_batch)])
    sched = Schedule.from_text(config.train_schedule)
    if config.train_epochs > sched.epochs:
        raise ConfigError("explicit schedule shorter than train.epochs")
    return sched


def _write_csv(path, rows, header):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_metrics(path, records):
    rows = [[r.epoch, r.split, repr(r.cost), repr(r.accuracy), f"{r.seconds:.3f}", r.sims]
            for r in records]
    _write_csv(path, rows, METRICS_FIELDS)


def read_metrics(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return [MetricsRecord(int(r["epoch"]), r["split"], float(r["cost"]), float(r["accuracy"]),
                          float(r["seconds"]), int(r["sims"])) for r in rows]


def _dump_nonfinite(out_dir, epoch, batch_index, idx, losses):
    path = os.path.join(out_dir, "nonfinite_dump.json")
    with open(path, "w") as fh:
        json.dump({"epoch": epoch, "batch_index": batch_index,
                   "sample_indices": [int(i) for i in idx],
                   "losses": [repr(float(x)) for x in losses]}, fh, indent=2)
    return path


@dataclass
class TrainResult:
    records: list
    checkpoint: str
    model: object
    schedule_used: list


def train(config: RunConfig, datasets=None, log_every=None) -> TrainResult:
    """Train with mini-batch Adam; one train and one test record per epoch.

    Epoch 0 records evaluate the untrained model.  A train record's cost and
    accuracy are measured on the training set after that epoch's updates;
    its ``sims`` counts simulations of the gradient pass only.
    """
    config.validate()
    os.makedirs(config.out_dir, exist_ok=True)
    train_ds, test_ds = datasets or load_datasets(config)
    rng = np.random.default_rng(config.seed)
    model = model_from_config(config, train_ds.images.shape[1:], rng)
    schedule = _schedule(config)
    plateau = PlateauHalver(config.train_lr, config.train_patience) \
        if config.train_schedule.strip().lower() == "plateau" else None
    adam = AdamState(lr=schedule(1)[0])
    workers = max(1, config.train_workers)

    order_rng = np.random.default_rng([config.seed, 1])
    active = len(train_ds)
    if config.train_growth_initial < 1.0:
        active = max(1, int(np.ceil(config.train_growth_initial * len(train_ds))))
    pool_order = order_rng.permutation(len(train_ds))
    growth_best, growth_stale = np.inf, 0

    records = []
    metrics_path = os.path.join(config.out_dir, "metrics.csv")

    def record(epoch, train_seconds, train_sims):
        for split, ds in (("train", train_ds), ("test", test_ds)):
            t0, s0 = time.perf_counter(), counter.count
            cost, acc, _ = evaluate(model, ds, workers)
            if split == "train":
                seconds, sims = train_seconds, train_sims
            else:
                seconds, sims = time.perf_counter() - t0, counter.count - s0
            records.append(MetricsRecord(epoch, split, cost, acc, seconds, sims))
        write_metrics(metrics_path, records)
        return records[-2].cost

    record(0, 0.0, 0)
    schedule_used = []

    def sample_grad(i):
        return model.loss_and_grads(train_ds.images[i], train_ds.labels[i])

    for epoch in range(1, config.train_epochs + 1):
        lr, batch = schedule(epoch)
        if plateau is not None:
            lr = plateau.lr
        adam.lr = lr
        schedule_used.append((epoch, lr, batch))
        idx_pool = np.sort(pool_order[:active])
        perm = np.random.default_rng([config.seed, 2, epoch]).permutation(idx_pool)
        t0, s0 = time.perf_counter(), counter.count
        for b, start in enumerate(range(0, len(perm), batch)):
            idx = perm[start:start + batch]
            results = _map(sample_grad, idx, workers)
            losses = [r[0] for r in results]
            total = {k: np.zeros_like(v) for k, v in results[0][2].items()}
            for _, _, g in results:
                for k, v in g.items():
                    total[k] += v
            grads = {k: v / len(idx) for k, v in total.items()}
            if not (np.all(np.isfinite(losses)) and all(np.all(np.isfinite(g)) for g in grads.values())):
                path = _dump_nonfinite(config.out_dir, epoch, b, idx, losses)
                raise NonFiniteLossError(
                    f"non-finite loss/gradient at epoch {epoch} batch {b}; dump at {path}"
                )
            params = model.parameters()
            updated = adam_step(adam, {k: params[k] for k in grads}, grads)
            model.set_parameters({**params, **updated})
            if log_every and b % log_every == 0:
                log.info("epoch %d batch %d loss %.4f", epoch, b, float(np.mean(losses)))
        cost = record(epoch, time.perf_counter() - t0, counter.count - s0)
        log.info("epoch %d train cost %.4f acc %.3f | test acc %.3f", epoch, cost,
                 records[-2].accuracy, records[-1].accuracy)
        if plateau is not None:
            plateau.update(cost)
        if active < len(train_ds):
            if cost < growth_best:
                growth_best, growth_stale = cost, 0
            else:
                growth_stale += 1
                if growth_stale >= config.train_growth_patience:
                    active = min(len(train_ds), int(np.ceil(active * config.train_growth_factor)))
                    growth_best, growth_stale = np.inf, 0

    _write_csv(os.path.join(config.out_dir, "schedule.csv"),
               [[e, repr(lr), bs] for e, lr, bs in schedule_used], ("epoch", "lr", "batch"))
    ckpt = os.path.join(config.out_dir, "checkpoint.qfe")
    save_checkpoint(ckpt, config, model.parameters(), adam,
                    {"epoch": config.train_epochs, "input_shape": list(train_ds.images.shape[1:])})
    return TrainResult(records, ckpt, model, schedule_used)


# ---------------------------------------------------------------- sweep

def sweep_configs(base: RunConfig, presets=PRESETS, depths=range(1, 6)):
    return [
        base.replace(ansatz_name=name, ansatz_layers=depth,
                     out_dir=os.path.join(base.out_dir, "runs", f"{name}_L{depth}"))
        for name in presets for depth in depths
    ]


def sweep(base: RunConfig, presets=PRESETS, depths=range(1, 6), datasets=None):
    """Train every (preset, depth) pair on one shared data split.

    Writes ``metrics_<preset>_L<depth>.csv`` per run plus ``summary.csv``
    into ``base.out_dir``; returns the metrics paths.
    """
    base.validate()
    os.makedirs(base.out_dir, exist_ok=True)
    datasets = datasets or load_datasets(base)
    paths, summary = [], []
    for cfg in sweep_configs(base, presets, depths):
        result = train(cfg, datasets)
        dest = os.path.join(base.out_dir, f"metrics_{cfg.ansatz_name}_L{cfg.ansatz_layers}.csv")
        shutil.copyfile(os.path.join(cfg.out_dir, "metrics.csv"), dest)
        paths.append(dest)
        tr, te = result.records[-2], result.records[-1]
        summary.append([cfg.ansatz_name, cfg.ansatz_layers, repr(tr.cost), repr(tr.accuracy),
                        repr(te.cost), repr(te.accuracy),
                        sum(r.sims for r in result.records)])
        log.info("sweep %s L=%d: train cost %.4f test acc %.3f", cfg.ansatz_name,
                 cfg.ansatz_layers, tr.cost, te.accuracy)
    _write_csv(os.path.join(base.out_dir, "summary.csv"), summary,
               ("ansatz", "layers", "train_cost", "train_accuracy", "test_cost",
                "test_accuracy", "sims"))
    return paths


def records_as_dicts(records):
    return [asdict(r) for r in records]
