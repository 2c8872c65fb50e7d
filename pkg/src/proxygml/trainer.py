"""Training loop, checkpointed evaluation and the eight-way ablation."""
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checkpoint
from .data import BatchSampler, load_features, synthetic_clusters
from .errors import DivergenceError, ParameterError
from .evaluation import evaluate_embeddings
from .graph import compute_k
from .model import EmbeddingHead, head_backward, head_forward, init_proxies, make_rng
from .optim import Adam, lr_at_epoch
from .rlp_loss import LossOptions, loss_and_grads

log = logging.getLogger(__name__)

METRICS_FILE = "metrics.jsonl"
CHECKPOINT_FILE = "checkpoint.pgck"

# Table-1 row order: (positive mask, mask softmax, proxy regularizer)
ABLATION_ROWS = [
    (False, False, False),
    (True, False, False),
    (False, True, False),
    (False, False, True),
    (False, True, True),
    (True, False, True),
    (True, True, False),
    (True, True, True),
]


def seeds_for(seed):
    data, proxies, batches = np.random.SeedSequence(seed).spawn(3)
    return data, proxies, batches


def build_dataset(cfg):
    if cfg.data == "synthetic":
        return synthetic_clusters(cfg.classes, cfg.per_class, cfg.d_in, cfg.noise, seeds_for(cfg.seed)[0])
    ds = load_features(cfg.data, cfg.test_classes or None)
    if ds.dim != cfg.d_in:
        raise ParameterError(f"data has {ds.dim} features but d_in = {cfg.d_in}")
    return ds


def loss_options(cfg):
    return LossOptions(ratio=cfg.ratio, lam=cfg.lam, use_pos_mask=cfg.use_pos_mask,
                       use_mask_softmax=cfg.use_mask_softmax, use_proxy_reg=cfg.use_proxy_reg)


def evaluate_head(head, dataset, ns, kmeans_seed=0):
    feats, labels = dataset.split("test")
    return evaluate_embeddings(head_forward(head, feats), labels, ns, kmeans_seed)


@dataclass
class TrainResult:
    records: list
    proxies: object
    head: object
    out_dir: Path


def _record(epoch, sums, batches, lr_h, lr_p, report, clamps):
    rec = {"epoch": epoch}
    for key in ("loss_s", "loss_p", "loss_total"):
        rec[key] = sums[key] / batches
    rec["lr_head"] = lr_h
    rec["lr_proxies"] = lr_p
    for n, v in sorted(report.recall_at.items()):
        rec[f"recall@{n}"] = v
    rec["nmi"] = report.nmi
    rec["clamp_events"] = clamps
    return rec


def train(cfg, out_dir=None, dataset=None):
    """Run ``cfg.epochs`` epochs, writing metrics.jsonl and checkpoint.pgck into ``out_dir``.

    The checkpoint is rewritten after every epoch, so a divergence leaves the last
    good parameters on disk before ``DivergenceError`` propagates.
    """
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset = dataset if dataset is not None else build_dataset(cfg)
    feats, labels = dataset.split("train")
    num_classes = int(labels.max()) + 1 if len(labels) else 0
    if num_classes < 1:
        raise ParameterError("training split is empty")
    n_test = int(dataset.is_test.sum())
    if max(cfg.eval_ns) > n_test - 1:
        raise ParameterError(f"eval_ns up to {max(cfg.eval_ns)} needs more than {n_test} test items")
    _, proxy_seed, batch_seed = seeds_for(cfg.seed)

    head = EmbeddingHead(cfg.head, cfg.d_in, cfg.d_embed)
    proxies = init_proxies(num_classes, cfg.proxies_per_class, cfg.d_embed, proxy_seed)
    opt_p = Adam(cfg.lr_proxies)
    opt_h = Adam(cfg.lr_head) if head.kind == "linear" else None
    states = {"proxies": opt_p.state} | ({"head": opt_h.state} if opt_h else {})
    sampler = BatchSampler(len(labels), cfg.batch_size, make_rng(batch_seed), cfg.drop_last)
    options = loss_options(cfg)
    k = compute_k(cfg.ratio, num_classes, cfg.proxies_per_class)
    if cfg.use_pos_mask and cfg.use_mask_softmax and k <= cfg.proxies_per_class:
        log.warning("k=%d <= N=%d: every subgraph holds only positive proxies, so the sample loss "
                    "and its gradient are identically zero", k, cfg.proxies_per_class)
    ckpt_path = out / CHECKPOINT_FILE
    (out / "config.resolved").write_text(cfg.to_text())
    checkpoint.save(ckpt_path, proxies, head, states)

    records = []
    with open(out / METRICS_FILE, "w") as metrics:
        for epoch in range(cfg.epochs):
            lr_h = lr_at_epoch(cfg.lr_head, epoch, cfg.decay_every, cfg.decay_factor)
            lr_p = lr_at_epoch(cfg.lr_proxies, epoch, cfg.decay_every, cfg.decay_factor)
            sums = {"loss_s": 0.0, "loss_p": 0.0, "loss_total": 0.0}
            clamps = 0
            batches = sampler.epoch()
            for idx in batches:
                x = feats[idx]
                bundle = loss_and_grads(head_forward(head, x), proxies.raw, labels[idx],
                                        proxies.proxy_labels, num_classes, options)
                if not math.isfinite(bundle.l_total):
                    raise DivergenceError(f"non-finite loss at epoch {epoch}; "
                                          f"last good checkpoint kept at {ckpt_path}")
                if opt_h is not None:
                    g_w, _ = head_backward(head, x, bundle.grad_x_s_raw)
                    opt_h.step(head.weight, g_w, lr_h)
                opt_p.step(proxies.raw, bundle.grad_x_p_raw, lr_p)
                sums["loss_s"] += bundle.l_s
                sums["loss_p"] += bundle.l_p
                sums["loss_total"] += bundle.l_total
                clamps += bundle.clamp_events
            report = evaluate_head(head, dataset, cfg.eval_ns, cfg.kmeans_seed)
            rec = _record(epoch, sums, max(len(batches), 1), lr_h, lr_p, report, clamps)
            metrics.write(json.dumps(rec) + "\n")
            metrics.flush()
            records.append(rec)
            checkpoint.save(ckpt_path, proxies, head, states)
            log.info("epoch %d loss %.4f R@1 %.4f NMI %.4f", epoch, rec["loss_total"],
                     report.recall_at.get(1, float("nan")), report.nmi)
    return TrainResult(records=records, proxies=proxies, head=head, out_dir=out)


def evaluate_checkpoint(ckpt_path, dataset, ns=(1, 2, 4, 8), kmeans_seed=0):
    _, head, _ = checkpoint.load(ckpt_path)
    if dataset.dim != head.d_in:
        raise ParameterError(f"checkpoint head expects {head.d_in} input features, data has {dataset.dim}")
    return evaluate_head(head, dataset, ns, kmeans_seed)


def ablate(cfg, out_dir=None):
    """Train all eight toggle combinations on shared data; returns one row dict per combination."""
    out = Path(out_dir or cfg.out_dir)
    dataset = build_dataset(cfg)
    rows = []
    for i, (pos, mask, reg) in enumerate(ABLATION_ROWS, start=1):
        run_cfg = cfg.with_toggles(pos, mask, reg)
        result = train(run_cfg, out / f"row{i}", dataset)
        last = result.records[-1] if result.records else _initial_metrics(run_cfg, result, dataset)
        rows.append({"row": i, "pos_mask": pos, "mask_softmax": mask, "proxy_reg": reg,
                     "nmi": last["nmi"], "recall@1": last["recall@1"]})
    with open(out / "ablation.json", "w") as fh:
        json.dump(rows, fh, indent=1)
    return rows


def _initial_metrics(cfg, result, dataset):
    report = evaluate_head(result.head, dataset, cfg.eval_ns, cfg.kmeans_seed)
    return {"nmi": report.nmi, "recall@1": report.recall_at[1]}


def format_ablation(rows):
    mark = {True: "x", False: "-"}
    lines = ["#  S^pos  M  L^p     NMI      R@1"]
    for r in rows:
        lines.append(f"{r['row']}  {mark[r['pos_mask']]:^5}  {mark[r['mask_softmax']]}  "
                     f"{mark[r['proxy_reg']]:^3}  {r['nmi']:.4f}  {r['recall@1']:.4f}")
    return "\n".join(lines)
