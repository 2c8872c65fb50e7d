import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import trainer
from .config import RunConfig, load_config
from .data import BIN_MAGIC, load_features
from .errors import DivergenceError, IntegrityError, ParameterError, ParseError, UsageError
from .gradcheck import gradcheck
from .rlp_loss import LossOptions

EXIT_OK, EXIT_USAGE, EXIT_FAULT = 0, 1, 2

GRADCHECK_DEFAULT = dict(batch=8, classes=5, per_class=3, d_in=16, d_embed=16, seed=0)


def _resolve_data(path, test_classes=None):
    """``--data`` takes a feature file (CSV / PGML binary) or a run config to rebuild from.

    Returns ``(dataset, config_or_None)``.
    """
    p = Path(path)
    with open(p, "rb") as fh:
        head = fh.read(5)
    if head[:4] == BIN_MAGIC or head == b"label":
        return load_features(p, test_classes), None
    cfg = load_config(p)
    if test_classes:
        cfg = replace(cfg, test_classes=tuple(test_classes))
    return trainer.build_dataset(cfg), cfg


def cmd_train(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed).validate()
    result = trainer.train(cfg, args.out)
    print(f"wrote {result.out_dir / trainer.METRICS_FILE} ({len(result.records)} epochs) "
          f"and {result.out_dir / trainer.CHECKPOINT_FILE}")
    return EXIT_OK


def cmd_evaluate(args):
    dataset, cfg = _resolve_data(args.data, args.test_classes)
    ns = args.ns or (cfg.eval_ns if cfg else RunConfig.eval_ns)
    kseed = args.kmeans_seed if args.kmeans_seed is not None else (cfg.kmeans_seed if cfg else 0)
    report = trainer.evaluate_checkpoint(args.checkpoint, dataset, ns, kseed)
    print(report.to_json())
    return EXIT_OK


def cmd_gradcheck(args):
    dims = dict(GRADCHECK_DEFAULT)
    if args.config:
        cfg = load_config(args.config)
        dims.update(batch=cfg.batch_size, classes=cfg.classes, per_class=cfg.proxies_per_class,
                    d_in=cfg.d_in, d_embed=cfg.d_embed, seed=cfg.seed)
        base = trainer.loss_options(cfg)
        combos = trainer.ABLATION_ROWS if args.all_toggles else [
            (cfg.use_pos_mask, cfg.use_mask_softmax, cfg.use_proxy_reg)]
    else:
        base = LossOptions(ratio=0.5, lam=0.3)
        combos = trainer.ABLATION_ROWS
    ok = True
    for pos, mask, reg in combos:
        opts = replace(base, use_pos_mask=pos, use_mask_softmax=mask, use_proxy_reg=reg)
        report = gradcheck(opts, **dims)
        print(report.line())
        ok &= report.passed
    print("gradcheck:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FAULT


def cmd_ablate(args):
    cfg = load_config(args.config)
    rows = trainer.ablate(cfg, args.out)
    print(trainer.format_ablation(rows))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="proxygml", description="Proxy-based graph metric learning")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train and write metrics.jsonl + checkpoint.pgck")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (overrides out_dir in the config)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="Recall@n and NMI of a checkpoint on a test split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="CSV / PGML feature file, or the run config")
    p.add_argument("--test-classes", type=lambda s: [x.strip() for x in s.split(",") if x.strip()])
    p.add_argument("--ns", type=lambda s: tuple(int(x) for x in s.split(",")))
    p.add_argument("--kmeans-seed", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference check of the analytic gradients")
    p.add_argument("--config")
    p.add_argument("--all-toggles", action="store_true",
                   help="check all eight ablation combinations (default when no config is given)")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate", help="train the eight positive-mask / mask-softmax / regularizer combinations")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ParameterError, ParseError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DivergenceError, IntegrityError, OSError) as exc:
        print(f"fault: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
