"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Every subcommand writes only inside ``--out`` and leaves a
``<command>.config.json`` snapshot of its parameters there.  All randomness
is derived from ``--seed``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from . import dataset_io, dbn, pipeline, synth
from .augment import augment_all
from .errors import DataError, NumericError
from .evaluation import CLASS_NAMES, encode_labeled, evaluate_model, select_thresholds
from .geometry import encode_image, normalize_scale
from .seeding import derive_seed

logger = logging.getLogger("stillact")

COMMANDS = ("synth-gen", "encode", "augment", "pretrain", "finetune", "train",
            "predict", "evaluate", "select-thresholds")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _add_common(p, *, data=False, model=False, out=True):
    if data:
        p.add_argument("--data", required=True, help="annotation file (JSON lines)")
    if model:
        p.add_argument("--model", required=True, help="model file")
    if out:
        p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--thresholds", help="threshold file from select-thresholds")


def _add_training(p, pretrain=True, finetune=True):
    if pretrain:
        p.add_argument("--epochs-pretrain", type=int, default=100)
        p.add_argument("--lr-pretrain", type=float, default=0.01)
        p.add_argument("--propagate", choices=("mean", "sample"), default="mean")
    if finetune:
        p.add_argument("--epochs-finetune", type=int, default=1000)
        p.add_argument("--lr-finetune", type=float, default=0.1)
    p.add_argument("--batch", type=int, default=20)
    _add_augment(p)
    p.add_argument("--no-augment", action="store_true", help="train on the images as given")


def _add_augment(p):
    p.add_argument("--jitter", type=int, default=10, help="jitter bound in normalized px")
    p.add_argument("--replicas", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stillact", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}",
                                parser_class=_Parser)

    p = sub.add_parser("synth-gen", help="write a synthetic annotation file")
    _add_common(p)
    p.add_argument("--images-per-class", type=int, default=100)
    p.add_argument("--test-per-class", type=int, default=0,
                   help="also write an independent test.jsonl with this many images per class")
    p.add_argument("--coord-sigma", type=float, default=0.0)
    p.add_argument("--miss-prob", type=float, default=0.0)
    p.add_argument("--fp-prob", type=float, default=0.0)
    p.add_argument("--upper-prob", type=float, default=0.0)
    p.add_argument("--source", choices=("detector", "manual"), default="detector")

    p = sub.add_parser("encode", help="encode annotations into 90-dim feature vectors")
    _add_common(p, data=True)

    p = sub.add_parser("augment", help="flip + jitter a labeled annotation file")
    _add_common(p, data=True)
    _add_augment(p)

    p = sub.add_parser("pretrain", help="greedy RBM pre-training")
    _add_common(p, data=True)
    _add_training(p, finetune=False)

    p = sub.add_parser("finetune", help="fine-tune a pre-trained model")
    _add_common(p, data=True, model=True)
    _add_training(p, pretrain=False)

    p = sub.add_parser("train", help="pretrain + finetune")
    _add_common(p, data=True)
    _add_training(p)

    p = sub.add_parser("predict", help="predict action labels")
    _add_common(p, data=True, model=True)

    p = sub.add_parser("evaluate", help="per-class AP, mAP and accuracy")
    _add_common(p, data=True, model=True)

    p = sub.add_parser("select-thresholds", help="cross-validated detector-score thresholds")
    _add_common(p, data=True)
    _add_training(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--procedure", choices=("dbn", "shallow"), default="dbn",
                   help="classifier trained inside each fold")
    return parser


def _recipe(args) -> pipeline.RecipeConfig:
    r = pipeline.RecipeConfig(seed=args.seed, batch_size=args.batch,
                              jitter_px=args.jitter, replicas=args.replicas,
                              augment=not args.no_augment)
    if hasattr(args, "epochs_pretrain"):
        r = dataclasses.replace(r, epochs_pretrain=args.epochs_pretrain,
                                lr_pretrain=args.lr_pretrain, propagate=args.propagate)
    if hasattr(args, "epochs_finetune"):
        r = dataclasses.replace(r, epochs_finetune=args.epochs_finetune,
                                lr_finetune=args.lr_finetune)
    return r


def _thresholds(args):
    return dataset_io.load_thresholds(args.thresholds) if args.thresholds else None


class _MetricsLog:
    def __init__(self, path: Path):
        self.fh = path.open("w", encoding="utf-8")

    def write(self, stage, epoch, **values):
        fields = " ".join(f"{k}={v!r}" for k, v in values.items())
        self.fh.write(f"stage={stage} epoch={epoch} {fields}\n")

    def close(self):
        self.fh.close()


def _write_pretrain_traces(log, traces):
    for layer, key in ((1, "pretrain_layer1"), (2, "pretrain_layer2")):
        for epoch, err in enumerate(traces[key]):
            log.write(f"pretrain-layer{layer}", epoch, recon_error=err)


def cmd_synth_gen(args, out):
    cfg = synth.SynthConfig(images_per_class=args.images_per_class, coord_sigma=args.coord_sigma,
                            miss_prob=args.miss_prob, false_positive_prob=args.fp_prob,
                            upper_body_prob=args.upper_prob, source=args.source,
                            seed=derive_seed(args.seed, "synth"))
    if args.test_per_class > 0:
        train, test = synth.generate_split(cfg, args.images_per_class, args.test_per_class)
        dataset_io.save_annotations(test, out / "test.jsonl")
    else:
        train = synth.generate(cfg)
    dataset_io.save_annotations(train, out / "annotations.jsonl")


def cmd_encode(args, out):
    annotations = dataset_io.load_annotations(args.data)
    thresholds = _thresholds(args)
    ids, rows, labels = [], [], []
    for a in annotations:
        try:
            rows.append(encode_image(a, thresholds))
        except DataError as exc:
            logger.warning("skipping image %s: %s", a.image_id, exc)
            continue
        ids.append(a.image_id)
        labels.append(a.label)
    (out / "features.jsonl").write_text(dataset_io.dumps_features(ids, rows, labels),
                                        encoding="utf-8")


def cmd_augment(args, out):
    annotations = [normalize_scale(a) for a in dataset_io.load_annotations(args.data)]
    cfg = pipeline.RecipeConfig(seed=args.seed, jitter_px=args.jitter,
                                replicas=args.replicas).augmentation()
    dataset_io.save_annotations(augment_all(annotations, cfg), out / "augmented.jsonl")


def cmd_pretrain(args, out):
    recipe = _recipe(args)
    X, _, _ = pipeline.training_matrix(dataset_io.load_annotations(args.data),
                                       _thresholds(args), recipe.augmentation())
    grbm, rbm2, (t1, t2) = dbn.pretrain(X, recipe.cd(), hidden=recipe.hidden,
                                         propagate=recipe.propagate)
    meta = {"format_version": dbn.FORMAT_VERSION, "recipe": recipe.to_dict()}
    dataset_io.save_model(dbn.assemble(grbm, rbm2, metadata=meta), out / "pretrained.json")
    log = _MetricsLog(out / "metrics.log")
    _write_pretrain_traces(log, {"pretrain_layer1": t1, "pretrain_layer2": t2})
    log.close()


def cmd_finetune(args, out):
    recipe = _recipe(args)
    model = dataset_io.load_model(args.model)
    X, y, _ = pipeline.training_matrix(dataset_io.load_annotations(args.data),
                                       _thresholds(args), recipe.augmentation())
    log = _MetricsLog(out / "metrics.log")
    try:
        model, _ = dbn.finetune(model, X, y, recipe.finetune(),
                                log=lambda e, loss: log.write("finetune", e, loss=loss))
    finally:
        log.close()
    dataset_io.save_model(model, out / "model.json")


def cmd_train(args, out):
    recipe = _recipe(args)
    log = _MetricsLog(out / "metrics.log")
    try:
        model, traces = pipeline.train_dbn(dataset_io.load_annotations(args.data), recipe,
                                           _thresholds(args),
                                           log=lambda e, loss: log.write("finetune", e, loss=loss))
        _write_pretrain_traces(log, traces)
    finally:
        log.close()
    dataset_io.save_model(model, out / "model.json")


def cmd_predict(args, out):
    model = dataset_io.load_model(args.model)
    thresholds = _thresholds(args)
    lines = []
    for a in dataset_io.load_annotations(args.data):
        try:
            x = encode_image(a, thresholds)
        except DataError as exc:
            logger.warning("skipping image %s: %s", a.image_id, exc)
            continue
        label, probs = dbn.predict(model, x)
        lines.append(json.dumps({"image_id": a.image_id, "label": CLASS_NAMES[int(label)],
                                 "scores": {c: float(p) for c, p in zip(CLASS_NAMES, probs)}}))
    (out / "predictions.jsonl").write_text("".join(s + "\n" for s in lines), encoding="utf-8")


def cmd_evaluate(args, out):
    model = dataset_io.load_model(args.model)
    report = evaluate_model(model, dataset_io.load_annotations(args.data), _thresholds(args))
    (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    sys.stdout.write(report.to_text())


def cmd_select_thresholds(args, out):
    recipe = dataclasses.replace(_recipe(args), augment=False)
    if args.procedure == "dbn":
        def trainer(X, y):
            return dbn.train(X, y, recipe.cd(), recipe.finetune(), hidden=recipe.hidden,
                             propagate=recipe.propagate)[0]
    else:
        def trainer(X, y):
            return synth.shallow_baseline(X, y, recipe.finetune())[0]
    annotations = [normalize_scale(a) for a in dataset_io.load_annotations(args.data)]
    sel = select_thresholds(annotations, trainer, args.folds, derive_seed(args.seed, "folds"))
    dataset_io.save_thresholds(sel.thresholds, out / "thresholds.json",
                               cv_mAP=sel.cv_map, flagged=sel.flagged)


HANDLERS = {
    "synth-gen": cmd_synth_gen, "encode": cmd_encode, "augment": cmd_augment,
    "pretrain": cmd_pretrain, "finetune": cmd_finetune, "train": cmd_train,
    "predict": cmd_predict, "evaluate": cmd_evaluate,
    "select-thresholds": cmd_select_thresholds,
}


def _configure_logging():
    level = os.environ.get("STILLACT_LOG", "error").upper()
    if level not in ("ERROR", "INFO", "DEBUG"):
        level = "ERROR"
    logging.basicConfig(level=getattr(logging, level), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def run(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 1
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        snapshot = {k: v for k, v in sorted(vars(args).items())}
        (out / f"{args.command}.config.json").write_text(
            json.dumps(snapshot, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        HANDLERS[args.command](args, out)
    except NumericError as exc:
        sys.stderr.write(f"numeric failure: {exc}\n")
        return 3
    except (DataError, OSError) as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
