"""Synthetic benchmark: DBN vs softmax regression, noiseless and noisy.

    python3 scripts/run_benchmark.py --out runs/bench
    python3 scripts/run_benchmark.py --epochs-pretrain 5 --epochs-finetune 30   # quick look

Writes one report per setting and classifier plus a summary.json.
"""

import argparse
import dataclasses
import json
import time
from pathlib import Path

from stillact import synth
from stillact.pipeline import RecipeConfig, run_benchmark

SETTINGS = {"noiseless": synth.NOISELESS, "noisy": synth.NOISY}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/benchmark")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-per-class", type=int, default=100)
    p.add_argument("--test-per-class", type=int, default=100)
    p.add_argument("--epochs-pretrain", type=int, default=100)
    p.add_argument("--epochs-finetune", type=int, default=1000)
    p.add_argument("--settings", nargs="+", choices=sorted(SETTINGS), default=list(SETTINGS))
    args = p.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    recipe = RecipeConfig(seed=args.seed, epochs_pretrain=args.epochs_pretrain,
                          epochs_finetune=args.epochs_finetune)
    summary = {"recipe": recipe.to_dict(),
               "shallow_model": "softmax regression on the same 90-dim features"}
    for name in args.settings:
        config = dataclasses.replace(SETTINGS[name], seed=args.seed)
        t0 = time.perf_counter()
        res = run_benchmark(config, recipe, args.train_per_class, args.test_per_class)
        elapsed = time.perf_counter() - t0
        for clf, report in (("dbn", res.dbn), ("shallow", res.shallow)):
            (out / f"{name}.{clf}.txt").write_text(report.to_text(), encoding="utf-8")
        summary[name] = {"dbn_mAP": res.dbn.map, "shallow_mAP": res.shallow.map,
                         "dbn_accuracy": res.dbn.accuracy,
                         "shallow_accuracy": res.shallow.accuracy, "seconds": elapsed}
        print(f"{name:<10} dbn mAP {res.dbn.map:.4f}  shallow mAP {res.shallow.map:.4f}  "
              f"({elapsed:.0f}s)", flush=True)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")


if __name__ == "__main__":
    main()
