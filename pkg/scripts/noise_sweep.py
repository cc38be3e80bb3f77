"""Train once on clean synthetic data, then test under increasing detector misses.

    python3 scripts/noise_sweep.py --epochs-pretrain 20 --epochs-finetune 200
"""

import argparse
import dataclasses

from stillact import synth
from stillact.pipeline import RecipeConfig, noise_sweep, train_dbn, train_shallow


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-per-class", type=int, default=100)
    p.add_argument("--test-per-class", type=int, default=100)
    p.add_argument("--epochs-pretrain", type=int, default=100)
    p.add_argument("--epochs-finetune", type=int, default=1000)
    p.add_argument("--miss", type=float, nargs="+", default=[0.0, 0.25, 0.5, 0.75, 1.0])
    args = p.parse_args()

    recipe = RecipeConfig(seed=args.seed, epochs_pretrain=args.epochs_pretrain,
                          epochs_finetune=args.epochs_finetune)
    thresholds = synth.default_thresholds()
    train = synth.generate(dataclasses.replace(synth.NOISELESS, seed=args.seed,
                                               images_per_class=args.train_per_class))
    models = {"dbn": train_dbn(train, recipe, thresholds)[0],
              "shallow": train_shallow(train, recipe, thresholds)[0]}
    test_cfg = dataclasses.replace(synth.NOISELESS, seed=args.seed + 1_000_003)
    print("miss_prob " + " ".join(f"{m:>7.2f}" for m in args.miss))
    for name, model in models.items():
        maps = noise_sweep(model, test_cfg, args.miss, args.test_per_class, thresholds)
        print(f"{name:<9} " + " ".join(f"{m:>7.4f}" for m in maps))


if __name__ == "__main__":
    main()
