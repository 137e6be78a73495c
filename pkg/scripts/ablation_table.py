"""Full model against every single-component ablation on conflictive data."""

import argparse
import dataclasses
import sys

from crest.cli import ABLATION_FIELDS, DROP_TARGETS, ablated_config
from crest.config import load_configs
from crest.synthzsl import generate
from crest.trainer import evaluate, train


def _row(name, model, dataset, config, mu):
    gz = evaluate(model, dataset, config, "gzsl", mu=mu)
    cz = evaluate(model, dataset, config, "czsl", mu=mu)
    return [name] + [f"{v:.4f}" for v in (gz["S"], gz["U"], gz["H"], cz["ACC"])]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config")
    parser.add_argument("--conflict-rate", type=float, default=0.3)
    parser.add_argument("--out", default="ablation.csv")
    args = parser.parse_args(argv)
    synth, config = load_configs(args.config)
    dataset = generate(dataclasses.replace(synth, conflict_rate=args.conflict_rate))
    model, _ = train(dataset, config)
    rows = [_row("full", model, dataset, config, None)]
    for drop in DROP_TARGETS:
        print(f"training without {drop}", file=sys.stderr)
        cfg, mu = ablated_config(config, drop)
        variant, _ = train(dataset, cfg)
        rows.append(_row(f"without_{drop}", variant, dataset, cfg, mu))
    text = "\n".join(",".join(r) for r in [list(ABLATION_FIELDS)] + rows) + "\n"
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")


if __name__ == "__main__":
    main()
