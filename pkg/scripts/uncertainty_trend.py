"""Per-epoch mean uncertainty of each modality and of the fused opinion.

Writes a CSV for external plotting and prints the first/last fused value with
the Spearman correlation against epoch index.
"""

import argparse
import csv
import sys

from scipy.stats import spearmanr

from crest.config import load_configs
from crest.synthzsl import generate
from crest.trainer import train

FIELDS = ("epoch", "uncertainty_attribute", "uncertainty_visual", "uncertainty_fused", "conflict")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key = value config file (defaults if omitted)")
    parser.add_argument("--out", default="uncertainty_trend.csv")
    args = parser.parse_args(argv)
    synth, config = load_configs(args.config)
    _, reports = train(generate(synth), config, log=lambda r: print(f"epoch {r.epoch}", file=sys.stderr))
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FIELDS)
        for r in reports:
            writer.writerow([r.epoch] + [f"{getattr(r, f):.6f}" for f in FIELDS[1:]])
    fused = [r.uncertainty_fused for r in reports]
    rho = spearmanr(range(len(fused)), fused)[0]
    print(f"first={fused[0]:.4f} last={fused[-1]:.4f} spearman={rho:.3f}")


if __name__ == "__main__":
    main()
