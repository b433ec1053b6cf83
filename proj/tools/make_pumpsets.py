#!/usr/bin/env python3
"""Regenerates data/pumpsets.json: 200 pump sets, 50 demands each, start-on-demand
success probabilities drawn from Beta(2, 5). Every tenth unit is tagged as an
expert-elicited pseudo-observation."""

import json
import sys

import numpy as np

SEED = 20060401
UNITS = 200
DEMANDS = 50
A, B = 2.0, 5.0


def main(path):
    rng = np.random.default_rng(SEED)
    p = rng.beta(A, B, size=UNITS)
    successes = rng.binomial(DEMANDS, p)
    units = []
    for j, s in enumerate(successes):
        units.append({
            "id": f"pump-{j + 1:03d}",
            "provenance": "expert-elicited" if (j + 1) % 10 == 0 else "observed",
            "trials": DEMANDS,
            "successes": int(s),
        })
    doc = {
        "description": f"Synthetic start-on-demand records, seed {SEED}, true prior Beta({A:g}, {B:g}).",
        "family": "beta-binomial",
        "units": units,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/pumpsets.json")
