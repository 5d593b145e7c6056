#!/usr/bin/env python3
"""Full density-vs-PDE validation sweep for the three worked models.

Writes out/validate_<model>.json plus companion *_curves.csv files and
prints a one-line summary per case.  Takes a couple of minutes.
"""

import json
import pathlib
import sys

from fpt.cli import main

OUT = pathlib.Path(__file__).resolve().parent.parent / "out"

MODELS = [
    (["--model", "ou"], "validate_ou.json"),
    (["--model", "tanh", "--alpha", "2.0", "--gamma", "1.0"], "validate_tanh.json"),
    (["--model", "dry_friction", "--mu", "1.0"], "validate_dry_friction.json"),
]

if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    for args, fname in MODELS:
        target = OUT / fname
        code = main(["validate", *args, "--barriers=-1,1,2", "--offsets=1,2,4",
                     "--out", str(target)])
        if code != 0:
            sys.exit(code)
        report = json.loads(target.read_text())
        for case in report["cases"]:
            if case["status"] == "ok":
                print(f"{report['model']:13s} y+={case['y_plus']:+.1f} "
                      f"y0={case['y0']:+.1f}  L1={case['l1']:.4f}  "
                      f"tail-slope err={case['tail_slope_error']:.2e}")
            else:
                print(f"{report['model']:13s} y+={case['y_plus']:+.1f} "
                      f"y0={case['y0']:+.1f}  FAILED: {case['error']}")
        print(f"wrote {target}")
