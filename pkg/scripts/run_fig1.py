#!/usr/bin/env python3
"""Decay-rate sweeps for the three worked models (the barrier-position
curves with asymptotes and orthogonal-polynomial markers).

Writes out/fig1_{ou,dry_friction,tanh}.csv.
"""

import pathlib
import sys

from fpt.cli import main

OUT = pathlib.Path(__file__).resolve().parent.parent / "out"

SWEEPS = [
    (["--model", "ou", "--sweep=-3:3:25"], "fig1_ou.csv"),
    (["--model", "dry_friction", "--mu", "1.0", "--sweep=-2:4:25"],
     "fig1_dry_friction.csv"),
    (["--model", "tanh", "--alpha", "2.0", "--gamma", "1.0",
      "--sweep=-3:3:25"], "fig1_tanh.csv"),
]

if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    for args, fname in SWEEPS:
        target = OUT / fname
        code = main(["fig1", *args, "--out", str(target)])
        if code != 0:
            sys.exit(code)
        print(f"wrote {target}")
