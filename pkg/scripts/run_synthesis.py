#!/usr/bin/env python3
"""Run the sampling-based two-barrier synthesis example.

Searches the parameter boxes in configs/synth_di.json and writes the best
accepted stack (by Monte-Carlo volume) to results/synth_di_result.json.
"""

import argparse
import sys
from pathlib import Path

from cbf_guard.cli import main as cli_main

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(ROOT / "results"))
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()

    argv = ["synthesize", "--config", str(ROOT / "configs" / "synth_di.json"),
            "--out", args.out]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
