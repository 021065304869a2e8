#!/usr/bin/env python3
"""Run every experiment preset and drop the plot-ready CSVs under runs/.

Full-fidelity presets sweep an 11-point learning-rate grid over 5 seeds at
horizon 5000, so expect a few minutes per preset; pass --quick for a smoke
pass at horizon 500 with 2 seeds.
"""

import argparse
import sys

from polyomwu.cli import main as cli_main
from polyomwu.presets import PRESET_NAMES


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--quick", action="store_true")
    parser.add_argument("--presets", nargs="*", default=list(PRESET_NAMES))
    args = parser.parse_args()
    for name in args.presets:
        argv = ["run", "--preset", name, "--out", args.out, "--jobs", str(args.jobs)]
        if args.quick:
            argv += ["--horizon", "500", "--seeds", "0,1"]
        print(f"== preset {name}")
        code = cli_main(argv)
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
