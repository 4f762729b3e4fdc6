"""Export |ambiguity| surfaces over the delay-Doppler plane for each filter.

One CSV per family (delay in tau0 units down the rows, frequency in nu0
units across the columns), ready for contour plotting.
"""

import argparse
from pathlib import Path

from potsim import ExperimentConfig
from potsim.experiments import run


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/surfaces",
                        help="output directory (default %(default)s)")
    parser.add_argument("--param", type=float, default=0.2,
                        help="dispersion or roll-off (default %(default)s)")
    parser.add_argument("--extent", type=float, default=3.0,
                        help="half-width of the grid in lattice units")
    parser.add_argument("--resolution", type=int, default=61)
    return parser.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    config = ExperimentConfig(experiment="ambiguity_surface",
                              filter_param=args.param,
                              surface_extent=args.extent,
                              surface_resolution=args.resolution)
    summary = run(config, Path(args.out))
    for name, digest in summary["outputs"].items():
        print(f"{name}  sha256={digest[:12]}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
