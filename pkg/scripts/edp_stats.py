"""Full-space sweep of every bundled network; prints minimum points and EDP spread.

    python scripts/edp_stats.py [--jobs N] [--save-dir DIR]
"""
import argparse
from pathlib import Path

from acceldse.dse import SearchSpace, summarize, sweep, sweep_to_csv
from acceldse.hwmodel import default_config
from acceldse.netmodel import available, builtin


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--jobs", type=int, default=None)
    ap.add_argument("--save-dir", help="also write one <net>_sweep.csv per network here")
    ap.add_argument("networks", nargs="*")
    args = ap.parse_args(argv)

    cfg, space = default_config(), SearchSpace()
    print(f"{'network':<20} {'min EDP point':<16} {'mean %':>9} {'max %':>10}")
    for name in args.networks or available():
        result = sweep(builtin(name), cfg, space, jobs=args.jobs)
        edp = summarize(result)["edp"]
        print(f"{name:<20} {edp['min_point']:<16} {edp['mean_percent']:9.2f} {edp['max_percent']:10.2f}")
        if args.save_dir:
            d = Path(args.save_dir)
            d.mkdir(parents=True, exist_ok=True)
            (d / f"{name}_sweep.csv").write_text(sweep_to_csv([result]))


if __name__ == "__main__":
    main()
