"""Pick common core configurations for a set of networks.

Either sweeps the bundled networks (default) or reads sweep CSVs written by
``acceldse sweep`` / ``edp_stats.py --save-dir``.

    python scripts/recommend_cores.py [--epsilon 0.05] [--cores K] [CSV ...]
"""
import argparse
import json
from pathlib import Path

from acceldse.dse import SearchSpace, recommend_from_sweeps, sweep, sweep_from_csv
from acceldse.hwmodel import default_config
from acceldse.netmodel import available, builtin


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv", nargs="*")
    ap.add_argument("--epsilon", type=float, default=0.05)
    ap.add_argument("--objective", default="edp", choices=["energy", "latency", "edp"])
    ap.add_argument("--cores", type=int, default=None)
    ap.add_argument("--jobs", type=int, default=None)
    args = ap.parse_args(argv)

    if args.csv:
        results = [r for f in args.csv for r in sweep_from_csv(Path(f).read_text())]
    else:
        cfg, space = default_config(), SearchSpace()
        results = [sweep(builtin(n), cfg, space, jobs=args.jobs) for n in available()]
    rec = recommend_from_sweeps(results, args.epsilon, args.objective, args.cores)
    print(json.dumps(rec.to_dict(), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
