"""Energy and DRAM psum traffic against gb_psum for one network, per array.

    python scripts/psum_sweep.py [NETWORK] [--gb-ifmap KB] [--out FILE.csv]
"""
import argparse
import csv
import sys
from dataclasses import replace

from acceldse.dse import DEFAULT_ARRAYS
from acceldse.hwmodel import DEFAULT_GB_SIZES_KB, default_config
from acceldse.netmodel import builtin
from acceldse.rsim import simulate_network


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("network", nargs="?", default="VGG16")
    ap.add_argument("--gb-ifmap", type=float, default=216)
    ap.add_argument("--out")
    args = ap.parse_args(argv)

    net = builtin(args.network)
    fields = ["array", "gb_psum_kb", "energy", "latency", "dram_psum_writes", "psum_spill_words"]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.DictWriter(out, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    base = default_config()
    for array in DEFAULT_ARRAYS:
        for size in DEFAULT_GB_SIZES_KB:
            cfg = base.with_point(size, args.gb_ifmap, array)
            rep = simulate_network(net, cfg)
            w.writerow({"array": str(array), "gb_psum_kb": size, "energy": rep.energy, "latency": rep.latency,
                        "dram_psum_writes": sum(r.counts.get("dram", "psum", "write") for r in rep.layers),
                        "psum_spill_words": sum(r.psum_spill_words for r in rep.layers)})
    if args.out:
        out.close()


if __name__ == "__main__":
    main()
