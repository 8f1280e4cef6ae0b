"""Split a network's layers over k identical cores and report the pipeline speedup.

    python scripts/partition_experiment.py [NETWORK ...] [--gb-psum 216 --gb-ifmap 54 --array 12x14]
"""
import argparse

from acceldse.dse import parse_array
from acceldse.hwmodel import default_config
from acceldse.netmodel import builtin
from acceldse.partition import bnb_partition, dp_oracle_partition, layer_latencies


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("networks", nargs="*", default=["AlexNet", "VGG16", "VGG19"])
    ap.add_argument("--gb-psum", type=float, default=216)
    ap.add_argument("--gb-ifmap", type=float, default=54)
    ap.add_argument("--array", default="12x14")
    ap.add_argument("--cores", default="2,3,4", help="comma-separated core counts")
    args = ap.parse_args(argv)

    cfg = default_config().with_point(args.gb_psum, args.gb_ifmap, parse_array(args.array))
    for name in args.networks:
        _, D = layer_latencies(builtin(name), cfg)
        print(f"{name} ({len(D)} layers)")
        for k in (int(x) for x in args.cores.split(",")):
            plan = bnb_partition(D, k)
            assert plan.max_latency == dp_oracle_partition(D, k)
            print(f"  k={k}: {plan.table_row()}")


if __name__ == "__main__":
    main()
