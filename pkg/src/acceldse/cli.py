"""acceldse command line.

    acceldse simulate  --builtin VGG16 [--config cfg.json] [--out DIR]
    acceldse sweep     --builtin VGG16 [--arrays 32x32] [--jobs N]
    acceldse recommend sweep1.csv sweep2.csv [--epsilon 0.05]
    acceldse partition --builtin VGG16 --cores 4 [--verify]

Exit codes: 0 ok, 1 unreadable or malformed input, 2 invalid input or usage,
3 simulation or search failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import re
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, dse, hwmodel, netmodel, partition, rsim
from .reporting import RunManifest, dumps, report_to_csv, report_to_dict

EXIT_PARSE, EXIT_INVALID, EXIT_SIM = 1, 2, 3


class CliError(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(f"{self.prog}: {message}", EXIT_INVALID)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror or e}", EXIT_PARSE) from None


def _kb_list(text: str) -> tuple:
    items = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    if not items:
        raise CliError("empty buffer-size list", EXIT_INVALID)
    try:
        vals = [float(t) for t in items]
    except ValueError:
        raise CliError(f"buffer sizes must be numbers in KB, got {text!r}", EXIT_INVALID) from None
    return tuple(int(v) if v.is_integer() else v for v in vals)


def _array_list(text: str) -> tuple:
    items = [t for t in re.split(r"[,\s]+", text.strip()) if t]
    if not items:
        raise CliError("empty array list", EXIT_INVALID)
    try:
        return tuple(dse.parse_array(t) for t in items)
    except ValueError as e:
        raise CliError(str(e), EXIT_INVALID) from None


def _network(args) -> tuple[netmodel.NetworkTopology, str]:
    if args.builtin:
        try:
            return netmodel.builtin(args.builtin), f"builtin:{args.builtin}"
        except KeyError as e:
            raise CliError(str(e.args[0]), EXIT_INVALID) from None
    text = _read(args.network)
    try:
        return netmodel.parse_network(text), args.network
    except netmodel.NetworkSyntaxError as e:
        raise CliError(f"{args.network}: {e}", EXIT_PARSE) from None
    except netmodel.NetworkError as e:
        raise CliError(f"{args.network}: {e}", EXIT_INVALID) from None


def _config(args) -> tuple[hwmodel.AcceleratorConfig, str | None]:
    path = args.config or hwmodel.config_path_from_env()
    if path:
        try:
            cfg = hwmodel.load_config(_read(path))
        except hwmodel.ConfigSyntaxError as e:
            raise CliError(f"{path}: {e}", EXIT_PARSE) from None
        except hwmodel.ConfigError as e:
            raise CliError(f"{path}: {e}", EXIT_INVALID) from None
    else:
        cfg = hwmodel.default_config()
    if getattr(args, "overlap_delivery", False):
        cfg = replace(cfg, overlap_delivery=True)
    return cfg, path


def _single_point(args, cfg: hwmodel.AcceleratorConfig) -> hwmodel.AcceleratorConfig:
    """Apply --gb-psum/--gb-ifmap/--arrays, each of which must name a single value here."""
    psum, ifmap, array = cfg.alloc.gb_psum, cfg.alloc.gb_ifmap, cfg.array
    for flag, value in (("--gb-psum", args.gb_psum), ("--gb-ifmap", args.gb_ifmap), ("--arrays", args.arrays)):
        if value is None:
            continue
        vals = _array_list(value) if flag == "--arrays" else _kb_list(value)
        if len(vals) != 1:
            raise CliError(f"{flag} takes one value for this command", EXIT_INVALID)
        if flag == "--gb-psum":
            psum = vals[0]
        elif flag == "--gb-ifmap":
            ifmap = vals[0]
        else:
            array = vals[0]
    cfg = cfg.with_point(psum, ifmap, array)
    table = dict(cfg.gb_cost_table)
    for size in (psum, ifmap):
        if size not in table:
            table[size] = hwmodel.default_cost_table(size)
    cfg = replace(cfg, gb_cost_table=table)
    problems = hwmodel.validate(cfg)
    if problems:
        raise CliError("; ".join(problems), EXIT_INVALID)
    return cfg


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    print(f"wrote {path}")


def _stem(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


# --- subcommands ------------------------------------------------------------

def cmd_simulate(args) -> int:
    net, source = _network(args)
    cfg, cfg_path = _config(args)
    cfg = _single_point(args, cfg)
    try:
        report = rsim.simulate_network(net, cfg)
    except ValueError as e:
        raise CliError(str(e), EXIT_SIM) from None
    manifest = RunManifest("simulate", tuple(p for p in (source, cfg_path) if p), cfg.digest())
    out, stem = _out(args), _stem(net.name)
    if args.format in ("csv", "both"):
        _write(out / f"{stem}_layers.csv", report_to_csv(report))
    if args.format in ("json", "both"):
        _write(out / f"{stem}_report.json", dumps(report_to_dict(report, manifest)))
    print(f"{net.name}: {len(report.layers)} layers, energy {report.energy:.6g}, "
          f"latency {report.latency:.6g}, EDP {report.edp:.6g}, utilization {report.utilization:.3f}")
    return 0


def _space(args, cfg: hwmodel.AcceleratorConfig) -> dse.SearchSpace:
    kw = {}
    if args.gb_psum is not None:
        kw["gb_psum"] = _kb_list(args.gb_psum)
    if args.gb_ifmap is not None:
        kw["gb_ifmap"] = _kb_list(args.gb_ifmap)
    if args.arrays is not None:
        kw["arrays"] = _array_list(args.arrays)
    try:
        return dse.SearchSpace(**kw)
    except ValueError as e:
        raise CliError(str(e), EXIT_INVALID) from None


def cmd_sweep(args) -> int:
    net, source = _network(args)
    cfg, cfg_path = _config(args)
    space = _space(args, cfg)
    table = dict(cfg.gb_cost_table)
    for size in space.gb_psum + space.gb_ifmap:
        table.setdefault(size, hwmodel.default_cost_table(size))
    cfg = replace(cfg, gb_cost_table=table)
    try:
        result = dse.sweep(net, cfg, space, jobs=args.jobs)
    except hwmodel.ConfigError as e:
        raise CliError(str(e), EXIT_INVALID) from None
    except dse.SweepError as e:
        raise CliError(str(e), EXIT_SIM) from None
    manifest = RunManifest("sweep", tuple(p for p in (source, cfg_path) if p), cfg.digest(), space.to_dict())
    out, stem = _out(args), _stem(net.name)
    if args.format in ("csv", "both"):
        _write(out / f"{stem}_sweep.csv", dse.sweep_to_csv([result]))
    if args.format in ("json", "both"):
        doc = {"network": result.network, "provenance": result.provenance, "manifest": manifest.to_dict(),
               "records": [{**r.point.to_dict(), "energy": r.energy, "latency": r.latency, "edp": r.edp}
                           for r in result.records]}
        _write(out / f"{stem}_sweep.json", dumps(doc))
    metrics = dse.summarize(result)
    metrics["manifest"] = manifest.to_dict()
    _write(out / f"{stem}_metrics.json", dumps(metrics))
    rows = dse.plot_rows(result, 216 if 216 in space.gb_ifmap else None)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows({k: repr(v) if isinstance(v, float) else v for k, v in row.items()} for row in rows)
    _write(out / f"{stem}_plot.csv", buf.getvalue())
    print(f"{net.name}: {len(result.records)} points, min EDP at {metrics['edp']['min_point']}, "
          f"mean EDP distance {metrics['edp']['mean_percent']:.2f}%, max {metrics['edp']['max_percent']:.2f}%")
    return 0


def cmd_recommend(args) -> int:
    if not args.sweeps:
        raise CliError("recommend needs at least one sweep CSV", EXIT_INVALID)
    results = []
    for path in args.sweeps:
        try:
            results += dse.sweep_from_csv(_read(path))
        except (ValueError, csv.Error) as e:
            raise CliError(f"{path}: {e}", EXIT_PARSE) from None
    names = [r.network for r in results]
    if len(set(names)) != len(names):
        raise CliError("a network appears in more than one sweep file", EXIT_INVALID)
    if args.epsilon < 0:
        raise CliError("--epsilon must be >= 0", EXIT_INVALID)
    try:
        rec = dse.recommend_from_sweeps(results, args.epsilon, args.objective, args.cores)
    except dse.InfeasibleCover as e:
        raise CliError(str(e), EXIT_SIM) from None
    except ValueError as e:
        raise CliError(str(e), EXIT_INVALID) from None
    doc = rec.to_dict()
    doc["manifest"] = RunManifest("recommend", tuple(args.sweeps)).to_dict()
    _write(_out(args) / "recommendation.json", dumps(doc))
    for i, p in enumerate(rec.cores):
        nets = [n for n, ix in rec.coverage.items() if i in ix]
        print(f"core {i}: {p.label} ({p.array})  covers {', '.join(nets)}")
    return 0


def _latencies(path: str) -> list[float]:
    text = _read(path)
    try:
        doc = json.loads(text)
        values = doc["latencies"] if isinstance(doc, dict) else doc
        if not isinstance(values, list):
            raise ValueError
        values = [float(v) for v in values]
    except (ValueError, KeyError, TypeError):
        try:
            values = [float(t) for t in re.split(r"[,\s]+", text.strip()) if t]
        except ValueError:
            raise CliError(f"{path}: expected a list of layer latencies", EXIT_PARSE) from None
    return values


def cmd_partition(args) -> int:
    if args.cores is None:
        raise CliError("partition needs --cores", EXIT_INVALID)
    if args.latencies_file:
        D, names, inputs, digest = _latencies(args.latencies_file), None, (args.latencies_file,), ""
        name = Path(args.latencies_file).stem
    else:
        if not (args.network or args.builtin):
            raise CliError("partition needs --network, --builtin or --latencies-file", EXIT_INVALID)
        net, source = _network(args)
        cfg, cfg_path = _config(args)
        cfg = _single_point(args, cfg)
        try:
            names, D = partition.layer_latencies(net, cfg)
        except ValueError as e:
            raise CliError(str(e), EXIT_SIM) from None
        inputs, digest, name = tuple(p for p in (source, cfg_path) if p), cfg.digest(), net.name
    try:
        plan = partition.bnb_partition(D, args.cores)
    except ValueError as e:
        raise CliError(str(e), EXIT_INVALID) from None
    doc = plan.to_dict()
    if names:
        doc["layers"] = names
    doc["manifest"] = RunManifest("partition", inputs, digest).to_dict()
    _write(_out(args) / f"{_stem(name)}_partition_k{args.cores}.json", dumps(doc))
    print(plan.table_row())
    if args.verify:
        best = partition.dp_oracle_partition(D, args.cores)
        if best != plan.max_latency:
            print(f"verify FAILED: branch-and-bound {plan.max_latency} vs oracle {best}", file=sys.stderr)
            return EXIT_SIM
        print(f"verify ok: max stage latency {best} matches the oracle")
    return 0


# --- wiring -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="acceldse", description="Row-stationary accelerator cost model and design-space tools.")
    p.add_argument("--version", action="version", version=f"acceldse {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, network=True):
        if network:
            g = sp.add_mutually_exclusive_group(required=sp.prog.split()[-1] != "partition")
            g.add_argument("--network", help="network description (JSON)")
            g.add_argument("--builtin", help=f"bundled network: {', '.join(netmodel.available())}")
            sp.add_argument("--config", help=f"accelerator config (JSON); defaults to ${hwmodel.CONFIG_ENV}")
            sp.add_argument("--gb-psum", help="psum buffer size(s) in KB, comma separated")
            sp.add_argument("--gb-ifmap", help="ifmap buffer size(s) in KB, comma separated")
            sp.add_argument("--arrays", help="array size(s) as RxC, comma separated")
            sp.add_argument("--overlap-delivery", action="store_true",
                            help="overlap delivery of the next pass with compute of the current one")
        sp.add_argument("--out", default=".", help="output directory")

    s = sub.add_parser("simulate", help="simulate one network on one configuration")
    common(s)
    s.add_argument("--format", choices=("csv", "json", "both"), default="both")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="simulate every point of a buffer/array search space")
    common(s)
    s.add_argument("--format", choices=("csv", "json", "both"), default="csv")
    s.add_argument("--jobs", type=int, default=None, help="worker processes (default: all CPUs)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("recommend", help="pick core configurations covering every swept network")
    s.add_argument("sweeps", nargs="*", help="sweep CSV files")
    s.add_argument("--epsilon", type=float, default=0.05, help="near-optimal margin as a fraction")
    s.add_argument("--objective", choices=dse.OBJECTIVES, default="edp")
    s.add_argument("--cores", type=int, default=None, help="maximum number of core types")
    common(s, network=False)
    s.set_defaults(func=cmd_recommend)

    s = sub.add_parser("partition", help="split a network's layers over k identical cores")
    common(s)
    s.add_argument("--cores", type=int, help="number of cores k")
    s.add_argument("--latencies-file", help="per-layer latencies (JSON list or whitespace separated)")
    s.add_argument("--verify", action="store_true", help="cross-check against the exact DP")
    s.set_defaults(func=cmd_partition)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "jobs", None) is not None and args.jobs < 1:
            raise CliError("--jobs must be >= 1", EXIT_INVALID)
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
