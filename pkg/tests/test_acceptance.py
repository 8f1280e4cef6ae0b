"""Acceptance checks, one test per criterion. Each prints a PASS/FAIL line."""
import json
import math
import random
import time
from dataclasses import replace
from pathlib import Path

from acceldse import cli, dse
from acceldse.dse import DEFAULT_ARRAYS, DesignPoint, SearchSpace, recommend_cores
from acceldse.hwmodel import DEFAULT_GB_SIZES_KB, ArrayDims, BufferAlloc, MemoryLevelCost, default_config
from acceldse.netmodel import LayerKind, LayerSpec, TensorShape, builtin, geometry, layer_volumes
from acceldse.partition import bnb_partition, dp_oracle_partition, total_latency
from acceldse.rsim import (
    DATA,
    LEVELS,
    AccessCounts,
    bus_timeline,
    count_accesses,
    layer_energy,
    layer_latency,
    plan_layer,
    simulate_network,
    utilization,
)
from oracles import loop_nest, spreadsheet_energy

AMPLE = BufferAlloc(216, 216)


def random_layer(rng):
    kind = rng.choice([LayerKind.CONV, LayerKind.DEPTHWISE, LayerKind.POINTWISE])
    c, m = rng.randint(1, 4), rng.randint(1, 4)
    h, w = rng.randint(1, 8), rng.randint(1, 8)
    k = 1 if kind is LayerKind.POINTWISE else rng.randint(1, min(3, h, w))
    pad = 0 if kind is LayerKind.POINTWISE else rng.randint(0, k - 1)
    stride = rng.randint(1, 3)
    layer = LayerSpec(kind, "L", num_filters=None if kind is LayerKind.DEPTHWISE else m,
                      kernel=(k, k), stride=stride, pad=pad)
    return layer, TensorShape(c, h, w)


def test_loop_nest_oracle(acceptance):
    rng = random.Random(2024)
    start = time.perf_counter()
    bad = []
    for i in range(100):
        layer, shape = random_layer(rng)
        array = rng.choice([ArrayDims(4, 4), ArrayDims(8, 8), ArrayDims(12, 14), ArrayDims(3, 5)])
        counts = count_accesses(plan_layer(layer, shape, array), layer, shape, AMPLE)
        macs, ifmap, weights, ofmap = loop_nest(geometry(layer, shape))
        got = (counts.macs, counts.get("dram", "ifmap", "read"), counts.get("dram", "weight", "read"),
               counts.get("dram", "psum", "write"))
        if got != (macs, ifmap, weights, ofmap) or counts.psum_spill_words or counts.ifmap_refetch_words:
            bad.append((i, layer, shape, got, (macs, ifmap, weights, ofmap)))
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 5
    assert acceptance(1, "loop-nest oracle, 100 random layers", ok, f"{len(bad)} mismatches, {elapsed:.2f}s")


def test_energy_composition(acceptance):
    rng = random.Random(1)
    counts = AccessCounts(macs=rng.randint(1, 10**9))
    for level in LEVELS:
        for data in DATA:
            for direction in ("read", "write"):
                counts._add(level, data, direction, rng.randint(0, 10**9))
    table = {13: MemoryLevelCost(5.25, 5.5, 2, 2), 54: MemoryLevelCost(6.125, 6.375, 2, 2),
             216: MemoryLevelCost(9.75, 9.875, 2, 2)}
    cfg = default_config(rf_cost=MemoryLevelCost(1.0625, 0.9375, 1, 1), dram_cost=MemoryLevelCost(201.3, 199.7, 20, 20),
                         gb_cost_table=table, alloc=BufferAlloc(gb_ifmap=13, gb_psum=216, gb_weights=54),
                         mac_energy=1.3)
    costs = {}
    for data in DATA:
        costs[("rf", data)] = (1.0625, 0.9375)
        costs[("dram", data)] = (201.3, 199.7)
    costs[("gb", "ifmap")] = (5.25, 5.5)
    costs[("gb", "weight")] = (6.125, 6.375)
    costs[("gb", "psum")] = (9.75, 9.875)
    expected = spreadsheet_energy(counts.counts, costs, counts.macs, 1.3)
    got = layer_energy(counts, cfg).total
    single = AccessCounts()
    single.move("dram", "gb", "ifmap", 1)
    unit = layer_energy(single, default_config()).total
    ok = got == expected and unit == 206.0
    assert acceptance(2, "energy = sum of counts x costs, fixed order", ok, f"{got!r} vs {expected!r}")


def network_psum_traffic(report):
    return sum(r.counts.get("dram", "psum", "write") for r in report.layers)


def test_psum_buffer_sweep_shape(acceptance):
    start = time.perf_counter()
    net = builtin("VGG16")
    base = default_config().with_point(13, 216, ArrayDims(4, 4))
    reports = [simulate_network(net, replace(base, alloc=replace(base.alloc, gb_psum=s))) for s in DEFAULT_GB_SIZES_KB]
    traffic = [network_psum_traffic(r) for r in reports]
    floor = sum(layer_volumes(l, s).ofmap_words
                for l, s in zip(net.layers, net.input_shapes()) if l.kind is not LayerKind.INPUT)
    energy = [r.energy for r in reports]
    non_increasing = all(a >= b for a, b in zip(traffic, traffic[1:]))
    at_floor = [i for i, t in enumerate(traffic) if t == floor]
    s_star = at_floor[0] if at_floor else None
    rises_after = s_star is not None and all(a <= b for a, b in zip(energy[s_star:], energy[s_star + 1:]))
    elapsed = time.perf_counter() - start
    ok = non_increasing and s_star is not None and rises_after and elapsed < 10
    detail = f"s*={DEFAULT_GB_SIZES_KB[s_star] if s_star is not None else None} KB, {elapsed:.2f}s"
    assert acceptance(3, "psum traffic falls to the ofmap floor, energy rises after", ok, detail)


def test_ifmap_and_array_shapes(acceptance):
    start = time.perf_counter()
    net = builtin("VGG16")
    base = default_config()
    refetch_ok = True
    for array in DEFAULT_ARRAYS:
        seq = []
        for size in sorted(DEFAULT_GB_SIZES_KB, reverse=True):  # shrinking gb_ifmap
            rep = simulate_network(net, base.with_point(13, size, array))
            seq.append([r.ifmap_refetch_words for r in rep.layers])
        for a, b in zip(seq, seq[1:]):
            refetch_ok &= all(y >= x for x, y in zip(a, b)) and sum(b) >= sum(a)
    compute_ok = True
    for layer, shape in zip(net.layers, net.input_shapes()):
        if layer.kind is not LayerKind.CONV:
            continue
        terms = []
        for array in DEFAULT_ARRAYS:
            cfg = base.with_point(54, 54, array)
            plan = plan_layer(layer, shape, array)
            terms.append(layer_latency(plan, count_accesses(plan, layer, shape, cfg.alloc), cfg).compute)
        compute_ok &= all(a >= b for a, b in zip(terms, terms[1:]))
    elapsed = time.perf_counter() - start
    ok = refetch_ok and compute_ok and elapsed < 30
    detail = f"refetch {'ok' if refetch_ok else 'violated'}, compute {'ok' if compute_ok else 'violated'}, {elapsed:.2f}s"
    assert acceptance(4, "ifmap refetch and compute-time monotonicity", ok, detail)


def test_bus_gating(acceptance):
    full = geometry(LayerSpec(LayerKind.CONV, "a", num_filters=1, kernel=(3, 3), pad=1), TensorShape(1, 4, 2))
    _, done_full = bus_timeline([full])
    plan = plan_layer(LayerSpec(LayerKind.CONV, "a", num_filters=1, kernel=(3, 3), pad=1), TensorShape(1, 4, 2),
                      ArrayDims(4, 4))
    half = geometry(LayerSpec(LayerKind.CONV, "b", num_filters=1, kernel=(2, 2), pad=1), TensorShape(1, 3, 2))
    _, done_split = bus_timeline([half, half])
    util = utilization(plan, ArrayDims(4, 4))
    ok = done_full == [17] and done_split == [10, 20] and util == 0.75
    assert acceptance(5, "bus delivery gating at T17 and T10/T20", ok,
                      f"full {done_full}, split {done_split}, utilization {util}")


def test_metric_formulas(acceptance):
    close = lambda a, b: math.isclose(a, b, rel_tol=1e-9, abs_tol=0 if b else 1e-12)
    checks = [
        close(dse.mu_min([100, 110, 120], 100), (0 + 10 + 20) / 3),
        close(dse.mu_min([5, 5, 5]), 0.0),
        close(dse.mu_min([9]), 0.0),
        close(dse.delta_min_max([100, 150]), 50.0),
        close(dse.delta_min_max([3, 3]), 0.0),
        close(dse.delta_min_max([80, 100, 240]), 200.0),
        all(close(a, b) for a, b in zip(dse.edp_distance_stats([2, 3, 4]), ((0 + 50 + 100) / 3, 100.0))),
        all(close(a, b) for a, b in zip(dse.edp_distance_stats([7]), (0.0, 0.0))),
        all(close(a, b) for a, b in zip(dse.edp_distance_stats([1, 1, 3]), (200 / 3, 200.0))),
    ]
    home, away = DesignPoint(54, 54, 3, DEFAULT_ARRAYS[2]), DesignPoint(216, 54, 1, DEFAULT_ARRAYS[0])
    result = dse.SweepResult("net", (dse.SweepRecord(home, 100.0, 10.0, 1000.0),
                                     dse.SweepRecord(away, 120.0, 11.0, 1320.0)))
    pen = dse.cross_penalty("net", home, away, result)
    checks += [close(pen.delta_E, 20.0), close(pen.delta_D, 10.0), close(pen.delta_EDP, 32.0)]
    assert acceptance(6, "distance metrics match hand arithmetic", all(checks), f"{sum(checks)}/{len(checks)}")


PLANS = []


def test_partition_optimality(acceptance):
    rng = random.Random(99)
    start = time.perf_counter()
    bad = 0
    for _ in range(200):
        D = [rng.uniform(1, 10**6) for _ in range(rng.randint(1, 60))]
        k = rng.randint(1, 6)
        plan = bnb_partition(D, k)
        PLANS.append((D, k, plan))
        bad += plan.max_latency != dp_oracle_partition(D, k)
    D0 = [5, 3, 8, 6, 2]
    for k, best in ((1, 24), (2, 16), (3, 8), (5, 8)):
        plan = bnb_partition(D0, k)
        PLANS.append((D0, k, plan))
        bad += plan.max_latency != best or dp_oracle_partition(D0, k) != best
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 10
    assert acceptance(7, "branch-and-bound equals the DP oracle", ok, f"{bad} mismatches, {elapsed:.2f}s")


def test_speedup_bounds(acceptance):
    plans = PLANS or [([5, 3, 8, 6, 2], k, bnb_partition([5, 3, 8, 6, 2], k)) for k in (1, 2, 3, 5)]
    ok = all(1 <= p.speedup <= k and p.speedup == total_latency(D) / p.max_latency for D, k, p in plans)
    assert acceptance(8, "1 <= speedup <= k and speedup = sum/max", ok, f"{len(plans)} plans")


def test_recommender_two_groups(acceptance):
    data = json.loads((Path(__file__).parent / "data" / "table5.json").read_text())
    pt = lambda p, i, a: DesignPoint(p, i, a, DEFAULT_ARRAYS[a - 1])
    sets = {}
    for net, entries in data["near_optimal"].items():
        s = {pt(p, i, a) for p, i, idx in entries for a in idx}
        if net in data["groups"]["core_54_54_3"]:
            s.add(pt(54, 54, 3))
        if net in data["groups"]["core_216_54_1"]:
            s.add(pt(216, 54, 1))
        sets[net] = s
    rec = recommend_cores(sets)
    got = {p.label for p in rec.cores}
    ok = set(rec.cores) == {pt(54, 54, 3), pt(216, 54, 1)}
    assert acceptance(9, "two-group structure yields 54/54,{3} and 216/54,{1}", ok, ", ".join(sorted(got)))


def test_sweep_speed_and_determinism(acceptance, tmp_path):
    net, cfg = builtin("VGG16"), default_config()
    start = time.perf_counter()
    result = dse.sweep(net, cfg, SearchSpace(), jobs=1)
    elapsed = time.perf_counter() - start
    codes = [cli.main(["sweep", "--builtin", "VGG16", "--format", "both", "--jobs", str(j), "--out",
                       str(tmp_path / f"j{j}")]) for j in (1, 4)]
    one, four = tmp_path / "j1", tmp_path / "j4"
    same = codes == [0, 0] and all(f.read_bytes() == (four / f.name).read_bytes() for f in one.iterdir())
    ok = len(result.records) == 150 and elapsed < 10 and same
    assert acceptance(10, "150-point VGG16 sweep speed, jobs-independent output", ok,
                      f"{elapsed:.2f}s single-threaded, outputs {'identical' if same else 'differ'}")
