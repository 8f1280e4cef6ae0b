"""Row-stationary mapping, access counting, and per-layer energy/latency.

Mapping
-------
Each (channel, filter) pair occupies ``K_y`` PE rows by ``O_y`` PE columns:
PE ``(r, j)`` holds filter row ``r``, receives input row ``j*stride - pad + r``
along its diagonal and produces a psum row of length ``O_x`` that is summed
vertically in the array. ``q`` channels are stacked vertically and summed
in-array; when the array is at least twice as wide as ``O_y`` the spare
columns hold copies running other filters on the same input rows.

Loop order per layer is filter group -> channel round -> column strip. The
input feature map is reused across filter groups when it fits in GB_ifmap;
the output planes of one filter group stay live across channel rounds and
overflow GB_psum into DRAM when they do not fit.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

from .hwmodel import AcceleratorConfig, ArrayDims, BufferAlloc
from .netmodel import (
    ConvGeometry,
    LayerKind,
    LayerSpec,
    NetworkTopology,
    TensorShape,
    geometry,
    layer_macs,
    layer_volumes,
    used_span,
)

LEVELS = ("rf", "gb", "dram")
DATA = ("ifmap", "weight", "psum")
DIRECTIONS = ("read", "write")


class MappingError(ValueError):
    pass


@dataclass(frozen=True)
class PassGroup:
    """``count`` array passes that share the same shape. Word quantities are per pass."""
    count: int
    active_pes: int
    weight_words: int  # filter words put on the bus (multicast along PE rows)
    ifmap_words: int  # input words put on the bus (multicast along diagonals)
    psum_in: int  # psums read back from GB to continue accumulating
    psum_out: int  # psums written from the array to GB
    rf_weight_writes: int
    rf_ifmap_writes: int

    @property
    def bus_words(self) -> int:
        return self.weight_words + self.ifmap_words + self.psum_in


@dataclass(frozen=True)
class PassPlan:
    layer: str
    logical_rows: int
    logical_cols: int
    channels_per_pass: int
    col_strip: int
    filter_groups: int
    passes_channels: int
    passes_strips: int
    passes_filters: int
    active_pes: int
    pe_macs: int  # MACs each active PE performs per pass (O_x * K_x)
    first_pass_bus_words: int
    groups: tuple[PassGroup, ...] = field(repr=False)
    accumulates: bool = True  # channel rounds sum into the same outputs

    @property
    def passes(self) -> int:
        return sum(g.count for g in self.groups)


def _ceil(a: int, b: int) -> int:
    return -(-a // b)


def _sizes(total: int, chunk: int) -> list[tuple[int, int]]:
    """[(size, how_many)] splitting ``total`` into chunks of ``chunk`` plus a remainder."""
    out = [(chunk, total // chunk)] if total >= chunk else []
    if total % chunk:
        out.append((total % chunk, 1))
    return out


def _real_rows(g: ConvGeometry, j: int) -> int:
    lo = j * g.stride - g.pad
    return max(0, min(lo + g.ky, g.iy) - max(lo, 0))


def _strips(g: ConvGeometry, col_strip: int) -> Counter:
    sig: Counter = Counter()
    for j0 in range(0, g.oy, col_strip):
        j1 = min(g.oy, j0 + col_strip)
        rows = used_span(g.iy, g.ky, g.pad, g.stride, j0, j1)
        pe_rows = sum(_real_rows(g, j) for j in range(j0, j1))
        sig[(j1 - j0, rows, pe_rows)] += 1
    return sig


@lru_cache(maxsize=4096)
def plan_layer(layer: LayerSpec, in_shape: TensorShape, array: ArrayDims) -> PassPlan:
    if not (layer.kind.conv_like or layer.kind is LayerKind.FC):
        raise MappingError(f"{layer.name}: {layer.kind.value} layers are not mapped onto the array")
    g = geometry(layer, in_shape)
    if g.ky > array.rows:
        raise MappingError(f"{layer.name}: filter height {g.ky} exceeds {array.rows} array rows")
    q = min(g.C, max(1, array.rows // g.ky))
    col_strip = min(g.oy, array.cols)
    used_cols = used_span(g.ix, g.kx, g.pad, g.stride, 0, g.ox)
    strips = _strips(g, col_strip)
    passes_strips = sum(strips.values())
    replicas = array.cols // g.oy if 2 * g.oy <= array.cols else 1

    def make(count, chans, filters, cols, rows, pe_rows, first):
        # depthwise: chans*filters independent jobs; conv: filter copies share the input rows
        jobs = chans * filters
        fed = jobs if g.depthwise else chans
        out = filters * cols * g.ox * (chans if g.depthwise else 1)
        return PassGroup(
            count=count,
            active_pes=jobs * g.ky * cols,
            weight_words=jobs * g.ky * g.kx,
            ifmap_words=fed * rows * used_cols,
            psum_in=0 if first else out,
            psum_out=out,
            rf_weight_writes=jobs * g.ky * g.kx * cols,
            rf_ifmap_writes=jobs * pe_rows * used_cols,
        )

    strip_sigs = sorted(strips.items(), reverse=True)
    groups: list[PassGroup] = []
    if g.depthwise:
        # every job is one channel with its own filter; nothing accumulates across passes
        q_f = min(_ceil(g.C, q), replicas)
        for jobs, n_jobs in _sizes(g.C, q * q_f):
            for (cols, rows, pe_rows), n_s in strip_sigs:
                groups.append(make(n_jobs * n_s, jobs, 1, cols, rows, pe_rows, True))
        passes_channels, passes_filters = _ceil(g.C, q * q_f), 1
        first_chans, first_filters = 1, min(g.C, q * q_f)
    else:
        q_f = min(g.M, replicas)
        for filters, n_f in _sizes(g.M, q_f):
            for rnd, (chans, n_c) in enumerate(_sizes(g.C, q)):
                # the first channel round starts from zero; later rounds read psums back
                splits = [(True, 1), (False, n_c - 1)] if rnd == 0 else [(False, n_c)]
                for first, n in splits:
                    if n == 0:
                        continue
                    for (cols, rows, pe_rows), n_s in strip_sigs:
                        groups.append(make(n_f * n * n_s, chans, filters, cols, rows, pe_rows, first))
        passes_channels, passes_filters = _ceil(g.C, q), _ceil(g.M, q_f)
        first_chans, first_filters = q, q_f

    j1 = min(g.oy, col_strip)
    first_pass = make(1, first_chans, first_filters, j1,
                      used_span(g.iy, g.ky, g.pad, g.stride, 0, j1),
                      sum(_real_rows(g, j) for j in range(j1)), True)
    return PassPlan(
        layer=layer.name,
        logical_rows=g.ky,
        logical_cols=g.oy,
        channels_per_pass=q,
        col_strip=col_strip,
        filter_groups=q_f,
        passes_channels=passes_channels,
        passes_strips=passes_strips,
        passes_filters=passes_filters,
        active_pes=first_pass.active_pes,
        pe_macs=g.ox * g.kx,
        first_pass_bus_words=first_pass.bus_words,
        groups=tuple(groups),
        accumulates=not g.depthwise and passes_channels > 1,
    )


def utilization(plan: PassPlan, array: ArrayDims) -> float:
    """Active PEs over array size, averaged over passes weighted by pass compute time."""
    passes = plan.passes
    if passes == 0 or plan.active_pes == 0:
        raise ValueError(f"{plan.layer}: plan has no active passes")
    # every pass of a layer computes for the same O_x*K_x MAC steps
    active = sum(g.count * g.active_pes for g in plan.groups)
    return active / (passes * array.rows * array.cols)


# --- access counting -------------------------------------------------------

@dataclass
class AccessCounts:
    """Word accesses keyed by (level, data, direction), plus the MAC count."""
    macs: int = 0
    counts: dict = field(default_factory=dict)
    psum_spill_words: int = 0
    ifmap_refetch_words: int = 0

    def get(self, level: str, data: str, direction: str) -> int:
        return self.counts.get((level, data, direction), 0)

    def move(self, src: str, dst: str, data: str, reads: int, writes: int | None = None) -> None:
        """Record one movement class: ``reads`` at the source and ``writes`` at the destination."""
        writes = reads if writes is None else writes
        if src != "pe":
            self._add(src, data, "read", reads)
        if dst != "pe":
            self._add(dst, data, "write", writes)

    def _add(self, level: str, data: str, direction: str, n: int) -> None:
        if n:
            key = (level, data, direction)
            self.counts[key] = self.counts.get(key, 0) + n

    def level_total(self, level: str) -> int:
        return sum(v for (lv, _, _), v in self.counts.items() if lv == level)

    def as_dict(self) -> dict:
        return {f"{lv}.{d}.{dr}": self.get(lv, d, dr) for lv in LEVELS for d in DATA for dr in DIRECTIONS}


def _overflow(need: int, capacity: int, unit: int) -> int:
    """Words of ``need`` that do not fit, in whole units of ``unit`` words."""
    fit = (capacity // unit) * unit
    return max(0, need - fit)


def count_accesses(plan: PassPlan, layer: LayerSpec, in_shape: TensorShape, alloc: BufferAlloc,
                   word_bits: int = 16) -> AccessCounts:
    vol = layer_volumes(layer, in_shape)
    macs = layer_macs(layer, in_shape)
    g = geometry(layer, in_shape)
    cap_if = int(alloc.gb_ifmap * 1024 * 8 // word_bits)
    cap_ps = int(alloc.gb_psum * 1024 * 8 // word_bits)
    c = AccessCounts(macs=macs)

    # ifmap kept resident across filter groups in whole input rows; the rest is refetched
    used_cols = used_span(g.ix, g.kx, g.pad, g.stride, 0, g.ox)
    miss = _overflow(vol.ifmap_words, cap_if, max(used_cols, 1))
    c.ifmap_refetch_words = miss * (plan.passes_filters - 1)

    # output planes of one filter group stay live across channel rounds, in whole output rows
    spill = 0
    if plan.accumulates:
        for filters, n in _sizes(g.M, plan.filter_groups):
            spill += n * _overflow(g.ox * g.oy * filters, cap_ps, g.ox)
        spill *= plan.passes_channels - 1
    c.psum_spill_words = spill

    bus_w = sum(p.count * p.weight_words for p in plan.groups)
    bus_i = sum(p.count * p.ifmap_words for p in plan.groups)
    p_in = sum(p.count * p.psum_in for p in plan.groups)
    p_out = sum(p.count * p.psum_out for p in plan.groups)
    rf_w = sum(p.count * p.rf_weight_writes for p in plan.groups)
    rf_i = sum(p.count * p.rf_ifmap_writes for p in plan.groups)

    c.move("dram", "gb", "ifmap", vol.ifmap_words + c.ifmap_refetch_words)
    c.move("dram", "gb", "weight", vol.weight_words)
    c.move("dram", "gb", "psum", spill)  # spilled psums coming back
    c.move("gb", "rf", "ifmap", bus_i, rf_i)
    c.move("gb", "rf", "weight", bus_w, rf_w)
    c.move("gb", "rf", "psum", p_in)
    c.move("rf", "pe", "ifmap", macs)
    c.move("rf", "pe", "weight", macs)
    c.move("rf", "pe", "psum", macs)
    c.move("pe", "rf", "psum", macs)
    c.move("rf", "gb", "psum", p_out)
    c.move("gb", "dram", "psum", spill + vol.ofmap_words)
    return c


def count_pool(layer: LayerSpec, in_shape: TensorShape) -> AccessCounts:
    vol = layer_volumes(layer, in_shape)
    c = AccessCounts()
    c.move("dram", "gb", "ifmap", vol.ifmap_words)
    c._add("gb", "ifmap", "read", vol.ifmap_words)
    c._add("gb", "psum", "write", vol.ofmap_words)
    c.move("gb", "dram", "psum", vol.ofmap_words)
    return c


# --- energy ----------------------------------------------------------------

@dataclass(frozen=True)
class EnergyBreakdown:
    rf: float
    gb: float
    dram: float
    mac: float
    by_data: dict = field(default_factory=dict, compare=False)

    @property
    def total(self) -> float:
        return self.rf + self.gb + self.dram + self.mac


def _level_costs(config: AcceleratorConfig):
    return {
        "rf": {d: config.rf_cost for d in DATA},
        "gb": {
            "ifmap": config.gb_cost(config.alloc.gb_ifmap),
            "weight": config.gb_cost(config.alloc.gb_weights),
            "psum": config.gb_cost(config.alloc.gb_psum),
        },
        "dram": {d: config.dram_cost for d in DATA},
    }


def layer_energy(counts: AccessCounts, config: AcceleratorConfig) -> EnergyBreakdown:
    """Sum of count x per-access energy, in the fixed order level -> data -> read, write."""
    costs = _level_costs(config)
    per_level = {}
    by_data: dict[str, float] = {}
    for level in LEVELS:
        total = 0.0
        for data in DATA:
            cost = costs[level][data]
            e = (counts.get(level, data, "read") * cost.read_energy
                 + counts.get(level, data, "write") * cost.write_energy)
            by_data[f"{level}.{data}"] = e
            total += e
        per_level[level] = total
    return EnergyBreakdown(per_level["rf"], per_level["gb"], per_level["dram"],
                           counts.macs * config.mac_energy, by_data)


# --- latency ---------------------------------------------------------------

@dataclass(frozen=True)
class LatencyBreakdown:
    dram: float
    delivery: float
    compute: float
    writeback: float

    @property
    def total(self) -> float:
        return self.dram + self.delivery + self.compute + self.writeback


def _dram_time(counts: AccessCounts, config: AcceleratorConfig) -> float:
    reads = sum(counts.get("dram", d, "read") for d in DATA)
    writes = sum(counts.get("dram", d, "write") for d in DATA)
    return reads * config.dram_cost.read_time + writes * config.dram_cost.write_time


def layer_latency(plan: PassPlan, counts: AccessCounts, config: AcceleratorConfig) -> LatencyBreakdown:
    """Serialized DRAM in/out plus, per pass, bus delivery -> compute -> psum writeback.

    Compute of a pass is gated on delivery of its last word. With
    ``overlap_delivery`` the delivery of pass n+1 hides behind compute of pass n.
    """
    bus = config.bus_words_per_cycle
    c = plan.pe_macs * config.mac_time
    gb_w = config.gb_cost(config.alloc.gb_psum).write_time
    passes = plan.passes
    delivery = sum(p.count * p.bus_words for p in plan.groups) / bus
    writeback = sum(p.count * p.psum_out for p in plan.groups) * gb_w
    compute = passes * c
    if config.overlap_delivery:
        d0 = plan.first_pass_bus_words / bus
        hidden = sum(p.count * max(p.bus_words / bus, c) for p in plan.groups) - max(d0, c)
        delivery = d0 + hidden + c - compute
    return LatencyBreakdown(_dram_time(counts, config), delivery, compute, writeback)


def pool_latency(layer: LayerSpec, in_shape: TensorShape, counts: AccessCounts,
                 config: AcceleratorConfig) -> LatencyBreakdown:
    vol = layer_volumes(layer, in_shape)
    gb_w = config.gb_cost(config.alloc.gb_psum).write_time
    return LatencyBreakdown(_dram_time(counts, config), vol.ifmap_words / config.bus_words_per_cycle,
                            0.0, vol.ofmap_words * gb_w)


# --- bus delivery timeline ---------------------------------------------------

@dataclass(frozen=True)
class Transaction:
    time: int  # 1-based bus slot
    job: int
    data: str  # "weight" or "ifmap"
    row: int  # filter row or input row
    word: int
    pes: tuple[tuple[int, int], ...]  # (pe_row, pe_col) receivers, relative to the job's sub-array


def bus_timeline(jobs: Sequence[ConvGeometry]) -> tuple[list[Transaction], list[int]]:
    """Unit-bus delivery of one pass of each job (single channel, single filter).

    Jobs share the bus in order. Filter rows go first, each word multicast to
    its PE row, then every real input row once, multicast to its diagonal.
    Returns all transactions and, per job, the slot at which its last PE
    received its data (the earliest slot its compute may start).
    """
    log: list[Transaction] = []
    done = []
    t = 0
    for n, g in enumerate(jobs):
        cols = range(g.oy)
        used = sorted({o * g.stride - g.pad + k for o in range(g.ox) for k in range(g.kx)}
                      & set(range(g.ix)))
        for r in range(g.ky):
            for w in range(g.kx):
                t += 1
                log.append(Transaction(t, n, "weight", r, w, tuple((r, j) for j in cols)))
        for i in range(g.iy):
            diag = tuple((r, j) for j in cols for r in range(g.ky) if j * g.stride - g.pad + r == i)
            if not diag:
                continue
            for w in used:
                t += 1
                log.append(Transaction(t, n, "ifmap", i, w, diag))
        done.append(t)
    return log, done


# --- reports ---------------------------------------------------------------

@dataclass(frozen=True)
class LayerReport:
    name: str
    kind: str
    macs: int
    energy: EnergyBreakdown
    latency: LatencyBreakdown
    utilization: float | None  # None for layers that do not use the array
    psum_spill_words: int
    ifmap_refetch_words: int
    counts: AccessCounts = field(compare=False, repr=False)
    plan: PassPlan | None = field(default=None, compare=False, repr=False)

    @property
    def energy_total(self) -> float:
        return self.energy.total

    @property
    def latency_total(self) -> float:
        return self.latency.total


@dataclass(frozen=True)
class NetworkReport:
    network: str
    layers: tuple[LayerReport, ...]
    energy: float
    latency: float
    utilization: float

    @property
    def edp(self) -> float:
        return self.energy * self.latency


def simulate_layer(layer: LayerSpec, in_shape: TensorShape, config: AcceleratorConfig) -> LayerReport:
    if layer.kind is LayerKind.POOL:
        counts = count_pool(layer, in_shape)
        return LayerReport(layer.name, layer.kind.value, 0, layer_energy(counts, config),
                           pool_latency(layer, in_shape, counts, config), None, 0, 0, counts)
    plan = plan_layer(layer, in_shape, config.array)
    g = geometry(layer, in_shape)
    need = g.kx + used_span(g.ix, g.kx, g.pad, g.stride, 0, g.ox) + g.ox
    if need > config.rf_capacity:
        raise MappingError(f"{layer.name}: needs {need} RF words per PE, capacity is {config.rf_capacity}")
    counts = count_accesses(plan, layer, in_shape, config.alloc, config.word_bits)
    return LayerReport(
        name=layer.name,
        kind=layer.kind.value,
        macs=counts.macs,
        energy=layer_energy(counts, config),
        latency=layer_latency(plan, counts, config),
        utilization=utilization(plan, config.array),
        psum_spill_words=counts.psum_spill_words,
        ifmap_refetch_words=counts.ifmap_refetch_words,
        counts=counts,
        plan=plan,
    )


def simulate_network(net: NetworkTopology, config: AcceleratorConfig) -> NetworkReport:
    reports = []
    for layer, shape in zip(net.layers, net.input_shapes()):
        if layer.kind is LayerKind.INPUT:
            continue
        try:
            reports.append(simulate_layer(layer, shape, config))
        except MappingError as e:
            raise MappingError(f"{net.name}: {e}") from None
    energy = 0.0
    latency = 0.0
    for r in reports:
        energy += r.energy.total
        latency += r.latency.total
    busy = [(r.latency.compute, r.utilization) for r in reports if r.utilization is not None]
    weight = sum(t for t, _ in busy)
    util = sum(t * u for t, u in busy) / weight if weight else 0.0
    return NetworkReport(net.name, tuple(reports), energy, latency, util)
