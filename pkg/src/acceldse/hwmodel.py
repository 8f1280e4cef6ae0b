"""Accelerator configuration: array size, memory cost tables and buffer allocation.

Energies are in RF-access units by default. The default tables only encode
the orders of magnitude between levels; pass real per-access numbers through
the config file for calibrated studies.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Any

CONFIG_ENV = "ACCELDSE_CONFIG"
DEFAULT_GB_SIZES_KB = (13, 27, 54, 108, 216)


class ConfigError(ValueError):
    pass


class ConfigSyntaxError(ConfigError):
    """The config file is not valid JSON."""


@dataclass(frozen=True)
class ArrayDims:
    rows: int
    cols: int

    @property
    def pes(self) -> int:
        return self.rows * self.cols

    def __str__(self) -> str:
        return f"{self.rows}x{self.cols}"


@dataclass(frozen=True)
class MemoryLevelCost:
    read_energy: float
    write_energy: float
    read_time: float
    write_time: float

    def scaled(self, alpha: float) -> "MemoryLevelCost":
        return replace(self, read_energy=self.read_energy * alpha, write_energy=self.write_energy * alpha)


@dataclass(frozen=True)
class BufferAlloc:
    gb_ifmap: float  # KB
    gb_psum: float  # KB
    gb_weights: float = 54  # KB; never capacity-checked, weights are assumed to fit


RF_DEFAULT = MemoryLevelCost(1.0, 1.0, 1, 1)
DRAM_DEFAULT = MemoryLevelCost(200.0, 200.0, 20, 20)


def default_cost_table(capacity_kb: float) -> MemoryLevelCost:
    """Global-buffer cost for a given capacity: 6x RF at 54 KB, scaling with sqrt(size), clamped to 5..10x RF."""
    if capacity_kb <= 0:
        raise ConfigError(f"buffer capacity must be positive, got {capacity_kb}")
    e = min(10.0, max(5.0, 6.0 * math.sqrt(capacity_kb / 54)))
    return MemoryLevelCost(e, e, 2, 2)


def default_gb_table(sizes=DEFAULT_GB_SIZES_KB) -> dict[float, MemoryLevelCost]:
    return {s: default_cost_table(s) for s in sizes}


@dataclass(frozen=True)
class AcceleratorConfig:
    array: ArrayDims = ArrayDims(16, 16)
    alloc: BufferAlloc = BufferAlloc(54, 54)
    rf_capacity: int = 512  # words per PE
    rf_cost: MemoryLevelCost = RF_DEFAULT
    gb_cost_table: dict = field(default_factory=default_gb_table)  # KB -> MemoryLevelCost
    dram_cost: MemoryLevelCost = DRAM_DEFAULT
    mac_energy: float = 1.0
    mac_time: float = 1
    bus_words_per_cycle: float = 1
    word_bits: int = 16
    overlap_delivery: bool = False

    def __hash__(self) -> int:
        return hash(self.digest())

    def gb_cost(self, capacity_kb: float) -> MemoryLevelCost:
        try:
            return self.gb_cost_table[capacity_kb]
        except KeyError:
            raise ConfigError(f"no global-buffer cost entry for {capacity_kb} KB") from None

    def words(self, capacity_kb: float) -> int:
        return int(capacity_kb * 1024 * 8 // self.word_bits)

    def with_point(self, gb_psum: float, gb_ifmap: float, array: ArrayDims) -> "AcceleratorConfig":
        return replace(self, array=array, alloc=replace(self.alloc, gb_psum=gb_psum, gb_ifmap=gb_ifmap))

    def scaled_energy(self, alpha: float) -> "AcceleratorConfig":
        return replace(
            self,
            rf_cost=self.rf_cost.scaled(alpha),
            dram_cost=self.dram_cost.scaled(alpha),
            gb_cost_table={k: v.scaled(alpha) for k, v in self.gb_cost_table.items()},
            mac_energy=self.mac_energy * alpha,
        )

    def to_dict(self) -> dict:
        def cost(c: MemoryLevelCost) -> dict:
            return {"read_e": c.read_energy, "write_e": c.write_energy,
                    "read_t": c.read_time, "write_t": c.write_time}

        return {
            "array": [self.array.rows, self.array.cols],
            "alloc": asdict(self.alloc),
            "rf_capacity": self.rf_capacity,
            "costs": {
                "rf": cost(self.rf_cost),
                "gb": [dict(capacity_kb=k, **cost(v)) for k, v in sorted(self.gb_cost_table.items())],
                "dram": cost(self.dram_cost),
            },
            "mac": {"energy": self.mac_energy, "time": self.mac_time},
            "bus": {"words_per_cycle": self.bus_words_per_cycle},
            "word_bits": self.word_bits,
            "overlap_delivery": self.overlap_delivery,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def validate(config: AcceleratorConfig) -> list[str]:
    """Every violated invariant, one message each. Empty means usable."""
    problems = []
    if config.array.rows < 1:
        problems.append(f"array.rows must be >= 1 (got {config.array.rows})")
    if config.array.cols < 1:
        problems.append(f"array.cols must be >= 1 (got {config.array.cols})")
    for name in ("gb_ifmap", "gb_psum"):
        if getattr(config.alloc, name) <= 0:
            problems.append(f"alloc.{name} must be > 0")
    if config.alloc.gb_weights <= 0:
        problems.append("alloc.gb_weights must be > 0")
    needed = sorted({config.alloc.gb_ifmap, config.alloc.gb_psum, config.alloc.gb_weights})
    for size in needed:
        if size > 0 and size not in config.gb_cost_table:
            problems.append(f"gb cost table has no entry for {size} KB")
    if config.word_bits not in (8, 16, 32):
        problems.append(f"word_bits must be 8, 16 or 32 (got {config.word_bits})")
    if config.rf_capacity < 1:
        problems.append("rf_capacity must be >= 1")
    if config.bus_words_per_cycle <= 0:
        problems.append("bus.words_per_cycle must be > 0")
    if config.mac_time < 0 or config.mac_energy < 0:
        problems.append("mac energy/time must be >= 0")
    levels = [("rf", config.rf_cost), ("dram", config.dram_cost)]
    levels += [(f"gb[{k}]", v) for k, v in sorted(config.gb_cost_table.items())]
    for name, c in levels:
        if min(c.read_energy, c.write_energy, c.read_time, c.write_time) < 0:
            problems.append(f"{name} costs must be >= 0")
        elif c.read_energy == 0 and c.write_energy == 0:
            problems.append(f"{name} needs a positive read or write energy")
    return problems


# --- loading ---------------------------------------------------------------

_TOP_KEYS = {"array", "alloc", "gb_ifmap", "gb_psum", "gb_weights", "rf_capacity", "costs",
             "mac", "bus", "word_bits", "overlap_delivery", "use_defaults"}


def _number(v: Any, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where} must be a number, got {v!r}")
    return v


def _cost(d: Any, base: MemoryLevelCost, where: str) -> MemoryLevelCost:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    keys = {"read_e": "read_energy", "write_e": "write_energy", "read_t": "read_time", "write_t": "write_time"}
    unknown = set(d) - set(keys) - {"capacity_kb"}
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    return replace(base, **{keys[k]: _number(v, f"{where}.{k}") for k, v in d.items() if k in keys})


def config_from_dict(doc: Any) -> AcceleratorConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be an object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    defaults = doc.get("use_defaults", True)

    if "array" not in doc:
        raise ConfigError("missing required field 'array'")
    arr = doc["array"]
    if isinstance(arr, dict):
        arr = [arr.get("rows"), arr.get("cols")]
    if not (isinstance(arr, list) and len(arr) == 2 and all(isinstance(x, int) for x in arr)):
        raise ConfigError("array must be [rows, cols]")

    alloc_doc = dict(doc.get("alloc", {}))
    for key in ("gb_ifmap", "gb_psum", "gb_weights"):
        if key in doc:
            alloc_doc[key] = doc[key]
    for key in ("gb_ifmap", "gb_psum"):
        if key not in alloc_doc:
            raise ConfigError(f"missing required field '{key}'")
    unknown = set(alloc_doc) - {"gb_ifmap", "gb_psum", "gb_weights"}
    if unknown:
        raise ConfigError(f"alloc: unknown keys {sorted(unknown)}")
    alloc = BufferAlloc(**{k: _number(v, f"alloc.{k}") for k, v in alloc_doc.items()})

    costs = doc.get("costs", {})
    unknown = set(costs) - {"rf", "gb", "dram"}
    if unknown:
        raise ConfigError(f"costs: unknown keys {sorted(unknown)}")
    if not defaults and not {"rf", "dram"} <= set(costs):
        raise ConfigError("costs.rf and costs.dram are required when use_defaults is false")
    rf = _cost(costs.get("rf", {}), RF_DEFAULT, "costs.rf")
    dram = _cost(costs.get("dram", {}), DRAM_DEFAULT, "costs.dram")
    table: dict[float, MemoryLevelCost] = {}
    for i, entry in enumerate(costs.get("gb", [])):
        where = f"costs.gb[{i}]"
        if not isinstance(entry, dict) or "capacity_kb" not in entry:
            raise ConfigError(f"{where} needs capacity_kb")
        cap = _number(entry["capacity_kb"], f"{where}.capacity_kb")
        base = default_cost_table(cap) if defaults else MemoryLevelCost(0, 0, 0, 0)
        table[cap] = _cost(entry, base, where)
    for size in (alloc.gb_ifmap, alloc.gb_psum, alloc.gb_weights):
        if size not in table:
            if not defaults:
                raise ConfigError(f"allocation size {size} KB missing from costs.gb")
            if size > 0:
                table[size] = default_cost_table(size)
    if defaults:
        for size in DEFAULT_GB_SIZES_KB:
            table.setdefault(size, default_cost_table(size))

    mac = doc.get("mac", {})
    bus = doc.get("bus", {})
    cfg = AcceleratorConfig(
        array=ArrayDims(*arr),
        alloc=alloc,
        rf_capacity=doc.get("rf_capacity", 512),
        rf_cost=rf,
        gb_cost_table=table,
        dram_cost=dram,
        mac_energy=_number(mac.get("energy", 1.0), "mac.energy"),
        mac_time=_number(mac.get("time", 1), "mac.time"),
        bus_words_per_cycle=_number(bus.get("words_per_cycle", 1), "bus.words_per_cycle"),
        word_bits=doc.get("word_bits", 16),
        overlap_delivery=bool(doc.get("overlap_delivery", False)),
    )
    problems = validate(cfg)
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def load_config(text: str) -> AcceleratorConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigSyntaxError(f"{e.msg} (line {e.lineno}, column {e.colno})") from None
    return config_from_dict(doc)


def default_config(**overrides) -> AcceleratorConfig:
    return replace(AcceleratorConfig(), **overrides)


def config_path_from_env() -> str | None:
    return os.environ.get(CONFIG_ENV) or None
