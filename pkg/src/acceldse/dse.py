"""Design-space sweeps over (gb_psum, gb_ifmap, array) and what to do with them.

A sweep evaluates every point of a ``SearchSpace`` with ``simulate_network``.
The helpers below turn sweep records into distance-from-minimum metrics,
near-optimal sets, a heterogeneous core recommendation (a set cover over
networks) and the penalty of running a network on someone else's core.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import fmean
from typing import Iterable, Mapping, Sequence

from .hwmodel import DEFAULT_GB_SIZES_KB, AcceleratorConfig, ArrayDims, ConfigError
from .netmodel import NetworkTopology, network_to_dict
from .rsim import simulate_network

DEFAULT_ARRAYS = (
    ArrayDims(12, 14), ArrayDims(16, 16), ArrayDims(32, 32),
    ArrayDims(64, 64), ArrayDims(128, 128), ArrayDims(256, 256),
)
OBJECTIVES = ("energy", "latency", "edp")
EXACT_COVER_LIMIT = 32  # distinct candidate points; above this the recommender goes greedy


class SweepError(RuntimeError):
    def __init__(self, msg: str, point: "DesignPoint | None" = None):
        super().__init__(msg)
        self.point = point


class InfeasibleCover(ValueError):
    def __init__(self, msg: str, uncovered: Sequence[str]):
        super().__init__(msg)
        self.uncovered = tuple(uncovered)


def array_index(array: ArrayDims, arrays: Sequence[ArrayDims] = ()) -> int:
    """1-based index in the default array list; arrays outside it are numbered after it, in ``arrays`` order."""
    if array in DEFAULT_ARRAYS:
        return DEFAULT_ARRAYS.index(array) + 1
    extra = [a for a in dict.fromkeys(arrays) if a not in DEFAULT_ARRAYS]
    if array not in extra:
        extra.append(array)
    return len(DEFAULT_ARRAYS) + extra.index(array) + 1


def parse_array(text: str) -> ArrayDims:
    try:
        r, c = text.lower().split("x")
        dims = ArrayDims(int(r), int(c))
    except ValueError:
        raise ValueError(f"array must look like RxC, got {text!r}") from None
    if dims.rows < 1 or dims.cols < 1:
        raise ValueError(f"array dimensions must be positive, got {text!r}")
    return dims


@dataclass(frozen=True)
class DesignPoint:
    gb_psum: float
    gb_ifmap: float
    array_index: int
    array: ArrayDims = field(compare=False)

    @property
    def key(self) -> tuple:
        return (self.gb_psum, self.gb_ifmap, self.array_index)

    def __lt__(self, other: "DesignPoint") -> bool:
        return self.key < other.key

    @property
    def label(self) -> str:
        return f"{self.gb_psum:g}/{self.gb_ifmap:g},{{{self.array_index}}}"

    def to_dict(self) -> dict:
        return {"gb_psum": self.gb_psum, "gb_ifmap": self.gb_ifmap,
                "array": [self.array.rows, self.array.cols], "array_index": self.array_index}


@dataclass(frozen=True)
class SearchSpace:
    gb_psum: tuple = DEFAULT_GB_SIZES_KB
    gb_ifmap: tuple = DEFAULT_GB_SIZES_KB
    arrays: tuple = DEFAULT_ARRAYS

    def __post_init__(self):
        for name in ("gb_psum", "gb_ifmap", "arrays"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"search space: {name} is empty")
            if len(set(values)) != len(values):
                raise ValueError(f"search space: {name} has duplicates")
            object.__setattr__(self, name, values)
        if any(v <= 0 for v in self.gb_psum + self.gb_ifmap):
            raise ValueError("search space: buffer sizes must be positive")

    def points(self) -> list[DesignPoint]:
        """Every point, in canonical (gb_psum, gb_ifmap, array_index) order."""
        pts = [DesignPoint(p, i, array_index(a, self.arrays), a)
               for p in self.gb_psum for i in self.gb_ifmap for a in self.arrays]
        return sorted(pts)

    def __len__(self) -> int:
        return len(self.gb_psum) * len(self.gb_ifmap) * len(self.arrays)

    def to_dict(self) -> dict:
        return {"gb_psum": list(self.gb_psum), "gb_ifmap": list(self.gb_ifmap),
                "arrays": [str(a) for a in self.arrays]}


@dataclass(frozen=True)
class SweepRecord:
    point: DesignPoint
    energy: float
    latency: float
    edp: float

    def objective(self, name: str) -> float:
        if name not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}, got {name!r}")
        return getattr(self, name)


@dataclass(frozen=True)
class SweepResult:
    network: str
    records: tuple[SweepRecord, ...]
    provenance: str = ""  # hash of (network, base config, space)

    def record(self, point: DesignPoint) -> SweepRecord:
        for r in self.records:
            if r.point.key == point.key:
                return r
        raise KeyError(f"{self.network}: no record for point {point.label}")


# --- sweeping ---------------------------------------------------------------

def _evaluate(job):
    net, cfg = job
    report = simulate_network(net, cfg)
    return report.energy, report.latency


def _provenance(net: NetworkTopology, base: AcceleratorConfig, space: SearchSpace) -> str:
    blob = json.dumps({"network": network_to_dict(net), "config": base.digest(), "space": space.to_dict()},
                      sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def sweep(net: NetworkTopology, base_config: AcceleratorConfig, space: SearchSpace | None = None,
          jobs: int | None = 1) -> SweepResult:
    """Simulate ``net`` at every point of ``space``. Results do not depend on ``jobs``."""
    space = space or SearchSpace()
    points = space.points()
    for p in points:
        for size in (p.gb_psum, p.gb_ifmap):
            if size not in base_config.gb_cost_table:
                raise ConfigError(f"point {p.label}: no global-buffer cost entry for {size} KB")
    work = [(net, base_config.with_point(p.gb_psum, p.gb_ifmap, p.array)) for p in points]
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(work))) as pool:
            futures = [pool.submit(_evaluate, w) for w in work]
            outcomes = []
            for p, f in zip(points, futures):
                try:
                    outcomes.append(f.result())
                except ValueError as e:
                    raise SweepError(f"point {p.label}: {e}", p) from e
    else:
        outcomes = []
        for p, w in zip(points, work):
            try:
                outcomes.append(_evaluate(w))
            except ValueError as e:
                raise SweepError(f"point {p.label}: {e}", p) from e
    records = tuple(SweepRecord(p, e, t, e * t) for p, (e, t) in zip(points, outcomes))
    return SweepResult(net.name, records, _provenance(net, base_config, space))


# --- distance metrics -------------------------------------------------------

def _check_values(values: Iterable[float]) -> list[float]:
    values = list(values)
    if not values:
        raise ValueError("empty slice")
    if min(values) <= 0:
        raise ValueError("metric values must be positive")
    return values


def mu_min(values: Iterable[float], e_min: float | None = None) -> float:
    """Mean percent distance of ``values`` from the minimum."""
    values = _check_values(values)
    e_min = min(values) if e_min is None else e_min
    return fmean((v - e_min) / e_min for v in values) * 100


def delta_min_max(values: Iterable[float]) -> float:
    """Percent spread between the largest and smallest value."""
    values = _check_values(values)
    lo, hi = min(values), max(values)
    return (hi - lo) / lo * 100


def edp_distance_stats(edps: Iterable[float]) -> tuple[float, float]:
    """(mean, max) percent distance of every EDP from the minimum EDP."""
    edps = _check_values(edps)
    lo = min(edps)
    gaps = [(v - lo) / lo * 100 for v in edps]
    return fmean(gaps), max(gaps)


def minimum_point(records: Iterable[SweepRecord], objective: str = "energy") -> SweepRecord:
    """Argmin of ``objective``; ties go to the smallest (gb_psum, gb_ifmap, array_index)."""
    records = list(records)
    if not records:
        raise ValueError("no records")
    return min(records, key=lambda r: (r.objective(objective), r.point.key))


def slice_records(records: Iterable[SweepRecord], fixed: str, value: float | None = None,
                  objective: str = "energy") -> list[SweepRecord]:
    """Records sharing one buffer size.

    ``fixed`` names the held coordinate (``gb_psum`` or ``gb_ifmap``). Without
    ``value`` it is taken from the objective's minimum point, so the slice
    always contains that minimum.
    """
    if fixed not in ("gb_psum", "gb_ifmap"):
        raise ValueError(f"fixed must be gb_psum or gb_ifmap, got {fixed!r}")
    records = list(records)
    if value is None:
        value = getattr(minimum_point(records, objective).point, fixed)
    out = [r for r in records if getattr(r.point, fixed) == value]
    if not out:
        raise ValueError(f"empty slice at {fixed}={value}")
    return out


def by_array(records: Iterable[SweepRecord]) -> dict[int, list[SweepRecord]]:
    groups: dict[int, list[SweepRecord]] = {}
    for r in sorted(records, key=lambda r: r.point.key):
        groups.setdefault(r.point.array_index, []).append(r)
    return dict(sorted(groups.items()))


def slice_metrics(records: Sequence[SweepRecord], fixed: str, value: float | None = None) -> dict:
    sl = slice_records(records, fixed, value)
    energies = [r.energy for r in sl]
    return {"fixed": fixed, "value": getattr(sl[0].point, fixed),
            "mu_min": mu_min(energies), "delta_min_max": delta_min_max(energies)}


def summarize(result: SweepResult, fixed_gb_ifmap: float = 216, fixed_gb_psum: float = 13) -> dict:
    """Metrics document for one sweep: per-array energy slices plus EDP statistics.

    Per array, the ``at_minimum`` slices hold one buffer at the minimum-energy
    point's size; the ``fixed`` slices hold it at the given sizes when
    those are part of the space.
    """
    arrays = {}
    for idx, recs in by_array(result.records).items():
        best = minimum_point(recs)
        entry = {
            "array": str(recs[0].point.array),
            "min_point": best.point.label,
            "e_min": best.energy,
            "at_minimum": {f: slice_metrics(recs, f) for f in ("gb_psum", "gb_ifmap")},
            "fixed": {},
        }
        for f, v in (("gb_ifmap", fixed_gb_ifmap), ("gb_psum", fixed_gb_psum)):
            if any(getattr(r.point, f) == v for r in recs):
                entry["fixed"][f] = slice_metrics(recs, f, v)
        arrays[str(idx)] = entry
    mean, worst = edp_distance_stats(r.edp for r in result.records)
    best = minimum_point(result.records, "edp")
    return {"network": result.network, "points": len(result.records), "provenance": result.provenance,
            "arrays": arrays, "edp": {"min_point": best.point.label, "min": best.edp,
                                      "mean_percent": mean, "max_percent": worst}}


# --- near-optimal sets and core recommendation ------------------------------

def near_optimal_set(records: Iterable[SweepRecord], epsilon: float = 0.05,
                     objective: str = "edp") -> frozenset[DesignPoint]:
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    records = list(records)
    best = minimum_point(records, objective).objective(objective)
    bound = (1 + epsilon) * best
    return frozenset(r.point for r in records if r.objective(objective) <= bound)


@dataclass(frozen=True)
class CoreRecommendation:
    cores: tuple[DesignPoint, ...]
    coverage: dict  # network -> tuple of indices into cores
    epsilon: float
    objective: str = "edp"
    exact: bool = True

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "objective": self.objective,
            "exact": self.exact,
            "cores": [{**p.to_dict(), "label": p.label} for p in self.cores],
            "coverage": {n: list(ix) for n, ix in sorted(self.coverage.items())},
        }


def _cover_rank(chosen: Sequence[DesignPoint], covers: Mapping[DesignPoint, frozenset]) -> tuple:
    # more total coverage first, then lexicographic point order
    return (-sum(len(covers[p]) for p in chosen), tuple(p.key for p in chosen))


def _undominated(covers: Mapping[DesignPoint, frozenset]) -> list[DesignPoint]:
    """Drop points whose network set is inside another point's.

    Swapping a dominated point for its dominator never shrinks a cover and
    only improves the tie-break, so the optimum is unchanged. Among points
    with identical sets the lexicographically smallest survives.
    """
    keep = []
    ordered = sorted(covers)
    for p in ordered:
        mine = covers[p]
        if any(mine < covers[q] or (mine == covers[q] and q < p) for q in ordered if q is not p):
            continue
        keep.append(p)
    return keep


def _exact_cover(points: Sequence[DesignPoint], covers: Mapping[DesignPoint, frozenset],
                 everyone: frozenset, limit: int) -> tuple[DesignPoint, ...] | None:
    """Best-ranked cover among those of minimum size, or None above ``limit``.

    Every cover must contain some point covering the least-served uncovered
    network, so branching on that network reaches every minimum cover.
    """
    nets = sorted(everyone)
    bit = {n: 1 << i for i, n in enumerate(nets)}
    masks = [sum(bit[n] for n in covers[p]) for p in points]
    full = (1 << len(nets)) - 1
    serving = {bit[n]: [i for i, m in enumerate(masks) if m & bit[n]] for n in nets}
    widest = max(bin(m).count("1") for m in masks)

    for size in range(1, min(limit, len(points)) + 1):
        found: set[tuple[int, ...]] = set()
        tried: set[tuple[int, ...]] = set()

        def grow(picked: tuple[int, ...], covered: int) -> None:
            if covered == full:
                found.add(picked)
                return
            room = size - len(picked)
            if room * widest < bin(full & ~covered).count("1") or picked in tried:
                return
            tried.add(picked)
            need = min((b for b in serving if not covered & b), key=lambda b: len(serving[b]))
            for i in serving[need]:
                grow(tuple(sorted(picked + (i,))), covered | masks[i])

        grow((), 0)
        if found:
            return min((tuple(points[i] for i in c) for c in found), key=lambda c: _cover_rank(c, covers))
    return None


def recommend_cores(per_network: Mapping[str, Iterable[DesignPoint]], max_core_types: int | None = None,
                    epsilon: float = 0.05, objective: str = "edp") -> CoreRecommendation:
    """Fewest design points such that every network has one of its near-optimal points among them."""
    sets = {n: frozenset(s) for n, s in per_network.items()}
    if not sets:
        raise ValueError("no networks to cover")
    empty = sorted(n for n, s in sets.items() if not s)
    if empty:
        raise ValueError(f"empty near-optimal set for {', '.join(empty)}")
    limit = len(sets) if max_core_types is None else max_core_types
    if limit < 1:
        raise ValueError("max_core_types must be >= 1")
    # the same point may arrive as distinct objects; merge on key
    canon: dict[tuple, DesignPoint] = {}
    for s in sets.values():
        for p in s:
            canon.setdefault(p.key, p)
    covers = {p: frozenset(n for n, s in sets.items() if any(q.key == k for q in s))
              for k, p in sorted(canon.items())}
    everyone = frozenset(sets)
    points = _undominated(covers)

    chosen: tuple[DesignPoint, ...] | None = None
    exact = len(points) <= EXACT_COVER_LIMIT
    if exact:
        chosen = _exact_cover(points, covers, everyone, limit)
    else:
        picked: list[DesignPoint] = []
        left = set(everyone)
        while left and len(picked) < limit:
            best = min((p for p in points if p not in picked),
                       key=lambda p: (-len(covers[p] & left), -len(covers[p]), p.key))
            if not covers[best] & left:
                break
            picked.append(best)
            left -= covers[best]
        if not left:
            chosen = tuple(sorted(picked))

    if chosen is None:
        # report what the best-effort cover of the allowed size leaves out
        left = set(everyone)
        for _ in range(limit):
            best = min(points, key=lambda p: (-len(covers[p] & left), p.key))
            left -= covers[best]
        uncovered = sorted(left)
        raise InfeasibleCover(f"no cover with at most {limit} core type(s); uncovered: {', '.join(uncovered)}",
                              uncovered)
    coverage = {n: tuple(i for i, p in enumerate(chosen) if n in covers[p]) for n in sorted(sets)}
    return CoreRecommendation(tuple(chosen), coverage, epsilon, objective, exact)


def recommend_from_sweeps(results: Iterable[SweepResult], epsilon: float = 0.05, objective: str = "edp",
                          max_core_types: int | None = None) -> CoreRecommendation:
    sets = {r.network: near_optimal_set(r.records, epsilon, objective) for r in results}
    return recommend_cores(sets, max_core_types, epsilon, objective)


@dataclass(frozen=True)
class CrossPenalty:
    delta_E: float
    delta_D: float
    delta_EDP: float


def cross_penalty(net: str, home: DesignPoint, away: DesignPoint, result: SweepResult) -> CrossPenalty:
    """Percent change in energy, latency and EDP when ``net`` runs on ``away`` instead of ``home``."""
    if result.network != net:
        raise ValueError(f"sweep is for {result.network}, not {net}")
    h, a = result.record(home), result.record(away)

    def pct(x: float, y: float) -> float:
        return (y - x) / x * 100

    return CrossPenalty(pct(h.energy, a.energy), pct(h.latency, a.latency), pct(h.edp, a.edp))


# --- files ------------------------------------------------------------------

SWEEP_COLUMNS = ("network", "gb_psum_kb", "gb_ifmap_kb", "array_rows", "array_cols", "energy", "latency", "edp")


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def sweep_to_csv(results: Iterable[SweepResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for res in results:
        for r in sorted(res.records, key=lambda r: r.point.key):
            p = r.point
            w.writerow([res.network, _num(p.gb_psum), _num(p.gb_ifmap), p.array.rows, p.array.cols,
                        repr(float(r.energy)), repr(float(r.latency)), repr(float(r.edp))])
    return buf.getvalue()


def _kb(text: str) -> float:
    v = float(text)
    return int(v) if v.is_integer() else v


def sweep_from_csv(text: str) -> list[SweepResult]:
    """Read a sweep CSV; one result per network, in order of first appearance."""
    reader = csv.DictReader(io.StringIO(text))
    missing = set(SWEEP_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"sweep CSV lacks columns {sorted(missing)}")
    rows: dict[str, list[dict]] = {}
    for i, row in enumerate(reader, 2):
        try:
            rows.setdefault(row["network"], []).append({
                "psum": _kb(row["gb_psum_kb"]), "ifmap": _kb(row["gb_ifmap_kb"]),
                "array": ArrayDims(int(row["array_rows"]), int(row["array_cols"])),
                "e": float(row["energy"]), "t": float(row["latency"]), "edp": float(row["edp"]),
            })
        except (TypeError, ValueError) as e:
            raise ValueError(f"sweep CSV line {i}: {e}") from None
    out = []
    for net, recs in rows.items():
        arrays = list(dict.fromkeys(r["array"] for r in recs))
        records = tuple(sorted(
            (SweepRecord(DesignPoint(r["psum"], r["ifmap"], array_index(r["array"], arrays), r["array"]),
                         r["e"], r["t"], r["edp"]) for r in recs),
            key=lambda r: r.point.key))
        out.append(SweepResult(net, records))
    return out


def plot_rows(result: SweepResult, gb_ifmap: float | None = None) -> list[dict]:
    """Energy against gb_psum per array at one gb_ifmap (largest in the sweep by default)."""
    if gb_ifmap is None:
        gb_ifmap = max(r.point.gb_ifmap for r in result.records)
    return [{"network": result.network, "array": str(r.point.array), "array_index": r.point.array_index,
             "gb_ifmap_kb": r.point.gb_ifmap, "gb_psum_kb": r.point.gb_psum, "energy": r.energy,
             "latency": r.latency}
            for r in sorted(result.records, key=lambda r: (r.point.array_index, r.point.gb_psum))
            if r.point.gb_ifmap == gb_ifmap]

