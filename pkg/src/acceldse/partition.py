"""Pipeline partitioning of a layer sequence over k identical cores.

Each core gets a contiguous run of layers; the pipeline runs at the pace of
the slowest core. ``bnb_partition`` searches stage boundaries by
branch-and-bound, ``dp_oracle_partition`` is the textbook linear-partition DP
used to check it.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import accumulate
from typing import Sequence


@dataclass(frozen=True)
class PartitionPlan:
    assignments: tuple[tuple[int, int], ...]  # (l_initial 1-based, n_c) per core; idle cores get (0, 0)
    stage_latencies: tuple[float, ...]
    max_latency: float
    speedup: float

    @property
    def cuts(self) -> tuple[int, ...]:
        """Index of the last layer of every non-final active stage."""
        active = [a for a in self.assignments if a[1] > 0]
        return tuple(l + n - 1 for l, n in active[:-1])

    def to_dict(self) -> dict:
        return {
            "cores": [{"l_initial": l, "n_c": n, "stage_latency": s}
                      for (l, n), s in zip(self.assignments, self.stage_latencies)],
            "max_latency": self.max_latency,
            "speedup": self.speedup,
        }

    def table_row(self) -> str:
        return "  ".join(f"({l}, {n})" for l, n in self.assignments) + f"  S={self.speedup:.2f}"


def _check(D: Sequence[float], k: int) -> list[float]:
    if k < 1:
        raise ValueError(f"core count must be >= 1, got {k}")
    D = list(D)
    if not D:
        raise ValueError("latency vector is empty")
    if any(d <= 0 for d in D):
        raise ValueError("layer latencies must be positive")
    return D


def dp_oracle_partition(D: Sequence[float], k: int) -> float:
    """Optimal bottleneck over contiguous partitions into at most k stages."""
    D = _check(D, k)
    L = len(D)
    k = min(k, L)
    prefix = [0, *accumulate(D)]
    INF = float("inf")
    best = [prefix[i] for i in range(L + 1)]  # one stage
    for _ in range(2, k + 1):
        nxt = [INF] * (L + 1)
        nxt[0] = 0
        for i in range(1, L + 1):
            v = best[i]
            for s in range(1, i):
                cand = max(best[s], prefix[i] - prefix[s])
                if cand < v:
                    v = cand
            nxt[i] = v
        best = nxt
    return best[L]


def total_latency(D: Sequence[float]) -> float:
    """Single-core latency, summed left to right like every stage sum."""
    return [0, *accumulate(D)][-1]


def speedup(D: Sequence[float], plan: PartitionPlan) -> float:
    return total_latency(D) / plan.max_latency


def _branch_ends(prefix, start, L, average):
    """Candidate stage ends (exclusive) from ``start``.

    The stage grows until its sum first exceeds ``average``; the two primary
    branches include or exclude that boundary layer. Shorter and longer ends
    follow so the search stays exact, the bound discards them cheaply.
    """
    base = prefix[start]
    cross = start + 1
    while cross < L and prefix[cross] - base <= average:
        cross += 1
    yield cross
    if cross - 1 > start:
        yield cross - 1
    for end in range(cross - 2, start, -1):
        yield end
    for end in range(cross + 1, L + 1):
        yield end


def _optimum(D: list[float], k: int) -> float:
    L = len(D)
    prefix = [0, *accumulate(D)]
    average = prefix[L] / k

    # incumbent: follow the include branch only
    start, inc = 0, 0.0
    for n in range(1, k + 1):
        if start == L:
            break
        end = L if n == k else next(_branch_ends(prefix, start, L, average))
        inc = max(inc, prefix[end] - prefix[start])
        start = end
    best = [inc]
    # largest single layer from each position on
    tail_max = list(accumulate(reversed(D), max))[::-1] + [0]
    # smallest bottleneck so far with which (start, n) was entered; coming back
    # with a worse one cannot lead anywhere new
    seen: dict[tuple[int, int], float] = {}

    def search(start: int, n: int, worst: float) -> None:
        rest = prefix[L] - prefix[start]
        cores = k - n + 1
        # no plan from here can beat the incumbent
        if max(worst, rest / cores, tail_max[start]) >= best[0]:
            return
        if seen.get((start, n), float("inf")) <= worst:
            return
        seen[(start, n)] = worst
        if cores == 1 or L - start == 1:
            best[0] = max(worst, rest)
            return
        for end in _branch_ends(prefix, start, L, average):
            stage = prefix[end] - prefix[start]
            if stage >= best[0]:
                continue
            if end == L:
                best[0] = max(worst, stage)
                continue
            search(end, n + 1, max(worst, stage))

    search(0, 1, 0.0)
    return best[0]


def _fits(prefix, start: int, L: int, stages: int, limit: float) -> bool:
    """Can layers start..L-1 be split into exactly ``stages`` non-empty stages each <= limit?"""
    if L - start < stages:
        return False
    used, s = 0, start
    while s < L:
        e = s
        while e < L and prefix[e + 1] - prefix[s] <= limit:
            e += 1
        if e == s:
            return False
        used += 1
        s = e
    return used <= stages


def _canonical(D: list[float], k: int, limit: float) -> list[int]:
    """Lexicographically smallest stage ends using min(k, L) stages, all within ``limit``."""
    L = len(D)
    prefix = [0, *accumulate(D)]
    stages = min(k, L)
    ends, start = [], 0
    for i in range(stages - 1):
        end = start + 1
        while not (prefix[end] - prefix[start] <= limit and _fits(prefix, end, L, stages - i - 1, limit)):
            end += 1
        ends.append(end)
        start = end
    ends.append(L)
    return ends


def plan_from_ends(D: Sequence[float], ends: Sequence[int], k: int) -> PartitionPlan:
    prefix = [0, *accumulate(D)]
    assignments, stages, start = [], [], 0
    for end in ends:
        assignments.append((start + 1, end - start))
        stages.append(prefix[end] - prefix[start])
        start = end
    while len(assignments) < k:
        assignments.append((0, 0))
        stages.append(0)
    worst = max(stages)
    return PartitionPlan(tuple(assignments), tuple(stages), worst, prefix[-1] / worst)


def bnb_partition(D: Sequence[float], k: int) -> PartitionPlan:
    D = _check(D, k)
    limit = _optimum(D, min(k, len(D)))
    return plan_from_ends(D, _canonical(D, k, limit), k)


def layer_latencies(net, config) -> tuple[list[str], list[float]]:
    """Per-layer latencies of ``net`` on one core, in execution order."""
    from .rsim import simulate_network

    report = simulate_network(net, config)
    return [r.name for r in report.layers], [r.latency.total for r in report.layers]


def partition_network(net, config, k: int) -> PartitionPlan:
    """Simulate ``net`` on ``config`` and split its layers over ``k`` copies of that core."""
    _, D = layer_latencies(net, config)
    return bnb_partition(D, k)
