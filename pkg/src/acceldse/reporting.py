"""Serialized reports: per-layer CSV, JSON documents and the run manifest they carry.

Nothing here reads the clock, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

from . import __version__
from .rsim import NetworkReport

LAYER_COLUMNS = ("layer", "macs", "e_rf", "e_gb", "e_dram", "e_mac", "e_total", "t_dram", "t_delivery",
                 "t_compute", "t_writeback", "t_total", "util", "psum_spill", "ifmap_refetch")


@dataclass(frozen=True)
class RunManifest:
    command: str
    inputs: tuple[str, ...] = ()
    config_hash: str = ""
    space: dict | None = None
    determinism: str = "no random state; identical manifest and inputs reproduce identical bytes"
    version: str = field(default=__version__)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["inputs"] = list(self.inputs)
        return d


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def layer_rows(report: NetworkReport) -> list[dict]:
    rows = []
    for r in report.layers:
        e, t = r.energy, r.latency
        rows.append({
            "layer": r.name, "macs": r.macs,
            "e_rf": e.rf, "e_gb": e.gb, "e_dram": e.dram, "e_mac": e.mac, "e_total": e.total,
            "t_dram": t.dram, "t_delivery": t.delivery, "t_compute": t.compute, "t_writeback": t.writeback,
            "t_total": t.total, "util": r.utilization,
            "psum_spill": r.psum_spill_words, "ifmap_refetch": r.ifmap_refetch_words,
        })
    return rows


def report_to_csv(report: NetworkReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LAYER_COLUMNS)
    for row in layer_rows(report):
        w.writerow([_cell(row[c]) for c in LAYER_COLUMNS])
    return buf.getvalue()


def report_to_dict(report: NetworkReport, manifest: RunManifest | None = None) -> dict:
    doc = {
        "network": report.network,
        "totals": {"energy": report.energy, "latency": report.latency, "edp": report.edp,
                   "utilization": report.utilization},
        "layers": [{**row, "kind": r.kind, "accesses": r.counts.as_dict()}
                   for row, r in zip(layer_rows(report), report.layers)],
    }
    if manifest is not None:
        doc["manifest"] = manifest.to_dict()
    return doc


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
