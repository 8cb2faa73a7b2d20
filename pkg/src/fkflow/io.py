"""Seeding policy and trajectory / CSV serialisation."""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph_core import WeightedMultigraph, graph_hash
from .trajectory import FlowEvent, FlowTrajectory, replay_partition

__all__ = [
    "SCHEMA_VERSION",
    "TrajectoryFormatError",
    "read_trajectory",
    "seed_streams",
    "worker_count",
    "write_csv",
    "write_trajectory",
]

SCHEMA_VERSION = 1


class TrajectoryFormatError(ValueError):
    pass


def seed_streams(master_seed: int, replicate_index: int) -> np.random.Generator:
    """PCG64 generator for ``(master_seed, replicate_index)``.

    Streams come from ``SeedSequence(master_seed, spawn_key=(index,))`` so
    distinct indices give independent streams and equal pairs reproduce.
    """
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(replicate_index),))
    return np.random.Generator(np.random.PCG64(seq))


def worker_count() -> int:
    """Worker cap from ``FKFLOW_THREADS`` (default: CPU count)."""
    raw = os.environ.get("FKFLOW_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"FKFLOW_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def _event_record(g: WeightedMultigraph, ev: FlowEvent) -> dict:
    e = g.edge(ev.edge_id)
    return {
        "t": ev.time,
        "edge": [e.u, e.v],
        "edge_id": ev.edge_id,
        "merged": list(ev.merged),
        "new": ev.new,
        "collapse": ev.collapse,
    }


def write_trajectory(traj: FlowTrajectory, path: str | Path) -> None:
    """Header line, then one JSON object per event.

    The header also carries the graph itself so a file can be read back
    without side information; ``graph_hash`` is checked against it.
    """
    g = traj.graph
    header = {
        "schema": SCHEMA_VERSION,
        "graph_hash": graph_hash(g),
        "q": float(traj.q),
        "seed": traj.seed,
        "mode": traj.mode,
        "graph": g.to_dict(),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header) + "\n")
        for ev in traj.events:
            fh.write(json.dumps(_event_record(g, ev)) + "\n")


def read_trajectory(path: str | Path) -> FlowTrajectory:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise TrajectoryFormatError(f"{path}: empty file, expected a header record")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise TrajectoryFormatError(f"{path}:1: malformed header ({exc})") from exc
    if not isinstance(header, dict) or header.get("schema") != SCHEMA_VERSION:
        raise TrajectoryFormatError(
            f"{path}:1: unsupported schema {header.get('schema') if isinstance(header, dict) else header!r}")
    for key in ("graph_hash", "q", "seed", "mode", "graph"):
        if key not in header:
            raise TrajectoryFormatError(f"{path}:1: header lacks {key!r}")
    g = WeightedMultigraph.from_dict(header["graph"])
    if graph_hash(g) != header["graph_hash"]:
        raise TrajectoryFormatError(f"{path}:1: graph_hash does not match the embedded graph")

    events = []
    remaining = g.n_vertices
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            collapse = bool(rec["collapse"])
            if collapse:
                remaining -= 1
            events.append(FlowEvent(float(rec["t"]), int(rec["edge_id"]),
                                    (int(rec["merged"][0]), int(rec["merged"][1])),
                                    int(rec["new"]), remaining, collapse))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, IndexError) as exc:
            raise TrajectoryFormatError(f"{path}:{lineno}: malformed event record ({exc})") from exc
    try:
        final = tuple(replay_partition(g, events).blocks())
    except (ValueError, KeyError) as exc:
        raise TrajectoryFormatError(f"{path}: events do not replay on the graph ({exc})") from exc
    return FlowTrajectory(g, header["q"], events, final, mode=header["mode"], seed=header["seed"])


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Mapping | Sequence]) -> None:
    """CSV with a fixed header; floats use ``repr`` so they round-trip exactly."""
    def fmt(x):
        if isinstance(x, float):
            return repr(x)
        return x

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            values = [row[h] for h in header] if isinstance(row, Mapping) else list(row)
            writer.writerow([fmt(x) for x in values])
