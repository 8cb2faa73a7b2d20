"""Trajectory records shared by the direct and intrinsic flow constructions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .graph_core import ClusterPartition, WeightedMultigraph

__all__ = ["FlowEvent", "FlowTrajectory", "FreezeStats", "freeze_stats", "replay_partition"]


@dataclass(frozen=True)
class FlowEvent:
    """One edge opening. ``collapse`` is False for openings inside a cluster."""

    time: float
    edge_id: int
    merged: tuple[int, int]
    new: int
    remaining: int
    collapse: bool = True


@dataclass
class FlowTrajectory:
    graph: WeightedMultigraph
    q: float
    events: list[FlowEvent]
    final_blocks: tuple[tuple[int, ...], ...]
    mode: str = "direct"
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def collapses(self) -> list[FlowEvent]:
        return [ev for ev in self.events if ev.collapse]

    @property
    def freeze_time(self) -> float:
        """Time of the last collapse (0 if nothing ever merged)."""
        col = self.collapses
        return col[-1].time if col else 0.0

    @property
    def first_collapse_time(self) -> float:
        col = self.collapses
        return col[0].time if col else math.inf

    def skeleton(self) -> tuple:
        """Ordered merges as pairs of original-vertex sets, times dropped."""
        members = {v: (v,) for v in self.graph.vertices}
        out = []
        for ev in self.collapses:
            a, b = members.pop(ev.merged[0]), members.pop(ev.merged[1])
            out.append(tuple(sorted((a, b))))
            members[ev.new] = tuple(sorted(a + b))
        return tuple(out)

    def cluster_ids_at(self, t: float) -> dict[int, int]:
        """Map original vertex -> cluster id after all events with time <= t."""
        owner = {v: v for v in self.graph.vertices}
        members = {v: [v] for v in self.graph.vertices}
        for ev in self.events:
            if ev.time > t:
                break
            if not ev.collapse:
                continue
            a, b = ev.merged
            merged = members.pop(a) + members.pop(b)
            members[ev.new] = merged
            for v in merged:
                owner[v] = ev.new
        return owner


@dataclass(frozen=True)
class FreezeStats:
    freeze_time: float
    final_clusters: int
    largest_fraction: float
    collapse_events: int


def freeze_stats(traj: FlowTrajectory) -> FreezeStats:
    n = traj.graph.n_vertices
    largest = max((len(b) for b in traj.final_blocks), default=0)
    return FreezeStats(
        freeze_time=traj.freeze_time,
        final_clusters=len(traj.final_blocks),
        largest_fraction=largest / n if n else 0.0,
        collapse_events=len(traj.collapses),
    )


def replay_partition(graph: WeightedMultigraph, events: list[FlowEvent]) -> ClusterPartition:
    """Rebuild the final partition from the collapse events alone."""
    part = ClusterPartition(graph.vertices)
    rep = {v: v for v in graph.vertices}
    for ev in events:
        if not ev.collapse:
            continue
        a, b = ev.merged
        if a not in rep or b not in rep:
            raise ValueError(f"event at t={ev.time} merges unknown cluster ids {ev.merged}")
        part.union(rep[a], rep[b])
        rep[ev.new] = rep.pop(a)
        rep.pop(b)
    return part
