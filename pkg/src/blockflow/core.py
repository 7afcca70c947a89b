"""Domain types, interval arithmetic, and the dense/sparse block classifier.

A graph over ``v_count`` vertices is split into ``beta`` contiguous vertex
intervals.  Every edge then falls into one of ``beta**2`` blocks keyed by
(source interval, destination interval).  Each block is classified *dense*
or *sparse* by comparing the analytic per-block I/O cost of streaming the
block against an in-memory source interval (dense scheme) with the cost of
shuffling its edges through on-disk buckets (sparse scheme).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import ConfigError


class BlockKind(Enum):
    DENSE = "dense"
    SPARSE = "sparse"


@dataclass(frozen=True)
class Interval:
    """A contiguous range of vertex ids: ``[start, start + length)``."""

    index: int
    start: int
    length: int

    @property
    def stop(self) -> int:
        return self.start + self.length

    def __contains__(self, v: int) -> bool:
        return self.start <= v < self.stop


@dataclass(frozen=True)
class BlockId:
    """Block coordinates: source interval ``p``, destination interval ``q``."""

    p: int
    q: int


@dataclass(frozen=True)
class BlockInfo:
    block: BlockId
    edge_count: int
    kind: BlockKind


@dataclass(frozen=True)
class CostParams:
    """I/O model parameters.

    phi        bytes needed per vertex value (including any auxiliary
               per-vertex data a program keeps resident, e.g. degrees)
    psi        bytes per edge record on disk
    threads    worker threads sharing the in-memory source interval
    memory     memory budget in bytes
    disk_block transfer unit used when expressing costs in blocks
    """

    phi: int
    psi: int
    threads: int = 2
    memory: int = 1 << 30
    disk_block: int = 4096

    def __post_init__(self):
        for name in ("phi", "psi", "threads", "memory", "disk_block"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.memory < self.phi * (self.threads + 1):
            # otherwise the interval count would exceed the vertex count
            raise ConfigError(
                f"memory budget {self.memory} is below phi*(threads+1) = "
                f"{self.phi * (self.threads + 1)}"
            )


def compute_beta(v_count: int, params: CostParams) -> int:
    """Number of vertex intervals needed so that threads+1 intervals of
    vertex values fit in the memory budget: ceil(phi*(T+1)*|V| / M), min 1.
    """
    if v_count < 1:
        raise ConfigError(f"v_count must be >= 1, got {v_count}")
    need = params.phi * (params.threads + 1) * v_count
    return max(1, -(-need // params.memory))


def interval_length(v_count: int, beta: int) -> int:
    """Nominal vertices per interval: ceil(|V| / beta).  The last interval
    may be shorter."""
    if beta < 1:
        raise ConfigError(f"beta must be >= 1, got {beta}")
    return -(-v_count // beta)


def interval_of(v: int, v_count: int, beta: int) -> int:
    """Index of the interval that owns vertex ``v``."""
    if not 0 <= v < v_count:
        raise ConfigError(f"vertex id {v} outside [0, {v_count})")
    return v // interval_length(v_count, beta)


def make_intervals(v_count: int, beta: int) -> list[Interval]:
    """The ``beta`` contiguous intervals partitioning ``[0, v_count)``."""
    theta = interval_length(v_count, beta)
    out = []
    for i in range(beta):
        start = min(i * theta, v_count)
        out.append(Interval(i, start, min(theta, v_count - start)))
    return out


def spp_dbp_ratio(xi: int | float, theta: int | float, phi: int, psi: int,
                  beta: int) -> float:
    """Cost ratio of the streaming scheme over the dense scheme for one
    block holding ``xi`` edges between intervals of ``theta`` vertices:

        1/beta + (2*xi/theta) * (1 + psi/phi)

    Values below 1 mean shuffling the block's edges moves fewer bytes than
    re-reading its source interval.
    """
    if theta < 1:
        raise ConfigError(f"theta must be >= 1, got {theta}")
    if beta < 1:
        raise ConfigError(f"beta must be >= 1, got {beta}")
    return 1.0 / beta + (2.0 * xi / theta) * (1.0 + psi / phi)


def classify_block(xi: int | float, theta: int | float, phi: int, psi: int,
                   beta: int) -> BlockKind:
    """A block is sparse when the streaming/dense cost ratio is < 1;
    ties go to dense."""
    if spp_dbp_ratio(xi, theta, phi, psi, beta) < 1.0:
        return BlockKind.SPARSE
    return BlockKind.DENSE
