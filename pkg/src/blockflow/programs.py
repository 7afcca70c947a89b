"""Vertex-centric programs: the four-callback interface plus built-ins.

A program supplies vectorized callbacks over numpy arrays:

initialize
    seed the accumulator of one destination interval (sees the previous
    pass's values of that interval)
process
    fold per-edge messages into accumulator slots addressed by local
    destination index
gather
    merge two worker accumulators; must be associative and commutative so
    buffers can be reduced in any order
apply
    finalize an interval's gathered values (identity by default)

The *message* of an edge is its source vertex's carrier value: the engine
loads a source interval's values (plus out-degrees when the program asks
for them), calls :meth:`MAlgorithmProgram.carrier` once per interval, and
hands the per-edge gathered carriers to ``process``.  The same carrier
travels with the edge on both the dense path and the streaming path, so a
program may not assume any other per-source data is reachable inside
``process``.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigError
from .storage import VertexVector


class MAlgorithmProgram:
    """Base class; subclasses override the callbacks they need."""

    name = "program"
    value_dtype = np.dtype("<f8")
    neutral = 0.0
    needs_degrees = False
    needs_previous_values = False
    needs_edge_data = False
    converges_on_fixpoint = False

    @property
    def width(self) -> int:
        return np.dtype(self.value_dtype).itemsize

    def initial_vector(self, v_count: int) -> np.ndarray:
        """Vertex values the first pass reads; default all-neutral."""
        return np.full(v_count, self.neutral, dtype=self.value_dtype)

    def initial_vector_source(self) -> VertexVector | None:
        """Existing on-disk vector to stage chunk-by-chunk instead of
        materializing :meth:`initial_vector`; None for computed starts."""
        return None

    def carrier(self, values: np.ndarray,
                degrees: np.ndarray | None = None) -> np.ndarray:
        """Per-source value that travels with each outgoing edge."""
        return values

    def initialize(self, previous: np.ndarray) -> np.ndarray:
        """Accumulator seed for one destination interval."""
        return np.full(len(previous), self.neutral, dtype=self.value_dtype)

    def process(self, acc: np.ndarray, dst_local: np.ndarray,
                messages: np.ndarray, payload: np.ndarray | None = None):
        raise NotImplementedError

    def gather(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply(self, values: np.ndarray) -> np.ndarray:
        return values


class PageRankProgram(MAlgorithmProgram):
    """Unnormalized fixed-point iteration

        v  <-  (1 - d) + d * sum_{u -> v} u / degree(u)

    starting from all ones.  Vertices without outgoing edges contribute
    nothing (their mass is dropped, not redistributed).
    """

    name = "pagerank"
    value_dtype = np.dtype("<f8")
    neutral = 0.0
    needs_degrees = True

    def __init__(self, damping: float = 0.85):
        if not 0.0 <= damping < 1.0:
            raise ConfigError(f"damping must be in [0, 1), got {damping}")
        self.damping = damping

    def initial_vector(self, v_count: int) -> np.ndarray:
        return np.ones(v_count, dtype=self.value_dtype)

    def carrier(self, values, degrees=None):
        if degrees is None:
            raise ConfigError("pagerank needs the out-degree vector")
        out = np.zeros_like(values)
        np.divide(values, degrees, out=out, where=degrees > 0)
        return out

    def initialize(self, previous):
        return np.zeros(len(previous), dtype=self.value_dtype)

    def process(self, acc, dst_local, messages, payload=None):
        if len(dst_local):
            acc += np.bincount(dst_local, weights=messages, minlength=len(acc))

    def gather(self, a, b):
        return a + b

    def apply(self, values):
        return (1.0 - self.damping) + self.damping * values


class ConnectedComponentsProgram(MAlgorithmProgram):
    """Iterative min-label propagation.

    Every vertex starts labeled with its own id and repeatedly takes the
    minimum of its label and its in-neighbors' labels; on a symmetrized
    graph the fixed point labels each weakly connected component with its
    smallest member id.  A pass that changes nothing signals convergence.
    """

    name = "wcc"
    needs_previous_values = True
    converges_on_fixpoint = True

    def __init__(self, id_bytes: int = 4):
        if id_bytes not in (4, 8):
            raise ConfigError(f"id_bytes must be 4 or 8, got {id_bytes}")
        self.value_dtype = np.dtype("<u4" if id_bytes == 4 else "<u8")
        self.neutral = int(np.iinfo(self.value_dtype).max)

    def initial_vector(self, v_count):
        return np.arange(v_count, dtype=self.value_dtype)

    def initialize(self, previous):
        return previous.copy()

    def process(self, acc, dst_local, messages, payload=None):
        np.minimum.at(acc, dst_local, messages)

    def gather(self, a, b):
        return np.minimum(a, b)


class SpMVProgram(MAlgorithmProgram):
    """One pass computes y[v] = sum over edges (u, v) of w(u, v) * x[u]
    (unweighted edges count 1)."""

    name = "spmv"
    value_dtype = np.dtype("<f8")
    neutral = 0.0

    def __init__(self, x, weighted: bool = False):
        self.weighted = weighted
        self.needs_edge_data = weighted
        self._x = x

    def initial_vector_source(self):
        x = self._x
        if isinstance(x, (str, Path)):
            return VertexVector.open(x, np.dtype(self.value_dtype).itemsize)
        if isinstance(x, VertexVector):
            return x
        return None

    def initial_vector(self, v_count):
        x = self._x
        if isinstance(x, (str, Path)):
            x = VertexVector.open(x, np.dtype(self.value_dtype).itemsize)
        if isinstance(x, VertexVector):
            buf = x.read_range(0, x.length)
            x = np.frombuffer(buf, dtype=self.value_dtype).copy()
        x = np.asarray(x, dtype=self.value_dtype)
        if len(x) != v_count:
            raise ConfigError(
                f"input vector has {len(x)} elements, graph has {v_count}")
        if not np.all(np.isfinite(x)):
            raise ConfigError("input vector contains non-finite values")
        return x

    def initialize(self, previous):
        return np.zeros(len(previous), dtype=self.value_dtype)

    def process(self, acc, dst_local, messages, payload=None):
        if not len(dst_local):
            return
        if self.weighted:
            if payload is None:
                raise ConfigError("weighted multiply needs edge payloads")
            messages = messages * payload
        acc += np.bincount(dst_local, weights=messages, minlength=len(acc))

    def gather(self, a, b):
        return a + b


def pagerank_program(damping: float = 0.85) -> PageRankProgram:
    return PageRankProgram(damping)


def wcc_program(id_bytes: int = 4) -> ConnectedComponentsProgram:
    return ConnectedComponentsProgram(id_bytes)


def spmv_program(x, weighted: bool = False) -> SpMVProgram:
    return SpMVProgram(x, weighted)
