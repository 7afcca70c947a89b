"""Single-pass weakly connected components over streamed edge files.

When (id width + 1 rank byte) per vertex fits in the memory budget the
whole component structure lives in RAM and one sequential sweep over the
edge files suffices; edge direction is ignored.  Every component is
labeled with its smallest member id.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ResourceError
from .storage import (DEFAULT_BUFFER, GraphDir, IoCounters, VertexVector,
                      id_dtype, stream_edge_chunks)


class DisjointSet:
    """Union by rank with full path compression; tracks parent hops."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = bytearray(n)
        self.find_steps = 0

    def find(self, v: int) -> int:
        parent = self.parent
        root = v
        steps = 0
        while parent[root] != root:
            root = parent[root]
            steps += 1
        while parent[v] != root:
            parent[v], v = root, parent[v]
        self.find_steps += steps
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        rank = self.rank
        if rank[ra] < rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if rank[ra] == rank[rb]:
            rank[ra] += 1
        return True

    def component_labels(self) -> np.ndarray:
        """Label each vertex with the smallest id in its component."""
        n = len(self.parent)
        roots = np.fromiter((self.find(v) for v in range(n)), dtype=np.int64,
                            count=n)
        label = np.full(n, n, dtype=np.int64)
        np.minimum.at(label, roots, np.arange(n, dtype=np.int64))
        return label[roots]


def union_find_labels(edge_chunks, v_count: int) -> np.ndarray:
    """Component labels from an iterable of (src_array, dst_array) pairs."""
    dsu = DisjointSet(v_count)
    union = dsu.union
    for src, dst in edge_chunks:
        for a, b in zip(src.tolist(), dst.tolist()):
            union(a, b)
    return dsu.component_labels()


def wcc_union_find(graph_dir: str | Path, memory: int | None = None,
                   counters: IoCounters | None = None,
                   output_name: str = "wcc",
                   buffer_size: int = DEFAULT_BUFFER) -> VertexVector:
    """Label weakly connected components with one pass over the edges.

    Raises ResourceError when the in-memory state (id width + one rank
    byte per vertex) would not fit the budget; use the iterative
    min-label program in that case.
    """
    gdir = GraphDir(graph_dir)
    m = gdir.load_manifest(counters)
    state_bytes = (m.id_bytes + 1) * m.v_count
    if memory is not None and state_bytes > memory:
        raise ResourceError(
            f"union-find needs {state_bytes} bytes of vertex state, budget "
            f"is {memory}; run the iterative min-label program instead")

    def chunks():
        paths = [gdir.partition_path(p) for p in range(m.beta)]
        paths += [gdir.dense_block_path(b.block.p, b.block.q)
                  for b in m.dense_blocks()]
        for path in paths:
            if not path.exists():
                continue
            for chunk in stream_edge_chunks(path, m.psi, m.id_bytes,
                                            counters, buffer_size):
                yield (chunk["src"].astype(np.int64),
                       chunk["dst"].astype(np.int64))

    labels = union_find_labels(chunks(), m.v_count)
    vec = VertexVector.create(gdir.vector_path(output_name), m.id_bytes,
                              m.v_count)
    out = labels.astype(id_dtype(m.id_bytes))
    chunk_elems = max(1, buffer_size // m.id_bytes)
    for start in range(0, m.v_count, chunk_elems):
        stop = min(start + chunk_elems, m.v_count)
        vec.write_range(start, out[start:stop].tobytes(), counters)
    return vec
