"""Shared builders and independent reference implementations.

The reference functions here are deliberately written against plain
numpy arrays held fully in memory, so they share no code with the
out-of-core paths they check.
"""
from __future__ import annotations

from collections import deque
from pathlib import Path

import numpy as np
import pytest

from blockflow import CostParams, IngestOptions, preprocess
from blockflow.storage import GraphDir, edge_dtype


# ---------------------------------------------------------------------------
# graph construction helpers

def write_text_edges(path, src, dst, weights=None):
    path = Path(path)
    with open(path, "w") as f:
        for i in range(len(src)):
            if weights is None:
                f.write(f"{src[i]} {dst[i]}\n")
            else:
                f.write(f"{src[i]} {dst[i]} {weights[i]}\n")
    return path


def write_binary_edges(path, src, dst, weights=None, id_bytes=4):
    """Write a little-endian fixed-width edge file; returns (path, psi)."""
    psi = 2 * id_bytes + (8 if weights is not None else 0)
    dt = edge_dtype(id_bytes, psi)
    arr = np.empty(len(src), dtype=dt)
    arr["src"] = src
    arr["dst"] = dst
    if weights is not None:
        arr["w"] = weights
    arr.tofile(path)
    return Path(path), psi


def memory_for_beta(v_count: int, phi: int, threads: int, beta: int) -> int:
    """Smallest budget that makes the interval count come out to beta."""
    need = phi * (threads + 1) * v_count
    mem = -(-need // beta)
    # ceil(need / mem) can still exceed beta when need/beta is tiny
    while -(-need // mem) > beta:
        mem += 1
    return mem


def random_graph(rng, v_count: int, e_count: int, skew: bool = False):
    """Random directed multigraph as (src, dst) arrays."""
    if skew:
        # quadratic skew concentrates edges on low ids, giving blocks of
        # very different fill when the id range is split into intervals
        src = (rng.random(e_count) ** 2 * v_count).astype(np.int64)
        dst = (rng.random(e_count) ** 2 * v_count).astype(np.int64)
    else:
        src = rng.integers(0, v_count, e_count, dtype=np.int64)
        dst = rng.integers(0, v_count, e_count, dtype=np.int64)
    return src, dst


def build_graph(tmp_path, src, dst, v_count, phi=8, psi=None, beta=1,
                threads=2, symmetrize=False, weights=None, force_mode="bbp",
                name="g"):
    """Preprocess an in-memory edge list into tmp_path/<name>.

    Returns (graph directory path, manifest).  ``beta`` picks the memory
    budget via memory_for_beta.
    """
    ed, real_psi = write_binary_edges(tmp_path / f"{name}_edges.bin", src,
                                      dst, weights=weights)
    if psi is None:
        psi = real_psi
    params = CostParams(phi=phi, psi=psi, threads=threads,
                        memory=memory_for_beta(v_count, phi, threads, beta))
    options = IngestOptions(fmt="binary", symmetrize=symmetrize)
    gdir = tmp_path / name
    manifest = preprocess(ed, gdir, params, options, v_count=v_count,
                          force_mode=force_mode)
    return gdir, manifest, params


# ---------------------------------------------------------------------------
# reference implementations (in-memory, single-threaded)

def reference_pagerank(src, dst, v_count, iterations, damping=0.85):
    """Dense-array power iteration; sinks contribute nothing."""
    out_deg = np.bincount(src, minlength=v_count).astype(np.float64)
    x = np.ones(v_count)
    for _ in range(iterations):
        contrib = np.divide(x, out_deg, out=np.zeros_like(x),
                            where=out_deg > 0)
        nxt = np.full(v_count, 1.0 - damping)
        np.add.at(nxt, dst, damping * contrib[src])
        x = nxt
    return x


def reference_components(src, dst, v_count):
    """Breadth-first search from each unvisited vertex in ascending id
    order; labels are therefore the minimum id of each component."""
    both_src = np.concatenate([src, dst])
    both_dst = np.concatenate([dst, src])
    order = np.argsort(both_src, kind="stable")
    sorted_src = both_src[order]
    sorted_dst = both_dst[order]
    starts = np.searchsorted(sorted_src, np.arange(v_count + 1))

    labels = np.full(v_count, -1, dtype=np.int64)
    for seed in range(v_count):
        if labels[seed] >= 0:
            continue
        labels[seed] = seed
        queue = deque([seed])
        while queue:
            u = queue.popleft()
            for w in sorted_dst[starts[u]:starts[u + 1]]:
                if labels[w] < 0:
                    labels[w] = seed
                    queue.append(w)
    return labels


def reference_spmv(src, dst, v_count, x, weights=None):
    """y[d] = sum over edges (s, d) of x[s] (optionally * weight)."""
    vals = x[src] if weights is None else x[src] * weights
    y = np.zeros(v_count)
    np.add.at(y, dst, vals)
    return y


def adjacency_matrix(src, dst, v_count, symmetrize=False):
    a = np.zeros((v_count, v_count))
    np.add.at(a, (src, dst), 1.0)
    if symmetrize:
        at = np.zeros((v_count, v_count))
        np.add.at(at, (dst, src), 1.0)
        a = a + at
    return a


# ---------------------------------------------------------------------------
# shared fixtures

@pytest.fixture(scope="session")
def big_graph(tmp_path_factory):
    """The million-edge shared test graph (binary input, symmetrized).

    Built once per session; used by the engine, component, and
    memory-budget checks.
    """
    rng = np.random.default_rng(20210)
    v_count = 100_000
    e_count = 500_000  # doubled to 1e6 stored edges by symmetrization
    src, dst = random_graph(rng, v_count, e_count, skew=True)
    tmp = tmp_path_factory.mktemp("big")
    gdir, manifest, params = build_graph(tmp, src, dst, v_count, phi=8,
                                         psi=8, beta=4, symmetrize=True,
                                         name="big")
    return {"gdir": gdir, "manifest": manifest, "params": params,
            "src": src, "dst": dst, "v_count": v_count}
