"""Analytic I/O cost of the three processing schemes, plus memory sweeps.

Costs are expressed in bytes moved plus a separate seek count; divide
bytes by ``CostParams.disk_block`` to get transfer blocks.  The three
schemes:

dense-only
    every block streams against in-memory source intervals:
    (beta + 1) * |V| * phi + |E| * psi bytes, beta**2 seeks
streaming-only
    every edge goes through the shuffle:
    2 * |V| * phi + |E| * psi + 2 * shuffle bytes, beta seeks, where a
    shuffled edge costs phi + psi bytes on disk
per-block selection
    each block independently takes the cheaper of its two per-block
    costs; summed over a uniform block fill this is never above either
    pure scheme.
"""
from __future__ import annotations

from dataclasses import dataclass

from .core import CostParams, compute_beta, make_intervals
from .errors import ConfigError
from .storage import GraphManifest

CSV_HEADER = "memory_bytes,beta,dbp_bytes,spp_bytes,bbp_bytes,dbp_seeks,spp_seeks"


@dataclass(frozen=True)
class GraphSummary:
    v_count: int
    e_count: int

    def __post_init__(self):
        if self.v_count < 1 or self.e_count < 0:
            raise ConfigError(
                f"invalid graph shape ({self.v_count}, {self.e_count})")


@dataclass(frozen=True)
class ModeCost:
    """Bytes moved and seeks issued by one processing scheme."""

    data_bytes: float
    seeks: float

    def blocks(self, disk_block: int) -> float:
        return self.data_bytes / disk_block


@dataclass(frozen=True)
class CostBreakdown:
    dbp_bytes: float
    spp_bytes: float
    bbp_bytes: float
    seeks_dbp: float
    seeks_spp: float
    shuffle_bytes: float


def shuffled_bytes(e_count: int, params: CostParams) -> int:
    """On-disk volume of the shuffled edge set: each record carries a
    destination id plus a source value, modeled as phi + psi bytes."""
    return e_count * (params.phi + params.psi)


def dbp_cost(summary: GraphSummary, params: CostParams,
             beta: int | None = None) -> ModeCost:
    """Process everything dense: source intervals are re-read once per
    column, destinations once per pass."""
    if beta is None:
        beta = compute_beta(summary.v_count, params)
    data = (beta + 1) * summary.v_count * params.phi + summary.e_count * params.psi
    return ModeCost(float(data), float(beta * beta))


def spp_cost(summary: GraphSummary, params: CostParams,
             beta: int | None = None) -> ModeCost:
    """Process everything through the shuffle: vertex data is touched
    twice, the shuffled records are written once and read once."""
    if beta is None:
        beta = compute_beta(summary.v_count, params)
    data = (2 * summary.v_count * params.phi + summary.e_count * params.psi
            + 2 * shuffled_bytes(summary.e_count, params))
    return ModeCost(float(data), float(beta))


def block_dense_bytes(xi: float, theta: float, params: CostParams,
                      beta: int) -> float:
    """Per-block dense cost: theta*phi*(1 + 1/beta) + xi*psi."""
    return theta * params.phi * (1.0 + 1.0 / beta) + xi * params.psi


def block_sparse_bytes(xi: float, theta: float, params: CostParams,
                       beta: int) -> float:
    """Per-block streaming cost: 2*theta*phi/beta + 2*xi*(phi+psi) + xi*psi."""
    return (2.0 * theta * params.phi / beta
            + 2.0 * xi * (params.phi + params.psi) + xi * params.psi)


def uniform_blocks(summary: GraphSummary, beta: int):
    """The beta**2 identical (xi, theta) cells of a uniform edge fill."""
    xi = summary.e_count / (beta * beta)
    theta = summary.v_count / beta
    for _ in range(beta * beta):
        yield xi, theta


def manifest_blocks(manifest: GraphManifest):
    """(xi, theta) per block of a preprocessed graph, using each block's
    actual source-interval length."""
    intervals = make_intervals(manifest.v_count, manifest.beta)
    for info in manifest.block_table:
        yield info.edge_count, max(intervals[info.block.p].length, 1)


def bbp_cost(blocks, summary: GraphSummary, params: CostParams,
             beta: int) -> CostBreakdown:
    """Sum per-block minima over ``blocks`` (an iterable of (xi, theta));
    the dense/streaming fields hold the corresponding per-block sums."""
    dense_total = 0.0
    sparse_total = 0.0
    best_total = 0.0
    for xi, theta in blocks:
        d = block_dense_bytes(xi, theta, params, beta)
        s = block_sparse_bytes(xi, theta, params, beta)
        dense_total += d
        sparse_total += s
        best_total += min(d, s)
    return CostBreakdown(
        dbp_bytes=dense_total, spp_bytes=sparse_total, bbp_bytes=best_total,
        seeks_dbp=float(beta * beta), seeks_spp=float(beta),
        shuffle_bytes=float(shuffled_bytes(summary.e_count, params)))


@dataclass(frozen=True)
class SweepRow:
    memory_bytes: int
    beta: int
    dbp_bytes: float
    spp_bytes: float
    bbp_bytes: float
    dbp_seeks: float
    spp_seeks: float


def sweep(summary: GraphSummary, memories, params: CostParams) -> list[SweepRow]:
    """Evaluate all three schemes across memory budgets.

    For each budget the interval count is recomputed and the per-block
    selection is evaluated on a uniform edge fill (xi = |E| / beta**2).
    """
    rows = []
    for mem in memories:
        p = CostParams(phi=params.phi, psi=params.psi, threads=params.threads,
                       memory=int(mem), disk_block=params.disk_block)
        beta = compute_beta(summary.v_count, p)
        dbp = dbp_cost(summary, p, beta)
        spp = spp_cost(summary, p, beta)
        # all beta**2 cells of a uniform fill are identical, so the
        # per-block selection reduces to one comparison
        xi = summary.e_count / (beta * beta)
        theta = summary.v_count / beta
        best = min(block_dense_bytes(xi, theta, p, beta),
                   block_sparse_bytes(xi, theta, p, beta))
        rows.append(SweepRow(
            memory_bytes=int(mem), beta=beta, dbp_bytes=dbp.data_bytes,
            spp_bytes=spp.data_bytes, bbp_bytes=beta * beta * best,
            dbp_seeks=dbp.seeks, spp_seeks=spp.seeks))
    return rows


def write_sweep_csv(rows: list[SweepRow], stream):
    stream.write(CSV_HEADER + "\n")
    for r in rows:
        stream.write(f"{r.memory_bytes},{r.beta},{r.dbp_bytes!r},"
                     f"{r.spp_bytes!r},{r.bbp_bytes!r},{r.dbp_seeks!r},"
                     f"{r.spp_seeks!r}\n")


def log_memory_range(lo: int, hi: int, steps: int) -> list[int]:
    """Log-spaced integer budgets from lo to hi inclusive."""
    if lo < 1 or hi < lo or steps < 1:
        raise ConfigError(f"bad memory range [{lo}, {hi}] x {steps}")
    if steps == 1:
        return [lo]
    ratio = (hi / lo) ** (1.0 / (steps - 1))
    out = []
    for i in range(steps):
        out.append(int(round(lo * ratio ** i)))
    out[-1] = hi
    return out


def t_cost(v_count: int, e_count: int) -> int:
    """Data volume one pass of a vertex-centric computation must touch:
    read and write every vertex value, read every edge once."""
    return 2 * v_count + e_count
