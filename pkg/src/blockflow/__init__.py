"""blockflow: out-of-core graph computation on block-partitioned edge files.

The package splits a graph's edges into a grid of blocks sized by the
memory budget, stores each block in the representation that minimizes its
I/O (streamed against in-memory source values, or shuffled into
destination-ordered buckets), and runs vertex-centric programs over the
result with a fixed, budget-proportional memory footprint.
"""
from .core import (BlockId, BlockInfo, BlockKind, CostParams, Interval,
                   classify_block, compute_beta, interval_length, interval_of,
                   make_intervals, spp_dbp_ratio)
from .costmodel import (CSV_HEADER, CostBreakdown, GraphSummary, ModeCost,
                        SweepRow, bbp_cost, block_dense_bytes,
                        block_sparse_bytes, dbp_cost, log_memory_range,
                        manifest_blocks, shuffled_bytes, spp_cost, sweep,
                        t_cost, uniform_blocks, write_sweep_csv)
from .eigen import LanczosResult, OutOfCoreVector, lanczos_so, write_eigen_csv
from .engine import Engine, RunStats, run
from .errors import ConfigError, Error, FormatError, ResourceError
from .preprocess import IngestOptions, generate_rmat, preprocess
from .programs import (ConnectedComponentsProgram, MAlgorithmProgram,
                       PageRankProgram, SpMVProgram, pagerank_program,
                       spmv_program, wcc_program)
from .storage import (GraphDir, GraphManifest, IoCounters, VertexVector,
                      id_bytes_for, load_manifest, save_manifest)
from .unionfind import DisjointSet, wcc_union_find

__version__ = "0.1.0"

__all__ = [
    "BlockId", "BlockInfo", "BlockKind", "CSV_HEADER", "ConfigError",
    "ConnectedComponentsProgram", "CostBreakdown", "CostParams",
    "DisjointSet", "Engine", "Error", "FormatError", "GraphDir",
    "GraphManifest", "GraphSummary", "IngestOptions", "Interval",
    "IoCounters", "LanczosResult", "MAlgorithmProgram", "ModeCost",
    "OutOfCoreVector", "PageRankProgram", "ResourceError", "RunStats",
    "SpMVProgram", "SweepRow", "VertexVector", "bbp_cost",
    "block_dense_bytes", "block_sparse_bytes", "classify_block",
    "compute_beta", "dbp_cost",
    "generate_rmat", "id_bytes_for", "interval_length", "interval_of",
    "lanczos_so", "load_manifest", "log_memory_range", "make_intervals",
    "manifest_blocks", "pagerank_program", "preprocess", "run",
    "save_manifest", "shuffled_bytes", "spmv_program", "spp_cost",
    "spp_dbp_ratio", "sweep", "t_cost", "uniform_blocks", "wcc_program",
    "wcc_union_find", "write_eigen_csv", "write_sweep_csv",
]
