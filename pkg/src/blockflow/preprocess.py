"""Two-pass graph ingestion.

Pass one streams the input edge list, splits edges into ``beta``
source-partition files, and counts edges per (source interval,
destination interval) block; blocks are then classified dense or sparse.
Pass two re-streams each partition, extracts dense-block edges into
per-block files, compacts the remaining sparse edges in place, and
accumulates per-source out-degrees one interval at a time.  No global
sort happens anywhere: edges keep their relative input order inside
every file they land in.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (BlockId, BlockInfo, BlockKind, CostParams, classify_block,
                   compute_beta, interval_length, make_intervals)
from .errors import ConfigError, FormatError
from .storage import (DEFAULT_BUFFER, EdgeWriter, GraphDir, GraphManifest,
                      IoCounters, VertexVector, edge_dtype, id_bytes_for,
                      id_dtype, save_manifest, stream_edge_chunks)

FORCE_MODES = ("bbp", "dense", "sparse")


@dataclass
class IngestOptions:
    """How to read the input edge list."""

    fmt: str = "text"          # "text" or "binary"
    one_based_ids: bool = False
    symmetrize: bool = False
    drop_self_loops: bool = False

    def __post_init__(self):
        if self.fmt not in ("text", "binary"):
            raise ConfigError(f"unknown input format {self.fmt!r}")


def _parse_text_chunks(path: Path, dt: np.dtype, has_payload: bool,
                       counters: IoCounters | None, chunk_records: int = 1 << 16):
    """Parse a whitespace-delimited text edge list into structured chunks.

    Lines starting with '#' and blank lines are skipped; CRLF is accepted.
    """
    src: list[int] = []
    dst: list[int] = []
    pay: list[float] = []

    def emit():
        arr = np.empty(len(src), dtype=dt)
        arr["src"] = src
        arr["dst"] = dst
        if has_payload:
            arr["w"] = pay
        src.clear()
        dst.clear()
        pay.clear()
        return arr

    # the text is decoded line by line for exact error positions; byte
    # volume is charged from the file size up front
    size = os.path.getsize(path)
    if counters is not None and size:
        counters.add_read(size)
        counters.add_seek()
    lineno = 0
    with open(path, "r", encoding="ascii", errors="replace") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) < 2 or (has_payload and len(parts) < 3):
                raise FormatError(f"{path}:{lineno}: expected "
                                  f"{'3' if has_payload else '2'} fields, "
                                  f"got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise FormatError(
                    f"{path}:{lineno}: unparseable vertex id in {line!r}") from exc
            if u < 0 or v < 0:
                raise FormatError(f"{path}:{lineno}: negative vertex id")
            if has_payload:
                try:
                    pay.append(float(parts[2]))
                except ValueError as exc:
                    raise FormatError(
                        f"{path}:{lineno}: unparseable edge value in {line!r}") from exc
            src.append(u)
            dst.append(v)
            if len(src) >= chunk_records:
                yield lineno, emit()
    if src:
        yield lineno, emit()


def _iter_input_chunks(input_path: Path, options: IngestOptions, psi: int,
                       id_bytes: int, v_count: int | None,
                       counters: IoCounters | None, buffer_size: int):
    """Yield structured edge chunks with ingest options applied.

    Raises FormatError with the offending line/record position for bad ids.
    """
    dt = edge_dtype(id_bytes, psi)
    has_payload = "w" in (dt.names or ())

    if options.fmt == "text":
        source = _parse_text_chunks(input_path, dt, has_payload, counters)
        unit = "line"
    else:
        source = ((i, c) for i, c in enumerate(
            stream_edge_chunks(input_path, psi, id_bytes, counters, buffer_size)))
        unit = "record chunk"

    for pos, chunk in source:
        if len(chunk) == 0:
            continue
        src = chunk["src"].astype(np.int64)
        dst = chunk["dst"].astype(np.int64)
        if options.one_based_ids:
            low = min(src.min(), dst.min())
            if low < 1:
                raise FormatError(
                    f"{input_path} ({unit} {pos}): id {low} invalid in "
                    f"1-based input")
            src -= 1
            dst -= 1
        if v_count is not None:
            hi = max(src.max(), dst.max())
            if hi >= v_count:
                raise FormatError(
                    f"{input_path} ({unit} {pos}): vertex id {hi} >= "
                    f"declared vertex count {v_count}")
        out = np.empty(len(chunk), dtype=dt)
        out["src"] = src
        out["dst"] = dst
        if has_payload:
            out["w"] = chunk["w"]
        if options.drop_self_loops:
            out = out[out["src"] != out["dst"]]
        if options.symmetrize:
            rev = np.empty(len(out), dtype=dt)
            rev["src"] = out["dst"]
            rev["dst"] = out["src"]
            if has_payload:
                rev["w"] = out["w"]
            out = np.concatenate([out, rev])
        if len(out):
            yield out


def _discover_v_count(input_path: Path, options: IngestOptions, psi: int,
                      id_bytes: int, counters: IoCounters | None,
                      buffer_size: int) -> int:
    """One extra streaming pass to find max vertex id + 1."""
    hi = -1
    for chunk in _iter_input_chunks(input_path, options, psi, id_bytes, None,
                                    counters, buffer_size):
        hi = max(hi, int(chunk["src"].max()), int(chunk["dst"].max()))
    if hi < 0:
        raise ConfigError(
            f"{input_path}: empty input needs an explicit vertex count")
    return hi + 1


def preprocess(input_path: str | Path, out_dir: str | Path, params: CostParams,
               options: IngestOptions | None = None, v_count: int | None = None,
               force_mode: str = "bbp", compute_degrees: bool = True,
               counters: IoCounters | None = None,
               buffer_size: int = DEFAULT_BUFFER) -> GraphManifest:
    """Ingest an edge list into a block-partitioned graph directory.

    Returns the manifest that was written.  ``v_count`` defaults to
    (max id + 1), found by one extra streaming pass over the input.
    """
    input_path = Path(input_path)
    options = options or IngestOptions()
    if force_mode not in FORCE_MODES:
        raise ConfigError(f"unknown force mode {force_mode!r}")
    if not input_path.exists():
        raise FormatError(f"input not found: {input_path}")

    gdir = GraphDir(out_dir)
    gdir.ensure_layout()

    # a provisional id width is needed to parse binary input at all
    id_bytes = id_bytes_for(v_count) if v_count else 4
    if params.psi < 2 * id_bytes:
        raise ConfigError(
            f"psi {params.psi} cannot hold two {id_bytes}-byte ids")
    if v_count is None:
        v_count = _discover_v_count(input_path, options, params.psi, id_bytes,
                                    counters, buffer_size)
    if id_bytes_for(v_count) != id_bytes:
        raise ConfigError(
            f"{v_count} vertices need {id_bytes_for(v_count)}-byte ids; "
            f"adjust psi accordingly")

    beta = compute_beta(v_count, params)
    theta = interval_length(v_count, beta)
    intervals = make_intervals(v_count, beta)
    dt = edge_dtype(id_bytes, params.psi)

    # pass 1: split into source partitions, count per-block edges
    per_writer = min(max(buffer_size // max(beta, 1), 64 << 10), 1 << 20)
    writers = [EdgeWriter(gdir.partition_path(p), params.psi, counters,
                          per_writer, mode="wb") for p in range(beta)]
    counts = np.zeros(beta * beta, dtype=np.int64)
    e_count = 0
    try:
        for chunk in _iter_input_chunks(input_path, options, params.psi,
                                        id_bytes, v_count, counters,
                                        buffer_size):
            p_arr = chunk["src"].astype(np.int64) // theta
            q_arr = chunk["dst"].astype(np.int64) // theta
            counts += np.bincount(p_arr * beta + q_arr, minlength=beta * beta)
            e_count += len(chunk)
            for p in np.unique(p_arr):
                writers[p].write_array(chunk[p_arr == p])
    finally:
        for w in writers:
            w.close()

    # classify every block; forced modes override the cost ratio
    table: list[BlockInfo] = []
    for p in range(beta):
        for q in range(beta):
            xi = int(counts[p * beta + q])
            if force_mode == "dense":
                kind = BlockKind.DENSE
            elif force_mode == "sparse":
                kind = BlockKind.SPARSE
            else:
                kind = classify_block(xi, max(intervals[p].length, 1),
                                      params.phi, params.psi, beta)
            table.append(BlockInfo(BlockId(p, q), xi, kind))

    # pass 2: extract dense blocks, compact partitions, accumulate degrees
    deg_vec = None
    deg_dt = id_dtype(id_bytes)
    if compute_degrees:
        deg_vec = VertexVector.create(gdir.vector_path("degrees"), id_bytes,
                                      v_count)
    for p in range(beta):
        iv = intervals[p]
        dense_qs = [q for q in range(beta)
                    if table[p * beta + q].kind is BlockKind.DENSE
                    and table[p * beta + q].edge_count > 0]
        if not dense_qs and not compute_degrees:
            continue
        deg = np.zeros(iv.length, dtype=np.int64) if compute_degrees else None
        sp_path = gdir.partition_path(p)
        tmp_path = None
        block_writers = {}
        keep_writer = None
        if dense_qs:
            tmp_path = sp_path.with_suffix(".edges.tmp")
            keep_writer = EdgeWriter(tmp_path, params.psi, counters,
                                     per_writer, mode="wb")
            block_writers = {
                q: EdgeWriter(gdir.dense_block_path(p, q), params.psi,
                              counters, per_writer, mode="wb")
                for q in dense_qs}
        try:
            for chunk in stream_edge_chunks(sp_path, params.psi, id_bytes,
                                            counters, buffer_size):
                src = chunk["src"].astype(np.int64)
                if deg is not None and len(src):
                    deg += np.bincount(src - iv.start, minlength=iv.length)
                if dense_qs:
                    q_arr = chunk["dst"].astype(np.int64) // theta
                    keep = np.ones(len(chunk), dtype=bool)
                    for q in dense_qs:
                        m = q_arr == q
                        if m.any():
                            block_writers[q].write_array(chunk[m])
                            keep &= ~m
                    keep_writer.write_array(chunk[keep])
        finally:
            for w in block_writers.values():
                w.close()
            if keep_writer is not None:
                keep_writer.close()
        if tmp_path is not None:
            os.replace(tmp_path, sp_path)
        if deg is not None and iv.length:
            if deg.max(initial=0) >= 1 << (8 * id_bytes):
                raise FormatError("out-degree overflows the id width")
            deg_vec.write_array(intervals[p], deg.astype(deg_dt), counters)

    manifest = GraphManifest(
        v_count=v_count, e_count=e_count, beta=beta, id_bytes=id_bytes,
        phi=params.phi, psi=params.psi, mode=force_mode,
        symmetrized=options.symmetrize, block_table=table)
    save_manifest(manifest, gdir.manifest_path, counters)
    return manifest


def compute_out_degrees(graph_dir: str | Path,
                        counters: IoCounters | None = None,
                        buffer_size: int = DEFAULT_BUFFER) -> VertexVector:
    """Recount out-degrees from every edge file of a preprocessed graph.

    Writes (and returns) ``vectors/degrees.vec``: element v is the number
    of edges with source v, id-width unsigned.
    """
    gdir = GraphDir(graph_dir)
    m = gdir.load_manifest(counters)
    deg = np.zeros(m.v_count, dtype=np.int64)

    def count(path):
        for chunk in stream_edge_chunks(path, m.psi, m.id_bytes, counters,
                                        buffer_size):
            deg_part = np.bincount(chunk["src"].astype(np.int64),
                                   minlength=m.v_count)
            np.add(deg, deg_part, out=deg)

    for p in range(m.beta):
        count(gdir.partition_path(p))
    for info in m.dense_blocks():
        path = gdir.dense_block_path(info.block.p, info.block.q)
        if path.exists():
            count(path)

    if deg.max(initial=0) >= 1 << (8 * m.id_bytes):
        raise FormatError("out-degree overflows the id width")
    vec = VertexVector.create(gdir.vector_path("degrees"), m.id_bytes,
                              m.v_count)
    out = deg.astype(id_dtype(m.id_bytes))
    chunk_elems = max(1, buffer_size // m.id_bytes)
    for start in range(0, m.v_count, chunk_elems):
        stop = min(start + chunk_elems, m.v_count)
        vec.write_range(start, out[start:stop].tobytes(), counters)
    return vec


def generate_rmat(path: str | Path, v_count: int, e_count: int, seed: int = 0,
                  probabilities: tuple[float, float, float, float] =
                  (0.57, 0.19, 0.19, 0.05),
                  id_bytes: int = 4,
                  counters: IoCounters | None = None):
    """Write a synthetic power-law edge list as packed binary records.

    Each edge picks one of the four quadrants (top-left, top-right,
    bottom-left, bottom-right of the adjacency matrix) per recursion
    level with the given probabilities.  Deterministic for a fixed seed.
    """
    if v_count < 1 or v_count & (v_count - 1):
        raise ConfigError(f"v_count must be a power of two, got {v_count}")
    if len(probabilities) != 4 or any(p < 0 for p in probabilities):
        raise ConfigError("probabilities must be four non-negative numbers")
    if abs(sum(probabilities) - 1.0) > 1e-9:
        raise ConfigError(f"probabilities sum to {sum(probabilities)}, not 1")
    if e_count < 0:
        raise ConfigError("e_count must be >= 0")

    levels = v_count.bit_length() - 1
    cum = np.cumsum(np.asarray(probabilities, dtype=np.float64))
    cum[-1] = 1.0
    rng = np.random.default_rng(seed)
    dt = edge_dtype(id_bytes, 2 * id_bytes)

    with EdgeWriter(path, 2 * id_bytes, counters, mode="wb") as w:
        remaining = e_count
        while remaining > 0:
            n = min(remaining, 1 << 18)
            src = np.zeros(n, dtype=np.int64)
            dst = np.zeros(n, dtype=np.int64)
            for level in range(levels):
                quadrant = np.searchsorted(cum, rng.random(n), side="right")
                bit = levels - 1 - level
                src |= (quadrant >> 1) << bit
                dst |= (quadrant & 1) << bit
            rec = np.empty(n, dtype=dt)
            rec["src"] = src
            rec["dst"] = dst
            w.write_array(rec)
            remaining -= n
