"""Iterative out-of-core execution of vertex-centric programs.

Each pass visits destination intervals in column order.  Sparse-block
edges reach their destination in two steps: every source partition is
replayed once against its in-memory source values and (destination id,
carrier) records are appended to per-destination-interval bucket files;
each bucket is then consumed sequentially when its column comes up.
Dense blocks are streamed directly against the in-memory source interval,
and columns walk their dense blocks in a vertical zigzag (alternating
direction per column) so that a source interval shared across a direction
turn is loaded only once.

Per-pass values are double-buffered: every read during pass t sees the
values written by pass t-1, writes go to the next buffer, and the buffers
swap between passes.  Within one destination interval the per-thread
accumulators are merged with the program's ``gather`` and finalized with
``apply`` before the interval is written out.
"""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import BlockKind, CostParams, Interval, interval_length, make_intervals
from .errors import ConfigError, FormatError
from .programs import MAlgorithmProgram
from .storage import (DEFAULT_BUFFER, EdgeWriter, GraphDir, GraphManifest,
                      IoCounters, MeteredFile, VertexVector, id_dtype,
                      stream_edge_chunks)

log = logging.getLogger(__name__)

FORCE_MODES = ("bbp", "dense", "sparse")


class BufferTracker:
    """High-water mark of the engine's tracked buffer allocations."""

    def __init__(self):
        self.current = 0
        self.peak = 0

    def add(self, nbytes: int):
        self.current += nbytes
        if self.current > self.peak:
            self.peak = self.current

    def sub(self, nbytes: int):
        self.current -= nbytes


@dataclass
class RunStats:
    """Observability counters for one engine run."""

    iterations_run: int = 0
    dst_bytes_per_pass: list[int] = field(default_factory=list)
    changed_per_pass: list[int] = field(default_factory=list)
    src_interval_loads: int = 0
    src_bytes_read: int = 0
    peak_buffer_bytes: int = 0
    wall_seconds: float = 0.0


def zigzag_order(beta: int, q: int) -> range:
    """Dense-block source order for column q: ascending on odd columns,
    descending on even ones (0-based)."""
    if q % 2 == 1:
        return range(beta)
    return range(beta - 1, -1, -1)


@dataclass
class ExecutionPlan:
    """Which file feeds which processing path, per pass."""

    beta: int
    # per destination interval q: ordered (source interval p, edge file)
    columns: list[list[tuple[int, Path]]]
    # per source interval p: files replayed through the shuffle
    shuffle_sources: list[list[Path]]

    @property
    def has_sparse(self) -> bool:
        return any(self.shuffle_sources)


def build_plan(gdir: GraphDir, manifest: GraphManifest,
               force_mode: str = "bbp") -> ExecutionPlan:
    """Assign every nonempty edge file to the dense or streaming path.

    ``force_mode="sparse"`` replays dense block files through the shuffle
    as well; ``force_mode="dense"`` expects sparse partitions to have been
    split into per-block files beforehand (see Engine._densify_sparse).
    """
    if force_mode not in FORCE_MODES:
        raise ConfigError(f"unknown force mode {force_mode!r}")
    beta = manifest.beta
    columns: list[list[tuple[int, Path]]] = [[] for _ in range(beta)]
    shuffle: list[list[Path]] = [[] for _ in range(beta)]

    dense = {(b.block.p, b.block.q) for b in manifest.block_table
             if b.kind is BlockKind.DENSE and b.edge_count > 0}
    sparse_rows = {b.block.p for b in manifest.block_table
                   if b.kind is BlockKind.SPARSE and b.edge_count > 0}

    for q in range(beta):
        for p in zigzag_order(beta, q):
            if (p, q) in dense:
                if force_mode == "sparse":
                    continue
                columns[q].append((p, gdir.dense_block_path(p, q)))
            elif force_mode == "dense":
                fp = gdir.forced_block_path(p, q)
                if fp.exists() and os.path.getsize(fp):
                    columns[q].append((p, fp))

    if force_mode != "dense":
        for p in range(beta):
            if p in sparse_rows:
                shuffle[p].append(gdir.partition_path(p))
        if force_mode == "sparse":
            for q in range(beta):
                for p in range(beta):
                    if (p, q) in dense:
                        shuffle[p].append(gdir.dense_block_path(p, q))

    return ExecutionPlan(beta=beta, columns=columns, shuffle_sources=shuffle)


class Engine:
    """Runs programs over one preprocessed graph directory."""

    def __init__(self, graph_dir: str | Path, params: CostParams,
                 counters: IoCounters | None = None, force_mode: str = "bbp",
                 buffer_size: int = DEFAULT_BUFFER):
        if force_mode not in FORCE_MODES:
            raise ConfigError(f"unknown force mode {force_mode!r}")
        self.gdir = GraphDir(graph_dir)
        self.params = params
        self.counters = counters if counters is not None else IoCounters()
        self.force_mode = force_mode
        self.buffer_size = buffer_size
        self.manifest = self.gdir.load_manifest(self.counters)
        self.intervals = make_intervals(self.manifest.v_count,
                                        self.manifest.beta)
        self.theta = interval_length(self.manifest.v_count,
                                     self.manifest.beta)
        self.stats = RunStats()
        self.tracker = BufferTracker()

    # -- source interval handling -------------------------------------

    def _value_dtype(self, program: MAlgorithmProgram) -> np.dtype:
        return np.dtype(program.value_dtype).newbyteorder("<")

    def _load_carriers(self, program: MAlgorithmProgram, prev: VertexVector,
                       degrees: VertexVector | None, p: int) -> np.ndarray:
        """Load source interval p and fold it into per-source carriers."""
        iv = self.intervals[p]
        dt = self._value_dtype(program)
        values = prev.read_array(iv, dt, self.counters)
        self.stats.src_interval_loads += 1
        self.stats.src_bytes_read += values.nbytes
        self.tracker.add(values.nbytes)
        deg = None
        if degrees is not None:
            deg = degrees.read_array(iv, id_dtype(self.manifest.id_bytes),
                                     self.counters).astype(np.float64)
            self.tracker.add(deg.nbytes)
        carriers = program.carrier(values, deg)
        self.tracker.add(carriers.nbytes)
        self.tracker.sub(values.nbytes)
        if deg is not None:
            self.tracker.sub(deg.nbytes)
        return carriers

    # -- streaming (shuffle) path --------------------------------------

    def _bucket_dtype(self, program: MAlgorithmProgram) -> np.dtype:
        return np.dtype([("dst", id_dtype(self.manifest.id_bytes)),
                         ("val", self._value_dtype(program))])

    def open_bucket_writers(self, program: MAlgorithmProgram) -> list[EdgeWriter]:
        """Fresh (truncated) bucket files for one pass."""
        dt = self._bucket_dtype(program)
        per_writer = min(max(self.buffer_size // max(self.manifest.beta, 1),
                             64 << 10), 1 << 20)
        writers = []
        for q in range(self.manifest.beta):
            w = EdgeWriter(self.gdir.bucket_path(q), dt.itemsize,
                           self.counters, per_writer, mode="wb")
            self.tracker.add(per_writer)
            writers.append(w)
        return writers

    def close_bucket_writers(self, writers: list[EdgeWriter]):
        for w in writers:
            self.tracker.sub(w._limit)
            w.close()

    def spp_shuffle(self, program: MAlgorithmProgram, p: int,
                    carriers: np.ndarray, sources: list[Path],
                    writers: list[EdgeWriter]):
        """Replay partition p's edge files into per-destination buckets.

        Records are (destination id, carrier value), appended in file
        order, so every bucket preserves the partition's edge order.
        """
        iv = self.intervals[p]
        m = self.manifest
        dt = self._bucket_dtype(program)
        for path in sources:
            for chunk in stream_edge_chunks(path, m.psi, m.id_bytes,
                                            self.counters, self.buffer_size):
                src = chunk["src"].astype(np.int64)
                if len(src) and (src.min() < iv.start or src.max() >= iv.stop):
                    raise FormatError(
                        f"{path}: edge source outside interval {p}")
                dst = chunk["dst"].astype(np.int64)
                q_arr = dst // self.theta
                rec = np.empty(len(chunk), dtype=dt)
                rec["dst"] = chunk["dst"]
                rec["val"] = carriers[src - iv.start]
                for q in np.unique(q_arr):
                    writers[q].write_array(rec[q_arr == q])

    def _spp_apply(self, program: MAlgorithmProgram, q: int,
                   accs: list[np.ndarray], pool: ThreadPoolExecutor | None):
        """Fold bucket q's records into the accumulators."""
        path = self.gdir.bucket_path(q)
        if not path.exists() or not os.path.getsize(path):
            return
        iv = self.intervals[q]
        dt = self._bucket_dtype(program)
        per_chunk = max(1, self.buffer_size // dt.itemsize)
        with MeteredFile(path, "rb", self.counters) as f:
            while True:
                data = f.read(per_chunk * dt.itemsize)
                if not data:
                    break
                chunk = np.frombuffer(data, dtype=dt)
                dst = chunk["dst"].astype(np.int64)
                if len(dst) and (dst.min() < iv.start or dst.max() >= iv.stop):
                    raise FormatError(
                        f"{path}: record destination outside interval {q}")
                dst_local = (dst - iv.start).astype(np.intp)
                self._process_slices(program, accs, dst_local, chunk["val"],
                                     None, pool)

    # -- dense path -----------------------------------------------------

    def dbp_process(self, program: MAlgorithmProgram, p: int, q: int,
                    path: Path, carriers: np.ndarray,
                    accs: list[np.ndarray], pool: ThreadPoolExecutor | None):
        """Stream one dense block against in-memory source carriers."""
        ivp, ivq = self.intervals[p], self.intervals[q]
        m = self.manifest
        for chunk in stream_edge_chunks(path, m.psi, m.id_bytes,
                                        self.counters, self.buffer_size):
            src = chunk["src"].astype(np.int64)
            dst = chunk["dst"].astype(np.int64)
            if len(src):
                if src.min() < ivp.start or src.max() >= ivp.stop:
                    raise FormatError(f"{path}: edge source outside interval {p}")
                if dst.min() < ivq.start or dst.max() >= ivq.stop:
                    raise FormatError(
                        f"{path}: edge destination outside interval {q}")
            messages = carriers[src - ivp.start]
            dst_local = (dst - ivq.start).astype(np.intp)
            payload = None
            if program.needs_edge_data:
                payload = chunk["w"].astype(np.float64)
            self._process_slices(program, accs, dst_local, messages, payload,
                                 pool)

    # -- shared workers ---------------------------------------------------

    def _process_slices(self, program: MAlgorithmProgram,
                        accs: list[np.ndarray], dst_local: np.ndarray,
                        messages: np.ndarray, payload: np.ndarray | None,
                        pool: ThreadPoolExecutor | None):
        """Split one chunk into contiguous slices, one per worker."""
        t_count = len(accs)
        n = len(dst_local)
        if t_count == 1 or pool is None:
            program.process(accs[0], dst_local, messages, payload)
            return
        bounds = [(n * t) // t_count for t in range(t_count + 1)]
        futures = []
        for t in range(t_count):
            lo, hi = bounds[t], bounds[t + 1]
            if lo == hi:
                continue
            futures.append(pool.submit(
                program.process, accs[t], dst_local[lo:hi], messages[lo:hi],
                None if payload is None else payload[lo:hi]))
        for fut in futures:
            fut.result()

    def gather_and_apply(self, program: MAlgorithmProgram,
                         accs: list[np.ndarray]) -> np.ndarray:
        """Pairwise-reduce worker buffers, then finalize."""
        gathered = accs[0]
        for t in range(1, len(accs)):
            gathered = program.gather(gathered, accs[t])
        return np.asarray(program.apply(gathered),
                          dtype=self._value_dtype(program))

    # -- forced dense mode ------------------------------------------------

    def _densify_sparse(self):
        """Split every sparse partition into per-block files so the dense
        path can process them (one extra read+write of the sparse edges)."""
        m = self.manifest
        sparse_rows = sorted({b.block.p for b in m.block_table
                              if b.kind is BlockKind.SPARSE and b.edge_count})
        per_writer = min(max(self.buffer_size // max(m.beta, 1), 64 << 10),
                         1 << 20)
        for p in sparse_rows:
            writers: dict[int, EdgeWriter] = {}
            try:
                for chunk in stream_edge_chunks(self.gdir.partition_path(p),
                                                m.psi, m.id_bytes,
                                                self.counters,
                                                self.buffer_size):
                    q_arr = chunk["dst"].astype(np.int64) // self.theta
                    for q in np.unique(q_arr):
                        if q not in writers:
                            writers[q] = EdgeWriter(
                                self.gdir.forced_block_path(p, q), m.psi,
                                self.counters, per_writer, mode="wb")
                        writers[q].write_array(chunk[q_arr == q])
            finally:
                for w in writers.values():
                    w.close()

    def _cleanup_run_files(self):
        for q in range(self.manifest.beta):
            self.gdir.bucket_path(q).unlink(missing_ok=True)
        for p in range(self.manifest.beta):
            for q in range(self.manifest.beta):
                self.gdir.forced_block_path(p, q).unlink(missing_ok=True)

    # -- main loop ----------------------------------------------------------

    def run(self, program: MAlgorithmProgram, iterations: int = 1,
            output_name: str | None = None,
            until_converged: bool = False) -> VertexVector:
        """Execute ``iterations`` synchronous passes of ``program``.

        Returns the final vertex vector, written to
        ``vectors/<output_name>.vec`` (default: the program's name).
        """
        m = self.manifest
        if iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if program.width != self.params.phi:
            raise ConfigError(
                f"program value width {program.width} != declared phi "
                f"{self.params.phi}")
        degrees = None
        if program.needs_degrees:
            deg_path = self.gdir.vector_path("degrees")
            if not deg_path.exists():
                raise ConfigError(
                    "degree vector missing; preprocess with degrees enabled "
                    "or run compute_out_degrees first")
            degrees = VertexVector.open(deg_path, m.id_bytes)
        if program.needs_edge_data:
            if m.psi <= 2 * m.id_bytes:
                raise ConfigError(
                    "program needs edge payloads but the graph stores none")
            if self.force_mode != "dense" and m.sparse_edge_count() > 0:
                raise ConfigError(
                    "edge payloads are unavailable on the streaming path; "
                    "rerun with force_mode='dense'")

        t0 = time.monotonic()
        self.stats = RunStats()
        if self.force_mode == "dense":
            self._densify_sparse()
        plan = build_plan(self.gdir, m, self.force_mode)
        dt = self._value_dtype(program)

        prev = VertexVector.create(self.gdir.vector_path("_work_a"),
                                   program.width, m.v_count)
        nxt = VertexVector.create(self.gdir.vector_path("_work_b"),
                                  program.width, m.v_count)
        chunk_elems = max(1, self.buffer_size // program.width)
        source = program.initial_vector_source()
        if source is not None:
            if source.length != m.v_count or source.width != program.width:
                raise ConfigError("initial vector file shape mismatch")
            for start in range(0, m.v_count, chunk_elems):
                n = min(chunk_elems, m.v_count - start)
                prev.write_range(start, source.read_range(start, n,
                                                          self.counters),
                                 self.counters)
        else:
            init = np.ascontiguousarray(program.initial_vector(m.v_count),
                                        dtype=dt)
            if len(init) != m.v_count:
                raise ConfigError("initial vector length mismatch")
            for start in range(0, m.v_count, chunk_elems):
                stop = min(start + chunk_elems, m.v_count)
                prev.write_range(start, init[start:stop].tobytes(),
                                 self.counters)
            del init

        t_count = max(1, self.params.threads)
        pool = ThreadPoolExecutor(max_workers=t_count) if t_count > 1 else None
        try:
            for passno in range(iterations):
                pass_dst_bytes = 0
                changed = 0
                if plan.has_sparse:
                    writers = self.open_bucket_writers(program)
                    try:
                        for p in range(m.beta):
                            sources = plan.shuffle_sources[p]
                            if not sources or not any(
                                    os.path.getsize(s) for s in sources
                                    if s.exists()):
                                continue
                            carriers = self._load_carriers(program, prev,
                                                           degrees, p)
                            try:
                                self.spp_shuffle(program, p, carriers,
                                                 sources, writers)
                            finally:
                                self.tracker.sub(carriers.nbytes)
                    finally:
                        self.close_bucket_writers(writers)

                cached_p = -1
                carriers = None
                for q in range(m.beta):
                    ivq = self.intervals[q]
                    prev_q = prev.read_array(ivq, dt, self.counters)
                    pass_dst_bytes += prev_q.nbytes
                    self.tracker.add(prev_q.nbytes)
                    accs = [np.asarray(program.initialize(prev_q), dtype=dt)]
                    if len(accs[0]) != ivq.length:
                        raise ConfigError("initialize returned wrong length")
                    for _ in range(1, t_count):
                        accs.append(np.full(ivq.length, program.neutral,
                                            dtype=dt))
                    for a in accs:
                        self.tracker.add(a.nbytes)
                    keep_prev = program.converges_on_fixpoint
                    if not keep_prev:
                        self.tracker.sub(prev_q.nbytes)

                    if plan.has_sparse:
                        self._spp_apply(program, q, accs, pool)
                    for p, path in plan.columns[q]:
                        if p != cached_p:
                            if carriers is not None:
                                self.tracker.sub(carriers.nbytes)
                            carriers = self._load_carriers(program, prev,
                                                           degrees, p)
                            cached_p = p
                        self.dbp_process(program, p, q, path, carriers, accs,
                                         pool)

                    out = self.gather_and_apply(program, accs)
                    nxt.write_array(ivq, out, self.counters)
                    if keep_prev:
                        changed += int(np.count_nonzero(out != prev_q))
                        self.tracker.sub(prev_q.nbytes)
                    for a in accs:
                        self.tracker.sub(a.nbytes)
                    log.debug("pass=%d q=%d dense_blocks=%d changed=%d",
                              passno, q, len(plan.columns[q]), changed)
                if carriers is not None:
                    self.tracker.sub(carriers.nbytes)
                    carriers = None
                    cached_p = -1

                self.stats.dst_bytes_per_pass.append(pass_dst_bytes)
                self.stats.changed_per_pass.append(changed)
                self.stats.iterations_run += 1
                prev, nxt = nxt, prev
                if (until_converged and program.converges_on_fixpoint
                        and changed == 0):
                    break
        finally:
            if pool is not None:
                pool.shutdown(wait=True)
            self._cleanup_run_files()
            self.stats.peak_buffer_bytes = self.tracker.peak
            self.stats.wall_seconds = time.monotonic() - t0

        name = output_name or program.name
        final_path = self.gdir.vector_path(name)
        os.replace(prev.path, final_path)
        nxt.path.unlink(missing_ok=True)
        return VertexVector(final_path, program.width, m.v_count)


def run(graph_dir: str | Path, program: MAlgorithmProgram, iterations: int,
        params: CostParams, counters: IoCounters | None = None,
        force_mode: str = "bbp", output_name: str | None = None,
        until_converged: bool = False,
        buffer_size: int = DEFAULT_BUFFER) -> VertexVector:
    """One-shot convenience wrapper around :class:`Engine`."""
    eng = Engine(graph_dir, params, counters, force_mode, buffer_size)
    return eng.run(program, iterations, output_name, until_converged)
