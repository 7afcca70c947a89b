"""On-disk formats and instrumented file I/O.

Layout of a preprocessed graph directory::

    manifest                  text metadata plus the per-block table
    partitions/sp_<p>.edges   edges whose source lies in interval p
                              (after extraction: sparse-block edges only)
    dense/b_<p>_<q>.edges     edges of one dense block
    spp/dp_<q>.tmp            shuffle buckets, rebuilt every pass
    vectors/<name>.vec        fixed-width per-vertex value arrays

All integers on disk are little-endian.  An edge record is ``psi`` bytes:
source and destination ids of ``id_bytes`` each plus an optional payload.
A vertex vector stores element ``i`` at byte offset ``width * i``.

Everything goes through :class:`MeteredFile`, which counts bytes moved and
non-sequential repositionings ("seeks": one per open, plus one whenever a
transfer does not continue where the previous one ended).
"""
from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import BlockId, BlockInfo, BlockKind
from .errors import FormatError

DEFAULT_BUFFER = 4 << 20  # 4 MiB
MANIFEST_VERSION = 1

_MANIFEST_KEYS = ("version", "v_count", "e_count", "beta", "id_bytes",
                  "phi", "psi", "mode", "symmetrized")


def id_bytes_for(v_count: int) -> int:
    """4-byte ids unless the vertex count exceeds 2**32."""
    return 4 if v_count <= (1 << 32) else 8


def id_dtype(id_bytes: int) -> np.dtype:
    if id_bytes == 4:
        return np.dtype("<u4")
    if id_bytes == 8:
        return np.dtype("<u8")
    raise FormatError(f"unsupported id width {id_bytes}")


class IoCounters:
    """Thread-safe counters for bytes moved and seeks issued."""

    __slots__ = ("_lock", "bytes_read", "bytes_written", "seeks")

    def __init__(self):
        self._lock = threading.Lock()
        self.bytes_read = 0
        self.bytes_written = 0
        self.seeks = 0

    def add_read(self, n: int):
        with self._lock:
            self.bytes_read += n

    def add_write(self, n: int):
        with self._lock:
            self.bytes_written += n

    def add_seek(self):
        with self._lock:
            self.seeks += 1

    def snapshot(self) -> tuple[int, int, int]:
        with self._lock:
            return (self.bytes_read, self.bytes_written, self.seeks)

    @property
    def total_bytes(self) -> int:
        r, w, _ = self.snapshot()
        return r + w

    def reset(self):
        with self._lock:
            self.bytes_read = self.bytes_written = self.seeks = 0

    def __repr__(self):
        r, w, s = self.snapshot()
        return f"IoCounters(bytes_read={r}, bytes_written={w}, seeks={s})"


GLOBAL_COUNTERS = IoCounters()


class MeteredFile:
    """Binary file wrapper that charges all transfers to an IoCounters."""

    def __init__(self, path: str | Path, mode: str, counters: IoCounters | None = None):
        self._f = open(path, mode)
        self._counters = counters if counters is not None else GLOBAL_COUNTERS
        self._streamed_to: int | None = None  # offset after last counted transfer

    def _account(self, start: int, moved: int, write: bool):
        if self._streamed_to != start:
            self._counters.add_seek()
        self._streamed_to = start + moved
        if write:
            self._counters.add_write(moved)
        else:
            self._counters.add_read(moved)

    def read(self, n: int = -1) -> bytes:
        start = self._f.tell()
        data = self._f.read(n)
        if data:
            self._account(start, len(data), write=False)
        return data

    def write(self, data) -> int:
        start = self._f.tell()
        n = self._f.write(data)
        self._account(start, n, write=True)
        return n

    def seek(self, pos: int, whence: int = 0) -> int:
        # repositioning is charged when the next transfer actually happens
        return self._f.seek(pos, whence)

    def tell(self) -> int:
        return self._f.tell()

    def truncate(self, size: int | None = None):
        return self._f.truncate(size)

    def flush(self):
        self._f.flush()

    def close(self):
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


@dataclass
class VertexVector:
    """Disk-resident array of fixed-width per-vertex values."""

    path: Path
    width: int
    length: int

    @classmethod
    def create(cls, path: str | Path, width: int, length: int) -> "VertexVector":
        """Allocate a zero-filled vector file of exactly width*length bytes."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as f:
            f.truncate(width * length)
        return cls(path, width, length)

    @classmethod
    def open(cls, path: str | Path, width: int) -> "VertexVector":
        path = Path(path)
        size = os.path.getsize(path)
        if size % width:
            raise FormatError(
                f"{path}: size {size} is not a multiple of element width {width}")
        return cls(path, width, size // width)

    def _check_range(self, start: int, length: int):
        if start < 0 or length < 0 or start + length > self.length:
            raise FormatError(
                f"{self.path}: range [{start}, {start + length}) outside "
                f"vector of length {self.length}")

    def read_range(self, start: int, length: int,
                   counters: IoCounters | None = None) -> bytes:
        self._check_range(start, length)
        want = self.width * length
        with MeteredFile(self.path, "rb", counters) as f:
            f.seek(self.width * start)
            data = f.read(want)
        if len(data) != want:
            raise FormatError(f"{self.path}: short read ({len(data)} of {want} bytes)")
        return data

    def write_range(self, start: int, values: bytes,
                    counters: IoCounters | None = None):
        if len(values) % self.width:
            raise FormatError(
                f"value buffer of {len(values)} bytes is not a multiple of "
                f"width {self.width}")
        self._check_range(start, len(values) // self.width)
        with MeteredFile(self.path, "r+b", counters) as f:
            f.seek(self.width * start)
            f.write(values)

    def read_interval(self, interval, counters: IoCounters | None = None) -> bytes:
        return self.read_range(interval.start, interval.length, counters)

    def write_interval(self, interval, values: bytes,
                       counters: IoCounters | None = None):
        if len(values) != interval.length * self.width:
            raise FormatError(
                f"expected {interval.length * self.width} bytes for interval "
                f"{interval.index}, got {len(values)}")
        self.write_range(interval.start, values, counters)

    def read_array(self, interval, dtype, counters: IoCounters | None = None) -> np.ndarray:
        dtype = np.dtype(dtype)
        if dtype.itemsize != self.width:
            raise FormatError(
                f"dtype {dtype} width {dtype.itemsize} != vector width {self.width}")
        buf = self.read_interval(interval, counters)
        return np.frombuffer(buf, dtype=dtype).copy()

    def write_array(self, interval, arr: np.ndarray,
                    counters: IoCounters | None = None):
        if arr.dtype.itemsize != self.width:
            raise FormatError(
                f"dtype {arr.dtype} width {arr.dtype.itemsize} != vector "
                f"width {self.width}")
        self.write_interval(interval, np.ascontiguousarray(arr).tobytes(), counters)


def edge_dtype(id_bytes: int, psi: int) -> np.dtype:
    """Structured dtype of one packed edge record.

    4- or 8-byte payloads get a float field ``w``; any other payload width
    is exposed as raw bytes under ``data``.
    """
    idt = id_dtype(id_bytes)
    payload = psi - 2 * id_bytes
    if payload < 0:
        raise FormatError(f"psi {psi} smaller than two ids of {id_bytes} bytes")
    fields = [("src", idt), ("dst", idt)]
    if payload == 4:
        fields.append(("w", np.dtype("<f4")))
    elif payload == 8:
        fields.append(("w", np.dtype("<f8")))
    elif payload:
        fields.append(("data", np.dtype(f"V{payload}")))
    return np.dtype(fields)


def stream_edge_chunks(path: str | Path, psi: int, id_bytes: int,
                       counters: IoCounters | None = None,
                       buffer_size: int = DEFAULT_BUFFER):
    """Yield structured-array chunks of edge records in file order.

    Exactly one seek is charged per open; reads are sequential.
    """
    path = Path(path)
    size = os.path.getsize(path)
    if size % psi:
        raise FormatError(
            f"{path}: size {size} is not a multiple of record width {psi}")
    dt = edge_dtype(id_bytes, psi)
    per_chunk = max(1, buffer_size // psi)
    with MeteredFile(path, "rb", counters) as f:
        while True:
            data = f.read(per_chunk * psi)
            if not data:
                break
            if len(data) % psi:
                raise FormatError(f"{path}: truncated trailing record")
            yield np.frombuffer(data, dtype=dt)


def iter_edge_records(path: str | Path, psi: int, id_bytes: int,
                      counters: IoCounters | None = None,
                      buffer_size: int = DEFAULT_BUFFER):
    """Yield (source, destination, payload_bytes) tuples in file order."""
    for chunk in stream_edge_chunks(path, psi, id_bytes, counters, buffer_size):
        raw = chunk.tobytes()
        for i in range(len(chunk)):
            base = i * psi
            yield (int(chunk["src"][i]), int(chunk["dst"][i]),
                   raw[base + 2 * id_bytes:base + psi])


class EdgeWriter:
    """Buffered appender of packed records; creates the file immediately."""

    def __init__(self, path: str | Path, record_size: int,
                 counters: IoCounters | None = None,
                 buffer_bytes: int = 1 << 20, mode: str = "ab"):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.record_size = record_size
        self.records_written = 0
        self._buf = bytearray()
        self._limit = max(record_size, buffer_bytes)
        self._file = MeteredFile(self.path, mode, counters)

    def write_array(self, arr: np.ndarray):
        if len(arr) == 0:
            return
        if arr.dtype.itemsize != self.record_size:
            raise FormatError(
                f"record dtype width {arr.dtype.itemsize} != {self.record_size}")
        self.records_written += len(arr)
        self._buf += arr.tobytes()
        if len(self._buf) >= self._limit:
            self.flush()

    def flush(self):
        if self._buf:
            self._file.write(bytes(self._buf))
            self._buf.clear()

    def close(self):
        self.flush()
        self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


@dataclass
class GraphManifest:
    """Metadata of a preprocessed graph plus its per-block table
    (row-major: block (p, q) at index p*beta + q)."""

    v_count: int
    e_count: int
    beta: int
    id_bytes: int
    phi: int
    psi: int
    mode: str = "bbp"
    symmetrized: bool = False
    block_table: list[BlockInfo] = field(default_factory=list)
    version: int = MANIFEST_VERSION

    def block(self, p: int, q: int) -> BlockInfo:
        return self.block_table[p * self.beta + q]

    def dense_blocks(self) -> list[BlockInfo]:
        return [b for b in self.block_table if b.kind is BlockKind.DENSE]

    def sparse_edge_count(self) -> int:
        return sum(b.edge_count for b in self.block_table
                   if b.kind is BlockKind.SPARSE)

    def kind_counts(self) -> tuple[int, int]:
        dense = sum(1 for b in self.block_table if b.kind is BlockKind.DENSE)
        return dense, len(self.block_table) - dense


def save_manifest(manifest: GraphManifest, path: str | Path,
                  counters: IoCounters | None = None):
    lines = [
        f"version={manifest.version}",
        f"v_count={manifest.v_count}",
        f"e_count={manifest.e_count}",
        f"beta={manifest.beta}",
        f"id_bytes={manifest.id_bytes}",
        f"phi={manifest.phi}",
        f"psi={manifest.psi}",
        f"mode={manifest.mode}",
        f"symmetrized={int(manifest.symmetrized)}",
        "blocks",
    ]
    for info in manifest.block_table:
        lines.append(f"{info.block.p} {info.block.q} {info.edge_count} "
                     f"{info.kind.value}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with MeteredFile(path, "wb", counters) as f:
        f.write(("\n".join(lines) + "\n").encode("ascii"))


def load_manifest(path: str | Path, counters: IoCounters | None = None) -> GraphManifest:
    path = Path(path)
    try:
        with MeteredFile(path, "rb", counters) as f:
            text = f.read().decode("ascii")
    except OSError as exc:
        raise FormatError(f"cannot read manifest {path}: {exc}") from exc

    keys: dict[str, int] = {}
    block_lines: list[str] = []
    in_blocks = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if in_blocks:
            block_lines.append(line)
            continue
        if line == "blocks":
            in_blocks = True
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        if key not in _MANIFEST_KEYS:
            raise FormatError(f"{path}:{lineno}: unknown key {key!r}")
        if key in keys:
            raise FormatError(f"{path}:{lineno}: duplicate key {key!r}")
        keys[key] = value

    missing = [k for k in _MANIFEST_KEYS if k not in keys]
    if missing:
        raise FormatError(f"{path}: missing keys {missing}")
    if not in_blocks:
        raise FormatError(f"{path}: missing blocks section")

    def intval(key):
        try:
            return int(keys[key])
        except ValueError as exc:
            raise FormatError(f"{path}: key {key} is not an integer") from exc

    version = intval("version")
    if version != MANIFEST_VERSION:
        raise FormatError(f"{path}: unsupported manifest version {version}")
    v_count = intval("v_count")
    e_count = intval("e_count")
    beta = intval("beta")
    id_bytes = intval("id_bytes")
    if id_bytes not in (4, 8):
        raise FormatError(f"{path}: id_bytes must be 4 or 8, got {id_bytes}")
    if id_bytes == 4 and v_count > (1 << 32):
        raise FormatError(f"{path}: {v_count} vertices do not fit 4-byte ids")
    mode = keys["mode"]
    if mode not in ("bbp", "dense", "sparse"):
        raise FormatError(f"{path}: unknown mode {mode!r}")

    if len(block_lines) != beta * beta:
        raise FormatError(
            f"{path}: expected {beta * beta} block lines, found {len(block_lines)}")
    table: list[BlockInfo] = []
    total = 0
    for i, line in enumerate(block_lines):
        parts = line.split()
        if len(parts) != 4:
            raise FormatError(f"{path}: malformed block line {line!r}")
        try:
            p, q, count = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError as exc:
            raise FormatError(f"{path}: malformed block line {line!r}") from exc
        if (p, q) != divmod(i, beta):
            raise FormatError(
                f"{path}: block line {i} out of order: got ({p}, {q})")
        if parts[3] == "dense":
            kind = BlockKind.DENSE
        elif parts[3] == "sparse":
            kind = BlockKind.SPARSE
        else:
            raise FormatError(f"{path}: unknown block kind {parts[3]!r}")
        if count < 0:
            raise FormatError(f"{path}: negative edge count in block ({p}, {q})")
        table.append(BlockInfo(BlockId(p, q), count, kind))
        total += count
    if total != e_count:
        raise FormatError(
            f"{path}: block table sums to {total} edges, manifest says {e_count}")

    return GraphManifest(
        v_count=v_count, e_count=e_count, beta=beta, id_bytes=id_bytes,
        phi=intval("phi"), psi=intval("psi"), mode=mode,
        symmetrized=bool(intval("symmetrized")), block_table=table,
        version=version)


class GraphDir:
    """Path helper for one preprocessed graph directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest"

    def partition_path(self, p: int) -> Path:
        return self.root / "partitions" / f"sp_{p}.edges"

    def dense_block_path(self, p: int, q: int) -> Path:
        return self.root / "dense" / f"b_{p}_{q}.edges"

    def forced_block_path(self, p: int, q: int) -> Path:
        # run-scoped per-block split of sparse partitions (forced dense mode)
        return self.root / "spp" / f"fb_{p}_{q}.edges"

    def bucket_path(self, q: int) -> Path:
        return self.root / "spp" / f"dp_{q}.tmp"

    def vector_path(self, name: str) -> Path:
        return self.root / "vectors" / f"{name}.vec"

    def ensure_layout(self):
        for sub in ("partitions", "dense", "spp", "vectors"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    def load_manifest(self, counters: IoCounters | None = None) -> GraphManifest:
        return load_manifest(self.manifest_path, counters)

    def save_manifest(self, manifest: GraphManifest,
                      counters: IoCounters | None = None):
        save_manifest(manifest, self.manifest_path, counters)
