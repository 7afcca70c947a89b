"""Command-line front end.

Subcommands
-----------
preprocess  ingest an edge list into a block-partitioned graph directory
run         execute an algorithm (pagerank, wcc, spmv, eigen) on a graph
cost-sim    sweep the analytic I/O model across memory budgets (CSV + figure)
generate    synthesize a recursive-matrix random graph as a binary edge list
info        print the layout summary of a preprocessed graph directory

Exit codes: 0 success, 1 usage or configuration problem, 2 unreadable or
malformed input data, 3 a resource limit was exceeded.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .core import CostParams
from .costmodel import GraphSummary, log_memory_range, sweep, write_sweep_csv
from .engine import Engine
from .eigen import lanczos_so, write_eigen_csv
from .errors import ConfigError, Error, FormatError, ResourceError
from .preprocess import FORCE_MODES, IngestOptions, generate_rmat, preprocess
from .programs import pagerank_program, spmv_program, wcc_program
from .storage import GraphDir, IoCounters, id_bytes_for
from .unionfind import wcc_union_find

log = logging.getLogger(__name__)

_SUFFIXES = {"k": 1 << 10, "m": 1 << 20, "g": 1 << 30}


def parse_memory(text: str) -> int:
    """Parse a byte count with an optional K/M/G binary suffix ("64M")."""
    s = text.strip().lower()
    if s.endswith("ib") and len(s) > 2 and s[-3] in _SUFFIXES:
        s = s[:-2]
    elif s.endswith("b") and len(s) > 1 and s[-2] in _SUFFIXES:
        s = s[:-1]
    elif s.endswith("b") and s[:-1].isdigit():
        s = s[:-1]
    unit = 1
    if s and s[-1] in _SUFFIXES:
        unit = _SUFFIXES[s[-1]]
        s = s[:-1]
    try:
        value = int(s)
    except ValueError:
        raise ConfigError(f"cannot parse memory size {text!r}") from None
    if value < 1:
        raise ConfigError(f"memory size must be positive, got {text!r}")
    return value * unit


def _memory_arg(text: str) -> int:
    try:
        return parse_memory(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _probabilities_arg(text: str) -> tuple[float, float, float, float]:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(
            f"expected four comma-separated quadrant probabilities, got {text!r}")
    try:
        a, b, c, d = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unparseable probability in {text!r}") from None
    return (a, b, c, d)


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; remap that to 1 so
    status 2 stays reserved for malformed input data."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--memory", type=_memory_arg, default=1 << 30,
                   help="memory budget in bytes, K/M/G suffixes allowed "
                        "(default 1G)")
    p.add_argument("--threads", type=int, default=2,
                   help="worker threads (default 2)")
    p.add_argument("--io-stats", action="store_true",
                   help="print an I/O breakdown after the command")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="blockflow",
                     description="Out-of-core graph computation on block-"
                                 "partitioned edge files.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="command",
                                required=True)

    p = sub.add_parser("preprocess",
                       help="ingest an edge list into a graph directory")
    p.add_argument("--input", required=True, help="edge list to ingest")
    p.add_argument("--output", required=True, help="graph directory to create")
    p.add_argument("--format", choices=("text", "binary"), default="text",
                   help="input encoding (default text)")
    p.add_argument("--vertices", type=int, default=None,
                   help="vertex count; discovered from the input when omitted")
    p.add_argument("--vertex-bytes", type=int, default=8,
                   help="bytes per vertex value during computation (default 8)")
    p.add_argument("--edge-bytes", type=int, default=None,
                   help="bytes per stored edge record (default: two ids)")
    p.add_argument("--symmetrize", action="store_true",
                   help="also store every edge reversed")
    p.add_argument("--one-based", action="store_true",
                   help="input ids start at 1")
    p.add_argument("--drop-self-loops", action="store_true")
    p.add_argument("--force-mode", choices=FORCE_MODES, default="bbp",
                   help="override per-block processing choice (default bbp)")
    _add_common(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("run",
                       help="run an algorithm on a preprocessed graph")
    p.add_argument("algorithm", choices=("pagerank", "wcc", "spmv", "eigen"))
    p.add_argument("--graph", required=True, help="graph directory")
    p.add_argument("--iterations", type=int, default=None,
                   help="passes to run (pagerank default 10; wcc cap 100)")
    p.add_argument("--output", default=None,
                   help="result vector name inside the graph directory")
    p.add_argument("--force-mode", choices=FORCE_MODES, default="bbp",
                   help="override per-block processing choice (default bbp)")
    p.add_argument("--damping", type=float, default=0.85,
                   help="pagerank damping factor (default 0.85)")
    p.add_argument("--wcc-mode", choices=("auto", "union-find", "iterative"),
                   default="auto",
                   help="component labeling strategy (default auto)")
    p.add_argument("--x", default=None,
                   help="spmv input vector (.vec file of float64)")
    p.add_argument("--weighted", action="store_true",
                   help="spmv multiplies by stored edge values")
    p.add_argument("--k", type=int, default=6,
                   help="eigen: number of leading eigenpairs (default 6)")
    p.add_argument("--max-steps", type=int, default=300,
                   help="eigen: iteration cap per restart (default 300)")
    p.add_argument("--tol", type=float, default=1e-8,
                   help="eigen: relative residual tolerance (default 1e-8)")
    p.add_argument("--seed", type=int, default=0,
                   help="eigen: start vector seed (default 0)")
    p.add_argument("--output-csv", default=None,
                   help="eigen: write the eigenvalue table here instead of "
                        "stdout")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("cost-sim",
                       help="analytic I/O cost sweep across memory budgets")
    p.add_argument("--vertices", type=int, required=True)
    p.add_argument("--edges", type=int, required=True)
    p.add_argument("--vertex-bytes", type=int, default=4,
                   help="bytes per vertex value (default 4)")
    p.add_argument("--edge-bytes", type=int, default=8,
                   help="bytes per edge record (default 8)")
    p.add_argument("--threads", type=int, default=2)
    p.add_argument("--memory-min", type=_memory_arg, default=32 << 20,
                   help="smallest budget (default 32M)")
    p.add_argument("--memory-max", type=_memory_arg, default=2 << 30,
                   help="largest budget (default 2G)")
    p.add_argument("--steps", type=int, default=33,
                   help="number of log-spaced budgets (default 33)")
    p.add_argument("--output", default=None,
                   help="CSV file (default stdout)")
    p.add_argument("--figure", default=None,
                   help="figure file (default: alongside --output)")
    p.add_argument("--no-figure", action="store_true",
                   help="skip figure rendering")
    p.set_defaults(func=cmd_cost_sim)

    p = sub.add_parser("generate",
                       help="synthesize a random power-law graph")
    p.add_argument("--output", required=True, help="binary edge list to write")
    p.add_argument("--vertices", type=int, required=True,
                   help="vertex count (must be a power of two)")
    p.add_argument("--edges", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--probabilities", type=_probabilities_arg,
                   default=(0.57, 0.19, 0.19, 0.05),
                   help="quadrant split a,b,c,d (default 0.57,0.19,0.19,0.05)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("info",
                       help="describe a preprocessed graph directory")
    p.add_argument("--graph", required=True)
    p.set_defaults(func=cmd_info)

    return parser


def _check_budget(args) -> None:
    if args.memory < 1 << 20:
        raise ConfigError(
            f"memory budget {args.memory} is below the 1 MiB minimum")
    if args.threads < 1:
        raise ConfigError(f"thread count must be at least 1, got {args.threads}")


def _print_io(counters: IoCounters, enabled: bool, stream=None):
    if not enabled:
        return
    r, w, s = counters.snapshot()
    print(f"io: bytes_read={r} bytes_written={w} seeks={s}",
          file=stream or sys.stdout)


def cmd_preprocess(args) -> int:
    _check_budget(args)
    id_bytes = id_bytes_for(args.vertices) if args.vertices else 4
    psi = args.edge_bytes if args.edge_bytes is not None else 2 * id_bytes
    params = CostParams(phi=args.vertex_bytes, psi=psi, threads=args.threads,
                        memory=args.memory)
    options = IngestOptions(fmt=args.format, one_based_ids=args.one_based,
                            symmetrize=args.symmetrize,
                            drop_self_loops=args.drop_self_loops)
    counters = IoCounters()
    t0 = time.monotonic()
    manifest = preprocess(args.input, args.output, params, options,
                          v_count=args.vertices, force_mode=args.force_mode,
                          counters=counters)
    dense, sparse = manifest.kind_counts()
    print(f"graph={args.output} vertices={manifest.v_count} "
          f"edges={manifest.e_count} beta={manifest.beta} "
          f"dense_blocks={dense} sparse_blocks={sparse} "
          f"wall={time.monotonic() - t0:.2f}s")
    _print_io(counters, args.io_stats)
    return 0


def _engine_summary(algorithm: str, engine: Engine, counters: IoCounters,
                    out_path, stream=None) -> None:
    st = engine.stats
    r, w, s = counters.snapshot()
    print(f"algorithm={algorithm} iterations={st.iterations_run} "
          f"bytes_read={r} bytes_written={w} seeks={s} "
          f"wall={st.wall_seconds:.2f}s output={out_path}",
          file=stream or sys.stdout)


def _engine_breakdown(engine: Engine, stream=None) -> None:
    st = engine.stats
    out = stream or sys.stdout
    print(f"io: dst_bytes_per_pass={st.dst_bytes_per_pass} "
          f"src_interval_loads={st.src_interval_loads} "
          f"src_bytes_read={st.src_bytes_read} "
          f"peak_buffer_bytes={st.peak_buffer_bytes}", file=out)
    if any(st.changed_per_pass):
        print(f"io: changed_per_pass={st.changed_per_pass}", file=out)


def _run_engine(args, program, iterations: int, until_converged: bool,
                manifest, summary_stream=None) -> int:
    params = CostParams(phi=program.width, psi=manifest.psi,
                        threads=args.threads, memory=args.memory)
    counters = IoCounters()
    engine = Engine(args.graph, params, counters=counters,
                    force_mode=args.force_mode)
    vec = engine.run(program, iterations=iterations, output_name=args.output,
                     until_converged=until_converged)
    _engine_summary(args.algorithm, engine, counters, vec.path,
                    stream=summary_stream)
    if args.io_stats:
        _engine_breakdown(engine, stream=summary_stream)
    return 0


def cmd_run(args) -> int:
    _check_budget(args)
    gdir = GraphDir(args.graph)
    manifest = gdir.load_manifest()

    if args.algorithm == "pagerank":
        program = pagerank_program(args.damping)
        return _run_engine(args, program, args.iterations or 10, False,
                           manifest)

    if args.algorithm == "wcc":
        if args.wcc_mode in ("auto", "union-find"):
            counters = IoCounters()
            try:
                t0 = time.monotonic()
                vec = wcc_union_find(args.graph, memory=args.memory,
                                     counters=counters,
                                     output_name=args.output or "wcc")
            except ResourceError:
                if args.wcc_mode == "union-find":
                    raise
                log.info("component state does not fit the memory budget; "
                         "falling back to iterative passes")
            else:
                r, w, s = counters.snapshot()
                print(f"algorithm=wcc mode=union-find bytes_read={r} "
                      f"bytes_written={w} seeks={s} "
                      f"wall={time.monotonic() - t0:.2f}s output={vec.path}")
                _print_io(counters, args.io_stats)
                return 0
        program = wcc_program(manifest.id_bytes)
        return _run_engine(args, program, args.iterations or 100, True,
                           manifest)

    if args.algorithm == "spmv":
        if not args.x:
            raise ConfigError("spmv requires --x, the input vector file")
        program = spmv_program(args.x, weighted=args.weighted)
        return _run_engine(args, program, 1, False, manifest)

    # eigen: the CSV owns stdout unless routed to a file
    params = CostParams(phi=8, psi=manifest.psi, threads=args.threads,
                        memory=args.memory)
    counters = IoCounters()
    t0 = time.monotonic()
    result = lanczos_so(args.graph, k=args.k, max_steps=args.max_steps,
                        tol=args.tol, seed=args.seed, params=params,
                        counters=counters)
    if args.output_csv:
        with open(args.output_csv, "w", encoding="ascii") as f:
            write_eigen_csv(result, f)
        summary_stream = sys.stdout
    else:
        write_eigen_csv(result, sys.stdout)
        summary_stream = sys.stderr
    r, w, s = counters.snapshot()
    print(f"algorithm=eigen pairs={len(result.eigenvalues)} "
          f"steps={result.steps} restarts={result.restarts} bytes_read={r} "
          f"bytes_written={w} seeks={s} wall={time.monotonic() - t0:.2f}s",
          file=summary_stream)
    _print_io(counters, args.io_stats, stream=summary_stream)
    return 0


def cmd_cost_sim(args) -> int:
    summary = GraphSummary(args.vertices, args.edges)
    params = CostParams(phi=args.vertex_bytes, psi=args.edge_bytes,
                        threads=args.threads, memory=args.memory_max)
    memories = log_memory_range(args.memory_min, args.memory_max, args.steps)
    rows = sweep(summary, memories, params)

    if args.output:
        with open(args.output, "w", encoding="ascii") as f:
            write_sweep_csv(rows, f)
        print(f"wrote {len(rows)} rows to {args.output}")
    else:
        write_sweep_csv(rows, sys.stdout)

    figure_path = args.figure
    if figure_path is None and args.output and not args.no_figure:
        figure_path = str(Path(args.output).with_suffix(".png"))
    if figure_path and not args.no_figure:
        from .report import render_sweep_figure
        title = f"{args.vertices:,} vertices, {args.edges:,} edges"
        render_sweep_figure(rows, figure_path, title=title)
        print(f"figure: {figure_path}",
              file=sys.stdout if args.output else sys.stderr)
    return 0


def cmd_generate(args) -> int:
    id_bytes = id_bytes_for(args.vertices)
    t0 = time.monotonic()
    generate_rmat(args.output, args.vertices, args.edges, seed=args.seed,
                  probabilities=args.probabilities, id_bytes=id_bytes)
    print(f"wrote {args.edges} edges over {args.vertices} vertices to "
          f"{args.output} wall={time.monotonic() - t0:.2f}s")
    return 0


def cmd_info(args) -> int:
    gdir = GraphDir(args.graph)
    manifest = gdir.load_manifest()
    dense, sparse = manifest.kind_counts()
    total = manifest.e_count or 1
    print(f"graph directory : {gdir.root}")
    print(f"vertices        : {manifest.v_count}")
    print(f"edges           : {manifest.e_count}")
    print(f"intervals (beta): {manifest.beta}")
    print(f"blocks          : {manifest.beta ** 2} "
          f"({dense} dense, {sparse} sparse)")
    print(f"sparse edges    : {manifest.sparse_edge_count()} "
          f"({manifest.sparse_edge_count() / total:.1%})")
    print(f"id bytes        : {manifest.id_bytes}")
    print(f"vertex bytes    : {manifest.phi}")
    print(f"edge bytes      : {manifest.psi}")
    print(f"mode            : {manifest.mode}")
    print(f"symmetrized     : {manifest.symmetrized}")
    vec_dir = gdir.root / "vectors"
    if vec_dir.is_dir():
        vecs = sorted(vec_dir.glob("*.vec"))
        if vecs:
            print("vectors         : " + ", ".join(
                f"{v.stem} ({v.stat().st_size} B)" for v in vecs))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"blockflow: {exc}", file=sys.stderr)
        return 1
    except FormatError as exc:
        print(f"blockflow: {exc}", file=sys.stderr)
        return 2
    except ResourceError as exc:
        print(f"blockflow: {exc}", file=sys.stderr)
        return 3
    except Error as exc:
        print(f"blockflow: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"blockflow: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
