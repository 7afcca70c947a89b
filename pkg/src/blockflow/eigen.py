"""Disk-backed float vectors, streaming BLAS-1 kernels, and a Lanczos
eigensolver with selective orthogonalization.

The matrix never materializes: each Lanczos step applies the operator
y[v] = sum over edges (u, v) of x[u] with one engine pass, and all vector
arithmetic streams through fixed-size chunks.  Basis vectors live on disk.
Orthogonality is maintained the cheap way: once a Ritz pair's residual
estimate crosses the sqrt(machine-epsilon) * ||T|| bound its Ritz vector
is materialized and every later Lanczos vector is re-orthogonalized
against the materialized set (plus, always, against eigenpairs converged
in earlier restarts, which doubles as deflation for multiple eigenvalues).
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .core import CostParams
from .engine import Engine
from .errors import ConfigError, Error, FormatError
from .programs import spmv_program
from .storage import DEFAULT_BUFFER, GraphDir, IoCounters, VertexVector

log = logging.getLogger(__name__)

VALUE_DTYPE = np.dtype("<f8")
DEFAULT_CHUNK = 1 << 20  # elements per streamed chunk


class OutOfCoreVector:
    """A float64 VertexVector with finite-checked chunk access."""

    def __init__(self, vec: VertexVector, counters: IoCounters | None = None):
        if vec.width != VALUE_DTYPE.itemsize:
            raise FormatError(f"{vec.path}: not a float64 vector")
        self.vec = vec
        self.counters = counters

    @property
    def path(self) -> Path:
        return self.vec.path

    @property
    def length(self) -> int:
        return self.vec.length

    @classmethod
    def create(cls, path: str | Path, length: int,
               counters: IoCounters | None = None) -> "OutOfCoreVector":
        return cls(VertexVector.create(path, VALUE_DTYPE.itemsize, length),
                   counters)

    @classmethod
    def open(cls, path: str | Path,
             counters: IoCounters | None = None) -> "OutOfCoreVector":
        return cls(VertexVector.open(path, VALUE_DTYPE.itemsize), counters)

    @classmethod
    def from_array(cls, path: str | Path, arr: np.ndarray,
                   counters: IoCounters | None = None,
                   chunk_elems: int = DEFAULT_CHUNK) -> "OutOfCoreVector":
        arr = np.asarray(arr, dtype=VALUE_DTYPE)
        out = cls.create(path, len(arr), counters)
        for start in range(0, len(arr), chunk_elems):
            out.write(start, arr[start:start + chunk_elems])
        return out

    def read(self, start: int, n: int) -> np.ndarray:
        arr = np.frombuffer(self.vec.read_range(start, n, self.counters),
                            dtype=VALUE_DTYPE)
        if not np.all(np.isfinite(arr)):
            raise FormatError(f"{self.path}: non-finite values")
        return arr

    def write(self, start: int, arr: np.ndarray):
        arr = np.ascontiguousarray(arr, dtype=VALUE_DTYPE)
        if not np.all(np.isfinite(arr)):
            raise FormatError(f"{self.path}: refusing to write non-finite values")
        self.vec.write_range(start, arr.tobytes(), self.counters)

    def to_array(self) -> np.ndarray:
        return self.read(0, self.length).copy()


def _spans(length: int, chunk_elems: int):
    for start in range(0, length, chunk_elems):
        yield start, min(chunk_elems, length - start)


def _check_lengths(x: OutOfCoreVector, y: OutOfCoreVector):
    if x.length != y.length:
        raise ConfigError(f"vector lengths differ: {x.length} vs {y.length}")


def ooc_dot(x: OutOfCoreVector, y: OutOfCoreVector,
            chunk_elems: int = DEFAULT_CHUNK) -> float:
    """Streamed inner product; chunks are folded in file order."""
    _check_lengths(x, y)
    total = 0.0
    for start, n in _spans(x.length, chunk_elems):
        total += float(np.dot(x.read(start, n), y.read(start, n)))
    return total


def ooc_norm(x: OutOfCoreVector, chunk_elems: int = DEFAULT_CHUNK) -> float:
    return float(np.sqrt(ooc_dot(x, x, chunk_elems)))


def ooc_axpy(a: float, x: OutOfCoreVector, y: OutOfCoreVector,
             out: OutOfCoreVector | None = None,
             chunk_elems: int = DEFAULT_CHUNK) -> OutOfCoreVector:
    """out = a*x + y, streamed; defaults to updating y in place."""
    _check_lengths(x, y)
    target = out if out is not None else y
    _check_lengths(x, target)
    for start, n in _spans(x.length, chunk_elems):
        target.write(start, a * x.read(start, n) + y.read(start, n))
    return target


def ooc_scale(a: float, x: OutOfCoreVector,
              out: OutOfCoreVector | None = None,
              chunk_elems: int = DEFAULT_CHUNK) -> OutOfCoreVector:
    """out = a*x, streamed; defaults to scaling x in place."""
    target = out if out is not None else x
    _check_lengths(x, target)
    for start, n in _spans(x.length, chunk_elems):
        target.write(start, a * x.read(start, n))
    return target


def _combine_basis(basis: list[OutOfCoreVector], coeffs: np.ndarray,
                   path: Path, counters: IoCounters | None,
                   chunk_elems: int = DEFAULT_CHUNK) -> OutOfCoreVector:
    """out = sum_j coeffs[j] * basis[j], streamed chunk by chunk."""
    out = OutOfCoreVector.create(path, basis[0].length, counters)
    for start, n in _spans(out.length, chunk_elems):
        acc = np.zeros(n, dtype=np.float64)
        for c, q in zip(coeffs, basis):
            if c != 0.0:
                acc += c * q.read(start, n)
        out.write(start, acc)
    return out


def _tridiag_eig(alphas: list[float], betas: list[float]):
    if len(alphas) == 1:
        return np.array([alphas[0]]), np.array([[1.0]])
    return eigh_tridiagonal(np.asarray(alphas), np.asarray(betas))


@dataclass
class LanczosResult:
    eigenvalues: np.ndarray          # non-increasing
    eigenvectors: list[VertexVector]
    residuals: np.ndarray            # ||A v - lambda v|| per returned pair
    operator_norm_estimate: float
    steps: int
    restarts: int
    alphas: np.ndarray               # final sweep's tridiagonal
    betas: np.ndarray
    basis: list | None = None        # kept only on request


def lanczos_so(graph_dir: str | Path, k: int, max_steps: int = 300,
               tol: float = 1e-8, seed: int = 0,
               params: CostParams | None = None,
               full_reorthogonalization: bool = False, max_restarts: int = 4,
               counters: IoCounters | None = None,
               keep_basis: bool = False,
               buffer_size: int = DEFAULT_BUFFER) -> LanczosResult:
    """Top-``k`` eigenpairs (by algebraic value) of the edge-set operator.

    Deterministic for a fixed seed.  Every returned pair satisfies
    ``||A v - lambda v|| <= tol * operator_norm_estimate``, verified with an
    explicit extra operator application; pairs that fail are discarded and
    chased again on a restart.  Breakdown (a vanishing new direction before
    ``k`` pairs converge) also restarts with a fresh deflated random vector;
    more than ``max_restarts`` restarts is an error.
    """
    gdir = GraphDir(graph_dir)
    manifest = gdir.load_manifest(counters)
    dim = manifest.v_count
    if not 1 <= k <= dim:
        raise ConfigError(f"k must be in [1, {dim}], got {k}")
    if not manifest.symmetrized:
        log.warning("graph was not symmetrized at preprocessing; the "
                    "operator may not be symmetric")
    if params is None:
        params = CostParams(phi=VALUE_DTYPE.itemsize, psi=manifest.psi,
                            threads=1, memory=1 << 30)
    if params.phi != VALUE_DTYPE.itemsize:
        raise ConfigError("eigensolver runs use 8-byte float values")

    engine = Engine(graph_dir, params, counters, buffer_size=buffer_size)
    work = gdir.root / "vectors" / "_lz"
    work.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    sqrt_eps = float(np.sqrt(np.finfo(np.float64).eps))
    tiny = np.finfo(np.float64).tiny

    def matvec(x: OutOfCoreVector, tag: str) -> OutOfCoreVector:
        out = engine.run(spmv_program(x.vec), 1, output_name=f"_lz_mv_{tag}")
        return OutOfCoreVector(out, counters)

    converged: list[tuple[float, OutOfCoreVector]] = []
    anorm = 0.0
    steps_total = 0
    sweeps = 0
    last_alphas: list[float] = []
    last_betas: list[float] = []
    kept_basis: list[OutOfCoreVector] | None = None

    while len(converged) < k:
        if sweeps > max_restarts:
            raise Error(
                f"{len(converged)} of {k} eigenpairs converged after "
                f"{sweeps} sweeps ({max_restarts} restarts allowed)")
        sweeps += 1

        # fresh start vector, deflated against everything already found
        q0 = None
        for _ in range(8):
            cand = OutOfCoreVector.from_array(
                work / f"q_{sweeps}_0.vec", rng.standard_normal(dim), counters)
            for _, y in converged:
                ooc_axpy(-ooc_dot(y, cand), y, cand)
            nrm = ooc_norm(cand)
            if nrm > 1e-8:
                ooc_scale(1.0 / nrm, cand)
                q0 = cand
                break
        if q0 is None:
            raise Error("could not draw a start vector outside the "
                        "converged subspace")

        basis = [q0]
        alphas: list[float] = []
        betas: list[float] = []
        so_pairs: list[tuple[float, OutOfCoreVector]] = []
        beta_j = 0.0
        k_needed = k - len(converged)

        for j in range(min(max_steps, dim)):
            w = matvec(basis[j], str(sweeps))
            steps_total += 1
            alpha = ooc_dot(basis[j], w)
            alphas.append(alpha)
            ooc_axpy(-alpha, basis[j], w)
            if j > 0:
                ooc_axpy(-betas[j - 1], basis[j - 1], w)

            vals, vecs = _tridiag_eig(alphas, betas)
            tnorm = float(np.max(np.abs(vals)))
            anorm = max(anorm, tnorm)

            for _, y in converged:
                ooc_axpy(-ooc_dot(y, w), y, w)

            if full_reorthogonalization:
                for _ in range(2):
                    for qq in basis:
                        ooc_axpy(-ooc_dot(qq, w), qq, w)
            else:
                # selective orthogonalization: materialize Ritz vectors
                # whose residual estimate crossed sqrt(eps)*||T||
                pre_norm = ooc_norm(w)
                ests = pre_norm * np.abs(vecs[-1, :])
                for i in np.flatnonzero(ests <= sqrt_eps * max(tnorm, tiny)):
                    val = float(vals[i])
                    if any(abs(val - v0) <= 1e-8 * max(tnorm, 1.0)
                           for v0, _ in so_pairs):
                        continue
                    y = _combine_basis(basis, vecs[:, i],
                                       work / f"so_{sweeps}_{len(so_pairs)}.vec",
                                       counters)
                    ynorm = ooc_norm(y)
                    if ynorm > tiny:
                        ooc_scale(1.0 / ynorm, y)
                        so_pairs.append((val, y))
                for _, y in so_pairs:
                    ooc_axpy(-ooc_dot(y, w), y, w)

            beta_j = ooc_norm(w)

            order = np.argsort(vals)[::-1][:k_needed]
            ests = beta_j * np.abs(vecs[-1, order])
            settled = (len(alphas) >= k_needed
                       and bool(np.all(ests <= tol * max(anorm, tiny))))
            breakdown = beta_j <= max(1e-13, 100.0 * np.finfo(float).eps
                                      * max(tnorm, tiny))
            if settled or breakdown or len(alphas) == dim:
                break
            if j == min(max_steps, dim) - 1:
                break
            betas.append(beta_j)
            nxt = ooc_scale(1.0 / beta_j, w,
                            OutOfCoreVector.create(
                                work / f"q_{sweeps}_{j + 1}.vec", dim,
                                counters))
            basis.append(nxt)

        # harvest converged Ritz pairs from this sweep, best value first
        vals, vecs = _tridiag_eig(alphas, betas)
        ests = beta_j * np.abs(vecs[-1, :])
        order = np.argsort(vals)[::-1]
        added = 0
        for i in order:
            if len(converged) >= k:
                break
            if ests[i] > tol * max(anorm, tiny):
                continue
            val = float(vals[i])
            y = _combine_basis(basis, vecs[:, i],
                               work / f"ev_{sweeps}_{i}.vec", counters)
            for _, y0 in converged:
                ooc_axpy(-ooc_dot(y0, y), y0, y)
            ynorm = ooc_norm(y)
            if ynorm <= 1e-6:
                continue  # direction already captured
            ooc_scale(1.0 / ynorm, y)
            # the contract check: explicit residual of the candidate pair
            r = matvec(y, "resid")
            ooc_axpy(-val, y, r)
            res = ooc_norm(r)
            if res <= tol * max(anorm, tiny):
                converged.append((val, y))
                added += 1
        last_alphas, last_betas = alphas, betas
        if keep_basis:
            kept_basis = basis
        log.debug("sweep=%d steps=%d added=%d total=%d", sweeps, len(alphas),
                  added, len(converged))

    converged.sort(key=lambda pair: -pair[0])
    converged = converged[:k]

    # final residuals and stable output names
    eigenvalues = np.array([v for v, _ in converged])
    residuals = np.empty(k)
    vectors: list[VertexVector] = []
    for i, (val, y) in enumerate(converged):
        r = matvec(y, "final")
        ooc_axpy(-val, y, r)
        residuals[i] = ooc_norm(r)
        dest = gdir.vector_path(f"eig_{i}")
        os.replace(y.path, dest)
        vectors.append(VertexVector(dest, VALUE_DTYPE.itemsize, dim))

    keep = set()
    if keep_basis and kept_basis is not None:
        keep = {q.path for q in kept_basis}
    for f in work.glob("*.vec"):
        if f not in keep:
            f.unlink(missing_ok=True)
    for f in (gdir.root / "vectors").glob("_lz_mv_*.vec"):
        f.unlink(missing_ok=True)

    return LanczosResult(
        eigenvalues=[float(v) for v in eigenvalues],
        eigenvectors=vectors,
        residuals=[float(r) for r in residuals],
        operator_norm_estimate=float(anorm), steps=steps_total,
        restarts=sweeps - 1, alphas=np.asarray(last_alphas),
        betas=np.asarray(last_betas), basis=kept_basis)


def write_eigen_csv(result: LanczosResult, stream):
    """Emit eigenpairs as ``index,lambda,residual`` CSV rows."""
    stream.write("index,lambda,residual\n")
    for i, (lam, res) in enumerate(zip(result.eigenvalues, result.residuals)):
        stream.write(f"{i},{float(lam)!r},{float(res)!r}\n")
