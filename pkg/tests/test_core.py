"""Interval arithmetic, block classification, and parameter validation."""
import numpy as np
import pytest

from blockflow import (BlockKind, ConfigError, CostParams, compute_beta,
                       interval_length, interval_of, make_intervals,
                       spp_dbp_ratio)
from blockflow.core import classify_block
from blockflow.costmodel import block_dense_bytes, block_sparse_bytes


class TestCostParams:
    def test_defaults(self):
        p = CostParams(phi=4, psi=8)
        assert p.threads == 2
        assert p.memory == 1 << 30

    @pytest.mark.parametrize("kw", [
        dict(phi=0, psi=8), dict(phi=4, psi=0),
        dict(phi=4, psi=8, threads=0), dict(phi=4, psi=8, memory=0),
        dict(phi=4, psi=8, disk_block=0),
    ])
    def test_rejects_nonpositive(self, kw):
        with pytest.raises(ConfigError):
            CostParams(**kw)

    def test_rejects_budget_below_one_value_per_thread(self):
        # memory must cover phi * (threads + 1) bytes or the interval
        # count would exceed the vertex count
        with pytest.raises(ConfigError):
            CostParams(phi=4, psi=8, threads=2, memory=11)
        CostParams(phi=4, psi=8, threads=2, memory=12)


class TestComputeBeta:
    def test_two_billion_vertices_one_gib(self):
        # 4-byte values, 2 threads, 2e9 vertices, 1 GiB budget
        p = CostParams(phi=4, psi=8, threads=2, memory=1 << 30)
        assert compute_beta(2 * 10 ** 9, p) == 23

    def test_floor_is_one(self):
        p = CostParams(phi=4, psi=8, threads=2, memory=1 << 30)
        assert compute_beta(10, p) == 1

    def test_exact_quotient(self):
        # phi*(T+1)*v = 12_000 exactly divisible by the budget
        p = CostParams(phi=4, psi=8, threads=2, memory=3000)
        assert compute_beta(1000, p) == 4

    def test_non_increasing_in_memory(self):
        v = 10 ** 7
        budgets = [1 << s for s in range(20, 31)]
        betas = [compute_beta(v, CostParams(phi=4, psi=8, memory=m))
                 for m in budgets]
        assert betas == sorted(betas, reverse=True)


class TestIntervals:
    def test_vertex_zero_maps_to_interval_zero(self):
        assert interval_of(0, 300, 3) == 0

    def test_lengths_are_ceiling_quotient(self):
        assert interval_length(300, 3) == 100
        assert interval_length(301, 3) == 101

    @pytest.mark.parametrize("v_count,beta", [
        (300, 3), (301, 3), (1, 1), (7, 4), (100, 7), (2 ** 20, 23),
    ])
    def test_partition_properties(self, v_count, beta):
        ivs = make_intervals(v_count, beta)
        assert len(ivs) == beta
        covered = 0
        theta = interval_length(v_count, beta)
        for i, iv in enumerate(ivs):
            assert iv.index == i
            assert iv.start == covered
            covered += iv.length
            if i < beta - 1 and iv.length:
                assert iv.length == theta or iv.length == 0
        assert covered == v_count
        # every vertex maps into the interval that contains it
        for v in {0, v_count // 2, v_count - 1}:
            i = interval_of(v, v_count, beta)
            assert v in ivs[i]

    def test_interval_contains(self):
        ivs = make_intervals(10, 2)
        assert 4 in ivs[0] and 5 not in ivs[0]
        assert 5 in ivs[1] and 10 not in ivs[1]


class TestClassification:
    def test_ratio_worked_example_dense(self):
        # 13 edges over a 100-vertex source interval, 4 intervals:
        # 1/4 + (26/100)*(1 + 8/4) = 1.03 -> not cheaper to stream
        assert spp_dbp_ratio(13, 100, 4, 8, 4) == pytest.approx(1.03)
        assert classify_block(13, 100, 4, 8, 4) is BlockKind.DENSE

    def test_ratio_worked_example_sparse(self):
        # one edge fewer tips the ratio below 1
        assert spp_dbp_ratio(12, 100, 4, 8, 4) == pytest.approx(0.97)
        assert classify_block(12, 100, 4, 8, 4) is BlockKind.SPARSE

    def test_tie_is_dense(self):
        # xi chosen so the ratio is exactly 1: 1/2 + (2xi/100)*2 = 1
        assert spp_dbp_ratio(12.5, 100, 4, 4, 2) == pytest.approx(1.0)
        assert classify_block(12.5, 100, 4, 4, 2) is BlockKind.DENSE

    def test_agrees_with_per_block_byte_comparison(self):
        # the ratio rule and the raw per-block byte formulas must pick
        # the same side for any parameters
        rng = np.random.default_rng(5)
        for _ in range(1000):
            xi = int(rng.integers(0, 10 ** 6))
            theta = int(rng.integers(1, 10 ** 7))
            phi = int(rng.choice([4, 8]))
            psi = int(rng.choice([8, 12, 16]))
            beta = int(rng.integers(1, 64))
            p = CostParams(phi=phi, psi=psi)
            d = block_dense_bytes(xi, theta, p, beta)
            s = block_sparse_bytes(xi, theta, p, beta)
            expected = BlockKind.SPARSE if s < d else BlockKind.DENSE
            got = classify_block(xi, theta, phi, psi, beta)
            if abs(s - d) > 1e-9 * max(s, d):  # skip knife-edge ties
                assert got is expected, (xi, theta, phi, psi, beta)

    def test_monotone_in_edge_count(self):
        # a fuller block can only move toward the dense side
        rng = np.random.default_rng(6)
        for _ in range(50):
            theta = int(rng.integers(10, 10 ** 5))
            phi = int(rng.choice([4, 8]))
            psi = int(rng.choice([8, 16]))
            beta = int(rng.integers(2, 32))
            kinds = [classify_block(xi, theta, phi, psi, beta)
                     for xi in range(0, theta, max(theta // 40, 1))]
            seen_dense = False
            for k in kinds:
                if k is BlockKind.DENSE:
                    seen_dense = True
                else:
                    assert not seen_dense, "sparse after dense in a xi-chain"

    def test_empty_block_is_sparse_for_multiple_intervals(self):
        assert classify_block(0, 100, 4, 8, 3) is BlockKind.SPARSE
