"""End-to-end command-line checks, driven through main(argv)."""
import numpy as np
import pytest

from blockflow import ConfigError, load_manifest
from blockflow.cli import main, parse_memory

from conftest import reference_pagerank, write_binary_edges


def read_vec(path, dtype):
    return np.fromfile(path, dtype=dtype)


# ---------------------------------------------------------------------------
# memory size parsing

class TestParseMemory:
    @pytest.mark.parametrize("text,expected", [
        ("1024", 1024),
        ("1b", 1),
        ("4K", 4 << 10),
        ("4k", 4 << 10),
        ("64M", 64 << 20),
        ("64mb", 64 << 20),
        ("64MiB", 64 << 20),
        ("2G", 2 << 30),
        ("2gib", 2 << 30),
        (" 8m ", 8 << 20),
    ])
    def test_accepted_forms(self, text, expected):
        assert parse_memory(text) == expected

    @pytest.mark.parametrize("text", ["", "x", "1.5G", "5t", "K", "--"])
    def test_unparseable(self, text):
        with pytest.raises(ConfigError, match="cannot parse"):
            parse_memory(text)

    @pytest.mark.parametrize("text", ["0", "-3", "0M"])
    def test_nonpositive(self, text):
        with pytest.raises(ConfigError, match="positive"):
            parse_memory(text)


# ---------------------------------------------------------------------------
# usage errors and exit codes

class TestExitCodes:
    def test_unknown_subcommand(self, capsys):
        assert main(["bogus"]) == 1
        assert "error" in capsys.readouterr().err

    def test_missing_required_argument(self, capsys):
        assert main(["preprocess"]) == 1

    def test_missing_input_file(self, tmp_path, capsys):
        code = main(["preprocess", "--input", str(tmp_path / "nope.txt"),
                     "--output", str(tmp_path / "g")])
        assert code == 2
        assert "input not found" in capsys.readouterr().err

    def test_missing_graph_directory(self, tmp_path, capsys):
        code = main(["run", "pagerank", "--graph", str(tmp_path / "nope")])
        assert code == 2

    def test_memory_below_minimum(self, tmp_path, capsys):
        edges = tmp_path / "e.txt"
        edges.write_text("0 1\n")
        code = main(["preprocess", "--input", str(edges),
                     "--output", str(tmp_path / "g"), "--memory", "512K"])
        assert code == 1
        assert "1 MiB minimum" in capsys.readouterr().err

    def test_zero_threads(self, tmp_path, capsys):
        edges = tmp_path / "e.txt"
        edges.write_text("0 1\n")
        code = main(["preprocess", "--input", str(edges),
                     "--output", str(tmp_path / "g"), "--threads", "0"])
        assert code == 1

    def test_bad_probabilities(self, tmp_path, capsys):
        code = main(["generate", "--output", str(tmp_path / "e.bin"),
                     "--vertices", "64", "--edges", "10",
                     "--probabilities", "0.5,0.5"])
        assert code == 1


# ---------------------------------------------------------------------------
# the full pipeline on a small deterministic graph

@pytest.fixture()
def small_graph_dir(tmp_path, capsys):
    edges = tmp_path / "edges.txt"
    edges.write_text("0 1\n0 2\n1 2\n2 0\n")
    gdir = tmp_path / "g"
    assert main(["preprocess", "--input", str(edges), "--output", str(gdir),
                 "--vertices", "3"]) == 0
    capsys.readouterr()
    return gdir


class TestPipeline:
    def test_preprocess_summary_line(self, tmp_path, capsys):
        edges = tmp_path / "edges.txt"
        edges.write_text("0 1\n0 2\n1 2\n2 0\n")
        assert main(["preprocess", "--input", str(edges),
                     "--output", str(tmp_path / "g"), "--vertices", "3"]) == 0
        out = capsys.readouterr().out
        assert "vertices=3" in out
        assert "edges=4" in out
        assert "beta=1" in out

    def test_symmetrize_doubles_edge_count(self, tmp_path, capsys):
        edges = tmp_path / "edges.txt"
        edges.write_text("0 1\n0 2\n1 2\n2 0\n")
        gdir = tmp_path / "g"
        assert main(["preprocess", "--input", str(edges), "--output",
                     str(gdir), "--vertices", "3", "--symmetrize"]) == 0
        assert load_manifest(gdir / "manifest").e_count == 8

    def test_pagerank_matches_reference(self, small_graph_dir, capsys):
        assert main(["run", "pagerank", "--graph", str(small_graph_dir),
                     "--iterations", "5", "--output", "pr"]) == 0
        out = capsys.readouterr().out
        assert "algorithm=pagerank" in out
        assert "iterations=5" in out
        got = read_vec(small_graph_dir / "vectors" / "pr.vec", "<f8")
        want = reference_pagerank(np.array([0, 0, 1, 2]),
                                  np.array([1, 2, 2, 0]), 3, 5)
        np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_io_stats_flag_reports_and_preserves_results(
            self, small_graph_dir, capsys):
        assert main(["run", "pagerank", "--graph", str(small_graph_dir),
                     "--output", "a"]) == 0
        capsys.readouterr()
        assert main(["run", "pagerank", "--graph", str(small_graph_dir),
                     "--output", "b", "--io-stats"]) == 0
        out = capsys.readouterr().out
        assert "dst_bytes_per_pass=" in out
        a = (small_graph_dir / "vectors" / "a.vec").read_bytes()
        b = (small_graph_dir / "vectors" / "b.vec").read_bytes()
        assert a == b

    def test_spmv_requires_input_vector(self, small_graph_dir, capsys):
        assert main(["run", "spmv", "--graph", str(small_graph_dir)]) == 1
        assert "requires --x" in capsys.readouterr().err

    def test_spmv_runs_on_vector_file(self, small_graph_dir, tmp_path,
                                       capsys):
        x = tmp_path / "x.vec"
        np.array([1.0, 2.0, 3.0]).tofile(x)
        assert main(["run", "spmv", "--graph", str(small_graph_dir),
                     "--x", str(x), "--output", "y"]) == 0
        got = read_vec(small_graph_dir / "vectors" / "y.vec", "<f8")
        np.testing.assert_allclose(got, [3.0, 1.0, 3.0])

    def test_info_describes_graph(self, small_graph_dir, capsys):
        assert main(["info", "--graph", str(small_graph_dir)]) == 0
        out = capsys.readouterr().out
        assert "vertices        : 3" in out
        assert "edges           : 4" in out
        assert "symmetrized     : False" in out


# ---------------------------------------------------------------------------
# component labeling strategies

class TestComponentCommands:
    def make_pairs_graph(self, tmp_path, v_count=300_000, pairs=75):
        src = np.arange(0, 2 * pairs, 2, dtype=np.int64)
        dst = src + 1
        edges, _ = write_binary_edges(tmp_path / "pairs.bin", src, dst)
        gdir = tmp_path / "pairs"
        # a 1M budget over 300k vertices of 4-byte labels forces several
        # intervals, so the iterative fallback stays within budget too
        assert main(["preprocess", "--input", str(edges), "--output",
                     str(gdir), "--format", "binary", "--vertices",
                     str(v_count), "--vertex-bytes", "4", "--symmetrize",
                     "--memory", "1M"]) == 0
        assert load_manifest(gdir / "manifest").beta > 1
        return gdir

    def test_union_find_over_budget_is_a_resource_error(self, tmp_path,
                                                         capsys):
        gdir = self.make_pairs_graph(tmp_path)
        capsys.readouterr()
        code = main(["run", "wcc", "--graph", str(gdir), "--wcc-mode",
                     "union-find", "--memory", "1M"])
        assert code == 3
        assert "budget" in capsys.readouterr().err

    def test_auto_falls_back_to_iterative_passes(self, tmp_path, capsys):
        gdir = self.make_pairs_graph(tmp_path)
        capsys.readouterr()
        assert main(["run", "wcc", "--graph", str(gdir), "--memory", "1M",
                     "--output", "w_iter"]) == 0
        fallback_out = capsys.readouterr().out
        assert "mode=union-find" not in fallback_out
        assert "algorithm=wcc" in fallback_out
        assert main(["run", "wcc", "--graph", str(gdir), "--memory", "64M",
                     "--output", "w_uf"]) == 0
        assert "mode=union-find" in capsys.readouterr().out
        a = read_vec(gdir / "vectors" / "w_iter.vec", "<u4")
        b = read_vec(gdir / "vectors" / "w_uf.vec", "<u4")
        np.testing.assert_array_equal(a, b)
        # spot-check the labels themselves: pairs share the even id
        assert a[0] == 0 and a[1] == 0
        assert a[148] == 148 and a[149] == 148
        assert a[150] == 150


# ---------------------------------------------------------------------------
# eigen through the CLI

class TestEigenCommand:
    def build_path_graph(self, tmp_path):
        src = np.arange(7, dtype=np.int64)
        edges, _ = write_binary_edges(tmp_path / "p8.bin", src, src + 1)
        gdir = tmp_path / "p8"
        assert main(["preprocess", "--input", str(edges), "--output",
                     str(gdir), "--format", "binary", "--vertices", "8",
                     "--symmetrize"]) == 0
        return gdir

    def test_csv_to_stdout_summary_to_stderr(self, tmp_path, capsys):
        gdir = self.build_path_graph(tmp_path)
        capsys.readouterr()
        assert main(["run", "eigen", "--graph", str(gdir), "--k", "2",
                     "--seed", "1"]) == 0
        captured = capsys.readouterr()
        lines = captured.out.splitlines()
        assert lines[0] == "index,lambda,residual"
        assert len(lines) == 3
        assert "algorithm=eigen" in captured.err
        top = float(lines[1].split(",")[1])
        assert top == pytest.approx(2 * np.cos(np.pi / 9), abs=1e-7)

    def test_csv_to_file_summary_to_stdout(self, tmp_path, capsys):
        gdir = self.build_path_graph(tmp_path)
        capsys.readouterr()
        csv = tmp_path / "eig.csv"
        assert main(["run", "eigen", "--graph", str(gdir), "--k", "3",
                     "--seed", "1", "--output-csv", str(csv)]) == 0
        captured = capsys.readouterr()
        assert "algorithm=eigen" in captured.out
        assert csv.read_text().splitlines()[0] == "index,lambda,residual"
        assert len(csv.read_text().splitlines()) == 4


# ---------------------------------------------------------------------------
# analytic sweeps and graph synthesis

class TestCostSimCommand:
    ARGS = ["cost-sim", "--vertices", "1000000", "--edges", "10000000",
            "--memory-min", "1M", "--memory-max", "64M", "--steps", "5"]

    def test_csv_to_stdout(self, capsys):
        assert main(self.ARGS) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("memory_bytes,beta,")
        assert len(lines) == 6

    def test_csv_and_figure_files(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        assert main(self.ARGS + ["--output", str(out)]) == 0
        stdout = capsys.readouterr().out
        assert "wrote 5 rows" in stdout
        assert "figure:" in stdout
        assert out.exists()
        fig = tmp_path / "sweep.png"
        assert fig.exists()
        assert fig.read_bytes()[:4] == b"\x89PNG"

    def test_no_figure(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        assert main(self.ARGS + ["--output", str(out), "--no-figure"]) == 0
        assert not (tmp_path / "sweep.png").exists()

    def test_explicit_figure_without_csv_file(self, tmp_path, capsys):
        fig = tmp_path / "only.png"
        assert main(self.ARGS + ["--figure", str(fig)]) == 0
        captured = capsys.readouterr()
        assert fig.exists()
        assert "figure:" in captured.err


class TestGenerateCommand:
    def test_deterministic_output(self, tmp_path, capsys):
        a, b = tmp_path / "a.bin", tmp_path / "b.bin"
        for path in (a, b):
            assert main(["generate", "--output", str(path), "--vertices",
                         "64", "--edges", "500", "--seed", "9"]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.stat().st_size == 500 * 8

    def test_non_power_of_two_rejected(self, tmp_path, capsys):
        code = main(["generate", "--output", str(tmp_path / "x.bin"),
                     "--vertices", "65", "--edges", "10"])
        assert code == 1
