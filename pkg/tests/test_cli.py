import numpy as np
import pytest

from lsnn.cli import main
from lsnn.functional import LossBreakdown
from lsnn.network import Architecture
from lsnn.persistence import Checkpoint, read_csv_rows, save_checkpoint

DESK = ["--problem", "1", "--arch", "2-6-6-1", "--h", "0.1", "--iters", "40",
        "--pretrain-restarts", "2", "--pretrain-iters", "10", "--seed", "0",
        "--log-every", "10"]


def _run(tmp_path, extra=(), out="out"):
    out_dir = tmp_path / out
    code = main(["run", *DESK, "--out-dir", str(out_dir), *extra])
    return code, out_dir


class TestRun:
    def test_writes_artifacts(self, tmp_path):
        code, out = _run(tmp_path)
        assert code == 0
        assert (out / "checkpoint.lsnn").exists()
        assert (out / "history.csv").exists()
        rows = read_csv_rows(out / "metrics.csv")
        assert len(rows) == 1
        assert rows[0]["problem"] == "1"
        assert rows[0]["arch"] == "2-6-6-1"
        assert rows[0]["params"] == "67"

    def test_history_schema(self, tmp_path):
        _, out = _run(tmp_path)
        rows = read_csv_rows(out / "history.csv")
        assert set(rows[0]) == {"iter", "lr", "interior_term", "boundary_term", "total"}
        assert int(rows[-1]["iter"]) == 40

    def test_repeat_run_bit_identical(self, tmp_path):
        _, out_a = _run(tmp_path, out="a")
        _, out_b = _run(tmp_path, out="b")
        assert (out_a / "metrics.csv").read_bytes() == (out_b / "metrics.csv").read_bytes()

    def test_invalid_problem(self, tmp_path, capsys):
        code = main(["run", "--problem", "1", "--h", "0.3",
                     "--out-dir", str(tmp_path / "o")])
        assert code == 2

    def test_divergence_exit_code(self, tmp_path):
        out = tmp_path / "div"
        code = main(["run", "--problem", "1", "--arch", "2-4-4-1", "--h", "0.5",
                     "--iters", "50", "--lr0", "1e8", "--pretrain-restarts", "1",
                     "--pretrain-iters", "1", "--out-dir", str(out)])
        assert code == 3
        assert (out / "checkpoint.lsnn").exists()  # last good iterate preserved


class TestEval:
    def test_reproduces_run_metrics(self, tmp_path):
        _, out = _run(tmp_path)
        csv = tmp_path / "eval.csv"
        code = main(["eval", str(out / "checkpoint.lsnn"), "--problem", "1",
                     "--eval-h", "0.1", "--metrics-csv", str(csv)])
        assert code == 0
        run_row = read_csv_rows(out / "metrics.csv")[0]
        eval_row = read_csv_rows(csv)[0]
        assert eval_row == run_row

    def test_finer_mesh_row(self, tmp_path):
        _, out = _run(tmp_path)
        csv = tmp_path / "eval.csv"
        assert main(["eval", str(out / "checkpoint.lsnn"), "--problem", "1",
                     "--eval-h", "0.05", "--metrics-csv", str(csv)]) == 0
        assert float(read_csv_rows(csv)[0]["mesh_h"]) == 0.05

    def test_zero_checkpoint_rel_l2_one(self, tmp_path, capsys):
        arch = Architecture.parse("2-6-6-1")
        ck = Checkpoint(arch, 0, 0, np.zeros(67), np.zeros(67), np.zeros(67),
                        LossBreakdown(0.0, 0.0))
        path = tmp_path / "zero.lsnn"
        save_checkpoint(ck, path)
        assert main(["eval", str(path), "--problem", "1", "--eval-h", "0.1"]) == 0
        assert "rel_l2=1.000000" in capsys.readouterr().out

    def test_corrupt_checkpoint(self, tmp_path):
        path = tmp_path / "bad.lsnn"
        path.write_bytes(b"not a checkpoint\n\nxxxx")
        assert main(["eval", str(path), "--problem", "1"]) == 2

    def test_missing_checkpoint(self, tmp_path):
        assert main(["eval", str(tmp_path / "none.lsnn"), "--problem", "1"]) == 4


class TestHyperplanes:
    def test_writes_polylines(self, tmp_path):
        _, out = _run(tmp_path)
        dst = tmp_path / "polylines.csv"
        code = main(["hyperplanes", str(out / "checkpoint.lsnn"),
                     "--grid-n", "32", "--out", str(dst)])
        assert code == 0
        rows = read_csv_rows(dst)
        assert rows and set(rows[0]) == {"layer", "unit", "x", "y"}
        assert {r["layer"] for r in rows} <= {"1", "2"}

    def test_3d_without_slice(self, tmp_path):
        arch = Architecture.parse("3-4-4-1")
        n = 41
        ck = Checkpoint(arch, 0, 0, np.linspace(-1, 1, n), np.zeros(n),
                        np.zeros(n), LossBreakdown(0.0, 0.0))
        path = tmp_path / "net3d.lsnn"
        save_checkpoint(ck, path)
        assert main(["hyperplanes", str(path), "--out", str(tmp_path / "p.csv")]) == 2
        assert main(["hyperplanes", str(path), "--slice", "0.505",
                     "--grid-n", "16", "--out", str(tmp_path / "p.csv")]) == 0


class TestVerifyTheory:
    def test_default_sweep_holds(self, capsys):
        assert main(["verify-theory", "--quad-n", "128"]) == 0
        assert "False" not in capsys.readouterr().out

    def test_single_zero_slope(self):
        assert main(["verify-theory", "--d", "0.0", "--eps1", "1.0",
                     "--eps2", "0.1", "--quad-n", "128"]) == 0

    def test_invalid_band_width(self):
        assert main(["verify-theory", "--x0", "0.1", "--eps2", "0.2",
                     "--quad-n", "128"]) == 2

    def test_csv_output(self, tmp_path):
        dst = tmp_path / "theory.csv"
        main(["verify-theory", "--eps1", "1.0", "--eps2", "0.1", "--d", "1.0",
              "--quad-n", "128", "--out", str(dst)])
        rows = read_csv_rows(dst)
        assert rows[0]["holds"] == "True"


class TestReport:
    def test_merges_runs(self, tmp_path, capsys):
        _, _ = _run(tmp_path, out="runs/a")
        assert main(["report", str(tmp_path / "runs")]) == 0
        assert "Problem 1" in capsys.readouterr().out

    def test_duplicate_rows_warn_keep_latest(self, tmp_path, capsys):
        _run(tmp_path, out="runs/a")
        _run(tmp_path, extra=["--iters", "60"], out="runs/b")
        capsys.readouterr()  # drain the run commands' own output
        assert main(["report", str(tmp_path / "runs")]) == 0
        captured = capsys.readouterr()
        assert "duplicate" in captured.err
        assert captured.out.count("2-6-6-1") == 1

    def test_empty_dir(self, tmp_path):
        assert main(["report", str(tmp_path)]) == 2

    def test_missing_column_schema_error(self, tmp_path):
        d = tmp_path / "runs"
        d.mkdir()
        (d / "metrics.csv").write_text("problem,arch\n1,2-6-6-1\n")
        assert main(["report", str(d)]) == 2
