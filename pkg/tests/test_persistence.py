import numpy as np
import pytest

from lsnn.functional import LossBreakdown
from lsnn.network import Architecture, init_params
from lsnn.persistence import (Checkpoint, CheckpointError, load_checkpoint,
                              read_csv_rows, save_checkpoint, write_csv)


def _checkpoint(dims="2-20-20-1", seed=3):
    net = init_params(Architecture.parse(dims), seed=seed)
    rng = np.random.default_rng(seed + 100)
    n = len(net.params)
    return Checkpoint(net.arch, seed, 1234, net.params,
                      rng.standard_normal(n), np.abs(rng.standard_normal(n)),
                      LossBreakdown(0.125, 0.0625))


class TestRoundTrip:
    def test_bit_identical(self, tmp_path):
        ck = _checkpoint()
        path = tmp_path / "net.lsnn"
        save_checkpoint(ck, path)
        back = load_checkpoint(path)
        assert back.arch == ck.arch
        assert back.seed == ck.seed
        assert back.iteration == ck.iteration
        assert np.array_equal(back.params, ck.params)
        assert np.array_equal(back.adam_m, ck.adam_m)
        assert np.array_equal(back.adam_v, ck.adam_v)
        assert back.loss.interior_term == ck.loss.interior_term
        assert back.loss.boundary_term == ck.loss.boundary_term
        assert back.format_version == 1

    def test_binary_section_size(self, tmp_path):
        path = tmp_path / "net.lsnn"
        save_checkpoint(_checkpoint("2-20-20-1"), path)
        raw = path.read_bytes()
        sep = raw.find(b"\n\n")
        assert sep > 0
        assert len(raw) - (sep + 2) == 3 * 501 * 8

    def test_network_property(self, tmp_path):
        ck = _checkpoint()
        net = ck.network
        assert np.array_equal(net.params, ck.params)


class TestValidation:
    def test_truncated_file(self, tmp_path):
        path = tmp_path / "net.lsnn"
        save_checkpoint(_checkpoint(), path)
        path.write_bytes(path.read_bytes()[:-100])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_dims_mismatch(self, tmp_path):
        path = tmp_path / "net.lsnn"
        save_checkpoint(_checkpoint(), path)
        raw = path.read_bytes()
        path.write_bytes(raw.replace(b"2-20-20-1", b"2-20-21-1"))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "net.lsnn"
        save_checkpoint(_checkpoint(), path)
        raw = path.read_bytes()
        path.write_bytes(raw.replace(b"version: 1", b"version: 2"))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    def test_missing_header_terminator(self, tmp_path):
        path = tmp_path / "net.lsnn"
        path.write_bytes(b"version: 1\ndims: 2-20-20-1\n")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_non_finite_rejected_on_save(self, tmp_path):
        ck = _checkpoint()
        bad = ck.params.copy()
        bad[0] = np.inf
        broken = Checkpoint(ck.arch, ck.seed, ck.iteration, bad, ck.adam_m,
                            ck.adam_v, ck.loss)
        with pytest.raises(CheckpointError):
            save_checkpoint(broken, tmp_path / "net.lsnn")

    def test_no_partial_file_on_failure(self, tmp_path):
        ck = _checkpoint()
        bad = ck.adam_v.copy()
        bad[-1] = np.nan
        broken = Checkpoint(ck.arch, ck.seed, ck.iteration, ck.params, ck.adam_m,
                            bad, ck.loss)
        target = tmp_path / "net.lsnn"
        with pytest.raises(CheckpointError):
            save_checkpoint(broken, target)
        assert not target.exists()


class TestCsv:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "metrics.csv"
        header = ["problem", "arch", "rel_l2"]
        rows = [["1", "2-20-20-1", "0.0371"], ["2", "2-20-20-1", "0.078"]]
        write_csv(path, header, rows)
        got = read_csv_rows(path)
        assert got == [dict(zip(header, r)) for r in rows]

    def test_lf_line_endings_and_decimal_points(self, tmp_path):
        path = tmp_path / "history.csv"
        write_csv(path, ["iter", "total"], [["0", "0.5"], ["10", "0.25"]])
        raw = path.read_bytes()
        assert b"\r" not in raw
        assert b"," in raw and b";" not in raw
