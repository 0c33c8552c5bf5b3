"""Dataset directory IO, checkpoint and eigen-cache round trips, and the
command-line surface with its manifests and exit codes."""

import json
from pathlib import Path

import numpy as np
import pytest

from specfilt.cli import cmd_dispatch
from specfilt.data import DatasetFormatError, load_dataset, save_dataset
from specfilt.filterbank import FilterBank, make_partitions
from specfilt.graph import sym_normalize, synth_csbm
from specfilt.model import ModelParams
from specfilt.serialize import (dumps_json, load_checkpoint, read_eigen_cache,
                                save_checkpoint, sha256_file, write_eigen_cache)
from specfilt.spectral import dense_eigh, extreme_bands, lanczos_extreme


@pytest.fixture()
def ds_dir(tmp_path):
    ds = synth_csbm(40, 2, 0.25, 0.06, 5, 2.0, seed=13)
    save_dataset(ds, tmp_path / "ds")
    return tmp_path / "ds", ds


class TestDatasetIO:
    def test_roundtrip(self, ds_dir):
        path, original = ds_dir
        loaded = load_dataset(path)
        assert loaded.n == original.n
        np.testing.assert_array_equal(loaded.labels, original.labels)
        np.testing.assert_array_equal(loaded.graph.indices, original.graph.indices)
        np.testing.assert_allclose(loaded.features, original.features, atol=0)
        for k in ("train", "val", "test"):
            np.testing.assert_array_equal(loaded.splits[k], original.splits[k])

    def test_missing_file(self, ds_dir):
        path, _ = ds_dir
        (path / "labels.tsv").unlink()
        with pytest.raises(DatasetFormatError, match="missing file"):
            load_dataset(path)

    def test_bad_feature_row_reports_line(self, ds_dir):
        path, _ = ds_dir
        lines = (path / "features.tsv").read_text().splitlines()
        lines[4] = lines[4] + "\t0.5"
        (path / "features.tsv").write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetFormatError, match="features.tsv line 5"):
            load_dataset(path)

    def test_overlapping_splits_name_duplicate(self, ds_dir):
        path, _ = ds_dir
        splits = json.loads((path / "splits.json").read_text())
        dup = splits["train"][0]
        splits["test"].append(dup)
        (path / "splits.json").write_text(json.dumps(splits))
        with pytest.raises(DatasetFormatError, match=f"overlap.*{dup}"):
            load_dataset(path)

    def test_duplicate_label_line(self, ds_dir):
        path, _ = ds_dir
        text = (path / "labels.tsv").read_text()
        (path / "labels.tsv").write_text(text + "0\t1\n")
        with pytest.raises(DatasetFormatError, match="duplicate node 0"):
            load_dataset(path)

    def test_unlabeled_node_rejected(self, ds_dir):
        path, _ = ds_dir
        lines = (path / "labels.tsv").read_text().splitlines()
        (path / "labels.tsv").write_text("\n".join(lines[1:]) + "\n")
        with pytest.raises(DatasetFormatError, match="node 0 has no label"):
            load_dataset(path)

    def test_edge_line_format(self, ds_dir):
        path, _ = ds_dir
        (path / "edges.tsv").write_text("0\t1\n3 4\n")
        with pytest.raises(DatasetFormatError, match="edges.tsv line 2"):
            load_dataset(path)


class TestSerialization:
    def test_json_17_digit_roundtrip(self):
        values = [1 / 3, 0.1, 1e-300, 123456.789, -2.0 ** 52]
        text = dumps_json({"x": values})
        decoded = json.loads(text)
        assert decoded["x"] == values  # bit-exact after parse

    def test_checkpoint_roundtrip(self):
        ng = sym_normalize(synth_csbm(20, 2, 0.4, 0.1, 4, 1.0, seed=1).graph)
        es = extreme_bands(dense_eigh(ng.to_dense()), 4, 4)
        part = make_partitions(es, 2, 2)
        rng = np.random.default_rng(0)
        fb = FilterBank(partition=part,
                        low_coeffs=[rng.standard_normal(3) for _ in range(2)],
                        high_coeffs=[rng.standard_normal(3) for _ in range(2)],
                        gpr_coeffs=rng.standard_normal(6),
                        eta_low=0.3, eta_high=0.3, eta_gpr=0.4)
        params = ModelParams(dims=(4, 8, 2), w1=rng.standard_normal((4, 8)),
                             b1=rng.standard_normal(8),
                             w2=rng.standard_normal((8, 2)),
                             b2=rng.standard_normal(2), filter=fb, dropout=0.3)
        import tempfile

        with tempfile.TemporaryDirectory() as d:
            p = Path(d) / "ck.json"
            save_checkpoint(p, params, seed=7)
            loaded, seed = load_checkpoint(p)
        assert seed == 7
        np.testing.assert_array_equal(loaded.w1, params.w1)
        np.testing.assert_array_equal(loaded.filter.gpr_coeffs, fb.gpr_coeffs)
        assert loaded.filter.partition == part
        assert loaded.dims == params.dims

    def test_eigen_cache_roundtrip(self, tmp_path):
        ng = sym_normalize(synth_csbm(30, 2, 0.3, 0.1, 4, 1.0, seed=2).graph)
        es = lanczos_extreme(ng, 5, 6, tol=1e-10, seed=0)
        p = tmp_path / "eig.bin"
        write_eigen_cache(p, es)
        back = read_eigen_cache(p)
        assert back.source_n == 30 and back.k_low == 5 and back.k_high == 6
        np.testing.assert_array_equal(back.eigenvalues, es.eigenvalues)
        np.testing.assert_array_equal(back.eigenvectors, es.eigenvectors)

    def test_eigen_cache_bad_magic(self, tmp_path):
        p = tmp_path / "junk.bin"
        p.write_bytes(b"not an eigensystem cache at all.....")
        with pytest.raises(ValueError, match="magic"):
            read_eigen_cache(p)


def run_cli(*args) -> int:
    return cmd_dispatch([str(a) for a in args])


@pytest.fixture(scope="module")
def cli_workspace(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    rc = run_cli("synth", "--out", base / "ds", "--nodes", 60, "--classes", 2,
                 "--p-in", 0.2, "--p-out", 0.05, "--feat-dim", 6,
                 "--separation", 2.0, "--seed", 3)
    assert rc == 0
    rc = run_cli("eigen", "--dataset", base / "ds", "--out", base / "eig.bin",
                 "--k-low", 6, "--k-high", 6)
    assert rc == 0
    rc = run_cli("train", "--dataset", base / "ds", "--eigen", base / "eig.bin",
                 "--checkpoint", base / "ck.json", "--out", base / "log.jsonl",
                 "--k-low", 6, "--k-high", 6, "--max-epochs", 30,
                 "--patience", 15, "--dropout", 0.2)
    assert rc == 0
    return base


class TestCli:
    def test_unknown_command_is_usage_error(self, capsys):
        assert run_cli("frobnicate") == 1

    def test_unknown_flag_is_usage_error(self):
        assert run_cli("train", "--bogus", "1") == 1

    def test_missing_dataset_is_validation_error(self, tmp_path):
        assert run_cli("eigen", "--dataset", tmp_path / "nope",
                       "--out", tmp_path / "e.bin") == 2

    def test_synth_emits_manifest(self, cli_workspace):
        manifest = json.loads((cli_workspace / "ds" / "manifest.json").read_text())
        assert manifest["command"] == "synth"
        assert set(manifest["outputs"]) == {"edges.tsv", "features.tsv",
                                            "labels.tsv", "splits.json"}

    def test_train_manifest_covers_inputs_and_outputs(self, cli_workspace):
        manifest = json.loads((cli_workspace / "ck.json.manifest.json").read_text())
        assert "edges.tsv" in manifest["inputs"]
        assert "eig.bin" in manifest["inputs"]
        assert "ck.json" in manifest["outputs"]
        assert manifest["outputs"]["ck.json"] == sha256_file(cli_workspace / "ck.json")

    def test_eval_reproduces_logged_best_val(self, cli_workspace):
        base = cli_workspace
        rc = run_cli("eval", "--dataset", base / "ds", "--eigen", base / "eig.bin",
                     "--checkpoint", base / "ck.json", "--out", base / "metrics.json")
        assert rc == 0
        metrics = json.loads((base / "metrics.json").read_text())
        log_lines = (base / "log.jsonl").read_text().splitlines()
        summary = json.loads(log_lines[-1])["summary"]
        assert metrics["val_acc"] == summary["best_val_acc"]
        assert metrics["test_acc"] == summary["test_acc_at_best_val"]

    def test_epoch_log_is_jsonl(self, cli_workspace):
        lines = (cli_workspace / "log.jsonl").read_text().splitlines()
        first = json.loads(lines[0])
        assert set(first) == {"epoch", "loss", "train_acc", "val_acc", "lr"}

    def test_respond_rows_match_cache(self, cli_workspace):
        base = cli_workspace
        rc = run_cli("respond", "--checkpoint", base / "ck.json",
                     "--eigen", base / "eig.bin", "--out", base / "resp.csv")
        assert rc == 0
        lines = (base / "resp.csv").read_text().splitlines()
        assert lines[0] == "lambda,response"
        assert len(lines) == 1 + 12
        lams = [float(l.split(",")[0]) for l in lines[1:]]
        assert lams == sorted(lams)

    def test_respond_rejects_mismatched_cache(self, cli_workspace, tmp_path):
        base = cli_workspace
        rc = run_cli("eigen", "--dataset", base / "ds", "--out", tmp_path / "bigger.bin",
                     "--k-low", 9, "--k-high", 9)
        assert rc == 0
        rc = run_cli("respond", "--checkpoint", base / "ck.json",
                     "--eigen", tmp_path / "bigger.bin", "--out", tmp_path / "r.csv")
        assert rc == 2

    def test_oversmooth_distance_decreases(self, cli_workspace):
        base = cli_workspace
        rc = run_cli("oversmooth", "--dataset", base / "ds",
                     "--out", base / "os.csv", "--powers", "1,2,4,8,16,32,64")
        assert rc == 0
        rows = (base / "os.csv").read_text().splitlines()[1:]
        dist = [float(r.split(",")[1]) for r in rows]
        assert dist[-1] < dist[0]

    def test_stale_cache_recomputed(self, cli_workspace, tmp_path):
        # Same cache file, different dataset: hash mismatch forces recompute.
        base = cli_workspace
        rc = run_cli("synth", "--out", tmp_path / "ds2", "--nodes", 60,
                     "--classes", 2, "--p-in", 0.3, "--p-out", 0.02,
                     "--feat-dim", 6, "--separation", 2.0, "--seed", 99)
        assert rc == 0
        import shutil

        shutil.copy(base / "eig.bin", tmp_path / "eig.bin")
        shutil.copy(str(base / "eig.bin.manifest.json"),
                    str(tmp_path / "eig.bin.manifest.json"))
        rc = run_cli("eigen", "--dataset", tmp_path / "ds2",
                     "--out", tmp_path / "eig.bin", "--k-low", 6, "--k-high", 6)
        assert rc == 0
        fresh = read_eigen_cache(tmp_path / "eig.bin")
        stale = read_eigen_cache(base / "eig.bin")
        assert not np.array_equal(fresh.eigenvalues, stale.eigenvalues)

    def test_thm_check_passes(self, tmp_path, capsys):
        rc = run_cli("thm-check", "--trials", 40, "--seed", 7,
                     "--out", tmp_path / "thm.json")
        assert rc == 0
        out = capsys.readouterr().out
        assert "PASS thm41-fuzz" in out
        summary = json.loads((tmp_path / "thm.json").read_text())
        assert summary["violations"] == 0

    def test_waveform_summary(self, tmp_path):
        rc = run_cli("waveform", "--out", tmp_path / "w.json", "--seed", 0)
        assert rc == 0
        blob = json.loads((tmp_path / "w.json").read_text())
        assert blob["rmse_multi"] <= blob["rmse_single"]

    def test_search_writes_trials(self, cli_workspace, tmp_path):
        base = cli_workspace
        rc = run_cli("search", "--dataset", base / "ds", "--trials", 2,
                     "--seed", 1, "--out", tmp_path / "search.json")
        assert rc == 0
        blob = json.loads((tmp_path / "search.json").read_text())
        assert len(blob["trials"]) == 3  # two trials + selection record
