import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from emgtrf.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, EXIT_PARTIAL, main
from emgtrf.io import read_alignment, read_series
from emgtrf.store import read_results, read_table, read_weights

pytestmark = pytest.mark.filterwarnings("ignore:signed-rank test with only")

FAST = ["--k-outer", "2", "--k-inner", "0", "--n-permutations", "20",
        "--alphas", "0.01", "--lambdas", "0.1"]


def run(*argv):
    return main([str(a) for a in argv])


def flags(root, out, *extra):
    return ["--dataset-root", root, "--output-dir", out, *FAST, *extra]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    data, out = base / "data", base / "out"
    assert run("synth", "--out", data, "--n-subjects", 2, "--sentences", 6, "--seed", 1) == EXIT_OK
    assert run("validate-config", *flags(data, out)) == EXIT_OK
    assert run("preprocess", *flags(data, out)) == EXIT_OK
    kinds = ["--feature-kinds", "A,P,AP"]
    assert run("encode", *flags(data, out), *kinds) == EXIT_OK
    assert run("analyze", *flags(data, out), *kinds) == EXIT_OK
    return data, out


class TestSynth:
    def test_layout(self, pipeline):
        data, _ = pipeline
        for sid in ("S01", "S02"):
            assert len(list((data / sid / "sparc").glob("*.tsv"))) == 6
            assert len(list((data / sid / "align").glob("*.tsv"))) == 6
            for mode in ("aloud", "mimed", "subvocal"):
                assert len(list((data / sid / "emg" / mode).glob("*.trf"))) == 6
            rows = read_table(data / sid / "truth" / "kernels.tsv")
            assert len(rows) == 8 * 12 * 31

    def test_raw_rate(self, pipeline):
        data, _ = pipeline
        raw = read_series(data / "S01" / "emg" / "aloud" / "s001_r0.trf")
        assert raw.sample_rate_hz == 2000.0 and raw.n_channels == 8

    def test_bad_counts(self, tmp_path):
        assert run("synth", "--out", tmp_path, "--n-subjects", 0) == EXIT_CONFIG


class TestPreprocess:
    def test_envelope_lengths(self, pipeline):
        data, out = pipeline
        for sid in ("S01", "S02"):
            for stem in ("s001_r0", "s004_r0"):
                sparc = read_series(data / sid / "sparc" / f"{stem}.tsv")
                aloud = read_series(out / "envelopes" / sid / "aloud" / f"{stem}.trf")
                raw = read_series(data / sid / "emg" / "aloud" / f"{stem}.trf")
                assert aloud.sample_rate_hz == 50.0
                assert aloud.n_samples == round(raw.duration_s * 50) == sparc.n_samples
                for mode in ("mimed", "subvocal"):
                    silent = read_series(out / "envelopes" / sid / mode / f"{stem}.trf")
                    assert silent.n_samples == aloud.n_samples
                    assert silent.channel_names == aloud.channel_names

    def test_envelope_standardized(self, pipeline):
        _, out = pipeline
        env = read_series(out / "envelopes" / "S01" / "aloud" / "s002_r0.trf").data
        np.testing.assert_allclose(env.mean(axis=0), 0, atol=0.3)


class TestEncode:
    def test_rows(self, pipeline):
        _, out = pipeline
        res = read_results(out / "results.tsv")
        assert len(res) == 2 * 3 * 3 * 8
        for r in res:
            assert len(r.r_per_fold) == 2 and len(r.null_threshold_per_fold) == 2
            assert (r.chosen_alpha, r.chosen_lambda) == (0.01, 0.1)
            assert -1 <= r.r_mean_fisher <= 1
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n_rows"] == len(res) and summary["failed"] == []
        assert summary["config"]["k_outer"] == 2

    def test_weights(self, pipeline):
        _, out = pipeline
        w = read_weights(out / "weights.tsv")
        names, W = w[("S01", "aloud", "A", "ch1")]
        assert W.shape == (14, 31) and names[-2:] == ["pitch", "loudness"]
        names, W = w[("S01", "mimed", "AP", "ch3")]
        assert W.shape == (52, 31) and names[39] == "SIL"
        assert w[("S02", "subvocal", "P", "ch8")][1].shape == (40, 31)

    def test_restricted_config(self, pipeline, tmp_path):
        data, out = pipeline
        shutil.copytree(out / "envelopes", tmp_path / "envelopes")
        code = run("encode", *flags(data, tmp_path), "--subjects", "S02", "--modes", "mimed")
        assert code == EXIT_OK
        res = read_results(tmp_path / "results.tsv")
        assert len(res) == 16
        assert {(r.subject_id, r.mode) for r in res} == {("S02", "mimed")}
        assert {r.feature_kind for r in res} == {"A", "P"}

    def test_deterministic(self, pipeline, tmp_path):
        data, out = pipeline
        shutil.copytree(out / "envelopes", tmp_path / "envelopes")
        assert run("encode", *flags(data, tmp_path), "--feature-kinds", "A,P,AP") == EXIT_OK
        for name in ("results.tsv", "weights.tsv"):
            assert (tmp_path / name).read_bytes() == (out / name).read_bytes()
        a, b = (json.loads((d / "summary.json").read_text()) for d in (tmp_path, out))
        a["config"].pop("output_dir"), b["config"].pop("output_dir")
        assert a == b


class TestAnalyze:
    def test_files(self, pipeline):
        _, out = pipeline
        listed = json.loads((out / "analysis.json").read_text())["files"]
        for name in ("r_summary.tsv", "delta_r.tsv", "variance_partition.tsv",
                     "variance_partition_mean.tsv", "weight_map_aloud.tsv", "weight_map_aloud_full.tsv",
                     "weight_map_mimed.tsv", "figures/r_by_channel.svg", "figures/delta_r.svg",
                     "figures/weight_map_subvocal.svg"):
            assert name in listed and (out / name).stat().st_size > 0
        assert "weight_map_mimed_full.tsv" not in listed

    def test_weight_map(self, pipeline):
        _, out = pipeline
        rows = read_table(out / "weight_map_mimed.tsv")
        assert len(rows) == 12 and len(rows[0]) == 9
        M = np.array([[float(r[f"ch{c}"]) for c in range(1, 9)] for r in rows])
        np.testing.assert_allclose(M.max(axis=0), 1.0)
        assert np.all(M >= 0)
        assert len(read_table(out / "weight_map_aloud_full.tsv")) == 14

    def test_partition(self, pipeline):
        _, out = pipeline
        rows = read_table(out / "variance_partition.tsv")
        assert len(rows) == 2 * 3 * 8
        for r in rows:
            v = {k: float(r[k]) for k in ("r2_ap", "unique_a", "unique_p", "shared")}
            assert v["unique_a"] + v["unique_p"] + v["shared"] == pytest.approx(v["r2_ap"], abs=1e-12)

    def test_delta(self, pipeline):
        _, out = pipeline
        rows = read_table(out / "delta_r.tsv")
        assert len(rows) == 3 * 8
        for r in rows:
            assert r["stars"] in ("n.s.", "*", "**", "***")
            assert int(r["n_subjects"]) == 2
            assert float(r["p_adjusted"]) >= float(r["p_value"])
            assert (r["stars"] != "n.s.") == (r["significant"] == "true")

    def test_summary_rows(self, pipeline):
        _, out = pipeline
        rows = read_table(out / "r_summary.tsv")
        assert len(rows) == 3 * 3 * 8
        assert all(int(r["n_subjects"]) == 2 for r in rows)

    def test_needs_results(self, tmp_path, pipeline):
        data, _ = pipeline
        assert run("analyze", *flags(data, tmp_path)) == EXIT_DATA

    def test_missing_kind(self, tmp_path, pipeline):
        data, out = pipeline
        shutil.copy(out / "results.tsv", tmp_path / "results.tsv")
        res = [l for l in (tmp_path / "results.tsv").read_text().splitlines()
               if "\tAP\t" not in l or l.startswith("subject")]
        (tmp_path / "results.tsv").write_text("\n".join(res) + "\n")
        assert run("analyze", *flags(data, tmp_path), "--feature-kinds", "A,P,AP") == EXIT_DATA


class TestErrors:
    def test_config_errors(self, tmp_path, capsys):
        assert run("encode", "--dataset-root", tmp_path, "--modes", "shouting") == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err
        assert run("encode", "--dataset-root", tmp_path, "--k-outer", "1") == EXIT_CONFIG
        bad = tmp_path / "run.json"
        bad.write_text('{"colour": 1}')
        assert run("preprocess", "--config", bad) == EXIT_CONFIG
        assert run("preprocess", "--config", tmp_path / "none.json") == EXIT_CONFIG

    def test_jobs_env(self, tmp_path, monkeypatch, pipeline):
        data, _ = pipeline
        monkeypatch.setenv("EMGTRF_JOBS", "zero")
        assert run("preprocess", *flags(data, tmp_path)) == EXIT_CONFIG

    def test_missing_dataset(self, tmp_path, capsys):
        assert run("preprocess", "--dataset-root", tmp_path / "nothing") == EXIT_DATA
        assert "does not exist" in capsys.readouterr().err

    def test_encode_before_preprocess(self, tmp_path, pipeline, capsys):
        data, _ = pipeline
        assert run("encode", *flags(data, tmp_path)) == EXIT_DATA
        assert "run preprocess" in capsys.readouterr().err

    def test_missing_pair_listed(self, tmp_path, pipeline, capsys):
        data, _ = pipeline
        root = tmp_path / "data"
        shutil.copytree(data / "S01", root / "S01")
        (root / "S01" / "emg" / "aloud" / "s002_r0.trf").unlink()
        assert run("validate-config", *flags(root, tmp_path / "out")) == EXIT_DATA
        err = capsys.readouterr().err
        assert "S01/s002_r0: no raw EMG for mode aloud" in err
        assert "S01/s002_r0: silent trial (mimed) has no aloud pair" in err

    def test_corrupt_file_fails_fast(self, tmp_path, pipeline, capsys):
        data, _ = pipeline
        root = tmp_path / "data"
        shutil.copytree(data / "S01", root / "S01")
        target = root / "S01" / "emg" / "subvocal" / "s005_r0.trf"
        target.write_bytes(target.read_bytes()[:100])
        out = tmp_path / "out"
        assert run("preprocess", *flags(root, out)) == EXIT_DATA
        assert "s005_r0" in capsys.readouterr().err
        assert not out.exists()

    def test_corrupt_alignment(self, tmp_path, pipeline):
        data, out = pipeline
        root = tmp_path / "data"
        shutil.copytree(data / "S01", root / "S01")
        (root / "S01" / "align" / "s003_r0.tsv").write_text("start\tend\tlabel\n0.0\tbanana\tAA\n")
        assert run("validate-config", *flags(root, tmp_path / "out")) == EXIT_DATA

    def test_partial_failure(self, tmp_path, pipeline):
        data, out = pipeline
        shutil.copytree(out / "envelopes", tmp_path / "envelopes")
        # a flat envelope for one subject: that job fails, the other completes
        for p in (tmp_path / "envelopes" / "S02" / "aloud").glob("*.trf"):
            env = read_series(p)
            from emgtrf.io import write_series
            write_series(p, env.replace(np.zeros_like(env.data)), binary=True)
        code = run("encode", *flags(data, tmp_path), "--modes", "aloud")
        assert code == EXIT_PARTIAL
        res = read_results(tmp_path / "results.tsv")
        assert {r.subject_id for r in res} == {"S01"}
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert [f["subject"] for f in summary["failed"]] == ["S02"]
        assert "constant" in summary["failed"][0]["error"]


def test_alignment_written_matches(pipeline):
    data, _ = pipeline
    align = read_alignment(data / "S01" / "align" / "s001_r0.tsv")
    sparc = read_series(data / "S01" / "sparc" / "s001_r0.tsv")
    assert align.spans[-1][1] == pytest.approx(sparc.n_samples / 50.0)


def test_entry_point():
    exe = shutil.which("emgtrf")
    cmd = [exe] if exe else [sys.executable, "-m", "emgtrf.cli"]
    done = subprocess.run(cmd + ["--version"], capture_output=True, text=True)
    assert done.returncode == 0 and done.stdout.startswith("emgtrf ")
    done = subprocess.run(cmd + ["encode", "--modes", "x"], capture_output=True, text=True)
    assert done.returncode == EXIT_CONFIG
