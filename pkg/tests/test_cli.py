import hashlib
import json

import pytest
import yaml

from duomotion.cli import main


def run_cli(capsys, *args) -> tuple[int, str, str]:
    code = main(list(args))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def tiny_config_file(tmp_path):
    cfg = {
        "data": {"frame_count": 12, "joint_count": 2},
        "diffusion": {"timesteps": 50, "sample_steps": 5},
        "train": {"steps": 6, "batch_size": 4, "checkpoint_every": 0},
    }
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    return path


@pytest.fixture()
def dataset_file(tmp_path, capsys):
    path = tmp_path / "data.dmot"
    code, _, _ = run_cli(
        capsys,
        "synth-data",
        "--count", "8",
        "--out", str(path),
        "--frames", "12",
        "--joints", "2",
        "--seed", "3",
    )
    assert code == 0
    return path


class TestSynthData:
    def test_writes_loadable_dataset(self, dataset_file):
        from duomotion.dataio import load_dataset

        samples = load_dataset(dataset_file)
        assert len(samples) == 8
        assert all(p for _, p in samples)

    def test_bit_reproducible(self, tmp_path, capsys):
        digests = []
        for name in ("a.dmot", "b.dmot"):
            path = tmp_path / name
            code, _, _ = run_cli(
                capsys, "synth-data", "--count", "4", "--out", str(path),
                "--frames", "12", "--joints", "2", "--seed", "9",
            )
            assert code == 0
            digests.append(hashlib.sha256(path.read_bytes()).hexdigest())
        assert digests[0] == digests[1]

    def test_invalid_count_is_exit_2(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "synth-data", "--count", "0", "--out", str(tmp_path / "x.dmot")
        )
        assert code == 2
        assert "error" in err


class TestDecompose:
    def test_paper_style_prompt(self, capsys):
        code, out, _ = run_cli(
            capsys,
            "decompose",
            "--prompt",
            "one person is crossing the legs, the other person takes a picture.",
        )
        assert code == 0
        record = json.loads(out)
        assert record["person1"] == "one person is crossing the legs"
        assert record["person2"] == "the other person takes a picture"
        assert record["source"] == "rule"

    def test_cache_flag(self, tmp_path, capsys):
        cache = tmp_path / "cache.tsv"
        cache.write_text("hi.\tcached one\tcached two\n", encoding="utf-8")
        code, out, _ = run_cli(
            capsys, "decompose", "--prompt", "hi.", "--cache", str(cache)
        )
        assert code == 0
        record = json.loads(out)
        assert record["person1"] == "cached one"
        assert record["source"] == "cache"


class TestTrainGenerateEvaluate:
    @pytest.fixture()
    def checkpoint(self, tmp_path, tiny_config_file, dataset_file, capsys):
        out_dir = tmp_path / "run"
        code, _, _ = run_cli(
            capsys,
            "train",
            "--config", str(tiny_config_file),
            "--data", str(dataset_file),
            "--out", str(out_dir),
        )
        assert code == 0
        return out_dir / "checkpoint.dmck"

    def test_train_generate_evaluate_inspect(self, tmp_path, checkpoint, dataset_file, capsys):
        assert checkpoint.exists()

        gen_dir = tmp_path / "gen"
        code, _, _ = run_cli(
            capsys,
            "generate",
            "--ckpt", str(checkpoint),
            "--prompt", "these two bow.",
            "--count", "2",
            "--seed", "4",
            "--out", str(gen_dir),
        )
        assert code == 0
        info = json.loads((gen_dir / "generation.json").read_text())
        assert info["count"] == 2
        assert len(info["predicted_profile"]) == 3

        report_base = tmp_path / "report"
        code, out, _ = run_cli(
            capsys,
            "evaluate",
            "--ckpt", str(checkpoint),
            "--data", str(dataset_file),
            "--metrics", "mpjpe,mpjie",
            "--limit", "2",
            "--seed", "1",
            "--out", str(report_base),
        )
        assert code == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert "mpjpe_p1" in report["metrics"]

        code, out, _ = run_cli(
            capsys, "inspect-distance", "--data", str(dataset_file), "--k", "3",
            "--ckpt", str(checkpoint),
        )
        assert code == 0
        first = out.splitlines()[0].split("\t")
        assert len(first) == 3  # id, gt profile, predicted profile

    def test_generate_reproducible(self, tmp_path, checkpoint, capsys):
        digests = []
        for name in ("g1", "g2"):
            out_dir = tmp_path / name
            code, _, _ = run_cli(
                capsys,
                "generate",
                "--ckpt", str(checkpoint),
                "--prompt", "these two bow.",
                "--count", "1",
                "--seed", "11",
                "--out", str(out_dir),
            )
            assert code == 0
            digests.append(
                hashlib.sha256((out_dir / "motions.dmot").read_bytes()).hexdigest()
            )
        assert digests[0] == digests[1]

    def test_embedding_metrics_without_evaluator_is_exit_2(
        self, checkpoint, dataset_file, capsys
    ):
        code, _, err = run_cli(
            capsys,
            "evaluate",
            "--ckpt", str(checkpoint),
            "--data", str(dataset_file),
            "--metrics", "fid",
            "--limit", "2",
        )
        assert code == 2
        assert "evaluator" in err

    def test_config_fingerprint_mismatch_is_exit_2(
        self, tmp_path, checkpoint, dataset_file, capsys
    ):
        other = tmp_path / "other.yaml"
        other.write_text("train:\n  seed: 99\n", encoding="utf-8")
        code, _, err = run_cli(
            capsys,
            "generate",
            "--ckpt", str(checkpoint),
            "--config", str(other),
            "--prompt", "these two bow.",
            "--out", str(tmp_path / "nope"),
        )
        assert code == 2
        assert "fingerprint" in err


class TestExitCodes:
    def test_numeric_failure_is_exit_3(self, capsys, monkeypatch):
        import duomotion.text
        from duomotion.errors import NumericError

        def boom(*args, **kwargs):
            raise NumericError("synthetic numeric failure")

        monkeypatch.setattr(duomotion.text, "decompose_prompt", boom)
        code, _, err = run_cli(capsys, "decompose", "--prompt", "hi.")
        assert code == 3
        assert "numeric" in err

    def test_missing_file_is_exit_2(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "inspect-distance", "--data", str(tmp_path / "missing.dmot")
        )
        assert code == 2
        assert "error" in err


class TestSeedEnv:
    def test_env_seed_used_as_default(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("DUOMOTION_SEED", "7")
        a = tmp_path / "a.dmot"
        code, _, _ = run_cli(
            capsys, "synth-data", "--count", "2", "--out", str(a),
            "--frames", "12", "--joints", "2",
        )
        assert code == 0
        monkeypatch.delenv("DUOMOTION_SEED")
        b = tmp_path / "b.dmot"
        code, _, _ = run_cli(
            capsys, "synth-data", "--count", "2", "--out", str(b),
            "--frames", "12", "--joints", "2", "--seed", "7",
        )
        assert code == 0
        assert a.read_bytes() == b.read_bytes()

    def test_flag_overrides_env(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("DUOMOTION_SEED", "7")
        a = tmp_path / "a.dmot"
        run_cli(
            capsys, "synth-data", "--count", "2", "--out", str(a),
            "--frames", "12", "--joints", "2", "--seed", "8",
        )
        monkeypatch.delenv("DUOMOTION_SEED")
        b = tmp_path / "b.dmot"
        run_cli(
            capsys, "synth-data", "--count", "2", "--out", str(b),
            "--frames", "12", "--joints", "2", "--seed", "8",
        )
        assert a.read_bytes() == b.read_bytes()
