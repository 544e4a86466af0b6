import json

import pytest

from tweetprof.cli import main
from tweetprof.corpus import SYNTHETIC_BINARY, load_dataset, load_timelines


@pytest.fixture()
def synth_dir(tmp_path):
    """A small generated corpus on disk plus its synth config."""
    config = {
        "n_users": 25,
        "n_tweets": 250,
        "hate_class_fraction": 0.4,
        "hater_fraction": 0.2,
        "top_hater_share": 0.1,
        "activity_exponent": 1.1,
        "signal_strength": 0.9,
        "seed": 7,
    }
    cfg_path = tmp_path / "synth.json"
    cfg_path.write_text(json.dumps(config))
    assert main(["synth", "--config", str(cfg_path), "--output-dir", str(tmp_path)]) == 0
    return tmp_path


def eval_config(synth_dir, out_dir, **overrides):
    config = {
        "dataset": str(synth_dir / "tweets.jsonl"),
        "timelines": str(synth_dir / "timelines.jsonl"),
        "scheme": "synthetic-binary",
        "mode": "timeline",
        "split": "by-user",
        "k": 3,
        "seed": 0,
        "recurrent": {
            "embed_dim": 6,
            "hidden_dim": 6,
            "epochs": 1,
            "batch_size": 16,
            "max_seq_len": 8,
        },
        "gbdt": {"n_rounds": 4, "max_depth": 2},
        "output_dir": str(out_dir),
    }
    config.update(overrides)
    path = synth_dir / "run.json"
    path.write_text(json.dumps(config))
    return path


class TestSynthAndDist:
    def test_synth_writes_loadable_files(self, synth_dir):
        ds = load_dataset(synth_dir / "tweets.jsonl", SYNTHETIC_BINARY)
        timelines = load_timelines(synth_dir / "timelines.jsonl")
        assert len(ds) == 250
        assert len(timelines) == 25

    def test_dist_output_sorted(self, synth_dir, capsys):
        out = synth_dir / "dist.tsv"
        code = main(
            [
                "dist",
                "--input", str(synth_dir / "tweets.jsonl"),
                "--hate-only",
                "--hate-class", "hate",
                "--output", str(out),
            ]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "rank\tcount"
        counts = [int(line.split("\t")[1]) for line in lines[1:]]
        assert counts == sorted(counts, reverse=True)

    def test_dist_infers_scheme(self, synth_dir):
        out = synth_dir / "all.tsv"
        assert main(["dist", "--input", str(synth_dir / "tweets.jsonl"), "--output", str(out)]) == 0
        total = sum(int(line.split("\t")[1]) for line in out.read_text().splitlines()[1:])
        assert total == 250


class TestFuse:
    def test_fuse_round_trip(self, tmp_path):
        base = tmp_path / "base.jsonl"
        donor = tmp_path / "donor.jsonl"
        base.write_text(
            json.dumps({"id": "b1", "user_id": "u1", "text": "x", "label": "none"}) + "\n"
            + json.dumps({"id": "b2", "user_id": "u1", "text": "y", "label": "sexism"}) + "\n"
        )
        donor.write_text(
            json.dumps({"id": "d1", "user_id": "u2", "text": "z", "label": "hate"}) + "\n"
            + json.dumps({"id": "d2", "user_id": "u2", "text": "w", "label": "offensive"}) + "\n"
        )
        out = tmp_path / "fused.jsonl"
        code = main(
            [
                "fuse",
                "--base", str(base),
                "--base-scheme", "waseem-binary",
                "--donor", str(donor),
                "--donor-scheme", "davidson-ternary",
                "--hate-class", "hate",
                "--output", str(out),
            ]
        )
        assert code == 0
        records = [json.loads(line) for line in out.read_text().splitlines()]
        assert {r["id"]: r["label"] for r in records} == {
            "b1": "non-hate",
            "b2": "hate",
            "d1": "hate",
        }


class TestEval:
    def test_eval_writes_reports(self, synth_dir, tmp_path):
        out = tmp_path / "out"
        cfg = eval_config(synth_dir, out)
        assert main(["eval", "--config", str(cfg)]) == 0
        for name in ("metrics.txt", "metrics.json", "bins.tsv", "predictions.jsonl"):
            assert (out / name).exists(), name
        payload = json.loads((out / "metrics.json").read_text())
        assert payload["k"] == 3
        assert len(payload["folds"]) == 3
        predictions = [
            json.loads(line) for line in (out / "predictions.jsonl").read_text().splitlines()
        ]
        assert len(predictions) == 250

    def test_eval_byte_identical_runs(self, synth_dir, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        cfg = eval_config(synth_dir, out1)
        assert main(["eval", "--config", str(cfg)]) == 0
        assert main(["eval", "--config", str(cfg), "--output-dir", str(out2)]) == 0
        for name in ("metrics.txt", "metrics.json", "bins.tsv", "predictions.jsonl"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name

    def test_missing_config_usage_error(self, tmp_path, capsys):
        assert main(["eval", "--config", str(tmp_path / "missing.json")]) == 2
        assert "not found" in capsys.readouterr().err

    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_runtime_failure_exits_1(self, synth_dir, tmp_path, capsys):
        cfg = eval_config(synth_dir, tmp_path / "out", dataset=str(tmp_path / "nope.jsonl"))
        assert main(["eval", "--config", str(cfg)]) == 1

    def test_seed_override_changes_reports(self, synth_dir, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        cfg = eval_config(synth_dir, out1)
        assert main(["eval", "--config", str(cfg)]) == 0
        assert main(["eval", "--config", str(cfg), "--seed", "99", "--output-dir", str(out2)]) == 0
        assert (out1 / "predictions.jsonl").read_text() != (out2 / "predictions.jsonl").read_text()


class TestBins:
    def test_bins_recomputes_from_predictions(self, synth_dir, tmp_path):
        out = tmp_path / "out"
        cfg = eval_config(synth_dir, out)
        assert main(["eval", "--config", str(cfg)]) == 0
        rebinned = tmp_path / "rebinned.tsv"
        code = main(
            [
                "bins",
                "--predictions", str(out / "predictions.jsonl"),
                "--timelines", str(synth_dir / "timelines.jsonl"),
                "--classes", "non-hate,hate",
                "--output", str(rebinned),
            ]
        )
        assert code == 0
        assert rebinned.read_bytes() == (out / "bins.tsv").read_bytes()


class TestTrain:
    def test_train_writes_checkpoints(self, synth_dir, tmp_path):
        out = tmp_path / "model"
        cfg = eval_config(synth_dir, out)
        assert main(["train", "--config", str(cfg)]) == 0
        assert (out / "checkpoint.json").exists()
        assert (out / "gbdt.json").exists()
        from tweetprof.gbdt import model_from_json
        from tweetprof.recurrent import load_checkpoint

        model, vocab = load_checkpoint(out / "checkpoint.json")
        assert model.embedding.shape[0] == len(vocab)
        gb = model_from_json((out / "gbdt.json").read_text())
        assert gb.n_features == 2 * model.config.embed_dim  # timeline mode
