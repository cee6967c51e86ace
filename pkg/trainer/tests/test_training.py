from __future__ import annotations

import json

import pytest

from perio_trainer.model import load_model, resolve_spec
from perio_trainer.prediction import predict
from perio_trainer.training import TrainConfig, config_from_file, train

TINY_SEEDS = [
    {"text": "d: localized stage ii grade b periodontitis",
     "entities": [{"start": 3, "end": 12, "label": "EXTENT"},
                  {"start": 19, "end": 21, "label": "STAGE"},
                  {"start": 28, "end": 29, "label": "GRADE"}]},
    {"text": "routine visit, no findings", "entities": []},
]


def _write_seeds(path, seeds):
    path.write_text(json.dumps(seeds))


@pytest.fixture()
def tiny_files(tmp_path):
    train_path = tmp_path / "train.json"
    dev_path = tmp_path / "dev.json"
    _write_seeds(train_path, TINY_SEEDS * 4)
    _write_seeds(dev_path, TINY_SEEDS)
    return train_path, dev_path, tmp_path


class TestTrain:
    def test_single_example_single_epoch_saves_artifact(self, tmp_path):
        train_path = tmp_path / "train.json"
        dev_path = tmp_path / "dev.json"
        _write_seeds(train_path, [TINY_SEEDS[0]])
        _write_seeds(dev_path, [TINY_SEEDS[0]])
        config = TrainConfig(train=str(train_path), dev=str(dev_path),
                             out=str(tmp_path / "model"), base_model="builtin:tiny",
                             epochs=1, rng_seed=0)
        result = train(config)
        model, vocab = load_model(result.model_dir)
        assert model.spec.dim == resolve_spec("builtin:tiny").dim
        assert "<unk>" in vocab
        assert (tmp_path / "model" / "dev_scores.json").exists()

    def test_identical_seed_gives_identical_dev_scores(self, tiny_files):
        train_path, dev_path, tmp = tiny_files
        scores = []
        for name in ("a", "b"):
            config = TrainConfig(train=str(train_path), dev=str(dev_path),
                                 out=str(tmp / name), base_model="builtin:tiny",
                                 epochs=5, rng_seed=3)
            result = train(config)
            scores.append((result.dev_precision, result.dev_recall, result.dev_f1))
        assert scores[0] == scores[1]

    def test_schema_violation_fails_before_training(self, tmp_path):
        bad = tmp_path / "train.json"
        bad.write_text(json.dumps([{"text": "x", "entities": [
            {"start": 0, "end": 99, "label": "STAGE"}]}]))
        dev = tmp_path / "dev.json"
        _write_seeds(dev, TINY_SEEDS)
        config = TrainConfig(train=str(bad), dev=str(dev), out=str(tmp_path / "m"))
        with pytest.raises(Exception, match="bounds"):
            train(config)
        assert not (tmp_path / "m").exists()

    def test_missing_paths_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="not found"):
            TrainConfig(train=str(tmp_path / "nope.json"),
                        dev=str(tmp_path / "nope.json"), out=str(tmp_path / "m"))

    def test_epochs_must_be_positive(self, tiny_files):
        train_path, dev_path, tmp = tiny_files
        with pytest.raises(ValueError, match="epochs"):
            TrainConfig(train=str(train_path), dev=str(dev_path),
                        out=str(tmp / "m"), epochs=0)

    def test_config_file_round_trip(self, tiny_files, tmp_path):
        train_path, dev_path, _ = tiny_files
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({
            "train": str(train_path), "dev": str(dev_path),
            "out": str(tmp_path / "m"), "epochs": 2, "rng_seed": 1,
        }))
        config = config_from_file(config_path)
        assert config.epochs == 2 and config.base_model == "builtin:small"
        with pytest.raises(ValueError, match="unknown"):
            config_path.write_text(json.dumps({"train": "x", "dev": "y",
                                               "out": "z", "warmup": 1}))
            config_from_file(config_path)


class TestPredict:
    @pytest.fixture()
    def trained_model(self, tiny_files):
        train_path, dev_path, tmp = tiny_files
        config = TrainConfig(train=str(train_path), dev=str(dev_path),
                             out=str(tmp / "model"), base_model="builtin:small",
                             epochs=40, rng_seed=0)
        train(config)
        return tmp / "model"

    def test_predictions_schema(self, trained_model, tmp_path):
        notes = tmp_path / "notes.jsonl"
        notes.write_text("\n".join([
            json.dumps({"id": "n1",
                        "text": "d: localized stage ii grade b periodontitis\nroutine visit"}),
            json.dumps({"id": "n2", "text": ""}),
        ]) + "\n")
        out = tmp_path / "pred.jsonl"
        count = predict(trained_model, notes, out)
        assert count == 2
        rows = [json.loads(l) for l in out.read_text().splitlines()]
        assert [r["id"] for r in rows] == ["n1", "n2"]
        for row in rows:
            assert set(row) == {"id", "stage", "grade", "extent"}
            assert row["stage"] in (None, "I", "II", "III", "IV")
            assert row["grade"] in (None, "A", "B", "C")
            assert row["extent"] in (None, "localized", "generalized")

    def test_empty_note_predicts_all_null(self, trained_model, tmp_path):
        notes = tmp_path / "notes.jsonl"
        notes.write_text(json.dumps({"id": "n1", "text": ""}) + "\n")
        out = tmp_path / "pred.jsonl"
        predict(trained_model, notes, out)
        (row,) = [json.loads(l) for l in out.read_text().splitlines()]
        assert row == {"id": "n1", "stage": None, "grade": None, "extent": None}

    def test_well_trained_model_recovers_diagnosis(self, trained_model, tmp_path):
        notes = tmp_path / "notes.jsonl"
        notes.write_text(json.dumps(
            {"id": "n1", "text": "d: localized stage ii grade b periodontitis"}) + "\n")
        out = tmp_path / "pred.jsonl"
        predict(trained_model, notes, out)
        (row,) = [json.loads(l) for l in out.read_text().splitlines()]
        assert row == {"id": "n1", "stage": "II", "grade": "B", "extent": "localized"}

    def test_unreadable_model_raises(self, tmp_path):
        notes = tmp_path / "notes.jsonl"
        notes.write_text(json.dumps({"id": "n1", "text": "x"}) + "\n")
        with pytest.raises(FileNotFoundError):
            predict(tmp_path / "missing-model", notes, tmp_path / "out.jsonl")
