from __future__ import annotations

import json
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import pytest

from perioseed.backend import BackendUnavailable, MockBackend, MockConfig, BackendSettings
from perioseed.config import ExperimentConfig, config_from_dict
from perioseed.corpus import load_gold
from perioseed.evaluation import evaluate_notes
from perioseed.pipeline import (
    CHECKPOINT_NAME,
    MANIFEST_NAME,
    cell_name,
    evaluate_files,
    run_grid,
    run_seed,
    run_split,
)


def _config(synth_corpus, out: Path, **overrides) -> ExperimentConfig:
    base = dict(
        corpus=str(synth_corpus["notes_path"]),
        out=str(out),
        rng_seed=7,
        sample_size=15,
        negative_ratio=Fraction(1, 4),
        generation_type="combined",
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def _tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*")) if p.is_file()
    }


class FlakyBackend:
    """Delegates to the mock, then goes down after a call budget."""

    def __init__(self, fail_after: int):
        self.inner = MockBackend(MockConfig())
        self.remaining = fail_after

    def complete(self, request):
        if self.remaining <= 0:
            raise BackendUnavailable("simulated outage")
        self.remaining -= 1
        return self.inner.complete(request)


class TestRunSeed:
    def test_outputs_and_manifest(self, synth_corpus, tmp_path):
        config = _config(synth_corpus, tmp_path / "run")
        result = run_seed(config)
        out = tmp_path / "run"
        for name in ("train.json", "dev.json", "test.json", "predictions.jsonl", MANIFEST_NAME):
            assert (out / name).exists()
        assert not (out / CHECKPOINT_NAME).exists()
        manifest = json.loads((out / MANIFEST_NAME).read_text())
        counts = manifest["counts"]
        assert counts["malformed_completions"] == 0
        assert counts["fields_rejected"] == 0
        assert counts["seed_sentences"] == len(result.seeds)
        sizes = counts["split"]
        assert sizes["train"] + sizes["dev"] + sizes["test"] == counts["seed_sentences"]
        assert manifest["config"]["sample_size"] == 15

    def test_byte_identical_across_runs(self, synth_corpus, tmp_path):
        a = _config(synth_corpus, tmp_path / "a")
        b = _config(synth_corpus, tmp_path / "b")
        run_seed(a)
        run_seed(b)
        ta, tb = _tree_bytes(tmp_path / "a"), _tree_bytes(tmp_path / "b")
        assert ta.keys() == tb.keys()
        assert ta == tb

    def test_predictions_match_gold_with_oracle_backend(self, synth_corpus, tmp_path):
        config = _config(synth_corpus, tmp_path / "run")
        result = run_seed(config)
        gold = load_gold(synth_corpus["gold_path"])
        report = evaluate_notes(gold, result.predictions)
        for cat in report.categories.values():
            assert cat.weighted_avg.f1 == 1.0

    def test_separate_mode_runs(self, synth_corpus, tmp_path):
        config = _config(synth_corpus, tmp_path / "run", generation_type="separate")
        result = run_seed(config)
        assert result.counts["malformed_completions"] == 0
        assert result.counts["seed_sentences"] > 0

    def test_abort_leaves_checkpoint_and_resume_completes(self, synth_corpus, tmp_path):
        out = tmp_path / "run"
        config = _config(synth_corpus, out)
        flaky = FlakyBackend(fail_after=40)
        with pytest.raises(BackendUnavailable):
            run_seed(config, backend=flaky)
        checkpoint = out / CHECKPOINT_NAME
        assert checkpoint.exists()
        completed_notes = [json.loads(l)["note_id"] for l in
                           checkpoint.read_text().splitlines() if l.strip()]
        assert 0 < len(completed_notes) < 200
        assert not (out / MANIFEST_NAME).exists()

        run_seed(config, backend=MockBackend(), resume=True)
        assert not checkpoint.exists()
        clean_dir = tmp_path / "clean"
        run_seed(_config(synth_corpus, clean_dir))
        assert _tree_bytes(out) == _tree_bytes(clean_dir)

    def test_requires_corpus_and_out(self, synth_corpus, tmp_path):
        with pytest.raises(ValueError, match="corpus"):
            run_seed(ExperimentConfig(out=str(tmp_path)))
        with pytest.raises(ValueError, match="out"):
            run_seed(ExperimentConfig(corpus=str(synth_corpus["notes_path"])))

    def test_concurrency_does_not_change_outputs(self, synth_corpus, tmp_path):
        serial = _config(synth_corpus, tmp_path / "serial",
                         backend=BackendSettings(concurrency=1))
        parallel = _config(synth_corpus, tmp_path / "parallel",
                           backend=BackendSettings(concurrency=8))
        run_seed(serial)
        run_seed(parallel)
        ts, tp = _tree_bytes(tmp_path / "serial"), _tree_bytes(tmp_path / "parallel")
        assert ts.keys() == tp.keys()
        for name in ts:
            if name != MANIFEST_NAME:  # manifest echoes the differing concurrency
                assert ts[name] == tp[name], name
        assert (json.loads(ts[MANIFEST_NAME])["counts"]
                == json.loads(tp[MANIFEST_NAME])["counts"])


@pytest.fixture(scope="module")
def small_grid(synth_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("grid")
    config = ExperimentConfig(
        corpus=str(synth_corpus["notes_path"]),
        gold=str(synth_corpus["gold_path"]),
        out=str(out),
        rng_seed=7,
    )
    config = replace(
        config, grid=replace(config.grid, sample_sizes=(15,),
                             generation_types=("combined",)),
    )
    summary = run_grid(config)
    return out, summary


class TestRunGrid:
    def test_cells_and_reports(self, small_grid):
        out, summary = small_grid
        assert [row["cell"] for row in summary["cells"]] == [
            "combined_s15_r1-3", "combined_s15_r1-4",
        ]
        for row in summary["cells"]:
            assert row["status"] == "ok"
            cell = out / row["cell"]
            for name in ("train.json", "predictions.jsonl", MANIFEST_NAME,
                         "report.json", "report.csv"):
                assert (cell / name).exists()
            assert row["stage_weighted_f1"] == 1.0
        assert (out / "summary.json").exists()
        assert (out / "summary.csv").exists()

    def test_default_grid_is_twelve_cells(self, synth_corpus):
        config = ExperimentConfig()
        cells = [
            cell_name(g, s, r)
            for g in config.grid.generation_types
            for s in config.grid.sample_sizes
            for r in config.grid.negative_ratios
        ]
        assert len(cells) == len(set(cells)) == 12

    def test_single_cell_grid_equals_seed_run(self, synth_corpus, tmp_path, small_grid):
        out, _ = small_grid
        seed_dir = tmp_path / "solo"
        config = _config(synth_corpus, seed_dir, negative_ratio=Fraction(1, 3))
        run_seed(config)
        cell_dir = out / "combined_s15_r1-3"
        seed_tree = _tree_bytes(seed_dir)
        cell_tree = {k: v for k, v in _tree_bytes(cell_dir).items()
                     if k in seed_tree}
        # manifests differ (gold path present in grid config echo); outputs match
        for name in ("train.json", "dev.json", "test.json", "predictions.jsonl"):
            assert seed_tree[name] == cell_tree[name]

    def test_resume_skips_cells_with_manifest(self, small_grid, synth_corpus):
        out, _ = small_grid
        marker_path = out / "combined_s15_r1-3" / MANIFEST_NAME
        marked = json.loads(marker_path.read_text())
        marked["marker"] = "untouched"
        marker_path.write_text(json.dumps(marked, indent=2) + "\n")
        config = ExperimentConfig(
            corpus=str(synth_corpus["notes_path"]),
            out=str(out),
            rng_seed=7,
        )
        config = replace(
            config, grid=replace(config.grid, sample_sizes=(15,),
                                 generation_types=("combined",)),
        )
        summary = run_grid(config, resume=True)
        assert all(row["status"] == "skipped" for row in summary["cells"])
        assert "untouched" in marker_path.read_text()

    def test_cell_failure_recorded_not_fatal(self, synth_corpus, tmp_path):
        config = ExperimentConfig(
            corpus=str(synth_corpus["notes_path"]),
            out=str(tmp_path / "grid"),
            rng_seed=7,
        )
        # sample size 5000 cannot be satisfied by the corpus -> cell fails
        config = replace(
            config,
            grid=replace(config.grid, sample_sizes=(15, 5000),
                         negative_ratios=(Fraction(1, 3),),
                         generation_types=("combined",)),
        )
        summary = run_grid(config)
        by_cell = {row["cell"]: row for row in summary["cells"]}
        assert by_cell["combined_s15_r1-3"]["status"] == "ok"
        assert by_cell["combined_s5000_r1-3"]["status"] == "failed"
        assert "error" in by_cell["combined_s5000_r1-3"]


class TestEvaluateFiles:
    def test_gold_equals_predictions(self, synth_corpus, tmp_path):
        pred_path = tmp_path / "pred.jsonl"
        rows = []
        for ann in synth_corpus["gold"]:
            rows.append(json.dumps({"id": ann.note_id, "stage": ann.stage,
                                    "grade": ann.grade, "extent": ann.extent}))
        pred_path.write_text("\n".join(rows) + "\n")
        evaluate_files(str(synth_corpus["gold_path"]), str(pred_path), str(tmp_path / "rep"))
        payload = json.loads((tmp_path / "rep" / "report.json").read_text())
        for category in payload["categories"].values():
            assert category["weighted_avg"]["f1"] == 1.0

    def test_schema_violation_names_line(self, synth_corpus, tmp_path):
        pred_path = tmp_path / "pred.jsonl"
        pred_path.write_text(json.dumps({"id": "n1", "stage": "bogus"}) + "\n")
        with pytest.raises(ValueError, match="line 1"):
            evaluate_files(str(synth_corpus["gold_path"]), str(pred_path), str(tmp_path / "r"))


class TestRunSplit:
    def test_splits_existing_seed_file(self, synth_corpus, tmp_path):
        run_dir = tmp_path / "run"
        run_seed(_config(synth_corpus, run_dir))
        merged = tmp_path / "merged.json"
        examples = []
        for name in ("train.json", "dev.json", "test.json"):
            examples.extend(json.loads((run_dir / name).read_text()))
        merged.write_text(json.dumps(examples))
        counts = run_split(str(merged), str(tmp_path / "resplit"), rng_seed=3)
        assert counts["total"] == len(examples)
        assert counts["train"] + counts["dev"] + counts["test"] == counts["total"]
        assert (tmp_path / "resplit" / "train.json").exists()


class TestConfigParsing:
    def test_round_trip_from_dict(self):
        config = config_from_dict({
            "corpus": "notes.jsonl",
            "rng_seed": 3,
            "sample_size": 50,
            "negative_ratio": "1/3",
            "generation_type": "separate",
            "backend": {"type": "http", "url": "http://localhost:8000/v1", "concurrency": 2},
            "mock": {"mode": "noisy", "p_hallucinate": 0.25},
        })
        assert config.sample_size == 50
        assert config.negative_ratio == Fraction(1, 3)
        assert config.backend.url == "http://localhost:8000/v1"
        assert config.backend.mock.p_hallucinate == 0.25
        echo = config.to_dict()
        assert echo["negative_ratio"] == "1/3"

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError, match="unknown"):
            config_from_dict({"corpse": "typo.jsonl"})

    def test_env_var_overrides_backend_url(self, monkeypatch):
        from perioseed.config import apply_env, ENV_BACKEND_URL

        monkeypatch.setenv(ENV_BACKEND_URL, "http://override:9999/v1")
        config = apply_env(config_from_dict({"backend": {"type": "http", "url": "http://x"}}))
        assert config.backend.url == "http://override:9999/v1"
