from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from perioseed.corpus import (
    ClinicalNote,
    CorpusError,
    GoldAnnotation,
    load_gold,
    load_notes,
    save_gold,
    save_notes,
    segment_sentences,
)


def _write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestLoadNotes:
    def test_two_valid_lines_in_order(self, tmp_path):
        p = tmp_path / "notes.jsonl"
        _write_lines(p, [
            json.dumps({"id": "n1", "text": "first"}),
            json.dumps({"id": "n2", "text": "second"}),
        ])
        notes = load_notes(p)
        assert notes == [ClinicalNote("n1", "first"), ClinicalNote("n2", "second")]

    def test_empty_file(self, tmp_path):
        p = tmp_path / "notes.jsonl"
        p.write_text("", encoding="utf-8")
        assert load_notes(p) == []

    def test_missing_text_key_names_line(self, tmp_path):
        p = tmp_path / "notes.jsonl"
        _write_lines(p, [
            json.dumps({"id": "n1", "text": "a"}),
            json.dumps({"id": "n2", "text": "b"}),
            json.dumps({"id": "n3"}),
        ])
        with pytest.raises(CorpusError, match="line 3"):
            load_notes(p)

    def test_invalid_json_names_line(self, tmp_path):
        p = tmp_path / "notes.jsonl"
        _write_lines(p, [json.dumps({"id": "n1", "text": "a"}), "{not json"])
        with pytest.raises(CorpusError, match="line 2"):
            load_notes(p)

    def test_duplicate_id_names_id(self, tmp_path):
        p = tmp_path / "notes.jsonl"
        _write_lines(p, [
            json.dumps({"id": "n1", "text": "a"}),
            json.dumps({"id": "n1", "text": "b"}),
        ])
        with pytest.raises(CorpusError, match="'n1'"):
            load_notes(p)

    def test_crlf_collapses_to_newline(self, tmp_path):
        p = tmp_path / "notes.jsonl"
        _write_lines(p, [json.dumps({"id": "n1", "text": "a\r\nb\rc"})])
        (note,) = load_notes(p)
        assert note.text == "a\nbc"

    def test_save_load_round_trip(self, tmp_path):
        notes = [ClinicalNote("n1", "line one\nline two"), ClinicalNote("n2", "x é")]
        p = tmp_path / "notes.jsonl"
        save_notes(notes, p)
        assert load_notes(p) == notes


class TestSegmentSentences:
    def test_two_lines(self):
        got = segment_sentences(ClinicalNote("n", "a\nb"))
        assert [s.text for s in got] == ["a", "b"]
        assert [s.index for s in got] == [0, 1]
        assert all(s.note_id == "n" for s in got)

    def test_empty_segment_retained(self):
        got = segment_sentences(ClinicalNote("n", "a\n\nb"))
        assert [s.text for s in got] == ["a", "", "b"]

    def test_single_sentence_without_newline(self):
        got = segment_sentences(ClinicalNote("n", "d: localized stage ii grade b periodontitis"))
        assert len(got) == 1
        assert got[0].text == "d: localized stage ii grade b periodontitis"

    @given(st.text(alphabet=st.characters(blacklist_characters="\r"), max_size=300))
    def test_rejoin_is_lossless(self, text):
        note = ClinicalNote("n", text)
        parts = segment_sentences(note)
        assert "\n".join(s.text for s in parts) == note.text
        assert [s.index for s in parts] == list(range(len(parts)))


class TestLoadGold:
    def test_full_annotation(self, tmp_path):
        p = tmp_path / "gold.jsonl"
        _write_lines(p, [json.dumps(
            {"id": "n1", "stage": "III", "grade": "B", "extent": "generalized"})])
        assert load_gold(p) == [GoldAnnotation("n1", stage="III", grade="B", extent="generalized")]

    def test_null_field_absent(self, tmp_path):
        p = tmp_path / "gold.jsonl"
        _write_lines(p, [json.dumps({"id": "n2", "stage": None, "grade": "A", "extent": None})])
        (ann,) = load_gold(p)
        assert ann.stage is None and ann.grade == "A" and ann.extent is None

    def test_out_of_vocabulary_names_id_and_field(self, tmp_path):
        p = tmp_path / "gold.jsonl"
        _write_lines(p, [json.dumps({"id": "n3", "stage": "V", "grade": None, "extent": None})])
        with pytest.raises(CorpusError) as err:
            load_gold(p)
        assert "'n3'" in str(err.value) and "stage" in str(err.value)

    def test_duplicate_id_rejected(self, tmp_path):
        p = tmp_path / "gold.jsonl"
        _write_lines(p, [
            json.dumps({"id": "n1", "stage": None, "grade": None, "extent": None}),
            json.dumps({"id": "n1", "stage": None, "grade": None, "extent": None}),
        ])
        with pytest.raises(CorpusError, match="'n1'"):
            load_gold(p)

    def test_unknown_note_id_rejected_when_ids_given(self, tmp_path):
        p = tmp_path / "gold.jsonl"
        _write_lines(p, [json.dumps({"id": "ghost", "stage": None, "grade": None, "extent": None})])
        with pytest.raises(CorpusError, match="'ghost'"):
            load_gold(p, known_ids={"n1"})

    def test_save_load_round_trip(self, tmp_path):
        gold = [
            GoldAnnotation("n1", stage="I", grade=None, extent="localized"),
            GoldAnnotation("n2"),
        ]
        p = tmp_path / "gold.jsonl"
        save_gold(gold, p)
        assert load_gold(p) == gold
