import json
import unicodedata

import pytest
from hypothesis import given, strategies as st

from kgrag.ingest import DuplicateDocumentError, clean_text, load_corpus, split_sentences


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("High power [12] leads to porosity.", "High power leads to porosity."),
        ("a\t\tb   c", "a b c"),
        ("", ""),
        ("pores [3, 4] and cracks [5-7].", "pores and cracks."),
        ("  line one  \n   line two\x07 ", "line one\nline two"),
        ("nested [1[2]] marker", "nested marker"),
        ("Smith (2019) reported pores.", "Smith (2019) reported pores."),
    ],
)
def test_clean_text(raw, expected):
    assert clean_text(raw) == expected


@given(st.text())
def test_clean_text_idempotent(raw):
    once = clean_text(raw)
    assert clean_text(once) == once


@given(st.text())
def test_clean_text_invariants(raw):
    out = clean_text(raw)
    assert "  " not in out
    assert all(ch == "\n" or unicodedata.category(ch) != "Cc" for ch in out)
    assert "\t" not in out and "\r" not in out


def test_split_two_sentences():
    sents = split_sentences("Porosity increases. Cracks form.", "d")
    assert [s.text for s in sents] == ["Porosity increases.", "Cracks form."]
    assert [s.index for s in sents] == [0, 1]
    assert [s.word_count for s in sents] == [2, 2]


def test_split_protects_abbreviations_and_decimals():
    assert len(split_sentences("Fig. 3 shows pores at 1.5 mm depth.", "d")) == 1
    assert len(split_sentences("As shown by Kim et al. Pores grow.", "d")) == 1
    assert len(split_sentences("Voids appear, e.g. Keyhole pores.", "d")) == 1
    assert len(split_sentences("Density was 99.5 percent. 3 samples failed.", "d")) == 2


def test_split_no_split_before_lowercase():
    assert len(split_sentences("It was hot. then it cooled.", "d")) == 1


def test_split_empty():
    assert split_sentences("", "d") == []
    assert split_sentences("   \n ", "d") == []


_word = st.text(alphabet="abcdefghijklmnopqrstuvwxyzABCDEFGHIJ0123456789.,!?()", min_size=1, max_size=8)


@given(st.lists(_word, max_size=60), st.lists(st.sampled_from([" ", "\n", "  "]), min_size=60, max_size=60))
def test_split_round_trip(words, seps):
    text = clean_text("".join(w + s for w, s in zip(words, seps)))
    sents = split_sentences(text, "d")
    assert " ".join(s.text for s in sents).split() == text.split()
    assert [s.index for s in sents] == list(range(len(sents)))
    for s in sents:
        assert s.word_count == len(s.text.split()) >= 1


def test_load_corpus_empty(tmp_path):
    assert load_corpus(tmp_path) == []


def test_load_corpus_orders_by_doc_id(tmp_path):
    (tmp_path / "b.txt").write_text("Second doc.", encoding="utf-8")
    (tmp_path / "a.txt").write_text("First [1] doc.", encoding="utf-8")
    (tmp_path / "notes.md").write_text("ignored", encoding="utf-8")
    docs = load_corpus(tmp_path)
    assert [d.doc_id for d in docs] == ["a", "b"]
    assert docs[0].cleaned_text == "First doc."
    assert docs[0].raw_text == "First [1] doc."


def test_load_corpus_jsonl_bad_line_reported(tmp_path):
    lines = [
        json.dumps({"doc_id": "x1", "text": "Pores form."}),
        json.dumps({"doc_id": "x2"}),
        "{not json",
        json.dumps({"doc_id": "x3", "text": "Cracks form."}),
    ]
    (tmp_path / "c.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    errors = []
    docs = load_corpus(tmp_path, errors)
    assert [d.doc_id for d in docs] == ["x1", "x3"]
    assert len(errors) == 2
    assert any("text" in e.message for e in errors)


def test_load_corpus_unreadable_file_collected(tmp_path):
    (tmp_path / "good.txt").write_text("Fine.", encoding="utf-8")
    (tmp_path / "bad.txt").write_bytes(b"\xff\xfe\xfa broken")
    errors = []
    docs = load_corpus(tmp_path, errors)
    assert [d.doc_id for d in docs] == ["good"]
    assert errors and "bad.txt" in errors[0].source


def test_load_corpus_duplicate_doc_id(tmp_path):
    (tmp_path / "a.txt").write_text("One.", encoding="utf-8")
    (tmp_path / "z.jsonl").write_text(json.dumps({"doc_id": "a", "text": "Two."}) + "\n", encoding="utf-8")
    with pytest.raises(DuplicateDocumentError) as exc:
        load_corpus(tmp_path)
    assert "a.txt" in str(exc.value) and "z.jsonl" in str(exc.value)


def test_load_corpus_missing_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_corpus(tmp_path / "nope")
