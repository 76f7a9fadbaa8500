import json

import pytest
from hypothesis import given, strategies as st

from kgrag.ingest import Sentence
from kgrag.vocabulary import CATEGORIES, Vocabulary, VocabularyError, load_vocab, match_terms, normalize_term


def sent(text, index=0):
    return Sentence("d", index, text, len(text.split()))


def test_default_vocabulary(vocab):
    assert set(vocab.entries) == set(CATEGORIES)
    assert len(vocab.canonicals()) >= 17
    for term in ("laser power", "scan speed", "hatch spacing", "layer thickness"):
        assert vocab.category_of(term) == "parameter"
    for term in ("keyhole instability", "vapor depression", "recoil pressure"):
        assert vocab.category_of(term) == "mechanism"
    for term in ("porosity", "keyhole porosity", "lack of fusion", "cracking", "balling", "residual stress"):
        assert vocab.category_of(term) == "defect"


def test_duplicate_canonical_across_categories(tmp_path):
    path = tmp_path / "v.json"
    path.write_text(json.dumps({"defect": {"porosity": []}, "mechanism": {"porosity": []}}))
    with pytest.raises(VocabularyError, match="porosity"):
        load_vocab(path)


def test_synonym_collision():
    with pytest.raises(VocabularyError, match="pores"):
        Vocabulary.from_mapping({"defect": {"porosity": ["pores"], "keyhole porosity": ["pores"]}})


def test_malformed_json(tmp_path):
    path = tmp_path / "v.json"
    path.write_text("{oops")
    with pytest.raises(VocabularyError, match="line 1"):
        load_vocab(path)


def test_empty_vocabulary_matches_nothing():
    v = Vocabulary.from_mapping({})
    assert match_terms(sent("laser power causes porosity"), "c", v) == []
    assert normalize_term("porosity", v) is None


def test_unknown_category_rejected():
    with pytest.raises(VocabularyError):
        Vocabulary.from_mapping({"material": {"ti-6al-4v": []}})


def test_normalize_term():
    v = Vocabulary.from_mapping({"defect": {"lack of fusion": ["LoF"]}, "parameter": {"laser power": []}})
    assert normalize_term("Laser Power", v) == ("parameter", "laser power")
    assert normalize_term("  laser \t power ", v) == ("parameter", "laser power")
    assert normalize_term("LoF", v) == ("defect", "lack of fusion")
    assert normalize_term("banana", v) is None


def test_match_terms_basic(vocab):
    mentions = match_terms(sent("High laser power causes keyhole porosity."), "c0", vocab)
    assert [(m.category, m.canonical) for m in mentions] == [
        ("parameter", "laser power"),
        ("defect", "keyhole porosity"),
    ]
    text = "High laser power causes keyhole porosity."
    for m in mentions:
        assert text[m.char_span[0] : m.char_span[1]] == m.surface


def test_longest_match_wins(vocab):
    mentions = match_terms(sent("keyhole porosity"), "c0", vocab)
    assert len(mentions) == 1
    assert mentions[0].canonical == "keyhole porosity"


def test_word_boundaries(vocab):
    assert match_terms(sent("Nonporosity spatterless ballingx"), "c0", vocab) == []


def test_no_terms(vocab):
    assert match_terms(sent("The specimens were polished."), "c0", vocab) == []


def test_synonym_maps_to_canonical(vocab):
    (m,) = match_terms(sent("Scanning velocity matters"), "c0", vocab)
    assert (m.category, m.canonical, m.surface) == ("parameter", "scan speed", "Scanning velocity")


_pieces = st.sampled_from(
    ["laser power", "keyhole porosity", "porosity", "lack of fusion", "lof", "cracks", "the", "melt",
     "pool", "recoil pressure", "x", "keyhole", "spatter", "fatigue", "crack initiation", ",", "."]
)


@given(st.lists(_pieces, max_size=20), st.data())
def test_mentions_valid_nonoverlapping_and_case_invariant(vocab, pieces, data):
    text = " ".join(pieces)
    flips = data.draw(st.lists(st.booleans(), min_size=len(text), max_size=len(text)))
    mixed = "".join(ch.upper() if f else ch for ch, f in zip(text, flips))
    base = match_terms(sent(text), "c", vocab)
    other = match_terms(sent(mixed), "c", vocab)
    assert [(m.category, m.canonical, m.char_span) for m in base] == [
        (m.category, m.canonical, m.char_span) for m in other
    ]
    for a, b in zip(base, base[1:]):
        assert a.char_span[1] <= b.char_span[0]
    for m in other:
        assert vocab.category_of(m.canonical) == m.category
        assert mixed[m.char_span[0] : m.char_span[1]].lower() == m.surface.lower()
