import json

from kgrag.chunker import Chunk
from kgrag.extract import (
    ALLOWED_PAIRINGS,
    ChunkRecord,
    build_chunk_record,
    dump_record_line,
    extract_relations,
)
from kgrag.ingest import Sentence, split_sentences
from kgrag.vocabulary import match_terms


def triples_of(text, vocab, index=0):
    s = Sentence("d", index, text, len(text.split()))
    return extract_relations(s, match_terms(s, "d::c0", vocab))


def spo(triples):
    return [(t.subject[1], t.predicate, t.object[1]) for t in triples]


def test_declarative_keyhole_sentence(vocab):
    (t,) = triples_of("High laser power leads to keyhole porosity.", vocab)
    assert (t.subject, t.predicate, t.object) == (
        ("parameter", "laser power"), "causes", ("defect", "keyhole porosity"))
    assert t.pattern_id == "causes:leads to"
    assert t.chunk_id == "d::c0"


def test_no_cue(vocab):
    assert triples_of("Porosity was measured at three locations.", vocab) == []


def test_negation_drops_triple(vocab):
    assert triples_of("Hatch spacing does not lead to cracking.", vocab) == []
    # negation more than three words before the cue is ignored
    assert spo(triples_of("No doubt high hatch spacing really leads to lack of fusion.", vocab)) == [
        ("hatch spacing", "causes", "lack of fusion")
    ]


def test_predicate_families(vocab):
    assert spo(triples_of("Laser power increases recoil pressure.", vocab)) == [
        ("laser power", "increases", "recoil pressure")]
    assert spo(triples_of("Energy density reduces porosity.", vocab)) == [
        ("energy density", "decreases", "porosity")]
    assert spo(triples_of("Scan speed affects balling.", vocab)) == [("scan speed", "influences", "balling")]


def test_disallowed_pairing_dropped(vocab):
    assert triples_of("Recoil pressure promotes spatter.", vocab) == []  # mechanism -> mechanism
    assert triples_of("Residual stress causes cracking.", vocab) == []  # defect -> defect
    assert triples_of("Porosity causes laser power drift.", vocab) == []  # defect -> parameter


def test_nearest_mentions_and_multiple_cues(vocab):
    text = "Laser power causes keyhole instability and keyhole instability leads to porosity."
    assert spo(triples_of(text, vocab)) == [
        ("laser power", "causes", "keyhole instability"),
        ("keyhole instability", "causes", "porosity"),
    ]


def test_duplicate_within_sentence_deduplicated(vocab):
    text = "Laser power causes keyhole porosity, and laser power induces keyhole porosity."
    assert spo(triples_of(text, vocab)) == [("laser power", "causes", "keyhole porosity")]


def test_pairings_always_allowed(fixture_records):
    for r in fixture_records:
        for t in r.triples:
            assert (t.subject[0], t.object[0]) in ALLOWED_PAIRINGS
            assert t.subject != t.object


def _chunk(text, sentences):
    return Chunk("d::c0", "d", 0, text, len(text.split()), (0, len(sentences) - 1))


def test_record_empty(vocab):
    sents = split_sentences("The specimens were polished.", "d")
    rec = build_chunk_record(_chunk(sents[0].text, sents), sents, vocab)
    assert rec.mentions == () and rec.triples == ()
    assert rec.defect_terms == rec.parameters == rec.mechanisms == rec.consequences == ()


def test_record_single_triple(vocab):
    text = "High laser power leads to keyhole porosity."
    sents = split_sentences(text, "d")
    rec = build_chunk_record(_chunk(text, sents), sents, vocab)
    assert len(rec.triples) == 1
    terms = {m.term for m in rec.mentions}
    assert rec.triples[0].subject in terms and rec.triples[0].object in terms
    assert rec.parameters == ("laser power",) and rec.defect_terms == ("keyhole porosity",)


def test_record_two_sentences_same_triple(vocab):
    # Manual pattern application: each sentence has laser power | leads to | keyhole porosity.
    text = "High laser power leads to keyhole porosity. Again, laser power leads to keyhole porosity."
    sents = split_sentences(text, "d")
    assert len(sents) == 2
    rec = build_chunk_record(_chunk(text, sents), sents, vocab)
    assert spo(rec.triples) == [("laser power", "causes", "keyhole porosity")] * 2
    assert [t.sentence_index for t in rec.triples] == [0, 1]


def test_record_closure_and_category_lists(fixture_records):
    for r in fixture_records:
        terms = {m.term for m in r.mentions}
        for t in r.triples:
            assert t.subject in terms and t.object in terms
            assert t.chunk_id == r.chunk_id
        for cat in ("defect", "parameter", "mechanism", "consequence"):
            expected = []
            for m in r.mentions:
                if m.category == cat and m.canonical not in expected:
                    expected.append(m.canonical)
            assert list(r.labels(cat)) == expected


def test_record_json_round_trip(fixture_records):
    for r in fixture_records:
        line = dump_record_line(r)
        assert ChunkRecord.from_dict(json.loads(line)) == r
        assert dump_record_line(ChunkRecord.from_dict(json.loads(line))) == line
