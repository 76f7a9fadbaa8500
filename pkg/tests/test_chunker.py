import pytest
from hypothesis import given, settings, strategies as st

from kgrag.chunker import ChunkingConfig, ChunkingConfigError, chunk_document
from kgrag.ingest import Sentence


def make_sentences(counts, doc_id="doc"):
    return [
        Sentence(doc_id, i, " ".join(f"w{i}x{j}" for j in range(n)) + ".", n)
        for i, n in enumerate(counts)
    ]


def check_invariants(sentences, chunks, config):
    n = len(sentences)
    counts = [s.word_count for s in sentences]
    covered = set()
    for pos, c in enumerate(chunks):
        assert c.position_index == pos
        assert c.chunk_id == f"{c.doc_id}::c{pos}"
        first, last = c.sentence_span
        assert 0 <= first <= last < n
        assert c.word_count == len(c.text.split()) == sum(counts[first : last + 1])
        covered.update(range(first, last + 1))
        if pos < len(chunks) - 1:
            assert c.word_count >= config.target_words
    assert covered == set(range(n))
    for a, b in zip(chunks, chunks[1:]):
        (a0, a1), (b0, b1) = a.sentence_span, b.sentence_span
        assert b0 > a0 or b1 > a1
        assert b1 > a1  # at least one new sentence
        shared = sum(counts[max(a0, b0) : a1 + 1]) if b0 <= a1 else 0
        assert shared >= min(config.overlap_words, a.word_count)
    assert chunks[-1].sentence_span[1] == n - 1


def test_empty():
    assert chunk_document([], ChunkingConfig()) == []


def test_short_document_single_chunk():
    sents = make_sentences([40, 35, 25])
    chunks = chunk_document(sents, ChunkingConfig())
    assert len(chunks) == 1
    assert chunks[0].word_count == 100
    assert chunks[0].sentence_span == (0, 2)


def test_ten_by_fifty_hand_simulated():
    # Hand simulation, target 220 / overlap 40:
    #   c0: s0..s4 reaches 250 >= 220. Carry back from s4: 50 >= 40, so c1 starts at s4.
    #   c1: s4 + s5..s8 = 250. Carry s8 (50). c2: s8, s9 = 100, sentences exhausted.
    chunks = chunk_document(make_sentences([50] * 10), ChunkingConfig(220, 40))
    assert [c.sentence_span for c in chunks] == [(0, 4), (4, 8), (8, 9)]
    assert [c.word_count for c in chunks] == [250, 250, 100]
    assert [c.chunk_id for c in chunks] == ["doc::c0", "doc::c1", "doc::c2"]


def test_long_sentence_carry_still_advances():
    # c0 = s0+s1 = 230. s1 alone (30) is below the overlap, so the carry reaches
    # back to s0; the carried 230 already meets the target but c1 must still add
    # s2 -> (0, 2). Carry from s2: 10, then +30 = 40 -> c2 starts at s1 -> (1, 3).
    sents = make_sentences([200, 30, 10, 10])
    chunks = chunk_document(sents, ChunkingConfig(220, 40))
    assert [c.sentence_span for c in chunks] == [(0, 1), (0, 2), (1, 3)]
    check_invariants(sents, chunks, ChunkingConfig(220, 40))


def test_zero_overlap():
    chunks = chunk_document(make_sentences([5] * 6), ChunkingConfig(10, 0))
    assert [c.sentence_span for c in chunks] == [(0, 1), (2, 3), (4, 5)]


@pytest.mark.parametrize("target, overlap", [(40, 40), (10, 20), (10, -1)])
def test_invalid_config(target, overlap):
    with pytest.raises(ChunkingConfigError):
        ChunkingConfig(target, overlap)


@settings(max_examples=300)
@given(
    st.lists(st.integers(1, 120), min_size=1, max_size=40),
    st.integers(1, 300),
    st.data(),
)
def test_chunk_properties(counts, target, data):
    overlap = data.draw(st.integers(0, target - 1))
    config = ChunkingConfig(target, overlap)
    sents = make_sentences(counts)
    chunks = chunk_document(sents, config)
    check_invariants(sents, chunks, config)
    assert chunk_document(sents, config) == chunks
