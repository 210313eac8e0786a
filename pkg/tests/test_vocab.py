from hypothesis import given, settings
from hypothesis import strategies as st

from typegtr.vocab import (
    RESERVED,
    UNK_GLYPH,
    Vocab,
    build_vocab,
    detokenize,
    lex,
    tokenize,
)


class TestLex:
    def test_identifiers_numbers_punctuation(self):
        assert lex("def f(x1): return x1+2.5") == [
            "def", " ", "f", "(", "x1", ")", ":", " ", "return", " ",
            "x1", "+", "2.5",
        ]

    def test_placeholder_is_single_token(self):
        assert lex("x: <TYPE> = 1") == ["x", ":", " ", "<TYPE>", " ", "=", " ", "1"]

    def test_whitespace_collapsed(self):
        assert lex("a    b") == ["a", " ", "b"]
        assert lex("a  \n  b") == ["a", "\n", "b"]

    def test_empty(self):
        assert lex("") == []


class TestBuildVocab:
    def test_reserved_first_and_ranked_by_count(self):
        vocab = build_vocab(["b b b a a c"])
        assert vocab.tokens[: len(RESERVED)] == RESERVED
        content = [t for t in vocab.tokens[len(RESERVED):] if t != " "]
        assert content == ["b", "a", "c"]

    def test_min_count_cutoff(self):
        vocab = build_vocab(["common common common rare"], min_count=2)
        assert vocab.id_of("common") != vocab.unk_id
        assert vocab.id_of("rare") == vocab.unk_id

    def test_max_size_cap(self):
        vocab = build_vocab(["a b c d e f g h"], max_size=len(RESERVED) + 3)
        assert len(vocab) == len(RESERVED) + 3

    def test_deterministic(self):
        texts = ["def f(): return 1", "def g(x): return x"]
        assert build_vocab(texts).tokens == build_vocab(texts).tokens

    def test_placeholder_never_counted_twice(self):
        vocab = build_vocab(["x: <TYPE> = 1"])
        assert vocab.tokens.count("<TYPE>") == 1


class TestTokenize:
    def test_empty_text_is_sentinels_only(self):
        vocab = build_vocab(["a"])
        assert tokenize("", vocab, 16) == [vocab.bos_id, vocab.eos_id]

    def test_framed_by_bos_eos(self):
        vocab = build_vocab(["a b"])
        ids = tokenize("a b", vocab, 16)
        assert ids[0] == vocab.bos_id
        assert ids[-1] == vocab.eos_id

    def test_masked_function_has_exactly_one_placeholder_id(self):
        vocab = build_vocab(["def f(key): return key"])
        ids = tokenize("def f(key: <TYPE>):", vocab, 64)
        assert ids.count(vocab.type_id) == 1

    def test_out_of_vocabulary_maps_to_unk(self):
        vocab = build_vocab(["known"])
        ids = tokenize("unknown", vocab, 8)
        assert ids == [vocab.bos_id, vocab.unk_id, vocab.eos_id]

    def test_truncation_window_keeps_placeholder(self):
        vocab = build_vocab(["w <TYPE>"])
        text = " ".join(["w"] * 300) + " <TYPE> " + " ".join(["w"] * 5)
        ids = tokenize(text, vocab, 32)
        assert len(ids) == 32
        assert vocab.type_id in ids
        assert ids[0] == vocab.bos_id and ids[-1] == vocab.eos_id

    def test_truncation_without_placeholder_keeps_head(self):
        vocab = build_vocab(["a b"])
        ids = tokenize(" ".join(["a"] * 100), vocab, 10)
        assert len(ids) == 10
        assert ids[1] == vocab.id_of("a")


class TestDetokenize:
    def test_code_text_round_trip_collapses_whitespace(self):
        text = "def f(key: <TYPE>):\n    return key"
        vocab = build_vocab([text])
        ids = tokenize(text, vocab, 64)
        assert detokenize(ids, vocab) == "def f(key: <TYPE>):\nreturn key"

    def test_type_text_round_trips_exactly(self):
        for text in ("Dict[str, int]", "Optional[str]", "IDMap"):
            vocab = build_vocab([text])
            assert detokenize(tokenize(text, vocab, 32), vocab) == text

    def test_unk_renders_as_glyph(self):
        vocab = build_vocab(["a"])
        ids = tokenize("zzz", vocab, 8)
        assert detokenize(ids, vocab) == UNK_GLYPH

    @given(st.text(alphabet="ab+-() :\n", max_size=60))
    @settings(max_examples=150, deadline=None)
    def test_retokenize_fixed_point(self, text):
        # detokenize(tokenize(t)) is a fixed point of the pair: one more
        # round trip changes nothing (whitespace is already collapsed).
        vocab = build_vocab([text, "ab a b"])
        once = detokenize(tokenize(text, vocab, 256), vocab)
        twice = detokenize(tokenize(once, vocab, 256), vocab)
        assert once == twice

    def test_vocab_requires_reserved_prefix(self):
        import pytest

        with pytest.raises(ValueError):
            Vocab(("a", "b"))
