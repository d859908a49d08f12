from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sentibench.text import (
    SlangLexicon,
    StopwordList,
    TextPreprocessor,
    case_fold,
    filter_chars,
    normalize_slang,
    preprocess,
    strip_noise,
)

GOLDEN = Path(__file__).parent / "data" / "preprocess_golden.tsv"
NO_STOPWORDS = StopwordList(frozenset())


def golden_rows():
    """Rows are ``stopwords<TAB>input<TAB>expected tokens``; stopwords is default or none."""
    rows = []
    for line in GOLDEN.read_text(encoding="utf-8").splitlines():
        mode, text, expected = line.split("\t")
        rows.append((mode, text, expected.split()))
    return rows


def run_golden():
    failures = []
    for mode, text, expected in golden_rows():
        got = list(preprocess(text, stopwords=NO_STOPWORDS if mode == "none" else None).tokens)
        if got != expected:
            failures.append((text, got, expected))
    return failures


def test_golden_file_has_thirty_rows():
    assert len(golden_rows()) == 30


@pytest.mark.parametrize("mode,text,expected", golden_rows())
def test_golden(mode, text, expected):
    stopwords = NO_STOPWORDS if mode == "none" else None
    assert list(preprocess(text, stopwords=stopwords).tokens) == expected


def test_case_fold():
    assert case_fold("Bagus") == "bagus"
    assert case_fold("") == ""
    assert case_fold("TOP Markotop!") == "top markotop!"
    assert case_fold("ÜBER İ") == "über i\u0307"


def test_strip_noise():
    assert strip_noise("bagus http://toko.id/x cek") == "bagus cek"
    assert strip_noise("<b>mantap</b>") == "mantap"
    assert strip_noise("barang sampai dengan aman") == "barang sampai dengan aman"
    assert strip_noise("lihat WWW.toko.id ya") == "lihat ya"


def test_filter_chars():
    assert filter_chars("Jelek!!! ukuran (tidak) pas") == "Jelek ukuran tidak pas"
    assert filter_chars("abc123") == "abc123"
    assert filter_chars("") == ""
    assert filter_chars("ok 😍", {"😍": "emopos"}) == "ok emopos"
    assert filter_chars("ok 😍", {}) == "ok"


def test_normalize_slang():
    lex = SlangLexicon.bundled()
    assert normalize_slang(["yg"], lex) == ["yang"]
    assert normalize_slang(["gk", "bgus"], lex) == ["tidak", "bagus"]
    assert normalize_slang(["xyzzy"], lex) == ["xyzzy"]


def test_bundled_lexicon_shape():
    lex = SlangLexicon.bundled()
    assert 150 <= len(lex) <= 250
    assert all(k == k.lower() and k != v for k, v in lex.entries.items())


def test_lexicon_rejects_self_map_and_chains():
    with pytest.raises(ValueError):
        SlangLexicon.parse("bagus\tbagus\n")
    with pytest.raises(ValueError):
        SlangLexicon.parse("bgs\tbgus\nbgus\tbagus\n")


def test_lexicon_parse_comments(tmp_path):
    p = tmp_path / "lex.tsv"
    p.write_text("# comment\nmksh\tterima kasih\n\n", encoding="utf-8")
    lex = SlangLexicon.from_file(p)
    assert normalize_slang(["mksh"], lex) == ["terima", "kasih"]


def test_negators_are_not_stopwords():
    sw = StopwordList.bundled()
    for word in ("tidak", "ga", "gak", "bukan", "belum", "kurang"):
        assert word not in sw


def test_preprocess_examples():
    toks = preprocess("Wah mantap banget nih ditipu! Terima kasih seller").tokens
    sw = StopwordList.bundled()
    assert toks and all(t == t.lower() and t.isalnum() and t not in sw for t in toks)
    assert preprocess("").tokens == ()
    assert list(preprocess("yg http://x.y BAGUS!!", stopwords=NO_STOPWORDS).tokens) == ["yang", "bagus"]


def test_transformer_interface():
    prep = TextPreprocessor().fit()
    assert prep.transform(["Bagus BGT!!", ""]) == [["bagus"], []]
    with pytest.raises(TypeError):
        prep.transform("single string")
    custom = TextPreprocessor(lexicon={"mntp": "mantap"}, stopwords=["barang"]).fit()
    assert custom.transform(["barang mntp"]) == [["mantap"]]


PIECES = ["yg", "gaada", "http://", "www.", "😍", "👎", "<b>", "</b>", "İ", "ß", "ǅ", "  ", "!!"]
text_strategy = st.lists(
    st.one_of(st.text(st.characters(codec="utf-8"), max_size=8), st.sampled_from(PIECES)),
    max_size=10,
).map("".join)


@settings(max_examples=1000, deadline=None)
@given(text_strategy)
def test_idempotence(text):
    first = preprocess(text).tokens
    assert preprocess(" ".join(first)).tokens == first


@settings(max_examples=300, deadline=None)
@given(text_strategy)
def test_output_alphabet(text):
    for tok in preprocess(text).tokens:
        assert tok.isalnum() and tok == tok.lower()
