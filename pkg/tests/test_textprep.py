import re

from hypothesis import given, settings
from hypothesis import strategies as st

from onionscope.core import DayKey, encode_onion_address
from onionscope.textprep import (
    extract_main_text,
    preprocess,
    process_page,
    split_sentences,
)

DAY = DayKey.from_string("2023/02/06")


def test_extract_simple_paragraph():
    assert extract_main_text("<html><body><p>hello</p></body></html>") == "hello"


def test_extract_script_only_body():
    assert extract_main_text("<html><body><script>alert(1)</script></body></html>") == ""


def test_extract_drops_style_comments_and_head():
    html = (
        "<html><head><title>t</title><style>p{}</style></head>"
        "<body><!-- note --><p>content here</p></body></html>"
    )
    assert extract_main_text(html) == "content here"


# hand-built page: expected output is the main section only
NAV_FOOTER_PAGE = """
<html><head><title>Shop</title></head><body>
<nav><a href="/">home</a> <a href="/cards">cards</a> <a href="/contact">contact</a></nav>
<div id="menu"><a href="/a">aaa</a> <a href="/b">bbb</a> <a href="/c">ccc</a></div>
<h1>Welcome to the market</h1>
<div id="main">
  <p>We sell digital goods for bitcoin. Every order ships within two days
  and support answers around the clock.</p>
  <p>Escrow keeps both sides honest. Payments confirm after three network
  confirmations and disputes are resolved by staff.</p>
</div>
<footer>copyright 2023 - <a href="/terms">terms</a></footer>
</body></html>
"""

NAV_FOOTER_EXPECTED = (
    "Welcome to the market\n"
    "We sell digital goods for bitcoin. Every order ships within two days "
    "and support answers around the clock.\n"
    "Escrow keeps both sides honest. Payments confirm after three network "
    "confirmations and disputes are resolved by staff."
)


def test_extract_keeps_main_section_drops_boilerplate():
    assert extract_main_text(NAV_FOOTER_PAGE) == NAV_FOOTER_EXPECTED


def test_extract_survives_malformed_markup():
    html = "<html><body><p>unclosed <div>deep <b>bold</p> stray</i> text"
    text = extract_main_text(html)
    assert "unclosed" in text or "deep" in text or "text" in text


def test_extract_never_leaves_tags():
    pages = [
        "<p>a &lt;b&gt; c</p>",
        "<p>x < y</p>",
        "broken <di",
        "<p>i <3 u</p>",
    ]
    for html in pages:
        out = extract_main_text(html)
        assert not re.search(r"<[A-Za-z]", out), (html, out)


def test_extract_link_heavy_block_loses():
    html = (
        "<body><div><a href='/1'>one</a> <a href='/2'>two</a> <a href='/3'>three</a></div>"
        "<p>this paragraph carries the actual readable content of the page</p></body>"
    )
    out = extract_main_text(html)
    assert "actual readable content" in out
    assert "one" not in out


def test_preprocess_removes_email():
    assert preprocess("contact admin@example.com now") == "contact now"


def test_preprocess_dedupes_contiguous_words():
    assert preprocess("buy buy buy cards") == "buy cards"


def test_preprocess_removes_onion_bitcoin_and_money():
    onion = encode_onion_address(b"\x09" * 32).hostname
    text = (
        f"pay at http://{onion}/shop or send to "
        "bc1qar0srrr7xfkvy5l643lydnw9re59gtzzwf5mdq quickly, "
        "price $1,200 total"
    )
    out = preprocess(text)
    assert ".onion" not in out
    assert "bc1q" not in out
    assert "1,200" not in out and "$" not in out
    assert out == "pay at or send to quickly, price total"


def test_preprocess_removes_legacy_bitcoin_address():
    out = preprocess("wallet 1A1zP1eP5QGefi2DMPTfTL5SLmv7DivfNa end")
    assert out == "wallet end"


def test_preprocess_removes_pgp_block():
    text = (
        "before\n-----BEGIN PGP PUBLIC KEY BLOCK-----\nVersion: 1\n"
        "mQENBF... gibberish\n-----END PGP PUBLIC KEY BLOCK-----\nafter"
    )
    assert preprocess(text) == "before after"


def test_preprocess_removes_currency_codes():
    assert preprocess("price 300 usd or 0.5 btc today") == "price or today"


def test_preprocess_collapses_character_runs():
    assert preprocess("looooooool spam") == "lool spam"


def test_preprocess_dedupes_contiguous_sentences():
    text = "Great deal here. Great deal here. Great deal here. Other text."
    assert preprocess(text) == "Great deal here. Other text."


def test_preprocess_strips_special_characters_keeps_scripts():
    out = preprocess("смотри сюда → люкс *** товар © 2023")
    assert out == "смотри сюда люкс товар 2023"


def test_preprocess_keeps_word_order():
    out = preprocess("alpha beta gamma delta")
    assert out == "alpha beta gamma delta"


def test_split_sentences_rule():
    assert split_sentences("One here. Two there. and no split. 3 starts") == [
        "One here.",
        "Two there. and no split.",
        "3 starts",
    ]


def test_preprocess_empty():
    assert preprocess("") == ""
    assert preprocess("   \n\t ") == ""


ONION = encode_onion_address(b"\x0a" * 32).hostname
NOISE_SAMPLES = [
    "",
    "plain words only",
    f"with {ONION} inline",
    "a $5 b 10 eur c",
    "crazy    spacing\n\nacross\tlines",
    "Sentence one. Sentence one. Sentence two! SENTENCE TWO! x",
    "aaaaaa bbbb ab",
    "mail me: a@b.co or ftp://x.y/z now",
    "-----BEGIN PGP MESSAGE-----\nxyz\n-----END PGP MESSAGE-----",
    "1BoatSLRHtKNngkdXEeobR76b53LETtpyT plus trailing words",
]


def test_preprocess_idempotent_on_samples():
    for sample in NOISE_SAMPLES:
        once = preprocess(sample)
        assert preprocess(once) == once, sample


_PIECES = list("abcDEF123 .,:;?!'\"()-$€£@/<>\n\t*&%текстαβ中文") + [
    "usd", "btc", ".onion", "http://", "-----BEGIN PGP", " ", "5 usd", "$ 3",
]


@given(st.lists(st.sampled_from(_PIECES), max_size=40).map("".join))
@settings(max_examples=300, deadline=None)
def test_preprocess_idempotent_property(text):
    once = preprocess(text)
    assert preprocess(once) == once


@given(st.lists(st.sampled_from("alpha beta gamma delta epsilon".split()), max_size=12))
@settings(max_examples=100)
def test_preprocess_preserves_relative_word_order(words):
    out = preprocess(" ".join(words)).split()
    # surviving words appear in input order (duplicates collapse)
    it = iter(words)
    for w in out:
        for x in it:
            if x == w:
                break
        else:
            raise AssertionError(f"{w} out of order: {words} -> {out}")


def test_process_page_flags_empty_extraction():
    doc = process_page("x", DAY, "<body><script>x</script></body>")
    assert doc.flags.get("empty_after_extraction")
    assert doc.clean_text == ""


def test_process_page_flags_empty_after_preprocessing():
    doc = process_page("x", DAY, "<body><p>admin@example.com</p></body>")
    assert doc.flags.get("empty_after_preprocessing")
    assert doc.clean_text == ""


def test_process_page_clean_has_no_addresses_urls_pgp():
    onion = encode_onion_address(b"\x0b" * 32).hostname
    html = f"<body><p>mirror http://{onion}/ and me@you.org -----BEGIN PGP KEY-----</p></body>"
    doc = process_page("x", DAY, html)
    assert not re.search(r"\.onion|https?://|BEGIN PGP|@", doc.clean_text)
