"""Raw HTML to cleaned, compacted text.

Two passes: main-content extraction over a leniently parsed tag tree (dark
sites routinely break HTML rules, so nothing here may throw), then a noise
scrub that strips addresses, keys, money and markup remnants and collapses
duplicated characters, words and sentences.  preprocess() is idempotent.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from html.parser import HTMLParser

from .core import DayKey

# subtrees that never contribute visible main text
DROP_TAGS = {
    "script", "style", "head", "title", "meta", "link", "noscript",
    "template", "svg", "iframe", "object", "embed", "canvas",
    "nav", "footer", "aside", "form", "button", "select", "option", "input",
    "label",
}
VOID_TAGS = {
    "br", "hr", "img", "area", "base", "col", "source", "track", "wbr",
    "meta", "link", "input",
}
BLOCK_TAGS = {
    "p", "div", "section", "article", "main", "li", "ul", "ol", "dl", "dt",
    "dd", "table", "tbody", "thead", "tr", "td", "th", "blockquote", "pre",
    "h1", "h2", "h3", "h4", "h5", "h6", "header", "center", "figure",
    "figcaption", "body", "html",
}
HEADING_TAGS = {"h1", "h2", "h3", "h4", "h5", "h6"}

MIN_KEEP_RATIO = 0.25  # blocks scoring below best*ratio end the main region
MAX_LINK_DENSITY = 0.5


@dataclass
class PageDocument:
    """One page as it moves through the batch; clean_text feeds dedup/topics."""

    address: str
    day: DayKey
    raw_html: str
    main_text: str
    clean_text: str
    flags: dict = field(default_factory=dict)


class _Node:
    __slots__ = ("tag", "parent", "children")

    def __init__(self, tag: str, parent: "_Node | None"):
        self.tag = tag
        self.parent = parent
        self.children: list[object] = []  # _Node or str


class _TreeBuilder(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.root = _Node("#root", None)
        self.stack = [self.root]

    def handle_starttag(self, tag, attrs):
        if tag in VOID_TAGS:
            if tag == "br":
                self.stack[-1].children.append("\n")
            return
        node = _Node(tag, self.stack[-1])
        self.stack[-1].children.append(node)
        self.stack.append(node)

    def handle_endtag(self, tag):
        for i in range(len(self.stack) - 1, 0, -1):
            if self.stack[i].tag == tag:
                del self.stack[i:]
                return
        # stray end tag: ignore

    def handle_data(self, data):
        if data:
            self.stack[-1].children.append(data)


def _parse_tree(html: str) -> _Node:
    builder = _TreeBuilder()
    try:
        builder.feed(html)
        builder.close()
    except Exception:
        pass
    return builder.root


def _node_text(node: _Node) -> str:
    parts = []
    for child in node.children:
        if isinstance(child, str):
            parts.append(child)
        elif child.tag not in DROP_TAGS:
            parts.append(_node_text(child))
    return "".join(parts)


def _count_tags(node: _Node) -> int:
    count = 1
    for child in node.children:
        if isinstance(child, _Node):
            count += _count_tags(child)
    return count


def _link_text_len(node: _Node) -> int:
    total = 0
    for child in node.children:
        if isinstance(child, _Node):
            if child.tag == "a":
                total += len(_node_text(child).strip())
            else:
                total += _link_text_len(child)
    return total


def _collect_blocks(node: _Node, out: list) -> None:
    """Leaf blocks in document order: block elements with no block children."""
    for child in node.children:
        if not isinstance(child, _Node) or child.tag in DROP_TAGS:
            continue
        has_block_child = any(
            isinstance(g, _Node) and g.tag in BLOCK_TAGS and g.tag not in DROP_TAGS
            for g in child.children
        )
        if child.tag in BLOCK_TAGS and not has_block_child:
            out.append(child)
        else:
            _collect_blocks(child, out)


def _score_block(node: _Node) -> float:
    text = " ".join(_node_text(node).split())
    if not text:
        return 0.0
    link_density = _link_text_len(node) / max(1, len(text))
    if link_density >= MAX_LINK_DENSITY:
        return 0.0
    return len(text) / _count_tags(node)


_RESIDUAL_TAG_RE = re.compile(r"<[^>]*>")
_LT_LETTER_RE = re.compile(r"<(?=[A-Za-z])")


def _strip_residual_markup(text: str) -> str:
    text = _RESIDUAL_TAG_RE.sub(" ", text)
    return _LT_LETTER_RE.sub("< ", text)


def extract_main_text(html: str) -> str:
    """Visible main-content text, block boundaries as newlines.

    Blocks are scored by text density (text length over tag count) with a
    link-density cutoff; the highest-scoring contiguous run of blocks is kept,
    plus adjacent headings.  Falls back to all visible text when no block
    stands out, and to tag-stripped text if parsing breaks entirely.
    """
    if not html:
        return ""
    try:
        root = _parse_tree(html)
        blocks: list[_Node] = []
        _collect_blocks(root, blocks)
        texts = [" ".join(_node_text(b).split()) for b in blocks]
        scores = [_score_block(b) for b in blocks]
        if not blocks or max(scores, default=0.0) <= 0.0:
            fallback = _node_text(root)
            return _strip_residual_markup(" ".join(fallback.split())).strip()

        best = max(range(len(blocks)), key=lambda i: scores[i])
        threshold = scores[best] * MIN_KEEP_RATIO
        lo = hi = best
        while lo > 0 and (
            scores[lo - 1] >= threshold or blocks[lo - 1].tag in HEADING_TAGS
        ) and texts[lo - 1]:
            lo -= 1
        while hi + 1 < len(blocks) and (
            scores[hi + 1] >= threshold or blocks[hi + 1].tag in HEADING_TAGS
        ) and texts[hi + 1]:
            hi += 1
        # a heading immediately above the region belongs to it
        if lo > 0 and blocks[lo - 1].tag in HEADING_TAGS and texts[lo - 1]:
            lo -= 1
        kept = [texts[i] for i in range(lo, hi + 1) if texts[i]]
        return _strip_residual_markup("\n".join(kept)).strip()
    except Exception:
        return _strip_residual_markup(" ".join(html.split())).strip()


# --- preprocessing ----------------------------------------------------------

_PGP_BLOCK_RE = re.compile(
    r"-----BEGIN PGP[^\n]*-----.*?-----END PGP[^\n]*-----", re.DOTALL
)
_PGP_DANGLING_RE = re.compile(r"-----BEGIN PGP.*\Z", re.DOTALL)
_URL_RE = re.compile(r"(?:https?|ftp)://\S+", re.IGNORECASE)
_ONION_RE = re.compile(r"\S+\.onion\S*", re.IGNORECASE)
_EMAIL_RE = re.compile(r"\S+@\S+\.\S+")
_BTC_LEGACY_RE = re.compile(r"\b[13][a-km-zA-HJ-NP-Z1-9]{25,34}\b")
_BTC_BECH32_RE = re.compile(r"\bbc1[a-z0-9]{11,71}\b")
_MONEY_SYMBOL_RE = re.compile(r"[$€£]\s?\d[\d.,]*")
_MONEY_CODE_RE = re.compile(r"\d[\d.,]*\s?(?:usd|eur|btc|xmr)\b", re.IGNORECASE)
_CHAR_RUN_RE = re.compile(r"(.)\1{2,}")

_ALLOWED_PUNCT = set(".,:;?!'\"()-")


def _remove_entities(text: str) -> str:
    for pattern in (
        _URL_RE,
        _ONION_RE,
        _EMAIL_RE,
        _BTC_LEGACY_RE,
        _BTC_BECH32_RE,
        _MONEY_SYMBOL_RE,
        _MONEY_CODE_RE,
    ):
        text = pattern.sub(" ", text)
    return text


def _scrub_chars(text: str) -> str:
    # keep letters of any script, digits, basic punctuation and spaces
    return "".join(
        ch if (ch == " " or ch.isalpha() or ch.isdigit() or ch in _ALLOWED_PUNCT) else " "
        for ch in text
    )


def split_sentences(text: str) -> list[str]:
    """Rule-based split: .?! followed by whitespace and a capital or digit."""
    sentences = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] in ".?!":
            j = i + 1
            while j < n and text[j] in ".?!":
                j += 1
            k = j
            while k < n and text[k].isspace():
                k += 1
            if k > j and k < n and (text[k].isupper() or text[k].isdigit()):
                sentences.append(text[start:j])
                start = k
                i = k
                continue
            i = j
        else:
            i += 1
    tail = text[start:]
    if tail.strip():
        sentences.append(tail)
    return [s for s in (x.strip() for x in sentences) if s]


def _dedupe_words(sentence: str) -> str:
    out: list[str] = []
    for token in sentence.split():
        if out and token.casefold() == out[-1].casefold():
            continue
        out.append(token)
    return " ".join(out)


def preprocess(text: str) -> str:
    """Noise removal over extracted text; running it twice changes nothing."""
    if not text:
        return ""
    text = _PGP_BLOCK_RE.sub(" ", text)
    text = _PGP_DANGLING_RE.sub(" ", text)
    text = _RESIDUAL_TAG_RE.sub(" ", text)

    # removals can expose new matches (a scrubbed char splitting a token, a
    # collapsed gap joining one), so iterate this phase to a fixpoint
    for _ in range(10):
        before = text
        text = _remove_entities(text)
        text = _scrub_chars(text)
        text = re.sub(r"\s+", " ", text)
        text = _CHAR_RUN_RE.sub(r"\1\1", text)
        if text == before:
            break

    cleaned: list[str] = []
    for sentence in split_sentences(text):
        sentence = _dedupe_words(sentence)
        if cleaned and sentence.casefold() == cleaned[-1].casefold():
            continue
        if sentence:
            cleaned.append(sentence)
    return " ".join(cleaned)


def process_page(address: str, day: DayKey, raw_html: str) -> PageDocument:
    """extract + preprocess with the empty-document flags the batch reports."""
    main_text = extract_main_text(raw_html)
    clean_text = preprocess(main_text)
    flags = {}
    if not main_text.strip():
        flags["empty_after_extraction"] = True
    elif not clean_text.strip():
        flags["empty_after_preprocessing"] = True
    return PageDocument(
        address=address,
        day=day,
        raw_html=raw_html,
        main_text=main_text,
        clean_text=clean_text,
        flags=flags,
    )
