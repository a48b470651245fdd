"""Rule-table grapheme/phoneme transliteration with longest-match tokenization.

A mapping table is an ordered list of (grapheme, phone) pairs. Tokenization is
greedy longest-match over the grapheme strings, so digraphs like "ng" or "rr"
win over their single-letter prefixes. The Kunwinjku table shipped with the
package is a bijection, which makes graphemes -> phones -> graphemes an exact
roundtrip; the opposite direction is not guaranteed (e.g. the phones [ɻ, r]
render as "r" + "rr" = "rrr", which re-tokenizes as [rr, r]).
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ParseError, UnknownGrapheme, UnknownPhone

# Token emitted between words when transliterating running text.
WORD_BOUNDARY = "#"


class OnUnknown(Enum):
    """Policy for characters no table rule matches."""

    ERROR = "error"
    SKIP = "skip"
    PASSTHROUGH = "passthrough"


@dataclass(frozen=True)
class G2PTable:
    """Ordered grapheme -> phone rules for one language.

    ``identity=True`` marks an open table where every character maps to
    itself (used for Mboshi, where the orthography is treated as a phonetic
    transcription and accented vowels are phones of their own).
    """

    pairs: tuple[tuple[str, str], ...]
    language_id: str = ""
    identity: bool = False

    _to_phone: dict[str, str] = field(init=False, repr=False, compare=False)
    _to_grapheme: dict[str, str] = field(init=False, repr=False, compare=False)
    _max_grapheme_len: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        to_phone: dict[str, str] = {}
        to_grapheme: dict[str, str] = {}
        for grapheme, phone in self.pairs:
            if not grapheme or not phone:
                raise ParseError(f"empty grapheme or phone in pair {(grapheme, phone)!r}")
            if WORD_BOUNDARY in (grapheme, phone):
                raise ParseError(f"{WORD_BOUNDARY!r} is reserved for word boundaries")
            if grapheme in to_phone:
                raise ParseError(f"duplicate grapheme {grapheme!r}")
            to_phone[grapheme] = phone
            # First rule wins for phones so reverse mapping stays deterministic
            # even for non-bijective tables.
            to_grapheme.setdefault(phone, grapheme)
        object.__setattr__(self, "_to_phone", to_phone)
        object.__setattr__(self, "_to_grapheme", to_grapheme)
        object.__setattr__(
            self, "_max_grapheme_len", max((len(g) for g, _ in self.pairs), default=1)
        )

    @property
    def phone_inventory(self) -> frozenset[str]:
        return frozenset(p for _, p in self.pairs)

    def is_bijective(self) -> bool:
        return len({p for _, p in self.pairs}) == len(self.pairs)


def identity_table(language_id: str = "identity") -> G2PTable:
    """Open table mapping every character to itself."""
    return G2PTable(pairs=(), language_id=language_id, identity=True)


def kunwinjku_table() -> G2PTable:
    """The Kunwinjku grapheme -> IPA table shipped with the package."""
    data = importlib.resources.files("sstd").joinpath("data/kunwinjku.tsv")
    with importlib.resources.as_file(data) as path:
        return load_table(path, language_id="kunwinjku")


def load_table(path: str | Path, language_id: str | None = None) -> G2PTable:
    """Load a two-column grapheme<TAB>phone TSV (UTF-8, '#' comments)."""
    path = Path(path)
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 2 or not cols[0] or not cols[1]:
                raise ParseError("expected grapheme<TAB>phone", str(path), lineno)
            pairs.append((cols[0], cols[1]))
    return G2PTable(pairs=tuple(pairs), language_id=language_id or path.stem)


def get_table(spec: str) -> G2PTable:
    """Resolve a table name: 'kunwinjku', 'identity', or a TSV path."""
    if spec == "kunwinjku":
        return kunwinjku_table()
    if spec == "identity":
        return identity_table()
    return load_table(spec)


def _parse_to_end(text: str, start: int, table: G2PTable, dead: set[int]) -> Optional[list[str]]:
    """Longest-match-first tokenization of text[start:]; None when impossible.

    `dead` memoizes positions with no parse so repeated calls stay linear.
    """
    n = len(text)
    if start == n:
        return []
    if start in dead:
        return None
    for width in range(min(table._max_grapheme_len, n - start), 0, -1):
        token = text[start : start + width]
        if token in table._to_phone:
            rest = _parse_to_end(text, start + width, table, dead)
            if rest is not None:
                return [token] + rest
    dead.add(start)
    return None


def tokenize_graphemes(
    text: str, table: G2PTable, on_unknown: OnUnknown = OnUnknown.ERROR
) -> list[str]:
    """Split one word into grapheme tokens by longest match, left to right.

    The longest rule wins at each position, backing off to shorter rules when
    the longer choice would strand the rest of the word: "rdjdje" tokenizes
    as [r, dj, dj, e], not [rd, <stuck>]. Any string built by concatenating
    table tokens therefore tokenizes cleanly. When no full parse exists, the
    scan falls back to plain maximal munch and treats the stuck character per
    `on_unknown`: ERROR raises UnknownGrapheme, SKIP drops it, PASSTHROUGH
    keeps it as a token (the mode that lets English loanwords run through the
    Kunwinjku table).
    """
    if table.identity:
        return list(text)
    tokens: list[str] = []
    dead: set[int] = set()
    i = 0
    n = len(text)
    while i < n:
        parsed = _parse_to_end(text, i, table, dead)
        if parsed is not None:
            tokens.extend(parsed)
            break
        match = None
        for width in range(min(table._max_grapheme_len, n - i), 0, -1):
            candidate = text[i : i + width]
            if candidate in table._to_phone:
                match = candidate
                break
        if match is not None:
            tokens.append(match)
            i += len(match)
        elif on_unknown is OnUnknown.SKIP:
            i += 1
        elif on_unknown is OnUnknown.PASSTHROUGH:
            tokens.append(text[i])
            i += 1
        else:
            raise UnknownGrapheme(text, i)
    return tokens


def to_phones(
    text: str, table: G2PTable, on_unknown: OnUnknown = OnUnknown.ERROR
) -> list[str]:
    """Transliterate one word into its phone sequence."""
    if table.identity:
        return list(text)
    phones = []
    for token in tokenize_graphemes(text, table, on_unknown):
        phone = table._to_phone.get(token)
        # PASSTHROUGH tokens are single characters outside the table; keep
        # them verbatim as phone symbols.
        phones.append(phone if phone is not None else token)
    return phones


def to_graphemes(phones: Sequence[str], table: G2PTable) -> str:
    """Render a phone sequence back to orthography."""
    if table.identity:
        return "".join(phones)
    out = []
    for symbol in phones:
        grapheme = table._to_grapheme.get(symbol)
        if grapheme is None:
            raise UnknownPhone(symbol)
        out.append(grapheme)
    return "".join(out)


def text_to_phones(
    text: str, table: G2PTable, on_unknown: OnUnknown = OnUnknown.ERROR
) -> list[str]:
    """Transliterate running text, keeping word boundaries as WORD_BOUNDARY tokens."""
    out: list[str] = []
    for word in text.split():
        if out:
            out.append(WORD_BOUNDARY)
        out.extend(to_phones(word, table, on_unknown))
    return out


def phones_to_text(phones: Iterable[str], table: G2PTable) -> str:
    """Inverse of text_to_phones: boundary tokens become spaces."""
    words: list[list[str]] = [[]]
    for symbol in phones:
        if symbol == WORD_BOUNDARY:
            words.append([])
        else:
            words[-1].append(symbol)
    return " ".join(to_graphemes(w, table) for w in words)
