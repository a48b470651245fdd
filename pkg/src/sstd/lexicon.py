"""Lexicon entries and the phone-sequence trie shared by both matchers.

The trie is immutable after construction. A search owns a cheap TrieCursor
and advances it with step(); failing to advance is a normal result, not an
error. Final nodes carry the *set* of orthographies ending there so that
homophones are all reported on a match.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import DuplicateEntry, ParseError
from .g2p import G2PTable, to_phones


@dataclass
class LexiconEntry:
    orthography: str
    phones: tuple[str, ...]
    # (audio or feature-file reference, speaker id); used only by DTW queries.
    exemplars: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        if not self.orthography:
            raise ParseError("empty orthography in lexicon entry")
        if not self.phones:
            raise ParseError(f"entry {self.orthography!r} has no phones")
        self.phones = tuple(self.phones)

    @property
    def exemplar_speaker(self) -> Optional[str]:
        """Speaker of the first exemplar, if any."""
        for _, speaker in self.exemplars:
            if speaker:
                return speaker
        return None


def load_lexicon(path: str | Path, table: Optional[G2PTable] = None) -> list[LexiconEntry]:
    """Read a lexicon TSV: orthography [phones] [exemplar-path] [speaker].

    Phones are space-separated in column 2; when the column is empty they are
    derived from the orthography through `table`. Lines starting with '#' are
    comments. Duplicate orthographies are an error.
    """
    path = Path(path)
    entries: list[LexiconEntry] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = line.split("\t")
            word = cols[0].strip()
            if not word:
                raise ParseError("empty orthography column", str(path), lineno)
            if word in seen:
                raise DuplicateEntry(word)
            seen.add(word)
            phones_col = cols[1].strip() if len(cols) > 1 else ""
            if phones_col:
                phones = tuple(phones_col.split())
            elif table is not None:
                try:
                    phones = tuple(to_phones(word, table))
                except Exception as exc:
                    raise ParseError(f"g2p failed for {word!r}: {exc}", str(path), lineno)
            else:
                raise ParseError(
                    f"no phones for {word!r} and no g2p table given", str(path), lineno
                )
            exemplar_path = cols[2].strip() if len(cols) > 2 else ""
            speaker = cols[3].strip() if len(cols) > 3 else ""
            exemplars = [(exemplar_path, speaker)] if exemplar_path or speaker else []
            entries.append(LexiconEntry(word, phones, exemplars))
    return entries


def save_lexicon(entries: Iterable[LexiconEntry], path: str | Path) -> None:
    """Write entries in the TSV format accepted by load_lexicon."""
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            exemplar_path, speaker = (e.exemplars[0] if e.exemplars else ("", ""))
            fh.write(f"{e.orthography}\t{' '.join(e.phones)}\t{exemplar_path}\t{speaker}\n")


class TrieNode:
    __slots__ = ("children", "words")

    def __init__(self):
        self.children: dict[str, TrieNode] = {}
        self.words: set[str] = set()

    @property
    def is_word(self) -> bool:
        return bool(self.words)


class LexiconTrie:
    """Prefix tree over entry phone sequences; final nodes hold orthographies."""

    def __init__(self):
        self.root = TrieNode()

    def insert(self, phones: Sequence[str], word: str) -> None:
        node = self.root
        for phone in phones:
            node = node.children.setdefault(phone, TrieNode())
        node.words.add(word)

    def lookup(self, phones: Sequence[str]) -> frozenset[str]:
        """Orthographies stored exactly at this phone sequence (possibly empty)."""
        node = self.root
        for phone in phones:
            child = node.children.get(phone)
            if child is None:
                return frozenset()
            node = child
        return frozenset(node.words)

    def node_count(self) -> int:
        count = 0
        stack = [self.root]
        while stack:
            node = stack.pop()
            count += 1
            stack.extend(node.children.values())
        return count


@dataclass
class TrieCursor:
    """Position inside one trie during a single search."""

    node: TrieNode

    @property
    def is_word(self) -> bool:
        return self.node.is_word

    @property
    def words(self) -> frozenset[str]:
        return frozenset(self.node.words)


def build_trie(entries: Iterable[LexiconEntry]) -> LexiconTrie:
    trie = LexiconTrie()
    for entry in entries:
        trie.insert(entry.phones, entry.orthography)
    return trie


def cursor(trie: LexiconTrie) -> TrieCursor:
    return TrieCursor(trie.root)


def step(cur: TrieCursor, phone: str) -> Optional[TrieCursor]:
    """Advance by one phone; None means no transition (cursor unchanged)."""
    child = cur.node.children.get(phone)
    if child is None:
        return None
    return TrieCursor(child)
