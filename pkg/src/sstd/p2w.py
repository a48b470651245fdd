"""Longest-string matching of lexicon words inside 1-best phone streams.

The recognizer's 1-best output is an unsegmented symbol stream; the scan
walks a trie cursor forward from each position and matches the longest
lexicon word starting there, then resumes after the matched word. An
all-occurrences mode (overlaps allowed) exists for analysis.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import ParseError
from .g2p import G2PTable, OnUnknown, text_to_phones, WORD_BOUNDARY
from .lexicon import LexiconTrie, cursor, step


@dataclass
class PhoneStream:
    utterance_id: str
    phones: tuple[str, ...]
    speaker: str = ""
    # Optional (start_s, end_s) per symbol, parallel to phones.
    times: Optional[tuple[tuple[float, float], ...]] = None

    def __post_init__(self):
        self.phones = tuple(self.phones)
        if self.times is not None and len(self.times) != len(self.phones):
            raise ParseError(
                f"{self.utterance_id}: {len(self.times)} time spans for "
                f"{len(self.phones)} symbols"
            )


@dataclass(frozen=True)
class StreamMatch:
    word: str
    start_index: int
    end_index: int  # exclusive
    utterance_id: str

    def time_span(self, stream: PhoneStream, symbol_duration: float = 1.0) -> tuple[float, float]:
        """Time span of this match; symbol indices scaled by `symbol_duration`
        when the stream carries no per-symbol times."""
        if stream.times is not None:
            return (stream.times[self.start_index][0], stream.times[self.end_index - 1][1])
        return (self.start_index * symbol_duration, self.end_index * symbol_duration)


def longest_match_scan(
    stream: PhoneStream, trie: LexiconTrie, allow_overlaps: bool = False
) -> list[StreamMatch]:
    """Scan the stream left to right, matching the longest word at each position.

    Default semantics consume matched symbols (matches never overlap). With
    allow_overlaps, every word starting at every position is reported and the
    scan always advances by one symbol.
    """
    matches: list[StreamMatch] = []
    phones = stream.phones
    n = len(phones)
    pos = 0
    while pos < n:
        cur = cursor(trie)
        last_final: Optional[tuple[int, frozenset[str]]] = None
        j = pos
        while j < n:
            nxt = step(cur, phones[j])
            if nxt is None:
                break
            cur = nxt
            j += 1
            if cur.is_word:
                if allow_overlaps:
                    for word in sorted(cur.words):
                        matches.append(StreamMatch(word, pos, j, stream.utterance_id))
                else:
                    last_final = (j, cur.words)
        if not allow_overlaps and last_final is not None:
            end, words = last_final
            for word in sorted(words):
                matches.append(StreamMatch(word, pos, end, stream.utterance_id))
            pos = end
        else:
            pos += 1
    return matches


def stream_from_text(
    transcript: str,
    table: G2PTable,
    utterance_id: str = "",
    speaker: str = "",
    on_unknown: OnUnknown = OnUnknown.ERROR,
) -> PhoneStream:
    """Build an unsegmented stream from orthographic text (boundaries dropped)."""
    phones = [p for p in text_to_phones(transcript, table, on_unknown) if p != WORD_BOUNDARY]
    return PhoneStream(utterance_id=utterance_id, phones=tuple(phones), speaker=speaker)


def load_streams(path: str | Path) -> list[PhoneStream]:
    """Read a stream file: one utterance per line,
    utterance_id<TAB>speaker<TAB>space-separated phones."""
    path = Path(path)
    streams = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) < 3:
                raise ParseError(
                    "expected utterance_id<TAB>speaker<TAB>phones", str(path), lineno
                )
            streams.append(
                PhoneStream(
                    utterance_id=cols[0],
                    speaker=cols[1],
                    phones=tuple(cols[2].split()),
                )
            )
    return streams


def save_streams(streams: list[PhoneStream], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in streams:
            fh.write(f"{s.utterance_id}\t{s.speaker}\t{' '.join(s.phones)}\n")
