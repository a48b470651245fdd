"""Phoneme confusion networks: loading, pruning, and lexicon-guided search.

A network is a "sausage": a sequence of slots, each holding phone hypotheses
ranked by probability. greedy_search() walks the slots left to right taking,
at each slot, the most probable hypothesis that still extends a path through
the lexicon trie; completed words are remembered and emitted when the path
dies or the network ends, and the scan restarts just after the failure point.
oracle_search() is the exhaustive counterpart used for verification: it
enumerates every span and every hypothesis combination, so every greedy match
must also be an oracle match.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .errors import InvariantViolation, NetworkTooLarge, ParseError
from .lexicon import LexiconEntry, LexiconTrie, cursor, step

PROB_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Hypothesis:
    phone: str
    prob: float


@dataclass(frozen=True)
class Slot:
    hyps: tuple[Hypothesis, ...]
    start_s: Optional[float] = None
    end_s: Optional[float] = None


@dataclass(frozen=True)
class ConfusionNetwork:
    slots: tuple[Slot, ...]
    utterance_id: str = ""
    speaker: str = ""

    def __len__(self) -> int:
        return len(self.slots)


@dataclass(frozen=True)
class SearchParams:
    prune_threshold: float = 0.0
    top_k: int = 5
    min_word_phones: int = 2

    def __post_init__(self):
        if not 0.0 <= self.prune_threshold <= 1.0:
            raise ValueError("prune_threshold must lie in [0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.min_word_phones < 1:
            raise ValueError("min_word_phones must be >= 1")


@dataclass(frozen=True)
class ConfnetMatch:
    word: str
    phones: tuple[str, ...]
    start_slot: int
    end_slot: int  # inclusive
    utterance_id: str
    score: float  # product of the chosen hypothesis probabilities

    def span_key(self) -> tuple[str, int, int, tuple[str, ...]]:
        return (self.word, self.start_slot, self.end_slot, self.phones)


def validate_network(net: ConfusionNetwork) -> None:
    """Check the slot invariants; raises InvariantViolation on the first failure."""
    for idx, slot in enumerate(net.slots):
        if not slot.hyps:
            raise InvariantViolation(idx, "empty slot")
        total = 0.0
        seen: set[str] = set()
        prev = math.inf
        for hyp in slot.hyps:
            if not 0.0 < hyp.prob <= 1.0:
                raise InvariantViolation(idx, f"probability {hyp.prob} outside (0, 1]")
            if hyp.prob > prev:
                raise InvariantViolation(idx, "hypotheses not sorted by descending probability")
            if hyp.phone in seen:
                raise InvariantViolation(idx, f"duplicate phone {hyp.phone!r}")
            seen.add(hyp.phone)
            prev = hyp.prob
            total += hyp.prob
        if total > 1.0 + PROB_SUM_TOLERANCE:
            raise InvariantViolation(idx, f"probabilities sum to {total} > 1")


def load_confnet(path: str | Path) -> ConfusionNetwork:
    """Load one utterance's confusion network from its JSON file.

    Unsorted or malformed slots are rejected, not repaired.
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", str(path))
    if not isinstance(doc, dict) or "slots" not in doc:
        raise ParseError("expected an object with a 'slots' array", str(path))
    slots = []
    for idx, raw in enumerate(doc["slots"]):
        try:
            hyps = tuple(Hypothesis(h["phone"], float(h["prob"])) for h in raw["hyps"])
        except (KeyError, TypeError) as exc:
            raise ParseError(f"slot {idx}: {exc}", str(path))
        slots.append(Slot(hyps, raw.get("start_s"), raw.get("end_s")))
    net = ConfusionNetwork(
        slots=tuple(slots),
        utterance_id=str(doc.get("utterance_id", path.stem)),
        speaker=str(doc.get("speaker", "")),
    )
    validate_network(net)
    return net


def save_confnet(net: ConfusionNetwork, path: str | Path) -> None:
    doc = {
        "utterance_id": net.utterance_id,
        "speaker": net.speaker,
        "slots": [
            {
                **({"start_s": s.start_s} if s.start_s is not None else {}),
                **({"end_s": s.end_s} if s.end_s is not None else {}),
                "hyps": [{"phone": h.phone, "prob": h.prob} for h in s.hyps],
            }
            for s in net.slots
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, sort_keys=True)
        fh.write("\n")


def prune(net: ConfusionNetwork, threshold: float) -> ConfusionNetwork:
    """Drop hypotheses below `threshold`, always keeping each slot's top-1.

    Keeping the most probable hypothesis means pruning can never empty a slot,
    so the 1-best sequence survives any threshold.
    """
    slots = []
    for slot in net.slots:
        kept = tuple(h for h in slot.hyps if h.prob >= threshold)
        if not kept:
            kept = slot.hyps[:1]
        slots.append(Slot(kept, slot.start_s, slot.end_s))
    return ConfusionNetwork(tuple(slots), net.utterance_id, net.speaker)


def _slot_hyps(net: ConfusionNetwork, i: int, top_k: int) -> tuple[Hypothesis, ...]:
    return net.slots[i].hyps[:top_k]


@dataclass
class _Candidate:
    words: frozenset[str]
    phones: tuple[str, ...]
    start_slot: int
    end_slot: int
    score: float


def greedy_search(
    net: ConfusionNetwork, trie: LexiconTrie, params: SearchParams
) -> list[ConfnetMatch]:
    """Greedy left-to-right search of the network against the trie.

    At each slot the most probable hypothesis that extends the current trie
    path is taken. Reaching a final trie state records the word as the current
    candidate but the walk keeps going, so a longer word ending later on the
    same path wins. When no hypothesis extends the path: if a candidate word
    is pending it is emitted and scanning resumes after its last slot,
    otherwise scanning resumes one slot after where the dead path began. A
    candidate still pending when the network ends is emitted.
    """
    matches: list[ConfnetMatch] = []
    n = len(net.slots)
    cur = cursor(trie)
    token: list[str] = []
    score = 1.0
    save_point: Optional[int] = None
    valid: Optional[_Candidate] = None
    i = 0

    def reset():
        nonlocal cur, token, score, save_point, valid
        cur = cursor(trie)
        token = []
        score = 1.0
        save_point = None
        valid = None

    def emit(cand: _Candidate):
        for word in sorted(cand.words):
            matches.append(
                ConfnetMatch(
                    word=word,
                    phones=cand.phones,
                    start_slot=cand.start_slot,
                    end_slot=cand.end_slot,
                    utterance_id=net.utterance_id,
                    score=cand.score,
                )
            )

    while i < n:
        advanced = False
        for hyp in _slot_hyps(net, i, params.top_k):
            nxt = step(cur, hyp.phone)
            if nxt is None:
                continue
            cur = nxt
            token.append(hyp.phone)
            score *= hyp.prob
            if save_point is None:
                save_point = i
            if cur.is_word and len(token) >= params.min_word_phones:
                valid = _Candidate(cur.words, tuple(token), save_point, i, score)
            advanced = True
            break
        if advanced:
            i += 1
            continue
        # Path is dead at slot i.
        if valid is not None:
            emit(valid)
            i = valid.end_slot + 1
        elif save_point is not None:
            i = save_point + 1
        else:
            i += 1
        reset()

    if valid is not None:
        emit(valid)
    return matches


def oracle_search(
    net: ConfusionNetwork,
    trie: LexiconTrie,
    params: SearchParams,
    entries: Optional[Iterable[LexiconEntry]] = None,
    max_slots: int = 64,
) -> list[ConfnetMatch]:
    """Exhaustive reference search: every span, every hypothesis combination.

    Pruning uses only the word and prefix *sets* built directly from the
    lexicon entries (or, failing that, materialized from the trie), keeping
    this oracle independent of trie traversal and of the greedy scan order.
    Overlapping matches are all reported. Results are deduplicated by
    (word, start, end, phones) and sorted by (start, end, word, phones).
    """
    n = len(net.slots)
    if n > max_slots:
        raise NetworkTooLarge(f"{n} slots exceeds the {max_slots}-slot guard")

    if entries is not None:
        word_map: dict[tuple[str, ...], set[str]] = {}
        for e in entries:
            word_map.setdefault(tuple(e.phones), set()).add(e.orthography)
    else:
        word_map = _materialize_words(trie)

    prefixes: set[tuple[str, ...]] = set()
    max_len = 0
    for phones in word_map:
        max_len = max(max_len, len(phones))
        for k in range(1, len(phones) + 1):
            prefixes.add(phones[:k])

    found: dict[tuple[str, int, int, tuple[str, ...]], float] = {}
    for start in range(n):
        # DFS over (next slot, phones so far, probability product).
        stack: list[tuple[int, tuple[str, ...], float]] = [(start, (), 1.0)]
        while stack:
            i, phones, score = stack.pop()
            if phones:
                if phones in word_map and len(phones) >= params.min_word_phones:
                    for word in word_map[phones]:
                        found.setdefault((word, start, i - 1, phones), score)
                if len(phones) >= max_len:
                    continue
            if i >= n:
                continue
            for hyp in _slot_hyps(net, i, params.top_k):
                extended = phones + (hyp.phone,)
                if extended in prefixes:
                    stack.append((i + 1, extended, score * hyp.prob))

    matches = [
        ConfnetMatch(word, phones, start, end, net.utterance_id, score)
        for (word, start, end, phones), score in found.items()
    ]
    matches.sort(key=lambda m: (m.start_slot, m.end_slot, m.word, m.phones))
    return matches


def _materialize_words(trie: LexiconTrie) -> dict[tuple[str, ...], set[str]]:
    out: dict[tuple[str, ...], set[str]] = {}
    stack: list[tuple[tuple[str, ...], object]] = [((), trie.root)]
    while stack:
        phones, node = stack.pop()
        if node.words:
            out.setdefault(phones, set()).update(node.words)
        for phone, child in node.children.items():
            stack.append((phones + (phone,), child))
    return out
