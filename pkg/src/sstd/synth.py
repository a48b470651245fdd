"""Synthetic corpus generator for closed-loop, ground-truth-known experiments.

The generator plants known lexicon-word occurrences inside utterances and
emits every file format the rest of the toolkit consumes: a lexicon TSV,
a time-aligned reference, per-utterance feature files plus per-word query
exemplars, a 1-best phone stream file, and per-utterance confusion networks.

Recoverability is guaranteed by construction rather than by luck:

- lexicon words and filler words draw from disjoint phone alphabets, and
  planted words are always separated by at least one filler word, so a
  lexicon phone string can only ever occur inside a planted occurrence;
- no lexicon word is a substring of another (this also rules out
  homophones), and words never repeat a phone back to back, so with zero
  noise the longest-match scan finds exactly the planted tokens;
- DTW "audio" assigns each phone a random template vector repeated for a
  random number of frames, and each word's query exemplar is an exact slice
  of one designated occurrence, so every occurrence of the word aligns at
  cost exactly 0 and nothing else does.

Recognizer noise corrupts the true phone sequence at the given rates. A
substituted slot demotes the true phone to rank 2 with a probability that
survives a 0.1 pruning threshold, which is what lets the confusion-network
search recover words the 1-best stream has lost.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .confnet import ConfusionNetwork, Hypothesis, Slot, save_confnet, validate_network
from .evaluation import ReferenceToken, save_reference
from .features import FeatureMatrix, write_features
from .lexicon import LexiconEntry, save_lexicon
from .p2w import PhoneStream, save_streams

FRAME_SHIFT_S = 0.01
FRAME_LENGTH_S = 0.025


@dataclass(frozen=True)
class SynthSpec:
    lexicon_size: int = 30
    utterance_count: int = 100
    phones_inventory: str = "abcdefghijklmnopqr"
    substitution_rate: float = 0.0
    deletion_rate: float = 0.0
    insertion_rate: float = 0.0
    confusion_k: int = 5
    seed: int = 0
    feature_dim: int = 8
    num_speakers: int = 4
    min_word_phones: int = 2
    max_word_phones: int = 5
    max_plants_per_utterance: int = 3
    min_phone_frames: int = 3
    max_phone_frames: int = 10

    def __post_init__(self):
        for name in ("substitution_rate", "deletion_rate", "insertion_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.confusion_k < 1:
            raise ValueError("confusion_k must be >= 1")
        if self.lexicon_size < 1 or self.utterance_count < 1:
            raise ValueError("lexicon_size and utterance_count must be positive")
        if len(set(self.phones_inventory)) < 6:
            raise ValueError("phones_inventory needs at least 6 distinct symbols")


@dataclass
class SynthCorpus:
    """Paths of everything generate() wrote."""

    out_dir: Path
    lexicon_path: Path
    reference_path: Path
    features_dir: Path
    queries_dir: Path
    streams_path: Path
    confnets_dir: Path
    manifest_path: Path
    entries: list[LexiconEntry] = field(default_factory=list)
    reference: list[ReferenceToken] = field(default_factory=list)


def _sample_words(rng: np.random.Generator, alphabet: list[str], spec: SynthSpec) -> list[str]:
    """Lexicon word strings: adjacent-repeat-free and mutually infix-free."""
    words: list[str] = []
    attempts = 0
    while len(words) < spec.lexicon_size:
        attempts += 1
        if attempts > 200 * spec.lexicon_size:
            raise ValueError(
                "could not sample an infix-free lexicon; enlarge phones_inventory "
                "or reduce lexicon_size"
            )
        length = int(rng.integers(spec.min_word_phones, spec.max_word_phones + 1))
        symbols = [alphabet[int(rng.integers(len(alphabet)))]]
        while len(symbols) < length:
            nxt = alphabet[int(rng.integers(len(alphabet)))]
            if nxt != symbols[-1]:
                symbols.append(nxt)
        word = "".join(symbols)
        if any(word in other or other in word for other in words):
            continue
        words.append(word)
    return words


def _filler_word(rng: np.random.Generator, alphabet: list[str]) -> str:
    length = int(rng.integers(2, 5))
    symbols = [alphabet[int(rng.integers(len(alphabet)))]]
    while len(symbols) < length:
        nxt = alphabet[int(rng.integers(len(alphabet)))]
        if nxt != symbols[-1]:
            symbols.append(nxt)
    return "".join(symbols)


def _other_phones(
    rng: np.random.Generator, inventory: list[str], exclude: set[str], count: int
) -> list[str]:
    pool = [p for p in inventory if p not in exclude]
    if count <= 0 or not pool:
        return []
    count = min(count, len(pool))
    picks = rng.choice(len(pool), size=count, replace=False)
    return [pool[int(i)] for i in picks]


def _geometric_tail(base: float, count: int, budget: float) -> list[float]:
    """Descending positive probabilities summing to at most `budget`."""
    probs = []
    value = base
    total = 0.0
    for _ in range(count):
        if value <= 1e-9 or total + value > budget:
            break
        probs.append(value)
        total += value
        value *= 0.5
    return probs


def _make_slot(
    rng: np.random.Generator,
    true_phone: str,
    corrupted: bool,
    inventory: list[str],
    k: int,
    start_s: float,
    end_s: float,
) -> Slot:
    hyps: list[Hypothesis] = []
    if corrupted:
        wrong = _other_phones(rng, inventory, {true_phone}, 1)[0]
        p1 = float(rng.uniform(0.45, 0.6))
        p2 = float(rng.uniform(0.15, 0.35))
        hyps.append(Hypothesis(wrong, p1))
        if k >= 2:
            hyps.append(Hypothesis(true_phone, p2))
            tail_base = min((1.0 - p1 - p2) / 2.0, p2 / 2.0)
            tail = _geometric_tail(tail_base, k - 2, 1.0 - p1 - p2)
            others = _other_phones(rng, inventory, {true_phone, wrong}, len(tail))
            hyps.extend(Hypothesis(p, q) for p, q in zip(others, tail))
    else:
        p1 = float(rng.uniform(0.7, 0.9))
        hyps.append(Hypothesis(true_phone, p1))
        tail = _geometric_tail((1.0 - p1) / 2.0, k - 1, 1.0 - p1)
        others = _other_phones(rng, inventory, {true_phone}, len(tail))
        hyps.extend(Hypothesis(p, q) for p, q in zip(others, tail))
    return Slot(tuple(hyps), start_s=start_s, end_s=end_s)


def generate(spec: SynthSpec, out_dir: str | Path) -> SynthCorpus:
    """Generate a corpus under out_dir. Fully deterministic given spec.seed."""
    rng = np.random.default_rng(spec.seed)
    out_dir = Path(out_dir)
    features_dir = out_dir / "features"
    queries_dir = out_dir / "queries"
    confnets_dir = out_dir / "confnets"
    for d in (out_dir, features_dir, queries_dir, confnets_dir):
        d.mkdir(parents=True, exist_ok=True)

    inventory = sorted(set(spec.phones_inventory))
    split = max(4, (len(inventory) * 3) // 5)
    lex_alphabet = inventory[:split]
    filler_alphabet = inventory[split:]
    if not filler_alphabet:
        raise ValueError("phones_inventory too small to reserve filler symbols")

    words = _sample_words(rng, lex_alphabet, spec)
    templates = {p: rng.standard_normal(spec.feature_dim) for p in inventory}

    # Every word must serve as a query exemplar at least once; feed words from
    # this queue into utterances before planting random repeats.
    pending = [words[int(i)] for i in rng.permutation(len(words))]
    exemplar_of: dict[str, tuple[str, int, int, str]] = {}  # word -> (utt, f0, f1, speaker)

    reference: list[ReferenceToken] = []
    streams: list[PhoneStream] = []
    utt_rows: list[tuple[str, str, int]] = []
    utt_features: dict[str, np.ndarray] = {}

    for u in range(spec.utterance_count):
        utt_id = f"u{u:04d}"
        speaker = f"spk{int(rng.integers(spec.num_speakers))}"
        n_plants = int(rng.integers(1, spec.max_plants_per_utterance + 1))
        plants: list[str] = []
        while pending and len(plants) < n_plants:
            plants.append(pending.pop())
        remaining = [w for w in words if w not in plants]
        while len(plants) < n_plants and remaining:
            pick = remaining.pop(int(rng.integers(len(remaining))))
            plants.append(pick)

        # filler+ (plant filler+)* layout keeps planted words non-adjacent.
        items: list[tuple[str, bool]] = [(_filler_word(rng, filler_alphabet), False)]
        for word in plants:
            items.append((word, True))
            items.append((_filler_word(rng, filler_alphabet), False))

        blocks: list[np.ndarray] = []
        phone_events: list[tuple[str, int, int]] = []  # (phone, start_frame, end_frame)
        frame = 0
        for word, is_lex in items:
            start_frame = frame
            for phone in word:
                dur = int(rng.integers(spec.min_phone_frames, spec.max_phone_frames + 1))
                blocks.append(np.tile(templates[phone], (dur, 1)))
                phone_events.append((phone, frame, frame + dur))
                frame += dur
            if is_lex:
                reference.append(
                    ReferenceToken(
                        utterance_id=utt_id,
                        word=word,
                        start_s=start_frame * FRAME_SHIFT_S,
                        end_s=frame * FRAME_SHIFT_S,
                        speaker=speaker,
                        from_lexicon=False,  # exemplar tokens flipped below
                    )
                )
                if word not in exemplar_of:
                    exemplar_of[word] = (utt_id, start_frame, frame, speaker)

        features = np.vstack(blocks)
        utt_features[utt_id] = features
        utt_rows.append((utt_id, speaker, features.shape[0]))

        # Simulated recognizer pass over the true phone sequence.
        slots: list[Slot] = []
        for phone, f0, f1 in phone_events:
            if spec.deletion_rate > 0 and rng.random() < spec.deletion_rate:
                continue
            corrupted = spec.substitution_rate > 0 and rng.random() < spec.substitution_rate
            slots.append(
                _make_slot(
                    rng,
                    phone,
                    corrupted,
                    inventory,
                    spec.confusion_k,
                    f0 * FRAME_SHIFT_S,
                    f1 * FRAME_SHIFT_S,
                )
            )
            if spec.insertion_rate > 0 and rng.random() < spec.insertion_rate:
                spurious = inventory[int(rng.integers(len(inventory)))]
                slots.append(
                    _make_slot(
                        rng, spurious, False, inventory, spec.confusion_k,
                        f1 * FRAME_SHIFT_S, f1 * FRAME_SHIFT_S,
                    )
                )
        net = ConfusionNetwork(tuple(slots), utterance_id=utt_id, speaker=speaker)
        validate_network(net)
        save_confnet(net, confnets_dir / f"{utt_id}.json")

        streams.append(
            PhoneStream(
                utterance_id=utt_id,
                speaker=speaker,
                phones=tuple(slot.hyps[0].phone for slot in slots),
            )
        )

    if pending:
        raise ValueError(
            f"{len(pending)} lexicon words were never planted; "
            "increase utterance_count or max_plants_per_utterance"
        )

    for utt_id, _, _ in utt_rows:
        write_features(
            FeatureMatrix(utt_features[utt_id], FRAME_SHIFT_S, FRAME_LENGTH_S, utt_id),
            features_dir / f"{utt_id}.feat",
        )

    # Flip the exemplar occurrences' from_lexicon flag and clip their features.
    exemplar_keys = {
        (utt_id, word, f0 * FRAME_SHIFT_S)
        for word, (utt_id, f0, _, _) in exemplar_of.items()
    }
    reference = [
        ReferenceToken(
            t.utterance_id, t.word, t.start_s, t.end_s, t.speaker,
            from_lexicon=(t.utterance_id, t.word, t.start_s) in exemplar_keys,
        )
        for t in reference
    ]
    reference.sort(key=lambda t: (t.utterance_id, t.start_s, t.word))

    entries = []
    for word in words:
        utt_id, f0, f1, speaker = exemplar_of[word]
        clip = utt_features[utt_id][f0:f1].copy()
        query_path = queries_dir / f"{word}.feat"
        write_features(FeatureMatrix(clip, FRAME_SHIFT_S, FRAME_LENGTH_S, word), query_path)
        entries.append(
            LexiconEntry(
                orthography=word,
                phones=tuple(word),
                exemplars=[(str(Path("queries") / f"{word}.feat"), speaker)],
            )
        )

    lexicon_path = out_dir / "lexicon.tsv"
    save_lexicon(entries, lexicon_path)
    reference_path = out_dir / "reference.json"
    save_reference(reference, reference_path)
    streams_path = out_dir / "streams.tsv"
    save_streams(streams, streams_path)
    manifest_path = out_dir / "utterances.tsv"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        for utt_id, speaker, n_frames in utt_rows:
            fh.write(f"{utt_id}\t{speaker}\t{n_frames}\n")
    with open(out_dir / "synth_meta.json", "w", encoding="utf-8") as fh:
        json.dump(asdict(spec), fh, sort_keys=True, indent=1)
        fh.write("\n")

    return SynthCorpus(
        out_dir=out_dir,
        lexicon_path=lexicon_path,
        reference_path=reference_path,
        features_dir=features_dir,
        queries_dir=queries_dir,
        streams_path=streams_path,
        confnets_dir=confnets_dir,
        manifest_path=manifest_path,
        entries=entries,
        reference=reference,
    )
