"""Scoring detections against a time-aligned reference.

Detections with trustworthy time spans (DTW) are matched to reference tokens
by temporal intersection-over-union with greedy one-to-one assignment; phone
stream detections, whose times are at best interpolated, fall back to
order-based matching (k-th detected occurrence of a word pairs with the k-th
reference occurrence in the same utterance). Reported metrics follow the
usual conventions: precision = tp/(tp+fp), recall = tp/(tp+fn), recall-no-lex
is recall over reference tokens that were not lexicon exemplars, and the
F-score is the harmonic mean of precision and regular recall.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import EmptyReference, MissingSpeakerMetadata, ParseError

DTW_METHOD = "dtw"
P2W_1BEST_METHOD = "p2w_1best"
P2W_CONFNET_METHOD = "p2w_confnet"

UNIFIED_HEADER = ["method", "word", "utterance_id", "start_s", "end_s", "score"]
DTW_HEADER = ["query_id", "utterance_id", "start_s", "end_s", "score"]


@dataclass(frozen=True)
class ReferenceToken:
    utterance_id: str
    word: str
    start_s: float
    end_s: float
    speaker: str = ""
    from_lexicon: bool = False

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise ParseError(
                f"reference token {self.word!r} in {self.utterance_id!r} has "
                f"start {self.start_s} >= end {self.end_s}"
            )


@dataclass(frozen=True)
class Detection:
    word: str
    utterance_id: str
    start_s: float
    end_s: float
    score: float = 0.0
    method: str = DTW_METHOD
    query_speaker: str = ""


@dataclass
class SpeakerBreakdown:
    # Fractions over true positives; None when there are no true positives.
    same: Optional[float]
    different: Optional[float]
    # Same fractions over all retrievable reference tokens.
    reference_same: Optional[float]
    reference_different: Optional[float]
    n_tp: int = 0
    n_reference: int = 0


@dataclass
class EvalReport:
    method: str
    tp: int
    fp: int
    fn: int
    precision: float  # percentages
    recall: float
    f_score: float
    recall_no_lex: Optional[float] = None
    speaker: Optional[SpeakerBreakdown] = None
    per_word: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {
            "method": self.method,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "recall_no_lex": self.recall_no_lex,
            "f_score": self.f_score,
            "per_word": self.per_word,
        }
        if self.speaker is not None:
            doc["speaker"] = {
                "same": self.speaker.same,
                "different": self.speaker.different,
                "reference_same": self.speaker.reference_same,
                "reference_different": self.speaker.reference_different,
                "n_tp": self.speaker.n_tp,
                "n_reference": self.speaker.n_reference,
            }
        return doc


def overlap_ratio(a_start: float, a_end: float, b_start: float, b_end: float) -> float:
    """Temporal intersection over union of two spans."""
    inter = min(a_end, b_end) - max(a_start, b_start)
    if inter <= 0:
        return 0.0
    union = max(a_end, b_end) - min(a_start, b_start)
    return inter / union


def match_detections(
    dets: Sequence[Detection],
    refs: Sequence[ReferenceToken],
    overlap_min: float = 0.5,
    mode: str = "iou",
) -> tuple[list[tuple[Detection, ReferenceToken]], list[Detection], list[ReferenceToken]]:
    """Assign detections to reference tokens; returns (tp pairs, fp, fn).

    iou mode: a detection matches an unmatched token of the same word in the
    same utterance when their spans overlap by at least `overlap_min` (IoU);
    assignment is greedy in descending overlap. order mode ignores times and
    pairs same-word occurrences by rank within each utterance.
    """
    if mode == "order":
        return _match_by_order(dets, refs)
    if mode != "iou":
        raise ValueError(f"unknown matching mode {mode!r}")
    if not 0.0 < overlap_min <= 1.0:
        raise ValueError("overlap_min must lie in (0, 1]")

    by_key: dict[tuple[str, str], list[int]] = defaultdict(list)
    for ri, ref in enumerate(refs):
        by_key[(ref.utterance_id, ref.word)].append(ri)

    candidates = []
    for di, det in enumerate(dets):
        for ri in by_key.get((det.utterance_id, det.word), ()):
            ref = refs[ri]
            ratio = overlap_ratio(det.start_s, det.end_s, ref.start_s, ref.end_s)
            if ratio >= overlap_min:
                candidates.append((-ratio, ref.utterance_id, ref.word, ref.start_s, det.start_s, di, ri))
    candidates.sort()

    det_used = [False] * len(dets)
    ref_used = [False] * len(refs)
    tp_pairs = []
    for _, _, _, _, _, di, ri in candidates:
        if det_used[di] or ref_used[ri]:
            continue
        det_used[di] = True
        ref_used[ri] = True
        tp_pairs.append((dets[di], refs[ri]))
    fp = [d for used, d in zip(det_used, dets) if not used]
    fn = [r for used, r in zip(ref_used, refs) if not used]
    return tp_pairs, fp, fn


def _match_by_order(dets, refs):
    det_groups: dict[tuple[str, str], list[int]] = defaultdict(list)
    for di, det in enumerate(dets):
        det_groups[(det.utterance_id, det.word)].append(di)
    ref_groups: dict[tuple[str, str], list[int]] = defaultdict(list)
    for ri, ref in enumerate(refs):
        ref_groups[(ref.utterance_id, ref.word)].append(ri)

    det_used = [False] * len(dets)
    ref_used = [False] * len(refs)
    tp_pairs = []
    for key, det_idx in det_groups.items():
        ref_idx = ref_groups.get(key, [])
        det_idx = sorted(det_idx, key=lambda i: (dets[i].start_s, dets[i].end_s))
        ref_idx = sorted(ref_idx, key=lambda i: (refs[i].start_s, refs[i].end_s))
        for di, ri in zip(det_idx, ref_idx):
            det_used[di] = True
            ref_used[ri] = True
            tp_pairs.append((dets[di], refs[ri]))
    fp = [d for used, d in zip(det_used, dets) if not used]
    fn = [r for used, r in zip(ref_used, refs) if not used]
    return tp_pairs, fp, fn


def f_score(precision_pct: float, recall_pct: float) -> float:
    """Harmonic mean of precision and recall, in percentage points."""
    if precision_pct + recall_pct == 0:
        return 0.0
    return 2.0 * precision_pct * recall_pct / (precision_pct + recall_pct)


@dataclass(frozen=True)
class PrfScores:
    precision: float
    recall: float
    f_score: float
    recall_no_lex: Optional[float] = None


def compute_prf(
    tp: int,
    fp: int,
    fn: int,
    fn_no_lex: Optional[int] = None,
    tp_no_lex: Optional[int] = None,
) -> PrfScores:
    """Precision/recall/F in percentages; zero when a denominator is zero.

    recall_no_lex is computed from the no-lexicon counts when both are given,
    and left as None (printed '-') otherwise, as for the text-only methods.
    """
    precision = 100.0 * tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = 100.0 * tp / (tp + fn) if tp + fn > 0 else 0.0
    recall_no_lex = None
    if tp_no_lex is not None and fn_no_lex is not None:
        denom = tp_no_lex + fn_no_lex
        recall_no_lex = 100.0 * tp_no_lex / denom if denom > 0 else 0.0
    return PrfScores(precision, recall, f_score(precision, recall), recall_no_lex)


def per(hyp: Sequence[str], ref: Sequence[str]) -> float:
    """Phone error rate: unit-cost edit distance over reference length, x100."""
    if not ref:
        raise EmptyReference("reference phone sequence is empty")
    n, m = len(hyp), len(ref)
    prev = list(range(m + 1))
    for i in range(1, n + 1):
        cur = [i] + [0] * m
        for j in range(1, m + 1):
            sub = prev[j - 1] + (0 if hyp[i - 1] == ref[j - 1] else 1)
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, sub)
        prev = cur
    return 100.0 * prev[m] / m


def speaker_breakdown(
    tp_pairs: Sequence[tuple[Detection, ReferenceToken]],
    query_speakers: dict[str, str],
    refs: Sequence[ReferenceToken],
) -> SpeakerBreakdown:
    """Same/different-speaker fractions over true positives, plus the same
    distribution over all retrievable reference tokens for comparison.

    query_speakers maps each query word to its exemplar's speaker; a true
    positive whose word has no known exemplar speaker (and whose detection
    carries none) raises MissingSpeakerMetadata.
    """
    same = 0
    for det, ref in tp_pairs:
        speaker = det.query_speaker or query_speakers.get(det.word)
        if not speaker:
            raise MissingSpeakerMetadata(f"no exemplar speaker for query {det.word!r}")
        if ref.speaker == speaker:
            same += 1
    n_tp = len(tp_pairs)

    ref_same = 0
    n_ref = 0
    for ref in refs:
        speaker = query_speakers.get(ref.word)
        if not speaker:
            continue
        n_ref += 1
        if ref.speaker == speaker:
            ref_same += 1

    return SpeakerBreakdown(
        same=same / n_tp if n_tp else None,
        different=(n_tp - same) / n_tp if n_tp else None,
        reference_same=ref_same / n_ref if n_ref else None,
        reference_different=(n_ref - ref_same) / n_ref if n_ref else None,
        n_tp=n_tp,
        n_reference=n_ref,
    )


@dataclass
class MethodOverlap:
    only_a: int
    only_b: int
    both: int
    coverage: Optional[float]  # |union| / reference size, when size known
    union: int

    def to_dict(self) -> dict:
        return {
            "only_a": self.only_a,
            "only_b": self.only_b,
            "both": self.both,
            "union": self.union,
            "coverage": self.coverage,
        }


def method_overlap(
    tps_a: Sequence[tuple[Detection, ReferenceToken]],
    tps_b: Sequence[tuple[Detection, ReferenceToken]],
    n_reference: Optional[int] = None,
) -> MethodOverlap:
    """Partition the reference tokens two methods retrieved into exclusive and
    shared sets. Both TP lists must be scored against the same reference."""
    set_a = {ref for _, ref in tps_a}
    set_b = {ref for _, ref in tps_b}
    both = set_a & set_b
    union = set_a | set_b
    coverage = len(union) / n_reference if n_reference else None
    return MethodOverlap(
        only_a=len(set_a - set_b),
        only_b=len(set_b - set_a),
        both=len(both),
        coverage=coverage,
        union=len(union),
    )


def evaluate_method(
    dets: Sequence[Detection],
    refs: Sequence[ReferenceToken],
    method: str,
    overlap_min: float = 0.5,
    mode: str = "auto",
    query_speakers: Optional[dict[str, str]] = None,
) -> tuple[EvalReport, list[tuple[Detection, ReferenceToken]]]:
    """Score one method's detections; returns the report and the TP pairs.

    auto mode matches DTW detections by time overlap and the phone-based
    methods by occurrence order. recall-no-lex is only reported for DTW,
    the method that consumes the spoken exemplars.
    """
    if mode == "auto":
        mode = "iou" if method == DTW_METHOD else "order"
    tp_pairs, fp, fn = match_detections(dets, refs, overlap_min, mode)

    if method == DTW_METHOD:
        tp_no_lex = sum(1 for _, ref in tp_pairs if not ref.from_lexicon)
        fn_no_lex = sum(1 for ref in fn if not ref.from_lexicon)
    else:
        tp_no_lex = fn_no_lex = None
    scores = compute_prf(len(tp_pairs), len(fp), len(fn), fn_no_lex, tp_no_lex)

    per_word: dict[str, dict[str, int]] = {}
    for det, _ in tp_pairs:
        per_word.setdefault(det.word, {"tp": 0, "fp": 0, "fn": 0})["tp"] += 1
    for det in fp:
        per_word.setdefault(det.word, {"tp": 0, "fp": 0, "fn": 0})["fp"] += 1
    for ref in fn:
        per_word.setdefault(ref.word, {"tp": 0, "fp": 0, "fn": 0})["fn"] += 1

    speaker = None
    if query_speakers:
        try:
            speaker = speaker_breakdown(tp_pairs, query_speakers, refs)
        except MissingSpeakerMetadata:
            speaker = None

    report = EvalReport(
        method=method,
        tp=len(tp_pairs),
        fp=len(fp),
        fn=len(fn),
        precision=scores.precision,
        recall=scores.recall,
        f_score=scores.f_score,
        recall_no_lex=scores.recall_no_lex,
        speaker=speaker,
        per_word=dict(sorted(per_word.items())),
    )
    return report, tp_pairs


def load_reference(path: str | Path) -> list[ReferenceToken]:
    """Read the reference alignment JSON array."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, list):
        raise ParseError("reference file must be a JSON array", str(path))
    tokens = []
    for i, item in enumerate(doc):
        try:
            tokens.append(
                ReferenceToken(
                    utterance_id=item["utterance_id"],
                    word=item["word"],
                    start_s=float(item["start_s"]),
                    end_s=float(item["end_s"]),
                    speaker=item.get("speaker", ""),
                    from_lexicon=bool(item.get("from_lexicon", False)),
                )
            )
        except KeyError as exc:
            raise ParseError(f"reference entry {i} missing {exc}", str(path))
    return tokens


def save_reference(tokens: Iterable[ReferenceToken], path: str | Path) -> None:
    doc = [
        {
            "utterance_id": t.utterance_id,
            "word": t.word,
            "start_s": t.start_s,
            "end_s": t.end_s,
            "speaker": t.speaker,
            "from_lexicon": t.from_lexicon,
        }
        for t in tokens
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, sort_keys=True, indent=1)
        fh.write("\n")


def load_detections(path: str | Path) -> list[Detection]:
    """Read a detections CSV; accepts both the unified format
    (method,word,...) and the native dtw-search format (query_id,...)."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return []
        dets = []
        if header == UNIFIED_HEADER:
            for row in reader:
                if not row:
                    continue
                dets.append(
                    Detection(
                        method=row[0],
                        word=row[1],
                        utterance_id=row[2],
                        start_s=float(row[3]),
                        end_s=float(row[4]),
                        score=float(row[5]),
                    )
                )
        elif header == DTW_HEADER:
            for row in reader:
                if not row:
                    continue
                dets.append(
                    Detection(
                        method=DTW_METHOD,
                        word=row[0],
                        utterance_id=row[1],
                        start_s=float(row[2]),
                        end_s=float(row[3]),
                        score=float(row[4]),
                    )
                )
        else:
            raise ParseError(f"unrecognized detections header {header}", str(path))
    return dets


def save_detections(dets: Sequence[Detection], path: str | Path, native_dtw: bool = False) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if native_dtw:
            writer.writerow(DTW_HEADER)
            for d in dets:
                writer.writerow(
                    [d.word, d.utterance_id, f"{d.start_s:.6f}", f"{d.end_s:.6f}", f"{d.score:.6f}"]
                )
        else:
            writer.writerow(UNIFIED_HEADER)
            for d in dets:
                writer.writerow(
                    [d.method, d.word, d.utterance_id, f"{d.start_s:.6f}", f"{d.end_s:.6f}", f"{d.score:.6f}"]
                )


def render_table(reports: Sequence[EvalReport]) -> str:
    """Text table in the paper's column order."""
    header = f"{'method':<14} {'recall-no-lex':>13} {'recall':>8} {'precision':>9} {'F-score':>8}"
    lines = [header, "-" * len(header)]
    for r in reports:
        no_lex = f"{r.recall_no_lex:.2f}%" if r.recall_no_lex is not None else "-"
        lines.append(
            f"{r.method:<14} {no_lex:>13} {r.recall:>7.2f}% {r.precision:>8.2f}% {r.f_score:>7.2f}%"
        )
    return "\n".join(lines)
