"""Spoken term detection toolkit for very low-resource transcription.

Two detection routes over a shared lexicon: query-by-example subsequence DTW
on MFCC features, and matching of phone-recognizer output (1-best longest
string matching, plus a greedy trie-guided search of phoneme confusion
networks), with an evaluation harness for recall/precision/F, speaker
breakdowns, and cross-method overlap.
"""

from .confnet import (
    ConfnetMatch,
    ConfusionNetwork,
    Hypothesis,
    SearchParams,
    Slot,
    greedy_search,
    load_confnet,
    oracle_search,
    prune,
    save_confnet,
)
from .dtw import DtwMatch, DtwParams, dtw_distance, rank_candidates, subsequence_search
from .evaluation import (
    Detection,
    EvalReport,
    ReferenceToken,
    compute_prf,
    f_score,
    match_detections,
    method_overlap,
    per,
    speaker_breakdown,
)
from .features import (
    AudioClip,
    FeatureConfig,
    FeatureMatrix,
    cmvn,
    load_audio,
    mfcc,
    read_features,
    write_features,
)
from .g2p import (
    G2PTable,
    OnUnknown,
    identity_table,
    kunwinjku_table,
    load_table,
    to_graphemes,
    to_phones,
    tokenize_graphemes,
)
from .lexicon import LexiconEntry, LexiconTrie, TrieCursor, build_trie, cursor, load_lexicon, step
from .p2w import PhoneStream, StreamMatch, longest_match_scan, stream_from_text
from .synth import SynthSpec, generate

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "ConfnetMatch",
    "ConfusionNetwork",
    "Detection",
    "DtwMatch",
    "DtwParams",
    "EvalReport",
    "FeatureConfig",
    "FeatureMatrix",
    "G2PTable",
    "Hypothesis",
    "LexiconEntry",
    "LexiconTrie",
    "OnUnknown",
    "PhoneStream",
    "ReferenceToken",
    "SearchParams",
    "Slot",
    "StreamMatch",
    "SynthSpec",
    "TrieCursor",
    "build_trie",
    "cmvn",
    "compute_prf",
    "cursor",
    "dtw_distance",
    "f_score",
    "generate",
    "greedy_search",
    "identity_table",
    "kunwinjku_table",
    "load_audio",
    "load_confnet",
    "load_lexicon",
    "load_table",
    "longest_match_scan",
    "match_detections",
    "method_overlap",
    "mfcc",
    "oracle_search",
    "per",
    "prune",
    "rank_candidates",
    "read_features",
    "save_confnet",
    "speaker_breakdown",
    "step",
    "stream_from_text",
    "subsequence_search",
    "to_graphemes",
    "to_phones",
    "tokenize_graphemes",
    "write_features",
]
