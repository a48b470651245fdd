import numpy as np
import pytest

from oracles import recursive_edit_distance
from sstd.errors import EmptyReference, MissingSpeakerMetadata, ParseError
from sstd.evaluation import (
    Detection,
    ReferenceToken,
    compute_prf,
    evaluate_method,
    f_score,
    load_detections,
    load_reference,
    match_detections,
    method_overlap,
    overlap_ratio,
    per,
    render_table,
    save_detections,
    save_reference,
    speaker_breakdown,
)

# (recall %, precision %, published F %) from the paper's result tables.
PUBLISHED_ROWS = [
    (33.24, 21.67, 26.24),  # Kunwinjku DTW
    (15.15, 85.07, 25.72),  # Kunwinjku P2W
    (21.18, 13.55, 16.53),  # Mboshi DTW
    (13.07, 62.91, 21.64),  # Mboshi P2W
    (19.15, 74.23, 30.45),  # Kunwinjku P2W threshold 0.2
    (26.60, 65.35, 37.81),  # Kunwinjku P2W threshold 0.1
    (18.77, 58.23, 28.39),  # Mboshi P2W threshold 0.2
    (23.74, 47.54, 31.67),  # Mboshi P2W threshold 0.1
]


def ref(word, utt="u1", start=0.0, end=1.0, speaker="", from_lexicon=False):
    return ReferenceToken(utt, word, start, end, speaker, from_lexicon)


def det(word, utt="u1", start=0.0, end=1.0, method="dtw", score=0.0, query_speaker=""):
    return Detection(word, utt, start, end, score, method, query_speaker)


# ------------------------------------------------------------------ matching

def test_exact_overlap_is_tp():
    tps, fps, fns = match_detections([det("manu")], [ref("manu")])
    assert (len(tps), len(fps), len(fns)) == (1, 0, 0)


def test_zero_overlap_is_fp_and_fn():
    tps, fps, fns = match_detections([det("manu", start=5.0, end=6.0)], [ref("manu")])
    assert (len(tps), len(fps), len(fns)) == (0, 1, 1)


def test_single_assignment_two_detections_one_token():
    dets = [det("manu", start=0.0, end=1.0), det("manu", start=0.1, end=1.1)]
    tps, fps, fns = match_detections(dets, [ref("manu")])
    assert (len(tps), len(fps), len(fns)) == (1, 1, 0)
    # Greedy assignment keeps the higher-overlap detection.
    assert tps[0][0].start_s == 0.0


def test_word_and_utterance_must_agree():
    tps, fps, fns = match_detections(
        [det("manu", utt="u2"), det("bun")], [ref("manu"), ref("bun")]
    )
    assert (len(tps), len(fps), len(fns)) == (1, 1, 1)


def test_overlap_threshold_respected():
    # IoU of [0,1] vs [0.6, 1.6]: intersection 0.4 / union 1.6 = 0.25.
    d = det("manu", start=0.6, end=1.6)
    assert overlap_ratio(0.6, 1.6, 0.0, 1.0) == pytest.approx(0.25)
    tps, _, _ = match_detections([d], [ref("manu")], overlap_min=0.5)
    assert not tps
    tps, _, _ = match_detections([d], [ref("manu")], overlap_min=0.2)
    assert len(tps) == 1


def test_order_matching_pairs_kth_with_kth():
    dets = [det("manu", start=10.0, end=11.0), det("manu", start=2.0, end=3.0)]
    refs = [ref("manu", start=0.0, end=1.0), ref("manu", start=7.0, end=8.0),
            ref("manu", start=20.0, end=21.0)]
    tps, fps, fns = match_detections(dets, refs, mode="order")
    assert (len(tps), len(fps), len(fns)) == (2, 0, 1)
    pairs = sorted((d.start_s, r.start_s) for d, r in tps)
    assert pairs == [(2.0, 0.0), (10.0, 7.0)]


def test_invalid_reference_token():
    with pytest.raises(ParseError):
        ReferenceToken("u1", "manu", 1.0, 1.0)


# ----------------------------------------------------------------- prf and F

@pytest.mark.parametrize("recall,precision,published_f", PUBLISHED_ROWS)
def test_f_matches_published_tables(recall, precision, published_f):
    assert abs(f_score(precision, recall) - published_f) <= 0.01


def test_compute_prf_counts():
    scores = compute_prf(tp=3, fp=1, fn=2, fn_no_lex=1, tp_no_lex=1)
    assert scores.precision == pytest.approx(75.0)
    assert scores.recall == pytest.approx(60.0)
    assert scores.recall_no_lex == pytest.approx(50.0)
    assert scores.f_score == pytest.approx(2 * 75 * 60 / 135)


def test_compute_prf_zero_convention():
    scores = compute_prf(tp=0, fp=5, fn=7)
    assert (scores.precision, scores.recall, scores.f_score) == (0.0, 0.0, 0.0)
    assert scores.recall_no_lex is None


# ------------------------------------------------------------------------ per

def test_per_identity_and_substitution():
    assert per(["a", "b"], ["a", "b"]) == 0.0
    assert per(["a", "b", "c", "d"], ["a", "x", "c", "d"]) == 25.0


def test_per_insertion_deletion():
    assert per(["a", "b", "c"], ["a", "c"]) == pytest.approx(50.0)
    assert per(["a"], ["a", "b"]) == pytest.approx(50.0)


def test_per_empty_reference():
    with pytest.raises(EmptyReference):
        per(["a"], [])


def test_per_matches_recursive_oracle():
    rng = np.random.default_rng(0)
    symbols = list("abc")
    for _ in range(200):
        hyp = list(rng.choice(symbols, size=rng.integers(0, 7)))
        refseq = list(rng.choice(symbols, size=rng.integers(1, 7)))
        assert per(hyp, refseq) == 100.0 * recursive_edit_distance(hyp, refseq) / len(refseq)


def test_per_relabeling_invariance():
    rng = np.random.default_rng(1)
    mapping = {"a": "q", "b": "r", "c": "s"}
    for _ in range(50):
        hyp = list(rng.choice(list("abc"), size=6))
        refseq = list(rng.choice(list("abc"), size=5))
        relabeled = per([mapping[s] for s in hyp], [mapping[s] for s in refseq])
        assert per(hyp, refseq) == relabeled


# ------------------------------------------------------------------- speakers

def test_speaker_breakdown_all_same():
    tps = [(det("manu", query_speaker="spk0"), ref("manu", speaker="spk0"))]
    out = speaker_breakdown(tps, {}, [ref("manu", speaker="spk0")])
    assert out.same == 1.0 and out.different == 0.0


def test_speaker_breakdown_no_tps_absent():
    out = speaker_breakdown([], {"manu": "spk0"}, [ref("manu", speaker="spk1")])
    assert out.same is None and out.different is None
    assert out.reference_same == 0.0


def test_speaker_breakdown_fifty_fifty_and_reference():
    qs = {"manu": "spk0"}
    refs = [ref("manu", speaker="spk0", start=0, end=1),
            ref("manu", speaker="spk1", start=2, end=3),
            ref("manu", speaker="spk0", start=4, end=5),
            ref("manu", speaker="spk2", start=6, end=7)]
    tps = [(det("manu"), refs[0]), (det("manu"), refs[1])]
    out = speaker_breakdown(tps, qs, refs)
    assert out.same == 0.5 and out.different == 0.5
    assert out.reference_same == 0.5


def test_speaker_breakdown_missing_metadata():
    tps = [(det("manu"), ref("manu", speaker="spk0"))]
    with pytest.raises(MissingSpeakerMetadata):
        speaker_breakdown(tps, {}, [])


# -------------------------------------------------------------------- overlap

def test_method_overlap_identical_sets():
    r1, r2 = ref("a", start=0, end=1), ref("b", start=2, end=3)
    tps = [(det("a"), r1), (det("b"), r2)]
    out = method_overlap(tps, tps, n_reference=4)
    assert (out.only_a, out.only_b, out.both) == (0, 0, 2)
    assert out.coverage == 0.5


def test_method_overlap_disjoint_and_partial():
    r1, r2, r3 = (ref(w, start=i, end=i + 1) for i, w in enumerate("abc"))
    a = [(det("a"), r1), (det("b"), r2)]
    b = [(det("b"), r2), (det("c"), r3)]
    out = method_overlap(a, b, n_reference=3)
    assert (out.only_a, out.only_b, out.both) == (1, 1, 1)
    assert out.union == 3
    assert out.coverage == 1.0
    # only_a + both == |tps_a| after reference keying.
    assert out.only_a + out.both == len(a)
    disjoint = method_overlap([(det("a"), r1)], [(det("c"), r3)], n_reference=3)
    assert disjoint.both == 0 and disjoint.union == 2


# ----------------------------------------------------------- reports and files

def test_evaluate_method_counts_balance():
    refs = [ref("manu", start=0, end=1), ref("bun", start=2, end=3),
            ref("manu", utt="u2", from_lexicon=True)]
    dets = [det("manu", start=0.0, end=1.0), det("manu", start=10, end=11)]
    report, tps = evaluate_method(dets, refs, "dtw")
    assert report.tp + report.fn == len(refs)
    assert report.tp + report.fp == len(dets)
    assert report.per_word["manu"]["tp"] == 1
    assert report.recall_no_lex is not None


def test_evaluate_method_p2w_has_no_recall_no_lex():
    report, _ = evaluate_method([det("manu", method="p2w_1best")],
                                [ref("manu")], "p2w_1best")
    assert report.recall_no_lex is None
    assert report.recall == 100.0


def test_reference_json_roundtrip(tmp_path):
    tokens = [ref("manu", speaker="spk0", from_lexicon=True), ref("bun", start=2, end=3)]
    path = tmp_path / "ref.json"
    save_reference(tokens, path)
    assert load_reference(path) == tokens


def test_detections_csv_roundtrip_both_formats(tmp_path):
    dets = [det("manu", score=0.25), det("bun", start=2, end=3, method="p2w_1best")]
    unified = tmp_path / "u.csv"
    save_detections(dets, unified)
    assert load_detections(unified) == dets
    native = tmp_path / "n.csv"
    save_detections([det("manu", score=0.5)], native, native_dtw=True)
    back = load_detections(native)
    assert back[0].method == "dtw" and back[0].word == "manu" and back[0].score == 0.5


def test_detections_csv_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("nope,nope\n", encoding="utf-8")
    with pytest.raises(ParseError):
        load_detections(path)


def test_render_table_shows_dash_for_missing_no_lex():
    report, _ = evaluate_method([det("manu", method="p2w_1best")], [ref("manu")], "p2w_1best")
    table = render_table([report])
    assert "recall-no-lex" in table.splitlines()[0]
    assert "-" in table.splitlines()[2].split()
