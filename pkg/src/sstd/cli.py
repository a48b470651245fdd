"""Command-line entry point: the two detection pipelines plus evaluation.

Subcommands: featurize, g2p, dtw-search, p2w-match, confnet-search,
evaluate, synth, report. Every flag can also be set in an INI-style config
file (section per subcommand, key = flag name without the leading dashes);
command-line values win over the config file, which wins over defaults.
All subcommands are deterministic: same inputs and seeds give byte-identical
outputs, and inputs are never mutated.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import confnet as cn
from . import dtw as dtw_mod
from . import evaluation as ev
from . import g2p as g2p_mod
from . import p2w as p2w_mod
from . import synth as synth_mod
from .errors import SstdError
from .features import FeatureConfig, cmvn, load_audio, mfcc, read_features, write_features
from .lexicon import build_trie, load_lexicon


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("SSTD_JOBS", "1")))
    except ValueError:
        return 1


def _parallel_map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _feature_files(directory: Path) -> list[Path]:
    return sorted(directory.glob("*.feat"))


def _resolve_table(spec: str | None):
    return g2p_mod.get_table(spec) if spec else None


# ---------------------------------------------------------------- featurize

def cmd_featurize(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    wavs: list[Path] = []
    for item in args.inputs:
        p = Path(item)
        if p.is_dir():
            wavs.extend(sorted(p.glob("*.wav")))
        else:
            wavs.append(p)
    config = FeatureConfig(
        window_s=args.window_ms / 1000.0,
        hop_s=args.hop_ms / 1000.0,
        preemphasis=args.preemphasis,
        n_mels=args.n_mels,
        n_ceps=args.n_ceps,
        append_deltas=args.deltas,
    )
    for wav in wavs:
        clip = load_audio(wav)
        feats = mfcc(clip, config)
        if not args.no_cmvn:
            feats = cmvn(feats)
        write_features(feats, out_dir / f"{wav.stem}.feat")
    print(f"featurize: wrote {len(wavs)} feature files to {out_dir}")
    return 0


# ---------------------------------------------------------------------- g2p

def cmd_g2p(args) -> int:
    table = g2p_mod.get_table(args.table)
    on_unknown = g2p_mod.OnUnknown(args.on_unknown)
    source = sys.stdin if args.input == "-" else open(args.input, encoding="utf-8")
    lines_out = []
    try:
        for line in source:
            line = line.rstrip("\n")
            if args.reverse:
                lines_out.append(g2p_mod.phones_to_text(line.split(), table))
            else:
                lines_out.append(" ".join(g2p_mod.text_to_phones(line, table, on_unknown)))
    finally:
        if source is not sys.stdin:
            source.close()
    text = "".join(line + "\n" for line in lines_out)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"g2p: transliterated {len(lines_out)} lines to {args.output}")
    return 0


# --------------------------------------------------------------- dtw-search

def cmd_dtw_search(args) -> int:
    params = dtw_mod.DtwParams(
        n_best=args.n_best,
        band_width=args.band,
        distance=args.distance,
        max_score=args.max_score,
    )
    queries = [read_features(p) for p in _feature_files(Path(args.queries))]
    collection = [read_features(p) for p in _feature_files(Path(args.collection))]
    if not queries:
        raise SstdError(f"no .feat files under {args.queries}")

    detections: list[ev.Detection] = []
    for query in queries:
        matches = _parallel_map(
            lambda utt: dtw_mod.subsequence_search(query, utt, params), collection, args.jobs
        )
        shift = {utt.utterance_id: utt.frame_shift_s for utt in collection}
        for m in dtw_mod.rank_candidates(query, collection, params, matches=matches):
            detections.append(
                ev.Detection(
                    word=m.query_id,
                    utterance_id=m.utterance_id,
                    start_s=m.start_frame * shift[m.utterance_id],
                    end_s=m.end_frame * shift[m.utterance_id],
                    score=m.score,
                    method=ev.DTW_METHOD,
                )
            )
    ev.save_detections(detections, args.out, native_dtw=True)
    print(
        f"dtw-search: {len(queries)} queries over {len(collection)} utterances, "
        f"{len(detections)} matches -> {args.out}"
    )
    return 0


# ---------------------------------------------------------------- p2w-match

def cmd_p2w_match(args) -> int:
    table = _resolve_table(args.table)
    entries = load_lexicon(args.lexicon, table)
    trie = build_trie(entries)
    streams = p2w_mod.load_streams(args.streams)
    detections = []
    for stream in sorted(streams, key=lambda s: s.utterance_id):
        for m in p2w_mod.longest_match_scan(stream, trie, allow_overlaps=args.allow_overlaps):
            start_s, end_s = m.time_span(stream, args.symbol_duration)
            detections.append(
                ev.Detection(
                    word=m.word,
                    utterance_id=m.utterance_id,
                    start_s=start_s,
                    end_s=end_s,
                    score=0.0,
                    method=ev.P2W_1BEST_METHOD,
                )
            )
    ev.save_detections(detections, args.out)
    print(
        f"p2w-match: {len(streams)} streams against {len(entries)} lexicon words, "
        f"{len(detections)} matches -> {args.out}"
    )
    return 0


# ------------------------------------------------------------ confnet-search

def _confnet_match_times(net: cn.ConfusionNetwork, match: cn.ConfnetMatch) -> tuple[float, float]:
    start = net.slots[match.start_slot].start_s
    end = net.slots[match.end_slot].end_s
    if start is None or end is None:
        return float(match.start_slot), float(match.end_slot + 1)
    return float(start), float(end)


def cmd_confnet_search(args) -> int:
    table = _resolve_table(args.table)
    entries = load_lexicon(args.lexicon, table)
    trie = build_trie(entries)
    params = cn.SearchParams(
        prune_threshold=args.threshold,
        top_k=args.top_k,
        min_word_phones=args.min_word_phones,
    )
    paths = sorted(Path(args.confnets).glob("*.json"))

    def search_one(path: Path):
        net = cn.prune(cn.load_confnet(path), params.prune_threshold)
        if args.oracle:
            found = cn.oracle_search(net, trie, params, entries, max_slots=args.max_oracle_slots)
        else:
            found = cn.greedy_search(net, trie, params)
        return net, found

    results = _parallel_map(search_one, paths, args.jobs)
    detections = []
    for net, found in results:
        for m in found:
            start_s, end_s = _confnet_match_times(net, m)
            detections.append(
                ev.Detection(
                    word=m.word,
                    utterance_id=m.utterance_id,
                    start_s=start_s,
                    end_s=end_s,
                    score=m.score,
                    method=ev.P2W_CONFNET_METHOD,
                )
            )
    ev.save_detections(detections, args.out)
    mode = "oracle" if args.oracle else "greedy"
    print(
        f"confnet-search: {mode} over {len(paths)} networks at threshold "
        f"{args.threshold}, {len(detections)} matches -> {args.out}"
    )
    return 0


# ----------------------------------------------------------------- evaluate

def cmd_evaluate(args) -> int:
    refs = ev.load_reference(args.reference)
    lexicon_words: set[str] | None = None
    query_speakers: dict[str, str] = {}
    if args.lexicon:
        entries = load_lexicon(args.lexicon, _resolve_table(args.table))
        lexicon_words = {e.orthography for e in entries}
        query_speakers = {
            e.orthography: e.exemplar_speaker for e in entries if e.exemplar_speaker
        }
        refs = [r for r in refs if r.word in lexicon_words]

    by_method: dict[str, list[ev.Detection]] = {}
    for path in args.detections:
        for det in ev.load_detections(path):
            by_method.setdefault(det.method, []).append(det)

    reports = {}
    tp_sets = {}
    for method in sorted(by_method):
        report, tps = ev.evaluate_method(
            by_method[method],
            refs,
            method,
            overlap_min=args.overlap_min,
            mode=args.match,
            query_speakers=query_speakers or None,
        )
        reports[method] = report
        tp_sets[method] = tps
        no_lex = f"{report.recall_no_lex:.2f}" if report.recall_no_lex is not None else "-"
        print(
            f"evaluate[{method}]: tp={report.tp} fp={report.fp} fn={report.fn} "
            f"recall-no-lex={no_lex} recall={report.recall:.2f} "
            f"precision={report.precision:.2f} F={report.f_score:.2f}"
        )

    doc = {"methods": {m: r.to_dict() for m, r in reports.items()}, "n_reference": len(refs)}
    methods = sorted(reports)
    if len(methods) >= 2:
        overlaps = {}
        for i, a in enumerate(methods):
            for b in methods[i + 1 :]:
                overlaps[f"{a}|{b}"] = ev.method_overlap(
                    tp_sets[a], tp_sets[b], len(refs)
                ).to_dict()
        doc["overlap"] = overlaps
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, sort_keys=True, indent=1)
        fh.write("\n")
    print(f"evaluate: report for {len(reports)} methods -> {args.out}")
    return 0


# -------------------------------------------------------------------- synth

def cmd_synth(args) -> int:
    spec = synth_mod.SynthSpec(
        lexicon_size=args.lexicon_size,
        utterance_count=args.utterances,
        phones_inventory=args.inventory,
        substitution_rate=args.substitution_rate,
        deletion_rate=args.deletion_rate,
        insertion_rate=args.insertion_rate,
        confusion_k=args.confusion_k,
        seed=args.seed,
        feature_dim=args.feature_dim,
        num_speakers=args.speakers,
        max_plants_per_utterance=args.max_plants,
    )
    corpus = synth_mod.generate(spec, args.out)
    print(
        f"synth: {spec.lexicon_size} words, {spec.utterance_count} utterances, "
        f"{len(corpus.reference)} planted tokens -> {corpus.out_dir}"
    )
    return 0


# ------------------------------------------------------------------- report

def cmd_report(args) -> int:
    lines = []
    for path in args.reports:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        reports = []
        for method in sorted(doc.get("methods", {})):
            r = doc["methods"][method]
            reports.append(
                ev.EvalReport(
                    method=method,
                    tp=r["tp"],
                    fp=r["fp"],
                    fn=r["fn"],
                    precision=r["precision"],
                    recall=r["recall"],
                    f_score=r["f_score"],
                    recall_no_lex=r.get("recall_no_lex"),
                )
            )
        lines.append(ev.render_table(reports))
        for key, o in sorted(doc.get("overlap", {}).items()):
            coverage = f"{100.0 * o['coverage']:.2f}%" if o["coverage"] is not None else "-"
            lines.append(
                f"overlap {key}: only-first={o['only_a']} only-second={o['only_b']} "
                f"both={o['both']} union={o['union']} coverage={coverage}"
            )
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"report: wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


# ------------------------------------------------------------------ plumbing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sstd",
        description="Spoken term detection for very low-resource transcription.",
    )
    parser.add_argument("--config", help="INI config file; one section per subcommand")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("featurize", help="compute MFCC+CMVN features from wav files")
    p.add_argument("inputs", nargs="+", help="wav files or directories")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--window-ms", type=float, default=25.0)
    p.add_argument("--hop-ms", type=float, default=10.0)
    p.add_argument("--preemphasis", type=float, default=0.97)
    p.add_argument("--n-mels", type=int, default=26)
    p.add_argument("--n-ceps", type=int, default=13)
    p.add_argument("--no-cmvn", action="store_true")
    p.add_argument("--deltas", action="store_true")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("g2p", help="transliterate text lines between graphemes and phones")
    p.add_argument("--table", required=True, help="kunwinjku, identity, or a TSV path")
    p.add_argument("--reverse", action="store_true", help="phones -> graphemes")
    p.add_argument("--on-unknown", choices=["error", "skip", "passthrough"], default="error")
    p.add_argument("--input", default="-")
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_g2p)

    p = sub.add_parser("dtw-search", help="query-by-example subsequence DTW search")
    p.add_argument("--queries", required=True, help="directory of query .feat files")
    p.add_argument("--collection", required=True, help="directory of utterance .feat files")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--n-best", type=int, default=5)
    p.add_argument("--band", type=int, default=None)
    p.add_argument("--distance", choices=list(dtw_mod.DISTANCE_METRICS), default="euclidean")
    p.add_argument("--max-score", type=float, default=None)
    p.add_argument("--jobs", type=int, default=_default_jobs())
    p.set_defaults(func=cmd_dtw_search)

    p = sub.add_parser("p2w-match", help="longest-string matching over 1-best phone streams")
    p.add_argument("--streams", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--table", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--allow-overlaps", action="store_true")
    p.add_argument("--symbol-duration", type=float, default=1.0)
    p.set_defaults(func=cmd_p2w_match)

    p = sub.add_parser("confnet-search", help="greedy trie search of confusion networks")
    p.add_argument("--confnets", required=True, help="directory of confnet JSON files")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--table", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--min-word-phones", type=int, default=2)
    p.add_argument("--oracle", action="store_true", help="exhaustive search instead of greedy")
    p.add_argument("--max-oracle-slots", type=int, default=64)
    p.add_argument("--jobs", type=int, default=_default_jobs())
    p.set_defaults(func=cmd_confnet_search)

    p = sub.add_parser("evaluate", help="score detection files against a reference alignment")
    p.add_argument("--reference", required=True)
    p.add_argument("--detections", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--overlap-min", type=float, default=0.5)
    p.add_argument("--match", choices=["auto", "iou", "order"], default="auto")
    p.add_argument("--lexicon", default=None)
    p.add_argument("--table", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic ground-truth corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lexicon-size", type=int, default=30)
    p.add_argument("--utterances", type=int, default=100)
    p.add_argument("--substitution-rate", type=float, default=0.0)
    p.add_argument("--deletion-rate", type=float, default=0.0)
    p.add_argument("--insertion-rate", type=float, default=0.0)
    p.add_argument("--confusion-k", type=int, default=5)
    p.add_argument("--feature-dim", type=int, default=8)
    p.add_argument("--speakers", type=int, default=4)
    p.add_argument("--max-plants", type=int, default=3)
    p.add_argument("--inventory", default="abcdefghijklmnopqr")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="render evaluation JSON as a text table")
    p.add_argument("reports", nargs="+", help="report JSON files from evaluate")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Fold config-file values in as subparser defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    ini = configparser.ConfigParser()
    with open(known.config, encoding="utf-8") as fh:
        ini.read_file(fh)

    # Find the subcommand name in argv (first non-flag token besides --config).
    command = None
    skip = False
    for token in argv:
        if skip:
            skip = False
            continue
        if token == "--config":
            skip = True
            continue
        if not token.startswith("-"):
            command = token
            break
    if command is None or command not in ini:
        return argv

    subparsers = next(
        a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
    )
    sub = subparsers.choices.get(command)
    if sub is None:
        return argv
    defaults = {}
    for key, value in ini[command].items():
        dest = key.replace("-", "_")
        action = next((a for a in sub._actions if a.dest == dest), None)
        if action is None:
            raise SstdError(f"config key {key!r} unknown for subcommand {command!r}")
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            defaults[dest] = ini[command].getboolean(key)
        elif action.type is not None:
            defaults[dest] = action.type(value)
        else:
            defaults[dest] = value
    sub.set_defaults(**defaults)
    return argv


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
    except (SstdError, OSError, ValueError) as exc:
        print(f"sstd: error: {exc}", file=sys.stderr)
        return 1
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SstdError, OSError, ValueError) as exc:
        print(f"sstd {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
