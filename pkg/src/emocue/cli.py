"""Command-line pipeline: extraction, training, identification, evaluation.

Subcommands cover the full experiment flow:

  extract         WAV manifest -> feature cache
  gen-synthetic   sample a labeled corpus from known generators
  train-emotions  emotion-level acoustic + prosodic models
  train-speakers  per-(speaker, emotion) acoustic models
  train-onestage  per-speaker models pooled over emotions
  identify        score utterances -> JSONL results
  evaluate        results -> confusion/performance tables + summary
  sweep-alpha     stage-a accuracy across fusion weights
  ttest           pooled-SD t statistic between two samples

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from . import corpus, evaluation, hmm, recognizer, supra
from .config import RunConfig, make_config
from .errors import (
    EmoCueError,
    ManifestError,
    NoLegalPathError,
    NumericalUnderflowError,
)
from .frontend import UtteranceFeatures, analyze_clip, load_audio, \
    read_feature_cache, write_feature_cache

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

_NORM_FILE = "normalization.json"
_INDEX_FILE = "bank.json"


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with code 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("run configuration")
    group.add_argument("--config", metavar="FILE",
                       help="key = value settings file")
    group.add_argument("--alpha", type=float, help="fusion weight in [0, 1]")
    group.add_argument("--num-states", type=int, help="acoustic model states")
    group.add_argument("--num-mixtures", type=int,
                       help="mixture components per acoustic state")
    group.add_argument("--num-supra-mixtures", type=int,
                       help="mixture components per suprasegmental state")
    group.add_argument("--supra-groups", metavar="N,N,...",
                       help="acoustic states per suprasegmental state")
    group.add_argument("--train-sentences", metavar="S,S,...",
                       help="sentence indices of the training split")
    group.add_argument("--test-sentences", metavar="S,S,...",
                       help="sentence indices of the test split")
    group.add_argument("--variance-floor", type=float,
                       help="minimum Gaussian variance")
    group.add_argument("--em-tol", type=float,
                       help="relative log-likelihood improvement to stop EM")
    group.add_argument("--em-max-iters", type=int, help="EM iteration cap")
    group.add_argument("--seed", type=int, help="generator seed")
    group.add_argument("--length-normalize",
                       action=argparse.BooleanOptionalAction, default=None,
                       help="divide each fused term by its sequence length")


def _config_from(args) -> RunConfig:
    return make_config(
        config_path=args.config,
        alpha=args.alpha, num_states=args.num_states,
        num_mixtures=args.num_mixtures,
        num_supra_mixtures=args.num_supra_mixtures,
        supra_groups=args.supra_groups,
        train_sentences=args.train_sentences,
        test_sentences=args.test_sentences,
        variance_floor=args.variance_floor, em_tol=args.em_tol,
        em_max_iters=args.em_max_iters, seed=args.seed,
        length_normalize=args.length_normalize)


def _load_corpus(manifest_path, features_path):
    records = corpus.load_manifest(manifest_path)
    cache = read_feature_cache(features_path)
    missing = [r.id for r in records if r.id not in cache]
    if missing:
        raise ManifestError(
            f"{features_path}: feature cache is missing {len(missing)} "
            f"utterances (first: {missing[0]!r})")
    return records, cache


def _normalized_split(records, cache, cfg: RunConfig, bank_dir):
    """Split records and z-normalize MFCCs with train-split statistics.

    The statistics are persisted next to the bank on first use so that
    every later command applies the identical transform.
    """
    train, test = corpus.split_records(records, cfg.protocol)
    norm_path = os.path.join(bank_dir, _NORM_FILE)
    if os.path.exists(norm_path):
        with open(norm_path, "r", encoding="utf-8") as fh:
            params = corpus.NormalizationParams.from_dict(json.load(fh))
        normalized = {uid: UtteranceFeatures(
            features=params.apply(uf.features), prosody=uf.prosody)
            for uid, uf in cache.items()}
        return train, test, normalized
    train_feats = {r.id: cache[r.id].features for r in train}
    test_ids = {r.id for r in test}
    other_feats = {uid: uf.features for uid, uf in cache.items()
                   if uid not in train_feats}
    del test_ids
    train_n, other_n, params = corpus.normalize_features(train_feats,
                                                         other_feats)
    os.makedirs(bank_dir, exist_ok=True)
    with open(norm_path, "w", encoding="utf-8") as fh:
        json.dump(params.to_dict(), fh)
        fh.write("\n")
    merged = {**train_n, **other_n}
    normalized = {uid: UtteranceFeatures(features=merged[uid],
                                         prosody=cache[uid].prosody)
                  for uid in cache}
    return train, test, normalized


def _read_index(bank_dir) -> dict:
    path = os.path.join(bank_dir, _INDEX_FILE)
    if os.path.exists(path):
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    return {"format": recognizer.BANK_FORMAT,
            "version": recognizer.BANK_VERSION,
            "emotions": [], "speakers": [], "emotion_files": {},
            "speaker_files": {}, "one_stage_files": {}}


def _write_index(bank_dir, index: dict) -> None:
    with open(os.path.join(bank_dir, _INDEX_FILE), "w",
              encoding="utf-8") as fh:
        json.dump(index, fh, indent=2)
        fh.write("\n")


def _fit(seqs, cfg: RunConfig) -> hmm.AcousticModel:
    init = hmm.init_model(seqs, cfg.num_states, cfg.num_mixtures,
                          variance_floor=cfg.variance_floor, seed=cfg.seed)
    model, _ = hmm.baum_welch(init, seqs, max_iters=cfg.em_max_iters,
                              tol=cfg.em_tol,
                              variance_floor=cfg.variance_floor)
    return model


def _cmd_extract(args) -> int:
    records = corpus.load_manifest(args.manifest)
    root = args.audio_root or os.path.dirname(os.path.abspath(args.manifest))
    entries = {}
    for record in records:
        if record.audio is None:
            raise ManifestError(
                f"{record.id}: no audio path; nothing to extract")
        clip = load_audio(os.path.join(root, record.audio))
        entries[record.id] = analyze_clip(clip)
    write_feature_cache(args.out, entries)
    print(f"extracted {len(entries)} utterances -> {args.out}")
    return EXIT_OK


def _cmd_gen_synthetic(args) -> int:
    cfg = _config_from(args)
    emotions = tuple(e.strip() for e in args.emotions.split(",") if e.strip())
    synth = corpus.synthesize_corpus(
        num_speakers=args.speakers, emotions=emotions,
        train_sentences=args.train_count, test_sentences=args.test_count,
        repetitions=args.reps, separation=args.separation, seed=cfg.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    corpus.write_manifest(synth.records,
                          os.path.join(args.out_dir, "manifest.tsv"))
    write_feature_cache(os.path.join(args.out_dir, "features.bin"),
                        synth.features)
    print(f"wrote {len(synth.records)} synthetic utterances to {args.out_dir}")
    return EXIT_OK


def _cmd_train_emotions(args) -> int:
    cfg = _config_from(args)
    records, cache = _load_corpus(args.manifest, args.features)
    train, _, normalized = _normalized_split(records, cache, cfg,
                                             args.bank_dir)
    emotions = tuple(dict.fromkeys(r.emotion for r in train))
    index = _read_index(args.bank_dir)
    index["emotions"] = list(emotions)
    index["emotion_files"] = {}
    for e_idx, emotion in enumerate(emotions):
        utts = [normalized[r.id] for r in train if r.emotion == emotion]
        acoustic = _fit([u.features for u in utts], cfg)
        supra_model, _ = supra.train_suprasegmental(
            acoustic, utts, cfg.mapping,
            num_mixtures=cfg.num_supra_mixtures, max_iters=cfg.em_max_iters,
            tol=cfg.em_tol, variance_floor=cfg.variance_floor)
        acoustic_name = f"emotion_{e_idx}.acoustic.json"
        supra_name = f"emotion_{e_idx}.supra.json"
        hmm.save_model(acoustic, os.path.join(args.bank_dir, acoustic_name))
        supra.save_supra_model(supra_model,
                               os.path.join(args.bank_dir, supra_name))
        index["emotion_files"][emotion] = {"acoustic": acoustic_name,
                                           "supra": supra_name}
        print(f"trained emotion models for {emotion} "
              f"({len(utts)} utterances)")
    _write_index(args.bank_dir, index)
    return EXIT_OK


def _cmd_train_speakers(args) -> int:
    cfg = _config_from(args)
    records, cache = _load_corpus(args.manifest, args.features)
    train, _, normalized = _normalized_split(records, cache, cfg,
                                             args.bank_dir)
    speakers = tuple(dict.fromkeys(r.speaker for r in train))
    emotions = tuple(dict.fromkeys(r.emotion for r in train))
    index = _read_index(args.bank_dir)
    if index["emotions"] and tuple(index["emotions"]) != emotions:
        raise ManifestError(
            f"{args.bank_dir}: bank was trained on emotions "
            f"{index['emotions']}, manifest has {list(emotions)}")
    index["speakers"] = list(speakers)
    index["speaker_files"] = {}
    for s_idx, speaker in enumerate(speakers):
        index["speaker_files"][speaker] = {}
        for e_idx, emotion in enumerate(emotions):
            seqs = [normalized[r.id].features for r in train
                    if r.speaker == speaker and r.emotion == emotion]
            model = _fit(seqs, cfg)
            name = f"speaker_{s_idx}_{e_idx}.json"
            hmm.save_model(model, os.path.join(args.bank_dir, name))
            index["speaker_files"][speaker][emotion] = name
        print(f"trained {len(emotions)} speaker models for {speaker}")
    _write_index(args.bank_dir, index)
    return EXIT_OK


def _cmd_train_onestage(args) -> int:
    cfg = _config_from(args)
    records, cache = _load_corpus(args.manifest, args.features)
    train, _, normalized = _normalized_split(records, cache, cfg,
                                             args.bank_dir)
    speakers = tuple(dict.fromkeys(r.speaker for r in train))
    index = _read_index(args.bank_dir)
    if index["speakers"] and tuple(index["speakers"]) != speakers:
        raise ManifestError(
            f"{args.bank_dir}: bank was trained on speakers "
            f"{index['speakers']}, manifest has {list(speakers)}")
    index["speakers"] = list(speakers)
    index["one_stage_files"] = {}
    for s_idx, speaker in enumerate(speakers):
        seqs = [normalized[r.id].features for r in train
                if r.speaker == speaker]
        model = _fit(seqs, cfg)
        name = f"onestage_{s_idx}.json"
        hmm.save_model(model, os.path.join(args.bank_dir, name))
        index["one_stage_files"][speaker] = name
        print(f"trained pooled model for {speaker} ({len(seqs)} utterances)")
    _write_index(args.bank_dir, index)
    return EXIT_OK


def _load_full_bank(bank_dir) -> recognizer.ModelBank:
    bank = recognizer.load_bank(bank_dir)
    if not bank.emotions or not bank.speakers:
        raise ManifestError(
            f"{bank_dir}: bank is incomplete; run train-emotions and "
            f"train-speakers first")
    return bank


def _cmd_identify(args) -> int:
    cfg = _config_from(args)
    records, cache = _load_corpus(args.manifest, args.features)
    bank = _load_full_bank(args.bank_dir)
    _, test, normalized = _normalized_split(records, cache, cfg,
                                            args.bank_dir)
    if args.ids:
        wanted = [i.strip() for i in args.ids.split(",") if i.strip()]
        by_id = {r.id: r for r in records}
        missing = [i for i in wanted if i not in by_id]
        if missing:
            raise ManifestError(f"unknown utterance ids: {missing}")
        selected = [by_id[i] for i in wanted]
    else:
        selected = test
    rows = recognizer.score_test_set(bank, selected, normalized, cfg.fusion)
    with open(args.out, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(dataclasses.asdict(row)) + "\n")
    print(f"identified {len(rows)} utterances -> {args.out}")
    return EXIT_OK


def _read_results(path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: bad results line: "
                                    f"{exc}") from exc
    if not rows:
        raise ManifestError(f"{path}: no results")
    return rows


def _cmd_evaluate(args) -> int:
    rows = _read_results(args.results)
    emotions = tuple(rows[0]["emotion_scores"].keys())
    os.makedirs(args.out_dir, exist_ok=True)

    cm = evaluation.confusion_matrix(
        [(r["true_emotion"], r["identified_emotion"]) for r in rows],
        labels=emotions)
    evaluation.write_confusion_tsv(cm, os.path.join(args.out_dir,
                                                    "confusion.tsv"))
    two_stage = evaluation.performance_table(
        [(r["true_speaker"], r["identified_speaker"], r["true_emotion"],
          r["gender"]) for r in rows], emotions=emotions)
    evaluation.write_performance_tsv(
        two_stage, os.path.join(args.out_dir, "performance_two_stage.tsv"))

    summary = {
        "num_results": len(rows),
        "emotion_average_diagonal": evaluation.average_diagonal(cm),
        "two_stage": {"mean": two_stage.overall_mean,
                      "sd": two_stage.overall_sd},
        "one_stage": None,
        "t_two_vs_one": None,
        "t_critical_005": evaluation.T_CRITICAL_005,
    }
    if all(r.get("one_stage_speaker") is not None for r in rows):
        one_stage = evaluation.performance_table(
            [(r["true_speaker"], r["one_stage_speaker"], r["true_emotion"],
              r["gender"]) for r in rows], emotions=emotions)
        evaluation.write_performance_tsv(
            one_stage, os.path.join(args.out_dir,
                                    "performance_one_stage.tsv"))
        n_pool = args.n_pool or len({r["true_speaker"] for r in rows})
        ttest = evaluation.pooled_t(one_stage.row_averages,
                                    two_stage.row_averages, n_pool)
        summary["one_stage"] = {"mean": one_stage.overall_mean,
                                "sd": one_stage.overall_sd}
        summary["t_two_vs_one"] = ttest.t
        summary["t_n_pool"] = n_pool
    with open(os.path.join(args.out_dir, "summary.json"), "w",
              encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(f"emotion stage average: {summary['emotion_average_diagonal']:.2f}")
    print(f"two-stage speaker accuracy: {two_stage.overall_mean:.2f} "
          f"(sd {two_stage.overall_sd:.2f})")
    if summary["one_stage"] is not None:
        print(f"one-stage speaker accuracy: "
              f"{summary['one_stage']['mean']:.2f} "
              f"(sd {summary['one_stage']['sd']:.2f})")
    return EXIT_OK


def _cmd_sweep_alpha(args) -> int:
    cfg = _config_from(args)
    records, cache = _load_corpus(args.manifest, args.features)
    bank = _load_full_bank(args.bank_dir)
    _, test, normalized = _normalized_split(records, cache, cfg,
                                            args.bank_dir)
    alphas = evaluation.DEFAULT_ALPHAS
    if args.alphas:
        alphas = tuple(float(a) for a in args.alphas.split(","))
    sweep = evaluation.alpha_sweep(bank, test, normalized, alphas=alphas)
    evaluation.write_sweep_tsv(sweep, args.out)
    print(f"swept {len(alphas)} fusion weights -> {args.out}")
    return EXIT_OK


def _cmd_ttest(args) -> int:
    stats_mode = args.mean1 is not None
    if stats_mode:
        if None in (args.sd1, args.mean2, args.sd2):
            raise ValueError(
                "stats mode needs --mean1 --sd1 --mean2 --sd2 together")
        result = evaluation.pooled_t_from_stats(args.mean1, args.sd1,
                                                args.mean2, args.sd2,
                                                args.n_pool)
    else:
        if not (args.sample1 and args.sample2):
            raise ValueError("pass either --sample1/--sample2 or "
                             "--mean1/--sd1/--mean2/--sd2")
        sample_1 = [float(v) for v in args.sample1.split(",")]
        sample_2 = [float(v) for v in args.sample2.split(",")]
        result = evaluation.pooled_t(sample_1, sample_2, args.n_pool)
    print(f"sample 1: mean {result.mean_1:.3f}, sd {result.sd_1:.3f}")
    print(f"sample 2: mean {result.mean_2:.3f}, sd {result.sd_2:.3f}")
    print(f"pooled sd (n = {result.n_pool}): {result.sd_pooled:.4f}")
    print(f"t = {result.t:.3f} (critical t at 0.05 level = "
          f"{evaluation.T_CRITICAL_005})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="emocue",
                     description="Two-stage emotion-cue speaker identification")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("extract", help="compute features for a WAV manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--audio-root", help="base directory for audio paths "
                                        "(default: the manifest's directory)")
    p.add_argument("--out", required=True, help="feature cache to write")
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("gen-synthetic",
                       help="sample a synthetic corpus from known generators")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--speakers", type=int, default=5)
    p.add_argument("--emotions", default=",".join(corpus.DEFAULT_EMOTIONS))
    p.add_argument("--train-count", type=int, default=4,
                   help="training sentences per (speaker, emotion)")
    p.add_argument("--test-count", type=int, default=4,
                   help="test sentences per (speaker, emotion)")
    p.add_argument("--reps", type=int, default=3,
                   help="repetitions per sentence")
    p.add_argument("--separation", type=float, default=5.0,
                   help="class separation in units of within-class deviation")
    _add_config_options(p)
    p.set_defaults(func=_cmd_gen_synthetic)

    for name, func, help_text in (
            ("train-emotions", _cmd_train_emotions,
             "train per-emotion acoustic and prosodic models"),
            ("train-speakers", _cmd_train_speakers,
             "train per-(speaker, emotion) acoustic models"),
            ("train-onestage", _cmd_train_onestage,
             "train per-speaker models pooled over emotions")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--manifest", required=True)
        p.add_argument("--features", required=True)
        p.add_argument("--bank-dir", required=True)
        _add_config_options(p)
        p.set_defaults(func=func)

    p = sub.add_parser("identify", help="run the two-stage recognizer")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--bank-dir", required=True)
    p.add_argument("--out", required=True, help="JSONL results file")
    p.add_argument("--ids", help="comma-separated utterance ids "
                                 "(default: the test split)")
    _add_config_options(p)
    p.set_defaults(func=_cmd_identify)

    p = sub.add_parser("evaluate", help="tabulate identification results")
    p.add_argument("--results", required=True, help="JSONL from identify")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-pool", type=int,
                   help="n for the pooled t (default: speaker count)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep-alpha",
                       help="stage-a sweep over fusion weights "
                            "(scores are length-normalized)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--bank-dir", required=True)
    p.add_argument("--out", required=True, help="TSV sweep table")
    p.add_argument("--alphas", help="comma-separated weights "
                                    "(default: 0.0,0.1,...,1.0)")
    _add_config_options(p)
    p.set_defaults(func=_cmd_sweep_alpha)

    p = sub.add_parser("ttest",
                       help="pooled-SD t between two samples or summaries")
    p.add_argument("--sample1", help="comma-separated percentages")
    p.add_argument("--sample2", help="comma-separated percentages")
    p.add_argument("--mean1", type=float)
    p.add_argument("--sd1", type=float)
    p.add_argument("--mean2", type=float)
    p.add_argument("--sd2", type=float)
    p.add_argument("--n-pool", type=int, required=True)
    p.set_defaults(func=_cmd_ttest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (NumericalUnderflowError, NoLegalPathError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EmoCueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
