"""Command line: ``synth``, ``extract``, ``cv`` and ``rank``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error.
"""

import argparse
import csv
import logging
import sys
from pathlib import Path


from . import learn
from .corpus import DataError, Label, SynthSpec, generate_synthetic, load_manifest
from .featurepipe import (FeatureMatrix, apply_normalizer, fit_normalizer, rank_llds,
                          read_feature_csv, select_correlation, write_rank_csv)
from .pipeline import (DEFAULT_FUSION_K, FEATURE_SETS, SET_DIMS, PipelineConfig,
                       extract_segments, labelled_segments, matrices, select_set)
from .vad import VadParams

log = logging.getLogger("respdistress")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _unit_interval(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return v


def _at_least(n):
    def parse(text):
        v = int(text)
        if v < n:
            raise argparse.ArgumentTypeError(f"must be >= {n}")
        return v
    return parse


def _positive(text):
    v = float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _add_pipeline_args(p, features_default="acoustic"):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--corpus", type=Path, help="manifest CSV")
    src.add_argument("--features-dir", type=Path, help="output directory of `extract`")
    p.add_argument("--features", choices=FEATURE_SETS, default=features_default)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--folds", type=_at_least(2), default=3)
    p.add_argument("--no-enhance", action="store_true")
    p.add_argument("--vad-threshold", type=float, default=VadParams.log_threshold,
                   help="decision threshold on the mean log-likelihood ratio")
    p.add_argument("--vad-hangover", type=_at_least(0), default=VadParams.hangover_frames)
    p.add_argument("--out", type=Path, required=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="respdistress",
                                     description="Respiratory-distress speech pipeline")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--subjects", type=_at_least(2), default=20,
                   help="total subjects, split evenly between the classes")
    p.add_argument("--segments", type=_at_least(1), nargs=2, default=(4, 7),
                   metavar=("MIN", "MAX"))
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--separation", type=_unit_interval, default=1.0)
    p.add_argument("--cues", default="pause,loudness,jitter",
                   help="comma list drawn from pause, loudness, jitter")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("extract", help="extract per-segment feature CSVs")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--features", choices=FEATURE_SETS, default="acoustic")
    p.add_argument("--no-enhance", action="store_true")
    p.add_argument("--vad-threshold", type=float, default=VadParams.log_threshold)
    p.add_argument("--vad-hangover", type=_at_least(0), default=VadParams.hangover_frames)
    p.add_argument("--dump-vad", action="store_true",
                   help="write one 0/1 mask file per segment under OUT/vad/")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("cv", help="patient-independent cross-validation")
    _add_pipeline_args(p)
    p.add_argument("--select-k", type=_at_least(0), default=None,
                   help=f"features kept by selection (default {DEFAULT_FUSION_K} for "
                        "fusion, off otherwise; 0 disables)")
    p.add_argument("--svm-c", type=_positive, default=1.0)
    p.add_argument("--redundancy-cap", type=_unit_interval, default=0.9)
    p.add_argument("--std-ddof", type=int, choices=(0, 1), default=0)

    p = sub.add_parser("rank", help="correlation ranking of LLDs on fold-1 training data")
    _add_pipeline_args(p, features_default="fusion")
    p.add_argument("--select-k", type=_at_least(1), default=DEFAULT_FUSION_K)
    p.add_argument("--redundancy-cap", type=_unit_interval, default=0.9)
    p.add_argument("--level", choices=("lld", "family"), default="lld")
    return parser


def _config(args, **extra):
    vad = VadParams(log_threshold=args.vad_threshold, hangover_frames=args.vad_hangover)
    try:
        return PipelineConfig(feature_set=args.features, seed=getattr(args, "seed", 7),
                              n_folds=getattr(args, "folds", 3), enhance=not args.no_enhance,
                              vad_params=vad, **extra)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------


def cmd_synth(args):
    if args.subjects % 2:
        raise UsageError("--subjects must be even (split evenly between the classes)")
    lo, hi = args.segments
    try:
        spec = SynthSpec(args.subjects // 2, (lo, hi), args.seed, args.separation,
                         cues=tuple(c.strip() for c in args.cues.split(",") if c.strip()))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    man = generate_synthetic(spec, args.out)
    print(args.out / "manifest.csv")
    counts = man.counts()
    log.info("%d subjects, %d patient segments", counts["subjects"], counts["Patient"])
    return EXIT_OK


SEGMENTS_HEADER = ("segment_id", "subject_id", "label", "voiced_frames", "quality")


def _write_segments(results, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SEGMENTS_HEADER)
        for r in results:
            flags = ";".join(sorted(k for k, v in r.quality.items() if v is True))
            w.writerow((r.segment_id, r.subject_id, r.label.value,
                        r.quality.get("voiced_frames", 0), flags))


def _extract(args, config, dump_vad=None):
    man = load_manifest(args.corpus)
    results, failed = extract_segments(labelled_segments(man), config, dump_vad=dump_vad)
    ac, pr = matrices(results, failed)
    return results, failed, ac, pr


def cmd_extract(args):
    config = _config(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    results, failed, ac, pr = _extract(args, config, out / "vad" if args.dump_vad else None)
    m = select_set(ac, pr, config.feature_set)
    m.write_csv(out / "features.csv")
    _write_segments(results, out / "segments.csv")
    if failed:
        with (out / "failed.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("segment_id", "error"))
            w.writerows(failed)
    print(f"{m.shape[0]} segments x {m.shape[1]} {config.feature_set} features -> "
          f"{out / 'features.csv'}")
    return EXIT_OK


def _load_features_dir(d, feature_set):
    ids, names, values = read_feature_csv(d / "features.csv")
    meta = {}
    with (d / "segments.csv").open(newline="") as fh:
        for row in csv.DictReader(fh):
            meta[row["segment_id"]] = row
    try:
        labels = [1 if meta[i]["label"] == Label.DISTRESS.value else 0 for i in ids]
        groups = [meta[i]["subject_id"] for i in ids]
    except KeyError as exc:
        raise DataError(f"segment {exc.args[0]} missing from segments.csv") from None
    m = FeatureMatrix(values, names, labels, groups, ids)
    sets = set(m.feature_sets)
    have = "fusion" if sets == {"acoustic", "prosodic"} else sets.pop()
    if have == feature_set:
        return m
    if have == "fusion":
        keep = [n for n, s in zip(m.names, m.feature_sets) if s == feature_set]
        return m.columns(keep)
    raise UsageError(f"{d} holds {have} features; {feature_set} requested")


def _matrix(args, config):
    if args.features_dir is not None:
        return _load_features_dir(args.features_dir, config.feature_set)
    _, _, ac, pr = _extract(args, config)
    return select_set(ac, pr, config.feature_set)


def cmd_cv(args):
    config = _config(args, select_k=args.select_k, svm_c=args.svm_c,
                     redundancy_cap=args.redundancy_cap, std_ddof=args.std_ddof)
    m = _matrix(args, config)
    report = learn.cross_validate_config(m, config)
    learn.write_report(report, args.out)
    sys.stdout.write(report.format_table())
    return EXIT_OK


def cmd_rank(args):
    if args.select_k > SET_DIMS[args.features]:
        raise UsageError(f"--select-k {args.select_k} exceeds the {SET_DIMS[args.features]} "
                         f"{args.features} features")
    config = _config(args)
    m = _matrix(args, config)
    plan = learn.make_folds(m.groups, m.labels, config.n_folds, config.seed)
    train = m.rows(plan.folds[0].train_mask(m.groups))
    train = apply_normalizer(fit_normalizer(train), train)
    sel = select_correlation(train, min(args.select_k, train.shape[1]), args.redundancy_cap)
    table = rank_llds(sel, args.level)
    args.out.mkdir(parents=True, exist_ok=True)
    sel.write_csv(args.out / "selection.csv")
    write_rank_csv(table, args.out / "lld_ranking.csv")
    n_ac = sum(1 for n in sel.kept if sel.feature_sets[n] == "acoustic")
    print(f"kept {len(sel.kept)} features: {n_ac} acoustic, {len(sel.kept) - n_ac} prosodic")
    print(f"{'rank':>4}  {'lld':<20} {'kept':>4}  best |r|")
    for row in table[:10]:
        print(f"{row.rank:>4}  {row.lld:<20} {row.kept_count:>4}  {row.best_relevance:.3f}")
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "extract": cmd_extract, "cv": cmd_cv, "rank": cmd_rank}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, learn.FoldError, learn.MetricError, learn.TrainingError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
