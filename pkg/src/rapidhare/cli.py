"""Command-line entry point: train, predict, evaluate, bench, and synth.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .bench import BENCH_METHODS, run_bench
from .data import (
    ALL_LABELS,
    ActivityLabel,
    channels_from_names,
    frames_by_label,
    load_dataset,
    parse_recording,
    write_dataset,
)
from .errors import DataError, NumericError
from .evaluation import EvalReport, run_cv
from .features import (
    DEFAULT_DIRECTIONAL_LAG,
    DirectionalConfig,
    FeatureConfig,
    StreamingDirectional,
    directional_sources_by_name,
)
from .gmm import (
    DEFAULT_COMPONENT_COUNTS,
    EmConfig,
    fit_activity_models,
    load_model_set,
    save_model_set,
)
from .hmm import HmmConfig, load_transition_matrix
from .predictor import PredictorConfig, PredictorSession, naive_window_scores, posterior
from .synth import default_spec, generate, load_spec


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_indices(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad channel list: {text!r}") from None


def _parse_components(text: str) -> dict[ActivityLabel, int]:
    overrides = {}
    for item in text.split(","):
        name, _, value = item.partition("=")
        try:
            label = ActivityLabel[name.strip().upper()]
            overrides[label] = int(value)
        except (KeyError, ValueError):
            raise argparse.ArgumentTypeError(f"bad component override: {item!r}") from None
    return overrides


def _parse_df(text: str) -> dict:
    spec = {"lag": DEFAULT_DIRECTIONAL_LAG, "channels": None}
    for item in text.split(","):
        key, sep, value = item.partition("=")
        if key == "lag" and sep:
            try:
                spec["lag"] = int(value)
            except ValueError:
                raise argparse.ArgumentTypeError(f"bad directional lag: {value!r}") from None
        elif key == "channels" and sep:
            rest = text[text.index("channels=") + len("channels="):]
            spec["channels"] = _parse_indices(rest)
            break
        else:
            raise argparse.ArgumentTypeError(f"bad directional option: {item!r}")
    return spec


def _feature_config(args, channels) -> FeatureConfig | None:
    keep = getattr(args, "channels", None)
    df = getattr(args, "df", None)
    if keep is None and df is None:
        return None
    directional = None
    if df is not None:
        sources = df["channels"]
        if sources is None:
            if channels is None:
                raise DataError(
                    "streaming input has no channel names; pass --df channels=... explicitly"
                )
            sources = directional_sources_by_name(channels, keep)
        directional = DirectionalConfig(df["lag"], tuple(sources))
    return FeatureConfig(keep, directional)


def _em_config(args) -> EmConfig:
    return EmConfig(
        max_iters=args.em_iters,
        tol=args.em_tol,
        seed=args.seed,
        variance_floor=args.variance_floor,
        n_init_restarts=args.restarts,
    )


def _component_counts(args) -> dict[ActivityLabel, int]:
    counts = dict(DEFAULT_COMPONENT_COUNTS)
    if getattr(args, "components", None):
        counts.update(args.components)
    return counts


def cmd_train(args) -> int:
    dataset = load_dataset(args.data_dir)
    feat = _feature_config(args, dataset.channels)
    sequences = dataset.sequences if feat is None else [feat.apply(s) for s in dataset.sequences]
    model_set, final_ll = fit_activity_models(
        frames_by_label(sequences), _component_counts(args), _em_config(args)
    )
    save_model_set(model_set, args.out)
    for label in ALL_LABELS:
        print(f"{label.label_name}\t{final_ll[label]:.6f}")
    return 0


def _emit_prediction(index: int, label: ActivityLabel, post: np.ndarray) -> None:
    cols = [str(index), label.label_name] + [f"{p:.8f}" for p in post]
    print("\t".join(cols))


def _predict_stream(model_set, args) -> int:
    keep = list(args.channels) if args.channels is not None else None
    df = getattr(args, "df", None)
    directional = None
    if df is not None:
        sources = df["channels"]
        if sources is None:
            raise DataError(
                "streaming input has no channel names; pass --df channels=... explicitly"
            )
        if keep is not None:
            pos = {orig: i for i, orig in enumerate(keep)}
            missing = [c for c in sources if c not in pos]
            if missing:
                raise DataError(f"directional source channels {missing} are not kept")
            sources = tuple(pos[c] for c in sources)
        directional = DirectionalConfig(df["lag"], tuple(sources))

    session = None
    streamer = None
    for index, line in enumerate(sys.stdin):
        line = line.rstrip("\n")
        if not line:
            continue
        try:
            x = np.array([float(v) for v in line.split("\t")], dtype=np.float64)
        except ValueError:
            raise DataError(f"stdin:{index + 1}: non-numeric frame value") from None
        if keep is not None:
            if max(keep) >= len(x):
                raise DataError(f"stdin:{index + 1}: channel selection out of range")
            x = x[keep]
        if directional is not None:
            if streamer is None:
                streamer = StreamingDirectional(directional, len(x))
            x = streamer.push(x)
        if session is None:
            session = PredictorSession(
                model_set,
                PredictorConfig(window_k=args.window, resync_interval=args.resync),
            )
        pred = session.push_frame(x)
        _emit_prediction(index, pred.label, pred.posterior)
    return 0


def _predict_file(model_set, args) -> int:
    path = Path(args.input)
    if not path.is_file():
        raise DataError(f"no such recording file: {path}")
    header = None
    for line in path.read_text(encoding="ascii").splitlines():
        if line and not line.startswith("#"):
            header = line.split("\t")
            break
    if header is None or header[-1] != "act":
        raise DataError(f"{path}: missing recording header")
    channels = channels_from_names(header[:-1])
    seq = parse_recording(path, channels)
    feat = _feature_config(args, channels)
    if feat is not None:
        seq = feat.apply(seq)
    cfg = PredictorConfig(window_k=args.window, resync_interval=args.resync)
    if args.oracle:
        scores = naive_window_scores(model_set, seq.frames, cfg)
        for index, s in enumerate(scores):
            label = ALL_LABELS[int(np.argmax(s))]
            _emit_prediction(index, label, posterior(s))
    else:
        session = PredictorSession(model_set, cfg)
        for index, x in enumerate(seq.frames):
            pred = session.push_frame(x)
            _emit_prediction(index, pred.label, pred.posterior)
    return 0


def cmd_predict(args) -> int:
    model_set = load_model_set(args.model)
    if args.input == "-":
        if args.oracle:
            raise DataError("--oracle needs a recording file, not streaming input")
        return _predict_stream(model_set, args)
    return _predict_file(model_set, args)


def _format_value(v: float, fmt: str) -> str:
    return f"{v:.2f}" if fmt == "table" else f"{v!r}"


def _print_report(report: EvalReport, fmt: str, title: str) -> None:
    names = [label.label_name for label in ALL_LABELS]
    print(title)
    rows = [
        ("recall", [report.per_activity[l].recall for l in ALL_LABELS], report.macro.recall),
        ("precision", [report.per_activity[l].precision for l in ALL_LABELS], report.macro.precision),
        ("f1", [report.per_activity[l].f1 for l in ALL_LABELS], report.macro.f1),
        ("accuracy", [report.per_activity[l].accuracy for l in ALL_LABELS], report.macro.accuracy),
    ]
    header = ["metric"] + names + ["average"]
    table = [header]
    for name, values, avg in rows:
        table.append([name] + [_format_value(v, fmt) for v in values] + [_format_value(avg, fmt)])
    if fmt == "tsv":
        for row in table:
            print("\t".join(row))
    else:
        widths = [max(len(r[i]) for r in table) for i in range(len(header))]
        for row in table:
            print("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
    print("confusion (rows true, columns predicted):")
    for i in range(len(names)):
        print("\t".join(str(int(v)) for v in report.confusion[i]))
    print()


def cmd_evaluate(args) -> int:
    dataset = load_dataset(args.data_dir)
    feat = _feature_config(args, dataset.channels)
    trans = load_transition_matrix(args.transitions) if args.transitions else None
    raw, tol = run_cv(
        dataset,
        counts=_component_counts(args),
        em_cfg=_em_config(args),
        feat_cfg=feat,
        pred_cfg=PredictorConfig(window_k=args.window),
        trans=trans,
        hmm_cfg=HmmConfig(window_w=args.hmm_window),
        tolerance=args.tolerance,
        method=args.method,
        jobs=args.jobs,
    )
    _print_report(raw, args.format, f"== {args.method}, no border tolerance ==")
    _print_report(tol, args.format, f"== {args.method}, border tolerance {args.tolerance} frames ==")
    return 0


def cmd_bench(args) -> int:
    model_set = load_model_set(args.model)
    stats = run_bench(
        model_set,
        method=args.method,
        frames=args.frames,
        repeats=args.repeats,
        pred_cfg=PredictorConfig(window_k=args.window),
        hmm_cfg=HmmConfig(window_w=args.hmm_window),
        seed=args.seed,
    )
    fields = [
        ("method", stats.method),
        ("frames", stats.frames),
        ("repeats", stats.repeats),
        ("mean_us", f"{stats.mean_us:.3f}"),
        ("std_us", f"{stats.std_us:.3f}"),
        ("p99_us", f"{stats.p99_us:.3f}"),
    ]
    if args.format == "tsv":
        print("\t".join(str(k) for k, _ in fields))
        print("\t".join(str(v) for _, v in fields))
    else:
        for k, v in fields:
            print(f"{k}: {v}")
    return 0


def cmd_synth(args) -> int:
    if args.spec:
        spec = load_spec(args.spec)
    else:
        spec = default_spec(
            n_subjects=args.subjects,
            frames_per_subject=args.frames,
            dim=args.dim,
            min_segment=args.min_segment,
            seed=args.seed,
        )
    paths = write_dataset(generate(spec), args.out)
    print(f"wrote {len(paths)} recordings to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="rapidhare",
        description="Streaming activity recognition over rolling mixture log-likelihoods.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    def common(p):
        p.add_argument("--seed", type=int, default=1, help="base random seed (default: 1)")
        p.add_argument(
            "--format", choices=("table", "tsv"), default="table",
            help="output layout (default: table)",
        )

    def em_flags(p):
        p.add_argument("--em-iters", type=int, default=200,
                       help="max EM iterations (default: 200)")
        p.add_argument("--em-tol", type=float, default=1e-6,
                       help="relative log-likelihood improvement to stop at (default: 1e-6)")
        p.add_argument("--restarts", type=int, default=1,
                       help="EM restarts, best final log-likelihood wins (default: 1)")
        p.add_argument("--variance-floor", type=float, default=1e-6,
                       help="minimum per-dimension variance (default: 1e-6)")
        p.add_argument("--components", type=_parse_components, default=None, metavar="NAME=K,...",
                       help="per-activity component overrides, e.g. sitting=2 "
                            "(defaults: walking=18 running=18 going_up=16 going_down=16 "
                            "sitting=2 sitting_down=7 standing_up=5 standing=4)")

    def feature_flags(p):
        p.add_argument("--channels", type=_parse_indices, default=None, metavar="I,J,...",
                       help="keep only these channel indices (default: all)")
        p.add_argument("--df", type=_parse_df, default=None, metavar="lag=15[,channels=I,J,...]",
                       help="append directional features; default lag 15, default sources are "
                            "the thigh accelerometer x/z channels found by name")

    p = sub.add_parser("train", help="fit per-activity mixtures and write a model file")
    p.add_argument("data_dir", help="directory of recording files")
    p.add_argument("--out", required=True, help="output model path")
    common(p)
    em_flags(p)
    feature_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="label frames from a recording file or stdin")
    p.add_argument("input", help="recording file, or '-' for tab-separated frames on stdin")
    p.add_argument("--model", required=True, help="model file to load")
    p.add_argument("--window", type=int, default=26,
                   help="context window look-back K (default: 26)")
    p.add_argument("--resync", type=int, default=1024,
                   help="frames between exact window-sum recomputations (default: 1024)")
    p.add_argument("--oracle", action="store_true",
                   help="batch reference path that recomputes each window from scratch")
    common(p)
    feature_flags(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="leave-one-subject-out cross-validation")
    p.add_argument("data_dir", help="directory of recording files")
    p.add_argument("--method", choices=("rapidhare", "hmm"), default="rapidhare",
                   help="predictor to evaluate (default: rapidhare)")
    p.add_argument("--tolerance", type=int, default=25,
                   help="border tolerance in frames (default: 25)")
    p.add_argument("--window", type=int, default=26,
                   help="context window look-back K (default: 26)")
    p.add_argument("--hmm-window", type=int, default=10,
                   help="Viterbi block length (default: 10)")
    p.add_argument("--transitions", default=None,
                   help="transition matrix file (default: built-in matrix)")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel CV folds (default: 1)")
    common(p)
    em_flags(p)
    feature_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="single-thread per-frame latency")
    p.add_argument("--model", required=True, help="model file to load")
    p.add_argument("--frames", type=int, default=2000,
                   help="stream length per pass (default: 2000)")
    p.add_argument("--repeats", type=int, default=5,
                   help="timed passes (default: 5)")
    p.add_argument("--method", choices=BENCH_METHODS, default="rapidhare",
                   help="predictor to time (default: rapidhare)")
    p.add_argument("--window", type=int, default=26,
                   help="context window look-back K (default: 26)")
    p.add_argument("--hmm-window", type=int, default=10,
                   help="Viterbi block length (default: 10)")
    common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--out", required=True, help="output directory for recording files")
    p.add_argument("--spec", default=None,
                   help="key-value spec file; when given, the flags below are ignored")
    p.add_argument("--subjects", type=int, default=3, help="subjects to draw (default: 3)")
    p.add_argument("--frames", type=int, default=20000,
                   help="frames per subject (default: 20000)")
    p.add_argument("--dim", type=int, default=6, help="channels per frame (default: 6)")
    p.add_argument("--min-segment", type=int, default=200,
                   help="minimum activity segment length in frames (default: 200)")
    common(p)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except BrokenPipeError:
        return 0


if __name__ == "__main__":
    sys.exit(main())
