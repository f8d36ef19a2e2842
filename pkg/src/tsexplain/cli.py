"""Command-line interface: ``tsexplain {detect,explain,bench,corrupt}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
Diagnostics go to stderr; results go to ``--out`` or stdout.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from .bench import run_benchmark
from .config import CORRUPTION_NAMES, THRESHOLD_MODES, Config, ConfigError, load_config
from .corrupt import CorruptionError, CorruptionSpec, corrupt_series
from .detect import find_anomalies, train_threshold
from .explain import NotAnomalousError, explain
from .io import DataError, ExplanationDocument, candidates_document, load_csv, write_csv, write_plot_data
from .operators import ZeroDistanceError
from .series import DegenerateInputError, TimeSeries

log = logging.getLogger("tsexplain")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config_epilog() -> str:
    lines = ["config file keys (flat TOML) and their defaults:"]
    for key, value in Config().to_dict().items():
        lines.append(f"  {key} = {value!r}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    p = _Parser(prog="tsexplain", description="Explain time-series anomalies as counterfactuals: "
                "'would be like <normal data>, except for <corruption>'.",
                epilog=_config_epilog(), formatter_class=fmt)
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr (repeatable)")
    sub = p.add_subparsers(dest="command", metavar="{detect,explain,bench,corrupt}", parser_class=_Parser)
    sub.required = True

    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="TOML", help="flat TOML config file (default: built-in defaults)")
    common.add_argument("--seed", type=int, help="master RNG seed (default: config seed, 0)")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    common.add_argument("--format", choices=("json", "text"), default="json", help="output format (default: json)")

    data = _Parser(add_help=False)
    data.add_argument("--train", required=True, metavar="CSV", help="anomaly-free training series")
    data.add_argument("--test", required=True, metavar="CSV", help="series to search for anomalies")
    data.add_argument("--window", type=int, help="subsequence length m (default: config window, 64)")
    data.add_argument("--threshold", type=float,
                      help="anomaly threshold on the left-profile distance "
                           "(default: learned from the training data)")
    data.add_argument("--threshold-mode", choices=THRESHOLD_MODES,
                      help="how the threshold is learned: max + std of the training profile, or "
                           "mean + 3 std (default: config threshold_mode, max_plus_sigma)")

    d = sub.add_parser("detect", parents=[common, data], formatter_class=fmt,
                       help="find anomalous windows in --test",
                       description="Report windows of --test whose distance to all earlier data "
                                   "exceeds the threshold.")
    d.set_defaults(func=cmd_detect)

    e = sub.add_parser("explain", parents=[common, data], formatter_class=fmt,
                       help="detect, then explain each anomaly",
                       description="Detect anomalies in --test (or take --location) and explain each one.")
    e.add_argument("--location", type=int, action="append", metavar="INDEX",
                   help="explain the window of --test starting here instead of detecting "
                        "(repeatable; default: detect)")
    e.add_argument("--emit-plot-data", metavar="DIR",
                   help="write anomaly/neighbor/transformed overlays as TSV files into DIR (default: off)")
    e.set_defaults(func=cmd_explain)

    b = sub.add_parser("bench", parents=[common], formatter_class=fmt,
                       help="run the inject/detect/explain confusion-matrix benchmark",
                       description="Inject one corruption per trial into a synthetic (or CSV) source, "
                                   "detect it and explain it; tally a confusion matrix.",
                       epilog=_config_epilog())
    b.add_argument("--workers", type=int, help="worker processes; results do not depend on it "
                                               "(default: config workers, 1)")
    b.add_argument("--trials", type=int, help="trials per class (default: config bench_trials_per_class, 50)")
    b.add_argument("--window", type=int, help="subsequence length m (default: config window, 64)")
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("corrupt", parents=[common], formatter_class=fmt,
                       help="inject one synthetic corruption into a series",
                       description="Write a corrupted copy of --input as CSV (to --out) and the ground "
                                   "truth as JSON (to --truth, default <out>.truth.json).")
    c.add_argument("--input", required=True, metavar="CSV", help="series to corrupt")
    c.add_argument("--kind", required=True, choices=CORRUPTION_NAMES, help="corruption kind")
    c.add_argument("--location", required=True, type=int, help="start index of the corrupted span")
    c.add_argument("--length", type=int, help="span length (default: config window, 64)")
    c.add_argument("--magnitude", type=float, default=4.0,
                   help="size in units of the span's std; samples of displacement for Warp (default: 4.0)")
    c.add_argument("--truth", metavar="JSON", help="ground-truth sidecar path (default: <out>.truth.json)")
    c.set_defaults(func=cmd_corrupt)
    return p


# --------------------------------------------------------------------------
# helpers

def _config(args: argparse.Namespace, **extra: Any) -> Config:
    overrides = {"seed": args.seed, "window": getattr(args, "window", None),
                 "threshold": getattr(args, "threshold", None),
                 "threshold_mode": getattr(args, "threshold_mode", None)}
    overrides.update(extra)
    return load_config(args.config, **overrides)


def _emit(args: argparse.Namespace, text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_pair(args: argparse.Namespace, m: int):
    train = load_csv(args.train)
    test = load_csv(args.test)
    if len(train) <= m or len(test) < m:
        raise DataError(f"window {m} needs a longer --train ({len(train)}) and --test ({len(test)})")
    return train, test


def _threshold(cfg: Config, train: TimeSeries) -> float:
    if cfg.threshold is not None:
        return cfg.threshold
    return train_threshold(train, cfg.window, cfg.threshold_mode)


# --------------------------------------------------------------------------
# commands

def cmd_detect(args: argparse.Namespace) -> int:
    cfg = _config(args)
    train, test = _load_pair(args, cfg.window)
    thr = _threshold(cfg, train)
    cands = find_anomalies(test, train, cfg.window, thr)
    log.info("%d candidate(s) above threshold %.4g", len(cands), thr)
    if args.format == "json":
        doc = candidates_document(cands, thr, {"train": args.train, "test": args.test, "window": cfg.window})
        _emit(args, json.dumps(doc, indent=2, sort_keys=True))
    else:
        lines = [f"threshold {thr:.4f}"]
        for c in cands:
            at = c.window.start_time.isoformat() if c.window.start_time else str(c.location)
            lines.append(f"{at}\tscore {c.score:.4f}\tnearest training index {c.neighbor_location} "
                         f"(distance {c.neighbor_distance:.4f})")
        _emit(args, "\n".join(lines))
    return EXIT_OK


def cmd_explain(args: argparse.Namespace) -> int:
    cfg = _config(args)
    train, test = _load_pair(args, cfg.window)
    m = cfg.window
    prov: Dict[str, Any] = {"train": args.train, "test": args.test, "window": m, "seed": cfg.seed}
    if args.location:
        targets = []
        for loc in args.location:
            if not 0 <= loc <= len(test) - m:
                raise UsageError(f"--location {loc} outside 0..{len(test) - m}")
            targets.append((loc, test[loc:loc + m], None))
        thr = None
    else:
        thr = _threshold(cfg, train)
        targets = [(c.location, c.window, c) for c in find_anomalies(test, train, m, thr)]
        if not targets:
            log.warning("no anomalies above threshold %.4g", thr)
    docs: List[ExplanationDocument] = []
    for k, (loc, window, cand) in enumerate(targets):
        try:
            e = explain(window, train, cfg, anomaly_location=loc, threshold=thr)
        except ZeroDistanceError:
            log.warning("window at %d matches the training data exactly; skipped", loc)
            continue
        docs.append(ExplanationDocument.build(e, cand, dict(prov, offset=loc)))
        if args.emit_plot_data:
            out = Path(args.emit_plot_data)
            out.mkdir(parents=True, exist_ok=True)
            write_plot_data(out / f"anomaly_{k:03d}_{loc}.tsv", e, window, train)
    if args.format == "json":
        _emit(args, json.dumps([d.to_dict() for d in docs], indent=2, sort_keys=True))
    else:
        _emit(args, "\n".join(d.text for d in docs))
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _config(args, workers=args.workers, bench_trials_per_class=args.trials)
    report = run_benchmark(cfg)
    _emit(args, report.to_json() if args.format == "json" else report.to_text())
    return EXIT_OK


def cmd_corrupt(args: argparse.Namespace) -> int:
    cfg = _config(args)
    if not args.out:
        raise UsageError("corrupt needs --out for the corrupted series")
    host = load_csv(args.input)
    spec = CorruptionSpec(args.kind, args.location, args.length or cfg.window, args.magnitude, cfg.seed)
    series, truth = corrupt_series(host, spec)
    write_csv(args.out, series)
    sidecar = Path(args.truth) if args.truth else Path(args.out + ".truth.json")
    sidecar.write_text(json.dumps(truth.to_dict(), indent=2, sort_keys=True) + "\n")
    if args.format == "text":
        sys.stdout.write(f"{args.kind} over [{truth.start}, {truth.end}) written to {args.out}\n")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=max(logging.DEBUG, logging.WARNING - 10 * args.verbose),
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"tsexplain: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DegenerateInputError, CorruptionError, NotAnomalousError) as exc:
        print(f"tsexplain: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"tsexplain: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
