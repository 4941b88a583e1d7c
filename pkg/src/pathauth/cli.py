"""Command-line interface: ``pathauth {synth,cluster,train,score,eval}``.

Settings resolve in three layers: built-in defaults, then an optional JSON or
YAML file given with ``--config``, then command-line flags. Every run writes
the resolved settings to ``config.json`` in the output directory, which can
be fed back through ``--config`` to repeat the run.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

import yaml

from . import __version__
from .dataio import (
    CsvColumns,
    load_corpus,
    load_model,
    parse_csv,
    parse_plt,
    read_geolife_user,
    save_model,
    write_sequence,
)
from .evaluation import InsufficientDataError, make_windows, run_benchmark, split_trace
from .geo import resample
from .observations import build_sequence
from .pipeline import METHODS, PipelineConfig, fit_clusters, method_of, preprocess, score_windows, train_verifier, vocabulary
from .synth import default_config, synth_generate, write_corpus

OUTPUT_ENV = "PATHAUTH_OUTPUT_DIR"
logger = logging.getLogger("pathauth")

PIPELINE_KEYS = {f.name for f in fields(PipelineConfig)}
SYNTH_DEFAULTS = {"users": 5, "days": 42, "seed": 0}


class CliError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _pipeline_flags(p: argparse.ArgumentParser, methods: bool = True, windows: bool = True) -> None:
    g = p.add_argument_group("pipeline")
    if methods:
        g.add_argument("--method", dest="methods", type=_str_list, action="extend",
                       help=f"verifier(s), comma-separated or repeated; from {', '.join(METHODS)}")
    if windows:
        g.add_argument("--n", dest="n_values", type=_int_list, action="extend",
                       help="window length(s), comma-separated or repeated")
        g.add_argument("--stride", type=int)
    g.add_argument("--r-max", dest="r_max", type=float, help="maximum cluster radius in meters")
    g.add_argument("--min-pts", dest="min_pts", type=int)
    g.add_argument("--unknown-radius", dest="unknown_radius", type=float)
    g.add_argument("--transit-speed", dest="transit_speed", type=float)
    g.add_argument("--interval", type=float, help="resampling interval in seconds")
    g.add_argument("--max-gap", dest="max_gap", type=float)
    g.add_argument("--hidden", type=int, help="HMM hidden states")
    g.add_argument("--delta", type=float, help="HMM emission smoothing")
    g.add_argument("--mc-delta", dest="mc_delta", type=float)
    g.add_argument("--max-iters", dest="max_iters", type=int)
    g.add_argument("--tol", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--split", choices=["chrono", "weekly"])
    g.add_argument("--train-fraction", dest="train_fraction", type=float)
    g.add_argument("--train-weeks", dest="train_weeks", type=int)
    g.add_argument("--eval-week", dest="eval_week", type=int)
    g.add_argument("--workers", type=int)


def _corpus_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", help="corpus directory (CSV files or GeoLife user folders)")
    p.add_argument("--format", dest="corpus_format", choices=["auto", "csv", "geolife"])


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or YAML settings file; flags override it")
    common.add_argument("--output-dir", dest="output_dir",
                        help=f"where outputs go (default: ${OUTPUT_ENV} or the current directory)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="pathauth", description="Location-trace user verification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic corpus")
    p.add_argument("--users", type=int)
    p.add_argument("--days", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("cluster", parents=[common], help="fit per-user cluster models on the training split")
    _corpus_flags(p)
    _pipeline_flags(p, methods=False, windows=False)
    p.add_argument("--export-sequences", dest="export_sequences", action="store_true", default=None,
                   help="also write each user's training observation sequence")

    p = sub.add_parser("train", parents=[common], help="train verifier models on the training split")
    _corpus_flags(p)
    _pipeline_flags(p, windows=False)

    p = sub.add_parser("score", parents=[common], help="score windows of a trace against a model")
    p.add_argument("--model", help="model file written by 'train'")
    p.add_argument("--trace", help="trace file (.csv or .plt) or GeoLife user directory")
    p.add_argument("--n", dest="n", type=int, help="window length")
    p.add_argument("--stride", type=int)
    p.add_argument("--interval", type=float)
    p.add_argument("--max-gap", dest="max_gap", type=float)

    p = sub.add_parser("eval", parents=[common], help="run the genuine/impostor benchmark")
    _corpus_flags(p)
    _pipeline_flags(p)
    return parser


def _load_config_file(path: str) -> dict:
    path = Path(path)
    if not path.is_file():
        raise CliError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    data = yaml.safe_load(text) if path.suffix in (".yaml", ".yml") else json.loads(text)
    if not isinstance(data, dict):
        raise CliError(f"{path}: expected a mapping of settings")
    # accept the config.json echo written by a previous run
    return {k: v for k, v in data.items() if k not in ("command", "version")}


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the optional config file and flags (flags win)."""
    settings: dict = {}
    if args.command == "synth":
        settings.update(SYNTH_DEFAULTS)
    elif args.command in ("cluster", "train", "eval"):
        settings.update(PipelineConfig().to_dict())
        settings.update(corpus=None, corpus_format="auto")
        if args.command == "cluster":
            settings["export_sequences"] = False
    else:
        settings.update(model=None, trace=None, n=16, stride=1, interval=180.0, max_gap=3600.0)
    if args.config:
        extra = _load_config_file(args.config)
        unknown = sorted(set(extra) - set(settings) - {"output_dir"})
        if unknown:
            raise CliError(f"unknown setting(s) in {args.config}: {', '.join(unknown)}")
        settings.update(extra)
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("command", "config", "verbose")}
    settings.update(flags)
    settings["output_dir"] = str(settings.get("output_dir") or os.environ.get(OUTPUT_ENV) or ".")
    return settings


def _pipeline_config(settings: dict) -> PipelineConfig:
    return PipelineConfig(**{k: v for k, v in settings.items() if k in PIPELINE_KEYS})


def _echo(settings: dict, command: str, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    body = {"command": command, "version": __version__, **settings}
    (out / "config.json").write_text(json.dumps(body, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _corpus(settings: dict):
    if not settings.get("corpus"):
        raise CliError("--corpus is required")
    return load_corpus(settings["corpus"], settings.get("corpus_format", "auto"))


def _training_split(trace, config: PipelineConfig):
    train, _ = split_trace(preprocess(trace, config), config)
    if len(train) == 0:
        raise InsufficientDataError("no training points")
    return train


def cmd_synth(settings: dict, out: Path) -> None:
    cfg = default_config(settings["users"], seed=settings["seed"], days=settings["days"])
    traces = synth_generate(cfg)
    write_corpus(traces, cfg, out / "corpus")
    logger.info("wrote %d synthetic users to %s", len(traces), out / "corpus")


def cmd_cluster(settings: dict, out: Path) -> None:
    config = _pipeline_config(settings)
    target = out / "clusters"
    target.mkdir(parents=True, exist_ok=True)
    for user, trace in _corpus(settings).items():
        try:
            train = _training_split(trace, config)
        except InsufficientDataError as exc:
            logger.warning("user %s skipped: %s", user, exc)
            continue
        clusters = fit_clusters(train, config)
        save_model(clusters, target / f"{user}.model")
        if settings.get("export_sequences"):
            write_sequence(build_sequence(train, clusters), target / f"{user}.seq")
        logger.info("user %s: %d clusters", user, clusters.n_clusters)


def cmd_train(settings: dict, out: Path) -> None:
    config = _pipeline_config(settings)
    target = out / "models"
    target.mkdir(parents=True, exist_ok=True)
    for index, (user, trace) in enumerate(sorted(_corpus(settings).items())):
        try:
            train = _training_split(trace, config)
        except InsufficientDataError as exc:
            logger.warning("user %s skipped: %s", user, exc)
            continue
        clusters = fit_clusters(train, config)
        seq = build_sequence(train, clusters)
        vocab = vocabulary(clusters)
        for method in config.methods:
            model = train_verifier(method, seq, vocab, config, seed=[config.seed, index])
            save_model(model, target / f"{user}.{method}.model", clusters)
            logger.info("user %s: trained %s", user, method)


def _read_trace(path: str):
    p = Path(path)
    if p.is_dir():
        return read_geolife_user(p)
    if not p.is_file():
        raise CliError(f"trace file not found: {p}")
    if p.suffix.lower() == ".plt":
        return parse_plt(p)
    return parse_csv(p, CsvColumns())


def cmd_score(settings: dict, out: Path) -> None:
    if not settings.get("model") or not settings.get("trace"):
        raise CliError("--model and --trace are required")
    if not Path(settings["model"]).is_file():
        raise CliError(f"model file not found: {settings['model']}")
    loaded = load_model(settings["model"])
    if not isinstance(loaded, tuple) or loaded[1] is None:
        raise CliError("not a verifier model with clusters; use a file written by 'train'")
    model, clusters = loaded
    trace = _read_trace(settings["trace"])
    seq = build_sequence(resample(trace, settings["interval"], settings["max_gap"]), clusters)
    n = settings["n"]
    windows = make_windows(seq, n, settings["stride"])
    if len(windows) == 0:
        logger.warning("trace has %d observations, fewer than n=%d; nothing to score", len(seq), n)
        return
    scores = score_windows(model, windows)
    starts = range(0, len(seq) - n + 1, settings["stride"])
    write = sys.stdout.write
    write("start,method,n,score\n")
    method = method_of(model)
    for i, s in zip(starts, scores):
        write(f"{seq.timestamps[i].isoformat()},{method},{n},{float(s)!r}\n")


def cmd_eval(settings: dict, out: Path) -> None:
    config = _pipeline_config(settings)
    report = run_benchmark(_corpus(settings), config)
    (out / "eer.csv").write_text(report.to_csv(), encoding="utf-8")
    (out / "roc.csv").write_text(report.roc_to_csv(), encoding="utf-8")
    summary = report.summary()
    (out / "summary.txt").write_text(summary, encoding="utf-8")
    sys.stdout.write(summary)


COMMANDS = {"synth": cmd_synth, "cluster": cmd_cluster, "train": cmd_train, "score": cmd_score, "eval": cmd_eval}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        settings = resolve(args)
        out = Path(settings["output_dir"])
        _echo(settings, args.command, out)
        COMMANDS[args.command](settings, out)
    except (CliError, ValueError, KeyError, OSError, TypeError, yaml.YAMLError) as exc:
        # TraceFormatError, ModelFormatError and InsufficientDataError are ValueErrors
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"pathauth {args.command}: error: {message}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
