"""Command-line front-end: train, update, project, evaluate, synth.

Configuration is a flat key=value file ('#' comments, blank lines allowed)
sharing one namespace across commands, so a single experiment file can
drive the whole pipeline; each command reads the keys it understands and
ignores the rest. Command-line flags override file values. Every run
writes its resolved configuration next to its primary output.

Exit codes: 0 success, 2 configuration error, 3 I/O or file-format error,
4 numerical failure (singular or empty regression system).
"""

from __future__ import annotations

import argparse
import os
import sys

from . import projection as prj
from . import synth as synth_mod
from .errors import ConfigError, EmptyDesignError, FormatError, RankDeficiencyError
from .gold import parse_pairs
from .harness import (ExperimentPlan, emit_report, run_plan)
from .store import load_model
from .trainer import (TrainConfig, load_snapshot, incremental_update,
                      save_snapshot, train_from_scratch)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

_TRAIN_KEYS = ("dim", "window", "negative", "epochs", "min_count",
               "expand_threshold", "lr_initial", "lr_min", "seed",
               "unigram_power", "table_size", "workers")
_PLAN_KEYS = ("years", "ks", "regime", "strategy", "scoring", "lam")
_SYNTH_KEYS = ("n_pairs", "noise_sigma", "vocab_background",
               "cooccur_strength", "base_weight", "schedule")
_PATH_KEYS = ("corpus", "snapshot", "snapshots", "pairs", "out")
_MISC_KEYS = ("format", "direction", "report_format")
KNOWN_KEYS = frozenset(_TRAIN_KEYS + _PLAN_KEYS + _SYNTH_KEYS
                       + _PATH_KEYS + _MISC_KEYS)


def parse_config_file(path: str) -> dict[str, str]:
    """Flat key=value lines; '#' starts a comment, blank lines are skipped.
    Keys outside the shared namespace are rejected."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
            key, value = stripped.split("=", 1)
            key, value = key.strip(), value.strip()
            if key not in KNOWN_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown configuration key {key!r}")
            out[key] = value
    return out


def _resolve(args: argparse.Namespace) -> dict[str, str]:
    """defaults < config file < --set overrides < dedicated flags."""
    conf: dict[str, str] = {}
    if args.config:
        conf.update(parse_config_file(args.config))
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        key, value = key.strip(), value.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        conf[key] = value
    if getattr(args, "seed", None) is not None:
        conf["seed"] = str(args.seed)
    if getattr(args, "format", None):
        conf["format"] = args.format
    if getattr(args, "direction", None):
        conf["direction"] = args.direction
    if getattr(args, "lam", None) is not None:
        conf["lam"] = str(args.lam)
    return conf


def _int(conf: dict[str, str], key: str, default: int) -> int:
    try:
        return int(conf.get(key, default))
    except ValueError:
        raise ConfigError(f"key {key!r} expects an integer, got {conf[key]!r}") from None


def _float(conf: dict[str, str], key: str, default: float) -> float:
    try:
        return float(conf.get(key, default))
    except ValueError:
        raise ConfigError(f"key {key!r} expects a number, got {conf[key]!r}") from None


def _int_tuple(conf: dict[str, str], key: str, default: tuple[int, ...]) -> tuple[int, ...]:
    raw = conf.get(key)
    if raw is None:
        return default
    try:
        return tuple(int(part) for part in raw.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"key {key!r} expects comma-separated integers, got {raw!r}") from None


def build_train_config(conf: dict[str, str], deterministic: bool) -> TrainConfig:
    base = TrainConfig()
    workers = 1 if deterministic else _int(conf, "workers", base.workers)
    try:
        return TrainConfig(
            dim=_int(conf, "dim", base.dim),
            window=_int(conf, "window", base.window),
            negative=_int(conf, "negative", base.negative),
            epochs=_int(conf, "epochs", base.epochs),
            min_count=_int(conf, "min_count", base.min_count),
            expand_threshold=_float(conf, "expand_threshold", base.expand_threshold),
            lr_initial=_float(conf, "lr_initial", base.lr_initial),
            lr_min=_float(conf, "lr_min", base.lr_min),
            seed=_int(conf, "seed", base.seed),
            unigram_power=_float(conf, "unigram_power", base.unigram_power),
            table_size=_int(conf, "table_size", base.table_size),
            workers=workers,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def emit_resolved_config(path: str, command: str, entries: dict[str, object]) -> None:
    """One key=value per line, sorted, parseable by parse_config_file."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# resolved configuration ({command})\n")
        for key in sorted(entries):
            value = entries[key]
            if isinstance(value, (tuple, list)):
                value = ",".join(str(v) for v in value)
            f.write(f"{key}={value}\n")


def _config_entries(cfg: TrainConfig) -> dict[str, object]:
    return {k: getattr(cfg, k) for k in _TRAIN_KEYS}


def cmd_train(args: argparse.Namespace) -> int:
    conf = _resolve(args)
    cfg = build_train_config(conf, args.deterministic)
    fmt = conf.get("format", "binary")
    state = train_from_scratch(args.corpus, cfg)
    _ensure_parent(args.out)
    save_snapshot(state, args.out, fmt)
    entries = _config_entries(cfg)
    entries.update(corpus=args.corpus, out=args.out, format=fmt)
    emit_resolved_config(args.out + ".config", "train", entries)
    print(f"trained {len(state.model)} tokens, dim {cfg.dim}, "
          f"{state.tokens_seen} token updates -> {args.out}")
    return EXIT_OK


def cmd_update(args: argparse.Namespace) -> int:
    conf = _resolve(args)
    cfg = build_train_config(conf, args.deterministic)
    if args.static_vocab:
        cfg = TrainConfig(**{**cfg.__dict__, "expand_threshold": float("inf")})
    fmt = conf.get("format", "binary")
    state = load_snapshot(args.snapshot, cfg, fmt)
    before = len(state.model)
    state = incremental_update(state, args.corpus)
    _ensure_parent(args.out)
    save_snapshot(state, args.out, fmt)
    entries = _config_entries(cfg)
    entries.update(corpus=args.corpus, snapshot=args.snapshot, out=args.out,
                   format=fmt)
    emit_resolved_config(args.out + ".config", "update", entries)
    print(f"updated {before} -> {len(state.model)} tokens "
          f"({len(state.model) - before} added) -> {args.out}")
    return EXIT_OK


def cmd_project(args: argparse.Namespace) -> int:
    conf = _resolve(args)
    fmt = conf.get("format", "binary")
    direction = conf.get("direction", prj.FORWARD)
    if direction not in (prj.FORWARD, prj.REVERSE):
        raise ConfigError(f"unknown direction {direction!r}")
    lam = _float(conf, "lam", 1.0)
    if lam < 0:
        raise ConfigError("lam must be non-negative")
    model = load_model(args.snapshot, fmt)
    pairs = parse_pairs(args.pairs)
    design = prj.assemble_design(pairs, model, direction)
    proj = prj.fit(design, lam)
    _ensure_parent(args.out)
    prj.save_projection(proj, args.out)
    entries = {"snapshot": args.snapshot, "pairs": args.pairs, "out": args.out,
               "format": fmt, "direction": direction, "lam": lam}
    emit_resolved_config(args.out + ".config", "project", entries)
    print(f"fit on {design.n} pairs ({len(design.skipped)} skipped) "
          f"lambda={lam} -> {args.out}")
    for pair, reason in design.skipped:
        print(f"  skipped {pair.source} -> {pair.target} ({reason})")
    return EXIT_OK


def _snapshot_years(directory: str) -> dict[int, str]:
    found: dict[int, str] = {}
    for name in os.listdir(directory):
        stem, dot, ext = name.partition(".")
        if ext == "model" and stem.isdigit():
            found[int(stem)] = os.path.join(directory, name)
    return found


def cmd_evaluate(args: argparse.Namespace) -> int:
    conf = _resolve(args)
    fmt = conf.get("format", "binary")
    lam = _float(conf, "lam", 1.0)
    ks = _int_tuple(conf, "ks", (1, 5, 10))
    pairs = parse_pairs(args.pairs)

    if args.loo:
        if not args.snapshot:
            raise ConfigError("--loo requires --snapshot")
        direction = conf.get("direction", prj.FORWARD)
        model = load_model(args.snapshot, fmt)
        report = prj.loo_cross_validate(pairs, model, lam, ks, direction)
        _ensure_parent(args.out)
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.write("k\taccuracy\tevaluated\tfailed\tskipped\n")
            for k in ks:
                f.write(f"{k}\t{report.accuracy[k]:.6f}\t{report.n_evaluated}"
                        f"\t{report.n_failed}\t{len(report.skipped)}\n")
        entries = {"snapshot": args.snapshot, "pairs": args.pairs,
                   "out": args.out, "format": fmt, "direction": direction,
                   "lam": lam, "ks": ks}
        emit_resolved_config(args.out + ".config", "evaluate", entries)
        accs = " ".join(f"@{k}={report.accuracy[k]:.3f}" for k in ks)
        print(f"LOO over {report.n_evaluated} pairs: {accs}")
        return EXIT_OK

    if not args.snapshots:
        raise ConfigError("evaluate requires --snapshots (or --loo with --snapshot)")
    if "regime" not in conf:
        raise ConfigError("evaluate requires a regime (config key 'regime')")
    files = _snapshot_years(args.snapshots)
    if not files:
        raise ConfigError(f"no <year>.model snapshots found in {args.snapshots}")
    years = _int_tuple(conf, "years", tuple(sorted(files)))
    plan = ExperimentPlan(
        years=years, regime=conf["regime"],
        strategy=conf.get("strategy", "up_to_now"), lam=lam, ks=ks,
        scoring=conf.get("scoring", "in_vocab_only"))
    missing = [y for y in years if y not in files]
    if missing:
        raise ConfigError(f"missing snapshots for years {missing}")
    snapshots = {y: load_model(files[y], fmt) for y in years}
    report = run_plan(plan, snapshots, pairs)
    report_format = conf.get("report_format", "tsv")
    _ensure_parent(args.out)
    emit_report(report, args.out, report_format)
    entries = {"snapshots": args.snapshots, "pairs": args.pairs,
               "out": args.out, "format": fmt, "report_format": report_format,
               "regime": plan.regime, "strategy": plan.strategy,
               "scoring": plan.scoring, "lam": plan.lam,
               "years": plan.years, "ks": plan.ks}
    emit_resolved_config(args.out + ".config", "evaluate", entries)
    mean = report.mean_accuracy()
    accs = " ".join(f"@{k}={mean[k]:.1f}" for k in ks)
    print(f"{plan.regime}/{plan.strategy}/{plan.scoring}: "
          f"{len(report.steps)} steps ({report.n_failed_steps} failed), mean {accs}")
    return EXIT_OK


def _parse_schedule(raw: str) -> tuple[tuple[int, ...], ...]:
    try:
        return tuple(
            tuple(int(p) for p in part.split(",") if p.strip())
            for part in raw.split(";"))
    except ValueError:
        raise ConfigError(
            f"schedule expects ';'-separated comma lists, got {raw!r}") from None


def cmd_synth(args: argparse.Namespace) -> int:
    conf = _resolve(args)
    schedule = None
    if "schedule" in conf:
        schedule = _parse_schedule(conf["schedule"])
    base = synth_mod.SynthSpec()
    try:
        spec = synth_mod.SynthSpec(
            dim=_int(conf, "dim", base.dim),
            n_pairs=_int(conf, "n_pairs", base.n_pairs),
            noise_sigma=_float(conf, "noise_sigma", base.noise_sigma),
            years=_int(conf, "years", base.years),
            vocab_background=_int(conf, "vocab_background", base.vocab_background),
            cooccur_strength=_int(conf, "cooccur_strength", base.cooccur_strength),
            base_weight=_int(conf, "base_weight", base.base_weight),
            seed=_int(conf, "seed", base.seed),
            schedule=schedule,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None
    paths, gold_path = synth_mod.gen_diachronic_corpus(spec, args.out)
    entries = {"dim": spec.dim, "n_pairs": spec.n_pairs,
               "noise_sigma": spec.noise_sigma, "years": spec.years,
               "vocab_background": spec.vocab_background,
               "cooccur_strength": spec.cooccur_strength,
               "base_weight": spec.base_weight, "seed": spec.seed,
               "out": args.out}
    if spec.schedule is not None:
        entries["schedule"] = ";".join(",".join(str(p) for p in year_list)
                                       for year_list in spec.schedule)
    emit_resolved_config(os.path.join(args.out, "run.config"), "synth", entries)
    print(f"wrote {len(paths)} yearly corpora + {os.path.basename(gold_path)} "
          f"to {args.out}")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one configuration key (repeatable)")
    p.add_argument("--seed", type=int, help="override the seed key")
    p.add_argument("--deterministic", action="store_true",
                   help="force single-worker training")
    p.add_argument("--format", choices=("text", "binary"),
                   help="model snapshot file format (default binary)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reltrace",
        description="Incrementally trained embeddings with linear relation "
                    "projections across yearly snapshots.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from scratch on one corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="snapshot output path")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("update", help="incrementally update a snapshot on new text")
    p.add_argument("--snapshot", required=True, help="existing snapshot path")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="updated snapshot output path")
    p.add_argument("--static-vocab", action="store_true",
                   help="freeze the vocabulary (no expansion)")
    _add_common(p)
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("project", help="fit a relation projection on one snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--pairs", required=True, help="gold pair TSV")
    p.add_argument("--out", required=True, help="projection output path")
    p.add_argument("--lam", type=float, help="ridge strength (default 1.0)")
    p.add_argument("--direction", choices=(prj.FORWARD, prj.REVERSE))
    _add_common(p)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("evaluate", help="run the year-step grid, or --loo")
    p.add_argument("--pairs", required=True, help="gold pair TSV")
    p.add_argument("--out", required=True, help="report output path")
    p.add_argument("--snapshots", help="directory of <year>.model snapshots")
    p.add_argument("--loo", action="store_true",
                   help="leave-one-out on a single snapshot instead of the grid")
    p.add_argument("--snapshot", help="snapshot path for --loo")
    p.add_argument("--lam", type=float)
    p.add_argument("--direction", choices=(prj.FORWARD, prj.REVERSE))
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a synthetic diachronic corpus + gold")
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (EmptyDesignError, RankDeficiencyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
