"""Command-line entry point: ``run``, ``compare``, ``rank``, and ``synth``.

``run`` replays a log through one framework and writes ``performance.csv``,
``meta.json``, and per-series plot data. ``compare`` runs several update
policies over the same log and appends scenario rankings. ``rank`` orders
precomputed configurations for a business scenario. ``synth`` generates a
drifted synthetic log. All artifacts are plain CSV/JSON written atomically;
``STABILITY_METER_THREADS`` caps worker threads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from .advisor import (
    SCENARIO_PROFILES,
    ConfigSummary,
    ScenarioProfile,
    pool_summaries,
    rank,
)
from .classifiers import LearnerParams, PredictionFramework, UpdatePolicy
from .errors import (
    ConfigError,
    EmptyLogError,
    LogFormatError,
    LogValueError,
    StabilityMeterError,
)
from .evaluation import METRICS, run_stream
from .event_model import parse_log, replay
from .prefixing import AttributeSchema, BucketConfig, default_k_max
from .stability import MetaMeasures, SeriesAnnotation, annotate_series, meta_measures
from .synthgen import DriftLogSpec, generate, to_csv


@dataclass(frozen=True)
class RunConfig:
    """Everything one evaluation run needs; every field has a default."""

    log: str
    model: str = "incremental"
    grace: int = 200
    eval_window: int = 100
    ma_window: int = 30
    k_min: int = 2
    k_max: int | None = None  # None = derive from the log (median case length)
    metrics: tuple[str, ...] = METRICS
    attrs: tuple[str, ...] = ()
    seed: int = 0
    out_dir: str = "out"
    train_window: int = 200
    tree_depth: int = 6
    retrain_every: int = 1
    nb_memory: int = 300
    eval_every: int = 1

    def __post_init__(self) -> None:
        if self.ma_window < 1:
            raise ConfigError(f"--ma-window must be >= 1, got {self.ma_window}")
        if self.grace < 1:
            raise ConfigError(f"--grace must be >= 1, got {self.grace}")
        if self.eval_window < 1:
            raise ConfigError(f"--eval-window must be >= 1, got {self.eval_window}")

    def learner_params(self) -> LearnerParams:
        return LearnerParams(
            tree_depth=self.tree_depth,
            train_window=self.train_window,
            retrain_every=self.retrain_every,
            memory=self.nb_memory,
        )


def max_threads() -> int:
    """Worker-thread cap from STABILITY_METER_THREADS (default: cpu, max 8)."""
    raw = os.environ.get("STABILITY_METER_THREADS")
    if raw is None or raw.strip() == "":
        return min(8, os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"STABILITY_METER_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"STABILITY_METER_THREADS must be >= 1, got {value}")
    return value


def _atomic_write(path: Path, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile(
        "w", dir=path.parent, delete=False, encoding="utf-8", newline=""
    )
    try:
        handle.write(text)
        handle.close()
        os.replace(handle.name, path)
    except BaseException:
        handle.close()
        if os.path.exists(handle.name):
            os.unlink(handle.name)
        raise


def _format_float(value: float | None, width: str = ".3f") -> str:
    return "-" if value is None else format(value, width)


@dataclass
class SeriesReport:
    """One evaluated (bucket, metric) series with its analysis artifacts."""

    bucket: int
    metric: str
    values: list[float]
    label_indices: list[int]
    annotations: list[SeriesAnnotation]
    measures: MetaMeasures

    @property
    def avg_metric(self) -> float:
        return sum(self.values) / len(self.values)


def execute_run(config: RunConfig, print_summary: bool = True) -> list[SeriesReport]:
    """Run one configuration end to end and write its artifacts."""
    traces = parse_log(config.log)
    auto = config.k_max is None
    k_max = default_k_max(traces) if auto else config.k_max
    buckets = BucketConfig(k_min=config.k_min, k_max=k_max)
    schema = AttributeSchema.from_traces(config.attrs, traces)
    framework = PredictionFramework.build(
        config.model, buckets, schema, config.learner_params()
    )
    result = run_stream(
        replay(traces),
        framework,
        buckets,
        grace=config.grace,
        eval_window=config.eval_window,
        metrics=config.metrics,
        eval_every=config.eval_every,
        schema=schema,
    )

    order = {metric: index for index, metric in enumerate(config.metrics)}
    keys = sorted(
        (key for key, series in result.series.items() if len(series)),
        key=lambda key: (key[0], order[key[1]]),
    )

    def analyze(key: tuple[int, str]) -> SeriesReport:
        series = result.series[key]
        return SeriesReport(
            bucket=key[0],
            metric=key[1],
            values=list(series.values),
            label_indices=list(series.label_indices),
            annotations=annotate_series(series.values, config.ma_window),
            measures=meta_measures(series.values, config.ma_window),
        )

    if keys:
        with ThreadPoolExecutor(max_workers=min(max_threads(), len(keys))) as pool:
            reports = list(pool.map(analyze, keys))
    else:
        reports = []

    out_dir = Path(config.out_dir)
    _atomic_write(out_dir / "performance.csv", _performance_csv(reports))
    _atomic_write(out_dir / "meta.json", _meta_json(config, buckets, auto, reports))
    for report in reports:
        _atomic_write(
            out_dir / "plots" / f"series_k{report.bucket}_{report.metric}.csv",
            _series_csv(report),
        )

    if print_summary:
        _print_summary(config, buckets, auto, result.labels_seen, reports)
    return reports


def _annotation_fields(row: SeriesAnnotation) -> list[str]:
    return [
        repr(row.value),
        repr(row.ma),
        repr(row.std),
        repr(row.lb),
        repr(row.ub),
        "true" if row.is_drop else "false",
        "" if row.drop_id is None else str(row.drop_id),
    ]


def _performance_csv(reports: list[SeriesReport]) -> str:
    lines = ["label_index,bucket,metric,value,ma,std,lb,ub,is_drop,drop_id"]
    for report in reports:
        for label_index, row in zip(report.label_indices, report.annotations):
            fields = [str(label_index), str(report.bucket), report.metric]
            fields.extend(_annotation_fields(row))
            lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def _series_csv(report: SeriesReport) -> str:
    lines = ["label_index,value,ma,std,lb,ub,is_drop,drop_id"]
    for label_index, row in zip(report.label_indices, report.annotations):
        lines.append(",".join([str(label_index)] + _annotation_fields(row)))
    return "\n".join(lines) + "\n"


def _meta_entry(config_name: str, report: SeriesReport) -> dict:
    measures = report.measures
    return {
        "name": f"{config_name}/k{report.bucket}/{report.metric}",
        "config": config_name,
        "bucket": report.bucket,
        "metric": report.metric,
        "avg_metric": report.avg_metric,
        "n_points": measures.n_points,
        "drops": measures.drop_count,
        "volatility": measures.volatility,
        "max_magnitude": measures.max_magnitude,
        "avg_magnitude": measures.avg_magnitude,
        "recovery_rate": measures.recovery_rate,
        "drops_per_100_points": measures.drops_per_100_points,
    }


def _meta_json(
    config: RunConfig, buckets: BucketConfig, auto: bool, reports: list[SeriesReport]
) -> str:
    payload = {
        "configuration": {
            "log": str(config.log),
            "model": config.model,
            "grace": config.grace,
            "eval_window": config.eval_window,
            "ma_window": config.ma_window,
            "k_min": buckets.k_min,
            "k_max": buckets.k_max,
            "k_max_auto": auto,
            "metrics": list(config.metrics),
            "attrs": list(config.attrs),
            "seed": config.seed,
            "train_window": config.train_window,
            "tree_depth": config.tree_depth,
            "retrain_every": config.retrain_every,
            "nb_memory": config.nb_memory,
            "eval_every": config.eval_every,
        },
        "series": [_meta_entry(config.model, report) for report in reports],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


_TABLE_HEADER = (
    f"{'bucket':>6}  {'metric':<9}  {'avg':>8}  {'drops':>5}  "
    f"{'volatility':>10}  {'max_mag':>8}  {'avg_mag':>8}  {'recovery':>8}"
)


def _table_row(label: str, metric: str, avg: float, measures: MetaMeasures) -> str:
    return (
        f"{label:>6}  {metric:<9}  {avg:>8.3f}  {measures.drop_count:>5}  "
        f"{measures.volatility:>10.3f}  {_format_float(measures.max_magnitude):>8}  "
        f"{_format_float(measures.avg_magnitude):>8}  {_format_float(measures.recovery_rate):>8}"
    )


def _print_summary(
    config: RunConfig,
    buckets: BucketConfig,
    auto: bool,
    labels_seen: int,
    reports: list[SeriesReport],
) -> None:
    suffix = " (auto)" if auto else ""
    print(
        f"log: {config.log}  model: {config.model}  grace: {config.grace}  "
        f"eval-window: {config.eval_window}  ma-window: {config.ma_window}"
    )
    print(f"buckets: k_min={buckets.k_min} k_max={buckets.k_max}{suffix}  labels: {labels_seen}")
    print(_TABLE_HEADER)
    for report in reports:
        print(_table_row(str(report.bucket), report.metric, report.avg_metric, report.measures))


def _parse_attrs(raw: str) -> tuple[str, ...]:
    return tuple(name.strip() for name in raw.split(",") if name.strip()) if raw else ()


def _parse_k_max(raw: str) -> int | None:
    if raw == "auto":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"--k-max must be 'auto' or an integer, got {raw!r}") from None


def _parse_metrics(raw: str) -> tuple[str, ...]:
    if raw == "all":
        return METRICS
    if raw in METRICS:
        return (raw,)
    raise ConfigError(f"--metric must be one of {', '.join(METRICS)} or 'all', got {raw!r}")


def _config_from_args(args: argparse.Namespace, model: str) -> RunConfig:
    return RunConfig(
        log=args.log,
        model=model,
        grace=args.grace,
        eval_window=args.eval_window,
        ma_window=args.ma_window,
        k_min=args.k_min,
        k_max=_parse_k_max(args.k_max),
        metrics=_parse_metrics(args.metric),
        attrs=_parse_attrs(args.attrs),
        seed=args.seed,
        out_dir=args.out,
        train_window=args.train_window,
        tree_depth=args.tree_depth,
        retrain_every=args.retrain_every,
        nb_memory=args.nb_memory,
        eval_every=args.eval_every,
    )


def cmd_run(args: argparse.Namespace) -> int:
    execute_run(_config_from_args(args, args.model))
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    models = [name.strip() for name in args.models.split(",") if name.strip()]
    if len(models) < 2:
        raise ConfigError("compare needs at least two models (--models a,b)")
    metrics = _parse_metrics(args.metric)
    if len(metrics) != 1:
        raise ConfigError("compare works on a single metric (pass --metric f1, not 'all')")
    metric = metrics[0]

    for model in models:  # validate early, before running anything
        try:
            UpdatePolicy(model)
        except ValueError:
            raise ConfigError(
                f"unknown model {model!r}; expected one of "
                f"{', '.join(policy.value for policy in UpdatePolicy)}"
            ) from None

    base = _config_from_args(args, models[0])
    rows = []
    pooled = []
    for model in models:
        config = replace(base, model=model, out_dir=str(Path(args.out) / model))
        reports = execute_run(config, print_summary=False)
        for report in reports:
            rows.append((model, report))
        pooled.append(
            pool_summaries(model, [(r.avg_metric, r.measures) for r in reports])
        )

    print(f"log: {args.log}  metric: {metric}  models: {', '.join(models)}")
    print(f"{'config':>15}  " + _TABLE_HEADER)
    for model, report in rows:
        print(
            f"{model:>15}  "
            + _table_row(str(report.bucket), report.metric, report.avg_metric, report.measures)
        )
    print()
    print("pooled per configuration:")
    for summary in pooled:
        print(
            f"{summary.name:>15}  avg={summary.avg_metric:.3f}  drops={summary.drops}  "
            f"volatility={summary.volatility:.3f}  max_mag={_format_float(summary.max_magnitude)}  "
            f"avg_mag={_format_float(summary.avg_magnitude)}  recovery={_format_float(summary.recovery_rate)}"
        )
    rankings = {}
    print()
    for scenario, profile in SCENARIO_PROFILES.items():
        ordered = rank(pooled, profile)
        rankings[scenario] = ordered
        print(f"scenario {scenario} ({', '.join(profile.criteria)}): {' > '.join(ordered)}")

    payload = {
        "metric": metric,
        "models": models,
        "rows": [_meta_entry(model, report) for model, report in rows],
        "pooled": [asdict(summary) for summary in pooled],
        "rankings": rankings,
    }
    _atomic_write(Path(args.out) / "compare.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return 0


def _load_rank_entries(path: str) -> list[dict]:
    with open(path, encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: not valid JSON ({err})") from None
    if isinstance(payload, list):
        return payload
    if isinstance(payload, dict):
        for key in ("series", "configs", "pooled", "rows"):
            if key in payload and isinstance(payload[key], list):
                return payload[key]
    raise ConfigError(f"{path}: expected a list of config entries or a meta.json payload")


def cmd_rank(args: argparse.Namespace) -> int:
    profile = SCENARIO_PROFILES[args.scenario]
    if args.profile:
        profile = ScenarioProfile.parse(args.scenario, args.profile)
    summaries = [ConfigSummary.from_mapping(entry) for entry in _load_rank_entries(args.meta)]
    if not summaries:
        raise ConfigError(f"{args.meta}: no config entries to rank")
    ordered = rank(summaries, profile)
    by_name = {summary.name: summary for summary in summaries}
    print(f"scenario: {args.scenario}  criteria: {', '.join(profile.criteria)}")
    for position, name in enumerate(ordered, start=1):
        summary = by_name[name]
        print(
            f"{position:>3}. {name}  avg={summary.avg_metric:.3f}  drops={summary.drops}  "
            f"volatility={summary.volatility:.3f}  max_mag={_format_float(summary.max_magnitude)}  "
            f"avg_mag={_format_float(summary.avg_magnitude)}  recovery={_format_float(summary.recovery_rate)}"
        )
    out_dir = Path(args.out) if args.out else Path(args.meta).parent
    payload = {
        "scenario": args.scenario,
        "criteria": list(profile.criteria),
        "ranking": ordered,
    }
    _atomic_write(out_dir / "ranking.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = DriftLogSpec(
        n_cases=args.cases, drift_at=args.drift_at, seed=args.seed, noise=args.noise
    )
    traces = generate(spec)
    _atomic_write(Path(args.out), to_csv(traces))
    events = sum(len(trace) for trace in traces)
    print(
        f"wrote {len(traces)} cases ({events} events) to {args.out}; "
        f"drift after case {spec.drift_at}"
    )
    return 0


def _add_shared_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--log", required=True, help="input CSV event log")
    parser.add_argument("--grace", type=int, default=200, help="labels reserved for training only")
    parser.add_argument("--eval-window", type=int, default=100, help="completed cases per evaluation window")
    parser.add_argument("--ma-window", type=int, default=30, help="points in the moving average window")
    parser.add_argument("--k-min", type=int, default=2, help="smallest prefix length bucket")
    parser.add_argument("--k-max", default="auto", help="largest bucket, or 'auto' (median case length)")
    parser.add_argument("--metric", default="all", help="accuracy|precision|recall|f1|all")
    parser.add_argument("--attrs", default="", help="comma-separated event attributes to encode")
    parser.add_argument("--seed", type=int, default=0, help="seed recorded with the run")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--train-window", type=int, default=200, help="sliding training window (window-retrain)")
    parser.add_argument("--tree-depth", type=int, default=6, help="decision tree depth cap")
    parser.add_argument("--retrain-every", type=int, default=1, help="labels between window retrains")
    parser.add_argument("--nb-memory", type=int, default=300, help="labeled samples the incremental model remembers")
    parser.add_argument("--eval-every", type=int, default=1, help="labels between evaluation points")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stability-meter",
        description="Replay labeled event logs and measure classifier performance stability.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="evaluate one model over a log")
    _add_shared_run_flags(run_parser)
    run_parser.add_argument(
        "--model",
        default="incremental",
        choices=[policy.value for policy in UpdatePolicy],
        help="model update policy",
    )
    run_parser.set_defaults(func=cmd_run)

    compare_parser = commands.add_parser("compare", help="run several models over one log")
    _add_shared_run_flags(compare_parser)
    compare_parser.add_argument(
        "--models",
        default="incremental,window-retrain,static",
        help="comma-separated update policies to compare",
    )
    compare_parser.set_defaults(func=cmd_compare, metric="f1")

    rank_parser = commands.add_parser("rank", help="rank configurations for a scenario")
    rank_parser.add_argument("--meta", required=True, help="meta.json (or a JSON list of entries)")
    rank_parser.add_argument(
        "--scenario", required=True, choices=sorted(SCENARIO_PROFILES), help="business scenario"
    )
    rank_parser.add_argument("--profile", default="", help="override criteria, e.g. 'R_avg,M_avg'")
    rank_parser.add_argument("--out", default="", help="directory for ranking.json")
    rank_parser.set_defaults(func=cmd_rank)

    synth_parser = commands.add_parser("synth", help="generate a synthetic drifted log")
    synth_parser.add_argument("--cases", type=int, default=2000, help="number of cases")
    synth_parser.add_argument("--drift-at", type=int, default=1000, help="last case index of the pre-drift regime")
    synth_parser.add_argument("--noise", type=float, default=0.05, help="label flip probability")
    synth_parser.add_argument("--seed", type=int, default=0, help="generator seed")
    synth_parser.add_argument("--out", default="synth.csv", help="output CSV path")
    synth_parser.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"stability-meter: config error: {err}", file=sys.stderr)
        return 2
    except (LogFormatError, LogValueError, EmptyLogError) as err:
        print(f"stability-meter: format error: {err}", file=sys.stderr)
        return 3
    except StabilityMeterError as err:
        print(f"stability-meter: error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"stability-meter: i/o error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
