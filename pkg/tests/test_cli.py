import csv
import json

import pytest

from stability_meter.cli import main
from stability_meter.synthgen import DriftLogSpec, generate, to_csv


@pytest.fixture()
def small_log(tmp_path):
    path = tmp_path / "small.csv"
    path.write_text(to_csv(generate(DriftLogSpec(n_cases=60, drift_at=30, seed=1))))
    return path


def _run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_synth_writes_a_log(tmp_path, capsys):
    out = tmp_path / "drift.csv"
    code, stdout, _ = _run_cli(
        ["synth", "--cases", "30", "--drift-at", "15", "--seed", "3", "--out", str(out)],
        capsys,
    )
    assert code == 0
    assert "30 cases" in stdout
    rows = list(csv.DictReader(out.open()))
    assert {row["case_id"] for row in rows} == {f"case_{i:05d}" for i in range(1, 31)}


def test_run_smoke_produces_all_artifacts(small_log, tmp_path, capsys):
    out = tmp_path / "artifacts"
    code, stdout, _ = _run_cli(
        [
            "run",
            "--log", str(small_log),
            "--model", "incremental",
            "--grace", "20",
            "--eval-window", "10",
            "--out", str(out),
        ],
        capsys,
    )
    assert code == 0
    assert (out / "performance.csv").exists()
    meta = json.loads((out / "meta.json").read_text())
    assert meta["configuration"]["model"] == "incremental"
    assert meta["series"], "expected at least one evaluated series"
    for entry in meta["series"]:
        plot = out / "plots" / f"series_k{entry['bucket']}_{entry['metric']}.csv"
        assert plot.exists()
    assert "k_max=" in stdout


def test_run_is_byte_identical_across_repeats(small_log, tmp_path, capsys):
    outs = []
    for name in ("first", "second"):
        out = tmp_path / name
        code, _, _ = _run_cli(
            [
                "run",
                "--log", str(small_log),
                "--grace", "20",
                "--eval-window", "10",
                "--out", str(out),
            ],
            capsys,
        )
        assert code == 0
        outs.append(out)
    for artifact in ("performance.csv", "meta.json"):
        assert (outs[0] / artifact).read_bytes() == (outs[1] / artifact).read_bytes()


def test_performance_csv_has_the_documented_columns(small_log, tmp_path, capsys):
    out = tmp_path / "cols"
    code, _, _ = _run_cli(
        ["run", "--log", str(small_log), "--grace", "20", "--eval-window", "10",
         "--out", str(out), "--metric", "accuracy"],
        capsys,
    )
    assert code == 0
    with (out / "performance.csv").open() as handle:
        reader = csv.DictReader(handle)
        assert reader.fieldnames == [
            "label_index", "bucket", "metric", "value", "ma", "std", "lb", "ub",
            "is_drop", "drop_id",
        ]
        row = next(reader)
        assert row["metric"] == "accuracy"
        assert 0.0 <= float(row["value"]) <= 1.0


def test_auto_k_max_resolves_to_the_median_case_length(tmp_path, capsys):
    lengths = [11, 12, 12, 13, 10, 12, 14, 12, 11, 13, 12] * 4
    lines = ["case_id,activity,timestamp,label"]
    clock = 0
    for index, length in enumerate(lengths):
        for position in range(length):
            label = str(index % 2) if position == length - 1 else ""
            lines.append(f"c{index},a{position},{clock},{label}")
            clock += 1
    log = tmp_path / "median12.csv"
    log.write_text("\n".join(lines) + "\n")
    code, stdout, _ = _run_cli(
        ["run", "--log", str(log), "--grace", "5", "--eval-window", "5",
         "--out", str(tmp_path / "m12")],
        capsys,
    )
    assert code == 0
    assert "k_max=12 (auto)" in stdout


def test_compare_emits_rows_per_config_and_rankings(small_log, tmp_path, capsys):
    out = tmp_path / "cmp"
    code, stdout, _ = _run_cli(
        [
            "compare",
            "--log", str(small_log),
            "--models", "incremental,static",
            "--grace", "20",
            "--eval-window", "10",
            "--out", str(out),
        ],
        capsys,
    )
    assert code == 0
    payload = json.loads((out / "compare.json").read_text())
    assert payload["metric"] == "f1"
    assert set(payload["rankings"]) == {"hf-lr", "lf-hr", "hf-hr"}
    configs = {row["config"] for row in payload["rows"]}
    assert configs == {"incremental", "static"}
    buckets = {row["bucket"] for row in payload["rows"] if row["config"] == "incremental"}
    assert buckets == {row["bucket"] for row in payload["rows"] if row["config"] == "static"}
    assert "scenario hf-hr" in stdout
    assert (out / "incremental" / "meta.json").exists()
    assert (out / "static" / "meta.json").exists()


def test_compare_needs_two_models(small_log, capsys):
    code, _, stderr = _run_cli(
        ["compare", "--log", str(small_log), "--models", "incremental"], capsys
    )
    assert code == 2
    assert "config error" in stderr and stderr.count("\n") == 1


def test_compare_of_identical_configs_yields_identical_rows(small_log, tmp_path, capsys):
    out = tmp_path / "twin"
    code, _, _ = _run_cli(
        [
            "compare",
            "--log", str(small_log),
            "--models", "incremental,incremental",
            "--grace", "20",
            "--eval-window", "10",
            "--out", str(out),
        ],
        capsys,
    )
    assert code == 0
    payload = json.loads((out / "compare.json").read_text())
    rows = payload["rows"]
    half = len(rows) // 2
    assert rows[:half] == rows[half:]


def test_run_with_attribute_encoding_enabled(small_log, tmp_path, capsys):
    # the schema must reach the stream encoder, not just the model builder
    for policy in ("incremental", "window-retrain", "static"):
        out = tmp_path / f"attrs-{policy}"
        code, _, _ = _run_cli(
            [
                "run",
                "--log", str(small_log),
                "--model", policy,
                "--grace", "20",
                "--eval-window", "10",
                "--metric", "f1",
                "--attrs", "amount,channel",
                "--out", str(out),
            ],
            capsys,
        )
        assert code == 0
        meta = json.loads((out / "meta.json").read_text())
        assert meta["configuration"]["attrs"] == ["amount", "channel"]
        assert meta["series"]


def test_run_with_only_a_log_flag_succeeds(small_log, capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, _, _ = _run_cli(["run", "--log", str(small_log)], capsys)
    assert code == 0
    meta = json.loads((tmp_path / "out" / "meta.json").read_text())
    assert meta["configuration"]["grace"] == 200
    assert (tmp_path / "out" / "performance.csv").exists()


def test_rank_reads_custom_entries_and_writes_ranking(tmp_path, capsys):
    entries = [
        {"name": "C1", "avg_metric": 0.69, "drops": 44, "volatility": 0.058,
         "max_magnitude": 0.290, "avg_magnitude": 0.088, "recovery_rate": 6.568},
        {"name": "C2", "avg_metric": 0.95, "drops": 26, "volatility": 0.018,
         "max_magnitude": 0.096, "avg_magnitude": 0.032, "recovery_rate": 7.692},
        {"name": "C3", "avg_metric": 0.94, "drops": 24, "volatility": 0.024,
         "max_magnitude": 0.251, "avg_magnitude": 0.041, "recovery_rate": 11.042},
    ]
    meta = tmp_path / "meta.json"
    meta.write_text(json.dumps(entries))
    code, stdout, _ = _run_cli(
        ["rank", "--meta", str(meta), "--scenario", "hf-hr"], capsys
    )
    assert code == 0
    assert stdout.splitlines()[1].lstrip().startswith("1. C2")
    ranking = json.loads((tmp_path / "ranking.json").read_text())
    assert ranking["ranking"][0] == "C2"


def test_rank_profile_override(tmp_path, capsys):
    meta = tmp_path / "meta.json"
    meta.write_text(json.dumps([
        {"name": "A", "avg_metric": 0.5, "drops": 9, "volatility": 0.9,
         "max_magnitude": 0.1, "avg_magnitude": 0.05, "recovery_rate": 1.0},
        {"name": "B", "avg_metric": 0.5, "drops": 1, "volatility": 0.1,
         "max_magnitude": 0.2, "avg_magnitude": 0.15, "recovery_rate": 9.0},
    ]))
    code, stdout, _ = _run_cli(
        ["rank", "--meta", str(meta), "--scenario", "hf-lr", "--profile", "R_avg"],
        capsys,
    )
    assert code == 0
    assert stdout.splitlines()[1].lstrip().startswith("1. A")


def test_missing_log_is_a_single_line_io_error(tmp_path, capsys):
    code, _, stderr = _run_cli(
        ["run", "--log", str(tmp_path / "nope.csv")], capsys
    )
    assert code == 4
    assert stderr.startswith("stability-meter: i/o error:")
    assert stderr.count("\n") == 1


def test_malformed_log_is_a_format_error(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("case_id,activity,timestamp\nx,a,1\n")
    code, _, stderr = _run_cli(["run", "--log", str(bad)], capsys)
    assert code == 3
    assert "format error" in stderr and "label" in stderr


def test_bad_config_is_a_config_error(small_log, capsys):
    code, _, stderr = _run_cli(
        ["run", "--log", str(small_log), "--ma-window", "0"], capsys
    )
    assert code == 2
    assert "config error" in stderr


def test_threads_env_is_validated(small_log, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("STABILITY_METER_THREADS", "zero")
    code, _, stderr = _run_cli(
        ["run", "--log", str(small_log), "--grace", "20", "--out", str(tmp_path / "t")],
        capsys,
    )
    assert code == 2
    assert "STABILITY_METER_THREADS" in stderr
    monkeypatch.setenv("STABILITY_METER_THREADS", "2")
    code, _, _ = _run_cli(
        ["run", "--log", str(small_log), "--grace", "20", "--eval-window", "10",
         "--out", str(tmp_path / "t2")],
        capsys,
    )
    assert code == 0
