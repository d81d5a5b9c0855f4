"""Command-line interface: subcommands, flags, and output artifacts."""

import hashlib
import json

import pytest

from coalsim.cli import main


def _strip_meta(path):
    doc = json.loads(path.read_text())
    doc.pop("meta", None)
    return json.dumps(doc, sort_keys=True)


def test_microbench_writes_csv_and_fits(tmp_path):
    out = tmp_path / "mb"
    rc = main(["microbench", "--seed", "3", "--reps", "4", "--out", str(out), "--check"])
    assert rc == 0
    lines = (out / "microbench.csv").read_text().splitlines()
    assert lines[0] == "width_bytes,n_unique,rep,time"
    assert len(lines) == 1 + 4 * 32 * 4  # header + widths * n * reps
    fits = (out / "microbench_fits.csv").read_text().splitlines()
    assert len(fits) == 1 + 6


def test_microbench_deterministic_output(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["microbench", "--seed", "3", "--reps", "2", "--out", str(out1)])
    main(["microbench", "--seed", "3", "--reps", "2", "--out", str(out2)])
    h1 = hashlib.sha256((out1 / "microbench.csv").read_bytes()).hexdigest()
    h2 = hashlib.sha256((out2 / "microbench.csv").read_bytes()).hexdigest()
    assert h1 == h2
    assert _strip_meta(out1 / "microbench.json") == _strip_meta(out2 / "microbench.json")


def test_attack_single_byte_and_csv(tmp_path):
    out = tmp_path / "atk"
    rc = main(
        ["attack", "--seed", "11", "--samples", "3000", "--byte", "5", "--out", str(out)]
    )
    assert rc == 0
    lines = (out / "correlations.csv").read_text().splitlines()
    assert lines[0] == "byte_pos,guess,correlation"
    assert len(lines) == 1 + 256
    doc = json.loads((out / "attack.json").read_text())
    assert doc["schema_version"] == 1
    assert len(doc["report"]["bytes"]) == 1
    assert doc["report"]["bytes"][0]["byte_pos"] == 5


def test_attack_expect_success_exit_codes(tmp_path):
    ok = main(
        ["attack", "--seed", "11", "--samples", "9000", "--out", str(tmp_path / "good"),
         "--expect-success"]
    )
    assert ok == 0
    bad = main(
        ["attack", "--seed", "11", "--samples", "64", "--out", str(tmp_path / "bad"),
         "--expect-success"]
    )
    assert bad == 1


def test_attack_identical_reruns_byte_identical(tmp_path):
    args = ["attack", "--seed", "2", "--samples", "500", "--byte", "3"]
    main(args + ["--out", str(tmp_path / "r1"), "--store"])
    main(args + ["--out", str(tmp_path / "r2"), "--store"])
    assert _strip_meta(tmp_path / "r1" / "attack.json") == _strip_meta(tmp_path / "r2" / "attack.json")
    assert (tmp_path / "r1" / "samples.jsonl").read_bytes() == (
        tmp_path / "r2" / "samples.jsonl"
    ).read_bytes()
    assert (tmp_path / "r1" / "correlations.csv").read_bytes() == (
        tmp_path / "r2" / "correlations.csv"
    ).read_bytes()


def test_attack_parallel_degree_does_not_change_output(tmp_path):
    base = ["attack", "--seed", "7", "--samples", "800", "--byte", "0"]
    main(base + ["--out", str(tmp_path / "p1"), "--parallel", "1"])
    main(base + ["--out", str(tmp_path / "p2"), "--parallel", "2"])
    assert _strip_meta(tmp_path / "p1" / "attack.json") == _strip_meta(tmp_path / "p2" / "attack.json")


def test_config_file_round_trip(tmp_path):
    from coalsim import campaign as cp

    cfg = cp.CampaignConfig(seed=5, samples=400)
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg.to_dict()))
    out = tmp_path / "out"
    rc = main(["attack", "--config", str(cfg_path), "--byte", "1", "--out", str(out)])
    assert rc == 0
    doc = json.loads((out / "attack.json").read_text())
    assert doc["config"]["seed"] == 5
    assert doc["config"]["samples"] == 400


def test_defend_subset_rows(tmp_path):
    out = tmp_path / "def"
    rc = main(
        [
            "defend", "--seed", "31", "--samples", "10000", "--out", str(out),
            "--rows", "baseline,dynamic", "--step", "1000",
        ]
    )
    assert rc == 0
    lines = (out / "defense_sweep.csv").read_text().splitlines()
    assert len(lines) == 3
    doc = json.loads((out / "defense_sweep.json").read_text())
    names = [r["name"] for r in doc["rows"]]
    assert names == ["baseline", "dynamic"]


def test_analyze_empty_is_usage_error(tmp_path):
    assert main(["analyze", "--out", str(tmp_path)]) == 2


def test_analyze_rejects_bad_schema(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 999}))
    assert main(["analyze", str(bad), "--out", str(tmp_path)]) == 2


def test_analyze_reads_attack_report(tmp_path):
    atk_out = tmp_path / "atk"
    main(["attack", "--seed", "11", "--samples", "4000", "--out", str(atk_out)])
    rc = main(["analyze", str(atk_out / "attack.json"), "--out", str(tmp_path / "an")])
    assert rc == 0
    doc = json.loads((tmp_path / "an" / "analysis.json").read_text())
    entry = doc["campaigns"][0]
    assert "rho_peak_mean" in entry and "predicted_min_samples" in entry


def test_calibrate_reports_table(tmp_path):
    out = tmp_path / "cal"
    rc = main(["calibrate", "--seed", "1", "--reps", "30", "--samples", "2000", "--out", str(out)])
    assert rc == 0
    doc = json.loads((out / "calibration.json").read_text())
    assert set(doc["regression_table"]) == {"8", "16", "32", "64", "fixed_random", "dynamic_random"}
    assert doc["baseline_rho_peak_mean"] > 0


def test_seed_required_without_config():
    with pytest.raises(SystemExit):
        main(["attack", "--out", "/tmp/x"])
