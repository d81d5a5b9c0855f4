"""Command-line front end: microbench, attack, defend, analyze, calibrate.

Every command is a pure function of (config file, seed); outputs are CSV
(RFC 4180, plot-ready) and JSON reports with embedded config snapshots.
Wall-clock metadata lives under a separate "meta" key so the simulated
payload hashes identically across runs.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import campaign as cp
from . import stats

WIDTH_ORDER = ("8", "16", "32", "64")


def _load_cfg(args) -> cp.CampaignConfig:
    if args.config:
        cfg = cp.load_config(args.config)
    else:
        if args.seed is None:
            raise SystemExit("either --config or --seed is required")
        cfg = cp.CampaignConfig(seed=args.seed)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "samples", None) is not None:
        cfg = replace(cfg, samples=args.samples)
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict, meta: dict | None = None):
    doc = dict(payload)
    doc["meta"] = meta or {}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_microbench(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    t0 = time.time()
    rows, points = cp.microbench_table(args.reps, cfg.timing, seed=cfg.seed)
    with open(out / "microbench.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["width_bytes", "n_unique", "rep", "time"])
        for label in WIDTH_ORDER:
            for n, pts in sorted(points[label].items()):
                for rep, p in enumerate(pts):
                    w.writerow([label, n, rep, repr(p.time)])
    fit_rows = {
        label: {
            "beta1": est.fit.beta1,
            "beta0": est.fit.beta0,
            "sigma_eps_sq": est.fit.sigma_eps_sq,
            "snr": est.snr,
            "r_squared": est.fit.r_squared,
        }
        for label, est in rows.items()
    }
    with open(out / "microbench_fits.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "beta1", "beta0", "sigma_eps_sq", "snr", "r_squared"])
        for label, r in fit_rows.items():
            w.writerow([label, *(repr(r[k]) for k in ("beta1", "beta0", "sigma_eps_sq", "snr", "r_squared"))])
    _write_json(
        out / "microbench.json",
        {
            "schema_version": cp.SCHEMA_VERSION,
            "config": cfg.to_dict(),
            "reps": args.reps,
            "fits": fit_rows,
        },
        meta={"wall_clock_s": time.time() - t0},
    )
    snrs = [rows[l].snr for l in WIDTH_ORDER]
    ordered = (
        all(a > b for a, b in zip(snrs, snrs[1:]))
        and rows["fixed_random"].snr < rows["64"].snr
        and rows["dynamic_random"].snr < rows["fixed_random"].snr
    )
    for label in (*WIDTH_ORDER, "fixed_random", "dynamic_random"):
        est = rows[label]
        print(
            f"{label:>14}: beta1={est.fit.beta1:9.3f} beta0={est.fit.beta0:8.1f} "
            f"snr={est.snr:8.4f}"
        )
    if args.check and not ordered:
        print("SNR ordering violated", file=sys.stderr)
        return 1
    return 0


def cmd_attack(args) -> int:
    cfg = _load_cfg(args)
    if args.byte is not None:
        cfg = replace(cfg, attack=replace(cfg.attack, target_bytes=(args.byte,)))
    out = _out_dir(args)
    t0 = time.time()
    ks = cfg.key_schedule()
    truth = bytes(ks.round_keys[10])
    data = cp.collect(cfg, parallel=args.parallel)
    report = cp.attack_full(data.samples, cfg.attack, truth=truth)
    crosscheck = cp.crosscheck_scalars(data, truth)
    min_samples = None
    if args.probe_step:
        min_samples = cp.measured_min_samples(data, truth, step=args.probe_step)["per_byte"]
        min_samples = {str(k): v for k, v in min_samples.items()}
    if args.store:
        cp.write_sample_store(out / "samples.jsonl", data.samples)
    with open(out / "correlations.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["byte_pos", "guess", "correlation"])
        for rep in report.reports:
            for guess in range(256):
                w.writerow([rep.byte_pos, guess, repr(float(rep.correlations[guess]))])
    payload = {
        "schema_version": cp.SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "true_round10_key": truth.hex(),
        "true_master_key": ks.master.hex(),
        "mean_kernel_time": data.mean_time,
        "crosscheck": crosscheck,
        "measured_min_samples": min_samples,
        "report": report.to_json_dict(),
    }
    _write_json(out / "attack.json", payload, meta={"wall_clock_s": time.time() - t0})
    recovered = report.recovered_master_key
    print(f"samples: {report.samples_used}")
    print(f"recovered master key: {recovered.hex() if recovered else None}")
    print(f"success: {report.success}")
    if args.expect_success and not report.success:
        print("expected success but the key was not fully recovered", file=sys.stderr)
        return 1
    return 0


def cmd_defend(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    t0 = time.time()
    configs = cp.default_defense_configs(cfg.seed, cfg.samples, cfg.timing)
    if args.rows:
        wanted = args.rows.split(",")
        missing = [r for r in wanted if r not in configs]
        if missing:
            raise SystemExit(f"unknown defense rows: {missing}")
        configs = {k: configs[k] for k in ["baseline"] + [r for r in wanted if r != "baseline"]}
    rows = cp.run_defense_sweep(
        configs, min_samples_step=args.step, sample_cap=args.cap, parallel=args.parallel
    )
    with open(out / "defense_sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "name",
                "rho_peak_mean",
                "rho_ave_mean",
                "min_samples",
                "saturated",
                "min_samples_multiplier",
                "mean_kernel_time",
                "relative_performance",
                "samples",
            ]
        )
        for row in rows:
            w.writerow([row[k] if row[k] is not None else "" for k in (
                "name", "rho_peak_mean", "rho_ave_mean", "min_samples", "saturated",
                "min_samples_multiplier", "mean_kernel_time", "relative_performance", "samples")])
    _write_json(
        out / "defense_sweep.json",
        {"schema_version": cp.SCHEMA_VERSION, "config": cfg.to_dict(), "rows": rows},
        meta={"wall_clock_s": time.time() - t0},
    )
    for row in rows:
        print(
            f"{row['name']:>22}: rho_peak={row['rho_peak_mean']:.4f} "
            f"min_samples={row['min_samples']} perf={row['relative_performance']:.3f}"
        )
    return 0


def cmd_analyze(args) -> int:
    out = _out_dir(args)
    t0 = time.time()
    if not args.inputs:
        print("analyze requires at least one campaign result file", file=sys.stderr)
        return 2
    docs = []
    for path in args.inputs:
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("schema_version") != cp.SCHEMA_VERSION:
            print(f"{path}: incompatible schema_version", file=sys.stderr)
            return 2
        docs.append((path, doc))
    analysis = {"schema_version": cp.SCHEMA_VERSION, "campaigns": []}
    baseline_doc = None
    for path, doc in docs:
        if doc.get("config", {}).get("rotate_every") in ("off", None):
            baseline_doc = doc
            break
    for path, doc in docs:
        entry = {"path": str(path)}
        rep = doc.get("report")
        if rep:
            peaks = [b["rho_peak"] for b in rep["bytes"] if b["rho_peak"] is not None]
            aves = [b["rho_ave"] for b in rep["bytes"] if b["rho_ave"] is not None]
            if peaks and aves:
                rho_p, rho_a = float(np.mean(peaks)), float(np.mean(aves))
                entry["rho_peak_mean"] = rho_p
                entry["rho_ave_mean"] = rho_a
                if rho_p > rho_a:
                    entry["predicted_min_samples"] = cp.predicted_min_samples(rho_p, rho_a)
        ms = doc.get("measured_min_samples")
        if ms and all(v is not None for v in ms.values()):
            entry["measured_min_samples"] = max(ms.values())
            if "predicted_min_samples" in entry:
                entry["predicted_vs_measured_ratio"] = (
                    entry["predicted_min_samples"] / entry["measured_min_samples"]
                )
        checks = doc.get("crosscheck")
        if checks:
            # noise attenuation: measured correlation vs the SNR formula
            hw_errs = [
                abs(c["rho_to"] - _attenuated(c["snr"])) / _attenuated(c["snr"])
                for c in checks
            ]
            entry["hw_attenuation_max_rel_err"] = max(hw_errs)
            rotated = doc.get("config", {}).get("rotate_every") not in ("off", None)
            if rotated and baseline_doc is not None and baseline_doc.get("crosscheck"):
                base_by_byte = {c["byte"]: c for c in baseline_doc["crosscheck"]}
                sw = []
                for c in checks:
                    ref = base_by_byte.get(c["byte"])
                    if ref is None:
                        continue
                    formula = stats.attenuate_sw(
                        stats.AttenuationInputs(
                            rho_tn=ref["rho_tn"],
                            p_match=c["p_match"],
                            sigma_n=c["sigma_n"],
                            sigma_o=c["sigma_o"],
                        )
                    )
                    sw.append(abs(c["rho_tn"] - formula) / max(c["rho_tn"], 1e-12))
                if sw:
                    entry["sw_attenuation_mean_rel_err"] = float(np.mean(sw))
        analysis["campaigns"].append(entry)
    _write_json(out / "analysis.json", analysis, meta={"wall_clock_s": time.time() - t0})
    for entry in analysis["campaigns"]:
        print(entry)
    return 0


def _attenuated(snr_value: float) -> float:
    return stats.attenuate_hw(1.0, snr_value)


def cmd_calibrate(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(args)
    t0 = time.time()
    rows, _ = cp.microbench_table(args.reps, cfg.timing, seed=cfg.seed)
    base = replace(cfg, samples=min(cfg.samples, 20000))
    ks = base.key_schedule()
    truth = bytes(ks.round_keys[10])
    data = cp.collect(base, parallel=args.parallel)
    est = cp.rho_estimates(data, truth)
    payload = {
        "schema_version": cp.SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "regression_table": {
            label: {
                "beta1": r.fit.beta1,
                "beta0": r.fit.beta0,
                "snr": r.snr,
            }
            for label, r in rows.items()
        },
        "baseline_rho_peak_mean": est["rho_peak_mean"],
        "baseline_rho_ave_mean": est["rho_ave_mean"],
        "predicted_min_samples": cp.predicted_min_samples(
            est["rho_peak_mean"], est["rho_ave_mean"]
        ),
    }
    _write_json(out / "calibration.json", payload, meta={"wall_clock_s": time.time() - t0})
    print(json.dumps({k: v for k, v in payload.items() if k != "config"}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="coalsim",
        description="Timing side-channel laboratory for GPU memory coalescing",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, samples_default=None):
        p.add_argument("--config", type=str, default=None, help="JSON campaign config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--samples", type=int, default=samples_default)
        p.add_argument("--out", type=str, default="out")
        p.add_argument("--parallel", type=int, default=1)

    p = sub.add_parser("microbench", help="unique-address sweep and regression table")
    common(p)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--check", action="store_true", help="exit nonzero if SNR ordering fails")
    p.set_defaults(fn=cmd_microbench)

    p = sub.add_parser("attack", help="collect samples and run key recovery")
    common(p)
    p.add_argument("--byte", type=int, default=None, choices=range(16))
    p.add_argument("--expect-success", action="store_true")
    p.add_argument("--store", action="store_true", help="write samples.jsonl")
    p.add_argument(
        "--probe-step", type=int, default=None,
        help="also measure per-byte stable-rank-1 sample counts at this step",
    )
    p.set_defaults(fn=cmd_attack)

    p = sub.add_parser("defend", help="sweep defence configurations")
    common(p)
    p.add_argument("--rows", type=str, default=None, help="comma-separated row names")
    p.add_argument("--step", type=int, default=1000, help="min-samples probe step")
    p.add_argument(
        "--cap", type=int, default=10_000_000,
        help="per-row sample budget cap; saturated rows report the cap-based bound",
    )
    p.set_defaults(fn=cmd_defend)

    p = sub.add_parser("analyze", help="model cross-checks over stored results")
    p.add_argument("inputs", nargs="*", help="attack.json result files")
    p.add_argument("--out", type=str, default="out")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("calibrate", help="fit the simulator's own regression table")
    common(p, samples_default=20000)
    p.add_argument("--reps", type=int, default=2000)
    p.set_defaults(fn=cmd_calibrate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
