"""Command-line entry point: ``esrules {gen-data,evolve,detect,convert-ip}``.

Exit codes: 0 success, 1 I/O or data problems, 2 usage or configuration
errors.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional, Sequence

from esrules import rulebase as rb_io
from esrules.conn_model import (
    IP_MAX,
    IngestError,
    IpParseError,
    decimal_to_ip,
    ip_to_decimal,
    load_dataset,
    summarize,
    write_dataset,
)
from esrules.es_engine import ConfigError, EsConfig
from esrules.fitness import FitnessConfig, detection_metrics
from esrules.rule_model import DEFAULT_ACTION
from esrules.rulebase import CoveringConfig, RuleBaseError, apply, covering_report
from esrules.synth import ScenarioError, generate, relabeled_count, scenario_from_json

EXIT_OK, EXIT_IO, EXIT_USAGE = 0, 1, 2

_VARIANT_ALIASES = {
    "one_plus_one": "one_plus_one",
    "plus": "mu_rho_plus_lambda",
    "mu_rho_plus_lambda": "mu_rho_plus_lambda",
    "comma": "mu_rho_comma_lambda",
    "mu_rho_comma_lambda": "mu_rho_comma_lambda",
}


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"esrules: error: {msg}", file=sys.stderr)


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# gen-data

def cmd_gen_data(spec_path: str, out_path: str) -> int:
    try:
        with open(spec_path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        _err(f"cannot read scenario {spec_path}: {exc.strerror or exc}")
        return EXIT_IO
    try:
        spec = scenario_from_json(json.loads(text))
    except json.JSONDecodeError as exc:
        _err(f"{spec_path}: malformed JSON: {exc}")
        return EXIT_USAGE
    except ScenarioError as exc:
        _err(f"{spec_path}: {exc}")
        return EXIT_USAGE
    ds = generate(spec)
    try:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            write_dataset(ds, fh)
    except OSError as exc:
        _err(f"cannot write {out_path}: {exc.strerror or exc}")
        return EXIT_IO
    summary = summarize(ds)
    print(f"records: {len(ds)}")
    print(f"normal: {summary.n_normal}")
    print(f"anomalous: {summary.n_anomalous}")
    print(f"relabeled normals: {relabeled_count(spec, ds)}")
    print(f"collision probability per normal: {spec.collision_probability():.3e}")
    if summary.minima:
        for name in summary.minima:
            lo, hi = summary.minima[name], summary.maxima[name]
            if name.endswith("_ip"):
                lo, hi = decimal_to_ip(lo), decimal_to_ip(hi)
            print(f"{name}: {lo} .. {hi}")
    return EXIT_OK


# evolve

def _configs_from_args(args) -> tuple[EsConfig, FitnessConfig, CoveringConfig]:
    variant = _VARIANT_ALIASES[args.variant]
    try:
        ecfg = EsConfig(
            variant=variant, mu=args.mu, rho=args.rho, lam=args.lam, alpha=args.alpha,
            sigma0=args.sigma0, sigma_max=args.sigma_max, max_generations=args.max_generations,
            stagnation_window=args.stagnation, seed=args.seed,
        )
        fcfg = FitnessConfig(h_mode=args.h_mode, match_mode=args.fitness, fp_weight=args.beta)
        ccfg = CoveringConfig(max_rules=args.max_rules, target_coverage=args.target_coverage,
                              min_new_coverage=args.min_new_coverage)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return ecfg, fcfg, ccfg


def _configs_from_manifest(m: dict) -> tuple[EsConfig, FitnessConfig, CoveringConfig]:
    try:
        return (EsConfig.from_json(m["es"]), FitnessConfig(**m["fitness"]), CoveringConfig(**m["covering"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid manifest: {exc}") from None


def build_manifest(data_path: str, data_sha256: str, ecfg: EsConfig, fcfg: FitnessConfig,
                   ccfg: CoveringConfig, action: str) -> dict:
    return {
        "command": "evolve",
        "data_path": data_path,
        "data_sha256": data_sha256,
        "seed": ecfg.seed,
        "action": action,
        "es": ecfg.to_json(),
        "fitness": asdict(fcfg),
        "covering": asdict(ccfg),
    }


def cmd_evolve(args) -> int:
    manifest = None
    if args.manifest:
        try:
            with open(args.manifest, encoding="utf-8") as fh:
                manifest = json.load(fh)
        except OSError as exc:
            _err(f"cannot read manifest {args.manifest}: {exc.strerror or exc}")
            return EXIT_IO
        except json.JSONDecodeError as exc:
            _err(f"{args.manifest}: malformed JSON: {exc}")
            return EXIT_USAGE
    try:
        if manifest is not None:
            ecfg, fcfg, ccfg = _configs_from_manifest(manifest)
            action = manifest.get("action", DEFAULT_ACTION)
            data_path = args.data or manifest.get("data_path")
        else:
            ecfg, fcfg, ccfg = _configs_from_args(args)
            action = args.action
            data_path = args.data
        if not data_path:
            raise UsageError("a data file is required")
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE

    try:
        digest = _sha256(data_path)
        ds = load_dataset(data_path)
    except OSError as exc:
        _err(f"cannot read {data_path}: {exc.strerror or exc}")
        return EXIT_IO
    except IngestError as exc:
        _err(f"{data_path}: {exc}")
        return EXIT_IO
    if manifest is not None and manifest.get("data_sha256") not in (None, digest):
        _err(f"{data_path} does not match the manifest's data_sha256")
        return EXIT_IO

    report = covering_report(ccfg, ecfg, fcfg, ds, act=action, workers=args.workers)
    rb = report.rulebase
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        rb_io.save(rb, out / "rulebase.json")
        with open(out / "trace.csv", "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerow(("iteration", "generation", "best_fitness",
                                                          "mean_fitness", "sigma", "successes"))
            for it in report.iterations:
                it.result.write_trace(fh, header=False, prefix=(it.index,))
        with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(build_manifest(data_path, digest, ecfg, fcfg, ccfg, action), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        _err(f"cannot write outputs to {out}: {exc.strerror or exc}")
        return EXIT_IO

    dr, fpr = detection_metrics(rb.rules, ds)
    print(f"rules: {len(rb)} (stopped by {report.stopped_by})")
    for i, e in enumerate(rb.entries):
        (a, b), (c, d), (p, q) = e.rule.ranges
        print(f"  [{i}] src {decimal_to_ip(a)}-{decimal_to_ip(b)} dst {decimal_to_ip(c)}-{decimal_to_ip(d)} "
              f"port {p}-{q}: +{e.matched_anomalous} anomalous, {e.matched_normal} normal")
    print(f"detection_rate: {dr:.4f}")
    print(f"false_positive_rate: {fpr:.4f}")
    return EXIT_OK


# detect

def cmd_detect(rulebase_path: str, data_path: str, out_path: Optional[str] = None) -> int:
    try:
        rb = rb_io.load(rulebase_path)
    except OSError as exc:
        _err(f"cannot read {rulebase_path}: {exc.strerror or exc}")
        return EXIT_IO
    except RuleBaseError as exc:
        _err(f"{rulebase_path}: {exc}")
        return EXIT_USAGE
    try:
        ds = load_dataset(data_path, require_label=False)
    except OSError as exc:
        _err(f"cannot read {data_path}: {exc.strerror or exc}")
        return EXIT_IO
    except IngestError as exc:
        _err(f"{data_path}: {exc}")
        return EXIT_IO

    verdicts = apply(rb, ds)
    try:
        sink = sys.stdout if out_path is None else open(out_path, "w", encoding="utf-8", newline="")
        try:
            writer = csv.writer(sink, lineterminator="\n")
            writer.writerow(("record", "flagged", "rule_index", "action", "label"))
            for i, (v, rec) in enumerate(zip(verdicts, ds)):
                action = rb.entries[v.rule_index].rule.action if v.flagged else ""
                writer.writerow((i + 1, int(v.flagged), "" if v.rule_index is None else v.rule_index,
                                 action, rec.label.value if rec.label else ""))
        finally:
            if sink is not sys.stdout:
                sink.close()
    except OSError as exc:
        _err(f"cannot write {out_path}: {exc.strerror or exc}")
        return EXIT_IO

    report = sys.stderr if out_path is None else sys.stdout
    flagged = sum(v.flagged for v in verdicts)
    print(f"flagged: {flagged} of {len(ds)}", file=report)
    if ds.labeled and len(ds):
        dr, fpr = detection_metrics(rb.rules, ds)
        print(f"detection_rate: {dr:.4f}", file=report)
        print(f"false_positive_rate: {fpr:.4f}", file=report)
    return EXIT_OK


# convert-ip

def cmd_convert_ip(value: str) -> int:
    text = value.strip()
    try:
        if text.isascii() and text.isdigit():
            v = int(text)
            if v > IP_MAX:
                raise IpParseError(f"{text} exceeds {IP_MAX}")
            print(decimal_to_ip(v))
        else:
            print(ip_to_decimal(text))
    except IpParseError as exc:
        _err(str(exc))
        return EXIT_USAGE
    return EXIT_OK


def _positive_float(text: str) -> float:
    v = float(text)
    if math.isnan(v):
        raise argparse.ArgumentTypeError("NaN not allowed")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="esrules", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic labeled dataset from a scenario JSON")
    p.add_argument("spec")
    p.add_argument("out")

    p = sub.add_parser("evolve", help="evolve a rule base by sequential covering")
    p.add_argument("data", nargs="?", help="labeled CSV (optional with --manifest)")
    p.add_argument("--manifest", help="re-run exactly from a manifest.json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variant", choices=sorted(_VARIANT_ALIASES), default="one_plus_one")
    p.add_argument("--mu", type=int, default=1)
    p.add_argument("--rho", type=int, default=1)
    p.add_argument("--lambda", dest="lam", type=int, default=1)
    p.add_argument("--alpha", type=_positive_float, default=1.2)
    p.add_argument("--sigma0", type=_positive_float, default=0.05)
    p.add_argument("--sigma-max", type=_positive_float, default=1.0)
    p.add_argument("--max-generations", type=int, default=5000)
    p.add_argument("--stagnation", type=int, default=500)
    p.add_argument("--fitness", choices=("paper", "penalized"), default="penalized")
    p.add_argument("--h-mode", choices=("width", "literal"), default="width")
    p.add_argument("--beta", type=_positive_float, default=1.0)
    p.add_argument("--max-rules", type=int, default=10)
    p.add_argument("--target-coverage", type=_positive_float, default=0.95)
    p.add_argument("--min-new-coverage", type=int, default=1)
    p.add_argument("--action", default=DEFAULT_ACTION)
    p.add_argument("--workers", type=int, default=1, help="threads for offspring evaluation")
    p.add_argument("--out", default="esrules_run", help="output directory")

    p = sub.add_parser("detect", help="apply a rule base to a dataset")
    p.add_argument("rulebase")
    p.add_argument("data")
    p.add_argument("--out", help="verdict CSV path (default: standard output)")

    p = sub.add_parser("convert-ip", help="dotted quad <-> decimal")
    p.add_argument("value")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "gen-data":
        return cmd_gen_data(args.spec, args.out)
    if args.command == "evolve":
        return cmd_evolve(args)
    if args.command == "detect":
        return cmd_detect(args.rulebase, args.data, args.out)
    return cmd_convert_ip(args.value)


if __name__ == "__main__":
    sys.exit(main())
