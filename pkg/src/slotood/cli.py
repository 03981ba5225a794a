"""Command-line interface.

Five subcommands cover the full pipeline:

  infer        feature file + weight bundle -> slot-logits records
  build-stats  training records -> co-occurrence table
  score        records + table -> per-sample scores (CSV)
  eval         scores -> threshold, FPR@TPR, AUROC report (JSON)
  simulate     synthetic end-to-end run into a directory

Exit codes: 0 on success, 2 for usage errors, 3 for malformed or
inconsistent data, 4 for numeric failures during inference. All file
outputs are written atomically and are byte-deterministic for a fixed
seed and inputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from typing import List, Optional

from .bundle import BundleFormatError, load_bundle
from .evaluation import EVALUATION_MODES, evaluate
from .patterns import TableFormatError, build_table, load_table, save_table
from .records import (
    FeatureFormatError,
    RecordFormatError,
    ScoredCsvFormatError,
    atomic_write_bytes,
    read_features,
    read_records,
    read_scored_csv,
    write_records,
    write_report,
    write_scored_csv,
)
from .scoring import BASELINE_NAMES, score_sample
from .slotcore import (
    DATASET_TAGS,
    SlotLogitsRecord,
    aggregate_logits,
    init_slots,
    slot_attention_forward,
    slot_logits,
)
from .synthbench import default_config, run_benchmark

__all__ = ["main"]


def _cmd_infer(args) -> int:
    with open(args.bundle, "rb") as fh:
        bundle = load_bundle(fh.read())
    maps = read_features(args.features)
    records: List[SlotLogitsRecord] = []
    for index, fmap in enumerate(maps):
        init = init_slots(bundle.attention, seed=args.seed + index)
        slot_set = slot_attention_forward(
            fmap, bundle.attention, init, normalization=args.normalization
        )
        per_slot = slot_logits(slot_set, bundle.classifier)
        records.append(
            SlotLogitsRecord(
                sample_id=f"{args.id_prefix}-{index:05d}",
                slot_logits=per_slot,
                agg_logits=aggregate_logits(per_slot),
                dataset_tag=args.tag,
            )
        )
    write_records(args.output, records)
    print(f"wrote {len(records)} records to {args.output}")
    return 0


def _cmd_build_stats(args) -> int:
    records = read_records(args.records)
    if not records:
        print("error: record file is empty", file=sys.stderr)
        return 3
    num_slots, num_classes = records[0].slot_logits.shape
    table = build_table(
        records, num_slots, num_classes, min_support=args.min_support
    )
    atomic_write_bytes(args.output, save_table(table))
    print(
        f"built table with {len(table.patterns)} patterns "
        f"from {len(records)} records -> {args.output}"
    )
    return 0


def _cmd_score(args) -> int:
    records = read_records(args.records)
    with open(args.table, "rb") as fh:
        table = load_table(fh.read())
    for rec in records:
        if rec.slot_logits.shape != (table.num_slots, table.num_classes):
            print(
                f"error: record {rec.sample_id!r} has shape "
                f"{rec.slot_logits.shape} but the table was built for "
                f"{(table.num_slots, table.num_classes)}",
                file=sys.stderr,
            )
            return 3
    samples = [score_sample(rec, table) for rec in records]
    write_scored_csv(args.output, samples)
    print(f"scored {len(samples)} records -> {args.output}")
    return 0


def _cmd_eval(args) -> int:
    samples = read_scored_csv(args.scores)
    labeled = [s for s in samples if s.dataset_tag != "unlabeled"]
    dropped = len(samples) - len(labeled)
    if dropped:
        print(
            f"warning: ignoring {dropped} unlabeled rows", file=sys.stderr
        )
    report = evaluate(
        labeled,
        mode=args.mode,
        score_key=args.score_key,
        target_tpr=args.target_tpr,
        recalibrate_per_scenario=args.recalibrate_per_scenario,
    )
    write_report(args.output, report)
    print(
        f"{args.mode} {args.score_key}: auroc={report.auroc:.4f} "
        f"fpr@{args.target_tpr:g}={report.fpr95:.4f} -> {args.output}"
    )
    return 0


def _cmd_simulate(args) -> int:
    config = default_config()
    overrides = {"seed": args.seed}
    if args.train_samples is not None:
        overrides["train_samples"] = args.train_samples
    if args.eval_samples is not None:
        overrides["eval_samples"] = args.eval_samples
    config = dataclasses.replace(config, **overrides)
    result = run_benchmark(config)

    os.makedirs(args.outdir, exist_ok=True)
    reports_dir = os.path.join(args.outdir, "reports")
    os.makedirs(reports_dir, exist_ok=True)

    split_files = {
        "train": "train.jsonl",
        "id": "id_test.jsonl",
        "csid": "csid.jsonl",
        "near": "near.jsonl",
        "far": "far.jsonl",
    }
    for name, filename in split_files.items():
        write_records(
            os.path.join(args.outdir, filename),
            list(result.splits[name].records),
        )
    test_all = [
        rec
        for name in ("id", "csid", "near", "far")
        for rec in result.splits[name].records
    ]
    write_records(os.path.join(args.outdir, "test_all.jsonl"), test_all)
    atomic_write_bytes(
        os.path.join(args.outdir, "table.json"), save_table(result.table)
    )
    scored_all = [
        s
        for name in ("id", "csid", "near", "far")
        for s in result.scored[name]
    ]
    write_scored_csv(os.path.join(args.outdir, "scored.csv"), scored_all)
    for method, by_subset in result.reports.items():
        for subset, by_mode in by_subset.items():
            for mode, report in by_mode.items():
                write_report(
                    os.path.join(reports_dir, f"{method}_{subset}_{mode}.json"),
                    report,
                )
    oco = result.reports["oco"]["all"]["standard"]
    print(
        f"simulated {len(test_all)} eval records "
        f"(seed {config.seed}) into {args.outdir}; "
        f"oco standard auroc={oco.auroc:.4f}"
    )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slotood",
        description="Object co-occurrence OOD detection over slot logits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "infer", help="run slot attention over a feature file"
    )
    p.add_argument("--bundle", required=True, help="weight bundle path")
    p.add_argument("--features", required=True, help="feature file path")
    p.add_argument("--output", required=True, help="output record file (JSONL)")
    p.add_argument("--seed", type=int, default=0, help="base slot-init seed")
    p.add_argument(
        "--normalization",
        choices=("slot", "key"),
        default="slot",
        help="attention softmax axis",
    )
    p.add_argument(
        "--tag", choices=DATASET_TAGS, default="unlabeled",
        help="dataset tag stamped on every record",
    )
    p.add_argument(
        "--id-prefix", default="sample", help="sample id prefix"
    )
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser(
        "build-stats", help="build a co-occurrence table from records"
    )
    p.add_argument("--records", required=True, help="training record file")
    p.add_argument("--output", required=True, help="output table (JSON)")
    p.add_argument(
        "--min-support",
        type=int,
        default=1,
        help="drop patterns seen fewer times than this",
    )
    p.set_defaults(func=_cmd_build_stats)

    p = sub.add_parser("score", help="score records against a table")
    p.add_argument("--records", required=True, help="record file to score")
    p.add_argument("--table", required=True, help="co-occurrence table")
    p.add_argument("--output", required=True, help="output CSV")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("eval", help="compute detection metrics from scores")
    p.add_argument("--scores", required=True, help="scored CSV")
    p.add_argument("--output", required=True, help="output report (JSON)")
    p.add_argument("--mode", choices=EVALUATION_MODES, default="standard")
    p.add_argument(
        "--score-key",
        choices=("oco",) + BASELINE_NAMES,
        default="oco",
        help="which score column to evaluate",
    )
    p.add_argument("--target-tpr", type=float, default=0.95)
    p.add_argument(
        "--recalibrate-per-scenario",
        action="store_true",
        help="recalibrate the threshold inside each scenario",
    )
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser(
        "simulate", help="run the synthetic benchmark end to end"
    )
    p.add_argument("--outdir", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--train-samples", type=int, default=None)
    p.add_argument("--eval-samples", type=int, default=None)
    p.set_defaults(func=_cmd_simulate)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        return args.func(args)
    except (
        RecordFormatError,
        TableFormatError,
        BundleFormatError,
        FeatureFormatError,
        ScoredCsvFormatError,
        ValueError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except ArithmeticError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 4
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
