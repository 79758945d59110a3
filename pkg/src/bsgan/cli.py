"""Command-line entry point: ``bsgan run | validate | oversample``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .data import load_dataset, min_max_scale
from .errors import BsganError
from .harness import (
    STRATEGIES,
    ExperimentConfig,
    canonical_strategy,
    derive_seed,
    oversample,
    run_experiment,
    validate_recipes,
)

log = logging.getLogger("bsgan")


def _load_config(path, data_dir=None):
    cfg = ExperimentConfig.from_json(path) if path else ExperimentConfig()
    if data_dir:
        cfg = replace(cfg, data_dir=data_dir)
    return cfg


def cmd_run(args):
    cfg = _load_config(args.config, args.data_dir)
    if args.workers:
        cfg = replace(cfg, workers=args.workers)

    def progress(rec):
        if rec.ok:
            log.info("%-40s acc=%.4f recall=%.4f auc=%.4f (%.1fs)", rec.cell_id, rec.report.accuracy,
                     rec.report.recall, rec.report.auc, rec.wall_time)
        else:
            log.info("%-40s FAILED %s", rec.cell_id, rec.error)

    records, out = run_experiment(cfg, out_dir=args.output_dir, progress=progress)
    failed = sum(not r.ok for r in records)
    print((out / "report.txt").read_text())
    print(f"{len(records) - failed}/{len(records)} cells succeeded; reports in {out}")
    return 0 if failed == 0 else 1


def cmd_validate(args):
    cfg = _load_config(args.config, args.data_dir)
    checks = validate_recipes(cfg, tolerance=args.tolerance)
    for c in checks:
        status = "ok  " if c.ok else "FAIL"
        print(f"{status} {c.id:<12} expected={c.expected} actual={c.actual}")
        for p in c.problems:
            print(f"     {p}")
    return 0 if all(c.ok for c in checks) else 1


def cmd_oversample(args):
    cfg = _load_config(args.config, args.data_dir)
    dataset, recipe = load_dataset(args.dataset, cfg.data_dir)
    scaled, params = min_max_scale(dataset)
    _, gan_cfg, smote_cfg = cfg.settings_for(recipe.id)
    seed = args.seed if args.seed is not None else derive_seed(cfg.base_seed, recipe.id, "export")
    synthetic, fallback = oversample(scaled, canonical_strategy(args.strategy), seed, gan_cfg, smote_cfg,
                                     cfg.no_danger_fallback)
    balanced = scaled.with_extra_minority(synthetic)
    rows = balanced.features if args.scaled else params.inverse_transform(balanced.features)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*balanced.feature_names, "label"])
        for x, y in zip(rows, balanced.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])
    note = f" (fallback: {fallback})" if fallback else ""
    print(f"wrote {balanced.n_samples} rows ({len(synthetic)} synthetic) to {args.out}{note}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="bsgan", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment grid and write reports")
    run.add_argument("--config", type=Path, required=True)
    run.add_argument("--output-dir", type=Path, help="overrides config and $BSGAN_OUTPUT_DIR")
    run.add_argument("--data-dir", help="directory holding raw dataset files")
    run.add_argument("--workers", type=int)
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check recipe outputs against reference counts")
    val.add_argument("--config", type=Path, required=True)
    val.add_argument("--data-dir")
    val.add_argument("--tolerance", type=int, default=1, help="allowed row difference (default 1)")
    val.set_defaults(func=cmd_validate)

    ovs = sub.add_parser("oversample", help="export a class-balanced CSV of one dataset")
    ovs.add_argument("--dataset", required=True, help="bundled recipe id or recipe JSON path")
    ovs.add_argument("--strategy", required=True, help=f"one of {', '.join(STRATEGIES)}")
    ovs.add_argument("--out", type=Path, required=True)
    ovs.add_argument("--config", type=Path, help="experiment config supplying hyperparameters")
    ovs.add_argument("--data-dir")
    ovs.add_argument("--seed", type=int)
    ovs.add_argument("--scaled", action="store_true", help="write [0,1]-scaled features")
    ovs.set_defaults(func=cmd_oversample)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BsganError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
