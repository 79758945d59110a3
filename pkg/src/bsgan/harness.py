"""Experiment runner: datasets x strategies x repetitions, plus report writing."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .data import load_dataset, load_recipe, min_max_scale, resolve_source, stratified_split
from .errors import ConfigError, CountMismatch, MissingFile, NoDangerPoints
from .gan import BorderlineSamples, GanConfig, accumulate_fake, oversample_bsgan, oversample_gan, train_gan
from .metrics import EvalReport, interclass_distance, roc_points, write_roc_csv
from .nn import TrainConfig, predict, predict_proba, train_classifier
from .sampling import SmoteConfig, borderline_smote, smote

log = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "BSGAN_OUTPUT_DIR"

STRATEGIES = ("none", "borderline_smote", "gan", "bsgan")
_ALIASES = {
    "none": "none", "without": "none", "ws": "none",
    "borderline_smote": "borderline_smote", "borderlinesmote": "borderline_smote",
    "borderline-smote": "borderline_smote", "bsmote": "borderline_smote",
    "gan": "gan", "bsgan": "bsgan",
}
# column headers of the interclass-distance table, by strategy
ICD_COLUMNS = {"borderline_smote": "S", "gan": "GBO", "bsgan": "SSG"}


def canonical_strategy(name):
    key = str(name).strip().lower()
    if key not in _ALIASES:
        raise ConfigError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}")
    return _ALIASES[key]


@dataclass(frozen=True)
class ExperimentConfig:
    datasets: tuple = ("ecoli", "yeast", "winequality", "abalone")
    strategies: tuple = STRATEGIES
    repetitions: int = 5
    base_seed: int = 2023
    redraw_splits: bool = True
    test_fraction: float = 0.2
    classifier: dict = field(default_factory=dict)
    gan: dict = field(default_factory=dict)
    smote: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)
    no_danger_fallback: str = "smote"
    data_dir: str | None = None
    output_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.no_danger_fallback not in ("smote", "error"):
            raise ConfigError("no_danger_fallback must be 'smote' or 'error'")
        object.__setattr__(self, "datasets", tuple(self.datasets))
        object.__setattr__(self, "strategies", tuple(canonical_strategy(s) for s in self.strategies))
        unknown = set(self.overrides) - set(self.dataset_ids)
        if unknown:
            raise ConfigError(f"overrides for datasets not in the run: {sorted(unknown)}")

    @property
    def dataset_ids(self):
        return [Path(d).stem if Path(d).suffix else d for d in self.datasets]

    @classmethod
    def from_dict(cls, d, base_dir=None):
        fields_ = set(cls.__dataclass_fields__)
        unknown = set(d) - fields_
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        d = dict(d)
        if base_dir is not None:
            d["datasets"] = [_relative_to(ds, base_dir) for ds in d.get("datasets", cls.datasets)]
            if d.get("data_dir"):
                d["data_dir"] = str(_relative_to(d["data_dir"], base_dir, force=True))
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        path = Path(path)
        if not path.is_file():
            raise MissingFile(f"config file not found: {path}")
        with open(path) as fh:
            return cls.from_dict(json.load(fh), base_dir=path.parent)

    def to_dict(self):
        d = asdict(self)
        d["datasets"] = list(self.datasets)
        d["strategies"] = list(self.strategies)
        return d

    def config_hash(self):
        payload = {k: v for k, v in self.to_dict().items() if k not in ("output_dir", "workers")}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

    def resolved_output_dir(self):
        return Path(os.environ.get(OUTPUT_DIR_ENV) or self.output_dir)

    def settings_for(self, dataset_id):
        """TrainConfig, GanConfig and SmoteConfig after per-dataset overrides (seeds unset)."""
        over = self.overrides.get(dataset_id, {})
        unknown = set(over) - {"classifier", "gan", "smote"}
        if unknown:
            raise ConfigError(f"unknown override sections for {dataset_id}: {sorted(unknown)}")
        train = TrainConfig(**{**self.classifier, **over.get("classifier", {})})
        gan = {**self.gan, **over.get("gan", {})}
        for key in ("gen_hidden", "disc_hidden"):
            if key in gan:
                gan[key] = tuple(gan[key])
        return train, GanConfig(**gan), SmoteConfig(**{**self.smote, **over.get("smote", {})})


def _relative_to(ref, base_dir, force=False):
    p = Path(ref)
    if p.is_absolute() or not (force or p.suffix):
        return ref
    return str(Path(base_dir) / p)


def derive_seed(base_seed, *parts):
    """64-bit seed from a stable hash of the base seed and the cell coordinates."""
    text = "|".join([str(int(base_seed)), *map(str, parts)])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


@dataclass(frozen=True)
class CellSeeds:
    split: int
    classifier: int
    sampler: int


def cell_seeds(cfg, dataset_id, strategy, repetition):
    split_rep = repetition if cfg.redraw_splits else 0
    return CellSeeds(
        split=derive_seed(cfg.base_seed, dataset_id, "split", split_rep),
        classifier=derive_seed(cfg.base_seed, dataset_id, "classifier", repetition),
        sampler=derive_seed(cfg.base_seed, dataset_id, strategy, repetition),
    )


@dataclass
class RunRecord:
    dataset: str
    strategy: str
    repetition: int
    seeds: CellSeeds
    train_accuracy: float = float("nan")
    report: EvalReport | None = None
    icd_original: float = float("nan")
    icd_expanded: float = float("nan")
    n_train: int = 0
    n_test: int = 0
    n_synthetic: int = 0
    fallback: str | None = None
    error: str | None = None
    roc: list = field(default_factory=list)
    test_digest: str = ""
    wall_time: float = 0.0

    @property
    def cell_id(self):
        return f"{self.dataset}__{self.strategy}__rep{self.repetition}"

    @property
    def ok(self):
        return self.error is None


def oversample(train, strategy, seed, gan_cfg=None, smote_cfg=None, no_danger_fallback="smote"):
    """Balance ``train`` (already scaled) with ``strategy``.

    Returns ``(synthetic_rows, fallback_marker)``; the marker is ``None`` unless
    Borderline-SMOTE found no danger points and plain SMOTE was used instead.
    """
    strategy = canonical_strategy(strategy)
    gan_cfg = replace(gan_cfg or GanConfig(), seed=derive_seed(seed, "gan"))
    smote_cfg = replace(smote_cfg or SmoteConfig(), seed=derive_seed(seed, "smote"))
    gap = max(train.n_majority - train.n_minority, 0)
    if strategy == "none" or gap == 0:
        return np.empty((0, train.n_features)), None
    if strategy == "gan":
        return oversample_gan(train, gan_cfg), None
    smote_cfg = replace(smote_cfg, amount=gap)
    try:
        if strategy == "borderline_smote":
            return borderline_smote(train, smote_cfg), None
        return oversample_bsgan(train, smote_cfg, gan_cfg), None
    except NoDangerPoints:
        if no_danger_fallback != "smote":
            raise
        log.warning("no danger points; falling back to plain SMOTE for %s", strategy)
    minority = train.features[train.labels == 1]
    if strategy == "borderline_smote":
        return smote(minority, smote_cfg), "smote"
    noise = BorderlineSamples(smote(minority, smote_cfg))
    model = train_gan(minority, noise, gan_cfg)
    return accumulate_fake(model, noise, gap, gan_cfg), "smote"


def _digest(ds):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ds.features).tobytes())
    h.update(np.ascontiguousarray(ds.labels).tobytes())
    return h.hexdigest()


def run_cell(dataset, strategy, seeds, train_settings=None, gan_cfg=None, smote_cfg=None,
             dataset_id="dataset", repetition=0, test_fraction=0.2, no_danger_fallback="smote"):
    """Split, scale on train, oversample train, fit the classifier, score the test split."""
    t0 = time.perf_counter()
    strategy = canonical_strategy(strategy)
    train_settings = train_settings or TrainConfig()
    record = RunRecord(dataset_id, strategy, repetition, seeds)
    split = stratified_split(dataset, test_fraction, seeds.split)
    train, scaler = min_max_scale(split.train)
    test = scaler.apply(split.test)
    test_digest = _digest(split.test)

    synthetic, record.fallback = oversample(train, strategy, seeds.sampler, gan_cfg, smote_cfg,
                                            no_danger_fallback)
    expanded = train.with_extra_minority(synthetic)
    if _digest(split.test) != test_digest:
        raise AssertionError("test partition changed during oversampling")

    net = train_classifier(expanded, replace(train_settings, seed=seeds.classifier))
    scores = predict_proba(net, test.features)
    record.train_accuracy = float(np.mean(predict(net, expanded.features) == expanded.labels))
    record.icd_original = interclass_distance(train)
    record.icd_expanded = interclass_distance(expanded)
    record.report = EvalReport.from_scores(scores, test.labels, interclass=record.icd_expanded)
    record.roc = roc_points(scores, test.labels)
    record.n_train, record.n_test, record.n_synthetic = train.n_samples, test.n_samples, len(synthetic)
    record.test_digest = test_digest
    record.wall_time = time.perf_counter() - t0
    return record


def _run_job(job):
    cfg, dataset_id, dataset, strategy, rep = job
    seeds = cell_seeds(cfg, dataset_id, strategy, rep)
    try:
        train_s, gan_s, smote_s = cfg.settings_for(dataset_id)
        return run_cell(dataset, strategy, seeds, train_s, gan_s, smote_s, dataset_id=dataset_id,
                        repetition=rep, test_fraction=cfg.test_fraction,
                        no_danger_fallback=cfg.no_danger_fallback)
    except Exception as exc:  # partial-failure policy: tag the cell and keep going
        log.error("cell %s/%s/rep%d failed: %s", dataset_id, strategy, rep, exc)
        return RunRecord(dataset_id, strategy, rep, seeds, error=f"{type(exc).__name__}: {exc}")


def plan_cells(cfg):
    cells = [(ds, st, rep) for ds in cfg.dataset_ids for st in cfg.strategies for rep in range(cfg.repetitions)]
    seeds = [cell_seeds(cfg, *c).sampler for c in cells]
    if len(set(seeds)) != len(seeds):
        raise ConfigError("derived seed collision across cells")
    return cells


def run_records(cfg, progress=None):
    """Execute every cell and return the records in grid order."""
    loaded = {}
    for ref, ds_id in zip(cfg.datasets, cfg.dataset_ids):
        try:
            loaded[ds_id] = load_dataset(ref, cfg.data_dir)[0]
        except Exception as exc:
            loaded[ds_id] = exc
            log.error("dataset %s unavailable: %s", ds_id, exc)
    jobs, records = [], {}
    for ds_id, strategy, rep in plan_cells(cfg):
        data = loaded[ds_id]
        if isinstance(data, Exception):
            records[(ds_id, strategy, rep)] = RunRecord(
                ds_id, strategy, rep, cell_seeds(cfg, ds_id, strategy, rep),
                error=f"{type(data).__name__}: {data}")
        else:
            jobs.append((cfg, ds_id, data, strategy, rep))
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = pool.map(_run_job, jobs)
            for rec in results:
                records[(rec.dataset, rec.strategy, rec.repetition)] = rec
                if progress:
                    progress(rec)
    else:
        for job in jobs:
            rec = _run_job(job)
            records[(rec.dataset, rec.strategy, rec.repetition)] = rec
            if progress:
                progress(rec)
    return [records[c] for c in plan_cells(cfg)]


METRICS = ("train_accuracy", "accuracy", "precision", "recall", "f1", "auc")


def _metric(rec, name):
    return rec.train_accuracy if name == "train_accuracy" else getattr(rec.report, name)


def _mean_std(values):
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return float("nan"), float("nan")
    return float(np.mean(a)), float(np.std(a, ddof=1)) if a.size > 1 else 0.0


def aggregate(records):
    """Per (dataset, strategy): run count and mean/std of each metric over successful runs."""
    groups = {}
    for rec in records:
        groups.setdefault((rec.dataset, rec.strategy), []).append(rec)
    rows = []
    for (ds, st), recs in groups.items():
        good = [r for r in recs if r.ok]
        row = {"dataset": ds, "strategy": st, "runs": len(good), "failed": len(recs) - len(good)}
        for name in METRICS + ("icd_original", "icd_expanded", "misclassified"):
            if name == "misclassified":
                vals = [r.report.confusion.misclassified for r in good]
            elif name.startswith("icd"):
                vals = [getattr(r, name) for r in good]
            else:
                vals = [_metric(r, name) for r in good]
            row[f"{name}_mean"], row[f"{name}_std"] = _mean_std(vals)
        rows.append(row)
    return rows


def interclass_table(records, datasets):
    """Table-4 analogue: original train split (WS) and each strategy's expanded train set."""
    out = []
    for ds in datasets:
        recs = [r for r in records if r.dataset == ds and r.ok]
        row = {"dataset": ds, "WS": _mean_std([r.icd_original for r in recs if r.strategy == "none"]
                                              or [r.icd_original for r in recs])[0]}
        for strategy, col in ICD_COLUMNS.items():
            row[col] = _mean_std([r.icd_expanded for r in recs if r.strategy == strategy])[0]
        out.append(row)
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, rows, header):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row[h]) for h in header])


def _text_table(rows, header, fmt="{:.4f}"):
    cells = [[h for h in header]]
    for row in rows:
        cells.append([fmt.format(row[h]) if isinstance(row[h], float) else str(row[h]) for h in header])
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def write_reports(records, cfg, out_dir):
    """Emit CSV tables, per-cell confusion matrices and ROC points, and the manifest."""
    out = Path(out_dir)
    (out / "confusion").mkdir(parents=True, exist_ok=True)
    (out / "roc").mkdir(parents=True, exist_ok=True)

    run_header = ["dataset", "strategy", "repetition", "split_seed", "classifier_seed", "sampler_seed",
                  "n_train", "n_test", "n_synthetic", "train_accuracy", "accuracy", "precision", "recall",
                  "f1", "auc", "tp", "fp", "tn", "fn", "icd_original", "icd_expanded", "fallback", "error"]
    run_rows = []
    for r in records:
        rep = r.report
        cm = rep.confusion if rep else None
        run_rows.append({
            "dataset": r.dataset, "strategy": r.strategy, "repetition": r.repetition,
            "split_seed": r.seeds.split, "classifier_seed": r.seeds.classifier,
            "sampler_seed": r.seeds.sampler, "n_train": r.n_train, "n_test": r.n_test,
            "n_synthetic": r.n_synthetic, "train_accuracy": r.train_accuracy,
            "accuracy": rep.accuracy if rep else "", "precision": rep.precision if rep else "",
            "recall": rep.recall if rep else "", "f1": rep.f1 if rep else "", "auc": rep.auc if rep else "",
            "tp": cm.tp if cm else "", "fp": cm.fp if cm else "", "tn": cm.tn if cm else "",
            "fn": cm.fn if cm else "", "icd_original": r.icd_original, "icd_expanded": r.icd_expanded,
            "fallback": r.fallback or "", "error": r.error or "",
        })
        if rep:
            with open(out / "confusion" / f"{r.cell_id}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["true\\pred", "0", "1"])
                for label, row in zip(("0", "1"), cm.as_grid()):
                    w.writerow([label, *row])
            write_roc_csv(r.roc, out / "roc" / f"{r.cell_id}.csv")
    _write_csv(out / "runs.csv", run_rows, run_header)

    agg = aggregate(records)
    agg_header = ["dataset", "strategy", "runs", "failed"] + [
        f"{m}_{s}" for m in METRICS + ("icd_original", "icd_expanded", "misclassified") for s in ("mean", "std")]
    _write_csv(out / "metrics_table.csv", agg, agg_header)

    icd = interclass_table(records, cfg.dataset_ids)
    _write_csv(out / "interclass_distance.csv", icd, ["dataset", "WS", "S", "GBO", "SSG"])

    with open(out / "report.txt", "w") as fh:
        fh.write("Test-set metrics (mean over repetitions)\n\n")
        fh.write(_text_table(agg, ["dataset", "strategy", "runs", "train_accuracy_mean", "accuracy_mean",
                                   "precision_mean", "recall_mean", "f1_mean", "auc_mean"]))
        fh.write("\n\nInterclass distance (WS = original train split)\n\n")
        fh.write(_text_table(icd, ["dataset", "WS", "S", "GBO", "SSG"]))
        fh.write("\n")

    with open(out / "timings.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell", "wall_time_s"])
        for r in records:
            w.writerow([r.cell_id, f"{r.wall_time:.3f}"])

    manifest = {
        "package_version": __version__,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "code_sha256": code_digest(),
        "recipes": _recipe_manifest(cfg),
        "cells": [{"cell": r.cell_id, "seeds": asdict(r.seeds), "fallback": r.fallback, "error": r.error,
                   "test_digest": r.test_digest} for r in records],
        "failed_cells": sum(not r.ok for r in records),
    }
    manifest["config"].pop("output_dir", None)
    manifest["config"].pop("workers", None)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def code_digest():
    """sha256 over the package's Python sources, so cached results can be matched to code."""
    h = hashlib.sha256()
    for path in sorted(Path(__file__).parent.glob("*.py")):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return h.hexdigest()


def _recipe_manifest(cfg):
    out = []
    for ref in cfg.datasets:
        try:
            recipe = load_recipe(ref)
        except Exception as exc:
            out.append({"ref": str(ref), "error": str(exc)})
            continue
        src = resolve_source(recipe, cfg.data_dir)
        digest = hashlib.sha256(src.read_bytes()).hexdigest() if src.is_file() else None
        out.append({"id": recipe.id, "version": recipe.version, "source_file": recipe.source_file,
                    "source_sha256": digest})
    return out


def run_experiment(cfg, out_dir=None, progress=None):
    """Run the full grid and write reports. Returns ``(records, output_dir)``."""
    records = run_records(cfg, progress=progress)
    out = write_reports(records, cfg, out_dir or cfg.resolved_output_dir())
    return records, out


@dataclass
class RecipeCheck:
    id: str
    expected: dict
    actual: dict
    problems: list

    @property
    def ok(self):
        return not self.problems


def check_recipe(ref, data_dir=None, tolerance=1):
    """Compare a recipe's output with its ``expected`` counts (rows within ``tolerance``)."""
    recipe = load_recipe(ref) if not hasattr(ref, "expected") else ref
    try:
        ds, _ = load_dataset(recipe, data_dir)
    except Exception as exc:
        return RecipeCheck(recipe.id, dict(recipe.expected), {}, [f"{type(exc).__name__}: {exc}"])
    actual = {"n_samples": ds.n_samples, "minority": ds.n_minority, "majority": ds.n_majority,
              "n_features": ds.n_features}
    problems = []
    for key, want in recipe.expected.items():
        got = actual.get(key)
        slack = 0 if key == "n_features" else tolerance
        if got is None or abs(got - want) > slack:
            problems.append(f"{recipe.id}.{key}: expected {want}, got {got}")
    return RecipeCheck(recipe.id, dict(recipe.expected), actual, problems)


def validate_recipes(cfg, tolerance=1, strict=False):
    """Check every dataset recipe in ``cfg``; with ``strict`` raise ``CountMismatch`` on failure."""
    checks = [check_recipe(ref, cfg.data_dir, tolerance) for ref in cfg.datasets]
    if strict:
        bad = [p for c in checks for p in c.problems]
        if bad:
            raise CountMismatch(bad)
    return checks
