"""Grid runner: train every (task, alignment, seed) cell, evaluate, and report.

Config files are JSON::

    {
      "task": "retrieval" | "counting" | "pointer",
      "alignments": ["dot", "scaled_dot", ...],
      "seeds": [1, 2, 3],
      "epochs": 100, "batch_size": 32, "lr": 0.001,
      "model_dim": 32, "heads": 4, "d_ff": 64,
      "task_params": {...},          # fields of the task's generator config
      "output": "results.csv"
    }

Only ``task``, ``alignments`` and ``seeds`` are required; everything else is
filled from per-task defaults by :func:`parse_config`.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alignment import ALIGNMENT_NAMES, variant_label
from .errors import ConfigError
from .metrics import QAResult, RankingTable, accuracy, anls, recall_at_k, rsum
from .models import CountingModel, PointerModel, RetrievalModel
from .tasks import (CountingConfig, PointerConfig, RetrievalConfig, gen_counting, gen_pointer,
                    gen_retrieval)
from .training import train

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    threadpool_limits = None

log = logging.getLogger(__name__)

TASK_CONFIGS = {"retrieval": RetrievalConfig, "counting": CountingConfig, "pointer": PointerConfig}

TASK_DEFAULTS = {
    "retrieval": {"epochs": 100, "model_dim": 32},
    "counting": {"epochs": 300, "model_dim": 16},
    "pointer": {"epochs": 30, "model_dim": 16},
}

CSV_COLUMNS = ["task", "alignment", "variant", "seed", "status", "metric", "value"]
MAX_SEED = (1 << 64) - 1


@dataclass(frozen=True)
class GridConfig:
    task: str
    alignments: tuple[str, ...]
    seeds: tuple[int, ...]
    epochs: int
    batch_size: int = 32
    lr: float = 1e-3
    model_dim: int = 32
    heads: int = 4
    d_ff: int = 0
    task_params: dict = field(default_factory=dict)
    output: str = "results.csv"

    def task_config(self):
        cfg = TASK_CONFIGS[self.task](**self.task_params)
        if self.task == "counting" and cfg.n_queried_range is not None:
            cfg = dataclasses.replace(cfg, n_queried_range=tuple(cfg.n_queried_range))
        return cfg

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["alignments"] = list(self.alignments)
        out["seeds"] = list(self.seeds)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


_FIELDS = {f.name for f in dataclasses.fields(GridConfig)}


def config_from_dict(raw) -> GridConfig:
    """Validate a decoded config and fill defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("task", "alignments", "seeds"):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    task = raw["task"]
    if task not in TASK_CONFIGS:
        raise ConfigError(f"unknown task {task!r}; expected one of {sorted(TASK_CONFIGS)}")

    alignments = raw["alignments"]
    if not isinstance(alignments, list) or not alignments:
        raise ConfigError("alignments must be a non-empty list")
    for name in alignments:
        if name not in ALIGNMENT_NAMES:
            raise ConfigError(f"unknown alignment {name!r}; expected one of {list(ALIGNMENT_NAMES)}")
    if len(set(alignments)) != len(alignments):
        raise ConfigError("alignments contain duplicates")
    if task == "pointer" and "cosine" in alignments:
        raise ConfigError("alignment 'cosine' is not supported for the pointer task (self attention)")

    seeds = raw["seeds"]
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("seeds must be a non-empty list")
    for s in seeds:
        if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s <= MAX_SEED:
            raise ConfigError(f"seed {s!r} is not a 64-bit unsigned integer")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds contain duplicates")

    merged = {**TASK_DEFAULTS[task], **{k: v for k, v in raw.items()
                                        if k not in ("alignments", "seeds")}}
    for key in ("epochs", "batch_size", "model_dim", "heads", "d_ff"):
        if key in merged and (isinstance(merged[key], bool) or not isinstance(merged[key], int)):
            raise ConfigError(f"{key} must be an integer")
    if merged["epochs"] < 1 or merged.get("batch_size", 32) < 2:
        raise ConfigError("epochs must be >= 1 and batch_size >= 2")
    if not isinstance(merged.get("lr", 1e-3), (int, float)) or merged.get("lr", 1e-3) <= 0:
        raise ConfigError("lr must be a positive number")
    if merged.get("d_ff", 0) in (0, None):
        merged["d_ff"] = 2 * merged["model_dim"]
    if task == "pointer" and merged["model_dim"] % merged.get("heads", 4):
        raise ConfigError("model_dim must be divisible by heads")

    params = merged.get("task_params", {})
    if not isinstance(params, dict):
        raise ConfigError("task_params must be an object")
    task_cls = TASK_CONFIGS[task]
    names = {f.name for f in dataclasses.fields(task_cls)}
    bad = set(params) - names
    if bad:
        raise ConfigError(f"unknown task_params for {task}: {sorted(bad)}")
    try:
        task_cfg = task_cls(**params)
        if task == "counting" and task_cfg.n_queried_range is not None:
            task_cfg = dataclasses.replace(task_cfg, n_queried_range=tuple(task_cfg.n_queried_range))
        task_cfg.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid task_params: {exc}") from exc
    if task == "retrieval" and task_cfg.pool_size < 10:
        raise ConfigError("retrieval pool_size must be at least 10 for R@10")
    full_params = dataclasses.asdict(task_cfg)
    if task == "counting" and full_params["n_queried_range"] is not None:
        full_params["n_queried_range"] = list(full_params["n_queried_range"])

    return GridConfig(
        task=task,
        alignments=tuple(alignments),
        seeds=tuple(seeds),
        epochs=merged["epochs"],
        batch_size=merged.get("batch_size", 32),
        lr=float(merged.get("lr", 1e-3)),
        model_dim=merged["model_dim"],
        heads=merged.get("heads", 4),
        d_ff=merged["d_ff"],
        task_params=full_params,
        output=str(merged.get("output", "results.csv")),
    )


def parse_config(path) -> GridConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return config_from_dict(raw)


# -- cells ----------------------------------------------------------------------

@dataclass
class RunRecord:
    task: str
    alignment: str
    variant: str
    seed: int
    epochs: int
    status: str
    metrics: list[tuple[str, float]] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def key(self) -> tuple:
        return (self.task, self.alignment, self.seed)

    def metric(self, name: str) -> float | None:
        return dict(self.metrics).get(name)


def _retrieval_cell(cfg: GridConfig, alignment: str, seed: int):
    tcfg = cfg.task_config()
    splits = gen_retrieval(tcfg, seed)
    model = RetrievalModel.init(alignment, tcfg.d_in, cfg.model_dim, seed)
    result = train(model, model.prepare(splits.train), epochs=cfg.epochs,
                   batch_size=cfg.batch_size, lr=cfg.lr, seed=seed)
    if result.diverged:
        return result, []
    test = model.prepare(splits.test)
    sim = model.similarity_matrix(test["tokens"], test["regions"])   # [image, caption]
    truth = np.arange(sim.shape[0])
    metrics = []
    for prefix, table in (("sent", RankingTable(sim, truth)), ("img", RankingTable(sim.T, truth))):
        for k in (1, 5, 10):
            metrics.append((f"{prefix}_r{k}", recall_at_k(table, k)))
        metrics.append((f"{prefix}_rsum", rsum(table)))
    metrics.append(("rsum", metrics[3][1] + metrics[7][1]))
    return result, metrics


def _counting_cell(cfg: GridConfig, alignment: str, seed: int):
    tcfg = cfg.task_config()
    splits = gen_counting(tcfg, seed)
    model = CountingModel.init(alignment, tcfg.N, cfg.model_dim, seed)
    result = train(model, model.prepare(splits.train), epochs=cfg.epochs,
                   batch_size=cfg.batch_size, lr=cfg.lr, seed=seed)
    if result.diverged:
        return result, []
    test = model.prepare(splits.test)
    pred = model.predict_proba(test).argmax(axis=-1)
    truth = test["target"][:, 0]
    n_queried = np.array([inst.n_queried for inst in splits.test])
    metrics = [("acc", accuracy(pred, truth))]
    for name, mask in (("acc_single", n_queried == 1), ("acc_multi", n_queried >= 2)):
        if mask.any():
            metrics.append((name, accuracy(pred[mask], truth[mask])))
    return result, metrics


def _pointer_cell(cfg: GridConfig, alignment: str, seed: int):
    tcfg = cfg.task_config()
    splits = gen_pointer(tcfg, seed)
    model = PointerModel.init(alignment, tcfg.d_in, cfg.model_dim, cfg.heads, cfg.d_ff,
                              (tcfg.M, tcfg.N, tcfg.O), seed)
    result = train(model, model.prepare(splits.train), epochs=cfg.epochs,
                   batch_size=cfg.batch_size, lr=cfg.lr, seed=seed)
    if result.diverged:
        return result, []
    test = model.prepare(splits.test)
    pred = model.predict_proba(test).argmax(axis=-1)
    truth = test["target"][:, 0]
    vocab = splits.vocabulary
    words = [(vocab[int(inst.ocr_concepts[p])], vocab[inst.planted])
             for inst, p in zip(splits.test, pred)]
    metrics = [("acc", accuracy(pred, truth)),
               ("anls", float(np.mean([anls(QAResult(w, (t,))) for w, t in words])))]
    return result, metrics


_CELL_RUNNERS = {"retrieval": _retrieval_cell, "counting": _counting_cell, "pointer": _pointer_cell}


def run_single(cfg: GridConfig, alignment: str, seed: int) -> RunRecord:
    """Train and evaluate one cell; divergence or errors yield a ``failed`` record, never an exception."""
    kind, swap = ALIGNMENT_NAMES[alignment]
    record = RunRecord(cfg.task, alignment, variant_label(kind, swap), seed, cfg.epochs, "ok")
    start = time.perf_counter()
    try:
        if threadpool_limits is not None:
            with threadpool_limits(limits=1):
                result, metrics = _CELL_RUNNERS[cfg.task](cfg, alignment, seed)
        else:
            result, metrics = _CELL_RUNNERS[cfg.task](cfg, alignment, seed)
        if result.diverged or not all(math.isfinite(v) for _, v in metrics):
            log.warning("cell %s/%s/%d diverged", cfg.task, alignment, seed)
            record.status = "failed"
        else:
            record.metrics = [(n, float(v)) for n, v in metrics]
        record.epochs = result.epochs_run
    except Exception:  # noqa: BLE001 - a cell must never abort the grid
        log.exception("cell %s/%s/%d raised", cfg.task, alignment, seed)
        record.status = "failed"
    if record.status == "failed":
        record.metrics = []
    record.wall_time = time.perf_counter() - start
    return record


def _run_cell(args) -> RunRecord:
    return run_single(*args)


def grid_cells(cfg: GridConfig) -> list[tuple[GridConfig, str, int]]:
    cells = [(cfg, a, s) for a in cfg.alignments for s in cfg.seeds]
    return sorted(cells, key=lambda c: (c[0].task, c[1], c[2]))


def run_grid(cfg: GridConfig, workers: int = 1) -> list[RunRecord]:
    """Run every cell; output is sorted by (task, alignment, seed) whatever the worker count."""
    if workers < 1:
        raise ConfigError("workers must be at least 1")
    cells = grid_cells(cfg)
    if workers == 1 or len(cells) == 1:
        records = [_run_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell, cells))
    return sorted(records, key=lambda r: r.key)


# -- reporting ------------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    alignment: str
    metric: str
    median: float
    minimum: float
    maximum: float
    rank: int
    n: int


def records_to_csv(records: list[RunRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in sorted(records, key=lambda r: r.key):
        if r.status != "ok" or not r.metrics:
            w.writerow([r.task, r.alignment, r.variant, r.seed, r.status, "", ""])
            continue
        for name, value in r.metrics:
            w.writerow([r.task, r.alignment, r.variant, r.seed, r.status, name, repr(float(value))])
    return buf.getvalue()


def read_results_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def aggregate(records: list[RunRecord]) -> list[ReportRow]:
    """Median/min/max over seeds per (alignment, metric) and a rank per metric.

    Higher is better; ties (and alignments with no successful run, which rank
    last) are broken by alignment name.
    """
    alignments = sorted({r.alignment for r in records})
    metric_names: list[str] = []
    for r in records:
        for name, _ in r.metrics:
            if name not in metric_names:
                metric_names.append(name)
    rows = []
    for metric in metric_names:
        stats = {}
        for a in alignments:
            vals = [r.metric(metric) for r in records
                    if r.alignment == a and r.status == "ok" and r.metric(metric) is not None]
            stats[a] = vals
        order = sorted(alignments, key=lambda a: (0, -statistics.median(stats[a]), a)
                       if stats[a] else (1, 0.0, a))
        for rank, a in enumerate(order, 1):
            vals = stats[a]
            if vals:
                rows.append(ReportRow(a, metric, statistics.median(vals), min(vals), max(vals), rank, len(vals)))
            else:
                rows.append(ReportRow(a, metric, math.nan, math.nan, math.nan, rank, 0))
    return rows


GAP_PAIR = ("scaled_dot", "biased_general_star")


def seed_gaps(records: list[RunRecord], metric: str, pair=GAP_PAIR) -> dict[int, float]:
    """Per-seed ``metric(pair[0]) - metric(pair[1])`` over seeds where both cells succeeded."""
    by_key = {(r.alignment, r.seed): r for r in records if r.status == "ok"}
    gaps = {}
    for seed in sorted({r.seed for r in records}):
        a, b = by_key.get((pair[0], seed)), by_key.get((pair[1], seed))
        if a and b and a.metric(metric) is not None and b.metric(metric) is not None:
            gaps[seed] = a.metric(metric) - b.metric(metric)
    return gaps


def render_report(records: list[RunRecord]) -> str:
    if not records:
        raise ValueError("no records to report")
    lines = []
    tasks = sorted({r.task for r in records})
    failed = sum(r.status != "ok" for r in records)
    lines.append(f"task: {', '.join(tasks)}   cells: {len(records)}   failed: {failed}")
    rows = aggregate(records)
    for metric in dict.fromkeys(r.metric for r in rows):
        lines.append("")
        lines.append(f"[{metric}]")
        lines.append(f"  {'rank':>4}  {'alignment':<24}{'median':>10}{'min':>10}{'max':>10}{'n':>4}")
        for row in sorted((r for r in rows if r.metric == metric), key=lambda r: r.rank):
            lines.append(f"  {row.rank:>4}  {row.alignment:<24}{row.median:>10.4f}"
                         f"{row.minimum:>10.4f}{row.maximum:>10.4f}{row.n:>4}")
    present = {r.alignment for r in records}
    if set(GAP_PAIR) <= present:
        lines.append("")
        lines.append(f"per-seed gap {GAP_PAIR[0]} - {GAP_PAIR[1]}")
        for metric in dict.fromkeys(r.metric for r in rows):
            gaps = seed_gaps(records, metric)
            if gaps:
                cells = "  ".join(f"{s}:{g:+.4f}" for s, g in gaps.items())
                lines.append(f"  {metric:<12} median {statistics.median(gaps.values()):+.4f}   {cells}")
    return "\n".join(lines) + "\n"


def emit_report(records: list[RunRecord], csv_path, report_path=None) -> str:
    """Write the results CSV (and the text report if a path is given); returns the report text."""
    if not records:
        raise ValueError("no records to report")
    report = render_report(records)
    Path(csv_path).write_text(records_to_csv(records))
    if report_path is not None:
        Path(report_path).write_text(report)
    return report


def report_path_for(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".report.txt")
