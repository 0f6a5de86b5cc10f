"""Result tables: per-seed CSV rows, per-condition summaries, run records."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

from . import metrics
from .harness import RunRecord

RESULT_COLUMNS = [
    "condition", "seed", "raw_mean", "ci95", "normalized", "cac_w", "cac_v",
    "masked_states", "seen_states", "decision_mask_rate",
]

SUMMARY_COLUMNS = ["condition", "mean", "ci95", "n_seeds", "normalized_mean"]


def config_hash(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def record_row(condition: str, record: RunRecord, bounds) -> dict:
    diag = record.diagnostics or {}
    return {
        "condition": condition,
        "seed": record.seed,
        "raw_mean": record.eval_mean,
        "ci95": record.eval_ci95,
        "normalized": metrics.normalize(record.eval_mean, bounds),
        "cac_w": record.cac_w,
        "cac_v": record.cac_v,
        "masked_states": diag.get("masked_states", 0),
        "seen_states": diag.get("seen_states", 0),
        "decision_mask_rate": diag.get("decision_mask_rate", 0.0),
    }


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.6g}"
    return str(value)


def write_rows(path: Path, rows: list[dict], columns=None) -> None:
    columns = columns or RESULT_COLUMNS
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k, "")) for k in columns})


def read_rows(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def summarize(rows: list[dict], bounds) -> list[dict]:
    """Per-condition mean, seed-level 95% CI, and normalised mean."""
    by_condition: dict[str, list[float]] = {}
    order: list[str] = []
    for row in rows:
        cond = row["condition"]
        if cond not in by_condition:
            by_condition[cond] = []
            order.append(cond)
        by_condition[cond].append(float(row["raw_mean"]))
    out = []
    for cond in order:
        xs = by_condition[cond]
        if len(xs) >= 2:
            mean, ci, _ = metrics.mean_ci(xs)
        else:
            mean, ci = xs[0], float("nan")
        out.append({
            "condition": cond,
            "mean": mean,
            "ci95": ci,
            "n_seeds": len(xs),
            "normalized_mean": metrics.normalize(mean, bounds),
        })
    return out


def condition_mean(summary: list[dict], condition: str) -> float:
    for row in summary:
        if row["condition"] == condition:
            return float(row["mean"])
    raise KeyError(condition)


class ExperimentWriter:
    """Collects rows and records for one experiment directory."""

    def __init__(self, out_dir: Path, experiment: str, cfg_payload: dict):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / "runs").mkdir(exist_ok=True)
        self.experiment = experiment
        self.hash = config_hash(cfg_payload)
        self.cfg_payload = cfg_payload
        self.rows: list[dict] = []
        self.extras: dict = {}

    def add(self, condition: str, record: RunRecord, bounds) -> None:
        record.metadata.setdefault("config_hash", self.hash)
        record.save(self.out_dir / "runs" / f"{condition}-{record.seed}.json")
        self.rows.append(record_row(condition, record, bounds))

    def finish(self, bounds) -> dict:
        write_rows(self.out_dir / "results.csv", self.rows)
        summary = summarize(self.rows, bounds)
        write_rows(self.out_dir / "summary.csv", summary, SUMMARY_COLUMNS)
        payload = {
            "experiment": self.experiment,
            "config_hash": self.hash,
            "config": self.cfg_payload,
            "summary": summary,
            **self.extras,
        }
        (self.out_dir / "summary.json").write_text(
            json.dumps(payload, indent=1, sort_keys=True, default=str) + "\n")
        return payload
