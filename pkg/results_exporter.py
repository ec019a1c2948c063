#!/usr/bin/env python3
"""
Results Exporter - Metrics tables, replays, heatmaps and training logs
"""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np
import pandas as pd

from errors import MetricsError
from processing.reward_metrics import finalize

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ["method", "scene", "occ", "int", "dist"]
LOG_COLUMNS = ["global_step", "train_reward", "test_reward", "actor_loss", "critic_loss",
               "entropy", "num_agent", "lr"]


def metric_rows(method: str, evaluations: Iterable[Any]) -> List[Dict[str, Any]]:
    """One row per evaluated scene; scenes without label steps are skipped"""
    rows = []
    for evaluation in evaluations:
        try:
            metrics = finalize(evaluation.accumulator)
        except MetricsError:
            logger.warning(f"Scene {evaluation.scene_id} had no active labels; left out of the {method} metrics")
            continue
        rows.append({"method": method, "scene": evaluation.scene_id,
                     "occ": metrics.occ, "int": metrics.inter, "dist": metrics.dist})
    return rows


def comparison_table(rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    """Mean OCC, INT and DIST per method, in the order the methods first appear"""
    frame = pd.DataFrame(list(rows), columns=METRIC_COLUMNS)
    methods = list(dict.fromkeys(frame["method"]))
    table = frame.groupby("method", sort=False)[["occ", "int", "dist"]].mean()
    table = table.reindex(methods)
    table.columns = ["OCC", "INT", "DIST"]
    return table


def export_metrics(rows: Sequence[Dict[str, Any]], output_path: str) -> bool:
    try:
        path = Path(output_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(list(rows), columns=METRIC_COLUMNS).to_csv(path, index=False)
        logger.info(f"Exported {len(rows)} metric rows to {path}")
        return True
    except OSError as e:
        logger.error(f"Failed to export metrics: {e}")
        return False


def export_comparison(table: pd.DataFrame, output_path: str) -> bool:
    try:
        path = Path(output_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(table.to_string(float_format=lambda v: f"{v:.4f}") + "\n", encoding="utf-8")
        return True
    except OSError as e:
        logger.error(f"Failed to export comparison table: {e}")
        return False


class JsonLinesWriter:
    """Appends one JSON object per line; usable as a record sink"""

    def __init__(self, output_path: str):
        self.path = Path(output_path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, "w", encoding="utf-8")
        self.count = 0

    def __call__(self, record: Dict[str, Any]) -> None:
        self._file.write(json.dumps(record) + "\n")
        self.count += 1

    def close(self) -> None:
        self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def export_replay(frames: Sequence[Dict[str, Any]], output_path: str) -> bool:
    try:
        with JsonLinesWriter(output_path) as writer:
            for frame in frames:
                writer(frame)
        logger.info(f"Wrote replay with {len(frames)} frames to {output_path}")
        return True
    except OSError as e:
        logger.error(f"Failed to export replay: {e}")
        return False


def load_replay(input_path: str) -> List[Dict[str, Any]]:
    with open(input_path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def export_heatmap(grid: np.ndarray, output_path: str) -> bool:
    """Rows follow z, columns follow x; no header"""
    try:
        path = Path(output_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(np.asarray(grid, dtype=np.float64)).to_csv(path, header=False, index=False)
        logger.info(f"Wrote {grid.shape[0]}x{grid.shape[1]} heatmap to {path}")
        return True
    except OSError as e:
        logger.error(f"Failed to export heatmap: {e}")
        return False


class TrainingLogWriter:
    """training_log.csv, flushed after every row so partial runs stay readable"""

    def __init__(self, output_path: Path):
        self.path = Path(output_path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", newline="", encoding="utf-8") as f:
            csv.writer(f).writerow(LOG_COLUMNS)

    def append(self, row: Dict[str, Any]) -> None:
        values = []
        for column in LOG_COLUMNS:
            value = row[column]
            if isinstance(value, float) and math.isnan(value):
                value = ""
            values.append(value)
        with open(self.path, "a", newline="", encoding="utf-8") as f:
            csv.writer(f).writerow(values)


def read_training_log(input_path: str) -> pd.DataFrame:
    return pd.read_csv(input_path)
