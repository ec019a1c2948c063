import math

import numpy as np
import pandas as pd
import pytest

from controllers.baselines import ForceController, NoneController
from processing.reward_metrics import MetricsAccumulator
from results_exporter import (
    JsonLinesWriter,
    TrainingLogWriter,
    comparison_table,
    export_comparison,
    export_heatmap,
    export_metrics,
    export_replay,
    load_replay,
    metric_rows,
    read_training_log,
)
from workers.evaluation_worker import SceneEvaluation, evaluate_scene


def test_metric_rows_skip_scenes_without_labels(line_scene, sim, camera):
    evaluated = evaluate_scene(line_scene, NoneController(), sim, camera)
    empty = SceneEvaluation("quiet", MetricsAccumulator())
    rows = metric_rows("none", [evaluated, empty])
    assert [r["scene"] for r in rows] == ["line"]
    assert rows[0]["dist"] == pytest.approx(0.0, abs=1e-9)


def test_comparison_keeps_method_order():
    rows = [
        {"method": "none", "scene": "s0", "occ": 0.4, "int": 0.0, "dist": 0.0},
        {"method": "force", "scene": "s0", "occ": 0.2, "int": 0.1, "dist": 0.3},
        {"method": "none", "scene": "s1", "occ": 0.2, "int": 0.2, "dist": 0.0},
    ]
    table = comparison_table(rows)
    assert list(table.index) == ["none", "force"]
    assert list(table.columns) == ["OCC", "INT", "DIST"]
    assert table.loc["none", "OCC"] == pytest.approx(0.3)
    assert table.loc["none", "INT"] == pytest.approx(0.1)


def test_metrics_and_comparison_files(tmp_path, line_scene, sim, camera):
    rows = metric_rows("force", [evaluate_scene(line_scene, ForceController(), sim, camera)])
    assert export_metrics(rows, str(tmp_path / "metrics.csv"))
    frame = pd.read_csv(tmp_path / "metrics.csv")
    assert list(frame.columns) == ["method", "scene", "occ", "int", "dist"]
    assert frame.loc[0, "scene"] == "line"
    assert export_comparison(comparison_table(rows), str(tmp_path / "table.txt"))
    assert "force" in (tmp_path / "table.txt").read_text(encoding="utf-8")


def test_replay_lines(tmp_path, line_scene, sim, camera):
    frames = evaluate_scene(line_scene, ForceController(), sim, camera, record=True).frames
    path = tmp_path / "replay.jsonl"
    assert export_replay(frames, str(path))
    loaded = load_replay(str(path))
    assert len(loaded) == line_scene.n_steps + 1
    assert loaded[0]["reward"] is None
    assert loaded[-1]["labels"][0]["target"] == "a"


def test_json_lines_writer_counts(tmp_path):
    with JsonLinesWriter(str(tmp_path / "obs.jsonl")) as sink:
        sink({"step": 0})
        sink({"step": 1})
    assert sink.count == 2
    assert len((tmp_path / "obs.jsonl").read_text(encoding="utf-8").splitlines()) == 2


def test_heatmap_csv(tmp_path):
    grid = np.arange(12, dtype=float).reshape(3, 4)
    assert export_heatmap(grid, str(tmp_path / "heat.csv"))
    back = pd.read_csv(tmp_path / "heat.csv", header=None).to_numpy()
    np.testing.assert_array_equal(back, grid)


def test_training_log_leaves_missing_values_empty(tmp_path):
    log = TrainingLogWriter(tmp_path / "training_log.csv")
    row = {"global_step": 300, "train_reward": -0.1, "test_reward": float("nan"), "actor_loss": 0.01,
           "critic_loss": 0.2, "entropy": 2.8, "num_agent": 2, "lr": 3e-4}
    log.append(row)
    log.append({**row, "global_step": 600, "test_reward": 0.05})
    frame = read_training_log(str(tmp_path / "training_log.csv"))
    assert list(frame["global_step"]) == [300, 600]
    assert math.isnan(frame.loc[0, "test_reward"])
    assert frame.loc[1, "test_reward"] == pytest.approx(0.05)
    assert ",," in (tmp_path / "training_log.csv").read_text(encoding="utf-8").splitlines()[1]
