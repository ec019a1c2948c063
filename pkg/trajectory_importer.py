#!/usr/bin/env python3
"""
Import trajectory corpora from CSV (header ``t,id,x,z``).
"""
import csv
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, TextIO, Tuple

import numpy as np
import pandas as pd

from errors import DuplicateTimestampError, TrajectoryParseError

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["t", "id", "x", "z"]


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    id: str
    pos: Tuple[float, float]


@dataclass
class RawTrack:
    """All samples of one entity, sorted strictly increasing in time"""
    id: str
    times: np.ndarray       # (n,)
    positions: np.ndarray   # (n, 2) ground-plane x, z

    @property
    def samples(self) -> List[TrajectorySample]:
        return [
            TrajectorySample(float(t), self.id, (float(p[0]), float(p[1])))
            for t, p in zip(self.times, self.positions)
        ]

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])


def ingest_csv(stream: TextIO) -> List[RawTrack]:
    """
    Parse a trajectory CSV stream into tracks.

    Args:
        stream: character stream with a ``t,id,x,z`` header line

    Returns:
        List[RawTrack]: one track per id, in order of first appearance
    """
    try:
        frame = pd.read_csv(stream, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        logger.info("Empty trajectory stream")
        return []
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise TrajectoryParseError(str(e), int(match.group(1)) if match else None) from e

    if list(frame.columns) != CSV_COLUMNS:
        raise TrajectoryParseError(f"expected header {','.join(CSV_COLUMNS)}, got {','.join(frame.columns)}", 1)
    if frame.empty:
        return []

    # Row k of the frame sits on line k + 2 (header is line 1)
    for column in ("t", "x", "z"):
        values = frame[column]
        bad = pd.to_numeric(values, errors="coerce").isna() | values.isna() | (values == "")
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise TrajectoryParseError(f"missing or non-numeric '{column}' value", row + 2)
    blank_ids = frame["id"].isna() | (frame["id"] == "")
    if blank_ids.any():
        raise TrajectoryParseError("missing id", int(np.flatnonzero(blank_ids.to_numpy())[0]) + 2)

    times = np.array([float(v) for v in frame["t"]])
    xs = np.array([float(v) for v in frame["x"]])
    zs = np.array([float(v) for v in frame["z"]])
    finite = np.isfinite(times) & np.isfinite(xs) & np.isfinite(zs)
    if not finite.all():
        raise TrajectoryParseError("non-finite value", int(np.flatnonzero(~finite)[0]) + 2)
    negative = times < 0
    if negative.any():
        raise TrajectoryParseError("negative timestamp", int(np.flatnonzero(negative)[0]) + 2)

    rows_by_id: Dict[str, List[int]] = {}
    for row, entity in enumerate(frame["id"]):
        rows_by_id.setdefault(entity, []).append(row)

    tracks = []
    for entity, rows in rows_by_id.items():
        idx = np.asarray(rows)
        order = np.argsort(times[idx], kind="stable")
        idx = idx[order]
        t = times[idx]
        dup = np.flatnonzero(np.diff(t) == 0)
        if dup.size:
            raise DuplicateTimestampError(
                f"id {entity!r} has two samples at t={t[dup[0]]} (line {idx[dup[0] + 1] + 2})"
            )
        if t.size < 2:
            logger.warning(f"Skipping track {entity!r}: only one sample")
            continue
        tracks.append(RawTrack(entity, t, np.column_stack([xs[idx], zs[idx]])))

    logger.info(f"Ingested {len(tracks)} tracks from {len(frame)} rows")
    return tracks


def import_trajectories(file_path: str) -> List[RawTrack]:
    """Import tracks from a CSV file on disk"""
    with open(file_path, "r", encoding="utf-8", newline="") as f:
        return ingest_csv(f)


def write_csv(tracks: Iterable[RawTrack], stream: TextIO) -> None:
    """Write tracks in the ingest format; floats are written with full precision"""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for track in tracks:
        for t, (x, z) in zip(track.times, track.positions):
            writer.writerow([repr(float(t)), track.id, repr(float(x)), repr(float(z))])


def export_trajectories(tracks: Iterable[RawTrack], file_path: str) -> None:
    path = Path(file_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        write_csv(tracks, f)
    logger.info(f"Wrote trajectory corpus to {path}")
