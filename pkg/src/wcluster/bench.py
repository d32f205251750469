"""Throughput/memory sweeps over k and clustering quality scoring."""

from __future__ import annotations

import csv
import dataclasses
import platform
import resource
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .config import PipelineConfig
from .frame_io import DatasetManifest, read_frame_pair
from .pipeline import StreamingPipeline
from .render_export import UNLABELED


@dataclass
class BenchRow:
    k: int
    fps_mean: float
    fps_std: float
    peak_mem_bytes: int
    iterations: int
    delta_bytes: int
    threads: int


@dataclass
class BenchReport:
    rows: list[BenchRow]
    machine: str

    def write_csv(self, path: Path | str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "fps_mean", "fps_std", "peak_mem_bytes", "threads"])
            for row in self.rows:
                writer.writerow([row.k, f"{row.fps_mean:.4f}", f"{row.fps_std:.4f}",
                                 row.peak_mem_bytes, row.threads])


@dataclass
class FrameScore:
    accuracy: float
    cluster_iou: dict[int, float] = field(default_factory=dict)


@dataclass
class QualityReport:
    frames: list[FrameScore]

    @property
    def mean_accuracy(self) -> float:
        if not self.frames:
            return 0.0
        return float(np.mean([f.accuracy for f in self.frames]))


def peak_rss_bytes() -> int:
    """Peak resident set size of this process, bytes (Linux reports KiB)."""
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024


def machine_descriptor(threads: int) -> str:
    return f"{platform.platform()} python-{platform.python_version()} threads={threads}"


def sweep_k(manifest: DatasetManifest, k_values: Sequence[int],
            config: PipelineConfig, repetitions: int = 3) -> BenchReport:
    """Run the full processing loop per k, recording FPS and peak memory.

    Frames are decoded up front so timing covers only the in-memory pipeline
    (preprocess, clustering, color blending), not disk I/O. Absolute numbers
    are hardware-dependent and reported, never asserted.
    """
    ks = list(k_values)
    if not ks:
        raise ValueError("k_values must not be empty")
    if any(not 2 <= k <= 100 for k in ks):
        raise ValueError(f"k values must be within [2, 100], got {ks}")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    frames = [read_frame_pair(manifest, i) for i in range(len(manifest))]
    rows = []
    for k in ks:
        cfg = dataclasses.replace(config, k=k)
        fps_samples = []
        iterations = 0
        delta_bytes = 0
        for _ in range(repetitions):
            pipe = StreamingPipeline(cfg, manifest.intrinsics)
            for frame in frames:
                start = time.perf_counter()
                cloud = pipe.preprocess(frame)
                result = pipe.process_cloud(cloud, frame.frame_index)
                elapsed = time.perf_counter() - start
                fps_samples.append(1.0 / max(elapsed, 1e-9))
            iterations = pipe.clock.tau
            delta_bytes = pipe.state.delta.nbytes
        rows.append(BenchRow(
            k=k,
            fps_mean=float(np.mean(fps_samples)),
            fps_std=float(np.std(fps_samples)),
            peak_mem_bytes=peak_rss_bytes(),
            iterations=iterations,
            delta_bytes=delta_bytes,
            threads=cfg.threads,
        ))
    return BenchReport(rows=rows, machine=machine_descriptor(config.threads))


def score_frame(pred: np.ndarray, truth: np.ndarray) -> FrameScore:
    """Best-match accuracy of one predicted label raster against ground truth.

    Clusters are matched to truth classes by maximizing the matched pixel
    count over the contingency matrix (optimal assignment). Scored over
    pixels that carry both a truth object and a prediction; an empty score
    set is defined as accuracy 1.0 (with a warning).
    """
    if pred.shape != truth.shape:
        raise ValueError(f"label raster {pred.shape} does not match "
                         f"truth raster {truth.shape}")
    eval_mask = (truth != UNLABELED) & (pred != UNLABELED)
    total = int(np.count_nonzero(eval_mask))
    if total == 0:
        warnings.warn("no pixels carry both a prediction and a truth object; "
                      "accuracy is vacuously 1.0", stacklevel=2)
        return FrameScore(accuracy=1.0)
    p = pred[eval_mask].astype(np.int64)
    t = truth[eval_mask].astype(np.int64)
    pred_ids = np.unique(p)
    truth_ids = np.unique(t)
    contingency = np.zeros((len(pred_ids), len(truth_ids)), dtype=np.int64)
    p_index = np.searchsorted(pred_ids, p)
    t_index = np.searchsorted(truth_ids, t)
    np.add.at(contingency, (p_index, t_index), 1)
    row_ind, col_ind = linear_sum_assignment(contingency, maximize=True)
    matched = int(contingency[row_ind, col_ind].sum())
    iou: dict[int, float] = {}
    row_sum = contingency.sum(axis=1)
    col_sum = contingency.sum(axis=0)
    for r, c in zip(row_ind, col_ind):
        inter = contingency[r, c]
        union = row_sum[r] + col_sum[c] - inter
        iou[int(pred_ids[r])] = float(inter / union) if union else 0.0
    return FrameScore(accuracy=matched / total, cluster_iou=iou)


def score_against_truth(pred_rasters: Sequence[np.ndarray],
                        truth_rasters: Sequence[np.ndarray]) -> QualityReport:
    """Score a whole sequence frame by frame."""
    if len(pred_rasters) != len(truth_rasters):
        raise ValueError("prediction and truth sequences differ in length")
    return QualityReport(frames=[score_frame(p, t)
                                 for p, t in zip(pred_rasters, truth_rasters)])
