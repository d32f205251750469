"""Frame-sequence orchestration shared by the CLI and the benchmark harness."""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

import numpy as np

from .clustering import (
    Centroids,
    IterationClock,
    WeightState,
    seed_kmeanspp,
    step_frame,
)
from .config import PipelineConfig
from .frame_io import CameraIntrinsics, RgbdFrame, write_label_png
from .preprocess import (
    OrganizedCloud,
    compute_normals,
    frame_to_cloud,
    remove_background,
    subsample,
)
from .render_export import (
    UNLABELED,
    blend_colors,
    colored_cloud,
    export_ply,
    label_raster,
)


@dataclass
class FrameResult:
    """Everything the pipeline produces for one processed frame.

    ``colors`` lives on the (possibly strided) processed grid; ``labels`` is
    scattered back to full depth resolution with 255 at skipped or invalid
    pixels.
    """

    frame_index: int
    cloud: OrganizedCloud
    state: WeightState
    centroids: Centroids
    tau: int
    colors: np.ndarray        # (H', W', 3) uint8 blended display colors
    labels: np.ndarray        # (depth_height, depth_width) uint8, 255 = unlabeled
    elapsed_s: float


class StreamingPipeline:
    """Stateful processor that clusters a frame sequence one frame at a time.

    Weight state is keyed by (strided) grid cell and persists across frames;
    centroids are seeded from the first frame's valid points.
    """

    def __init__(self, config: PipelineConfig, intrinsics: CameraIntrinsics):
        self.config = config
        self.intrinsics = intrinsics
        self.params = config.cluster_params()
        self.state: Optional[WeightState] = None
        self.centroids: Optional[Centroids] = None
        self.clock = IterationClock()

    def preprocess(self, frame: RgbdFrame) -> OrganizedCloud:
        cloud = frame_to_cloud(frame, self.intrinsics,
                               legacy_y_scale=self.config.legacy_y_scale)
        cloud = compute_normals(cloud)
        cloud = remove_background(cloud, self.config.depth_range())
        return subsample(cloud, self.config.stride)

    def process_cloud(self, cloud: OrganizedCloud, frame_index: int) -> FrameResult:
        start = time.perf_counter()
        if self.state is None:
            self.state = WeightState.create(cloud.grid_shape, self.params.k)
            self.centroids = seed_kmeanspp(cloud, self.params, self.config.rng_seed)
        self.state, self.centroids, self.clock = step_frame(
            cloud, self.state, self.centroids, self.clock, self.params,
            freeze_centroids=self.config.freeze_centroids,
            threads=self.config.threads)
        colors = blend_colors(self.state, self.centroids.display_color)
        labels = np.full((self.intrinsics.depth_height, self.intrinsics.depth_width),
                         UNLABELED, dtype=np.uint8)
        labels[np.ix_(cloud.rows, cloud.cols)] = label_raster(self.state, cloud.valid)
        elapsed = time.perf_counter() - start
        return FrameResult(frame_index=frame_index, cloud=cloud, state=self.state,
                           centroids=self.centroids, tau=self.clock.tau,
                           colors=colors, labels=labels, elapsed_s=elapsed)

    def process_frame(self, frame: RgbdFrame) -> FrameResult:
        cloud = self.preprocess(frame)
        return self.process_cloud(cloud, frame.frame_index)


def run_pipeline(frames: Iterable[RgbdFrame], config: PipelineConfig,
                 intrinsics: CameraIntrinsics) -> Iterator[FrameResult]:
    """Process frames in order, yielding one FrameResult per frame."""
    pipe = StreamingPipeline(config, intrinsics)
    for frame in frames:
        yield pipe.process_frame(frame)


def export_frame(result: FrameResult, out_dir) -> tuple:
    """Write the PLY and label raster for one frame; returns both paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ply_path = out / f"frame_{result.frame_index:06d}.ply"
    labels_path = out / f"labels_{result.frame_index:06d}.png"
    export_ply(colored_cloud(result.cloud, result.colors, result.frame_index),
               ply_path)
    write_label_png(result.labels, labels_path)
    return ply_path, labels_path
