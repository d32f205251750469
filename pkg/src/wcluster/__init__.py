"""Streaming weighted clustering for organized RGB-D point clouds.

Pipeline: ingest aligned color+depth rasters (recorded or synthetic),
back-project to an organized cloud, estimate normals, gate by depth range,
then cluster with a weighted k-means whose per-point membership weights
persist across frames. Results export as weight-blended PLY clouds and
label rasters.
"""

__version__ = "0.1.0"

from .bench import BenchReport, QualityReport, score_against_truth, sweep_k
from .clustering import (
    Centroid,
    Centroids,
    ClusterParams,
    DISPLAY_PALETTE,
    IterationClock,
    NO_LABEL,
    WeightState,
    assign_labels,
    assign_winners,
    dist,
    normalize_weights,
    seed_kmeanspp,
    similarity_f,
    step_frame,
    update_centroids,
    update_weights,
)
from .config import PipelineConfig, build_config, read_config_file
from .errors import (
    ConfigError,
    DatasetError,
    DecodeError,
    DimensionMismatchError,
    InvalidDepthError,
    InvalidSeedError,
    MissingFileError,
    OutOfRangeError,
    SceneError,
)
from .frame_io import (
    CameraIntrinsics,
    DatasetManifest,
    FrameEntry,
    FOV_PRESETS,
    RgbdFrame,
    load_manifest,
    map_color_to_depth,
    read_frame_pair,
    save_manifest,
)
from .pipeline import FrameResult, StreamingPipeline, run_pipeline
from .preprocess import (
    CloudPoint,
    DepthRange,
    OrganizedCloud,
    back_project,
    compute_normals,
    forward_project,
    frame_to_cloud,
    remove_background,
    subsample,
)
from .render_export import (
    ColoredCloud,
    ObjectMask,
    UNLABELED,
    blend_colors,
    colored_cloud,
    export_labels,
    export_ply,
    extract_object_mask,
    label_raster,
    parse_ply,
)
from .synthetic import (
    Box,
    PlanePatch,
    SceneObject,
    Sphere,
    SyntheticSceneSpec,
    generate_synthetic_scene,
    load_scene_spec,
    render_frame,
    write_scene_dataset,
)
