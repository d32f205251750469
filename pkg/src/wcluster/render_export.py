"""Weight-blended visualization colors, PLY/label export, seeded object masks."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from .errors import InvalidSeedError
from .frame_io import write_label_png
from .clustering import NO_LABEL, WeightState
from .preprocess import OrganizedCloud

UNLABELED = 255


@dataclass
class ColoredCloud:
    """Valid points of one frame with their blended display colors."""

    xyz: np.ndarray       # (n, 3) float64
    rgb: np.ndarray       # (n, 3) uint8
    frame_index: int = 0

    def __len__(self) -> int:
        return self.xyz.shape[0]


@dataclass
class ObjectMask:
    """Binary raster of one user-selected object."""

    mask: np.ndarray      # (H, W) uint8 in {0, 1}
    cluster_id: int
    seed_pixel: Tuple[int, int]


def blend_colors(state: WeightState, palette: np.ndarray) -> np.ndarray:
    """Per-point display color as the weight-blended mix of cluster colors.

    C_p = sum_i C_i * mu_i per channel, rounded half-away-from-zero and
    clamped to [0, 255]. Points with all-zero weights come out black.
    """
    if palette.shape[0] < state.k:
        raise ValueError(f"palette has {palette.shape[0]} colors, need {state.k}")
    mixed = state.mu @ palette[:state.k].astype(np.float64)
    rounded = np.trunc(mixed + np.copysign(0.5, mixed))
    return np.clip(rounded, 0, 255).astype(np.uint8)


def colored_cloud(cloud: OrganizedCloud, colors: np.ndarray,
                  frame_index: int = 0) -> ColoredCloud:
    """Collect the valid points of a cloud with their display colors."""
    m = cloud.valid
    return ColoredCloud(xyz=cloud.xyz[m].copy(), rgb=colors[m].copy(),
                        frame_index=frame_index)


def export_ply(cloud: ColoredCloud, path: Path | str) -> None:
    """Write an ASCII PLY file with x y z (float) red green blue (uchar).

    Floats are printed with shortest round-trip precision, so re-parsing the
    file reproduces the exported values bit-for-bit and identical input gives
    byte-identical files.
    """
    n = len(cloud)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {n}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "end_header",
    ]
    xyz = cloud.xyz
    rgb = cloud.rgb
    for i in range(n):
        lines.append(f"{float(xyz[i, 0])!r} {float(xyz[i, 1])!r} {float(xyz[i, 2])!r} "
                     f"{int(rgb[i, 0])} {int(rgb[i, 1])} {int(rgb[i, 2])}")
    Path(path).write_text("\n".join(lines) + "\n")


def parse_ply(path: Path | str) -> ColoredCloud:
    """Read back an ASCII PLY written by :func:`export_ply`."""
    text = Path(path).read_text().splitlines()
    if not text or text[0] != "ply":
        raise ValueError(f"{path}: not a PLY file")
    count = None
    body_start = None
    for i, line in enumerate(text):
        if line.startswith("element vertex "):
            count = int(line.split()[-1])
        if line == "end_header":
            body_start = i + 1
            break
    if count is None or body_start is None:
        raise ValueError(f"{path}: malformed PLY header")
    xyz = np.zeros((count, 3))
    rgb = np.zeros((count, 3), dtype=np.uint8)
    for i in range(count):
        parts = text[body_start + i].split()
        xyz[i] = [float(p) for p in parts[:3]]
        rgb[i] = [int(p) for p in parts[3:6]]
    return ColoredCloud(xyz=xyz, rgb=rgb)


def extract_object_mask(state: WeightState, seed_pixel: Tuple[int, int],
                        ) -> ObjectMask:
    """Mask of the seed pixel's cluster, restricted to the 8-connected
    component of same-labeled pixels containing the seed."""
    h, w = state.labels.shape
    row, col = seed_pixel
    if not (0 <= row < h and 0 <= col < w):
        raise InvalidSeedError(f"seed pixel {seed_pixel} outside {h}x{w} grid")
    target = int(state.labels[row, col])
    if target == NO_LABEL:
        raise InvalidSeedError(f"seed pixel {seed_pixel} is unlabeled")
    same = state.labels == target
    mask = np.zeros((h, w), dtype=np.uint8)
    mask[row, col] = 1
    queue = deque([(row, col)])
    while queue:
        r, c = queue.popleft()
        for rr in range(max(r - 1, 0), min(r + 2, h)):
            for cc in range(max(c - 1, 0), min(c + 2, w)):
                if same[rr, cc] and not mask[rr, cc]:
                    mask[rr, cc] = 1
                    queue.append((rr, cc))
    return ObjectMask(mask=mask, cluster_id=target, seed_pixel=(row, col))


def label_raster(state: WeightState,
                 valid: np.ndarray | None = None) -> np.ndarray:
    """Argmax labels as an 8-bit raster, 255 = unlabeled/invalid.

    ``valid``, when given, additionally masks out pixels that are invalid in
    the current frame; the weight state itself still retains their labels.
    """
    if state.k > 254:
        raise ValueError(f"k={state.k} does not fit an 8-bit label raster")
    out = state.labels.astype(np.int32)
    unlabeled = out == NO_LABEL
    if valid is not None:
        unlabeled |= ~valid
    return np.where(unlabeled, UNLABELED, out).astype(np.uint8)


def export_labels(state: WeightState, path: Path | str,
                  valid: np.ndarray | None = None) -> None:
    """Write the argmax label raster as an 8-bit PNG."""
    write_label_png(label_raster(state, valid), path)
