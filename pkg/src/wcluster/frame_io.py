"""Dataset ingestion: RGB-D frame pairs, color/depth alignment, manifest format.

On-disk format: depth is 16-bit grayscale PNG in millimeters (0 = invalid),
color is 8-bit RGB PNG, labels (optional) are 8-bit grayscale PNG with 255 as
background. A dataset directory is described by a flat ``key = value`` manifest
with one ``frame = color,depth[,labels]`` line per frame, in order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    DatasetError,
    DecodeError,
    DimensionMismatchError,
    MissingFileError,
    OutOfRangeError,
)

# Sensor field-of-view presets, radians.
FOV_PRESETS = {
    "kinect-v2": (1.22173047, 1.0471975511),
    "kinect-v1": (1.014468, 0.7898094),
}


@dataclass(frozen=True)
class CameraIntrinsics:
    """Field of view and raster dimensions of the depth/color sensor pair."""

    fov_x: float  # radians
    fov_y: float  # radians
    depth_width: int
    depth_height: int
    color_width: int
    color_height: int

    def __post_init__(self):
        if not (0.0 < self.fov_x < math.pi):
            raise ValueError(f"fov_x must be in (0, pi), got {self.fov_x}")
        if not (0.0 < self.fov_y < math.pi):
            raise ValueError(f"fov_y must be in (0, pi), got {self.fov_y}")
        for name in ("depth_width", "depth_height", "color_width", "color_height"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be >= 2, got {getattr(self, name)}")

    @classmethod
    def preset(cls, name: str, depth_width: int = 512, depth_height: int = 424,
               color_width: Optional[int] = None, color_height: Optional[int] = None,
               ) -> "CameraIntrinsics":
        """Intrinsics for a named sensor preset at the given raster size."""
        try:
            fov_x, fov_y = FOV_PRESETS[name]
        except KeyError:
            raise ValueError(f"unknown fov preset {name!r}, expected one of "
                             f"{sorted(FOV_PRESETS)}") from None
        return cls(fov_x=fov_x, fov_y=fov_y,
                   depth_width=depth_width, depth_height=depth_height,
                   color_width=color_width if color_width is not None else depth_width,
                   color_height=color_height if color_height is not None else depth_height)


@dataclass
class RgbdFrame:
    """One aligned color+depth raster pair at depth resolution.

    ``depth`` is meters per pixel with 0 encoding invalid; ``color`` is an
    (H, W, 3) uint8 raster aligned 1:1 with the depth pixels.
    """

    width: int
    height: int
    depth: np.ndarray
    color: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        if self.depth.shape != (self.height, self.width):
            raise DimensionMismatchError(
                f"depth raster is {self.depth.shape}, expected "
                f"({self.height}, {self.width})")
        if self.color.shape != (self.height, self.width, 3):
            raise DimensionMismatchError(
                f"color raster is {self.color.shape}, expected "
                f"({self.height}, {self.width}, 3)")
        if not np.all(np.isfinite(self.depth)) or np.any(self.depth < 0):
            raise ValueError("depth values must be finite and >= 0")


@dataclass(frozen=True)
class FrameEntry:
    color_path: str
    depth_path: str
    labels_path: Optional[str] = None


@dataclass
class DatasetManifest:
    """Ordered list of frame files plus the intrinsics they were recorded with."""

    intrinsics: CameraIntrinsics
    frames: list[FrameEntry] = field(default_factory=list)
    pre_aligned: bool = True
    base_dir: Path = field(default_factory=Path)

    def __post_init__(self):
        if not self.frames:
            raise DatasetError("manifest declares no frames")

    def __len__(self) -> int:
        return len(self.frames)

    def resolve(self, rel: str) -> Path:
        return self.base_dir / rel


_MANIFEST_INT_KEYS = ("depth_width", "depth_height", "color_width", "color_height")


def load_manifest(path: Path | str) -> DatasetManifest:
    """Parse a ``key = value`` manifest file.

    Lines are ``key = value``; ``frame`` keys repeat, one per frame, with
    comma-separated color,depth[,labels] paths relative to the manifest.
    Blank lines and lines starting with ``#`` are ignored.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"manifest not found: {path}")
    values: dict[str, str] = {}
    frames: list[FrameEntry] = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DatasetError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "frame":
            parts = [p.strip() for p in value.split(",")]
            if len(parts) not in (2, 3):
                raise DatasetError(
                    f"{path}:{lineno}: frame entry needs color,depth[,labels]")
            frames.append(FrameEntry(parts[0], parts[1],
                                     parts[2] if len(parts) == 3 else None))
        else:
            values[key] = value
    try:
        intr = CameraIntrinsics(
            fov_x=float(values["fov_x"]),
            fov_y=float(values["fov_y"]),
            **{k: int(values[k]) for k in _MANIFEST_INT_KEYS},
        )
    except KeyError as exc:
        raise DatasetError(f"{path}: manifest missing key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise DatasetError(f"{path}: bad intrinsics: {exc}") from None
    pre_aligned = values.get("pre_aligned", "true").lower() in ("1", "true", "yes")
    return DatasetManifest(intrinsics=intr, frames=frames,
                           pre_aligned=pre_aligned, base_dir=path.parent)


def save_manifest(manifest: DatasetManifest, path: Path | str) -> None:
    path = Path(path)
    intr = manifest.intrinsics
    lines = [
        f"depth_width = {intr.depth_width}",
        f"depth_height = {intr.depth_height}",
        f"color_width = {intr.color_width}",
        f"color_height = {intr.color_height}",
        f"fov_x = {intr.fov_x!r}",
        f"fov_y = {intr.fov_y!r}",
        f"pre_aligned = {'true' if manifest.pre_aligned else 'false'}",
    ]
    for entry in manifest.frames:
        parts = [entry.color_path, entry.depth_path]
        if entry.labels_path is not None:
            parts.append(entry.labels_path)
        lines.append("frame = " + ",".join(parts))
    path.write_text("\n".join(lines) + "\n")


def _open_image(path: Path) -> Image.Image:
    if not path.is_file():
        raise MissingFileError(f"file not found: {path}")
    try:
        img = Image.open(path)
        img.load()
    except UnidentifiedImageError as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc
    except OSError as exc:
        raise DecodeError(f"cannot read {path}: {exc}") from exc
    return img


def read_depth_png(path: Path | str) -> np.ndarray:
    """Read a 16-bit millimeter depth PNG as a float64 raster in meters."""
    img = _open_image(Path(path))
    raw = np.asarray(img)
    if raw.ndim != 2:
        raise DecodeError(f"{path}: depth PNG must be single-channel")
    return raw.astype(np.float64) / 1000.0


def write_depth_png(depth_m: np.ndarray, path: Path | str) -> None:
    """Write a float meter raster as 16-bit millimeter PNG (0 = invalid)."""
    mm = np.clip(np.rint(depth_m * 1000.0), 0, 65535).astype(np.uint16)
    Image.fromarray(mm).save(Path(path))


def read_color_png(path: Path | str) -> np.ndarray:
    img = _open_image(Path(path))
    if img.mode != "RGB":
        img = img.convert("RGB")
    return np.asarray(img, dtype=np.uint8)


def write_color_png(color: np.ndarray, path: Path | str) -> None:
    Image.fromarray(np.asarray(color, dtype=np.uint8), mode="RGB").save(Path(path))


def read_label_png(path: Path | str) -> np.ndarray:
    """Read an 8-bit label raster (255 = background/unlabeled)."""
    img = _open_image(Path(path))
    raw = np.asarray(img)
    if raw.ndim != 2 or raw.dtype != np.uint8:
        raise DecodeError(f"{path}: label PNG must be 8-bit single-channel")
    return raw


def write_label_png(labels: np.ndarray, path: Path | str) -> None:
    Image.fromarray(np.asarray(labels, dtype=np.uint8), mode="L").save(Path(path))


def map_color_to_depth(color: np.ndarray, depth: np.ndarray,
                       intrinsics: CameraIntrinsics) -> RgbdFrame:
    """Resample a color raster onto the depth grid.

    Nearest-neighbor under independent linear scaling of x by
    color_width/depth_width and y by color_height/depth_height; sampled
    coordinates are clamped inside the color raster.
    """
    ch, cw = color.shape[:2]
    dh, dw = depth.shape
    if (cw, ch) != (intrinsics.color_width, intrinsics.color_height):
        raise DimensionMismatchError(
            f"color raster is {cw}x{ch}, intrinsics say "
            f"{intrinsics.color_width}x{intrinsics.color_height}")
    if (dw, dh) != (intrinsics.depth_width, intrinsics.depth_height):
        raise DimensionMismatchError(
            f"depth raster is {dw}x{dh}, intrinsics say "
            f"{intrinsics.depth_width}x{intrinsics.depth_height}")
    sx = cw / dw
    sy = ch / dh
    cols = np.minimum(np.floor(np.arange(dw) * sx + 0.5).astype(np.intp), cw - 1)
    rows = np.minimum(np.floor(np.arange(dh) * sy + 0.5).astype(np.intp), ch - 1)
    mapped = np.ascontiguousarray(color[rows[:, None], cols[None, :]])
    return RgbdFrame(width=dw, height=dh, depth=depth, color=mapped)


def read_frame_pair(manifest: DatasetManifest, index: int) -> RgbdFrame:
    """Load frame ``index`` as an RgbdFrame at depth resolution.

    Pre-aligned datasets are loaded directly; otherwise the color raster is
    resampled onto the depth grid with :func:`map_color_to_depth`.
    """
    if not 0 <= index < len(manifest.frames):
        raise OutOfRangeError(
            f"frame index {index} out of range [0, {len(manifest.frames)})")
    entry = manifest.frames[index]
    intr = manifest.intrinsics
    depth = read_depth_png(manifest.resolve(entry.depth_path))
    color = read_color_png(manifest.resolve(entry.color_path))
    dh, dw = depth.shape
    if (dw, dh) != (intr.depth_width, intr.depth_height):
        raise DimensionMismatchError(
            f"{entry.depth_path}: depth raster is {dw}x{dh}, intrinsics say "
            f"{intr.depth_width}x{intr.depth_height}")
    if manifest.pre_aligned:
        ch, cw = color.shape[:2]
        if (cw, ch) != (dw, dh):
            raise DimensionMismatchError(
                f"{entry.color_path}: pre-aligned color raster is {cw}x{ch}, "
                f"expected depth resolution {dw}x{dh}")
        frame = RgbdFrame(width=dw, height=dh, depth=depth, color=color)
    else:
        frame = map_color_to_depth(color, depth, intr)
    frame.frame_index = index
    return frame


def read_truth_labels(manifest: DatasetManifest, index: int) -> np.ndarray:
    """Load the ground-truth label raster for frame ``index``."""
    if not 0 <= index < len(manifest.frames):
        raise OutOfRangeError(
            f"frame index {index} out of range [0, {len(manifest.frames)})")
    entry = manifest.frames[index]
    if entry.labels_path is None:
        raise DatasetError(f"frame {index} has no ground-truth labels")
    return read_label_png(manifest.resolve(entry.labels_path))
