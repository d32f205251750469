"""Depth raster to organized point cloud: back-projection, normals, depth gating.

The cloud stays on the sensor grid (struct-of-arrays), so pixel adjacency gives
spatial adjacency and per-pixel state can persist across frames.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import InvalidDepthError
from .frame_io import CameraIntrinsics, RgbdFrame

_UNIT_EPS = 1e-12


@dataclass(frozen=True)
class CloudPoint:
    """One cloud point: position, color, normal, validity, raster cell."""

    x: float
    y: float
    z: float
    r: float
    g: float
    b: float
    nx: float
    ny: float
    nz: float
    valid: bool
    normal_valid: bool
    grid_index: Tuple[int, int]  # (row, col) in the depth raster

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def color(self) -> np.ndarray:
        return np.array([self.r, self.g, self.b])

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.nx, self.ny, self.nz])


@dataclass(frozen=True)
class DepthRange:
    """Closed working interval [a, b] in meters; points outside are dropped."""

    a: float
    b: float

    def __post_init__(self):
        if not (0.0 <= self.a < self.b):
            raise ValueError(f"depth range needs 0 <= a < b, got [{self.a}, {self.b}]")


@dataclass
class OrganizedCloud:
    """Organized point cloud over a (possibly strided) depth grid.

    ``rows``/``cols`` map grid indices back to raster coordinates so that
    per-pixel state stays addressable after subsampling.
    """

    xyz: np.ndarray           # (H, W, 3) float64 meters
    rgb: np.ndarray           # (H, W, 3) float64 in [0, 255]
    normals: np.ndarray       # (H, W, 3) float64, unit where normal_valid
    valid: np.ndarray         # (H, W) bool
    normal_valid: np.ndarray  # (H, W) bool
    rows: np.ndarray          # (H,) raster row per grid row
    cols: np.ndarray          # (W,) raster col per grid col

    @property
    def height(self) -> int:
        return self.xyz.shape[0]

    @property
    def width(self) -> int:
        return self.xyz.shape[1]

    @property
    def grid_shape(self) -> Tuple[int, int]:
        return self.xyz.shape[:2]

    def valid_count(self) -> int:
        return int(np.count_nonzero(self.valid))

    def point(self, row: int, col: int) -> CloudPoint:
        """Materialize the point at grid cell (row, col)."""
        return CloudPoint(
            x=float(self.xyz[row, col, 0]),
            y=float(self.xyz[row, col, 1]),
            z=float(self.xyz[row, col, 2]),
            r=float(self.rgb[row, col, 0]),
            g=float(self.rgb[row, col, 1]),
            b=float(self.rgb[row, col, 2]),
            nx=float(self.normals[row, col, 0]),
            ny=float(self.normals[row, col, 1]),
            nz=float(self.normals[row, col, 2]),
            valid=bool(self.valid[row, col]),
            normal_valid=bool(self.normal_valid[row, col]),
            grid_index=(int(self.rows[row]), int(self.cols[col])),
        )


def projection_scales(intrinsics: CameraIntrinsics) -> Tuple[float, float]:
    """Per-axis projection scales 2*tan(fov/2)."""
    return (2.0 * math.tan(intrinsics.fov_x / 2.0),
            2.0 * math.tan(intrinsics.fov_y / 2.0))


def back_project(px: float, py: float, pz: float, intrinsics: CameraIntrinsics,
                 legacy_y_scale: bool = False) -> Tuple[float, float, float]:
    """Map a depth pixel (px, py, pz) to camera-centered world coordinates.

    Wx = pz * scale_x * (px / R_w - 0.5) and symmetrically for Wy over the
    raster height; Wz = pz. ``legacy_y_scale`` divides the y pixel coordinate
    by the raster *width* instead, reproducing the older published form.
    """
    if pz <= 0.0:
        raise InvalidDepthError(f"depth must be > 0, got {pz}")
    scale_x, scale_y = projection_scales(intrinsics)
    r_w = intrinsics.depth_width
    r_h = r_w if legacy_y_scale else intrinsics.depth_height
    wx = pz * scale_x * (px / r_w - 0.5)
    wy = pz * scale_y * (py / r_h - 0.5)
    return wx, wy, pz


def forward_project(wx: float, wy: float, wz: float, intrinsics: CameraIntrinsics,
                    legacy_y_scale: bool = False) -> Tuple[float, float, float]:
    """Inverse of :func:`back_project`: world point to (px, py, pz)."""
    if wz <= 0.0:
        raise InvalidDepthError(f"depth must be > 0, got {wz}")
    scale_x, scale_y = projection_scales(intrinsics)
    r_w = intrinsics.depth_width
    r_h = r_w if legacy_y_scale else intrinsics.depth_height
    px = r_w * (wx / (wz * scale_x) + 0.5)
    py = r_h * (wy / (wz * scale_y) + 0.5)
    return px, py, wz


def ray_coefficients(intrinsics: CameraIntrinsics, legacy_y_scale: bool = False,
                     ) -> Tuple[np.ndarray, np.ndarray]:
    """Per-pixel ray direction coefficients (ax, ay) so that a pixel's point
    at depth z is (z*ax, z*ay, z). ax is (W,), ay is (H,)."""
    scale_x, scale_y = projection_scales(intrinsics)
    r_w = intrinsics.depth_width
    r_h = r_w if legacy_y_scale else intrinsics.depth_height
    ax = scale_x * (np.arange(intrinsics.depth_width) / r_w - 0.5)
    ay = scale_y * (np.arange(intrinsics.depth_height) / r_h - 0.5)
    return ax, ay


def frame_to_cloud(frame: RgbdFrame, intrinsics: CameraIntrinsics,
                   legacy_y_scale: bool = False) -> OrganizedCloud:
    """Back-project a whole frame. Zero-depth pixels come out invalid."""
    depth = frame.depth
    h, w = depth.shape
    ax, ay = ray_coefficients(intrinsics, legacy_y_scale)
    xyz = np.empty((h, w, 3))
    xyz[:, :, 0] = depth * ax[None, :]
    xyz[:, :, 1] = depth * ay[:, None]
    xyz[:, :, 2] = depth
    valid = depth > 0.0
    return OrganizedCloud(
        xyz=xyz,
        rgb=frame.color.astype(np.float64),
        normals=np.zeros((h, w, 3)),
        valid=valid,
        normal_valid=np.zeros((h, w), dtype=bool),
        rows=np.arange(h),
        cols=np.arange(w),
    )


def compute_normals(cloud: OrganizedCloud) -> OrganizedCloud:
    """Fill per-point normals from central differences on the organized grid.

    n = normalize((P(r, c+1) - P(r, c-1)) x (P(r+1, c) - P(r-1, c))),
    sign-flipped so nz <= 0 (facing the camera). Border points, points with
    any invalid neighbor, and degenerate (collinear) neighborhoods are marked
    normal-invalid; they keep participating in clustering without the normal
    term.
    """
    p = cloud.xyz
    valid = cloud.valid
    h, w = valid.shape
    normals = np.zeros((h, w, 3))
    normal_valid = np.zeros((h, w), dtype=bool)
    if h >= 3 and w >= 3:
        du = p[1:-1, 2:, :] - p[1:-1, :-2, :]   # column neighbors
        dv = p[2:, 1:-1, :] - p[:-2, 1:-1, :]   # row neighbors
        n = np.cross(du, dv)
        # flip toward the camera
        flip = n[:, :, 2] > 0.0
        n[flip] = -n[flip]
        norm = np.linalg.norm(n, axis=2)
        ok = (valid[1:-1, 1:-1]
              & valid[1:-1, 2:] & valid[1:-1, :-2]
              & valid[2:, 1:-1] & valid[:-2, 1:-1]
              & (norm > _UNIT_EPS))
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = n / norm[:, :, None]
        normals[1:-1, 1:-1][ok] = unit[ok]
        normal_valid[1:-1, 1:-1] = ok
    return dataclasses.replace(cloud, normals=normals, normal_valid=normal_valid)


def remove_background(cloud: OrganizedCloud, depth_range: DepthRange) -> OrganizedCloud:
    """Invalidate points outside the closed interval [a, b]. Idempotent."""
    z = cloud.xyz[:, :, 2]
    keep = cloud.valid & (z >= depth_range.a) & (z <= depth_range.b)
    return dataclasses.replace(cloud, valid=keep,
                               normal_valid=cloud.normal_valid & keep)


def subsample(cloud: OrganizedCloud, stride: int) -> OrganizedCloud:
    """Strided view keeping grid cells where row % stride == col % stride == 0."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if stride == 1:
        return cloud
    s = stride
    return OrganizedCloud(
        xyz=cloud.xyz[::s, ::s],
        rgb=cloud.rgb[::s, ::s],
        normals=cloud.normals[::s, ::s],
        valid=cloud.valid[::s, ::s],
        normal_valid=cloud.normal_valid[::s, ::s],
        rows=cloud.rows[::s],
        cols=cloud.cols[::s],
    )
