"""Synthetic labeled RGB-D scenes: spheres, boxes and plane patches on a
background plane, rendered along the same rays the back-projection uses, so
reconstructing the cloud recovers the primitive geometry exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import SceneError
from .frame_io import (
    CameraIntrinsics,
    DatasetManifest,
    FrameEntry,
    RgbdFrame,
    save_manifest,
    write_color_png,
    write_depth_png,
    write_label_png,
)
from .preprocess import ray_coefficients

BACKGROUND_LABEL = 255
_EPS = 1e-12


def _as_vec3(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (3,):
        raise SceneError(f"{name} must be a 3-vector, got shape {arr.shape}")
    return arr


def _as_color(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (3,) or arr.min() < 0 or arr.max() > 255:
        raise SceneError(f"color must be 3 values in [0, 255], got {v}")
    return arr


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray        # (3,) base position, meters
    radius: float
    color: np.ndarray         # (3,) RGB

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vec3(self.center, "center"))
        object.__setattr__(self, "color", _as_color(self.color))
        if self.radius <= 0:
            raise SceneError(f"sphere radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class Box:
    """Axis-aligned box: center plus full side lengths."""

    center: np.ndarray
    extent: np.ndarray        # (3,) full side lengths
    color: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vec3(self.center, "center"))
        object.__setattr__(self, "extent", _as_vec3(self.extent, "extent"))
        object.__setattr__(self, "color", _as_color(self.color))
        if np.any(self.extent <= 0):
            raise SceneError(f"box extent must be > 0, got {self.extent}")


@dataclass(frozen=True)
class PlanePatch:
    """Bounded plane patch through ``center`` with the given unit normal.

    ``extent`` bounds the patch along two in-plane axes; make it large for an
    effectively unbounded tilted wall.
    """

    center: np.ndarray
    extent: np.ndarray        # (2,) in-plane side lengths
    color: np.ndarray
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vec3(self.center, "center"))
        object.__setattr__(self, "color", _as_color(self.color))
        ext = np.asarray(self.extent, dtype=np.float64)
        if ext.shape != (2,) or np.any(ext <= 0):
            raise SceneError(f"plane extent must be 2 positive values, got {self.extent}")
        object.__setattr__(self, "extent", ext)
        n = _as_vec3(self.normal, "normal")
        norm = np.linalg.norm(n)
        if norm < _EPS:
            raise SceneError("plane normal cannot be a zero vector")
        object.__setattr__(self, "normal", n / norm)


Primitive = Union[Sphere, Box, PlanePatch]


@dataclass(frozen=True)
class SceneObject:
    """A primitive with a per-frame position offset trajectory."""

    shape: Primitive
    offsets: Optional[np.ndarray] = None   # (frame_count, 3) or None for static
    velocity: Optional[np.ndarray] = None  # shorthand: offset = velocity * frame

    def offset_at(self, frame: int) -> np.ndarray:
        if self.offsets is not None:
            return self.offsets[frame]
        if self.velocity is not None:
            return np.asarray(self.velocity, dtype=np.float64) * frame
        return np.zeros(3)


@dataclass(frozen=True)
class SyntheticSceneSpec:
    """Everything needed to render a deterministic labeled frame sequence."""

    objects: Sequence[SceneObject]
    background_depth: float
    frame_count: int
    background_color: np.ndarray = field(
        default_factory=lambda: np.array([110.0, 110.0, 110.0]))
    depth_noise_std: float = 0.0   # meters
    color_noise_std: float = 0.0   # per channel, 8-bit units

    def __post_init__(self):
        if self.frame_count < 1:
            raise SceneError(f"frame_count must be >= 1, got {self.frame_count}")
        if self.background_depth <= 0:
            raise SceneError("background plane must be in front of the camera")
        if self.depth_noise_std < 0 or self.color_noise_std < 0:
            raise SceneError("noise stddev cannot be negative")
        if len(self.objects) >= BACKGROUND_LABEL:
            raise SceneError(f"at most {BACKGROUND_LABEL - 1} objects supported")
        object.__setattr__(self, "background_color",
                           _as_color(self.background_color))
        for obj in self.objects:
            if obj.offsets is not None and len(obj.offsets) != self.frame_count:
                raise SceneError("offset trajectory must have one entry per frame")


def _sphere_depth(sphere: Sphere, center: np.ndarray,
                  ax: np.ndarray, ay: np.ndarray) -> np.ndarray:
    """Smallest positive z where each pixel's ray hits the sphere, inf if none."""
    axg = ax[None, :]
    ayg = ay[:, None]
    a = axg ** 2 + ayg ** 2 + 1.0
    b = -2.0 * (axg * center[0] + ayg * center[1] + center[2])
    c = float(center @ center) - sphere.radius ** 2
    disc = b ** 2 - 4.0 * a * c
    hit = disc >= 0.0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    z_near = (-b - sq) / (2.0 * a)
    z_far = (-b + sq) / (2.0 * a)
    z = np.where(z_near > _EPS, z_near, z_far)
    return np.where(hit & (z > _EPS), z, np.inf)


def _box_depth(box: Box, center: np.ndarray,
               ax: np.ndarray, ay: np.ndarray) -> np.ndarray:
    h, w = ay.shape[0], ax.shape[0]
    lo = center - box.extent / 2.0
    hi = center + box.extent / 2.0
    tmin = np.full((h, w), -np.inf)
    tmax = np.full((h, w), np.inf)
    dirs = (np.broadcast_to(ax[None, :], (h, w)),
            np.broadcast_to(ay[:, None], (h, w)),
            np.ones((h, w)))
    for axis in range(3):
        d = dirs[axis]
        parallel = np.abs(d) < _EPS
        with np.errstate(divide="ignore", invalid="ignore"):
            t0 = lo[axis] / d
            t1 = hi[axis] / d
        near = np.minimum(t0, t1)
        far = np.maximum(t0, t1)
        # parallel rays hit the slab only if the origin sits inside it
        inside = (lo[axis] <= 0.0) & (0.0 <= hi[axis])
        near = np.where(parallel, np.where(inside, -np.inf, np.inf), near)
        far = np.where(parallel, np.where(inside, np.inf, -np.inf), far)
        tmin = np.maximum(tmin, near)
        tmax = np.minimum(tmax, far)
    hit = (tmax >= tmin) & (tmax > _EPS)
    z = np.where(tmin > _EPS, tmin, tmax)
    return np.where(hit & (z > _EPS), z, np.inf)


def _plane_depth(plane: PlanePatch, center: np.ndarray,
                 ax: np.ndarray, ay: np.ndarray) -> np.ndarray:
    n = plane.normal
    denom = n[0] * ax[None, :] + n[1] * ay[:, None] + n[2]
    offset = float(n @ center)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = offset / denom
    hit = (np.abs(denom) > _EPS) & (z > _EPS)
    # in-plane bounds
    u = np.array([1.0, 0.0, 0.0])
    if abs(float(u @ n)) > 0.9:
        u = np.array([0.0, 1.0, 0.0])
    u = u - (u @ n) * n
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    px = z * ax[None, :] - center[0]
    py = z * ay[:, None] - center[1]
    pz = z - center[2]
    du = px * u[0] + py * u[1] + pz * u[2]
    dv = px * v[0] + py * v[1] + pz * v[2]
    hit &= (np.abs(du) <= plane.extent[0] / 2.0) & (np.abs(dv) <= plane.extent[1] / 2.0)
    return np.where(hit, z, np.inf)


def _primitive_depth(shape: Primitive, center: np.ndarray,
                     ax: np.ndarray, ay: np.ndarray) -> np.ndarray:
    if isinstance(shape, Sphere):
        if center[2] + shape.radius <= 0.0:
            raise SceneError("sphere is entirely behind the camera")
        return _sphere_depth(shape, center, ax, ay)
    if isinstance(shape, Box):
        if center[2] + shape.extent[2] / 2.0 <= 0.0:
            raise SceneError("box is entirely behind the camera")
        return _box_depth(shape, center, ax, ay)
    if isinstance(shape, PlanePatch):
        return _plane_depth(shape, center, ax, ay)
    raise SceneError(f"unknown primitive {type(shape).__name__}")


def render_frame(spec: SyntheticSceneSpec, intrinsics: CameraIntrinsics,
                 frame: int, seed: int) -> Tuple[RgbdFrame, np.ndarray]:
    """Render one frame and its ground-truth label raster.

    Each pixel takes the depth, color and id of the nearest primitive along
    its ray; the background plane fills everything else with label 255. Noise
    is additive Gaussian from a counter-based stream keyed by (seed, frame),
    with depth clamped to stay valid.
    """
    h, w = intrinsics.depth_height, intrinsics.depth_width
    ax, ay = ray_coefficients(intrinsics)
    depths = np.full((len(spec.objects) + 1, h, w), np.inf)
    for i, obj in enumerate(spec.objects):
        center = obj.shape.center + obj.offset_at(frame)
        depths[i] = _primitive_depth(obj.shape, center, ax, ay)
    depths[-1] = spec.background_depth

    nearest = np.argmin(depths, axis=0)
    depth = np.take_along_axis(depths, nearest[None], axis=0)[0]
    labels = np.where(nearest == len(spec.objects), BACKGROUND_LABEL,
                      nearest).astype(np.uint8)

    palette = np.vstack([obj.shape.color for obj in spec.objects]
                        + [spec.background_color])
    color = palette[nearest]

    if spec.depth_noise_std > 0.0:
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence((seed, frame, 0))))
        depth = depth + rng.normal(0.0, spec.depth_noise_std, size=depth.shape)
        depth = np.maximum(depth, 1e-3)
    if spec.color_noise_std > 0.0:
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence((seed, frame, 1))))
        color = color + rng.normal(0.0, spec.color_noise_std, size=color.shape)

    rgbd = RgbdFrame(width=w, height=h, depth=depth,
                     color=np.clip(np.rint(color), 0, 255).astype(np.uint8),
                     frame_index=frame)
    return rgbd, labels


def generate_synthetic_scene(spec: SyntheticSceneSpec, intrinsics: CameraIntrinsics,
                             seed: int) -> Tuple[list[RgbdFrame], list[np.ndarray]]:
    """Render the whole sequence. Pure function of (spec, intrinsics, seed)."""
    frames = []
    labels = []
    for f in range(spec.frame_count):
        rgbd, lab = render_frame(spec, intrinsics, f, seed)
        frames.append(rgbd)
        labels.append(lab)
    return frames, labels


def write_scene_dataset(spec: SyntheticSceneSpec, intrinsics: CameraIntrinsics,
                        seed: int, out_dir: Path | str) -> Path:
    """Render a scene to a PNG dataset plus manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frames, labels = generate_synthetic_scene(spec, intrinsics, seed)
    entries = []
    for f, (frame, lab) in enumerate(zip(frames, labels)):
        color_name = f"color_{f:06d}.png"
        depth_name = f"depth_{f:06d}.png"
        labels_name = f"truth_{f:06d}.png"
        write_color_png(frame.color, out / color_name)
        write_depth_png(frame.depth, out / depth_name)
        write_label_png(lab, out / labels_name)
        entries.append(FrameEntry(color_name, depth_name, labels_name))
    manifest = DatasetManifest(intrinsics=intrinsics, frames=entries,
                               pre_aligned=True, base_dir=out)
    manifest_path = out / "manifest.txt"
    save_manifest(manifest, manifest_path)
    return manifest_path


def _parse_object(entry: dict, frame_count: int) -> SceneObject:
    kind = entry.get("kind")
    color = entry.get("color", [200, 200, 200])
    center = entry.get("center", [0.0, 0.0, 2.0])
    if kind == "sphere":
        shape: Primitive = Sphere(center=center, radius=float(entry.get("radius", 0.2)),
                                  color=color)
    elif kind == "box":
        shape = Box(center=center, extent=entry.get("extent", [0.3, 0.3, 0.3]),
                    color=color)
    elif kind == "plane":
        shape = PlanePatch(center=center, extent=entry.get("extent", [10.0, 10.0]),
                           color=color, normal=entry.get("normal", [0.0, 0.0, -1.0]))
    else:
        raise SceneError(f"unknown object kind {kind!r}")
    offsets = entry.get("offsets")
    velocity = entry.get("velocity")
    if offsets is not None:
        offsets = np.asarray(offsets, dtype=np.float64)
        if offsets.shape != (frame_count, 3):
            raise SceneError(
                f"offsets must be shape ({frame_count}, 3), got {offsets.shape}")
    if velocity is not None:
        velocity = _as_vec3(velocity, "velocity")
    return SceneObject(shape=shape, offsets=offsets, velocity=velocity)


def load_scene_spec(path: Path | str,
                    ) -> Tuple[SyntheticSceneSpec, CameraIntrinsics]:
    """Load a scene spec JSON file. See README for the schema."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SceneError(f"cannot read scene spec {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise SceneError(f"{path}: scene spec must be a JSON object")
    try:
        frame_count = int(data["frame_count"])
        bg = data.get("background", {})
        intr_cfg = data.get("intrinsics", {})
        preset = intr_cfg.get("preset", "kinect-v2")
        intrinsics = CameraIntrinsics.preset(
            preset,
            depth_width=int(intr_cfg.get("depth_width", 512)),
            depth_height=int(intr_cfg.get("depth_height", 424)),
        )
        noise = data.get("noise", {})
        objects = [_parse_object(o, frame_count) for o in data.get("objects", [])]
        spec = SyntheticSceneSpec(
            objects=objects,
            background_depth=float(bg.get("depth", 5.0)),
            background_color=np.asarray(bg.get("color", [110, 110, 110]),
                                        dtype=np.float64),
            frame_count=frame_count,
            depth_noise_std=float(noise.get("depth_std", 0.0)),
            color_noise_std=float(noise.get("color_std", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneError(f"{path}: malformed scene spec: {exc}") from exc
    return spec, intrinsics
