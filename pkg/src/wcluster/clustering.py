"""Streaming weighted k-means over organized clouds.

Every grid cell carries k cumulative weight accumulators. Each iteration the
nearest centroid (under a hybrid position/color/normal similarity) wins a
fixed increment; the accumulators are L1-normalized into per-point membership
weights, and a point's label is the cluster with the highest weight. Because
the accumulators persist across frames, labels are stable under noise and
take over smoothly when the scene changes.
"""

from __future__ import annotations

import colorsys
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigError
from .preprocess import CloudPoint, OrganizedCloud

NO_LABEL = -1
PALETTE_SIZE = 100
_UNIT_EPS = 1e-12


def _build_palette(size: int = PALETTE_SIZE) -> np.ndarray:
    """Fixed palette of pairwise-distinct display colors."""
    colors: list[tuple[int, int, int]] = []
    seen: set[tuple[int, int, int]] = set()
    i = 0
    while len(colors) < size:
        hue = (i * 0.61803398875) % 1.0
        sat = (0.95, 0.6, 0.8)[i % 3]
        val = (0.95, 0.8, 0.6)[(i // 3) % 3]
        rgb = tuple(int(round(c * 255.0)) for c in colorsys.hsv_to_rgb(hue, sat, val))
        if rgb not in seen:
            seen.add(rgb)
            colors.append(rgb)
        i += 1
    return np.array(colors, dtype=np.uint8)


DISPLAY_PALETTE = _build_palette()


@dataclass(frozen=True)
class ClusterParams:
    """Clustering scales and bounds.

    alpha scales color distance, pos_scale scales geometric distance (defaults
    to 1 - alpha, saturating the pos_scale + alpha <= 1 bound), gamma scales
    the normal-angle penalty, psi is the per-win weight increment.
    """

    k: int
    alpha: float = 0.01
    pos_scale: Optional[float] = None
    gamma: float = 0.001
    psi: float = 1.0
    inner_iters: int = 1

    def __post_init__(self):
        if self.pos_scale is None:
            object.__setattr__(self, "pos_scale", 1.0 - self.alpha)
        if not 2 <= self.k <= PALETTE_SIZE:
            raise ConfigError(f"k must be in [2, {PALETTE_SIZE}], got {self.k}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(
                f"color scale bound violated: 0 < alpha < 1 required, got {self.alpha}")
        if self.pos_scale <= 0.0:
            raise ConfigError(
                f"position scale must be > 0, got {self.pos_scale}")
        if self.pos_scale + self.alpha > 1.0:
            raise ConfigError(
                f"scale budget violated: pos_scale + alpha <= 1 required, got "
                f"{self.pos_scale} + {self.alpha}")
        if not 0.0 < self.psi <= 1.0:
            raise ConfigError(
                f"weight increment bound violated: 0 < psi <= 1 required, got {self.psi}")
        if self.gamma < 0.0:
            raise ConfigError(f"normal scale gamma must be >= 0, got {self.gamma}")
        if self.inner_iters < 1:
            raise ConfigError(f"inner_iters must be >= 1, got {self.inner_iters}")


@dataclass(frozen=True)
class Centroid:
    """One cluster representative: 9-D features plus a fixed display color."""

    position: np.ndarray            # (3,) meters
    color: np.ndarray               # (3,) in [0, 255]
    normal: Optional[np.ndarray]    # (3,) unit, or None when absent
    display_color: Tuple[int, int, int]


@dataclass
class Centroids:
    """Struct-of-arrays centroid set; display colors never change."""

    position: np.ndarray       # (k, 3)
    color: np.ndarray          # (k, 3)
    normal: np.ndarray         # (k, 3), zeros where absent
    normal_valid: np.ndarray   # (k,) bool
    display_color: np.ndarray  # (k, 3) uint8

    def __len__(self) -> int:
        return self.position.shape[0]

    def __getitem__(self, i: int) -> Centroid:
        return Centroid(
            position=self.position[i].copy(),
            color=self.color[i].copy(),
            normal=self.normal[i].copy() if self.normal_valid[i] else None,
            display_color=tuple(int(c) for c in self.display_color[i]),
        )

    def copy(self) -> "Centroids":
        return Centroids(self.position.copy(), self.color.copy(),
                         self.normal.copy(), self.normal_valid.copy(),
                         self.display_color.copy())


@dataclass
class WeightState:
    """Per-grid-cell cumulative weights, their normalized form, and labels."""

    delta: np.ndarray   # (H, W, k) float64, non-negative accumulators
    mu: np.ndarray      # (H, W, k) float64, L1-normalized (all-zero before any win)
    labels: np.ndarray  # (H, W) int32, NO_LABEL where no weight yet

    @classmethod
    def create(cls, grid_shape: Tuple[int, int], k: int) -> "WeightState":
        h, w = grid_shape
        return cls(
            delta=np.zeros((h, w, k)),
            mu=np.zeros((h, w, k)),
            labels=np.full((h, w), NO_LABEL, dtype=np.int32),
        )

    @property
    def k(self) -> int:
        return self.delta.shape[2]

    @property
    def grid_shape(self) -> Tuple[int, int]:
        return self.delta.shape[:2]


@dataclass
class IterationClock:
    """Cumulative count of clustering iterations across the sequence."""

    tau: int = 0

    def advance(self, iterations: int) -> None:
        if iterations < 0:
            raise ValueError("iteration count cannot decrease")
        self.tau += iterations


def dist(point: CloudPoint, c: Centroid, params: ClusterParams) -> float:
    """Scaled Euclidean distance over position and color."""
    dp = point.position - c.position
    dc = point.color - c.color
    return math.sqrt(params.pos_scale ** 2 * float(dp @ dp)
                     + params.alpha ** 2 * float(dc @ dc))


def similarity_f(point: CloudPoint, c: Centroid, params: ClusterParams) -> float:
    """dist plus gamma * (1 - cos(angle between normals)).

    The normal term is 0 when either normal is flagged absent.
    """
    d = dist(point, c, params)
    if params.gamma == 0.0 or not point.normal_valid or c.normal is None:
        return d
    cos_theta = float(np.clip(point.normal @ c.normal, -1.0, 1.0))
    return d + params.gamma * (1.0 - cos_theta)


def update_weights(state: WeightState, cell: Tuple[int, int], winner: int,
                   psi: float) -> WeightState:
    """Add psi to the winning cluster's accumulator at one grid cell."""
    if not 0 <= winner < state.k:
        raise ValueError(f"winner {winner} out of range [0, {state.k})")
    state.delta[cell[0], cell[1], winner] += psi
    return state


def normalize_weights(state: WeightState) -> WeightState:
    """L1-normalize accumulators per point; all-zero rows stay all-zero."""
    total = state.delta.sum(axis=2)
    state.mu.fill(0.0)
    has_weight = total > 0.0
    np.divide(state.delta, total[:, :, None], out=state.mu,
              where=has_weight[:, :, None])
    return state


def assign_labels(state: WeightState) -> WeightState:
    """Label each weighted point with its argmax weight (ties: lowest index)."""
    total = state.delta.sum(axis=2)
    labels = np.argmax(state.mu, axis=2).astype(np.int32)
    state.labels = np.where(total > 0.0, labels, np.int32(NO_LABEL))
    return state


def _valid_features(cloud: OrganizedCloud):
    m = cloud.valid
    return cloud.xyz[m], cloud.rgb[m], cloud.normals[m], cloud.normal_valid[m]


def _f_block(pos: np.ndarray, rgb: np.ndarray, nrm: np.ndarray, nok: np.ndarray,
             c_pos: np.ndarray, c_rgb: np.ndarray,
             c_nrm: Optional[np.ndarray], params: ClusterParams) -> np.ndarray:
    """Vectorized similarity from a block of points to one centroid."""
    dp = pos - c_pos
    dc = rgb - c_rgb
    f = np.sqrt(params.pos_scale ** 2 * np.einsum("ij,ij->i", dp, dp)
                + params.alpha ** 2 * np.einsum("ij,ij->i", dc, dc))
    if params.gamma > 0.0 and c_nrm is not None:
        cos_theta = np.clip(nrm @ c_nrm, -1.0, 1.0)
        f = f + np.where(nok, params.gamma * (1.0 - cos_theta), 0.0)
    return f


def _winners_block(pos, rgb, nrm, nok, centroids: Centroids,
                   params: ClusterParams) -> np.ndarray:
    best = np.zeros(pos.shape[0], dtype=np.int64)
    best_f = np.full(pos.shape[0], np.inf)
    for i in range(len(centroids)):
        c_nrm = centroids.normal[i] if centroids.normal_valid[i] else None
        f = _f_block(pos, rgb, nrm, nok, centroids.position[i],
                     centroids.color[i], c_nrm, params)
        better = f < best_f  # strict: ties stay with the lowest index
        best[better] = i
        best_f[better] = f[better]
    return best


def assign_winners(cloud: OrganizedCloud, centroids: Centroids,
                   params: ClusterParams, threads: int = 1) -> np.ndarray:
    """Per valid point, the index of the centroid minimizing similarity.

    Returned in the row-major order of the valid mask. Points are independent,
    so a thread split over contiguous blocks is bit-identical to sequential.
    """
    pos, rgb, nrm, nok = _valid_features(cloud)
    n = pos.shape[0]
    if threads <= 1 or n < 4096:
        return _winners_block(pos, rgb, nrm, nok, centroids, params)
    bounds = np.linspace(0, n, threads + 1, dtype=np.intp)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(
            lambda se: _winners_block(pos[se[0]:se[1]], rgb[se[0]:se[1]],
                                      nrm[se[0]:se[1]], nok[se[0]:se[1]],
                                      centroids, params),
            zip(bounds[:-1], bounds[1:])))
    return np.concatenate(parts)


def seed_kmeanspp(cloud: OrganizedCloud, params: ClusterParams,
                  rng_seed: int) -> Centroids:
    """Pick k initial centroids from the valid points by k-means++.

    First seed uniform; each next seed is drawn with probability proportional
    to the squared similarity to its nearest already-chosen seed. Deterministic
    given rng_seed. Display colors come from the fixed palette.
    """
    pos, rgb, nrm, nok = _valid_features(cloud)
    n = pos.shape[0]
    k = params.k
    if n < k:
        raise ValueError(f"k-means++ needs at least k={k} valid points, got {n}")
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    chosen = np.empty(k, dtype=np.intp)
    chosen[0] = int(rng.integers(n))

    def f_to(idx: int) -> np.ndarray:
        c_nrm = nrm[idx] if nok[idx] else None
        return _f_block(pos, rgb, nrm, nok, pos[idx], rgb[idx], c_nrm, params)

    min_f2 = f_to(int(chosen[0])) ** 2
    for j in range(1, k):
        total = float(min_f2.sum())
        if total > 0.0:
            r = rng.random() * total
            idx = int(min(np.searchsorted(np.cumsum(min_f2), r, side="right"), n - 1))
        else:
            # all remaining mass is zero (duplicate points): fall back to uniform
            idx = int(rng.integers(n))
        chosen[j] = idx
        min_f2 = np.minimum(min_f2, f_to(idx) ** 2)

    normals = np.where(nok[chosen, None], nrm[chosen], 0.0)
    return Centroids(
        position=pos[chosen].copy(),
        color=rgb[chosen].copy(),
        normal=normals,
        normal_valid=nok[chosen].copy(),
        display_color=DISPLAY_PALETTE[:k].copy(),
    )


def update_centroids(cloud: OrganizedCloud, state: WeightState,
                     current: Centroids) -> Centroids:
    """Refresh centroid features as the weight-blended mean of their points.

    Each labeled valid point contributes its features weighted by its own
    membership weight for that cluster. Normal means are re-normalized to unit
    length (flagged absent when near zero or unsupported). Empty clusters keep
    their previous centroid. Display colors never change.
    """
    k = len(current)
    members = cloud.valid & (state.labels >= 0)
    out = current.copy()
    if not members.any():
        return out
    lab = state.labels[members].astype(np.intp)
    w = np.take_along_axis(state.mu[members], lab[:, None], axis=1)[:, 0]
    wsum = np.bincount(lab, weights=w, minlength=k)
    occupied = wsum > 0.0

    def weighted_mean(values: np.ndarray, old: np.ndarray) -> np.ndarray:
        sums = np.stack([np.bincount(lab, weights=w * values[:, d], minlength=k)
                         for d in range(values.shape[1])], axis=1)
        mean = np.where(occupied[:, None], sums / np.where(occupied, wsum, 1.0)[:, None],
                        old)
        return mean

    out.position = weighted_mean(cloud.xyz[members], current.position)
    out.color = weighted_mean(cloud.rgb[members], current.color)

    nmask = members & cloud.normal_valid
    n_lab = state.labels[nmask].astype(np.intp)
    n_w = np.take_along_axis(state.mu[nmask], n_lab[:, None], axis=1)[:, 0]
    n_sums = np.stack([np.bincount(n_lab, weights=n_w * cloud.normals[nmask][:, d],
                                   minlength=k) for d in range(3)], axis=1)
    norms = np.linalg.norm(n_sums, axis=1)
    renorm_ok = occupied & (norms > _UNIT_EPS)
    out.normal = np.where(renorm_ok[:, None],
                          n_sums / np.where(renorm_ok, norms, 1.0)[:, None],
                          np.where(occupied[:, None], 0.0, current.normal))
    out.normal_valid = np.where(occupied, renorm_ok, current.normal_valid)
    return out


def step_frame(cloud: OrganizedCloud, state: WeightState, centroids: Centroids,
               clock: IterationClock, params: ClusterParams, *,
               freeze_centroids: bool = False, threads: int = 1,
               ) -> Tuple[WeightState, Centroids, IterationClock]:
    """Run inner_iters clustering iterations of one frame.

    Per iteration: every valid point's nearest centroid wins psi, weights are
    re-normalized, labels re-derived, and centroids refreshed (unless frozen).
    Invalid points keep their accumulators and labels untouched.
    """
    if state.grid_shape != cloud.grid_shape:
        raise ValueError(f"weight grid {state.grid_shape} does not match "
                         f"cloud grid {cloud.grid_shape}")
    if state.k != params.k:
        raise ValueError(f"weight state has k={state.k}, params say k={params.k}")
    flat = state.delta.reshape(-1, state.k)
    cell_idx = np.flatnonzero(cloud.valid.ravel())
    for _ in range(params.inner_iters):
        winners = assign_winners(cloud, centroids, params, threads=threads)
        flat[cell_idx, winners] += params.psi
        normalize_weights(state)
        assign_labels(state)
        if not freeze_centroids:
            centroids = update_centroids(cloud, state, centroids)
    clock.advance(params.inner_iters)
    return state, centroids, clock
