"""Shared fixtures and cloud-building helpers."""

import numpy as np
import pytest

import wcluster as wc


def make_cloud(pos, rgb, normals=None, valid=None, normal_valid=None):
    """Pack point lists into a 1 x n organized cloud."""
    pos = np.asarray(pos, dtype=np.float64)
    rgb = np.asarray(rgb, dtype=np.float64)
    n = pos.shape[0]
    if normals is None:
        normals = np.zeros((n, 3))
        if normal_valid is None:
            normal_valid = np.zeros(n, dtype=bool)
    normals = np.asarray(normals, dtype=np.float64)
    if normal_valid is None:
        normal_valid = np.ones(n, dtype=bool)
    if valid is None:
        valid = np.ones(n, dtype=bool)
    return wc.OrganizedCloud(
        xyz=pos.reshape(1, n, 3),
        rgb=rgb.reshape(1, n, 3),
        normals=np.asarray(normals).reshape(1, n, 3),
        valid=np.asarray(valid, dtype=bool).reshape(1, n),
        normal_valid=np.asarray(normal_valid, dtype=bool).reshape(1, n),
        rows=np.arange(1),
        cols=np.arange(n),
    )


def blob_cloud(rng, n_points=300, n_blobs=3, sep=4.0, pos_noise=0.15,
               rgb_noise=5.0):
    """Well-separated colored blobs packed into an organized cloud."""
    centers_pos = np.stack([
        (np.arange(n_blobs) % 5) * sep - 2 * sep,
        (np.arange(n_blobs) // 5) * sep - sep,
        np.full(n_blobs, 3.0)], axis=1)
    centers_rgb = rng.uniform(0, 255, size=(n_blobs, 3))
    sizes = rng.multinomial(n_points - n_blobs, np.ones(n_blobs) / n_blobs) + 1
    pos, rgb = [], []
    for i, s in enumerate(sizes):
        pos.append(centers_pos[i] + rng.normal(0, pos_noise, size=(s, 3)))
        rgb.append(np.clip(centers_rgb[i] + rng.normal(0, rgb_noise, size=(s, 3)),
                           0, 255))
    pos = np.vstack(pos)
    rgb = np.vstack(rgb)
    normals = np.tile([0.0, 0.0, -1.0], (pos.shape[0], 1))
    return make_cloud(pos, rgb, normals=normals)


def three_object_scene(width=128, height=106, background_depth=3.0):
    """Three well-separated solid-color objects on a background plane."""
    intr = wc.CameraIntrinsics.preset("kinect-v2", depth_width=width,
                                      depth_height=height)
    spec = wc.SyntheticSceneSpec(
        objects=[
            wc.SceneObject(shape=wc.Sphere(center=[-1.0, -0.4, 2.0], radius=0.4,
                                           color=[255, 40, 40])),
            wc.SceneObject(shape=wc.Box(center=[0.0, 0.35, 2.2],
                                        extent=[0.7, 0.7, 0.4],
                                        color=[40, 255, 40])),
            wc.SceneObject(shape=wc.Sphere(center=[1.1, -0.3, 2.4], radius=0.45,
                                           color=[40, 80, 255])),
        ],
        background_depth=background_depth,
        background_color=[120, 120, 120],
        frame_count=1,
    )
    return spec, intr


@pytest.fixture
def kinect_v2():
    return wc.CameraIntrinsics.preset("kinect-v2")


@pytest.fixture
def small_intrinsics():
    return wc.CameraIntrinsics.preset("kinect-v2", depth_width=64, depth_height=53)
