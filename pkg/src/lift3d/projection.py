"""Pinhole projection of the cloud into camera frames, depth-occlusion
visibility, and superpoint/2D-mask overlap ratios."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import CameraFrame, Mask2D, PointCloud
from .superpoints import SuperpointPartition

NEAR_EPS = 1e-6
DEFAULT_TAU_DEPTH = 0.1


@dataclass(frozen=True)
class Projection:
    frame_id: int
    px: np.ndarray        # N, pixel x before flooring
    py: np.ndarray        # N
    z: np.ndarray         # N, camera-space depth in meters
    in_bounds: np.ndarray  # N bool

    def pixel_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer (ix, iy) via floor; only meaningful where in_bounds."""
        return (
            np.floor(self.px).astype(np.int64),
            np.floor(self.py).astype(np.int64),
        )


def project_points(cloud: PointCloud, frame: CameraFrame) -> Projection:
    R = frame.extrinsics[:, :3]
    c = frame.extrinsics[:, 3]
    cam = cloud.positions @ R.T + c
    z = cam[:, 2]
    front = z > NEAR_EPS
    uvw = cam @ frame.intrinsics.T
    px = np.full(cloud.count, -1.0)
    py = np.full(cloud.count, -1.0)
    np.divide(uvw[:, 0], z, out=px, where=front)
    np.divide(uvw[:, 1], z, out=py, where=front)
    W, H = frame.image_size
    ix = np.floor(px)
    iy = np.floor(py)
    in_bounds = front & (ix >= 0) & (ix <= W - 1) & (iy >= 0) & (iy <= H - 1)
    return Projection(frame_id=frame.frame_id, px=px, py=py, z=z, in_bounds=in_bounds)


def visibility(
    projection: Projection, frame: CameraFrame, tau_depth: float = DEFAULT_TAU_DEPTH
) -> np.ndarray:
    """Boolean N-vector: in bounds, measured depth present, and projected
    depth within tau_depth of the depth map at the floored pixel."""
    vis = np.zeros(projection.px.shape[0], dtype=bool)
    idx = np.flatnonzero(projection.in_bounds)
    if idx.size == 0:
        return vis
    ix, iy = projection.pixel_indices()
    measured = frame.depth[iy[idx], ix[idx]]
    ok = (measured > 0) & (np.abs(projection.z[idx] - measured) <= tau_depth)
    vis[idx[ok]] = True
    return vis


def superpoint_mask_overlap(
    partition: SuperpointPartition,
    projection: Projection,
    visible: np.ndarray,
    mask: Mask2D,
) -> np.ndarray:
    """Per-superpoint ratio: visible points landing inside the mask over
    visible points, 0 for superpoints with no visible point."""
    if mask.frame_id != projection.frame_id:
        raise ValueError("mask does not belong to this projection's frame")
    u = partition.n_superpoints
    vis_idx = np.flatnonzero(visible)
    denom = np.bincount(partition.labels[vis_idx], minlength=u).astype(np.float64)
    ix, iy = projection.pixel_indices()
    in_mask = mask.bits[iy[vis_idx], ix[vis_idx]]
    numer = np.bincount(partition.labels[vis_idx[in_mask]], minlength=u).astype(np.float64)
    out = np.zeros(u)
    np.divide(numer, denom, out=out, where=denom > 0)
    return out
