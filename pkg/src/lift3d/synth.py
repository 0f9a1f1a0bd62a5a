"""Deterministic synthetic scene generator.

Produces a full scene bundle from primitive objects: sampled surface
points, a circular camera trajectory, splat-rendered depth maps, perfect
per-frame 2D instance masks, point-level ground truth, and synthetic
feature channels (per-object basis vectors for the 3D features,
orthogonal per-class vectors for the query embeddings) so the whole
pipeline runs without any neural input.
"""
from __future__ import annotations

import colorsys
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import matrixio
from .projection import NEAR_EPS
from .rle import encode_rle, decode_rle
from .scene import (
    CameraFrame,
    Mask2D,
    PointCloud,
    ProposalSet,
    dump_json,
    write_scene_bundle,
)

DEFAULT_MIN_MASK_PIXELS = 16


@dataclass(frozen=True)
class Primitive:
    kind: str            # "box" | "sphere"
    center: tuple[float, float, float]
    extents: tuple[float, float, float]  # half-sizes; sphere radius = extents[0]
    color: tuple[float, float, float]
    class_id: int

    def __post_init__(self):
        if self.kind not in ("box", "sphere"):
            raise ValueError(f"unknown primitive kind {self.kind!r}")


@dataclass
class SceneSpec:
    seed: int
    objects: list[Primitive]
    room_extents: tuple[float, float, float] = (6.0, 6.0, 3.0)
    n_frames: int = 16
    points_per_object: int = 2000
    noise_std: float = 0.005
    image_size: tuple[int, int] = (256, 192)
    fov_deg: float = 60.0
    camera_radius: float = 4.5
    camera_height: float = 1.6

    def __post_init__(self):
        if not self.objects:
            raise ValueError("SceneSpec needs at least one object")
        if self.n_frames < 1:
            raise ValueError("n_frames must be >= 1")
        hx, hy, hz = (e / 2 for e in self.room_extents)
        for obj in self.objects:
            cx, cy, cz = obj.center
            if abs(cx) > hx or abs(cy) > hy or not 0 <= cz <= 2 * hz:
                raise ValueError(f"object at {obj.center} lies outside the room")

    @classmethod
    def grid(cls, seed: int, n_objects: int = 10, n_frames: int = 16,
             points_per_object: int = 2000, **kwargs) -> "SceneSpec":
        """Well-separated primitives on a floor grid with distinct hues."""
        rng = np.random.default_rng(seed)
        cols = int(np.ceil(np.sqrt(n_objects)))
        spacing = 1.3
        half = (cols - 1) * spacing / 2
        objects = []
        for i in range(n_objects):
            gx, gy = i % cols, i // cols
            kind = "box" if i % 2 == 0 else "sphere"
            size = 0.22 + 0.1 * rng.random()
            center = (
                gx * spacing - half,
                gy * spacing - half,
                0.4 + 0.4 * rng.random(),
            )
            color = colorsys.hsv_to_rgb(i / n_objects, 0.9, 0.9)
            extents = (size, size * (0.8 + 0.4 * rng.random()), size) if kind == "box" \
                else (size, size, size)
            objects.append(Primitive(kind, center, extents, color, class_id=i))
        return cls(seed=seed, objects=objects, n_frames=n_frames,
                   points_per_object=points_per_object, **kwargs)

    @classmethod
    def from_json(cls, path) -> "SceneSpec":
        rec = json.loads(Path(path).read_text())
        objects = [Primitive(
            kind=o["kind"],
            center=tuple(o["center"]),
            extents=tuple(o["extents"]),
            color=tuple(o["color"]),
            class_id=int(o["class_id"]),
        ) for o in rec["objects"]]
        keys = ("room_extents", "n_frames", "points_per_object", "noise_std",
                "image_size", "fov_deg", "camera_radius", "camera_height")
        extra = {k: (tuple(rec[k]) if isinstance(rec[k], list) else rec[k])
                 for k in keys if k in rec}
        return cls(seed=int(rec["seed"]), objects=objects, **extra)


# ---------------------------------------------------------------------------
# Point sampling


def _sample_box(rng, center, extents, n):
    ex, ey, ez = extents
    areas = np.array([ey * ez, ey * ez, ex * ez, ex * ez, ex * ey, ex * ey])
    faces = rng.choice(6, size=n, p=areas / areas.sum())
    u = rng.uniform(-1, 1, size=n)
    v = rng.uniform(-1, 1, size=n)
    pts = np.zeros((n, 3))
    axis = faces // 2            # fixed axis
    sign = np.where(faces % 2 == 0, 1.0, -1.0)
    for a in range(3):
        sel = axis == a
        o1, o2 = [i for i in range(3) if i != a]
        pts[sel, a] = sign[sel] * extents[a]
        pts[sel, o1] = u[sel] * extents[o1]
        pts[sel, o2] = v[sel] * extents[o2]
    return pts + np.asarray(center)


def _sample_sphere(rng, center, radius, n):
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * radius + np.asarray(center)


def sample_points(spec: SceneSpec, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (positions, colors, owner object indices)."""
    positions, colors, owners = [], [], []
    for i, obj in enumerate(spec.objects):
        if obj.kind == "box":
            pts = _sample_box(rng, obj.center, obj.extents, spec.points_per_object)
        else:
            pts = _sample_sphere(rng, obj.center, obj.extents[0], spec.points_per_object)
        pts = pts + rng.normal(scale=spec.noise_std, size=pts.shape)
        positions.append(pts)
        colors.append(np.tile(obj.color, (spec.points_per_object, 1)))
        owners.append(np.full(spec.points_per_object, i, dtype=np.int32))
    return (np.concatenate(positions), np.clip(np.concatenate(colors), 0, 1),
            np.concatenate(owners))


# ---------------------------------------------------------------------------
# Cameras and rendering


def _look_at(eye: np.ndarray, target: np.ndarray) -> np.ndarray:
    """World-to-camera [R|c] with +z forward, +x right, +y down."""
    forward = target - eye
    forward = forward / np.linalg.norm(forward)
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    if np.linalg.norm(right) < 1e-9:
        right = np.array([1.0, 0.0, 0.0])
    right = right / np.linalg.norm(right)
    down = np.cross(forward, right)
    R = np.stack([right, down, forward])
    c = -R @ eye
    return np.hstack([R, c[:, None]])


def make_cameras(spec: SceneSpec, target: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    W, H = spec.image_size
    f = 0.5 * W / np.tan(np.radians(spec.fov_deg) / 2)
    K = np.array([[f, 0, W / 2], [0, f, H / 2], [0, 0, 1.0]])
    cams = []
    for t in range(spec.n_frames):
        ang = 2 * np.pi * t / spec.n_frames
        eye = np.array([
            spec.camera_radius * np.cos(ang),
            spec.camera_radius * np.sin(ang),
            spec.camera_height,
        ])
        cams.append((K, _look_at(eye, target)))
    return cams


def _splat(positions: np.ndarray, K: np.ndarray, E: np.ndarray,
           image_size: tuple[int, int]):
    """Project points; return (ix, iy, z, valid) with 1-pixel footprint."""
    cam = positions @ E[:, :3].T + E[:, 3]
    z = cam[:, 2]
    front = z > NEAR_EPS
    uvw = cam @ K.T
    with np.errstate(invalid="ignore", divide="ignore"):
        x = np.where(front, uvw[:, 0] / z, -1.0)
        y = np.where(front, uvw[:, 1] / z, -1.0)
    ix = np.floor(x).astype(np.int64)
    iy = np.floor(y).astype(np.int64)
    W, H = image_size
    valid = front & (ix >= 0) & (ix < W) & (iy >= 0) & (iy < H)
    return ix, iy, z, valid


def render_depth(positions: np.ndarray, owners: np.ndarray, K: np.ndarray,
                 E: np.ndarray, image_size: tuple[int, int]):
    """Nearest-splat depth and owner maps; empty pixels hold depth 0 and
    owner -1."""
    W, H = image_size
    depth = np.zeros((H, W))
    owner = np.full((H, W), -1, dtype=np.int64)
    ix, iy, z, valid = _splat(positions, K, E, image_size)
    idx = np.flatnonzero(valid)
    # write far to near so the nearest point wins each pixel
    order = idx[np.argsort(-z[idx], kind="stable")]
    depth[iy[order], ix[order]] = z[order]
    owner[iy[order], ix[order]] = owners[order]
    return depth, owner


def render_gt_masks(owner_map: np.ndarray, n_objects: int, frame_id: int,
                    mask_id_base: int,
                    min_pixels: int = DEFAULT_MIN_MASK_PIXELS) -> list[Mask2D]:
    masks = []
    for obj in range(n_objects):
        bits = owner_map == obj
        if np.count_nonzero(bits) < min_pixels:
            continue
        masks.append(Mask2D(
            mask_id=mask_id_base + obj,
            frame_id=frame_id,
            bits=bits,
            label_hint=f"object_{obj}",
            score=1.0,
        ))
    return masks


# ---------------------------------------------------------------------------
# Bundle generation


def generate_scene(spec: SceneSpec, out_dir) -> Path:
    out = Path(out_dir)
    rng = np.random.default_rng(spec.seed)
    positions, colors, owners = sample_points(spec, rng)
    cloud = PointCloud(positions, colors)

    centers = np.array([o.center for o in spec.objects])
    target = centers.mean(axis=0)
    cams = make_cameras(spec, target)

    n_obj = len(spec.objects)
    frames = []
    masks = {}
    for t, (K, E) in enumerate(cams):
        depth, owner_map = render_depth(positions, owners, K, E, spec.image_size)
        frames.append(CameraFrame(
            frame_id=t, intrinsics=K, extrinsics=E, depth=depth,
            image_size=spec.image_size,
        ))
        masks[t] = render_gt_masks(owner_map, n_obj, t, mask_id_base=t * n_obj)
    write_scene_bundle(out, cloud, frames, masks)

    # point-level ground truth
    dump_json(out / "gt_instances.json", {
        "n_points": cloud.count,
        "instances": [
            {"rle": encode_rle(owners == i), "class_id": spec.objects[i].class_id}
            for i in range(n_obj)
        ],
    })

    # synthetic per-point features: one basis vector per object plus noise
    feat = np.zeros((cloud.count, n_obj))
    feat[np.arange(cloud.count), owners] = 1.0
    feat += rng.normal(scale=0.01, size=feat.shape)
    (out / "features").mkdir(exist_ok=True)
    matrixio.save_matrix(out / "features" / "point_features.o3df", feat)

    # query embeddings: orthogonal unit vector per class
    class_ids = sorted({o.class_id for o in spec.objects})
    emb = np.eye(len(class_ids))
    (out / "queries").mkdir(exist_ok=True)
    matrixio.save_matrix(out / "queries" / "text_embeddings.o3df", emb)
    dump_json(out / "queries" / "prompts.json",
              {"prompts": [f"class_{c}" for c in class_ids],
               "class_ids": class_ids})
    return out


def load_gt_instances(path, n_points: int):
    rec = json.loads(Path(path).read_text())
    masks = np.zeros((len(rec["instances"]), n_points), dtype=bool)
    class_ids = []
    for i, inst in enumerate(rec["instances"]):
        masks[i] = decode_rle(inst["rle"], n_points)
        class_ids.append(int(inst["class_id"]))
    return masks, class_ids


def synthesize_view_features(
    proposals: ProposalSet,
    gt_masks: np.ndarray,
    gt_class_ids: list[int],
    class_embeddings: np.ndarray,
    embedding_class_ids: list[int],
    visibilities: dict[int, np.ndarray],
    out_dir,
) -> None:
    """Stand-in for a pretrained image embedder: each proposal gets, in
    every frame that sees it, the embedding of its majority ground-truth
    class. Writes clip/view_features.o3df + clip/view_index.json."""
    out = Path(out_dir)
    (out / "clip").mkdir(exist_ok=True)
    class_row = {c: i for i, c in enumerate(embedding_class_ids)}
    rows = []
    index = []
    for k in range(len(proposals)):
        mask = proposals.masks[k]
        overlaps = (gt_masks & mask).sum(axis=1)
        cls = gt_class_ids[int(np.argmax(overlaps))]
        vec = class_embeddings[class_row[cls]]
        for fid in sorted(visibilities):
            if np.count_nonzero(mask & visibilities[fid]) == 0:
                continue
            index.append({"proposal": k, "frame": fid, "row": len(rows)})
            rows.append(vec)
    if rows:
        matrixio.save_matrix(out / "clip" / "view_features.o3df", np.stack(rows))
    else:
        matrixio.save_matrix(out / "clip" / "view_features.o3df",
                             np.zeros((0, class_embeddings.shape[1])))
    dump_json(out / "clip" / "view_index.json", {"entries": index})
