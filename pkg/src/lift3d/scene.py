"""Scene bundle: in-memory types plus the on-disk directory layout.

Bundle layout::

    manifest.json                 N, T, depth_scale, version
    cloud.ply                     binary little-endian PLY (xyz f32, rgb u8)
    frames/frame_%06d.json        camera intrinsics/extrinsics, image size
    frames/depth_%06d.png         16-bit grayscale, value / depth_scale = meters
    masks/frame_%06d.json         per-frame 2D instance masks (RLE, row-major)
    features/point_features.o3df  optional N x D point features
    proposals_3d.json             optional external 3D proposals
    clip/view_features.o3df       optional per-(proposal, view) features
    clip/view_index.json
    queries/text_embeddings.o3df  optional prompt embeddings
    queries/prompts.json

All loaded data is immutable after construction and safe to share.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .rle import decode_rle, encode_rle

BUNDLE_VERSION = 1
DEFAULT_DEPTH_SCALE = 1000.0


class LoadError(RuntimeError):
    pass


class SceneValidationError(ValueError):
    pass


@dataclass(frozen=True)
class PointCloud:
    positions: np.ndarray  # N x 3, meters
    colors: np.ndarray     # N x 3 in [0, 1]

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        col = np.asarray(self.colors, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise SceneValidationError("PointCloud.positions must be N x 3 with N >= 1")
        if col.shape != pos.shape:
            raise SceneValidationError("PointCloud.colors must match positions shape")
        if not np.isfinite(pos).all():
            raise SceneValidationError("PointCloud.positions contains non-finite values")
        if col.min() < 0.0 or col.max() > 1.0:
            raise SceneValidationError("PointCloud.colors must lie in [0, 1]")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "colors", col)

    @property
    def count(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class CameraFrame:
    frame_id: int
    intrinsics: np.ndarray   # 3 x 3
    extrinsics: np.ndarray   # 3 x 4 world-to-camera [R|c]
    depth: np.ndarray        # H x W, meters, 0 = missing
    image_size: tuple[int, int]  # (W, H)
    rgb_path: str | None = None

    def __post_init__(self):
        K = np.asarray(self.intrinsics, dtype=np.float64)
        E = np.asarray(self.extrinsics, dtype=np.float64)
        D = np.asarray(self.depth, dtype=np.float64)
        if K.shape != (3, 3):
            raise SceneValidationError(f"CameraFrame {self.frame_id}: intrinsics must be 3x3")
        if abs(K[2, 2] - 1.0) > 1e-9:
            raise SceneValidationError(f"CameraFrame {self.frame_id}: intrinsics[2][2] must be 1")
        if E.shape != (3, 4):
            raise SceneValidationError(f"CameraFrame {self.frame_id}: extrinsics must be 3x4")
        R = E[:, :3]
        if np.abs(R @ R.T - np.eye(3)).max() > 1e-6:
            raise SceneValidationError(
                f"CameraFrame {self.frame_id}: rotation block is not orthonormal"
            )
        W, H = self.image_size
        if D.shape != (H, W):
            raise SceneValidationError(
                f"CameraFrame {self.frame_id}: depth shape {D.shape} != (H={H}, W={W})"
            )
        if D.min() < 0.0:
            raise SceneValidationError(f"CameraFrame {self.frame_id}: negative depth value")
        object.__setattr__(self, "intrinsics", K)
        object.__setattr__(self, "extrinsics", E)
        object.__setattr__(self, "depth", D)


@dataclass(frozen=True)
class Mask2D:
    mask_id: int
    frame_id: int
    bits: np.ndarray  # H x W bool
    label_hint: str | None = None
    score: float | None = None

    def __post_init__(self):
        bits = np.asarray(self.bits).astype(bool)
        if bits.ndim != 2:
            raise SceneValidationError(f"Mask2D {self.mask_id}: bits must be 2-D")
        if not bits.any():
            raise SceneValidationError(f"Mask2D {self.mask_id}: empty mask")
        if self.score is not None and not (0.0 <= self.score <= 1.0):
            raise SceneValidationError(f"Mask2D {self.mask_id}: score outside [0, 1]")
        object.__setattr__(self, "bits", bits)


SOURCE_GUIDED_2D = "guided2d"
SOURCE_EXTERNAL_3D = "external3d"


@dataclass
class ProposalSet:
    masks: np.ndarray          # K x N bool
    scores: np.ndarray         # K floats in [0, 1]
    source_tags: list[str]

    def __post_init__(self):
        masks = np.asarray(self.masks).astype(bool)
        scores = np.asarray(self.scores, dtype=np.float64)
        if masks.ndim != 2:
            raise SceneValidationError("ProposalSet.masks must be K x N")
        if scores.shape != (masks.shape[0],):
            raise SceneValidationError("ProposalSet.scores length mismatch")
        if len(self.source_tags) != masks.shape[0]:
            raise SceneValidationError("ProposalSet.source_tags length mismatch")
        if masks.shape[0] and not masks.any(axis=1).all():
            raise SceneValidationError("ProposalSet contains an empty mask")
        bad = set(self.source_tags) - {SOURCE_GUIDED_2D, SOURCE_EXTERNAL_3D}
        if bad:
            raise SceneValidationError(f"unknown source tags: {sorted(bad)}")
        self.masks = masks
        self.scores = scores

    def __len__(self) -> int:
        return self.masks.shape[0]

    @classmethod
    def empty(cls, n_points: int) -> "ProposalSet":
        return cls(np.zeros((0, n_points), dtype=bool), np.zeros(0), [])


@dataclass
class Scene:
    root: Path
    cloud: PointCloud
    frames: list[CameraFrame]                 # sorted by frame_id
    masks: dict[int, list[Mask2D]]            # frame_id -> masks
    depth_scale: float

    @property
    def n_points(self) -> int:
        return self.cloud.count

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def frame_by_id(self, frame_id: int) -> CameraFrame:
        for f in self.frames:
            if f.frame_id == frame_id:
                return f
        raise KeyError(frame_id)


# ---------------------------------------------------------------------------
# PLY point cloud io


def write_ply(path, cloud: PointCloud) -> None:
    n = cloud.count
    header = (
        "ply\nformat binary_little_endian 1.0\n"
        f"element vertex {n}\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        "end_header\n"
    )
    rec = np.empty(n, dtype=[("xyz", "<f4", 3), ("rgb", "u1", 3)])
    rec["xyz"] = cloud.positions.astype(np.float32)
    rec["rgb"] = np.clip(np.round(cloud.colors * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(rec.tobytes())


def read_ply(path) -> PointCloud:
    with open(path, "rb") as fh:
        header_lines = []
        while True:
            line = fh.readline()
            if not line:
                raise LoadError(f"{path}: truncated PLY header")
            header_lines.append(line.decode("ascii", "replace").strip())
            if header_lines[-1] == "end_header":
                break
        payload = fh.read()
    if not header_lines or header_lines[0] != "ply":
        raise LoadError(f"{path}: not a PLY file")
    n = None
    for line in header_lines:
        if line.startswith("element vertex"):
            n = int(line.split()[-1])
    if n is None:
        raise LoadError(f"{path}: missing vertex element")
    rec_dtype = np.dtype([("xyz", "<f4", 3), ("rgb", "u1", 3)])
    if len(payload) < n * rec_dtype.itemsize:
        raise LoadError(f"{path}: PLY payload truncated")
    rec = np.frombuffer(payload[: n * rec_dtype.itemsize], dtype=rec_dtype)
    return PointCloud(rec["xyz"].astype(np.float64), rec["rgb"].astype(np.float64) / 255.0)


# ---------------------------------------------------------------------------
# Depth maps: 16-bit grayscale PNG, meters = value / depth_scale


def write_depth_png(path, depth_m: np.ndarray, depth_scale: float) -> None:
    values = np.round(np.asarray(depth_m, dtype=np.float64) * depth_scale)
    if values.max(initial=0.0) > 65535:
        raise SceneValidationError("depth exceeds 16-bit range at this depth_scale")
    img = Image.fromarray(values.astype(np.uint16))
    img.save(path)


def read_depth_png(path, depth_scale: float) -> np.ndarray:
    try:
        img = Image.open(path)
    except FileNotFoundError:
        raise LoadError(f"missing depth map: {path}") from None
    arr = np.asarray(img, dtype=np.float64)
    return arr / depth_scale


# ---------------------------------------------------------------------------
# Per-frame JSON records


def _frame_json(frame: CameraFrame, depth_name: str) -> dict:
    rec = {
        "frame_id": frame.frame_id,
        "intrinsics": frame.intrinsics.tolist(),
        "extrinsics": frame.extrinsics.tolist(),
        "width": frame.image_size[0],
        "height": frame.image_size[1],
        "depth": depth_name,
    }
    if frame.rgb_path is not None:
        rec["rgb"] = frame.rgb_path
    return rec


def masks_to_json(frame_id: int, size: tuple[int, int], masks: list[Mask2D]) -> dict:
    W, H = size
    return {
        "frame_id": frame_id,
        "width": W,
        "height": H,
        "masks": [
            {
                "mask_id": m.mask_id,
                "rle": encode_rle(m.bits.ravel()),
                **({"label": m.label_hint} if m.label_hint is not None else {}),
                **({"score": m.score} if m.score is not None else {}),
            }
            for m in masks
        ],
    }


def masks_from_json(rec: dict) -> list[Mask2D]:
    W, H = int(rec["width"]), int(rec["height"])
    out = []
    for m in rec["masks"]:
        bits = decode_rle(m["rle"], W * H).reshape(H, W)
        out.append(
            Mask2D(
                mask_id=int(m["mask_id"]),
                frame_id=int(rec["frame_id"]),
                bits=bits,
                label_hint=m.get("label"),
                score=m.get("score"),
            )
        )
    return out


# ---------------------------------------------------------------------------
# Bundle load / save


def dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")


def load_scene_bundle(path) -> Scene:
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise LoadError(f"missing file: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    depth_scale = float(manifest.get("depth_scale", DEFAULT_DEPTH_SCALE))

    cloud_path = root / "cloud.ply"
    if not cloud_path.is_file():
        raise LoadError(f"missing file: {cloud_path}")
    cloud = read_ply(cloud_path)
    if "n_points" in manifest and int(manifest["n_points"]) != cloud.count:
        raise SceneValidationError(
            f"manifest n_points {manifest['n_points']} != cloud size {cloud.count}"
        )

    frame_files = sorted((root / "frames").glob("frame_*.json"))
    if not frame_files:
        raise LoadError(f"no frame records under {root / 'frames'}")
    frames = []
    masks: dict[int, list[Mask2D]] = {}
    for fp in frame_files:
        rec = json.loads(fp.read_text())
        fid = int(rec["frame_id"])
        depth = read_depth_png(root / "frames" / rec["depth"], depth_scale)
        frame = CameraFrame(
            frame_id=fid,
            intrinsics=np.array(rec["intrinsics"], dtype=np.float64),
            extrinsics=np.array(rec["extrinsics"], dtype=np.float64),
            depth=depth,
            image_size=(int(rec["width"]), int(rec["height"])),
            rgb_path=rec.get("rgb"),
        )
        frames.append(frame)
        mask_path = root / "masks" / f"frame_{fid:06d}.json"
        if mask_path.is_file():
            masks[fid] = masks_from_json(json.loads(mask_path.read_text()))
        else:
            masks[fid] = []
    frames.sort(key=lambda f: f.frame_id)
    return Scene(root=root, cloud=cloud, frames=frames, masks=masks, depth_scale=depth_scale)


def write_scene_bundle(
    root,
    cloud: PointCloud,
    frames: list[CameraFrame],
    masks: dict[int, list[Mask2D]],
    depth_scale: float = DEFAULT_DEPTH_SCALE,
) -> None:
    root = Path(root)
    (root / "frames").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    write_ply(root / "cloud.ply", cloud)
    for frame in frames:
        depth_name = f"depth_{frame.frame_id:06d}.png"
        write_depth_png(root / "frames" / depth_name, frame.depth, depth_scale)
        dump_json(root / "frames" / f"frame_{frame.frame_id:06d}.json",
                  _frame_json(frame, depth_name))
        dump_json(
            root / "masks" / f"frame_{frame.frame_id:06d}.json",
            masks_to_json(frame.frame_id, frame.image_size, masks.get(frame.frame_id, [])),
        )
    dump_json(root / "manifest.json", {
        "version": BUNDLE_VERSION,
        "n_points": cloud.count,
        "n_frames": len(frames),
        "depth_scale": depth_scale,
    })


# ---------------------------------------------------------------------------
# Point-level proposal serialization


def save_proposals(path, proposals: ProposalSet) -> None:
    n = proposals.masks.shape[1]
    dump_json(path, {
        "n_points": n,
        "proposals": [
            {
                "rle": encode_rle(proposals.masks[i]),
                "score": float(proposals.scores[i]),
                "source": proposals.source_tags[i],
            }
            for i in range(len(proposals))
        ],
    })


def load_proposals(path, n_points: int | None = None) -> ProposalSet:
    p = Path(path)
    if not p.is_file():
        raise LoadError(f"missing file: {p}")
    rec = json.loads(p.read_text())
    n = int(rec.get("n_points", n_points if n_points is not None else -1))
    if n < 0:
        raise LoadError(f"{p}: unknown point count")
    if n_points is not None and n != n_points:
        raise SceneValidationError(f"{p}: proposal length {n} != scene size {n_points}")
    items = rec["proposals"]
    masks = np.zeros((len(items), n), dtype=bool)
    scores = np.zeros(len(items))
    tags = []
    for i, item in enumerate(items):
        masks[i] = decode_rle(item["rle"], n)
        scores[i] = float(item.get("score", 1.0))
        tags.append(item.get("source", SOURCE_EXTERNAL_3D))
    return ProposalSet(masks, scores, tags)


def load_external_proposals(path, n_points: int):
    """proposals_3d.json: [{"rle": [...], "score": s}, ...] over n_points."""
    p = Path(path)
    if not p.is_file():
        raise LoadError(f"missing file: {p}")
    rec = json.loads(p.read_text())
    items = rec["proposals"] if isinstance(rec, dict) else rec
    masks = np.zeros((len(items), n_points), dtype=bool)
    scores = np.zeros(len(items))
    for i, item in enumerate(items):
        masks[i] = decode_rle(item["rle"], n_points)
        scores[i] = float(item["score"])
    return masks, scores
