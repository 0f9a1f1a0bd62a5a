"""Pipeline configuration: defaults, flat key=value config files, and
flag overrides (flags > file > defaults)."""
from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


@dataclass
class PipelineConfig:
    tau_iou: float = 0.9
    tau_sim: float = 0.9
    tau_depth: float = 0.1
    tau_dup: float = 0.5
    top_views: int = 5
    min_points: int = 50
    score_min: float = 0.2
    frame_subsample: int = 10
    merge_order: str = "hierarchical"
    knn_k: int = 16
    fz_k: float = 0.5
    sp_min_size: int = 20
    workers: int = 0   # 0 = available parallelism

    def __post_init__(self):
        for name in ("tau_iou", "tau_sim", "tau_dup"):
            v = getattr(self, name)
            if not -1.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [-1, 1], got {v}")
        if self.tau_depth <= 0:
            raise ValueError("tau_depth must be positive")
        if self.top_views < 1:
            raise ValueError("top_views must be >= 1")
        if self.frame_subsample < 1:
            raise ValueError("frame_subsample must be >= 1")
        if self.merge_order not in ("hierarchical", "sequential"):
            raise ValueError(f"unknown merge_order {self.merge_order!r}")
        if self.min_points < 1 or self.sp_min_size < 1 or self.knn_k < 1:
            raise ValueError("count parameters must be >= 1")
        if self.fz_k <= 0:
            raise ValueError("fz_k must be positive")

    def save(self, path) -> None:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {getattr(self, f.name)}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path, overrides: dict | None = None) -> "PipelineConfig":
        values = {}
        if path is not None:
            for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected 'key = value'")
                key, raw = (s.strip() for s in line.split("=", 1))
                values[key] = raw
        if overrides:
            values.update({k: v for k, v in overrides.items() if v is not None})
        kwargs = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, raw in values.items():
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            target = {"float": float, "int": int, "str": str}[types[key]]
            kwargs[key] = target(raw) if isinstance(raw, str) else raw
        return cls(**kwargs)
