"""lift3d: lift per-frame 2D instance masks into 3D instance proposals
over a point cloud, fuse them with external 3D proposals, pool per-point
open-vocabulary features and score text queries."""

__version__ = "0.1.0"
