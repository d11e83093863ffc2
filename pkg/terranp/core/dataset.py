from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

from terranp.bev.grid import EgoPose, ElevationGrid, GridSpec, PointSet


def frame_name(scene: int, index: int) -> str:
    return f"s{scene:03d}f{index:04d}"


class Frame(object):
    """
    One recorded time step of a scene.

    Arguments:
        scene: scene index
        index: frame index inside the scene
        pose: ego pose in world coordinates
        points: (N, 3) world-frame range returns
        semantics: (D_f, H, W) semantic grid in the ego frame, if any
        density: (H, W) semantic density in [0, 1], if any
        gt: (H, W) ground-truth elevation relative to the ego z, NaN where unknown

    Attributes:
        name (str): ``s<scene>f<index>``, unique in a dataset
    """

    __slots__ = ("scene", "index", "pose", "points", "semantics", "density", "gt")

    def __init__(
        self,
        scene: int,
        index: int,
        pose: EgoPose,
        points: np.ndarray,
        gt: np.ndarray,
        semantics: Optional[np.ndarray] = None,
        density: Optional[np.ndarray] = None,
    ) -> None:
        self.scene = scene
        self.index = index
        self.pose = pose
        self.points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        self.gt = np.asarray(gt, dtype=np.float64)
        self.semantics = semantics
        self.density = density

    @property
    def name(self) -> str:
        return frame_name(self.scene, self.index)

    @property
    def has_semantics(self) -> bool:
        return self.semantics is not None

    def __repr__(self) -> str:
        return f"Frame: {self.name}"

    def point_set(self) -> PointSet:
        return PointSet(self.points, self.pose, tag=self.name)

    def ground_truth(self) -> ElevationGrid:
        valid = np.isfinite(self.gt)
        return ElevationGrid(np.where(valid, self.gt, np.nan), valid)

    def dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "pose": self.pose.dict(),
            "points": len(self.points),
            "has_semantics": self.has_semantics,
            "gt_cells": int(np.isfinite(self.gt).sum()),
        }


class Scene(object):
    __slots__ = ("index", "frames")

    def __init__(self, index: int, frames: Optional[List[Frame]] = None) -> None:
        self.index = index
        self.frames = frames or []

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self) -> Iterator[Frame]:
        return iter(self.frames)

    def __repr__(self) -> str:
        return f"Scene({self.index}, {len(self)} frames)"

    def point_sets(self) -> List[PointSet]:
        return [f.point_set() for f in self.frames]


class Dataset(object):
    """
    Scenes of frames on a common grid.

    Arguments:
        spec: grid every frame's rasters are expressed on
        feature_dim: semantic channels per cell
        scenes: scenes in index order
    """

    __slots__ = ("spec", "feature_dim", "scenes")

    def __init__(
        self, spec: GridSpec, feature_dim: int, scenes: Optional[List[Scene]] = None
    ) -> None:
        self.spec = spec
        self.feature_dim = feature_dim
        self.scenes = scenes or []

    def __len__(self) -> int:
        return sum(len(s) for s in self.scenes)

    def __repr__(self) -> str:
        return f"Dataset({len(self.scenes)} scenes, {len(self)} frames, {self.spec})"

    @property
    def frames(self) -> List[Frame]:
        return [f for s in self.scenes for f in s.frames]

    def __getitem__(self, name: str) -> Frame:
        for frame in self.frames:
            if frame.name == name:
                return frame
        raise KeyError(name)

    def filter(self, filter_func: Callable[..., bool], **kwargs: Any) -> "Dataset":
        """
        Returns a new dataset keeping the frames for which
        ``filter_func(frame, **kwargs)`` is truthy. Scenes left without frames
        are dropped.
        """
        scenes = []
        for scene in self.scenes:
            kept = [f for f in scene.frames if filter_func(f, **kwargs)]
            if kept:
                scenes.append(Scene(scene.index, kept))
        return Dataset(self.spec, self.feature_dim, scenes)

    def holdout(self, n: int) -> Tuple["Dataset", "Dataset"]:
        """Splits off the last ``n`` frames of the dataset."""
        names = [f.name for f in self.frames]
        held = set(names[len(names) - n :]) if n > 0 else set()
        return (
            self.filter(lambda f: f.name not in held),
            self.filter(lambda f: f.name in held),
        )

    def dict(self) -> Dict[str, Any]:
        return {
            "spec": self.spec.dict(),
            "feature_dim": self.feature_dim,
            "scenes": {s.index: [f.name for f in s.frames] for s in self.scenes},
        }
