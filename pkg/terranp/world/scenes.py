"""
Scene generation and the SCN1 dataset format.

SCN1 is little-endian::

    magic "SCN1" | u32 version
    grid: f64 origin_x, f64 origin_y, f64 resolution, u32 height, u32 width
    u32 feature_dim | u32 scene count
    per scene: u32 frame count, then per frame
        pose 4 x f64 (x, y, z, yaw) | u32 point count | points 3 x f32 each
        u8 has-semantics [ D_f x H x W f32 semantics | H x W f32 density ]
        H x W f32 ground-truth elevation, NaN where unknown
"""
import io
import logging
import struct
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import BinaryIO, Iterator, List, Optional, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline

from terranp.bev.grid import EgoPose, GridSpec, aggregate_ground_truth, analytic_ground_truth
from terranp.core.configuration import Config, WorldConfig
from terranp.core.dataset import Dataset, Frame, Scene, frame_name
from terranp.core.exceptions import DataError, UsageError
from terranp.world.semantics import SemanticFieldSpec, camera_visibility, render_semantics
from terranp.world.sensor import SensorModel, simulate_scan
from terranp.world.terrain import TerrainFeature, TerrainField

logger = logging.getLogger(__name__)

MAGIC = b"SCN1"
VERSION = 1

# seconds between heading spline knots
KNOT_SPACING = 2.0
# features placed from this far ahead of the vehicle, meters
PLACEMENT_RANGE = (10.0, 40.0)
# feature influence tolerated on the driven path, meters
PATH_CLEARANCE = 0.05
PLACEMENT_ATTEMPTS = 20

_HEADER = struct.Struct("<4sI")
_GRID = struct.Struct("<dddII")
_COUNTS = struct.Struct("<II")
_U32 = struct.Struct("<I")
_POSE = struct.Struct("<4d")
_U8 = struct.Struct("<B")


def plan_trajectory(
    rng: np.random.Generator, config: WorldConfig
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Smooth 2D path sampled at ``rate_hz``: constant speed, heading from a
    cubic spline through randomly perturbed knots.

    Returns:
        (F, 2) positions and (F,) headings
    """
    n = config.frames
    dt = 1.0 / config.rate_hz
    speed = rng.uniform(config.speed_min, config.speed_max)
    duration = max(n * dt, KNOT_SPACING)
    knots = np.arange(0.0, duration + KNOT_SPACING, KNOT_SPACING)
    heading0 = rng.uniform(-np.pi, np.pi)
    values = heading0 + np.concatenate([[0.0], np.cumsum(rng.normal(0.0, 0.3, knots.size - 1))])
    times = np.arange(n) * dt
    yaw = CubicSpline(knots, values)(times)
    steps = speed * dt * np.stack([np.cos(yaw), np.sin(yaw)], axis=1)
    xy = np.concatenate([np.zeros((1, 2)), np.cumsum(steps[:-1], axis=0)]) if n else steps
    return xy, yaw


def _sample_feature(
    rng: np.random.Generator, kind: str, xy: np.ndarray, yaw: np.ndarray, config: WorldConfig
) -> TerrainFeature:
    j = int(rng.integers(0, len(xy)))
    ahead = rng.uniform(*PLACEMENT_RANGE)
    lateral = rng.uniform(-6.0, 6.0)
    c, s = np.cos(yaw[j]), np.sin(yaw[j])
    cx = xy[j, 0] + ahead * c - lateral * s
    cy = xy[j, 1] + ahead * s + lateral * c
    if kind == "ditch":
        return TerrainFeature(
            "ditch",
            cx,
            cy,
            orientation=yaw[j] + np.pi / 2 + rng.uniform(-0.5, 0.5),
            width=config.ditch_width * rng.uniform(0.8, 1.2),
            depth=config.ditch_depth * rng.uniform(0.8, 1.2),
            length=rng.uniform(10.0, 30.0),
        )
    if kind == "cliff":
        side = 1.0 if lateral >= 0 else -1.0
        offset = side * rng.uniform(5.0, 15.0)
        return TerrainFeature(
            "cliff",
            xy[j, 0] - offset * s + ahead * c,
            xy[j, 1] + offset * c + ahead * s,
            orientation=yaw[j] if side > 0 else yaw[j] + np.pi,
            width=rng.uniform(0.5, 1.5),
            height=rng.uniform(1.0, 3.0),
        )
    if kind == "hill":
        return TerrainFeature(
            "hill", cx, cy, width=rng.uniform(4.0, 10.0), height=rng.uniform(1.0, 4.0)
        )
    return TerrainFeature(
        "bump", cx, cy, width=rng.uniform(1.0, 3.0), height=rng.uniform(0.3, 0.8)
    )


def place_features(
    rng: np.random.Generator, xy: np.ndarray, yaw: np.ndarray, config: WorldConfig
) -> List[TerrainFeature]:
    """
    Features ahead of the path, 10-40 m from where the vehicle sees them. The
    first one is always a ditch. Candidates touching the driven path are
    resampled.
    """
    features: List[TerrainFeature] = []
    if not len(xy):
        return features
    for i in range(config.features_per_scene):
        kind = "ditch" if i == 0 else str(rng.choice(["ditch", "cliff", "hill", "bump"]))
        for _ in range(PLACEMENT_ATTEMPTS):
            candidate = _sample_feature(rng, kind, xy, yaw, config)
            on_path = candidate.profile(xy[:, 0], xy[:, 1])[0]
            if np.all(np.abs(on_path) < PATH_CLEARANCE):
                features.append(candidate)
                break
        else:
            logger.debug("no clear spot for a %s after %d attempts", kind, PLACEMENT_ATTEMPTS)
    return features


def generate_scene(
    index: int, seed: np.random.SeedSequence, config: Config
) -> Tuple[Scene, TerrainField]:
    """Generates scene ``index`` from its own seed sequence."""
    rng = np.random.default_rng(seed)
    spec = GridSpec.from_config(config.grid)
    sensor = SensorModel.from_config(config.sensor)
    sem = SemanticFieldSpec.from_config(config.semantics)
    world = config.world

    field = TerrainField.random_base(rng, world)
    xy, yaw = plan_trajectory(rng, world)
    field.features = place_features(rng, xy, yaw, world)

    poses = [
        EgoPose(
            x,
            y,
            float(field.height(np.array([x]), np.array([y]))[0]) + sensor.mount_height,
            float(h),
            tag=frame_name(index, k),
        )
        for k, ((x, y), h) in enumerate(zip(xy.tolist(), yaw.tolist()))
    ]
    scans = [simulate_scan(pose, field, sensor, rng) for pose in poses]
    visibility = camera_visibility(spec, sem)

    frames = []
    for k, (pose, scan) in enumerate(zip(poses, scans)):
        if world.gt_mode == "analytic":
            gt = analytic_ground_truth(field, pose, spec)
        else:
            gt = aggregate_ground_truth(scans, k, world.gt_window, spec)
        semantics, density = render_semantics(field, pose, spec, sem, visibility, rng)
        frames.append(
            Frame(
                index,
                k,
                pose,
                scan.points.astype(np.float32).astype(np.float64),
                gt.values.astype(np.float32).astype(np.float64),
                semantics.astype(np.float32).astype(np.float64),
                density.astype(np.float32).astype(np.float64),
            )
        )
    logger.info("scene %d: %d frames, %s", index, len(frames), field)
    return Scene(index, frames), field


def make_dataset(
    seed: int, config: Config, out: Optional[Union[str, Path]] = None
) -> Dataset:
    """
    Generates ``world.scenes`` scenes of ``world.frames`` frames each and,
    when ``out`` is given, writes them in SCN1. Scenes are generated in
    parallel (``world.workers``) and stored in index order.
    """
    world = config.world
    if world.scenes < 1 or world.frames < 1:
        raise UsageError("nothing to generate")
    seeds = np.random.SeedSequence(seed).spawn(world.scenes)
    with ThreadPoolExecutor(world.workers) as pool:
        futures = [pool.submit(generate_scene, i, s, config) for i, s in enumerate(seeds)]
    scenes = [future.result()[0] for future in futures]
    dataset = Dataset(
        GridSpec.from_config(config.grid), config.semantics.feature_dim, scenes
    )
    if out is not None:
        write_dataset(out, dataset)
    return dataset


def _write_frame(f: BinaryIO, frame: Frame, dataset: Dataset) -> None:
    p = frame.pose
    f.write(_POSE.pack(p.x, p.y, p.z, p.yaw))
    f.write(_U32.pack(len(frame.points)))
    f.write(np.ascontiguousarray(frame.points, dtype="<f4").tobytes())
    f.write(_U8.pack(1 if frame.has_semantics else 0))
    if frame.has_semantics:
        sem = np.asarray(frame.semantics).reshape((dataset.feature_dim,) + dataset.spec.shape)
        density = np.asarray(frame.density).reshape(dataset.spec.shape)
        f.write(np.ascontiguousarray(sem, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(density, dtype="<f4").tobytes())
    f.write(np.ascontiguousarray(frame.gt.reshape(dataset.spec.shape), dtype="<f4").tobytes())


def write_dataset(path: Union[str, Path], dataset: Dataset) -> Path:
    path = Path(path)
    buf = io.BytesIO()
    spec = dataset.spec
    buf.write(_HEADER.pack(MAGIC, VERSION))
    buf.write(_GRID.pack(spec.origin_x, spec.origin_y, spec.resolution, spec.height, spec.width))
    buf.write(_COUNTS.pack(dataset.feature_dim, len(dataset.scenes)))
    for scene in dataset.scenes:
        buf.write(_U32.pack(len(scene)))
        for frame in scene:
            _write_frame(buf, frame, dataset)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(buf.getvalue())
    except OSError as e:
        raise DataError(f"can't write dataset {path}: {e}") from e
    logger.info("wrote %d frames to %s", len(dataset), path)
    return path


class _Reader(object):
    def __init__(self, f: BinaryIO, source: str) -> None:
        self.f = f
        self.source = source

    def read(self, n: int) -> bytes:
        data = self.f.read(n)
        if len(data) != n:
            raise DataError(f"{self.source}: truncated dataset")
        return data

    def unpack(self, st: struct.Struct) -> Tuple:
        return st.unpack(self.read(st.size))

    def array(self, shape: Tuple[int, ...]) -> np.ndarray:
        count = int(np.prod(shape))
        return np.frombuffer(self.read(4 * count), dtype="<f4").astype(np.float64).reshape(shape)


def _read_header(r: _Reader) -> Tuple[GridSpec, int, int]:
    magic, version = r.unpack(_HEADER)
    if magic != MAGIC:
        raise DataError(f"{r.source}: not a SCN1 dataset")
    if version != VERSION:
        raise DataError(f"{r.source}: unsupported dataset version {version}")
    ox, oy, res, h, w = r.unpack(_GRID)
    feature_dim, n_scenes = r.unpack(_COUNTS)
    return GridSpec(ox, oy, res, h, w), feature_dim, n_scenes


def _iter_frames(r: _Reader, spec: GridSpec, feature_dim: int, n_scenes: int) -> Iterator[Frame]:
    for scene in range(n_scenes):
        (n_frames,) = r.unpack(_U32)
        for k in range(n_frames):
            x, y, z, yaw = r.unpack(_POSE)
            (n_points,) = r.unpack(_U32)
            points = r.array((n_points, 3))
            (flag,) = r.unpack(_U8)
            semantics = density = None
            if flag:
                semantics = r.array((feature_dim,) + spec.shape)
                density = r.array(spec.shape)
            gt = r.array(spec.shape)
            pose = EgoPose(x, y, z, yaw, frame_name(scene, k))
            yield Frame(scene, k, pose, points, gt, semantics, density)


def iter_frames(path: Union[str, Path]) -> Iterator[Frame]:
    """Streams the frames of a SCN1 file without loading it whole."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            r = _Reader(f, str(path))
            yield from _iter_frames(r, *_read_header(r))
    except OSError as e:
        raise DataError(f"can't read dataset {path}: {e}") from e


def read_dataset(path: Union[str, Path]) -> Dataset:
    path = Path(path)
    try:
        with open(path, "rb") as f:
            r = _Reader(f, str(path))
            spec, feature_dim, n_scenes = _read_header(r)
            scenes = {i: Scene(i) for i in range(n_scenes)}
            for frame in _iter_frames(r, spec, feature_dim, n_scenes):
                scenes[frame.scene].frames.append(frame)
            if f.read(1):
                raise DataError(f"{path}: trailing bytes after the last frame")
    except OSError as e:
        raise DataError(f"can't read dataset {path}: {e}") from e
    dataset = Dataset(spec, feature_dim, [scenes[i] for i in range(n_scenes)])
    logger.info("read %d frames from %s", len(dataset), path)
    return dataset
