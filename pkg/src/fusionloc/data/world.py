"""Synthetic planar worlds: room layout, 2D LiDAR raycasting and a column-raycast camera."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError, GenerationError, InvalidPoseError
from ..geometry import Pose2D

MAX_SCAN_POINTS = 1150

# Per-surface colour table (8-bit RGB). Index = colour id.
PALETTE = np.array(
    [
        [200, 60, 50],
        [60, 160, 70],
        [50, 90, 200],
        [220, 180, 40],
        [150, 70, 170],
        [40, 170, 170],
        [230, 120, 40],
        [120, 120, 120],
        [170, 110, 60],
        [240, 130, 170],
        [90, 200, 120],
        [30, 50, 110],
    ],
    dtype=np.float64,
)
SKY_RGB = np.array([205, 215, 230], dtype=np.float64)
FLOOR_RGB = np.array([95, 85, 75], dtype=np.float64)

ROOM_WALL_HEIGHT = 2.5
OBSTACLE_HEIGHT = 0.9
CAMERA_HEIGHT = 0.4
STRIPE_PERIOD = 0.5


@dataclass
class WorldConfig:
    seed: int = 0
    extent: tuple[float, float] = (10.0, 8.0)
    obstacle_count: int = 6
    lidar_fov: float = 360.0
    lidar_angular_res: float = 0.35
    lidar_max_range: float = 12.0
    image_size: tuple[int, int] = (420, 240)
    camera_hfov: float = 87.0
    trajectory_step: float = 0.1
    noise_sigma_range: float = 0.01
    clearance: float = 1.0
    obstacle_size: tuple[float, float] = (0.6, 1.6)

    def __post_init__(self):
        self.extent = (float(self.extent[0]), float(self.extent[1]))
        self.image_size = (int(self.image_size[0]), int(self.image_size[1]))
        self.obstacle_size = (float(self.obstacle_size[0]), float(self.obstacle_size[1]))
        self.validate()

    def validate(self):
        if not (self.extent[0] > 0 and self.extent[1] > 0):
            raise ConfigError(f"extent must be positive, got {self.extent}")
        if self.obstacle_count < 0:
            raise ConfigError("obstacle_count must be >= 0")
        if self.lidar_angular_res <= 0:
            raise ConfigError("lidar_angular_res must be > 0")
        if not 0 < self.lidar_fov <= 360:
            raise ConfigError("lidar_fov must be in (0, 360]")
        if self.num_rays > MAX_SCAN_POINTS:
            raise ConfigError(
                f"{self.num_rays} rays per scan exceeds the {MAX_SCAN_POINTS}-point limit; "
                "increase lidar_angular_res"
            )
        if self.lidar_max_range <= 0:
            raise ConfigError("lidar_max_range must be > 0")
        if not 0 < self.camera_hfov < 180:
            raise ConfigError("camera_hfov must be in (0, 180)")
        if self.image_size[0] < 1 or self.image_size[1] < 1:
            raise ConfigError("image_size must be positive")
        if self.trajectory_step <= 0:
            raise ConfigError("trajectory_step must be > 0")
        if self.noise_sigma_range < 0:
            raise ConfigError("noise_sigma_range must be >= 0")
        lo, hi = self.obstacle_size
        if not 0 < lo <= hi:
            raise ConfigError(f"bad obstacle_size {self.obstacle_size}")

    @property
    def num_rays(self) -> int:
        if self.lidar_fov >= 360.0:
            return int(math.ceil(360.0 / self.lidar_angular_res - 1e-9))
        return int(math.floor(self.lidar_fov / self.lidar_angular_res + 1e-9)) + 1

    def lidar_angles(self) -> np.ndarray:
        """Beam angles in the sensor frame (radians)."""
        k = np.arange(self.num_rays)
        if self.lidar_fov >= 360.0:
            deg = -180.0 + k * self.lidar_angular_res
        else:
            deg = -self.lidar_fov / 2.0 + k * self.lidar_angular_res
        return np.radians(deg)


@dataclass
class World:
    """Walls and obstacles as line segments with per-surface colour ids."""

    extent: tuple[float, float]
    obstacles: np.ndarray  # (K, 4): xmin, ymin, xmax, ymax
    segments: np.ndarray  # (S, 4): x0, y0, x1, y1
    colors: np.ndarray  # (S,) int
    heights: np.ndarray = field(default=None)  # (S,)

    def __post_init__(self):
        self.obstacles = np.asarray(self.obstacles, dtype=np.float64).reshape(-1, 4)
        self.segments = np.asarray(self.segments, dtype=np.float64).reshape(-1, 4)
        self.colors = np.asarray(self.colors, dtype=np.int64).reshape(-1)
        if self.heights is None:
            self.heights = np.full(len(self.segments), ROOM_WALL_HEIGHT)
        self.heights = np.asarray(self.heights, dtype=np.float64).reshape(-1)

    def is_free(self, x: float, y: float, margin: float = 0.0) -> bool:
        return bool(self.free_mask(np.array([[x, y]]), margin)[0])

    def free_mask(self, pts: np.ndarray, margin: float = 0.0) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
        w, h = self.extent
        inside = (
            (pts[:, 0] > margin)
            & (pts[:, 0] < w - margin)
            & (pts[:, 1] > margin)
            & (pts[:, 1] < h - margin)
        )
        if len(self.obstacles):
            o = self.obstacles
            hit = (
                (pts[:, None, 0] >= o[None, :, 0] - margin)
                & (pts[:, None, 0] <= o[None, :, 2] + margin)
                & (pts[:, None, 1] >= o[None, :, 1] - margin)
                & (pts[:, None, 1] <= o[None, :, 3] + margin)
            ).any(axis=1)
            inside &= ~hit
        return inside

    def to_json(self) -> str:
        return json.dumps(
            {
                "extent": list(self.extent),
                "obstacles": self.obstacles.tolist(),
                "segments": self.segments.tolist(),
                "colors": self.colors.tolist(),
                "heights": self.heights.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "World":
        d = json.loads(text)
        return cls(tuple(d["extent"]), d["obstacles"], d["segments"], d["colors"], d.get("heights"))


def _rect_segments(xmin, ymin, xmax, ymax):
    return [
        (xmin, ymin, xmax, ymin),
        (xmax, ymin, xmax, ymax),
        (xmax, ymax, xmin, ymax),
        (xmin, ymax, xmin, ymin),
    ]


def room_world(extent, obstacles=(), wall_colors=(0, 1, 2, 3), obstacle_colors=None) -> World:
    """Rectangular room [0, w] x [0, h] with optional axis-aligned obstacles."""
    w, h = float(extent[0]), float(extent[1])
    segs = _rect_segments(0.0, 0.0, w, h)
    colors = list(wall_colors)
    heights = [ROOM_WALL_HEIGHT] * 4
    obstacles = [tuple(map(float, o)) for o in obstacles]
    for i, o in enumerate(obstacles):
        segs += _rect_segments(*o)
        if obstacle_colors is None:
            colors += [4 + (i % (len(PALETTE) - 4))] * 4
        else:
            colors += list(obstacle_colors[i])
        heights += [OBSTACLE_HEIGHT] * 4
    return World((w, h), np.array(obstacles).reshape(-1, 4), np.array(segs), np.array(colors), np.array(heights))


LAYOUT_RESTARTS = 50


def generate_world(cfg: WorldConfig) -> World:
    """Random room with non-overlapping rectangular obstacles.

    Obstacles keep at least ``max(clearance, trajectory_step)`` metres from the
    walls and from each other, so corridors between them stay traversable.
    """
    rng = np.random.default_rng(cfg.seed)
    w, h = cfg.extent
    gap = max(cfg.clearance, cfg.trajectory_step)
    lo, hi = cfg.obstacle_size
    placed: list[tuple[float, float, float, float]] = []
    # greedy placement can paint itself into a corner; start the layout over
    # (continuing the same random stream) a bounded number of times
    for _layout in range(LAYOUT_RESTARTS):
        placed = []
        for i in range(cfg.obstacle_count):
            for _ in range(1000):
                sw, sh = rng.uniform(lo, hi, size=2)
                if w - 2 * gap - sw <= 0 or h - 2 * gap - sh <= 0:
                    continue
                x0 = rng.uniform(gap, w - gap - sw)
                y0 = rng.uniform(gap, h - gap - sh)
                cand = (x0, y0, x0 + sw, y0 + sh)
                if all(
                    cand[0] >= o[2] + gap or cand[2] <= o[0] - gap or cand[1] >= o[3] + gap or cand[3] <= o[1] - gap
                    for o in placed
                ):
                    placed.append(cand)
                    break
            else:
                break
        if len(placed) == cfg.obstacle_count:
            break
    else:
        raise GenerationError(
            f"could not place {cfg.obstacle_count} obstacles in a {w}x{h} m room after {LAYOUT_RESTARTS} layouts"
        )
    wall_colors = rng.permutation(4)
    obstacle_colors = rng.integers(4, len(PALETTE), size=(len(placed), 4))
    return room_world(cfg.extent, placed, wall_colors, obstacle_colors)


def cast_rays(world: World, origin, angles: np.ndarray):
    """Intersect rays with every world segment.

    Returns ``(ranges, seg_index, along)`` where ``along`` is the hit distance
    from the segment's first endpoint. Rays that hit nothing get ``inf`` and
    index -1.
    """
    ox, oy = float(origin[0]), float(origin[1])
    if len(world.segments) == 0:
        n = len(angles)
        return np.full(n, np.inf), np.full(n, -1), np.full(n, np.nan)
    d = np.stack([np.cos(angles), np.sin(angles)], axis=-1)  # (R, 2)
    p0 = world.segments[:, :2]
    e = world.segments[:, 2:] - p0  # (S, 2)
    w = p0 - np.array([ox, oy])  # (S, 2)
    denom = d[:, None, 0] * e[None, :, 1] - d[:, None, 1] * e[None, :, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (w[None, :, 0] * e[None, :, 1] - w[None, :, 1] * e[None, :, 0]) / denom
        u = (w[None, :, 0] * d[:, None, 1] - w[None, :, 1] * d[:, None, 0]) / denom
    ok = (np.abs(denom) > 1e-12) & (t > 1e-9) & (u >= -1e-12) & (u <= 1.0 + 1e-12)
    t = np.where(ok, t, np.inf)
    idx = np.argmin(t, axis=1)
    ranges = t[np.arange(len(angles)), idx]
    hit = np.isfinite(ranges)
    idx = np.where(hit, idx, -1)
    seg_len = np.hypot(e[:, 0], e[:, 1])
    along = np.where(hit, u[np.arange(len(angles)), np.maximum(idx, 0)] * seg_len[np.maximum(idx, 0)], np.nan)
    return ranges, idx, along


def _check_pose(world: World, pose: Pose2D):
    if not world.is_free(pose.x, pose.y):
        raise InvalidPoseError(f"pose ({pose.x:.3f}, {pose.y:.3f}) is not in free space")


def raycast_scan(world: World, pose: Pose2D, cfg: WorldConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Simulated 2D scan as (N, 2) points in the sensor frame.

    Beams whose (noisy) range exceeds ``lidar_max_range`` are dropped, so the
    point count varies with the surroundings.
    """
    _check_pose(world, pose)
    beams = cfg.lidar_angles()
    ranges, _, _ = cast_rays(world, (pose.x, pose.y), beams + pose.theta)
    if cfg.noise_sigma_range > 0:
        if rng is None:
            rng = np.random.default_rng(cfg.seed)
        ranges = ranges + rng.normal(0.0, cfg.noise_sigma_range, size=ranges.shape)
    keep = np.isfinite(ranges) & (ranges > 0) & (ranges <= cfg.lidar_max_range)
    r, a = ranges[keep], beams[keep]
    return np.stack([r * np.cos(a), r * np.sin(a)], axis=-1)


def camera_column_angles(cfg: WorldConfig) -> np.ndarray:
    """Pinhole bearing of each image column, left column first (counter-clockwise positive)."""
    width = cfg.image_size[0]
    focal = (width / 2.0) / math.tan(math.radians(cfg.camera_hfov) / 2.0)
    u = np.arange(width) + 0.5
    return np.arctan((width / 2.0 - u) / focal)


def render_view(world: World, pose: Pose2D, cfg: WorldConfig) -> np.ndarray:
    """Render an (H, W, 3) uint8 pseudo-camera image from ``pose``."""
    _check_pose(world, pose)
    width, height = cfg.image_size
    rel = camera_column_angles(cfg)
    ranges, idx, along = cast_rays(world, (pose.x, pose.y), rel + pose.theta)
    focal = (width / 2.0) / math.tan(math.radians(cfg.camera_hfov) / 2.0)
    horizon = height / 2.0
    hit = idx >= 0
    if not hit.any():
        return np.broadcast_to(SKY_RGB.astype(np.uint8), (height, width, 3)).copy()
    perp = np.where(hit, ranges * np.cos(rel), np.inf)
    seg_h = np.where(hit, world.heights[np.maximum(idx, 0)], 0.0)
    top = np.where(hit, horizon - focal * (seg_h - CAMERA_HEIGHT) / perp, horizon)
    bottom = np.where(hit, horizon + focal * CAMERA_HEIGHT / perp, horizon)

    stripes = np.where(np.floor(np.nan_to_num(along) / STRIPE_PERIOD) % 2 == 0, 1.0, 0.8)
    shade = (0.35 + 0.65 * np.exp(-np.where(hit, ranges, 0.0) / 8.0)) * stripes
    wall_rgb = PALETTE[np.where(hit, world.colors[np.maximum(idx, 0)], 0)] * shade[:, None]

    rows = np.arange(height)[:, None] + 0.5  # (H, 1)
    sky_mask = rows < top[None, :]
    floor_mask = rows >= bottom[None, :]
    img = np.empty((height, width, 3), dtype=np.float64)
    img[:] = wall_rgb[None, :, :]
    img[sky_mask] = SKY_RGB
    # floor darkens towards the horizon
    floor_shade = np.clip((rows - horizon) / horizon, 0.0, 1.0)
    floor_rgb = FLOOR_RGB[None, None, :] * (0.5 + 0.5 * floor_shade[:, :, None])
    img = np.where(floor_mask[:, :, None], np.broadcast_to(floor_rgb, img.shape), img)
    img[:, ~hit] = SKY_RGB
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def _segment_is_free(world: World, a, b, margin: float, spacing: float = 0.05) -> bool:
    n = max(2, int(math.ceil(math.hypot(b[0] - a[0], b[1] - a[1]) / spacing)) + 1)
    pts = np.linspace(a, b, n)
    return bool(world.free_mask(pts, margin).all())


def _random_free_point(world: World, rng, margin: float):
    w, h = world.extent
    for _ in range(10000):
        p = rng.uniform([margin, margin], [w - margin, h - margin])
        if world.is_free(p[0], p[1], margin):
            return p
    raise GenerationError("no free space found for trajectory waypoint")


def generate_trajectory(
    world: World,
    n_frames: int,
    step: float,
    rng: np.random.Generator,
    margin: float = 0.35,
    smooth_window: int = 7,
    wobble_deg: float = 25.0,
) -> list[Pose2D]:
    """Random waypoint walk sampled every ``step`` metres.

    Heading follows the direction of travel, smoothed with a circular moving
    average, plus a slow sinusoidal wobble so heading is not a pure function
    of the path tangent.
    """
    if n_frames < 1:
        return []
    pos = [_random_free_point(world, rng, margin)]
    current = pos[0]
    while len(pos) < n_frames + 1:
        for _ in range(200):
            target = _random_free_point(world, rng, margin)
            if np.hypot(*(target - current)) > 2 * step and _segment_is_free(world, current, target, margin):
                break
        else:
            raise GenerationError("trajectory stuck: no reachable waypoint")
        dist = float(np.hypot(*(target - current)))
        n = int(dist // step)
        direction = (target - current) / dist
        for k in range(1, n + 1):
            pos.append(current + direction * step * k)
            if len(pos) >= n_frames + 1:
                break
        current = pos[-1]
    pts = np.array(pos)
    motion = np.diff(pts, axis=0)
    unit = motion / np.linalg.norm(motion, axis=1, keepdims=True)
    pad = smooth_window // 2
    padded = np.concatenate([np.repeat(unit[:1], pad, 0), unit, np.repeat(unit[-1:], pad, 0)])
    kernel = np.ones(smooth_window) / smooth_window
    sx = np.convolve(padded[:, 0], kernel, mode="valid")
    sy = np.convolve(padded[:, 1], kernel, mode="valid")
    heading = np.arctan2(sy, sx)
    phase = rng.uniform(0, 2 * math.pi)
    period = rng.uniform(40, 80)
    heading = heading + math.radians(wobble_deg) * np.sin(phase + 2 * math.pi * np.arange(n_frames) / period)
    return [Pose2D(float(pts[i, 0]), float(pts[i, 1]), float(heading[i])) for i in range(n_frames)]


def world_config_dict(cfg: WorldConfig) -> dict:
    return asdict(cfg)
