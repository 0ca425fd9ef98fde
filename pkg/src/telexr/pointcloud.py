"""Organized depth-grid point clouds, Canny edge/interior classification, and
bandwidth-adaptive scaling.

Scaling keeps every edge point and thins interior points by a factor
r = min(1, (N_max - N_e) / N_in) clamped to [0, 1], where
N_max = floor(B * T_rt / b) is the per-talker-period point budget.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

POINT_DTYPE = np.dtype([("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("rgba", "u1", (4,))])
POINT_BYTES = POINT_DTYPE.itemsize  # 16
CLOUD_HEADER = struct.Struct("<HHI")  # width, height, point count
DEPTH_HEADER = struct.Struct("<HH")


@dataclass(frozen=True)
class CannyParams:
    """Gaussian sigma (pixels) plus hysteresis thresholds as fractions of the
    maximum gradient magnitude."""

    sigma: float = 1.4
    low: float = 0.1
    high: float = 0.3

    def __post_init__(self) -> None:
        if not self.low < self.high:
            raise ValueError("canny low threshold must be below high")


@dataclass(frozen=True)
class ScalingConfig:
    bandwidth_bps: float          # bytes/second
    point_bytes: int = POINT_BYTES
    talker_period_s: float = 0.04
    canny: CannyParams = field(default_factory=CannyParams)

    def __post_init__(self) -> None:
        if self.bandwidth_bps <= 0 or self.point_bytes <= 0 or self.talker_period_s <= 0:
            raise ValueError("bandwidth, point size, and talker period must be positive")


@dataclass(eq=False)
class OrganizedCloud:
    """Depth-camera scan on a width x height grid; depth 0 marks invalid
    pixels. Point arrays hold the valid pixels in row-major order, so
    serialized size is header + point_count * point_bytes."""

    width: int
    height: int
    depth: np.ndarray          # (height, width) float32 meters, 0 = invalid
    xyz: np.ndarray            # (N, 3) float32
    rgba: np.ndarray           # (N, 4) uint8

    def __post_init__(self) -> None:
        self.depth = np.asarray(self.depth, dtype=np.float32).reshape(self.height, self.width)
        self.xyz = np.asarray(self.xyz, dtype=np.float32).reshape(-1, 3)
        self.rgba = np.asarray(self.rgba, dtype=np.uint8).reshape(-1, 4)
        n_valid = int(np.count_nonzero(self.depth > 0))
        if len(self.xyz) != n_valid or len(self.rgba) != n_valid:
            raise ValueError(
                f"point arrays ({len(self.xyz)}) do not match valid depth pixels ({n_valid})"
            )

    @property
    def point_count(self) -> int:
        return len(self.xyz)

    def serialized_size(self) -> int:
        return CLOUD_HEADER.size + self.point_count * POINT_BYTES

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OrganizedCloud):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.depth, other.depth)
            and np.array_equal(self.xyz, other.xyz)
            and np.array_equal(self.rgba, other.rgba)
        )

    @staticmethod
    def from_depth(
        depth: np.ndarray, rgba: np.ndarray | None = None, focal_px: float = 200.0
    ) -> "OrganizedCloud":
        """Back-project a depth grid through a pinhole with the optical axis
        at the grid center."""
        depth = np.asarray(depth, dtype=np.float32)
        h, w = depth.shape
        rows, cols = np.nonzero(depth > 0)
        z = depth[rows, cols]
        x = (cols - (w - 1) / 2.0) * z / focal_px
        y = (rows - (h - 1) / 2.0) * z / focal_px
        xyz = np.stack([x, y, z], axis=1).astype(np.float32)
        if rgba is None:
            shade = np.clip(255.0 / (1.0 + z), 0, 255).astype(np.uint8)
            rgba_pts = np.stack([shade, shade, shade, np.full_like(shade, 255)], axis=1)
        else:
            rgba_pts = np.asarray(rgba, dtype=np.uint8)[rows, cols]
        return OrganizedCloud(w, h, depth, xyz, rgba_pts)


@dataclass(eq=False)
class EdgeMask:
    """Per-pixel edge flags restricted to valid pixels, with derived edge and
    interior counts (n_edge + n_interior == point_count)."""

    mask: np.ndarray           # (height, width) bool
    n_edge: int
    n_interior: int

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EdgeMask):
            return NotImplemented
        return np.array_equal(self.mask, other.mask)


# ---------------------------------------------------------------------------
# scaling operations
# ---------------------------------------------------------------------------

def n_max(cfg: ScalingConfig) -> int:
    """Point budget for one talker period: floor(B * T_rt / b)."""
    return math.floor(cfg.bandwidth_bps * cfg.talker_period_s / cfg.point_bytes)


def should_scale(cloud: OrganizedCloud, budget: int) -> bool:
    return cloud.point_count > budget


def scale_factor(budget: int, num_edge: int, num_interior: int) -> float:
    """Interior survival fraction: min(1, (N_max - N_e) / N_in), clamped to
    [0, 1]; with no interior points nothing needs thinning, so r = 1."""
    if num_interior < 0:
        raise ValueError("interior count must be non-negative")
    if num_interior == 0:
        return 1.0
    r = min(1.0, (budget - num_edge) / num_interior)
    return max(0.0, r)


def classify_edges(cloud: OrganizedCloud, params: CannyParams | None = None) -> EdgeMask:
    """Canny edge detection on the organized depth image.

    Gaussian smoothing, Sobel gradients, four-sector non-maximum suppression,
    then double-threshold hysteresis with 8-connected linking. Thresholds are
    params.low/params.high times the maximum gradient magnitude. Invalid
    pixels never classify as edges; grids thinner than 3 pixels classify
    everything interior.
    """
    params = params or CannyParams()
    valid = cloud.depth > 0
    if cloud.width < 3 or cloud.height < 3:
        return EdgeMask(np.zeros_like(valid), 0, cloud.point_count)
    img = ndimage.gaussian_filter(cloud.depth.astype(np.float64), params.sigma, mode="nearest")
    kx = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
    gx = ndimage.convolve(img, kx, mode="nearest")
    gy = ndimage.convolve(img, kx.T, mode="nearest")
    mag = np.hypot(gx, gy)
    peak = float(mag.max())
    if peak == 0.0:
        return EdgeMask(np.zeros_like(valid), 0, cloud.point_count)
    nms = _non_maximum_suppression(mag, gx, gy)
    strong = nms >= params.high * peak
    weak = nms >= params.low * peak
    labels, n_labels = ndimage.label(weak, structure=np.ones((3, 3)))
    if n_labels:
        keep = np.zeros(n_labels + 1, dtype=bool)
        keep[np.unique(labels[strong])] = True
        keep[0] = False
        edges = keep[labels]
    else:
        edges = np.zeros_like(weak)
    mask = edges & valid
    n_edge = int(np.count_nonzero(mask))
    return EdgeMask(mask, n_edge, cloud.point_count - n_edge)


def _non_maximum_suppression(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Keep pixels whose magnitude is >= both neighbors along the quantized
    gradient direction; borders compare against zero padding."""
    h, w = mag.shape
    pad = np.zeros((h + 2, w + 2))
    pad[1:-1, 1:-1] = mag
    # neighbor pairs per sector, as (row offset, col offset)
    offs = {
        0: ((0, 1), (0, -1)),      # gradient ~ horizontal
        1: ((1, 1), (-1, -1)),     # ~ 45 degrees
        2: ((1, 0), (-1, 0)),      # ~ vertical
        3: ((1, -1), (-1, 1)),     # ~ 135 degrees
    }
    angle = np.mod(np.arctan2(gy, gx), math.pi)
    sector = np.zeros(mag.shape, dtype=np.uint8)
    sector[(angle >= math.pi / 8) & (angle < 3 * math.pi / 8)] = 1
    sector[(angle >= 3 * math.pi / 8) & (angle < 5 * math.pi / 8)] = 2
    sector[(angle >= 5 * math.pi / 8) & (angle < 7 * math.pi / 8)] = 3
    out = np.zeros_like(mag)
    for s, ((r1, c1), (r2, c2)) in offs.items():
        sel = sector == s
        n1 = pad[1 + r1 : 1 + r1 + h, 1 + c1 : 1 + c1 + w]
        n2 = pad[1 + r2 : 1 + r2 + h, 1 + c2 : 1 + c2 + w]
        keep = sel & (mag >= n1) & (mag >= n2)
        out[keep] = mag[keep]
    return out


def downsample(cloud: OrganizedCloud, mask: EdgeMask, r: float) -> OrganizedCloud:
    """Keep all edge points and exactly floor(r * N_in) interior points,
    selected by an even stride over the interior points in row-major order."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"scaling factor {r} outside [0, 1]")
    if r == 1.0:
        return cloud
    rows, cols = np.nonzero(cloud.depth > 0)
    point_is_edge = mask.mask[rows, cols]
    interior_positions = np.nonzero(~point_is_edge)[0]
    n_in = len(interior_positions)
    m = math.floor(r * n_in)
    keep = point_is_edge.copy()
    if m > 0:
        picks = (np.arange(m, dtype=np.int64) * n_in) // m
        keep[interior_positions[picks]] = True
    depth = np.zeros_like(cloud.depth)
    depth[rows[keep], cols[keep]] = cloud.depth[rows[keep], cols[keep]]
    return OrganizedCloud(cloud.width, cloud.height, depth, cloud.xyz[keep], cloud.rgba[keep])


@dataclass(frozen=True)
class ScaleInfo:
    r: float
    n_edge: int
    n_interior: int
    points_out: int
    edge_overflow: bool        # edge points alone exceed the budget


def scale_to_budget(
    cloud: OrganizedCloud, cfg: ScalingConfig
) -> tuple[OrganizedCloud, ScaleInfo]:
    """Scale the cloud when it exceeds the period budget; edges always
    survive, even when they alone overflow the budget (flagged)."""
    budget = n_max(cfg)
    if not should_scale(cloud, budget):
        return cloud, ScaleInfo(1.0, 0, 0, cloud.point_count, False)
    mask = classify_edges(cloud, cfg.canny)
    r = scale_factor(budget, mask.n_edge, mask.n_interior)
    scaled = downsample(cloud, mask, r)
    return scaled, ScaleInfo(
        r, mask.n_edge, mask.n_interior, scaled.point_count, mask.n_edge > budget
    )


# ---------------------------------------------------------------------------
# wire-view block and file I/O
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class CloudBlock:
    """Wire view of a cloud: the grid dimensions plus the point records, the
    exact bytes that travel in a feedback message."""

    width: int
    height: int
    xyz: np.ndarray
    rgba: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CloudBlock):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.xyz, other.xyz)
            and np.array_equal(self.rgba, other.rgba)
        )

    @property
    def point_count(self) -> int:
        return len(self.xyz)

    def to_bytes(self) -> bytes:
        recs = np.empty(self.point_count, dtype=POINT_DTYPE)
        recs["x"], recs["y"], recs["z"] = self.xyz[:, 0], self.xyz[:, 1], self.xyz[:, 2]
        recs["rgba"] = self.rgba
        return CLOUD_HEADER.pack(self.width, self.height, self.point_count) + recs.tobytes()

    @staticmethod
    def from_bytes(buf: bytes, offset: int = 0) -> tuple["CloudBlock", int]:
        if len(buf) - offset < CLOUD_HEADER.size:
            raise ValueError(f"truncated cloud header at offset {offset}")
        width, height, count = CLOUD_HEADER.unpack_from(buf, offset)
        offset += CLOUD_HEADER.size
        nbytes = count * POINT_BYTES
        if len(buf) - offset < nbytes:
            raise ValueError(f"truncated cloud points at offset {offset}")
        recs = np.frombuffer(buf, dtype=POINT_DTYPE, count=count, offset=offset).copy()
        xyz = np.stack([recs["x"], recs["y"], recs["z"]], axis=1)
        return CloudBlock(width, height, xyz, recs["rgba"].copy()), offset + nbytes


def to_block(cloud: OrganizedCloud) -> CloudBlock:
    return CloudBlock(cloud.width, cloud.height, cloud.xyz.copy(), cloud.rgba.copy())


def save_cloud(cloud: OrganizedCloud, path: str | Path) -> None:
    """Write the wire block to `path` and the depth grid to `path`.depth."""
    path = Path(path)
    path.write_bytes(to_block(cloud).to_bytes())
    sidecar = DEPTH_HEADER.pack(cloud.width, cloud.height) + cloud.depth.astype(
        "<f4"
    ).tobytes()
    path.with_suffix(path.suffix + ".depth").write_bytes(sidecar)


def load_cloud(path: str | Path) -> OrganizedCloud:
    path = Path(path)
    block, end = CloudBlock.from_bytes(path.read_bytes())
    raw = path.with_suffix(path.suffix + ".depth").read_bytes()
    w, h = DEPTH_HEADER.unpack_from(raw, 0)
    if (w, h) != (block.width, block.height):
        raise ValueError("depth sidecar dimensions disagree with cloud block")
    depth = np.frombuffer(raw, dtype="<f4", count=w * h, offset=DEPTH_HEADER.size).reshape(h, w)
    return OrganizedCloud(w, h, depth.copy(), block.xyz, block.rgba)


# ---------------------------------------------------------------------------
# synthetic scenes
# ---------------------------------------------------------------------------

def gen_plane(
    width: int, height: int, depth_m: float = 2.0, noise: float = 0.0, seed: int = 0
) -> OrganizedCloud:
    """Flat wall at constant depth, optional seeded Gaussian depth noise."""
    depth = np.full((height, width), depth_m, dtype=np.float32)
    if noise > 0:
        depth += np.random.default_rng(seed).normal(0, noise, depth.shape).astype(np.float32)
    return OrganizedCloud.from_depth(np.maximum(depth, 1e-3))


def gen_step(
    width: int,
    height: int,
    near_m: float = 1.0,
    far_m: float = 2.0,
    column: int | None = None,
    noise: float = 0.0,
    seed: int = 0,
) -> OrganizedCloud:
    """Vertical depth discontinuity: columns left of `column` at near_m, the
    rest at far_m."""
    column = width // 2 if column is None else column
    depth = np.full((height, width), far_m, dtype=np.float32)
    depth[:, :column] = near_m
    if noise > 0:
        depth += np.random.default_rng(seed).normal(0, noise, depth.shape).astype(np.float32)
    return OrganizedCloud.from_depth(np.maximum(depth, 1e-3))


def gen_cube_on_plane(
    width: int,
    height: int,
    plane_m: float = 2.5,
    cube_m: float = 1.2,
    rect: tuple[int, int, int, int] | None = None,
    noise: float = 0.0,
    seed: int = 0,
) -> OrganizedCloud:
    """Closer square region (cube face) in front of a background plane.
    rect is (row0, col0, row1, col1), exclusive upper bounds."""
    if rect is None:
        rect = (height // 4, width // 4, 3 * height // 4, 3 * width // 4)
    depth = np.full((height, width), plane_m, dtype=np.float32)
    r0, c0, r1, c1 = rect
    depth[r0:r1, c0:c1] = cube_m
    if noise > 0:
        depth += np.random.default_rng(seed).normal(0, noise, depth.shape).astype(np.float32)
    return OrganizedCloud.from_depth(np.maximum(depth, 1e-3))


def silhouette_pixels(rect: tuple[int, int, int, int]) -> set[tuple[int, int]]:
    """Boundary pixel set of a cube-face rectangle, for comparing edge masks
    against known geometry."""
    r0, c0, r1, c1 = rect
    pixels: set[tuple[int, int]] = set()
    for c in range(c0, c1):
        pixels.add((r0, c))
        pixels.add((r1 - 1, c))
    for r in range(r0, r1):
        pixels.add((r, c0))
        pixels.add((r, c1 - 1))
    return pixels
