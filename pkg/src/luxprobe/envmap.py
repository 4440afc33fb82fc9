"""Equirectangular environment maps and spherical geometry.

Conventions (fixed for the whole package):
  * maps are (height, width, 3) float arrays of linear RGB radiance,
    row 0 at the top of the panorama (polar angle -> 0), width == 2*height
  * directions are unit 3-vectors (x, y, z) in camera coordinates:
    +x right, +y up, -z forward
  * a pixel center (col, row) maps to azimuth phi = 2*pi*(col+0.5)/width - pi
    and polar theta = pi*(row+0.5)/height, with phi = 0 on the camera
    forward axis (0, 0, -1)
"""

from dataclasses import dataclass

import numpy as np

# Rec.709 luminance weights for linear RGB
LUMA_WEIGHTS = np.array([0.2126, 0.7152, 0.0722])


@dataclass
class EnvironmentMap:
    """Equirectangular grid of linear RGB radiance (relative units)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"environment map must be (H, W, 3), got {arr.shape}")
        if arr.shape[1] != 2 * arr.shape[0]:
            raise ValueError(f"width must equal 2*height, got {arr.shape[1]}x{arr.shape[0]}")
        if not np.isfinite(arr).all():
            raise ValueError("environment map contains non-finite values")
        if (arr < 0).any():
            raise ValueError("environment map contains negative radiance")
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @classmethod
    def constant(cls, value, height: int) -> "EnvironmentMap":
        """Uniform map; `value` is a scalar or an RGB triple."""
        rgb = np.broadcast_to(np.asarray(value, dtype=np.float64), (3,))
        data = np.tile(rgb, (height, 2 * height, 1))
        return cls(data)


@dataclass
class DirectionMap:
    """Per-pixel unit direction grid, same layout as EnvironmentMap."""

    directions: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.directions)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"direction map must be (H, W, 3), got {arr.shape}")
        if arr.shape[1] != 2 * arr.shape[0]:
            raise ValueError("width must equal 2*height")
        self.directions = arr

    @property
    def height(self) -> int:
        return self.directions.shape[0]

    @property
    def width(self) -> int:
        return self.directions.shape[1]


def _dirs_from_angles(theta, phi):
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=np.float64), phi)
    sin_t = np.sin(theta)
    return np.stack(
        [sin_t * np.sin(phi), np.cos(theta), -sin_t * np.cos(phi)], axis=-1
    )


def pixel_to_direction(col: int, row: int, width: int, height: int) -> np.ndarray:
    """Unit direction of the pixel center at (col, row)."""
    if width != 2 * height:
        raise ValueError("width must equal 2*height")
    if not (0 <= col < width and 0 <= row < height):
        raise ValueError(f"pixel ({col}, {row}) outside {width}x{height} map")
    phi = 2.0 * np.pi * (col + 0.5) / width - np.pi
    theta = np.pi * (row + 0.5) / height
    return _dirs_from_angles(np.float64(theta), np.float64(phi))


def grid_directions(width: int, height: int, yaw_deg: float = 0.0) -> np.ndarray:
    """(H, W, 3) array of pixel-center directions, optional azimuth offset."""
    cols = np.arange(width, dtype=np.float64)
    rows = np.arange(height, dtype=np.float64)
    phi = 2.0 * np.pi * (cols + 0.5) / width - np.pi + np.deg2rad(yaw_deg)
    theta = np.pi * (rows + 0.5) / height
    return _dirs_from_angles(theta[:, None], phi[None, :])


def direction_to_pixel(direction, width: int, height: int):
    """Continuous (col, row) for a unit direction; inverse of pixel_to_direction.

    Azimuth wraps, so col lies in [-0.5, width-0.5). Rows are clamped to
    [0, height-1] (pole clamp for bilinear lookups); at the exact poles the
    azimuth is undefined and col is fixed to width/2.
    """
    d = np.asarray(direction, dtype=np.float64)
    col, row = _directions_to_pixels(d[None, :], width, height)
    return float(col[0]), float(row[0])


def _directions_to_pixels(dirs, width, height):
    """Vectorized direction_to_pixel over (..., 3) arrays."""
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    theta = np.arccos(np.clip(y, -1.0, 1.0))
    phi = np.arctan2(x, -z)
    col = (phi + np.pi) * width / (2.0 * np.pi) - 0.5
    row = theta * height / np.pi - 0.5
    at_pole = np.hypot(x, z) < 1e-12
    col = np.where(at_pole, width / 2.0, col)
    row = np.clip(row, 0.0, height - 1.0)
    return col, row


def _polar_cosines(height: int) -> np.ndarray:
    """cos(pi*k/height) for k = 0..height, mirror-symmetric by construction.

    Built so that c[k] == -c[height-k] bit-exactly, which makes solid angles
    symmetric about the equator and the total solid angle telescope to 4*pi.
    """
    c = np.empty(height + 1, dtype=np.float64)
    half = height // 2
    k = np.arange(half + 1)
    c[: half + 1] = np.cos(np.pi * k / height)
    c[height - half :] = -c[: half + 1][::-1]
    if height % 2 == 0:
        c[half] = 0.0
    c[0] = 1.0
    c[height] = -1.0
    return c


def solid_angle(row: int, width: int, height: int) -> float:
    """Solid angle (sr) of one pixel in the given row; equal across columns."""
    if not 0 <= row < height:
        raise ValueError(f"row {row} outside [0, {height})")
    c = _polar_cosines(height)
    return (2.0 * np.pi / width) * (c[row] - c[row + 1])


def solid_angle_rows(width: int, height: int) -> np.ndarray:
    """Per-row pixel solid angles, shape (height,)."""
    c = _polar_cosines(height)
    return (2.0 * np.pi / width) * (c[:-1] - c[1:])


def luminance(rgb) -> np.ndarray:
    """Rec.709 luminance of linear RGB, over the trailing axis."""
    return np.asarray(rgb, dtype=np.float64) @ LUMA_WEIGHTS


def sample_equirect(data: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Bilinear panorama lookup along unit directions (..., 3).

    Wraps in azimuth and clamps rows at the poles. Lerps use the difference
    form a + t*(b - a) so constant maps sample back bit-exactly.
    """
    height, width = data.shape[0], data.shape[1]
    col, row = _directions_to_pixels(dirs, width, height)
    c0f = np.floor(col)
    r0f = np.floor(row)
    tc = (col - c0f)[..., None]
    tr = (row - r0f)[..., None]
    c0 = c0f.astype(np.int64) % width
    c1 = (c0 + 1) % width
    r0 = np.clip(r0f.astype(np.int64), 0, height - 1)
    r1 = np.clip(r0 + 1, 0, height - 1)
    top = data[r0, c0]
    top = top + tc * (data[r0, c1] - top)
    bot = data[r1, c0]
    bot = bot + tc * (data[r1, c1] - bot)
    return top + tr * (bot - top)


def rotate_env(env: EnvironmentMap, yaw_deg: float) -> EnvironmentMap:
    """Shift panorama contents in azimuth by yaw_deg.

    Sampling the rotated map at azimuth phi reads the source at phi + yaw,
    so project(rotate_env(pano, d), az) == project(pano, az + d). Grid-aligned
    yaw is an exact column roll; otherwise columns are linearly resampled
    with wraparound.
    """
    width = env.width
    shift = yaw_deg * width / 360.0
    k = round(shift)
    if abs(shift - k) < 1e-9:
        return EnvironmentMap(np.roll(env.data, -int(k) % width, axis=1))
    pos = (np.arange(width, dtype=np.float64) + shift) % width
    i0 = np.floor(pos).astype(np.int64) % width
    i1 = (i0 + 1) % width
    t = (pos - np.floor(pos))[None, :, None]
    lo = env.data[:, i0]
    data = lo + t * (env.data[:, i1] - lo)
    return EnvironmentMap(data)


def gen_direction_map(width: int, height: int, yaw_deg: float = 0.0) -> DirectionMap:
    """Direction map with an azimuthal offset, the conditioning-grid encoding.

    Grid-aligned yaw reduces to an exact column roll of the yaw-0 map.
    """
    if width != 2 * height:
        raise ValueError("width must equal 2*height")
    shift = yaw_deg * width / 360.0
    k = round(shift)
    if abs(shift - k) < 1e-9:
        base = grid_directions(width, height)
        return DirectionMap(np.roll(base, -int(k) % width, axis=1))
    return DirectionMap(grid_directions(width, height, yaw_deg=yaw_deg))


def peak_direction(env: EnvironmentMap, percentile: float = 0.999) -> np.ndarray:
    """Dominant-light direction of an environment map.

    Takes all pixels at or above the solid-angle-weighted luminance
    percentile and returns the normalized direction centroid weighted by
    luminance * solid angle. Raises if the map has no positive luminance.
    """
    if not 0.0 < percentile <= 1.0:
        raise ValueError("percentile must be in (0, 1]")
    lum = luminance(env.data)
    if lum.max() <= 0.0:
        raise ValueError("no peak: environment map has no positive luminance")
    sa = np.broadcast_to(solid_angle_rows(env.width, env.height)[:, None], lum.shape)
    flat_lum = lum.ravel()
    flat_sa = sa.ravel()
    order = np.argsort(flat_lum, kind="stable")
    cum = np.cumsum(flat_sa[order])
    idx = np.searchsorted(cum, percentile * cum[-1], side="left")
    threshold = flat_lum[order[min(idx, flat_lum.size - 1)]]
    mask = flat_lum >= threshold
    dirs = grid_directions(env.width, env.height).reshape(-1, 3)
    weights = flat_lum[mask] * flat_sa[mask]
    centroid = (weights[:, None] * dirs[mask]).sum(axis=0)
    norm = np.linalg.norm(centroid)
    if norm < 1e-12 * weights.sum():
        raise ValueError("no peak: luminance distribution is directionless")
    return centroid / norm


def great_circle_deg(a, b) -> float:
    """Great-circle angle in degrees between two unit directions."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    cos = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
