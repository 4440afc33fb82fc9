"""Perspective crops from panoramas: pinhole cameras, sampling, trajectories.

The pinhole field of view is horizontal; the vertical extent follows from
the output aspect ratio. Camera rotation order is pitch (elevation, about
the camera x axis) then yaw (azimuth, about the world up axis), so azimuth
indexes panorama columns directly.
"""

from dataclasses import dataclass

import numpy as np

from .envmap import EnvironmentMap, great_circle_deg, sample_equirect
from .tonemap import apply_display_tonemap, auto_expose, quantize8, tonemap_ldr, tonemap_log, TONE_CURVES

DEFAULT_CROP_WIDTH = 720
DEFAULT_CROP_HEIGHT = 480


@dataclass
class CameraSpec:
    """Pinhole camera orientation and output size."""

    azimuth: float  # degrees in [0, 360)
    elevation: float  # degrees, |elevation| < 90
    fov: float  # horizontal field of view, degrees
    width: int = DEFAULT_CROP_WIDTH
    height: int = DEFAULT_CROP_HEIGHT

    def __post_init__(self):
        if not 0.0 < self.fov < 180.0:
            raise ValueError(f"fov must be in (0, 180), got {self.fov}")
        if not abs(self.elevation) < 90.0:
            raise ValueError(f"|elevation| must be < 90, got {self.elevation}")
        self.azimuth = float(self.azimuth) % 360.0
        if self.width <= 0 or self.height <= 0:
            raise ValueError("output size must be positive")

    def forward(self) -> np.ndarray:
        """World-space unit view direction."""
        az = np.deg2rad(self.azimuth)
        el = np.deg2rad(self.elevation)
        return np.array(
            [np.sin(az) * np.cos(el), np.sin(el), -np.cos(az) * np.cos(el)]
        )


@dataclass
class CameraRanges:
    """Uniform sampling ranges for randomized cameras (degrees)."""

    azimuth: tuple = (0.0, 360.0)
    elevation: tuple = (-10.0, 10.0)
    fov: tuple = (45.0, 80.0)


def _rotation(cam: CameraSpec) -> np.ndarray:
    """World-from-camera rotation: pitch about x, then yaw about world y."""
    el = np.deg2rad(cam.elevation)
    az = np.deg2rad(cam.azimuth)
    pitch = np.array(
        [[1, 0, 0], [0, np.cos(el), -np.sin(el)], [0, np.sin(el), np.cos(el)]]
    )
    yaw = np.array(
        [[np.cos(az), 0, -np.sin(az)], [0, 1, 0], [np.sin(az), 0, np.cos(az)]]
    )
    return yaw @ pitch


def pixel_ray(cam: CameraSpec, col: float, row: float) -> np.ndarray:
    """World-space unit ray through a continuous image coordinate.

    Pixel centers sit at integer + 0.5; (0, 0) is the top-left image corner,
    so col = 0 is the exact left edge of the view.
    """
    half = np.tan(np.deg2rad(cam.fov) / 2.0)
    u = (2.0 * col / cam.width - 1.0) * half
    v = (1.0 - 2.0 * row / cam.height) * half * cam.height / cam.width
    ray = np.array([u, v, -1.0])
    ray = _rotation(cam) @ ray
    return ray / np.linalg.norm(ray)


def camera_rays(cam: CameraSpec) -> np.ndarray:
    """(H, W, 3) unit rays through every pixel center."""
    half = np.tan(np.deg2rad(cam.fov) / 2.0)
    cols = (2.0 * (np.arange(cam.width) + 0.5) / cam.width - 1.0) * half
    rows = (1.0 - 2.0 * (np.arange(cam.height) + 0.5) / cam.height) * half * cam.height / cam.width
    u, v = np.meshgrid(cols, rows)
    rays = np.stack([u, v, -np.ones_like(u)], axis=-1)
    rays = rays @ _rotation(cam).T
    return rays / np.linalg.norm(rays, axis=-1, keepdims=True)


def project_perspective(pano, cam: CameraSpec) -> np.ndarray:
    """Project a panorama (EnvironmentMap or (H, W, 3) array) to a pinhole view."""
    data = pano.data if isinstance(pano, EnvironmentMap) else np.asarray(pano)
    return sample_equirect(data, camera_rays(cam))


def sample_camera(rng: np.random.Generator, ranges: CameraRanges = CameraRanges(),
                  width: int = DEFAULT_CROP_WIDTH, height: int = DEFAULT_CROP_HEIGHT) -> CameraSpec:
    """Uniformly sample a camera within the given ranges."""
    az = rng.uniform(*ranges.azimuth)
    el = rng.uniform(*ranges.elevation)
    fov = rng.uniform(*ranges.fov)
    return CameraSpec(azimuth=az, elevation=el, fov=fov, width=width, height=height)


@dataclass
class Trajectory:
    """Per-frame camera sequence with a bounded orientation cone."""

    frames: list
    cone_limit: float = 15.0

    def __post_init__(self):
        if not self.frames:
            raise ValueError("trajectory needs at least one frame")
        f0 = self.frames[0].forward()
        for i, cam in enumerate(self.frames):
            dev = great_circle_deg(f0, cam.forward())
            if dev > self.cone_limit + 1e-6:
                raise ValueError(f"frame {i} deviates {dev:.3f} deg > cone {self.cone_limit}")


def _slerp(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    cos = np.clip(np.dot(a, b), -1.0, 1.0)
    ang = np.arccos(cos)
    if ang < 1e-9:
        return a
    return (np.sin((1.0 - t) * ang) * a + np.sin(t * ang) * b) / np.sin(ang)


def gen_trajectory(rng: np.random.Generator, frame_count: int, cone_deg: float = 15.0,
                   start: CameraSpec | None = None) -> Trajectory:
    """Smooth camera path: slerp toward a random endpoint inside the cone.

    The endpoint deviation is area-uniform in the spherical cap, the path
    follows the great circle with cosine easing, and the field of view is
    held fixed, so every frame stays within cone_deg of frame 0.
    """
    if frame_count < 1:
        raise ValueError("frame_count must be >= 1")
    if start is None:
        start = sample_camera(rng)
    if abs(start.elevation) + cone_deg >= 90.0:
        raise ValueError("start elevation too close to the pole for this cone")
    if frame_count == 1:
        return Trajectory([start], cone_limit=cone_deg)
    psi = np.deg2rad(cone_deg) * np.sqrt(rng.random())
    bearing = 2.0 * np.pi * rng.random()
    f0 = start.forward()
    up = np.array([0.0, 1.0, 0.0])
    east = np.cross(up, f0)
    east /= np.linalg.norm(east)
    north = np.cross(f0, east)
    f1 = np.cos(psi) * f0 + np.sin(psi) * (np.cos(bearing) * east + np.sin(bearing) * north)
    frames = []
    for k in range(frame_count):
        t = 0.5 * (1.0 - np.cos(np.pi * k / (frame_count - 1)))
        d = _slerp(f0, f1, t)
        az = np.degrees(np.arctan2(d[0], -d[2])) % 360.0
        el = np.degrees(np.arcsin(np.clip(d[1], -1.0, 1.0)))
        frames.append(
            CameraSpec(azimuth=az, elevation=el, fov=start.fov,
                       width=start.width, height=start.height)
        )
    return Trajectory(frames, cone_limit=cone_deg)


# ---------------------------------------------------------------------------
# dataset generation

@dataclass
class PanoramaSource:
    """A source panorama: HDR radiance, or display-referred LDR in [0,1]."""

    data: np.ndarray
    hdr: bool = True


@dataclass
class DatasetSample:
    """One supervised sample: LDR crop(s) plus the dual-tonemap target.

    target_log is None for LDR panorama sources (no log-space intensity).
    """

    source_index: int
    cameras: list
    tone_curve: str
    exposure_scale: float
    crops: list
    target_ldr: np.ndarray
    target_log: np.ndarray | None


_CURVE_NAMES = sorted(TONE_CURVES)


def dataset_gen(panos, rng: np.random.Generator, count: int, video: bool = False,
                frame_count: int = 25, ranges: CameraRanges = CameraRanges(),
                crop_width: int = DEFAULT_CROP_WIDTH, crop_height: int = DEFAULT_CROP_HEIGHT):
    """Generate `count` supervised samples from a list of panorama sources.

    Each sample draws its own RNG stream spawned from `rng`, so sample i is
    reproducible independent of processing order. HDR sources get a random
    display tone curve plus auto-exposure (p99 luminance -> 0.9) before 8-bit
    quantization; LDR sources only get the auto-exposure. Targets are the
    dual tonemaps of the source panorama (ldr channel only for LDR sources,
    whose [0,1] values are treated as linear radiance).
    """
    if not panos:
        raise ValueError("no panoramas supplied")
    sources = [
        p if isinstance(p, PanoramaSource) else PanoramaSource(np.asarray(p.data), hdr=True)
        for p in panos
    ]
    samples = []
    streams = rng.spawn(count)
    for i, child in enumerate(streams):
        src_idx = int(child.integers(0, len(sources)))
        src = sources[src_idx]
        start = sample_camera(child, ranges, width=crop_width, height=crop_height)
        cams = gen_trajectory(child, frame_count, start=start).frames if video else [start]
        curve = _CURVE_NAMES[int(child.integers(0, len(_CURVE_NAMES)))] if src.hdr else "none"
        raw = [sample_equirect(src.data, camera_rays(c)) for c in cams]
        try:
            scale, _ = auto_expose(raw[0], percentile=0.99, target=0.9)
        except ValueError:
            scale = 1.0  # black or near-black first frame: leave exposure alone
        crops = []
        for view in raw:
            view = view * scale
            if src.hdr:
                view = apply_display_tonemap(view, curve)
            crops.append(quantize8(np.clip(view, 0.0, 1.0)))
        target_ldr = tonemap_ldr(src.data)
        target_log = tonemap_log(src.data) if src.hdr else None
        samples.append(
            DatasetSample(
                source_index=src_idx,
                cameras=cams,
                tone_curve=curve,
                exposure_scale=float(scale),
                crops=crops,
                target_ldr=target_ldr,
                target_log=target_log,
            )
        )
    return samples
