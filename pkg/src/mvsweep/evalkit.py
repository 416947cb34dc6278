"""Synthetic scenes with analytic ground truth, dataset assembly, metrics.

Scenes are textured rectangles (fronto-parallel or slanted) floating in
front of an optional background plane, all expressed in the reference
camera frame. Textures are band-limited sums of random-phase sinusoids
attached to plane-local coordinates, so every view observes the same
surface pattern and warping them is exact up to interpolation. Rendering
is per-pixel ray casting with the nearest-hit rule, which doubles as the
analytic depth map.
"""
import json
import os
from dataclasses import dataclass

import numpy as np

from mvsweep import formats
from mvsweep.geometry import CameraModel, ImageBuffer, RelativePose
from mvsweep.masks import DepthMap

# texture frequency cap in radians per pixel at the layer's anchor depth;
# keeps bilinear interpolation error well below the photometric signal
MAX_FREQ_RAD_PER_PX = 0.55
WAVE_COUNT = 6


@dataclass
class SceneLayer:
    """Textured rectangle: anchor point, extent, and optional slant.

    The surface is z = depth + slant_x*(x-cx) + slant_y*(y-cy) over the
    rectangle |x-cx| <= half_width, |y-cy| <= half_height (meters, world
    frame). flat_fraction > 0 carves out a centered low-texture patch.
    """

    depth: float
    center_x: float = 0.0
    center_y: float = 0.0
    half_width: float = 1.0
    half_height: float = 1.0
    slant_x: float = 0.0
    slant_y: float = 0.0
    flat_fraction: float = 0.0

    def __post_init__(self):
        if self.depth <= 0:
            raise ValueError(f"layer depth must be positive, got {self.depth}")
        if self.half_width <= 0 or self.half_height <= 0:
            raise ValueError("layer extent must be positive")
        if not (0.0 <= self.flat_fraction < 1.0):
            raise ValueError("flat_fraction must lie in [0, 1)")


@dataclass
class SceneSpec:
    """Deterministic scene description; layers sorted near to far."""

    seed: int
    layers: list
    background_depth: float = None

    def __post_init__(self):
        depths = [layer.depth for layer in self.layers]
        if any(b < a for a, b in zip(depths, depths[1:])):
            raise ValueError("layers must be sorted near-to-far")
        if self.background_depth is not None:
            if self.background_depth <= 0:
                raise ValueError("background depth must be positive")
            if depths and self.background_depth < depths[-1]:
                raise ValueError("background must sit behind every layer")


@dataclass
class Sample:
    """One training/eval record: posed reference + neighbours + truth depth."""

    reference: ImageBuffer
    neighbours: list  # of (ImageBuffer, RelativePose)
    camera: CameraModel
    truth: DepthMap
    seed: int = 0

    def __post_init__(self):
        if len(self.neighbours) < 1:
            raise ValueError("a sample needs at least one neighbour view")


@dataclass
class MetricReport:
    l1_rel: float
    l1_inv: float
    sc_inv: float
    valid_pixel_count: int
    excluded_nonpositive: int = 0


@dataclass
class MotionProfile:
    """Random neighbour motion: uniform translation box, small rotations."""

    translation: tuple = (0.18, 0.06, 0.06)
    rotation: float = 0.015

    def sample_pose(self, rng):
        t = rng.uniform(-1.0, 1.0, size=3) * np.asarray(self.translation)
        angles = rng.uniform(-self.rotation, self.rotation, size=3)
        return RelativePose(_rotation_from_angles(*angles), t)


def _rotation_from_angles(ax, ay, az):
    cx, sx = np.cos(ax), np.sin(ax)
    cy, sy = np.cos(ay), np.sin(ay)
    cz, sz = np.cos(az), np.sin(az)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rz @ ry @ rx


class _Texture:
    """Band-limited procedural texture over plane-local coordinates."""

    def __init__(self, seed_entropy, pixels_per_meter, flat_fraction, extent):
        rng = np.random.default_rng(np.random.SeedSequence(seed_entropy))
        self.base = rng.uniform(0.3, 0.7, size=3)
        f_hi = MAX_FREQ_RAD_PER_PX * pixels_per_meter
        f_lo = min(2.0 / max(extent, 1e-6), 0.25 * f_hi)
        freqs = np.exp(rng.uniform(np.log(f_lo), np.log(f_hi), size=WAVE_COUNT))
        angles = rng.uniform(0.0, 2.0 * np.pi, size=WAVE_COUNT)
        self.freq_u = freqs * np.cos(angles)
        self.freq_v = freqs * np.sin(angles)
        self.phase = rng.uniform(0.0, 2.0 * np.pi, size=WAVE_COUNT)
        amps = rng.uniform(0.02, 0.09, size=(WAVE_COUNT, 3))
        self.amps = amps * rng.choice([-1.0, 1.0], size=(WAVE_COUNT, 3))
        self.flat_fraction = flat_fraction
        self.extent = extent

    def __call__(self, u, v):
        waves = np.zeros((3,) + u.shape)
        for k in range(WAVE_COUNT):
            wave = np.sin(self.freq_u[k] * u + self.freq_v[k] * v + self.phase[k])
            for c in range(3):
                waves[c] += self.amps[k, c] * wave
        if self.flat_fraction > 0.0:
            half = self.flat_fraction * self.extent
            # smooth window: 0 inside the flat patch, 1 beyond a 15% margin
            m = np.maximum(np.abs(u), np.abs(v)) / max(half, 1e-9)
            window = np.clip((m - 1.0) / 0.15, 0.0, 1.0)
            waves *= window * window * (3.0 - 2.0 * window)
        return np.clip(self.base[:, None, None] + waves, 0.0, 1.0)


def _camera_rays(camera, pose):
    xs = np.arange(camera.width, dtype=np.float64)
    ys = np.arange(camera.height, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)
    dirs_cam = np.stack(
        [(gx - camera.cx) / camera.fx, (gy - camera.cy) / camera.fy, np.ones_like(gx)]
    )
    r_inv = pose.rotation.T
    dirs_world = np.einsum("ij,jhw->ihw", r_inv, dirs_cam)
    origin = -r_inv @ pose.translation
    return origin, dirs_world


def render_scene(spec, camera, pose=None):
    """Ray-cast the scene from a posed camera.

    Returns (image, depth map). Depths are the camera-frame z of the
    nearest hit; pixels that miss every surface are invalid (NaN depth,
    black pixels). Deterministic given spec.seed.
    """
    if pose is None:
        pose = RelativePose.identity()
    origin, dirs = _camera_rays(camera, pose)
    height, width = dirs.shape[1:]
    depth = np.full((height, width), np.inf)
    color = np.zeros((3, height, width))
    surfaces = list(spec.layers)
    if spec.background_depth is not None:
        surfaces.append(
            SceneLayer(depth=spec.background_depth, half_width=np.inf, half_height=np.inf)
        )
    if not surfaces:
        raise ValueError("scene has no layers and no background")
    any_hit_possible = False
    for index, layer in enumerate(surfaces):
        denom = dirs[2] - layer.slant_x * dirs[0] - layer.slant_y * dirs[1]
        numer = (
            layer.depth
            - origin[2]
            + layer.slant_x * (origin[0] - layer.center_x)
            + layer.slant_y * (origin[1] - layer.center_y)
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            s = numer / denom
        u = origin[0] + s * dirs[0] - layer.center_x
        v = origin[1] + s * dirs[1] - layer.center_y
        hit = (
            (np.abs(denom) > 1e-12)
            & (s > 1e-6)
            & (np.abs(u) <= layer.half_width)
            & (np.abs(v) <= layer.half_height)
            & (s < depth)
        )
        if not hit.any():
            continue
        any_hit_possible = True
        pixels_per_meter = camera.fx / layer.depth
        extent = min(layer.half_width, layer.half_height)
        if not np.isfinite(extent):
            extent = 2.0 * layer.depth * camera.width / (2.0 * camera.fx)
        texture = _Texture([spec.seed, index], pixels_per_meter, layer.flat_fraction, extent)
        shaded = texture(u, v)
        depth[hit] = s[hit]
        for c in range(3):
            color[c][hit] = shaded[c][hit]
    valid = np.isfinite(depth)
    if not any_hit_possible or not valid.any():
        raise ValueError("camera sees no surface (behind all layers?)")
    values = np.where(valid, depth, np.nan)
    return ImageBuffer(color, validity_mask=valid), DepthMap(values=values, validity=valid)


def single_plane_scene(seed, depth, camera, motion_margin=1.0, flat_fraction=0.0):
    """Fronto-parallel plane guaranteed to cover the frustum of nearby views."""
    half_w = depth * camera.width / (2.0 * camera.fx) * 1.5 + motion_margin
    half_h = depth * camera.height / (2.0 * camera.fy) * 1.5 + motion_margin
    layer = SceneLayer(
        depth=depth, half_width=half_w, half_height=half_h, flat_fraction=flat_fraction
    )
    return SceneSpec(seed=seed, layers=[layer], background_depth=None)


def random_scene_specs(count, seed, camera, depth_range=(1.5, 6.0), max_layers=2,
                       slant_scale=0.15, flat_probability=0.25):
    """Scene batch for dataset generation: layered foreground + background."""
    lo, hi = depth_range
    if not (0 < lo < hi):
        raise ValueError(f"bad depth range {depth_range}")
    specs = []
    for i in range(count):
        scene_seed = int(np.random.default_rng(np.random.SeedSequence([seed, i])).integers(2**31))
        rng = np.random.default_rng(np.random.SeedSequence([seed, i, 1]))
        background = hi * rng.uniform(0.85, 1.0)
        layers = []
        for _ in range(int(rng.integers(1, max_layers + 1))):
            depth = rng.uniform(lo, 0.75 * hi)
            span_x = depth * camera.width / camera.fx
            span_y = depth * camera.height / camera.fy
            flat = rng.uniform(0.3, 0.5) if rng.random() < flat_probability else 0.0
            layers.append(
                SceneLayer(
                    depth=depth,
                    center_x=rng.uniform(-0.3, 0.3) * span_x,
                    center_y=rng.uniform(-0.3, 0.3) * span_y,
                    half_width=rng.uniform(0.2, 0.5) * span_x,
                    half_height=rng.uniform(0.2, 0.5) * span_y,
                    slant_x=rng.uniform(-slant_scale, slant_scale),
                    slant_y=rng.uniform(-slant_scale, slant_scale),
                    flat_fraction=flat,
                )
            )
        layers.sort(key=lambda l: l.depth)
        specs.append(SceneSpec(seed=scene_seed, layers=layers, background_depth=background))
    return specs


def _overlap_fraction(camera, pose, depth):
    """Fraction of the reference image that stays in view after warping
    the image rectangle onto the neighbour through the plane at depth."""
    from mvsweep.geometry import homography_for_plane

    h = homography_for_plane(camera, pose, depth).matrix
    xs = np.linspace(0, camera.width - 1, 9)
    ys = np.linspace(0, camera.height - 1, 7)
    gx, gy = np.meshgrid(xs, ys)
    q = np.einsum("ij,jk->ik", h, np.stack([gx.ravel(), gy.ravel(), np.ones(gx.size)]))
    inside = (
        (q[2] > 1e-9)
        & (q[0] / q[2] >= 0)
        & (q[0] / q[2] <= camera.width - 1)
        & (q[1] / q[2] >= 0)
        & (q[1] / q[2] <= camera.height - 1)
    )
    return inside.mean()


def build_dataset(specs, camera, motion=None, neighbours=2, min_overlap=0.5):
    """Render reference plus posed neighbour views for every scene.

    Poses are drawn from the motion profile with a per-spec seed, so the
    dataset is deterministic and order-independent. A sample whose motion
    destroys image overlap is rejected with an error.
    """
    if not specs:
        raise ValueError("no scene specs given")
    motion = motion or MotionProfile()
    samples = []
    for spec in specs:
        reference, truth = render_scene(spec, camera, RelativePose.identity())
        median_depth = float(np.nanmedian(truth.values))
        pose_rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 2**20]))
        views = []
        for _ in range(neighbours):
            pose = motion.sample_pose(pose_rng)
            overlap = _overlap_fraction(camera, pose, median_depth)
            if overlap < min_overlap:
                raise ValueError(
                    f"scene {spec.seed}: motion leaves only {overlap:.0%} image overlap"
                )
            image, _ = render_scene(spec, camera, pose)
            views.append((image, pose))
        samples.append(
            Sample(reference=reference, neighbours=views, camera=camera,
                   truth=truth, seed=spec.seed)
        )
    return samples


def compute_metrics(predicted, truth):
    """Depth error metrics over pixels with valid truth and positive prediction.

    l1_rel: mean |d - d_gt| / d_gt. l1_inv: mean |1/d - 1/d_gt|.
    sc_inv: sqrt(mean(z^2) - mean(z)^2) with z = ln d - ln d_gt.
    Non-positive predictions at truth-valid pixels are excluded and counted.
    """
    if isinstance(predicted, DepthMap):
        pred_values, pred_valid = predicted.values, predicted.validity
    else:
        pred_values = np.asarray(predicted, dtype=np.float64)
        pred_valid = np.isfinite(pred_values)
    if pred_values.shape != truth.values.shape:
        raise ValueError(
            f"prediction {pred_values.shape} vs truth {truth.values.shape}"
        )
    base = truth.validity & pred_valid
    positive = base & (pred_values > 0)
    excluded = int(base.sum() - positive.sum())
    n = int(positive.sum())
    if n == 0:
        raise ValueError("no valid pixels to evaluate")
    d = pred_values[positive]
    d_gt = truth.values[positive]
    l1_rel = float(np.mean(np.abs(d - d_gt) / d_gt))
    l1_inv = float(np.mean(np.abs(1.0 / d - 1.0 / d_gt)))
    z = np.log(d) - np.log(d_gt)
    variance = max(float(np.mean(z**2) - np.mean(z) ** 2), 0.0)
    return MetricReport(
        l1_rel=l1_rel,
        l1_inv=l1_inv,
        sc_inv=float(np.sqrt(variance)),
        valid_pixel_count=n,
        excluded_nonpositive=excluded,
    )


# sample persistence -------------------------------------------------------

def save_sample(directory, sample):
    os.makedirs(directory, exist_ok=True)
    formats.write_ppm(os.path.join(directory, "reference.ppm"), sample.reference.data)
    poses = []
    for i, (image, pose) in enumerate(sample.neighbours):
        formats.write_ppm(os.path.join(directory, f"neighbour_{i:02d}.ppm"), image.data)
        poses.append((pose.rotation, pose.translation))
    formats.write_poses(os.path.join(directory, "poses.txt"), poses)
    formats.write_intrinsics(
        os.path.join(directory, "intrinsics.txt"),
        sample.camera.fx, sample.camera.fy, sample.camera.cx, sample.camera.cy,
    )
    depth = np.where(sample.truth.validity, sample.truth.values, np.nan)
    formats.write_tensor(os.path.join(directory, "depth.mmvs"), depth)


def load_sample(directory, seed=0):
    reference = ImageBuffer(formats.read_ppm(os.path.join(directory, "reference.ppm")))
    fx, fy, cx, cy = formats.read_intrinsics(os.path.join(directory, "intrinsics.txt"))
    _, height, width = reference.data.shape
    camera = CameraModel(fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height)
    poses = formats.read_poses(os.path.join(directory, "poses.txt"))
    views = []
    for i, (rotation, translation) in enumerate(poses):
        image = ImageBuffer(formats.read_ppm(os.path.join(directory, f"neighbour_{i:02d}.ppm")))
        views.append((image, RelativePose(rotation, translation)))
    depth_values = formats.read_tensor(os.path.join(directory, "depth.mmvs")).astype(np.float64)
    truth = DepthMap(values=depth_values, validity=np.isfinite(depth_values) & (depth_values > 0))
    return Sample(reference=reference, neighbours=views, camera=camera, truth=truth, seed=seed)


def save_dataset(directory, samples):
    os.makedirs(directory, exist_ok=True)
    names = []
    for i, sample in enumerate(samples):
        name = f"sample_{i:04d}"
        save_sample(os.path.join(directory, name), sample)
        names.append({"dir": name, "seed": sample.seed})
    camera = samples[0].camera
    manifest = {
        "camera": {
            "fx": camera.fx, "fy": camera.fy, "cx": camera.cx, "cy": camera.cy,
            "width": camera.width, "height": camera.height,
        },
        "samples": names,
    }
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(directory):
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = json.load(fh)
    samples = []
    for entry in manifest["samples"]:
        samples.append(load_sample(os.path.join(directory, entry["dir"]), seed=entry["seed"]))
    return samples, manifest
