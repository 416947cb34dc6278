"""Pinhole cameras, relative poses, and plane-sweep homography warping.

Conventions: pixel centers sit at integer coordinates with the origin at
the top-left; the reference camera frame doubles as the world frame; a
RelativePose maps reference-frame points into the neighbour frame
(x_nbr = R @ x_ref + t). The plane homography therefore pulls neighbour
pixels into reference geometry.
"""
from dataclasses import dataclass, field

import numpy as np

from mvsweep import kernels


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus image size (pixels)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width < 8 or self.height < 8:
            raise ValueError(f"image size must be at least 8x8, got {self.width}x{self.height}")

    def matrix(self):
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def inverse_matrix(self):
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )


@dataclass(frozen=True)
class RelativePose:
    """Rigid transform taking reference-frame points into the neighbour frame."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        tr = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if rot.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {rot.shape}")
        if not np.allclose(rot.T @ rot, np.eye(3), atol=1e-9):
            raise ValueError("rotation is not orthonormal (tolerance 1e-9)")
        if abs(np.linalg.det(rot) - 1.0) > 1e-9:
            raise ValueError("rotation determinant must be +1 (tolerance 1e-9)")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    def inverse(self):
        return RelativePose(self.rotation.T, -self.rotation.T @ self.translation)


@dataclass(frozen=True)
class PlaneHomography:
    """3x3 pixel mapping for a fronto-parallel plane at a fixed depth."""

    matrix: np.ndarray
    plane_depth: float

    def __post_init__(self):
        if self.plane_depth <= 0:
            raise ValueError(f"plane depth must be positive, got {self.plane_depth}")
        if abs(np.linalg.det(self.matrix)) <= 1e-12:
            raise ValueError("plane homography is singular")


class ImageBuffer:
    """Channel-major image with values in [0, 1] and an optional validity mask."""

    def __init__(self, data, validity_mask=None):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 3:
            raise ValueError(f"image data must be (channels, height, width), got {data.shape}")
        if not np.isfinite(data).all():
            raise ValueError("image data contains non-finite values")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValueError("image values must lie in [0, 1]")
        if validity_mask is not None:
            validity_mask = np.asarray(validity_mask, dtype=bool)
            if validity_mask.shape != data.shape[1:]:
                raise ValueError("validity mask shape does not match image")
        self.data = data
        self.validity_mask = validity_mask

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]


@dataclass
class WarpVolume:
    """Reference image stacked with one warped neighbour slab per plane.

    data has 3*(1+D) channels: reference RGB, then warped RGB per plane in
    ascending plane order. valid holds the per-plane in-bounds masks (kept
    for diagnostics; the networks consume raw RGB only).
    """

    data: np.ndarray
    plane_depths: np.ndarray
    valid: np.ndarray = field(repr=False)

    @property
    def plane_count(self):
        return len(self.plane_depths)


def homography_for_plane(camera, pose, depth):
    """Pixel homography for the fronto-parallel plane at the given depth.

    Maps reference pixels to the neighbour pixels that observe the same
    point on the plane: H = K (R + t [0, 0, 1/d]) K^-1.
    """
    if depth <= 0:
        raise ValueError(f"plane depth must be positive, got {depth}")
    k = camera.matrix()
    k_inv = camera.inverse_matrix()
    rank_one = np.outer(pose.translation, np.array([0.0, 0.0, 1.0 / depth]))
    matrix = k @ (pose.rotation + rank_one) @ k_inv
    return PlaneHomography(matrix=matrix, plane_depth=float(depth))


def warp_image(neighbour, h):
    """Resample the neighbour image onto reference pixels through h.

    Bilinear interpolation; samples falling outside the neighbour image are
    zero-filled and flagged invalid in the output validity mask.
    """
    warped, valid = kernels.warp_bilinear(neighbour.data, h.matrix)
    return ImageBuffer(warped, validity_mask=valid)


def build_warp_volume(reference, neighbour, camera, pose, planes):
    """Stack the reference image with the neighbour warped at every plane."""
    depths = np.asarray(getattr(planes, "depths", planes), dtype=np.float64)
    if depths.ndim != 1 or len(depths) == 0:
        raise ValueError("plane set must contain at least one depth")
    if np.any(np.diff(depths) <= 0):
        raise ValueError("plane depths must be strictly increasing")
    if reference.channels != 3 or neighbour.channels != 3:
        raise ValueError("warp volumes require 3-channel reference and neighbour images")
    for name, img in (("reference", reference), ("neighbour", neighbour)):
        if (img.height, img.width) != (camera.height, camera.width):
            raise ValueError(
                f"{name} image is {img.width}x{img.height}, camera expects "
                f"{camera.width}x{camera.height}"
            )
    slabs = [reference.data]
    valid = np.empty((len(depths), camera.height, camera.width), dtype=bool)
    for i, depth in enumerate(depths):
        h = homography_for_plane(camera, pose, depth)
        warped, mask = kernels.warp_bilinear(neighbour.data, h.matrix)
        slabs.append(warped)
        valid[i] = mask
    return WarpVolume(
        data=np.concatenate(slabs, axis=0), plane_depths=depths, valid=valid
    )
