"""Multiplane mask representation.

A mask value at (plane i, pixel p) is the probability that the surface
seen at p lies in front of (or on) plane i. Ground-truth masks derived
from a depth map are binary and non-decreasing along the plane axis;
decoding finds where the (monotonized) profile crosses 0.5.
"""
from dataclasses import dataclass

import numpy as np


@dataclass
class DepthMap:
    """Per-pixel depths in meters with a validity mask for missing truth."""

    values: np.ndarray
    validity: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"depth map must be 2-d, got shape {self.values.shape}")
        if self.validity is None:
            self.validity = np.isfinite(self.values) & (self.values > 0)
        else:
            self.validity = np.asarray(self.validity, dtype=bool)
            if self.validity.shape != self.values.shape:
                raise ValueError("validity shape does not match depth values")
        valid_values = self.values[self.validity]
        if valid_values.size and not (
            np.isfinite(valid_values).all() and (valid_values > 0).all()
        ):
            raise ValueError("valid depth entries must be finite and positive")

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]


@dataclass
class MultiplaneMask:
    """(planes, height, width) mask stack with values in [0, 1].

    validity marks pixels whose ground truth exists; it rides along for
    loss exclusion and is None for predicted masks.
    """

    values: np.ndarray
    validity: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise ValueError(f"mask stack must be (planes, h, w), got {self.values.shape}")
        if self.values.size and (self.values.min() < 0.0 or self.values.max() > 1.0):
            raise ValueError("mask values must lie in [0, 1]")
        if self.validity is not None:
            self.validity = np.asarray(self.validity, dtype=bool)
            if self.validity.shape != self.values.shape[1:]:
                raise ValueError("mask validity shape does not match")

    @property
    def planes(self):
        return self.values.shape[0]

    @property
    def height(self):
        return self.values.shape[1]

    @property
    def width(self):
        return self.values.shape[2]


def make_ground_truth_masks(depth, planes):
    """Binary in-front-of-plane masks from a ground-truth depth map.

    mask[i, p] = 1 where depth[p] <= planes.depths[i] (on-plane counts as
    in front). Pixels without valid truth get 0 on every plane and are
    excluded from losses via the carried validity.
    """
    plane_depths = np.asarray(getattr(planes, "depths", planes), dtype=np.float64)
    values = (
        depth.values[None, :, :] <= plane_depths[:, None, None]
    ).astype(np.float64)
    values[:, ~depth.validity] = 0.0
    return MultiplaneMask(values=values, validity=depth.validity.copy())


def fuse_masks(per_neighbour):
    """Average-pool masks predicted from different neighbour views."""
    stacks = list(per_neighbour)
    if not stacks:
        raise ValueError("need at least one mask stack to fuse")
    shape = stacks[0].values.shape
    for m in stacks[1:]:
        if m.values.shape != shape:
            raise ValueError(
                f"mask shape mismatch: {m.values.shape} vs {shape}"
            )
    fused = stacks[0].values.copy()
    for m in stacks[1:]:
        fused += m.values
    fused /= len(stacks)
    validity = stacks[0].validity
    return MultiplaneMask(values=fused, validity=None if validity is None else validity.copy())


def decode_depth_from_masks(mask, planes):
    """Approximate depth by 1-d linear interpolation of the mask profile.

    Per pixel the profile is first made non-decreasing with a running
    maximum, then the crossing of level 0.5 is located and the bracketing
    plane depths are interpolated. Profiles that never reach 0.5 decode to
    the last plane depth; profiles starting at or above 0.5 decode to the
    first plane depth.
    """
    plane_depths = np.asarray(getattr(planes, "depths", planes), dtype=np.float64)
    if len(plane_depths) != mask.planes:
        raise ValueError(
            f"mask has {mask.planes} planes but {len(plane_depths)} depths were given"
        )
    profile = np.maximum.accumulate(mask.values, axis=0)
    d = len(plane_depths)
    above = profile >= 0.5
    first_above = np.where(above.any(axis=0), above.argmax(axis=0), d)
    depths = np.empty(mask.values.shape[1:], dtype=np.float64)
    depths[first_above == d] = plane_depths[-1]
    depths[first_above == 0] = plane_depths[0]
    interior = (first_above > 0) & (first_above < d)
    if interior.any():
        hi_idx = first_above[interior]
        lo_idx = hi_idx - 1
        cols = np.nonzero(interior)
        lo_val = profile[lo_idx, cols[0], cols[1]]
        hi_val = profile[hi_idx, cols[0], cols[1]]
        frac = (0.5 - lo_val) / (hi_val - lo_val)
        depths[interior] = plane_depths[lo_idx] + frac * (
            plane_depths[hi_idx] - plane_depths[lo_idx]
        )
    return DepthMap(values=depths, validity=np.ones_like(depths, dtype=bool))
