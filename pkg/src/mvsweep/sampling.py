"""Depth-plane selection.

Two samplers: histogram-matched planes placed at uniform quantiles of a
dataset's depth distribution, and planes spaced uniformly in inverse depth
between fixed bounds. The histogram uses equal-width bins over [0, d_max],
half-open [edge_k, edge_{k+1}) with the final bin closed; values above
d_max clamp into the last bin so the CDF reaches one.
"""
from dataclasses import dataclass, field

import numpy as np

DEFAULT_BINS = 200
DEFAULT_THETA_MIN = 0.1
DEFAULT_THETA_MAX = 1.0

PLANE_SCHEMES = ("histogram", "inverse_depth", "explicit")


@dataclass
class DepthHistogram:
    """Equal-width depth histogram over [0, d_max].

    skipped counts non-finite or non-positive input values, which carry no
    depth information and are excluded from the density.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    total: int
    skipped: int = 0

    def __post_init__(self):
        self.bin_edges = np.asarray(self.bin_edges, dtype=np.float64)
        self.counts = np.asarray(self.counts, dtype=np.uint64)
        if len(self.bin_edges) != len(self.counts) + 1:
            raise ValueError("histogram needs B+1 edges for B counts")
        if np.any(np.diff(self.bin_edges) <= 0):
            raise ValueError("histogram bin edges must be strictly increasing")
        if int(self.counts.sum()) != self.total:
            raise ValueError("histogram total does not match sum of counts")

    @property
    def bins(self):
        return len(self.counts)

    @property
    def d_max(self):
        return float(self.bin_edges[-1])


@dataclass
class CumulativeDensity:
    """Normalized cumulative histogram anchored at every bin edge.

    support[0] is the left edge of the first bin with cdf 0; support[k]
    carries the cumulative mass up to and including bin k-1.
    """

    support: np.ndarray
    cdf: np.ndarray

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=np.float64)
        self.cdf = np.asarray(self.cdf, dtype=np.float64)
        if self.support.shape != self.cdf.shape:
            raise ValueError("support and cdf must have matching lengths")
        if np.any(np.diff(self.cdf) < 0):
            raise ValueError("cdf must be non-decreasing")
        if abs(self.cdf[-1] - 1.0) > 1e-12:
            raise ValueError(f"cdf must end at 1, got {self.cdf[-1]!r}")


@dataclass
class PlaneSet:
    """Ordered sweep-plane depths plus the scheme that produced them."""

    depths: np.ndarray
    scheme: str = "explicit"

    def __post_init__(self):
        self.depths = np.asarray(self.depths, dtype=np.float64)
        if self.depths.ndim != 1 or len(self.depths) < 1:
            raise ValueError("plane set needs at least one depth")
        if self.depths[0] <= 0:
            raise ValueError("plane depths must be positive")
        if np.any(np.diff(self.depths) <= 0):
            raise ValueError("plane depths must be strictly increasing")
        if self.scheme not in PLANE_SCHEMES:
            raise ValueError(f"unknown plane scheme {self.scheme!r}")

    @property
    def count(self):
        return len(self.depths)


def accumulate_histogram(depth_values, bins=DEFAULT_BINS, d_max=None):
    """Bin a stream of depth values into an equal-width histogram.

    Non-finite and non-positive values are skipped (tallied in .skipped).
    Values above d_max clamp into the last bin.
    """
    if bins < 2:
        raise ValueError(f"need at least 2 bins, got {bins}")
    if d_max is None or d_max <= 0:
        raise ValueError(f"d_max must be positive, got {d_max}")
    values = np.asarray(depth_values, dtype=np.float64).ravel()
    usable = np.isfinite(values) & (values > 0)
    skipped = int(len(values) - usable.sum())
    values = values[usable]
    if len(values) == 0:
        raise ValueError("no usable depth values: cannot form a density")
    width = d_max / bins
    idx = np.minimum(np.floor(values / width).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins).astype(np.uint64)
    edges = np.linspace(0.0, d_max, bins + 1)
    return DepthHistogram(bin_edges=edges, counts=counts, total=int(len(values)), skipped=skipped)


def merge_histograms(parts):
    """Combine partial histograms built over disjoint shards.

    Element-wise count addition; bit-identical to accumulating the shards
    sequentially, so shard-parallel accumulation is safe.
    """
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to merge")
    first = parts[0]
    counts = first.counts.copy()
    skipped = first.skipped
    for h in parts[1:]:
        if h.bins != first.bins or h.bin_edges[-1] != first.bin_edges[-1]:
            raise ValueError("histograms have mismatched binning")
        counts += h.counts
        skipped += h.skipped
    return DepthHistogram(
        bin_edges=first.bin_edges.copy(),
        counts=counts,
        total=int(counts.sum()),
        skipped=skipped,
    )


def to_cdf(histogram):
    """Normalized cumulative histogram; cdf[k] is the mass at the right edge of bin k-1."""
    if histogram.total <= 0:
        raise ValueError("histogram is empty")
    cumulative = np.cumsum(histogram.counts.astype(np.float64)) / histogram.total
    cumulative[-1] = 1.0
    cdf = np.concatenate(([0.0], cumulative))
    return CumulativeDensity(support=histogram.bin_edges.copy(), cdf=cdf)


def _inverse_cdf(density, thetas):
    """Evaluate the inverse CDF by linear interpolation between bin edges."""
    support = density.support
    cdf = density.cdf
    thetas = np.asarray(thetas, dtype=np.float64)
    depths = np.empty_like(thetas)
    for i, theta in enumerate(thetas):
        if theta <= 0.0:
            k = int(np.searchsorted(cdf, 0.0, side="right"))
            depths[i] = support[k - 1]
            continue
        k = int(np.searchsorted(cdf, theta, side="left"))
        span = cdf[k] - cdf[k - 1]
        frac = (theta - cdf[k - 1]) / span
        depths[i] = support[k - 1] + frac * (support[k] - support[k - 1])
    return depths


def sample_histogram_planes(density, count, theta_min=DEFAULT_THETA_MIN,
                            theta_max=DEFAULT_THETA_MAX):
    """Place planes at uniform quantiles theta_i of the depth distribution.

    theta_i = theta_min + (theta_max - theta_min) * i / count for
    i in {0, ..., count-1}, so theta_max itself is never sampled. Exact
    duplicate depths (quantiles collapsing into one point mass) are nudged
    by the minimal float spacing to restore strict monotonicity.
    """
    if count < 1:
        raise ValueError(f"need at least one plane, got {count}")
    if not (0.0 <= theta_min < theta_max <= 1.0):
        raise ValueError(
            f"need 0 <= theta_min < theta_max <= 1, got {theta_min}, {theta_max}"
        )
    thetas = theta_min + (theta_max - theta_min) * np.arange(count) / count
    depths = _inverse_cdf(density, thetas)
    for i in range(1, count):
        if depths[i] <= depths[i - 1]:
            depths[i] = np.nextafter(depths[i - 1], np.inf)
    if depths[0] <= 0 or not np.isfinite(depths).all():
        raise ValueError("degenerate cumulative density: quantiles do not map to positive depths")
    return PlaneSet(depths=depths, scheme="histogram")


def sample_inverse_depth_planes(d_min, d_max, count):
    """Planes spaced uniformly in inverse depth over [d_min, d_max].

    1/d_i = (1/d_min - 1/d_max) * i/(count-1) + 1/d_max generates depths
    descending in i; the returned set is sorted ascending and hits both
    endpoints exactly.
    """
    if not (0 < d_min < d_max):
        raise ValueError(f"need 0 < d_min < d_max, got {d_min}, {d_max}")
    if count < 2:
        raise ValueError(f"inverse-depth sampling needs at least 2 planes, got {count}")
    inverse = np.linspace(1.0 / d_max, 1.0 / d_min, count)
    depths = (1.0 / inverse)[::-1].copy()
    return PlaneSet(depths=depths, scheme="inverse_depth")
