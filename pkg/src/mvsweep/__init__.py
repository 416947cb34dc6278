"""Plane-sweep multi-view depth estimation toolkit.

Pipeline: depth-plane sampling (histogram-matched or inverse-depth), warp
volume construction from posed image pairs, a multiplane mask network, and
a disparity regression network, plus a synthetic-scene generator with
analytic ground truth for end-to-end verification.
"""

__version__ = "0.1.0"
