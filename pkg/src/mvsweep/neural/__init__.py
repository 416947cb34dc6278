"""Minimal reverse-mode autodiff engine plus the two sweep networks.

tensor: the Tensor class and differentiable primitives.
layers: convolution / batchnorm / resampling ops and layer containers.
networks: the mask prediction and disparity regression architectures.
losses: masked cross-entropy and multi-scale L1 objectives.
optim: Adam with bias correction.
checkpoint: binary parameter/optimizer serialization.
"""

from mvsweep.neural.tensor import Tensor, no_grad  # noqa: F401
