"""The two encoder-decoder networks.

MaskNet turns a warp volume (reference RGB + one warped RGB slab per
plane) into per-plane surface masks at four scales. DispNet turns fused
masks plus the reference image into inverse-depth maps at six scales.
Both use stride-2 conv encoders with decreasing kernel sizes and
skip-connected decoders; upsampling is nearest-neighbour + 3x3 conv.

Channel widths follow base_channels * (1, 2, 4, 8, 8[, 8]); encoder
stages beyond the predicted scales may produce odd sizes, which the
decoder crops back into alignment with its skip connections.
"""
from dataclasses import dataclass

import numpy as np

from mvsweep.neural import tensor as T
from mvsweep.neural.layers import Conv2d, ConvBlock, UpBlock


@dataclass
class NetworkConfig:
    planes: int = 16
    base_channels: int = 8
    input_height: int = 48
    input_width: int = 64
    mask_scales: int = 4
    disp_scales: int = 6
    disp_loss_weights: tuple = None  # finest last; defaults to 0.1,...,0.1,0.5

    def __post_init__(self):
        if self.planes < 1:
            raise ValueError("need at least one plane")
        if self.mask_scales != 4 or self.disp_scales != 6:
            raise ValueError("this architecture predicts 4 mask scales and 6 disparity scales")
        for name, size in (("height", self.input_height), ("width", self.input_width)):
            if size % 8 != 0 or size < 16:
                raise ValueError(f"input {name} must be a multiple of 8 and at least 16, got {size}")
        if self.disp_loss_weights is None:
            self.disp_loss_weights = tuple([0.1] * (self.disp_scales - 1) + [0.5])
        if len(self.disp_loss_weights) != self.disp_scales:
            raise ValueError("need one loss weight per disparity scale")

    @property
    def volume_channels(self):
        return 3 * (1 + self.planes)

    @property
    def disp_input_channels(self):
        return 3 + self.planes


class _Network:
    """Shared bookkeeping: named layers, parameters, buffers, train mode."""

    def __init__(self):
        self._layers = {}
        self.training = True

    def _register(self, name, layer):
        self._layers[name] = layer
        return layer

    def parameters(self):
        named = {}
        for prefix, layer in self._layers.items():
            for key, param in layer.parameters().items():
                named[f"{prefix}.{key}"] = param
        return named

    def buffers(self):
        named = {}
        for prefix, layer in self._layers.items():
            for key, buf in layer.buffers().items():
                named[f"{prefix}.{key}"] = buf
        return named

    def train(self, mode=True):
        self.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for param in self.parameters().values():
            param.zero_grad()

    def load_arrays(self, named):
        """Copy parameter/buffer values in from plain arrays by name."""
        params = self.parameters()
        buffers = self.buffers()
        for name, value in named.items():
            if name in params:
                target = params[name].data
            elif name in buffers:
                target = buffers[name]
            else:
                raise KeyError(f"checkpoint tensor {name!r} does not exist in this network")
            if tuple(target.shape) != tuple(value.shape):
                raise ValueError(
                    f"checkpoint tensor {name!r} has shape {value.shape}, "
                    f"network expects {tuple(target.shape)}"
                )
            target[...] = value

    def export_arrays(self):
        named = {name: p.data for name, p in self.parameters().items()}
        named.update({name: b for name, b in self.buffers().items()})
        return named


class MaskNet(_Network):
    """Warp volume -> per-plane masks at four scales (finest last)."""

    ENCODER_KERNELS = (7, 5, 3, 3, 3)
    WIDTH_FACTORS = (1, 2, 4, 8, 8)

    def __init__(self, config, seed=0, dtype=np.float32):
        super().__init__()
        self.config = config
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        b = config.base_channels
        widths = [b * f for f in self.WIDTH_FACTORS]
        in_ch = config.volume_channels
        self.encoder = []
        for i, (k, cout) in enumerate(zip(self.ENCODER_KERNELS, widths)):
            block = ConvBlock(in_ch, cout, k, 2, rng, "relu", True, dtype)
            self.encoder.append(self._register(f"enc{i + 1}", block))
            in_ch = cout
        e1, e2, e3, e4, e5 = widths
        self.dec4 = self._register("dec4", UpBlock(e5, e4, rng, "relu", True, dtype))
        self.dec3 = self._register("dec3", UpBlock(e4 + e4, e3, rng, "relu", True, dtype))
        self.dec2 = self._register("dec2", UpBlock(e3 + e3, e2, rng, "relu", True, dtype))
        self.dec1 = self._register("dec1", UpBlock(e2 + e2, e1, rng, "relu", True, dtype))
        self.dec0 = self._register("dec0", UpBlock(e1 + e1, e1, rng, "relu", True, dtype))
        head_inputs = (e3 + e3, e2 + e2, e1 + e1, e1)
        self.heads = []
        for scale, cin in enumerate(head_inputs):
            head = Conv2d(cin, config.planes, 3, 1, rng, dtype, zero_init=True)
            self.heads.append(self._register(f"head{scale}", head))

    def forward(self, volume, training=None):
        """volume: Tensor (n, 3*(1+D), h, w). Returns 4 mask tensors, finest last."""
        if training is None:
            training = self.training
        if volume.data.shape[1] != self.config.volume_channels:
            raise ValueError(
                f"volume has {volume.data.shape[1]} channels, config with "
                f"D={self.config.planes} expects {self.config.volume_channels}"
            )
        skips = []
        h = volume
        for block in self.encoder:
            h = block(h, training)
            skips.append(h)
        e1, e2, e3, e4, e5 = skips
        d4 = _crop_to(self.dec4(e5, training), e4)
        f4 = T.concat([d4, e4], axis=1)
        d3 = _crop_to(self.dec3(f4, training), e3)
        f3 = T.concat([d3, e3], axis=1)
        d2 = _crop_to(self.dec2(f3, training), e2)
        f2 = T.concat([d2, e2], axis=1)
        d1 = _crop_to(self.dec1(f2, training), e1)
        f1 = T.concat([d1, e1], axis=1)
        d0 = _crop_to(self.dec0(f1, training), volume)
        features = (f3, f2, f1, d0)
        return [T.sigmoid(head(feat)) for head, feat in zip(self.heads, features)]

    __call__ = forward


class DispNet(_Network):
    """Fused masks + reference image -> inverse depth at six scales (finest last)."""

    ENCODER_KERNELS = (7, 5, 3, 3, 3, 3)
    WIDTH_FACTORS = (1, 2, 4, 8, 8, 8)

    def __init__(self, config, seed=0, dtype=np.float32):
        super().__init__()
        self.config = config
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        b = config.base_channels
        widths = [b * f for f in self.WIDTH_FACTORS]
        in_ch = config.disp_input_channels
        self.encoder = []
        for i, (k, cout) in enumerate(zip(self.ENCODER_KERNELS, widths)):
            block = ConvBlock(in_ch, cout, k, 2, rng, "leaky_relu", True, dtype)
            self.encoder.append(self._register(f"enc{i + 1}", block))
            in_ch = cout
        e1, e2, e3, e4, e5, e6 = widths
        # deconv stages carry LeakyReLU without batchnorm
        self.dec5 = self._register("dec5", UpBlock(e6, e5, rng, "leaky_relu", False, dtype))
        self.dec4 = self._register("dec4", UpBlock(e5 + e5, e4, rng, "leaky_relu", False, dtype))
        self.dec3 = self._register("dec3", UpBlock(e4 + e4, e3, rng, "leaky_relu", False, dtype))
        self.dec2 = self._register("dec2", UpBlock(e3 + e3, e2, rng, "leaky_relu", False, dtype))
        self.dec1 = self._register("dec1", UpBlock(e2 + e2, e1, rng, "leaky_relu", False, dtype))
        self.dec0 = self._register("dec0", UpBlock(e1 + e1, e1, rng, "leaky_relu", False, dtype))
        head_inputs = (
            e5 + e5,
            e4 + e4,
            e3 + e3,
            e2 + e2,
            e1 + e1,
            e1 + config.disp_input_channels,
        )
        self.heads = []
        for scale, cin in enumerate(head_inputs):
            head = Conv2d(cin, 1, 3, 1, rng, dtype, bias_fill=0.5)
            self.heads.append(self._register(f"head{scale}", head))

    def forward(self, x, training=None):
        """x: Tensor (n, 3+D, h, w). Returns 6 inverse-depth tensors, finest last."""
        if training is None:
            training = self.training
        if x.data.shape[1] != self.config.disp_input_channels:
            raise ValueError(
                f"input has {x.data.shape[1]} channels, config with "
                f"D={self.config.planes} expects {self.config.disp_input_channels}"
            )
        skips = []
        h = x
        for block in self.encoder:
            h = block(h, training)
            skips.append(h)
        e1, e2, e3, e4, e5, e6 = skips
        d5 = _crop_to(self.dec5(e6, training), e5)
        f5 = T.concat([d5, e5], axis=1)
        d4 = _crop_to(self.dec4(f5, training), e4)
        f4 = T.concat([d4, e4], axis=1)
        d3 = _crop_to(self.dec3(f4, training), e3)
        f3 = T.concat([d3, e3], axis=1)
        d2 = _crop_to(self.dec2(f3, training), e2)
        f2 = T.concat([d2, e2], axis=1)
        d1 = _crop_to(self.dec1(f2, training), e1)
        f1 = T.concat([d1, e1], axis=1)
        d0 = _crop_to(self.dec0(f1, training), x)
        f0 = T.concat([d0, x], axis=1)
        features = (f5, f4, f3, f2, f1, f0)
        return [T.relu(head(feat)) for head, feat in zip(self.heads, features)]

    __call__ = forward


def _crop_to(t, reference):
    rh, rw = reference.data.shape[2], reference.data.shape[3]
    if t.data.shape[2] == rh and t.data.shape[3] == rw:
        return t
    return T.crop2d(t, rh, rw)
