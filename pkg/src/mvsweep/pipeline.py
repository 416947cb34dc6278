"""End-to-end glue: precomputed training arrays and inference.

Warp volumes and ground-truth targets depend only on (sample, planes), so
they are built once up front; the training loops then touch numpy arrays
and the networks only.
"""
import numpy as np

from mvsweep.geometry import build_warp_volume
from mvsweep.masks import DepthMap, MultiplaneMask, decode_depth_from_masks, make_ground_truth_masks
from mvsweep.neural import tensor as T
from mvsweep.neural.losses import block_mean_valid, downsample_binary_masks
from mvsweep.neural.tensor import Tensor, no_grad

PREDICTION_INVERSE_FLOOR = 1e-6


def sample_volumes(sample, planes, dtype=np.float32):
    """Warp volume per neighbour view, stacked (n_nbr, 3(1+D), h, w)."""
    volumes = [
        build_warp_volume(sample.reference, image, sample.camera, pose, planes).data
        for image, pose in sample.neighbours
    ]
    return np.stack(volumes).astype(dtype)


def mask_training_arrays(samples, planes, config, dtype=np.float32):
    """Everything the mask-network trainer consumes, ground truth included.

    Ground-truth masks are produced at the finest scale and downsampled to
    the coarser prediction scales by majority vote over valid pixels.
    Returns a dict of stacked arrays; scale lists run coarse to fine.
    """
    h, w = config.input_height, config.input_width
    scale_shapes = [(h >> s, w >> s) for s in range(config.mask_scales - 1, -1, -1)]
    volumes = []
    gt_scales = [[] for _ in scale_shapes]
    valid_scales = [[] for _ in scale_shapes]
    for sample in samples:
        if (sample.camera.height, sample.camera.width) != (h, w):
            raise ValueError(
                f"sample is {sample.camera.width}x{sample.camera.height}, "
                f"config expects {w}x{h}"
            )
        volumes.append(sample_volumes(sample, planes, dtype))
        gt = make_ground_truth_masks(sample.truth, planes)
        for level, (sh, sw) in enumerate(scale_shapes):
            if (sh, sw) == (h, w):
                gt_scales[level].append(gt.values.astype(dtype))
                valid_scales[level].append(gt.validity)
            else:
                votes, block_valid = downsample_binary_masks(gt.values, gt.validity, sh, sw)
                gt_scales[level].append(votes.astype(dtype))
                valid_scales[level].append(block_valid)
    return {
        "volumes": np.stack(volumes),
        "gt": [np.stack(g) for g in gt_scales],
        "valid": [np.stack(v) for v in valid_scales],
    }


def fused_masks_for_sample(masknet, sample, planes, dtype=np.float32):
    """Inference-mode mask prediction averaged over all neighbours (finest scale)."""
    volumes = sample_volumes(sample, planes, dtype)
    with no_grad():
        outputs = [
            masknet.forward(Tensor(volumes[j][None]), training=False)[-1].data[0]
            for j in range(volumes.shape[0])
        ]
    fused = outputs[0].copy()
    for other in outputs[1:]:
        fused += other
    fused /= len(outputs)
    return fused.astype(dtype)


def disp_training_arrays(samples, planes, masknet, config, dtype=np.float32):
    """Inputs and targets for the disparity trainer (mask network frozen)."""
    inputs = []
    truth_inv = []
    validity = []
    for sample in samples:
        fused = fused_masks_for_sample(masknet, sample, planes, dtype)
        reference = sample.reference.data.astype(dtype)
        inputs.append(np.concatenate([reference, fused], axis=0))
        valid = sample.truth.validity
        inv = np.where(valid, 1.0 / np.where(valid, sample.truth.values, 1.0), 0.0)
        truth_inv.append(inv)
        validity.append(valid)
    return {
        "inputs": np.stack(inputs),
        "truth_inverse": np.stack(truth_inv),
        "valid": np.stack(validity),
    }


def predict_depth(sample, planes, masknet, dispnet=None, decode_from_masks=False):
    """Full-pipeline depth for one sample.

    Runs the mask network per neighbour, fuses by averaging, then either
    regresses inverse depth (finest scale, floored at 1e-6 before
    inversion) or decodes depth directly from the fused mask profile.

    Returns (DepthMap, fused mask array, floored pixel count).
    """
    fused = fused_masks_for_sample(masknet, sample, planes).astype(np.float64)
    fused = np.clip(fused, 0.0, 1.0)
    if decode_from_masks:
        decoded = decode_depth_from_masks(MultiplaneMask(fused), planes)
        return decoded, fused, 0
    if dispnet is None:
        raise ValueError("need a disparity network unless decoding from masks")
    x = np.concatenate([sample.reference.data, fused], axis=0).astype(np.float32)
    with no_grad():
        inverse = dispnet.forward(Tensor(x[None]), training=False)[-1].data[0, 0]
    inverse = inverse.astype(np.float64)
    floored = int((inverse < PREDICTION_INVERSE_FLOOR).sum())
    depth = 1.0 / np.maximum(inverse, PREDICTION_INVERSE_FLOOR)
    depth_map = DepthMap(values=depth, validity=np.ones_like(depth, dtype=bool))
    return depth_map, fused, floored


def downsampled_truth(truth_inverse, validity, shapes):
    """Valid-pixel mean pooling of inverse depth to each loss scale."""
    return [block_mean_valid(truth_inverse, validity, sh, sw) for sh, sw in shapes]
