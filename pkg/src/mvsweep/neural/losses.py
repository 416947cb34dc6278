"""Training objectives.

Mask loss: pixel-wise binary cross-entropy between predicted and ground
truth masks, averaged over valid pixel-plane cells. Depth loss: weighted
sum over scales of the mean absolute error in inverse depth over valid
pixels; ground truth is downsampled by valid-pixel block averaging.
"""
import numpy as np

from mvsweep.neural import tensor as T

PROB_EPS = 1e-7


def bce_mask_loss(predicted, truth, validity):
    """Masked binary cross-entropy, mean over valid pixel-plane cells.

    predicted: Tensor (n, d, h, w) with values in (0, 1), clamped to
    [1e-7, 1 - 1e-7]. truth: binary array of the same shape. validity:
    bool array (n, h, w); invalid pixels contribute nothing.
    """
    truth = np.asarray(truth)
    validity = np.asarray(validity, dtype=bool)
    n, d, h, w = predicted.data.shape
    if truth.shape != (n, d, h, w):
        raise ValueError(f"truth shape {truth.shape} does not match prediction {(n, d, h, w)}")
    if validity.shape != (n, h, w):
        raise ValueError(f"validity shape {validity.shape} must be {(n, h, w)}")
    cells = int(validity.sum()) * d
    if cells == 0:
        raise ValueError("no valid cells: cannot compute mask loss")
    dtype = predicted.data.dtype
    y = truth.astype(dtype)
    v = validity[:, None, :, :].astype(dtype)
    p = T.clip(predicted, PROB_EPS, 1.0 - PROB_EPS)
    log_p = T.log(p)
    log_not_p = T.log(T.sub(1.0, p))
    term = T.add(T.mul(log_p, y), T.mul(log_not_p, (1.0 - y)))
    total = T.tsum(T.mul(term, v))
    return T.mul(T.neg(total), 1.0 / cells)


def block_mean_valid(values, validity, out_h, out_w):
    """Average values over valid pixels inside adaptive blocks.

    Partitions the (n, h, w) grid into out_h x out_w blocks (sizes differ
    by at most one when shapes do not divide evenly). Returns the
    per-block valid-pixel mean (zero where empty) and the block validity.
    """
    values = np.asarray(values, dtype=np.float64)
    validity = np.asarray(validity, dtype=bool)
    n, h, w = values.shape
    row_edges = (np.arange(out_h) * h) // out_h
    col_edges = (np.arange(out_w) * w) // out_w
    masked = np.where(validity, values, 0.0)
    sums = np.add.reduceat(np.add.reduceat(masked, row_edges, axis=1), col_edges, axis=2)
    counts = np.add.reduceat(
        np.add.reduceat(validity.astype(np.float64), row_edges, axis=1), col_edges, axis=2
    )
    out_valid = counts > 0
    means = np.where(out_valid, sums / np.maximum(counts, 1.0), 0.0)
    return means, out_valid


def downsample_binary_masks(mask_values, validity, out_h, out_w):
    """Majority vote of valid pixels per block; ties round up to one."""
    d = mask_values.shape[0]
    votes = np.empty((d, out_h, out_w), dtype=np.float64)
    block_valid = None
    for i in range(d):
        means, block_valid = block_mean_valid(mask_values[i][None], validity[None], out_h, out_w)
        votes[i] = (means[0] >= 0.5).astype(np.float64)
        votes[i][~block_valid[0]] = 0.0
    return votes, block_valid[0]


def multiscale_l1_loss(predictions, truth_inverse, validity, weights):
    """Weighted mean absolute inverse-depth error summed over scales.

    predictions: list of Tensors (n, 1, h_s, w_s), finest last, matching
    the order of weights. truth_inverse: (n, h, w) inverse depth at the
    finest resolution; validity: (n, h, w) bool.
    """
    if len(predictions) != len(weights):
        raise ValueError(f"{len(predictions)} predictions but {len(weights)} weights")
    truth_inverse = np.asarray(truth_inverse, dtype=np.float64)
    validity = np.asarray(validity, dtype=bool)
    n, h, w = truth_inverse.shape
    finest = predictions[-1]
    if finest.data.shape[2] != h or finest.data.shape[3] != w:
        raise ValueError(
            f"finest prediction is {finest.data.shape[2]}x{finest.data.shape[3]}, "
            f"truth is {h}x{w}"
        )
    if not validity.any():
        raise ValueError("no valid pixels at the finest scale")
    total = None
    for pred, weight in zip(predictions, weights):
        dtype = pred.data.dtype
        ph, pw = pred.data.shape[2], pred.data.shape[3]
        if (ph, pw) == (h, w):
            target, target_valid = np.where(validity, truth_inverse, 0.0), validity
        else:
            target, target_valid = block_mean_valid(truth_inverse, validity, ph, pw)
        count = int(target_valid.sum())
        if count == 0:
            continue
        v = target_valid[:, None, :, :].astype(dtype)
        y = target[:, None, :, :].astype(dtype)
        diff = T.absolute(T.sub(pred, y))
        term = T.mul(T.tsum(T.mul(diff, v)), weight / count)
        total = term if total is None else T.add(total, term)
    return total
