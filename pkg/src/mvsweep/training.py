"""Two-stage training: mask network first, then disparity with masks frozen.

Each run writes a plain-text loss log (iteration and loss columns; wall
clock goes to a separate timing file so logs stay bit-reproducible),
periodic checkpoints, and a final stage checkpoint. Batch selection is a
pure function of (seed, iteration), which makes resumed runs continue the
exact batch schedule of an unbroken run.
"""
import os
import time

import numpy as np

from mvsweep.neural import tensor as T
from mvsweep.neural.checkpoint import (
    load_checkpoint,
    pack_namespaces,
    save_checkpoint,
    split_namespaces,
)
from mvsweep.neural.losses import bce_mask_loss, multiscale_l1_loss
from mvsweep.neural.optim import Adam
from mvsweep.neural.tensor import Tensor
from mvsweep import pipeline

MASKNET_LR = 2e-4
DISPNET_LR = 1e-4
BATCH_SIZE = 4


def batch_indices(seed, iteration, sample_count, batch_size):
    """Deterministic batch for one iteration; independent of run history."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED, iteration]))
    return rng.integers(0, sample_count, size=batch_size)


class _RunWriter:
    def __init__(self, out_dir, stage):
        os.makedirs(out_dir, exist_ok=True)
        self.out_dir = out_dir
        self.stage = stage
        self.loss_path = os.path.join(out_dir, f"{stage}_loss.log")
        self.timing_path = os.path.join(out_dir, f"{stage}_timing.log")
        self._loss = open(self.loss_path, "w")
        self._timing = open(self.timing_path, "w")
        self._start = time.monotonic()

    def log(self, iteration, *losses):
        cols = "\t".join(repr(float(v)) for v in losses)
        self._loss.write(f"{iteration}\t{cols}\n")
        self._timing.write(f"{iteration}\t{time.monotonic() - self._start:.3f}\n")

    def close(self):
        self._loss.close()
        self._timing.close()

    def checkpoint_path(self, iteration=None):
        if iteration is None:
            return os.path.join(self.out_dir, f"{self.stage}.mmvsckpt")
        return os.path.join(self.out_dir, f"{self.stage}_iter{iteration:06d}.mmvsckpt")


def _save_stage_checkpoint(path, model, optimizer):
    named = pack_namespaces(
        model={k: v.data for k, v in model.parameters().items()},
        state=dict(model.buffers()),
        optim=optimizer.export_state(),
    )
    save_checkpoint(path, named)


def restore_stage_checkpoint(path, model, optimizer=None):
    model_arrays, state_arrays, optim_arrays = split_namespaces(load_checkpoint(path))
    model.load_arrays(model_arrays)
    model.load_arrays(state_arrays)
    if optimizer is not None and optim_arrays:
        optimizer.load_state(optim_arrays)
    return model


def train_masknet(model, arrays, iterations, seed, out_dir, lr=MASKNET_LR,
                  batch_size=BATCH_SIZE, beta1=0.9, beta2=0.999,
                  checkpoint_every=0, stop_below=None, resume=None):
    """Mask-network stage.

    arrays comes from pipeline.mask_training_arrays. The loss sums
    cross-entropy over the four prediction scales with equal weight;
    neighbours are fused (averaged) at the finest scale and supervised
    individually at the coarse scales. The logged columns are the total
    loss and the fused finest-scale cross-entropy.
    """
    volumes = arrays["volumes"]
    gt_scales = arrays["gt"]
    valid_scales = arrays["valid"]
    n_samples, n_neighbours = volumes.shape[:2]
    optimizer = Adam(model.parameters(), lr=lr, beta1=beta1, beta2=beta2)
    if resume:
        restore_stage_checkpoint(resume, model, optimizer)
    writer = _RunWriter(out_dir, "masknet")
    model.train()
    finest = None
    try:
        start = optimizer.step_count + 1
        for iteration in range(start, iterations + 1):
            idx = batch_indices(seed, iteration, n_samples, batch_size)
            outputs = [
                model.forward(Tensor(volumes[idx, j]), training=True)
                for j in range(n_neighbours)
            ]
            fused = outputs[0][-1]
            for branch in outputs[1:]:
                fused = T.add(fused, branch[-1])
            fused = T.mul(fused, 1.0 / n_neighbours)
            finest_loss = bce_mask_loss(fused, gt_scales[-1][idx], valid_scales[-1][idx])
            total = finest_loss
            for level in range(len(gt_scales) - 1):
                for branch in outputs:
                    coarse = bce_mask_loss(
                        branch[level], gt_scales[level][idx], valid_scales[level][idx]
                    )
                    total = T.add(total, T.mul(coarse, 1.0 / n_neighbours))
            optimizer.zero_grad()
            total.backward()
            optimizer.step()
            writer.log(iteration, total.item(), finest_loss.item())
            finest = finest_loss.item()
            if checkpoint_every and iteration % checkpoint_every == 0:
                _save_stage_checkpoint(writer.checkpoint_path(iteration), model, optimizer)
            if stop_below is not None and finest < stop_below:
                break
        _save_stage_checkpoint(writer.checkpoint_path(), model, optimizer)
    finally:
        writer.close()
    return {
        "iterations": optimizer.step_count,
        "final_finest_bce": finest,
        "checkpoint": writer.checkpoint_path(),
        "loss_log": writer.loss_path,
    }


def train_dispnet(model, arrays, iterations, seed, out_dir, weights,
                  lr=DISPNET_LR, batch_size=BATCH_SIZE, beta1=0.9, beta2=0.999,
                  checkpoint_every=0, stop_below=None, resume=None):
    """Disparity stage: multi-scale L1 on inverse depth against fixed inputs.

    arrays comes from pipeline.disp_training_arrays (mask network already
    applied in inference mode). Logs a single loss column.
    """
    inputs = arrays["inputs"]
    truth_inverse = arrays["truth_inverse"]
    valid = arrays["valid"]
    n_samples = inputs.shape[0]
    optimizer = Adam(model.parameters(), lr=lr, beta1=beta1, beta2=beta2)
    if resume:
        restore_stage_checkpoint(resume, model, optimizer)
    writer = _RunWriter(out_dir, "dispnet")
    model.train()
    last = None
    try:
        start = optimizer.step_count + 1
        for iteration in range(start, iterations + 1):
            idx = batch_indices(seed, iteration, n_samples, batch_size)
            outputs = model.forward(Tensor(inputs[idx]), training=True)
            loss = multiscale_l1_loss(outputs, truth_inverse[idx], valid[idx], weights)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            writer.log(iteration, loss.item())
            last = loss.item()
            if checkpoint_every and iteration % checkpoint_every == 0:
                _save_stage_checkpoint(writer.checkpoint_path(iteration), model, optimizer)
            if stop_below is not None and last < stop_below:
                break
        _save_stage_checkpoint(writer.checkpoint_path(), model, optimizer)
    finally:
        writer.close()
    return {
        "iterations": optimizer.step_count,
        "final_loss": last,
        "checkpoint": writer.checkpoint_path(),
        "loss_log": writer.loss_path,
    }
