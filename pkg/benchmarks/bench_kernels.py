#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the three hot kernels at training shapes (the first conv layer of
the mask network dominates) and one full forward/backward of the mask
network per backend. Run:

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import os
import time

import numpy as np

from mvsweep.kernels import available_backends, get_backend


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((8, 51, 48, 64)).astype(np.float32)
    img = rng.random((3, 240, 320))
    hmat = np.array([[0.98, 0.01, 1.5], [-0.01, 1.01, -0.8], [1e-4, 0.0, 1.0]])
    rows = []
    backends = {name: get_backend(name) for name in available_backends()}
    cols_shape = None
    for name, k in backends.items():
        cols = k.im2col(x, 7, 7, 2, 3, 3)
        cols_shape = cols.shape
        g = rng.standard_normal(cols.shape).astype(np.float32)
        rows.append(
            (
                name,
                timeit(lambda: k.im2col(x, 7, 7, 2, 3, 3), repeat),
                timeit(lambda: k.col2im(g, 48, 64, 7, 7, 2, 3, 3), repeat),
                timeit(lambda: k.warp_bilinear(img, hmat), repeat),
            )
        )
    print(f"# kernel timings (best of {repeat}); im2col/col2im on {x.shape} -> {cols_shape}")
    print(f"{'backend':<8} {'im2col':>10} {'col2im':>10} {'warp 320x240':>14}")
    for name, a, b, c in rows:
        print(f"{name:<8} {a * 1e3:9.2f}ms {b * 1e3:9.2f}ms {c * 1e3:13.2f}ms")
    return rows


def bench_training_step(repeat):
    from mvsweep.neural.losses import bce_mask_loss
    from mvsweep.neural.networks import MaskNet, NetworkConfig
    from mvsweep.neural.tensor import Tensor

    results = []
    for name in available_backends():
        os.environ["MMVS_BACKEND"] = name
        import importlib

        import mvsweep.kernels
        import mvsweep.neural.layers

        importlib.reload(mvsweep.kernels)
        importlib.reload(mvsweep.neural.layers)

        cfg = NetworkConfig(planes=16, base_channels=8, input_height=48, input_width=64)
        net = MaskNet(cfg, seed=0)
        rng = np.random.default_rng(1)
        volume = rng.random((4, cfg.volume_channels, 48, 64)).astype(np.float32)
        truth = (rng.random((4, 16, 48, 64)) > 0.5).astype(np.float32)
        validity = np.ones((4, 48, 64), dtype=bool)

        def step():
            outputs = net.forward(Tensor(volume), training=True)
            loss = bce_mask_loss(outputs[-1], truth, validity)
            net.zero_grad()
            loss.backward()

        step()  # warm-up
        results.append((name, timeit(step, repeat)))
    os.environ.pop("MMVS_BACKEND", None)
    print(f"\n# mask network forward+backward, batch 4 (best of {repeat})")
    for name, t in results:
        print(f"{name:<8} {t * 1e3:9.1f}ms")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    bench_kernels(args.repeat)
    bench_training_step(args.repeat)


if __name__ == "__main__":
    main()
