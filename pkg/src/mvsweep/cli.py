"""Command-line driver binding the pipeline end to end.

Subcommands: gen-data, sample-planes, build-volume (debug), make-masks
(debug), train, predict, eval, decode-masks. Defaults mirror the standard
configuration: 16 planes, quantile range 0.1..1, Adam betas 0.9/0.999,
batch 4, stage learning rates 2e-4 (masknet) and 1e-4 (dispnet). The
MMVS_SEED environment variable overrides any configured seed.
"""
import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

from mvsweep import formats

DEFAULTS = {
    "planes": 16,
    "theta_min": 0.1,
    "theta_max": 1.0,
    "d_min": 0.5,
    "d_max": 50.0,
    "beta1": 0.9,
    "beta2": 0.999,
    "batch": 4,
    "masknet_lr": 2e-4,
    "dispnet_lr": 1e-4,
    "bins": 200,
    "seed": 0,
}


@dataclass
class RunConfig:
    planes: int = DEFAULTS["planes"]
    theta_min: float = DEFAULTS["theta_min"]
    theta_max: float = DEFAULTS["theta_max"]
    d_min: float = DEFAULTS["d_min"]
    d_max: float = DEFAULTS["d_max"]
    beta1: float = DEFAULTS["beta1"]
    beta2: float = DEFAULTS["beta2"]
    batch: int = DEFAULTS["batch"]
    masknet_lr: float = DEFAULTS["masknet_lr"]
    dispnet_lr: float = DEFAULTS["dispnet_lr"]
    bins: int = DEFAULTS["bins"]
    seed: int = DEFAULTS["seed"]


def resolve_seed(seed):
    env = os.environ.get("MMVS_SEED")
    if env is not None:
        return int(env)
    return seed


def _camera_from_args(args):
    from mvsweep.geometry import CameraModel

    fx = args.focal if args.focal else 1.1 * args.width
    return CameraModel(
        fx=fx, fy=fx, cx=(args.width - 1) / 2.0, cy=(args.height - 1) / 2.0,
        width=args.width, height=args.height,
    )


def _load_dataset(path):
    from mvsweep import evalkit

    if not os.path.isfile(os.path.join(path, "manifest.json")):
        raise SystemExit(f"error: no dataset manifest under {path}")
    return evalkit.load_dataset(path)


def cmd_gen_data(args):
    from mvsweep import evalkit

    seed = resolve_seed(args.seed)
    camera = _camera_from_args(args)
    lo, hi = (float(v) for v in args.depth_range.split(":"))
    specs = evalkit.random_scene_specs(
        args.scenes, seed=seed, camera=camera, depth_range=(lo, hi),
        max_layers=args.max_layers, flat_probability=args.flat_probability,
    )
    motion = evalkit.MotionProfile(
        translation=tuple(float(v) for v in args.motion_translation.split(",")),
        rotation=args.motion_rotation,
    )
    samples = evalkit.build_dataset(specs, camera, motion, neighbours=args.neighbours)
    evalkit.save_dataset(args.out, samples)
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def cmd_sample_planes(args):
    from mvsweep import sampling

    if args.scheme == "inverse":
        if args.planes < 2:
            raise SystemExit("error: inverse-depth sampling needs at least 2 planes")
        planes = sampling.sample_inverse_depth_planes(args.dmin, args.dmax, args.planes)
    else:
        if args.histogram:
            bins, d_max, counts = formats.read_histogram(args.histogram)
            hist = sampling.DepthHistogram(
                bin_edges=np.linspace(0.0, d_max, bins + 1),
                counts=counts,
                total=int(counts.sum()),
            )
        elif args.dataset:
            samples, _ = _load_dataset(args.dataset)
            parts = []
            d_max = args.dmax
            if args.dmax_from_data:
                d_max = max(float(np.nanmax(s.truth.values)) for s in samples)
            for s in samples:
                parts.append(
                    sampling.accumulate_histogram(
                        s.truth.values[s.truth.validity], bins=args.bins, d_max=d_max
                    )
                )
            hist = sampling.merge_histograms(parts)
        else:
            raise SystemExit("error: histogram scheme needs --dataset or --histogram")
        if args.histogram_out:
            formats.write_histogram(args.histogram_out, hist.bins, hist.d_max, hist.counts)
        planes = sampling.sample_histogram_planes(
            sampling.to_cdf(hist), args.planes, args.theta_min, args.theta_max
        )
    formats.write_planes(args.out, planes.depths)
    print(f"wrote {planes.count} {planes.scheme} planes to {args.out}")
    return 0


def cmd_build_volume(args):
    from mvsweep import evalkit
    from mvsweep.geometry import build_warp_volume
    from mvsweep.sampling import PlaneSet

    sample = evalkit.load_sample(args.sample)
    depths = formats.read_planes(args.planes)
    image, pose = sample.neighbours[args.neighbour]
    volume = build_warp_volume(sample.reference, image, sample.camera, pose, PlaneSet(depths))
    formats.write_tensor(args.out, volume.data)
    print(f"wrote warp volume {volume.data.shape} to {args.out}")
    return 0


def cmd_make_masks(args):
    from mvsweep import evalkit
    from mvsweep.masks import make_ground_truth_masks
    from mvsweep.sampling import PlaneSet

    sample = evalkit.load_sample(args.sample)
    depths = formats.read_planes(args.planes)
    mask = make_ground_truth_masks(sample.truth, PlaneSet(depths))
    formats.write_tensor(args.out, mask.values)
    if args.validity_out:
        formats.write_tensor(args.validity_out, mask.validity.astype(np.float32))
    print(f"wrote ground-truth masks {mask.values.shape} to {args.out}")
    return 0


def cmd_decode_masks(args):
    from mvsweep.masks import MultiplaneMask, decode_depth_from_masks
    from mvsweep.sampling import PlaneSet

    values = formats.read_tensor(args.masks).astype(np.float64)
    depths = formats.read_planes(args.planes)
    decoded = decode_depth_from_masks(MultiplaneMask(np.clip(values, 0.0, 1.0)), PlaneSet(depths))
    formats.write_tensor(args.out, decoded.values)
    print(f"wrote decoded depth {decoded.values.shape} to {args.out}")
    return 0


def _network_config(args, camera):
    from mvsweep.neural.networks import NetworkConfig

    return NetworkConfig(
        planes=args.planes,
        base_channels=args.base_channels,
        input_height=camera.height,
        input_width=camera.width,
    )


def cmd_train(args):
    from mvsweep import pipeline, training
    from mvsweep.neural.networks import DispNet, MaskNet
    from mvsweep.sampling import PlaneSet

    seed = resolve_seed(args.seed)
    if args.dump_config:
        config = RunConfig(
            planes=args.planes, beta1=args.beta1, beta2=args.beta2, batch=args.batch,
            masknet_lr=args.masknet_lr, dispnet_lr=args.dispnet_lr, seed=seed,
        )
        print(json.dumps(asdict(config), indent=2, sort_keys=True))
        return 0
    samples, _ = _load_dataset(args.dataset)
    depths = formats.read_planes(args.planes_file)
    if len(depths) != args.planes:
        raise SystemExit(
            f"error: plane file has {len(depths)} planes, config expects {args.planes}"
        )
    planes = PlaneSet(depths)
    camera = samples[0].camera
    config = _network_config(args, camera)
    if args.stage == "masknet":
        model = MaskNet(config, seed=seed)
        arrays = pipeline.mask_training_arrays(samples, planes, config)
        result = training.train_masknet(
            model, arrays, iterations=args.iterations, seed=seed, out_dir=args.out,
            lr=args.masknet_lr, batch_size=args.batch, beta1=args.beta1,
            beta2=args.beta2, checkpoint_every=args.checkpoint_every,
            stop_below=args.stop_below, resume=args.resume,
        )
    else:
        if not args.masknet_checkpoint:
            raise SystemExit("error: dispnet stage requires --masknet-checkpoint")
        masknet = MaskNet(config, seed=seed)
        training.restore_stage_checkpoint(args.masknet_checkpoint, masknet)
        masknet.eval()
        model = DispNet(config, seed=seed + 1)
        arrays = pipeline.disp_training_arrays(samples, planes, masknet, config)
        result = training.train_dispnet(
            model, arrays, iterations=args.iterations, seed=seed, out_dir=args.out,
            weights=config.disp_loss_weights, lr=args.dispnet_lr,
            batch_size=args.batch, beta1=args.beta1, beta2=args.beta2,
            checkpoint_every=args.checkpoint_every, stop_below=args.stop_below,
            resume=args.resume,
        )
    print(f"finished {result['iterations']} iterations; checkpoint {result['checkpoint']}")
    return 0


def cmd_predict(args):
    from mvsweep import evalkit, pipeline, training
    from mvsweep.neural.networks import DispNet, MaskNet, NetworkConfig
    from mvsweep.sampling import PlaneSet

    sample = evalkit.load_sample(args.sample)
    depths = formats.read_planes(args.planes)
    planes = PlaneSet(depths)
    config = NetworkConfig(
        planes=len(depths),
        base_channels=args.base_channels,
        input_height=sample.camera.height,
        input_width=sample.camera.width,
    )
    masknet = MaskNet(config, seed=0)
    training.restore_stage_checkpoint(args.masknet, masknet)
    masknet.eval()
    dispnet = None
    if not args.decode_from_masks:
        if not args.dispnet:
            raise SystemExit("error: predict needs --dispnet unless --decode-from-masks")
        dispnet = DispNet(config, seed=0)
        training.restore_stage_checkpoint(args.dispnet, dispnet)
        dispnet.eval()
    depth_map, fused, floored = pipeline.predict_depth(
        sample, planes, masknet, dispnet, decode_from_masks=args.decode_from_masks
    )
    formats.write_tensor(args.out, depth_map.values)
    if args.dump_masks:
        formats.write_tensor(args.dump_masks, fused)
    if floored:
        print(f"floored {floored} non-positive inverse-depth pixels before inversion")
    print(f"wrote depth {depth_map.values.shape} to {args.out}")
    return 0


def cmd_eval(args):
    from mvsweep import evalkit

    samples, manifest = _load_dataset(args.dataset)
    rows = []
    for entry, sample in zip(manifest["samples"], samples):
        pred_path = os.path.join(args.pred, f"{entry['dir']}.mmvs")
        if not os.path.isfile(pred_path):
            print(f"error: missing prediction for {entry['dir']}", file=sys.stderr)
            return 1
        predicted = formats.read_tensor(pred_path).astype(np.float64)
        report = evalkit.compute_metrics(predicted, sample.truth)
        rows.append((entry["dir"], report))
    print("sample\tl1_rel\tl1_inv\tsc_inv\tvalid_pixels\texcluded_nonpositive")
    for name, report in rows:
        print(
            f"{name}\t{report.l1_rel!r}\t{report.l1_inv!r}\t{report.sc_inv!r}"
            f"\t{report.valid_pixel_count}\t{report.excluded_nonpositive}"
        )
    mean = [
        float(np.mean([r.l1_rel for _, r in rows])),
        float(np.mean([r.l1_inv for _, r in rows])),
        float(np.mean([r.sc_inv for _, r in rows])),
    ]
    total_valid = sum(r.valid_pixel_count for _, r in rows)
    total_excluded = sum(r.excluded_nonpositive for _, r in rows)
    print(f"MEAN\t{mean[0]!r}\t{mean[1]!r}\t{mean[2]!r}\t{total_valid}\t{total_excluded}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mvsweep",
        description="Plane-sweep multi-view depth estimation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--scenes", type=int, default=8)
    g.add_argument("--seed", type=int, default=DEFAULTS["seed"])
    g.add_argument("--neighbours", type=int, default=2)
    g.add_argument("--width", type=int, default=64)
    g.add_argument("--height", type=int, default=48)
    g.add_argument("--focal", type=float, default=0.0, help="fx=fy (default 1.1*width)")
    g.add_argument("--depth-range", default="1.5:6.0")
    g.add_argument("--max-layers", type=int, default=2)
    g.add_argument("--flat-probability", type=float, default=0.25)
    g.add_argument("--motion-translation", default="0.18,0.06,0.06")
    g.add_argument("--motion-rotation", type=float, default=0.015)
    g.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("sample-planes", help="select sweep-plane depths")
    p.add_argument("--scheme", choices=("hist", "inverse"), required=True)
    p.add_argument("--planes", type=int, default=DEFAULTS["planes"])
    p.add_argument("--out", required=True)
    p.add_argument("--dataset")
    p.add_argument("--histogram", help="read a saved depth histogram instead of a dataset")
    p.add_argument("--histogram-out")
    p.add_argument("--bins", type=int, default=DEFAULTS["bins"])
    p.add_argument("--theta-min", type=float, default=DEFAULTS["theta_min"])
    p.add_argument("--theta-max", type=float, default=DEFAULTS["theta_max"])
    p.add_argument("--dmin", type=float, default=DEFAULTS["d_min"])
    p.add_argument("--dmax", type=float, default=DEFAULTS["d_max"])
    p.add_argument("--dmax-from-data", action="store_true",
                   help="histogram scheme: use the dataset's max depth as d_max")
    p.set_defaults(func=cmd_sample_planes)

    b = sub.add_parser("build-volume", help="debug: write one warp volume")
    b.add_argument("--sample", required=True)
    b.add_argument("--planes", required=True)
    b.add_argument("--neighbour", type=int, default=0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_build_volume)

    m = sub.add_parser("make-masks", help="debug: write ground-truth masks")
    m.add_argument("--sample", required=True)
    m.add_argument("--planes", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--validity-out")
    m.set_defaults(func=cmd_make_masks)

    d = sub.add_parser("decode-masks", help="decode depth from a mask tensor file")
    d.add_argument("--masks", required=True)
    d.add_argument("--planes", required=True)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_decode_masks)

    t = sub.add_parser("train", help="train one stage")
    t.add_argument("--stage", choices=("masknet", "dispnet"), required=True)
    t.add_argument("--dataset", required=True)
    t.add_argument("--planes-file", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--iterations", type=int, default=3000)
    t.add_argument("--planes", type=int, default=DEFAULTS["planes"])
    t.add_argument("--base-channels", type=int, default=8)
    t.add_argument("--batch", type=int, default=DEFAULTS["batch"])
    t.add_argument("--masknet-lr", type=float, default=DEFAULTS["masknet_lr"])
    t.add_argument("--dispnet-lr", type=float, default=DEFAULTS["dispnet_lr"])
    t.add_argument("--beta1", type=float, default=DEFAULTS["beta1"])
    t.add_argument("--beta2", type=float, default=DEFAULTS["beta2"])
    t.add_argument("--seed", type=int, default=DEFAULTS["seed"])
    t.add_argument("--checkpoint-every", type=int, default=0)
    t.add_argument("--stop-below", type=float, default=None)
    t.add_argument("--resume", help="continue from a stage checkpoint")
    t.add_argument("--masknet-checkpoint", help="required for the dispnet stage")
    t.add_argument("--dump-config", action="store_true",
                   help="print the resolved configuration as JSON and exit")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="predict depth for one sample")
    pr.add_argument("--sample", required=True)
    pr.add_argument("--planes", required=True)
    pr.add_argument("--masknet", required=True)
    pr.add_argument("--dispnet")
    pr.add_argument("--out", required=True)
    pr.add_argument("--dump-masks")
    pr.add_argument("--decode-from-masks", action="store_true")
    pr.add_argument("--base-channels", type=int, default=8)
    pr.set_defaults(func=cmd_predict)

    e = sub.add_parser("eval", help="evaluate predictions against a dataset")
    e.add_argument("--dataset", required=True)
    e.add_argument("--pred", required=True)
    e.set_defaults(func=cmd_eval)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
