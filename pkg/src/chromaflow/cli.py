"""Command-line front end: synthetic-data generation, staged training, batch
colorization, and launching the HTTP service.

Exit codes: 0 ok, 2 usage, 3 configuration/prerequisite, 4 data mismatch,
5 internal error.
"""

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .checkpoint import init_model_state, load_checkpoint, save_checkpoint
from .colorspace import NEUTRAL_AB, lab_to_rgb
from .errors import ClipLoadError, ConfigurationError, ValidationError
from .flowwarp import FileFlow, GroundTruthFlow, ZeroFlow
from .imageops import resize_plane
from .nets.cpnet import CpnetConfig
from .nets.ssnet import SsnetConfig
from .pipeline import colorize_clip
from .scribble import scribbles_from_json
from .synthdata import SynthSpec, generate_clip, load_clip, save_clip
from .training import (
    MetricReport,
    TrainConfig,
    psnr,
    run_stage,
    ssim,
    temporal_warp_error,
    write_loss_csv,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_DATA = 4
EXIT_INTERNAL = 5


def cmd_synth_data(args):
    with open(args.spec, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    known = {f.name for f in dataclasses.fields(SynthSpec)}
    unknown = set(raw) - known
    if unknown:
        raise ValidationError(f"unknown spec fields: {sorted(unknown)}")
    if "resolution" in raw:
        raw["resolution"] = tuple(raw["resolution"])
    if "palette" in raw:
        raw["palette"] = tuple(tuple(c) for c in raw["palette"])
    clip = generate_clip(SynthSpec(**raw))
    save_clip(clip, args.out)
    print(f"wrote {clip.n_frames} frames at {clip.resolution} to {args.out}")
    return EXIT_OK


def _load_clips(data_dir):
    if os.path.exists(os.path.join(data_dir, "frame_00000.png")):
        return [load_clip(data_dir)]
    clips = []
    for name in sorted(os.listdir(data_dir)):
        sub = os.path.join(data_dir, name)
        if os.path.isdir(sub) and os.path.exists(os.path.join(sub, "frame_00000.png")):
            clips.append(load_clip(sub))
    if not clips:
        raise ClipLoadError(f"{data_dir}: no clip directories found")
    return clips


def cmd_train(args):
    overrides = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            overrides = json.load(fh)
    config = TrainConfig(stage=args.stage, **overrides)

    if args.ckpt_in:
        state = load_checkpoint(args.ckpt_in)
    else:
        if args.stage == "joint":
            raise ConfigurationError("joint stage requires --ckpt-in with completed warm-ups")
        model_cfg = {}
        if args.model_config:
            with open(args.model_config, "r", encoding="utf-8") as fh:
                model_cfg = json.load(fh)
        state = init_model_state(
            CpnetConfig(**model_cfg.get("cpnet", {})),
            SsnetConfig(**model_cfg.get("ssnet", {})),
            seed=config.seed,
        )

    clips = _load_clips(args.data)
    state, curve = run_stage(config, clips, state)
    save_checkpoint(state, args.ckpt_out)
    csv_path = args.loss_csv or os.path.splitext(args.ckpt_out)[0] + "_loss.csv"
    write_loss_csv(csv_path, curve)
    print(f"stage {args.stage}: {len(curve)} steps, final loss {curve[-1][1]:.6f}")
    print(f"checkpoint: {args.ckpt_out}")
    print(f"loss curve: {csv_path}")
    return EXIT_OK


def _has_color_content(clip):
    return any(
        np.abs(clip.ab(t) - NEUTRAL_AB).max() > 2.0 / 255.0 for t in range(clip.n_frames)
    )


def cmd_colorize(args):
    clip = load_clip(args.clip)
    state = load_checkpoint(args.ckpt)
    ratio = args.sr_ratio
    full_hw = clip.resolution
    if full_hw[0] % ratio or full_hw[1] % ratio:
        raise ValidationError(f"clip resolution {full_hw} not divisible by sr-ratio {ratio}")
    low_hw = (full_hw[0] // ratio, full_hw[1] // ratio)

    points, radius = [], 2
    if args.scribbles:
        with open(args.scribbles, "r", encoding="utf-8") as fh:
            points, declared_hw, radius = scribbles_from_json(fh.read())
        if tuple(declared_hw) != low_hw:
            raise ValidationError(
                f"scribble resolution {tuple(declared_hw)} does not match processing "
                f"resolution {low_hw} (clip {full_hw} / sr-ratio {ratio})"
            )

    if args.flow == "zero":
        provider = ZeroFlow(low_hw)
    elif args.flow == "file":
        provider = FileFlow(args.clip)
    else:
        if clip.flows_forward is None:
            raise ConfigurationError(f"{args.clip}: no flow files for --flow gt")
        provider = GroundTruthFlow(clip.flows_forward)

    grays = [clip.gray(t) for t in range(clip.n_frames)]
    result = colorize_clip(
        state, grays, points, provider, sr_ratio=ratio, scribble_radius=radius
    )

    os.makedirs(args.out, exist_ok=True)
    from PIL import Image

    for t, (gray, z) in enumerate(zip(grays, result.z_ab)):
        rgb = np.round(np.clip(lab_to_rgb(gray, z), 0, 1) * 255).astype(np.uint8)
        Image.fromarray(rgb).save(os.path.join(args.out, f"color_{t:05d}.png"))
        seg8 = np.round(np.clip(result.seg[t], 0, 1) * 255).astype(np.uint8)
        Image.fromarray(seg8, mode="L").save(os.path.join(args.out, f"seg_{t:05d}.png"))

    if _has_color_content(clip):
        gt = [clip.ab(t) for t in range(clip.n_frames)]
        flows = clip.flows_forward
        twe = (
            temporal_warp_error(result.z_ab, flows, grays=grays)
            if flows is not None
            else temporal_warp_error(result.z_ab, [np.zeros((*full_hw, 2))] * (clip.n_frames - 1))
        )
        report = MetricReport(
            psnr_db=psnr(np.concatenate(result.z_ab), np.concatenate(gt)),
            ssim=float(np.mean([ssim(z, g) for z, g in zip(result.z_ab, gt)])),
            temporal_warp_error=twe,
            per_frame={
                "psnr_db": [psnr(z, g) for z, g in zip(result.z_ab, gt)],
                "ssim": [ssim(z, g) for z, g in zip(result.z_ab, gt)],
            },
        )
        metrics_path = os.path.join(args.out, "metrics.json")
        with open(metrics_path, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
        print(f"metrics: {metrics_path}")
    print(f"wrote {clip.n_frames} colorized frames to {args.out}")
    return EXIT_OK


def cmd_serve(args):
    import uvicorn

    from .service import create_app

    app = create_app(checkpoint_path=args.ckpt)
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="chromaflow", description="Scribble-driven video colorization toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="generate a synthetic clip with exact flow")
    p.add_argument("--spec", required=True, help="JSON file with clip recipe fields")
    p.add_argument("--out", required=True, help="output clip directory")
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("train", help="run one training stage")
    p.add_argument(
        "--stage",
        required=True,
        choices=["cpnet_warmup", "ssnet_rm_warmup", "ssnet_sr_warmup", "joint"],
    )
    p.add_argument("--data", required=True, help="clip directory or directory of clips")
    p.add_argument("--config", help="JSON file overriding TrainConfig fields")
    p.add_argument("--model-config", help='JSON {"cpnet": {...}, "ssnet": {...}} for fresh models')
    p.add_argument("--ckpt-in", help="checkpoint to continue from")
    p.add_argument("--ckpt-out", required=True, help="checkpoint to write")
    p.add_argument("--loss-csv", help="loss curve CSV path (default: alongside checkpoint)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("colorize", help="colorize a clip directory")
    p.add_argument("--clip", required=True, help="input clip directory")
    p.add_argument("--scribbles", help="scribble JSON for the first frame")
    p.add_argument("--ckpt", required=True, help="model checkpoint")
    p.add_argument("--sr-ratio", type=int, default=2, choices=[2, 4, 8])
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--flow", default="gt", choices=["gt", "zero", "file"])
    p.set_defaults(func=cmd_colorize)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--ckpt", help="model checkpoint to serve")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ClipLoadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
