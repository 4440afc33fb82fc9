"""Command-line surface: reproducible pipelines over the library modules.

Every output-producing command writes a JSON manifest next to its primary
output (path + ".manifest.json") recording the command, tool version, seed,
inputs, parameters, and the SHA-256 of each emitted file. Exit codes are
stable: 0 success, 1 data error ("ERROR <code>: <message>" on stderr),
2 usage error. LUXPROBE_THREADS caps internal parallelism (0 = auto).
"""

import argparse
import concurrent.futures
import datetime
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import fusion, metrics, probes, projection, tonemap
from .envmap import EnvironmentMap, peak_direction, rotate_env
from .imgio import read_hdr, read_pfm, read_png, write_pfm, write_png

COMMANDS = (
    "crop", "dataset-gen", "tonemap", "inverse", "fuse-train", "fuse-apply",
    "render-probes", "eval", "eval-video", "peak", "rotate",
)


def thread_limit() -> int:
    """Worker cap from LUXPROBE_THREADS (0 or unset = auto)."""
    raw = os.environ.get("LUXPROBE_THREADS", "0")
    try:
        val = int(raw)
    except ValueError as exc:
        raise ValueError(f"LUXPROBE_THREADS must be an integer, got {raw!r}") from exc
    if val < 0:
        raise ValueError("LUXPROBE_THREADS must be >= 0")
    return val if val > 0 else (os.cpu_count() or 1)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(command: str, primary_out, seed: int, inputs: dict,
                    parameters: dict, outputs) -> str:
    manifest = {
        "command": command,
        "tool_version": __version__,
        "seed": int(seed),
        "inputs": {k: str(v) for k, v in inputs.items()},
        "parameters": parameters,
        "outputs": {str(p): _sha256(p) for p in outputs},
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    path = str(primary_out) + ".manifest.json"
    with open(path, "w") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")
    return path


def _require_inputs(*paths) -> None:
    for p in paths:
        if not Path(p).is_file():
            raise FileNotFoundError(f"input file not found: {p}")


def _load_env(path) -> EnvironmentMap:
    path = str(path)
    if path.endswith(".pfm"):
        data = read_pfm(path)
    elif path.endswith(".hdr"):
        data = read_hdr(path)
    else:
        raise ValueError(f"unsupported environment-map format: {path}")
    return EnvironmentMap(np.clip(data.astype(np.float64), 0.0, None))


def _load_channel(path) -> np.ndarray:
    """[0,1] image from PNG or PFM."""
    path = str(path)
    if path.endswith(".png"):
        img, _ = read_png(path)
        return img
    if path.endswith(".pfm"):
        return np.clip(read_pfm(path).astype(np.float64), 0.0, 1.0)
    raise ValueError(f"unsupported LDR image format: {path}")


# ---------------------------------------------------------------------------
# command implementations

def _cmd_crop(args):
    _require_inputs(args.pano)
    env = _load_env(args.pano)
    cam = projection.CameraSpec(
        azimuth=args.az, elevation=args.el, fov=args.fov,
        width=args.w, height=args.h,
    )
    view = projection.project_perspective(env, cam)
    out = str(args.out)
    if out.endswith(".png"):
        ldr = tonemap.apply_display_tonemap(view, args.tonemap)
        write_png(out, ldr, metadata={"tonecurve": args.tonemap})
    else:
        write_pfm(out, view)
    params = {"az": args.az, "el": args.el, "fov": args.fov, "w": args.w,
              "h": args.h, "tonemap": args.tonemap}
    _write_manifest("crop", out, args.seed, {"pano": args.pano}, params, [out])


def _cmd_dataset_gen(args):
    src_dir = Path(args.panos_dir)
    if not src_dir.is_dir():
        raise FileNotFoundError(f"panorama directory not found: {src_dir}")
    sources = []
    names = []
    for p in sorted(src_dir.iterdir()):
        if p.suffix == ".pfm":
            sources.append(projection.PanoramaSource(read_pfm(p).astype(np.float64), hdr=True))
        elif p.suffix == ".hdr":
            sources.append(projection.PanoramaSource(read_hdr(p).astype(np.float64), hdr=True))
        elif p.suffix == ".png":
            sources.append(projection.PanoramaSource(read_png(p)[0], hdr=False))
        else:
            continue
        names.append(p.name)
    if not sources:
        raise ValueError(f"no panoramas (*.pfm, *.hdr, *.png) in {src_dir}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    samples = projection.dataset_gen(
        sources, rng, args.count, video=args.video_frames > 1,
        frame_count=max(args.video_frames, 1),
        crop_width=args.w, crop_height=args.h,
    )
    outputs = []
    records = []
    for i, sample in enumerate(samples):
        sdir = out_dir / f"sample_{i:04d}"
        sdir.mkdir(exist_ok=True)
        crop_paths = []
        for k, crop in enumerate(sample.crops):
            cp = sdir / f"crop_{k:03d}.png"
            write_png(cp, crop, metadata={"tonecurve": sample.tone_curve})
            crop_paths.append(str(cp))
        ldr_path = sdir / "target_ldr.pfm"
        write_pfm(ldr_path, sample.target_ldr)
        paths = crop_paths + [str(ldr_path)]
        log_path = None
        if sample.target_log is not None:
            log_path = sdir / "target_log.pfm"
            write_pfm(log_path, sample.target_log)
            paths.append(str(log_path))
        outputs.extend(paths)
        records.append({
            "index": i,
            "source": names[sample.source_index],
            "cameras": [
                {"azimuth": c.azimuth, "elevation": c.elevation, "fov": c.fov,
                 "width": c.width, "height": c.height}
                for c in sample.cameras
            ],
            "tone_curve": sample.tone_curve,
            "exposure_scale": sample.exposure_scale,
            "crops": crop_paths,
            "target_ldr": str(ldr_path),
            "target_log": str(log_path) if log_path else None,
        })
    listing = out_dir / "dataset.jsonl"
    with open(listing, "w") as f:
        for rec in records:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    outputs.append(str(listing))
    params = {"count": args.count, "video_frames": args.video_frames,
              "w": args.w, "h": args.h}
    _write_manifest("dataset-gen", listing, args.seed,
                    {"panos_dir": str(src_dir)}, params, outputs)


def _cmd_tonemap(args):
    _require_inputs(args.infile)
    env = _load_env(args.infile)
    maps = tonemap.tonemap_dual(env)
    write_png(args.out_ldr, maps.ldr, metadata={"tonecurve": "dual-reinhard16"})
    write_png(args.out_log, maps.log, metadata={"tonecurve": "dual-log10000"})
    _write_manifest("tonemap", args.out_ldr, args.seed, {"in": args.infile}, {},
                    [args.out_ldr, args.out_log])


def _cmd_inverse(args):
    _require_inputs(args.ldr, args.log)
    ldr = _load_channel(args.ldr)
    log = _load_channel(args.log)
    if ldr.shape != log.shape:
        raise ValueError("ldr and log images must share dimensions")
    if args.net:
        _require_inputs(args.net, str(args.net) + ".layers.txt")
        net = fusion.load_fusion_net(args.net)
        maps = tonemap.DualToneMaps(ldr=ldr, log=log)
        hdr = fusion.fuse_image(net, maps).data
    else:
        hdr = tonemap.inverse_rule(ldr, log)
    write_pfm(args.out, hdr)
    params = {"net": str(args.net) if args.net else None}
    _write_manifest("inverse", args.out, args.seed,
                    {"ldr": args.ldr, "log": args.log}, params, [args.out])


def _cmd_fuse_train(args):
    cfg = fusion.TrainConfig(
        seed=args.seed, steps=args.steps, batch_size=args.batch,
        learning_rate=args.lr, quantize=not args.no_quantize, init=args.init,
    )
    net, loss = fusion.train_fusion(cfg)
    fusion.save_fusion_net(net, args.out)
    outputs = [args.out, str(args.out) + ".layers.txt"]
    params = {"steps": cfg.steps, "batch": cfg.batch_size, "lr": cfg.learning_rate,
              "quantize": cfg.quantize, "init": cfg.init,
              "final_loss": loss}
    _write_manifest("fuse-train", args.out, args.seed, {}, params, outputs)
    print(f"final loss {loss:.6f}")


def _cmd_fuse_apply(args):
    _require_inputs(args.net, str(args.net) + ".layers.txt", args.ldr, args.log)
    net = fusion.load_fusion_net(args.net)
    ldr = _load_channel(args.ldr)
    log = _load_channel(args.log)
    maps = tonemap.DualToneMaps(ldr=ldr, log=log)
    hdr = fusion.fuse_image(net, maps)
    write_pfm(args.out, hdr.data)
    _write_manifest("fuse-apply", args.out, args.seed,
                    {"net": args.net, "ldr": args.ldr, "log": args.log}, {}, [args.out])


def _cmd_render_probes(args):
    _require_inputs(args.env)
    env = _load_env(args.env)
    outputs = []
    for name, material in probes.STANDARD_MATERIALS.items():
        probe = probes.render_probe(env, material, args.size)
        pfm_path = f"{args.out_prefix}{name}.pfm"
        write_pfm(pfm_path, probe.pixels)
        preview = tonemap.apply_display_tonemap(probe.pixels, "gamma24")
        png_path = f"{args.out_prefix}{name}.png"
        write_png(png_path, preview, metadata={"tonecurve": "gamma24"})
        outputs.extend([pfm_path, png_path])
    params = {"size": args.size, "out_prefix": args.out_prefix}
    _write_manifest("render-probes", outputs[0], args.seed,
                    {"env": args.env}, params, outputs)


def _cmd_eval(args):
    _require_inputs(args.pred, args.gt)
    pred = _load_env(args.pred)
    gt = _load_env(args.gt)
    report = metrics.evaluate_three_spheres(pred, gt, probe_size=args.probe_size)
    with open(args.out, "w") as f:
        json.dump(report.to_dict(), f, sort_keys=True, indent=2)
        f.write("\n")
    params = {"probe_size": args.probe_size}
    _write_manifest("eval", args.out, args.seed,
                    {"pred": args.pred, "gt": args.gt}, params, [args.out])


def _list_frames(directory) -> list:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"frame directory not found: {d}")
    frames = sorted(p for p in d.iterdir() if p.suffix == ".pfm")
    if not frames:
        raise ValueError(f"no *.pfm frames in {d}")
    return frames


def _cmd_eval_video(args):
    pred_frames = _list_frames(args.pred_dir)
    gt_frames = _list_frames(args.gt_dir)
    if len(pred_frames) != len(gt_frames):
        raise ValueError(
            f"frame count mismatch: {len(pred_frames)} pred vs {len(gt_frames)} gt"
        )
    with concurrent.futures.ThreadPoolExecutor(max_workers=thread_limit()) as pool:
        pred_envs = list(pool.map(_load_env, pred_frames))
        gt_envs = list(pool.map(_load_env, gt_frames))
        per_frame = list(pool.map(
            lambda pair: metrics.evaluate_three_spheres(
                pair[0], pair[1], probe_size=args.probe_size
            ),
            zip(pred_envs, gt_envs),
        ))
    report = metrics.MetricReport(materials={}, temporal={})
    for mat in probes.STANDARD_MATERIALS:
        report.materials[mat] = {}
        for metric in ("si_rmse", "angular_deg", "n_rmse"):
            stats = metrics.temporal_stats([f.materials[mat][metric] for f in per_frame])
            report.materials[mat][metric] = stats["mean"]
            report.temporal[f"{mat}.{metric}"] = stats
    pae_stats = metrics.temporal_stats([f.pae_deg for f in per_frame])
    report.pae_deg = pae_stats["mean"]
    report.temporal["pae_deg"] = pae_stats
    with open(args.out, "w") as f:
        json.dump(report.to_dict(), f, sort_keys=True, indent=2)
        f.write("\n")
    params = {"probe_size": args.probe_size, "frames": len(pred_frames)}
    _write_manifest("eval-video", args.out, args.seed,
                    {"pred_dir": args.pred_dir, "gt_dir": args.gt_dir}, params, [args.out])


def _cmd_peak(args):
    _require_inputs(args.env)
    env = _load_env(args.env)
    direction = peak_direction(env, percentile=args.percentile)
    result = {"direction": [float(v) for v in direction]}
    text = json.dumps(result, sort_keys=True)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
        _write_manifest("peak", args.out, args.seed, {"env": args.env},
                        {"percentile": args.percentile}, [args.out])
    print(text)


def _cmd_rotate(args):
    _require_inputs(args.env)
    env = _load_env(args.env)
    rotated = rotate_env(env, args.yaw)
    write_pfm(args.out, rotated.data)
    _write_manifest("rotate", args.out, args.seed, {"env": args.env},
                    {"yaw": args.yaw}, [args.out])


# ---------------------------------------------------------------------------
# parser plumbing

def _build_parser(config: dict) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="luxprobe",
        description="HDR lighting toolkit: tonemapping, fusion, probes, metrics",
    )
    parser.add_argument("--version", action="version", version=f"luxprobe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(func=func)
        p.add_argument("--config", help="JSON file of flag defaults", default=None)
        p.add_argument("--seed", type=int, default=0, help="RNG seed (recorded in manifests)")
        return p

    p = add("crop", _cmd_crop, help="project a panorama to a pinhole view")
    p.add_argument("--pano", required=True)
    p.add_argument("--az", type=float, default=0.0)
    p.add_argument("--el", type=float, default=0.0)
    p.add_argument("--fov", type=float, default=60.0)
    p.add_argument("--w", type=int, default=projection.DEFAULT_CROP_WIDTH)
    p.add_argument("--h", type=int, default=projection.DEFAULT_CROP_HEIGHT)
    p.add_argument("--tonemap", choices=sorted(tonemap.TONE_CURVES), default="gamma24")
    p.add_argument("--out", required=True)

    p = add("dataset-gen", _cmd_dataset_gen, help="generate supervised crop/target samples")
    p.add_argument("--panos-dir", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--video-frames", type=int, default=1)
    p.add_argument("--w", type=int, default=projection.DEFAULT_CROP_WIDTH)
    p.add_argument("--h", type=int, default=projection.DEFAULT_CROP_HEIGHT)
    p.add_argument("--out-dir", required=True)

    p = add("tonemap", _cmd_tonemap, help="dual-tonemap an HDR map to two PNGs")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out-ldr", required=True)
    p.add_argument("--out-log", required=True)

    p = add("inverse", _cmd_inverse, help="reconstruct HDR from the dual pair")
    p.add_argument("--ldr", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--net", default=None, help="fusion net file (default: rule-based)")
    p.add_argument("--out", required=True)

    p = add("fuse-train", _cmd_fuse_train, help="train the fusion MLP")
    p.add_argument("--steps", type=int, default=fusion.TrainConfig.steps)
    p.add_argument("--batch", type=int, default=fusion.TrainConfig.batch_size)
    p.add_argument("--lr", type=float, default=fusion.TrainConfig.learning_rate)
    p.add_argument("--no-quantize", action="store_true")
    p.add_argument("--init", choices=("structured", "uniform"), default="structured")
    p.add_argument("--out", required=True)

    p = add("fuse-apply", _cmd_fuse_apply, help="apply a trained fusion net")
    p.add_argument("--net", required=True)
    p.add_argument("--ldr", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True)

    p = add("render-probes", _cmd_render_probes, help="render the three evaluation spheres")
    p.add_argument("--env", required=True)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--out-prefix", required=True)

    p = add("eval", _cmd_eval, help="three-sphere metrics for one prediction")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--probe-size", type=int, default=256)
    p.add_argument("--out", required=True)

    p = add("eval-video", _cmd_eval_video, help="per-frame metrics plus temporal stats")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--probe-size", type=int, default=256)
    p.add_argument("--out", required=True)

    p = add("peak", _cmd_peak, help="dominant-light direction of a map")
    p.add_argument("--env", required=True)
    p.add_argument("--percentile", type=float, default=0.999)
    p.add_argument("--out", default=None)

    p = add("rotate", _cmd_rotate, help="rotate a panorama in azimuth")
    p.add_argument("--env", required=True)
    p.add_argument("--yaw", type=float, required=True)
    p.add_argument("--out", required=True)

    if config:
        normalized = {k.replace("-", "_"): v for k, v in config.items()}
        for sub_parser in sub.choices.values():
            for action in sub_parser._actions:
                if action.dest in normalized:
                    action.default = normalized[action.dest]
                    action.required = False
    return parser


def _peek_config(argv) -> dict:
    """Extract --config before the real parse so its values become defaults."""
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
        else:
            continue
        if not Path(path).is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        with open(path) as f:
            cfg = json.load(f)
        if not isinstance(cfg, dict):
            raise ValueError("config file must hold a JSON object")
        return cfg
    return {}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        config = _peek_config(argv)
        parser = _build_parser(config)
        args = parser.parse_args(argv)
        thread_limit()  # validate the env var before any work
        args.func(args)
        return 0
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0)
    except (ValueError, OSError, RuntimeError, KeyError) as exc:
        print(f"ERROR DATA: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
