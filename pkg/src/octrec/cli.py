"""Command-line interface.

Subcommands: simulate, reconstruct, train, infer, evaluate, bench.
Exit codes: 0 success, 1 usage or configuration error, 2 malformed data,
3 numeric failure.  With a fixed seed and config, data outputs are
byte-identical across reruns; wall-clock timings go to separate log files.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, restore_model
from .config import RunConfig, load_config
from .dataset import (generate_dataset, list_pairs, read_dataset_meta, sample_name,
                      sample_scene, scene_phantoms)
from .errors import ConfigError, DataFormatError, NumericError
from .forward_model import (K_LINEAR, LAMBDA_LINEAR, FringeFrame, background_column,
                            max_imaging_depth, synthesize_volume, to_wavenumbers,
                            uniform_k_grid, wavelength_grid)
from .io import read_frg1, write_frg1, write_manifest, write_pgm
from .metrics import display_map, mean_by_variant, write_metrics_csv
from .model import AttentionUNet
from .patches import normalize_wavenumbers, row_wavenumbers
from .pipeline import classic_reconstruct, lambda_space_image
from .training import (frame_to_patches, infer_volume, network_reconstruct,
                       evaluate_rows, train_dataset, ws_channel_from_meta)
from . import report


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse default exits with 2
        raise ConfigError(message)


def _say(quiet: bool, message: str) -> None:
    if not quiet:
        print(message)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _grids(cfg: RunConfig):
    sweep = cfg.sweep()
    source_k = to_wavenumbers(wavelength_grid(sweep))
    target_k = uniform_k_grid(sweep.k_min, sweep.k_max, sweep.n_samples)
    return sweep, source_k, target_k


def _read_volume_dir(in_dir: Path):
    if not in_dir.is_dir():
        raise ConfigError(f"input directory not found: {in_dir}")
    frame_paths = sorted(p for p in in_dir.glob("frame*.frg1")
                         if not p.name.endswith(".network.frg1")
                         and not p.name.endswith(".classic.frg1"))
    if not frame_paths:
        raise ConfigError(f"no frame*.frg1 files under {in_dir}")
    bg_path = in_dir / "background.frg1"
    if not bg_path.exists():
        raise ConfigError(f"missing background.frg1 under {in_dir}")
    frames = []
    for p in frame_paths:
        arr, tag = read_frg1(p)
        frames.append((p, FringeFrame(arr.astype(np.float64), grid_tag=tag)))
    bg_arr, _ = read_frg1(bg_path)
    if bg_arr.shape[1] != 1:
        raise DataFormatError(f"{bg_path}: background must be a single column, got {bg_arr.shape}")
    return frames, bg_arr[:, 0].astype(np.float64)


def _check_rows(n_rows: int, sweep) -> None:
    if n_rows != sweep.n_samples:
        raise ConfigError(
            f"frames carry {n_rows} spectral samples but config sweep.n_samples={sweep.n_samples}")


def _window_from(scans: list[np.ndarray], span: float) -> tuple[float, float]:
    hi = max(float(np.max(s)) for s in scans)
    return hi - span, hi


# --- Subcommands -------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    sweep, source_k, _ = _grids(cfg)
    family = cfg.scene_family()
    scene = sample_scene(family, max_imaging_depth(sweep),
                         np.random.default_rng([cfg.seed, 0, 3]))
    files = []
    grid = cfg.simulate_grid
    for frame_idx in range(cfg.simulate_n_frames):
        pos_rng = np.random.default_rng([cfg.seed, 0, frame_idx, 7])
        phantoms = scene_phantoms(scene, cfg.n_alines, frame_idx, pos_rng)
        frames = synthesize_volume(
            phantoms, sweep, cfg.n_alines, n_repeats=1, noise=cfg.noise(),
            seed=int(np.random.SeedSequence([cfg.seed, 0, frame_idx]).generate_state(1)[0]),
            grid=grid)
        path = out / f"frame{frame_idx:03d}.frg1"
        write_frg1(path, frames[0].samples.astype(np.float32), grid)
        files.append(path)
        _say(args.quiet, f"simulate: wrote {path}")
    k = source_k if grid == LAMBDA_LINEAR else uniform_k_grid(sweep.k_min, sweep.k_max,
                                                              sweep.n_samples)
    bg = background_column(k, sweep, family.reference_reflectivity)
    bg_path = out / "background.frg1"
    write_frg1(bg_path, bg.astype(np.float32)[:, None], grid)
    files.append(bg_path)
    write_manifest(out, files, extra={"kind": "raw_volume", "seed": cfg.seed,
                                      "n_frames": cfg.simulate_n_frames, "grid": grid})
    _say(args.quiet, f"simulate: {len(files)} files under {out}")
    return 0


def cmd_reconstruct(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    sweep, source_k, target_k = _grids(cfg)
    frames, background = _read_volume_dir(Path(args.in_dir))
    _check_rows(frames[0][1].n_samples, sweep)
    scans = []
    for path, frame in frames:
        if args.mode == "lambda":
            scan = lambda_space_image(frame, background)
        else:
            src = source_k if frame.grid_tag == LAMBDA_LINEAR else target_k
            scan = classic_reconstruct(frame, background, src, target_k,
                                       method=cfg.resample_method)
        scans.append((path, scan))
    lo, hi = _window_from([s.intensity for _, s in scans], cfg.db_span)
    files = []
    for path, scan in scans:
        stem = path.stem
        tag = LAMBDA_LINEAR if args.mode == "lambda" else K_LINEAR
        img_path = out / f"{stem}.{args.mode}.frg1"
        pgm_path = out / f"{stem}.{args.mode}.pgm"
        write_frg1(img_path, scan.intensity.astype(np.float32), tag)
        write_pgm(pgm_path, display_map(scan.intensity, lo, hi))
        files.extend([img_path, pgm_path])
    write_manifest(out, files, extra={"kind": "reconstruction", "mode": args.mode,
                                      "db_window": [lo, hi], "seed": cfg.seed})
    _say(args.quiet, f"reconstruct: {len(scans)} frames ({args.mode} mode) under {out}")
    return 0


def cmd_gen_dataset(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    meta = generate_dataset(cfg.dataset_spec(), out, quiet=args.quiet)
    _say(args.quiet, f"dataset: split counts {meta['split_counts']} under {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    result = train_dataset(args.dataset_dir, out, cfg.model(), cfg.train(),
                           quiet=args.quiet)
    report.save_loss_curves(result["history"], out / "loss_curves.png")
    files = [result["best_path"], result["final_path"], result["history_path"],
             out / "loss_curves.png"]
    write_manifest(out, files, extra={"kind": "training_run", "seed": cfg.seed,
                                      "best_epoch": result["best_epoch"],
                                      "best_val_loss": result["best_val_loss"]})
    _say(args.quiet, f"train: best val loss {result['best_val_loss']:.6f} "
                     f"at epoch {result['best_epoch']}; checkpoints under {out}")
    return 0


def _load_model(checkpoint_path: str) -> AttentionUNet:
    path = Path(checkpoint_path)
    if not path.exists():
        raise ConfigError(f"checkpoint not found: {path}")
    return restore_model(load_checkpoint(path))


def cmd_infer(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    sweep, source_k, target_k = _grids(cfg)
    model = _load_model(args.checkpoint)
    frames, background = _read_volume_dir(Path(args.in_dir))
    _check_rows(frames[0][1].n_samples, sweep)
    ks = row_wavenumbers(sweep.k_min, sweep.k_max, sweep.n_samples // 2)
    ws_norm = normalize_wavenumbers(ks, sweep.k_min, sweep.k_max)
    nets, classics, timing = infer_volume(model, [f for _, f in frames], background,
                                          source_k, target_k, ws_norm,
                                          method=cfg.resample_method)
    lo, hi = _window_from([s.intensity for s in nets + classics], cfg.db_span)
    files = []
    for (path, _), net, classic in zip(frames, nets, classics):
        stem = path.stem
        for suffix, scan, tag in (("network", net, LAMBDA_LINEAR),
                                  ("classic", classic, K_LINEAR)):
            img_path = out / f"{stem}.{suffix}.frg1"
            write_frg1(img_path, scan.intensity.astype(np.float32), tag)
            write_pgm(out / f"{stem}.{suffix}.pgm", display_map(scan.intensity, lo, hi))
            files.extend([img_path, out / f"{stem}.{suffix}.pgm"])
    (out / "latency_report.json").write_text(json.dumps(timing, indent=2) + "\n")
    write_manifest(out, files, extra={"kind": "inference", "seed": cfg.seed,
                                      "db_window": [lo, hi]})
    _say(args.quiet, f"infer: {timing['n_frames']} frames, network "
                     f"{timing['network_total_s']:.3f}s vs classic "
                     f"{timing['classic_total_s']:.3f}s")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    model = _load_model(args.checkpoint)
    rows = evaluate_rows(args.dataset_dir, model, db_span=cfg.db_span,
                         sample_fraction=cfg.sample_fraction, seed=cfg.seed)
    csv_path = out / "metrics.csv"
    write_metrics_csv(rows, csv_path)
    means = mean_by_variant(rows)
    report.save_metric_bars(means, out / "metrics_summary.png")
    panel = _example_panel(args.dataset_dir, model, cfg)
    if panel is not None:
        report.save_image_panel(panel, out / "example_frame.png")
    files = [csv_path, out / "metrics_summary.png"]
    if panel is not None:
        files.append(out / "example_frame.png")
    write_manifest(out, files, extra={"kind": "evaluation", "seed": cfg.seed,
                                      "means": means})
    summary = ", ".join(f"{v}: psnr {m['psnr_db']:.2f} ssim {m['ssim']:.3f}"
                        for v, m in means.items())
    _say(args.quiet, f"evaluate: {summary}")
    return 0


def _example_panel(dataset_dir, model, cfg: RunConfig):
    from .dataset import classic_path_for
    from .io import read_pair

    paths = list_pairs(dataset_dir, "test")
    if not paths:
        return None
    meta = read_dataset_meta(dataset_dir)
    image, truth = read_pair(paths[0])
    classic, _ = read_frg1(classic_path_for(paths[0]))
    ws_norm = ws_channel_from_meta(meta, image.shape[0])
    x, stats = frame_to_patches(np.asarray(image, dtype=np.float64), ws_norm)
    from .training import patches_to_frame

    net = patches_to_frame(np.asarray(model.predict(x.astype(model.dtype)),
                                      dtype=np.float64), stats)
    hi = float(np.max(truth))
    lo = hi - cfg.db_span
    return {
        "input": display_map(np.asarray(image, np.float64), lo, hi),
        "classic": display_map(np.asarray(classic, np.float64), lo, hi),
        "network": display_map(net, lo, hi),
        "ground truth": display_map(np.asarray(truth, np.float64), lo, hi),
    }


def cmd_bench(args) -> int:
    cfg = _config(args)
    out = _out_dir(args)
    sweep, source_k, target_k = _grids(cfg)
    if args.checkpoint is not None:
        model = _load_model(args.checkpoint)
    else:
        model = AttentionUNet(cfg.model(), seed=cfg.seed)
    n_frames = cfg.bench_n_frames
    family = cfg.scene_family()
    scene = sample_scene(family, max_imaging_depth(sweep),
                         np.random.default_rng([cfg.seed, 0, 3]))
    background = background_column(source_k, sweep, family.reference_reflectivity)
    frames = []
    for i in range(n_frames):
        pos_rng = np.random.default_rng([cfg.seed, 0, i, 7])
        phantoms = scene_phantoms(scene, cfg.n_alines, i, pos_rng)
        frames.extend(synthesize_volume(
            phantoms, sweep, cfg.n_alines, n_repeats=1, noise=cfg.noise(),
            seed=int(np.random.SeedSequence([cfg.seed, 0, i]).generate_state(1)[0])))
    ks = row_wavenumbers(sweep.k_min, sweep.k_max, sweep.n_samples // 2)
    ws_norm = normalize_wavenumbers(ks, sweep.k_min, sweep.k_max)
    _, _, timing = infer_volume(model, frames, background, source_k, target_k, ws_norm,
                                method=cfg.resample_method)
    summary = {
        "n_frames": timing["n_frames"],
        "classic_total_s": timing["classic_total_s"],
        "network_total_s": timing["network_total_s"],
        "ratio_classic_over_network": timing["ratio_classic_over_network"],
    }
    (out / "bench_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    with open(out / "bench_report.csv", "w", newline="") as f:
        f.write("pipeline,n_frames,total_s,mean_frame_s\n")
        for name in ("classic", "network"):
            total = timing[f"{name}_total_s"]
            f.write(f"{name},{timing['n_frames']},{total:.9g},{total / timing['n_frames']:.9g}\n")
    report.save_bench_chart(timing["classic_total_s"], timing["network_total_s"],
                            out / "bench_latency.png")
    _say(args.quiet, f"bench: classic {timing['classic_total_s']:.3f}s, network "
                     f"{timing['network_total_s']:.3f}s, ratio "
                     f"{timing['ratio_classic_over_network']:.2f} over {n_frames} frames")
    return 0


# --- Entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="octrec",
                     description="Swept-source OCT simulation, reconstruction, and "
                                 "learned restoration")
    parser.add_argument("--version", action="version", version=f"octrec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")

    p = sub.add_parser("simulate", help="synthesize raw fringe frames")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="turn raw fringes into B-scans")
    p.add_argument("in_dir", help="directory with frame*.frg1 and background.frg1")
    p.add_argument("--mode", choices=("lambda", "classic"), default="classic")
    common(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("gen-dataset", help="generate a paired training dataset")
    common(p)
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("train", help="train the restoration network")
    p.add_argument("dataset_dir", help="generated dataset directory")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="run trained network over raw fringes")
    p.add_argument("in_dir", help="directory with frame*.frg1 and background.frg1")
    p.add_argument("checkpoint", help="WUN1 checkpoint path")
    common(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", help="score input/classic/network against ground truth")
    p.add_argument("dataset_dir", help="generated dataset directory")
    p.add_argument("checkpoint", help="WUN1 checkpoint path")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="time classic vs network reconstruction")
    p.add_argument("checkpoint", nargs="?", default=None, help="optional WUN1 checkpoint")
    common(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
