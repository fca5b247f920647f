"""Command-line entry point.

Subcommands mirror the pipeline stages: `synth` builds toy corpora and
meshface triples, `train` runs the adversarial schedule, `complete`
recovers clean faces and meshes from meshfaces, `latent` runs the latent
interpolation/arithmetic demos, and `eval` produces the metrics tables,
ROC CSVs and companion figures.

Every command is deterministic under (config, seed) and records its
resolved configuration in run_meta.json.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .checkpoint import load_checkpoint
from .data import DomainPools
from .imageops import (EyeLandmarks, align_by_eyes, canonical_eye_positions, from_model_range,
                       load_image, save_image, to_model_range, write_landmark_sidecar)
from .meshes import synth_meshface
from .metrics import VerifyItem, embed_pixel, verify_protocol
from .networks import (batch_to_torch, decode_fused, disentangle, encode_face, encode_mesh,
                       latent_arith, latent_interp, torch_to_images)
from .reporting import save_image_grid, save_montage, save_roc_figure, write_results_csv, write_roc_csv
from .rng import make_rng, split_seed
from .runconfig import RunConfig
from .toyfaces import toy_face
from .training import train

DATA_ROOT_ENV = "DEMESH_DATA_ROOT"
INFER_BATCH = 16


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 1


def _write_run_meta(out_dir: Path, command: str, seed: int | None, config: RunConfig | None,
                    args: dict) -> None:
    meta = {
        "command": command,
        "tool_version": __version__,
        "seed": seed,
        "config": config.to_dict() if config is not None else None,
        "args": args,
    }
    (out_dir / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def _resolve_config(args) -> RunConfig:
    if getattr(args, "config", None):
        cfg = RunConfig.load(args.config)
    elif getattr(args, "desk_scale", False):
        cfg = RunConfig.desk_preset()
    else:
        cfg = RunConfig.full_preset()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _data_dir(args, flag: str = "data") -> Path:
    val = getattr(args, flag, None) or os.environ.get(DATA_ROOT_ENV)
    if not val:
        raise ValueError(f"no --{flag} given and ${DATA_ROOT_ENV} is unset")
    p = Path(val)
    if not p.is_dir():
        raise ValueError(f"data directory {p} does not exist")
    return p


def cmd_synth(args) -> int:
    cfg = _resolve_config(args)
    data = cfg.data
    identities = args.identities if args.identities is not None else data.identities
    per_identity = args.images_per_identity if args.images_per_identity is not None else data.images_per_identity
    per_face = args.per_face if args.per_face is not None else data.meshes_per_face
    size = args.size if args.size is not None else data.size
    align = data.align and not args.no_align
    seed = cfg.train.seed
    first = args.first_identity

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    raw_size = size + max(8, size // 4) if align else size
    manifest_lines: list[str] = []
    landmark_entries: list[tuple[str, EyeLandmarks]] = []

    for i in range(first, first + identities):
        for k in range(per_identity):
            face = toy_face(i, make_rng(seed, "toyface", i, k), raw_size)
            if align:
                clean = align_by_eyes(face.image, face.landmarks, size)
                left, right = canonical_eye_positions(size)
                lm = EyeLandmarks(left, right)
            else:
                clean, lm = face.image, face.landmarks
            for r in range(per_face):
                mesh_seed = split_seed(seed, "mesh", i, k, r)
                result = synth_meshface(clean, cfg.mesh, make_rng(mesh_seed))
                stem = f"id{i:04d}_k{k:02d}_r{r:02d}"
                save_image(result.meshface, out / f"{stem}_x.png")
                save_image(clean, out / f"{stem}_y.png")
                save_image(result.mesh, out / f"{stem}_z.png")
                manifest_lines.append(f"{stem} {result.beta:.6f} {mesh_seed}")
                landmark_entries.append((f"{stem}_y.png", lm))

    (out / "manifest.txt").write_text("\n".join(manifest_lines) + "\n")
    write_landmark_sidecar(out / "landmarks.txt", landmark_entries)
    _write_run_meta(out, "synth", seed, cfg, {
        "identities": identities, "images_per_identity": per_identity,
        "per_face": per_face, "size": size, "align": align, "first_identity": first,
    })
    print(f"wrote {len(manifest_lines)} triples to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    data_dir = _data_dir(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pools = DomainPools.from_directory(data_dir)
    (out / "run_config.json").write_text(cfg.to_json())
    _write_run_meta(out, "train", cfg.train.seed, cfg,
                    {"data": str(data_dir), "resume": args.resume})
    final = train(cfg.train, cfg.net, pools, out,
                  resume_from=args.resume, log_every=args.log_every)
    print(f"final checkpoint: {final}")
    return 0


def _load_bundle(path: str):
    bundle, _, _ = load_checkpoint(path)
    bundle.eval()
    return bundle


def _completion_stem(name: str) -> str:
    return name[:-2] if name.endswith("_x") else name


def _inference_inputs(in_dir: Path) -> list[Path]:
    skip = ("_y", "_z", "_yhat", "_zhat")
    return sorted(p for p in in_dir.glob("*.png") if not p.stem.endswith(skip))


def _prep_for_model(img: np.ndarray, channels: int) -> np.ndarray:
    if img.shape[2] == 1 and channels == 3:
        img = np.repeat(img, 3, axis=2)
    if img.shape[2] != channels:
        raise ValueError(f"expected {channels}-channel input, got {img.shape[2]}")
    if img.shape[0] != img.shape[1] or img.shape[0] % 4 != 0:
        raise ValueError(f"input must be square with side divisible by 4, got {img.shape[:2]}")
    return to_model_range(img)


def cmd_complete(args) -> int:
    bundle = _load_bundle(args.checkpoint)
    in_dir = _data_dir(args, "in_dir")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = _inference_inputs(in_dir)
    if not paths:
        raise ValueError(f"no completable PNGs under {in_dir}")
    n_done = 0
    with torch.no_grad():
        for i in range(0, len(paths), INFER_BATCH):
            chunk = paths[i:i + INFER_BATCH]
            imgs = [_prep_for_model(load_image(p), bundle.config.channels) for p in chunk]
            y_hat, z_hat, _ = disentangle(bundle, batch_to_torch(imgs))
            for p, yh, zh in zip(chunk, torch_to_images(y_hat), torch_to_images(z_hat)):
                stem = _completion_stem(p.stem)
                save_image(from_model_range(yh), out / f"{stem}_yhat.png")
                save_image(from_model_range(zh), out / f"{stem}_zhat.png")
                n_done += 1
    _write_run_meta(out, "complete", None, None,
                    {"checkpoint": args.checkpoint, "in": str(in_dir), "count": n_done})
    print(f"completed {n_done} images into {out}")
    return 0


def _load_mesh_1ch(path: Path) -> np.ndarray:
    img = load_image(path)
    if img.shape[2] == 3:
        img = img.mean(axis=2, keepdims=True).astype(np.float32)
    return img


def cmd_latent(args) -> int:
    bundle = _load_bundle(args.checkpoint)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    face = _prep_for_model(load_image(args.face), bundle.config.channels)
    z1 = to_model_range(_load_mesh_1ch(Path(args.mesh1)))
    if args.op != "scale" and not args.mesh2:
        raise ValueError(f"--op {args.op} needs --mesh2")
    z2 = to_model_range(_load_mesh_1ch(Path(args.mesh2))) if args.mesh2 else None

    with torch.no_grad():
        face_t = batch_to_torch([face])
        z1_t = batch_to_torch([z1])
        z2_t = batch_to_torch([z2]) if z2 is not None else None
        face_lat = encode_face(bundle, face_t)
        panels: list[tuple[str, np.ndarray]] = []

        def decode_to_file(mesh_lat, name: str, title: str):
            img = from_model_range(torch_to_images(decode_fused(bundle, face_lat, mesh_lat))[0])
            save_image(img, out / name)
            panels.append((title, img))

        if args.op == "interp":
            steps = args.steps
            if steps < 2:
                raise ValueError("--steps must be >= 2")
            for i in range(steps):
                t = i / (steps - 1)
                decode_to_file(latent_interp(bundle, z1_t, z2_t, t),
                               f"interp_{i:02d}.png", f"t={t:.2f}")
        elif args.op == "scale":
            alphas = [float(a) for a in args.alphas.split(",")]
            for a in alphas:
                decode_to_file(latent_arith(bundle, z1_t, None, "scale", alpha=a),
                               f"scale_{a:g}.png", f"alpha={a:g}")
        else:  # add | sub
            decode_to_file(latent_arith(bundle, z1_t, z2_t, args.op), f"{args.op}.png", args.op)
            decode_to_file(encode_mesh(bundle, z1_t), "mesh1_only.png", "mesh1")
            decode_to_file(encode_mesh(bundle, z2_t), "mesh2_only.png", "mesh2")

    save_montage(out / "montage.png", panels)
    _write_run_meta(out, "latent", None, None, {
        "checkpoint": args.checkpoint, "op": args.op, "face": args.face,
        "mesh1": args.mesh1, "mesh2": args.mesh2, "steps": args.steps, "alphas": args.alphas,
    })
    print(f"wrote {len(panels)} latent decodes to {out}")
    return 0


def _collect_triples(data_dir: Path) -> dict[str, list[str]]:
    """Map identity -> sorted stems, parsing `<identity>_...` stem names."""
    stems = sorted(p.stem[:-2] for p in data_dir.glob("*_x.png"))
    by_id: dict[str, list[str]] = defaultdict(list)
    for stem in stems:
        by_id[stem.split("_")[0]].append(stem)
    return dict(by_id)


def cmd_eval(args) -> int:
    bundle = _load_bundle(args.checkpoint)
    data_dir = _data_dir(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    by_id = _collect_triples(data_dir)
    if not by_id:
        raise ValueError(f"no triples found under {data_dir}")
    gallery: list[VerifyItem] = []
    probe_x: list[VerifyItem] = []
    probe_y: list[VerifyItem] = []
    for identity, stems in sorted(by_id.items()):
        gallery.append(VerifyItem(load_image(data_dir / f"{stems[0]}_y.png"), identity, stems[0]))
        for stem in stems[1:]:
            probe_x.append(VerifyItem(load_image(data_dir / f"{stem}_x.png"), identity, stem))
            probe_y.append(VerifyItem(load_image(data_dir / f"{stem}_y.png"), identity, stem))
    if not probe_x:
        raise ValueError("every identity has a single image; nothing to probe "
                         "(need >= 2 images for at least one identity)")

    with torch.no_grad():
        recovered: list[VerifyItem] = []
        for i in range(0, len(probe_x), INFER_BATCH):
            chunk = probe_x[i:i + INFER_BATCH]
            imgs = [_prep_for_model(it.image, bundle.config.channels) for it in chunk]
            y_hat, _, _ = disentangle(bundle, batch_to_torch(imgs))
            for it, yh in zip(chunk, torch_to_images(y_hat)):
                recovered.append(VerifyItem(from_model_range(yh), it.identity, it.name))

    clean_refs = [it.image for it in probe_y]
    results = {
        "corrupted": verify_protocol(gallery, probe_x, embed_pixel, clean_refs),
        "recovered": verify_protocol(gallery, recovered, embed_pixel, clean_refs),
        "clean": verify_protocol(gallery, probe_y, embed_pixel, clean_refs),
    }

    write_results_csv(out / "results.csv", results)
    for method, res in results.items():
        write_roc_csv(out / f"roc_{method}.csv", res.curve)
    save_roc_figure(out / "roc.png", {m: r.curve for m, r in results.items()})
    n_show = min(8, len(probe_x))
    save_image_grid(out / "samples.png", {
        "corrupted": [it.image for it in probe_x[:n_show]],
        "recovered": [it.image for it in recovered[:n_show]],
        "clean": [it.image for it in probe_y[:n_show]],
    })
    _write_run_meta(out, "eval", None, None, {
        "checkpoint": args.checkpoint, "data": str(data_dir),
        "gallery": len(gallery), "probe": len(probe_x),
    })
    for method, res in results.items():
        print(f"{method:>10}: psnr={res.mean_psnr:.2f} ssim={res.mean_ssim:.4f} "
              f"tpr@1%={res.tpr_at[0.01]:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="demesh",
                                description="Face completion under mesh-like occlusions")
    p.add_argument("--version", action="version", version=f"demesh {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate toy corpus and meshface triples")
    sp.add_argument("--out", required=True)
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--desk-scale", action="store_true")
    sp.add_argument("--identities", type=int)
    sp.add_argument("--images-per-identity", type=int)
    sp.add_argument("--per-face", type=int, help="meshfaces synthesized per clean face")
    sp.add_argument("--size", type=int)
    sp.add_argument("--first-identity", type=int, default=0)
    sp.add_argument("--no-align", action="store_true")
    sp.set_defaults(func=cmd_synth)

    tp = sub.add_parser("train", help="run the adversarial training schedule")
    tp.add_argument("--data", help=f"triple directory (default ${DATA_ROOT_ENV})")
    tp.add_argument("--out", required=True)
    tp.add_argument("--config")
    tp.add_argument("--seed", type=int)
    tp.add_argument("--desk-scale", action="store_true")
    tp.add_argument("--resume", help="checkpoint directory to continue from")
    tp.add_argument("--log-every", type=int, default=0)
    tp.set_defaults(func=cmd_train)

    cp = sub.add_parser("complete", help="recover clean faces and meshes from meshfaces")
    cp.add_argument("--checkpoint", required=True)
    cp.add_argument("--in", dest="in_dir", help=f"input directory (default ${DATA_ROOT_ENV})")
    cp.add_argument("--out", required=True)
    cp.set_defaults(func=cmd_complete)

    lp = sub.add_parser("latent", help="latent interpolation/arithmetic demos")
    lp.add_argument("--checkpoint", required=True)
    lp.add_argument("--face", required=True)
    lp.add_argument("--mesh1", required=True)
    lp.add_argument("--mesh2")
    lp.add_argument("--op", choices=["interp", "add", "sub", "scale"], required=True)
    lp.add_argument("--steps", type=int, default=5)
    lp.add_argument("--alphas", default="0.5,1.0,2.0")
    lp.add_argument("--out", required=True)
    lp.set_defaults(func=cmd_latent)

    ep = sub.add_parser("eval", help="metrics tables, ROC CSVs and figures")
    ep.add_argument("--checkpoint", required=True)
    ep.add_argument("--data", help=f"triple directory (default ${DATA_ROOT_ENV})")
    ep.add_argument("--out", required=True)
    ep.set_defaults(func=cmd_eval)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, OSError) as e:
        return _fail(str(e))


if __name__ == "__main__":
    sys.exit(main())
