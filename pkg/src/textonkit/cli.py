"""Command-line pipelines over texton documents.

Every subcommand is a pure function of its inputs, flags, and seed; outputs
go only to explicitly named paths.  Exit codes: 0 success, 2 usage error,
1 operation error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import animation, editing, estimation, formats, objectives, synth
from .model import (
    GaussianSet,
    ImageFrame,
    filter_in_bounds,
)
from .splatting import render_preview, splat


def _parse_frame(text: str) -> ImageFrame:
    try:
        w, h = text.lower().split("x")
        return ImageFrame(width=int(w), height=int(h))
    except ValueError as e:
        raise ValueError(f"bad frame {text!r}, want WxH") from e


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _cmd_synth(args) -> int:
    spec = synth.WorldSpec(
        frame=args.frame,
        k=args.k,
        feature_dim=args.nf,
        layout=args.layout,
    )
    truth, stack, maps = synth.synth_world(spec, args.seed)
    formats.save_set(truth, args.out)
    if args.dump_masks:
        formats.save_tensor(args.dump_masks, stack.masks)
    if args.dump_appearance:
        formats.save_tensor(args.dump_appearance, maps.appearance)
    if args.dump_direction:
        formats.save_tensor(args.dump_direction, maps.direction)
    return 0


def _cmd_estimate(args) -> int:
    masks = formats.load_tensor(args.masks)
    if masks.ndim != 3:
        raise ValueError("masks tensor must be (n, H, W)")
    frame = ImageFrame(width=masks.shape[2], height=masks.shape[1])
    appearance = formats.load_tensor(args.appearance)
    direction = formats.load_tensor(args.direction)
    stack = estimation.SegmentationStack(frame=frame, masks=masks)
    maps = estimation.DenseMaps(frame=frame, appearance=appearance, direction=direction)
    mode = estimation.SamplingMode(
        mode=args.mode, temperature=args.temperature, rng_seed=args.seed
    )
    formats.save_set(estimation.estimate_gaussians(stack, maps, mode), args.out)
    return 0


def _cmd_splat(args) -> int:
    grid = splat(formats.load_set(args.input))
    formats.save_tensor(args.out, grid.data)
    return 0


def _cmd_render(args) -> int:
    s = formats.load_set(args.input)
    formats.write_image(args.out, render_preview(splat(s)))
    return 0


def _cmd_reshuffle(args) -> int:
    s = formats.load_set(args.input)
    if args.perm:
        plan = editing.ReshufflePlan(
            permutation=_parse_ints(args.perm), gamma=args.gamma, mode=args.mode
        )
    else:
        plan = editing.ReshufflePlan.random(len(s), args.seed, args.gamma, args.mode)
    formats.save_set(editing.reshuffle(s, plan), args.out)
    return 0


def _cmd_transfer(args) -> int:
    structure = formats.load_set(args.structure)
    appearance = formats.load_set(args.appearance)
    if args.mode == "mean":
        out = editing.transfer_mean_align(structure, appearance)
    else:
        out = editing.transfer_replace(structure, appearance, args.seed)
    formats.save_set(out, args.out)
    return 0


def _cmd_vary(args) -> int:
    s = formats.load_set(args.input)
    edit = editing.VariationEdit(delta_f=args.df, delta_u=args.du)
    formats.save_set(editing.modify_variations(s, edit), args.out)
    return 0


def _cmd_interp(args) -> int:
    a = formats.load_set(args.a)
    b = formats.load_set(args.b)
    formats.save_set(editing.interpolate(a, b, args.eta, args.seed), args.out)
    return 0


def _cmd_morph(args) -> int:
    a = formats.load_set(args.a)
    b = formats.load_set(args.b)
    formats.save_set(editing.spatial_morph(a, b, args.axis, args.seed), args.out)
    return 0


def _cmd_edit(args) -> int:
    s = formats.load_set(args.input)
    if args.mode == "move":
        out = editing.transform_texton(s, args.index, "move", delta=(args.dx, args.dy))
    elif args.mode == "scale":
        out = editing.transform_texton(s, args.index, "scale", factor=args.factor)
    else:
        out = editing.transform_texton(s, args.index, "rotate", theta=args.theta)
    formats.save_set(out, args.out)
    return 0


def _cmd_propagate(args) -> int:
    original = formats.read_image(args.original)
    edited = formats.read_image(args.edited)
    s = formats.load_set(args.set)
    result = editing.propagate_edit(
        original, edited, s, _parse_ints(args.targets), args.threshold
    )
    formats.write_image(args.out, result)
    return 0


def _cmd_merge(args) -> int:
    sets = [formats.load_set(p) for p in args.patches]
    offsets = [
        np.asarray(_parse_floats(tok), dtype=np.float64)
        for tok in args.offsets.split(";")
    ]
    if len(offsets) != len(sets):
        raise ValueError(f"{len(sets)} patches but {len(offsets)} offsets")
    merged = editing.merge_patch_sets(list(zip(sets, offsets)), args.overlap)
    formats.save_set(merged, args.out)
    return 0


def _cmd_rescale(args) -> int:
    s = formats.load_set(args.input)
    anchor = _parse_floats(args.anchor) if args.anchor else s.frame.center
    formats.save_set(editing.rescale_gaussians(s, args.scale, anchor), args.out)
    return 0


def _cmd_animate(args) -> int:
    s = formats.load_set(args.input)
    if args.mode == "shear":
        duration = args.duration if args.duration else max(args.frames - 1, 1) * args.dt
        flow = animation.ShearFlow(velocity=args.velocity, duration=duration, seed=args.seed)
    else:
        flow = animation.VortexFlow(omega=args.omega)
    frames = animation.animate(s, flow, args.frames, args.dt)
    os.makedirs(args.out_dir, exist_ok=True)
    for k, rgb in enumerate(frames):
        formats.write_image(
            os.path.join(args.out_dir, f"{args.prefix}{k:04d}.{args.format}"), rgb
        )
    return 0


def _cmd_cc(args) -> int:
    a = filter_in_bounds(formats.load_set(args.a), args.margin)
    b = filter_in_bounds(formats.load_set(args.b), args.margin)
    match = objectives.set_matching_cost(a, b)
    print(f"cc={match.total_cost}")
    print(f"pairs={len(match.pairs)}")
    return 0


def _cmd_metrics(args) -> int:
    printed = False
    if args.masks:
        masks = formats.load_tensor(args.masks)
        frame = ImageFrame(width=masks.shape[2], height=masks.shape[1])
        stack = estimation.SegmentationStack(frame=frame, masks=masks)
        print(f"entropy={objectives.entropy_loss(stack)}")
        print(f"compactness={objectives.compactness_loss(stack)}")
        printed = True
    if args.a and args.b:
        a = formats.read_image(args.a)
        b = formats.read_image(args.b)
        print(f"recon={objectives.reconstruction_distance(a, b)}")
        print(
            "texture="
            + str(objectives.texture_distance(a, b, args.patch, args.projections, args.seed))
        )
        printed = True
    if not printed:
        raise ValueError("nothing to measure: pass --masks and/or --a/--b")
    return 0


def _cmd_serve(args) -> int:
    from .service import run_server

    run_server(args.addr)
    return 0


def _add_common(p: argparse.ArgumentParser, out: bool = True) -> None:
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    if out:
        p.add_argument("--out", required=True, help="output path")


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="textonkit", description=__doc__)
    sub = top.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("synth", help="generate a synthetic ground-truth world")
    p.add_argument("--k", type=int, required=True)
    p.add_argument(
        "--frame",
        type=_parse_frame,
        default=ImageFrame(width=128, height=128),
        help="frame size WxH",
    )
    p.add_argument("--nf", type=int, default=3, help="feature dimension")
    p.add_argument("--layout", choices=["grid", "random"], default="grid")
    p.add_argument("--dump-masks")
    p.add_argument("--dump-appearance")
    p.add_argument("--dump-direction")
    _add_common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("estimate", help="estimate Gaussians from mask/map tensors")
    p.add_argument("--masks", required=True)
    p.add_argument("--appearance", required=True)
    p.add_argument("--direction", required=True)
    p.add_argument("--mode", choices=["rounded", "relaxed"], default="rounded")
    p.add_argument("--temperature", type=float, default=1.0)
    _add_common(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("splat", help="rasterize a texton document to a tensor")
    p.add_argument("input")
    _add_common(p)
    p.set_defaults(func=_cmd_splat)

    p = sub.add_parser("render", help="render a texton document to an image")
    p.add_argument("input")
    _add_common(p)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("reshuffle", help="permute or blend appearance features")
    p.add_argument("input")
    p.add_argument("--mode", choices=["hard", "soft"], default="hard")
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--perm", help="explicit permutation, comma-separated")
    _add_common(p)
    p.set_defaults(func=_cmd_reshuffle)

    p = sub.add_parser("transfer", help="move appearance between textures")
    p.add_argument("mode", choices=["mean", "replace"])
    p.add_argument("structure")
    p.add_argument("appearance")
    _add_common(p)
    p.set_defaults(func=_cmd_transfer)

    p = sub.add_parser("vary", help="scale feature/shape variation")
    p.add_argument("input")
    p.add_argument("--df", type=float, default=1.0)
    p.add_argument("--du", type=float, default=1.0)
    _add_common(p)
    p.set_defaults(func=_cmd_vary)

    p = sub.add_parser("interp", help="interpolate two texton documents")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--eta", type=float, required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_interp)

    p = sub.add_parser("morph", help="spatially ramped interpolation")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--axis", choices=["x", "y"], default="x")
    _add_common(p)
    p.set_defaults(func=_cmd_morph)

    p = sub.add_parser("edit", help="transform one texton")
    p.add_argument("mode", choices=["move", "scale", "rotate"])
    p.add_argument("input")
    p.add_argument("--index", type=int, required=True)
    p.add_argument("--dx", type=float, default=0.0)
    p.add_argument("--dy", type=float, default=0.0)
    p.add_argument("--factor", type=float, default=1.0)
    p.add_argument("--theta", type=float, default=0.0)
    _add_common(p)
    p.set_defaults(func=_cmd_edit)

    p = sub.add_parser("propagate", help="copy an image edit onto other textons")
    p.add_argument("original")
    p.add_argument("edited")
    p.add_argument("set")
    p.add_argument("--targets", required=True, help="texton indices, comma-separated")
    p.add_argument("--threshold", type=float, default=editing.EDIT_THRESHOLD)
    _add_common(p)
    p.set_defaults(func=_cmd_propagate)

    p = sub.add_parser("merge", help="stitch patch documents into one")
    p.add_argument("patches", nargs="+")
    p.add_argument("--offsets", required=True, help='placements "x,y;x,y;..."')
    p.add_argument("--overlap", type=float, default=0.0)
    _add_common(p)
    p.set_defaults(func=_cmd_merge)

    p = sub.add_parser("rescale", help="uniformly rescale all textons")
    p.add_argument("input")
    p.add_argument("--scale", type=float, required=True)
    p.add_argument("--anchor", help='fixed point "x,y" (default frame center)')
    _add_common(p)
    p.set_defaults(func=_cmd_rescale)

    p = sub.add_parser("animate", help="render a flow-field animation")
    p.add_argument("mode", choices=["shear", "vortex"])
    p.add_argument("input")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--velocity", type=float, default=0.2)
    p.add_argument("--duration", type=float, default=0.0)
    p.add_argument("--omega", type=float, default=0.1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--prefix", default="frame")
    p.add_argument("--format", choices=["png", "ppm"], default="png")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_animate)

    p = sub.add_parser("cc", help="matching cost between two documents")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--margin", type=float, default=0.0)
    p.set_defaults(func=_cmd_cc)

    p = sub.add_parser("metrics", help="mask losses and image distances")
    p.add_argument("--masks")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--patch", type=int, default=2)
    p.add_argument("--projections", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("serve", help="run the HTTP edit-session service")
    p.add_argument("--addr", default="127.0.0.1:8765")
    p.set_defaults(func=_cmd_serve)

    return top


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return int(args.func(args) or 0)
    except Exception as e:  # CLI boundary: report and signal failure
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
