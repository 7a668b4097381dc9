"""``dag-diffuse`` command line.

Every subcommand prints a tab-delimited report on stdout; ``--figures DIR``
additionally renders PNG figures next to it.  ``--config FILE`` supplies
``key=value`` defaults that explicit flags override.
"""

import argparse
import glob
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .apps import (
    EVAL_KEEP_RATIOS,
    PairwiseEmbedding,
    TrainConfig,
    colorize,
    evaluate_keep_ratios,
    geometric_pairwise_features,
    keep_mask,
    refine_labels,
    restore_ab,
    scribble_propagate_image,
    train_pairwise_embedding,
    two_region_image,
)
from .builders import (
    GridSpec,
    NeighborMode,
    build_grid_dags,
    build_pointcloud_dags,
    build_superpixel_dags,
    estimate_normals,
)
from .checks import format_report, run_checks
from .color import lab_to_rgb, rgb_to_lab
from .errors import DagDiffuseError
from .kernels import KernelConfig
from .propagate import propagate_all


def _kernel(args):
    return KernelConfig(args.kernel, bias=args.bias)


def _emit(rows, header, out=None):
    out = out or sys.stdout
    out.write("\t".join(header) + "\n")
    for row in rows:
        out.write("\t".join(r if isinstance(r, str) else "%.10g" % r for r in row) + "\n")


def _dagset_summary(dagset):
    rows = [(dag.direction_tag, str(dag.num_vertices), str(dag.num_edges), str(s.num_groups))
            for dag, s in dagset]
    _emit(rows, ("direction", "vertices", "edges", "groups"))


def _figdir(args):
    if getattr(args, "figures", None):
        os.makedirs(args.figures, exist_ok=True)
        return Path(args.figures)
    return None


def _load_embedding(path, seed):
    return PairwiseEmbedding.load(path) if path else PairwiseEmbedding.initial(seed=seed)


# -- subcommands --------------------------------------------------------------

def cmd_build_grid(args):
    dagset = build_grid_dags(GridSpec(args.height, args.width))
    io.write_dagset(args.out, dagset)
    _dagset_summary(dagset)


def cmd_build_superpixels(args):
    labels = io.read_labels(args.labels)
    dagset, centroids = build_superpixel_dags(labels, jitter_seed=args.seed)
    io.write_dagset(args.out, dagset)
    io.write_fm(Path(args.out) / "centroids.fm", centroids)
    _dagset_summary(dagset)


def cmd_build_cloud(args):
    cloud = io.read_cloud(args.cloud)
    if args.estimate_normals:
        cloud = cloud.with_normals(estimate_normals(cloud, args.normal_k))
    mode = NeighborMode(args.mode, args.radius, args.k)
    dagset = build_pointcloud_dags(cloud, mode, jitter_seed=args.seed)
    io.write_dagset(args.out, dagset)
    if cloud.normals is not None and cloud.colors is not None:
        io.write_fm(Path(args.out) / "pairwise.fm", geometric_pairwise_features(cloud, dagset))
    _dagset_summary(dagset)


def cmd_propagate(args):
    dagset = io.read_dagset(args.graph)
    weights = io.read_weight_set(args.weights, dagset)
    u = io.read_fm(args.unary)
    on_step = None
    if args.dump_steps:
        os.makedirs(args.dump_steps, exist_ok=True)
        dump = Path(args.dump_steps)
        on_step = lambda s, d, p, h: io.write_fm(dump / f"s{s:02d}_d{d:02d}_g{p:05d}.fm", h)
    h = propagate_all(dagset, weights, u, args.fuse, args.sweeps, on_step)
    io.write_fm(args.out, h)
    _emit([(str(h.shape[0]), str(h.shape[1]), float(h.min(initial=0.0)), float(h.max(initial=0.0)))],
          ("vertices", "channels", "min", "max"))


def cmd_colorize(args):
    rgb = io.read_image(args.image)
    if rgb.ndim != 3:
        raise DagDiffuseError(f"{args.image}: colorize needs a colour PPM")
    lab = rgb_to_lab(rgb)
    keep = keep_mask(lab.shape[:2], args.keep_ratio, np.random.default_rng(args.seed))
    emb = _load_embedding(args.embedding, args.seed)
    cfg = _kernel(args)
    L, ab = lab[..., 0], lab[..., 1:]
    out = colorize(L, ab * keep[..., None], keep, emb, cfg)
    io.write_image(args.out, out)
    restored = restore_ab(L, ab * keep[..., None], keep, emb, cfg)
    free = ~keep
    mse = float(np.mean((restored[free] - ab[free]) ** 2)) if free.any() else 0.0
    _emit([(str(int(keep.sum())), str(keep.size), mse)], ("kept", "pixels", "ab_mse"))
    figs = _figdir(args)
    if figs is not None:
        from .plotting import plot_colorization

        gray = lab_to_rgb(np.stack([L, np.zeros_like(L), np.zeros_like(L)], axis=-1))
        sparse = np.where(keep[..., None], rgb, gray)
        plot_colorization([("input", sparse), ("restored", out), ("reference", rgb)],
                          figs / "colorize.png")


def cmd_scribble(args):
    img = io.read_image(args.image)
    L = rgb_to_lab(img)[..., 0] if img.ndim == 3 else 100.0 * img
    mask = io.read_mask(args.mask)
    emb = _load_embedding(args.embedding, args.seed)
    soft = scribble_propagate_image(L, mask, emb, _kernel(args), args.fuse, args.sweeps)
    io.write_image(args.out, soft)
    _emit([(str(int(mask.sum())), float(soft.mean()), float(soft.max(initial=0.0)))],
          ("scribbled", "mean", "max"))
    figs = _figdir(args)
    if figs is not None:
        from .plotting import plot_mask

        plot_mask(soft, figs / "scribble.png")


def cmd_refine_labels(args):
    dagset = io.read_dagset(args.graph)
    scores = io.read_fm(args.scores)
    pairwise = io.read_fm(args.pairwise)
    refined, labels = refine_labels(scores, dagset, pairwise, _kernel(args), args.fuse, args.sweeps)
    io.write_fm(args.out, refined)
    before = np.argmax(scores, axis=1)
    _emit([(str(len(labels)), str(int(np.sum(labels != before))))], ("vertices", "changed"))


def cmd_train(args):
    if args.images:
        paths = sorted(glob.glob(args.images))
        if not paths:
            raise DagDiffuseError(f"no images match {args.images!r}")
        images = [io.read_image(p) for p in paths]
    else:
        images = [two_region_image(args.size)]
    cfg = TrainConfig(args.lr, args.steps, args.keep_ratio, args.seed, _kernel(args))
    emb, trace = train_pairwise_embedding(images, cfg)
    emb.save(args.out)
    _emit([(str(t), v) for t, v in enumerate(trace)], ("step", "loss"))
    mse = evaluate_keep_ratios(emb, images[0], EVAL_KEEP_RATIOS, range(5), cfg.kernel)
    _emit([(f"{r:g}", m) for r, m in zip(EVAL_KEEP_RATIOS, mse)], ("keep_ratio", "mse"))
    figs = _figdir(args)
    if figs is not None:
        from .plotting import plot_keep_ratio_curve, plot_loss_trace

        plot_loss_trace(trace, figs / "loss.png")
        plot_keep_ratio_curve(EVAL_KEEP_RATIOS, mse, figs / "keep_ratio_mse.png")


def cmd_check(args):
    results = run_checks(args.seed)
    sys.stdout.write(format_report(results, args.seed))
    figs = _figdir(args)
    if figs is not None:
        from .plotting import plot_check_summary

        plot_check_summary(results, figs / "checks.png")
    return 0 if all(r.passed for r in results) else 1


# -- parser ---------------------------------------------------------------------

def _add_kernel(p):
    p.add_argument("--kernel", choices=("prod", "embed", "inner_product", "embedded_gaussian"),
                   default="prod")
    p.add_argument("--bias", type=float, default=-0.5, help="embedded-Gaussian bias")


def _add_fusion(p):
    p.add_argument("--fuse", choices=("max", "mean"), default="max")
    p.add_argument("--sweeps", type=int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(prog="dag-diffuse", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value defaults for the subcommand")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-grid", help="four directional DAGs over an image grid")
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_grid)

    p = sub.add_parser("build-superpixels", help="four DAGs over a superpixel label map")
    p.add_argument("--labels", required=True)
    p.add_argument("--seed", type=int, default=0, help="jitter seed for tied centroids")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_superpixels)

    p = sub.add_parser("build-cloud", help="six axis DAGs over a point cloud")
    p.add_argument("--cloud", required=True)
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--mode", choices=("euclidean", "tangent"), default="euclidean")
    p.add_argument("--estimate-normals", action="store_true")
    p.add_argument("--normal-k", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_cloud)

    p = sub.add_parser("propagate", help="propagate a unary over a graph directory")
    p.add_argument("--graph", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--unary", required=True)
    _add_fusion(p)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-steps", help="write h after every batched step to DIR")
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("colorize", help="restore colour from sparse pixels")
    p.add_argument("--image", required=True)
    p.add_argument("--keep-ratio", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--embedding")
    _add_kernel(p)
    p.add_argument("--out", required=True)
    p.add_argument("--figures")
    p.set_defaults(func=cmd_colorize)

    p = sub.add_parser("scribble", help="spread a scribble mask over an image")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--embedding")
    p.add_argument("--seed", type=int, default=0)
    _add_kernel(p)
    _add_fusion(p)
    p.add_argument("--out", required=True)
    p.add_argument("--figures")
    p.set_defaults(func=cmd_scribble)

    p = sub.add_parser("refine-labels", help="propagate class scores over a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--pairwise", required=True)
    _add_kernel(p)
    _add_fusion(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_refine_labels)

    p = sub.add_parser("train", help="fit the patch embedding for colour restoration")
    p.add_argument("--images", help="glob of PPM files; default is a synthetic image")
    p.add_argument("--size", type=int, default=32, help="synthetic image size")
    p.add_argument("--keep-ratio", type=float, default=0.02)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    _add_kernel(p)
    p.add_argument("--out", required=True)
    p.add_argument("--figures")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("check", help="run the seeded invariant suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--figures")
    p.set_defaults(func=cmd_check)
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = io.read_config(known.config)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in subparsers.choices.values():
        dests = {a.dest: a for a in sp._actions}
        unknown = set(values) - set(dests)
        if unknown == set(values):
            continue
        hits = {k: v for k, v in values.items() if k in dests}
        for k, v in hits.items():
            act = dests[k]
            act.required = False
            if isinstance(act, argparse._StoreTrueAction):
                hits[k] = v.lower() in ("1", "true", "yes", "on")
        sp.set_defaults(**hits)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except (DagDiffuseError, ValueError, OSError) as exc:
        print(f"dag-diffuse: error: {exc}", file=sys.stderr)
        return 2
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
