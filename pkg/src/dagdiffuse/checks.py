"""Seeded invariant suite run by ``dag-diffuse check``.

Each check returns a :class:`CheckResult` holding the worst observed value
and the limit it is compared against.  The report is tab-delimited and
contains no timings, so two runs with the same seed are byte-identical.
"""

from dataclasses import dataclass

import numpy as np

from .apps import (
    PairwiseEmbedding,
    TrainConfig,
    colorization_loss,
    scribble_propagate,
    train_pairwise_embedding,
    two_region_image,
)
from .builders import (
    GridSpec,
    NeighborMode,
    PointCloud,
    build_grid_dags,
    build_pointcloud_dags,
    build_superpixel_dags,
)
from .color import rgb_to_lab
from .diffusion import assemble_laplacian, verify_diffusion
from .graph import check_bidirectional_symmetry, longest_path_length, schedule_groups
from .instances import central_difference, random_dag, random_instance, random_weights, relative_error
from .kernels import (
    EMBEDDED_GAUSSIAN,
    INNER_PRODUCT,
    KernelConfig,
    edge_weights,
    incoming_sum,
    kernel_backward,
    pair_kernel,
    raw_edge_weights,
)
from .propagate import propagate_backward, propagate_grouped, propagate_sequential


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    limit: float
    passed: bool
    detail: str = ""


def _le(name, value, limit, detail=""):
    return CheckResult(name, float(value), float(limit), bool(value <= limit), detail)


def check_sequential_grouped(rng, instances=100):
    worst = 0.0
    for _ in range(instances):
        dag, w, u = random_instance(rng)
        sched = schedule_groups(dag)
        worst = max(worst, relative_error(propagate_grouped(sched, dag, w, u), propagate_sequential(dag, w, u)))
    return _le("sequential_vs_grouped", worst, 1e-12, f"{instances} instances")


def check_diffusion(rng, instances=100):
    rows = ops = 0.0
    for _ in range(instances):
        dag, w, u = random_instance(rng, max_n=50)
        sched = schedule_groups(dag)
        h = propagate_grouped(sched, dag, w, u)
        rep = verify_diffusion(assemble_laplacian(dag, sched, w), u, h)
        rows = max(rows, rep.row_sum_residual, rep.raw_row_sum_residual)
        ops = max(ops, rep.operator_residual)
    return [
        _le("laplacian_row_sums", rows, 1e-12, f"{instances} instances"),
        _le("diffusion_operator", ops, 1e-12, f"{instances} instances"),
    ]


def check_propagate_gradient(rng, instances=20):
    worst = 0.0
    for _ in range(instances):
        dag, w, u = random_instance(rng, max_n=10, max_c=3)
        sched = schedule_groups(dag)
        r = rng.normal(size=u.shape)
        h = propagate_grouped(sched, dag, w, u)
        gu, gw = propagate_backward(sched, dag, w, u, h, r)
        nu = central_difference(lambda uu: np.sum(r * propagate_grouped(sched, dag, w, uu)), u)
        nw = central_difference(lambda ww: np.sum(r * propagate_grouped(sched, dag, ww, u)), w)
        worst = max(worst, relative_error(gu, nu), relative_error(gw, nw))
    return _le("propagate_gradient", worst, 1e-5, f"{instances} instances")


def smooth_kernel_instance(rng, cfg, n=6, c=4, band=1e-4):
    """Random features whose stabilisation sums stay clear of 1."""
    while True:
        dag = random_dag(rng, n, density=0.6)
        x = rng.normal(size=(n, c))
        s = incoming_sum(np.abs(raw_edge_weights(x, dag, cfg)), dag)
        if dag.num_edges and np.all(np.abs(s - 1.0) > band):
            return dag, x


def kernel_gradient_error(rng, cfg):
    dag, x = smooth_kernel_instance(rng, cfg)
    r = rng.normal(size=dag.num_edges)
    gx, gb = kernel_backward(x, dag, cfg, r)
    nx = central_difference(lambda xx: np.sum(r * edge_weights(xx, dag, cfg)), x)
    err = relative_error(gx, nx)
    if cfg.kind == EMBEDDED_GAUSSIAN:
        f = lambda b: np.sum(r * edge_weights(x, dag, KernelConfig(cfg.kind, float(b[0]), cfg.epsilon)))
        nb = central_difference(f, np.array([cfg.bias]))[0]
        err = max(err, abs(gb - nb) / max(abs(nb), 1e-8))
    return err


def check_kernel_gradient(rng, instances=20):
    out = []
    for kind in (INNER_PRODUCT, EMBEDDED_GAUSSIAN):
        cfg = KernelConfig(kind)
        worst = max(kernel_gradient_error(rng, cfg) for _ in range(instances))
        out.append(_le(f"kernel_gradient_{kind}", worst, 1e-5, f"{instances} instances"))
    return out


def check_maximum_principle(rng, instances=100):
    worst = 0.0
    for _ in range(instances):
        dag, w, u = random_instance(rng, nonnegative=True)
        h = propagate_grouped(schedule_groups(dag), dag, w, u)
        over = np.maximum(h - u.max(axis=0), 0).max(initial=0.0)
        under = np.maximum(u.min(axis=0) - h, 0).max(initial=0.0)
        worst = max(worst, over, under)
    return _le("maximum_principle", worst, 1e-12, f"{instances} instances")


def check_grid_columns():
    bad = 0
    for h in range(1, 9):
        for w in range(1, 9):
            sched = build_grid_dags(GridSpec(h, w)).schedules[0]
            if sched.num_groups != w or any(len(g) != h for g in sched.groups):
                bad += 1
    return _le("grid_column_groups", bad, 0, "H,W in 1..8")


def check_step_count(rng, instances=50):
    bad = 0
    for _ in range(instances):
        dag = random_dag(rng, int(rng.integers(1, 51)), density=float(rng.uniform(0.02, 0.3)))
        sched = schedule_groups(dag)
        steps = []
        propagate_grouped(sched, dag, random_weights(rng, dag), rng.normal(size=(dag.num_vertices, 1)),
                          on_step=lambda p, h: steps.append(p))
        if len(steps) != longest_path_length(dag) + 1 or len(steps) != sched.num_groups:
            bad += 1
    return _le("step_count_equals_T", bad, 0, f"{instances} instances")


def _builder_samples(rng):
    yield "grid", build_grid_dags(GridSpec(5, 7))
    labels = rng.integers(0, 6, size=(12, 12))
    labels = np.unique(labels, return_inverse=True)[1].reshape(labels.shape)
    yield "superpixels", build_superpixel_dags(labels, 0)[0]
    yield "cloud", build_pointcloud_dags(PointCloud(rng.uniform(size=(80, 3))), NeighborMode(k=6))


def check_symmetry(rng, pairs=10_000):
    violations = 0
    for _, dagset in _builder_samples(rng):
        violations += len(check_bidirectional_symmetry(dagset))
    a = rng.normal(size=(pairs, 5))
    b = rng.normal(size=(pairs, 5))
    asym = 0
    for kind in (INNER_PRODUCT, EMBEDDED_GAUSSIAN):
        cfg = KernelConfig(kind)
        asym += int(np.sum(pair_kernel(a, b, cfg) != pair_kernel(b, a, cfg)))
    return [
        _le("builder_bidirectional_symmetry", violations, 0, "grid, superpixels, cloud"),
        _le("kernel_symmetry_bitwise", asym, 0, f"{pairs} pairs x 2 kernels"),
    ]


def two_curve_cloud(n=20, gap=5.0):
    """Two parallel wavy curves along x, ``gap`` apart in y."""
    t = np.arange(n, dtype=np.float64)
    curve = np.stack([t, 0.2 * np.sin(t), np.zeros(n)], axis=1)
    other = curve + np.array([0.0, gap, 0.0])
    return PointCloud(np.vstack([curve, other]))


def check_path_awareness():
    n = 20
    cloud = two_curve_cloud(n)
    dagset = build_pointcloud_dags(cloud, NeighborMode(k=2, radius=1.5))
    # identical pairwise features -> inner-product affinity exactly 1
    feats = np.ones((2 * n, 3))
    scribble = np.zeros(2 * n, dtype=bool)
    scribble[0] = True
    out = scribble_propagate(dagset, feats, scribble, KernelConfig(INNER_PRODUCT))
    leak = float(np.max(np.abs(out[n:])))
    gap = float(np.max(np.abs(1.0 - out[:n])))
    return [
        _le("scribble_leak_across_components", leak, 0.0, "two disconnected curves"),
        _le("scribble_fill_along_curve", gap, 0.0, "g=1 along the curve"),
    ]


def parallel_planes(rng, side=8, spacing=0.4, gap=0.5, noise=0.01):
    """Two noisy planes ``gap`` apart, sampled on a jittered grid, with true normals."""
    gx, gy = np.meshgrid(np.arange(side) * spacing, np.arange(side) * spacing)
    base = np.stack([gx.ravel(), gy.ravel()], axis=1)
    planes = []
    for z in (0.0, gap):
        xy = base + rng.uniform(-0.02, 0.02, size=base.shape)
        planes.append(np.column_stack([xy, z + rng.normal(0, noise, len(base))]))
    pos = np.vstack(planes)
    normals = np.tile([0.0, 0.0, 1.0], (len(pos), 1))
    return PointCloud(pos, normals), len(base)


def cross_plane_edges(dagset, split):
    pairs = dagset.undirected_pairs()
    return int(np.sum((pairs[:, 0] < split) != (pairs[:, 1] < split)))


def check_tangent_vs_euclidean(rng):
    cloud, split = parallel_planes(rng)
    tangent = build_pointcloud_dags(cloud, NeighborMode("tangent", radius=1.0, k=6))
    euclid = build_pointcloud_dags(cloud, NeighborMode("euclidean", radius=1.0, k=6))
    return [
        _le("tangent_cross_plane_edges", cross_plane_edges(tangent, split), 0, "gap = 0.5 R"),
        CheckResult("euclidean_cross_plane_edges", float(cross_plane_edges(euclid, split)), 1.0,
                    cross_plane_edges(euclid, split) >= 1, "expected >= limit"),
    ]


def check_training(seed, steps=40):
    img = two_region_image(16)
    _, trace = train_pairwise_embedding([img], TrainConfig(steps=steps, keep_ratio=0.05, seed=seed))
    return CheckResult("training_loss_decreases", trace[-1], trace[0], trace[-1] < trace[0],
                       f"16x16, {steps} steps")


def check_colorize_gradient(rng):
    img = two_region_image(8)
    keep = np.zeros(64, dtype=bool)
    keep[rng.permutation(64)[:6]] = True
    samples = [(rgb_to_lab(img), keep.reshape(8, 8))]
    emb = PairwiseEmbedding.initial(3, 9, int(rng.integers(1 << 31)))
    cfg = KernelConfig()
    _, gw, _ = colorization_loss(emb, samples, cfg)
    f = lambda wt: colorization_loss(PairwiseEmbedding(wt, emb.bias), samples, cfg, with_grad=False)[0]
    return _le("colorize_chain_gradient", relative_error(gw, central_difference(f, emb.weight)), 1e-4, "8x8")


def run_checks(seed=0):
    rng = np.random.default_rng(seed)
    results = [check_sequential_grouped(rng)]
    results += check_diffusion(rng)
    results.append(check_propagate_gradient(rng))
    results += check_kernel_gradient(rng)
    results.append(check_maximum_principle(rng))
    results.append(check_grid_columns())
    results.append(check_step_count(rng))
    results += check_symmetry(rng)
    results += check_path_awareness()
    results += check_tangent_vs_euclidean(rng)
    results.append(check_colorize_gradient(rng))
    results.append(check_training(seed))
    return results


def format_report(results, seed):
    lines = [f"# dag-diffuse check seed={seed}", "check\tvalue\tlimit\tstatus\tdetail"]
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{r.name}\t{r.value:.6e}\t{r.limit:.6e}\t{status}\t{r.detail}")
    passed = sum(r.passed for r in results)
    lines.append(f"# {passed}/{len(results)} passed")
    return "\n".join(lines) + "\n"
