"""Command-line driver: build trees, evaluate potentials/capacities, verify.

Configs use the JSON schedule schema (see schedules_from_config); every
command validates its inputs before any computation, writes deterministic
CSV/JSON, and reports through exit codes: 0 success or verdict pass,
1 verdict fail, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import experiments as exp
from .cantor import (SOURCE, TARGET, ConfigError, ConstructionError, build_tree,
                     schedules_from_config)
from .capacity import CapacityIndices, direct_capacity_lower, wolff_capacity_lower
from .gauges import (SmoothedDensityGauge, TreeSmoothedDensityGauge, check_G1,
                     check_G2, check_G2_tree_gauge, content_Mh_tree, distorted_gauge,
                     frostman_tree, sample_ball_pairs)
from .potentials import (IndexDomainError, menger_curvature, riesz_potential,
                         wolff_tree)


def _out_dir(args):
    if getattr(args, "out", None):
        return args.out
    return os.environ.get("QCANTOR_OUT", ".")


def _load_config(path):
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as f:
        try:
            cfg = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}") from None
    return cfg


def _tree_from_args(args):
    cfg = _load_config(args.config)
    schedules, depth, seed = schedules_from_config(cfg)
    if getattr(args, "depth", None) is not None:
        depth = args.depth
    if getattr(args, "seed", None) is not None:
        seed = args.seed
    return build_tree(schedules, depth, seed=seed)


def _parse_depths(text):
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(d) for d in text.split(",")]


def _write_text(path, text):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(text)


def _profile_csv(profile):
    lines = ["scale_label,contribution,running_total,contribution_log"]
    for lab, c, run, lc in profile.csv_rows():
        lines.append(f"{lab},{c:.17g},{run:.17g},{lc:.17g}")
    return "\n".join(lines) + "\n"


def _profile_json(profile):
    doc = {"alpha": profile.alpha, "p": profile.p, "label": profile.label,
           "entries": [[lab, c] for lab, c in profile.entries],
           "tail": profile.tail, "total": profile.total,
           "divergent": profile.divergent, "divergence_rate": profile.divergence_rate}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


# -- subcommands --------------------------------------------------------------


def _cmd_build(args):
    tree = _tree_from_args(args)
    text = tree.to_json()
    out = args.out or os.path.join(_out_dir(args), "tree.json")
    _write_text(out, text)
    print(f"build: depth={tree.depth} K={tree.K} leaves={tree.n_leaves} -> {out}")
    return 0


def _cmd_wolff(args):
    tree = _tree_from_args(args)
    profile = wolff_tree(tree, args.side, args.alpha, args.p,
                         mass_convention=args.convention)
    text = _profile_csv(profile) if args.format == "csv" else _profile_json(profile)
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    print(f"wolff: side={args.side} total={profile.total:.17g} "
          f"divergent={profile.divergent}")
    return 0


def _cmd_riesz(args):
    tree = _tree_from_args(args)
    real = tree.realize(samples_per_leaf=args.samples_per_leaf)
    mu = real.measure(args.side)
    x = tuple(float(v) for v in args.x.split(","))
    value = riesz_potential(mu, x, args.alpha)
    doc = json.dumps({"x": list(x), "alpha": args.alpha, "value": value},
                     sort_keys=True, separators=(",", ":"))
    if args.out:
        _write_text(args.out, doc)
    print(f"riesz: I_alpha at {x} = {value:.17g}")
    return 0


def _cmd_curvature(args):
    tree = _tree_from_args(args)
    real = tree.realize(samples_per_leaf=args.samples_per_leaf)
    mu = real.measure(args.side)
    est = menger_curvature(mu, triples=args.triples, seed=tree.seed)
    doc = json.dumps(est.to_json_dict(), sort_keys=True, separators=(",", ":"))
    if args.out:
        _write_text(args.out, doc)
    print(f"curvature: c2={est.value:.17g} stderr={est.stderr:.3g} "
          f"sup={est.sup_pointwise:.6g}")
    return 0


def _cmd_capacity(args):
    tree = _tree_from_args(args)
    indices = CapacityIndices(args.alpha, args.p)
    if args.estimator == "wolff":
        est = wolff_capacity_lower(tree, indices, side=args.side, seed=tree.seed)
    else:
        real = tree.realize(samples_per_leaf=args.samples_per_leaf)
        est = direct_capacity_lower(real.measure(args.side), indices, cells=args.cells)
    doc = json.dumps(est.to_json_dict(), sort_keys=True, separators=(",", ":"))
    if args.out:
        _write_text(args.out, doc)
    print(f"capacity[{args.estimator}]: value={est.value:.17g} "
          f"convention={est.convention}")
    return 0


def _make_gauge(descriptor, real, side):
    kind, _, rest = descriptor.partition(":")
    params = dict(kv.split("=", 1) for kv in rest.split(",") if kv)
    a = float(params.get("a", 0.1))
    if kind == "smoothed":
        return TreeSmoothedDensityGauge(real, a, side=side)
    if kind == "distorted":
        return distorted_gauge(real, a)
    raise ConfigError(f"unknown gauge {descriptor!r} (use smoothed:a=… or distorted:a=…)")


def _cmd_content(args):
    tree = _tree_from_args(args)
    real = tree.realize(samples_per_leaf=args.samples_per_leaf)
    gauge = _make_gauge(args.gauge, real, args.side)
    content = content_Mh_tree(tree, args.side, gauge, realization=real)
    frost = frostman_tree(tree, args.side, gauge, realization=real)
    doc = json.dumps({"content": content.value, "gauge": content.gauge,
                      "cover_size": len(content.cover), "frostman": frost.value},
                     sort_keys=True, separators=(",", ":"))
    if args.out:
        _write_text(args.out, doc)
    print(f"content: M^h={content.value:.17g} frostman={frost.value:.17g} "
          f"cover={len(content.cover)} balls")
    return 0


def _cmd_check_gauge(args):
    tree = _tree_from_args(args)
    real = tree.realize(samples_per_leaf=args.samples_per_leaf)
    mu = real.measure(args.side)
    gauge = SmoothedDensityGauge(mu, args.a)
    pairs = sample_ball_pairs((0.0, 0.0), 1.0, args.pairs, tree.seed)
    g1 = check_G1(gauge, pairs)
    balls = [(x, r) for (x, r), _ in pairs[:max(8, args.pairs // 8)]]
    g2 = check_G2(gauge, balls, swallow_radius=4.0)
    doc = {"G1": g1.to_json_dict(), "G2": g2.to_json_dict()}
    distorted = distorted_gauge(real, args.a)
    paths = [p for p in tree.paths_at(min(2, tree.depth))][:16]
    doc["G2_distorted_chain"] = check_G2_tree_gauge(distorted, paths).to_json_dict()
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    if args.out:
        _write_text(args.out, text)
    print(f"check-gauge: C0={g1.c0:.6g} C0'={g2.c0_prime:.6g}")
    return 0


_VERIFY_TARGETS = ("thm1", "thm2a", "sharpness", "gauge-criterion", "thin-content",
                   "doubly-exp", "content-ratio")


def _cmd_verify(args):
    depths = _parse_depths(args.depths) if args.depths else None
    seed = args.seed if args.seed is not None else 0
    if args.target == "thm1":
        report = exp.verify_gamma_distortion(args.K, depths or range(2, 7), a=args.a, seed=seed)
    elif args.target == "thm2a":
        report = exp.verify_riesz_distortion(args.K, args.p, depths or range(2, 6), seed=seed)
    elif args.target == "sharpness":
        report = exp.sharpness_experiment(args.K, args.q, depths, seed=seed)
    elif args.target == "gauge-criterion":
        report = exp.gauge_criterion_experiment(args.K)
    elif args.target == "thin-content":
        report = exp.vanishing_content_experiment(args.K, depths or range(2, 17),
                                                  seed=seed)
    elif args.target == "doubly-exp":
        report = exp.doubly_exponential_experiment(args.K, depths or range(1, 33),
                                                   seed=seed)
    elif args.target == "content-ratio":
        report = exp.content_distortion_experiment(args.K, depths or range(2, 7),
                                                   a=args.a, seed=seed)
    else:
        raise ConfigError(f"unknown verify target {args.target!r}")
    csv_path, json_path = report.write(_out_dir(args))
    status = "PASS" if report.passed else "FAIL"
    print(f"verify {args.target}: {status} — {report.verdict} -> {json_path}")
    return 0 if report.passed else 1


def build_parser():
    ap = argparse.ArgumentParser(prog="qcantor",
                                 description="Cantor-pair potential laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="schedule JSON")
            p.add_argument("--depth", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)

    p = sub.add_parser("build", help="build a tree and export node logs")
    add_common(p)
    p.set_defaults(fn=_cmd_build)

    p = sub.add_parser("wolff", help="tree-formula Wolff profile")
    add_common(p)
    p.add_argument("--side", choices=(SOURCE, TARGET), required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--convention", choices=("ideal", "realized"), default="ideal")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(fn=_cmd_wolff)

    p = sub.add_parser("riesz", help="Riesz potential of a realization at a point")
    add_common(p)
    p.add_argument("--side", choices=(SOURCE, TARGET), required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--x", default="0,0", help="evaluation point 'x,y'")
    p.add_argument("--samples-per-leaf", type=int, default=1)
    p.set_defaults(fn=_cmd_riesz)

    p = sub.add_parser("curvature", help="Menger curvature of a realization")
    add_common(p)
    p.add_argument("--side", choices=(SOURCE, TARGET), required=True)
    p.add_argument("--triples", type=int, default=200_000)
    p.add_argument("--samples-per-leaf", type=int, default=1)
    p.set_defaults(fn=_cmd_curvature)

    p = sub.add_parser("capacity", help="capacity lower estimate")
    add_common(p)
    p.add_argument("--side", choices=(SOURCE, TARGET), required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--estimator", choices=("wolff", "direct"), default="wolff")
    p.add_argument("--cells", type=int, default=64)
    p.add_argument("--samples-per-leaf", type=int, default=1)
    p.set_defaults(fn=_cmd_capacity)

    p = sub.add_parser("content", help="tree-aligned h-content and Frostman flow")
    add_common(p)
    p.add_argument("--side", choices=(SOURCE, TARGET), required=True)
    p.add_argument("--gauge", default="smoothed:a=0.1")
    p.add_argument("--samples-per-leaf", type=int, default=1)
    p.set_defaults(fn=_cmd_content)

    p = sub.add_parser("check-gauge", help="doubling/summability report")
    add_common(p)
    p.add_argument("--side", choices=(SOURCE, TARGET), default=SOURCE)
    p.add_argument("--a", type=float, default=0.1)
    p.add_argument("--pairs", type=int, default=200)
    p.add_argument("--samples-per-leaf", type=int, default=1)
    p.set_defaults(fn=_cmd_check_gauge)

    p = sub.add_parser("verify", help="run a verification experiment")
    p.add_argument("target", choices=_VERIFY_TARGETS)
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--depths", default=None, help="e.g. 2..6 or 2,4,6")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--a", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    if getattr(args, "command", None) == "verify" and args.target == "sharpness" \
            and args.q is None:
        args.q = (3.0 * args.K + 1.0) / (args.K + 1.0)
    try:
        return args.fn(args)
    except (ConfigError, ConstructionError, IndexDomainError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
