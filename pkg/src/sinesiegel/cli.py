"""Command-line front end.

Exit codes: 0 success, 2 precondition failure, 3 stage failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import arithmetic, cells, circlemaps, covering, escape
from . import model as model_mod
from .pipeline import ExperimentConfig, StageFailure, run_pipeline
from .render import render_siegel


def _add_theta(p):
    p.add_argument("--theta", default="golden",
                   help='decimal, "golden", "silver", "david-demo", or "[a1,a2,...]"')


def _parse_levels(text):
    if ".." in text:
        lo, hi = text.split("..")
        return int(lo), int(hi)
    n = int(text)
    return n, n


def _load_model(args) -> model_mod.ConformalModel:
    if getattr(args, "model", None):
        payload = json.loads(Path(args.model).read_text())
        return model_mod.ConformalModel.from_dict(payload)
    return model_mod.ConformalModel.build(args.theta)


def _write_csv(path, header, rows):
    out = open(path, "w", newline="") if path != "-" else sys.stdout
    writer = csv.writer(out)
    writer.writerow(header)
    writer.writerows(rows)
    if path != "-":
        out.close()


def cmd_classify(args):
    spec = arithmetic.parse_theta(args.theta)
    cf = spec.continued_fraction(args.depth)
    klass = arithmetic.classify(cf)
    payload = {"theta": spec.value, "quotients": list(cf.quotients),
               "convergents": [list(c) for c in cf.convergents],
               "class": klass.kind.value,
               "constants": {"bound_B": klass.bound_B, "david_C": klass.david_C,
                             "window": klass.window}}
    text = json.dumps(payload, indent=2 if not args.json else None, sort_keys=True)
    print(text)
    return 0


def cmd_interlacing(args):
    spec = arithmetic.parse_theta(args.theta)
    qts = None
    if spec.quotient_rule is not None:
        qts = [spec.quotient_rule(n) for n in range(1, args.depth + 9)]
    elif spec.quotients is not None:
        qts = list(spec.quotients)
    rep = arithmetic.denominator_interlacing_check(
        spec.exact if spec.exact is not None else spec.value,
        args.depth, theta_quotients=qts)
    payload = {"all_pass": rep.all_pass, "david_theta": rep.david_theta,
               "david_alpha": rep.david_alpha, "ratio": rep.constant_ratio,
               "rows": [{"n": r.n, "lower": r.lower, "upper": r.upper,
                         "witnesses": list(r.witnesses), "passed": r.passed}
                        for r in rep.rows]}
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_model(args):
    model = model_mod.ConformalModel.build(
        args.theta, degree=args.degree, resolution=args.resolution,
        rho_iters=args.iters)
    Path(args.out).write_text(json.dumps(model.to_dict(), sort_keys=True))
    diag = {k: v for k, v in model.diagnostics.items()}
    print(json.dumps({"t": model.t, "out": args.out, **diag},
                     indent=2, sort_keys=True, default=float))
    return 0


def cmd_partitions(args):
    model = _load_model(args)
    g = model.doubled_circle_map()
    lo, hi = _parse_levels(args.level)
    table = circlemaps.critical_preimages(g, hi + 2)
    rows = []
    for n in range(lo, hi + 1):
        part = circlemaps.dynamical_partition(g, n, table=table)
        for a in part.arcs:
            rows.append([n, a.family_level, a.family_i, a.left_index,
                         a.right_index, f"{a.lo:.12f}", f"{a.hi:.12f}"])
        rep = circlemaps.partition_lemmas_check(g, n, table=table)
        print(f"level {n}: cell/dynamical {rep.cell_vs_dynamical_ok} "
              f"persistence {rep.persistence_ok} containment "
              f"{rep.containment_ok} delta_emp {rep.delta_emp:.4f}",
              file=sys.stderr)
    _write_csv(args.csv, ["level", "family_level", "family_index",
                          "left_index", "right_index", "angle_lo", "angle_hi"],
               rows)
    return 0


def cmd_real_bounds(args):
    model = _load_model(args)
    g = model.doubled_circle_map()
    lo, hi = _parse_levels(args.levels)
    rows = circlemaps.real_bounds_report(g, range(lo, hi + 1))
    _write_csv(args.csv, ["level", "ratio_inner_return", "ratio_deep_return",
                          "ratio_critical_value", "adjacent_comparability",
                          "pre_asymptotic"],
               [[r.level, f"{r.ratio_inner_return:.9f}",
                 f"{r.ratio_deep_return:.9f}",
                 f"{r.ratio_critical_value:.9f}",
                 f"{r.adjacent_comparability:.9f}", r.pre_asymptotic]
                for r in rows])
    return 0


def cmd_cells(args):
    model = _load_model(args)
    g = model.doubled_circle_map()
    lo, hi = _parse_levels(args.levels)
    table = circlemaps.critical_preimages(g, hi)
    rows = []
    for n in range(lo, hi + 1):
        ann = cells.build_cells(g, n, table=table)
        comm = ann.side_commensurability()
        rows.append([n, ann.n_cells, f"{comm.max():.6f}", f"{comm.mean():.6f}",
                     f"{ann.depths.max():.6f}"])
    _write_csv(args.report, ["level", "cells", "max_side_ratio",
                             "mean_side_ratio", "max_depth"], rows)
    return 0


def cmd_extension(args):
    model = _load_model(args)
    g = model.doubled_circle_map()
    H = cells.build_extension(g, args.max_level)
    rows = cells.dilatation_report(H)
    _write_csv(args.dilatation_csv,
               ["level", "a_next2", "max_beltrami", "max_dilatation",
                "yoccoz_ratio", "samples", "degenerate"],
               [[r.level, r.a_next2, f"{r.max_beltrami:.9f}",
                 f"{r.max_dilatation:.6f}",
                 "" if math.isnan(r.yoccoz_ratio) else f"{r.yoccoz_ratio:.6f}",
                 r.samples, r.degenerate] for r in rows])
    return 0


def cmd_area_decay(args):
    model = _load_model(args)
    lo, hi = _parse_levels(args.levels)
    decay = escape.area_decay_experiment(
        model, range(lo, hi + 1), resolution=args.res,
        max_iter=args.max_iter)
    _write_csv(args.csv, ["level", "area", "pixels"],
               [[n, f"{decay.areas.get(n, 0.0):.12e}", decay.pixel_counts[n]]
                for n in decay.levels])
    print(json.dumps({"delta_fit": decay.delta_fit,
                      "recursion_ok": decay.recursion_ok,
                      "escape_fraction": decay.escape_fraction,
                      "flags": decay.flags}, indent=2, sort_keys=True),
          file=sys.stderr)
    return 0


def cmd_david_check(args):
    from .gridfield import GridField
    if args.field == "mu":
        model = _load_model(args)
        g = model.doubled_circle_map()
        H = cells.build_extension(g, args.max_level)
        res = args.res
        fieldg = GridField.empty((-1.7, 1.7, -1.7, 1.7), res)
        z = fieldg.centers().ravel()
        vals = np.zeros(z.shape)
        for s in range(0, len(z), 1 << 17):
            vals[s:s + (1 << 17)] = escape.mu_magnitude(
                model, H, z[s:s + (1 << 17)], max_iter=args.max_iter)
        fieldg.values = vals.reshape(res, res)
    else:
        fieldg = GridField.load(args.field)
    lo, hi, cnt = args.eps.split(":")
    eps = np.exp(np.linspace(math.log(float(lo)), math.log(float(hi)), int(cnt)))
    fit = escape.david_condition_fit(fieldg, eps)
    print(json.dumps({"alpha_fit": fit.alpha_fit, "M_fit": fit.M_fit,
                      "r_squared": fit.r_squared, "passed": fit.passed,
                      "areas": list(fit.areas), "epsilons": list(fit.epsilons)},
                     indent=2, sort_keys=True))
    return 0


def cmd_covering_demo(args):
    rng = np.random.default_rng(args.seed)
    rows = []
    failures = []
    for trial in range(args.trials):
        n = int(rng.integers(1, args.n + 1))
        fam = covering.random_family(rng, n, args.k)
        sel = covering.best_disjoint_subfamily(fam)
        chk = covering.covering_check(fam, sel)
        rows.append([trial, n, len(sel.indices), sel.exact, chk.passed,
                     chk.L, chk.radius_bound_ok])
        if not chk.passed:
            failures.append({"trial": trial,
                             "disks": [[p.center.real, p.center.imag, p.radius]
                                       for p in fam.pairs]})
    _write_csv(args.csv, ["trial", "n", "selected", "exact", "covered",
                          "L", "radius_bound_ok"], rows)
    if failures:
        Path("covering_counterexamples.json").write_text(
            json.dumps(failures, indent=2))
        print(f"{len(failures)} failures exported", file=sys.stderr)
    return 0


def cmd_render(args):
    result = render_siegel(args.theta, resolution=args.resolution,
                           iters=args.iters)
    if result.non_irrational_warning:
        print("warning: theta resolves to a rational number; "
              "classification degenerates", file=sys.stderr)
    result.save_ppm(args.out)
    if args.png:
        result.save_png(args.png)
    print(json.dumps({"boundary_hits_px": result.boundary_hits,
                      "orbit_hausdorff_px": result.orbit_hausdorff_px,
                      "symmetry_defect_px": result.symmetry_defect_px},
                     indent=2, sort_keys=True))
    return 0


def cmd_pipeline(args):
    if args.config:
        config = ExperimentConfig.from_json(args.config)
    else:
        config = ExperimentConfig()
    for name in ("theta", "out_dir", "seed"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(config, name, val)
    if args.fast:
        config.boundary_resolution = 1024
        config.area_resolution = 512
        config.mu_resolution = 256
        config.area_max_iter = 200
        config.level_hi = min(config.level_hi, 4)
        config.rho_iters = 50_000
        config.lock_budget = 100_000
    run_pipeline(config)
    print(json.dumps({"out": config.out_dir}, sort_keys=True))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="sinesiegel")
    sub = p.add_subparsers(dest="cmd", required=True)

    q = sub.add_parser("classify", help="continued fraction and class of theta")
    _add_theta(q)
    q.add_argument("--depth", type=int, default=30)
    q.add_argument("--json", action="store_true")
    q.set_defaults(func=cmd_classify)

    q = sub.add_parser("interlacing", help="doubling denominator interlacing")
    _add_theta(q)
    q.add_argument("--depth", type=int, default=20)
    q.set_defaults(func=cmd_interlacing)

    q = sub.add_parser("model", help="build the conformal model")
    _add_theta(q)
    q.add_argument("--degree", type=int, default=64)
    q.add_argument("--resolution", type=int, default=2048)
    q.add_argument("--iters", type=int, default=200_000)
    q.add_argument("--out", default="model.json")
    q.set_defaults(func=cmd_model)

    q = sub.add_parser("partitions", help="dynamical/cell partitions and checks")
    _add_theta(q)
    q.add_argument("--model", help="model.json to reuse")
    q.add_argument("--level", default="3")
    q.add_argument("--csv", default="-")
    q.set_defaults(func=cmd_partitions)

    q = sub.add_parser("real-bounds", help="real-bounds comparability ratios")
    _add_theta(q)
    q.add_argument("--model")
    q.add_argument("--levels", default="2..6")
    q.add_argument("--csv", default="-")
    q.set_defaults(func=cmd_real_bounds)

    q = sub.add_parser("cells", help="cell annuli and commensurability")
    _add_theta(q)
    q.add_argument("--model")
    q.add_argument("--levels", default="2..5")
    q.add_argument("--report", default="-")
    q.set_defaults(func=cmd_cells)

    q = sub.add_parser("extension", help="extension H and its dilatation")
    _add_theta(q)
    q.add_argument("--model")
    q.add_argument("--max-level", type=int, default=5)
    q.add_argument("--dilatation-csv", default="-")
    q.set_defaults(func=cmd_extension)

    q = sub.add_parser("area-decay", help="spherical areas of escape levels")
    _add_theta(q)
    q.add_argument("--model")
    q.add_argument("--levels", default="1..5")
    q.add_argument("--res", type=int, default=1024)
    q.add_argument("--max-iter", type=int, default=400)
    q.add_argument("--csv", default="-")
    q.set_defaults(func=cmd_area_decay)

    q = sub.add_parser("david-check", help="exponential-area condition fit")
    _add_theta(q)
    q.add_argument("--model")
    q.add_argument("--field", default="mu",
                   help='"mu" to sample the model field, or a field file')
    q.add_argument("--eps", default="0.02:0.5:12")
    q.add_argument("--res", type=int, default=512)
    q.add_argument("--max-level", type=int, default=5)
    q.add_argument("--max-iter", type=int, default=400)
    q.set_defaults(func=cmd_david_check)

    q = sub.add_parser("covering-demo", help="random covering-lemma corpus")
    q.add_argument("--n", type=int, default=12)
    q.add_argument("--k", type=float, default=2.0)
    q.add_argument("--trials", type=int, default=1000)
    q.add_argument("--seed", type=int, default=1)
    q.add_argument("--csv", default="-")
    q.set_defaults(func=cmd_covering_demo)

    q = sub.add_parser("render", help="Siegel disk of e^{2 pi i theta} sin z")
    _add_theta(q)
    q.add_argument("--resolution", type=int, default=1024)
    q.add_argument("--iters", type=int, default=2000)
    q.add_argument("--out", default="siegel.ppm")
    q.add_argument("--png")
    q.set_defaults(func=cmd_render)

    q = sub.add_parser("pipeline", help="full experiment pipeline")
    q.add_argument("--config")
    q.add_argument("--theta")
    q.add_argument("--out-dir", dest="out_dir")
    q.add_argument("--seed", type=int)
    q.add_argument("--fast", action="store_true",
                   help="reduced resolutions for smoke runs")
    q.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, arithmetic.DepthTooSmall) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
