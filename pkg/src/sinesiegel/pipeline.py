"""Reproducible experiment pipeline: classify -> model build -> partitions ->
cells -> extension -> area decay -> David check, with versioned JSON reports
and RFC-4180 CSV artifacts.  All randomness is seeded explicitly and reports
carry no wall-clock data, so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import arithmetic, cells, circlemaps, escape, model as model_mod
from .gridfield import GridField

SCHEMA_VERSION = 1


class StageFailure(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause!r}")
        self.stage = stage
        self.cause = cause


@dataclass
class ExperimentConfig:
    theta: str = "golden"
    degree: int = 64
    boundary_resolution: int = 2048
    table_size: int = 65536
    rho_iters: int = 200_000
    lock_budget: int = 2_500_000
    t_tol: float = 1e-10
    fit_tol: float = 1e-6
    level_lo: int = 2
    level_hi: int = 5
    max_cell_points: int = 300_000
    area_resolution: int = 1024
    area_max_iter: int = 400
    area_box: float = 3.0
    mu_resolution: int = 512
    mu_box: float = 1.7
    eps_lo: float = 0.02
    eps_hi: float = 0.5
    eps_count: int = 12
    seed: int = 1
    out_dir: str = "out"

    def validate(self):
        positives = ["degree", "boundary_resolution", "table_size", "rho_iters",
                     "max_cell_points", "area_resolution", "area_max_iter",
                     "mu_resolution", "eps_count"]
        for name in positives:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ["t_tol", "fit_tol", "area_box", "mu_box", "eps_lo", "eps_hi"]:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0 < self.eps_lo < self.eps_hi <= 0.5):
            raise ValueError("need 0 < eps_lo < eps_hi <= 0.5")
        if self.level_lo > self.level_hi:
            raise ValueError("level_lo must not exceed level_hi")
        if self.seed is None:
            raise ValueError("seed must be explicit")
        return self

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        payload = json.loads(Path(path).read_text())
        payload.pop("schema_version", None)
        return cls(**payload).validate()

    def to_json(self, path):
        payload = {"schema_version": SCHEMA_VERSION, **asdict(self)}
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


def run_pipeline(config: ExperimentConfig) -> dict:
    """Run every stage, persisting artifacts as they complete.

    Raises StageFailure naming the first failing stage; artifacts from the
    completed stages remain on disk.
    """
    config.validate()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config_payload = {k: v for k, v in asdict(config).items() if k != "out_dir"}
    report: dict = {"schema_version": SCHEMA_VERSION,
                    "config": config_payload, "stages": {}}

    def finish(stage, payload):
        report["stages"][stage] = _jsonable(payload)
        (out / "report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True))

    # -- classify -----------------------------------------------------------
    try:
        spec = arithmetic.parse_theta(config.theta)
        cf = spec.continued_fraction(30)
        klass = arithmetic.classify(cf)
        payload = {"theta": spec.value, "name": spec.name,
                   "quotients": list(cf.quotients),
                   "convergents": [list(c) for c in cf.convergents],
                   "class": klass.kind.value, "bound_B": klass.bound_B,
                   "david_C": klass.david_C, "window": klass.window}
        (out / "classify.json").write_text(
            json.dumps(_jsonable(payload), indent=2, sort_keys=True))
        finish("classify", payload)
    except Exception as exc:
        raise StageFailure("classify", exc) from exc

    # -- model build (includes the t solve) ----------------------------------
    try:
        model = model_mod.ConformalModel.build(
            spec, degree=config.degree, resolution=config.boundary_resolution,
            table_size=config.table_size, t_tol=config.t_tol,
            rho_iters=config.rho_iters, fit_tol=config.fit_tol,
            lock_return_budget=config.lock_budget)
        (out / "model.json").write_text(
            json.dumps(_jsonable(model.to_dict()), sort_keys=True))
        finish("model", {"t": model.t, **model.diagnostics})
    except Exception as exc:
        raise StageFailure("model", exc) from exc

    # -- partitions ----------------------------------------------------------
    try:
        g = model.doubled_circle_map()
        returns = circlemaps.resolve_returns(g, config.level_hi + 3)
        top = config.level_hi
        while returns[top + 2] + returns[top + 3] > config.max_cell_points and top > config.level_lo:
            top -= 1
        table = circlemaps.critical_preimages(g, top + 2, returns=returns[:top + 4])
        rows = []
        lemma_rows = []
        for n in range(config.level_lo, top + 1):
            part = circlemaps.dynamical_partition(g, n, table=table)
            for a in part.arcs:
                rows.append([n, a.family_level, a.family_i, a.left_index,
                             a.right_index, f"{a.lo:.12f}", f"{a.hi:.12f}"])
            rep = circlemaps.partition_lemmas_check(g, n, table=table)
            lemma_rows.append([n, rep.cell_vs_dynamical_ok, rep.persistence_ok,
                               rep.persistence_rule_cases, rep.containment_ok,
                               f"{rep.delta_emp:.6f}"])
        _write_csv(out / "partitions.csv",
                   ["level", "family_level", "family_index", "left_index",
                    "right_index", "angle_lo", "angle_hi"], rows)
        _write_csv(out / "partition_lemmas.csv",
                   ["level", "cell_vs_dynamical", "persistence",
                    "persistence_cases", "containment", "delta_emp"], lemma_rows)
        bounds = circlemaps.real_bounds_report(
            g, range(config.level_lo, top + 1), table=table)
        _write_csv(out / "real_bounds.csv",
                   ["level", "ratio_inner_return", "ratio_deep_return",
                    "ratio_critical_value", "adjacent_comparability",
                    "pre_asymptotic"],
                   [[r.level, f"{r.ratio_inner_return:.9f}",
                     f"{r.ratio_deep_return:.9f}", f"{r.ratio_critical_value:.9f}",
                     f"{r.adjacent_comparability:.9f}", r.pre_asymptotic]
                    for r in bounds])
        finish("partitions", {"levels": list(range(config.level_lo, top + 1)),
                              "lemma_rows": lemma_rows})
    except Exception as exc:
        raise StageFailure("partitions", exc) from exc

    # -- cells ---------------------------------------------------------------
    try:
        layer_top = top + 1
        layers = cells.build_layers(g, layer_top, table=table)
        cell_rows = []
        for n in layers.levels:
            ann = layers.annuli[n]
            comm = ann.side_commensurability()
            cell_rows.append([n, ann.n_cells, f"{comm.max():.6f}",
                              f"{ann.depths.max():.6f}"])
        _write_csv(out / "cells.csv",
                   ["level", "cells", "max_side_ratio", "max_depth"], cell_rows)
        finish("cells", {"levels": layers.levels, "rows": cell_rows})
    except Exception as exc:
        raise StageFailure("cells", exc) from exc

    # -- extension -----------------------------------------------------------
    try:
        H = cells.build_extension(g, layer_top, table=table)
        dil = cells.dilatation_report(H)
        _write_csv(out / "dilatation.csv",
                   ["level", "a_next2", "max_beltrami", "max_dilatation",
                    "yoccoz_ratio", "samples", "degenerate"],
                   [[r.level, r.a_next2, f"{r.max_beltrami:.9f}",
                     f"{r.max_dilatation:.6f}",
                     "" if math.isnan(r.yoccoz_ratio) else f"{r.yoccoz_ratio:.6f}",
                     r.samples, r.degenerate] for r in dil])
        finish("extension", {"levels": H.levels,
                             "dilatation": [[r.level, r.max_dilatation] for r in dil]})
    except Exception as exc:
        raise StageFailure("extension", exc) from exc

    # -- area decay ----------------------------------------------------------
    try:
        area_levels = [n for n in range(config.level_lo, top + 1)
                       if n >= layers.levels[0]]
        decay = escape.area_decay_experiment(
            model, area_levels, resolution=config.area_resolution,
            box_half=config.area_box, max_iter=config.area_max_iter,
            layers=layers)
        _write_csv(out / "area_decay.csv",
                   ["level", "area", "pixels"],
                   [[n, f"{decay.areas.get(n, 0.0):.12e}", decay.pixel_counts[n]]
                    for n in area_levels])
        finish("area_decay", {
            "delta_fit": decay.delta_fit, "fitted_levels": decay.fitted_levels,
            "recursion_ok": decay.recursion_ok,
            "escape_fraction": decay.escape_fraction,
            "max_iter": decay.max_iter, "flags": decay.flags})
    except Exception as exc:
        raise StageFailure("area_decay", exc) from exc

    # -- David check ---------------------------------------------------------
    try:
        res = config.mu_resolution
        fieldg = GridField.empty((-config.mu_box, config.mu_box,
                                  -config.mu_box, config.mu_box), res)
        z = fieldg.centers().ravel()
        vals = np.zeros(z.shape)
        tile = 1 << 17
        for s in range(0, len(z), tile):
            vals[s:s + tile] = escape.mu_magnitude(
                model, H, z[s:s + tile], max_iter=config.area_max_iter)
        fieldg.values = vals.reshape(res, res)
        fieldg.save(out / "mu_field.bin")
        fieldg.to_ppm(out / "mu_field.ppm", lo=0.0, hi=1.0)
        eps = np.exp(np.linspace(math.log(config.eps_lo),
                                 math.log(config.eps_hi), config.eps_count))
        fit = escape.david_condition_fit(fieldg, eps)
        payload = {"epsilons": list(fit.epsilons), "areas": list(fit.areas),
                   "alpha_fit": fit.alpha_fit, "M_fit": fit.M_fit,
                   "r_squared": fit.r_squared, "curvature": fit.curvature,
                   "passed": fit.passed}
        (out / "david.json").write_text(
            json.dumps(_jsonable(payload), indent=2, sort_keys=True))
        finish("david_check", payload)
    except Exception as exc:
        raise StageFailure("david_check", exc) from exc

    return report
