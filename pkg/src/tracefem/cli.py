"""Experiment runner: config parsing, orchestration, bit-stable CSV.

Subcommands: quadcheck, project, heat, diagnose, dtsweep, converge.
Exit codes: 0 success, 1 numerical failure, 2 assumption violation,
64 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import diagnostics as dg
from .assembly import assemble, assemble_fourier, export_matrices
from .cutquad import arc_cover_defect, build_topology, oscillation_order
from .errors import InvalidConfig, TraceFemError
from .geometry import LevelSetSurface, check_resolution
from .heatsolver import (MANUFACTURED, HeatRun, accumulate_errors,
                         ConvergenceTable, run)
from .mesh import build_background, select_active, write_vtk
from .operators import DiscreteOperators

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_ASSUMPTION = 2
EXIT_CONFIG = 64

_DEFAULTS = {
    "center": [0.0, 0.0],
    "radius": 1.0,
    "bbox": [-1.5, 1.5],
    "n_cells": [48, 96, 192],
    "k_max": 128,
    "q_surf": 10,
    "q_vol": 6,
    "scheme": "BDF1",
    "dt_rule": "h2/4",
    "dt_list": None,
    "t_final": 0.25,
    "T_infsup": 1.0,
    "data": "decaying_mode",
    "stabilized_time_derivative": True,
    "literal_eq_matrices": False,
    "dense": True,
    "c_res": 0.5,
    "n_random": 50,
    "vtk_every": 0,
    "export_matrices": False,
    "out": ".",
    "seed": 0,
}


def fmt(x):
    """Fixed 17-significant-digit float formatting for CSV stability."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return "%d" % x
    if isinstance(x, str):
        return x
    return "%.17g" % x


def write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_dat(path, header, rows):
    """gnuplot-friendly mirror: whitespace-separated, '#' header."""
    with open(path, "w", newline="\n") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for row in rows:
            fh.write(" ".join(fmt(v) for v in row) + "\n")


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfig("cannot read config %s: %s" % (path, exc))
    if not isinstance(raw, dict):
        raise InvalidConfig("config root must be a JSON object")
    unknown = sorted(set(raw) - set(_DEFAULTS))
    if unknown:
        raise InvalidConfig("unknown config keys: %s" % ", ".join(unknown))
    cfg = dict(_DEFAULTS)
    cfg.update(raw)
    if cfg["radius"] <= 0:
        raise InvalidConfig("radius must be positive")
    if cfg["scheme"] not in ("BDF1", "BDF2", "CrankNicolson"):
        raise InvalidConfig("scheme must be BDF1, BDF2 or CrankNicolson")
    if not isinstance(cfg["n_cells"], list) or not cfg["n_cells"]:
        raise InvalidConfig("n_cells must be a non-empty list")
    if cfg["data"] not in MANUFACTURED:
        raise InvalidConfig("unknown manufactured data %r (have: %s)"
                            % (cfg["data"], ", ".join(sorted(MANUFACTURED))))
    if cfg["k_max"] < 1 or cfg["q_surf"] < 1:
        raise InvalidConfig("k_max and q_surf must be positive")
    return cfg


class Pipeline:
    """Mesh/cut/assembly/operators bundle for one mesh size."""

    def __init__(self, cfg, n_cells, need_probe=True):
        self.surface = LevelSetSurface.circle(cfg["center"], cfg["radius"])
        self.background = build_background(cfg["bbox"], n_cells)
        self.mesh = select_active(self.background, self.surface)
        self.resolution = check_resolution(self.surface, self.mesh,
                                           cfg["c_res"])
        q = oscillation_order(cfg["k_max"], self.mesh.h, cfg["q_surf"])
        self.topology = build_topology(self.surface, self.mesh, q_surf=q)
        self.system = assemble(self.mesh, self.topology)
        self.probe = assemble_fourier(self.topology, cfg["k_max"]) \
            if need_probe else None
        self.ops = DiscreteOperators(self.system, self.probe)
        self.n_cells = n_cells

    @property
    def h_nominal(self):
        return (self.background.bbox[1] - self.background.bbox[0]) \
            / self.background.n_cells


def _dt_for(cfg, pipe):
    if cfg["dt_rule"] == "h2/4":
        return pipe.h_nominal ** 2 / 4.0
    try:
        return float(cfg["dt_rule"])
    except (TypeError, ValueError):
        raise InvalidConfig("dt_rule must be 'h2/4' or a number")


def cmd_quadcheck(cfg, out):
    rows = []
    worst_rel = 0.0
    for n in cfg["n_cells"]:
        pipe = Pipeline(cfg, n, need_probe=False)
        if not pipe.resolution.passed:
            return EXIT_ASSUMPTION
        length = pipe.topology.total_length
        exact = 2.0 * np.pi * cfg["radius"]
        rel = abs(length - exact) / exact
        worst_rel = max(worst_rel, rel)
        defect = arc_cover_defect(pipe.topology)
        narcs = [len(a) for a in pipe.topology.arcs]
        # self-test: q and q+4 Gauss points on each arc must agree on
        # oscillatory integrals int cos(k theta), k <= 64
        topo2 = build_topology(pipe.surface, pipe.mesh,
                               q_surf=pipe.topology.q_surf + 4)
        spec_diff = 0.0
        for k in (1, 8, 32, 64):
            a = sum(float(w @ np.cos(k * th)) for w, th in
                    zip(pipe.topology.s_w, pipe.topology.s_theta) if len(w))
            b = sum(float(w @ np.cos(k * th)) for w, th in
                    zip(topo2.s_w, topo2.s_theta) if len(w))
            spec_diff = max(spec_diff, abs(a - b))
        rows.append([n, pipe.mesh.h, len(pipe.mesh.active), pipe.mesh.n_dofs,
                     length, rel, defect, max(narcs), spec_diff])
        if rel > 1e-10 or defect > 1e-10 or spec_diff > 1e-11:
            write_csv(os.path.join(out, "quadcheck.csv"), _QUAD_HDR, rows)
            return EXIT_NUMERICAL
    write_csv(os.path.join(out, "quadcheck.csv"), _QUAD_HDR, rows)
    return EXIT_OK


_QUAD_HDR = ["n_cells", "h", "n_active", "n_dofs", "arc_length", "rel_err",
             "cover_defect", "max_arcs_per_element", "spectral_selftest"]


def cmd_project(cfg, out):
    man = MANUFACTURED[cfg["data"]]
    table = ConvergenceTable(meta={"data": cfg["data"]})
    rows = []
    for n in cfg["n_cells"]:
        pipe = Pipeline(cfg, n)
        if not pipe.resolution.passed:
            return EXIT_ASSUMPTION
        x = pipe.ops.project(man.value, 0.0)
        el2 = pipe.ops.error_l2_star(man.value, x, 0.0)
        eh1 = pipe.ops.error_h1_star(man.value, man.dtheta, x, 0.0)
        table.add({"h": pipe.mesh.h, "e_l2_star": el2, "e_h1_star": eh1})
        rows.append([n, pipe.mesh.h, pipe.mesh.n_dofs, el2, eh1])
        if cfg["export_matrices"]:
            export_matrices(pipe.system, out, prefix="n%d_" % n)
    hdr = ["n_cells", "h", "n_dofs", "e_l2_star", "e_h1_star"]
    write_csv(os.path.join(out, "project.csv"), hdr, rows)
    write_dat(os.path.join(out, "project.dat"), hdr, rows)
    if len(rows) >= 3:
        write_csv(os.path.join(out, "project_rates.csv"),
                  ["rate_l2_star", "rate_h1_star"],
                  [[table.rate("e_l2_star"), table.rate("e_h1_star")]])
    return EXIT_OK


def cmd_heat(cfg, out):
    man = MANUFACTURED[cfg["data"]]
    pipe = Pipeline(cfg, cfg["n_cells"][0])
    if not pipe.resolution.passed:
        return EXIT_ASSUMPTION
    dt = _dt_for(cfg, pipe)
    hr = HeatRun(scheme=cfg["scheme"], dt=dt, t_final=cfg["t_final"],
                 stabilized_time_derivative=cfg["stabilized_time_derivative"],
                 u0=lambda th: man.value(th, 0.0), f=man.forcing,
                 manufactured=man)
    result = run(pipe.ops, hr)
    rows = []
    for i, (t, x) in enumerate(zip(result.times, result.history)):
        rows.append([t, result.l2_star_history[i], result.mean_history[i],
                     pipe.ops.error_l2_star(man.value, x, t)])
        if cfg["vtk_every"] and i % cfg["vtk_every"] == 0:
            write_vtk(pipe.mesh, os.path.join(out, "heat_%06d.vtk" % i))
    hdr = ["t", "l2_star", "mean", "e_l2_star"]
    write_csv(os.path.join(out, "heat.csv"), hdr, rows)
    write_dat(os.path.join(out, "heat.dat"), hdr, rows)
    return EXIT_OK


def cmd_diagnose(cfg, out, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for n in cfg["n_cells"]:
        pipe = Pipeline(cfg, n)
        if not pipe.resolution.passed:
            return EXIT_ASSUMPTION
        rep = dg.constants_report(pipe.ops, pipe.probe,
                                  t_final=cfg["T_infsup"], mesh_id="n%d" % n)
        # random-vector dual-norm sandwich audit
        bound = rep.norm_Ph_H1star + rep.C_inv_h
        sandwich_ok = True
        for _ in range(cfg["n_random"]):
            x = rng.standard_normal(pipe.mesh.n_dofs)
            lo = pipe.ops.dual_norm(x)
            hi = pipe.ops.hm1_star(x)
            if lo > hi * (1.0 + 0.02) or hi > bound * lo * (1.0 + 0.02):
                sandwich_ok = False
        lam_ok = (rep.norm_Ph_H1gamma <= rep.inv_Lambda_h * 1.02
                  and rep.inv_Lambda_h <= bound * 1.02
                  and rep.Lambda_h <= 1.0 + 1e-9)
        rows.append(rep.row() + [sandwich_ok, lam_ok])
    hdr = list(dg.ConstantsReport.FIELDS) + ["sandwich_pass", "lambda_pass"]
    write_csv(os.path.join(out, "diagnose.csv"), hdr, rows)
    if not all(r[-1] and r[-2] for r in rows):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_dtsweep(cfg, out):
    pipe = Pipeline(cfg, cfg["n_cells"][0], need_probe=False)
    if not pipe.resolution.passed:
        return EXIT_ASSUMPTION
    dts = cfg["dt_list"] or [2.0 ** (-e) for e in range(4, 25)]
    literal = cfg["literal_eq_matrices"]
    rows = []
    for dt in dts:
        kb = dg.condition_number(pipe.system, dt, stabilized_time=False,
                                 literal=literal)
        kbs = dg.condition_number(pipe.system, dt, stabilized_time=True,
                                  literal=literal)
        rows.append([dt, kb, kbs])
    rows.append([0.0, 0.0, dg.kappa_pstar(pipe.system)])  # dt=0 row: kappa(P*)
    hdr = ["dt", "kappa_B", "kappa_Bstar"]
    write_csv(os.path.join(out, "dtsweep.csv"), hdr, rows)
    write_dat(os.path.join(out, "dtsweep.dat"), hdr, rows)
    return EXIT_OK


def cmd_converge(cfg, out):
    if len(cfg["n_cells"]) < 3:
        raise InvalidConfig("converge needs a ladder of >= 3 meshes")
    man = MANUFACTURED[cfg["data"]]
    table = ConvergenceTable(meta={"dt_rule": cfg["dt_rule"],
                                   "scheme": cfg["scheme"],
                                   "data": cfg["data"]})
    rows = []
    for n in cfg["n_cells"]:
        pipe = Pipeline(cfg, n)
        if not pipe.resolution.passed:
            return EXIT_ASSUMPTION
        dt = _dt_for(cfg, pipe)
        hr = HeatRun(scheme=cfg["scheme"], dt=dt, t_final=cfg["t_final"],
                     stabilized_time_derivative=cfg["stabilized_time_derivative"],
                     u0=lambda th: man.value(th, 0.0), f=man.forcing,
                     manufactured=man)
        result = run(pipe.ops, hr)
        rec = accumulate_errors(pipe.ops, result, man)
        xp = pipe.ops.project(man.value, 0.0)
        proj_err = pipe.ops.error_l2_star(man.value, xp, 0.0)
        table.add({"h": pipe.mesh.h, "e_total": rec.e_total,
                   "e_l2l2": rec.e_l2l2, "proj_l2_star": proj_err})
        rows.append([n, pipe.mesh.h, dt, rec.e_total, rec.e_l2l2,
                     rec.e_l2_initial, proj_err])
    hdr = ["n_cells", "h", "dt", "e_total", "e_l2l2", "e_l2_initial",
           "proj_l2_star"]
    write_csv(os.path.join(out, "converge.csv"), hdr, rows)
    write_dat(os.path.join(out, "converge.dat"), hdr, rows)
    write_csv(os.path.join(out, "converge_rates.csv"),
              ["rate_e_total", "rate_e_l2l2", "rate_proj_l2_star", "dt_rule"],
              [[table.rate("e_total"), table.rate("e_l2l2"),
                table.rate("proj_l2_star"), cfg["dt_rule"]]])
    return EXIT_OK


_COMMANDS = {
    "quadcheck": cmd_quadcheck,
    "project": cmd_project,
    "heat": cmd_heat,
    "diagnose": cmd_diagnose,
    "dtsweep": cmd_dtsweep,
    "converge": cmd_converge,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="tracefem",
        description="Stabilized trace-FEM laboratory for the heat equation "
                    "on an embedded curve.")
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--literal-eq-matrices", action="store_true")
    parser.add_argument("--no-time-stab", action="store_true")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except InvalidConfig as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    if args.out is not None:
        cfg["out"] = args.out
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.literal_eq_matrices:
        cfg["literal_eq_matrices"] = True
    if args.no_time_stab:
        cfg["stabilized_time_derivative"] = False
    os.makedirs(cfg["out"], exist_ok=True)

    try:
        if args.subcommand == "diagnose":
            return cmd_diagnose(cfg, cfg["out"], seed=cfg["seed"])
        return _COMMANDS[args.subcommand](cfg, cfg["out"])
    except InvalidConfig as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except TraceFemError as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
