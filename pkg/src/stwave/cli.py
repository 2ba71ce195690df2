"""Command line harness for convergence studies.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fileio
from .adapt import AdaptiveConfig, adaptive_loop
from .mesh import MeshHierarchy, make_initial_mesh, refine_uniform
from .optcontrol import Regularization, build_system, solve, variable_rho_system
from .postproc import (
    ConvergenceRecord, compute_eoc, discrete_h1_seminorm, element_errors, jump_seminorm,
    reconstruct_control, write_csv,
)
from .sparsela import SolverError
from .targets import U1_VARIANTS, get_target, zero_target

log = logging.getLogger("stwave")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    target: str = "u1"
    reg: str = "energy"
    levels: int = 5
    theta: float = 0.5
    rho: float | None = None
    rho_power: float | None = None
    variable_rho: bool = False
    cells: int = 4
    out: str = "results"
    dump_meshes: bool = False
    solver: str = "lu"
    u1_variant: str = "verbatim"
    marking: str = "maximum"
    max_dofs: int | None = None
    remedy: bool = False
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.target not in ("u1", "u2", "u3", "u4", "zero"):
            raise UsageError(f"unknown target {self.target!r}")
        if self.reg not in ("energy", "l2"):
            raise UsageError(f"unknown regularization {self.reg!r}")
        if self.levels < 0:
            raise UsageError("--levels must be nonnegative")
        if not 0.0 < self.theta < 1.0:
            raise UsageError(f"--theta must lie in (0, 1), got {self.theta}")
        if self.rho is not None and self.rho <= 0:
            raise UsageError("--rho must be positive")
        if self.rho_power is not None and self.rho_power not in (2, 3, 4):
            raise UsageError("--rho-power must be 2, 3 or 4")
        if self.variable_rho and self.reg != "energy":
            raise UsageError("--variable-rho is only available with --reg energy")
        if self.cells < 1:
            raise UsageError("--cells must be >= 1")
        if self.solver not in ("lu", "schur-cg"):
            raise UsageError(f"unknown solver {self.solver!r}")
        if self.u1_variant not in U1_VARIANTS:
            raise UsageError(f"unknown u1 variant {self.u1_variant!r}")
        if self.marking not in ("maximum", "bulk"):
            raise UsageError(f"unknown marking {self.marking!r}")
        return self

    def run_dir(self, mode: str) -> Path:
        d = Path(self.out) / f"{self.target}_{self.reg}_{mode}"
        d.mkdir(parents=True, exist_ok=True)
        return d


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with default settings; flags win")
    common.add_argument("--target", choices=["u1", "u2", "u3", "u4", "zero"])
    common.add_argument("--reg", choices=["energy", "l2"])
    common.add_argument("--levels", type=int)
    common.add_argument("--theta", type=float)
    common.add_argument("--rho", type=float, help="fixed regularization parameter")
    common.add_argument("--rho-power", type=float, dest="rho_power", help="rho = h^power")
    common.add_argument("--variable-rho", action="store_true", dest="variable_rho")
    common.add_argument("--cells", type=int, help="cells per side of the initial criss-cross mesh")
    common.add_argument("--out")
    common.add_argument("--dump-meshes", action="store_true", dest="dump_meshes")
    common.add_argument("--solver", choices=["lu", "schur-cg"])
    common.add_argument("--u1-variant", choices=list(U1_VARIANTS), dest="u1_variant")
    common.add_argument("--marking", choices=["maximum", "bulk"])
    common.add_argument("--max-dofs", type=int, dest="max_dofs")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="stwave", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("uniform", parents=[common], help="uniform refinement study")
    sub.add_parser("adaptive", parents=[common], help="adaptive refinement study")
    sub.add_parser("control", parents=[common], help="reconstruct the control on the finest level")
    u4 = sub.add_parser("u4-study", parents=[common], help="reduced-rate study for u4")
    u4.add_argument("--remedy", action="store_true", help="also run with rho = h^3")
    return parser


def parse_config(argv=None) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    settings = {}
    if "config" in ns:
        try:
            with open(ns.pop("config")) as fh:
                settings = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
        settings = {k.replace("-", "_"): v for k, v in settings.items()}
    verbose = ns.pop("verbose", False)
    settings.update(ns)
    if settings["command"] == "u4-study":
        settings["target"] = "u4"
        settings["reg"] = "energy"
    known = set(RunConfig.__dataclass_fields__) - {"extra"}
    unknown = set(settings) - known
    if unknown:
        raise UsageError(f"unknown settings: {', '.join(sorted(unknown))}")
    cfg = RunConfig(**settings)
    cfg.extra["verbose"] = verbose
    return cfg.validate()


def _target(cfg: RunConfig):
    if cfg.target == "zero":
        return zero_target()
    return get_target(cfg.target, cfg.u1_variant)


def _dump_level(d: Path, k, mesh, xmap, u, eta):
    fileio.write_vtk(d / f"mesh_L{k}.vtk", mesh, cell_data={"eta": eta})
    fileio.write_vtk(d / f"state_L{k}.vtk", mesh, point_data={"state": xmap.expand(u)})


def run_uniform(cfg: RunConfig, mode: str = "uniform", rho_power=None, csv_name="records.csv") -> int:
    d = cfg.run_dir(mode)
    target = _target(cfg)
    reg = Regularization(cfg.reg)
    hierarchy = MeshHierarchy([make_initial_mesh(cfg.cells)])
    records, status = [], EXIT_OK
    power = rho_power if rho_power is not None else cfg.rho_power
    for k in range(cfg.levels + 1):
        if k > 0:
            hierarchy.append(refine_uniform(hierarchy[k - 1]))
        try:
            if cfg.variable_rho:
                sys_ = variable_rho_system(hierarchy, k, target, reg)
                rho = float(np.max(sys_.rho))
            else:
                sys_ = build_system(hierarchy, k, target, reg, cfg.rho, rho_power=power)
                rho = sys_.rho
            sol = solve(sys_, cfg.solver)
        except SolverError as exc:
            log.error("level %d: %s", k, exc)
            status = EXIT_NUMERICAL
            break
        err = element_errors(sys_.mesh, sys_.xmap, sol.u, target, sys_.quad)
        records.append(ConvergenceRecord(k, sys_.xmap.count, sys_.mesh.num_elements, sys_.h, rho,
                                         err.global_error))
        log.info("level %d: N=%d dofs=%d error=%.6e", k, sys_.mesh.num_elements, sys_.xmap.count,
                 err.global_error)
        if cfg.dump_meshes:
            _dump_level(d, k, sys_.mesh, sys_.xmap, sol.u, err.eta)
    write_csv(d / csv_name, compute_eoc(records))
    return status


def run_adaptive(cfg: RunConfig) -> int:
    d = cfg.run_dir("adaptive")
    target = _target(cfg)
    acfg = AdaptiveConfig(theta=cfg.theta, max_levels=cfg.levels, max_dofs=cfg.max_dofs,
                          rho_mode="variable" if cfg.variable_rho else "scalar",
                          marking=cfg.marking, solver=cfg.solver)
    res = adaptive_loop(make_initial_mesh(cfg.cells), target, cfg.reg, acfg, keep_solutions=cfg.dump_meshes)
    write_csv(d / "records.csv", res.records)
    if cfg.dump_meshes:
        for k, (sys_, sol) in enumerate(zip(res.systems, res.solutions)):
            eta = element_errors(sys_.mesh, sys_.xmap, sol.u, target, sys_.quad).eta
            _dump_level(d, k, sys_.mesh, sys_.xmap, sol.u, eta)
    return EXIT_NUMERICAL if res.error is not None else EXIT_OK


def run_control(cfg: RunConfig) -> int:
    if cfg.levels < 1:
        raise UsageError("control reconstruction needs --levels >= 1 (controls live one level down)")
    d = cfg.run_dir("control")
    target = _target(cfg)
    reg = Regularization(cfg.reg)
    hierarchy = MeshHierarchy.uniform(cfg.cells, cfg.levels)
    rows = []
    try:
        for k in range(1, cfg.levels + 1):
            sys_ = build_system(hierarchy, k, target, reg, cfg.rho, rho_power=cfg.rho_power)
            sol = solve(sys_, cfg.solver)
            rec = reconstruct_control(hierarchy, k, sol.u, reg, p=sol.p, rho=sys_.rho)
            if reg is Regularization.ENERGY:
                fileio.write_vtk(d / f"control_L{k}.vtk", rec.mesh, cell_data={"control": rec.z})
                semi = jump_seminorm(rec.mesh, rec.z)
            else:
                nodal = sys_.ymap.expand(rec.z)
                fileio.write_vtk(d / f"control_L{k}.vtk", rec.mesh, point_data={"control": nodal})
                semi = discrete_h1_seminorm(rec.mesh, nodal)
            rows.append([k, len(rec.z), rec.mesh.num_elements, float(np.min(rec.z, initial=0.0)),
                         float(np.max(rec.z, initial=0.0)), semi])
    except SolverError as exc:
        log.error("control reconstruction failed: %s", exc)
        _write_control_csv(d / "control.csv", rows)
        return EXIT_NUMERICAL
    _write_control_csv(d / "control.csv", rows)
    return EXIT_OK


def _write_control_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level", "controls", "elements", "min", "max", "seminorm"])
        for r in rows:
            w.writerow(r[:3] + [f"{v:.17e}" for v in r[3:]])


def run_u4_study(cfg: RunConfig) -> int:
    status = run_uniform(cfg, mode="uniform")
    if cfg.remedy:
        status = max(status, run_uniform(cfg, mode="uniform", rho_power=3, csv_name="records_rho_h3.csv"))
    return status


COMMANDS = {
    "uniform": run_uniform,
    "adaptive": run_adaptive,
    "control": run_control,
    "u4-study": run_u4_study,
}


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"stwave: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if cfg.extra.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"stwave: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
