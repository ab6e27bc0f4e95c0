"""Command-line front end: ``kirigami {analyze,sweep,design,simulate,snap}``.

Every subcommand reads a YAML study file (``--config``), applies dotted
``--set key=value`` overrides and writes into ``--out``. Units are mm, kPa,
mN and µJ throughout; see ``configs/schema.md``.

Exit codes: 0 success, 1 invalid configuration or infeasible request,
2 no equilibrium converged.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import analytic, pattern, shellsim
from .laminate import (
    LayerSpec,
    TrilayerSpec,
    bending_stiffness_bilayer,
    bending_stiffness_trilayer,
    membrane_stiffness,
)
from .materials import DEFAULT_MATERIALS, InvalidMaterialError, MooneyRivlin

log = logging.getLogger("kirigami.cli")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 1, 2

DEFAULTS = {
    "materials": copy.deepcopy(DEFAULT_MATERIALS),
    "laminate": {"substrate": "substrate", "face": "kirigami_g", "poisson": 0.5},
    "pattern": {"kind": "cross", "arm_length": 60.0, "arm_width": 10.0},
    "substrate": {"kind": "square", "size": 60.0, "rotation": 0.0},
    "prestretch": [1.6],
    "analysis": {"length": None},
    "mesh": {"edge_length": 1.25, "scale_with_size": True},
    "solver": {
        "method": "newton",
        "gtol_rel": 1e-8,
        "max_iter": None,
        "load_rel": 1e-4,
        "seed_rel": 1e-2,
        "seeds": ["+", "-"],
    },
    "sweep": {"sizes": None, "simulate": False, "workers": 1},
    "design": {"target": 0.3, "free_variable": "prestretch", "shape_class": "pyramid"},
    "snap": {"steps": 20, "travel": None},
    "seed": 0,
}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _fmt(v) -> str:
    """Fixed 9-significant-digit text for floats; blanks for missing values."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float) and math.isnan(v):
        return ""
    return f"{float(v):.9g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return float(f"{f:.9g}") if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, data) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# configuration


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def apply_override(cfg: dict, assignment: str) -> None:
    """``a.b.c=value`` with ``value`` parsed as YAML."""
    if "=" not in assignment:
        raise ConfigError(assignment, "override must look like key=value")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for p in parts[:-1]:
        nxt = node.get(p)
        if nxt is None:
            nxt = node[p] = {}
        if not isinstance(nxt, dict):
            raise ConfigError(key, f"{p!r} is not a section")
        node = nxt
    value = yaml.safe_load(raw)
    if isinstance(value, str):
        # YAML 1.1 reads 1e-7 (no dot) as text
        try:
            value = float(value)
        except ValueError:
            pass
    node[parts[-1]] = value


def _prestretch_list(raw, path="prestretch") -> list[float]:
    if isinstance(raw, (int, float)):
        vals = [float(raw)]
    elif isinstance(raw, dict):
        try:
            vals = list(np.linspace(float(raw["start"]), float(raw["stop"]), int(raw["num"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(path, "range needs numeric start, stop, num") from exc
    elif isinstance(raw, list):
        try:
            vals = [float(v) for v in raw]
        except (TypeError, ValueError) as exc:
            raise ConfigError(path, "entries must be numbers") from exc
    else:
        raise ConfigError(path, "expected a number, a list or {start, stop, num}")
    if not vals:
        raise ConfigError(path, "must not be empty")
    for i, v in enumerate(vals):
        if not v >= 1.0:
            raise ConfigError(f"{path}[{i}]", f"prestretch must be >= 1, got {v}")
    return [float(v) for v in vals]


@dataclass
class StudyConfig:
    """Validated study description."""

    materials: dict
    substrate_layer: LayerSpec
    face_layer: LayerSpec
    poisson: float
    pattern: dict
    substrate: dict
    prestretch: list
    analysis_length: float | None
    edge_length: float
    scale_mesh: bool
    solver: shellsim.SolverOptions
    seeds: list
    sweep_sizes: list | None
    sweep_simulate: bool
    workers: int
    design: dict
    snap_steps: int
    snap_travel: float | None
    seed: int
    raw: dict = field(repr=False, default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "StudyConfig":
        cfg = _merge(DEFAULTS, data or {})
        mats = {}
        for name, spec in cfg["materials"].items():
            p = f"materials.{name}"
            if not isinstance(spec, dict):
                raise ConfigError(p, "expected a mapping with c1, c2, thickness")
            for k in ("c1", "c2", "thickness"):
                if not isinstance(spec.get(k), (int, float)):
                    raise ConfigError(f"{p}.{k}", "missing or not a number")
            try:
                mats[name] = LayerSpec(MooneyRivlin(float(spec["c1"]), float(spec["c2"])), float(spec["thickness"]))
            except InvalidMaterialError as exc:
                raise ConfigError(p, str(exc)) from exc
            except ValueError as exc:
                raise ConfigError(f"{p}.thickness", str(exc)) from exc
        lam = cfg["laminate"]
        for role in ("substrate", "face"):
            if lam.get(role) not in mats:
                raise ConfigError(f"laminate.{role}", f"material {lam.get(role)!r} is not defined")
        nu = float(lam.get("poisson", 0.5))
        if not 0.0 <= nu <= 0.5:
            raise ConfigError("laminate.poisson", "must lie in [0, 0.5]")

        pat = dict(cfg["pattern"])
        if pat.get("kind") not in ("cross", "lobes", "custom", "none"):
            raise ConfigError("pattern.kind", "expected cross, lobes, custom or none")
        sub = dict(cfg["substrate"])
        if sub.get("kind") not in ("square", "circle"):
            raise ConfigError("substrate.kind", "expected square or circle")
        if not isinstance(sub.get("size"), (int, float)) or sub["size"] <= 0:
            raise ConfigError("substrate.size", "must be a positive number")

        mesh = cfg["mesh"]
        h = mesh.get("edge_length")
        if not isinstance(h, (int, float)) or h <= 0:
            raise ConfigError("mesh.edge_length", "must be a positive number")

        sv = dict(cfg["solver"])
        seeds = list(sv.pop("seeds", ["+", "-"]))
        for i, s in enumerate(seeds):
            if s not in shellsim.SEEDS:
                raise ConfigError(f"solver.seeds[{i}]", f"unknown seed {s!r}")
        if not seeds:
            raise ConfigError("solver.seeds", "must not be empty")
        try:
            opts = shellsim.SolverOptions(**sv)
        except (TypeError, ValueError) as exc:
            raise ConfigError("solver", str(exc)) from exc

        sw = cfg["sweep"]
        sizes = sw.get("sizes")
        if sizes is not None:
            if not isinstance(sizes, list) or not sizes:
                raise ConfigError("sweep.sizes", "must be a non-empty list")
            if any(not isinstance(v, (int, float)) or v <= 0 for v in sizes):
                raise ConfigError("sweep.sizes", "sizes must be positive numbers")
        workers = int(sw.get("workers") or 1)
        if workers < 1:
            raise ConfigError("sweep.workers", "must be >= 1")

        des = dict(cfg["design"])
        if des.get("free_variable") not in ("prestretch", "size"):
            raise ConfigError("design.free_variable", "expected prestretch or size")
        try:
            des["shape_class"] = analytic.ShapeClass(des.get("shape_class", "pyramid"))
        except ValueError as exc:
            raise ConfigError("design.shape_class", str(exc)) from exc

        out = cls(
            materials=mats,
            substrate_layer=mats[lam["substrate"]],
            face_layer=mats[lam["face"]],
            poisson=nu,
            pattern=pat,
            substrate=sub,
            prestretch=_prestretch_list(cfg["prestretch"]),
            analysis_length=cfg["analysis"].get("length"),
            edge_length=float(h),
            scale_mesh=bool(mesh.get("scale_with_size", True)),
            solver=opts,
            seeds=seeds,
            sweep_sizes=[float(v) for v in sizes] if sizes else None,
            sweep_simulate=bool(sw.get("simulate", False)),
            workers=workers,
            design=des,
            snap_steps=int(cfg["snap"].get("steps", 20)),
            snap_travel=cfg["snap"].get("travel"),
            seed=int(cfg.get("seed", 0)),
            raw=cfg,
        )
        out.build_pattern()  # surface geometry errors at load time
        return out

    # -- geometry ------------------------------------------------------------

    def build_pattern(self, scale: float = 1.0) -> pattern.KirigamiPattern:
        p = self.pattern
        try:
            if p["kind"] == "cross":
                return pattern.cross(scale * float(p["arm_length"]), scale * float(p["arm_width"]))
            if p["kind"] == "lobes":
                return pattern.lobes(
                    int(p.get("n_lobes", 2)), scale * float(p["radius"]), float(p.get("depth", 0.35))
                )
            if p["kind"] == "custom":
                return pattern.custom([scale * np.asarray(poly, dtype=float) for poly in p.get("polygons", [])])
            return pattern.empty_pattern()
        except KeyError as exc:
            raise ConfigError(f"pattern.{exc.args[0]}", "missing") from exc
        except (pattern.GeometryError, ValueError, TypeError) as exc:
            raise ConfigError("pattern", str(exc)) from exc

    def build_substrate(self, scale: float = 1.0) -> pattern.SubstrateShape:
        s = self.substrate
        try:
            return pattern.SubstrateShape(s["kind"], scale * float(s["size"]), float(s.get("rotation", 0.0)))
        except pattern.GeometryError as exc:
            raise ConfigError("substrate", str(exc)) from exc

    def reference_length(self, scale: float = 1.0) -> float:
        """Planar size ``L`` used for H/L: the configured length, else the
        cross arm length, else the substrate span."""
        if self.analysis_length is not None:
            return scale * float(self.analysis_length)
        if self.pattern["kind"] == "cross":
            return scale * float(self.pattern["arm_length"])
        return self.build_substrate(scale).span

    def base_size(self) -> float:
        return self.reference_length(1.0)

    def scale_for(self, size: float | None) -> float:
        return 1.0 if size is None else float(size) / self.base_size()


def load_config(path: str | os.PathLike | None, overrides=()) -> StudyConfig:
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(str(path), f"cannot read: {exc.strerror}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(str(path), f"invalid YAML: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(str(path), "top level must be a mapping")
    for item in overrides:
        apply_override(data, item)
    return StudyConfig.from_dict(data)


# ---------------------------------------------------------------------------
# analyze / design


def _stiffness(cfg: StudyConfig, scale: float, lam: float):
    n = pattern.coverage_fraction(cfg.build_pattern(scale), cfg.build_substrate(scale))
    spec = TrilayerSpec(cfg.substrate_layer, cfg.face_layer, lam, n, cfg.poisson)
    return n, membrane_stiffness(cfg.substrate_layer, cfg.poisson), spec


def run_analyze(cfg: StudyConfig) -> dict:
    rows = []
    length = cfg.reference_length()
    for lam in cfg.prestretch:
        n, c_s, spec = _stiffness(cfg, 1.0, lam)
        d_tri, d_bi = bending_stiffness_trilayer(spec), bending_stiffness_bilayer(spec)
        kappa = float(analytic.curvature_from_prestretch(c_s, d_tri, lam - 1.0))
        rows.append(
            {
                "lambda": lam,
                "n": n,
                "C_s_N_per_m": c_s,
                "D_tri_uJ": d_tri,
                "D_bi_uJ": d_bi,
                "D_ratio": d_tri / d_bi,
                "kappa_per_mm": kappa,
                "hl_pyramid": float(analytic.pyramid_height_ratio(kappa, length)),
                "hl_spherical_cap": float(analytic.cap_height_ratio(kappa, length)),
            }
        )
    return {"length_mm": length, "rows": rows}


def run_design(cfg: StudyConfig, target: float | None = None, free_variable: str | None = None) -> dict:
    target = float(cfg.design["target"] if target is None else target)
    free = free_variable or cfg.design["free_variable"]
    lam = cfg.prestretch[0]
    _, c_s, spec = _stiffness(cfg, 1.0, lam)
    fixed = analytic.AnalyticInput(
        c_s, bending_stiffness_trilayer(spec), cfg.reference_length(), lam, cfg.design["shape_class"]
    )
    value = analytic.inverse_design(target, free, fixed)
    if free == "prestretch":
        check = analytic.height_ratio(analytic.AnalyticInput(c_s, fixed.d_eq, fixed.length_l, value, fixed.shape_class))
    else:
        check = analytic.height_ratio(analytic.AnalyticInput(c_s, fixed.d_eq, value, lam, fixed.shape_class))
    return {
        "target_h_over_l": target,
        "free_variable": free,
        "value": value,
        "forward_h_over_l": check,
        "shape_class": fixed.shape_class.value,
        "bound": analytic.attainable_bound(fixed, free),
    }


# ---------------------------------------------------------------------------
# simulation helpers


def build_model(cfg: StudyConfig, lam: float, scale: float = 1.0) -> shellsim.ShellModel:
    h = cfg.edge_length * (scale if cfg.scale_mesh else 1.0)
    try:
        mesh = pattern.generate_mesh(cfg.build_pattern(scale), cfg.build_substrate(scale), h)
    except pattern.ResolutionError as exc:
        raise ConfigError("mesh.edge_length", str(exc)) from exc
    mesh = pattern.assign_rest_metrics(mesh, lam)
    return shellsim.ShellModel(
        mesh, cfg.substrate_layer, cfg.face_layer, cfg.poisson, reference_length=cfg.reference_length(scale)
    )


def simulate_states(cfg: StudyConfig, lam: float, scale: float = 1.0):
    model = build_model(cfg, lam, scale)
    failures: list = []
    states = shellsim.find_stable_states(model, cfg.seeds, cfg.solver, failures)
    return model, states, failures


SWEEP_COLUMNS = [
    "lambda",
    "eps",
    "L_mm",
    "w_mm",
    "t_s_mm",
    "t_k_mm",
    "n",
    "C_s_N_per_m",
    "D_eq_N_m",
    "kappa_per_mm",
    "hl_analytic_pyramid",
    "hl_analytic_cap",
    "hl_sim",
    "hl_sim_positive",
    "hl_sim_negative",
    "n_equilibria",
    "errors",
]


def _sweep_row(args):
    cfg, size, lam, simulate = args
    scale = cfg.scale_for(size)
    length = cfg.reference_length(scale)
    n, c_s, spec = _stiffness(cfg, scale, lam)
    d_eq = bending_stiffness_trilayer(spec)
    kappa = float(analytic.curvature_from_prestretch(c_s, d_eq, lam - 1.0))
    w = scale * float(cfg.pattern["arm_width"]) if cfg.pattern["kind"] == "cross" else None
    row = {
        "lambda": lam,
        "eps": lam - 1.0,
        "L_mm": length,
        "w_mm": w,
        "t_s_mm": cfg.substrate_layer.thickness,
        "t_k_mm": cfg.face_layer.thickness,
        "n": n,
        "C_s_N_per_m": c_s,
        "D_eq_N_m": d_eq * 1e-6,
        "kappa_per_mm": kappa,
        "hl_analytic_pyramid": float(analytic.pyramid_height_ratio(kappa, length)),
        "hl_analytic_cap": float(analytic.cap_height_ratio(kappa, length)),
        "hl_sim": None,
        "hl_sim_positive": None,
        "hl_sim_negative": None,
        "n_equilibria": None,
        "errors": "",
    }
    if simulate:
        try:
            _, states, failures = simulate_states(cfg, lam, scale)
        except (ConfigError, shellsim.ElementInversionError) as exc:
            row["errors"] = str(exc)
            return row
        row["n_equilibria"] = len(states)
        # the two wells are mirror images, so either one gives |H|/L
        shapes = [st.height_ratio for st in states if st.mode in ("flat", "mode1")]
        if shapes:
            row["hl_sim"] = float(np.mean(shapes))
        for st in states:
            if st.mode == "flat":
                row["hl_sim_positive"] = row["hl_sim_negative"] = st.height_ratio
            elif st.mode == "mode1":
                key = "hl_sim_positive" if st.sign > 0 else "hl_sim_negative"
                row[key] = st.height_ratio
        row["errors"] = "; ".join(str(f) for f in failures)
        log.info("L=%g lambda=%g: %d equilibria, H/L=%s", length, lam, len(states), row["hl_sim"])
    return row


def run_sweep(cfg: StudyConfig, simulate: bool | None = None) -> list[dict]:
    simulate = cfg.sweep_simulate if simulate is None else simulate
    sizes = cfg.sweep_sizes or [None]
    jobs = [(cfg, size, lam, simulate) for size in sizes for lam in cfg.prestretch]
    if cfg.workers > 1 and simulate and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_sweep_row, jobs))  # map preserves input order
    return [_sweep_row(j) for j in jobs]


def write_sweep_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([r["errors"] if c == "errors" else _fmt(r[c]) for c in SWEEP_COLUMNS])


def run_simulate(cfg: StudyConfig, out: Path) -> dict:
    """Stable states for every configured prestretch; one subdirectory per
    value when there are several."""
    runs = []
    for lam in cfg.prestretch:
        target = out if len(cfg.prestretch) == 1 else out / f"lambda_{lam:.9g}"
        target.mkdir(parents=True, exist_ok=True)
        model, states, failures = simulate_states(cfg, lam)
        names = []
        for st in states:
            name = f"state_{st.label}.obj"
            shellsim.write_state_obj(target / name, model, st)
            names.append(name)
        _, c_s, spec = _stiffness(cfg, 1.0, lam)
        kappa = analytic.curvature_from_prestretch(c_s, bending_stiffness_trilayer(spec), lam - 1.0)
        summary = {
            "lambda": lam,
            "length_mm": model.length_scale,
            "hl_analytic_pyramid": float(analytic.pyramid_height_ratio(kappa, model.length_scale)),
            "mesh": {
                "vertices": model.mesh.n_vertices,
                "faces": len(model.mesh.faces),
                "min_angle_deg": model.mesh.min_angle_deg(),
            },
            "solver": {
                "method": cfg.solver.method,
                "gtol": cfg.solver.gtol_rel * model.c_s * model.length_scale,
                "seeds": cfg.seeds,
            },
            "states": [dict(st.summary(), obj=nm) for st, nm in zip(states, names)],
            "failures": [str(f) for f in failures],
        }
        write_json(target / "summary.json", summary)
        runs.append(summary)
    return {"runs": runs}


def run_snap(cfg: StudyConfig, out: Path) -> dict:
    lam = cfg.prestretch[0]
    model = build_model(cfg, lam)
    start = shellsim.minimize(model, None, cfg.seeds[0], cfg.solver)
    curve = shellsim.snap_through(model, start, cfg.snap_steps, cfg.snap_travel, options=cfg.solver)
    out.mkdir(parents=True, exist_ok=True)
    curve.to_csv(out / "snap_curve.csv")
    summary = {
        "lambda": lam,
        "snapped": curve.snapped,
        "negative_stiffness_segments": curve.negative_stiffness_segments(),
        "start": start.summary(),
        "final": curve.final_state.summary() if curve.final_state is not None else None,
        "peak_force_mN": float(np.max(curve.force)),
    }
    if curve.final_state is not None:
        shellsim.write_state_obj(out / f"snap_final_{curve.final_state.label}.obj", model, curve.final_state)
    write_json(out / "snap_summary.json", summary)
    return summary


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kirigami", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (
        ("analyze", "stiffnesses, curvature and analytic H/L per prestretch"),
        ("sweep", "CSV over prestretch (and sizes), optionally simulated"),
        ("design", "solve prestretch or size for a target H/L"),
        ("simulate", "find stable states, write OBJ and summary.json"),
        ("snap", "displacement-controlled snap-through curve"),
    ):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", help="YAML study file")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config entry")
        if name == "sweep":
            sp.add_argument("--simulate", action="store_true", help="also run the shell simulator")
        if name == "design":
            sp.add_argument("--target", type=float)
            sp.add_argument("--free", choices=("prestretch", "size"))
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    out = Path(args.out)
    try:
        cfg = load_config(args.config, args.set)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "analyze":
            rep = run_analyze(cfg)
            write_json(out / "analyze.json", rep)
            for r in rep["rows"]:
                print(" ".join(f"{k}={_fmt(v)}" for k, v in r.items()))
        elif args.command == "sweep":
            rows = run_sweep(cfg, True if args.simulate else None)
            write_sweep_csv(out / "sweep.csv", rows)
            print(out / "sweep.csv")
        elif args.command == "design":
            rep = run_design(cfg, args.target, args.free)
            write_json(out / "design.json", rep)
            print(f"{rep['free_variable']}={_fmt(rep['value'])} forward H/L={_fmt(rep['forward_h_over_l'])}")
        elif args.command == "simulate":
            rep = run_simulate(cfg, out)
            if not any(r["states"] for r in rep["runs"]):
                print("no equilibrium converged", file=sys.stderr)
                return EXIT_SOLVER
            for r in rep["runs"]:
                for s in r["states"]:
                    print(f"lambda={_fmt(r['lambda'])} {s['label']} H/L={_fmt(s['height_ratio'])}")
        elif args.command == "snap":
            try:
                rep = run_snap(cfg, out)
            except shellsim.NonConvergenceError as exc:
                print(f"start state did not converge: {exc}", file=sys.stderr)
                return EXIT_SOLVER
            print(f"snapped={str(rep['snapped']).lower()} segments={rep['negative_stiffness_segments']}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except analytic.InfeasibleTargetError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
