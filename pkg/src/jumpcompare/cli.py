"""Scenario configuration, the built-in gallery, batch execution, reporting.

Configs are strict JSON (unknown keys rejected, dimensions cross-checked).
Reports serialize canonically: sorted keys, shortest-round-trip floats, no
volatile fields (timing goes to stderr), so identical runs produce
byte-identical files regardless of worker count.

Exit codes are the only cross-process verdict channel:
0 = holds / no violation found, 1 = violated (or gallery disagreement,
or spot-check residual above tolerance), 2 = config or usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from . import __version__
from . import conditions, engine, generator
from .conditions import Theorem31Report, Verdict, Witness, check_theorem31
from .geometry import ConePoint
from .model import (
    AffineCoefficients,
    CoefficientTriple,
    ComparisonProblem,
    MarkMeasure,
    ModelError,
    OrderError,
    SampleDomain,
    SdeModel,
    Tolerances,
    constant_C,
    lipschitz_certificate,
)
from .psdcone import (
    MatrixComparisonProblem,
    MatrixCoefficients,
    MatrixLinearBlocks,
    MatrixLinearMap,
    MatrixModel,
    check_theorem37,
    matrix_certificate,
    mc_matrix_comparison,
)

__all__ = [
    "ParseError",
    "SchemaError",
    "OrderError",
    "ScenarioConfig",
    "McConfig",
    "CheckConfig",
    "RunReport",
    "parse_config",
    "config_from_dict",
    "config_to_dict",
    "build_problem",
    "run_check",
    "run_simulate",
    "run_full",
    "gallery_configs",
    "run_gallery",
    "report_to_dict",
    "write_report",
    "write_paths_csv",
    "main",
]

GALLERY_IDS = (
    "corollary33-pass",
    "corollary34-pass",
    "corollary35-pass",
    "example36",
    "jump-monotone-fail",
    "drift-order-fail",
    "sigma-gap-fail",
    "sigma-coupling-fail",
    "matrix-pass",
    "matrix-drift-fail",
)

DEFAULT_PATHS = 10_000
DEFAULT_STEP = 2.0**-9
LOW_POWER_PATHS = 1_000


class ParseError(ValueError):
    """The config file is not syntactically valid JSON."""


class SchemaError(ValueError):
    """The config violates the schema (unknown key, bad shape, bad value)."""


# ---------------------------------------------------------------------------
# config schema
# ---------------------------------------------------------------------------


@dataclass
class McConfig:
    paths: int = DEFAULT_PATHS
    step: float = DEFAULT_STEP
    seed: int = 0
    eps_path: Optional[float] = None


@dataclass
class CheckConfig:
    samples: int = 512
    box: float = 10.0
    ladder: List[float] = field(default_factory=lambda: [1e-6, 1e-4, 1e-2, 1e-1, 1.0])
    seed: int = 0
    eps_check: Optional[float] = None


@dataclass
class ScenarioConfig:
    id: str
    kind: str
    m: int
    d: int
    t0: float
    T: float
    marks_dimension: int
    atoms: List[Dict[str, Any]]
    model1: Dict[str, Any]
    model2: Dict[str, Any]
    x1: Any
    x2: Any
    mc: McConfig = field(default_factory=McConfig)
    check: CheckConfig = field(default_factory=CheckConfig)


def _expect_dict(obj: Any, path: str) -> Dict[str, Any]:
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: expected an object")
    return obj


def _take(d: Dict[str, Any], path: str, required: Sequence[str], optional: Sequence[str] = ()):
    unknown = set(d) - set(required) - set(optional)
    if unknown:
        raise SchemaError(f"{path}: unknown key(s) {sorted(unknown)}")
    missing = [k for k in required if k not in d]
    if missing:
        raise SchemaError(f"{path}: missing required key(s) {missing}")


def _num(v: Any, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{path}: expected a number")
    return float(v)


def _intval(v: Any, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(f"{path}: expected an integer")
    return int(v)


def _num_list(v: Any, path: str) -> List[float]:
    if not isinstance(v, list):
        raise SchemaError(f"{path}: expected a list of numbers")
    return [_num(x, f"{path}[{i}]") for i, x in enumerate(v)]


def _matrix(v: Any, path: str) -> List[List[float]]:
    if not isinstance(v, list) or not all(isinstance(r, list) for r in v):
        raise SchemaError(f"{path}: expected a matrix (list of rows)")
    return [[_num(x, f"{path}[{i}][{j}]") for j, x in enumerate(r)] for i, r in enumerate(v)]


def _tensor3(v: Any, path: str) -> List[List[List[float]]]:
    if not isinstance(v, list):
        raise SchemaError(f"{path}: expected a rank-3 array")
    return [_matrix(x, f"{path}[{i}]") for i, x in enumerate(v)]


def config_from_dict(data: Dict[str, Any], default_id: str = "scenario") -> ScenarioConfig:
    top = _expect_dict(data, "$")
    _take(
        top,
        "$",
        required=["kind", "m", "d", "horizon", "marks", "model1", "model2", "initial"],
        optional=["id", "mc", "check"],
    )
    kind = top["kind"]
    if kind not in ("vector", "matrix"):
        raise SchemaError("$.kind: must be 'vector' or 'matrix'")
    m = _intval(top["m"], "$.m")
    d = _intval(top["d"], "$.d")
    if kind == "matrix" and d != 1:
        raise SchemaError("$.d: matrix scenarios use a single Brownian driver (d = 1)")

    hz = _expect_dict(top["horizon"], "$.horizon")
    _take(hz, "$.horizon", required=["t0", "T"])
    t0 = _num(hz["t0"], "$.horizon.t0")
    T = _num(hz["T"], "$.horizon.T")

    mk = _expect_dict(top["marks"], "$.marks")
    _take(mk, "$.marks", required=["dimension", "atoms"])
    marks_dim = _intval(mk["dimension"], "$.marks.dimension")
    if not isinstance(mk["atoms"], list):
        raise SchemaError("$.marks.atoms: expected a list")
    atoms = []
    for i, a in enumerate(mk["atoms"]):
        ad = _expect_dict(a, f"$.marks.atoms[{i}]")
        _take(ad, f"$.marks.atoms[{i}]", required=["e", "w"])
        atoms.append({"e": _num_list(ad["e"], f"$.marks.atoms[{i}].e"),
                      "w": _num(ad["w"], f"$.marks.atoms[{i}].w")})

    def vector_model(md: Any, path: str) -> Dict[str, Any]:
        mdl = _expect_dict(md, path)
        _take(mdl, path, required=["B", "c", "V", "U", "jumps"])
        jumps = []
        if not isinstance(mdl["jumps"], list):
            raise SchemaError(f"{path}.jumps: expected a list")
        for i, jm in enumerate(mdl["jumps"]):
            jd = _expect_dict(jm, f"{path}.jumps[{i}]")
            _take(jd, f"{path}.jumps[{i}]", required=["G", "g"])
            jumps.append({"G": _matrix(jd["G"], f"{path}.jumps[{i}].G"),
                          "g": _num_list(jd["g"], f"{path}.jumps[{i}].g")})
        return {
            "B": _matrix(mdl["B"], f"{path}.B"),
            "c": _num_list(mdl["c"], f"{path}.c"),
            "V": _tensor3(mdl["V"], f"{path}.V"),
            "U": _matrix(mdl["U"], f"{path}.U"),
            "jumps": jumps,
        }

    def matrix_model(md: Any, path: str) -> Dict[str, Any]:
        mdl = _expect_dict(md, path)
        _take(mdl, path, required=["b", "sigma", "jumps"])

        def linmap(v: Any, p: str) -> Dict[str, Any]:
            lm = _expect_dict(v, p)
            _take(lm, p, required=["scale", "offset"])
            return {"scale": _num(lm["scale"], f"{p}.scale"),
                    "offset": _matrix(lm["offset"], f"{p}.offset")}

        if not isinstance(mdl["jumps"], list):
            raise SchemaError(f"{path}.jumps: expected a list")
        return {
            "b": linmap(mdl["b"], f"{path}.b"),
            "sigma": linmap(mdl["sigma"], f"{path}.sigma"),
            "jumps": [linmap(jm, f"{path}.jumps[{i}]") for i, jm in enumerate(mdl["jumps"])],
        }

    model_parser = vector_model if kind == "vector" else matrix_model
    model1 = model_parser(top["model1"], "$.model1")
    model2 = model_parser(top["model2"], "$.model2")

    init = _expect_dict(top["initial"], "$.initial")
    _take(init, "$.initial", required=["x1", "x2"])
    if kind == "vector":
        x1 = _num_list(init["x1"], "$.initial.x1")
        x2 = _num_list(init["x2"], "$.initial.x2")
    else:
        x1 = _matrix(init["x1"], "$.initial.x1")
        x2 = _matrix(init["x2"], "$.initial.x2")

    mc = McConfig()
    if "mc" in top:
        mcd = _expect_dict(top["mc"], "$.mc")
        _take(mcd, "$.mc", required=[], optional=["paths", "step", "seed", "eps_path"])
        if "paths" in mcd:
            mc.paths = _intval(mcd["paths"], "$.mc.paths")
        if "step" in mcd:
            mc.step = _num(mcd["step"], "$.mc.step")
        if "seed" in mcd:
            mc.seed = _intval(mcd["seed"], "$.mc.seed")
        if "eps_path" in mcd and mcd["eps_path"] is not None:
            mc.eps_path = _num(mcd["eps_path"], "$.mc.eps_path")

    check = CheckConfig()
    if "check" in top:
        chd = _expect_dict(top["check"], "$.check")
        _take(chd, "$.check", required=[],
              optional=["samples", "box", "ladder", "seed", "eps_check"])
        if "samples" in chd:
            check.samples = _intval(chd["samples"], "$.check.samples")
        if "box" in chd:
            check.box = _num(chd["box"], "$.check.box")
        if "ladder" in chd:
            check.ladder = _num_list(chd["ladder"], "$.check.ladder")
        if "seed" in chd:
            check.seed = _intval(chd["seed"], "$.check.seed")
        if "eps_check" in chd and chd["eps_check"] is not None:
            check.eps_check = _num(chd["eps_check"], "$.check.eps_check")

    cfg = ScenarioConfig(
        id=str(top.get("id", default_id)),
        kind=kind,
        m=m,
        d=d,
        t0=t0,
        T=T,
        marks_dimension=marks_dim,
        atoms=atoms,
        model1=model1,
        model2=model2,
        x1=x1,
        x2=x2,
        mc=mc,
        check=check,
    )
    build_problem(cfg)  # surface dimension/order/weight errors at parse time
    return cfg


def config_to_dict(cfg: ScenarioConfig) -> Dict[str, Any]:
    return {
        "id": cfg.id,
        "kind": cfg.kind,
        "m": cfg.m,
        "d": cfg.d,
        "horizon": {"t0": cfg.t0, "T": cfg.T},
        "marks": {"dimension": cfg.marks_dimension, "atoms": cfg.atoms},
        "model1": cfg.model1,
        "model2": cfg.model2,
        "initial": {"x1": cfg.x1, "x2": cfg.x2},
        "mc": {
            "paths": cfg.mc.paths,
            "step": cfg.mc.step,
            "seed": cfg.mc.seed,
            "eps_path": cfg.mc.eps_path,
        },
        "check": {
            "samples": cfg.check.samples,
            "box": cfg.check.box,
            "ladder": cfg.check.ladder,
            "seed": cfg.check.seed,
            "eps_check": cfg.check.eps_check,
        },
    }


def parse_config(path: str) -> ScenarioConfig:
    """Load and strictly validate a scenario config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    default_id = os.path.splitext(os.path.basename(path))[0]
    try:
        return config_from_dict(data, default_id=default_id)
    except (SchemaError, OrderError):
        raise
    except ModelError as exc:
        raise SchemaError(str(exc)) from exc


# ---------------------------------------------------------------------------
# problem construction
# ---------------------------------------------------------------------------


def _marks_from_config(cfg: ScenarioConfig) -> MarkMeasure:
    atoms = [(a["e"], a["w"]) for a in cfg.atoms]
    return MarkMeasure.from_atoms(atoms, dimension=cfg.marks_dimension)


def build_problem(cfg: ScenarioConfig) -> Union[ComparisonProblem, MatrixComparisonProblem]:
    """Instantiate the typed problem; model-level validation errors surface
    as SchemaError (except ordering, which keeps its own type)."""
    try:
        marks = _marks_from_config(cfg)
        sampling = SampleDomain(
            box=cfg.check.box, count=cfg.check.samples,
            ladder=tuple(cfg.check.ladder), seed=cfg.check.seed,
        )
        tolerances = Tolerances(eps_check=cfg.check.eps_check, eps_path=cfg.mc.eps_path)
        if cfg.kind == "vector":
            models = []
            for block in (cfg.model1, cfg.model2):
                n_atoms = len(block["jumps"])
                affine = AffineCoefficients(
                    B=np.array(block["B"], dtype=float),
                    c=np.array(block["c"], dtype=float),
                    V=np.array(block["V"], dtype=float),
                    U=np.array(block["U"], dtype=float),
                    G=np.array([jm["G"] for jm in block["jumps"]], dtype=float).reshape(
                        n_atoms, cfg.m, cfg.m
                    ),
                    g=np.array([jm["g"] for jm in block["jumps"]], dtype=float).reshape(
                        n_atoms, cfg.m
                    ),
                )
                budget = lipschitz_certificate(affine, marks)
                models.append(
                    SdeModel(
                        coefficients=CoefficientTriple.from_affine(affine),
                        marks=marks,
                        budget=budget,
                    )
                )
            return ComparisonProblem(
                model1=models[0], model2=models[1], t0=cfg.t0, T=cfg.T,
                x1=np.array(cfg.x1, dtype=float), x2=np.array(cfg.x2, dtype=float),
                sampling=sampling, tolerances=tolerances,
            )
        # matrix
        models_m = []
        for block in (cfg.model1, cfg.model2):
            blocks = MatrixLinearBlocks(
                b=MatrixLinearMap(block["b"]["scale"], np.array(block["b"]["offset"])),
                sigma=MatrixLinearMap(block["sigma"]["scale"], np.array(block["sigma"]["offset"])),
                jumps=tuple(
                    MatrixLinearMap(jm["scale"], np.array(jm["offset"]))
                    for jm in block["jumps"]
                ),
            )
            budget = matrix_certificate(blocks, marks)
            models_m.append(
                MatrixModel(
                    coefficients=MatrixCoefficients.from_linear(cfg.m, blocks),
                    marks=marks,
                    budget=budget,
                )
            )
        return MatrixComparisonProblem(
            model1=models_m[0], model2=models_m[1], t0=cfg.t0, T=cfg.T,
            x1=np.array(cfg.x1, dtype=float), x2=np.array(cfg.x2, dtype=float),
            sampling=sampling, tolerances=tolerances,
        )
    except OrderError:
        raise
    except ModelError as exc:
        raise SchemaError(str(exc)) from exc


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class RunReport:
    scenario_id: str
    kind: str
    config_echo: Dict[str, Any]
    check: Optional[Union[Theorem31Report, Verdict]] = None
    mc: Optional[engine.McReport] = None
    agreement: Optional[bool] = None
    low_power: bool = False
    wall_clock_s: float = 0.0
    tool_version: str = __version__

    @property
    def check_violated(self) -> Optional[bool]:
        if self.check is None:
            return None
        if isinstance(self.check, Theorem31Report):
            return self.check.overall == conditions.VIOLATED
        return self.check.status == conditions.VIOLATED

    @property
    def attention_needed(self) -> bool:
        return self.agreement is False


def _witness_to_dict(w: Witness) -> Dict[str, Any]:
    return {
        "t": w.t,
        "x": list(w.x),
        "x_prime": list(w.x_prime),
        "atom": w.atom,
        "margin": w.margin,
        "kind": w.kind,
    }


def _verdict_to_dict(v: Verdict) -> Dict[str, Any]:
    return {
        "status": v.status,
        "samples_used": v.samples_used,
        "witnesses": [_witness_to_dict(w) for w in v.witnesses],
    }


def _check_to_dict(check: Union[Theorem31Report, Verdict]) -> Dict[str, Any]:
    if isinstance(check, Verdict):
        return {"verdict": _verdict_to_dict(check)}
    return {
        "sigma_equal": _verdict_to_dict(check.sigma_equal),
        "cond_a": [_verdict_to_dict(v) for v in check.cond_a],
        "cond_b": [_verdict_to_dict(v) for v in check.cond_b],
        "cond_c": [_verdict_to_dict(v) for v in check.cond_c],
        "ii_prime": _verdict_to_dict(check.ii_prime),
        "overall": check.overall,
        "battery_agrees_ii_prime": check.battery_agrees_ii_prime,
    }


def _mc_to_dict(mc: engine.McReport) -> Dict[str, Any]:
    return {
        "paths": mc.paths,
        "violating": mc.violating,
        "violation_fraction": mc.violation_fraction,
        "max_violation": mc.max_violation,
        "wilson_low": mc.wilson_low,
        "wilson_high": mc.wilson_high,
        "seed": mc.seed,
        "h": mc.h,
        "eps_path": mc.eps_path,
        "failed": mc.failed,
    }


def report_to_dict(report: RunReport) -> Dict[str, Any]:
    """Canonical (timing-free) report payload; byte-stable across reruns."""
    out: Dict[str, Any] = {
        "schema": "jumpcompare.report.v1",
        "tool_version": report.tool_version,
        "scenario": report.config_echo,
        "agreement": report.agreement,
        "low_power": report.low_power,
    }
    out["check"] = _check_to_dict(report.check) if report.check is not None else None
    out["mc"] = _mc_to_dict(report.mc) if report.mc is not None else None
    return out


def _atomic_write(path: str, payload: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def write_report(report: RunReport, out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{report.scenario_id}.report.json")
    payload = json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"
    _atomic_write(path, payload)
    return path


def _fmt17(x: float) -> str:
    return format(x, ".17g")


def write_paths_csv(path: str, records: engine.PathRecords) -> None:
    """Per-path CSV: '.' decimal, ',' separator, LF endings, mandatory header,
    floats at 17 significant digits for bit-faithful reproduction."""
    lines = ["path_id,violation_max,first_violation_time,failed"]
    n = records.violation.shape[0]
    for p in range(n):
        viol = records.violation[p]
        ft = records.first_violation_time[p]
        lines.append(
            ",".join(
                [
                    str(p),
                    _fmt17(float(viol)) if math.isfinite(viol) else "nan",
                    _fmt17(float(ft)) if math.isfinite(ft) else "",
                    "1" if records.failed[p] else "0",
                ]
            )
        )
    _atomic_write(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------


def _run_check_only(cfg: ScenarioConfig) -> Union[Theorem31Report, Verdict]:
    problem = build_problem(cfg)
    if cfg.kind == "vector":
        return check_theorem31(problem)
    return check_theorem37(problem)


def _run_mc_only(cfg: ScenarioConfig, keep_paths: bool = False) -> engine.McReport:
    problem = build_problem(cfg)
    if cfg.kind == "vector":
        return engine.mc_comparison(
            problem, cfg.mc.paths, cfg.mc.step, cfg.mc.seed, keep_paths=keep_paths
        )
    return mc_matrix_comparison(
        problem, cfg.mc.paths, cfg.mc.step, cfg.mc.seed, keep_paths=keep_paths
    )


def run_check(cfg: ScenarioConfig) -> RunReport:
    start = time.perf_counter()
    check = _run_check_only(cfg)
    return RunReport(
        scenario_id=cfg.id, kind=cfg.kind, config_echo=config_to_dict(cfg),
        check=check, wall_clock_s=time.perf_counter() - start,
    )


def run_simulate(cfg: ScenarioConfig, keep_paths: bool = False) -> RunReport:
    start = time.perf_counter()
    mc = _run_mc_only(cfg, keep_paths=keep_paths)
    return RunReport(
        scenario_id=cfg.id, kind=cfg.kind, config_echo=config_to_dict(cfg),
        mc=mc, low_power=cfg.mc.paths < LOW_POWER_PATHS,
        wall_clock_s=time.perf_counter() - start,
    )


def run_full(cfg: ScenarioConfig, keep_paths: bool = False) -> RunReport:
    """Checker plus simulation plus the agreement flag between them."""
    start = time.perf_counter()
    check = _run_check_only(cfg)
    mc = _run_mc_only(cfg, keep_paths=keep_paths)
    if isinstance(check, Theorem31Report):
        violated = check.overall == conditions.VIOLATED
    else:
        violated = check.status == conditions.VIOLATED
    agreement = violated == (mc.violating > 0)
    return RunReport(
        scenario_id=cfg.id, kind=cfg.kind, config_echo=config_to_dict(cfg),
        check=check, mc=mc, agreement=agreement,
        low_power=cfg.mc.paths < LOW_POWER_PATHS,
        wall_clock_s=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# the gallery
# ---------------------------------------------------------------------------


def _vec_cfg(
    scenario_id: str, m: int, d: int, atoms, model1, model2, x1, x2,
    mc_seed: int, check_seed: int, marks_dimension: int = 1,
) -> ScenarioConfig:
    return ScenarioConfig(
        id=scenario_id, kind="vector", m=m, d=d, t0=0.0, T=1.0,
        marks_dimension=marks_dimension, atoms=atoms,
        model1=model1, model2=model2, x1=x1, x2=x2,
        mc=McConfig(seed=mc_seed),
        check=CheckConfig(seed=check_seed),
    )


def _vec_model(B, c, V, U, jumps) -> Dict[str, Any]:
    return {"B": B, "c": c, "V": V, "U": U, "jumps": jumps}


def _mat_cfg(scenario_id, model1, model2, x1, x2, mc_seed, check_seed) -> ScenarioConfig:
    return ScenarioConfig(
        id=scenario_id, kind="matrix", m=2, d=1, t0=0.0, T=1.0,
        marks_dimension=1, atoms=[],
        model1=model1, model2=model2, x1=x1, x2=x2,
        mc=McConfig(seed=mc_seed),
        check=CheckConfig(seed=check_seed),
    )


def gallery_configs() -> List[ScenarioConfig]:
    """The built-in scenario set (everything ships in code, no data files)."""
    one_atom = [{"e": [1.0], "w": 1.0}]
    out: List[ScenarioConfig] = []

    # ordered jump maps with distinct constants; compensated drifts ordered
    out.append(_vec_cfg(
        "corollary33-pass", 1, 1, one_atom,
        _vec_model([[-0.2]], [0.5], [[[0.3]]], [[0.1]], [{"G": [[-0.5]], "g": [0.4]}]),
        _vec_model([[-0.2]], [0.1], [[[0.3]]], [[0.1]], [{"G": [[-0.5]], "g": [0.1]}]),
        [1.0], [0.5], mc_seed=101, check_seed=11,
    ))
    # shared jump coefficient, plain drift order
    out.append(_vec_cfg(
        "corollary34-pass", 1, 1, one_atom,
        _vec_model([[-0.3]], [0.6], [[[0.25]]], [[0.05]], [{"G": [[0.2]], "g": [0.1]}]),
        _vec_model([[-0.3]], [0.2], [[[0.25]]], [[0.05]], [{"G": [[0.2]], "g": [0.1]}]),
        [0.7], [0.2], mc_seed=102, check_seed=12,
    ))
    # diffusion-only comparison
    out.append(_vec_cfg(
        "corollary35-pass", 1, 1, [],
        _vec_model([[-0.5]], [1.0], [[[0.4]]], [[0.1]], []),
        _vec_model([[-0.5]], [0.3], [[[0.4]]], [[0.1]], []),
        [0.8], [0.8], mc_seed=103, check_seed=13,
    ))
    # pure-jump pair with unequal jump amplitudes but ordered post-jump maps;
    # drift equals the mark integral of gamma, so the net drift vanishes
    out.append(_vec_cfg(
        "example36", 1, 1, one_atom,
        _vec_model([[0.5]], [0.8], [[[0.0]]], [[0.0]], [{"G": [[0.5]], "g": [0.8]}]),
        _vec_model([[0.5]], [0.2], [[[0.0]]], [[0.0]], [{"G": [[0.5]], "g": [0.2]}]),
        [0.5], [0.0], mc_seed=104, check_seed=14,
    ))
    # post-jump map reverses order: own-coordinate coefficient 1 + G < 0
    out.append(_vec_cfg(
        "jump-monotone-fail", 1, 1, one_atom,
        _vec_model([[0.0]], [0.0], [[[0.0]]], [[0.2]], [{"G": [[-1.6]], "g": [0.0]}]),
        _vec_model([[0.0]], [0.0], [[[0.0]]], [[0.2]], [{"G": [[-1.6]], "g": [0.0]}]),
        [1.0], [0.2], mc_seed=105, check_seed=15,
    ))
    # strongly negative off-diagonal drift coupling breaks quasimonotonicity
    out.append(_vec_cfg(
        "drift-order-fail", 2, 1, [],
        _vec_model([[-0.2, -2.0], [0.1, -0.3]], [0.0, 0.0],
                   [[[0.0, 0.0]], [[0.0, 0.0]]], [[0.2], [0.2]], []),
        _vec_model([[-0.2, -2.0], [0.1, -0.3]], [0.0, 0.0],
                   [[[0.0, 0.0]], [[0.0, 0.0]]], [[0.2], [0.2]], []),
        [0.5, 1.0], [0.5, 0.0], mc_seed=106, check_seed=16,
    ))
    # constant diffusion gap between the two models
    out.append(_vec_cfg(
        "sigma-gap-fail", 1, 1, [],
        _vec_model([[0.0]], [0.0], [[[0.0]]], [[1.2]], []),
        _vec_model([[0.0]], [0.0], [[[0.0]]], [[0.2]], []),
        [0.2], [0.2], mc_seed=107, check_seed=17,
    ))
    # shared diffusion, but row 1 couples to coordinate 2
    out.append(_vec_cfg(
        "sigma-coupling-fail", 2, 1, [],
        _vec_model([[-0.1, 0.0], [0.0, -0.1]], [0.05, 0.05],
                   [[[0.0, 2.0]], [[0.0, 0.0]]], [[0.0], [0.0]], []),
        _vec_model([[-0.1, 0.0], [0.0, -0.1]], [0.0, 0.0],
                   [[[0.0, 2.0]], [[0.0, 0.0]]], [[0.0], [0.0]], []),
        [1.0, 1.0], [1.0, 0.0], mc_seed=108, check_seed=18,
    ))
    # PSD drift gap, shared scalar-linear diffusion
    out.append(_mat_cfg(
        "matrix-pass",
        {"b": {"scale": 0.5, "offset": [[0.4, 0.0], [0.0, 0.4]]},
         "sigma": {"scale": 0.4, "offset": [[0.0, 0.0], [0.0, 0.0]]}, "jumps": []},
        {"b": {"scale": 0.5, "offset": [[0.0, 0.0], [0.0, 0.0]]},
         "sigma": {"scale": 0.4, "offset": [[0.0, 0.0], [0.0, 0.0]]}, "jumps": []},
        [[1.2, 0.2], [0.2, 0.8]], [[0.4, 0.0], [0.0, 0.2]],
        mc_seed=109, check_seed=19,
    ))
    # indefinite drift gap; constant shared diffusion keeps the difference
    # deterministic, so every path violates
    out.append(_mat_cfg(
        "matrix-drift-fail",
        {"b": {"scale": 0.5, "offset": [[2.0, 0.0], [0.0, -2.0]]},
         "sigma": {"scale": 0.0, "offset": [[0.3, 0.1], [0.1, 0.2]]}, "jumps": []},
        {"b": {"scale": 0.5, "offset": [[0.0, 0.0], [0.0, 0.0]]},
         "sigma": {"scale": 0.0, "offset": [[0.3, 0.1], [0.1, 0.2]]}, "jumps": []},
        [[0.5, 0.0], [0.0, 0.5]], [[0.5, 0.0], [0.0, 0.5]],
        mc_seed=110, check_seed=20,
    ))
    assert tuple(c.id for c in out) == GALLERY_IDS
    return out


def run_gallery(
    *, smoke: bool = False, paths: Optional[int] = None, step: Optional[float] = None,
    seed: Optional[int] = None, keep_paths: bool = False,
) -> List[RunReport]:
    """Execute the built-in scenario set; every report should agree between
    checker and simulation (attention-needed otherwise)."""
    reports = []
    for cfg in gallery_configs():
        cfg = dataclasses.replace(cfg, mc=dataclasses.replace(cfg.mc),
                                  check=dataclasses.replace(cfg.check))
        if smoke:
            cfg.mc.paths = 10
            cfg.mc.step = 2.0**-5
        if paths is not None:
            cfg.mc.paths = paths
        if step is not None:
            cfg.mc.step = step
        if seed is not None:
            cfg.mc.seed = seed
            cfg.check.seed = seed
        reports.append(run_full(cfg, keep_paths=keep_paths))
    return reports


# ---------------------------------------------------------------------------
# residual spot checks
# ---------------------------------------------------------------------------


def run_pide_spotcheck(
    cfg: ScenarioConfig, eta: float = 1e-3, n_points: Optional[int] = None
) -> Dict[str, Any]:
    """Evaluate the stacked-system residual with the smoothed distance as the
    test function at interior points of the constraint set."""
    if cfg.kind != "vector":
        raise SchemaError("pide-spotcheck requires a vector scenario")
    problem = build_problem(cfg)
    stacked = generator.stack_models(problem)
    C = constant_C(stacked.budget, problem.marks)
    phi = generator.smoothed_dist2_function(problem.m, eta)
    rng = np.random.default_rng(cfg.check.seed)
    n = n_points if n_points is not None else min(cfg.check.samples, 1000)
    box = cfg.check.box
    worst = -math.inf
    for _ in range(n):
        x1 = rng.uniform(10.0 * eta, 0.5 * box, problem.m)
        x2 = rng.uniform(-0.5 * box, 0.5 * box, problem.m)
        t = float(rng.uniform(problem.t0, problem.T))
        res = generator.supersolution_residual(
            phi, stacked, t, ConePoint(x1=x1, x2=x2), C
        )
        worst = max(worst, res)
    eps = problem.tolerances.resolved_eps_check(False)
    return {
        "scenario": cfg.id,
        "eta": eta,
        "C": C,
        "points": n,
        "max_residual": worst,
        "tolerance": eps,
        "within_tolerance": bool(worst <= eps),
    }


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    cfg = dataclasses.replace(cfg, mc=dataclasses.replace(cfg.mc),
                              check=dataclasses.replace(cfg.check))
    if getattr(args, "paths", None) is not None:
        cfg.mc.paths = args.paths
    if getattr(args, "step", None) is not None:
        cfg.mc.step = args.step
    if getattr(args, "seed", None) is not None:
        cfg.mc.seed = args.seed
        cfg.check.seed = args.seed
    return cfg


def _emit(report: RunReport, args) -> None:
    out_dir = getattr(args, "out", None)
    if out_dir:
        path = write_report(report, out_dir)
        print(f"report written to {path}", file=sys.stderr)
        if getattr(args, "format", "json") == "csv" and report.mc is not None \
                and report.mc.per_path is not None:
            csv_path = os.path.join(out_dir, f"{report.scenario_id}.paths.csv")
            write_paths_csv(csv_path, report.mc.per_path)
            print(f"per-path CSV written to {csv_path}", file=sys.stderr)
    else:
        print(json.dumps(report_to_dict(report), sort_keys=True, indent=2))
    print(f"[{report.scenario_id}] wall clock {report.wall_clock_s:.3f}s", file=sys.stderr)


def _verdict_exit_code(report: RunReport) -> int:
    if report.check is not None:
        return 1 if report.check_violated else 0
    if report.mc is not None:
        return 1 if report.mc.violating > 0 else 0
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="jumpcompare",
        description="Check and empirically validate comparison conditions for "
                    "jump-diffusion systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        if needs_config:
            p.add_argument("config", help="scenario config file (strict JSON)")
        p.add_argument("--seed", type=int, default=None, help="override all seeds")
        p.add_argument("--paths", type=int, default=None, help="override MC path count")
        p.add_argument("--step", type=float, default=None, help="override MC step size")
        p.add_argument("--out", type=str, default=None, help="report output directory")
        p.add_argument("--format", choices=("json", "csv"), default="json",
                       help="also write per-path CSV when 'csv'")

    add_common(sub.add_parser("check", help="run the condition checker"))
    add_common(sub.add_parser("simulate", help="run the coupled Monte Carlo"))
    add_common(sub.add_parser("matrix-check", help="run the matrix condition checker"))
    g = sub.add_parser("gallery", help="run the built-in scenario set")
    add_common(g, needs_config=False)
    g.add_argument("--smoke", action="store_true", help="tiny run for wiring checks")
    p = sub.add_parser("pide-spotcheck", help="stacked-system residual diagnostics")
    add_common(p)
    p.add_argument("--eta", type=float, default=1e-3, help="smoothing width")

    args = parser.parse_args(argv)

    try:
        if args.command == "gallery":
            reports = run_gallery(
                smoke=args.smoke, paths=args.paths, step=args.step, seed=args.seed,
                keep_paths=(args.format == "csv" and args.out is not None),
            )
            summary = []
            for rep in reports:
                _emit(rep, args)
                summary.append({
                    "id": rep.scenario_id,
                    "check_violated": rep.check_violated,
                    "violation_fraction": rep.mc.violation_fraction if rep.mc else None,
                    "agreement": rep.agreement,
                    "low_power": rep.low_power,
                })
            if args.out:
                payload = json.dumps({"schema": "jumpcompare.gallery.v1",
                                      "tool_version": __version__,
                                      "scenarios": summary},
                                     sort_keys=True, indent=2) + "\n"
                _atomic_write(os.path.join(args.out, "gallery-summary.json"), payload)
            disagreements = [s["id"] for s in summary if s["agreement"] is False]
            if disagreements:
                print(f"ATTENTION NEEDED: disagreement in {disagreements}", file=sys.stderr)
                return 1
            return 0

        cfg = parse_config(args.config)
        cfg = _apply_overrides(cfg, args)
        if args.command == "check":
            report = run_check(cfg)
        elif args.command == "matrix-check":
            if cfg.kind != "matrix":
                raise SchemaError("matrix-check requires a matrix scenario")
            report = run_check(cfg)
        elif args.command == "simulate":
            report = run_simulate(cfg, keep_paths=(args.format == "csv"))
        elif args.command == "pide-spotcheck":
            result = run_pide_spotcheck(cfg, eta=args.eta)
            payload = json.dumps(result, sort_keys=True, indent=2)
            if args.out:
                os.makedirs(args.out, exist_ok=True)
                _atomic_write(os.path.join(args.out, f"{cfg.id}.spotcheck.json"),
                              payload + "\n")
            else:
                print(payload)
            return 0 if result["within_tolerance"] else 1
        else:  # pragma: no cover
            parser.error(f"unknown command {args.command}")
            return 2
        _emit(report, args)
        return _verdict_exit_code(report)
    except (ParseError, SchemaError, OrderError, ModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
