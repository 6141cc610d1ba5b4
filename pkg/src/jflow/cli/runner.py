"""Dispatch a RunConfig to the computational modules and collect a Report."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from jflow import __version__
from jflow.cli.config import RunConfig, to_document
from jflow.cohomology import IntersectionSpace, SubvarietyClass, blowup_p2, blowup_p3
from jflow.errors import JFlowError
from jflow.ruled.analysis import CURRENT, SMOOTH, RuledParams, classify, defect_l2, limit_profile, remark_check, solve_lambda
from jflow.ruled.flow import flow as ruled_flow
from jflow.ruled.plfunction import sup_ratio
from jflow.stability import ALL_POSITIVE, check_stability, surface_existence
from jflow.torus import fields
from jflow.torus.legendre import legendre_analysis
from jflow.torus.problem import DEGENERATE_EIG, TorusProblem
from jflow.torus.solver import c_bounds, flow as torus_flow, solve as torus_solve

OK = "ok"
DESTABILIZED = "destabilized"
ERROR = "error"
EXIT_CODES = {OK: 0, DESTABILIZED: 2, ERROR: 1}


@dataclass(frozen=True)
class Entry:
    key: str
    value: object
    label: str = ""  # "exact", "approx(tol=...)" or "" for non-numeric values


@dataclass
class Report:
    config: RunConfig
    entries: list[Entry] = field(default_factory=list)
    status: str = OK
    error: str | None = None
    artifacts: dict[str, str] = field(default_factory=dict)
    wall_time: float = 0.0
    version: str = __version__

    def add(self, key, value, label=""):
        self.entries.append(Entry(key, value, label))

    def value(self, key):
        for e in self.entries:
            if e.key == key:
                return e.value
        raise KeyError(key)


def exit_code(report: Report) -> int:
    """0 stable/solved/exists, 2 destabilized or no solution, 1 error."""
    return EXIT_CODES[report.status]


def approx(tol) -> str:
    return f"approx(tol={tol:g})"


def csv_text(header: str, rows) -> str:
    lines = [header]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def class_text(coefficients, labels) -> str:
    """(3, -1) with labels (H, E) -> '3*H - 1*E'."""
    text = ""
    for c, name in zip(coefficients, labels):
        c = Fraction(c)
        if not text:
            text = f"{c}*{name}"
        else:
            text += f" {'-' if c < 0 else '+'} {abs(c)}*{name}"
    return text


def _compact(value) -> str:
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k} = {_compact(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_compact(v) for v in value) + "]"
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, bool):
        return str(value).lower()
    return str(value)


def echo_lines(document: dict, prefix: str = "") -> list[str]:
    """Flattened 'dotted.key = value' lines of a config document."""
    lines = []
    for k, v in document.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            lines += echo_lines(v, key + ".")
        else:
            lines.append(f"{key} = {_compact(v)}")
    return lines


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# -- builders (also used by config validation) -----------------------------


def build_torus_problem(params: dict, amplitude: float | None = None) -> TorusProblem:
    spec = params["field"]
    if spec["type"] == "constant":
        a_field = fields.constant(spec["matrix"])
    elif spec["type"] == "fourier":
        a_field = fields.fourier(spec["base"], [dict(m) for m in spec["modes"]])
    else:
        a_field = fields.hessian_of(spec["base"], [dict(m) for m in spec["modes"]])
    if amplitude is not None:
        a_field = a_field.scaled(amplitude)
    return TorusProblem(params["n"], params["N"], a_field, np.array(params["B"]))


def build_slope_problem(params: dict):
    if "preset" in params:
        space = blowup_p3() if params["preset"] == "blowup_p3" else blowup_p2()
    else:
        sp = params["space"]
        space = IntersectionSpace(sp["dimension"], sp["basis"], {e["index"]: e["value"] for e in sp["entries"]})
    omega = space.vector(*params["omega"])
    alpha = space.vector(*params["alpha"])
    subs = [
        SubvarietyClass.complete_intersection(space, [space.vector(*d) for d in s["divisors"]], s["name"])
        for s in params["subvarieties"]
    ]
    return space, omega, alpha, subs


# -- commands ----------------------------------------------------------------


def _ruled(report: Report, p: dict, tol: dict):
    params = RuledParams(p["a"], p["b"])
    info = classify(params)
    remark = remark_check(params)
    x, y = remark.critical_class
    report.add("a", params.a, "exact")
    report.add("b", params.b, "exact")
    report.add("c", info.c, "exact")
    report.add("ratio", info.ratio, "exact")
    report.add("case", info.case)
    report.add("margin_E0", remark.margin_e0, "exact")
    report.add("critical_class", class_text((x, -y), ("H", "E")), "exact")
    report.add("kahler", str(remark.kahler).lower())
    if info.case == CURRENT:
        report.add("lambda", solve_lambda(params, xtol=tol["quadrature"]), approx(tol["quadrature"]))
    report.add("defect_l2", defect_l2(params), approx(tol["quadrature"]))
    profile = limit_profile(params)
    report.artifacts["profile.csv"] = csv_text("tau,F", zip(profile.tau, profile.F))
    if p["levels"]:
        bounds = sup_ratio(params, p["levels"])
        for level, value in zip(sorted(p["levels"]), bounds):
            report.add(f"sup_ratio_level{level}", value, "approx(lower bound)")
        report.artifacts["sup_ratio.csv"] = csv_text("level,ratio", zip(sorted(p["levels"]), bounds))
    if p["flow"]:
        result = ruled_flow(params, cells=p["cells"], horizon=p["horizon"], steady_tol=tol["flow"])
        report.add("flow_final_time", result.final_time)
        report.add("flow_defect", result.final_defect, approx(tol["flow"]))
        report.artifacts["flow.csv"] = csv_text("t,defect", zip(result.times, result.defect))
    report.status = OK if info.case == SMOOTH else DESTABILIZED


def _surface(report: Report, p: dict, tol: dict):
    space = blowup_p2()
    omega = space.vector(p["b"], -1)
    alpha = space.vector(p["a"], -1)
    curves = [
        SubvarietyClass.divisor(space, space.vector(0, 1), "E"),
        SubvarietyClass.divisor(space, space.vector(1, -1), "H-E"),
    ]
    verdict = surface_existence(space, omega, alpha, curves)
    report.add("a", p["a"], "exact")
    report.add("b", p["b"], "exact")
    report.add("c", verdict.report.c, "exact")
    for r in verdict.report.records:
        report.add(f"margin_{r.name}", r.margin, "exact")
    report.add("critical_class", class_text(verdict.critical_class, space.basis_labels), "exact")
    report.add("critical_square", verdict.critical_square, "exact")
    report.add("alpha_square", verdict.alpha_square, "exact")
    report.add("verdict", "exists" if verdict.exists else "not-exists")
    report.add("summary", verdict.summary())
    report.status = OK if verdict.exists else DESTABILIZED


def _slope(report: Report, p: dict, tol: dict):
    space, omega, alpha, subs = build_slope_problem(p)
    result = check_stability(space, omega, alpha, subs, p["k"])
    report.add("dimension", space.dimension)
    report.add("k", result.k)
    report.add("c", result.c, "exact")
    for r in result.records:
        report.add(f"margin_{r.name}", r.margin, "exact")
    report.add("verdict", result.verdict)
    report.add("summary", result.summary())
    report.status = OK if result.verdict == ALL_POSITIVE else DESTABILIZED


def _torus(report: Report, p: dict, tol: dict, amplitude: float | None = None):
    problem = build_torus_problem(p, amplitude)
    lo, hi = c_bounds(problem)
    if amplitude is not None:
        report.add("amplitude", amplitude, approx(0))
    report.add("c_lower", lo, approx(1e-14))
    report.add("c_upper", hi, approx(1e-14))
    newton = flowed = None
    if p["method"] in ("newton", "both"):
        newton = torus_solve(problem, tol=tol["newton"])
        report.add("c", newton.c, approx(tol["newton"]))
        report.add("residual_sup", newton.residual_sup, approx(1e-14))
        report.add("min_hessian_eig", newton.min_hessian_eig, approx(1e-14))
        report.add("newton_iters", " ".join(str(i) for i in newton.newton_iters))
        report.add("continuation_steps", len(newton.continuation_steps))
    if p["method"] in ("flow", "both"):
        flowed = torus_flow(problem, tol=tol["flow"], horizon=p["horizon"])
        report.add("flow_c", flowed.c, approx(tol["flow"]))
        report.add("flow_residual_sup", flowed.residual_sup, approx(1e-14))
        report.add("flow_steps", len(flowed.history))
    if newton is not None and flowed is not None:
        report.add("flow_newton_dc", abs(newton.c - flowed.c), approx(1e-14))
        report.add("flow_newton_du", float(np.max(np.abs(newton.u - flowed.u))), approx(1e-14))
    solution = newton if newton is not None else flowed
    if p["legendre"]:
        leg = legendre_analysis(problem, solution)
        report.add("legendre_residual", leg.residual, approx(1e-14))
        report.add("double_transform_error", leg.double_transform_error, approx(1e-14))
        report.add("legendre_max_hessian_eig", leg.max_hessian_eig, approx(1e-14))
        report.add("legendre_hessian_bound", leg.hessian_bound, approx(1e-14))
    coords = problem.points
    header = ",".join(f"x{i + 1}" for i in range(problem.n)) + ",u"
    report.artifacts["u.csv"] = csv_text(header, (tuple(x) + (v,) for x, v in zip(coords, solution.u.ravel())))
    degenerate = solution.min_hessian_eig <= DEGENERATE_EIG
    report.add("degenerate", str(degenerate).lower())
    report.status = DESTABILIZED if degenerate else OK


_COMMANDS = {"ruled": _ruled, "surface": _surface, "slope": _slope, "torus": _torus}


def run(config: RunConfig, **extra) -> Report:
    """Run one configuration; module errors end up in the report with status error."""
    report = Report(config=config)
    start = time.perf_counter()
    try:
        _COMMANDS[config.command](report, config.params, config.tolerances, **extra)
    except JFlowError as exc:
        report.status = ERROR
        report.error = f"{type(exc).__name__}: {exc}"
    report.wall_time = time.perf_counter() - start
    return report


def format_value(value) -> str:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.15g}"
    return str(value)


def render(report: Report) -> str:
    """Plain-text report: config echo, results in a fixed order, status, provenance."""
    lines = ["[config]"] + echo_lines(to_document(report.config))
    lines += ["", "[results]"]
    for e in report.entries:
        suffix = f"  # {e.label}" if e.label else ""
        lines.append(f"{e.key} = {format_value(e.value)}{suffix}")
    lines += ["", "[status]", f"status = {report.status}", f"exit_code = {exit_code(report)}"]
    if report.error:
        lines.append(f"error = {report.error}")
    lines += ["", "[provenance]", f"tool = jflow {report.version}", f"wall_time_s = {report.wall_time:.3f}"]
    return "\n".join(lines) + "\n"
