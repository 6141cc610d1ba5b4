"""Run configuration: a TOML document with one table per command.

Grammar (UTF-8 TOML, see README for full examples)::

    command = "ruled"            # ruled | torus | slope | surface
    out = "results"              # optional output directory

    [ruled]                      # table named after the command
    a = "6/5"                    # exact fields: integers or "p/q" strings
    b = 3

    [tolerances]                 # optional; newton, flow, quadrature
    newton = 1e-10

Exact fields never accept TOML floats. Unknown keys are rejected.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from jflow.cohomology import as_fraction
from jflow.errors import ConfigError, JFlowError

COMMANDS = ("ruled", "torus", "slope", "surface")
DEFAULT_TOLERANCES = {"newton": 1e-10, "flow": 1e-8, "quadrature": 1e-12}
PRESETS = ("blowup_p3", "blowup_p2")
FIELD_TYPES = ("constant", "fourier", "hessian-of")
TORUS_METHODS = ("newton", "flow", "both")


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict
    out: str | None = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))


# -- scalar readers ---------------------------------------------------------


def _rational(value, key: str) -> Fraction:
    if isinstance(value, float):
        raise ConfigError(f"float literal {value!r} in an exact field; write it as an integer or 'p/q' string", key=key)
    try:
        return as_fraction(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), key=key) from exc


def _int(value, key: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", key=key)
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be at least {minimum}", key=key)
    return value


def _real(value, key: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", key=key)
    if positive and not value > 0:
        raise ConfigError("must be positive", key=key)
    return float(value)


def _bool(value, key: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"expected true or false, got {value!r}", key=key)
    return value


def _choice(value, key: str, options) -> str:
    if value not in options:
        raise ConfigError(f"expected one of {', '.join(options)}, got {value!r}", key=key)
    return value


def _table(value, key: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError("expected a table", key=key)
    return value


def _list(value, key: str) -> list:
    if not isinstance(value, list):
        raise ConfigError("expected an array", key=key)
    return value


def _rational_vector(value, key: str) -> tuple[Fraction, ...]:
    return tuple(_rational(v, f"{key}[{i}]") for i, v in enumerate(_list(value, key)))


def _matrix(value, key: str, n: int | None = None) -> tuple[tuple[float, ...], ...]:
    rows = _list(value, key)
    out = tuple(tuple(_real(v, f"{key}[{i}][{j}]") for j, v in enumerate(_list(r, f"{key}[{i}]"))) for i, r in enumerate(rows))
    m = len(out)
    if m == 0 or any(len(r) != m for r in out):
        raise ConfigError("expected a square matrix", key=key)
    if n is not None and m != n:
        raise ConfigError(f"expected a {n}x{n} matrix", key=key)
    arr = np.array(out)
    if not np.allclose(arr, arr.T, rtol=0, atol=1e-14):
        raise ConfigError("matrix must be symmetric", key=key)
    return out


def _spd(matrix, key: str):
    if np.linalg.eigvalsh(np.array(matrix)).min() <= 0:
        raise ConfigError("matrix must be positive definite", key=key)


def _reject_unknown(table: dict, allowed, prefix: str):
    for k in table:
        if k not in allowed:
            raise ConfigError("unknown key", key=f"{prefix}.{k}" if prefix else k)


def _require(table: dict, name: str, prefix: str):
    if name not in table:
        raise ConfigError("missing required key", key=f"{prefix}.{name}")
    return table[name]


# -- per-command blocks -------------------------------------------------------


def _ab(block: dict, prefix: str) -> tuple[Fraction, Fraction]:
    a = _rational(_require(block, "a", prefix), f"{prefix}.a")
    b = _rational(_require(block, "b", prefix), f"{prefix}.b")
    if not a > 1:
        raise ConfigError(f"requires a > 1, got a = {a}", key=f"{prefix}.a")
    if not b > 1:
        raise ConfigError(f"requires b > 1, got b = {b}", key=f"{prefix}.b")
    return a, b


def _ruled(block: dict) -> dict:
    p = "ruled"
    _reject_unknown(block, ("a", "b", "flow", "cells", "horizon", "levels"), p)
    a, b = _ab(block, p)
    levels = tuple(_int(v, f"{p}.levels[{i}]", 1) for i, v in enumerate(_list(block.get("levels", []), f"{p}.levels")))
    if any(l > 12 for l in levels):
        raise ConfigError("levels above 12 are not supported", key=f"{p}.levels")
    return {
        "a": a,
        "b": b,
        "flow": _bool(block.get("flow", False), f"{p}.flow"),
        "cells": _int(block.get("cells", 128), f"{p}.cells", 4),
        "horizon": _real(block.get("horizon", 40.0), f"{p}.horizon", positive=True),
        "levels": levels,
    }


def _surface(block: dict) -> dict:
    _reject_unknown(block, ("a", "b"), "surface")
    a, b = _ab(block, "surface")
    return {"a": a, "b": b}


def _mode(raw, key: str, n: int, with_entry: bool) -> dict:
    m = _table(raw, key)
    allowed = ("entry", "kind", "wave", "amplitude") if with_entry else ("kind", "wave", "amplitude")
    _reject_unknown(m, allowed, key)
    wave = tuple(_int(v, f"{key}.wave[{i}]") for i, v in enumerate(_list(_require(m, "wave", key), f"{key}.wave")))
    if len(wave) != n:
        raise ConfigError(f"wave vector needs {n} entries", key=f"{key}.wave")
    out = {
        "kind": _choice(_require(m, "kind", key), f"{key}.kind", ("cos", "sin")),
        "wave": wave,
        "amplitude": _real(_require(m, "amplitude", key), f"{key}.amplitude"),
    }
    if with_entry:
        entry = tuple(_int(v, f"{key}.entry[{i}]", 0) for i, v in enumerate(_list(_require(m, "entry", key), f"{key}.entry")))
        if len(entry) != 2 or max(entry) >= n:
            raise ConfigError(f"entry must be a pair of indices below {n}", key=f"{key}.entry")
        out = {"entry": entry, **out}
    return out


def _field(raw, n: int) -> dict:
    p = "torus.field"
    block = _table(raw, p)
    kind = _choice(_require(block, "type", p), f"{p}.type", FIELD_TYPES)
    if kind == "constant":
        _reject_unknown(block, ("type", "matrix"), p)
        matrix = _matrix(_require(block, "matrix", p), f"{p}.matrix", n)
        _spd(matrix, f"{p}.matrix")
        return {"type": kind, "matrix": matrix}
    _reject_unknown(block, ("type", "base", "modes"), p)
    base = _matrix(_require(block, "base", p), f"{p}.base", n)
    modes = tuple(
        _mode(m, f"{p}.modes[{i}]", n, with_entry=kind == "fourier") for i, m in enumerate(_list(block.get("modes", []), f"{p}.modes"))
    )
    return {"type": kind, "base": base, "modes": modes}


def _torus(block: dict) -> dict:
    p = "torus"
    _reject_unknown(block, ("n", "N", "B", "field", "method", "legendre", "horizon"), p)
    n = _int(_require(block, "n", p), f"{p}.n", 1)
    if n > 3:
        raise ConfigError("only n = 1, 2, 3 are supported", key=f"{p}.n")
    N = _int(block.get("N", 32), f"{p}.N", 4)
    B = _matrix(block.get("B", np.eye(n).tolist()), f"{p}.B", n)
    _spd(B, f"{p}.B")
    out = {
        "n": n,
        "N": N,
        "B": B,
        "field": _field(_require(block, "field", p), n),
        "method": _choice(block.get("method", "newton"), f"{p}.method", TORUS_METHODS),
        "legendre": _bool(block.get("legendre", False), f"{p}.legendre"),
        "horizon": _real(block.get("horizon", 50.0), f"{p}.horizon", positive=True),
    }
    # Positivity and periodicity of a(x) are checked on the actual grid.
    from jflow.cli.runner import build_torus_problem

    try:
        build_torus_problem(out)
    except JFlowError as exc:
        raise ConfigError(str(exc), key=f"{p}.field") from exc
    return out


def _slope(block: dict) -> dict:
    p = "slope"
    _reject_unknown(block, ("preset", "space", "omega", "alpha", "k", "subvarieties"), p)
    if ("preset" in block) == ("space" in block):
        raise ConfigError("give exactly one of 'preset' and 'space'", key=f"{p}.preset")
    out: dict[str, Any] = {}
    if "preset" in block:
        out["preset"] = _choice(block["preset"], f"{p}.preset", PRESETS)
    else:
        sp = _table(block["space"], f"{p}.space")
        _reject_unknown(sp, ("dimension", "basis", "entries"), f"{p}.space")
        entries = []
        for i, e in enumerate(_list(_require(sp, "entries", f"{p}.space"), f"{p}.space.entries")):
            key = f"{p}.space.entries[{i}]"
            e = _table(e, key)
            _reject_unknown(e, ("index", "value"), key)
            index = tuple(_int(v, f"{key}.index", 0) for v in _list(_require(e, "index", key), f"{key}.index"))
            entries.append({"index": index, "value": _rational(_require(e, "value", key), f"{key}.value")})
        out["space"] = {
            "dimension": _int(_require(sp, "dimension", f"{p}.space"), f"{p}.space.dimension", 1),
            "basis": tuple(str(s) for s in _list(_require(sp, "basis", f"{p}.space"), f"{p}.space.basis")),
            "entries": tuple(entries),
        }
    out["omega"] = _rational_vector(_require(block, "omega", p), f"{p}.omega")
    out["alpha"] = _rational_vector(_require(block, "alpha", p), f"{p}.alpha")
    out["k"] = _int(block.get("k", 1), f"{p}.k", 1)
    subs = []
    for i, s in enumerate(_list(_require(block, "subvarieties", p), f"{p}.subvarieties")):
        key = f"{p}.subvarieties[{i}]"
        s = _table(s, key)
        _reject_unknown(s, ("name", "divisors"), key)
        divisors = tuple(_rational_vector(d, f"{key}.divisors[{j}]") for j, d in enumerate(_list(_require(s, "divisors", key), f"{key}.divisors")))
        if not divisors:
            raise ConfigError("a subvariety needs at least one divisor", key=f"{key}.divisors")
        subs.append({"name": str(_require(s, "name", key)), "divisors": divisors})
    out["subvarieties"] = tuple(subs)
    from jflow.cli.runner import build_slope_problem

    try:
        build_slope_problem(out)
    except (JFlowError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc), key=p) from exc
    return out


_BLOCKS = {"ruled": _ruled, "torus": _torus, "slope": _slope, "surface": _surface}


def tolerances(raw: dict | None, overrides: dict | None = None) -> dict:
    tol = dict(DEFAULT_TOLERANCES)
    for source, prefix in ((raw or {}, "tolerances"), (overrides or {}, "--tol")):
        _reject_unknown(source, DEFAULT_TOLERANCES, prefix)
        for k, v in source.items():
            tol[k] = _real(v, f"{prefix}.{k}", positive=True)
    return tol


def validate(doc: dict) -> RunConfig:
    """Turn a parsed TOML tree into a RunConfig."""
    command = _choice(doc.get("command"), "command", COMMANDS) if "command" in doc else None
    if command is None:
        raise ConfigError("missing required key", key="command")
    _reject_unknown(doc, ("command", "out", "tolerances", command), "")
    out = doc.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError("expected a string", key="out")
    block = _table(_require(doc, command, ""), command) if command in doc else None
    if block is None:
        raise ConfigError(f"missing [{command}] table", key=command)
    return RunConfig(
        command=command,
        params=_BLOCKS[command](block),
        out=out,
        tolerances=tolerances(_table(doc.get("tolerances", {}), "tolerances")),
    )


def parse_config(text: str) -> RunConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        msg = getattr(exc, "msg", str(exc))
        raise ConfigError(f"syntax error: {msg}", line=line) from exc
    return validate(doc)


def _plain(value):
    """Normalized value to a TOML-writable tree; rationals become 'p/q' strings."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def to_document(config: RunConfig) -> dict:
    doc: dict[str, Any] = {"command": config.command}
    if config.out is not None:
        doc["out"] = config.out
    doc["tolerances"] = dict(config.tolerances)
    doc[config.command] = _plain(config.params)
    return doc


def serialize(config: RunConfig) -> str:
    return tomli_w.dumps(to_document(config))
