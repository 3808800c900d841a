"""Plain-text problem configuration.

Grammar, one ``key = value`` pair per line; ``#`` starts a comment::

    f       = poly_x 1.5 0 1        # f(x) = 1.5 + 0 x + 1 x^2
    f       = trig_t 2 1 0          # f(t) = 2 + 1 cos t + 0 sin t
    f       = const 2
    u0      = const -4              # boundary traces: const c | trig c0 c1 c2
    u1      = trig 5 0.7 0
    period  = 6.283185307179586     # T; ``2pi`` / ``4pi`` style multiples accepted
    mu      = 0.02
    theta   = 0.5                   # optional, default 0.5
    a       = 0.05                  # optional margin for the f(t) problem
    horizon = 4pi                   # optional, defaults to period
    name    = example2              # optional label

Keys ``f``, ``u0``, ``u1``, ``period`` and ``mu`` are required; anything else
is rejected.
"""
from __future__ import annotations

import math
import re
from pathlib import Path

from .errors import ConfigError
from .model import (
    BoundaryData,
    ProblemSpec,
    constant_trace,
    polynomial_in_x,
    trig_in_t,
    trig_trace,
)

REQUIRED = ("f", "u0", "u1", "period", "mu")
OPTIONAL = ("theta", "a", "horizon", "name")

_PI_RE = re.compile(r"^([-+]?\d*\.?\d*(?:[eE][-+]?\d+)?)\s*\*?\s*pi$")


def parse_number(text: str) -> float:
    s = text.strip().lower()
    m = _PI_RE.match(s)
    if m:
        coef = m.group(1)
        return (float(coef) if coef not in ("", "+", "-") else float(coef + "1")) * math.pi
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def _numbers(parts, key):
    if not parts:
        raise ConfigError(f"{key}: missing coefficients")
    return [parse_number(p) for p in parts]


def _parse_field(value: str):
    kind, *parts = value.replace(",", " ").split()
    coeffs = _numbers(parts, "f")
    if kind == "poly_x":
        return polynomial_in_x(coeffs)
    if kind == "trig_t":
        if len(coeffs) > 3:
            raise ConfigError("trig_t takes at most 3 coefficients")
        return trig_in_t(*coeffs)
    if kind == "const":
        if len(coeffs) != 1:
            raise ConfigError("const takes exactly one value")
        return polynomial_in_x(coeffs)
    raise ConfigError(f"unknown field form {kind!r}")


def _parse_trace(value: str, key: str):
    kind, *parts = value.replace(",", " ").split()
    coeffs = _numbers(parts, key)
    if kind == "const":
        if len(coeffs) != 1:
            raise ConfigError(f"{key}: const takes exactly one value")
        return constant_trace(coeffs[0]), value
    if kind == "trig":
        if len(coeffs) > 3:
            raise ConfigError(f"{key}: trig takes at most 3 coefficients")
        return trig_trace(*coeffs), value
    raise ConfigError(f"{key}: unknown trace form {kind!r}")


def parse_config(text: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in REQUIRED + OPTIONAL:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = value
    missing = [k for k in REQUIRED if k not in entries]
    if missing:
        raise ConfigError(f"missing keys: {', '.join(missing)}")
    return entries


def spec_from_text(text: str) -> ProblemSpec:
    e = parse_config(text)
    field = _parse_field(e["f"])
    u0, _ = _parse_trace(e["u0"], "u0")
    u1, _ = _parse_trace(e["u1"], "u1")
    try:
        boundary = BoundaryData(u0, u1, parse_number(e["period"]))
        return ProblemSpec(
            field=field,
            boundary=boundary,
            mu=parse_number(e["mu"]),
            theta=parse_number(e["theta"]) if "theta" in e else 0.5,
            a_margin=parse_number(e["a"]) if "a" in e else None,
            horizon=parse_number(e["horizon"]) if "horizon" in e else None,
            name=e.get("name", ""),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_spec(path) -> ProblemSpec:
    return spec_from_text(Path(path).read_text())


EXAMPLE1_CONFIG = """\
name = example1
f = poly_x 1.5 0 1
u0 = const -4
u1 = const 4.3
period = 2
mu = 0.02
theta = 0.5
"""

EXAMPLE2_CONFIG = """\
name = example2
f = trig_t 2 1 0
u0 = trig -4 0 -0.5
u1 = trig 5 0.7 0
period = 2pi
horizon = 4pi
mu = 0.02
theta = 0.5
a = 0.05
"""
