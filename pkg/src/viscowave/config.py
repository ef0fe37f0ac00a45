"""Scenario and sweep configuration files.

Flat key-value text with sections; no scripting.  Example scenario:

    modes = 8
    kernel = { alpha = 1.0, beta = 3.0 }   # or: kernel = "none"

    [domain]
    length = 3.141592653589793

    [feedback]
    mu1 = 0.0
    mu2 = 0.05
    tau = 0.5
    m = 50

    [time]
    t_end = 10.0
    sample_every = 1

    [initial]
    u0 = "parabola"          # preset, or { coeffs = [0.3, 0.1] }
    u1 = "zero"

    [history]
    f0 = "match_u1"          # "zero" | "match_u1" | "ramp" | preset | coeffs

    [output]
    csv = "trace.csv"
    svg = "energy.svg"

Sweep files name a template scenario and one or more axes:

    template = "scenario.cfg"
    [axis.mu2]
    min = 0.0
    max = 2.0
    count = 9

Every parse or validation failure is reported with its file and line.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernel import ABSENT_KERNEL, KernelError, validate as validate_kernel
from .simulate import ODE_FORMS, SimConfig
from .spectral import DEFAULT_PANELS, Domain1D


class ConfigError(Exception):
    def __init__(self, path, line, message):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}" if line else f"{path}: {message}")


_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _strip_comment(line: str) -> str:
    out = []
    in_str = False
    for ch in line:
        if ch == '"':
            in_str = not in_str
        if ch == "#" and not in_str:
            break
        out.append(ch)
    return "".join(out).strip()


def _parse_scalar(text: str, path, line):
    text = text.strip()
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    if text in ("true", "false"):
        return text == "true"
    if _NUMBER.match(text):
        if re.match(r"^[+-]?\d+$", text):
            return int(text)
        return float(text)
    raise ConfigError(path, line, f"cannot parse value {text!r}")


def _split_top_level(text: str, sep: str = ","):
    """Split on sep outside quotes / brackets / braces."""
    parts, depth, in_str, cur = [], 0, False, []
    for ch in text:
        if ch == '"':
            in_str = not in_str
        elif not in_str and ch in "[{":
            depth += 1
        elif not in_str and ch in "]}":
            depth -= 1
        if ch == sep and depth == 0 and not in_str:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return [p for p in (s.strip() for s in parts) if p]


def _parse_value(text: str, path, line):
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        return [_parse_value(item, path, line) for item in _split_top_level(text[1:-1])]
    if text.startswith("{") and text.endswith("}"):
        table = {}
        for item in _split_top_level(text[1:-1]):
            if "=" not in item:
                raise ConfigError(path, line, f"expected key = value inside {{...}}, got {item!r}")
            k, v = item.split("=", 1)
            table[k.strip()] = _parse_value(v, path, line)
        return table
    return _parse_scalar(text, path, line)


def parse_file(path):
    """Parse into a nested dict; returns (data, lines) where lines maps
    dotted key paths to their source line for error anchoring."""
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise ConfigError(path, 0, str(exc))
    data: dict = {}
    lines: dict = {}
    section: list = []
    for lineno, rawline in enumerate(raw.splitlines(), start=1):
        line = _strip_comment(rawline)
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = [p.strip() for p in line[1:-1].split(".")]
            if not all(section):
                raise ConfigError(path, lineno, f"bad section header {line!r}")
            node = data
            for part in section:
                node = node.setdefault(part, {})
                if not isinstance(node, dict):
                    raise ConfigError(path, lineno, f"section {line!r} collides with a key")
            lines.setdefault(".".join(section), lineno)
            continue
        if "=" not in line:
            raise ConfigError(path, lineno, f"expected key = value, got {line!r}")
        key, value = line.split("=", 1)
        key_parts = section + [p.strip() for p in key.strip().split(".")]
        if not all(key_parts):
            raise ConfigError(path, lineno, f"bad key {key.strip()!r}")
        node = data
        for part in key_parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(path, lineno, f"key {key.strip()!r} collides with a value")
        leaf = key_parts[-1]
        if leaf in node:
            raise ConfigError(path, lineno, f"duplicate key {'.'.join(key_parts)!r}")
        node[leaf] = _parse_value(value, path, lineno)
        lines[".".join(key_parts)] = lineno
    return data, lines


# ---------------------------------------------------------------------------
# scenario loading
# ---------------------------------------------------------------------------

class _Reader:
    def __init__(self, data, lines, path):
        self.data = data
        self.lines = lines
        self.path = path

    def line(self, dotted):
        return self.lines.get(dotted, 0)

    def get(self, dotted, default=None, required=False):
        node = self.data
        for part in dotted.split("."):
            if not isinstance(node, dict) or part not in node:
                if required:
                    raise ConfigError(self.path, 0, f"missing required key {dotted!r}")
                return default
            node = node[part]
        return node

    def number(self, dotted, default=None, required=False):
        v = self.get(dotted, default, required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(self.path, self.line(dotted), f"{dotted} must be a number, got {v!r}")
        return float(v)

    def integer(self, dotted, default=None, required=False):
        v = self.get(dotted, default, required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(self.path, self.line(dotted), f"{dotted} must be an integer, got {v!r}")
        return v


def _data_value(reader: _Reader, dotted, default):
    """A preset name, coefficient list, or { coeffs = [...] } table."""
    v = reader.get(dotted, default)
    where = reader.line(dotted)
    if isinstance(v, str):
        return v
    if isinstance(v, dict):
        if set(v) != {"coeffs"}:
            raise ConfigError(reader.path, where, f"{dotted} table must contain exactly 'coeffs'")
        v = v["coeffs"]
    if isinstance(v, list):
        if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            raise ConfigError(reader.path, where, f"{dotted} coefficients must be numbers")
        return tuple(float(x) for x in v)
    raise ConfigError(reader.path, where, f"{dotted} must be a preset name or coefficients")


def _check_unknown(reader: _Reader, known: set):
    def walk(node, prefix):
        for key, value in node.items():
            dotted = f"{prefix}{key}"
            if isinstance(value, dict) and dotted in _SECTIONS_WITH_SUBKEYS:
                walk(value, dotted + ".")
            elif dotted not in known:
                raise ConfigError(reader.path, reader.line(dotted), f"unknown key {dotted!r}")

    walk(reader.data, "")


_SESSION_KEYS = {
    "modes", "panels", "overflow_guard", "ode_form", "lyap_t0", "kernel",
    "kernel.alpha", "kernel.beta",
    "domain.length",
    "feedback.mu1", "feedback.mu2", "feedback.tau", "feedback.m",
    "time.t_end", "time.sample_every",
    "initial.u0", "initial.u1",
    "history.f0",
    "output.csv", "output.svg", "output.certificate",
}
_SECTIONS_WITH_SUBKEYS = {"domain", "kernel", "feedback", "time", "initial", "history", "output"}


def load_sim_config(path):
    """Read, validate, and freeze a scenario; returns (SimConfig, outputs)
    where outputs holds the configured csv/svg/certificate file names."""
    data, lines = parse_file(path)
    r = _Reader(data, lines, path)
    _check_unknown(r, _SESSION_KEYS)

    length = r.number("domain.length", required=True)
    try:
        domain = Domain1D(length)
    except ValueError as exc:
        raise ConfigError(path, r.line("domain.length"), str(exc))

    kern_value = r.get("kernel", default=None)
    where = r.line("kernel")
    if kern_value is None or kern_value == "none":
        kernel = ABSENT_KERNEL
    elif isinstance(kern_value, dict):
        extra = set(kern_value) - {"alpha", "beta"}
        if extra:
            raise ConfigError(path, where, f"unknown kernel keys {sorted(extra)}")
        try:
            kernel = validate_kernel(float(kern_value.get("alpha", 0.0)), float(kern_value.get("beta", 0.0)))
        except KernelError as exc:
            raise ConfigError(path, where, str(exc))
    else:
        raise ConfigError(path, where, 'kernel must be "none" or { alpha = ..., beta = ... }')

    ode_form = r.get("ode_form", "convolution")
    if ode_form not in ODE_FORMS:
        raise ConfigError(path, r.line("ode_form"), f"ode_form must be one of {ODE_FORMS}")

    try:
        cfg = SimConfig(
            domain=domain,
            modes=r.integer("modes", required=True),
            kernel=kernel,
            mu1=r.number("feedback.mu1", 0.0),
            mu2=r.number("feedback.mu2", 0.0),
            tau=r.number("feedback.tau", required=True),
            m=r.integer("feedback.m", required=True),
            t_end=r.number("time.t_end", required=True),
            sample_every=r.integer("time.sample_every", 1),
            u0=_data_value(r, "initial.u0", "zero"),
            u1=_data_value(r, "initial.u1", "zero"),
            f0=_data_value(r, "history.f0", "match_u1"),
            panels=r.integer("panels", DEFAULT_PANELS),
            overflow_guard=r.number("overflow_guard", 1e12),
            ode_form=ode_form,
            lyap_t0=r.number("lyap_t0", 1.0),
        )
    except ValueError as exc:
        raise ConfigError(path, 0, str(exc))
    outputs = {
        "csv": r.get("output.csv", "trace.csv"),
        "svg": r.get("output.svg", None),
        "certificate": r.get("output.certificate", "certificate.txt"),
    }
    return cfg, outputs


# ---------------------------------------------------------------------------
# sweep loading
# ---------------------------------------------------------------------------

_AXIS_PARAMS = ("mu1", "mu2", "tau", "alpha", "beta")
_SWEEP_KEYS = {"template", "results", "fit_start", "fit_end", "axis"} | {
    f"axis.{p}.{k}" for p in _AXIS_PARAMS for k in ("min", "max", "count", "values")
} | {f"axis.{p}" for p in _AXIS_PARAMS}


@dataclass
class SweepSpec:
    template: SimConfig
    template_outputs: dict
    axes: list            # [(param, values tuple), ...] in file order
    results_name: str
    fit_window: tuple     # (start, end) or None


def load_sweep_spec(path):
    data, lines = parse_file(path)
    path = Path(path)
    r = _Reader(data, lines, path)

    def walk_known(node, prefix):
        for key, value in node.items():
            dotted = f"{prefix}{key}"
            if dotted in ("axis",) or (dotted.startswith("axis.") and isinstance(value, dict) and dotted.count(".") < 2):
                walk_known(value, dotted + ".")
            elif dotted not in _SWEEP_KEYS:
                raise ConfigError(path, r.line(dotted), f"unknown key {dotted!r}")

    walk_known(data, "")

    template_name = r.get("template", required=True)
    if not isinstance(template_name, str):
        raise ConfigError(path, r.line("template"), "template must be a file name string")
    template_path = (path.parent / template_name).resolve()
    template, template_outputs = load_sim_config(template_path)

    axis_node = r.get("axis", default={})
    if not isinstance(axis_node, dict) or not axis_node:
        raise ConfigError(path, r.line("axis"), "sweep needs at least one [axis.<param>] section")
    axes = []
    for param in sorted(axis_node, key=lambda p: r.line(f"axis.{p}")):
        if param not in _AXIS_PARAMS:
            raise ConfigError(path, r.line(f"axis.{param}"), f"unknown axis parameter {param!r}; choose from {_AXIS_PARAMS}")
        spec = axis_node[param]
        where = r.line(f"axis.{param}")
        if "values" in spec:
            values = spec["values"]
            if not isinstance(values, list) or not values:
                raise ConfigError(path, where, f"axis.{param}.values must be a nonempty list")
            vals = tuple(float(v) for v in values)
        else:
            for need in ("min", "max", "count"):
                if need not in spec:
                    raise ConfigError(path, where, f"axis.{param} needs min/max/count or values")
            count = spec["count"]
            if not isinstance(count, int) or count < 1:
                raise ConfigError(path, where, f"axis.{param}.count must be a positive integer")
            vals = tuple(float(v) for v in np.linspace(spec["min"], spec["max"], count))
        if any(not math.isfinite(v) for v in vals):
            raise ConfigError(path, where, f"axis.{param} has non-finite values")
        axes.append((param, vals))

    fit_start = r.number("fit_start", None)
    fit_end = r.number("fit_end", None)
    fit_window = None
    if fit_start is not None or fit_end is not None:
        fit_window = (
            fit_start if fit_start is not None else 0.25 * template.t_end,
            fit_end if fit_end is not None else template.t_end,
        )
    results_name = r.get("results", "results.csv")
    return SweepSpec(template, template_outputs, axes, results_name, fit_window)
