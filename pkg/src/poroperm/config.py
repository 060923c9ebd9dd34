"""INI-style run configuration files.

A configuration has five sections: [mesh], [material], [relation], [time]
and [problem]. Parsing collects every problem it finds and reports them all
in a single error, so a bad file never needs more than one round trip.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .biot import ConfigurationError, SolverConfig
from .relations import KozenyCarman, NetworkInspired

EXAMPLE_CONFIG = """\
# Coupled consolidation run configuration. All values in SI units.

[mesh]
L = 2.0            ; domain width (m)
H = 1.0            ; domain height (m)
dx = 0.02          ; cell width (m), must divide L
dy = 0.02          ; cell height (m), must divide H
diagonal = right   ; cell split: right | alternating

[material]
E = 35.0e6         ; Young's modulus (Pa)
nu = 0.3           ; Poisson's ratio
eta = 1.307e-3     ; fluid viscosity (Pa s)
theta0 = 0.4       ; initial porosity
d_s = 0.2e-3       ; grain diameter (m)

[relation]
kind = kozeny-carman   ; kozeny-carman | network-inspired
; p_c = 0.3232         ; percolation threshold, network-inspired only

[time]
tau = 0.5          ; step size (s)
T = 300.0          ; final time (s)

[problem]
kind = high_pump_pressure   ; high_pump_pressure | squeeze
p_pump = 50.0e5    ; injection pressure (Pa)
sigma0 = 0.0       ; vertical load intensity (N/m^2), squeeze only
stabilization = true
coupling = lagged  ; lagged | picard
"""

_SECTIONS = {
    "mesh": {"L", "H", "dx", "dy", "diagonal"},
    "material": {"E", "nu", "eta", "theta0", "d_s"},
    "relation": {"kind", "p_c"},
    "time": {"tau", "T"},
    "problem": {"kind", "p_pump", "sigma0", "stabilization", "coupling"},
}


def _get_float(parser, section, key, errors, default=None):
    if not parser.has_option(section, key):
        if default is not None:
            return default
        errors.append(f"[{section}] missing key {key}")
        return None
    raw = parser.get(section, key)
    try:
        return float(raw)
    except ValueError:
        errors.append(f"[{section}] {key} = {raw!r} is not a number")
        return None


def load_config(path) -> SolverConfig:
    """Parse and validate a configuration file into a :class:`SolverConfig`."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(path.read_text())
    except configparser.Error as exc:
        raise ConfigurationError(f"config syntax error: {exc}") from exc

    errors: list[str] = []
    for section, keys in _SECTIONS.items():
        if not parser.has_section(section):
            errors.append(f"missing section [{section}]")
        else:
            unknown = set(parser.options(section)) - {k.lower() for k in keys}
            if unknown:
                errors.append(f"[{section}] unknown keys: {', '.join(sorted(unknown))}")
    if any(e.startswith("missing section") for e in errors):
        raise ConfigurationError("; ".join(errors))

    L = _get_float(parser, "mesh", "L", errors)
    H = _get_float(parser, "mesh", "H", errors)
    dx = _get_float(parser, "mesh", "dx", errors)
    dy = _get_float(parser, "mesh", "dy", errors)
    diagonal = parser.get("mesh", "diagonal", fallback="right")

    E = _get_float(parser, "material", "E", errors)
    nu = _get_float(parser, "material", "nu", errors)
    eta = _get_float(parser, "material", "eta", errors)
    theta0 = _get_float(parser, "material", "theta0", errors)
    d_s = _get_float(parser, "material", "d_s", errors)

    tau = _get_float(parser, "time", "tau", errors)
    T = _get_float(parser, "time", "T", errors)

    rel_kind = parser.get("relation", "kind", fallback=None)
    relation = None
    if rel_kind is None:
        errors.append("[relation] missing key kind")
    elif rel_kind == "kozeny-carman":
        if theta0 is not None and d_s is not None:
            relation = KozenyCarman(d_s=d_s, theta0=theta0)
    elif rel_kind == "network-inspired":
        p_c = _get_float(parser, "relation", "p_c", errors)
        if None not in (p_c, theta0, d_s):
            relation = NetworkInspired(p_c=p_c, theta0=theta0, d_s=d_s)
    else:
        errors.append(f"[relation] unknown kind {rel_kind!r}")

    problem_kind = parser.get("problem", "kind", fallback=None)
    if problem_kind is None:
        errors.append("[problem] missing key kind")
    p_pump = _get_float(parser, "problem", "p_pump", errors)
    sigma0 = _get_float(parser, "problem", "sigma0", errors, default=0.0)
    coupling = parser.get("problem", "coupling", fallback="lagged")
    try:
        stabilization = parser.getboolean("problem", "stabilization", fallback=True)
    except ValueError:
        errors.append("[problem] stabilization must be a boolean")
        stabilization = True

    if errors:
        raise ConfigurationError("; ".join(errors))

    cfg = SolverConfig(relation=relation, problem_kind=problem_kind,
                       E=E, nu=nu, eta=eta, theta0=theta0, d_s=d_s,
                       p_pump=p_pump, sigma0=sigma0, tau=tau, T=T,
                       L=L, H=H, dx=dx, dy=dy, diagonal=diagonal,
                       stabilization=stabilization, coupling=coupling)
    cfg.validate()
    return cfg
