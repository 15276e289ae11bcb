"""Run configuration: a line-oriented ``[section]`` / ``key = value`` format.

Grammar
-------
* Blank lines and lines whose first non-blank character is ``#`` or ``;`` are ignored.
* ``[name]`` opens a section; each section may appear once.
* ``key = value`` assigns inside the current section; keys are unique per section.
* A ``#`` preceded by whitespace starts a trailing comment.
* Lists are comma separated; ``none`` marks an optional value as unset.

Every key has a type, a default and a constraint.  Keys unknown to the schema,
or not used by the selected ``kind`` of a section, are rejected.  The resolved
configuration serialises back (``RunConfig.to_text``) to a document that parses
to an equal configuration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import ParseError, ValidationError

__all__ = ["RunConfig", "parse_config", "load_config", "SCHEMA", "SECTIONS"]


# value types


def _parse_list(text):
    items = [s.strip() for s in text.split(",")]
    if items == [""]:
        return []
    if any(s == "" for s in items):
        raise ValueError("empty list entry")
    return items


class _Type:
    name = "value"

    def parse(self, text: str):
        raise NotImplementedError

    def format(self, value) -> str:
        raise NotImplementedError

    def normalize(self, value):
        return value


class _Float(_Type):
    name = "float"

    def parse(self, text):
        v = float(text)
        if not math.isfinite(v):
            raise ValueError("value must be finite")
        return v

    def format(self, value):
        return repr(float(value))

    def normalize(self, value):
        return float(value)


class _OptFloat(_Float):
    name = "float or none"

    def parse(self, text):
        return None if text.lower() == "none" else super().parse(text)

    def format(self, value):
        return "none" if value is None else super().format(value)

    def normalize(self, value):
        return None if value is None else float(value)


class _Int(_Type):
    name = "integer"

    def parse(self, text):
        return int(text, 10)

    def format(self, value):
        return str(int(value))

    def normalize(self, value):
        return int(value)


class _Str(_Type):
    name = "string"

    def __init__(self, choices=None):
        self.choices = choices

    def parse(self, text):
        if len(text) >= 2 and text[0] == text[-1] == '"':
            text = text[1:-1]
        return text

    def format(self, value):
        return str(value)


class _Bool(_Type):
    name = "boolean"

    def parse(self, text):
        t = text.lower()
        if t in ("true", "yes", "on", "1"):
            return True
        if t in ("false", "no", "off", "0"):
            return False
        raise ValueError("expected true or false")

    def format(self, value):
        return "true" if value else "false"


class _FloatList(_Type):
    name = "float list"

    def __init__(self, length=None, multiple=None):
        self.length = length
        self.multiple = multiple

    def parse(self, text):
        vals = tuple(_Float().parse(s) for s in _parse_list(text))
        self.check_shape(vals)
        return vals

    def check_shape(self, vals):
        if self.length is not None and len(vals) != self.length:
            raise ValueError(f"expected {self.length} values, got {len(vals)}")
        if self.multiple is not None and len(vals) % self.multiple:
            raise ValueError(f"expected a multiple of {self.multiple} values, got {len(vals)}")

    def format(self, value):
        return ", ".join(repr(float(v)) for v in value)

    def normalize(self, value):
        vals = tuple(float(v) for v in np.ravel(value))
        self.check_shape(vals)
        return vals


class _StrList(_Type):
    name = "string list"

    def parse(self, text):
        return tuple(_parse_list(text))

    def format(self, value):
        return ", ".join(value)

    def normalize(self, value):
        return tuple(value)


FLOAT, OPTFLOAT, INT, STR, BOOL = _Float(), _OptFloat(), _Int(), _Str(), _Bool()
VEC3 = _FloatList(3)
FLIST = _FloatList()


# constraints


def positive(v):
    return None if v > 0 else "must be > 0"


def nonneg(v):
    return None if v >= 0 else "must be >= 0"


def opt_positive(v):
    return None if v is None or v > 0 else "must be > 0 or none"


def pow2(v):
    return None if v > 0 and v & (v - 1) == 0 else "must be a positive power of two"


def uint64(v):
    return None if 0 <= v < 2 ** 64 else "must be an unsigned 64-bit integer"


def nonzero_vec(v):
    return None if any(c != 0.0 for c in v) else "must be a nonzero vector"


def increasing(v):
    if len(v) == 0:
        return None
    if len(v) < 2 or any(b <= a for a, b in zip(v[:-1], v[1:])):
        return "must be strictly increasing with at least two entries"
    return None


def positive_list(v):
    return None if len(v) > 0 and all(x > 0 for x in v) else "must be a nonempty list of values > 0"


def branch_value(v):
    return None if v in (1, -1) else "must be 1 or -1"


def one_of(*choices):
    def check(v):
        return None if v in choices else f"must be one of {', '.join(choices)}"
    check.choices = choices
    return check


def pairs_check(v):
    bad = [p for p in v if p not in ("++", "+-", "-+", "--")]
    return None if v and not bad else "must list branch pairs among ++, +-, -+, --"


def window_check(v):
    return None if 0.0 < v[0] < 1.0 < v[1] else "must satisfy 0 < low < 1 < high"


@dataclass(frozen=True)
class Key:
    type: _Type
    default: Any
    check: Callable | None = None
    kinds: tuple | None = None  # kinds of the section that use the key; None means all
    doc: str = ""


SECTIONS = ("flow", "spectrum", "ray", "source", "mc", "xsec", "field", "output")

_BOX = {
    "box_lo": Key(VEC3, (-1.0e4, -1.0e4, -1.0e4), doc="validity box lower corner"),
    "box_hi": Key(VEC3, (1.0e4, 1.0e4, 1.0e4), doc="validity box upper corner"),
    "t_min": Key(FLOAT, 0.0, doc="validity window start"),
    "t_max": Key(FLOAT, 1.0e4, doc="validity window end"),
}

SCHEMA: dict[str, dict[str, Key]] = {
    "flow": {
        "kind": Key(STR, "uniform", one_of("uniform", "linear_c", "linear_shear", "composite")),
        "c0": Key(FLOAT, 340.0, positive, doc="sound speed (linear_c: value at the origin)"),
        "rho0": Key(FLOAT, 1.2, positive, doc="density"),
        "v0": Key(VEC3, (0.0, 0.0, 0.0), kinds=("uniform", "linear_shear", "composite"),
                  doc="mean flow velocity"),
        "g": Key(FLOAT, 0.0, kinds=("linear_c",), doc="sound-speed gradient magnitude"),
        "direction": Key(VEC3, (0.0, 0.0, 1.0), nonzero_vec, kinds=("linear_c",)),
        "shear": Key(_FloatList(9), (0.0,) * 9, kinds=("linear_shear",),
                     doc="row-major dv_i/dx_j"),
        "c_grad": Key(VEC3, (0.0, 0.0, 0.0), kinds=("composite",)),
        "c_rate": Key(FLOAT, 0.0, kinds=("composite",)),
        "c_modes": Key(_FloatList(multiple=6), (), kinds=("composite",),
                       doc="groups of (amplitude, kappa1, kappa2, kappa3, nu, phase)"),
        "v_modes": Key(_FloatList(multiple=7), (), kinds=("composite",),
                       doc="groups of (component, amplitude, kappa1, kappa2, kappa3, nu, phase)"),
        **_BOX,
    },
    "spectrum": {
        "kind": Key(STR, "none", one_of("none", "gaussian_c", "flat_c", "velocity_gaussian",
                                        "velocity_von_karman", "combined", "tabulated")),
        "variance": Key(FLOAT, 1.0e-4, positive,
                        kinds=("gaussian_c", "velocity_gaussian", "velocity_von_karman", "combined")),
        "length": Key(FLOAT, 1.0, positive, kinds=("gaussian_c", "velocity_gaussian", "combined")),
        "outer": Key(FLOAT, 10.0, positive, kinds=("velocity_von_karman",)),
        "inner": Key(FLOAT, 0.01, positive, kinds=("velocity_von_karman",)),
        "level": Key(FLOAT, 1.0, positive, kinds=("flat_c",)),
        "velocity_variance": Key(FLOAT, 1.0e-4, positive, kinds=("combined",)),
        "velocity_length": Key(FLOAT, 1.0, positive, kinds=("combined",)),
        "tau": Key(OPTFLOAT, None, opt_positive,
                   kinds=("gaussian_c", "velocity_gaussian", "velocity_von_karman", "combined"),
                   doc="correlation time; none means frozen"),
        "scale": Key(FLOAT, 1.0, positive,
                     kinds=("velocity_gaussian", "velocity_von_karman", "tabulated")),
        "file": Key(STR, "", kinds=("tabulated",), doc="CSV table path"),
    },
    "ray": {
        "x0": Key(VEC3, (0.0, 0.0, 0.0)),
        "k0": Key(VEC3, (1.0, 0.0, 0.0), nonzero_vec),
        "branch": Key(INT, 1, branch_value),
        "t0": Key(FLOAT, 0.0),
        "t_final": Key(FLOAT, 1.0),
        "dt": Key(FLOAT, 1.0e-3, positive),
        "scheme": Key(STR, "rk4", one_of("rk4", "rk45")),
        "rtol": Key(FLOAT, 1.0e-10, positive),
        "atol": Key(FLOAT, 1.0e-12, positive),
        "tol_h": Key(OPTFLOAT, 1.0e-6, opt_positive),
        "n_samples": Key(INT, 0, nonneg, doc="evenly spaced output rows; 0 writes every step"),
    },
    "source": {
        "kind": Key(STR, "point_beam", one_of("point_beam", "gaussian_beam", "isotropic")),
        "x0": Key(VEC3, (0.0, 0.0, 0.0)),
        "k0": Key(VEC3, (1.0, 0.0, 0.0), nonzero_vec, kinds=("point_beam", "gaussian_beam")),
        "x_spread": Key(FLOAT, 0.0, nonneg, kinds=("gaussian_beam",)),
        "k_spread": Key(FLOAT, 0.0, nonneg, kinds=("gaussian_beam",)),
        "k_mag": Key(FLOAT, 1.0, positive, kinds=("isotropic",)),
        "branch": Key(INT, 1, branch_value),
        "total_action": Key(FLOAT, 1.0, positive),
    },
    "mc": {
        "n_particles": Key(INT, 10000, positive),
        "t_final": Key(FLOAT, 1.0, positive),
        "snapshots": Key(FLIST, (), doc="snapshot times; empty means t_final only"),
        "seed": Key(INT, 0, uint64),
        "sigma_maj": Key(OPTFLOAT, None, opt_positive, doc="majorant rate; none means automatic"),
        "dt": Key(FLOAT, 1.0e-2, positive),
        "chunk_size": Key(INT, 32768, positive),
        "workers": Key(INT, 1, positive),
        "weight_window": Key(_FloatList(2), (0.1, 10.0), window_check),
        "x1_edges": Key(FLIST, (), increasing),
        "x2_edges": Key(FLIST, (), increasing),
        "x3_edges": Key(FLIST, (), increasing),
        "mu_edges": Key(FLIST, (), increasing),
        "phi_edges": Key(FLIST, (), increasing),
        "kmag_edges": Key(FLIST, (), increasing),
    },
    "xsec": {
        "x": Key(VEC3, (0.0, 0.0, 0.0), doc="evaluation point of the ambient state"),
        "t": Key(FLOAT, 0.0),
        "k_mag": Key(FLIST, (1.0,), positive_list),
        "k_dir": Key(VEC3, (0.0, 0.0, 1.0), nonzero_vec),
        "p_mag": Key(FLIST, (), doc="outgoing |p| values; empty means |p| = |k|"),
        "n_angles": Key(INT, 19, positive, doc="polar angles evenly spaced on [0, pi]"),
        "pairs": Key(_StrList(), ("++", "+-", "-+", "--"), pairs_check),
        "total": Key(BOOL, True, doc="also tabulate the total cross-section"),
        "n_radial": Key(INT, 128, positive),
        "n_polar": Key(INT, 64, positive),
        "n_azimuth": Key(INT, 8, positive),
    },
    "field": {
        "kind": Key(STR, "plane", one_of("plane", "packet", "sine")),
        "nx": Key(INT, 128, pow2),
        "nt": Key(INT, 128, pow2),
        "dx": Key(FLOAT, math.pi / 128, positive),
        "dt": Key(FLOAT, math.pi / 128, positive),
        "eps": Key(FLOAT, 1.0 / 64, positive),
        "waves": Key(_FloatList(multiple=3), (1.0, 1.0, -1.0), kinds=("plane",),
                     doc="groups of (amplitude, k, omega)"),
        "k0": Key(FLOAT, 1.0, kinds=("packet",)),
        "omega0": Key(FLOAT, -1.0, kinds=("packet",)),
        "center": Key(FLOAT, 1.5, kinds=("packet",)),
        "width": Key(FLOAT, 0.3, positive, kinds=("packet",)),
        "speed": Key(FLOAT, 0.0, kinds=("packet",)),
        "amplitude": Key(FLIST, (1.0,), kinds=("packet", "sine"),
                         doc="packet: peak amplitude; sine: polynomial coefficients of sigma(x)"),
        "mean": Key(FLIST, (0.0,), kinds=("sine",), doc="polynomial coefficients of the mean"),
        "n_lags_x": Key(INT, 64, pow2),
        "n_lags_t": Key(INT, 64, pow2),
        "taper": Key(STR, "hann", one_of("hann", "gauss", "none")),
        "taper_width": Key(FLOAT, 0.25, positive),
        "boundary": Key(STR, "zero", one_of("zero", "periodic")),
        "x_stride": Key(INT, 32, positive),
        "t_stride": Key(INT, 32, positive),
    },
    "output": {
        "dir": Key(STR, "out"),
    },
}


def _key_name(section, key):
    return f"[{section}].{key}"


def _strip_comment(line):
    for i, ch in enumerate(line):
        if ch == "#" and (i == 0 or line[i - 1].isspace()):
            return line[:i]
    return line


def _tokenize(text: str):
    """Yield raw ``{section: {key: (value, line, column)}}`` from ``text``."""
    raw: dict[str, dict] = {}
    where: dict[str, int] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = _strip_comment(line).rstrip()
        stripped = body.lstrip()
        col = len(body) - len(stripped) + 1
        if not stripped or stripped[0] in "#;":
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ParseError("unterminated section header", lineno, col)
            name = stripped[1:-1].strip()
            if not name.isidentifier():
                raise ParseError(f"invalid section name {name!r}", lineno, col + 1)
            if name in raw:
                raise ParseError(f"duplicate section [{name}] (first at line {where[name]})",
                                 lineno, col)
            raw[name] = {}
            where[name] = lineno
            section = name
            continue
        if "=" not in stripped:
            raise ParseError("expected 'key = value'", lineno, col)
        if section is None:
            raise ParseError("assignment outside any section", lineno, col)
        key, value = stripped.split("=", 1)
        key = key.strip()
        if not key.isidentifier():
            raise ParseError(f"invalid key {key!r}", lineno, col)
        if key in raw[section]:
            first = raw[section][key][1]
            raise ParseError(f"duplicate key {key!r} in [{section}] (first at line {first})",
                             lineno, col)
        vcol = col + len(stripped) - len(stripped.split("=", 1)[1].lstrip())
        raw[section][key] = (value.strip(), lineno, vcol)
    return raw


def _resolve_section(name, raw_keys):
    schema = SCHEMA[name]
    values = {}
    for key, (text, lineno, col) in raw_keys.items():
        if key not in schema:
            raise ValidationError(_key_name(name, key), f"unknown key (line {lineno})")
        spec = schema[key]
        try:
            values[key] = spec.type.parse(text)
        except ValueError as exc:
            raise ValidationError(_key_name(name, key),
                                  f"expected {spec.type.name}: {exc} (line {lineno}, column {col})")
    return _complete(name, values)


def _complete(name, values):
    schema = SCHEMA[name]
    kind = values.get("kind", schema["kind"].default) if "kind" in schema else None
    resolved = {}
    for key, spec in schema.items():
        used = spec.kinds is None or kind in spec.kinds
        if key in values and not used:
            raise ValidationError(_key_name(name, key), f"not used by kind = {kind}")
        if not used:
            continue
        v = spec.type.normalize(values[key]) if key in values else spec.default
        if spec.check is not None:
            problem = spec.check(v)
            if problem:
                raise ValidationError(_key_name(name, key), problem)
        resolved[key] = v
    _cross_checks(name, resolved)
    return resolved


def _cross_checks(name, s):
    if name == "flow":
        if any(h <= l for l, h in zip(s["box_lo"], s["box_hi"])):
            raise ValidationError("[flow].box_hi", "must exceed box_lo componentwise")
        if not s["t_max"] > s["t_min"]:
            raise ValidationError("[flow].t_max", "must exceed t_min")
        if s["kind"] == "composite":
            for i in range(0, len(s["v_modes"]), 7):
                if s["v_modes"][i] not in (1.0, 2.0, 3.0):
                    raise ValidationError("[flow].v_modes", "component must be 1, 2 or 3")
    if name == "spectrum" and s["kind"] == "tabulated" and not s["file"]:
        raise ValidationError("[spectrum].file", "required for kind = tabulated")
    if name == "ray" and not s["t_final"] > s["t0"]:
        raise ValidationError("[ray].t_final", "must exceed t0")
    if name == "mc":
        bad = [t for t in s["snapshots"] if not 0.0 <= t <= s["t_final"]]
        if bad:
            raise ValidationError("[mc].snapshots", "times must lie in [0, t_final]")
    if name == "xsec" and any(p <= 0 for p in s["p_mag"]):
        raise ValidationError("[xsec].p_mag", "must be > 0")


@dataclass
class RunConfig:
    """Resolved configuration; every section is present with defaults filled."""

    sections: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.sections[name]

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.sections == other.sections

    def with_overrides(self, section, **values):
        """Return a copy with ``values`` replacing keys of ``section`` (re-validated)."""
        sections = {k: dict(v) for k, v in self.sections.items()}
        merged = dict(sections[section])
        merged.update(values)
        sections[section] = _complete(section, merged)
        return RunConfig(sections)

    def to_text(self) -> str:
        lines = []
        for name in SECTIONS:
            lines.append(f"[{name}]")
            for key, value in self.sections[name].items():
                lines.append(f"{key} = {SCHEMA[name][key].type.format(value)}")
            lines.append("")
        return "\n".join(lines)

    # builders

    def flow_model(self):
        from . import flow as fl

        s = self["flow"]
        box = fl.Box(np.array(s["box_lo"]), np.array(s["box_hi"]), s["t_min"], s["t_max"])
        if s["kind"] == "uniform":
            return fl.Uniform(s["c0"], s["v0"], s["rho0"], box=box)
        if s["kind"] == "linear_c":
            return fl.LinearSoundSpeed(s["c0"], s["g"], s["direction"], s["rho0"], box=box)
        if s["kind"] == "linear_shear":
            return fl.LinearShear(s["c0"], s["v0"], np.reshape(s["shear"], (3, 3)), s["rho0"],
                                  box=box)
        cm = [(m[0], m[1:4], m[4], m[5]) for m in np.reshape(s["c_modes"], (-1, 6))]
        c = fl.ScalarField(s["c0"], s["c_grad"], s["c_rate"], tuple(cm))
        vmodes = [[] for _ in range(3)]
        for m in np.reshape(s["v_modes"], (-1, 7)):
            vmodes[int(m[0]) - 1].append((m[1], m[2:5], m[5], m[6]))
        v = [fl.ScalarField(s["v0"][i], modes=tuple(vmodes[i])) for i in range(3)]
        return fl.Composite(c, v, fl.ScalarField(s["rho0"]), box=box)

    def spectrum(self):
        from . import spectra as sp

        s = self["spectrum"]
        kind = s["kind"]
        if kind == "none":
            return None
        if kind == "gaussian_c":
            return sp.GaussianSoundSpeed(s["variance"], s["length"], s["tau"])
        if kind == "flat_c":
            return sp.FlatSoundSpeed(s["level"])
        if kind == "velocity_gaussian":
            return sp.IsotropicIncompressibleVelocity(
                sp.GaussianProfile(s["variance"], s["length"]), s["tau"], s["scale"])
        if kind == "velocity_von_karman":
            return sp.IsotropicIncompressibleVelocity(
                sp.VonKarmanProfile(s["variance"], s["outer"], s["inner"]), s["tau"], s["scale"])
        if kind == "combined":
            return sp.Combined(
                sp.GaussianSoundSpeed(s["variance"], s["length"], s["tau"]),
                sp.IsotropicIncompressibleVelocity(
                    sp.GaussianProfile(s["velocity_variance"], s["velocity_length"]), s["tau"]))
        return sp.TabulatedSpectrum.from_csv(s["file"], s["scale"])

    def source(self):
        from .transport import GaussianBeam, IsotropicPoint, PointBeam

        s = self["source"]
        if s["kind"] == "point_beam":
            return PointBeam(s["x0"], s["k0"], s["branch"], s["total_action"])
        if s["kind"] == "gaussian_beam":
            return GaussianBeam(s["x0"], s["k0"], s["x_spread"], s["k_spread"], s["branch"],
                                s["total_action"])
        return IsotropicPoint(s["x0"], s["k_mag"], s["branch"], s["total_action"])

    def histogram(self):
        from .transport import HistogramSpec

        s = self["mc"]
        edges = {name: (list(s[f"{name}_edges"]) or None)
                 for name in ("x1", "x2", "x3", "mu", "phi", "kmag")}
        return HistogramSpec(**edges)

    def transport_config(self, workers=None):
        from .transport import TransportConfig

        s = self["mc"]
        return TransportConfig(
            model=self.flow_model(), source=self.source(), spectrum=self.spectrum(),
            n_particles=s["n_particles"], t_final=s["t_final"],
            snapshot_times=tuple(s["snapshots"]), seed=s["seed"], sigma_maj=s["sigma_maj"],
            dt=s["dt"], histogram=self.histogram(), chunk_size=s["chunk_size"],
            workers=workers or s["workers"], weight_window=tuple(s["weight_window"]))

    def integrator(self):
        from .rays import IntegratorSpec

        s = self["ray"]
        return IntegratorSpec(scheme=s["scheme"], dt=s["dt"], rtol=s["rtol"], atol=s["atol"],
                              tol_h=s["tol_h"])

    def quadrature(self):
        from .xsec import QuadratureSpec

        s = self["xsec"]
        return QuadratureSpec(n_radial=s["n_radial"], n_polar=s["n_polar"],
                              n_azimuth=s["n_azimuth"])


def parse_config(text: str) -> RunConfig:
    """Parse and validate ``text``; sections left out take their defaults.

    Raises
    ------
    ParseError
        Malformed lines or duplicate keys/sections, with line and column.
    ValidationError
        Unknown sections or keys, wrong types, or violated constraints.
    """
    raw = _tokenize(text)
    for name, keys in raw.items():
        if name not in SCHEMA:
            first = min((v[1] for v in keys.values()), default=0)
            raise ValidationError(f"[{name}]", f"unknown section (near line {first})")
    sections = {name: _resolve_section(name, raw.get(name, {})) for name in SECTIONS}
    return RunConfig(sections)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
