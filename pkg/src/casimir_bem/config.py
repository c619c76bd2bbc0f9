"""TOML run configuration.

A config fully describes one run: bodies, medium, quadrature settings and
the command sections (``[energy]``, ``[force]``, ``[sweep]``,
``[landscape]``).  Relative paths resolve against the config file.  Every
value is validated at load time.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .assembly import AssemblyOptions, Body, Geometry
from .errors import ConfigError, MaterialError
from .geometry import rotation_matrix
from .kernels.panels import DEFAULT_SETTINGS, QuadratureSettings
from .materials import (
    PEC,
    VACUUM,
    Constant,
    Drude,
    LorentzSum,
    MaterialModel,
    Oscillator,
    load_table,
    to_inverse_um,
    validate_model,
)
from .mesh import generate_primitive, load_mesh
from .quadrature import XiQuadrature
from .reference import PfaDescriptor
from .sweeps import LandscapePlan, SweepPlan

SECTIONS = {"medium", "materials", "bodies", "quadrature", "assembly",
            "energy", "force", "sweep", "landscape", "output"}


@dataclass
class RunConfig:
    """Parsed and validated run description."""

    path: Path | None
    geometry: Geometry
    quad: XiQuadrature
    assembly: AssemblyOptions
    sections: dict = field(default_factory=dict)

    @property
    def base_dir(self) -> Path:
        return self.path.parent if self.path is not None else Path.cwd()

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def body_index(self, ref) -> int:
        labels = [b.label for b in self.geometry.bodies]
        if isinstance(ref, str):
            if ref not in labels:
                raise ConfigError(f"unknown body {ref!r}; have {labels}")
            return labels.index(ref)
        if isinstance(ref, int) and 0 <= ref < len(labels):
            return ref
        raise ConfigError(f"body reference {ref!r} out of range")

    def force_target(self):
        sec = self.sections.get("force", {})
        body = self.body_index(sec.get("body", len(self.geometry.bodies) - 1))
        return body, _vec(sec.get("axis", (0.0, 0.0, 1.0)), "force.axis")

    def sweep_plan(self) -> SweepPlan:
        sec = self.sections.get("sweep")
        if sec is None:
            raise ConfigError("config has no [sweep] section")
        _known(sec, {"moving", "axis", "grid", "parameter", "normalization", "pfa"}, "sweep")
        pfa = None
        if "pfa" in sec:
            try:
                pfa = PfaDescriptor(d=1.0, **sec["pfa"])
            except TypeError as exc:
                raise ConfigError(f"sweep.pfa: {exc}") from exc
        try:
            return SweepPlan(self.geometry, sec.get("moving", len(self.geometry.bodies) - 1),
                             _floats(_need(sec, "grid", "sweep"), "sweep.grid"),
                             _vec(sec.get("axis", (0.0, 0.0, 1.0)), "sweep.axis"),
                             sec.get("parameter", "gap"), sec.get("normalization", "none"), pfa)
        except ValueError as exc:
            raise ConfigError(f"sweep: {exc}") from exc

    def landscape_plan(self) -> LandscapePlan:
        sec = self.sections.get("landscape")
        if sec is None:
            raise ConfigError("config has no [landscape] section")
        _known(sec, {"theta1", "theta2", "axis1", "axis2"}, "landscape")
        try:
            return LandscapePlan(self.geometry,
                                 _floats(_need(sec, "theta1", "landscape"), "landscape.theta1"),
                                 _floats(_need(sec, "theta2", "landscape"), "landscape.theta2"),
                                 _vec(_need(sec, "axis1", "landscape"), "landscape.axis1"),
                                 _vec(_need(sec, "axis2", "landscape"), "landscape.axis2"))
        except ValueError as exc:
            raise ConfigError(f"landscape: {exc}") from exc


# --------------------------------------------------------------------------
# helpers


def _need(sec: dict, key: str, where: str):
    if key not in sec:
        raise ConfigError(f"[{where}] is missing required key {key!r}")
    return sec[key]


def _known(sec: dict, keys: set, where: str):
    extra = set(sec) - keys
    if extra:
        raise ConfigError(f"[{where}] has unknown keys {sorted(extra)}")


def _num(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{where} must be a number, got {x!r}")
    return float(x)


def _floats(xs, where: str) -> list:
    if not isinstance(xs, list):
        raise ConfigError(f"{where} must be a list of numbers")
    return [_num(x, where) for x in xs]


def _vec(x, where: str) -> tuple:
    v = _floats(list(x) if isinstance(x, (list, tuple)) else x, where)
    if len(v) != 3:
        raise ConfigError(f"{where} must have three components")
    return tuple(v)


def _freq(sec: dict, key: str, unit: str, where: str, default=None) -> float:
    if key not in sec:
        if default is None:
            raise ConfigError(f"{where} is missing {key!r}")
        return default
    return float(to_inverse_um(_num(sec[key], f"{where}.{key}"), unit))


# --------------------------------------------------------------------------
# materials


def parse_material(spec, named: dict, base: Path, where: str) -> MaterialModel:
    """Material from a name ('pec', 'vacuum', a [materials] entry) or a table.

    Inline tables take ``model`` = constant | drude | lorentz | table.  Drude
    and Lorentz frequencies are in ``unit`` (1/um, rad/s or eV).
    """
    if isinstance(spec, str):
        key = spec.lower()
        if key == "pec":
            return PEC()
        if key == "vacuum":
            return VACUUM
        if spec in named:
            return named[spec]
        raise ConfigError(f"{where}: unknown material {spec!r}")
    if not isinstance(spec, dict):
        raise ConfigError(f"{where}: material must be a name or a table")
    model = spec.get("model")
    unit = spec.get("unit", "1/um")
    try:
        if model == "constant":
            _known(spec, {"model", "eps", "mu"}, where)
            m = Constant(_num(_need(spec, "eps", where), f"{where}.eps"),
                         _num(spec.get("mu", 1.0), f"{where}.mu"))
        elif model == "drude":
            _known(spec, {"model", "unit", "omega_p", "gamma", "mu"}, where)
            m = Drude(_freq(spec, "omega_p", unit, where), _freq(spec, "gamma", unit, where, 0.0),
                      _num(spec.get("mu", 1.0), f"{where}.mu"))
        elif model == "lorentz":
            _known(spec, {"model", "unit", "eps_inf", "oscillators", "mu", "source"}, where)
            oscs = []
            for j, o in enumerate(spec.get("oscillators", [])):
                w = f"{where}.oscillators[{j}]"
                _known(o, {"strength", "sigma", "omega0", "gamma"}, w)
                w0 = _freq(o, "omega0", unit, w)
                g = _freq(o, "gamma", unit, w, 0.0)
                if "strength" in o:
                    sigma = _num(o["strength"], f"{w}.strength") * w0 * w0
                else:
                    scale = float(to_inverse_um(1.0, unit))
                    sigma = _num(_need(o, "sigma", w), f"{w}.sigma") * scale * scale
                oscs.append(Oscillator(sigma, w0, g))
            m = LorentzSum(_num(spec.get("eps_inf", 1.0), f"{where}.eps_inf"), tuple(oscs),
                           _num(spec.get("mu", 1.0), f"{where}.mu"))
        elif model == "table":
            _known(spec, {"model", "unit", "path"}, where)
            p = Path(_need(spec, "path", where))
            m = load_table(p if p.is_absolute() else base / p, unit)
        else:
            raise ConfigError(f"{where}: unknown material model {model!r}")
        return validate_model(m)
    except MaterialError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


# --------------------------------------------------------------------------
# bodies


def parse_body(spec: dict, k: int, named: dict, base: Path) -> Body:
    where = f"bodies[{k}]"
    if not isinstance(spec, dict):
        raise ConfigError(f"{where} must be a table")
    _known(spec, {"label", "mesh", "primitive", "dims", "resolution", "grading", "pole",
                  "material", "translation", "rotation_axis", "rotation_angle", "scale"}, where)
    label = str(spec.get("label", f"body{k}"))
    if ("mesh" in spec) == ("primitive" in spec):
        raise ConfigError(f"{where}: give exactly one of 'mesh' or 'primitive'")
    if "mesh" in spec:
        p = Path(spec["mesh"])
        mesh = load_mesh(p if p.is_absolute() else base / p)
    else:
        res = spec.get("resolution", 2)
        if isinstance(res, bool) or not isinstance(res, int):
            raise ConfigError(f"{where}.resolution must be an integer")
        kw = {}
        if "grading" in spec:
            kw["grading"] = _num(spec["grading"], f"{where}.grading")
        if "pole" in spec:
            kw["pole"] = _vec(spec["pole"], f"{where}.pole")
        mesh = generate_primitive(str(spec["primitive"]),
                                  _floats(_need(spec, "dims", where), f"{where}.dims"), res, **kw)
    if "scale" in spec:
        mesh = mesh.scaled(_num(spec["scale"], f"{where}.scale"))
    material = parse_material(_need(spec, "material", where), named, base, f"{where}.material")
    angle = _num(spec.get("rotation_angle", 0.0), f"{where}.rotation_angle")
    axis = _vec(spec.get("rotation_axis", (0.0, 0.0, 1.0)), f"{where}.rotation_axis")
    try:
        rot = rotation_matrix(axis, angle)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    t = _vec(spec.get("translation", (0.0, 0.0, 0.0)), f"{where}.translation")
    return Body(label, mesh, material, rot, np.array(t))


# --------------------------------------------------------------------------


def _quadrature(sec: dict) -> XiQuadrature:
    _known(sec, {"rtol", "atol", "max_evals", "xi0", "workers"}, "quadrature")
    kw = {}
    for key in ("rtol", "atol", "xi0"):
        if key in sec:
            kw[key] = _num(sec[key], f"quadrature.{key}")
    for key in ("max_evals", "workers"):
        if key in sec:
            v = sec[key]
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"quadrature.{key} must be an integer")
            kw[key] = v
    try:
        return XiQuadrature(**kw)
    except ValueError as exc:
        raise ConfigError(f"quadrature: {exc}") from exc


def _assembly(sec: dict) -> AssemblyOptions:
    names = {f.name for f in fields(QuadratureSettings)}
    _known(sec, names | {"n_sign"}, "assembly")
    kw = {}
    for k, v in sec.items():
        if k == "n_sign":
            continue
        kw[k] = tuple(tuple(x) for x in v) if k == "escalate" else v
    try:
        settings = replace(DEFAULT_SETTINGS, **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"assembly: {exc}") from exc
    sign = sec.get("n_sign", 1)
    if sign not in (1, -1):
        raise ConfigError("assembly.n_sign must be 1 or -1")
    return AssemblyOptions(settings=settings, sign=sign)


def parse_config(data: dict, path: Path | None = None) -> RunConfig:
    """Validate a decoded TOML document and build the run objects."""
    unknown = set(data) - SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    base = path.parent if path is not None else Path.cwd()
    named = {}
    for name, spec in data.get("materials", {}).items():
        named[name] = parse_material(spec, named, base, f"materials.{name}")
    medium_spec = data.get("medium", {}).get("material", "vacuum")
    medium = parse_material(medium_spec, named, base, "medium.material")
    bodies = data.get("bodies")
    if not bodies:
        raise ConfigError("config needs at least one [[bodies]] entry")
    parsed = [parse_body(b, k, named, base) for k, b in enumerate(bodies)]
    geometry = Geometry(parsed, medium)
    cfg = RunConfig(path, geometry, _quadrature(data.get("quadrature", {})),
                    _assembly(data.get("assembly", {})),
                    {k: data[k] for k in ("energy", "force", "sweep", "landscape", "output")
                     if k in data})
    # fail fast on command sections too
    if "force" in cfg.sections:
        cfg.force_target()
    if "sweep" in cfg.sections:
        cfg.sweep_plan()
    if "landscape" in cfg.sections:
        cfg.landscape_plan()
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, path.resolve())
