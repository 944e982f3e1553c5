"""TOML run configuration: parsing, validation and normalized re-emission.

Every physical quantity carries its unit in the key name (``rho_kg_m3``,
``half_period_m``, ``omega_rad_s``); nothing is inferred.
"""
from dataclasses import dataclass, field
import math
import re
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError, InvalidCellError
from .unitcell import (BoxSubregion, IsotropicMaterial, ReferenceMedium, UnitCell,
                       subdivide_box)

SCHEMA_VERSION = 1

_TOP_KEYS = {"schema_version", "cell", "matrix", "reference", "subregion", "sweep",
             "output", "fields"}
_MATERIAL_KEYS = {"rho_kg_m3", "lambda_pa", "mu_pa", "young_pa", "poisson"}
_SUBREGION_KEYS = _MATERIAL_KEYS | {"label", "lo_m", "hi_m", "divisions"}
_SWEEP_KEYS = {"q_rad_m", "omega_rad_s", "omega_range_rad_s", "n_max"}
_OUTPUT_KEYS = {"dir", "willis_check", "convergence_n_max", "threads", "residual_tol"}
_FIELDS_KEYS = {"points_file", "mean_stress_pa", "mean_velocity_m_s"}


@dataclass
class RunConfig:
    """Validated run description."""

    cell: UnitCell
    q_list: list
    omega_list: list
    n_max: tuple
    out_dir: str = "dynhom-out"
    willis_check: bool = False
    convergence_n_max: tuple = ()
    threads: int = 1
    residual_tol: float = 1e-9
    points_file: str = None
    mean_stress: tuple = (1.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    mean_velocity: tuple = (0.0, 0.0, 0.0)
    base_dir: Path = field(default_factory=Path.cwd)
    warnings: list = field(default_factory=list)

    def sweep_points(self):
        """(q, omega) pairs in input order, q outermost."""
        return [(tuple(q), float(w)) for q in self.q_list for w in self.omega_list]

    def resolve(self, path):
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


def _line_of(text, key):
    if text is None:
        return None
    pat = re.compile(rf"^\s*\[*\s*{re.escape(key)}\b", re.MULTILINE)
    m = pat.search(text)
    return text.count("\n", 0, m.start()) + 1 if m else None


class _Ctx:
    def __init__(self, text):
        self.text = text

    def fail(self, msg, path):
        key = path.split(".")[-1].split("[")[0]
        raise ConfigError(msg, field=path, line=_line_of(self.text, key))

    def check_keys(self, table, allowed, path):
        if not isinstance(table, dict):
            self.fail("expected a table", path)
        for key in table:
            if key not in allowed:
                sub = f"{path}.{key}" if path else key
                self.fail(f"unknown key '{key}'", sub)

    def number(self, table, key, path, positive=False):
        if key not in table:
            self.fail("missing required key", f"{path}.{key}")
        v = table[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(f"expected a finite number, got {v!r}", f"{path}.{key}")
        if positive and v <= 0:
            self.fail(f"expected a positive number, got {v!r}", f"{path}.{key}")
        return float(v)

    def vector(self, value, n, path, integer=False):
        if not isinstance(value, list) or len(value) != n:
            self.fail(f"expected a list of {n} numbers", path)
        out = []
        for v in value:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                self.fail(f"expected numbers, got {v!r}", path)
            if integer and (not isinstance(v, int)):
                self.fail(f"expected integers, got {v!r}", path)
            out.append(int(v) if integer else float(v))
        return tuple(out)

    def material(self, table, path):
        rho = self.number(table, "rho_kg_m3", path, positive=True)
        has_lame = "lambda_pa" in table or "mu_pa" in table
        has_young = "young_pa" in table or "poisson" in table
        if has_lame and has_young:
            self.fail("give either lambda_pa/mu_pa or young_pa/poisson, not both", path)
        try:
            if has_young:
                return IsotropicMaterial.from_young(
                    rho, self.number(table, "young_pa", path, positive=True),
                    self.number(table, "poisson", path))
            return IsotropicMaterial(rho=rho, lam=self.number(table, "lambda_pa", path),
                                     mu=self.number(table, "mu_pa", path))
        except InvalidCellError as exc:
            self.fail(str(exc), path)


def parse_config(text, base_dir=None):
    """Parse TOML text into a :class:`RunConfig`."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"\s*\(at line (\d+), column \d+\)", str(exc))
        detail = str(exc).replace(m.group(0), "") if m else str(exc)
        raise ConfigError(f"malformed TOML: {detail}",
                          line=int(m.group(1)) if m else None) from None
    ctx = _Ctx(text)
    ctx.check_keys(data, _TOP_KEYS, "")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        ctx.fail(f"unsupported schema_version {version!r}", "schema_version")

    cell_t = data.get("cell")
    if cell_t is None:
        ctx.fail("missing required table", "cell")
    ctx.check_keys(cell_t, {"half_period_m"}, "cell")
    if "half_period_m" not in cell_t:
        ctx.fail("missing required key", "cell.half_period_m")
    half = ctx.vector(cell_t["half_period_m"], 3, "cell.half_period_m")
    if min(half) <= 0:
        ctx.fail("half periods must be positive", "cell.half_period_m")

    if "matrix" not in data:
        ctx.fail("missing required table", "matrix")
    ctx.check_keys(data["matrix"], _MATERIAL_KEYS, "matrix")
    matrix = ctx.material(data["matrix"], "matrix")
    if "reference" in data:
        ctx.check_keys(data["reference"], _MATERIAL_KEYS, "reference")
        ref_mat = ctx.material(data["reference"], "reference")
    else:
        ref_mat = matrix
    try:
        reference = ReferenceMedium(ref_mat)
    except InvalidCellError as exc:
        ctx.fail(str(exc), "reference")

    boxes = []
    subs = data.get("subregion", [])
    if not isinstance(subs, list):
        ctx.fail("expected an array of tables [[subregion]]", "subregion")
    for k, sub in enumerate(subs):
        path = f"subregion[{k}]"
        ctx.check_keys(sub, _SUBREGION_KEYS, path)
        for key in ("lo_m", "hi_m"):
            if key not in sub:
                ctx.fail("missing required key", f"{path}.{key}")
        lo = ctx.vector(sub["lo_m"], 3, f"{path}.lo_m")
        hi = ctx.vector(sub["hi_m"], 3, f"{path}.hi_m")
        mat = ctx.material(sub, path)
        label = sub.get("label", f"sub{k}")
        if not isinstance(label, str):
            ctx.fail("label must be a string", f"{path}.label")
        try:
            if "divisions" in sub:
                div = ctx.vector(sub["divisions"], 3, f"{path}.divisions", integer=True)
                boxes.extend(subdivide_box(lo, hi, div, mat, label=label))
            else:
                boxes.append(BoxSubregion(lo=lo, hi=hi, material=mat, label=label))
        except InvalidCellError as exc:
            ctx.fail(str(exc), path)
    try:
        cell = UnitCell(half_periods=half, reference=reference, matrix_material=matrix,
                        subregions=tuple(boxes))
    except InvalidCellError as exc:
        ctx.fail(str(exc), "subregion")

    sweep = data.get("sweep")
    if sweep is None:
        ctx.fail("missing required table", "sweep")
    ctx.check_keys(sweep, _SWEEP_KEYS, "sweep")
    if "q_rad_m" not in sweep:
        ctx.fail("missing required key", "sweep.q_rad_m")
    q_raw = sweep["q_rad_m"]
    if not isinstance(q_raw, list) or not q_raw:
        ctx.fail("expected a non-empty list of 3-vectors", "sweep.q_rad_m")
    if all(isinstance(v, (int, float)) for v in q_raw):
        q_raw = [q_raw]
    q_list = [ctx.vector(q, 3, f"sweep.q_rad_m[{i}]") for i, q in enumerate(q_raw)]
    if ("omega_rad_s" in sweep) == ("omega_range_rad_s" in sweep):
        ctx.fail("give exactly one of omega_rad_s or omega_range_rad_s", "sweep")
    if "omega_rad_s" in sweep:
        om = sweep["omega_rad_s"]
        om = om if isinstance(om, list) else [om]
        omega_list = list(ctx.vector(om, len(om), "sweep.omega_rad_s"))
        if not omega_list:
            ctx.fail("expected at least one frequency", "sweep.omega_rad_s")
    else:
        rng = sweep["omega_range_rad_s"]
        ctx.check_keys(rng, {"start", "stop", "num"}, "sweep.omega_range_rad_s")
        start = ctx.number(rng, "start", "sweep.omega_range_rad_s")
        stop = ctx.number(rng, "stop", "sweep.omega_range_rad_s")
        num = rng.get("num")
        if not isinstance(num, int) or isinstance(num, bool) or num < 1:
            ctx.fail("num must be a positive integer", "sweep.omega_range_rad_s.num")
        omega_list = [float(v) for v in np.linspace(start, stop, num)]
    n_raw = sweep.get("n_max", 5)
    if isinstance(n_raw, list):
        n_max = ctx.vector(n_raw, 3, "sweep.n_max", integer=True)
    elif isinstance(n_raw, int) and not isinstance(n_raw, bool):
        n_max = (n_raw,) * 3
    else:
        ctx.fail("n_max must be an integer or a list of 3 integers", "sweep.n_max")
    if min(n_max) < 0 or max(n_max) < 1:
        ctx.fail("n_max must be non-negative with one axis >= 1", "sweep.n_max")

    cfg = RunConfig(cell=cell, q_list=q_list, omega_list=omega_list, n_max=n_max,
                    base_dir=Path(base_dir) if base_dir else Path.cwd())

    out = data.get("output", {})
    ctx.check_keys(out, _OUTPUT_KEYS, "output")
    if "dir" in out:
        if not isinstance(out["dir"], str):
            ctx.fail("expected a string", "output.dir")
        cfg.out_dir = out["dir"]
    if "willis_check" in out:
        if not isinstance(out["willis_check"], bool):
            ctx.fail("expected true or false", "output.willis_check")
        cfg.willis_check = out["willis_check"]
    if "convergence_n_max" in out:
        conv = out["convergence_n_max"]
        if not isinstance(conv, list):
            ctx.fail("expected a list of integers", "output.convergence_n_max")
        conv = ctx.vector(conv, len(conv), "output.convergence_n_max", integer=True)
        if any(b <= a for a, b in zip(conv, conv[1:])) or (conv and conv[0] < 1):
            ctx.fail("must be positive and strictly increasing", "output.convergence_n_max")
        cfg.convergence_n_max = conv
    if "threads" in out:
        t = out["threads"]
        if not isinstance(t, int) or isinstance(t, bool) or t < 1:
            ctx.fail("expected a positive integer", "output.threads")
        cfg.threads = t
    if "residual_tol" in out:
        cfg.residual_tol = ctx.number(out, "residual_tol", "output", positive=True)

    flds = data.get("fields", {})
    ctx.check_keys(flds, _FIELDS_KEYS, "fields")
    if "points_file" in flds:
        if not isinstance(flds["points_file"], str):
            ctx.fail("expected a string", "fields.points_file")
        cfg.points_file = flds["points_file"]
    if "mean_stress_pa" in flds:
        cfg.mean_stress = ctx.vector(flds["mean_stress_pa"], 6, "fields.mean_stress_pa")
    if "mean_velocity_m_s" in flds:
        cfg.mean_velocity = ctx.vector(flds["mean_velocity_m_s"], 3, "fields.mean_velocity_m_s")

    if not cell.subregions:
        cfg.warnings.append("homogeneous: effective = reference (no subregions listed)")
    if not (matrix.same_density(ref_mat) and matrix.same_stiffness(ref_mat)):
        cfg.warnings.append(
            "reference differs from matrix material: matrix will be discretized or must be "
            "added as subregions (it carries eigenfields that are not modelled)")
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, base_dir=path.parent.resolve())


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    raise TypeError(type(v))


def _material_lines(mat):
    return [f"rho_kg_m3 = {_fmt(mat.rho)}", f"lambda_pa = {_fmt(mat.lam)}",
            f"mu_pa = {_fmt(mat.mu)}"]


def emit_normalized(cfg):
    """Render ``cfg`` as explicit TOML: Lame constants, expanded subregions."""
    cell = cfg.cell
    lines = [f"schema_version = {SCHEMA_VERSION}", "", "[cell]",
             f"half_period_m = {_fmt(list(cell.half_periods))}", "", "[matrix]"]
    lines += _material_lines(cell.matrix_material)
    lines += ["", "[reference]"] + _material_lines(cell.reference.material)
    for box in cell.subregions:
        lines += ["", "[[subregion]]", f"label = {_fmt(box.label)}",
                  f"lo_m = {_fmt(list(box.lo))}", f"hi_m = {_fmt(list(box.hi))}"]
        lines += _material_lines(box.material)
    lines += ["", "[sweep]",
              f"q_rad_m = {_fmt([list(q) for q in cfg.q_list])}",
              f"omega_rad_s = {_fmt([float(w) for w in cfg.omega_list])}",
              f"n_max = {_fmt(list(cfg.n_max))}",
              "", "[output]", f"dir = {_fmt(cfg.out_dir)}",
              f"willis_check = {_fmt(cfg.willis_check)}",
              f"convergence_n_max = {_fmt(list(cfg.convergence_n_max))}",
              f"threads = {cfg.threads}", f"residual_tol = {_fmt(cfg.residual_tol)}",
              "", "[fields]"]
    if cfg.points_file is not None:
        lines.append(f"points_file = {_fmt(cfg.points_file)}")
    lines += [f"mean_stress_pa = {_fmt([float(v) for v in cfg.mean_stress])}",
              f"mean_velocity_m_s = {_fmt([float(v) for v in cfg.mean_velocity])}"]
    return "\n".join(lines) + "\n"
