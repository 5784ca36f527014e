"""Command-line front end: ``starcurl <scenario> --config run.ini``.

Config files are INI style with sections [domain], [grid], [quadrature],
[scenario] and [output].  Field data are closed-form expressions in x1, x2,
x3 (``exp(x1)*sin(x2)``, ``(0, 0, 1)`` for vectors) or ``csv:<path>`` for a
previously exported field.

Exit codes: 0 all residuals within tolerance, 1 config error,
2 compatibility violation, 3 solver failure or residual above tolerance,
4 I/O error.
"""
from __future__ import annotations

import argparse
import ast
import configparser
import json
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_CONFIG, EXIT_COMPAT, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3, 4
SCENARIOS = ("divcurl", "beltrami", "vekua", "maxwell", "verify")


class ConfigError(ValueError):
    pass


# -- expressions -----------------------------------------------------------------

_FUNCS = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "sqrt": np.sqrt, "log": np.log}
_CONSTS = {"pi": math.pi, "e": math.e}
_VARS = {"x1": 0, "x2": 1, "x3": 2}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply, ast.Div: np.divide, ast.Pow: np.power}


class Expression:
    """Arithmetic expression over x1, x2, x3; a parenthesized triple is a vector field."""

    def __init__(self, text: str):
        self.text = text.strip()
        try:
            tree = ast.parse(self.text.replace("^", "**"), mode="eval").body
        except SyntaxError as exc:
            raise ConfigError(f"syntax error in expression {self.text!r}: {exc.msg}") from None
        if isinstance(tree, ast.Tuple):
            if len(tree.elts) != 3:
                raise ConfigError(f"vector expression needs 3 components, got {len(tree.elts)}")
            self.rank = "vector"
            self._nodes = list(tree.elts)
        else:
            self.rank = "scalar"
            self._nodes = [tree]
        for node in self._nodes:
            self._validate(node)

    def _validate(self, node):
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ConfigError(f"unsupported constant {node.value!r} in {self.text!r}")
        elif isinstance(node, ast.Name):
            if node.id not in _VARS and node.id not in _CONSTS:
                raise ConfigError(f"unknown name {node.id!r} in {self.text!r}")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ConfigError(f"unsupported operator in {self.text!r}")
            self._validate(node.left)
            self._validate(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.UAdd, ast.USub)):
                raise ConfigError(f"unsupported operator in {self.text!r}")
            self._validate(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS or node.keywords or len(node.args) != 1:
                raise ConfigError(f"unsupported function call in {self.text!r} (allowed: {', '.join(_FUNCS)})")
            self._validate(node.args[0])
        else:
            raise ConfigError(f"unsupported syntax {type(node).__name__} in {self.text!r}")

    def _eval(self, node, x):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return x[..., _VARS[node.id]] if node.id in _VARS else _CONSTS[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, x), self._eval(node.right, x))
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, x)
            return -v if isinstance(node.op, ast.USub) else v
        return _FUNCS[node.func.id](self._eval(node.args[0], x))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            parts = [np.broadcast_to(np.asarray(self._eval(n, x), dtype=float), x.shape[:-1]) for n in self._nodes]
        out = parts[0].copy() if self.rank == "scalar" else np.stack(parts, axis=-1)
        if not np.all(np.isfinite(out)):
            raise ConfigError(f"expression {self.text!r} is not finite on the grid")
        return out

    def __repr__(self):
        return f"Expression({self.text!r})"


# -- config ------------------------------------------------------------------------

def _float(s):
    return float(s)


def _int(s):
    return int(s)


def _triple(s):
    parts = [float(p) for p in s.replace("(", "").replace(")", "").split(",")]
    if len(parts) != 3:
        raise ValueError("expected three comma-separated numbers")
    return tuple(parts)


def _choice(*opts):
    def parse(s):
        if s not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}")
        return s
    return parse



def _list(s):
    return tuple(p.strip() for p in s.split(",") if p.strip())


def _field_spec(s):
    return s.strip() if s.strip().startswith("csv:") or s.strip() == "random" else Expression(s)


# key: (parser, default, (lo, hi) or None)
_COMMON = {
    "domain": {
        "kind": (_choice("ball", "box", "radial"), "ball", None),
        "radius": (_float, 1.0, (1e-12, np.inf)),
        "half_extents": (_triple, (1.0, 1.0, 1.0), None),
        "center": (_triple, (0.0, 0.0, 0.0), None),
        "refinement": (_int, 3, (0, 6)),
        "facets_per_edge": (_int, 8, (1, 64)),
        "rho": (Expression, None, None),
    },
    "grid": {"n": (_int, 24, (8, 512))},
    "quadrature": {
        "ray_nodes": (_int, 32, (8, 256)),
        "gradient_step_fraction": (_float, 0.25, (1e-6, 0.5)),
        "singular_correction": (_choice("equivalent_ball", "exclude_cell"), "equivalent_ball", None),
    },
    "output": {
        "dir": (str, "starcurl-out", None),
        "formats": (_list, ("csv",), None),
        "prefix": (str, "", None),
    },
}

_SCENARIO = {
    "divcurl": {
        "g0": (_field_spec, None, None),
        "g": (_field_spec, None, None),
        "gauge": (Expression, None, None),
        "variant": (_choice("free", "neumann", "dirichlet"), "free", None),
        "degree": (_int, 10, (1, 20)),
        "random_degree": (_int, 3, (1, 8)),
    },
    "beltrami": {
        "alpha0": (_float, 0.2, (-np.inf, np.inf)),
        "g": (_field_spec, Expression("(0, 0, 1)"), None),
        "a0": (Expression, None, None),
        "variant": (_choice("free", "neumann"), "free", None),
        "admissibility": (_choice("empirical", "bound", "none"), "empirical", None),
        "k_max": (_int, 40, (1, 1000)),
        "tail_tol": (_float, 1e-8, (1e-300, 1.0)),
        "degree": (_int, 10, (1, 20)),
    },
    "vekua": {
        "operator": (_choice("d_minus_alpha", "d_plus_m"), "d_minus_alpha", None),
        "phi": (Expression, Expression("exp(x1)"), None),
        "g0": (_field_spec, None, None),
        "g": (_field_spec, None, None),
        "dirichlet": (_choice("boundary", "cell"), "boundary", None),
    },
    "maxwell": {
        "eps": (Expression, Expression("1"), None),
        "mu": (Expression, Expression("1"), None),
        "rho": (_field_spec, None, None),
        "j": (_field_spec, None, None),
        "dirichlet": (_choice("boundary", "cell"), "boundary", None),
    },
    "verify": {
        "alpha0": (_float, 0.2, (-np.inf, np.inf)),
    },
}


@dataclass
class RunConfig:
    scenario: str
    domain: dict
    grid_n: int
    quadrature: dict
    params: dict
    output: dict
    seed: int = 0
    source: dict = field(default_factory=dict)

    def echo(self) -> dict:
        def plain(v):
            if isinstance(v, Expression):
                return v.text
            if isinstance(v, tuple):
                return list(v)
            return v
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "domain": {k: plain(v) for k, v in self.domain.items()},
            "grid": {"n": self.grid_n},
            "quadrature": dict(self.quadrature),
            "scenario_params": {k: plain(v) for k, v in self.params.items()},
            "output": {k: plain(v) for k, v in self.output.items()},
        }


def _key_lines(text: str) -> dict:
    lines, section = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        m = re.match(r"^\[([^\]]+)\]$", s)
        if m:
            section = m.group(1).strip()
            lines[(section, None)] = i
        elif section and s and s[0] not in "#;":
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
            lines[(section, key)] = i
    return lines


def _parse_section(cp, name, schema, lines):
    out = {}
    if cp.has_section(name):
        for key, raw in cp.items(name):
            where = f"line {lines.get((name, key), '?')}"
            if key not in schema:
                raise ConfigError(f"unknown key {name}.{key} ({where}); allowed: {', '.join(sorted(schema))}")
            parser, _, rng = schema[key]
            try:
                val = parser(raw)
            except ConfigError as exc:
                raise ConfigError(f"{name}.{key} ({where}): {exc}") from None
            except ValueError as exc:
                raise ConfigError(f"invalid value {name}.{key} = {raw!r} ({where}): {exc}") from None
            if rng is not None and not (rng[0] <= val <= rng[1]):
                raise ConfigError(f"range error: {name}.{key} = {raw} ({where}) must lie in [{rng[0]}, {rng[1]}]")
            out[key] = val
    for key, (_, default, _) in schema.items():
        out.setdefault(key, default)
    return out


def parse_config(text: str, scenario: str | None = None) -> RunConfig:
    """Parse and validate INI text; ``scenario`` (the subcommand) fills or checks [scenario] type."""
    lines = _key_lines(text)
    cp = configparser.ConfigParser(interpolation=None, strict=True, inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.ParsingError as exc:
        bad = ", ".join(f"line {ln}" for ln, _ in exc.errors)
        raise ConfigError(f"syntax error ({bad})") from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"syntax error: key outside a section (line {exc.lineno})") from None
    except configparser.Error as exc:
        raise ConfigError(f"syntax error: {exc}") from None
    for sec in cp.sections():
        if sec not in _COMMON and sec != "scenario":
            raise ConfigError(f"unknown section [{sec}] (line {lines.get((sec, None), '?')})")

    kind = cp.get("scenario", "type", fallback=None)
    if kind is not None and kind not in SCENARIOS:
        raise ConfigError(f"unknown scenario type {kind!r} (line {lines.get(('scenario', 'type'), '?')})")
    if scenario is not None and kind is not None and kind != scenario:
        raise ConfigError(f"config is for scenario {kind!r} but subcommand is {scenario!r}")
    kind = scenario or kind
    if kind is None:
        raise ConfigError("no scenario given: set [scenario] type or use a subcommand")

    schema = dict(_SCENARIO[kind])
    schema["type"] = (_choice(*SCENARIOS), kind, None)
    schema["seed"] = (_int, 0, (0, 2**64 - 1))
    params = _parse_section(cp, "scenario", schema, lines)
    domain = _parse_section(cp, "domain", _COMMON["domain"], lines)
    if domain["kind"] == "radial" and domain["rho"] is None:
        raise ConfigError("domain.rho is required for a radial domain")
    if any(v <= 0 for v in domain["half_extents"]):
        raise ConfigError(f"range error: domain.half_extents must be positive (line {lines.get(('domain', 'half_extents'), '?')})")
    grid = _parse_section(cp, "grid", _COMMON["grid"], lines)
    quad = _parse_section(cp, "quadrature", _COMMON["quadrature"], lines)
    output = _parse_section(cp, "output", _COMMON["output"], lines)
    for fmt in output["formats"]:
        if fmt not in ("csv", "vtk"):
            raise ConfigError(f"unknown output format {fmt!r} (line {lines.get(('output', 'formats'), '?')})")
    seed = params.pop("seed")
    params.pop("type")
    return RunConfig(kind, domain, grid["n"], quad, params, output, seed, {"lines": lines})


# -- export ------------------------------------------------------------------------

_COMPONENTS = {"scalar": ("",), "vector": ("1", "2", "3"), "quaternion": ("0", "1", "2", "3")}


def _columns(f) -> np.ndarray:
    v = np.asarray(f.values, dtype=float)
    return v[:, None] if v.ndim == 1 else v


def write_csv(f, path, name: str = "w") -> None:
    """One row per interior voxel: x,y,z then the field components, 17 significant digits."""
    cols = [name + c for c in _COMPONENTS[f.rank]]
    data = np.hstack([f.grid.points, _columns(f)])
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(["x", "y", "z"] + cols) + "\n")
        for row in data:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_csv(path):
    """Inverse of ``write_csv``: (column names, points (N, 3), values (N, k))."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[:3] != ["x", "y", "z"] or len(header) < 4:
            raise ValueError(f"{path}: not a starcurl field CSV")
        rows = [[float(t) for t in line.split(",")] for line in fh if line.strip()]
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return header[3:], data[:, :3], data[:, 3:]


def write_vtk(path, grid, fields: dict, title: str = "starcurl field") -> None:
    """Legacy ASCII STRUCTURED_POINTS; exterior voxels are 0 and ``interior`` flags the mask."""
    nx, ny, nz = grid.dims
    npts = nx * ny * nz
    out = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET STRUCTURED_POINTS",
           f"DIMENSIONS {nx} {ny} {nz}", "ORIGIN " + " ".join(f"{v:.17g}" for v in grid.origin),
           f"SPACING {grid.h:.17g} {grid.h:.17g} {grid.h:.17g}", f"POINT_DATA {npts}"]

    def lattice(vals, k):
        full = np.zeros(tuple(grid.dims) + ((k,) if k > 1 else ()))
        full[tuple(grid.index.T)] = vals
        # VTK orders points with x fastest
        return full.transpose((2, 1, 0, 3) if k > 1 else (2, 1, 0)).reshape(npts, -1)

    for name, f in fields.items():
        cols = _columns(f)
        if f.rank == "vector":
            out.append(f"VECTORS {name} double")
            out.extend(" ".join(f"{v:.17g}" for v in row) for row in lattice(cols, 3))
        else:
            out.append(f"SCALARS {name} double {cols.shape[1]}")
            out.append("LOOKUP_TABLE default")
            out.extend(" ".join(f"{v:.17g}" for v in row) for row in lattice(cols if cols.shape[1] > 1 else cols[:, 0], cols.shape[1]))
    out.append("SCALARS interior int 1")
    out.append("LOOKUP_TABLE default")
    out.extend(str(int(v)) for v in grid.mask.transpose(2, 1, 0).ravel())
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def export_field(f, fmt: str, path, name: str = "w") -> None:
    if fmt == "csv":
        write_csv(f, path, name)
    elif fmt == "vtk":
        write_vtk(path, f.grid, {name: f})
    else:
        raise ValueError(f"unknown format {fmt!r}")


# -- scenarios -----------------------------------------------------------------------

def build_domain(d: dict):
    from .geometry import build_ball, build_box, build_radial

    if d["kind"] == "ball":
        return build_ball(d["radius"], d["center"], d["refinement"])
    if d["kind"] == "box":
        return build_box(d["half_extents"], d["center"], d["facets_per_edge"])
    return build_radial(d["rho"], d["center"], d["refinement"])


def _load_field(spec, grid, rank: str, rng, random_degree: int = 3):
    from .algebra import GridField
    from .fields import random_solenoidal

    if spec is None:
        return None
    if isinstance(spec, Expression):
        if spec.rank != rank:
            raise ConfigError(f"expression {spec.text!r} must be a {rank} field")
        return GridField(grid, rank, spec(grid.points))
    if spec == "random":
        if rank != "vector":
            raise ConfigError("'random' is only available for vector fields")
        return random_solenoidal(grid, rng, random_degree)
    path = spec[4:]
    try:
        _, pts, vals = read_csv(path)
    except (OSError, ValueError) as exc:
        raise OSError(f"cannot read field {path}: {exc}") from exc
    idx = np.rint((pts - grid.origin) / grid.h).astype(np.int64)
    ok = np.all((idx >= 0) & (idx < np.array(grid.dims)), axis=1)
    pos = np.full(len(pts), -1)
    pos[ok] = grid.lookup[tuple(idx[ok].T)]
    if np.any(pos < 0) or len(np.unique(pos)) != grid.n_interior:
        raise ConfigError(f"{path}: points do not match the interior voxels of this grid")
    width = {"scalar": 1, "vector": 3}[rank]
    if vals.shape[1] != width:
        raise ConfigError(f"{path}: expected {width} value columns, got {vals.shape[1]}")
    out = np.empty((grid.n_interior, width))
    out[pos] = vals
    return GridField(grid, rank, out[:, 0] if rank == "scalar" else out)


def _scenario_divcurl(cfg, grid, vcfg, rng):
    from .algebra import ScalarFunction
    from .bvp import right_inverse_curl_dirichlet, right_inverse_curl_neumann
    from .divcurl import DivCurlData, _minus_t1, check_solenoidal, solve_div_curl
    from .algebra import fd_curl, fd_div
    from .report import SolveReport
    from .tolerances import tol_op

    p = cfg.params
    report = SolveReport(f"divcurl[{p['variant']}]")
    g0 = _load_field(p["g0"], grid, "scalar", rng)
    g = _load_field(p["g"], grid, "vector", rng, p["random_degree"])
    if g0 is None and g is None:
        raise ConfigError("divcurl needs scenario.g0 and/or scenario.g")
    gauge = ScalarFunction(p["gauge"]) if p["gauge"] is not None else None
    if p["variant"] == "free":
        w = solve_div_curl(DivCurlData(g0, g, gauge), None, vcfg)
    else:
        if g is not None:
            check_solenoidal(g)
        vals = np.zeros((grid.n_interior, 3))
        if g0 is not None:
            vals += _minus_t1(g0, grid.points, vcfg)
        if g is not None:
            solver = right_inverse_curl_neumann if p["variant"] == "neumann" else right_inverse_curl_dirichlet
            vals += solver(g, None, vcfg, p["degree"]).values
        if gauge is not None:
            vals += gauge.grad(grid.points)
        w = g.with_values(vals) if g is not None else g0.with_values(vals, "vector")
    m = fd_div(w).accuracy_mask & (grid.distance_to_boundary() >= 2 * grid.h)
    tol = tol_op(grid.h, vcfg.ray_nodes)
    scale = max((g.norm(m) if g is not None else 0.0) + (g0.norm(m) if g0 is not None else 0.0), 1e-300)
    d = fd_div(w).values - (g0.values if g0 is not None else 0.0)
    c = fd_curl(w).values - (g.values if g is not None else 0.0)
    h3 = grid.cell_volume
    report.check("div_residual", float(np.sqrt(np.sum(d[m] ** 2) * h3) / scale), tol)
    report.check("curl_residual", float(np.sqrt(np.sum(c[m] ** 2) * h3) / scale), tol)
    return {"w": w}, [report.stop()], {}


def _scenario_beltrami(cfg, grid, vcfg, rng):
    from .beltrami import BeltramiConfig, beltrami_neumann_bvp, beltrami_series

    p = cfg.params
    bcfg = BeltramiConfig(p["alpha0"], p["k_max"], p["tail_tol"], p["variant"], p["admissibility"],
                          degree=p["degree"], seed=cfg.seed, volume=vcfg)
    if p["a0"] is not None:
        mesh = grid.domain.boundary
        w, report = beltrami_neumann_bvp(p["a0"](mesh.points), grid, p["alpha0"], bcfg)
    else:
        g = _load_field(p["g"], grid, "vector", rng)
        w, report, _ = beltrami_series(g, bcfg)
    norms = report.info.get("term_norms", [])
    ratios = [np.nan] + list(report.info.get("ratios", []))
    table = "k,norm,ratio\n" + "".join(f"{k},{n:.17g},{r:.17g}\n" for k, n, r in zip(range(len(norms)), norms, ratios))
    return {"w": w}, [report], {"terms.csv": table}


def _scenario_vekua(cfg, grid, vcfg, rng):
    from .algebra import GridField, ScalarFunction
    from .vekua import IrrotationalCoefficient, solve_d_minus_alpha, solve_d_plus_M

    p = cfg.params
    if p["phi"].rank != "scalar":
        raise ConfigError("scenario.phi must be a scalar expression")
    phi_fn = ScalarFunction(p["phi"])
    phi = GridField(grid, "scalar", phi_fn(grid.points))
    if np.any(phi.values <= 0):
        raise ConfigError("scenario.phi must be positive on the domain")
    coeff = IrrotationalCoefficient.from_phi(phi, phi_fn.grad(grid.points))
    g0 = _load_field(p["g0"], grid, "scalar", rng)
    g = _load_field(p["g"], grid, "vector", rng)
    q = np.zeros((grid.n_interior, 4))
    if g0 is not None:
        q[:, 0] = g0.values
    if g is not None:
        q[:, 1:] = g.values
    data = GridField(grid, "quaternion", q)
    if p["operator"] == "d_minus_alpha":
        w, report = solve_d_minus_alpha(data, coeff, cfg=vcfg)
    else:
        w, report = solve_d_plus_M(data, coeff, vcfg, p["dirichlet"])
    return {"w": w}, [report], {}


def _scenario_maxwell(cfg, grid, vcfg, rng):
    from .algebra import GridField, ScalarFunction
    from .vekua import MaxwellMedium, solve_maxwell_static

    p = cfg.params
    pts = grid.points
    for key in ("eps", "mu"):
        if p[key].rank != "scalar":
            raise ConfigError(f"scenario.{key} must be a scalar expression")
    eps_fn, mu_fn = ScalarFunction(p["eps"]), ScalarFunction(p["mu"])
    rho = _load_field(p["rho"], grid, "scalar", rng) or GridField(grid, "scalar", np.zeros(grid.n_interior))
    j = _load_field(p["j"], grid, "vector", rng) or GridField(grid, "vector", np.zeros((grid.n_interior, 3)))
    try:
        medium = MaxwellMedium(GridField(grid, "scalar", eps_fn(pts)), GridField(grid, "scalar", mu_fn(pts)), rho, j,
                               grad_eps=eps_fn.grad(pts), grad_mu=mu_fn.grad(pts))
    except ValueError as exc:
        if type(exc) is ValueError:
            raise ConfigError(str(exc)) from None
        raise
    E, H, report = solve_maxwell_static(medium, vcfg, p["dirichlet"])
    return {"E": E, "H": H}, [report], {}


def _scenario_verify(cfg, grid, vcfg, rng):
    from .verify import run_verification

    return {}, run_verification(grid, vcfg, rng, alpha0=cfg.params["alpha0"]), {}


_RUNNERS = {"divcurl": _scenario_divcurl, "beltrami": _scenario_beltrami, "vekua": _scenario_vekua,
            "maxwell": _scenario_maxwell, "verify": _scenario_verify}


def _execute(cfg: RunConfig, out_dir: Path, stream):
    from .geometry import voxelize
    from .potentials import VolumeOperatorConfig

    try:
        vcfg = VolumeOperatorConfig(**cfg.quadrature)
        domain = build_domain(cfg.domain)
        grid = voxelize(domain, cfg.grid_n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rng = np.random.default_rng(cfg.seed)
    fields, reports, extra = _RUNNERS[cfg.scenario](cfg, grid, vcfg, rng)

    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = cfg.output["prefix"]
    for name, f in fields.items():
        if "csv" in cfg.output["formats"]:
            write_csv(f, out_dir / f"{prefix}{name}.csv", name)
    if fields and "vtk" in cfg.output["formats"]:
        write_vtk(out_dir / f"{prefix}{cfg.scenario}.vtk", grid, fields, f"starcurl {cfg.scenario}")
    for name, text in extra.items():
        (out_dir / f"{prefix}{cfg.scenario}_{name}").write_text(text)
    payload = {"config": cfg.echo(), "grid": {"h": grid.h, "dims": list(grid.dims), "n_interior": grid.n_interior},
               "reports": [r.to_dict() for r in reports]}
    (out_dir / f"{prefix}report.json").write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
    for r in reports:
        print("\n".join(r.lines()), file=stream)
    return all(r.passed for r in reports)


def run(cfg: RunConfig, out_dir=None, stream=None) -> int:
    """Execute a parsed config and write artifacts; returns the process exit code."""
    from .beltrami import SeriesDivergenceError
    from .divcurl import CompatibilityError
    from .vekua import SolverError

    stream = stream or sys.stdout
    out_dir = Path(out_dir if out_dir is not None else cfg.output["dir"])
    try:
        ok = _execute(cfg, out_dir, stream)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CompatibilityError as exc:
        print(f"compatibility error: {exc}", file=sys.stderr)
        return EXIT_COMPAT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SolverError, SeriesDivergenceError, np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if not ok:
        print("one or more residuals exceed their tolerance", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="starcurl", description="div-curl, Beltrami and Vekua solvers on star-shaped domains")
    sub = ap.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=name != "verify", help="INI config file")
        sp.add_argument("--out", help="output directory (overrides [output] dir)")
        sp.add_argument("--seed", type=int, help="random seed (overrides [scenario] seed)")
        sp.add_argument("--grid-n", type=int, help="voxels along the longest side (overrides [grid] n)")
    args = ap.parse_args(argv)

    text = ""
    if args.config is not None:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            print(f"I/O error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_IO
    try:
        cfg = parse_config(text, args.scenario)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("range error: --seed must be non-negative")
            cfg.seed = args.seed
        if args.grid_n is not None:
            if not 8 <= args.grid_n <= 512:
                raise ConfigError(f"range error: --grid-n = {args.grid_n} must lie in [8, 512]")
            cfg.grid_n = args.grid_n
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
