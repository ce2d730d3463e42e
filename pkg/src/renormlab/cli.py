"""Batch scenario runner.

One subcommand per scenario kind; each reads a TOML config, validates it
strictly (unknown keys are rejected), dispatches to the library, and writes a
schema-stable JSON report (plus optional CSV grids).  Identical configs and
seeds produce byte-identical reports apart from the wall-time field.

Exit codes: 0 success (including undecided outcomes, flagged in the result),
2 config parse/validation error, 3 precondition violation, 4 numeric failure.
"""

from __future__ import annotations

import os
import sys
import time

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import library
from .errors import (
    ConfigError,
    EvaluationOverflowError,
    PositivityError,
    PreconditionError,
    RenormlabError,
    SelectionIncompleteError,
    SingularMatrixError,
)
from .expr import AffineChart, CConst, CExp, CPoly, CProd, parse_expr, parse_holo
from .field import Box, GridSpec
from .domains import parse_domain
from . import engine as eng
from . import groups, maps, normality, schemas, tubes
from .maps import HarmonicMap
from .groups import MatrixHoloMap, TorusMap
from .reporting import report_doc, write_csv, write_report

EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_NUMERIC = 4

UNDECIDED_VALUES = {"Undecided"}


def _load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as e:
        raise ConfigError(f"config not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config parse error in {path}: {e}") from e


def _resolve_expr(section: dict):
    if "library" in section:
        name = section["library"]
        if name not in library.EXPRESSIONS:
            raise ConfigError(f"unknown library expression {name!r}")
        return library.expression(name)
    if "expr" in section:
        try:
            return parse_expr(section["expr"])
        except ValueError as e:
            raise ConfigError(f"bad expression: {e}") from e
    raise ConfigError("object needs 'expr' or 'library'")


def _resolve_domain(section: dict):
    if "library" in section:
        name = section["library"]
        if name not in library.DOMAINS:
            raise ConfigError(f"unknown library domain {name!r}")
        return library.domain(name)
    if "tree" in section:
        try:
            return parse_domain(section["tree"])
        except ValueError as e:
            raise ConfigError(f"bad domain tree: {e}") from e
    raise ConfigError("domain needs 'tree' or 'library'")


def _engine_config(section: dict) -> eng.EngineConfig:
    fields = {k: v for k, v in section.items() if k != "steps"}
    return eng.EngineConfig(**fields)


def _box(spec) -> Box:
    los = tuple(float(lo) for lo, hi in spec)
    his = tuple(float(hi) for lo, hi in spec)
    return Box(los, his)


# ---------------------------------------------------------------------------
# scenario implementations
# ---------------------------------------------------------------------------


def _run_renormalize(config: dict, seed: int):
    obj = config["object"]
    f = _resolve_expr(obj)
    p = np.asarray(obj["seed_point"], dtype=float)
    engine_cfg = _engine_config(config.get("engine", {}))
    steps = int(config.get("engine", {}).get("steps", 30))
    trace, report = eng.renormalize_entire(f, p, count=steps, config=engine_cfg)
    status = "undecided" if report.classification in UNDECIDED_VALUES else "decided"
    result = {"status": status, "trace": trace.to_json(), "report": report.to_json()}
    extras = {}
    out = config.get("output", {})
    rows = [
        (w, r, g)
        for w, r, g in zip(
            report.window, report.residuals, list(report.gaps) + [""]
        )
    ]
    extras[out.get("residuals_csv", "residuals.csv")] = (
        ("step", "residual", "gap_to_next"),
        rows,
    )
    if "grid_csv" in out:
        pts = GridSpec(trace.probe_box, trace.probe_resolution).points()
        vals = trace.steps[-1].rescaled.eval_grid(pts)
        extras[out["grid_csv"]] = (
            ("x1", "x2", "g_value"),
            [(float(a), float(b), float(v)) for (a, b), v in zip(pts, vals)],
        )
    return result, extras


def _run_normality(config: dict, seed: int):
    fam_cfg = config["family"]
    exprs = []
    for name in fam_cfg.get("library", []):
        if name not in library.EXPRESSIONS:
            raise ConfigError(f"unknown library expression {name!r}")
        exprs.append(library.expression(name))
    exprs += [parse_expr(t) for t in fam_cfg.get("exprs", [])]
    if not exprs:
        raise ConfigError("family needs 'exprs' or 'library'")
    box = _box(fam_cfg["box"])
    fam = normality.FamilySample(tuple(exprs), box)
    check = config["check"]
    op = check["op"]
    res = int(check.get("resolution", 33))
    grid = GridSpec(box, res)
    if op == "marty":
        rep = normality.marty_bound(fam, box, grid, m_big=float(check.get("m_big", 1e4)))
        status = "decided"
    elif op == "levelset":
        rep = normality.criterion_levelset(
            fam, float(check.get("a", 0.0)), box, float(check.get("m_k", 1.0)),
            grid, check.get("delta"),
        )
        status = "decided"
    elif op == "gradient_dominated":
        table = check.get("l_table", [[0.0, float("inf")]])
        l = normality.DominationTable([r[0] for r in table], [r[1] for r in table])
        rep = normality.criterion_gradient_dominated(fam, l, box, grid)
        status = "decided"
    else:  # brody
        if len(fam.members) != 1:
            raise ConfigError("the expanding-box scan applies to a single expression")
        sides = check.get("box_sides", [20.0, 60.0, 120.0])
        boxes = [Box.cube(-s / 2.0, s / 2.0, 2) for s in sides]
        rep = normality.brody_verdict(fam.members[0], float(check.get("m", 1.0)), boxes, res)
        status = "decided"
    return {"status": status, "op": op, "report": rep.to_json()}, {}


def _run_tube_classify(config: dict, seed: int):
    d = _resolve_domain(config["domain"])
    check = config.get("check", {})
    kwargs = {}
    for key in ("probe_count", "escape_radius", "escape_delta", "direction_grid", "far_radius"):
        if key in check:
            kwargs[key] = check[key]
    if "t_grid" in check:
        kwargs["t_grid"] = tuple(float(t) for t in check["t_grid"])
    if "witness_points" in check:
        kwargs["witness_points"] = tuple(tuple(p) for p in check["witness_points"])
    cfg = tubes.TubeConfig(seed=seed, **kwargs)
    rep = tubes.classify_tube(d, cfg)
    undecided = rep.brody in UNDECIDED_VALUES and rep.kobayashi in UNDECIDED_VALUES
    doc = rep.to_json()
    return {
        "status": "undecided" if undecided else "decided",
        "hull": doc["hull"],
        "brody": doc["brody"],
        "kobayashi": doc["kobayashi"],
        "evidence": doc["evidence"],
    }, {}


def _map_from_config(section: dict) -> HarmonicMap:
    if "holo_pair" in section:
        f_text, g_text = section["holo_pair"]
        f = library.holomorphic(f_text) if f_text in library.HOLOMORPHIC else parse_holo(f_text)
        g = library.holomorphic(g_text) if g_text in library.HOLOMORPHIC else parse_holo(g_text)
        return HarmonicMap.from_holomorphic_pair(f, g)
    if "components" in section:
        comps = tuple(parse_expr(t) for t in section["components"])
        return HarmonicMap(comps)
    raise ConfigError("map needs 'holo_pair' or 'components'")


def _run_map_analysis(config: dict, seed: int):
    H = _map_from_config(config["map"])
    check = config["check"]
    op = check["op"]
    box = _box(check.get("box", [[-1.0, 1.0], [-1.0, 1.0]]))
    grid = GridSpec(box, int(check.get("resolution", 15)))
    status = "decided"
    if op == "jacobian_scan":
        pts = grid.points()
        vals = [maps.jacobian(H, complex(x, y)) for x, y in pts]
        rep = {
            "min": min(vals),
            "max": max(vals),
            "argmin": list(pts[int(np.argmin(vals))]),
            "argmax": list(pts[int(np.argmax(vals))]),
        }
    elif op == "rank":
        rep = maps.rank_degenerate_probe(H, grid, tol=float(check.get("tol", 1e-9))).to_json()
    elif op == "holomorphy":
        rep = maps.holomorphy_witness(H, grid, tol=float(check.get("tol", 1e-9))).to_json()
    else:  # image_probe
        d = None
        if "domain_library" in check:
            d = library.domain(check["domain_library"])
        elif "domain" in check:
            d = parse_domain(check["domain"])
        samples = check.get("samples")
        pts = np.asarray(samples, dtype=float) if samples else grid.points()
        rep = maps.image_probe(H, pts, d=d, functional=check.get("functional")).to_json()
    return {"status": status, "op": op, "report": rep}, {}


def _torus_family(fam_cfg: dict):
    name = fam_cfg["name"]
    if name == "quadratic_pair":
        def build(k):
            f = CPoly([0, 0, float(k * k)])
            return HarmonicMap.from_holomorphic_pair(f, CProd((CConst(-1j), f)))

        return build
    # dilated_expr: f_k(x) = f(k x) as a one-component map
    base_cfg = {}
    if "library" in fam_cfg:
        base_cfg["library"] = fam_cfg["library"]
    if "expr" in fam_cfg:
        base_cfg["expr"] = fam_cfg["expr"]
    f = _resolve_expr(base_cfg)

    def build(k):
        chart = AffineChart(float(k), (0.0,) * f.dim)
        return HarmonicMap((f.precompose(chart),))

    return build


def _run_torus(config: dict, seed: int):
    fam_cfg = config["family"]
    build = _torus_family(fam_cfg)
    indices = list(fam_cfg["indices"])
    p = np.asarray(fam_cfg["seed_point"], dtype=float)
    engine_cfg = _engine_config(config.get("engine", {}))
    op = fam_cfg.get("op", "torus")
    if op == "torus":
        rep = groups.torus_renormalize(
            lambda k: TorusMap(build(k)), p, indices, config=engine_cfg
        )
        undecided = rep.classification in UNDECIDED_VALUES
    else:
        rep = groups.constant_adjusted_renormalize(build, p, indices, config=engine_cfg)
        undecided = all(c in UNDECIDED_VALUES for c in rep.component_classes)
    return {
        "status": "undecided" if undecided else "decided",
        "op": op,
        "report": rep.to_json(),
    }, {}


def _complex(pair):
    return complex(float(pair[0]), float(pair[1]))


def _lie_family(fam_cfg: dict):
    name = fam_cfg["name"]
    if name == "g_exp_nilpotent":
        g = fam_cfg.get("g")
        gm = np.eye(2, dtype=complex) if g is None else np.array(
            [[_complex(v) for v in row] for row in g]
        )

        def build(k):
            one, zero = CPoly([1.0]), CPoly([0.0])
            kz = CPoly([0.0, float(k)])
            base = ((one, kz), (zero, one))  # exp(k z N)
            entries = []
            for i in range(2):
                row = []
                for j in range(2):
                    terms = tuple(CProd((CConst(gm[i, l]), base[l][j])) for l in range(2))
                    from .expr import CSum

                    row.append(CSum(terms))
                entries.append(row)
            return MatrixHoloMap(entries)

        return build
    if name == "exp_shift_square":
        return lambda k: MatrixHoloMap(((CExp(CPoly([float(k * k), 2.0 * float(k), 1.0])),),))
    # g_exp_eigen
    for key in ("g", "eigvals", "p_matrix"):
        if key not in fam_cfg:
            raise ConfigError(f"family g_exp_eigen needs '{key}'")
    g = np.array([[_complex(v) for v in row] for row in fam_cfg["g"]])
    lam = [_complex(v) for v in fam_cfg["eigvals"]]
    P = np.array([[_complex(v) for v in row] for row in fam_cfg["p_matrix"]])
    return groups.exp_family(g, lam, P)


def _run_lie(config: dict, seed: int):
    fam_cfg = config["family"]
    build = _lie_family(fam_cfg)
    indices = list(fam_cfg["indices"])
    p = _complex(fam_cfg["seed_point"])
    engine_cfg = _engine_config(config.get("engine", {}))
    rep = groups.lie_renormalize(build, p, indices, config=engine_cfg)
    return {"status": "decided", "report": rep.to_json()}, {}


_RUNNERS = {
    "renormalize": _run_renormalize,
    "normality": _run_normality,
    "tube_classify": _run_tube_classify,
    "map_analysis": _run_map_analysis,
    "torus": _run_torus,
    "lie": _run_lie,
}


def run_scenario(kind: str, config_path: str, seed: int | None, out_dir: str, verbose: bool = False):
    """Load, validate, run, and write; returns the report document."""
    config = _load_config(config_path)
    if config.get("kind") != kind:
        raise ConfigError(f"config kind {config.get('kind')!r} does not match subcommand {kind!r}")
    schemas.validate_config(kind, config)
    actual_seed = int(seed if seed is not None else config.get("seed", 0))
    t0 = time.perf_counter()
    result, extras = _RUNNERS[kind](config, actual_seed)
    wall = time.perf_counter() - t0
    doc = report_doc(kind, config, result, actual_seed, wall)
    schemas.validate_report(doc)
    os.makedirs(out_dir, exist_ok=True)
    report_name = config.get("output", {}).get("report", "report.json")
    write_report(os.path.join(out_dir, report_name), doc)
    for name, (header, rows) in extras.items():
        write_csv(os.path.join(out_dir, name), header, rows)
    if verbose:
        click.echo(f"[renormlab] wrote {report_name} (status: {result['status']})", err=True)
    return doc


def _dispatch(kind, config, seed, out, verbose):
    try:
        doc = run_scenario(kind, config, seed, out, verbose)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    except (PreconditionError, PositivityError) as e:
        click.echo(f"precondition violation: {e}", err=True)
        sys.exit(EXIT_PRECONDITION)
    except (
        EvaluationOverflowError,
        SingularMatrixError,
        SelectionIncompleteError,
        FloatingPointError,
    ) as e:
        click.echo(f"numeric failure: {e}", err=True)
        sys.exit(EXIT_NUMERIC)
    except RenormlabError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_NUMERIC)
    click.echo(doc["result"]["status"])


def _scenario_command(kind):
    @click.command(name=kind.replace("_", "-"))
    @click.option("--config", "config_path", required=True, type=click.Path(), help="TOML scenario config")
    @click.option("--seed", type=int, default=None, help="override the config seed")
    @click.option("--out", "out_dir", type=click.Path(), default=".", help="output directory")
    @click.option("--verbose", is_flag=True, default=False)
    def cmd(config_path, seed, out_dir, verbose):
        _dispatch(kind, config_path, seed, out_dir, verbose)

    cmd.help = f"Run a '{kind}' scenario from a config file."
    return cmd


@click.group()
def main():
    """Batch analysis of rescaling limits and tube-base hyperbolicity."""


for _kind in _RUNNERS:
    main.add_command(_scenario_command(_kind))


@main.command("list-library")
def list_library():
    """Print the built-in catalog of expressions, domains, and families."""
    from .reporting import stable_dumps

    click.echo(stable_dumps(library.catalog()))
