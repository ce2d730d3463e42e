"""Published JSON schemas: strict config validation and report shapes.

Configs reject unknown keys outright; reports pin the envelope and the
per-scenario result skeleton (free-form only inside evidence payloads).
"""

from __future__ import annotations

import jsonschema

from .errors import ConfigError


def _obj(props, required=(), extra=False):
    return {
        "type": "object",
        "properties": props,
        "required": list(required),
        "additionalProperties": extra,
    }


_NUM = {"type": "number"}
_INT = {"type": "integer"}
_STR = {"type": "string"}
_BOOL = {"type": "boolean"}
_PT = {"type": "array", "items": _NUM, "minItems": 1}
_PT2 = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_BOX = {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}}
_NUMLIST = {"type": "array", "items": _NUM}
_INTLIST = {"type": "array", "items": _INT}
_CPLX = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_CMAT = {"type": "array", "items": {"type": "array", "items": _CPLX}}

_ENGINE = _obj(
    {
        "steps": _INT,
        "index_stride": _INT,
        "target_phi": _NUM,
        "ball_radius": _NUM,
        "base_resolution": _INT,
        "levels": _INT,
        "max_ascent": _INT,
        "blowup_threshold": _NUM,
        "probe_resolution": _INT,
        "res_max": _NUM,
        "grad_min": _NUM,
        "div_threshold": _NUM,
        "guard_abs": _NUM,
    }
)

_OUTPUT = _obj({"report": _STR, "residuals_csv": _STR, "grid_csv": _STR})

CONFIG_SCHEMAS = {
    "renormalize": _obj(
        {
            "kind": {"const": "renormalize"},
            "seed": _INT,
            "object": _obj(
                {"expr": _STR, "library": _STR, "seed_point": _PT},
                required=("seed_point",),
            ),
            "engine": _ENGINE,
            "output": _OUTPUT,
        },
        required=("kind", "object"),
    ),
    "normality": _obj(
        {
            "kind": {"const": "normality"},
            "seed": _INT,
            "family": _obj(
                {
                    "exprs": {"type": "array", "items": _STR},
                    "library": {"type": "array", "items": _STR},
                    "box": _BOX,
                },
                required=("box",),
            ),
            "check": _obj(
                {
                    "op": {"enum": ["marty", "levelset", "gradient_dominated", "brody"]},
                    "resolution": _INT,
                    "m_big": _NUM,
                    "a": _NUM,
                    "m_k": _NUM,
                    "delta": _NUM,
                    "l_table": {"type": "array", "items": {"type": "array", "items": _NUM}},
                    "m": _NUM,
                    "box_sides": _NUMLIST,
                },
                required=("op",),
            ),
            "output": _OUTPUT,
        },
        required=("kind", "family", "check"),
    ),
    "tube_classify": _obj(
        {
            "kind": {"const": "tube_classify"},
            "seed": _INT,
            "domain": _obj({"tree": _STR, "library": _STR}),
            "check": _obj(
                {
                    "witness_points": {"type": "array", "items": _PT2},
                    "probe_count": _INT,
                    "t_grid": _NUMLIST,
                    "escape_radius": _NUM,
                    "escape_delta": _NUM,
                    "direction_grid": _INT,
                    "far_radius": _NUM,
                }
            ),
            "output": _OUTPUT,
        },
        required=("kind", "domain"),
    ),
    "map_analysis": _obj(
        {
            "kind": {"const": "map_analysis"},
            "seed": _INT,
            "map": _obj(
                {
                    "holo_pair": {"type": "array", "items": _STR, "minItems": 2, "maxItems": 2},
                    "components": {"type": "array", "items": _STR},
                }
            ),
            "check": _obj(
                {
                    "op": {"enum": ["jacobian_scan", "rank", "holomorphy", "image_probe"]},
                    "box": _BOX,
                    "resolution": _INT,
                    "domain": _STR,
                    "domain_library": _STR,
                    "functional": _STR,
                    "samples": {"type": "array", "items": _PT2},
                    "tol": _NUM,
                },
                required=("op",),
            ),
            "output": _OUTPUT,
        },
        required=("kind", "map", "check"),
    ),
    "torus": _obj(
        {
            "kind": {"const": "torus"},
            "seed": _INT,
            "family": _obj(
                {
                    "name": {"enum": ["quadratic_pair", "dilated_expr"]},
                    "expr": _STR,
                    "library": _STR,
                    "indices": _INTLIST,
                    "seed_point": _PT,
                    "op": {"enum": ["torus", "constant_adjusted"]},
                },
                required=("name", "indices", "seed_point"),
            ),
            "engine": _ENGINE,
            "output": _OUTPUT,
        },
        required=("kind", "family"),
    ),
    "lie": _obj(
        {
            "kind": {"const": "lie"},
            "seed": _INT,
            "family": _obj(
                {
                    "name": {"enum": ["g_exp_nilpotent", "exp_shift_square", "g_exp_eigen"]},
                    "indices": _INTLIST,
                    "seed_point": _PT2,
                    "g": _CMAT,
                    "eigvals": {"type": "array", "items": _CPLX},
                    "p_matrix": _CMAT,
                },
                required=("name", "indices", "seed_point"),
            ),
            "engine": _ENGINE,
            "output": _OUTPUT,
        },
        required=("kind", "family"),
    ),
}

_PROVENANCE = _obj(
    {"tool": _STR, "version": _STR, "seed": _INT, "wall_time_s": _NUM},
    required=("tool", "version", "seed", "wall_time_s"),
)

_FREE_OBJ = {"type": "object"}


def _report_schema(kind, result_schema):
    return _obj(
        {
            "schema": {"const": f"renormlab.report/{kind}/1"},
            "scenario": _obj(
                {"kind": {"const": kind}, "config": _FREE_OBJ}, required=("kind", "config")
            ),
            "provenance": _PROVENANCE,
            "result": result_schema,
        },
        required=("schema", "scenario", "provenance", "result"),
    )


_TRACE = _obj(
    {
        "base_point": _NUMLIST,
        "steps": {
            "type": "array",
            "items": _obj(
                {
                    "n": _INT,
                    "a": _NUM,
                    "b": _NUMLIST,
                    "eps": _NUM,
                    "gtilde0": _NUM,
                    "sup_bound": _NUM,
                    "delta_grid": _NUM,
                    "selection": _FREE_OBJ,
                    "A": _NUM,
                    "B": _NUMLIST,
                },
                required=("n", "a", "b", "eps", "gtilde0", "sup_bound"),
            ),
        },
    },
    required=("base_point", "steps"),
)

_AFFINE = {
    "anyOf": [
        {"type": "null"},
        _obj({"c": _NUM, "v": _NUMLIST}, required=("c", "v")),
    ]
}

_CONV_REPORT = _obj(
    {
        "class": _STR,
        "affine": _AFFINE,
        "residuals": _NUMLIST,
        "gaps": _NUMLIST,
        "grid_max_abs": _NUMLIST,
        "window": _INTLIST,
    },
    required=("class", "affine", "residuals", "gaps"),
)

RESULT_SCHEMAS = {
    "renormalize": _obj(
        {"status": _STR, "trace": _TRACE, "report": _CONV_REPORT},
        required=("status", "trace", "report"),
    ),
    "normality": _obj(
        {"status": _STR, "op": _STR, "report": _FREE_OBJ}, required=("status", "op", "report")
    ),
    "tube_classify": _obj(
        {
            "status": _STR,
            "hull": _FREE_OBJ,
            "brody": _STR,
            "kobayashi": _STR,
            "evidence": {"type": "array", "items": _FREE_OBJ},
        },
        required=("status", "hull", "brody", "kobayashi", "evidence"),
    ),
    "map_analysis": _obj(
        {"status": _STR, "op": _STR, "report": _FREE_OBJ}, required=("status", "op", "report")
    ),
    "torus": _obj(
        {"status": _STR, "op": _STR, "report": _FREE_OBJ}, required=("status", "op", "report")
    ),
    "lie": _obj(
        {"status": _STR, "report": _FREE_OBJ}, required=("status", "report")
    ),
}

REPORT_SCHEMAS = {k: _report_schema(k, v) for k, v in RESULT_SCHEMAS.items()}


def validate_config(kind: str, config: dict):
    if kind not in CONFIG_SCHEMAS:
        raise ConfigError(f"unknown scenario kind {kind!r}")
    try:
        jsonschema.validate(config, CONFIG_SCHEMAS[kind])
    except jsonschema.ValidationError as e:
        path = "/".join(str(p) for p in e.absolute_path)
        raise ConfigError(f"config invalid at {path or '<root>'}: {e.message}") from e


def validate_report(doc: dict):
    kind = doc.get("scenario", {}).get("kind")
    if kind not in REPORT_SCHEMAS:
        raise ConfigError(f"report has unknown scenario kind {kind!r}")
    jsonschema.validate(doc, REPORT_SCHEMAS[kind])
