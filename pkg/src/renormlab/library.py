"""Built-in catalog of expressions, domains, and sequence families.

Every entry round-trips through the text grammars, so configs can refer to
entries by name or paste the printed text directly.
"""

from __future__ import annotations

import math

from .domains import parse_domain
from .expr import parse_expr, parse_holo

def _rot_text(theta):
    c, s = math.cos(theta), math.sin(theta)
    return f"{c!r} {-s!r} {s!r} {c!r}"


_SPIKE = "(inter (below (recip 1.0)) (above (recip -1.0)))"
_SQUARE = "(inter (vstrip -0.5 0.5) (above (const -0.5)) (below (const 0.5)))"
_W_BRANCH = "(inter (above (const 0.0)) (below (recip 1.0)))"

DOMAINS = {
    "halfplane_upper": "(halfplane 0.0 1.0 0.0)",
    "strip01": "(inter (above (const 0.0)) (below (const 1.0)))",
    "exp_cusp": "(inter (above (const 0.0)) (below (expabs 1.0 0.0)))",
    "parabola_epigraph": "(above (quad 1.0 0.0))",
    "three_spike": (
        "(union "
        + _SQUARE
        + " "
        + f"(affine {_rot_text(math.pi / 2)} 0.0 0.0 {_SPIKE})"
        + " "
        + f"(affine {_rot_text(7 * math.pi / 6)} 0.0 0.0 {_SPIKE})"
        + " "
        + f"(affine {_rot_text(-math.pi / 6)} 0.0 0.0 {_SPIKE})"
        + ")"
    ),
    "w_standin": (
        "(union " + _W_BRANCH + f" (affine -1.0 0.0 0.0 -1.0 0.0 0.0 {_W_BRANCH}))"
    ),
}

EXPRESSIONS = {
    "re_z2": "(re (zpoly (0.0 0.0) (0.0 0.0) (1.0 0.0)))",
    "re_z3": "(re (zpoly (0.0 0.0) (0.0 0.0) (0.0 0.0) (1.0 0.0)))",
    "im_z2": "(im (zpoly (0.0 0.0) (0.0 0.0) (1.0 0.0)))",
    "re_exp_z": "(re (zexp z))",
    "re_exp_minus_z": "(re (zexp (zmul (zc -1.0 0.0) z)))",
    "re_z2_plus_exp_z": "(re (zsum (zpoly (0.0 0.0) (0.0 0.0) (1.0 0.0)) (zexp z)))",
    "affine_x1": "(coord 0 2)",
    "saddle_poly": "(hpoly 2 (1.0 (2 0)) (-1.0 (0 2)) (0.5 (1 0)))",
}

HOLOMORPHIC = {
    "z": "z",
    "z2": "(zpoly (0.0 0.0) (0.0 0.0) (1.0 0.0))",
    "z3": "(zpoly (0.0 0.0) (0.0 0.0) (0.0 0.0) (1.0 0.0))",
    "exp_z": "(zexp z)",
    "exp_minus_z": "(zexp (zmul (zc -1.0 0.0) z))",
    "iz": "(zmul (zc 0.0 1.0) z)",
}

# sequence families used by the torus / matrix-group scenarios; each value
# documents the construction used by renormlab.groups.build_family
FAMILIES = {
    "dilated_expr": "f_k(x) = f(k * x) for a catalog expression f",
    "quadratic_pair": "G_k = (Re (k z)^2, Im (k z)^2)",
    "exp_shift_square": "F_k(z) = exp((z + k)^2), scalar matrices (n = 1)",
    "g_exp_nilpotent": "F_k(z) = g exp(k z N) with N = [[0,1],[0,0]]",
}


def domain(name: str):
    return parse_domain(DOMAINS[name])


def expression(name: str):
    return parse_expr(EXPRESSIONS[name])


def holomorphic(name: str):
    return parse_holo(HOLOMORPHIC[name])


def catalog():
    """Stable listing used by the CLI's list-library command."""
    return {
        "domains": dict(sorted(DOMAINS.items())),
        "expressions": dict(sorted(EXPRESSIONS.items())),
        "holomorphic": dict(sorted(HOLOMORPHIC.items())),
        "families": dict(sorted(FAMILIES.items())),
    }
