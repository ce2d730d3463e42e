"""Normality probes for finite families of harmonic functions.

The damped-derivative bound (sup of |grad f|/cosh f over a compact) is the
finite-sample criterion exposed here: a family with the bound is equicontinuous
into the compactified line, a family without it contains a rescalable blow-up
sequence.  The level-set and gradient-domination checks are the two general
sufficient criteria; the scan over expanding boxes is the one-sided probe for
"bounded damped derivative everywhere implies affine".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .field import Box, GridSpec, AffineFunc, affine_fit, tilde_grid, gradient_grid
from .expr import HarmonicExpr
from .util import parallel_map

__all__ = [
    "FamilySample",
    "NormalityReport",
    "LevelSetReport",
    "DominationReport",
    "BrodyReport",
    "marty_bound",
    "criterion_levelset",
    "criterion_gradient_dominated",
    "brody_verdict",
]

BOUNDED = "BoundedDerivative"
UNBOUNDED = "UnboundedDerivative"


@dataclass(frozen=True)
class FamilySample:
    """A finite list of harmonic expressions sharing a domain box."""

    members: tuple
    domain: Box

    def __post_init__(self):
        if not self.members:
            raise ValueError("empty family")
        dims = {f.dim for f in self.members}
        if len(dims) != 1 or dims.pop() != self.domain.dim:
            raise ValueError("family members and domain box must share one dimension")

    @property
    def dim(self):
        return self.domain.dim


@dataclass(frozen=True)
class NormalityReport:
    sup: float
    verdict: str
    witness_index: int | None
    witness_point: tuple | None
    per_member_sup: tuple

    def to_json(self):
        return {
            "sup": self.sup,
            "verdict": self.verdict,
            "witness": None
            if self.witness_index is None
            else {"index": self.witness_index, "point": list(self.witness_point)},
        }


def _check_compact(fam: FamilySample, K: Box):
    if K.dim != fam.dim:
        raise PreconditionError("compact box dimension mismatch")
    for lo, hi, dlo, dhi in zip(K.los, K.his, fam.domain.los, fam.domain.his):
        if lo < dlo - 1e-12 or hi > dhi + 1e-12:
            raise PreconditionError("compact box must sit inside the family domain")


def marty_bound(fam: FamilySample, K: Box, grid: GridSpec | None = None, m_big: float = 1e4) -> NormalityReport:
    """Sup of the damped derivative over the family and the sampled compact.

    Verdict is UnboundedDerivative (with a witness) once the sup exceeds
    ``m_big``; the witness is the maximizing (member, point) pair.
    """
    _check_compact(fam, K)
    grid = grid or GridSpec(K, 33)
    pts = grid.points()
    sups = parallel_map(lambda f: tilde_grid(f, pts), list(fam.members))
    per_member = [float(v.max()) for v in sups]
    i_best = int(np.argmax(per_member))
    j_best = int(np.argmax(sups[i_best]))
    sup = per_member[i_best]
    unbounded = sup > m_big
    return NormalityReport(
        sup=sup,
        verdict=UNBOUNDED if unbounded else BOUNDED,
        witness_index=i_best if unbounded else None,
        witness_point=tuple(pts[j_best]) if unbounded else None,
        per_member_sup=tuple(per_member),
    )


@dataclass(frozen=True)
class LevelSetReport:
    passed: bool
    vacuous: bool
    level: float
    bound: float
    n_level_points: int
    violations: tuple  # (member index, point, |grad|)

    def to_json(self):
        return {
            "passed": self.passed,
            "vacuous": self.vacuous,
            "level": self.level,
            "bound": self.bound,
            "n_level_points": self.n_level_points,
            "violations": [
                {"index": i, "point": list(p), "grad_norm": g} for i, p, g in self.violations
            ],
        }


def criterion_levelset(
    fam: FamilySample,
    a: float,
    K: Box,
    M_K: float,
    grid: GridSpec | None = None,
    delta: float | None = None,
) -> LevelSetReport:
    """Check |grad f| <= M_K on the numeric level set {x in K: |f(x) - a| <= delta}.

    Exact level sets are measure-zero, so a band of half-width ``delta``
    stands in (default: 1e-3 of the sampled range of f on K).  An empty band
    across the whole family passes vacuously and is flagged.
    """
    _check_compact(fam, K)
    if delta is not None and delta <= 0:
        raise PreconditionError("delta must be positive")
    grid = grid or GridSpec(K, 33)
    pts = grid.points()
    violations = []
    n_level = 0
    for i, f in enumerate(fam.members):
        vals = f.eval_grid(pts)
        d = delta
        if d is None:
            rng = float(vals.max() - vals.min())
            d = 1e-3 * (rng if rng > 0 else 1.0)
        mask = np.abs(vals - a) <= d
        n_level += int(mask.sum())
        if not np.any(mask):
            continue
        gn = np.linalg.norm(gradient_grid(f, pts[mask]), axis=-1)
        for j in np.flatnonzero(gn > M_K):
            violations.append((i, tuple(pts[mask][j]), float(gn[j])))
    return LevelSetReport(
        passed=not violations,
        vacuous=n_level == 0,
        level=a,
        bound=M_K,
        n_level_points=n_level,
        violations=tuple(violations),
    )


@dataclass(frozen=True)
class DominationReport:
    passed: bool
    violations: tuple  # (member index, point, |grad|, allowed)

    def to_json(self):
        return {
            "passed": self.passed,
            "violations": [
                {"index": i, "point": list(p), "grad_norm": g, "allowed": al}
                for i, p, g, al in self.violations
            ],
        }


class DominationTable:
    """Tabulated l: R -> [0, inf], interpolated piecewise-linearly.

    Infinity is a first-class value: the strict interior of a segment with an
    infinite endpoint evaluates to infinity, exact node hits return the node
    value, and arguments outside the table clamp to the end nodes.  The
    normality conclusion needs l finite somewhere; ``finite_somewhere``
    records whether that hypothesis holds (an all-infinite table still makes
    the domination check well defined; it passes trivially).
    """

    def __init__(self, knots, values):
        self.knots = np.asarray(knots, dtype=float)
        self.values = np.asarray(values, dtype=float)  # may contain +inf
        if self.knots.ndim != 1 or self.knots.size == 0 or self.knots.size != self.values.size:
            raise ValueError("knots and values must be matching nonempty 1-d arrays")
        if np.any(np.diff(self.knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if np.any(self.values < 0):
            raise ValueError("the domination function is [0, inf]-valued")
        self.finite_somewhere = bool(np.any(np.isfinite(self.values)))

    @classmethod
    def constant(cls, value):
        return cls([0.0], [value])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.knots.size == 1:
            return np.full(t.shape, self.values[0])
        idx = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, self.knots.size - 2)
        x0, x1 = self.knots[idx], self.knots[idx + 1]
        y0, y1 = self.values[idx], self.values[idx + 1]
        with np.errstate(invalid="ignore"):
            w = np.clip((t - x0) / (x1 - x0), 0.0, 1.0)
            out = y0 * (1 - w) + y1 * w
        out = np.where(np.isinf(y0) | np.isinf(y1), np.inf, out)
        out = np.where(t == x0, y0, out)  # exact node hits keep the node value
        out = np.where(t == x1, y1, out)
        out = np.where(t <= self.knots[0], self.values[0], out)
        out = np.where(t >= self.knots[-1], self.values[-1], out)
        return out


def criterion_gradient_dominated(
    fam: FamilySample, l: DominationTable, K: Box, grid: GridSpec | None = None
) -> DominationReport:
    """Check |grad f(x)| <= l(f(x)) on the sampled compact; inf always passes."""
    _check_compact(fam, K)
    grid = grid or GridSpec(K, 33)
    pts = grid.points()
    violations = []
    for i, f in enumerate(fam.members):
        vals = f.eval_grid(pts)
        gn = np.linalg.norm(gradient_grid(f, pts), axis=-1)
        allowed = l(vals)
        bad = gn > allowed  # inf allowance is never exceeded
        for j in np.flatnonzero(bad):
            violations.append((i, tuple(pts[j]), float(gn[j]), float(allowed[j])))
    return DominationReport(passed=not violations, violations=tuple(violations))


CONSISTENT = "ConsistentWithBrody"
REFUTED = "Refuted"


@dataclass(frozen=True)
class BrodyReport:
    verdict: str
    bound: float
    witness_point: tuple | None
    witness_value: float | None
    affine: AffineFunc | None
    residual: float | None
    boxes_checked: int
    note: str

    def to_json(self):
        return {
            "verdict": self.verdict,
            "bound": self.bound,
            "witness": None
            if self.witness_point is None
            else {"point": list(self.witness_point), "value": self.witness_value},
            "affine": None
            if self.affine is None
            else {"c": self.affine.constant, "v": list(self.affine.gradient)},
            "residual": self.residual,
            "boxes_checked": self.boxes_checked,
            "note": self.note,
        }


def brody_verdict(f: HarmonicExpr, M: float, boxes, grid_resolution: int = 101) -> BrodyReport:
    """Scan the damped derivative over nested probe boxes against the bound M.

    One-sided by nature: a sampled excess refutes the bound with a witness,
    while staying under it on every probe only reports consistency (an
    unbounded domain cannot be exhausted); in the consistent case the affine
    fit of f on the largest box is attached: a bounded damped derivative
    forces the fit residual toward zero.
    """
    boxes = list(boxes)
    if not boxes:
        raise PreconditionError("need at least one probe box")
    sides = [max(h - l for l, h in zip(b.los, b.his)) for b in boxes]
    if any(b < a - 1e-12 for a, b in zip(sides, sides[1:])) or sides[-1] < 100:
        raise PreconditionError("probe boxes must be nested increasing with largest side >= 100")
    for small, big in zip(boxes, boxes[1:]):
        if any(ls < lb or hs > hb for ls, hs, lb, hb in zip(small.los, small.his, big.los, big.his)):
            raise PreconditionError("probe boxes must be nested")

    for k, box in enumerate(boxes):
        pts = GridSpec(box, grid_resolution).points()
        tt = tilde_grid(f, pts)
        j = int(np.argmax(tt))
        if tt[j] > M:
            return BrodyReport(
                verdict=REFUTED,
                bound=M,
                witness_point=tuple(pts[j]),
                witness_value=float(tt[j]),
                affine=None,
                residual=None,
                boxes_checked=k + 1,
                note="sampled damped derivative exceeds the bound",
            )
    fit, res = affine_fit(f, GridSpec(boxes[-1], grid_resolution))
    return BrodyReport(
        verdict=CONSISTENT,
        bound=M,
        witness_point=None,
        witness_value=None,
        affine=fit,
        residual=res,
        boxes_checked=len(boxes),
        note="consistency on sampled probes only; the test cannot prove boundedness",
    )
