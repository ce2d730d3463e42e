"""Hyperbolicity classification for tube bases in the plane.

For a base contained in a half-plane, the two verdicts reduce to geometric
questions about the base: no affine line inside (entire-map hyperbolicity)
and every point "bounded": no heights b_k -> a_2 admitting ever-longer
horizontal segments [-k, k] x {b_k} inside the base (derivative-bound
hyperbolicity).  When the convex hull is the whole plane, the escape
dichotomy applies: a non-hyperbolic base must either have an affine line in
its closure or emit escape sequences (x_k -> +/-inf with the other
coordinate converging) for every target height; a base with neither property
is certified hyperbolic by contraposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .domains import (
    INF,
    AffineImage,
    Above,
    Below,
    ConstantCurve,
    DomainExpr,
    ExpAbsCurve,
    HalfPlane,
    Intersection,
    LineMap,
    LinearCurve,
    QuadraticCurve,
    ReciprocalCurve,
    SliceSet,
    Union,
    VerticalStrip,
    bounded_direction_candidates,
    contains_point,
    horizontal_slice,
    seg_fits,
    slice_enclosure,
    support,
    vertical_slice,
)

__all__ = [
    "TubeConfig",
    "TubeReport",
    "hull_classify",
    "normalize_halfplane",
    "contains_affine_line",
    "bounded_point",
    "corollary_escape_check",
    "classify_tube",
]

HYPERBOLIC = "Hyperbolic"
NOT_HYPERBOLIC = "NotHyperbolic"
CERTIFIED_BY_COROLLARY = "CertifiedByCorollary"
UNDECIDED = "Undecided"

IN_HALFPLANE = "InHalfPlane"
FULL_PLANE = "FullPlane"

BOUNDED = "Bounded"
UNBOUNDED = "Unbounded"

YES, NO = "Yes", "No"


@dataclass(frozen=True)
class TubeConfig:
    direction_grid: int = 64
    far_radius: float = 1e4
    fullplane_margin: float = 1.0
    # bounded-point schedule: k_j = 2^j up to 2^10, windows delta_j = 2^-j
    schedule_ks: tuple = tuple(float(2**j) for j in range(11))
    schedule_deltas: tuple = tuple(2.0 ** (-j) for j in range(11))
    samples_per_window: int = 64
    witness_points: tuple | None = None
    probe_count: int = 6
    seed: int = 0
    t_grid: tuple = tuple(float(t) for t in np.linspace(-3.0, 3.0, 13))
    escape_radius: float = 50.0
    escape_delta: float = 0.25
    line_offsets: tuple = tuple(float(c) for c in np.linspace(-3.0, 3.0, 25))
    near_delta: float = 0.05
    line_samples: int = 33


# ---------------------------------------------------------------------------
# hull classification and normalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HullResult:
    kind: str
    direction: tuple | None = None
    offset: float | None = None
    witness_points: tuple = ()

    def to_json(self):
        out = {"kind": self.kind}
        if self.direction is not None:
            out["direction"] = list(self.direction)
            out["offset"] = self.offset
        if self.witness_points:
            out["witness_points"] = [list(p) for p in self.witness_points]
        return out


def sample_domain_points(d: DomainExpr, far: float):
    """Concrete members of d reaching as far out as its slices allow.

    Representative points are taken from exact slice intervals at log-spaced
    heights/abscissae, so thin unbounded reaches (spikes, hyperbola wedges)
    are captured even though lattice sampling would miss them.
    """
    levels = [0.0]
    for e in np.geomspace(1e-2, far, 12):
        levels.extend((float(e), float(-e)))
    pts = []

    def reps(iv, anchor):
        l, r = iv
        out = []
        if math.isfinite(l) and math.isfinite(r):
            w = r - l
            out = [l + 0.5 * w, l + 0.01 * w, r - 0.01 * w]
        elif math.isfinite(l):
            out = [l + 1.0, min(l + 2 * far, far)]
        elif math.isfinite(r):
            out = [r - 1.0, max(r - 2 * far, -far)]
        else:
            out = [0.0, far, -far]
        return out

    for b in levels:
        for iv in horizontal_slice(d, b).intervals:
            pts.extend((x, b) for x in reps(iv, b))
    for a in levels:
        for iv in vertical_slice(d, a).intervals:
            pts.extend((a, y) for y in reps(iv, a))
    return [p for p in pts if np.all(np.isfinite(p)) and contains_point(d, p)]


def hull_classify(d: DomainExpr, config: TubeConfig | None = None) -> HullResult:
    """Bounded support direction => inside a half-plane; positively spanning
    far samples => convex hull is the whole plane; otherwise undecided."""
    config = config or TubeConfig()
    for u in bounded_direction_candidates(d, config.direction_grid):
        s = support(d, u)
        if math.isfinite(s):
            nu = math.hypot(*u)
            return HullResult(IN_HALFPLANE, direction=(u[0] / nu, u[1] / nu), offset=s / nu)
    pts = sample_domain_points(d, config.far_radius)
    if len(pts) >= 3:
        from scipy.spatial import ConvexHull, QhullError

        arr = np.asarray(pts, dtype=float)
        try:
            hull = ConvexHull(arr)
        except QhullError:
            return HullResult(UNDECIDED)
        center = arr[hull.vertices].mean(axis=0)
        # distance from the center to every hull facet (A x + b <= 0 inside)
        margin = float(-(hull.equations[:, :2] @ center + hull.equations[:, 2]).max())
        if margin >= config.fullplane_margin:
            witness = tuple(tuple(map(float, arr[v])) for v in hull.vertices[:12])
            return HullResult(FULL_PLANE, witness_points=witness)
    return HullResult(UNDECIDED)


def _compose_affine(outer_m, outer_v, inner_m, inner_v):
    M = np.asarray(outer_m) @ np.asarray(inner_m)
    v = np.asarray(outer_m) @ np.asarray(inner_v) + np.asarray(outer_v)
    return M, v


def _snap(M: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    out = M.copy()
    for target in (-1.0, 0.0, 1.0):
        out[np.abs(out - target) <= tol] = target
    return out


def simplify_affine(d: DomainExpr) -> DomainExpr:
    """Compose directly nested affine images; snap near-exact entries.

    Rotation round trips then collapse to the identity, keeping downstream
    slice certification on the exact path.  Snapping moves matrix entries by
    at most 1e-12, far below every decision margin used here.
    """
    if isinstance(d, (Union, Intersection)):
        parts = tuple(simplify_affine(p) for p in d.parts)
        return Union(parts) if isinstance(d, Union) else Intersection(parts)
    if isinstance(d, AffineImage):
        child = simplify_affine(d.child)
        M = _snap(np.asarray(d.matrix))
        v = _snap(np.asarray(d.shift))
        if isinstance(child, AffineImage):
            M, v = _compose_affine(M, v, child.matrix, child.shift)
            M, v = _snap(M), _snap(v)
            child = child.child
        if np.array_equal(M, np.eye(2)) and np.all(v == 0.0):
            return child
        return AffineImage(((M[0, 0], M[0, 1]), (M[1, 0], M[1, 1])), (v[0], v[1]), child)
    return d


def normalize_halfplane(d: DomainExpr, hull: HullResult | None = None, config: TubeConfig | None = None):
    """Rotate the bounded direction to (0, -1) and shift so the base sits in
    {y > 0}; returns (normalized domain, transform record)."""
    config = config or TubeConfig()
    hull = hull or hull_classify(d, config)
    if hull.kind != IN_HALFPLANE:
        raise PreconditionError("domain is not contained in a half-plane")
    u = np.asarray(hull.direction)
    theta = math.atan2(-1.0, 0.0) - math.atan2(u[1], u[0])
    R = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    R = _snap(R)
    shift = (0.0, float(hull.offset))
    norm = simplify_affine(AffineImage(((R[0, 0], R[0, 1]), (R[1, 0], R[1, 1])), shift, d))
    return norm, {"rotation": R.tolist(), "shift": list(shift), "direction": list(map(float, u))}


# ---------------------------------------------------------------------------
# affine lines inside a domain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OffsetInterval:
    lo: float
    hi: float
    lo_open: bool = True
    hi_open: bool = True

    def intersect(self, other):
        lo, lo_open = max((self.lo, self.lo_open), (other.lo, other.lo_open))
        hi, hi_open = min((self.hi, self.hi_open), (other.hi, other.hi_open))
        if lo > hi or (lo == hi and (lo_open or hi_open)):
            return None
        return OffsetInterval(lo, hi, lo_open, hi_open)

    def pick(self):
        if math.isfinite(self.lo) and math.isfinite(self.hi):
            return 0.5 * (self.lo + self.hi)
        if math.isfinite(self.lo):
            return self.lo + 1.0
        if math.isfinite(self.hi):
            return self.hi - 1.0
        return 0.0


ALL_OFFSETS = OffsetInterval(-INF, INF)


def _perp(d):
    return (-d[1], d[0])


def _pinned_direction(factor):
    """The unique line direction a primitive admits, 'noline', or None (free)."""
    if isinstance(factor, HalfPlane):
        return _unit_dir((-factor.b, factor.a))
    if isinstance(factor, VerticalStrip):
        return (0.0, 1.0)
    if isinstance(factor, (Below, Above)):
        cv = factor.curve
        if isinstance(cv, ConstantCurve) or isinstance(cv, ExpAbsCurve):
            return (1.0, 0.0)
        if isinstance(cv, LinearCurve):
            return _unit_dir((1.0, cv.a))
        if isinstance(cv, ReciprocalCurve):
            return "noline"
        if isinstance(cv, QuadraticCurve):
            below = isinstance(factor, Below)
            if (below and cv.a > 0) or (not below and cv.a < 0):
                return None  # any non-vertical direction, offset-constrained
            if cv.a == 0:
                return (1.0, 0.0)
            return "noline"
    return "opaque"


def _unit_dir(v):
    n = math.hypot(*v)
    d = (v[0] / n, v[1] / n)
    # canonical sign: upper half circle, positive x on the equator
    if d[1] < 0 or (d[1] == 0 and d[0] < 0):
        d = (-d[0], -d[1])
    return d


def _offsets_for(factor, d, n_hat):
    """Allowed offsets c for lines {c*n_hat + t*d} inside the factor (or None)."""
    tol = 1e-12
    if isinstance(factor, HalfPlane):
        if abs(factor.a * d[0] + factor.b * d[1]) > tol * math.hypot(factor.a, factor.b):
            return None
        kappa = factor.a * n_hat[0] + factor.b * n_hat[1]
        if kappa > 0:
            return OffsetInterval(-factor.c / kappa, INF)
        return OffsetInterval(-INF, -factor.c / kappa)
    if isinstance(factor, VerticalStrip):
        if abs(d[0]) > tol:
            return None
        k = n_hat[0]  # x along the line is c*k
        lo, hi = sorted((factor.x0 / k, factor.x1 / k))
        return OffsetInterval(lo, hi)
    if isinstance(factor, (Below, Above)):
        below = isinstance(factor, Below)
        cv = factor.curve
        if isinstance(cv, ReciprocalCurve):
            return None
        if isinstance(cv, ConstantCurve):
            if abs(d[1]) > tol:
                return None
            k = n_hat[1]  # y along the line is c*k
            bound = cv.c / k
            if (k > 0) == below:
                return OffsetInterval(-INF, bound)
            return OffsetInterval(bound, INF)
        if isinstance(cv, LinearCurve):
            if abs(d[1] - cv.a * d[0]) > tol * (1.0 + abs(cv.a)):
                return None
            kappa = n_hat[1] - cv.a * n_hat[0]  # y - a*x along the line is c*kappa
            bound = cv.b / kappa
            if (kappa > 0) == below:
                return OffsetInterval(-INF, bound)
            return OffsetInterval(bound, INF)
        if isinstance(cv, ExpAbsCurve):
            if abs(d[1]) > tol:
                return None
            k = n_hat[1]
            if below:
                if cv.s > 0:
                    iv = OffsetInterval(-INF, cv.t, hi_open=False)  # y <= t works
                elif cv.s == 0:
                    iv = OffsetInterval(-INF, cv.t)
                else:
                    iv = OffsetInterval(-INF, cv.s + cv.t)
            else:
                if cv.s > 0:
                    iv = OffsetInterval(cv.s + cv.t, INF)
                elif cv.s == 0:
                    iv = OffsetInterval(cv.t, INF)
                else:
                    iv = OffsetInterval(cv.t, INF, lo_open=False)  # y >= t works
            return _rescale_offsets(iv, k)
        if isinstance(cv, QuadraticCurve):
            if cv.a == 0:
                return _offsets_for(
                    Below(ConstantCurve(cv.b)) if below else Above(ConstantCurve(cv.b)), d, n_hat
                )
            if abs(d[0]) <= tol:
                return None  # vertical lines never fit a parabola region
            alpha = d[1] / d[0]
            kappa = n_hat[1] - alpha * n_hat[0]  # y-intercept beta = c*kappa
            if below and cv.a > 0:
                return _rescale_offsets(OffsetInterval(-INF, cv.b - alpha**2 / (4 * cv.a)), kappa)
            if not below and cv.a < 0:
                return _rescale_offsets(OffsetInterval(cv.b - alpha**2 / (4 * cv.a), INF), kappa)
            return None
    return None


def _rescale_offsets(iv: OffsetInterval, k: float) -> OffsetInterval:
    """Offsets for beta = c*k given the allowed beta-interval."""
    if k > 0:
        return OffsetInterval(iv.lo / k, iv.hi / k, iv.lo_open, iv.hi_open)
    return OffsetInterval(iv.hi / k, iv.lo / k, iv.hi_open, iv.lo_open)


@dataclass(frozen=True)
class LineSearchResult:
    verdict: str  # Yes / No / Undecided
    line: LineMap | None = None
    reason: str = ""

    def to_json(self):
        return {
            "verdict": self.verdict,
            "line": None if self.line is None else self.line.to_json(),
            "reason": self.reason,
        }


def _flatten_intersection(d):
    if isinstance(d, Intersection):
        out = []
        for p in d.parts:
            sub = _flatten_intersection(p)
            if sub is None:
                return None
            out.extend(sub)
        return out
    if isinstance(d, (HalfPlane, VerticalStrip, Below, Above)):
        return [d]
    return None


def _verify_line(d: DomainExpr, line: LineMap) -> bool:
    s = d.slice_along(line)
    return s.exact and s.is_all()


def contains_affine_line(d: DomainExpr, config: TubeConfig | None = None) -> LineSearchResult:
    """Decide whether some affine line lies inside the domain.

    Exact on intersections of primitives (each factor pins the admissible
    direction and an offset interval); unions get per-branch recursion plus
    joint coverage along candidate lines (verified exactly through slices);
    two independent bounded support directions certify No in general.
    """
    config = config or TubeConfig()
    if isinstance(d, AffineImage):
        inner = contains_affine_line(d.child, config)
        if inner.verdict == YES:
            M = np.asarray(d.matrix)
            u = M @ np.asarray(inner.line.u)
            w = M @ np.asarray(inner.line.w) + np.asarray(d.shift)
            return LineSearchResult(YES, LineMap(tuple(u), tuple(w)), "affine image of a line in the child")
        return inner

    factors = _flatten_intersection(d)
    if factors is not None:
        pins = [_pinned_direction(f) for f in factors]
        if any(p == "noline" for p in pins):
            return LineSearchResult(NO, reason="a factor admits no line at all")
        pinned = [p for p in pins if isinstance(p, tuple)]
        if pinned:
            d0 = pinned[0]
            for p in pinned[1:]:
                if abs(p[0] * d0[1] - p[1] * d0[0]) > 1e-12:
                    return LineSearchResult(NO, reason="factors pin incompatible directions")
            candidates = [d0]
            exhaustive = True
        else:
            candidates = [(1.0, 0.0), (0.0, 1.0), _unit_dir((1.0, 1.0)), _unit_dir((1.0, -1.0))]
            exhaustive = False
        for dd in candidates:
            n_hat = _perp(dd)
            iv = ALL_OFFSETS
            for f in factors:
                got = _offsets_for(f, dd, n_hat)
                if got is None:
                    iv = None
                    break
                iv = iv.intersect(got)
                if iv is None:
                    break
            if iv is not None:
                c = iv.pick()
                line = LineMap(dd, (c * n_hat[0], c * n_hat[1]))
                if _verify_line(d, line):
                    return LineSearchResult(YES, line, "factor offset intervals intersect")
        if exhaustive:
            return LineSearchResult(NO, reason="pinned direction admits no common offset")
        return LineSearchResult(UNDECIDED, reason="free directions not exhausted")

    if isinstance(d, Union):
        for p in d.parts:
            sub = contains_affine_line(p, config)
            if sub.verdict == YES:
                return sub
        # joint coverage along axis-parallel candidates
        for c in config.line_offsets:
            for line in (LineMap((1.0, 0.0), (0.0, c)), LineMap((0.0, 1.0), (c, 0.0))):
                if _verify_line(d, line):
                    return LineSearchResult(YES, line, "branches jointly cover the line")

    finite_dirs = []
    for u in bounded_direction_candidates(d, config.direction_grid):
        if math.isfinite(support(d, u)):
            finite_dirs.append(u)
            if len(finite_dirs) >= 2:
                for a in finite_dirs[:-1]:
                    if abs(a[0] * u[1] - a[1] * u[0]) > 1e-9:
                        return LineSearchResult(
                            NO, reason="bounded in two independent directions"
                        )
    return LineSearchResult(UNDECIDED, reason="no certificate found")


# ---------------------------------------------------------------------------
# bounded points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundedPointResult:
    verdict: str  # Bounded / Unbounded / Undecided
    point: tuple
    witnesses: tuple = ()           # (k, b) pairs for the Unbounded case
    certificate: dict | None = None

    def to_json(self):
        return {
            "verdict": self.verdict,
            "point": list(self.point),
            "witnesses": [[k, b] for k, b in self.witnesses],
            "certificate": self.certificate,
        }


def bounded_point(d: DomainExpr, a, config: TubeConfig | None = None) -> BoundedPointResult:
    """Semi-decide whether the point admits arbitrarily long horizontal
    segments at nearby heights.

    The domain must already sit in {y > 0} (run normalize_halfplane first).
    Unbounded: a witness height was found for every scheduled k.  Bounded:
    for some k the whole height window provably fails, by interval enclosure
    of the slice endpoints.  Otherwise Undecided.
    """
    config = config or TubeConfig()
    s = support(d, (0.0, -1.0))
    if not (math.isfinite(s) and s <= 1e-9):
        raise PreconditionError("domain is not normalized into {y > 0}")
    a = (float(a[0]), float(a[1]))
    if not contains_point(d, a):
        raise PreconditionError(f"point {a} is not in the domain")

    witnesses = []
    unresolved = False
    for k, delta in zip(config.schedule_ks, config.schedule_deltas):
        lo, hi = a[1] - delta, a[1] + delta
        heights = [a[1]] + [float(b) for b in np.linspace(lo, hi, config.samples_per_window)]
        found = None
        for b in heights:
            if b > 0 and seg_fits(d, k, b):
                found = b
                break
        if found is not None:
            witnesses.append((float(k), float(found)))
            continue
        # certifying any single window suffices: heights converging to the
        # point eventually enter it, and larger segments only fail harder
        enclosure = slice_enclosure(d, max(lo, 1e-300), hi)
        if enclosure is not None and not any(p.may_contain(-k, k) for p in enclosure):
            return BoundedPointResult(
                BOUNDED,
                a,
                witnesses=tuple(witnesses),
                certificate={"k": float(k), "window": [lo, hi], "pieces": len(enclosure)},
            )
        unresolved = True  # keep going: smaller windows may still certify
    if not unresolved and len(witnesses) == len(config.schedule_ks):
        return BoundedPointResult(UNBOUNDED, a, witnesses=tuple(witnesses))
    return BoundedPointResult(UNDECIDED, a, witnesses=tuple(witnesses))


# ---------------------------------------------------------------------------
# escape dichotomy for full-plane hulls
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EscapeResult:
    kind: str  # Property1 / Property2 / Neither
    line: LineMap | None = None
    variant: str | None = None
    escape_table: tuple = ()
    details: dict | None = None

    def to_json(self):
        return {
            "kind": self.kind,
            "line": None if self.line is None else self.line.to_json(),
            "variant": self.variant,
            "escape_table": [list(row) for row in self.escape_table],
            "details": self.details,
        }


def _near_domain(d, p, delta):
    band = SliceSet.of([(p[0] - delta, p[0] + delta)])
    for b in np.linspace(p[1] - delta, p[1] + delta, 5):
        if horizontal_slice(d, float(b)).intersect(band):
            return True
    return False


def _adherent_line(d: DomainExpr, config: TubeConfig):
    """A candidate line all of whose ball samples are within near_delta of d."""
    R = config.escape_radius
    candidates = []
    for c in config.line_offsets:
        candidates.append(LineMap((0.0, 1.0), (c, 0.0)))  # vertical x = c
        candidates.append(LineMap((1.0, 0.0), (0.0, c)))  # horizontal y = c
    for line in candidates:
        ts = np.linspace(-R, R, config.line_samples)
        if all(_near_domain(d, line.at(float(t)), config.near_delta) for t in ts):
            return line
    return None


_VARIANTS = (
    ("x->+inf,y->t", "h", +1),
    ("x->-inf,y->t", "h", -1),
    ("y->+inf,x->t", "v", +1),
    ("y->-inf,x->t", "v", -1),
)


def _escape_variant(d: DomainExpr, axis: str, sign: int, config: TubeConfig):
    """Does every grid target t admit domain points running to sign*inf?"""
    R = config.escape_radius
    table = []
    for t in config.t_grid:
        hit = None
        for b in np.linspace(t - config.escape_delta, t + config.escape_delta, 9):
            s = horizontal_slice(d, float(b)) if axis == "h" else vertical_slice(d, float(b))
            reach = s.sup() if sign > 0 else -s.inf()
            if reach > R:
                hit = float(b)
                break
        if hit is None:
            return None, float(t)
        table.append((float(t), hit))
    return tuple(table), None


def corollary_escape_check(
    d: DomainExpr, config: TubeConfig | None = None, hull: HullResult | None = None
) -> EscapeResult:
    """Test the two escape properties of a full-plane-hull base.

    Property1: some affine line is adherent to the base (sampled along the
    line within the escape ball).  Property2: for every grid target t, base
    points escape to infinity along one axis while the other coordinate
    converges to t; the four sign/axis variants are each tested and named.
    Neither: both fail, with the failing margins reported.  Bases whose hull
    is not the full plane are out of the dichotomy's scope: NotApplicable.
    """
    config = config or TubeConfig()
    hull = hull or hull_classify(d, config)
    if hull.kind != FULL_PLANE:
        return EscapeResult("NotApplicable", details={"hull": hull.kind})
    line = _adherent_line(d, config)
    if line is not None:
        return EscapeResult("Property1", line=line)
    failures = {}
    for name, axis, sign in _VARIANTS:
        table, failed_at = _escape_variant(d, axis, sign, config)
        if table is not None:
            return EscapeResult("Property2", variant=name, escape_table=table)
        failures[name] = failed_at
    return EscapeResult("Neither", details={"first_failing_t": failures})


# ---------------------------------------------------------------------------
# full classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TubeReport:
    hull: HullResult
    brody: str
    kobayashi: str
    evidence: tuple

    def to_json(self):
        return {
            "hull": self.hull.to_json(),
            "brody": self.brody,
            "kobayashi": self.kobayashi,
            "evidence": list(self.evidence),
        }


def bounded_realization_flag(d: DomainExpr, hull: HullResult, config: TubeConfig | None = None):
    """Consequence flag: does the convex hull of the base avoid affine lines?

    (Equivalently, the tube over the base is biholomorphic to a bounded
    domain.)  Yes is certified by two independent bounded support directions
    (the recession cone then contains no line); No by a full-plane hull or by
    escapes to x -> +inf and x -> -inf at bounded heights in normalized
    coordinates (the hull's closure then contains a horizontal line).
    """
    config = config or TubeConfig()
    if hull.kind == FULL_PLANE:
        return NO, {"reason": "hull is the whole plane"}
    if hull.kind != IN_HALFPLANE:
        return UNDECIDED, {"reason": "hull undecided"}
    finite_dirs = []
    for u in bounded_direction_candidates(d, config.direction_grid):
        if math.isfinite(support(d, u)):
            for v in finite_dirs:
                if abs(v[0] * u[1] - v[1] * u[0]) > 1e-9:
                    return YES, {
                        "reason": "bounded in two independent directions",
                        "directions": [list(v), list(u)],
                    }
            finite_dirs.append(u)
    norm, _ = normalize_halfplane(d, hull, config)
    height_cap = config.escape_radius
    escapes = {+1: None, -1: None}
    for sign in (+1, -1):
        for X in (2.0, 8.0, 32.0, config.escape_radius):
            s = vertical_slice(norm, sign * X)
            if s and s.inf() <= height_cap:
                escapes[sign] = (sign * X, s.inf())
            else:
                escapes[sign] = None
                break
    if escapes[+1] and escapes[-1]:
        return NO, {
            "reason": "escapes both ways at bounded heights (closure of the hull holds a line)",
            "witnesses": [list(escapes[+1]), list(escapes[-1])],
        }
    return UNDECIDED, {"reason": "no certificate found"}


def _auto_witness_points(d: DomainExpr, config: TubeConfig):
    """Interior points from slice midpoints at deterministic + seeded heights."""
    rng = np.random.default_rng(config.seed)
    heights = [0.25, 0.5, 1.0, 2.0]
    heights += [float(h) for h in rng.uniform(0.05, 4.0, size=config.probe_count)]
    pts = []
    for b in heights:
        s = horizontal_slice(d, b)
        for l, r in s.intervals[:2]:
            if math.isfinite(l) and math.isfinite(r):
                pts.append(((l + r) / 2.0, b))
            elif math.isfinite(l):
                pts.append((l + 1.0, b))
            elif math.isfinite(r):
                pts.append((r - 1.0, b))
            else:
                pts.append((0.0, b))
    return [p for p in pts if contains_point(d, p)]


def classify_tube(d: DomainExpr, config: TubeConfig | None = None) -> TubeReport:
    """Full pipeline: hull, line search, and per-point boundedness probing.

    Half-plane case: an affine line inside the base decides entire-map
    hyperbolicity negatively (its absence positively); derivative-bound
    hyperbolicity holds when every probed point is certified Bounded and
    fails on any Unbounded witness.  Full-plane case: the escape dichotomy
    certifies hyperbolicity when both escape properties fail; when one of
    them holds the verdict stays Undecided (the dichotomy is only
    necessary for non-hyperbolicity, not sufficient).
    """
    config = config or TubeConfig()
    hull = hull_classify(d, config)
    evidence = []
    flag, flag_info = bounded_realization_flag(d, hull, config)
    evidence.append({"field": "hull", "kind": "bounded_realization", "verdict": flag, **flag_info})

    if hull.kind == IN_HALFPLANE:
        evidence.append(
            {"field": "hull", "kind": "bounded_direction",
             "direction": list(hull.direction), "offset": hull.offset}
        )
        norm, transform = normalize_halfplane(d, hull, config)
        evidence.append({"field": "hull", "kind": "normalization", **transform})

        line_res = contains_affine_line(d, config)
        if line_res.verdict == YES:
            brody = NOT_HYPERBOLIC
            evidence.append({"field": "brody", "kind": "affine_line", "line_search": line_res.to_json()})
        elif line_res.verdict == NO:
            brody = HYPERBOLIC
            evidence.append({"field": "brody", "kind": "no_affine_line", "reason": line_res.reason})
        else:
            brody = UNDECIDED

        witness_pts = list(config.witness_points or ())
        witness_pts += _auto_witness_points(norm, config)
        results = []
        kobayashi = UNDECIDED
        for p in witness_pts:
            res = bounded_point(norm, p, config)
            results.append(res)
            if res.verdict == UNBOUNDED:
                kobayashi = NOT_HYPERBOLIC
                evidence.append({"field": "kobayashi", "kind": "unbounded_point", "probe": res.to_json()})
                break
        else:
            if results and all(r.verdict == BOUNDED for r in results):
                kobayashi = HYPERBOLIC
                evidence.append(
                    {"field": "kobayashi", "kind": "bounded_points",
                     "points": [list(r.point) for r in results],
                     "certificates": [r.certificate for r in results]}
                )
        return TubeReport(hull=hull, brody=brody, kobayashi=kobayashi, evidence=tuple(evidence))

    if hull.kind == FULL_PLANE:
        evidence.append(
            {"field": "hull", "kind": "positively_spanning_samples",
             "points": [list(p) for p in hull.witness_points]}
        )
        line_res = contains_affine_line(d, config)
        if line_res.verdict == YES:
            brody = NOT_HYPERBOLIC
            evidence.append({"field": "brody", "kind": "affine_line", "line_search": line_res.to_json()})
        else:
            # without the half-plane hypothesis, the absence of a line does
            # not decide entire-map hyperbolicity
            brody = UNDECIDED
        escape = corollary_escape_check(d, config, hull=hull)
        if escape.kind == "Neither":
            kobayashi = CERTIFIED_BY_COROLLARY
            evidence.append({"field": "kobayashi", "kind": "escape_dichotomy", "escape": escape.to_json()})
        else:
            kobayashi = UNDECIDED
            evidence.append({"field": "kobayashi", "kind": "escape_property", "escape": escape.to_json()})
        return TubeReport(hull=hull, brody=brody, kobayashi=kobayashi, evidence=tuple(evidence))

    return TubeReport(hull=hull, brody=UNDECIDED, kobayashi=UNDECIDED, evidence=tuple(evidence))
