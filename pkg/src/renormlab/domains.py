"""Planar open-set algebra with exact line-slice queries.

Primitives are half-planes, vertical strips, and the regions below/above a
curve from a fixed library (constant, linear, s*exp(-|x|)+t, c/x on x>0,
a*x^2+b); combinators are union, intersection, and invertible affine images.

The workhorse is ``line_slice``: the parameter set {t : u*t + w in D} as a
finite union of open intervals.  Every primitive condition along a line is
linear or quadratic in t (hence exact), except an oblique line against the
exponential curve, which falls back to certified bisection per monotone piece
and flags the result approximate.  Horizontal and vertical slices are always
exact for trees without rotating affine images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import PreconditionError

__all__ = [
    "SliceSet",
    "LineMap",
    "DomainExpr",
    "HalfPlane",
    "VerticalStrip",
    "Below",
    "Above",
    "Union",
    "Intersection",
    "AffineImage",
    "ConstantCurve",
    "LinearCurve",
    "ExpAbsCurve",
    "ReciprocalCurve",
    "QuadraticCurve",
    "contains_point",
    "horizontal_slice",
    "vertical_slice",
    "seg_fits",
    "support",
    "bounded_direction_candidates",
    "parse_domain",
]

INF = math.inf


# ---------------------------------------------------------------------------
# interval sets
# ---------------------------------------------------------------------------


def _normalize_intervals(intervals):
    """Sort and merge open intervals; touching endpoints stay separate."""
    ivs = sorted((l, r) for l, r in intervals if l < r)
    out = []
    for l, r in ivs:
        if out and l < out[-1][1]:  # strict overlap only: (0,1) u (1,2) keeps the gap at 1
            out[-1] = (out[-1][0], max(out[-1][1], r))
        else:
            out.append((l, r))
    return tuple(out)


@dataclass(frozen=True)
class SliceSet:
    """Finite union of disjoint open intervals; endpoints may be +/-inf."""

    intervals: tuple
    exact: bool = True

    @classmethod
    def empty(cls, exact=True):
        return cls((), exact)

    @classmethod
    def all(cls, exact=True):
        return cls(((-INF, INF),), exact)

    @classmethod
    def of(cls, intervals, exact=True):
        return cls(_normalize_intervals(intervals), exact)

    def __bool__(self):
        return bool(self.intervals)

    def contains(self, x: float) -> bool:
        return any(l < x < r for l, r in self.intervals)

    def contains_closed(self, lo: float, hi: float) -> bool:
        """Is the closed interval [lo, hi] inside one open component?"""
        return any(l < lo and hi < r for l, r in self.intervals)

    def is_all(self) -> bool:
        return self.intervals == ((-INF, INF),)

    def union(self, other: "SliceSet") -> "SliceSet":
        return SliceSet.of(self.intervals + other.intervals, self.exact and other.exact)

    def intersect(self, other: "SliceSet") -> "SliceSet":
        out = []
        for a_l, a_r in self.intervals:
            for b_l, b_r in other.intervals:
                l, r = max(a_l, b_l), min(a_r, b_r)
                if l < r:
                    out.append((l, r))
        return SliceSet.of(out, self.exact and other.exact)

    def sup(self) -> float:
        return self.intervals[-1][1] if self.intervals else -INF

    def inf(self) -> float:
        return self.intervals[0][0] if self.intervals else INF


@dataclass(frozen=True)
class LineMap:
    """The line t -> u*t + w in the plane (u nonzero)."""

    u: tuple
    w: tuple

    def __post_init__(self):
        object.__setattr__(self, "u", (float(self.u[0]), float(self.u[1])))
        object.__setattr__(self, "w", (float(self.w[0]), float(self.w[1])))
        if self.u == (0.0, 0.0):
            raise ValueError("line direction must be nonzero")

    def at(self, t: float):
        return (self.u[0] * t + self.w[0], self.u[1] * t + self.w[1])

    def to_json(self):
        return {"direction": list(self.u), "point": list(self.w)}


def _solve_linear_neg(alpha: float, beta: float) -> SliceSet:
    """{t : alpha*t + beta < 0}."""
    if alpha > 0:
        return SliceSet.of([(-INF, -beta / alpha)])
    if alpha < 0:
        return SliceSet.of([(-beta / alpha, INF)])
    return SliceSet.all() if beta < 0 else SliceSet.empty()


def _solve_quadratic_pos(A: float, B: float, C: float) -> SliceSet:
    """{t : A*t^2 + B*t + C > 0}."""
    if A == 0.0:
        return _solve_linear_neg(-B, -C)
    disc = B * B - 4.0 * A * C
    if A > 0:
        if disc <= 0:
            if disc == 0:
                r = -B / (2 * A)
                return SliceSet.of([(-INF, r), (r, INF)])
            return SliceSet.all()
        s = math.sqrt(disc)
        r1, r2 = (-B - s) / (2 * A), (-B + s) / (2 * A)
        return SliceSet.of([(-INF, min(r1, r2)), (max(r1, r2), INF)])
    if disc <= 0:
        return SliceSet.empty()
    s = math.sqrt(disc)
    r1, r2 = (-B - s) / (2 * A), (-B + s) / (2 * A)
    return SliceSet.of([(min(r1, r2), max(r1, r2))])


# ---------------------------------------------------------------------------
# curve library
# ---------------------------------------------------------------------------


class Curve:
    """y = h(x) graphs available to Below/Above regions."""

    def value(self, x: float) -> float:
        raise NotImplementedError

    def below_on_line(self, line: LineMap) -> SliceSet:
        """{t : y(t) < h(x(t))}."""
        raise NotImplementedError

    def to_text(self) -> str:
        raise NotImplementedError

    # closed-form slice endpoints are monotone in the height between these
    def height_breakpoints(self):
        return ()


@dataclass(frozen=True)
class ConstantCurve(Curve):
    c: float

    def value(self, x):
        return self.c

    def below_on_line(self, line):
        u0, u1 = line.u
        w0, w1 = line.w
        return _solve_linear_neg(u1, w1 - self.c)

    def height_breakpoints(self):
        return (self.c,)

    def to_text(self):
        return f"(const {_fmt(self.c)})"


@dataclass(frozen=True)
class LinearCurve(Curve):
    a: float
    b: float

    def value(self, x):
        return self.a * x + self.b

    def below_on_line(self, line):
        u0, u1 = line.u
        w0, w1 = line.w
        return _solve_linear_neg(u1 - self.a * u0, w1 - self.a * w0 - self.b)

    def to_text(self):
        return f"(linear {_fmt(self.a)} {_fmt(self.b)})"


@dataclass(frozen=True)
class QuadraticCurve(Curve):
    a: float
    b: float

    def value(self, x):
        return self.a * x * x + self.b

    def below_on_line(self, line):
        u0, u1 = line.u
        w0, w1 = line.w
        A = self.a * u0 * u0
        B = 2.0 * self.a * u0 * w0 - u1
        C = self.a * w0 * w0 + self.b - w1
        return _solve_quadratic_pos(A, B, C)

    def height_breakpoints(self):
        return (self.b,)

    def to_text(self):
        return f"(quad {_fmt(self.a)} {_fmt(self.b)})"


@dataclass(frozen=True)
class ReciprocalCurve(Curve):
    """y = c/x on x > 0; the region constraint includes x > 0."""

    c: float

    def value(self, x):
        if x <= 0:
            raise ValueError("reciprocal curve lives on x > 0")
        return self.c / x

    def below_on_line(self, line):
        u0, u1 = line.u
        w0, w1 = line.w
        pos_x = _solve_linear_neg(-u0, -w0)  # x(t) > 0
        # for x > 0:  y < c/x  <=>  x*y - c < 0
        A = u0 * u1
        B = u0 * w1 + u1 * w0
        C = w0 * w1 - self.c
        prod_lt = _solve_quadratic_pos(-A, -B, -C)
        return pos_x.intersect(prod_lt)

    def height_breakpoints(self):
        return (0.0,)

    def to_text(self):
        return f"(recip {_fmt(self.c)})"


@dataclass(frozen=True)
class ExpAbsCurve(Curve):
    """y = s*exp(-|x|) + t."""

    s: float
    t: float

    def value(self, x):
        return self.s * math.exp(-abs(x)) + self.t

    def _below_x_set(self, gamma: float) -> SliceSet:
        """{x : s*exp(-|x|) + t > gamma}, closed form."""
        s = self.s
        g = gamma - self.t
        if s > 0:
            ratio = g / s
            if ratio <= 0:
                return SliceSet.all()
            if ratio >= 1:
                return SliceSet.empty()
            L = -math.log(ratio)
            return SliceSet.of([(-L, L)])
        if s == 0:
            return SliceSet.all() if g < 0 else SliceSet.empty()
        ratio = g / s  # s < 0: flip to exp(-|x|) < ratio
        if ratio > 1:
            return SliceSet.all()
        if ratio == 1:
            return SliceSet.of([(-INF, 0.0), (0.0, INF)])
        if ratio <= 0:
            return SliceSet.empty()
        L = -math.log(ratio)
        return SliceSet.of([(-INF, -L), (L, INF)])

    def below_on_line(self, line):
        u0, u1 = line.u
        w0, w1 = line.w
        if u0 == 0.0:  # vertical line: the curve value is a constant
            return _solve_linear_neg(u1, w1 - self.value(w0))
        if u1 == 0.0:  # horizontal line: solve in x, map back through x(t)
            xs = self._below_x_set(w1)
            out = []
            for l, r in xs.intervals:
                t1 = (l - w0) / u0 if math.isfinite(l) else (-INF if u0 > 0 else INF)
                t2 = (r - w0) / u0 if math.isfinite(r) else (INF if u0 > 0 else -INF)
                out.append((min(t1, t2), max(t1, t2)))
            return SliceSet.of(out)
        return self._below_oblique(line)

    def _below_oblique(self, line: LineMap) -> SliceSet:
        """Certified bisection on phi(t) = y(t) - h(x(t)); flagged approximate.

        phi is linear minus a one-signed exponential on each side of the kink
        x(t) = 0, so phi' is monotone per side and phi has at most two roots
        per side.
        """
        u0, u1 = line.u
        w0, w1 = line.w
        t_kink = -w0 / u0

        def phi(t):
            x = u0 * t + w0
            return u1 * t + w1 - self.s * math.exp(-abs(x)) - self.t

        # beyond |x| = x_far the exponential is below resolution: phi ~ linear
        scale = max(abs(self.s), 1.0)
        x_far = math.log(scale / 1e-15)
        T = (x_far + abs(w0)) / abs(u0) + abs(t_kink) + 1.0

        roots = []
        n_samp = 512
        for lo, hi in ((t_kink - T, t_kink), (t_kink, t_kink + T)):
            ts = np.linspace(lo, hi, n_samp)
            vs = np.array([phi(t) for t in ts])
            for i in range(n_samp - 1):
                a, b = vs[i], vs[i + 1]
                if a == 0.0:
                    roots.append(float(ts[i]))
                elif a * b < 0:
                    roots.append(float(brentq(phi, ts[i], ts[i + 1], xtol=1e-13)))
        # linear tails: phi(t) ~ u1*t + w1 - t0 outside the window
        if u1 != 0.0:
            t_tail = -(w1 - self.t) / u1
            if abs(t_tail) > T - 1.0 and min(abs(t_tail - r) for r in roots + [INF]) > 1e-9:
                roots.append(t_tail)
        roots = sorted(set(roots))
        # sign pattern between roots determines the set {phi < 0}
        cuts = [-INF] + roots + [INF]
        out = []
        for i in range(len(cuts) - 1):
            lo, hi = cuts[i], cuts[i + 1]
            if math.isfinite(lo) and math.isfinite(hi):
                mid = 0.5 * (lo + hi)
            elif math.isfinite(lo):
                mid = lo + max(1.0, abs(lo))
            elif math.isfinite(hi):
                mid = hi - max(1.0, abs(hi))
            else:
                mid = 0.0
            if phi(mid) < 0:
                out.append((lo, hi))
        return SliceSet(_normalize_intervals(out), exact=False)

    def height_breakpoints(self):
        # slice structure changes where (b - t)/s crosses 0 or 1
        if self.s == 0:
            return (self.t,)
        return tuple(sorted((self.t, self.t + self.s)))

    def to_text(self):
        return f"(expabs {_fmt(self.s)} {_fmt(self.t)})"


# ---------------------------------------------------------------------------
# domain expressions
# ---------------------------------------------------------------------------


class DomainExpr:
    """Open subset of R^2 with exact membership and line-slice queries."""

    def contains(self, p) -> bool:
        raise NotImplementedError

    def slice_along(self, line: LineMap) -> SliceSet:
        raise NotImplementedError

    def support(self, u) -> float:
        """sup over the region of <u, p>; +inf when unbounded (upper bound
        for intersections, exact for primitives, unions, affine images)."""
        raise NotImplementedError

    def direction_candidates(self):
        """Structurally derived unit directions possibly of finite support."""
        raise NotImplementedError

    def to_text(self) -> str:
        raise NotImplementedError

    def __or__(self, other):
        return Union((self, other))

    def __and__(self, other):
        return Intersection((self, other))


def _unit(v):
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    return tuple(v / n) if n > 0 else (0.0, 0.0)


def _snap_tiny(v, rel: float = 1e-13):
    """Zero out vector components that are pure rotation round-trip dust."""
    v = np.asarray(v, dtype=float)
    scale = float(np.linalg.norm(v))
    return np.where(np.abs(v) <= rel * scale, 0.0, v)


@dataclass(frozen=True)
class HalfPlane(DomainExpr):
    """{a*x + b*y + c > 0}."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.a == 0 and self.b == 0:
            raise ValueError("half-plane normal must be nonzero")

    def contains(self, p):
        return self.a * p[0] + self.b * p[1] + self.c > 0

    def slice_along(self, line):
        u0, u1 = line.u
        w0, w1 = line.w
        alpha = self.a * u0 + self.b * u1
        beta = self.a * w0 + self.b * w1 + self.c
        return _solve_linear_neg(-alpha, -beta)

    def support(self, u):
        n = np.array([self.a, self.b])
        u = np.asarray(u, dtype=float)
        cross = n[0] * u[1] - n[1] * u[0]
        dot = float(n @ u)
        if abs(cross) <= 1e-12 * (np.linalg.norm(n) * np.linalg.norm(u)) and dot < 0:
            return float(np.linalg.norm(u) / np.linalg.norm(n)) * self.c
        return INF

    def direction_candidates(self):
        return [_unit((-self.a, -self.b))]

    def to_text(self):
        return f"(halfplane {_fmt(self.a)} {_fmt(self.b)} {_fmt(self.c)})"


@dataclass(frozen=True)
class VerticalStrip(DomainExpr):
    """{x0 < x < x1}."""

    x0: float
    x1: float

    def __post_init__(self):
        if not self.x0 < self.x1:
            raise ValueError("strip needs x0 < x1")

    def contains(self, p):
        return self.x0 < p[0] < self.x1

    def slice_along(self, line):
        u0, u1 = line.u
        w0, w1 = line.w
        left = _solve_linear_neg(-u0, self.x0 - w0)   # x(t) > x0
        right = _solve_linear_neg(u0, w0 - self.x1)   # x(t) < x1
        return left.intersect(right)

    def support(self, u):
        if u[1] != 0.0:
            return INF
        return u[0] * self.x1 if u[0] > 0 else u[0] * self.x0

    def direction_candidates(self):
        return [(1.0, 0.0), (-1.0, 0.0)]

    def to_text(self):
        return f"(vstrip {_fmt(self.x0)} {_fmt(self.x1)})"


def _ray_support(alpha: float, beta: float) -> float:
    """sup over x > 0 of alpha*x + beta/x (used by reciprocal regions)."""
    if alpha > 0 or (alpha == 0 and beta > 0):
        return INF
    if beta > 0:
        return INF
    if alpha == 0 or beta == 0:
        return 0.0
    return -2.0 * math.sqrt(alpha * beta)


@dataclass(frozen=True)
class Below(DomainExpr):
    """{(x, y) : y < h(x)} (intersected with x > 0 for the reciprocal curve)."""

    curve: Curve

    def contains(self, p):
        if isinstance(self.curve, ReciprocalCurve):
            return p[0] > 0 and p[1] * p[0] < self.curve.c
        return p[1] < self.curve.value(p[0])

    def slice_along(self, line):
        return self.curve.below_on_line(line)

    def support(self, u):
        cv = self.curve
        u0, u1 = float(u[0]), float(u[1])
        if isinstance(cv, ConstantCurve):
            return u1 * cv.c if (u0 == 0.0 and u1 > 0) else INF
        if isinstance(cv, LinearCurve):
            d = np.array([-cv.a, 1.0])
            cross = d[0] * u1 - d[1] * u0
            dot = d[0] * u0 + d[1] * u1
            if abs(cross) <= 1e-12 * (np.linalg.norm(d) * math.hypot(u0, u1)) and dot > 0:
                return float(math.hypot(u0, u1) / np.linalg.norm(d)) * cv.b
            return INF
        if isinstance(cv, ExpAbsCurve):
            if u0 == 0.0 and u1 > 0:
                return u1 * (cv.t + max(cv.s, 0.0))
            return INF
        if isinstance(cv, QuadraticCurve):
            if cv.a < 0 and u1 > 0:
                return u1 * cv.b - u0 * u0 / (4.0 * u1 * cv.a)
            if cv.a == 0:
                return u1 * cv.b if (u0 == 0.0 and u1 > 0) else INF
            return INF
        if isinstance(cv, ReciprocalCurve):
            if u1 < 0:
                return INF
            if u1 == 0.0:
                return 0.0 if u0 < 0 else INF
            if cv.c > 0:
                return INF
            return _ray_support(u0, u1 * cv.c)
        raise TypeError(f"unknown curve {cv!r}")

    def direction_candidates(self):
        cv = self.curve
        if isinstance(cv, ConstantCurve) or isinstance(cv, ExpAbsCurve):
            return [(0.0, 1.0)]
        if isinstance(cv, LinearCurve):
            return [_unit((-cv.a, 1.0))]
        if isinstance(cv, QuadraticCurve):
            return [(0.0, 1.0)] if cv.a < 0 else []
        if isinstance(cv, ReciprocalCurve):
            if cv.c > 0:
                return [(-1.0, 0.0)]
            return [(-1.0, 0.0), (0.0, 1.0), _unit((-1.0, 1.0))]
        return []

    def to_text(self):
        return f"(below {self.curve.to_text()})"


@dataclass(frozen=True)
class Above(DomainExpr):
    """{(x, y) : y > h(x)} (intersected with x > 0 for the reciprocal curve)."""

    curve: Curve

    def contains(self, p):
        if isinstance(self.curve, ReciprocalCurve):
            return p[0] > 0 and p[1] * p[0] > self.curve.c
        return p[1] > self.curve.value(p[0])

    def slice_along(self, line):
        cv = self.curve
        u0, u1 = line.u
        w0, w1 = line.w
        if isinstance(cv, ConstantCurve):
            return _solve_linear_neg(-u1, cv.c - w1)
        if isinstance(cv, LinearCurve):
            return _solve_linear_neg(cv.a * u0 - u1, cv.a * w0 + cv.b - w1)
        if isinstance(cv, QuadraticCurve):
            A = cv.a * u0 * u0
            B = 2.0 * cv.a * u0 * w0 - u1
            C = cv.a * w0 * w0 + cv.b - w1
            return _solve_quadratic_pos(-A, -B, -C)
        if isinstance(cv, ReciprocalCurve):
            pos_x = _solve_linear_neg(-u0, -w0)
            A = u0 * u1
            B = u0 * w1 + u1 * w0
            C = w0 * w1 - cv.c
            return pos_x.intersect(_solve_quadratic_pos(A, B, C))
        if isinstance(cv, ExpAbsCurve):
            if u0 == 0.0:
                return _solve_linear_neg(-u1, cv.value(w0) - w1)
            if u1 == 0.0:
                below = cv.below_on_line(line)
                return _complement_open(below)
            below = cv._below_oblique(line)
            return _complement_open(below)
        raise TypeError(f"unknown curve {cv!r}")

    def support(self, u):
        # mirror of Below through y -> -y
        mirror = Below(_mirror_curve(self.curve))
        return mirror.support((u[0], -u[1]))

    def direction_candidates(self):
        return [(d0, -d1) for d0, d1 in Below(_mirror_curve(self.curve)).direction_candidates()]

    def to_text(self):
        return f"(above {self.curve.to_text()})"


def _mirror_curve(cv: Curve) -> Curve:
    """The curve of -h(x): Above(h) maps to Below(-h) under y -> -y."""
    if isinstance(cv, ConstantCurve):
        return ConstantCurve(-cv.c)
    if isinstance(cv, LinearCurve):
        return LinearCurve(-cv.a, -cv.b)
    if isinstance(cv, QuadraticCurve):
        return QuadraticCurve(-cv.a, -cv.b)
    if isinstance(cv, ExpAbsCurve):
        return ExpAbsCurve(-cv.s, -cv.t)
    if isinstance(cv, ReciprocalCurve):
        return ReciprocalCurve(-cv.c)
    raise TypeError(f"unknown curve {cv!r}")


def _complement_open(s: SliceSet) -> SliceSet:
    """Open complement of an open interval set minus its boundary points."""
    pts = sorted({v for iv in s.intervals for v in iv if math.isfinite(v)})
    cuts = [-INF] + pts + [INF]
    out = []
    for lo, hi in zip(cuts, cuts[1:]):
        if lo < hi:
            mid = _probe_value(lo, hi)
            if not s.contains(mid):
                out.append((lo, hi))
    return SliceSet(_normalize_intervals(out), exact=s.exact)


def _probe_value(lo, hi):
    if math.isfinite(lo) and math.isfinite(hi):
        return 0.5 * (lo + hi)
    if math.isfinite(lo):
        return lo + max(1.0, abs(lo))
    if math.isfinite(hi):
        return hi - max(1.0, abs(hi))
    return 0.0


@dataclass(frozen=True)
class Union(DomainExpr):
    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise ValueError("empty union")

    def contains(self, p):
        return any(d.contains(p) for d in self.parts)

    def slice_along(self, line):
        out = self.parts[0].slice_along(line)
        for d in self.parts[1:]:
            out = out.union(d.slice_along(line))
        return out

    def support(self, u):
        return max(d.support(u) for d in self.parts)

    def direction_candidates(self):
        out = []
        for d in self.parts:
            out.extend(d.direction_candidates())
        return out

    def to_text(self):
        return "(union " + " ".join(d.to_text() for d in self.parts) + ")"


@dataclass(frozen=True)
class Intersection(DomainExpr):
    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise ValueError("empty intersection")

    def contains(self, p):
        return all(d.contains(p) for d in self.parts)

    def slice_along(self, line):
        out = self.parts[0].slice_along(line)
        for d in self.parts[1:]:
            out = out.intersect(d.slice_along(line))
        return out

    def support(self, u):
        # an upper bound: the intersection sits inside every factor
        return min(d.support(u) for d in self.parts)

    def direction_candidates(self):
        out = []
        for d in self.parts:
            out.extend(d.direction_candidates())
        return out

    def to_text(self):
        return "(inter " + " ".join(d.to_text() for d in self.parts) + ")"


@dataclass(frozen=True)
class AffineImage(DomainExpr):
    """{M p + v : p in child} for invertible M; membership via the inverse."""

    matrix: tuple  # ((m00, m01), (m10, m11))
    shift: tuple
    child: DomainExpr

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        if M.shape != (2, 2) or abs(np.linalg.det(M)) < 1e-15:
            raise ValueError("affine image needs an invertible 2x2 matrix")
        object.__setattr__(self, "matrix", ((float(M[0, 0]), float(M[0, 1])), (float(M[1, 0]), float(M[1, 1]))))
        object.__setattr__(self, "shift", (float(self.shift[0]), float(self.shift[1])))

    def _m(self):
        return np.asarray(self.matrix, dtype=float)

    def _minv(self):
        return np.linalg.inv(self._m())

    def contains(self, p):
        q = self._minv() @ (np.asarray(p, dtype=float) - np.asarray(self.shift))
        return self.child.contains(tuple(q))

    def slice_along(self, line):
        Minv = self._minv()
        u = Minv @ np.asarray(line.u)
        w = Minv @ (np.asarray(line.w) - np.asarray(self.shift))
        # snap near-zero direction components (pure-rotation round trips):
        # keeps horizontal slices of rotate-then-unrotate trees on the exact path
        scale = float(np.linalg.norm(u))
        u = np.where(np.abs(u) <= 1e-13 * scale, 0.0, u)
        return self.child.slice_along(LineMap(tuple(u), tuple(w)))

    def support(self, u):
        u = np.asarray(u, dtype=float)
        v = _snap_tiny(self._m().T @ u)
        inner = self.child.support(tuple(v))
        if not math.isfinite(inner):
            return INF
        return float(u @ np.asarray(self.shift)) + inner

    def direction_candidates(self):
        MinvT = np.linalg.inv(self._m().T)
        out = []
        for w in self.child.direction_candidates():
            out.append(_unit(_snap_tiny(MinvT @ np.asarray(w))))
        return out

    def to_text(self):
        (m00, m01), (m10, m11) = self.matrix
        v0, v1 = self.shift
        return (
            f"(affine {_fmt(m00)} {_fmt(m01)} {_fmt(m10)} {_fmt(m11)} "
            f"{_fmt(v0)} {_fmt(v1)} {self.child.to_text()})"
        )


# ---------------------------------------------------------------------------
# top-level queries
# ---------------------------------------------------------------------------


def contains_point(d: DomainExpr, p) -> bool:
    return d.contains((float(p[0]), float(p[1])))


def horizontal_slice(d: DomainExpr, b: float) -> SliceSet:
    """{x : (x, b) in d}."""
    return d.slice_along(LineMap((1.0, 0.0), (0.0, float(b))))


def vertical_slice(d: DomainExpr, a: float) -> SliceSet:
    """{y : (a, y) in d}."""
    return d.slice_along(LineMap((0.0, 1.0), (float(a), 0.0)))


def seg_fits(d: DomainExpr, k: float, b: float) -> bool:
    """Does the closed segment [-k, k] x {b} sit inside d?"""
    if k <= 0:
        raise PreconditionError("segment half-length must be positive")
    return horizontal_slice(d, b).contains_closed(-k, k)


def support(d: DomainExpr, u) -> float:
    if u[0] == 0 and u[1] == 0:
        raise ValueError("direction must be nonzero")
    return d.support((float(u[0]), float(u[1])))


def bounded_direction_candidates(d: DomainExpr, grid: int = 64):
    """Structural candidates first (exact rays), then a coarse angular grid."""
    cands = [c for c in d.direction_candidates() if c != (0.0, 0.0)]
    for k in range(grid):
        th = 2.0 * math.pi * k / grid
        cands.append((math.cos(th), math.sin(th)))
    seen, out = set(), []
    for c in cands:
        key = (round(c[0], 14), round(c[1], 14))
        if key not in seen:
            seen.add(key)
            out.append(c)
    return out


# ---------------------------------------------------------------------------
# slice enclosures over height windows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnclosurePiece:
    """Outer bounds for one slice component over a height window: the left
    endpoint stays in [l_lo, l_hi] and the right endpoint in [r_lo, r_hi]."""

    l_lo: float
    l_hi: float
    r_lo: float
    r_hi: float

    def may_contain(self, lo: float, hi: float) -> bool:
        return self.l_lo < lo and hi < self.r_hi

    def shifted(self, dx: float) -> "EnclosurePiece":
        return EnclosurePiece(self.l_lo + dx, self.l_hi + dx, self.r_lo + dx, self.r_hi + dx)


def _node_breakpoints(d: DomainExpr):
    """Heights where the slice structure of d can change (None: unsupported)."""
    if isinstance(d, HalfPlane):
        if d.a == 0.0:
            return (-d.c / d.b,)
        return ()
    if isinstance(d, VerticalStrip):
        return ()
    if isinstance(d, (Below, Above)):
        cv = d.curve
        if isinstance(cv, LinearCurve) and cv.a == 0.0:
            return (cv.b,)
        return cv.height_breakpoints()
    if isinstance(d, (Union, Intersection)):
        out = []
        for p in d.parts:
            bp = _node_breakpoints(p)
            if bp is None:
                return None
            out.extend(bp)
        return tuple(out)
    if isinstance(d, AffineImage):
        M = np.asarray(d.matrix)
        if M[0, 1] != 0.0 or M[1, 0] != 0.0:
            return None  # oblique transform: horizontal windows unsupported
        bp = _node_breakpoints(d.child)
        if bp is None:
            return None
        return tuple(b * M[1, 1] + d.shift[1] for b in bp)
    return None


def _merge_possible_overlaps(pieces):
    """Union components chain through possibly-overlapping pieces; hull them."""
    pieces = sorted(pieces, key=lambda p: (p.l_lo, p.r_hi))
    out = []
    for p in pieces:
        if out and p.l_lo < out[-1].r_hi:  # cannot rule out an overlap
            q = out[-1]
            out[-1] = EnclosurePiece(
                min(q.l_lo, p.l_lo), min(q.l_hi, p.l_hi),
                max(q.r_lo, p.r_lo), max(q.r_hi, p.r_hi),
            )
        else:
            out.append(p)
    return out


def _enclose_window(d: DomainExpr, lo: float, hi: float):
    """Pieces covering every slice component of d for heights in [lo, hi];
    the window must contain no breakpoint of d in its interior."""
    if isinstance(d, (Union, Intersection)):
        parts = [_enclose_window(p, lo, hi) for p in d.parts]
        if any(p is None for p in parts):
            return None
        if isinstance(d, Union):
            merged = [piece for plist in parts for piece in plist]
            return _merge_possible_overlaps(merged)
        acc = parts[0]
        for plist in parts[1:]:
            nxt = []
            for a in acc:
                for b in plist:
                    l_lo, l_hi = max(a.l_lo, b.l_lo), max(a.l_hi, b.l_hi)
                    r_lo, r_hi = min(a.r_lo, b.r_lo), min(a.r_hi, b.r_hi)
                    if l_lo < r_hi:  # possibly nonempty
                        nxt.append(EnclosurePiece(l_lo, l_hi, r_lo, r_hi))
            acc = nxt
        return acc
    if isinstance(d, AffineImage):
        M = np.asarray(d.matrix)
        if M[0, 1] != 0.0 or M[1, 0] != 0.0:
            return None
        sy, sx = M[1, 1], M[0, 0]
        b0, b1 = sorted(((lo - d.shift[1]) / sy, (hi - d.shift[1]) / sy))
        inner = _enclose_window(d.child, b0, b1)
        if inner is None:
            return None
        v0 = d.shift[0]
        out = []
        for p in inner:
            if sx > 0:
                out.append(
                    EnclosurePiece(sx * p.l_lo + v0, sx * p.l_hi + v0,
                                   sx * p.r_lo + v0, sx * p.r_hi + v0)
                )
            else:  # reflection: endpoint roles swap
                out.append(
                    EnclosurePiece(sx * p.r_hi + v0, sx * p.r_lo + v0,
                                   sx * p.l_hi + v0, sx * p.l_lo + v0)
                )
        return out

    # primitive: endpoints are monotone in the height between breakpoints;
    # probe slightly inside the window and inflate to absorb the nudge
    span = hi - lo
    eps = 1e-12 * max(1.0, span)
    probes = [lo + eps, 0.5 * (lo + hi), hi - eps] if span > 3 * eps else [0.5 * (lo + hi)]
    slices = [horizontal_slice(d, b) for b in probes]
    if not all(s.exact for s in slices):
        return None
    counts = {len(s.intervals) for s in slices}
    if len(counts) != 1:
        return None  # structure changed despite breakpoint splitting: bail
    n = counts.pop()
    pieces = []
    for k in range(n):
        ls = [s.intervals[k][0] for s in slices]
        rs = [s.intervals[k][1] for s in slices]
        pad = 1e-9 + 1e-6 * span
        l_lo = min(ls) - pad if math.isfinite(min(ls)) else -INF
        l_hi = max(ls) + pad if math.isfinite(max(ls)) else -INF
        r_lo = min(rs) - pad if math.isfinite(min(rs)) else INF
        r_hi = max(rs) + pad if math.isfinite(max(rs)) else INF
        pieces.append(EnclosurePiece(l_lo, l_hi, r_lo, r_hi))
    return pieces


def slice_enclosure(d: DomainExpr, b_lo: float, b_hi: float):
    """Outer enclosure of all horizontal-slice components for b in [b_lo, b_hi].

    Returns a list of EnclosurePiece (or None when the tree contains an
    oblique affine image or an approximate-slice construct).  Soundness: for
    every height in the window, each connected component of the slice lies
    inside one returned piece, so a closed segment can only fit in the slice
    if some piece may_contain it.
    """
    if b_hi < b_lo:
        raise ValueError("empty height window")
    bps = _node_breakpoints(d)
    if bps is None:
        return None
    cuts = sorted({b_lo, b_hi, *(b for b in bps if b_lo < b < b_hi)})
    pieces = []
    for lo, hi in zip(cuts, cuts[1:]):
        got = _enclose_window(d, lo, hi)
        if got is None:
            return None
        pieces.extend(got)
    if not cuts[:-1]:  # degenerate window b_lo == b_hi
        got = _enclose_window(d, b_lo, b_hi)
        if got is None:
            return None
        pieces.extend(got)
    return pieces


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def _tokenize(text):
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _read(tokens, pos):
    if pos >= len(tokens):
        raise ValueError("unexpected end of domain expression")
    tok = tokens[pos]
    if tok == "(":
        items = []
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            node, pos = _read(tokens, pos)
            items.append(node)
        if pos >= len(tokens):
            raise ValueError("missing closing parenthesis")
        return items, pos + 1
    if tok == ")":
        raise ValueError("unexpected ')'")
    return tok, pos + 1


def _to_curve(node) -> Curve:
    head = node[0]
    if head == "const":
        return ConstantCurve(float(node[1]))
    if head == "linear":
        return LinearCurve(float(node[1]), float(node[2]))
    if head == "expabs":
        return ExpAbsCurve(float(node[1]), float(node[2]))
    if head == "recip":
        return ReciprocalCurve(float(node[1]))
    if head == "quad":
        return QuadraticCurve(float(node[1]), float(node[2]))
    raise ValueError(f"unknown curve head {head!r}")


def _to_domain(node) -> DomainExpr:
    if not isinstance(node, list) or not node:
        raise ValueError(f"bad domain node: {node!r}")
    head = node[0]
    if head == "halfplane":
        return HalfPlane(float(node[1]), float(node[2]), float(node[3]))
    if head == "vstrip":
        return VerticalStrip(float(node[1]), float(node[2]))
    if head == "below":
        return Below(_to_curve(node[1]))
    if head == "above":
        return Above(_to_curve(node[1]))
    if head == "union":
        return Union(tuple(_to_domain(n) for n in node[1:]))
    if head == "inter":
        return Intersection(tuple(_to_domain(n) for n in node[1:]))
    if head == "affine":
        m = [float(node[i]) for i in range(1, 5)]
        v = (float(node[5]), float(node[6]))
        return AffineImage(((m[0], m[1]), (m[2], m[3])), v, _to_domain(node[7]))
    raise ValueError(f"unknown domain head {head!r}")


def parse_domain(text: str) -> DomainExpr:
    """Parse the prefix text form of a domain expression."""
    tokens = _tokenize(text)
    node, pos = _read(tokens, 0)
    if pos != len(tokens):
        raise ValueError(f"trailing tokens after domain: {tokens[pos:]}")
    return _to_domain(node)
