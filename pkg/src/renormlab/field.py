"""Scalar-field operations: gradients, damped derivative, means, positivity ratios.

The damped derivative of a smooth f is |grad f(x)| / cosh f(x).  It is the
modulus of the derivative of S(f) for S(t) = arctan(sinh t), which turns the
extended line [-inf, +inf] into a bounded metric space; the quantity is
computed in the log domain so it never overflows even for huge |f|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

from .errors import (
    DegenerateGridError,
    DimensionMismatchError,
    EvaluationOverflowError,
    PositivityError,
)
from .expr import HarmonicExpr

__all__ = [
    "Box",
    "GridSpec",
    "AffineFunc",
    "HarnackReport",
    "as_point",
    "evaluate",
    "gradient",
    "gradient_grid",
    "logcosh",
    "tilde_derivative",
    "tilde_grid",
    "sphere_quadrature",
    "spherical_mean",
    "harnack_check",
    "affine_fit",
    "fd_gradient",
    "complex_step_gradient",
    "fd_laplacian",
]


def as_point(x, dim=None) -> np.ndarray:
    """Validate a point: finite coordinates, optional dimension check."""
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1 or p.size < 1:
        raise DimensionMismatchError(f"a point must be a 1-d vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"point has non-finite coordinates: {p}")
    if dim is not None and p.size != dim:
        raise DimensionMismatchError(f"expected a point of dimension {dim}, got {p.size}")
    return p


@dataclass(frozen=True)
class Box:
    """Axis-aligned closed box, one [lo, hi] interval per axis."""

    los: tuple
    his: tuple

    def __post_init__(self):
        los = tuple(float(v) for v in self.los)
        his = tuple(float(v) for v in self.his)
        if len(los) != len(his) or not los:
            raise ValueError("box needs matching nonempty lo/hi tuples")
        if any(l > h for l, h in zip(los, his)):
            raise ValueError(f"box has lo > hi: {los} vs {his}")
        object.__setattr__(self, "los", los)
        object.__setattr__(self, "his", his)

    @property
    def dim(self):
        return len(self.los)

    @classmethod
    def cube(cls, lo, hi, dim):
        return cls((lo,) * dim, (hi,) * dim)

    def contains(self, x):
        x = as_point(x, self.dim)
        return bool(np.all(x >= np.asarray(self.los)) and np.all(x <= np.asarray(self.his)))

    def scaled(self, factor):
        c = (np.asarray(self.los) + np.asarray(self.his)) / 2.0
        half = (np.asarray(self.his) - np.asarray(self.los)) / 2.0 * factor
        return Box(tuple(c - half), tuple(c + half))


@dataclass(frozen=True)
class GridSpec:
    """Uniform lattice over a box with a fixed number of points per axis."""

    box: Box
    points_per_axis: int

    def __post_init__(self):
        if self.points_per_axis < 2:
            raise ValueError("points_per_axis must be at least 2")

    def axes(self):
        return [
            np.linspace(lo, hi, self.points_per_axis)
            for lo, hi in zip(self.box.los, self.box.his)
        ]

    def points(self) -> np.ndarray:
        """All lattice points, C-order over the axis product; shape (N, dim)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class AffineFunc:
    """x -> constant + <gradient, x>."""

    constant: float
    gradient: tuple

    def __post_init__(self):
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "gradient", tuple(float(g) for g in self.gradient))

    @property
    def dim(self):
        return len(self.gradient)

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        return self.constant + pts @ np.asarray(self.gradient)

    def gradient_norm(self) -> float:
        return float(np.linalg.norm(self.gradient))

    def is_nonconstant(self) -> bool:
        return self.gradient_norm() > 0.0


# ---------------------------------------------------------------------------
# pointwise operations
# ---------------------------------------------------------------------------


def evaluate(f: HarmonicExpr, x) -> float:
    """Evaluate an expression at one point (overflow raises, never NaN)."""
    return f.eval(as_point(x, f.dim))


def gradient(f: HarmonicExpr, x) -> np.ndarray:
    """Exact gradient via the structurally differentiated expressions."""
    x = as_point(x, f.dim)
    out = np.array([p.eval(x) for p in f.gradient_exprs()])
    return out


def gradient_grid(f: HarmonicExpr, pts) -> np.ndarray:
    """Gradient rows for an (N, dim) array of points."""
    pts = np.asarray(pts, dtype=float)
    return np.stack([p.eval_grid(pts) for p in f.gradient_exprs()], axis=-1)


def logcosh(t):
    """log(cosh t) evaluated stably: |t| + log1p(exp(-2|t|)) - log 2."""
    t = np.abs(np.asarray(t, dtype=float))
    return t + np.log1p(np.exp(-2.0 * t)) - math.log(2.0)


def tilde_derivative(f: HarmonicExpr, x) -> float:
    """|grad f(x)| / cosh f(x), via exp(log|grad| - logcosh f); overflow-free."""
    x = as_point(x, f.dim)
    v = f.eval(x)
    g = gradient(f, x)
    gn = float(np.linalg.norm(g))
    if not np.isfinite(gn):
        raise EvaluationOverflowError("gradient overflowed", point=tuple(x))
    if gn == 0.0:
        return 0.0
    return float(math.exp(math.log(gn) - float(logcosh(v))))


def tilde_grid(f: HarmonicExpr, pts) -> np.ndarray:
    """Damped derivative over an (N, dim) batch (vectorized log-domain form)."""
    pts = np.asarray(pts, dtype=float)
    vals = f.eval_grid(pts)
    grads = gradient_grid(f, pts)
    gn = np.linalg.norm(grads, axis=-1)
    out = np.zeros_like(gn)
    pos = gn > 0
    with np.errstate(divide="ignore"):
        out[pos] = np.exp(np.log(gn[pos]) - logcosh(vals[pos]))
    return out


# ---------------------------------------------------------------------------
# spherical means
# ---------------------------------------------------------------------------


def sphere_quadrature(m: int, order: int):
    """Quadrature (points, weights) on the unit sphere of R^m, weights sum to 1.

    Built recursively: Gauss-Jacobi nodes in the polar cosine (weight
    (1-u^2)^((m-3)/2)) times a quadrature on the equatorial sphere.  Exact for
    polynomials of degree < 2*order restricted to the sphere.
    """
    if m < 1:
        raise ValueError("dimension must be >= 1")
    if m == 1:
        return np.array([[-1.0], [1.0]]), np.array([0.5, 0.5])
    sub_pts, sub_wts = sphere_quadrature(m - 1, order)
    alpha = (m - 3) / 2.0
    mu, w = roots_jacobi(order, alpha, alpha)
    w = w / w.sum()
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - mu**2))
    pts = np.empty((order * len(sub_pts), m))
    wts = np.empty(order * len(sub_pts))
    k = 0
    for i in range(order):
        block = slice(k, k + len(sub_pts))
        pts[block, 0] = mu[i]
        pts[block, 1:] = sin_t[i] * sub_pts
        wts[block] = w[i] * sub_wts
        k += len(sub_pts)
    return pts, wts


def _field_values(f, pts):
    if isinstance(f, HarmonicExpr):
        return f.eval_grid(pts)
    vals = np.asarray(f(pts), dtype=float)
    if vals.shape != (pts.shape[0],):
        raise ValueError("a callable field must map (N, m) points to N values")
    return vals


def spherical_mean(f, r: float, order: int = 24, m: int | None = None) -> float:
    """Mean of f over the sphere |x| = r (unit-mass uniform measure).

    ``f`` is a HarmonicExpr or a callable over (N, m) batches; for callables
    the dimension m must be given.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    if isinstance(f, HarmonicExpr):
        m = f.dim
    elif m is None:
        raise ValueError("dimension m is required for callable fields")
    pts, wts = sphere_quadrature(m, order)
    vals = _field_values(f, r * pts)
    if not np.all(np.isfinite(vals)):
        raise EvaluationOverflowError("field overflowed on the sphere")
    return float(np.dot(wts, vals))


# ---------------------------------------------------------------------------
# positivity ratio check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HarnackReport:
    passed: bool
    bound: float          # the constant A = 3^(-m)
    worst_ratio: float    # min/max of f over the sampled inner ball
    min_value: float
    max_value: float
    argmin: tuple
    argmax: tuple
    n_samples: int

    def margin(self) -> float:
        return self.worst_ratio / self.bound

    def to_json(self):
        return {
            "passed": self.passed,
            "bound": self.bound,
            "worst_ratio": self.worst_ratio,
            "min_value": self.min_value,
            "max_value": self.max_value,
            "argmin": list(self.argmin),
            "argmax": list(self.argmax),
            "n_samples": self.n_samples,
        }


def harnack_check(f, p, R: float, sample: GridSpec | None = None) -> HarnackReport:
    """Check A*f(x) <= f(y) with A = 3^(-m) over sampled x, y in the open ball B(p, R).

    Requires f > 0 on samples of B(p, 2R) (two-sided Poisson bounds on the
    double ball give the constant 3^(-m)).  ``sample`` defaults to a 17-per-axis
    lattice on the bounding box of B(p, R); only strict-interior lattice points
    are used.
    """
    p = as_point(p)
    m = p.size
    if R <= 0:
        raise ValueError("radius must be positive")
    if sample is None:
        sample = GridSpec(Box(tuple(p - R), tuple(p + R)), 17)

    # positivity precheck on the double ball
    outer = GridSpec(Box(tuple(p - 2 * R), tuple(p + 2 * R)), sample.points_per_axis)
    opts = outer.points()
    opts = opts[np.linalg.norm(opts - p, axis=1) < 2 * R]
    ovals = _field_values(f, opts)
    if np.any(ovals <= 0):
        bad = opts[int(np.argmin(ovals))]
        raise PositivityError(f"f is not positive on B(p, 2R): f({bad.tolist()}) <= 0")

    pts = sample.points()
    pts = pts[np.linalg.norm(pts - p, axis=1) < R]
    if len(pts) == 0:
        raise DegenerateGridError("no sample points fall inside the ball")
    vals = _field_values(f, pts)
    i_min = int(np.argmin(vals))
    i_max = int(np.argmax(vals))
    vmin, vmax = float(vals[i_min]), float(vals[i_max])
    bound = 3.0 ** (-m)
    worst = vmin / vmax
    return HarnackReport(
        passed=bool(worst >= bound),
        bound=bound,
        worst_ratio=worst,
        min_value=vmin,
        max_value=vmax,
        argmin=tuple(pts[i_min]),
        argmax=tuple(pts[i_max]),
        n_samples=len(pts),
    )


# ---------------------------------------------------------------------------
# affine fitting
# ---------------------------------------------------------------------------


def affine_fit(f, grid) -> tuple[AffineFunc, float]:
    """Least-squares affine fit over a grid; residual is the sup of |f - fit|.

    ``grid`` is a GridSpec or an (N, m) array of points; ``f`` an expression,
    a callable over batches, or an (N,) array of values matching the points.
    """
    pts = grid.points() if isinstance(grid, GridSpec) else np.asarray(grid, dtype=float)
    if pts.ndim != 2 or len(pts) == 0:
        raise DegenerateGridError("grid must be a nonempty (N, m) array")
    if np.allclose(pts, pts[0]):
        raise DegenerateGridError("all grid points coincide")
    vals = np.asarray(f, dtype=float) if isinstance(f, np.ndarray) else _field_values(f, pts)
    design = np.hstack([np.ones((len(pts), 1)), pts])
    coef, *_ = np.linalg.lstsq(design, vals, rcond=None)
    fit = AffineFunc(coef[0], tuple(coef[1:]))
    residual = float(np.max(np.abs(vals - fit(pts))))
    return fit, residual


# ---------------------------------------------------------------------------
# independent derivative oracles (used by tests and cross-checks)
# ---------------------------------------------------------------------------


def fd_gradient(f, x, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient of an expression or callable field."""
    x = np.asarray(x, dtype=float)
    m = x.size
    shifts = np.vstack([np.eye(m) * h, -np.eye(m) * h])
    pts = x[None, :] + shifts
    vals = _field_values(f, pts)
    return (vals[:m] - vals[m:]) / (2.0 * h)


def complex_step_gradient(f: HarmonicExpr, x, h: float = 1e-20) -> np.ndarray:
    """Gradient via imaginary perturbation of each coordinate.

    Valid for expressions without Re/Im nodes (polynomials, sums, scalings,
    charts): there the perturbation i*h stays in its own imaginary slot and
    Im f(x + i*h*e_j)/h equals the partial derivative to machine precision
    with no subtractive cancellation.  Inside Re/Im nodes the coordinates
    fuse into one complex number and a step of 1e-20 would be absorbed, so
    those trees are rejected; use fd_gradient there.
    """
    from .expr import RealPart

    def has_reim(e):
        if isinstance(e, RealPart):  # ImagPart subclasses RealPart
            return True
        return any(has_reim(c) for c in getattr(e, "terms", ())) or any(
            has_reim(c) for c in (getattr(e, "inner", None),) if c is not None
        )

    if has_reim(f):
        raise ValueError("complex-step gradient is only valid for Re/Im-free expressions")
    x = as_point(x, f.dim)
    out = np.empty(f.dim)
    for j in range(f.dim):
        u = x.astype(complex)
        u[j] += 1j * h
        out[j] = f.eval_analytic(u).imag / h
    return out


def fd_laplacian(f, x, h: float = 1e-3) -> float:
    """Second-order central finite-difference Laplacian."""
    x = np.asarray(x, dtype=float)
    m = x.size
    pts = [x]
    for j in range(m):
        e = np.zeros(m)
        e[j] = h
        pts.append(x + e)
        pts.append(x - e)
    vals = _field_values(f, np.asarray(pts))
    return float((vals[1:].sum() - 2 * m * vals[0]) / h**2)

