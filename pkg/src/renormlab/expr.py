"""Expression trees for exactly-harmonic scalar fields.

A ``HarmonicExpr`` is built from a closed set of constructors, each of which
preserves harmonicity: coordinates, constants, sums, real scalar multiples,
harmonic polynomials (coefficient tables whose symbolic Laplacian cancels),
real/imaginary parts of entire holomorphic expressions (dimension 2 only),
and precomposition with a positive scale-and-translate chart.  Partial
derivatives stay inside the same algebra, so gradients are exact.

Holomorphic building blocks (``HoloExpr``) cover ``z``, complex constants,
sums, products, ``exp`` and polynomials in ``z``; they support exact
differentiation and drive the ``Re``/``Im`` constructors.

Both families serialize to a deterministic s-expression text form,
round-trip stable, which the CLI config grammar reuses.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, EvaluationOverflowError, NotHarmonicError
from . import tape as _tape

__all__ = [
    "AffineChart",
    "HoloExpr",
    "Z",
    "CConst",
    "CSum",
    "CProd",
    "CExp",
    "CPoly",
    "HarmonicExpr",
    "Coordinate",
    "Constant",
    "Sum",
    "Scaled",
    "HarmonicPolynomial",
    "RealPart",
    "ImagPart",
    "Precomposed",
    "parse_expr",
    "parse_holo",
]


@dataclass(frozen=True)
class AffineChart:
    """The map x -> scale*x + center with scale > 0."""

    scale: float
    center: tuple

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"chart scale must be positive and finite, got {self.scale}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not all(math.isfinite(c) for c in self.center):
            raise ValueError("chart center must be finite")

    @property
    def dim(self):
        return len(self.center)

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        return self.scale * x + np.asarray(self.center)

    def compose(self, other: "AffineChart") -> "AffineChart":
        """Chart equal to applying ``other`` first, then ``self``... i.e. self∘other."""
        c = self.apply(np.asarray(other.center))
        return AffineChart(self.scale * other.scale, tuple(c))


# ---------------------------------------------------------------------------
# holomorphic expressions (dimension 2 only)
# ---------------------------------------------------------------------------


class HoloExpr:
    """Entire holomorphic expression in one complex variable."""

    def derivative(self) -> "HoloExpr":
        raise NotImplementedError

    def eval(self, z: complex) -> complex:
        raise NotImplementedError

    def conj_twin(self) -> "HoloExpr":
        """The entire function w -> conj(self(conj w)) (coefficients conjugated)."""
        raise NotImplementedError

    def emit(self, em, zscale: complex, zoffset: complex):
        """Append tape instructions computing self(zscale*z + zoffset)."""
        raise NotImplementedError

    def to_sexpr(self) -> str:
        raise NotImplementedError

    def __add__(self, other):
        return CSum((self, _as_holo(other)))

    __radd__ = __add__

    def __mul__(self, other):
        return CProd((self, _as_holo(other)))

    __rmul__ = __mul__

    def __neg__(self):
        return CProd((CConst(-1.0), self))


def _as_holo(v) -> HoloExpr:
    if isinstance(v, HoloExpr):
        return v
    if isinstance(v, (int, float, complex)):
        return CConst(complex(v))
    raise TypeError(f"cannot coerce {v!r} to a holomorphic expression")


class Z(HoloExpr):
    """The identity z."""

    def derivative(self):
        return CConst(1.0)

    def eval(self, z):
        return complex(z)

    def conj_twin(self):
        return self

    def emit(self, em, zscale, zoffset):
        em.z()
        if zscale != 1.0:
            em.const(zscale)
            em.mul()
        if zoffset != 0.0:
            em.const(zoffset)
            em.add()

    def to_sexpr(self):
        return "z"

    def __repr__(self):
        return "Z()"


class CConst(HoloExpr):
    def __init__(self, value):
        self.value = complex(value)

    def derivative(self):
        return CConst(0.0)

    def eval(self, z):
        return self.value

    def conj_twin(self):
        return CConst(self.value.conjugate())

    def emit(self, em, zscale, zoffset):
        em.const(self.value)

    def to_sexpr(self):
        return f"(zc {_fmt(self.value.real)} {_fmt(self.value.imag)})"

    def __repr__(self):
        return f"CConst({self.value!r})"


class CSum(HoloExpr):
    def __init__(self, terms):
        self.terms = tuple(_as_holo(t) for t in terms)
        if not self.terms:
            raise ValueError("empty sum")

    def derivative(self):
        return CSum(tuple(t.derivative() for t in self.terms))

    def eval(self, z):
        return sum((t.eval(z) for t in self.terms), complex(0.0))

    def conj_twin(self):
        return CSum(tuple(t.conj_twin() for t in self.terms))

    def emit(self, em, zscale, zoffset):
        self.terms[0].emit(em, zscale, zoffset)
        for t in self.terms[1:]:
            t.emit(em, zscale, zoffset)
            em.add()

    def to_sexpr(self):
        return "(zsum " + " ".join(t.to_sexpr() for t in self.terms) + ")"


class CProd(HoloExpr):
    def __init__(self, factors):
        self.factors = tuple(_as_holo(f) for f in factors)
        if not self.factors:
            raise ValueError("empty product")

    def derivative(self):
        # product rule over all factors
        terms = []
        for i in range(len(self.factors)):
            fs = list(self.factors)
            fs[i] = fs[i].derivative()
            terms.append(CProd(tuple(fs)))
        return CSum(tuple(terms))

    def eval(self, z):
        out = complex(1.0)
        for f in self.factors:
            out *= f.eval(z)
        return out

    def conj_twin(self):
        return CProd(tuple(f.conj_twin() for f in self.factors))

    def emit(self, em, zscale, zoffset):
        self.factors[0].emit(em, zscale, zoffset)
        for f in self.factors[1:]:
            f.emit(em, zscale, zoffset)
            em.mul()

    def to_sexpr(self):
        return "(zmul " + " ".join(f.to_sexpr() for f in self.factors) + ")"


class CExp(HoloExpr):
    def __init__(self, inner):
        self.inner = _as_holo(inner)

    def derivative(self):
        return CProd((self.inner.derivative(), CExp(self.inner)))

    def eval(self, z):
        return cmath.exp(self.inner.eval(z))

    def conj_twin(self):
        return CExp(self.inner.conj_twin())

    def emit(self, em, zscale, zoffset):
        self.inner.emit(em, zscale, zoffset)
        em.exp()

    def to_sexpr(self):
        return f"(zexp {self.inner.to_sexpr()})"


class CPoly(HoloExpr):
    """Polynomial sum_k coeffs[k] * z^k with complex coefficients."""

    def __init__(self, coeffs):
        self.coeffs = tuple(complex(c) for c in coeffs)
        if not self.coeffs:
            raise ValueError("empty coefficient list")

    def derivative(self):
        if len(self.coeffs) == 1:
            return CConst(0.0)
        return CPoly(tuple(k * c for k, c in enumerate(self.coeffs) if k >= 1))

    def eval(self, z):
        out = complex(0.0)
        for k, c in enumerate(self.coeffs):
            if c != 0:
                out += c * z**k
        return out

    def conj_twin(self):
        return CPoly(tuple(c.conjugate() for c in self.coeffs))

    def emit(self, em, zscale, zoffset):
        # ascending powers; each power reloads z so both backends agree exactly
        first = True
        for k, c in enumerate(self.coeffs):
            if c == 0 and not (first and k == len(self.coeffs) - 1):
                continue
            if k == 0:
                em.const(c)
            else:
                Z().emit(em, zscale, zoffset)
                em.pow(k)
                if c != 1.0:
                    em.const(c)
                    em.mul()
            if not first:
                em.add()
            first = False
        if first:  # all-zero coefficients
            em.const(0.0)

    def to_sexpr(self):
        body = " ".join(f"({_fmt(c.real)} {_fmt(c.imag)})" for c in self.coeffs)
        return f"(zpoly {body})"


# ---------------------------------------------------------------------------
# harmonic expressions
# ---------------------------------------------------------------------------


class HarmonicExpr:
    """Base class; every subclass represents an entire harmonic function."""

    dim: int

    # -- structure -----------------------------------------------------
    def partial(self, j: int) -> "HarmonicExpr":
        """Exact partial derivative with respect to coordinate j (harmonic again)."""
        if not 0 <= j < self.dim:
            raise DimensionMismatchError(f"partial index {j} out of range for dim {self.dim}")
        cache = self.__dict__.setdefault("_partials", {})
        if j not in cache:
            cache[j] = self._partial(j)
        return cache[j]

    def gradient_exprs(self):
        return tuple(self.partial(j) for j in range(self.dim))

    def _partial(self, j):
        raise NotImplementedError

    def emit(self, em, scale: float, offset):
        """Append tape ops computing self(scale*x + offset)."""
        raise NotImplementedError

    def eval_analytic(self, u) -> complex:
        """Evaluate the analytic continuation at complexified coordinates.

        Every constructor is real-analytic, so the expression extends to a
        holomorphic function of the m complex coordinates; Re/Im nodes
        continue as (h(u0+i*u1) +/- conj-twin(u0-i*u1))/2.  Used by the
        complex-step derivative oracle.
        """
        raise NotImplementedError

    def to_sexpr(self) -> str:
        raise NotImplementedError

    # -- evaluation ----------------------------------------------------
    @property
    def tape(self):
        t = self.__dict__.get("_tape")
        if t is None:
            t = _tape.compile_expr(self)
            self.__dict__["_tape"] = t
        return t

    def eval_grid(self, pts) -> np.ndarray:
        """Evaluate at an (N, dim) array of points.  Non-finite values pass through."""
        pts = np.asarray(pts, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"expected points of shape (N, {self.dim}), got {pts.shape}"
            )
        return _tape.eval_tape(self.tape, pts).real

    def eval(self, x) -> float:
        """Evaluate at a single point; raises on overflow instead of returning inf/NaN."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        v = self.eval_grid(x[None, :])[0]
        if not math.isfinite(v):
            raise EvaluationOverflowError(f"evaluation overflowed at {x.tolist()}", point=tuple(x))
        return float(v)

    # -- combinators ----------------------------------------------------
    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Constant(float(other), self.dim)
        return Sum((self, other))

    __radd__ = __add__

    def __mul__(self, c):
        return Scaled(float(c), self)

    __rmul__ = __mul__

    def __neg__(self):
        return Scaled(-1.0, self)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Constant(float(other), self.dim)
        return Sum((self, Scaled(-1.0, other)))

    def precompose(self, chart: AffineChart) -> "HarmonicExpr":
        return Precomposed(self, chart)


def _check_same_dim(exprs):
    dims = {e.dim for e in exprs}
    if len(dims) != 1:
        raise DimensionMismatchError(f"mixed dimensions in expression: {sorted(dims)}")
    return dims.pop()


class Coordinate(HarmonicExpr):
    def __init__(self, index: int, dim: int):
        if not 0 <= index < dim:
            raise DimensionMismatchError(f"coordinate {index} out of range for dim {dim}")
        self.index = index
        self.dim = dim

    def _partial(self, j):
        return Constant(1.0 if j == self.index else 0.0, self.dim)

    def eval_analytic(self, u):
        return complex(u[self.index])

    def emit(self, em, scale, offset):
        em.coord(self.index)
        if scale != 1.0:
            em.const(scale)
            em.mul()
        if offset[self.index] != 0.0:
            em.const(offset[self.index])
            em.add()

    def to_sexpr(self):
        return f"(coord {self.index} {self.dim})"


class Constant(HarmonicExpr):
    def __init__(self, value: float, dim: int):
        self.value = float(value)
        self.dim = dim

    def _partial(self, j):
        return Constant(0.0, self.dim)

    def eval_analytic(self, u):
        return complex(self.value)

    def emit(self, em, scale, offset):
        em.const(self.value)

    def to_sexpr(self):
        return f"(const {_fmt(self.value)} {self.dim})"


class Sum(HarmonicExpr):
    def __init__(self, terms):
        self.terms = tuple(terms)
        if not self.terms:
            raise ValueError("empty sum")
        self.dim = _check_same_dim(self.terms)

    def _partial(self, j):
        return Sum(tuple(t.partial(j) for t in self.terms))

    def eval_analytic(self, u):
        return sum((t.eval_analytic(u) for t in self.terms), complex(0.0))

    def emit(self, em, scale, offset):
        self.terms[0].emit(em, scale, offset)
        for t in self.terms[1:]:
            t.emit(em, scale, offset)
            em.add()

    def to_sexpr(self):
        return "(sum " + " ".join(t.to_sexpr() for t in self.terms) + ")"


class Scaled(HarmonicExpr):
    def __init__(self, factor: float, inner: HarmonicExpr):
        self.factor = float(factor)
        self.inner = inner
        self.dim = inner.dim

    def _partial(self, j):
        return Scaled(self.factor, self.inner.partial(j))

    def eval_analytic(self, u):
        return self.factor * self.inner.eval_analytic(u)

    def emit(self, em, scale, offset):
        self.inner.emit(em, scale, offset)
        if self.factor != 1.0:
            em.const(self.factor)
            em.mul()

    def to_sexpr(self):
        return f"(scale {_fmt(self.factor)} {self.inner.to_sexpr()})"


class HarmonicPolynomial(HarmonicExpr):
    """Polynomial given as {exponent tuple: coefficient}; Laplacian must cancel.

    The symbolic Laplacian is formed exactly over the coefficient table and
    must vanish (up to 1e-12 relative roundoff), otherwise construction fails.
    """

    def __init__(self, dim: int, terms: dict, _skip_check: bool = False):
        self.dim = dim
        clean = {}
        for expo, c in terms.items():
            expo = tuple(int(e) for e in expo)
            if len(expo) != dim or any(e < 0 for e in expo):
                raise DimensionMismatchError(f"bad exponent tuple {expo} for dim {dim}")
            c = float(c)
            if c != 0.0:
                clean[expo] = clean.get(expo, 0.0) + c
        self.terms = {k: v for k, v in sorted(clean.items()) if v != 0.0}
        if not _skip_check:
            self._check_harmonic()

    def _laplacian_table(self):
        lap = {}
        for expo, c in self.terms.items():
            for j in range(self.dim):
                e = expo[j]
                if e >= 2:
                    down = list(expo)
                    down[j] = e - 2
                    key = tuple(down)
                    lap[key] = lap.get(key, 0.0) + c * e * (e - 1)
        return lap

    def _check_harmonic(self):
        lap = self._laplacian_table()
        scale = max((abs(c) for c in self.terms.values()), default=1.0)
        bad = {k: v for k, v in lap.items() if abs(v) > 1e-12 * max(1.0, scale)}
        if bad:
            raise NotHarmonicError(f"polynomial Laplacian does not vanish: {bad}")

    def _partial(self, j):
        out = {}
        for expo, c in self.terms.items():
            e = expo[j]
            if e >= 1:
                down = list(expo)
                down[j] = e - 1
                key = tuple(down)
                out[key] = out.get(key, 0.0) + c * e
        # partials of harmonic polynomials are harmonic; skip the redundant check
        return HarmonicPolynomial(self.dim, out, _skip_check=True)

    def eval_analytic(self, u):
        out = complex(0.0)
        for expo, c in self.terms.items():
            term = complex(c)
            for j, e in enumerate(expo):
                if e:
                    term *= complex(u[j]) ** e
            out += term
        return out

    def emit(self, em, scale, offset):
        if not self.terms:
            em.const(0.0)
            return
        first = True
        for expo, c in self.terms.items():  # sorted at construction
            em.const(c)
            for j, e in enumerate(expo):
                if e == 0:
                    continue
                Coordinate(j, self.dim).emit(em, scale, offset)
                if e != 1:
                    em.pow(e)
                em.mul()
            if not first:
                em.add()
            first = False

    def to_sexpr(self):
        body = " ".join(
            f"({_fmt(c)} ({' '.join(str(e) for e in expo)}))" for expo, c in self.terms.items()
        )
        return f"(hpoly {self.dim} {body})"


class RealPart(HarmonicExpr):
    """Re(h(x1 + i*x2)) for an entire holomorphic h; dimension 2 only."""

    part = "re"
    dim = 2

    def __init__(self, holo: HoloExpr):
        self.holo = _as_holo(holo)

    def _partial(self, j):
        d = self.holo.derivative()
        if j == 0:
            return type(self)(d)
        # d/dy of Re h is Re(i h'), and of Im h is Im(i h')
        return type(self)(CProd((CConst(1j), d)))

    def emit(self, em, scale, offset):
        zscale = complex(scale)
        zoffset = complex(offset[0], offset[1])
        self.holo.emit(em, zscale, zoffset)
        em.re()

    def eval_analytic(self, u):
        zp = complex(u[0]) + 1j * complex(u[1])
        zm = complex(u[0]) - 1j * complex(u[1])
        return (self.holo.eval(zp) + self.holo.conj_twin().eval(zm)) / 2.0

    def to_sexpr(self):
        return f"({self.part} {self.holo.to_sexpr()})"


class ImagPart(RealPart):
    part = "im"

    def emit(self, em, scale, offset):
        zscale = complex(scale)
        zoffset = complex(offset[0], offset[1])
        self.holo.emit(em, zscale, zoffset)
        em.im()

    def eval_analytic(self, u):
        zp = complex(u[0]) + 1j * complex(u[1])
        zm = complex(u[0]) - 1j * complex(u[1])
        return (self.holo.eval(zp) - self.holo.conj_twin().eval(zm)) / 2j


class Precomposed(HarmonicExpr):
    """inner(chart.scale * x + chart.center); the renormalization charts."""

    def __init__(self, inner: HarmonicExpr, chart: AffineChart):
        if chart.dim != inner.dim:
            raise DimensionMismatchError(
                f"chart dim {chart.dim} does not match expression dim {inner.dim}"
            )
        self.inner = inner
        self.chart = chart
        self.dim = inner.dim

    def _partial(self, j):
        return Scaled(self.chart.scale, Precomposed(self.inner.partial(j), self.chart))

    def eval_analytic(self, u):
        v = [self.chart.scale * complex(c) + b for c, b in zip(u, self.chart.center)]
        return self.inner.eval_analytic(v)

    def emit(self, em, scale, offset):
        # compose charts: inner evaluated at  a*(scale*x + offset) + b
        a = self.chart.scale
        b = np.asarray(self.chart.center)
        new_scale = a * scale
        new_offset = a * np.asarray(offset, dtype=float) + b
        self.inner.emit(em, new_scale, tuple(new_offset))

    def to_sexpr(self):
        c = " ".join(_fmt(v) for v in self.chart.center)
        return f"(chart {_fmt(self.chart.scale)} ({c}) {self.inner.to_sexpr()})"


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    # repr gives the shortest round-trip-stable decimal form
    return repr(float(x))


def _tokenize(text: str):
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _read(tokens, pos):
    if pos >= len(tokens):
        raise ValueError("unexpected end of expression")
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


def _parse_sexpr(text: str):
    tokens = _tokenize(text)
    node, pos = _read(tokens, 0)
    if pos != len(tokens):
        raise ValueError(f"trailing tokens after expression: {tokens[pos:]}")
    return node


def _to_holo(node) -> HoloExpr:
    if node == "z":
        return Z()
    if not isinstance(node, list) or not node:
        raise ValueError(f"bad holomorphic node: {node!r}")
    head = node[0]
    if head == "zc":
        return CConst(complex(float(node[1]), float(node[2])))
    if head == "zsum":
        return CSum(tuple(_to_holo(n) for n in node[1:]))
    if head == "zmul":
        return CProd(tuple(_to_holo(n) for n in node[1:]))
    if head == "zexp":
        return CExp(_to_holo(node[1]))
    if head == "zpoly":
        coeffs = []
        for pair in node[1:]:
            if not isinstance(pair, list) or len(pair) != 2:
                raise ValueError(f"bad zpoly coefficient {pair!r}")
            coeffs.append(complex(float(pair[0]), float(pair[1])))
        return CPoly(coeffs)
    raise ValueError(f"unknown holomorphic head {head!r}")


def _to_harmonic(node) -> HarmonicExpr:
    if not isinstance(node, list) or not node:
        raise ValueError(f"bad expression node: {node!r}")
    head = node[0]
    if head == "coord":
        return Coordinate(int(node[1]), int(node[2]))
    if head == "const":
        return Constant(float(node[1]), int(node[2]))
    if head == "sum":
        return Sum(tuple(_to_harmonic(n) for n in node[1:]))
    if head == "scale":
        return Scaled(float(node[1]), _to_harmonic(node[2]))
    if head == "hpoly":
        dim = int(node[1])
        terms = {}
        for item in node[2:]:
            coef = float(item[0])
            expo = tuple(int(e) for e in item[1])
            terms[expo] = terms.get(expo, 0.0) + coef
        return HarmonicPolynomial(dim, terms)
    if head == "re":
        return RealPart(_to_holo(node[1]))
    if head == "im":
        return ImagPart(_to_holo(node[1]))
    if head == "chart":
        scale = float(node[1])
        center = tuple(float(v) for v in node[2])
        return Precomposed(_to_harmonic(node[3]), AffineChart(scale, center))
    raise ValueError(f"unknown expression head {head!r}")


def parse_expr(text: str) -> HarmonicExpr:
    """Parse the s-expression text form of a harmonic expression."""
    return _to_harmonic(_parse_sexpr(text))


def parse_holo(text: str) -> HoloExpr:
    """Parse the s-expression text form of a holomorphic expression."""
    return _to_holo(_parse_sexpr(text))
