"""Rescaling with torus and matrix-group targets.

Torus-valued maps are handled through lifts defined up to additive constants,
so every derivative-based quantity is well defined on the quotient; the
rescaled derivative sequence must flatten to a constant (bounded entire
solutions are constant), giving an affine limit modulo the lattice.

Matrix-group-valued holomorphic maps use the logarithmic derivative
DF(z) = F(z)^{-1} F'(z); maps with constant DF are exactly z -> g exp(zX),
and the rescaling drives DF of the normalized sequence to such a constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SelectionIncompleteError, SingularMatrixError
from .expr import AffineChart, CConst, CExp, CProd, CSum, Constant, HarmonicExpr, Scaled, Sum, Z
from .field import Box, GridSpec, as_point
from .engine import (
    AFFINE_NONCONSTANT,
    EngineConfig,
    check_blowup,
)
from .maps import AFFINE_CONSTANT, HarmonicMap, _classify_component
from .metric import BallSpace, SelectBudget, zalcman_select

__all__ = [
    "TorusMap",
    "MatrixHoloMap",
    "TorusRenormReport",
    "ConstantAdjustedReport",
    "LieRenormReport",
    "expm",
    "matrix_Df",
    "torus_renormalize",
    "constant_adjusted_renormalize",
    "lie_renormalize",
    "structural_bound",
    "exp_family",
]


# ---------------------------------------------------------------------------
# torus targets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TorusMap:
    """Map into R^n / Z^n given by a lift; the lift is unique up to adding
    constants, so its differential is intrinsic."""

    lift: HarmonicMap

    @property
    def target_dim(self):
        return self.lift.target_dim

    @property
    def source_dim(self):
        return self.lift.source_dim

    def shifted_lift(self, offsets) -> "TorusMap":
        comps = tuple(
            Sum((c, Constant(float(k), c.dim))) for c, k in zip(self.lift.components, offsets)
        )
        return TorusMap(HarmonicMap(comps))

    def derivative_norms(self, pts) -> np.ndarray:
        """Frobenius norm of the lift differential per point."""
        d = self.lift.differential_grid(pts)
        return np.linalg.norm(d, axis=(1, 2))


def wrap_to_lattice(v: np.ndarray) -> np.ndarray:
    """Componentwise representative in [-1/2, 1/2): distance to the nearest
    integer translate in the quotient metric."""
    return v - np.round(v)


def _phi_blowup_select(r, centers, indices, values, config, ball_phi):
    """Shared selection loop: returns per-index (chart, eps, selection)."""
    keep = check_blowup(values, config.blowup_threshold)
    budget = SelectBudget(max_ascent=config.max_ascent)
    out = []
    for i in keep:
        k = indices[i]
        eps = values[i] ** (-1.0 / 3.0)
        tau = 1.0 + eps
        space = BallSpace(
            r,
            config.ball_radius,
            phi=ball_phi(k),
            base_resolution=config.base_resolution,
            levels=config.levels,
        )
        try:
            sel = zalcman_select(space, centers[k], tau, eps, budget)
        except SelectionIncompleteError as e:
            err = SelectionIncompleteError(
                f"selection incomplete at step {k}: {e}",
                best_candidate=e.best_candidate,
                iterations=e.iterations,
            )
            err.step_index = k
            raise err from e
        a_k = 1.0 / sel.phi_value
        chart = AffineChart(a_k, tuple(np.asarray(sel.point, dtype=float)))
        out.append((k, chart, eps, sel))
    return out


@dataclass(frozen=True)
class TorusRenormReport:
    classification: str
    derivative: tuple          # limit differential J0 (rows per target coord)
    deriv_constancy: float     # sup over probe of ||J(x) - J0||_F, final step
    quotient_residual: float   # sup distance to the affine model mod Z^n
    steps: tuple               # (index, a, b, eps) rows

    def to_json(self):
        return {
            "class": self.classification,
            "derivative": [list(r) for r in self.derivative],
            "deriv_constancy": self.deriv_constancy,
            "quotient_residual": self.quotient_residual,
            "steps": [
                {"n": n, "a": a, "b": list(b), "eps": e} for n, a, b, e in self.steps
            ],
        }


def torus_renormalize(fseq, p, indices, config: EngineConfig | None = None,
                      probe_box: Box | None = None) -> TorusRenormReport:
    """Rescale torus-valued maps whose lift-derivative norm blows up at p.

    The selection weight is the plain Frobenius norm of the lift
    differential (no damping: the quotient has no preferred scale).  The
    rescaled lifts' derivatives must converge to a constant matrix; the limit
    is the affine map x -> s(0) + J0 x modulo the lattice, and convergence is
    measured as the sup distance to the nearest lattice translate.
    """
    config = config or EngineConfig()
    indices = list(indices)
    tmaps = {k: fseq(k) for k in indices}
    n = tmaps[indices[0]].source_dim
    p = as_point(p, n)
    centers = {k: p for k in indices}
    values = [float(tmaps[k].derivative_norms(p[None, :])[0]) for k in indices]
    picked = _phi_blowup_select(
        p, centers, indices, values, config,
        ball_phi=lambda k: (lambda pts, T=tmaps[k]: T.derivative_norms(pts)),
    )
    if probe_box is None:
        probe_box = Box.cube(-1.0, 1.0, n)
    pts = GridSpec(probe_box, config.probe_resolution).points()
    zero = np.zeros((1, n))

    steps = [(k, chart.scale, chart.center, eps) for k, chart, eps, _ in picked]
    k, chart, eps, _ = picked[-1]
    resc = tmaps[k].lift.precompose(chart)
    diffs = resc.differential_grid(pts)
    J0 = resc.differential_grid(zero)[0]
    constancy = float(np.linalg.norm(diffs - J0, axis=(1, 2)).max())
    base = resc.eval_grid(zero)[0]
    model = base + pts @ J0.T
    resid = float(np.abs(wrap_to_lattice(resc.eval_grid(pts) - model)).max())
    nonconstant = float(np.linalg.norm(J0)) >= config.grad_min
    ok = resid <= config.res_max
    classification = AFFINE_NONCONSTANT if (nonconstant and ok) else (
        AFFINE_CONSTANT if ok else "Undecided"
    )
    return TorusRenormReport(
        classification=classification,
        derivative=tuple(tuple(float(v) for v in row) for row in J0),
        deriv_constancy=constancy,
        quotient_residual=resid,
        steps=tuple(steps),
    )


@dataclass(frozen=True)
class ConstantAdjustedReport:
    component_classes: tuple
    shifts: tuple              # the c_k vectors, one per step
    residuals: tuple
    steps: tuple

    def to_json(self):
        return {
            "components": list(self.component_classes),
            "shifts": [list(c) for c in self.shifts],
            "residuals": list(self.residuals),
            "steps": [
                {"n": n, "a": a, "b": list(b), "eps": e} for n, a, b, e in self.steps
            ],
        }


def constant_adjusted_renormalize(fseq, p, indices, config: EngineConfig | None = None,
                                  probe_box: Box | None = None) -> ConstantAdjustedReport:
    """Rescale vector-valued maps after subtracting runaway constants.

    The shift c_k = -f_k(b_k) anchors the rescaled-plus-shifted sequence at
    zero at the origin (the natural normalization: the limit is translation
    invariant anyway); classification then proceeds per component as for
    plain map rescaling.
    """
    config = config or EngineConfig()
    indices = list(indices)
    hmaps = {k: fseq(k) for k in indices}
    n = hmaps[indices[0]].source_dim
    p = as_point(p, n)
    centers = {k: p for k in indices}

    def dnorm(H, pts):
        return np.linalg.norm(H.differential_grid(pts), axis=(1, 2))

    values = [float(dnorm(hmaps[k], p[None, :])[0]) for k in indices]
    picked = _phi_blowup_select(
        p, centers, indices, values, config,
        ball_phi=lambda k: (lambda pts, H=hmaps[k]: dnorm(H, pts)),
    )
    if probe_box is None:
        probe_box = Box.cube(-1.0, 1.0, n)
    pts = GridSpec(probe_box, config.probe_resolution).points()
    zero = np.zeros((1, n))

    steps, shifts = [], []
    shifted_values = None
    for k, chart, eps, sel in picked:
        resc = hmaps[k].precompose(chart)
        c_k = -resc.eval_grid(zero)[0]
        shifts.append(tuple(float(v) for v in c_k))
        steps.append((k, chart.scale, chart.center, eps))
        if k == picked[-1][0]:  # classification uses the final window step
            shifted_values = resc.eval_grid(pts) + c_k

    m = hmaps[indices[0]].target_dim
    classes, residuals = [], []
    for comp in range(m):
        cls, fit, res = _classify_component([shifted_values[:, comp]], pts, config)
        classes.append(cls)
        residuals.append(res if res is not None else float("nan"))
    return ConstantAdjustedReport(
        component_classes=tuple(classes),
        shifts=tuple(shifts),
        residuals=tuple(residuals),
        steps=tuple(steps),
    )


# ---------------------------------------------------------------------------
# matrix exponential (scaling and squaring, Pade 13)
# ---------------------------------------------------------------------------

_PADE13_B = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_PADE13_THETA = 5.371920351148152


def expm(X, z: complex = 1.0) -> np.ndarray:
    """exp(z*X) by scaling-and-squaring with the degree-13 Pade approximant."""
    A = np.asarray(X, dtype=complex) * complex(z)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("expm needs a square matrix")
    norm = float(np.linalg.norm(A, 1))
    s = max(0, int(math.ceil(math.log2(norm / _PADE13_THETA))) if norm > _PADE13_THETA else 0)
    A = A / (2.0**s)
    b = _PADE13_B
    I = np.eye(n, dtype=complex)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I
    R = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    return R


# ---------------------------------------------------------------------------
# matrix-valued holomorphic maps
# ---------------------------------------------------------------------------


class MatrixHoloMap:
    """Holomorphic map C -> GL(n, C) given by entrywise expressions."""

    def __init__(self, entries):
        self.entries = tuple(tuple(row) for row in entries)
        self.n = len(self.entries)
        if any(len(row) != self.n for row in self.entries):
            raise ValueError("entries must form a square matrix")
        self._dentries = tuple(
            tuple(e.derivative() for e in row) for row in self.entries
        )

    def value(self, z: complex) -> np.ndarray:
        return np.array([[e.eval(z) for e in row] for row in self.entries], dtype=complex)

    def derivative_value(self, z: complex) -> np.ndarray:
        return np.array([[e.eval(z) for e in row] for row in self._dentries], dtype=complex)


def matrix_Df(F: MatrixHoloMap, z: complex) -> np.ndarray:
    """Logarithmic derivative F(z)^{-1} F'(z); the derivative is symbolic
    (central differences serve as the test oracle)."""
    A = F.value(z)
    if not np.all(np.isfinite(A.view(float))):
        raise SingularMatrixError(f"matrix value overflowed at z={z}", det=None)
    amax = float(np.abs(A).max())
    if amax == 0.0:
        raise SingularMatrixError(f"matrix value is zero at z={z}", det=0.0)
    # scale-free test: |det A| <= 1e-12 * ||A||^n  <=>  |det(A/amax)| <= 1e-12
    det_scaled = complex(np.linalg.det(A / amax))
    if abs(det_scaled) <= 1e-12:
        raise SingularMatrixError(f"matrix value is singular at z={z}", det=det_scaled)
    return np.linalg.solve(A, F.derivative_value(z))


def fd_matrix_derivative(F: MatrixHoloMap, z: complex, h: float = 1e-6) -> np.ndarray:
    """Central-difference entrywise derivative (independent oracle)."""
    return (F.value(z + h) - F.value(z - h)) / (2.0 * h)


@dataclass(frozen=True)
class LieRenormReport:
    g: tuple                  # anchor after normalization (the identity)
    X: tuple                  # extracted algebra element
    residual: float           # sup over probe of ||U_k(z) - exp(z X)||_F
    df_constancy: float       # sup over probe of ||DU_k(z) - X||_F
    nonconstant: bool         # ||X|| >= 1e-3
    steps: tuple

    def to_json(self):
        def cmat(M):
            return [[[v.real, v.imag] for v in row] for row in M]

        return {
            "g": cmat(self.g),
            "X": cmat(self.X),
            "residual": self.residual,
            "df_constancy": self.df_constancy,
            "nonconstant": self.nonconstant,
            "steps": [
                {"n": n, "a": a, "b": list(b), "eps": e} for n, a, b, e in self.steps
            ],
        }


def lie_renormalize(Fseq, p: complex, indices, config: EngineConfig | None = None,
                    probe_box: Box | None = None) -> LieRenormReport:
    """Rescale matrix-valued maps with blowing-up logarithmic derivative.

    Selection weight: ||DF_k||_F over a complex ball around p.  Each step
    normalizes u_k(z) = F_k(a_k z + b_k) by g_k = u_k(0)^{-1} so the
    rescaled map fixes the identity; DU_k = a_k DF_k(a_k z + b_k) has norm 1
    at 0.  X is extracted as the probe mean of DU_k (averaging the numeric
    noise); the report carries both the constancy defect of DU_k and the
    distance of U_k to z -> exp(zX).
    """
    config = config or EngineConfig()
    indices = list(indices)
    fmaps = {k: Fseq(k) for k in indices}
    p = complex(p)
    r = np.array([p.real, p.imag])
    centers = {k: r for k in indices}

    def df_norms(F, pts):
        out = np.empty(len(pts))
        for i, (x, y) in enumerate(pts):
            try:
                out[i] = np.linalg.norm(matrix_Df(F, complex(x, y)))
            except SingularMatrixError:
                out[i] = np.nan
            except OverflowError:
                out[i] = np.inf
        return out

    values = [float(df_norms(fmaps[k], r[None, :])[0]) for k in indices]
    picked = _phi_blowup_select(
        r, centers, indices, values, config,
        ball_phi=lambda k: (lambda pts, F=fmaps[k]: df_norms(F, pts)),
    )
    if probe_box is None:
        probe_box = Box.cube(-1.0, 1.0, 2)
    pts = GridSpec(probe_box, config.probe_resolution).points()
    zs = pts[:, 0] + 1j * pts[:, 1]

    steps = [(k, chart.scale, chart.center, eps) for k, chart, eps, _ in picked]
    k, chart, eps, _ = picked[-1]
    F = fmaps[k]
    a_k = chart.scale
    b_k = complex(chart.center[0], chart.center[1])
    u0 = F.value(b_k)
    amax = float(np.abs(u0).max())
    det_scaled = complex(np.linalg.det(u0 / amax)) if amax > 0 else 0.0
    if abs(det_scaled) <= 1e-12:
        raise SingularMatrixError(f"normalization is singular at step {k}", det=det_scaled)
    g_k = np.linalg.inv(u0)
    DU = np.stack([a_k * matrix_Df(F, a_k * z + b_k) for z in zs])
    X = DU.mean(axis=0)
    df_const = float(np.linalg.norm(DU - X, axis=(1, 2)).max())
    U = np.stack([g_k @ F.value(a_k * z + b_k) for z in zs])
    E = np.stack([expm(X, z) for z in zs])
    residual = float(np.linalg.norm(U - E, axis=(1, 2)).max())
    n = F.n
    return LieRenormReport(
        g=tuple(tuple(row) for row in np.eye(n, dtype=complex)),
        X=tuple(tuple(row) for row in X),
        residual=residual,
        df_constancy=df_const,
        nonconstant=bool(np.linalg.norm(X) >= 1e-3),
        steps=tuple(steps),
    )


# ---------------------------------------------------------------------------
# helpers: synthetic families and structural bounds
# ---------------------------------------------------------------------------


def exp_family(g: np.ndarray, eigvals, P: np.ndarray):
    """Builder for F_k(z) = g exp(k z X) with X = P diag(eigvals) P^{-1}.

    Entries come out as exact holomorphic expressions (sums of c*exp(lambda
    k z)), so the maps run through the standard evaluation path.
    """
    g = np.asarray(g, dtype=complex)
    P = np.asarray(P, dtype=complex)
    Pinv = np.linalg.inv(P)
    n = g.shape[0]

    def build(k):
        entries = []
        for i in range(n):
            row = []
            for j in range(n):
                terms = []
                for l, lam in enumerate(eigvals):
                    coef = complex((g @ P)[i, l] * Pinv[l, j])
                    terms.append(CProd((CConst(coef), CExp(CProd((CConst(k * lam), Z()))))))
                row.append(CSum(tuple(terms)))
            entries.append(row)
        return MatrixHoloMap(entries)

    return build


def structural_bound(e: HarmonicExpr):
    """A certified global bound, derivable only for constant constructions.

    The expression algebra cannot build a bounded nonconstant entire
    harmonic function (bounded entire solutions are constant), so only
    constants, their sums and scalings carry a structural bound.
    """
    if isinstance(e, Constant):
        return abs(e.value)
    if isinstance(e, Scaled):
        inner = structural_bound(e.inner)
        return None if inner is None else abs(e.factor) * inner
    if isinstance(e, Sum):
        parts = [structural_bound(t) for t in e.terms]
        return None if any(p is None for p in parts) else sum(parts)
    return None
