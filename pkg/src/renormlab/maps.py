"""Harmonic maps between Euclidean spaces: Jacobian identities, rank
degeneracy, holomorphy up to affine recombination, and component-wise
rescaling limits.

For plane-to-plane maps built from holomorphic parents (Re f, Re g) the
Jacobian determinant is Im(f' * conj(g')); everywhere-nonnegative samples
feed the proportionality check f' = c*g' that witnesses holomorphy up to an
affine change on the target.  The map-level derivative used for rescaling is
the sum of the component damped derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import PreconditionError, SelectionIncompleteError
from .expr import AffineChart, HoloExpr, RealPart
from .field import Box, GridSpec, affine_fit, as_point, gradient_grid, tilde_grid
from .engine import (
    AFFINE_NONCONSTANT,
    CONSTANT_FINITE,
    MINUS_INFINITY,
    PLUS_INFINITY,
    UNDECIDED,
    EngineConfig,
    check_blowup,
)
from .metric import BallSpace, SelectBudget, zalcman_select
from .domains import DomainExpr, contains_point

__all__ = [
    "HarmonicMap",
    "MapRenormStep",
    "MapRenormTrace",
    "MapRenormReport",
    "HolomorphyWitness",
    "jacobian",
    "rank_degenerate_probe",
    "holomorphy_witness",
    "map_renormalize",
    "image_probe",
    "AFFINE_CONSTANT",
]

AFFINE_CONSTANT = "AffineConstant"

_SCALAR_TO_COMPONENT = {CONSTANT_FINITE: AFFINE_CONSTANT}


@dataclass(frozen=True)
class HarmonicMap:
    """Tuple of harmonic components on a common source R^n."""

    components: tuple
    holo_parents: tuple | None = None  # (f, g) when built as (Re f, Re g)

    def __post_init__(self):
        if not self.components:
            raise ValueError("a map needs at least one component")
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise ValueError("components must share the source dimension")

    @classmethod
    def from_holomorphic_pair(cls, f: HoloExpr, g: HoloExpr) -> "HarmonicMap":
        return cls(components=(RealPart(f), RealPart(g)), holo_parents=(f, g))

    @property
    def source_dim(self):
        return self.components[0].dim

    @property
    def target_dim(self):
        return len(self.components)

    def eval_grid(self, pts) -> np.ndarray:
        """Image points, shape (N, target_dim)."""
        return np.stack([c.eval_grid(pts) for c in self.components], axis=-1)

    def tilde_grid(self, pts) -> np.ndarray:
        """Map-level damped derivative: the sum over components."""
        out = tilde_grid(self.components[0], pts)
        for c in self.components[1:]:
            out = out + tilde_grid(c, pts)
        return out

    def differential_grid(self, pts) -> np.ndarray:
        """Differential matrices, shape (N, target_dim, source_dim)."""
        return np.stack([gradient_grid(c, pts) for c in self.components], axis=1)

    def precompose(self, chart: AffineChart) -> "HarmonicMap":
        return HarmonicMap(tuple(c.precompose(chart) for c in self.components))


def jacobian(H: HarmonicMap, z: complex) -> float:
    """Im(f'(z) * conj(g'(z))) for a holomorphic-pair map; equals the
    determinant of the real 2x2 differential."""
    if H.holo_parents is None:
        raise PreconditionError("jacobian needs the holomorphic parents (Re f, Re g)")
    f, g = H.holo_parents
    return float((f.derivative().eval(z) * g.derivative().eval(z).conjugate()).imag)


def _fd_jacobian(H: HarmonicMap, z: complex, h: float = 1e-6) -> float:
    """Finite-difference determinant of the real differential (test oracle)."""
    x = np.array([z.real, z.imag])
    cols = []
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        up = np.array([c.eval(x + e) for c in H.components])
        dn = np.array([c.eval(x - e) for c in H.components])
        cols.append((up - dn) / (2 * h))
    return float(np.linalg.det(np.stack(cols, axis=-1)))


@dataclass(frozen=True)
class RankProbeResult:
    degenerate: bool
    witness_point: tuple | None = None       # a full-rank sample
    witness_minor: float | None = None
    line_point: tuple | None = None          # total-least-squares image line
    line_direction: tuple | None = None
    line_residual: float | None = None
    single_point_image: bool = False

    def to_json(self):
        return {
            "degenerate": self.degenerate,
            "witness": None
            if self.witness_point is None
            else {"point": list(self.witness_point), "minor": self.witness_minor},
            "line": None
            if self.line_point is None
            else {
                "point": list(self.line_point),
                "direction": list(self.line_direction),
                "residual": self.line_residual,
            },
            "single_point_image": self.single_point_image,
        }


def _tls_line(cloud: np.ndarray):
    """Total-least-squares line through a point cloud (principal axis)."""
    center = cloud.mean(axis=0)
    centered = cloud - center
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    direction = vt[0]
    resid = centered - np.outer(centered @ direction, direction)
    return center, direction, float(np.linalg.norm(resid, axis=1).max())


def rank_degenerate_probe(H: HarmonicMap, grid: GridSpec, tol: float = 1e-9) -> RankProbeResult:
    """If every sampled 2x2 minor of the differential vanishes, the image is
    expected to sit on a line: fit it and report the sup distance; otherwise
    return a full-rank witness."""
    pts = grid.points()
    diffs = H.differential_grid(pts)  # (N, m, n)
    m, n = diffs.shape[1], diffs.shape[2]
    worst = (0.0, None)
    for i in range(m):
        for j in range(i + 1, m):
            for k in range(n):
                for l in range(k + 1, n):
                    minors = diffs[:, i, k] * diffs[:, j, l] - diffs[:, i, l] * diffs[:, j, k]
                    idx = int(np.argmax(np.abs(minors)))
                    if abs(minors[idx]) > abs(worst[0]):
                        worst = (float(minors[idx]), tuple(pts[idx]))
    if abs(worst[0]) > tol:
        return RankProbeResult(degenerate=False, witness_point=worst[1], witness_minor=worst[0])
    cloud = H.eval_grid(pts)
    spread = float(np.linalg.norm(cloud - cloud[0], axis=1).max())
    if spread <= tol:
        return RankProbeResult(degenerate=True, single_point_image=True,
                               line_point=tuple(cloud[0]), line_direction=(0.0,) * cloud.shape[1],
                               line_residual=0.0)
    center, direction, resid = _tls_line(cloud)
    return RankProbeResult(
        degenerate=True,
        line_point=tuple(center),
        line_direction=tuple(direction),
        line_residual=resid,
    )


@dataclass(frozen=True)
class HolomorphyWitness:
    c: complex
    residual: float            # sup over samples of |f' - c*g'|
    matrix: tuple              # 2x2 real, sends (Re g, Im g) to (Re f, Re g)
    grid_note: str = "nonnegativity holds on the sampled grid only"

    def to_json(self):
        return {
            "c": [self.c.real, self.c.imag],
            "residual": self.residual,
            "matrix": [list(row) for row in self.matrix],
            "note": self.grid_note,
        }


@dataclass(frozen=True)
class NonPositiveJacobian:
    witness_point: tuple
    value: float

    def to_json(self):
        return {"witness": {"point": list(self.witness_point), "jacobian": self.value}}


def holomorphy_witness(H: HarmonicMap, grid: GridSpec, tol: float = 1e-9):
    """With everywhere-nonnegative sampled Jacobian, estimate the constant of
    proportionality c = f'/g' at the strongest sample and verify it globally
    on the grid; a negative sample short-circuits with the witness."""
    if H.holo_parents is None:
        raise PreconditionError("holomorphy check needs the holomorphic parents")
    f, g = H.holo_parents
    fd, gd = f.derivative(), g.derivative()
    pts = grid.points()
    zs = pts[:, 0] + 1j * pts[:, 1]
    fvals = np.array([fd.eval(z) for z in zs])
    gvals = np.array([gd.eval(z) for z in zs])
    if not np.any(np.abs(gvals) > 0):
        raise PreconditionError("g is constant on the grid (g' vanishes everywhere)")
    jac = (fvals * np.conj(gvals)).imag
    i_bad = int(np.argmin(jac))
    if jac[i_bad] < -tol:
        return NonPositiveJacobian(witness_point=tuple(pts[i_bad]), value=float(jac[i_bad]))
    i0 = int(np.argmax(np.abs(gvals)))
    c = complex(fvals[i0] / gvals[i0])
    residual = float(np.max(np.abs(fvals - c * gvals)))
    # f = c*g + const gives Re f = Re(c) Re g - Im(c) Im g + const
    matrix = ((c.real, -c.imag), (1.0, 0.0))
    return HolomorphyWitness(c=c, residual=residual, matrix=matrix)


# ---------------------------------------------------------------------------
# map rescaling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MapRenormStep:
    index: int
    chart: AffineChart
    epsilon: float
    phi_center: float
    mtilde0: float
    rescaled: HarmonicMap = dc_field(repr=False, compare=False, default=None)

    def to_json(self):
        return {
            "n": self.index,
            "a": self.chart.scale,
            "b": list(self.chart.center),
            "eps": self.epsilon,
            "gtilde0": self.mtilde0,
        }


@dataclass(frozen=True)
class MapRenormTrace:
    steps: tuple
    base_point: tuple

    def __len__(self):
        return len(self.steps)

    def to_json(self):
        return {"base_point": list(self.base_point), "steps": [s.to_json() for s in self.steps]}


@dataclass(frozen=True)
class MapRenormReport:
    component_classes: tuple
    guarantee: bool            # at least one component is AffineNonconstant
    residuals: tuple           # per component, final step
    affines: tuple             # per component AffineFunc or None

    def to_json(self):
        return {
            "components": list(self.component_classes),
            "guarantee": self.guarantee,
            "residuals": list(self.residuals),
            "affine": [
                None if a is None else {"c": a.constant, "v": list(a.gradient)}
                for a in self.affines
            ],
        }


def _classify_component(values_per_step, pts, config: EngineConfig):
    mins = [float(v.min()) for v in values_per_step]
    maxs = [float(v.max()) for v in values_per_step]
    last = values_per_step[-1]
    if mins[-1] > config.div_threshold and all(b > a for a, b in zip(mins, mins[1:])):
        return PLUS_INFINITY, None, None
    if maxs[-1] < -config.div_threshold and all(b < a for a, b in zip(maxs, maxs[1:])):
        return MINUS_INFINITY, None, None
    if float(np.max(np.abs(last))) > config.guard_abs:
        return UNDECIDED, None, None
    fit, res = affine_fit(last, pts)
    if res <= config.res_max:
        if fit.gradient_norm() >= config.grad_min:
            return AFFINE_NONCONSTANT, fit, res
        return AFFINE_CONSTANT, fit, res
    return UNDECIDED, None, res


def map_renormalize(
    Hseq,
    r,
    rseq,
    indices,
    config: EngineConfig | None = None,
    probe_box: Box | None = None,
):
    """Rescale a sequence of harmonic maps whose summed damped derivative
    blows up at drifting points; classify each component of the limit.

    The selection weight is the map-level damped derivative; the rescaled
    maps have weight exactly 1 at the origin.  Components classify as affine
    (nonconstant or constant) via fit residuals, as +/-infinity via monotone
    divergence, or stay Undecided; at least one AffineNonconstant component
    is expected and recorded as the guarantee flag.
    """
    config = config or EngineConfig()
    indices = list(indices)
    maps = {k: Hseq(k) for k in indices}
    n = maps[indices[0]].source_dim
    r = as_point(r, n)
    centers = {k: as_point(rseq(k), n) for k in indices}
    values = [float(maps[k].tilde_grid(centers[k][None, :])[0]) for k in indices]
    keep = check_blowup(values, config.blowup_threshold)

    if probe_box is None:
        probe_box = Box.cube(-1.0, 1.0, n)
    pts = GridSpec(probe_box, config.probe_resolution).points()

    steps = []
    budget = SelectBudget(max_ascent=config.max_ascent)
    for i in keep:
        k = indices[i]
        Hk = maps[k]
        phi_centered = values[i]
        eps = phi_centered ** (-1.0 / 3.0)
        tau = 1.0 + eps
        space = BallSpace(
            r,
            config.ball_radius,
            phi=lambda q, H=Hk: H.tilde_grid(q),
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
        resc = Hk.precompose(chart)
        mt0 = float(resc.tilde_grid(np.zeros((1, n)))[0])
        steps.append(
            MapRenormStep(index=k, chart=chart, epsilon=eps, phi_center=sel.phi_value,
                          mtilde0=mt0, rescaled=resc)
        )

    trace = MapRenormTrace(steps=tuple(steps), base_point=tuple(r))
    m = maps[indices[0]].target_dim
    classes, affines, residuals = [], [], []
    for comp in range(m):
        vals = [s.rescaled.components[comp].eval_grid(pts) for s in steps]
        cls, fit, res = _classify_component(vals, pts, config)
        classes.append(cls)
        affines.append(fit)
        residuals.append(res if res is not None else float("nan"))
    report = MapRenormReport(
        component_classes=tuple(classes),
        guarantee=AFFINE_NONCONSTANT in classes,
        residuals=tuple(residuals),
        affines=tuple(affines),
    )
    return trace, report


# ---------------------------------------------------------------------------
# image probing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ImageProbeReport:
    all_inside: bool
    n_samples: int
    violations: tuple          # (source point, image point)
    functional_name: str | None
    functional_min: float | None
    functional_max: float | None

    def to_json(self):
        return {
            "all_inside": self.all_inside,
            "n_samples": self.n_samples,
            "violations": [
                {"source": list(s), "image": list(v)} for s, v in self.violations
            ],
            "functional": None
            if self.functional_name is None
            else {
                "name": self.functional_name,
                "min": self.functional_min,
                "max": self.functional_max,
            },
        }


_FUNCTIONALS = {
    "product": ("product", lambda img: img[:, 0] * img[:, 1]),
    "norm": ("norm", lambda img: np.linalg.norm(img, axis=1)),
}


def image_probe(H: HarmonicMap, samples, d: DomainExpr | None = None, functional=None) -> ImageProbeReport:
    """Check H(samples) against a target region pointwise and track the range
    of a configured functional of the image (e.g. the coordinate product)."""
    pts = np.asarray(samples, dtype=float)
    img = H.eval_grid(pts)
    violations = []
    if d is not None:
        for s, v in zip(pts, img):
            if not contains_point(d, v):
                violations.append((tuple(s), tuple(v)))
    name, fmin, fmax = None, None, None
    if functional is not None:
        if isinstance(functional, str):
            name, fn = _FUNCTIONALS[functional]
        else:
            name, fn = getattr(functional, "__name__", "custom"), functional
        vals = np.asarray(fn(img), dtype=float)
        fmin, fmax = float(vals.min()), float(vals.max())
    return ImageProbeReport(
        all_inside=not violations,
        n_samples=len(pts),
        violations=tuple(violations),
        functional_name=name,
        functional_min=fmin,
        functional_max=fmax,
    )
