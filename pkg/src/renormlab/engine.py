"""Rescaling engine: turn a derivative blow-up into normalized charts and
classify the limiting behaviour of the rescaled functions.

Given functions f_n and points r_n -> r with damped derivative blowing up at
r_n, each step selects a nearby center b_n where the damped derivative is,
up to a factor tau_n = 1 + eps_n, maximal on a ball (eps_n is wired to
phi^(-1/3) of the centered value, the choice that makes both eps_n -> 0 and
the certified radius grow).  With a_n = 1 / phi(b_n), the rescaled function
g_n(x) = f_n(a_n x + b_n) has damped derivative exactly 1 at the origin and
at most 1 + eps_n (plus quantified sampling slack) on the probe box.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import PreconditionError, SelectionIncompleteError
from .expr import AffineChart, HarmonicExpr
from .field import AffineFunc, Box, GridSpec, affine_fit, as_point, tilde_derivative, tilde_grid
from .metric import BallSpace, SelectBudget, SelectionResult, zalcman_select

__all__ = [
    "EngineConfig",
    "RenormStep",
    "RenormTrace",
    "ConvergenceReport",
    "make_rescaling",
    "limit_probe",
    "renormalize_entire",
    "AFFINE_NONCONSTANT",
    "CONSTANT_FINITE",
    "PLUS_INFINITY",
    "MINUS_INFINITY",
    "UNDECIDED",
]

AFFINE_NONCONSTANT = "AffineNonconstant"
CONSTANT_FINITE = "ConstantFinite"
PLUS_INFINITY = "PlusInfinity"
MINUS_INFINITY = "MinusInfinity"
UNDECIDED = "Undecided"


@dataclass(frozen=True)
class EngineConfig:
    ball_radius: float = 1.0        # radius of the selection ball around the base point
    base_resolution: int = 9        # lattice resolution of the coarsest sampling level
    levels: int = 3                 # nested refinement levels for sampled certification
    max_ascent: int = 200
    blowup_threshold: float = 10.0  # steps start once the centered value crosses this
    probe_resolution: int = 21
    res_max: float = 1e-2           # affine classification: max sup-residual
    grad_min: float = 0.1           # affine classification: min fitted gradient norm
    div_threshold: float = 1e3      # +/- infinity classification cutoff
    guard_abs: float = 1e6          # never classify as finite beyond this magnitude
    index_stride: int = 0           # 0 = auto (chosen from target_phi)
    target_phi: float = 4000.0      # auto-stride aims at this centered blow-up value


@dataclass(frozen=True)
class RenormStep:
    """One rescaling step: chart x -> a*x + b plus its diagnostics."""

    index: int
    chart: AffineChart
    epsilon: float
    phi_center: float       # damped derivative of f_n at the selected center
    gtilde0: float          # damped derivative of the rescaled function at 0
    sup_gtilde: float       # sup over the probe grid
    delta_grid: float       # first-order sampling slack a_n * L_est * h_cover
    selection: SelectionResult
    rescaled: HarmonicExpr = dc_field(repr=False, compare=False, default=None)
    global_chart: AffineChart | None = None

    @property
    def scale(self) -> float:
        return self.chart.scale

    @property
    def center(self):
        return self.chart.center

    def to_json(self):
        out = {
            "n": self.index,
            "a": self.chart.scale,
            "b": list(self.chart.center),
            "eps": self.epsilon,
            "gtilde0": self.gtilde0,
            "sup_bound": self.sup_gtilde,
            "delta_grid": self.delta_grid,
            "selection": self.selection.to_json(),
        }
        if self.global_chart is not None:
            out["A"] = self.global_chart.scale
            out["B"] = list(self.global_chart.center)
        return out


@dataclass(frozen=True)
class RenormTrace:
    steps: tuple
    base_point: tuple
    probe_box: Box
    probe_resolution: int

    def __len__(self):
        return len(self.steps)

    def to_json(self):
        return {
            "base_point": list(self.base_point),
            "steps": [s.to_json() for s in self.steps],
        }


@dataclass(frozen=True)
class ConvergenceReport:
    classification: str
    affine: AffineFunc | None
    residuals: tuple
    gaps: tuple
    grid_max_abs: tuple
    window: tuple

    def to_json(self):
        return {
            "class": self.classification,
            "affine": None
            if self.affine is None
            else {"c": self.affine.constant, "v": list(self.affine.gradient)},
            "residuals": list(self.residuals),
            "gaps": list(self.gaps),
            "grid_max_abs": list(self.grid_max_abs),
            "window": list(self.window),
        }


def _probe_grid(box: Box, resolution: int) -> np.ndarray:
    return GridSpec(box, resolution).points()


def check_blowup(values, threshold: float):
    """Indices whose centered value exceeds the threshold, required to be a
    strictly increasing tail; raises otherwise."""
    values = list(values)
    above = [i for i, v in enumerate(values) if v > threshold]
    if not above:
        raise PreconditionError(
            f"derivative values never exceed the blow-up threshold {threshold}: max={max(values)}"
        )
    i0 = above[0]
    tail = values[i0:]
    if any(b <= a for a, b in zip(tail, tail[1:])):
        raise PreconditionError(
            "derivative values are not strictly increasing beyond the threshold"
        )
    return list(range(i0, len(values)))


def make_rescaling(
    fseq,
    r,
    rseq,
    indices,
    config: EngineConfig | None = None,
    probe_box: Box | None = None,
) -> RenormTrace:
    """Build the rescaling trace for f_n around r.

    ``fseq``/``rseq`` map an index to the function / drifting point; ``indices``
    is the increasing index list to use.  Only indices past the blow-up
    threshold produce steps (below it the normalized bound cannot cover a
    unit probe box).  Every step records gtilde0 (construction forces 1) and
    the probe-grid sup with its sampling slack.
    """
    config = config or EngineConfig()
    indices = list(indices)
    if not indices:
        raise PreconditionError("empty index list")
    exprs = {n: fseq(n) for n in indices}
    dim = exprs[indices[0]].dim
    r = as_point(r, dim)
    centers = {n: as_point(rseq(n), dim) for n in indices}
    values = [tilde_derivative(exprs[n], centers[n]) for n in indices]
    keep = check_blowup(values, config.blowup_threshold)

    if probe_box is None:
        probe_box = Box.cube(-1.0, 1.0, dim)
    probe = _probe_grid(probe_box, config.probe_resolution)

    steps = []
    budget = SelectBudget(max_ascent=config.max_ascent)
    for k in keep:
        n = indices[k]
        f_n = exprs[n]
        phi_centered = values[k]
        eps_n = phi_centered ** (-1.0 / 3.0)
        tau_n = 1.0 + eps_n
        space = BallSpace(
            r,
            config.ball_radius,
            phi=lambda pts, f=f_n: tilde_grid(f, pts),
            base_resolution=config.base_resolution,
            levels=config.levels,
        )
        try:
            sel = zalcman_select(space, centers[n], tau_n, eps_n, budget)
        except SelectionIncompleteError as e:
            err = SelectionIncompleteError(
                f"selection incomplete at step {n}: {e}",
                best_candidate=e.best_candidate,
                iterations=e.iterations,
            )
            err.step_index = n
            raise err from e
        b_n = np.asarray(sel.point, dtype=float)
        a_n = 1.0 / sel.phi_value
        chart = AffineChart(a_n, tuple(b_n))
        g_n = f_n.precompose(chart)
        gtilde0 = tilde_derivative(g_n, np.zeros(dim))
        sup_g = float(tilde_grid(g_n, probe).max())
        delta = a_n * sel.lipschitz_est * sel.covering_radius
        steps.append(
            RenormStep(
                index=n,
                chart=chart,
                epsilon=eps_n,
                phi_center=sel.phi_value,
                gtilde0=gtilde0,
                sup_gtilde=sup_g,
                delta_grid=delta,
                selection=sel,
                rescaled=g_n,
            )
        )
    return RenormTrace(
        steps=tuple(steps),
        base_point=tuple(r),
        probe_box=probe_box,
        probe_resolution=config.probe_resolution,
    )


def limit_probe(
    trace: RenormTrace,
    probe: GridSpec | None = None,
    window=None,
    config: EngineConfig | None = None,
) -> ConvergenceReport:
    """Classify the limiting behaviour of the rescaled functions on a probe grid.

    AffineNonconstant / ConstantFinite require the final affine-fit residual
    to drop under ``res_max`` (gradient norm separates the two);
    PlusInfinity / MinusInfinity require monotone divergence beyond the
    threshold; everything else stays Undecided.  No finite classification is
    ever produced when a grid value exceeds ``guard_abs``.
    """
    config = config or EngineConfig()
    if len(trace) == 0:
        raise PreconditionError("empty trace")
    if probe is None:
        probe = GridSpec(trace.probe_box, trace.probe_resolution)
    pts = probe.points()
    if not probe.box.contains(np.zeros(pts.shape[1])):
        raise PreconditionError("probe box must contain the origin")

    steps = list(trace.steps)
    if window is None:
        window = list(range(len(steps)))
    else:
        window = sorted(window)
    chosen = [steps[i] for i in window]

    vals, fits, residuals = [], [], []
    for s in chosen:
        v = s.rescaled.eval_grid(pts)
        fit, res = affine_fit(v, pts)
        vals.append(v)
        fits.append(fit)
        residuals.append(res)
    gaps = [float(np.max(np.abs(b - a))) for a, b in zip(vals, vals[1:])]
    max_abs = [float(np.max(np.abs(v))) for v in vals]

    mins = [float(v.min()) for v in vals]
    maxs = [float(v.max()) for v in vals]
    last = vals[-1]
    fit, res = fits[-1], residuals[-1]

    classification = UNDECIDED
    affine = None
    if mins[-1] > config.div_threshold and all(b > a for a, b in zip(mins, mins[1:])):
        classification = PLUS_INFINITY
    elif maxs[-1] < -config.div_threshold and all(b < a for a, b in zip(maxs, maxs[1:])):
        classification = MINUS_INFINITY
    elif max_abs[-1] <= config.guard_abs and res <= config.res_max:
        if fit.gradient_norm() >= config.grad_min:
            classification = AFFINE_NONCONSTANT
            affine = fit
        else:
            classification = CONSTANT_FINITE
            affine = fit
    return ConvergenceReport(
        classification=classification,
        affine=affine,
        residuals=tuple(residuals),
        gaps=tuple(gaps),
        grid_max_abs=tuple(max_abs),
        window=tuple(window),
    )


def certify_step(f_n: HarmonicExpr, step: RenormStep, base_point, config: EngineConfig, base_resolution: int | None = None):
    """Re-measure the sampling slack of an existing step at a given resolution.

    Samples the certified ball around the step's selected center (the walk is
    not re-run) and returns the first-order slack delta = a * L_est * h_cover
    together with the sampled sup of the damped derivative.  Doubling the
    resolution halves h_cover, so delta halves up to the stability of L_est.
    """
    res = base_resolution or config.base_resolution
    space = BallSpace(
        np.asarray(base_point, dtype=float),
        config.ball_radius,
        phi=lambda pts: tilde_grid(f_n, pts),
        base_resolution=res,
        levels=1,
    )
    b_n = np.asarray(step.chart.center, dtype=float)
    radius = 1.0 / (step.epsilon * step.phi_center)
    cands = space.candidates_within(b_n, radius, 0)
    vals = space.phi_many(cands)
    info = space.sampling_info(b_n, radius, 0)
    h_cov = float(info["covering_radius"])
    lip = space.lipschitz_estimate(b_n, radius)
    delta = step.chart.scale * lip * h_cov
    return {
        "delta_grid": delta,
        "lipschitz_est": lip,
        "covering_radius": h_cov,
        "sup_phi": float(vals.max()),
        "n_samples": int(len(cands)),
    }


def auto_stride(f: HarmonicExpr, p, count: int, config: EngineConfig) -> int:
    """Stride c so the last index reaches the target centered blow-up value."""
    t0 = tilde_derivative(f, p)
    if t0 <= 0:
        raise PreconditionError("gradient vanishes at the seed point")
    return max(1, int(np.ceil(config.target_phi / (count * t0))))


def renormalize_entire(
    f: HarmonicExpr,
    p,
    count: int = 30,
    config: EngineConfig | None = None,
    probe_box: Box | None = None,
):
    """Rescale the dilation family f(p + (c*n) x), n = 1..count, at the seed p.

    Requires a nonvanishing gradient at p.  The stride c is taken from the
    config (``index_stride``) or chosen automatically so the centered blow-up
    value reaches ``target_phi`` by the last index; on success the trace steps
    also carry charts in the original coordinates (x -> A_n x + B_n).
    """
    config = config or EngineConfig()
    p = as_point(p, f.dim)
    g0 = np.linalg.norm([q.eval(p) for q in f.gradient_exprs()])
    if not g0 > 0:
        raise PreconditionError("gradient of f vanishes at the seed point")
    stride = config.index_stride or auto_stride(f, p, count, config)

    def fseq(n):
        return f.precompose(AffineChart(float(n * stride), tuple(p)))

    zero = np.zeros(f.dim)
    trace = make_rescaling(fseq, zero, lambda n: zero, range(1, count + 1), config, probe_box)
    steps = []
    for s in trace.steps:
        big = float(s.index * stride)
        global_chart = AffineChart(big * s.chart.scale, tuple(p + big * np.asarray(s.chart.center)))
        steps.append(
            RenormStep(
                index=s.index,
                chart=s.chart,
                epsilon=s.epsilon,
                phi_center=s.phi_center,
                gtilde0=s.gtilde0,
                sup_gtilde=s.sup_gtilde,
                delta_grid=s.delta_grid,
                selection=s.selection,
                rescaled=s.rescaled,
                global_chart=global_chart,
            )
        )
    trace = RenormTrace(tuple(steps), trace.base_point, trace.probe_box, trace.probe_resolution)
    report = limit_probe(trace, config=config)
    return trace, report
