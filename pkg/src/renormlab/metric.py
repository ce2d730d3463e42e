"""Metric-space views used by the point-selection step of the rescaling engine.

Two concrete carriers:

* ``FiniteMetricSpace``: an explicit finite point set; selection conditions
  are certified by full enumeration.
* ``BallSpace``: a closed Euclidean ball in R^m sampled on nested lattices
  (default 3 refinement levels); certification is relative to the samples and
  the result reports the sampling density used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, SelectionIncompleteError

__all__ = ["FiniteMetricSpace", "BallSpace", "SelectBudget", "SelectionResult", "zalcman_select"]


class FiniteMetricSpace:
    """Finite point set with an arbitrary metric and a positive weight phi.

    Handles are integer indices into the point list.
    """

    mode = "finite"
    levels = 1

    def __init__(self, points, dist, phi):
        self.points = list(points)
        if not self.points:
            raise ValueError("empty point set")
        self._dist = dist
        self._phi = phi

    def start_handle(self, p):
        for i, q in enumerate(self.points):
            if q is p or _points_equal(q, p):
                return i
        raise ValueError("start point not in space")

    def phi(self, h) -> float:
        return float(self._phi(self.points[h]))

    def phi_many(self, handles):
        return np.array([self.phi(h) for h in handles])

    def distance_h(self, a, b) -> float:
        return float(self._dist(self.points[a], self.points[b]))

    def candidates_within(self, center, radius: float, level: int):
        return [i for i in range(len(self.points)) if self.distance_h(center, i) <= radius]

    def tie_key(self, center, h):
        return (self.distance_h(center, h), h)

    def sampling_info(self, center, radius, level):
        return {"mode": "finite", "spacing": 0.0, "covering_radius": 0.0}

    def resolve(self, h):
        return self.points[h]

    def lipschitz_estimate(self, h, radius):
        return 0.0


def _points_equal(a, b):
    try:
        return bool(np.all(np.asarray(a) == np.asarray(b)))
    except Exception:
        return a == b


class BallSpace:
    """Closed ball B(center, radius) in R^m with Euclidean distance.

    ``phi`` is a batch callable mapping an (N, m) array to N values; it must
    also be evaluable slightly outside the ball (used for the local Lipschitz
    estimate that quantifies certification slack).  Handles are points.
    """

    mode = "sampled"

    def __init__(self, center, radius: float, phi, base_resolution: int = 9, levels: int = 3):
        self.center = np.asarray(center, dtype=float)
        if radius <= 0:
            raise ValueError("ball radius must be positive")
        self.radius = float(radius)
        self.phi_batch = phi
        if base_resolution < 3:
            raise ValueError("base_resolution must be at least 3")
        self.base_resolution = int(base_resolution)
        self.levels = int(levels)

    @property
    def dim(self):
        return self.center.size

    def start_handle(self, p):
        p = np.asarray(p, dtype=float)
        if np.linalg.norm(p - self.center) > self.radius + 1e-12:
            raise PreconditionError("start point lies outside the space")
        return p

    def phi(self, h) -> float:
        return float(self.phi_batch(np.asarray(h, dtype=float)[None, :])[0])

    def phi_many(self, handles):
        return np.asarray(self.phi_batch(handles), dtype=float)

    def distance_h(self, a, b) -> float:
        return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))

    def _resolution(self, level: int) -> int:
        return (self.base_resolution - 1) * 2**level + 1

    def candidates_within(self, center, radius: float, level: int) -> np.ndarray:
        """Cube lattice clipped to both closed balls; the center is always sampled."""
        center = np.asarray(center, dtype=float)
        res = self._resolution(level)
        axes = [np.linspace(c - radius, c + radius, res) for c in center]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        keep = np.linalg.norm(pts - center, axis=1) <= radius
        keep &= np.linalg.norm(pts - self.center, axis=1) <= self.radius
        return np.vstack([center[None, :], pts[keep]])

    def tie_key(self, center, h):
        return (self.distance_h(center, h), tuple(np.asarray(h, dtype=float)))

    def sampling_info(self, center, radius: float, level: int):
        res = self._resolution(level)
        spacing = 2.0 * radius / (res - 1)
        return {
            "mode": "sampled",
            "spacing": spacing,
            "covering_radius": spacing * float(np.sqrt(self.dim)) / 2.0,
            "resolution": res,
        }

    def resolve(self, h):
        return np.asarray(h, dtype=float)

    def lipschitz_estimate(self, h, radius: float) -> float:
        """Local slope scale of phi at the point: max of central-difference
        |grad phi| over dyadic steps radius/8 .. radius/256.

        Independent of any sampling resolution, so the first-order slack
        L * h_cover halves exactly when the lattice doubles.
        """
        q = np.asarray(h, dtype=float)
        m = q.size
        best = 0.0
        for k in range(3, 9):
            step = max(radius * 0.5**k, 1e-12)
            shifts = np.vstack([np.eye(m) * step, -np.eye(m) * step])
            vals = self.phi_batch(q[None, :] + shifts)
            g = (vals[:m] - vals[m:]) / (2.0 * step)
            g = g[np.isfinite(g)]
            if g.size:
                best = max(best, float(np.linalg.norm(g)))
        return best


def check_metric_axioms(space, rng=None, n_triples: int = 200):
    """Verify symmetry, nonnegativity, and the triangle inequality on sampled
    triples (diagnostic for user-supplied metrics; raises on violation)."""
    rng = rng or np.random.default_rng(0)
    if isinstance(space, FiniteMetricSpace):
        n = len(space.points)
        samples = [tuple(rng.integers(0, n, size=3)) for _ in range(n_triples)]
        dist = space.distance_h
    else:
        def draw():
            while True:
                x = space.center + rng.uniform(-space.radius, space.radius, size=space.dim)
                if np.linalg.norm(x - space.center) <= space.radius:
                    return x

        samples = [(draw(), draw(), draw()) for _ in range(n_triples)]
        dist = space.distance_h
    for a, b, c in samples:
        dab, dba = dist(a, b), dist(b, a)
        if not (dab >= 0 and abs(dab - dba) <= 1e-9 * max(1.0, dab)):
            raise PreconditionError(f"distance is not a symmetric nonnegative form: {dab} vs {dba}")
        if dist(a, c) > dab + dist(b, c) + 1e-9:
            raise PreconditionError("triangle inequality fails on a sampled triple")


@dataclass(frozen=True)
class SelectBudget:
    max_ascent: int = 200
    max_candidates: int = 2_000_000


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of the selection walk, with its certification details."""

    point: object
    phi_value: float
    ascent_steps: int
    mode: str
    n_checked: int
    spacing: float
    covering_radius: float
    lipschitz_est: float
    start_distance: float
    distance_bound: float

    def to_json(self):
        p = np.atleast_1d(np.asarray(self.point, dtype=float))
        return {
            "point": [float(v) for v in p],
            "phi": self.phi_value,
            "ascent_steps": self.ascent_steps,
            "mode": self.mode,
            "n_checked": self.n_checked,
            "spacing": self.spacing,
            "covering_radius": self.covering_radius,
            "lipschitz_est": self.lipschitz_est,
        }


def zalcman_select(space, p, tau: float, eps: float, budget: SelectBudget | None = None) -> SelectionResult:
    """Select q near p with phi(q) >= phi(p) and phi <= tau*phi(q) on the
    ball of radius 1/(eps*phi(q)) around q (checked on the space's points).

    Constructive walk: starting from p, while the bound fails, jump to a
    strict violator inside the current ball (ties broken by distance from the
    current point, then lexicographically).  phi grows geometrically along
    the walk, which forces termination with
    d(p, q) <= tau / (eps * phi(p) * (tau - 1)).

    On a finite space the certificate is an exact enumeration; on a sampled
    ball it holds on the samples and the result records the density.
    """
    if tau <= 1:
        raise PreconditionError(f"tau must exceed 1, got {tau}")
    if eps <= 0:
        raise PreconditionError(f"eps must be positive, got {eps}")
    budget = budget or SelectBudget()

    start = space.start_handle(p)
    current = start
    phi_c = space.phi(current)
    if not (phi_c > 0):
        raise PreconditionError(f"phi(p) must be positive, got {phi_c}")
    phi_p = phi_c

    n_checked = 0
    info = {"spacing": 0.0, "covering_radius": 0.0}
    for step in range(budget.max_ascent):
        radius = 1.0 / (eps * phi_c)
        violator = None
        for level in range(space.levels):
            cands = space.candidates_within(current, radius, level)
            n_checked += len(cands)
            if n_checked > budget.max_candidates:
                raise SelectionIncompleteError(
                    "candidate budget exhausted",
                    best_candidate=space.resolve(current),
                    iterations=step,
                )
            vals = space.phi_many(cands)
            mask = vals > tau * phi_c
            if np.any(mask):
                idxs = np.flatnonzero(mask)
                picked = min(idxs, key=lambda k: space.tie_key(current, cands[k]))
                violator = cands[picked]
                break
            info = space.sampling_info(current, radius, level)

        if violator is not None:
            current = violator
            phi_c = space.phi(current)
            continue

        d_pq = space.distance_h(start, current)
        bound = tau / (eps * phi_p * (tau - 1.0))
        if d_pq > bound * (1 + 1e-9):
            raise SelectionIncompleteError(
                f"walk moved {d_pq} beyond the guaranteed bound {bound}",
                best_candidate=space.resolve(current),
                iterations=step,
            )
        h_cov = float(info.get("covering_radius", 0.0))
        lip = space.lipschitz_estimate(current, radius)
        return SelectionResult(
            point=space.resolve(current),
            phi_value=phi_c,
            ascent_steps=step,
            mode=space.mode,
            n_checked=n_checked,
            spacing=float(info.get("spacing", 0.0)),
            covering_radius=h_cov,
            lipschitz_est=lip,
            start_distance=d_pq,
            distance_bound=bound,
        )

    raise SelectionIncompleteError(
        f"no certified point after {budget.max_ascent} ascent steps",
        best_candidate=space.resolve(current),
        iterations=budget.max_ascent,
    )
