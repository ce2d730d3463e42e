import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renormlab.errors import PreconditionError, SelectionIncompleteError
from renormlab.expr import AffineChart, CExp, CPoly, Coordinate, RealPart, Scaled, Z
from renormlab import engine, field
from renormlab.metric import BallSpace, FiniteMetricSpace, SelectBudget, zalcman_select

from conftest import re_exp_z, re_z2


def selection_oracle(points, dist, phi, p, tau, eps):
    """Brute force: all q satisfying the three selection conditions."""
    phi_p = phi(p)
    bound = tau / (eps * phi_p * (tau - 1.0))
    good = []
    for q in points:
        if dist(p, q) > bound + 1e-12:
            continue
        if phi(q) < phi_p - 1e-12:
            continue
        rad = 1.0 / (eps * phi(q))
        if all(phi(x) <= tau * phi(q) + 1e-12 for x in points if dist(x, q) <= rad):
            good.append(q)
    return good


def line_space(phi_fn, n=11):
    pts = [np.array([float(i)]) for i in range(n)]
    return FiniteMetricSpace(pts, dist=lambda a, b: abs(float(a[0] - b[0])), phi=phi_fn)


class TestSelectFinite:
    def test_linear_phi_returns_start(self):
        V = line_space(lambda p: float(p[0]) + 1.0)
        res = zalcman_select(V, np.array([0.0]), tau=2.0, eps=1.0)
        assert float(res.point[0]) == 0.0  # ball {0,1} has phi <= 2 = tau*phi(0)

    def test_constant_phi_returns_start(self):
        V = line_space(lambda p: 3.0)
        for i in (0, 4, 10):
            res = zalcman_select(V, np.array([float(i)]), tau=1.5, eps=0.7)
            assert float(res.point[0]) == float(i)

    def test_exponential_phi_certified_by_oracle(self):
        phi = lambda p: 2.0 ** float(p[0])
        V = line_space(phi)
        res = zalcman_select(V, np.array([0.0]), tau=2.0, eps=1.0)
        good = selection_oracle(V.points, V._dist, phi, np.array([0.0]), 2.0, 1.0)
        assert any(float(res.point[0]) == float(g[0]) for g in good)

    def test_budget_exhaustion_carries_best(self):
        phi = lambda p: 4.0 ** float(p[0])
        V = line_space(phi, n=60)
        with pytest.raises(SelectionIncompleteError) as ei:
            zalcman_select(V, np.array([0.0]), tau=1.01, eps=0.001, budget=SelectBudget(max_ascent=2))
        assert ei.value.best_candidate is not None

    def test_rejects_bad_parameters(self):
        V = line_space(lambda p: 1.0)
        with pytest.raises(PreconditionError):
            zalcman_select(V, np.array([0.0]), tau=1.0, eps=1.0)
        with pytest.raises(PreconditionError):
            zalcman_select(V, np.array([0.0]), tau=2.0, eps=0.0)
        V0 = line_space(lambda p: 0.0)
        with pytest.raises(PreconditionError):
            zalcman_select(V0, np.array([0.0]), tau=2.0, eps=1.0)


@settings(max_examples=150, deadline=None, derandomize=True)
@given(
    n=st.integers(2, 18),
    seed=st.integers(0, 10_000),
    tau=st.floats(1.05, 3.0),
    eps=st.floats(0.05, 2.0),
)
def test_selection_postconditions_random_finite(n, seed, tau, eps):
    rng = np.random.default_rng(seed)
    pts = [rng.uniform(-5, 5, size=2) for _ in range(n)]
    vals = {i: float(v) for i, v in enumerate(rng.uniform(0.1, 20.0, size=n))}
    index = {id(p): i for i, p in enumerate(pts)}
    phi = lambda p: vals[index[id(p)]]
    dist = lambda a, b: float(np.linalg.norm(a - b))
    V = FiniteMetricSpace(pts, dist=dist, phi=phi)
    p0 = pts[int(rng.integers(n))]
    res = zalcman_select(V, p0, tau=tau, eps=eps)
    q = res.point
    # the three conditions, exactly as enumerated by the oracle
    assert dist(p0, q) <= tau / (eps * phi(p0) * (tau - 1.0)) + 1e-9
    assert phi(q) >= phi(p0) - 1e-12
    rad = 1.0 / (eps * phi(q))
    for x in pts:
        if dist(x, q) <= rad:
            assert phi(x) <= tau * phi(q) + 1e-9


class TestMetricAxioms:
    def test_euclidean_spaces_pass(self, rng):
        from renormlab.metric import check_metric_axioms

        pts = [rng.uniform(-5, 5, size=2) for _ in range(15)]
        V = FiniteMetricSpace(pts, dist=lambda a, b: float(np.linalg.norm(a - b)), phi=lambda p: 1.0)
        check_metric_axioms(V, rng)
        B = BallSpace(np.zeros(2), 1.0, phi=lambda q: np.ones(len(q)))
        check_metric_axioms(B, rng)

    def test_non_metric_rejected(self, rng):
        from renormlab.metric import check_metric_axioms

        pts = [np.array([float(i)]) for i in range(10)]
        # squared distance violates the triangle inequality
        V = FiniteMetricSpace(pts, dist=lambda a, b: float((a[0] - b[0]) ** 2), phi=lambda p: 1.0)
        with pytest.raises(PreconditionError):
            check_metric_axioms(V, rng)


class TestSelectSampled:
    def test_smooth_bump_walks_to_peak_region(self):
        peak = np.array([0.4, -0.2])

        def phi(pts):
            d2 = ((pts - peak) ** 2).sum(axis=1)
            return 8.0 * np.exp(-4.0 * d2) + 1.0

        V = BallSpace(np.zeros(2), 1.0, phi, base_resolution=9, levels=3)
        res = zalcman_select(V, np.zeros(2), tau=1.2, eps=0.8)
        # certified on samples: nothing in the final ball beats tau * phi(q)
        rad = 1.0 / (0.8 * res.phi_value)
        cands = V.candidates_within(np.asarray(res.point), rad, 2)
        assert float(phi(cands).max()) <= 1.2 * res.phi_value + 1e-12
        assert res.mode == "sampled" and res.spacing > 0


class TestMakeRescaling:
    def test_affine_family_closed_form(self):
        # f_n = n*x1: damped derivative at 0 is n, so a_n = 1/n exactly
        fseq = lambda n: Scaled(float(n), Coordinate(0, 2))
        zero = np.zeros(2)
        trace = engine.make_rescaling(fseq, zero, lambda n: zero, range(1, 31))
        # steps start once the derivative value crosses the blow-up threshold 10
        assert trace.steps[0].index in (10, 11) and trace.steps[-1].index == 30
        for s in trace.steps:
            assert s.gtilde0 == pytest.approx(1.0, abs=1e-9)
            assert s.chart.scale == pytest.approx(1.0 / s.index, rel=1e-9)

    def test_quadratic_family_on_blowup_ray(self):
        # f_n = Re((n z)^2) blows up (in the damped sense) along the null
        # cone |x| = |y|; center the selection ball there
        fseq = lambda n: re_z2().precompose(AffineChart(float(n), (0.0, 0.0)))
        r = np.array([1.0, 1.0])
        trace = engine.make_rescaling(fseq, r, lambda n: r, range(1, 13))
        assert len(trace) > 0
        for s in trace.steps:
            assert s.gtilde0 == pytest.approx(1.0, abs=1e-9)
            assert s.sup_gtilde <= 1 + s.epsilon + s.delta_grid + 1e-9
        scales = [s.chart.scale for s in trace.steps]
        assert scales[-1] < scales[0]  # a_n -> 0
        drift = [np.linalg.norm(np.asarray(s.chart.center) - r) for s in trace.steps]
        assert drift[-1] <= max(drift) <= 1.0  # b_n stays near r
        rep = engine.limit_probe(trace)
        assert rep.classification == engine.AFFINE_NONCONSTANT
        assert rep.residuals[-1] <= 1e-2

    def test_blowup_precondition_rejected(self):
        # at r = (1, 0) the damped derivative of Re((nz)^2) decays (cosh wins)
        fseq = lambda n: re_z2().precompose(AffineChart(float(n), (0.0, 0.0)))
        r = np.array([1.0, 0.0])
        with pytest.raises(PreconditionError):
            engine.make_rescaling(fseq, r, lambda n: r, range(1, 13))

    def test_selection_incomplete_carries_step_index(self):
        # an impossible budget forces the failure; the error names the step
        fseq = lambda n: Scaled(float(n), Coordinate(0, 2))
        zero = np.zeros(2)
        cfg = engine.EngineConfig(max_ascent=0)
        with pytest.raises(SelectionIncompleteError) as ei:
            engine.make_rescaling(fseq, zero, lambda n: zero, range(11, 15), config=cfg)
        assert ei.value.step_index == 11
        assert "step 11" in str(ei.value)

    def test_delta_grid_halves_at_fixed_center(self):
        f = re_z2()
        cfg = engine.EngineConfig()
        trace, _ = engine.renormalize_entire(f, [1.0, 0.0], count=10, config=cfg)
        stride = engine.auto_stride(f, [1.0, 0.0], 10, cfg)
        zero = np.zeros(2)
        s = trace.steps[-1]
        fn = f.precompose(AffineChart(float(s.index * stride), (1.0, 0.0)))
        c1 = engine.certify_step(fn, s, zero, cfg, base_resolution=9)
        c2 = engine.certify_step(fn, s, zero, cfg, base_resolution=17)
        ratio = c2["delta_grid"] / c1["delta_grid"]
        assert 0.4 <= ratio <= 0.6


class TestLimitProbe:
    def test_fixed_affine_sequence(self):
        fseq = lambda n: Scaled(float(n), Coordinate(0, 2))
        zero = np.zeros(2)
        trace = engine.make_rescaling(fseq, zero, lambda n: zero, range(1, 31))
        report = engine.limit_probe(trace)
        assert report.classification == engine.AFFINE_NONCONSTANT
        assert report.residuals[-1] <= 1e-9  # rescaled affine is exactly affine
        assert report.affine.gradient_norm() >= 0.1

    def test_divergence_classification(self):
        # constants n**2 beyond the divergence threshold, increasing
        base = Coordinate(0, 2)
        steps = []
        for i, n in enumerate(range(1, 6)):
            c = AffineChart(1.0, (0.0, 0.0))
            g = Scaled(0.001, base) + float(2e3 + n * 10)
            steps.append(
                engine.RenormStep(
                    index=n, chart=c, epsilon=0.1, phi_center=1.0, gtilde0=1.0,
                    sup_gtilde=1.0, delta_grid=0.0, selection=None, rescaled=g,
                )
            )
        trace = engine.RenormTrace(tuple(steps), (0.0, 0.0), field.Box.cube(-1, 1, 2), 11)
        report = engine.limit_probe(trace)
        assert report.classification == engine.PLUS_INFINITY

    def test_never_finite_when_values_exceed_guard(self):
        base = Scaled(2e6, Coordinate(0, 2))  # affine but astronomically scaled
        c = AffineChart(1.0, (0.0, 0.0))
        steps = [
            engine.RenormStep(
                index=1, chart=c, epsilon=0.1, phi_center=1.0, gtilde0=1.0,
                sup_gtilde=1.0, delta_grid=0.0, selection=None, rescaled=base,
            )
        ]
        trace = engine.RenormTrace(tuple(steps), (0.0, 0.0), field.Box.cube(-1, 1, 2), 11)
        report = engine.limit_probe(trace)
        assert report.classification == engine.UNDECIDED


class TestRenormalizeEntire:
    def test_affine_input_immediate(self):
        f = Scaled(2.0, Coordinate(0, 2)) + 1.0
        trace, report = engine.renormalize_entire(f, [0.0, 0.0], count=8)
        assert report.classification == engine.AFFINE_NONCONSTANT
        assert report.residuals[-1] <= 1e-9

    def test_re_z2(self):
        trace, report = engine.renormalize_entire(re_z2(), [1.0, 0.0], count=30)
        assert report.classification == engine.AFFINE_NONCONSTANT
        assert report.residuals[-1] <= 1e-2
        assert report.affine.gradient_norm() >= 0.1

    def test_re_exp_recovers_affine_log_modulus(self):
        # the rescaled limit of the exponential family is an affine function;
        # its gradient norm equals cosh of its value at 0 (normalization)
        trace, report = engine.renormalize_entire(re_exp_z(), [0.0, 0.0], count=30)
        assert report.classification == engine.AFFINE_NONCONSTANT
        s = trace.steps[-1]
        g0 = s.rescaled.eval(np.zeros(2))
        assert report.affine.gradient_norm() == pytest.approx(math.cosh(g0), rel=0.05)

    def test_vanishing_gradient_rejected(self):
        with pytest.raises(PreconditionError):
            engine.renormalize_entire(re_z2(), [0.0, 0.0], count=5)  # grad = 0 at origin

    def test_three_dimensional_source(self):
        # the whole pipeline is dimension-generic: selection ball, probe box,
        # and classification all follow the expression's dimension
        from renormlab.expr import HarmonicPolynomial

        f = HarmonicPolynomial(3, {(2, 0, 0): 1.0, (0, 0, 2): -1.0, (1, 1, 0): 1.0})
        cfg = engine.EngineConfig(
            base_resolution=5, levels=2, probe_resolution=9, target_phi=2000.0
        )
        trace, report = engine.renormalize_entire(f, [1.0, 0.0, 1.0], count=12, config=cfg)
        assert report.classification == engine.AFFINE_NONCONSTANT
        assert report.residuals[-1] <= 1e-2
        assert all(s.sup_gtilde <= 1 + s.epsilon + s.delta_grid + 1e-9 for s in trace.steps)

    def test_global_charts_compose(self):
        f = re_z2()
        trace, _ = engine.renormalize_entire(f, [1.0, 0.0], count=12)
        s = trace.steps[-1]
        x = np.array([0.3, -0.2])
        via_global = f.eval(s.global_chart.apply(x))
        via_rescaled = s.rescaled.eval(x)
        assert via_global == pytest.approx(via_rescaled, rel=1e-9, abs=1e-9)

    def test_trace_json_shape(self):
        trace, report = engine.renormalize_entire(re_z2(), [1.0, 0.0], count=8)
        doc = trace.to_json()
        assert set(doc) == {"base_point", "steps"}
        step = doc["steps"][0]
        for key in ("n", "a", "b", "eps", "gtilde0", "sup_bound"):
            assert key in step
        rep = report.to_json()
        for key in ("class", "affine", "residuals", "gaps"):
            assert rep[key] is not None or key == "affine"
