import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renormlab.domains import (
    Above,
    AffineImage,
    Below,
    ConstantCurve,
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
    contains_point,
    horizontal_slice,
    parse_domain,
    seg_fits,
    slice_enclosure,
    support,
    vertical_slice,
)
from renormlab import library


def rot(theta):
    c, s = math.cos(theta), math.sin(theta)
    return ((c, -s), (s, c))


EXP_CUSP = library.domain("exp_cusp")
STRIP = library.domain("strip01")
PARABOLA = library.domain("parabola_epigraph")


class TestContains:
    def test_halfplane(self):
        assert contains_point(HalfPlane(0, 1, 0), (0.0, 1.0))
        assert not contains_point(HalfPlane(0, 1, 0), (0.0, -1.0))

    def test_exp_cusp_examples(self):
        # exp(-1) ~ 0.368 < 0.5
        assert not contains_point(EXP_CUSP, (1.0, 0.5))
        assert contains_point(EXP_CUSP, (1.0, 0.3))

    def test_union_is_monotone(self):
        d = Union((EXP_CUSP, HalfPlane(1, 0, -100)))
        assert contains_point(d, (1.0, 0.3))

    def test_reciprocal_region_restricted_to_positive_x(self):
        d = Below(ReciprocalCurve(1.0))
        assert contains_point(d, (2.0, 0.25))
        assert not contains_point(d, (-2.0, -10.0))  # x <= 0 is outside


class TestHorizontalSlice:
    def test_halfplane_full_line(self):
        assert horizontal_slice(HalfPlane(0, 1, 0), 1.0).is_all()

    def test_exp_cusp_log_endpoints(self):
        s = horizontal_slice(EXP_CUSP, 0.1)
        (l, r), = s.intervals
        assert r == pytest.approx(math.log(10.0), rel=1e-12)
        assert l == pytest.approx(-math.log(10.0), rel=1e-12)

    def test_strip_with_halfplane(self):
        d = Intersection((VerticalStrip(-1, 1), HalfPlane(0, 1, 0)))
        assert horizontal_slice(d, 2.0).intervals == ((-1.0, 1.0),)

    def test_union_keeps_gaps(self):
        d = Union((VerticalStrip(0, 1), VerticalStrip(1, 2)))
        s = horizontal_slice(d, 0.0)
        assert s.intervals == ((0.0, 1.0), (1.0, 2.0))  # the point x=1 stays out
        assert not s.contains(1.0)

    def test_parabola_slice(self):
        s = horizontal_slice(PARABOLA, 4.0)
        (l, r), = s.intervals
        assert (l, r) == pytest.approx((-2.0, 2.0))

    def test_slice_soundness_random_trees(self, rng):
        # membership and slice queries must agree exactly (no tolerance)
        domains = [
            EXP_CUSP, STRIP, PARABOLA,
            library.domain("w_standin"),
            Union((Below(QuadraticCurve(-1.0, 2.0)), Above(LinearCurve(0.5, 1.0)))),
            Intersection((HalfPlane(1, 2, 0.5), Below(ConstantCurve(3.0)))),
            Union((Below(ReciprocalCurve(2.0)), VerticalStrip(-2, -1))),
        ]
        trials = 0
        for d in domains:
            for _ in range(150):
                b = float(rng.uniform(-4, 4))
                s = horizontal_slice(d, b)
                assert s.exact
                for x in rng.uniform(-6, 6, size=10):
                    assert s.contains(float(x)) == contains_point(d, (float(x), b))
                    trials += 1
        assert trials == 10500

    def test_rotated_membership_consistency(self, rng):
        # oblique slices of the exponential cusp are approximate but must
        # agree with membership away from interval endpoints
        d = AffineImage(rot(0.5), (0.2, -0.1), EXP_CUSP)
        for b in (-0.2, 0.05, 0.3):
            s = horizontal_slice(d, b)
            assert not s.exact
            for x in rng.uniform(-3, 3, size=40):
                near_edge = any(
                    math.isfinite(e) and abs(x - e) < 1e-9 for iv in s.intervals for e in iv
                )
                if not near_edge:
                    assert s.contains(float(x)) == contains_point(d, (float(x), b))


class TestVerticalSlice:
    def test_strip(self):
        assert vertical_slice(VerticalStrip(-1, 1), 0.0).is_all()
        assert not vertical_slice(VerticalStrip(-1, 1), 2.0)

    def test_exp_cusp(self):
        s = vertical_slice(EXP_CUSP, 1.0)
        (l, r), = s.intervals
        assert (l, r) == pytest.approx((0.0, math.exp(-1.0)))


class TestSegFits:
    def test_exp_cusp_examples(self):
        assert seg_fits(EXP_CUSP, 1.0, 0.1)       # ln 10 > 1
        assert not seg_fits(EXP_CUSP, 3.0, 0.1)   # ln 10 < 3
        assert seg_fits(HalfPlane(0, 1, 0), 7.0, 1.0)

    def test_monotone_in_k(self, rng):
        for _ in range(200):
            b = float(rng.uniform(0.01, 0.9))
            k = float(rng.uniform(0.1, 5.0))
            if seg_fits(EXP_CUSP, k, b):
                assert seg_fits(EXP_CUSP, k / 2, b)

    def test_closed_in_open(self):
        # slice is exactly (-1, 1): the closed segment [-1, 1] must not fit
        d = VerticalStrip(-1.0, 1.0)
        assert not seg_fits(d, 1.0, 0.0)
        assert seg_fits(d, 0.999, 0.0)


class TestSupport:
    def test_upper_halfplane(self):
        assert support(HalfPlane(0, 1, 0), (0, -1)) == pytest.approx(0.0)
        assert support(HalfPlane(0, 1, 0), (0, 1)) == math.inf
        assert support(HalfPlane(0, 1, 0), (1, 0)) == math.inf

    def test_exp_cusp_two_bounded_directions(self):
        assert support(EXP_CUSP, (0, -1)) == pytest.approx(0.0)
        assert support(EXP_CUSP, (0, 1)) == pytest.approx(1.0)  # sup y = s + t
        assert support(EXP_CUSP, (1, 0)) == math.inf

    def test_parabola(self):
        assert support(PARABOLA, (0, -1)) == pytest.approx(0.0)
        assert support(PARABOLA, (0, 1)) == math.inf
        # tilted directions with negative y-part stay finite on {y > x^2}
        assert support(PARABOLA, (1, -1)) == pytest.approx(0.25)  # max x - x^2

    def test_affine_image(self):
        d = AffineImage(rot(math.pi / 2), (0.0, 0.0), HalfPlane(0, 1, 0))  # now {x < 0}
        assert support(d, (1, 0)) == pytest.approx(0.0, abs=1e-12)
        assert support(d, (0, 1)) == math.inf

    def test_reciprocal_wedge(self):
        d = Below(ReciprocalCurve(-1.0))  # {x > 0, y < -1/x}
        assert support(d, (-1, 0)) == pytest.approx(0.0)
        assert support(d, (0, 1)) == pytest.approx(0.0)
        assert support(d, (-1, 1)) == pytest.approx(-2.0)  # max of -x - 1/x

    def test_sample_points_are_members(self):
        from renormlab.tubes import sample_domain_points

        for name in ("w_standin", "three_spike", "exp_cusp"):
            d = library.domain(name)
            pts = sample_domain_points(d, 100.0)
            assert len(pts) > 10
            assert all(contains_point(d, p) for p in pts)

    def test_finite_support_bounds_every_member(self, rng):
        # soundness: a finite support value must dominate <u, p> on actual
        # members, including far-reaching ones found through slices
        from renormlab.tubes import sample_domain_points

        cases = [
            EXP_CUSP,
            STRIP,
            PARABOLA,
            Below(ReciprocalCurve(-1.0)),
            Above(ReciprocalCurve(2.0)),
            Below(QuadraticCurve(-0.7, 1.2)),
            Union((EXP_CUSP, Below(ConstantCurve(-3.0)))),
            AffineImage(rot(1.1), (0.5, 0.5), PARABOLA),
        ]
        checked = 0
        for d in cases:
            pts = sample_domain_points(d, 1e4)
            dirs = [c for c in d.direction_candidates()]
            dirs += [
                (math.cos(t), math.sin(t)) for t in rng.uniform(0, 2 * math.pi, size=16)
            ]
            for u in dirs:
                s = support(d, u)
                if not math.isfinite(s):
                    continue
                checked += 1
                for p in pts:
                    assert u[0] * p[0] + u[1] * p[1] <= s + 1e-7, (d.to_text()[:40], u, p)
        assert checked >= 10


class TestEnclosure:
    def test_exp_cusp_window(self):
        pieces = slice_enclosure(EXP_CUSP, 0.125, 0.375)
        assert pieces is not None
        # slices range over (ln b, -ln b): no piece can possibly hold [-8, 8]
        assert not any(p.may_contain(-8.0, 8.0) for p in pieces)
        assert any(p.may_contain(-0.5, 0.5) for p in pieces)

    def test_breakpoint_crossing_window(self):
        # the window straddles the curve top s + t = 1: structure changes there
        pieces = slice_enclosure(EXP_CUSP, 0.9, 1.1)
        assert pieces is not None
        assert not any(p.may_contain(-1.0, 1.0) for p in pieces)

    def test_union_merging_is_sound(self):
        d = Union((VerticalStrip(-3, 0.1), VerticalStrip(-0.1, 3)))
        pieces = slice_enclosure(d, 0.0, 1.0)
        # overlapping strips chain into one component covering [-2, 2]
        assert any(p.may_contain(-2.0, 2.0) for p in pieces)

    def test_oblique_affine_unsupported(self):
        d = AffineImage(rot(0.3), (0, 0), STRIP)
        assert slice_enclosure(d, 0.0, 0.5) is None

    def test_translation_supported(self):
        d = AffineImage(((1.0, 0.0), (0.0, 1.0)), (5.0, 2.0), EXP_CUSP)
        pieces = slice_enclosure(d, 2.125, 2.375)
        assert pieces is not None
        assert not any(p.may_contain(-8.0 + 5.0, 8.0 + 5.0) for p in pieces)

    def test_enclosure_never_excludes_a_real_fit(self, rng):
        # soundness stress: whenever the enclosure rules a segment out for a
        # whole window, no sampled height in that window may actually fit it
        domains = [
            EXP_CUSP,
            STRIP,
            PARABOLA,
            library.domain("w_standin"),
            Union((Below(QuadraticCurve(-0.5, 1.5)), Above(LinearCurve(0.3, 0.2)))),
            Intersection((HalfPlane(0.2, 1.0, 0.4), Below(ExpAbsCurve(2.0, 0.3)))),
            AffineImage(((0.5, 0.0), (0.0, 2.0)), (1.0, -0.2), EXP_CUSP),
            AffineImage(((-1.0, 0.0), (0.0, -1.0)), (0.0, 1.0), PARABOLA),
        ]
        trials = 0
        for d in domains:
            for _ in range(60):
                lo = float(rng.uniform(-2.0, 2.0))
                hi = lo + float(rng.uniform(1e-3, 1.0))
                k = float(rng.uniform(0.1, 6.0))
                pieces = slice_enclosure(d, lo, hi)
                if pieces is None or any(p.may_contain(-k, k) for p in pieces):
                    continue
                for b in np.linspace(lo, hi, 41):
                    assert not seg_fits(d, k, float(b)), (d.to_text()[:50], k, b)
                trials += 1
        assert trials > 50  # the exclusion branch must actually be exercised


_coef = st.floats(-3.0, 3.0, allow_nan=False)
_nonzero = st.floats(0.2, 3.0).flatmap(lambda v: st.sampled_from([v, -v]))

_curves = st.one_of(
    st.builds(ConstantCurve, _coef),
    st.builds(LinearCurve, _coef, _coef),
    st.builds(ExpAbsCurve, _nonzero, _coef),
    st.builds(ReciprocalCurve, _nonzero),
    st.builds(QuadraticCurve, _nonzero, _coef),
)

_primitives = st.one_of(
    st.builds(HalfPlane, _nonzero, _coef, _coef),
    st.builds(Below, _curves),
    st.builds(Above, _curves),
    st.builds(
        lambda x0, w: VerticalStrip(x0, x0 + w),
        st.floats(-3.0, 0.0),
        st.floats(0.1, 3.0),
    ),
)

# exact-slice trees: unions/intersections of primitives, no affine images
_trees = st.recursive(
    _primitives,
    lambda kids: st.one_of(
        st.builds(lambda a, b: Union((a, b)), kids, kids),
        st.builds(lambda a, b: Intersection((a, b)), kids, kids),
    ),
    max_leaves=6,
)


@settings(max_examples=250, deadline=None, derandomize=True)
@given(d=_trees, b=st.floats(-4, 4, allow_nan=False), xs=st.lists(st.floats(-6, 6), min_size=3, max_size=8))
def test_slice_soundness_hypothesis_trees(d, b, xs):
    s = horizontal_slice(d, b)
    assert s.exact
    for x in xs:
        assert s.contains(x) == contains_point(d, (x, b))


@settings(max_examples=150, deadline=None, derandomize=True)
@given(d=_trees, b=st.floats(-4, 4, allow_nan=False))
def test_vertical_slice_soundness_hypothesis_trees(d, b):
    s = d.slice_along(LineMap((0.0, 1.0), (b, 0.0)))
    assert s.exact
    for y in (-5.0, -0.3, 0.0, 0.7, 4.4):
        assert s.contains(y) == contains_point(d, (b, y))


class TestSerialization:
    @pytest.mark.parametrize("name", sorted(library.DOMAINS))
    def test_catalog_round_trips(self, name):
        d = library.domain(name)
        text = d.to_text()
        assert parse_domain(text).to_text() == text

    def test_rejects_garbage(self):
        with pytest.raises(ValueError):
            parse_domain("(frobnicate 1)")
        with pytest.raises(ValueError):
            parse_domain("(below (const 1.0)")
