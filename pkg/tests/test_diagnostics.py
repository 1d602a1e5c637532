import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opialiter.diagnostics import (
    ar_check,
    ar_profile,
    detect_limit,
    fejer_monitor,
    flat_check,
    lambda_membership,
    opial_probe,
    psi_estimate,
    residual_check,
    residual_profile,
    sharp_check,
    tail_bounds,
    weak_limit_evidence,
)
from opialiter.domains import ball, box
from opialiter.engines import Trace, mann_run, picard_run
from opialiter.errors import InsufficientDataError, NotInLambdaError, ValidationError
from opialiter.operators import (
    Averaged,
    HalfRadial,
    Identity,
    Projection,
    Rotation,
    Scaling,
    make_operator,
)
from opialiter.space import Point, basis, distance, zero
from opialiter.verdict import Status, TailWindow

ROOT2 = math.sqrt(2.0)
QUARTER = Rotation(math.pi / 2)
UNIT_BALL = ball([0.0, 0.0], 1.0)


def seq_trace(xs, f=None):
    pts = [Point.from_array(x) for x in xs]
    return Trace.from_points(pts, images=None if f else pts, operator=f)


def halving(n=60, start=1.0):
    return seq_trace([[start * 2.0 ** -k, 0.0] for k in range(n)])


# ------------------------------------------------------------------ tail_bounds


def test_tail_bounds_examples():
    a = [1 + (-1) ** n / 2 for n in range(40)]
    assert tail_bounds(a, TailWindow(0, 10)) == (0.5, 1.5)
    assert tail_bounds([3.0] * 12, TailWindow(2, 10)) == (3.0, 3.0)
    lo, hi = tail_bounds([2.0 ** -n for n in range(30)], TailWindow(20, 10))
    assert hi <= 2.0 ** -20


def test_tail_bounds_too_short():
    with pytest.raises(InsufficientDataError):
        tail_bounds([1.0] * 5, TailWindow(3, 4))


def test_default_window():
    w = TailWindow.default(1000)
    assert (w.burn_in, w.window) == (500, 100)
    w = TailWindow.default(40)
    assert (w.burn_in, w.window) == (20, 10)
    with pytest.raises(ValueError):
        TailWindow(0, 1)


@given(st.lists(st.floats(-1e6, 1e6), min_size=4, max_size=60), st.data())
def test_tail_bounds_monotone_in_window(seq, data):
    small = data.draw(st.integers(2, len(seq) - 1))
    big = data.draw(st.integers(small, len(seq)))
    lo_s, hi_s = tail_bounds(seq, TailWindow(0, small))
    lo_b, hi_b = tail_bounds(seq, TailWindow(0, big))
    assert lo_b <= lo_s <= hi_s <= hi_b


# ---------------------------------------------------------------- profiles


def test_ar_profile_examples():
    pic = picard_run(QUARTER, Point.dense(1.0, 0.0), UNIT_BALL, 200)
    assert np.allclose(ar_profile(pic), ROOT2, atol=1e-12)
    assert ar_check(pic).status is Status.FAILS

    man = mann_run(QUARTER, 0.5, Point.dense(1.0, 0.0), UNIT_BALL, 200)
    n = np.arange(60)
    assert np.allclose(ar_profile(man)[:60], 2.0 ** (-n / 2) * ROOT2 / 2, rtol=1e-13)
    assert ar_check(man).holds

    ident = picard_run(Identity(), Point.dense(0.3, 0.1), UNIT_BALL, 20)
    assert np.all(ar_profile(ident) == 0.0)


def test_ar_needs_two_points():
    with pytest.raises(InsufficientDataError):
        ar_profile(seq_trace([[0.0]]))


def test_residual_profile_examples():
    half = make_operator({"kind": "scaling", "c": 0.5})
    tr = picard_run(half, Point.dense(1.0), ball([0.0], 1.0), 30)
    assert np.array_equal(residual_profile(tr), 2.0 ** (-np.arange(31) - 1))
    ident = picard_run(Identity(), Point.dense(0.3, 0.1), UNIT_BALL, 20)
    assert np.all(residual_profile(ident) == 0.0)
    pic = picard_run(QUARTER, Point.dense(1.0, 0.0), UNIT_BALL, 20)
    assert np.allclose(residual_profile(pic), ROOT2, atol=1e-15)
    assert residual_check(pic).status is Status.FAILS


# ------------------------------------------------------------ Lambda and psi


def alternating(n=200):
    return [basis(k) if k % 2 == 0 else 2.0 * basis(k) for k in range(1, n + 1)]


def two_points(n=200):
    return [basis(k) if k % 2 == 0 else basis(1) for k in range(1, n + 1)]


def test_lambda_examples():
    xs = alternating()
    v = lambda_membership(Trace.from_points(xs, xs), zero())
    assert v.status is Status.FAILS
    assert (v.witness("dist_lo"), v.witness("dist_hi")) == (1.0, 2.0)

    assert lambda_membership(halving(), Point.dense(5.0, 0.0)).holds

    xs = two_points()
    v = lambda_membership(Trace.from_points(xs, xs), basis(1))
    assert v.status is Status.FAILS
    assert v.witness("dist_lo") == 0.0
    assert v.witness("dist_hi") == ROOT2


def test_psi_examples():
    assert psi_estimate(halving(), Point.dense(5.0, 0.0)) == pytest.approx(5.0, abs=1e-6)
    p = Point.dense(1.0, 0.0)
    f = make_operator({"kind": "affine_contraction", "scale": 0.5, "shift": [0.5, 0.0]})
    tr = picard_run(f, Point.dense(0.0, 0.0), ball([1.0, 0.0], 2.0), 200)
    assert psi_estimate(tr, p) == pytest.approx(0.0, abs=1e-12)
    man = mann_run(QUARTER, 0.5, Point.dense(1.0, 0.0), UNIT_BALL, 200)
    assert psi_estimate(man, Point.dense(1.0, 0.0)) == pytest.approx(1.0, abs=1e-12)


def test_psi_outside_lambda_raises():
    xs = alternating()
    with pytest.raises(NotInLambdaError):
        psi_estimate(Trace.from_points(xs, xs), zero())


@given(st.floats(0.05, 0.95), st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=30, deadline=None)
def test_psi_inside_tail_bounds(tau, zx, zy):
    tr = mann_run(Rotation(1.0), tau, Point.dense(0.6, 0.2), UNIT_BALL, 400)
    z = Point.dense(zx, zy)
    v = lambda_membership(tr, z, tol=1e-6)
    if v.holds:
        psi = psi_estimate(tr, z, tol=1e-6)
        assert v.witness("dist_lo") <= psi <= v.witness("dist_hi")


@given(st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=40, deadline=None)
def test_limit_minimises_psi(zx, zy):
    f = make_operator({"kind": "affine_contraction", "scale": 0.5, "shift": [0.5, 0.0]})
    tr = picard_run(f, Point.dense(0.0, 0.0), ball([1.0, 0.0], 2.0), 200)
    w = detect_limit(tr)
    z = Point.dense(zx, zy)
    if distance(z, w) > 1e-6 and lambda_membership(tr, z).holds:
        assert psi_estimate(tr, w) + 1e-9 < psi_estimate(tr, z)


# ------------------------------------------------------------------- Opial


def test_opial_examples():
    v = opial_probe(halving(), Point.dense(0.0, 0.0), [Point.dense(1.0, 0.0)])
    assert v.holds
    xs = [basis(n) for n in range(1, 201)]
    tr = Trace.from_points(xs, xs)
    v = opial_probe(tr, zero(), [basis(1)])
    assert v.holds
    assert v.witness("liminf_limit") == 1.0
    assert v.witness("liminf_probe[0]") == pytest.approx(ROOT2, abs=1e-15)
    v = opial_probe(tr, zero(), [zero()])
    assert v.witness("skipped") == 1.0


def test_opial_rejects_wrong_declared_limit():
    v = opial_probe(halving(), Point.dense(0.5, 0.0), [Point.dense(1.0, 0.0)])
    assert v.status is Status.INCONCLUSIVE
    assert v.witness("limit_rejected") == 1.0


def test_opial_fails_against_wrong_limit_within_tolerance():
    # a probe nearer the tail than the declared limit defeats the inequality
    tr = halving(200, start=1e-7)
    v = opial_probe(tr, Point.dense(5e-7, 0.0), [Point.dense(0.0, 0.0)], limit_tol=1e-6)
    assert v.status is Status.FAILS


def test_opial_tie_is_inconclusive():
    # probes at equal distance from every iterate cannot be separated
    xs = [[0.0, 0.0]] * 20
    tr = seq_trace(xs)
    v = opial_probe(tr, Point.dense(0.0, 0.0), [Point.dense(1e-12, 0.0)])
    assert v.status is Status.INCONCLUSIVE


def test_weak_limit_evidence():
    xs = [basis(n) for n in range(1, 101)]
    tr = Trace.from_points(xs, xs)
    sup_norm, gap = weak_limit_evidence(tr, zero(), {1, 2, 3})
    assert sup_norm == 1.0 and gap == 0.0
    sup_norm, gap = weak_limit_evidence(tr, basis(2), {2})
    assert gap == 1.0


# ----------------------------------------------------------------- (sharp)


def test_sharp_examples():
    ys = [basis(n) for n in range(1, 201)]
    v = sharp_check(HalfRadial(), ys, zero())
    assert v.holds
    assert (v.witness("liminf_image_gap"), v.witness("liminf_gap")) == (0.5, 1.0)
    assert sharp_check(Identity(), ys, zero()).holds
    v = sharp_check(Scaling(2.0), ys, zero())
    assert v.status is Status.FAILS
    assert (v.witness("liminf_image_gap"), v.witness("liminf_gap")) == (2.0, 1.0)


# ------------------------------------------------------------------ (flat)


@pytest.mark.parametrize("f", [Identity(), Rotation(1.0), QUARTER, Projection(UNIT_BALL),
                               Averaged(QUARTER, 0.3)], ids=["id", "rot1", "rot90", "proj", "avg"])
@pytest.mark.parametrize("scheme", ["picard", "mann"])
def test_flat_never_triggers_for_nonexpansive(f, scheme):
    dom = ball([0.0, 0.0], 2.0)
    x0 = Point.dense(1.5, 0.5)
    tr = picard_run(f, x0, dom, 200) if scheme == "picard" else mann_run(f, 0.5, x0, dom, 200)
    v = flat_check(f, tr, 0.5, dom.diameter())
    assert v.status is Status.NOT_TRIGGERED


def test_flat_constant_trace():
    tr = picard_run(Identity(), Point.dense(0.2, 0.2), UNIT_BALL, 40)
    v = flat_check(Identity(), tr, 0.5, 2.0)
    assert v.status is Status.NOT_TRIGGERED
    assert v.witness("A") == 0.0


def test_flat_synthetic_expansive_trace():
    # y_n alternates +-e1/2; f = 2x maps it to +-e1
    ys = [[0.5 * (-1) ** n, 0.0] for n in range(40)]
    tr = seq_trace(ys, Scaling(2.0))
    # direct enumeration: A = 1, B = 2, C = |y_{n+1} - 2 y_n| = 1.5
    a = max(abs(ys[k + 1][0] - ys[k][0]) for k in range(39))
    b = max(abs(2 * ys[k + 1][0] - 2 * ys[k][0]) for k in range(39))
    c = max(abs(ys[k + 1][0] - 2 * ys[k][0]) for k in range(39))
    assert (a, b, c) == (1.0, 2.0, 1.5)
    v = flat_check(Scaling(2.0), tr, 0.5, 2.0)
    assert (v.witness("A"), v.witness("B"), v.witness("C")) == (a, b, c)
    assert v.status is Status.HOLDS  # 1.5 > 0.5 * 2
    v = flat_check(Scaling(2.0), tr, 0.9, 2.0)
    assert v.status is Status.FAILS  # 1.5 < 0.9 * 2
    v = flat_check(Scaling(2.0), tr, 0.75, 2.0)
    assert v.status is Status.INCONCLUSIVE  # 1.5 == 0.75 * 2


def test_flat_validates_delta():
    tr = picard_run(Identity(), Point.dense(0.2, 0.2), UNIT_BALL, 40)
    with pytest.raises(ValidationError):
        flat_check(Identity(), tr, 1.0, 2.0)


# ------------------------------------------------------------------- Fejer


def test_fejer_examples():
    man = mann_run(QUARTER, 0.5, Point.dense(1.0, 0.0), UNIT_BALL, 200)
    assert fejer_monitor(man, zero(2)).holds
    tr = seq_trace([[2.0 ** k, 0.0] for k in range(10)])
    v = fejer_monitor(tr, Point.dense(0.0, 0.0))
    assert v.status is Status.FAILS
    assert v.witness("first_violation") == 0.0
    const = picard_run(Identity(), Point.dense(0.3, 0.3), UNIT_BALL, 50)
    assert fejer_monitor(const, Point.dense(-0.9, 0.1)).holds


def test_fejer_eta_absorbs_growth():
    tr = seq_trace([[1.0 + 0.1 * k, 0.0] for k in range(10)])
    y = Point.dense(0.0, 0.0)
    assert fejer_monitor(tr, y).status is Status.FAILS
    v = fejer_monitor(tr, y, [0.1 + 1e-9] * 9)
    assert v.holds
    assert v.witness("eta_sum") == pytest.approx(0.9, abs=1e-6)
    # a short eta list leaves the tail at zero
    v = fejer_monitor(tr, y, [0.2] * 4)
    assert v.witness("first_violation") == 4.0


def test_fejer_negative_eta():
    with pytest.raises(ValidationError):
        fejer_monitor(halving(), Point.dense(0.0, 0.0), [-1.0])


@given(st.floats(0.1, 0.9), st.floats(0, 2 * math.pi), st.floats(0.001, 0.1))
@settings(max_examples=30, deadline=None)
def test_fejer_implies_lambda(tau, angle, decay):
    # summable eta with a quasi-Fejer trace: the distance settles within the eta tail
    f = Projection(ball([0.0, 0.0], 0.5))
    y = Point.dense(0.1, 0.0)
    tr = mann_run(f, tau, Point.dense(math.cos(angle), math.sin(angle)), UNIT_BALL, 400)
    eta = [decay * 0.5 ** k for k in range(len(tr) - 1)]
    if fejer_monitor(tr, y, eta).holds:
        w = TailWindow.default(len(tr))
        tail = sum(eta[len(tr) - 1 - w.window:])
        assert lambda_membership(tr, y, w, max(1e-9, tail)).holds


@pytest.mark.parametrize("tau", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("f,dom,x0", [
    (QUARTER, UNIT_BALL, [1.0, 0.0]),
    (Projection(box([0.0, 0.0], [0.5, 0.5])), UNIT_BALL, [-0.6, 0.7]),
    (Averaged(Rotation(2.0), 0.5), UNIT_BALL, [0.0, 0.9]),
], ids=["rot90", "proj-box", "avg-rot"])
def test_mann_end_to_end_reaches_fixed_point(f, dom, x0, tau):
    tr = mann_run(f, tau, Point.dense(*x0), dom, 3000, 1e-13)
    assert ar_check(tr).holds
    w = tr.final_point
    assert distance(f(w), w) <= 1e-9


@pytest.mark.parametrize("f", [Projection(box([0.0, 0.0], [0.5, 0.5])), Identity(),
                               make_operator({"kind": "affine_contraction", "scale": 0.5, "shift": [0.1, 0.1]})])
def test_picard_end_to_end_fixed_point(f):
    stop = 1e-12
    tr = picard_run(f, Point.dense(-0.6, 0.7), UNIT_BALL, 500)
    assert ar_check(tr, tol=1e-8).holds
    w = detect_limit(tr)
    assert distance(f(w), w) <= 10 * stop
