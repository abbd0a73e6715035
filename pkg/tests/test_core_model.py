import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorenz_lab.core_model import (
    State,
    control_signal,
    controlled_rhs,
    equilibria,
    params_from_alpha,
    regulation_target,
    uncontrolled_rhs,
)
from lorenz_lab.errors import DomainError

alphas = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
coords = st.floats(min_value=-50.0, max_value=50.0, allow_nan=False)
states = st.tuples(coords, coords, coords)


@pytest.mark.parametrize(
    "alpha, expected",
    [
        (0.0, (10.0, 28.0, 8.0 / 3.0, -1.0)),
        (1.0, (35.0, -7.0, 3.0, 28.0)),
        (0.8, (30.0, 0.0, 8.8 / 3.0, 22.2)),
    ],
)
def test_params_from_alpha(alpha, expected):
    p = params_from_alpha(alpha)
    assert (p.sigma, p.r, p.b, p.gamma) == pytest.approx(expected, rel=1e-15, abs=1e-14)


@pytest.mark.parametrize("bad", [-0.01, 1.01, 2.0, float("nan")])
def test_params_domain(bad):
    with pytest.raises(DomainError):
        params_from_alpha(bad)


@given(alphas)
def test_params_positive(alpha):
    p = params_from_alpha(alpha)
    assert p.sigma > 0 and p.b > 0


def test_equilibria_examples():
    e = equilibria(params_from_alpha(0.0))
    assert e.e0 == (0.0, 0.0, 0.0)
    assert e.e_plus == pytest.approx((math.sqrt(72), math.sqrt(72), 27.0))
    e1 = equilibria(params_from_alpha(1.0))
    assert e1.e_plus == pytest.approx((math.sqrt(63), math.sqrt(63), 21.0))
    assert e1.e_minus == pytest.approx((-math.sqrt(63), -math.sqrt(63), 21.0))


def test_equilibria_are_fixed_points_on_grid():
    for alpha in np.linspace(0, 1, 101):
        p = params_from_alpha(alpha)
        for e in equilibria(p):
            assert np.linalg.norm(uncontrolled_rhs(p, e)) < 1e-10


def test_target_defaults_to_e_plus():
    for alpha in (0.0, 0.3, 0.8, 1.0):
        p = params_from_alpha(alpha)
        t = regulation_target(p)
        assert t.x_r == pytest.approx(math.sqrt((8 + alpha) * (9 - 2 * alpha)))
        assert t.z_star == pytest.approx(27 - 6 * alpha)
        assert tuple(t.state) == pytest.approx(tuple(equilibria(p).e_plus))


def test_target_custom_and_invalid():
    p = params_from_alpha(0.0)
    t = regulation_target(p, 3.0)
    assert t.z_star == pytest.approx(9.0 / p.b)
    with pytest.raises(DomainError):
        regulation_target(p, float("inf"))


def test_uncontrolled_rhs_examples():
    assert uncontrolled_rhs(params_from_alpha(0), (1, 0, 0)) == pytest.approx((-10, 28, 0))
    assert uncontrolled_rhs(params_from_alpha(1), (0, 1, 0)) == pytest.approx((35, 28, 0))


def test_controlled_rhs_examples():
    p = params_from_alpha(0.0)
    t = regulation_target(p)
    assert controlled_rhs(p, t, t.state, t.state) == pytest.approx((0, 0, 0), abs=1e-12)
    xr = math.sqrt(72)
    got = controlled_rhs(p, t, (1, 2, 3), (0, 0, 0))
    assert got == pytest.approx((10, 23 + 10 * xr, -6))


@given(alphas, states)
def test_controlled_rhs_without_delay_is_linear_cascade(alpha, s):
    p = params_from_alpha(alpha)
    t = regulation_target(p)
    dx, dy, dz = controlled_rhs(p, t, s, s)
    x, y, z = s
    assert dx == pytest.approx(p.sigma * (y - x), abs=1e-9)
    assert dy == pytest.approx(p.sigma * (t.x_r - y), abs=1e-9)
    assert dz == pytest.approx(x * y - p.b * z, abs=1e-9)


def test_control_signal_examples():
    p0 = params_from_alpha(0.0)
    t0 = regulation_target(p0)
    assert control_signal(p0, t0, t0.state) == pytest.approx(0.0, abs=1e-12)
    for alpha in (0.0, 0.5, 1.0):
        p = params_from_alpha(alpha)
        t = regulation_target(p)
        assert control_signal(p, t, (0, 0, 0)) == pytest.approx(p.sigma * t.x_r)
    p1 = params_from_alpha(1.0)
    t1 = regulation_target(p1)
    assert control_signal(p1, t1, (1, 1, 1)) == pytest.approx(7 + 1 - 28 - 35 * (1 - math.sqrt(63)))


@settings(max_examples=1000)
@given(alphas, states, states)
def test_control_identity(alpha, now, delayed):
    p = params_from_alpha(alpha)
    t = regulation_target(p)
    base = np.array(uncontrolled_rhs(p, now))
    base[1] += control_signal(p, t, delayed)
    got = np.array(controlled_rhs(p, t, now, delayed))
    scale = 1.0 + np.abs(base).max()
    assert np.abs(base - got).max() < 1e-12 * scale


def test_state_is_namedtuple():
    s = State(1.0, 2.0, 3.0)
    assert s.z == 3.0 and tuple(s) == (1.0, 2.0, 3.0)
