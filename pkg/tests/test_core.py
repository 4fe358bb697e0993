import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pottsrecon.core import (
    DirectionModel,
    build_direction_model,
    directional_difference,
    jump_count,
    potts_energy,
    relaxed_energy,
)
from pottsrecon.coupling import CouplingScheme
from pottsrecon.operators import identity_operator

small_images = arrays(
    np.float64,
    st.tuples(st.integers(1, 6), st.integers(1, 6)),
    elements=st.floats(-5, 5, allow_nan=False).map(lambda v: round(v, 1)),
)
directions = st.sampled_from(build_direction_model("knight8").directions)


def loop_differences(u, a):
    rows, cols = u.shape
    out = {}
    for i in range(rows):
        for j in range(cols):
            ii, jj = i + a[0], j + a[1]
            if 0 <= ii < rows and 0 <= jj < cols:
                out[(i, j)] = u[ii, jj] - u[i, j]
    return out


def test_compass4_weights():
    m = build_direction_model("compass4")
    assert m.size == 4
    assert m.weights[0] == pytest.approx(math.sqrt(2) - 1)
    assert m.weights[0] == pytest.approx(0.414214, abs=1e-6)
    assert m.weights[2] == pytest.approx(0.292893, abs=1e-6)
    assert (1, -1) in m.directions


def test_knight8_weights():
    m = build_direction_model("knight8")
    assert m.size == 8
    assert m.weights[0] == pytest.approx(0.236068, abs=1e-6)
    assert m.weights[2] == pytest.approx(math.sqrt(5) - 1.5 * math.sqrt(2))
    assert all(w == pytest.approx((1 + math.sqrt(2) - math.sqrt(5)) / 2) for w in m.weights[4:])
    assert all(math.gcd(abs(a), abs(b)) == 1 for a, b in m.directions)


def test_model_validation():
    with pytest.raises(ValueError):
        DirectionModel(((0, 1),), (1.0, 2.0))
    with pytest.raises(ValueError):
        DirectionModel(((0, 0),), (1.0,))
    with pytest.raises(ValueError):
        DirectionModel(((0, 1),), (0.0,))


def test_difference_examples():
    assert directional_difference(np.array([[3.0, 5.0]]), (0, 1)).ravel().tolist() == [2.0]
    d = directional_difference(np.array([[0.0, 0.0], [1.0, 1.0]]), (1, 0))
    assert sorted(d.ravel().tolist()) == [1.0, 1.0]
    assert np.all(directional_difference(np.array([[0.0, 0.0], [1.0, 1.0]]), (0, 1)) == 0)


@given(small_images, directions)
def test_difference_matches_loop(u, a):
    d = directional_difference(u, a)
    expected = loop_differences(u, a)
    assert d.size == len(expected)
    r0, c0 = max(0, -a[0]), max(0, -a[1])
    for (i, j), v in expected.items():
        assert d[i - r0, j - c0] == v


@given(st.floats(-10, 10), directions)
def test_constant_has_no_differences(c, a):
    assert np.all(directional_difference(np.full((5, 7), c), a) == 0)


@given(small_images, directions, st.floats(-3, 3))
def test_jumps_invariant_under_offset(u, a, c):
    assert jump_count(u + round(c, 1), a) == jump_count(u, a)


row_model = DirectionModel(((0, 1),), (1.0,))


def test_potts_energy_examples():
    f = np.array([[1.0, 1.0, 5.0, 5.0]])
    A = identity_operator(1, 4)
    assert potts_energy(A, f, f, 1.0, row_model) == 1.0
    assert potts_energy(A, f, np.full((1, 4), 3.0), 1.0, row_model) == 16.0
    assert potts_energy(identity_operator(3, 3), np.full((3, 3), 2.0), np.full((3, 3), 2.0), 5.0, build_direction_model("compass4")) == 0.0


def test_potts_energy_dimension_mismatch():
    with pytest.raises(ValueError):
        potts_energy(identity_operator(2, 2), np.zeros((2, 2)), np.zeros((3, 2)), 1.0, row_model)


@settings(max_examples=50)
@given(small_images, st.floats(0.01, 5), st.floats(0.01, 5))
def test_potts_energy_monotone_in_gamma(u, g1, g2):
    m = build_direction_model("compass4")
    A = identity_operator(*u.shape)
    f = np.zeros(u.shape)
    lo, hi = sorted((g1, g2))
    assert potts_energy(A, f, u, lo, m) <= potts_energy(A, f, u, hi, m)


def test_relaxed_energy_single_pixel():
    # S=2, u1=0, u2=1 on a 1x1 grid, f=0: data (0 + 1)/2, no jumps, coupling 3*1
    model = DirectionModel(((0, 1), (1, 0)), (1.0, 1.0))
    stack = np.array([[[0.0]], [[1.0]]])
    e = relaxed_energy(identity_operator(1, 1), np.zeros((1, 1)), stack, 100.0, 3.0, CouplingScheme.full(2), model)
    assert e == pytest.approx(0.5 + 3.0)


@settings(max_examples=30)
@given(small_images, st.floats(0.01, 100), st.floats(0.01, 10))
def test_relaxed_equals_potts_on_diagonal(u, rho, gamma):
    m = build_direction_model("compass4")
    A = identity_operator(*u.shape)
    f = np.ones(u.shape)
    stack = np.repeat(u[None], 4, axis=0)
    for scheme in (CouplingScheme.full(4), CouplingScheme.cyclic(4)):
        assert relaxed_energy(A, f, stack, gamma, rho, scheme, m) == pytest.approx(potts_energy(A, f, u, gamma, m))


def test_relaxed_energy_linear_in_rho():
    rng = np.random.default_rng(3)
    m = build_direction_model("compass4")
    stack = rng.normal(size=(4, 5, 5))
    A = identity_operator(5, 5)
    f = rng.normal(size=(5, 5))
    scheme = CouplingScheme.cyclic(4)
    e1 = relaxed_energy(A, f, stack, 0.3, 1.0, scheme, m)
    e2 = relaxed_energy(A, f, stack, 0.3, 2.0, scheme, m)
    e0 = relaxed_energy(A, f, stack, 0.3, 1e-300, scheme, m)
    assert e2 - e0 == pytest.approx(2 * (e1 - e0))
