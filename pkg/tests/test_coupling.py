import math

import numpy as np
import pytest
from oracles import assemble_B

from pottsrecon.coupling import (
    CouplingKind,
    CouplingScheme,
    choose_rho,
    choose_t,
    l_rho,
    l_rho_squared_bound,
    sigma1,
)
from pottsrecon.operators import MatrixOperator, estimate_norm


def test_constructors():
    full = CouplingScheme.full(4)
    assert full.kind is CouplingKind.FULL and len(full.pairs()) == 6
    cyc = CouplingScheme.cyclic(4)
    assert [(s, t) for s, t, _ in cyc.pairs()] == [(0, 1), (0, 3), (1, 2), (2, 3)]
    assert np.array_equal(cyc.matrix(), cyc.matrix().T)
    assert np.all(np.diag(full.matrix()) == 0)
    assert CouplingScheme.from_name("CYCLIC", 3).kind is CouplingKind.CYCLIC
    with pytest.raises(ValueError):
        CouplingScheme.from_name("ring", 4)
    with pytest.raises(ValueError):
        CouplingScheme.full(1)
    with pytest.raises(ValueError):
        CouplingScheme.general([[0, -1], [-1, 0]])


def test_general_is_symmetrized_from_upper_triangle():
    g = CouplingScheme.general([[0, 2, 0], [9, 0, 1], [0, 0, 0]])
    assert g.matrix()[1, 0] == 2 and g.matrix()[2, 1] == 1


def test_laplacian_rows_sum_to_zero():
    for sch in (CouplingScheme.full(5), CouplingScheme.cyclic(5), CouplingScheme.general(np.triu(np.ones((4, 4)) * 0.5, 1))):
        np.testing.assert_allclose(sch.laplacian().sum(axis=1), 0)


def test_l_rho_examples():
    assert l_rho(1.0, 4, 1.0, CouplingScheme.full(4)) ** 2 == pytest.approx(4.25, rel=1e-8)
    assert l_rho(1.0, 4, 1.0, CouplingScheme.full(4)) ** 2 > 4.25
    assert l_rho(0.0, 4, 1.0, CouplingScheme.cyclic(4)) ** 2 == pytest.approx(4.0, rel=1e-8)
    odd = 2 - 2 * math.cos(math.pi * 4 / 5)
    assert l_rho_squared_bound(0.0, 1.0, CouplingScheme.cyclic(5)) == pytest.approx(odd)
    general = CouplingScheme.general(np.ones((4, 4)))
    assert l_rho_squared_bound(0.0, 1.0, general) == pytest.approx(6.0)
    assert l_rho_squared_bound(0.0, 1.0, general) >= l_rho_squared_bound(0.0, 1.0, CouplingScheme.full(4))
    with pytest.raises(ValueError):
        l_rho(1.0, 4, 0.0, CouplingScheme.full(4))
    with pytest.raises(ValueError):
        l_rho(1.0, 3, 1.0, CouplingScheme.full(4))


@pytest.mark.parametrize("S", [2, 3, 4, 5, 8])
@pytest.mark.parametrize("kind", ["full", "cyclic"])
@pytest.mark.parametrize("rho", [0.1, 1.0, 10.0])
def test_spectral_soundness(S, kind, rho):
    rng = np.random.default_rng(S * 100 + int(rho * 10))
    scheme = CouplingScheme.from_name(kind, S)
    M = rng.normal(size=(12, 16)) / 4
    B = assemble_B(M, S, rho, scheme)
    bound = l_rho(np.linalg.norm(M, 2), S, rho, scheme)
    assert np.linalg.norm(B, 2) <= bound
    assert estimate_norm(MatrixOperator(B, (B.shape[1], 1))) <= bound


def test_full_bound_is_tight():
    S, rho = 4, 2.0
    B = assemble_B(np.zeros((3, 3)), S, rho, CouplingScheme.full(S))
    assert np.linalg.norm(B, 2) ** 2 == pytest.approx(S * rho)


def test_sigma1():
    assert sigma1(CouplingScheme.cyclic(4)) == pytest.approx(2.0)
    assert sigma1(CouplingScheme.full(4)) == 4.0
    assert sigma1(CouplingScheme.full(2)) == 2.0
    assert sigma1(CouplingScheme.full(2), numeric=True) == pytest.approx(2.0)
    assert sigma1(CouplingScheme.cyclic(2)) == pytest.approx(2.0)
    for S in range(3, 9):
        for sch in (CouplingScheme.full(S), CouplingScheme.cyclic(S)):
            assert sigma1(sch, numeric=True) == pytest.approx(sigma1(sch), abs=1e-9)
    with pytest.raises(ValueError):
        sigma1(CouplingScheme.general([[0, 0, 0], [0, 0, 1], [0, 1, 0]]))


def test_sigma1_matches_explicit_constraint_matrix():
    w = np.array([[0, 1.0, 0.5], [0, 0, 2.0], [0, 0, 0]])
    sch = CouplingScheme.general(w)
    C = np.array([[w[s, t] * (e == s) - w[s, t] * (e == t) for e in range(3)] for s, t, _ in sch.pairs()])
    eig = np.sort(np.linalg.eigvalsh(C.T @ C))
    assert sigma1(sch) == pytest.approx(eig[1])


def test_choose_rho():
    full = CouplingScheme.full(4)
    assert choose_rho(0.1, full, 4, 1.0, 10.0) == pytest.approx(50.0, rel=1e-5)
    assert choose_rho(0.1, full, 4, 1.0, 10.0) > 50.0
    assert choose_rho(0.1, full, 4, 1.0, 20.0) == pytest.approx(2 * choose_rho(0.1, full, 4, 1.0, 10.0))
    ratio = choose_rho(0.1, CouplingScheme.cyclic(4), 4, 1.0, 10.0) / choose_rho(0.1, full, 4, 1.0, 10.0)
    assert ratio == pytest.approx(math.sqrt(2))
    products = [eps * choose_rho(eps, full, 4, 2.0, 3.0) for eps in (1e-3, 0.1, 7.0)]
    assert max(products) == pytest.approx(min(products), rel=1e-12)
    with pytest.raises(ValueError):
        choose_rho(0.0, full, 4, 1.0, 1.0)


def test_choose_t():
    assert choose_t(CouplingScheme.full(4), 4, 1.0, 10.0) == pytest.approx(5.0, rel=1e-5)
    assert choose_t(CouplingScheme.full(4), 4, 1.0, 10.0) > 5.0
    assert choose_t(CouplingScheme.full(4), 4, 1.0, 0.0) == 0.0
    assert choose_t(CouplingScheme.cyclic(4), 4, 1.0, 10.0) == pytest.approx(7.0711, rel=1e-4)
