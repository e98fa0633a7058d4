import numpy as np
import pytest

from osqm.moyal import (moyal_bracket, moyal_product, moyal_product_truncated,
                        poly_bracket, poly_star)
from osqm.transitions import fit_loglog_slope
from osqm.grid import PhaseGrid
from osqm.weyl import WeylSymbol, weyl_operator_from_symbol, \
    weyl_symbol_from_operator
from osqm.wigner import coherent_state, wigner_from_wavefunction


def _gauss(grid, x0, p0, w):
    X, P = grid.phase_mesh()
    return WeylSymbol(grid, np.exp(-((X - x0) ** 2 + (P - p0) ** 2) / (2 * w ** 2)) + 0j)


def test_identity_star(grid64):
    b = _gauss(grid64, -0.4, 0.6, 1.1)
    one = WeylSymbol.constant(grid64, 1.0)
    assert np.abs(moyal_product(one, b).values - b.values).max() < 1e-13
    assert np.abs(moyal_product(b, one).values - b.values).max() < 1e-13


def test_star_matches_operator_product(grid64, rng):
    for _ in range(8):
        a = _gauss(grid64, *rng.uniform(-1.5, 1.5, 2), rng.uniform(0.9, 1.3))
        b = _gauss(grid64, *rng.uniform(-1.5, 1.5, 2), rng.uniform(0.9, 1.3))
        lhs = weyl_operator_from_symbol(moyal_product(a, b)).matrix
        rhs = weyl_operator_from_symbol(a).matrix @ weyl_operator_from_symbol(b).matrix
        assert np.abs(lhs - rhs).max() < 1e-10


def test_bracket_matches_oracle_commutator(grid64, rng):
    """{{A,B}} equals the symbol of [A_hat, B_hat]/(i hbar) for contained
    operands (the canonical pair itself is exercised by the polynomial
    algebra, where x*p - p*x = i hbar exactly)."""
    from osqm.oracle import OperatorMatrix
    a = _gauss(grid64, 0.5, -0.3, 1.0)
    b = _gauss(grid64, -0.4, 0.6, 1.1)
    br = moyal_bracket(a, b)
    ma = weyl_operator_from_symbol(a).matrix
    mb = weyl_operator_from_symbol(b).matrix
    comm = (ma @ mb - mb @ ma) / (1j * grid64.hbar)
    sym = weyl_symbol_from_operator(OperatorMatrix(grid64, comm))
    assert np.abs(br.values - sym.values).max() < 1e-10


def test_star_associativity(grid64, rng):
    a = _gauss(grid64, 0.5, -0.3, 1.0)
    b = _gauss(grid64, -0.4, 0.6, 1.1)
    c = _gauss(grid64, 0.2, 0.1, 0.9)
    lhs = moyal_product(moyal_product(a, b), c).values
    rhs = moyal_product(a, moyal_product(b, c)).values
    assert np.abs(lhs - rhs).max() < 1e-6


def test_pure_state_star_idempotency(grid64):
    w = wigner_from_wavefunction(coherent_state(grid64, 0.8, -0.5))
    ws = WeylSymbol(grid64, w.values + 0j)
    out = moyal_product(ws, ws)
    scale = 1 / (2 * np.pi * grid64.hbar)
    assert np.abs(out.values - scale * w.values).max() < 1e-9


def test_truncated_order_zero_is_pointwise(grid64):
    a = _gauss(grid64, 0.5, -0.3, 1.0)
    b = _gauss(grid64, -0.4, 0.6, 1.1)
    out = moyal_product_truncated(a, b, 0)
    assert np.abs(out.values - a.values * b.values).max() < 1e-14


def test_truncated_rejects_bad_order(grid64):
    a = _gauss(grid64, 0, 0, 1.0)
    with pytest.raises(ValueError):
        moyal_product_truncated(a, a, 7)


def test_truncated_orders_converge_in_hbar():
    """Residual against the full star scales like hbar^(order+1).

    The momentum extent shrinks with hbar at fixed N, so the sweep grid is
    sized to keep the fixed-width symbols contained at the smallest hbar.
    """
    residuals = {order: [] for order in (0, 1, 2)}
    hbars = [1.0, 0.5, 0.25]
    for hb in hbars:
        grid = PhaseGrid.create(96, 7.0, hb)
        a = _gauss(grid, 0.4, -0.2, 0.8)
        b = _gauss(grid, -0.3, 0.5, 0.8)
        full = moyal_product(a, b)
        for order in residuals:
            tr = moyal_product_truncated(a, b, order)
            residuals[order].append(np.abs(tr.values - full.values).max())
    for order, res in residuals.items():
        slope = fit_loglog_slope(hbars, res)
        assert slope > order + 0.7, (order, slope, res)


def test_poly_star_canonical_pair():
    out = poly_star({(1, 0): 1.0}, {(0, 1): 1.0}, hbar=1.0)
    assert out[(1, 1)] == pytest.approx(1.0)
    assert out[(0, 0)] == pytest.approx(0.5j)


def test_poly_star_order_one_matches_truncation():
    out = poly_star({(1, 0): 1.0}, {(0, 1): 1.0}, hbar=1.0, order=1)
    assert out[(0, 0)] == pytest.approx(0.5j)


def test_poly_star_quadratics_exact_at_order_two():
    a = {(2, 0): 0.3, (1, 1): -0.2, (0, 2): 0.5}
    b = {(2, 0): -0.1, (0, 2): 0.4, (1, 0): 0.7}
    full = poly_star(a, b, hbar=0.7)
    trunc = poly_star(a, b, hbar=0.7, order=2)
    for k in set(full) | set(trunc):
        assert full.get(k, 0) == pytest.approx(trunc.get(k, 0))


def test_poly_bracket_canonical():
    out = poly_bracket({(1, 0): 1.0}, {(0, 1): 1.0}, hbar=1.0)
    assert out == {(0, 0): pytest.approx(1.0)}


def test_poly_bracket_equals_poisson_for_quadratics():
    a = {(2, 0): 0.5, (0, 2): 0.5}
    b = {(1, 1): 1.0}
    br = poly_bracket(a, b, hbar=1.0)
    # {H, xp} = x dH/dp ... classical value: {a,b} = da/dx db/dp - db/dx da/dp
    # = x*x - p*p
    assert br[(2, 0)] == pytest.approx(1.0)
    assert br[(0, 2)] == pytest.approx(-1.0)


def test_poly_bracket_cubic_correction_scales_as_hbar_squared():
    x3 = {(3, 0): 1.0}
    p3 = {(0, 3): 1.0}
    hbars = [1.0, 0.5, 0.25]
    diffs = []
    for hb in hbars:
        moyal = poly_bracket(x3, p3, hb)
        poisson = {(2, 2): 9.0}
        delta = {k: moyal.get(k, 0) - poisson.get(k, 0)
                 for k in set(moyal) | set(poisson)}
        diffs.append(max(abs(v) for v in delta.values()))
    slope = fit_loglog_slope(hbars, diffs)
    assert abs(slope - 2.0) < 1e-6


def test_bracket_real_and_antisymmetric(grid64):
    a = _gauss(grid64, 0.5, -0.3, 1.0)
    b = _gauss(grid64, -0.4, 0.6, 1.1)
    br = moyal_bracket(a, b)
    assert br.hermitian
    br2 = moyal_bracket(b, a)
    assert np.abs(br.values + br2.values).max() < 1e-12
    assert np.abs(moyal_bracket(a, a).values).max() < 1e-12


def test_star_grid_mismatch(grid64):
    other = PhaseGrid.create(64, 8.0)
    a = _gauss(grid64, 0, 0, 1.0)
    b = _gauss(other, 0, 0, 1.0)
    from osqm.grid import GridMismatchError
    with pytest.raises(GridMismatchError):
        moyal_product(a, b)


def test_star_dof2_unsupported():
    g = PhaseGrid.create(16, 6.0, dof=2)
    a = WeylSymbol.constant(g, 1.0)
    with pytest.raises(NotImplementedError):
        moyal_product(a, a)
