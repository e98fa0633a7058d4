import numpy as np
import pytest

from osqm.dynamics import (EvolutionUnstableError, Hamiltonian, HamiltonianTerm,
                           evolve_lvn)
from osqm.grid import PhaseGrid
from osqm.oracle import WaveFunction, schrodinger_propagate
from osqm.weyl import WeylSymbol, mean_value, weyl_operator_from_symbol
from osqm.wigner import coherent_state, wigner_from_wavefunction


@pytest.fixture(scope="module")
def osc(grid64):
    return Hamiltonian(grid64, [
        HamiltonianTerm((("p", 0, lambda p: p ** 2 / 2),), label="kinetic"),
        HamiltonianTerm((("x", 0, lambda x: x ** 2 / 2),), label="potential"),
    ])


@pytest.fixture(scope="module")
def w0(grid64):
    return wigner_from_wavefunction(coherent_state(grid64, 1.0, 0.3))


def test_zero_time_is_identity(grid64, osc, w0):
    out = evolve_lvn(w0, osc, 0.0, 0.01)
    assert np.abs(out.values - w0.values).max() == 0.0


def test_oscillator_full_period_returns(grid64, osc, w0):
    out = evolve_lvn(w0, osc, 2 * np.pi, 0.005, verify_dt=False)
    assert np.abs(out.values - w0.values).max() < 1e-5


def test_free_particle_matches_oracle(grid64, w0):
    free = Hamiltonian(grid64, [HamiltonianTerm((("p", 0, lambda p: p ** 2 / 2),))])
    out = evolve_lvn(w0, free, 1.0, 0.005, verify_dt=False)
    hm = weyl_operator_from_symbol(free.symbol())
    psi = coherent_state(grid64, 1.0, 0.3)
    oracle = wigner_from_wavefunction(schrodinger_propagate(psi, hm, 1.0))
    assert np.abs(out.values - oracle.values).max() < 1e-5


def test_mass_conserved_exactly(grid64, osc, w0):
    out = evolve_lvn(w0, osc, 1.0, 0.01, verify_dt=False)
    assert abs(out.integral() - 1) < 1e-12


def test_purity_conserved(grid64, osc, w0):
    out = evolve_lvn(w0, osc, 2 * np.pi, 0.01, verify_dt=False)
    assert abs(out.purity() - w0.purity()) < 1e-6


def test_evolution_linearity(grid64, osc):
    wa = wigner_from_wavefunction(coherent_state(grid64, -1.5, 0.0))
    wb = wigner_from_wavefunction(coherent_state(grid64, 1.0, 0.5))
    mix_vals = 0.3 * wa.values + 0.7 * wb.values
    from osqm.wigner import WignerState
    mix = WignerState(grid64, mix_vals)
    t, dt = 0.7, 0.01
    out_mix = evolve_lvn(mix, osc, t, dt, verify_dt=False)
    out_a = evolve_lvn(wa, osc, t, dt, verify_dt=False)
    out_b = evolve_lvn(wb, osc, t, dt, verify_dt=False)
    assert np.abs(out_mix.values - 0.3 * out_a.values - 0.7 * out_b.values).max() < 1e-8


def test_ehrenfest_means_follow_classical_flow(grid64, osc, w0):
    X, P = grid64.phase_mesh()
    xs = WeylSymbol(grid64, X + 0j)
    ps = WeylSymbol(grid64, P + 0j)
    for t in (0.5, 1.2):
        out = evolve_lvn(w0, osc, t, 0.005, verify_dt=False)
        x_exp = 1.0 * np.cos(t) + 0.3 * np.sin(t)
        p_exp = 0.3 * np.cos(t) - 1.0 * np.sin(t)
        assert abs(mean_value(xs, out) - x_exp) < 1e-6
        assert abs(mean_value(ps, out) - p_exp) < 1e-6


def test_double_well_quartic_term(grid64):
    from osqm.scenarios import hamiltonian_preset
    h = hamiltonian_preset(grid64, "double-well", {"a": 0.15, "b": 2.0})
    psi = coherent_state(grid64, -2.0, 0.0)
    w = wigner_from_wavefunction(psi)
    out = evolve_lvn(w, h, 0.5, 0.002, verify_dt=False)
    hm = weyl_operator_from_symbol(h.symbol())
    oracle = wigner_from_wavefunction(
        schrodinger_propagate(psi, hm, 0.5), check_containment=False)
    assert np.abs(out.values - oracle.values).max() < 1e-5


def test_time_dependent_coefficient(grid64, w0):
    ramp = Hamiltonian(grid64, [
        HamiltonianTerm((("p", 0, lambda p: p ** 2 / 2),)),
        HamiltonianTerm((("x", 0, lambda x: x),),
                        coefficient=lambda t: np.sin(t)),
    ])
    out = evolve_lvn(w0, ramp, 0.5, 0.005, verify_dt=False)
    assert abs(out.integral() - 1) < 1e-12  # runs and conserves mass


def test_instability_detection(grid64, osc, w0):
    with pytest.raises(EvolutionUnstableError):
        evolve_lvn(w0, osc, 5.0, 0.5)  # far beyond the RK4 stability bound


def test_composite_coupling_term_matches_oracle():
    g1 = PhaseGrid.create(32, 8.0)
    g2 = PhaseGrid.create(32, 8.0)
    gg = PhaseGrid.product(g1, g2)
    from osqm.oracle import tensor_state
    psi = tensor_state(coherent_state(g1, 0.0, 0.0),
                       coherent_state(g2, -1.0, 0.0))
    w0 = wigner_from_wavefunction(psi)
    h = Hamiltonian(gg, [HamiltonianTerm(
        (("p", 0, lambda p: p), ("x", 1, lambda x: np.tanh(x))),
        coefficient=0.8)])
    out = evolve_lvn(w0, h, 0.4, 0.005, verify_dt=False)
    hm = weyl_operator_from_symbol(h.symbol())
    oracle = wigner_from_wavefunction(
        schrodinger_propagate(psi, hm, 0.4), check_containment=False)
    assert np.abs(out.values - oracle.values).max() < 1e-6
