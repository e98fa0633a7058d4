import numpy as np
import pytest

from osqm.grid import PhaseGrid
from osqm.oracle import (DensityOperator, OperatorMatrix, VonNeumannCoupling,
                         WaveFunction, kinetic_operator, measurement_premeasurement,
                         momentum_operator, operator_sqrt, position_operator,
                         povm_apply, schrodinger_propagate, tensor_state)
from osqm.scenarios import initial_state_preset
from osqm.weyl import WeylSymbol, weyl_operator_from_symbol
from osqm.wigner import coherent_state


@pytest.fixture(scope="module")
def hosc(grid64):
    X, P = grid64.phase_mesh()
    return weyl_operator_from_symbol(WeylSymbol(grid64, (X ** 2 + P ** 2) / 2 + 0j))


def test_propagate_zero_time(grid64, hosc):
    psi = coherent_state(grid64, 0.5, 0.5)
    out = schrodinger_propagate(psi, hosc, 0.0)
    assert np.abs(out.values - psi.values).max() < 1e-12


def test_propagate_eigenstate_pure_phase(grid64, hosc):
    for k in (0, 2, 5):
        psi = initial_state_preset(grid64, "oscillator-eigenstate", {"k": k})
        out = schrodinger_propagate(psi, hosc, 1.3)
        ov = out.overlap(psi)
        assert abs(abs(ov) - 1) < 1e-10
        assert abs(ov - np.exp(-1j * (k + 0.5) * 1.3)) < 1e-6


def test_propagate_unitarity(grid64, hosc):
    psi = coherent_state(grid64, 1.0, -0.5)
    out = schrodinger_propagate(psi, hosc, 3.7)
    assert abs(out.norm_sq() - 1) < 1e-10


def test_coherent_state_rotates(grid64, hosc):
    psi = coherent_state(grid64, 1.0, 0.5)
    out = schrodinger_propagate(psi, hosc, np.pi / 2)
    target = coherent_state(grid64, 0.5, -1.0)
    assert abs(out.overlap(target)) ** 2 > 1 - 1e-9


def test_propagate_keyframed_segments(grid64, hosc):
    psi = coherent_state(grid64, 1.0, 0.0)
    once = schrodinger_propagate(psi, hosc, 1.0)
    segmented = schrodinger_propagate(psi, [(0.4, hosc), (0.6, hosc)], 0.0)
    assert np.abs(once.values - segmented.values).max() < 1e-10


def test_propagate_rejects_non_hermitian(grid64):
    m = OperatorMatrix(grid64, 1j * np.eye(grid64.hilbert_dim))
    psi = coherent_state(grid64, 0, 0)
    with pytest.raises(ValueError):
        schrodinger_propagate(psi, m, 1.0)


def test_operator_sqrt_identity(grid64):
    eye = OperatorMatrix(grid64, np.eye(grid64.hilbert_dim, dtype=complex),
                         hermitian=True, psd=True)
    root = operator_sqrt(eye)
    assert np.abs(root.matrix - eye.matrix).max() < 1e-12


def test_operator_sqrt_projector_fixed_point(grid64):
    v = coherent_state(grid64, 0.5, 0.5).to_vector()
    proj = OperatorMatrix(grid64, np.outer(v, v.conj()), hermitian=True, psd=True)
    root = operator_sqrt(proj)
    assert np.abs(root.matrix - proj.matrix).max() < 1e-8


def test_operator_sqrt_reconstructs_random_psd(grid64, rng):
    a = rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64))
    psd = a @ a.conj().T / 64
    m = OperatorMatrix(grid64, psd, hermitian=True, psd=True)
    root = operator_sqrt(m)
    assert np.abs(root.matrix @ root.matrix - psd).max() < 1e-8


def test_operator_sqrt_rejects_non_psd(grid64):
    m = OperatorMatrix(grid64, -np.eye(grid64.hilbert_dim, dtype=complex),
                       hermitian=True)
    with pytest.raises(ValueError):
        operator_sqrt(m)


def test_povm_identity_effect(grid64):
    rho = DensityOperator.pure(coherent_state(grid64, 1.0, 0.0))
    eye = OperatorMatrix(grid64, np.eye(grid64.hilbert_dim, dtype=complex),
                         hermitian=True, psd=True)
    outcome, post = povm_apply(rho, [eye], rng_sample=0.37)
    assert outcome == 0
    assert np.abs(post.matrix - rho.matrix).max() < 1e-12


def test_povm_projective_split_on_superposition(grid64):
    k0 = initial_state_preset(grid64, "oscillator-eigenstate", {"k": 0})
    k1 = initial_state_preset(grid64, "oscillator-eigenstate", {"k": 1})
    plus = WaveFunction(grid64, (k0.values + k1.values) / np.sqrt(2))
    rho = DensityOperator.pure(plus)
    v0, v1 = k0.to_vector(), k1.to_vector()
    p0 = np.outer(v0, v0.conj())
    p1 = np.outer(v1, v1.conj())
    rest = np.eye(grid64.hilbert_dim) - p0 - p1
    effects = [OperatorMatrix(grid64, p, hermitian=True) for p in (p0, p1, rest)]
    # outcome flips across the half draw: p = (1/2, 1/2, 0)
    out_lo, post_lo = povm_apply(rho, effects, rng_sample=0.25)
    out_hi, post_hi = povm_apply(rho, effects, rng_sample=0.75)
    assert (out_lo, out_hi) == (0, 1)
    assert abs(abs(np.vdot(v0, _top_vec(post_lo))) - 1) < 1e-8
    assert abs(abs(np.vdot(v1, _top_vec(post_hi))) - 1) < 1e-8


def _top_vec(rho):
    import scipy.linalg
    _, vecs = scipy.linalg.eigh(rho.matrix)
    return vecs[:, -1]


def test_povm_empirical_frequencies(grid64, rng):
    k0 = initial_state_preset(grid64, "oscillator-eigenstate", {"k": 0})
    k1 = initial_state_preset(grid64, "oscillator-eigenstate", {"k": 1})
    plus = WaveFunction(grid64, (k0.values + k1.values) / np.sqrt(2))
    rho = DensityOperator.pure(plus)
    v0, v1 = k0.to_vector(), k1.to_vector()
    p0 = np.outer(v0, v0.conj())
    rest = np.eye(grid64.hilbert_dim) - p0
    effects = [OperatorMatrix(grid64, p, hermitian=True) for p in (p0, rest)]
    draws = rng.random(100_000)
    counts = 0
    probs = np.array([np.einsum("ij,ji->", e.matrix, rho.matrix).real
                      for e in effects])
    assert abs(probs.sum() - 1) < 1e-10
    cdf = np.cumsum(probs)
    outcomes = np.searchsorted(cdf, draws, side="right")
    freq = (outcomes == 0).mean()
    sigma = np.sqrt(0.25 / draws.size)
    assert abs(freq - 0.5) < 4 * sigma


def test_povm_incomplete_effects_rejected(grid64):
    rho = DensityOperator.pure(coherent_state(grid64, 0, 0))
    half = OperatorMatrix(grid64, 0.5 * np.eye(grid64.hilbert_dim, dtype=complex),
                          hermitian=True, psd=True)
    with pytest.raises(ValueError, match="identity"):
        povm_apply(rho, [half], rng_sample=0.5)


# ---------------------------------------------------------------------------
# premeasurement


def _pointer_setup():
    g = PhaseGrid.create(32, 8.0)
    ready = coherent_state(g, 0.0, 0.0)
    # pointer shifts: displace by 0 / +4 in position (exact spectral shifts)
    from osqm.spectral import cdft, cidft

    def shift_op(a):
        n = g.n(0)
        f = cdft(np.eye(n), axis=0) / np.sqrt(n)
        phases = np.exp(-1j * a * g.p(0) / g.hbar)
        return OperatorMatrix(g, f.conj().T @ (phases[:, None] * f) / 1.0)

    return g, ready, shift_op


def test_premeasurement_eigenstate_input():
    g, ready, shift_op = _pointer_setup()
    sys_grid = PhaseGrid.create(32, 8.0)
    up = coherent_state(sys_grid, -2.5, 0.0)
    down = coherent_state(sys_grid, 2.5, 0.0)
    vu, vd = up.to_vector(), down.to_vector()
    projs = [OperatorMatrix(sys_grid, np.outer(vu, vu.conj()), hermitian=True),
             OperatorMatrix(sys_grid,
                            np.eye(sys_grid.hilbert_dim) - np.outer(vu, vu.conj()),
                            hermitian=True)]
    coupling = VonNeumannCoupling([shift_op(-4.0), shift_op(4.0)], projs)
    out = measurement_premeasurement(ready, up, coupling)
    expected = tensor_state(coherent_state(g, -4.0, 0.0), up)
    assert abs(out.overlap(expected)) ** 2 > 1 - 1e-8


def test_premeasurement_equal_superposition():
    g, ready, shift_op = _pointer_setup()
    sys_grid = PhaseGrid.create(32, 8.0)
    up = coherent_state(sys_grid, -2.5, 0.0)
    down = coherent_state(sys_grid, 2.5, 0.0)
    vu, vd = up.to_vector(), down.to_vector()
    pu = np.outer(vu, vu.conj())
    projs = [OperatorMatrix(sys_grid, pu, hermitian=True),
             OperatorMatrix(sys_grid, np.eye(sys_grid.hilbert_dim) - pu,
                            hermitian=True)]
    coupling = VonNeumannCoupling([shift_op(-4.0), shift_op(4.0)], projs)
    obs = WaveFunction(sys_grid, (up.values + down.values) / np.sqrt(2),
                       normalized=False).normalize()
    out = measurement_premeasurement(ready, obs, coupling)
    assert abs(out.norm_sq() - 1) < 1e-10
    b1 = tensor_state(coherent_state(g, -4.0, 0.0), up)
    b2 = tensor_state(coherent_state(g, 4.0, 0.0), down)
    a1 = out.overlap(b1)
    a2 = out.overlap(b2)
    assert abs(abs(a1) ** 2 - 0.5) < 1e-3
    assert abs(abs(a2) ** 2 - 0.5) < 1e-3


def test_premeasurement_unequal_amplitudes_preserved():
    g, ready, shift_op = _pointer_setup()
    sys_grid = PhaseGrid.create(32, 8.0)
    up = coherent_state(sys_grid, -2.5, 0.0)
    down = coherent_state(sys_grid, 2.5, 0.0)
    vu = up.to_vector()
    pu = np.outer(vu, vu.conj())
    projs = [OperatorMatrix(sys_grid, pu, hermitian=True),
             OperatorMatrix(sys_grid, np.eye(sys_grid.hilbert_dim) - pu,
                            hermitian=True)]
    coupling = VonNeumannCoupling([shift_op(-4.0), shift_op(4.0)], projs)
    obs = WaveFunction(sys_grid, 0.6 * up.values + 0.8 * down.values,
                       normalized=False).normalize()
    out = measurement_premeasurement(ready, obs, coupling)
    assert abs(out.norm_sq() - 1) < 1e-10
    b1 = tensor_state(coherent_state(g, -4.0, 0.0), up)
    assert abs(abs(out.overlap(b1)) ** 2 - 0.36) < 1e-3


def test_premeasurement_rejects_overlapping_pointers():
    g, ready, shift_op = _pointer_setup()
    sys_grid = PhaseGrid.create(32, 8.0)
    up = coherent_state(sys_grid, -2.5, 0.0)
    vu = up.to_vector()
    pu = np.outer(vu, vu.conj())
    projs = [OperatorMatrix(sys_grid, pu, hermitian=True),
             OperatorMatrix(sys_grid, np.eye(sys_grid.hilbert_dim) - pu,
                            hermitian=True)]
    coupling = VonNeumannCoupling([shift_op(0.0), shift_op(0.5)], projs)
    with pytest.raises(ValueError, match="orthogonal"):
        measurement_premeasurement(ready, up, coupling)


def test_kinetic_and_position_operators(grid64):
    xop = position_operator(grid64)
    assert np.abs(np.diag(xop.matrix) - grid64.x(0)).max() < 1e-14
    pop = momentum_operator(grid64)
    psi = coherent_state(grid64, 0.0, 1.2)
    assert abs(pop.expectation(psi).real - 1.2) < 1e-9
