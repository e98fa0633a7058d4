import numpy as np
import pytest

from osqm.spectral import (cdft, cidft, centered_chords, spectral_derivative,
                           upsample2, x_to_p, p_to_x)


def test_cdft_inverse_pair(rng):
    f = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    assert np.abs(cidft(cdft(f)) - f).max() < 1e-13


def test_cdft_is_the_centered_kernel():
    n = 16
    f = np.zeros(n)
    f[3] = 1.0
    u = np.arange(n) - n // 2
    expected = np.exp(-2j * np.pi * u * (3 - n // 2) / n)
    assert np.abs(cdft(f) - expected).max() < 1e-13


def test_upsample_preserves_nodes(rng):
    f = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    fine = upsample2(f)
    assert np.abs(fine[::2] - f).max() < 1e-13


def test_upsample_exact_for_bandlimited():
    n = 32
    j = np.arange(n) - n // 2
    # mode inside the open band interpolates exactly at half points
    f = np.cos(2 * np.pi * 3 * j / n + 0.4)
    fine = upsample2(f)
    jf = (np.arange(2 * n) - n) / 2
    exact = np.cos(2 * np.pi * 3 * jf / n + 0.4)
    assert np.abs(fine - exact).max() < 1e-12


def test_upsample_keeps_real_real(rng):
    f = rng.standard_normal(32)
    assert np.abs(upsample2(f).imag).max() < 1e-13


def test_momentum_transform_unitary(grid64, rng):
    dx = grid64.dx[0]
    psi = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    phi = x_to_p(psi, dx, grid64.hbar)
    dp = grid64.dp[0]
    assert abs((np.abs(phi) ** 2).sum() * dp -
               (np.abs(psi) ** 2).sum() * dx) < 1e-12
    back = p_to_x(phi, dx, grid64.hbar)
    assert np.abs(back - psi).max() < 1e-12


def test_spectral_derivative_on_modes():
    n = 64
    dx = 0.3
    x = (np.arange(n) - n // 2) * dx
    period = n * dx
    k = 2 * np.pi * 4 / period
    f = np.sin(k * x)
    assert np.abs(spectral_derivative(f, dx) - k * np.cos(k * x)).max() < 1e-11
    assert np.abs(spectral_derivative(f, dx, order=2) + k ** 2 * f).max() < 1e-10


def test_centered_chords_layout():
    assert list(centered_chords(8)) == [0, 1, 2, 3, -4, -3, -2, -1]
