"""Wigner quasiprobability states and the maps to and from Hilbert space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ContainmentError, GridMismatchError, PhaseGrid
from .oracle import DensityOperator, OperatorMatrix, WaveFunction
from .spectral import alternating_signs, upsample2
from .weyl import WeylSymbol, _index_tables, weyl_operator_from_symbol, \
    weyl_symbol_from_operator

__all__ = [
    "WignerState",
    "wigner_from_wavefunction",
    "wigner_from_density",
    "density_from_wigner",
    "wavefunction_from_wigner",
    "coherent_state",
    "coherent_wigner",
    "marginals",
]


@dataclass
class WignerState:
    """Real quasiprobability array over the phase grid, unit integral."""

    grid: PhaseGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.phase_shape:
            raise ValueError("Wigner array shape does not match grid")
        tot = self.integral()
        if abs(tot - 1) > 1e-8:
            raise ValueError(f"Wigner function integrates to {tot!r}, not 1")

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def purity(self) -> float:
        """(2 pi hbar)^n int W^2 dz; 1 for pure states."""
        g = self.grid
        return float((self.values ** 2).sum() * g.cell_volume
                     * (2 * np.pi * g.hbar) ** g.dof)

    def as_symbol(self) -> WeylSymbol:
        """The Weyl symbol of the density operator, (2 pi hbar)^n W."""
        g = self.grid
        return WeylSymbol(g, self.values * (2 * np.pi * g.hbar) ** g.dof + 0j)


def _pure_chord_block(v: np.ndarray, n: int) -> np.ndarray:
    """E[c, t] = v[(t+c) % n] conj(v[t]) for a flat 1-dof vector."""
    _, _, _, e_rows, _ = _index_tables(n)
    t = np.arange(n)
    return v[e_rows] * v.conj()[t][None, :]


def wigner_from_wavefunction(psi: WaveFunction, check_containment: bool = True) -> WignerState:
    """Wigner function of a pure state via the chord transform.

    Matches wigner_from_density(pure density) to machine precision because
    both run the same kernel path.
    """
    grid = psi.grid
    if check_containment:
        grid.check_containment(np.abs(psi.values) ** 2, what="|psi|^2")
    v = psi.to_vector()
    scale = 1.0 / (2 * np.pi * grid.hbar) ** grid.dof
    if grid.dof == 1:
        e = _pure_chord_block(v, grid.n(0))
        w = _chord_to_symbol_axes(e, grid.n(0))
        return WignerState(grid, w.real * scale)
    # dof 2: chord block over both dofs
    n1, n2 = grid.n(0), grid.n(1)
    e_rows1 = _index_tables(n1)[3]
    e_rows2 = _index_tables(n2)[3]
    vv = v.reshape(n1, n2)
    # e[c1, t1, c2, t2] = v[(t1+c1)%n1, (t2+c2)%n2] conj(v[t1, t2])
    bra = vv[e_rows1.reshape(n1, n1, 1, 1), e_rows2.reshape(1, 1, n2, n2)]
    ket = vv.conj().reshape(1, n1, 1, n2)
    e = (bra * ket).transpose(0, 2, 1, 3)       # (c1, c2, t1, t2)
    w = _chord_to_symbol_axes(np.moveaxis(e, [1, 3], [-2, -1]), n2)  # (c1, t1, j2, m2)
    w = _chord_to_symbol_axes(np.moveaxis(w, [0, 1], [-2, -1]), n1)  # (j2, m2, j1, m1)
    w = w.transpose(2, 0, 3, 1)                                      # (j1, j2, m1, m2)
    return WignerState(grid, w.real * scale)


def _chord_to_symbol_axes(e: np.ndarray, n: int) -> np.ndarray:
    """Shared tail of the symbol map: last axes (c, t) -> (x, p)."""
    _, _, _, _, jw = _index_tables(n)
    ef = upsample2(e, axis=-1)
    crow = np.broadcast_to(np.arange(n)[None, :], (n, n))
    b = ef[..., crow, jw] * alternating_signs(n)
    return np.fft.fft(b, axis=-1)


def wigner_from_density(rho: DensityOperator) -> WignerState:
    """W = (Weyl symbol of rho) / (2 pi hbar)^n; linear in rho."""
    sym = weyl_symbol_from_operator(rho)
    g = rho.grid
    return WignerState(g, sym.values.real / (2 * np.pi * g.hbar) ** g.dof)


def density_from_wigner(w: WignerState) -> DensityOperator:
    """Quantize (2 pi hbar)^n W back to a density matrix."""
    m = weyl_operator_from_symbol(w.as_symbol()).matrix
    m = 0.5 * (m + m.conj().T)
    # clean tiny numerical drift so DensityOperator validation stays strict
    m = m / m.trace().real
    return DensityOperator(w.grid, m)


def wavefunction_from_wigner(w: WignerState, threshold: float = 1e-6) -> WaveFunction:
    """Recover psi from a pure-state Wigner function, phase fixed by
    arg psi(0) = 0.

    Needs |psi(0)|^2 = int W(0, p) dp above threshold; otherwise recover
    through density_from_wigner and its top eigenvector instead.
    """
    grid = w.grid
    if grid.dof != 1:
        raise NotImplementedError("direct recovery implemented for dof 1; "
                                  "use density_from_wigner for composites")
    n = grid.n(0)
    dp = grid.dp[0]
    at0 = float(w.values[n // 2, :].sum() * dp)
    if at0 <= threshold:
        raise ValueError(
            f"|psi(0)|^2 = {at0:.3e} below threshold {threshold:.1e}; recover via "
            "density_from_wigner and the top eigenvector")
    # g[a] = dp sum_m W(x_a / 2, p_m) e^{i x_a p_m / hbar} = psi(x_a) psi*(0)
    wf = upsample2(w.values, axis=0)            # fine x, coarse p
    a = np.arange(n)
    rows = wf[(a + n // 2) % (2 * n), :]        # W at x_a / 2
    ctr = a - n // 2
    mtil = a - n // 2
    phases = np.exp(2j * np.pi * np.outer(ctr, mtil) / n)
    g = dp * (rows * phases).sum(axis=1)
    psi0_conj = np.sqrt(g[n // 2].real)
    vals = g / psi0_conj
    psi = WaveFunction(grid, vals, normalized=False).normalize()
    return psi


def coherent_state(grid: PhaseGrid, x0, p0) -> WaveFunction:
    """Minimum-uncertainty Gaussian centered at (x0, p0).

    Position variance hbar/2 per axis; the Wigner function is the
    normalized Gaussian (pi hbar)^{-n} exp(-((x-x0)^2+(p-p0)^2)/hbar).
    Sampled as a periodized Gaussian so lattice translations are exact.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    if len(x0) != grid.dof or len(p0) != grid.dof:
        raise ValueError("center must supply one (x0, p0) pair per dof")
    hbar = grid.hbar
    sigma = np.sqrt(hbar / 2)
    for d in range(grid.dof):
        if abs(x0[d]) > grid.x_extents[d] - 6 * sigma:
            raise ContainmentError(f"x center {x0[d]} within 6 sigma of the edge")
        if abs(p0[d]) > grid.p_extents[d] - 6 * sigma:
            raise ContainmentError(f"p center {p0[d]} within 6 sigma of the edge")
    factors = []
    for d in range(grid.dof):
        x = grid.x(d)
        span = 2 * grid.x_extents[d]
        psi = np.zeros(grid.n(d), dtype=complex)
        for k in range(-3, 4):
            xs = x + k * span
            psi += np.exp(-(xs - x0[d]) ** 2 / (2 * hbar)
                          + 1j * p0[d] * (xs - x0[d] / 2) / hbar)
        psi *= (np.pi * hbar) ** (-0.25)
        factors.append(psi)
    vals = factors[0]
    for f in factors[1:]:
        vals = np.multiply.outer(vals, f)
    return WaveFunction(grid, vals, normalized=False).normalize()


def coherent_wigner(grid: PhaseGrid, x0, p0) -> WignerState:
    """Closed-form Gaussian Wigner function of a coherent state."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    mesh = grid.phase_mesh()
    n = grid.dof
    expo = np.zeros(grid.phase_shape)
    for d in range(n):
        expo += (mesh[d] - x0[d]) ** 2 + (mesh[n + d] - p0[d]) ** 2
    vals = np.exp(-expo / grid.hbar) / (np.pi * grid.hbar) ** n
    return WignerState(grid, vals / (vals.sum() * grid.cell_volume))


def marginals(w: WignerState) -> tuple[np.ndarray, np.ndarray]:
    """(position density, momentum density) by integrating W over the
    conjugate axes. The position marginal equals |psi(x)|^2 exactly by
    construction of the chord transform."""
    g = w.grid
    n = g.dof
    vol_p = np.prod([g.dp[d] for d in range(n)])
    vol_x = np.prod([g.dx[d] for d in range(n)])
    pos = w.values.sum(axis=tuple(range(n, 2 * n))) * vol_p
    mom = w.values.sum(axis=tuple(range(n))) * vol_x
    return pos, mom
