"""Liouville-von Neumann evolution of Wigner states.

The right-hand side -{{W, H}} is applied term by term in the frequency
domain. Every Hamiltonian term is a product of single-variable factors
f(x_d) or g(p_d); for such factors the left/right star multiplications
are one-axis twisted convolutions (cyclic or negacyclic by the parity of
the conjugate frequency), which reproduces the dense-oracle evolution to
machine precision in space. Time stepping is classical RK4 with fixed dt.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .grid import GridMismatchError, PhaseGrid
from .spectral import cdft, cidft
from .weyl import WeylSymbol
from .wigner import WignerState

__all__ = [
    "HamiltonianTerm",
    "Hamiltonian",
    "EvolutionUnstableError",
    "evolve_lvn",
]


class EvolutionUnstableError(RuntimeError):
    """RK4 step too large for the spectral radius of the generator."""


@dataclass(frozen=True)
class HamiltonianTerm:
    """coefficient * product of factors; each factor is one-variable.

    factors: sequence of (kind, dof, profile) with kind in {"x", "p"} and
    profile a callable evaluated on that axis's coordinate array. At most
    one factor per (kind, dof) pair, and factors on the same dof must not
    mix x and p (that would not be a factorized Weyl symbol).
    """

    factors: tuple
    coefficient: Union[float, Callable[[float], float]] = 1.0
    label: str = ""

    def __post_init__(self):
        seen_dofs = set()
        for kind, dof, _ in self.factors:
            if kind not in ("x", "p"):
                raise ValueError("factor kind must be 'x' or 'p'")
            if dof in seen_dofs:
                raise ValueError("at most one factor per dof in a term")
            seen_dofs.add(dof)

    def coeff_at(self, t: float) -> float:
        if callable(self.coefficient):
            return float(self.coefficient(t))
        return float(self.coefficient)


@dataclass
class Hamiltonian:
    """Sum of factorized terms; renders to a real Weyl symbol on demand."""

    grid: PhaseGrid
    terms: Sequence[HamiltonianTerm]

    def symbol(self, t: float = 0.0) -> WeylSymbol:
        mesh = self.grid.phase_mesh()
        n = self.grid.dof
        vals = np.zeros(self.grid.phase_shape)
        for term in self.terms:
            part = np.ones(self.grid.phase_shape)
            for kind, dof, profile in term.factors:
                coord = mesh[dof] if kind == "x" else mesh[n + dof]
                part = part * profile(coord)
            vals += term.coeff_at(t) * part
        return WeylSymbol(self.grid, vals + 0j)

    def is_static(self) -> bool:
        return all(not callable(t.coefficient) for t in self.terms)


# ---------------------------------------------------------------------------
# frequency-domain factor application

@lru_cache(maxsize=16)
def _freq_tables(n: int):
    frq = np.arange(n) - n // 2
    mu = np.exp(1j * np.pi * frq / n)
    odd = (np.abs(frq) % 2).astype(bool)
    return frq, mu, odd


def _cdftn(arr: np.ndarray) -> np.ndarray:
    out = arr.astype(complex)
    for ax in range(arr.ndim):
        out = cdft(out, axis=ax)
    return out


def _cidftn(arr: np.ndarray) -> np.ndarray:
    out = arr
    for ax in range(arr.ndim):
        out = cidft(out, axis=ax)
    return out


class _FactorOp:
    """One-axis twisted convolution for a single-variable factor.

    For a factor f(x_d), left/right star multiplication acts on the
    frequency array by convolving along the x_d-frequency axis with the
    kernel fhat[u] e^{-i side pi u k / N}, where k is the p_d frequency;
    odd k rows are negacyclic. For f(p_d) the axes swap and the phase sign
    flips.
    """

    def __init__(self, grid: PhaseGrid, kind: str, dof: int, profile,
                 mode: str):
        n = grid.n(dof)
        frq, mu, odd = _freq_tables(n)
        self.n = n
        self.mu = mu
        self.odd = odd
        ndim = 2 * grid.dof
        if kind == "x":
            axis_vals = grid.x(dof)
            self.conv_axis = dof
            self.mask_axis = grid.dof + dof
            base_sign = -1.0
        else:
            axis_vals = grid.p(dof)
            self.conv_axis = grid.dof + dof
            self.mask_axis = dof
            base_sign = +1.0
        fhat = cdft(np.asarray(profile(axis_vals), dtype=complex)) / n
        phases = np.exp(1j * np.pi * np.outer(frq, frq) / n)  # [u, k]
        if mode == "left":
            kern = fhat[:, None] * phases ** base_sign
        elif mode == "right":
            kern = fhat[:, None] * phases ** (-base_sign)
        else:  # bracket: left - right
            kern = fhat[:, None] * (phases ** base_sign - phases ** (-base_sign))
        # precompute the conv-axis FFT of the kernel per parity class
        k_even = kern[:, ~odd]
        k_odd = kern[:, odd] * mu[:, None]
        self.fk_even = np.fft.fft(k_even, axis=0)
        self.fk_odd = np.fft.fft(k_odd, axis=0)
        self.ndim = ndim

    def apply(self, what: np.ndarray) -> np.ndarray:
        n = self.n
        arr = np.moveaxis(what, (self.conv_axis, self.mask_axis), (-2, -1))
        out = np.empty_like(arr)
        for odd_class, fk in ((False, self.fk_even), (True, self.fk_odd)):
            cols = self.odd == odd_class
            sub = arr[..., cols]
            if odd_class:
                sub = sub * self.mu[:, None]
            r = np.fft.ifft(np.fft.fft(sub, axis=-2) * fk, axis=-2)
            r = np.roll(r, -(n // 2), axis=-2)
            if odd_class:
                r = r * np.conj(self.mu)[:, None]
            out[..., cols] = r
        return np.moveaxis(out, (-2, -1), (self.conv_axis, self.mask_axis))


class _TermOp:
    """Bracket contribution of one Hamiltonian term in frequency space."""

    def __init__(self, grid: PhaseGrid, term: HamiltonianTerm):
        self.term = term
        if len(term.factors) == 1:
            kind, dof, profile = term.factors[0]
            self.single = _FactorOp(grid, kind, dof, profile, mode="bracket")
            self.lefts = self.rights = None
        else:
            self.single = None
            self.lefts = [_FactorOp(grid, k, d, f, mode="left")
                          for k, d, f in term.factors]
            self.rights = [_FactorOp(grid, k, d, f, mode="right")
                           for k, d, f in term.factors]

    def bracket(self, what: np.ndarray, t: float) -> np.ndarray:
        c = self.term.coeff_at(t)
        if c == 0.0:
            return np.zeros_like(what)
        if self.single is not None:
            return c * self.single.apply(what)
        left = what
        for op in self.lefts:
            left = op.apply(left)
        right = what
        for op in self.rights:
            right = op.apply(right)
        return c * (left - right)


class LvnPlan:
    """Reusable right-hand-side evaluator for one (grid, Hamiltonian)."""

    def __init__(self, grid: PhaseGrid, h: Hamiltonian):
        if h.grid != grid:
            raise GridMismatchError("Hamiltonian grid mismatch")
        self.grid = grid
        self.ops = [_TermOp(grid, term) for term in h.terms]
        self.hbar = grid.hbar

    def rhs(self, w: np.ndarray, t: float) -> np.ndarray:
        what = _cdftn(w)
        acc = np.zeros_like(what)
        for op in self.ops:
            acc += op.bracket(what, t)
        # dW/dt = (H*W - W*H)/(i hbar); ops compute (H*W - W*H) per term
        return _cidftn(acc / (1j * self.hbar)).real


def evolve_lvn(w: WignerState, h: Hamiltonian, t_final: float, dt: float,
               verify_dt: bool = True, snapshots_every: int = 0,
               t0: float = 0.0):
    """Propagate a Wigner state by RK4 on dW/dt = -{{W, H}}.

    Mass is conserved exactly per stage; instability (L2 growth beyond
    1e-4 per unit time) aborts with step-size advice. Returns the final
    WignerState, or (final, snapshots) when snapshots_every > 0.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    plan = LvnPlan(w.grid, h)
    steps = int(np.floor(t_final / dt + 1e-12))
    remainder = t_final - steps * dt
    if remainder < 1e-12 * max(1.0, abs(t_final)):
        remainder = 0.0
    arr = w.values.copy()

    def rk4_step(a, t, step):
        k1 = plan.rhs(a, t)
        k2 = plan.rhs(a + 0.5 * step * k1, t + 0.5 * step)
        k3 = plan.rhs(a + 0.5 * step * k2, t + 0.5 * step)
        k4 = plan.rhs(a + step * k3, t + step)
        return a + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    if verify_dt and steps > 0:
        one = rk4_step(arr, t0, dt)
        half = rk4_step(rk4_step(arr, t0, dt / 2), t0 + dt / 2, dt / 2)
        scale = np.abs(arr).max()
        mismatch = np.abs(one - half).max() / max(scale, 1e-300)
        if mismatch > 1e-3:
            raise EvolutionUnstableError(
                f"step-halving mismatch {mismatch:.2e} at dt={dt}; "
                f"reduce dt (try {dt / 4})")

    norm0 = float(np.sqrt((arr ** 2).sum()))
    snaps = []
    t = t0
    for k in range(steps):
        arr = rk4_step(arr, t, dt)
        t += dt
        if (k + 1) % max(1, steps // 20) == 0:
            norm = float(np.sqrt((arr ** 2).sum()))
            elapsed = max(t - t0, dt)
            if norm > norm0 * (1 + 1e-4 * elapsed + 1e-3):
                raise EvolutionUnstableError(
                    f"L2 norm grew by {norm / norm0 - 1:.2e} after t={elapsed:.3g}; "
                    f"RK4 unstable at dt={dt}, reduce the step (try {dt / 4})")
        if snapshots_every and (k + 1) % snapshots_every == 0:
            snaps.append((t, WignerState(w.grid, arr.copy())))
    if remainder > 0.0:
        arr = rk4_step(arr, t, remainder)
        t += remainder
    out = WignerState(w.grid, arr)
    if snapshots_every:
        return out, snaps
    return out
