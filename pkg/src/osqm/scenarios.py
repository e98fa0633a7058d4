"""Scenario presets and the composite measurement run.

The measurement scenario realizes the pointer-plus-observed structure on a
product grid: pointer bands along the first position axis are the coarse
graining, a p1 * lambda(x2) coupling drives the pointer into the band
matching the observed branch, and the region transition then reproduces
Born statistics for the branch amplitudes. The coupling propagator is
diagonal in the (p1, x2) mixed representation, and the band quasiprojectors
act on the pointer factor only, so the composite runs stay dense-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import Hamiltonian, HamiltonianTerm
from .grid import PhaseGrid
from .oracle import OperatorMatrix, WaveFunction, operator_sqrt, tensor_state
from .regions import _coherent_quadrature_1dof
from .spectral import cdft, cidft
from .transitions import sample_transition, trajectory_rng
from .wigner import coherent_state

__all__ = [
    "hamiltonian_preset",
    "initial_state_preset",
    "HAMILTONIAN_PRESETS",
    "STATE_PRESETS",
    "MeasurementScenario",
    "binomial_interval",
]

HAMILTONIAN_PRESETS = ("free", "oscillator", "double-well", "von-neumann-coupling")
STATE_PRESETS = ("coherent", "cat", "oscillator-eigenstate", "ready-superposition")


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (10 + s * (-15 + 6 * s))


def edge_flattened(profile, x1: float, x2: float):
    """Freeze a profile to its value at +/-x1 beyond that radius.

    Potentials that keep growing toward the wrap boundary put enormous
    energy scales at the grid edge, which amplifies edge couplings of the
    discrete kinetic operator far beyond anything physical. Scenario
    potentials are therefore flattened smoothly between x1 and x2; the
    dynamical region inside |x| < x1 is untouched.
    """

    def flattened(x):
        raw = profile(x)
        hold = profile(np.clip(x, -x1, x1))
        w = _smoothstep((np.abs(x) - x1) / (x2 - x1))
        return (1 - w) * raw + w * hold

    return flattened


def hamiltonian_preset(grid: PhaseGrid, name: str, params: Optional[dict] = None) -> Hamiltonian:
    """Build one of the named Hamiltonians.

    free: p^2/(2m)                      params: mass
    oscillator: p^2/(2m) + m w^2 x^2/2  params: mass, omega
    double-well: p^2/(2m) + a (x^2-b^2)^2   params: mass, a, b
    von-neumann-coupling (dof 2): v * p1 * tanh(x2 / w)   params: v, w
    """
    p = dict(params or {})
    if name == "free":
        m = p.pop("mass", 1.0)
        _reject_extra(name, p)
        terms = [HamiltonianTerm((("p", 0, lambda q, m=m: q ** 2 / (2 * m)),),
                                 label="kinetic")]
    elif name == "oscillator":
        m = p.pop("mass", 1.0)
        om = p.pop("omega", 1.0)
        _reject_extra(name, p)
        terms = [HamiltonianTerm((("p", 0, lambda q, m=m: q ** 2 / (2 * m)),),
                                 label="kinetic"),
                 HamiltonianTerm((("x", 0, lambda q, m=m, om=om: 0.5 * m * om ** 2 * q ** 2),),
                                 label="potential")]
    elif name == "double-well":
        m = p.pop("mass", 1.0)
        a = p.pop("a", 0.15)
        b = p.pop("b", 2.0)
        flat_frac = p.pop("flatten_at", 0.55)
        _reject_extra(name, p)
        ext = grid.x_extents[0]
        vwell = edge_flattened(lambda q, a=a, b=b: a * (q ** 2 - b ** 2) ** 2,
                               flat_frac * ext, 0.9 * ext)
        terms = [HamiltonianTerm((("p", 0, lambda q, m=m: q ** 2 / (2 * m)),),
                                 label="kinetic"),
                 HamiltonianTerm((("x", 0, vwell),), label="potential")]
    elif name == "von-neumann-coupling":
        if grid.dof != 2:
            raise ValueError("von-neumann-coupling needs a 2-dof grid")
        v = p.pop("v", 1.0)
        w = p.pop("w", 1.0)
        _reject_extra(name, p)
        ext2 = grid.x_extents[1]
        lam = edge_flattened(lambda q, w=w: np.tanh(q / w),
                             0.7 * ext2, 0.95 * ext2)
        terms = [HamiltonianTerm((("p", 0, lambda q: q),
                                  ("x", 1, lam)),
                                 coefficient=v, label="coupling")]
    else:
        raise ValueError(
            f"unknown hamiltonian preset {name!r}; available: {HAMILTONIAN_PRESETS}")
    return Hamiltonian(grid, terms)


def _reject_extra(name, leftover):
    if leftover:
        raise ValueError(f"unknown parameters for preset {name!r}: {sorted(leftover)}")


def initial_state_preset(grid: PhaseGrid, name: str,
                         params: Optional[dict] = None) -> WaveFunction:
    """coherent (x0, p0); cat (centers, weights); oscillator-eigenstate (k,
    omega, mass)."""
    p = dict(params or {})
    if name == "coherent":
        x0 = p.pop("x0", 0.0)
        p0 = p.pop("p0", 0.0)
        _reject_extra(name, p)
        return coherent_state(grid, x0, p0)
    if name == "cat":
        centers = p.pop("centers", [[-3.0, 0.0], [3.0, 0.0]])
        weights = p.pop("weights", [1.0, 1.0])
        _reject_extra(name, p)
        vals = sum(w * coherent_state(grid, c[0], c[1]).values
                   for w, c in zip(weights, centers))
        return WaveFunction(grid, vals, normalized=False).normalize()
    if name == "oscillator-eigenstate":
        k = int(p.pop("k", 0))
        om = p.pop("omega", 1.0)
        m = p.pop("mass", 1.0)
        _reject_extra(name, p)
        from .weyl import weyl_operator_from_symbol
        h = hamiltonian_preset(grid, "oscillator", {"omega": om, "mass": m})
        hm = weyl_operator_from_symbol(h.symbol())
        _, vecs = hm.eigh()
        return WaveFunction.from_vector(grid, vecs[:, k])
    raise ValueError(f"unknown state preset {name!r}; available: {STATE_PRESETS}")


def binomial_interval(k: int, n: int, z: float = 3.0) -> tuple[float, float]:
    """Normal-approximation confidence interval for a frequency."""
    f = k / n
    half = z * np.sqrt(max(f * (1 - f), 1e-12) / n)
    return f - half, f + half


@dataclass
class MeasurementScenario:
    """Pointer (axis 1) measuring which branch the observed system (axis 2)
    occupies, with pointer-position bands as the coarse graining.

    amplitudes c weight the two observed branch states at (-s, 0), (+s, 0);
    the pointer starts at the origin inside the ready band and is pushed to
    -D or +D by the coupling.
    """

    pointer_grid: PhaseGrid
    observed_grid: PhaseGrid
    amplitudes: tuple[float, float] = (1 / np.sqrt(2), 1 / np.sqrt(2))
    branch_sep: float = 4.3         # observed branches at +/- branch_sep
    band_edge: float = 6.0          # bands split at x1 = +/- band_edge
    displacement: float = 12.0      # pointer travel after the coupling window
    coupling_v: float = 12.0        # displacement rate; window T = D / v
    coupling_w: float = 1.0

    def __post_init__(self):
        g1 = self.pointer_grid
        sigma = np.sqrt(g1.hbar / 2)
        if self.displacement - self.band_edge < 5 * np.sqrt(g1.hbar):
            raise ValueError("pointer outcome position too close to the band edge")
        if self.band_edge < 5 * np.sqrt(g1.hbar):
            raise ValueError("ready band narrower than 5 sqrt(hbar) half-width")
        if g1.x_extents[0] < self.displacement + 6 * sigma:
            raise ValueError("pointer axis too short for the displacement")
        self.grid = PhaseGrid.product(self.pointer_grid, self.observed_grid)
        self.window = self.displacement / self.coupling_v
        self._prepare()

    def _prepare(self):
        g1, g2 = self.pointer_grid, self.observed_grid
        c1, c2 = self.amplitudes
        norm = np.hypot(c1, c2)
        self.probs_exact = np.array([c1 ** 2, c2 ** 2]) / norm ** 2
        ready = coherent_state(g1, 0.0, 0.0)
        left = coherent_state(g2, -self.branch_sep, 0.0)
        right = coherent_state(g2, +self.branch_sep, 0.0)
        obs = WaveFunction(g2, (c1 * left.values + c2 * right.values) / norm,
                           normalized=False).normalize()
        self.psi0 = tensor_state(ready, obs)
        self.hamiltonian = hamiltonian_preset(
            self.grid, "von-neumann-coupling",
            {"v": self.coupling_v, "w": self.coupling_w})
        # band quasiprojectors on the pointer factor
        n1 = g1.n(0)
        edge_idx = int(round((self.band_edge + g1.x_extents[0]) / g1.dx[0]))
        lo_idx = int(round((-self.band_edge + g1.x_extents[0]) / g1.dx[0]))
        masks = []
        for sl in (slice(0, lo_idx), slice(lo_idx, edge_idx), slice(edge_idx, n1)):
            m = np.zeros((n1, n1), dtype=bool)
            m[sl, :] = True
            masks.append(m)
        self.band_labels = ["outcome-left", "ready", "outcome-right"]
        self.band_ops = [_coherent_quadrature_1dof(g1, m) for m in masks]
        self.band_sqrts = []
        self.band_eigs = []
        for op in self.band_ops:
            w, q = np.linalg.eigh(op)
            w = np.clip(w, 0.0, None)
            self.band_sqrts.append((q * np.sqrt(w)) @ q.conj().T)
            self.band_eigs.append((w, q))
        # coupling propagator: diagonal in the (p1, x2) representation
        lam = np.tanh(g2.x(0) / self.coupling_w)
        self.phase_full = np.exp(-1j * self.coupling_v * self.window
                                 * np.outer(g1.p(0), lam) / self.grid.hbar)

    def _evolved(self) -> np.ndarray:
        """psi(T) as an (n1, n2) array in the discrete l2 convention."""
        g1 = self.pointer_grid
        v = self.psi0.to_vector().reshape(self.pointer_grid.n(0),
                                          self.observed_grid.n(0))
        vp = cdft(v, axis=0) / np.sqrt(g1.n(0))   # unitary per-axis transform
        vp = vp * self.phase_full
        return cidft(vp, axis=0) * np.sqrt(g1.n(0))

    def band_probabilities(self, v2d: np.ndarray) -> np.ndarray:
        probs = np.array([np.einsum("aj,ab,bj->", v2d.conj(), op, v2d).real
                          for op in self.band_ops])
        probs = np.clip(probs, 0.0, None)
        return probs / probs.sum()

    def project_band(self, v2d: np.ndarray, idx: int) -> np.ndarray:
        out = self.band_sqrts[idx] @ v2d
        return out / np.linalg.norm(out)

    def band_residual(self, v2d: np.ndarray, idx: int,
                      cutoff: float = 1e-6) -> float:
        w, q = self.band_eigs[idx]
        drop = q[:, w <= cutoff]
        comp = drop.conj().T @ v2d
        return float(np.linalg.norm(comp))

    def run_ensemble(self, num_seeds: int, base_seed: int = 0) -> dict:
        """Couple, fire the transition once per seed, tally outcomes.

        The pre-transition evolution is deterministic and shared; each seed
        contributes one Born-rule draw and the post-state checks run once
        per outcome (the post-state is seed-independent).
        """
        vT = self._evolved()
        probs = self.band_probabilities(vT)
        post_resid = {}
        for idx in (0, 2):
            if probs[idx] > 1e-9:
                post = self.project_band(vT, idx)
                post_resid[self.band_labels[idx]] = self.band_residual(post, idx)
        counts = {lab: 0 for lab in self.band_labels}
        outcomes = []
        for i in range(num_seeds):
            rng = trajectory_rng(base_seed, i)
            idx = sample_transition(probs, rng)
            counts[self.band_labels[idx]] += 1
            outcomes.append(self.band_labels[idx])
        freq_left = counts["outcome-left"] / num_seeds
        freq_right = counts["outcome-right"] / num_seeds
        return {
            "probabilities": {lab: float(p) for lab, p in zip(self.band_labels, probs)},
            "expected": {"outcome-left": float(self.probs_exact[0]),
                         "outcome-right": float(self.probs_exact[1])},
            "counts": counts,
            "frequencies": {"outcome-left": freq_left, "outcome-right": freq_right,
                            "ready": counts["ready"] / num_seeds},
            "post_residuals": post_resid,
            "num_seeds": num_seeds,
            "base_seed": base_seed,
            "outcomes": outcomes,
        }


def zeno_scenario(grid: PhaseGrid) -> dict:
    """Standard fixture: oscillator sloshing against a half-plane split."""
    from .regions import build_partition
    h = hamiltonian_preset(grid, "oscillator", {})
    part = build_partition(grid, [0.0])
    psi0 = coherent_state(grid, -3.0, 0.0)
    return {"hamiltonian": h, "partition": part, "psi0": psi0,
            "law_sweep": list(np.geomspace(0.001, 0.01, 6)),
            "survival_sweep": [2 * np.pi / k for k in (64, 32, 16, 8, 4, 2, 1)]}
