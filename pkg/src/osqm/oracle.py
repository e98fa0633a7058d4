"""Dense Hilbert-space reference layer.

States are unit vectors in C^(N^n) (discrete l2 convention: v_j =
psi(x_j) sqrt(dx^n)), operators are dense matrices acting on them, and
propagation goes through exact eigendecompositions so this layer is more
accurate than anything it is used to check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .grid import PhaseGrid
from .spectral import cdft, cidft

__all__ = [
    "OperatorMatrix",
    "WaveFunction",
    "DensityOperator",
    "position_operator",
    "momentum_operator",
    "potential_operator",
    "kinetic_operator",
    "schrodinger_propagate",
    "operator_sqrt",
    "povm_apply",
    "VonNeumannCoupling",
    "measurement_premeasurement",
    "tensor_state",
]

HERM_TOL = 1e-10
PSD_TOL = 1e-8


@dataclass
class WaveFunction:
    """Configuration-space state: psi sampled on the grid, continuum norm.

    values has shape (N,)*dof; sum |psi|^2 dx^dof = 1 when normalized.
    """

    grid: PhaseGrid
    values: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.config_shape:
            raise ValueError("wavefunction shape does not match grid")
        if self.normalized:
            n2 = self.norm_sq()
            if abs(n2 - 1) > 1e-10:
                raise ValueError(f"state flagged normalized but |psi|^2 sums to {n2!r}")

    def _dvol(self) -> float:
        v = 1.0
        for d in self.grid.dx:
            v *= d
        return v

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self._dvol())

    def normalize(self) -> "WaveFunction":
        n = np.sqrt(np.sum(np.abs(self.values) ** 2) * self._dvol())
        return WaveFunction(self.grid, self.values / n)

    def to_vector(self) -> np.ndarray:
        """Flat unit vector in the discrete l2 convention."""
        return (self.values * np.sqrt(self._dvol())).ravel()

    @classmethod
    def from_vector(cls, grid: PhaseGrid, v: np.ndarray,
                    normalized: bool = True) -> "WaveFunction":
        dvol = 1.0
        for d in grid.dx:
            dvol *= d
        vals = np.asarray(v, dtype=complex).reshape(grid.config_shape) / np.sqrt(dvol)
        return cls(grid, vals, normalized=normalized)

    def overlap(self, other: "WaveFunction") -> complex:
        return complex(np.vdot(self.to_vector(), other.to_vector()))

    def momentum_values(self) -> np.ndarray:
        """psi-tilde(p) on the momentum grid (unitary transform per axis)."""
        out = self.values
        for d in range(self.grid.dof):
            out = cdft(out, axis=d) * (self.grid.dx[d]
                                       / np.sqrt(2 * np.pi * self.grid.hbar))
        return out


@dataclass
class DensityOperator:
    """Dense density matrix in the discrete position basis (trace 1).

    validate_psd controls the (cubic-cost) smallest-eigenvalue check;
    internal hot paths that construct manifestly PSD matrices skip it.
    """

    grid: PhaseGrid
    matrix: np.ndarray
    validate_psd: bool = True

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        dim = self.grid.hilbert_dim
        if self.matrix.shape != (dim, dim):
            raise ValueError("density matrix has wrong dimension")
        herm = np.abs(self.matrix - self.matrix.conj().T).max()
        if herm > HERM_TOL:
            raise ValueError(f"density matrix not Hermitian (dev {herm:.2e})")
        tr = self.matrix.trace().real
        if abs(tr - 1) > 1e-10:
            raise ValueError(f"density matrix trace {tr!r} != 1")
        if self.validate_psd:
            evmin = scipy.linalg.eigvalsh(self.matrix, subset_by_index=[0, 0])[0]
            if evmin < -PSD_TOL:
                raise ValueError(
                    f"density matrix has eigenvalue {evmin:.2e} < -{PSD_TOL}")

    @classmethod
    def pure(cls, psi: WaveFunction) -> "DensityOperator":
        v = psi.to_vector()
        return cls(psi.grid, np.outer(v, v.conj()))

    @classmethod
    def mix(cls, parts: Sequence[tuple[float, "DensityOperator"]]) -> "DensityOperator":
        grid = parts[0][1].grid
        m = sum(w * rho.matrix for w, rho in parts)
        return cls(grid, m)


@dataclass
class OperatorMatrix:
    """Dense operator on the discrete Hilbert space, with verified flags."""

    grid: PhaseGrid
    matrix: np.ndarray
    hermitian: bool = False
    psd: bool = False
    _eig: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        dim = self.grid.hilbert_dim
        if self.matrix.shape != (dim, dim):
            raise ValueError("operator matrix has wrong dimension")
        if self.hermitian:
            dev = np.abs(self.matrix - self.matrix.conj().T).max()
            if dev > HERM_TOL:
                raise ValueError(f"operator flagged Hermitian deviates by {dev:.2e}")
        if self.psd:
            if not self.hermitian:
                raise ValueError("psd flag requires hermitian flag")
            if self.eigh()[0][0] < -PSD_TOL:
                raise ValueError(
                    f"operator flagged PSD has eigenvalue {self.eigh()[0][0]:.2e}")

    def eigh(self):
        """Cached eigendecomposition (Hermitian operators only)."""
        if not self.hermitian:
            raise ValueError("eigh needs a Hermitian operator")
        if self._eig is None:
            w, q = scipy.linalg.eigh(self.matrix)
            object.__setattr__(self, "_eig", (w, q))
        return self._eig

    def expectation(self, psi: WaveFunction) -> complex:
        v = psi.to_vector()
        return complex(np.vdot(v, self.matrix @ v))

    def apply(self, psi: WaveFunction, normalized: bool = False) -> WaveFunction:
        return WaveFunction.from_vector(psi.grid, self.matrix @ psi.to_vector(),
                                        normalized=normalized)


def position_operator(grid: PhaseGrid, d: int = 0) -> OperatorMatrix:
    dof = grid.dof
    x = grid.x(d)
    diag = np.ones(grid.config_shape)
    shape = [1] * dof
    shape[d] = grid.n(d)
    diag = (diag * x.reshape(shape)).ravel()
    return OperatorMatrix(grid, np.diag(diag.astype(complex)), hermitian=True)


def momentum_operator(grid: PhaseGrid, d: int = 0) -> OperatorMatrix:
    return kinetic_operator(grid, lambda p: p, d)


def potential_operator(grid: PhaseGrid, vfun, d: Optional[int] = None) -> OperatorMatrix:
    """Multiplication operator by V(x); vfun takes one coordinate array per
    dof unless a single axis d is selected."""
    if d is None:
        mesh = np.meshgrid(*[grid.x(i) for i in range(grid.dof)], indexing="ij")
        vals = vfun(*mesh)
    else:
        shape = [1] * grid.dof
        shape[d] = grid.n(d)
        vals = np.broadcast_to(np.asarray(vfun(grid.x(d))).reshape(shape),
                               grid.config_shape)
    return OperatorMatrix(grid, np.diag(np.asarray(vals, float).ravel().astype(complex)),
                          hermitian=True)


def kinetic_operator(grid: PhaseGrid, tfun, d: int = 0) -> OperatorMatrix:
    """Operator T(p_d): diagonal in the momentum representation of axis d."""
    n = grid.n(d)
    tvals = np.asarray(tfun(grid.p(d)), dtype=float)
    # 1-axis unitary centered DFT matrix
    F = cdft(np.eye(n), axis=0) / np.sqrt(n)
    block = F.conj().T @ np.diag(tvals.astype(complex)) @ F
    block = 0.5 * (block + block.conj().T)
    m = _embed_axis_block(grid, block, d)
    return OperatorMatrix(grid, m, hermitian=True)


def _embed_axis_block(grid: PhaseGrid, block: np.ndarray, d: int) -> np.ndarray:
    if grid.dof == 1:
        return block
    if d == 0:
        return np.kron(block, np.eye(grid.n(1), dtype=complex))
    return np.kron(np.eye(grid.n(0), dtype=complex), block)


def tensor_state(psi1: WaveFunction, psi2: WaveFunction) -> WaveFunction:
    """Composite state on the product grid (PS2 bookkeeping)."""
    grid = PhaseGrid.product(psi1.grid, psi2.grid)
    vals = np.multiply.outer(psi1.values, psi2.values)
    return WaveFunction(grid, vals)


def schrodinger_propagate(psi: WaveFunction, h: OperatorMatrix, t: float) -> WaveFunction:
    """psi(t) = exp(-i H t / hbar) psi via exact eigendecomposition.

    For keyframed Hamiltonians pass a list of (duration, OperatorMatrix)
    instead of h; segments are applied in order.
    """
    if isinstance(h, (list, tuple)):
        out = psi
        for dt_seg, h_seg in h:
            out = schrodinger_propagate(out, h_seg, dt_seg)
        return out
    if not h.hermitian:
        raise ValueError("Hamiltonian must be Hermitian")
    w, q = h.eigh()
    v = psi.to_vector()
    phases = np.exp(-1j * w * t / psi.grid.hbar)
    out = q @ (phases * (q.conj().T @ v))
    return WaveFunction.from_vector(psi.grid, out)


def operator_sqrt(p: OperatorMatrix, clip_log: Optional[list] = None) -> OperatorMatrix:
    """Hermitian PSD square root; tiny negative eigenvalues clipped to 0."""
    if not p.hermitian:
        raise ValueError("operator_sqrt needs a Hermitian operator")
    w, q = p.eigh()
    if w[0] < -1e-6:
        raise ValueError(f"operator significantly non-PSD (min eig {w[0]:.2e})")
    clipped = np.clip(w, 0.0, None)
    if clip_log is not None and w[0] < 0:
        clip_log.append(float(w[0]))
    root = (q * np.sqrt(clipped)) @ q.conj().T
    root = 0.5 * (root + root.conj().T)
    return OperatorMatrix(p.grid, root, hermitian=True, psd=True)


def povm_apply(rho: DensityOperator, effects: Sequence[OperatorMatrix],
               rng_sample: float) -> tuple[int, DensityOperator]:
    """Sample a POVM outcome and apply the state-update map.

    effects must be PSD and sum to the identity to 1e-6; rng_sample is a
    uniform draw in [0, 1).
    """
    dim = rho.grid.hilbert_dim
    total = sum(e.matrix for e in effects)
    resid = np.abs(total - np.eye(dim)).max()
    if resid > 1e-6:
        raise ValueError(f"effects do not complete to identity (residual {resid:.2e})")
    probs = np.array([np.einsum("ij,ji->", e.matrix, rho.matrix).real
                      for e in effects])
    probs = np.clip(probs, 0.0, None)
    probs = probs / probs.sum()
    cdf = np.cumsum(probs)
    outcome = int(np.searchsorted(cdf, rng_sample, side="right"))
    outcome = min(outcome, len(effects) - 1)
    root = operator_sqrt(effects[outcome])
    m = root.matrix @ rho.matrix @ root.matrix.conj().T
    m = m / m.trace().real
    return outcome, DensityOperator(rho.grid, 0.5 * (m + m.conj().T))


@dataclass
class VonNeumannCoupling:
    """Premeasurement unitary U = sum_j V_j (pointer) (x) P_j (observed).

    pointer_shifts: per-outcome unitaries on the pointer factor.
    observed_projectors: complete orthogonal projectors on the observed factor.
    """

    pointer_shifts: Sequence[OperatorMatrix]
    observed_projectors: Sequence[OperatorMatrix]

    def unitary(self, grid: PhaseGrid) -> OperatorMatrix:
        if len(self.pointer_shifts) != len(self.observed_projectors):
            raise ValueError("need one pointer shift per outcome projector")
        dim_m = self.pointer_shifts[0].matrix.shape[0]
        dim_s = self.observed_projectors[0].matrix.shape[0]
        u = np.zeros((dim_m * dim_s, dim_m * dim_s), dtype=complex)
        for vj, pj in zip(self.pointer_shifts, self.observed_projectors):
            u += np.kron(vj.matrix, pj.matrix)
        dev = np.abs(u @ u.conj().T - np.eye(dim_m * dim_s)).max()
        if dev > 1e-8:
            raise ValueError(f"coupling is not unitary (deviation {dev:.2e})")
        return OperatorMatrix(grid, u)


def measurement_premeasurement(ready: WaveFunction, observed: WaveFunction,
                               coupling: VonNeumannCoupling) -> WaveFunction:
    """Apply the von Neumann coupling to |ready> (x) |observed>.

    Pointer outcome states V_j |ready> must be pairwise orthogonal; the
    result is sum_j c_j |outcome_j> (x) P_j |observed>.
    """
    grid = PhaseGrid.product(ready.grid, observed.grid)
    outs = [vj.matrix @ ready.to_vector() for vj in coupling.pointer_shifts]
    for i in range(len(outs)):
        for j in range(i + 1, len(outs)):
            ov = abs(np.vdot(outs[i], outs[j]))
            if ov > 1e-8:
                raise ValueError(
                    f"pointer outcome states {i},{j} not orthogonal (|<.|.>|={ov:.2e})")
    u = coupling.unitary(grid)
    comp = tensor_state(ready, observed)
    return WaveFunction.from_vector(grid, u.matrix @ comp.to_vector())
