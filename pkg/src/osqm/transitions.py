"""Measurement-free projection dynamics over a coarse graining.

A trajectory alternates unitary evolution with scheduled stochastic
quasiprojections: at each projection time the region probabilities
p_j = tr(Pi_j rho) are computed, one region is sampled (Born rule), and
the state is updated with Pi_j^(1/2) (or the exact classicality projector
in comparison mode). Everything is deterministic given (config, seed).
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import Hamiltonian, evolve_lvn
from .grid import PhaseGrid
from .oracle import OperatorMatrix, WaveFunction, schrodinger_propagate
from .regions import Partition, Region, classicality_projectors, is_quasirestricted
from .weyl import mean_value, weyl_operator_from_symbol
from .wigner import WignerState, density_from_wigner, wigner_from_density, \
    wigner_from_wavefunction

logger = logging.getLogger(__name__)

__all__ = [
    "RegionDecomposition",
    "ProjectionSchedule",
    "TrajectoryRecord",
    "TrajectoryEngine",
    "decompose_over_regions",
    "transition_probabilities",
    "transition_probabilities_oracle",
    "sample_transition",
    "apply_quasiprojection",
    "run_trajectory",
    "run_ensemble",
    "zeno_experiment",
    "trajectory_rng",
    "worker_count",
]

PROB_CLIP = -1e-8
MIN_TRANSITION_PROB = 1e-12


def _cached_projectors(partition: Partition) -> list:
    cached = getattr(partition, "_exact_projectors", None)
    if cached is None:
        cached = classicality_projectors(partition)
        partition._exact_projectors = cached
    return cached


@dataclass
class RegionDecomposition:
    """Per-region weights of a state over the coarse graining."""

    labels: list
    coefficients: np.ndarray   # c_j = <psi| exact projector_j |psi>, real
    probabilities: np.ndarray  # Born weights from the quasiprojectors
    residual: float

    def __post_init__(self):
        total = self.probabilities.sum()
        if abs(total - 1) > 1e-6:
            raise ValueError(f"probabilities sum to {total!r}")


@dataclass(frozen=True)
class ProjectionSchedule:
    """When quasiprojections fire during a trajectory."""

    mode: str = "periodic"          # continuous | periodic | single-shot
    dt_proj: Optional[float] = None

    def __post_init__(self):
        if self.mode not in ("continuous", "periodic", "single-shot"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.mode == "periodic" and (self.dt_proj is None or self.dt_proj <= 0):
            raise ValueError("periodic schedule needs dt_proj > 0")

    def stride(self, dt: float, steps: int) -> int:
        if self.mode == "continuous":
            return 1
        if self.mode == "single-shot":
            return steps
        if self.dt_proj < dt - 1e-12:
            raise ValueError("dt_proj must be >= the dynamics step dt")
        return max(1, int(round(self.dt_proj / dt)))


def transition_probabilities(w: WignerState, partition: Partition) -> np.ndarray:
    """Born weights from the symbol-side integrals p_j = int Pi_j W dz.

    Sums to 1 exactly (partition of unity); tiny negative quadrature noise
    is clipped to zero and logged.
    """
    probs = np.array([mean_value(r.symbol(), w) for r in partition.regions])
    neg = probs < 0
    if neg.any():
        worst = probs[neg].min()
        if worst < PROB_CLIP:
            raise ValueError(f"transition probability {worst:.3e} below clip floor")
        logger.info("clipped %d negative transition probabilities (worst %.2e)",
                    int(neg.sum()), worst)
        probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def transition_probabilities_oracle(psi: WaveFunction,
                                    partition: Partition) -> np.ndarray:
    """Operator-side Born weights p_j = <psi|Pi_j|psi>."""
    v = psi.to_vector()
    probs = np.array([np.vdot(v, r.operator().matrix @ v).real
                      for r in partition.regions])
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def decompose_over_regions(psi: WaveFunction,
                           partition: Partition) -> RegionDecomposition:
    """Weights c_j from the exact projectors and Born probabilities p_j.

    residual = || psi - sum_j c_j P_j psi ||; c_j are real expectation
    values, so only their squared magnitudes are meaningful as amplitudes.
    """
    projs = _cached_projectors(partition)
    v = psi.to_vector()
    cs = np.array([np.vdot(v, p.matrix @ v).real for p in projs])
    resid_vec = v - sum(c * (p.matrix @ v) for c, p in zip(cs, projs))
    probs = transition_probabilities_oracle(psi, partition)
    return RegionDecomposition(labels=partition.labels(), coefficients=cs,
                               probabilities=probs,
                               residual=float(np.linalg.norm(resid_vec)))


def sample_transition(probabilities: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw of a region index."""
    p = np.asarray(probabilities, dtype=float)
    total = p.sum()
    if not np.isfinite(total) or total <= 0:
        raise ValueError("degenerate probability vector")
    cdf = np.cumsum(p / total)
    u = rng.random()
    return min(int(np.searchsorted(cdf, u, side="right")), len(p) - 1)


def apply_quasiprojection(psi: WaveFunction, region: Region,
                          mode: str = "sqrt",
                          exact_projector: Optional[OperatorMatrix] = None) -> WaveFunction:
    """State update Pi_R^(1/2) psi / norm (POVM form).

    mode="exact" uses the supplied classicality projector instead, for
    quantifying the quasiprojector approximation.
    """
    v = psi.to_vector()
    if mode == "sqrt":
        op = region.sqrt_operator().matrix
    elif mode == "exact":
        if exact_projector is None:
            raise ValueError("exact mode needs the classicality projector")
        op = exact_projector.matrix
    else:
        raise ValueError(f"unknown projection mode {mode!r}")
    out = op @ v
    norm = np.linalg.norm(out)
    if norm ** 2 < MIN_TRANSITION_PROB:
        raise ValueError(
            f"projection weight {norm ** 2:.3e} below {MIN_TRANSITION_PROB}; "
            "a forbidden transition was sampled (sampler inconsistency)")
    return WaveFunction.from_vector(psi.grid, out / norm)


def trajectory_rng(base_seed: int, traj_index: int) -> np.random.Generator:
    """Independent counter-based substream per (seed, trajectory)."""
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(traj_index,))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class TrajectoryRecord:
    """Full log of one seeded run."""

    seed: int
    times: np.ndarray
    region_labels: list
    prob_rows: np.ndarray          # probabilities at each projection event
    event_steps: list
    event_regions: list
    ps6_residuals: list
    backend: str
    snapshots: list = field(default_factory=list)
    final_region: str = ""

    def summary(self) -> dict:
        return {"seed": self.seed, "final_region": self.final_region,
                "num_events": len(self.event_steps)}


class TrajectoryEngine:
    """Prepared trajectory runner: shared operators, per-seed randomness.

    backend "oracle" propagates the wavefunction with the dense propagator;
    backend "phase" propagates the Wigner function with the Moyal-bracket
    integrator and routes projections through the density matrix.
    """

    def __init__(self, psi0: WaveFunction, h: Hamiltonian, partition: Partition,
                 t_final: float, dt: float, schedule: ProjectionSchedule,
                 backend: str = "oracle", projection_mode: str = "sqrt",
                 check_ps6: bool = True, snapshot_every: int = 0,
                 require_quasirestricted: bool = True):
        if backend not in ("oracle", "phase"):
            raise ValueError(f"unknown backend {backend!r}")
        self.psi0 = psi0
        self.h = h
        self.partition = partition
        self.t_final = t_final
        self.dt = dt
        self.schedule = schedule
        self.backend = backend
        self.projection_mode = projection_mode
        self.check_ps6 = check_ps6
        self.snapshot_every = snapshot_every
        self.steps = int(round(t_final / dt))
        self.stride = schedule.stride(dt, self.steps)
        probs0 = transition_probabilities_oracle(psi0, partition)
        self.home_index = int(np.argmax(probs0))
        if require_quasirestricted:
            ok, resid = is_quasirestricted(psi0, partition.regions[self.home_index])
            if not ok:
                raise ValueError(
                    f"initial state is not quasirestricted to any region "
                    f"(best residual {resid:.3e}); the coarse-graining "
                    "containment requirement fails at t=0")
        if projection_mode == "exact":
            self.exact_projectors = _cached_projectors(partition)
        else:
            self.exact_projectors = None
        if backend == "oracle":
            if not h.is_static():
                raise ValueError("oracle backend needs a static Hamiltonian")
            hmat = weyl_operator_from_symbol(h.symbol())
            w, q = hmat.eigh()
            phases = np.exp(-1j * w * dt / psi0.grid.hbar)
            self.u_dt = (q * phases) @ q.conj().T

    def run(self, seed: int, traj_index: int = 0) -> TrajectoryRecord:
        rng = trajectory_rng(seed, traj_index)
        part = self.partition
        labels = part.labels()
        current = self.home_index
        times = [0.0]
        region_track = [labels[current]]
        prob_rows = []
        event_steps = []
        event_regions = []
        ps6_resids = []
        snaps = []

        if self.backend == "oracle":
            v = self.psi0.to_vector()
        else:
            wstate = wigner_from_wavefunction(self.psi0)

        for k in range(1, self.steps + 1):
            t = k * self.dt
            if self.backend == "oracle":
                v = self.u_dt @ v
            else:
                wstate = evolve_lvn(wstate, self.h, self.dt, self.dt,
                                    verify_dt=False, t0=t - self.dt)
            if k % self.stride == 0 or k == self.steps:
                if self.backend == "oracle":
                    psi = WaveFunction.from_vector(self.psi0.grid, v)
                    probs = transition_probabilities_oracle(psi, part)
                else:
                    probs = transition_probabilities(wstate, part)
                chosen = sample_transition(probs, rng)
                prob_rows.append(probs)
                event_steps.append(k)
                event_regions.append(labels[chosen])
                if self.backend == "oracle":
                    psi = apply_quasiprojection(
                        psi, part.regions[chosen], mode=self.projection_mode,
                        exact_projector=(self.exact_projectors[chosen]
                                         if self.exact_projectors else None))
                    v = psi.to_vector()
                else:
                    rho = density_from_wigner(wstate)
                    if self.projection_mode == "sqrt":
                        op = part.regions[chosen].sqrt_operator().matrix
                    else:
                        op = self.exact_projectors[chosen].matrix
                    m = op @ rho.matrix @ op.conj().T
                    m = 0.5 * (m + m.conj().T)
                    m /= m.trace().real
                    from .oracle import DensityOperator
                    wstate = wigner_from_density(DensityOperator(self.psi0.grid, m))
                if self.check_ps6:
                    if self.backend == "oracle":
                        ok, resid = is_quasirestricted(psi, part.regions[chosen])
                    else:
                        ok, resid = _density_quasirestricted(
                            wstate, part.regions[chosen])
                    ps6_resids.append(resid)
                    if not ok:
                        raise RuntimeError(
                            f"post-projection state fails quasirestriction in "
                            f"{labels[chosen]} (residual {resid:.3e})")
                current = chosen
            times.append(t)
            region_track.append(labels[current])
            if self.snapshot_every and k % self.snapshot_every == 0:
                if self.backend == "oracle":
                    snaps.append((t, v.copy()))
                else:
                    snaps.append((t, wstate.values.copy()))

        return TrajectoryRecord(
            seed=seed, times=np.asarray(times), region_labels=region_track,
            prob_rows=np.asarray(prob_rows), event_steps=event_steps,
            event_regions=event_regions, ps6_residuals=ps6_resids,
            backend=self.backend, snapshots=snaps,
            final_region=region_track[-1])


def _density_quasirestricted(w: WignerState, region: Region,
                             tol: float = 1e-3, cutoff: float = 1e-6):
    evals, q = region.operator().eigh()
    keep = evals > cutoff
    rho = density_from_wigner(w)
    out_mass = float(np.einsum("ij,jk,ki->", q[:, ~keep].conj().T,
                               rho.matrix, q[:, ~keep]).real)
    residual = float(np.sqrt(max(out_mass, 0.0)))
    return residual < tol, residual


def run_trajectory(psi0: WaveFunction, h: Hamiltonian, partition: Partition,
                   t_final: float, dt: float, schedule: ProjectionSchedule,
                   seed: int, backend: str = "oracle",
                   projection_mode: str = "sqrt", **kwargs) -> TrajectoryRecord:
    """One seeded trajectory; see TrajectoryEngine for the loop contract."""
    engine = TrajectoryEngine(psi0, h, partition, t_final, dt, schedule,
                              backend=backend, projection_mode=projection_mode,
                              **kwargs)
    return engine.run(seed)


def worker_count() -> int:
    env = os.environ.get("OSQM_THREADS", "")
    try:
        n = int(env)
    except ValueError:
        n = 1
    return max(1, n)


_ENGINE = None


def _pool_run(args):
    seed, idx = args
    rec = _ENGINE.run(seed, idx)
    return rec.summary()


def run_ensemble(engine: TrajectoryEngine, seeds: Sequence[int],
                 workers: Optional[int] = None) -> list:
    """Run many seeds; returns per-seed summaries in seed order.

    Parallel fan-out uses forked workers sharing the prepared engine;
    results are order-stable so aggregation is deterministic.
    """
    global _ENGINE
    if workers is None:
        workers = worker_count()
    jobs = [(int(s), i) for i, s in enumerate(seeds)]
    if workers <= 1 or len(jobs) < 4:
        return [_run_one(engine, s, i) for s, i in jobs]
    import multiprocessing as mp
    _ENGINE = engine
    try:
        with mp.get_context("fork").Pool(workers) as pool:
            return pool.map(_pool_run, jobs, chunksize=max(1, len(jobs) // (4 * workers)))
    finally:
        _ENGINE = None


def _run_one(engine, seed, idx):
    return engine.run(seed, idx).summary()


def zeno_experiment(psi0: WaveFunction, h: Hamiltonian, partition: Partition,
                    dt_proj_values: Sequence[float], t_total: float,
                    projection_mode: str = "exact",
                    saturation: float = 0.5) -> list:
    """Measurement-interval sweep for the short-time quadratic law.

    For each projection interval the conditional run starts from the
    home-projected state, evolves, records the per-interval misprojection
    probability q = 1 - p_home, projects back home and repeats, so the
    reported survival is the exact expectation of the stochastic process
    conditioned on staying home. Rows with q above the saturation level
    are flagged (outside the short-interval regime).

    projection_mode "exact" measures and projects with the sharp
    classicality projectors: the freshly projected state is then an exact
    eigenvector of the next measurement and q(dt) is purely quadratic at
    small dt. The "sqrt" mode uses the smooth quasiprojector POVM, whose
    boundary overlap adds an interval-independent pedestal to q; that
    pedestal is physical for the smooth coarse graining but hides the
    quadratic law, so the scaling fit uses the exact mode.

    Returns rows of dict(dt_proj, q_first, q_mean, survival, flagged).
    """
    probs0 = transition_probabilities_oracle(psi0, partition)
    home = int(np.argmax(probs0))
    region = partition.regions[home]
    exact = projection_mode == "exact"
    projs = _cached_projectors(partition) if exact else None

    def project_home(vec):
        if exact:
            out = projs[home].matrix @ vec
        else:
            out = region.sqrt_operator().matrix @ vec
        return out / np.linalg.norm(out)

    def p_home_of(vec):
        if exact:
            return float(np.vdot(vec, projs[home].matrix @ vec).real)
        return float(np.vdot(vec, region.operator().matrix @ vec).real)

    hmat = weyl_operator_from_symbol(h.symbol())
    w, q = hmat.eigh()
    grid = psi0.grid

    rows = []
    for dtp in dt_proj_values:
        u = (q * np.exp(-1j * w * dtp / grid.hbar)) @ q.conj().T
        v = project_home(psi0.to_vector())
        n_int = max(1, int(round(t_total / dtp)))
        survival = 1.0
        qs = []
        for _ in range(n_int):
            v = u @ v
            p_home = min(max(p_home_of(v), 0.0), 1.0)
            qk = 1.0 - p_home
            qs.append(qk)
            survival *= p_home
            v = project_home(v)
        q_first = qs[0]
        rows.append({
            "dt_proj": float(dtp),
            "q_first": float(q_first),
            "q_mean": float(np.mean(qs)),
            "survival": float(survival),
            "flagged": bool(q_first > saturation),
        })
    return rows


def fit_loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    a = np.vstack([lx, np.ones_like(lx)]).T
    slope, _ = np.linalg.lstsq(a, ly, rcond=None)[0]
    return float(slope)
