"""Fixed-step integration of the finite coupled system and its cell-structured form.

Both integrators use classical RK4 with phases wrapped after each full step
(stage arithmetic stays in a consistent lift; the coupling functions are
1-periodic, so stage values are wrap-invariant). The purely decaying singular
weights are evaluated in closed form exp(-eps t) W0 rather than integrated.

In the cell-structured system each tracked oscillator carries its own row of
absolutely continuous weights: the adaptation term depends on the tracked
oscillator's phase, so oscillators sharing a cell but not a phase develop
different weights. With one oscillator per cell this reduces to one m x m
weight matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backend import get_kernels
from ._kernels_numpy import fold_moments
from .digraph import Partition
from .discretize import LatticeWeights
from .measure_kit import wrap_phase
from .model import ModelSpec, positivity_horizon


def _resolve_steps(T: float, dt: float) -> int:
    """Number of whole steps covering [0, T]; T snaps to the nearest node."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    steps = round(T / dt)
    if steps < 1:
        raise ValueError("T must be at least dt/2")
    return steps


def _omega_fn(omega, size):
    """Normalize per-node rates: array of constants or callable t -> array."""
    if callable(omega):
        probe = np.asarray(omega(0.0), dtype=float)
        if probe.shape != (size,):
            raise ValueError(f"omega(t) must return shape ({size},)")
        return omega
    arr = np.asarray(omega, dtype=float)
    if arr.shape != (size,):
        raise ValueError(f"omega must have shape ({size},)")
    return lambda t: arr


@dataclass(frozen=True)
class CoupledState:
    """Phases and the full weight matrix of the N-oscillator system."""

    phases: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (phases.size, phases.size):
            raise ValueError("weights must be N x N")
        if not (np.all(np.isfinite(phases)) and np.all(np.isfinite(weights))):
            raise ValueError("non-finite initial state")
        object.__setattr__(self, "phases", wrap_phase(phases))
        object.__setattr__(self, "weights", weights)


@dataclass(frozen=True)
class Trajectory:
    """Time grid plus phase snapshots; weight snapshots optional.

    weight_stats rows are (min, max, mean) per node; weights_full is only
    populated on request (it is N x N per node).
    """

    times: np.ndarray
    phases: np.ndarray
    weight_stats: np.ndarray | None = None
    weights_full: np.ndarray | None = None

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])


def integrate_coupled(init: CoupledState, model: ModelSpec, omega_i,
                      T: float, dt: float, store_weights: str = "summary",
                      backend: str | None = None) -> Trajectory:
    """RK4 trajectory of the co-evolutionary system.

    dphi_i = omega_i(t) + (1/N) sum_j W_ij g(phi_j - phi_i)
    dW_ij  = -eps (W_ij + h(phi_j - phi_i))
    """
    if store_weights not in ("none", "summary", "full"):
        raise ValueError("store_weights must be none|summary|full")
    kern = get_kernels(backend)
    steps = _resolve_steps(T, dt)
    N = init.phases.size
    omega = _omega_fn(omega_i, N)
    gc0, ga, gb = model.g.dense_coeffs()
    hc0, ha, hb = model.h.dense_coeffs()
    eps = model.epsilon

    phi = init.phases.copy()
    W = init.weights.copy()
    times = dt * np.arange(steps + 1)
    phases_out = np.empty((steps + 1, N))
    phases_out[0] = phi
    stats = np.empty((steps + 1, 3)) if store_weights != "none" else None
    full = np.empty((steps + 1, N, N)) if store_weights == "full" else None
    if stats is not None:
        stats[0] = (W.min(), W.max(), W.mean())
    if full is not None:
        full[0] = W

    def rhs(p, w, t):
        return kern.coupled_rhs(p, w, omega(t), gc0, ga, gb, hc0, ha, hb, eps)

    for step in range(steps):
        t = times[step]
        k1p, k1w = rhs(phi, W, t)
        k2p, k2w = rhs(phi + 0.5 * dt * k1p, W + 0.5 * dt * k1w, t + 0.5 * dt)
        k3p, k3w = rhs(phi + 0.5 * dt * k2p, W + 0.5 * dt * k2w, t + 0.5 * dt)
        k4p, k4w = rhs(phi + dt * k3p, W + dt * k3w, t + dt)
        phi = wrap_phase(phi + (dt / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p))
        W = W + (dt / 6.0) * (k1w + 2 * k2w + 2 * k3w + k4w)
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(W))):
            raise FloatingPointError(f"non-finite state at step {step + 1}")
        phases_out[step + 1] = phi
        if stats is not None:
            stats[step + 1] = (W.min(), W.max(), W.mean())
        if full is not None:
            full[step + 1] = W
    return Trajectory(times, phases_out, stats, full)


@dataclass(frozen=True)
class LatticeState:
    """Initial data of the cell-structured system.

    masses[i] is the fiber mass a_i of the empirical measure attached to cell
    i (each of the n tracked oscillators in the cell carries a_i / n).
    """

    partition: Partition
    masses: np.ndarray
    phases: np.ndarray          # (m, n)
    weights: LatticeWeights

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float)
        phases = np.asarray(self.phases, dtype=float)
        if phases.ndim != 2 or phases.shape[0] != self.partition.m:
            raise ValueError("phases must have shape (m, n)")
        if masses.shape != (self.partition.m,):
            raise ValueError("one mass per cell required")
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "phases", wrap_phase(phases))

    @property
    def m(self) -> int:
        return self.phases.shape[0]

    @property
    def n(self) -> int:
        return self.phases.shape[1]

    def is_admissible(self) -> bool:
        return bool(self.masses.min() >= 0 and self.weights.W_a.min() >= 0
                    and (self.weights.y_w.size == 0 or self.weights.y_w.min() >= 0))


@dataclass(frozen=True)
class LatticeTrajectory:
    """Phase path of the cell-structured system plus weight diagnostics.

    ac_mean[k, i, p] is the tracked-oscillator average of the a.c. weight
    density of cell i over source cell p at node k; singular weights are the
    closed form exp(-eps t) times their initial values.
    """

    times: np.ndarray
    phases: np.ndarray          # (K+1, m, n)
    partition: Partition
    masses: np.ndarray
    weights: LatticeWeights
    epsilon: float
    ac_mean: np.ndarray
    min_ac_density: float
    positivity_horizon: float
    positivity_flag: bool = False

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def singular_weights(self) -> np.ndarray:
        """(K+1, m) singular masses exp(-eps t) W_s0."""
        return np.exp(-self.epsilon * self.times)[:, None] * self.weights.W_s[None, :]


def integrate_lattice(init: LatticeState, model: ModelSpec, omega_m,
                      T: float, dt: float, backend: str | None = None,
                      positivity_tol: float = 1e-8) -> LatticeTrajectory:
    """RK4 trajectory of the cell-structured system.

    Tracked oscillator u in cell i, with per-oscillator a.c. weight row D_u:

    dphi_u  = omega_i(t) + sum_p mu(A_p) D_up Gnu(p, phi_u)
              + e^{-eps t} sum_{atoms l of cell i} w_l Gnu(q_l, phi_u)
    dD_up   = -eps (D_up + Hnu(p, phi_u))

    where Gnu(p, .) and Hnu(p, .) integrate g and h against the cell-p fiber
    of the system's own empirical measure.
    """
    if not init.is_admissible():
        raise ValueError("initial lattice state has negative masses or weights")
    kern = get_kernels(backend)
    steps = _resolve_steps(T, dt)
    m, n = init.m, init.n
    A = m * n
    omega = _omega_fn(omega_m, m)
    gc0, ga, gb = model.g.dense_coeffs()
    hc0, ha, hb = model.h.dense_coeffs()
    kmax = max(len(ga), len(ha))
    eps = model.epsilon
    wts = init.weights
    mu_cells = wts.mu_cells
    cells = np.repeat(np.arange(m, dtype=np.int64), n)
    atom_w = np.repeat(init.masses / n, n)

    phi = init.phases.ravel().copy()
    D = np.repeat(wts.W_a, n, axis=0).astype(float)   # (A, m)

    times = dt * np.arange(steps + 1)
    phases_out = np.empty((steps + 1, m, n))
    phases_out[0] = init.phases
    ac_mean = np.empty((steps + 1, m, m))
    ac_mean[0] = wts.W_a
    min_ac = float(D.min())

    def rhs(p, d, t):
        mass, S, C = kern.cell_moments(p, atom_w, cells, m, kmax)
        gbase, gP, gQ = fold_moments(mass, S, C, gc0, ga, gb)
        hbase, hP, hQ = fold_moments(mass, S, C, hc0, ha, hb)
        return kern.fibered_rhs(p, cells, d, mu_cells, omega(t), np.exp(-eps * t),
                                wts.y_ptr, wts.q, wts.y_w,
                                gbase, gP, gQ, hbase, hP, hQ, eps)

    for step in range(steps):
        t = times[step]
        k1p, k1d = rhs(phi, D, t)
        k2p, k2d = rhs(phi + 0.5 * dt * k1p, D + 0.5 * dt * k1d, t + 0.5 * dt)
        k3p, k3d = rhs(phi + 0.5 * dt * k2p, D + 0.5 * dt * k2d, t + 0.5 * dt)
        k4p, k4d = rhs(phi + dt * k3p, D + dt * k3d, t + dt)
        phi = wrap_phase(phi + (dt / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p))
        D = D + (dt / 6.0) * (k1d + 2 * k2d + 2 * k3d + k4d)
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(D))):
            raise FloatingPointError(f"non-finite state at step {step + 1}")
        phases_out[step + 1] = phi.reshape(m, n)
        ac_mean[step + 1] = D.reshape(m, n, m).mean(axis=1)
        min_ac = min(min_ac, float(D.min()))

    beta0 = float(wts.W_a.min())
    gamma0 = float(init.masses.max()) if init.masses.size else 0.0
    horizon = positivity_horizon(beta0, gamma0, model.h, eps) if gamma0 > 0 else np.inf
    flag = bool(min_ac < -positivity_tol and T <= horizon)
    return LatticeTrajectory(times, phases_out, init.partition, init.masses,
                             wts, eps, ac_mean, min_ac, horizon, flag)


def empirical_path(traj: LatticeTrajectory, partition: Partition | None = None):
    """Measure path of the lattice run: per cell, n atoms of weight a_i/n."""
    from .meanfield import MeasurePath

    return MeasurePath(partition or traj.partition, traj.times,
                       traj.phases.copy(), traj.masses.copy())
