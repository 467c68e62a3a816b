"""Mean-field characteristic flow, graph-measure reconstruction, and the
fixed-point / density solvers for the limiting dynamics.

The characteristic flow advances tracked phase atoms per vertex cell while
carrying each atom's graph measure as auxiliary state: the singular part of
the initial graph measure decays as exp(-eps t) (closed form) and the
absolutely continuous part obeys

    dD_p/dt = -eps (D_p + integral of h(. - phi) against the driving fiber at cell p),

which realizes the memory integral without storing history. The mean-field
solution is the fixed point of "flow the initial atoms through the
characteristics driven by a candidate path, then push the initial measure
forward"; it is found by successive substitution (Picard iteration) with a
sup-over-time bounded-Lipschitz residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import get_kernels
from ._kernels_numpy import fold_moments, eval_folded
from .digraph import DigraphMeasure, Partition, ac_lower_bound
from .discretize import FiberedMeasure, weights_from_dgm
from .measure_kit import (
    CIRCLE,
    HybridMeasure,
    bl_distance,
    circle_distance,
    wrap_phase,
)
from .model import ModelSpec, OmegaSpec, positivity_horizon


@dataclass(frozen=True)
class MeasurePath:
    """Time-indexed vertex-fibered atomic measures on the circle.

    positions[k, i, j] is atom j of cell i at node k; every atom of cell i
    carries weight masses[i] / n. Fiber masses are constant along the path by
    construction (pushforwards move atoms, never weights).
    """

    partition: Partition
    times: np.ndarray
    positions: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        pos = np.asarray(self.positions, dtype=float)
        masses = np.asarray(self.masses, dtype=float)
        if pos.ndim != 3 or pos.shape[0] != times.size or pos.shape[1] != self.partition.m:
            raise ValueError("positions must have shape (K+1, m, n)")
        if masses.shape != (self.partition.m,):
            raise ValueError("one fiber mass per cell required")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if masses.size and masses.min() < 0:
            raise ValueError("fiber masses must be nonnegative")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", wrap_phase(pos))
        object.__setattr__(self, "masses", masses)

    @classmethod
    def constant(cls, nu0: FiberedMeasure, times) -> "MeasurePath":
        """Time-frozen path broadcasting the fibers of an atomic nu0."""
        pos, masses = _atomic_fibers_to_arrays(nu0)
        times = np.asarray(times, dtype=float)
        return cls(nu0.partition, times,
                   np.broadcast_to(pos, (times.size,) + pos.shape).copy(), masses)

    @property
    def n(self) -> int:
        return self.positions.shape[2]

    def fiber(self, k: int, i: int) -> HybridMeasure:
        n = self.n
        return HybridMeasure.atomic(self.positions[k, i],
                                    np.full(n, self.masses[i] / n), CIRCLE)

    def node_fibers(self, k: int) -> tuple:
        return tuple(self.fiber(k, i) for i in range(self.partition.m))

    def positions_at(self, t: float) -> np.ndarray:
        """Atom positions at an arbitrary time by shortest-arc interpolation."""
        times = self.times
        if t <= times[0]:
            return self.positions[0]
        if t >= times[-1]:
            return self.positions[-1]
        k = int(np.searchsorted(times, t, side="right") - 1)
        frac = (t - times[k]) / (times[k + 1] - times[k])
        p0, p1 = self.positions[k], self.positions[k + 1]
        delta = np.mod(p1 - p0 + 0.5, 1.0) - 0.5
        return wrap_phase(p0 + frac * delta)

    def aggregate_fiber(self, k: int) -> HybridMeasure:
        """The vertex-integrated measure at node k (one atomic measure)."""
        mu = self.partition.cell_lengths
        n = self.n
        w = np.repeat(mu * self.masses / n, n)
        return HybridMeasure.atomic(self.positions[k].ravel(), w, CIRCLE)

    def index_of_time(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not on the path grid")
        return k


def _atomic_fibers_to_arrays(nu0: FiberedMeasure):
    m = nu0.partition.m
    ns = {f.atom_positions.size for f in nu0.fibers}
    if len(ns) != 1:
        raise ValueError("all fibers must carry the same number of atoms")
    n = ns.pop()
    if n == 0:
        raise ValueError("fibers must be atomic")
    pos = np.empty((m, n))
    masses = np.empty(m)
    for i, f in enumerate(nu0.fibers):
        if np.any(f.density):
            raise ValueError("fibers must be purely atomic")
        if f.atom_weights.size and not np.allclose(f.atom_weights, f.atom_weights[0]):
            raise ValueError("fiber atoms must have equal weights")
        pos[i] = f.atom_positions
        masses[i] = f.atom_weights.sum()
    return pos, masses


@dataclass(frozen=True)
class DgmPath:
    """Graph-measure path: decaying initial atoms plus evolving cell densities."""

    partition: Partition
    times: np.ndarray
    atoms0: tuple               # (positions, weights) per cell
    densities: np.ndarray       # (K+1, m, m) density of fiber i over cell p
    epsilon: float

    def at(self, k: int) -> DigraphMeasure:
        decay = np.exp(-self.epsilon * self.times[k])
        space = self.partition.space.kind
        fibers = []
        for i, (pos, w) in enumerate(self.atoms0):
            fibers.append(HybridMeasure(space, pos, decay * w, self.densities[k, i]))
        return DigraphMeasure(self.partition, tuple(fibers))

    def min_density(self) -> float:
        return float(self.densities.min())


@dataclass(frozen=True)
class HybridTrajectory:
    """Characteristic-flow output: tracked phases plus the reconstructed graph path.

    eta is the tracked-atom average of the per-atom auxiliary graph states;
    min_ac_density is the running minimum over every atom, stage excluded.
    """

    times: np.ndarray
    phases: np.ndarray          # (K+1, m, n_track)
    partition: Partition
    eta: DgmPath | None
    min_ac_density: float


def _check_same_partition(pa: Partition, pb: Partition):
    if pa.m != pb.m or not np.allclose(pa.edges, pb.edges) \
            or pa.space.kind != pb.space.kind:
        raise ValueError("graph measure and driving path must share the partition")


def _omega_cells_fn(omega, model: ModelSpec, partition: Partition):
    reps = partition.representatives
    if omega is None:
        omega = model.omega
    if isinstance(omega, OmegaSpec):
        return lambda t: np.asarray(omega.eval(t, reps), dtype=float)
    if callable(omega):
        return lambda t: np.asarray(omega(t), dtype=float)
    arr = np.asarray(omega, dtype=float)
    if arr.shape != (partition.m,):
        raise ValueError(f"omega must have shape ({partition.m},)")
    return lambda t: arr


def characteristic_flow(phi0: np.ndarray, eta0: DigraphMeasure, nu: MeasurePath,
                        model: ModelSpec, omega=None, T: float | None = None,
                        dt: float | None = None, store_eta: bool = True,
                        backend: str | None = None) -> HybridTrajectory:
    """Flow tracked atoms (one row of phases per cell) through the
    characteristic equation driven by a prescribed measure path.

    Driving atom positions at RK stage times are obtained by shortest-arc
    linear interpolation between path nodes; fiber masses are constant.
    """
    partition = nu.partition
    _check_same_partition(eta0.partition, partition)
    if not eta0.is_positive():
        raise ValueError("initial graph measure must be positive")
    phi0 = np.atleast_2d(np.asarray(phi0, dtype=float))
    m = partition.m
    if phi0.shape[0] != m:
        raise ValueError("phi0 must have one row of atoms per cell")
    n_track = phi0.shape[1]
    if T is None:
        T = float(nu.times[-1])
    if dt is None:
        dt = float(nu.times[1] - nu.times[0])
    steps = round(T / dt)
    if steps < 1:
        raise ValueError("T must be at least dt/2")
    if nu.times[-1] < steps * dt - 1e-9:
        raise ValueError("driving path is shorter than the requested horizon")

    kern = get_kernels(backend)
    gc0, ga, gb = model.g.dense_coeffs()
    hc0, ha, hb = model.h.dense_coeffs()
    kmax = max(len(ga), len(ha))
    eps = model.epsilon
    omega_cells = _omega_cells_fn(omega, model, partition)

    wts = weights_from_dgm(eta0, partition)
    mu_cells = wts.mu_cells
    cells = np.repeat(np.arange(m, dtype=np.int64), n_track)
    drive_cells = np.repeat(np.arange(m, dtype=np.int64), nu.n)
    drive_w = np.repeat(nu.masses / nu.n, nu.n)

    phi = phi0.ravel().copy()
    D = np.repeat(wts.W_a, n_track, axis=0).astype(float)

    times = dt * np.arange(steps + 1)
    phases_out = np.empty((steps + 1, m, n_track))
    phases_out[0] = wrap_phase(phi0)
    densities = np.empty((steps + 1, m, m)) if store_eta else None
    if store_eta:
        densities[0] = wts.W_a
    min_ac = float(D.min())

    def rhs(p, d, t):
        drv = nu.positions_at(t).ravel()
        mass, S, C = kern.cell_moments(drv, drive_w, drive_cells, m, kmax)
        gbase, gP, gQ = fold_moments(mass, S, C, gc0, ga, gb)
        hbase, hP, hQ = fold_moments(mass, S, C, hc0, ha, hb)
        return kern.fibered_rhs(p, cells, d, mu_cells, omega_cells(t),
                                np.exp(-eps * t), wts.y_ptr, wts.q, wts.y_w,
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
        phases_out[step + 1] = phi.reshape(m, n_track)
        if store_eta:
            densities[step + 1] = D.reshape(m, n_track, m).mean(axis=1)
        min_ac = min(min_ac, float(D.min()))

    eta_path = None
    if store_eta:
        atoms0 = tuple((f.atom_positions.copy(), f.atom_weights.copy())
                       for f in eta0.fibers)
        eta_path = DgmPath(partition, times, atoms0, densities, eps)
    return HybridTrajectory(times, phases_out, partition, eta_path, min_ac)


def reconstruct_eta(eta0: DigraphMeasure, nu: MeasurePath, phi_path: np.ndarray,
                    model: ModelSpec) -> DgmPath:
    """Graph-measure path from the memory integral, trapezoid rule in time.

    eta_t = exp(-eps t) eta_0 - eps * int_0^t exp(-eps (t-s)) F_s ds * mu_X,
    with F_s(i, p) the tracked-atom average over cell i of the h-integral
    against the driving fiber at cell p. phi_path has shape (K+1, m, n_track).
    """
    partition = nu.partition
    _check_same_partition(eta0.partition, partition)
    phi_path = np.asarray(phi_path, dtype=float)
    K1, m, n_track = phi_path.shape
    if K1 != nu.times.size:
        raise ValueError("phase path and driving path disagree on the time grid")
    hc0, ha, hb = model.h.dense_coeffs()
    eps = model.epsilon
    times = nu.times
    drive_cells = np.repeat(np.arange(m, dtype=np.int64), nu.n)
    drive_w = np.repeat(nu.masses / nu.n, nu.n)
    kern = get_kernels("numpy")

    wts = weights_from_dgm(eta0, partition)
    F = np.empty((K1, m, m))
    for k in range(K1):
        mass, S, C = kern.cell_moments(nu.positions[k].ravel(), drive_w,
                                       drive_cells, m, len(ha))
        hbase, hP, hQ = fold_moments(mass, S, C, hc0, ha, hb)
        H = eval_folded(hbase, hP, hQ, phi_path[k].ravel())
        F[k] = H.reshape(m, n_track, m).mean(axis=1)

    densities = np.empty((K1, m, m))
    densities[0] = wts.W_a
    integral = np.zeros((m, m))        # int_0^t exp(eps s) F_s ds
    for k in range(1, K1):
        h_step = times[k] - times[k - 1]
        integral = integral + 0.5 * h_step * (
            np.exp(eps * times[k - 1]) * F[k - 1] + np.exp(eps * times[k]) * F[k]
        )
        densities[k] = np.exp(-eps * times[k]) * (wts.W_a - eps * integral)

    atoms0 = tuple((f.atom_positions.copy(), f.atom_weights.copy())
                   for f in eta0.fibers)
    return DgmPath(partition, times, atoms0, densities, eps)


def pushforward(nu0_fiber: HybridMeasure, flowed_positions) -> HybridMeasure:
    """Transport the atoms of a purely atomic fiber; weights are unchanged."""
    if np.any(nu0_fiber.density):
        raise ValueError("pushforward requires a purely atomic fiber")
    pos = np.asarray(flowed_positions, dtype=float).ravel()
    if pos.size != nu0_fiber.atom_positions.size:
        raise ValueError("atom count mismatch between fiber and flow output")
    return HybridMeasure.atomic(wrap_phase(pos), nu0_fiber.atom_weights.copy(),
                                nu0_fiber.space)


def path_residual(old: MeasurePath, new: MeasurePath, M_eval: int = 2048) -> float:
    """sup over time nodes of the fiberwise sup bounded-Lipschitz distance.

    Exact up to the grid-LP definition: candidate (node, cell) pairs are
    screened by the index-pairing upper bound and only solved while the bound
    can still raise the running maximum.
    """
    if old.positions.shape != new.positions.shape:
        raise ValueError("paths disagree in shape")
    d = circle_distance(old.positions, new.positions)        # (K+1, m, n)
    n = old.n
    ub = (old.masses[None, :] / n) * np.minimum(d, 2.0).sum(axis=2)
    flat = ub.ravel()
    order = np.argsort(-flat)
    best = 0.0
    m = old.partition.m
    for idx in order:
        if flat[idx] <= best:
            break
        k, i = divmod(int(idx), m)
        best = max(best, bl_distance(old.fiber(k, i), new.fiber(k, i), M_eval))
    return best


@dataclass(frozen=True)
class FixedPointResult:
    """Returned iterate plus diagnostics.

    ``flow`` is one extra characteristic sweep driven by the returned path,
    with the graph-measure path stored; its phases answer to ``path`` the way
    a phase trajectory answers to its driving measure path.
    """

    path: MeasurePath
    residuals: list
    converged: bool
    iterations: int
    flow: HybridTrajectory


def solve_vlasov_fixed_point(nu0: FiberedMeasure, eta0: DigraphMeasure,
                             model: ModelSpec, T: float, dt: float,
                             tol: float = 1e-4, max_iter: int = 25,
                             omega=None, M_eval: int = 2048,
                             backend: str | None = None) -> FixedPointResult:
    """Successive substitution for the mean-field fixed point.

    Starting from the time-frozen initial path, each sweep flows the initial
    atoms through the characteristics driven by the previous candidate and
    pushes the initial measure forward. Stops when the sup-over-nodes fiber
    residual drops below tol; mass per fiber is conserved exactly because
    pushforwards only move atom positions.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    masses = nu0.masses()
    gamma = float(masses.max())
    horizon = positivity_horizon(ac_lower_bound(eta0), gamma, model.h,
                                 model.epsilon) if gamma > 0 else np.inf
    if T > horizon + 1e-12:
        raise ValueError(
            f"horizon exceeded: T={T} but positivity holds only up to {horizon}"
        )
    steps = round(T / dt)
    times = dt * np.arange(steps + 1)
    current = MeasurePath.constant(nu0, times)
    phi0, _ = _atomic_fibers_to_arrays(nu0)

    residuals: list = []
    converged = False
    flow = None
    iterations = 0
    for iterations in range(1, max_iter + 1):
        store = iterations == max_iter
        flow = characteristic_flow(phi0, eta0, current, model, omega=omega,
                                   T=T, dt=dt, store_eta=False, backend=backend)
        new = MeasurePath(current.partition, times, flow.phases, masses)
        res = path_residual(current, new, M_eval)
        residuals.append(res)
        current = new
        if res < tol:
            converged = True
            break
    # final flow with the graph path stored, driven by the returned iterate
    flow = characteristic_flow(phi0, eta0, current, model, omega=omega,
                               T=T, dt=dt, store_eta=True, backend=backend)
    return FixedPointResult(current, residuals, converged, iterations, flow)


# ---------------------------------------------------------------------------
# density transport solver (cross-validation route)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DensityField:
    """Nonnegative phase densities per vertex cell on a uniform phase grid."""

    partition: Partition
    times: np.ndarray
    rho: np.ndarray             # (K+1, m, Mphi), per unit phase length

    @property
    def phi_cells(self) -> int:
        return self.rho.shape[2]

    def fiber(self, k: int, i: int) -> HybridMeasure:
        return HybridMeasure.from_density(self.rho[k, i], CIRCLE)

    def masses(self, k: int) -> np.ndarray:
        return self.rho[k].mean(axis=1)


def solve_vlasov_pde(rho0: np.ndarray, eta0: DigraphMeasure, model: ModelSpec,
                     T: float, dt: float, omega=None,
                     allow_nonconstant_h: bool = False) -> DensityField:
    """Conservative first-order upwind advance of the phase-density transport.

    rho0 has shape (m, Mphi). With a constant adaptation rule the evolving
    graph masses have the closed form
        E_t[i, p] = exp(-eps t) E_0[i, p] - h (1 - exp(-eps t)) mbar_p mu(A_p),
    which is exactly the auxiliary-state augmentation of the characteristic
    flow. For non-constant h (formal use, opt-in) the feedback is averaged
    over each vertex cell's own density.
    """
    if model.h.lip_bound() > 0 and not allow_nonconstant_h:
        raise ValueError(
            "density solver requires a constant adaptation rule; "
            "pass allow_nonconstant_h=True for formal use"
        )
    partition = eta0.partition
    rho0 = np.asarray(rho0, dtype=float)
    m, Mphi = rho0.shape
    if m != partition.m:
        raise ValueError("rho0 must have one row per vertex cell")
    if np.any(rho0 < 0):
        raise ValueError("rho0 must be nonnegative")
    steps = round(T / dt)
    if steps < 1:
        raise ValueError("T must be at least dt/2")
    eps = model.epsilon
    gc0, ga, gb = model.g.dense_coeffs()
    hc0, ha, hb = model.h.dense_coeffs()
    h_const = model.h.lip_bound() == 0
    omega_cells = _omega_cells_fn(omega, model, partition)
    kern = get_kernels("numpy")

    mu = partition.cell_lengths
    dphi = 1.0 / Mphi
    centers = (np.arange(Mphi) + 0.5) * dphi
    faces = np.arange(Mphi) * dphi
    wts = weights_from_dgm(eta0, partition)
    # initial graph masses per (fiber cell, source cell)
    E0 = wts.W_a * mu[None, :]
    for i in range(m):
        lo, hi = wts.y_ptr[i], wts.y_ptr[i + 1]
        np.add.at(E0[i], wts.q[lo:hi], wts.y_w[lo:hi])
    E = E0.copy()

    times = dt * np.arange(steps + 1)
    rho = np.empty((steps + 1, m, Mphi))
    rho[0] = rho0
    cell_of_center = np.repeat(np.arange(m, dtype=np.int64), Mphi)

    for step in range(steps):
        t = times[step]
        r = rho[step]
        mbar = r.mean(axis=1)                     # fiber masses
        if h_const:
            decay = np.exp(-eps * t)
            E = decay * E0 - hc0 * (1.0 - decay) * (mbar * mu)[None, :]
        # velocity at faces: V_i(phi) = omega_i + sum_p E[i,p] Gint_p(phi)
        pos = np.tile(centers, m)
        w = (r * dphi).ravel()
        mass, S, C = kern.cell_moments(pos, w, cell_of_center, m, max(len(ga), len(ha)))
        gbase, gP, gQ = fold_moments(mass, S, C, gc0, ga, gb)
        Gf = eval_folded(gbase, gP, gQ, faces)    # (Mphi, m)
        V = omega_cells(t)[:, None] + E @ Gf.T    # (m, Mphi) at faces
        vmax = float(np.abs(V).max())
        if vmax * dt > dphi * (1.0 + 1e-12):
            raise ValueError(
                f"CFL violation at t={t:.6g}: dt={dt} > {dphi / vmax:.3e}"
            )
        up = np.where(V > 0, np.roll(r, 1, axis=1), r)
        flux = V * up
        rho[step + 1] = r - (dt / dphi) * (np.roll(flux, -1, axis=1) - flux)
        if not h_const:
            hbase, hP, hQ = fold_moments(mass, S, C, hc0, ha, hb)
            Hc = eval_folded(hbase, hP, hQ, centers)   # (Mphi, m)
            with np.errstate(invalid="ignore", divide="ignore"):
                Favg = (r * dphi) @ Hc / np.where(mbar > 0, mbar, 1.0)[:, None]
            E = E + dt * (-eps) * (E + Favg * mu[None, :])
    return DensityField(partition, times, rho)
