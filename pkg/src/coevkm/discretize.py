"""Constructive discretization of initial data.

Initial vertex-fibered measures are replaced cell by cell with n equal-mass
atoms at quantile midpoints (deterministic empirical approximation, O(1/n)
bounded-Lipschitz error in one dimension). Initial graph measures keep their
absolutely continuous mass and density floor exactly, so positivity horizons
certified for the continuum data carry over to the discretization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .digraph import DigraphMeasure, Partition, VertexSpace, mass_in_cells
from .measure_kit import CIRCLE, HybridMeasure
from .model import ModelSpec, OmegaSpec, positivity_horizon


@dataclass(frozen=True)
class DiscretizationPlan:
    """Cells, atoms per cell, positivity floor and target horizon."""

    m: int
    n: int
    beta: float = 0.0
    T: float = 1.0

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be at least 1")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")

    def validate(self, model: ModelSpec) -> None:
        if model.h.positive_part_sup() > 0:
            horizon = positivity_horizon(self.beta, 1.0, model.h, model.epsilon)
            if not self.T < horizon:
                raise ValueError(
                    f"target time {self.T} is not below the positivity horizon {horizon}"
                )


def uniform_partition(space: VertexSpace, m: int) -> Partition:
    """m equal half-open cells with representatives at cell centers."""
    return Partition.uniform(m, space)


# ---------------------------------------------------------------------------
# quantile midpoints of a hybrid measure
# ---------------------------------------------------------------------------

def _cdf_graph(mu: HybridMeasure):
    """Piecewise-linear graph (xs, cum) of the cumulative mass function.

    Atom jumps appear as doubled x entries; between entries the cumulative is
    linear (density constant per grid cell).
    """
    from .measure_kit import merge_atoms

    apos, aw = merge_atoms(mu.atom_positions, mu.atom_weights)
    M = mu.M
    nodes = np.union1d(np.arange(M + 1) / M, apos)
    k = np.minimum((nodes[:-1] * M).astype(int), M - 1)
    seg = mu.density[k] * np.diff(nodes)
    cum_nodes = np.concatenate([[0.0], np.cumsum(seg)])

    atom_at = dict(zip(apos.tolist(), aw.tolist()))
    xs, cum = [0.0], [0.0]
    jump_total = 0.0
    if 0.0 in atom_at:
        jump_total += atom_at[0.0]
        xs.append(0.0)
        cum.append(jump_total)
    for i in range(1, nodes.size):
        x = nodes[i]
        xs.append(x)
        cum.append(cum_nodes[i] + jump_total)
        if x in atom_at and x != 0.0:
            jump_total += atom_at[x]
            xs.append(x)
            cum.append(cum_nodes[i] + jump_total)
    return np.asarray(xs), np.asarray(cum)


def quantile_midpoints(mu: HybridMeasure, n: int) -> np.ndarray:
    """Positions Q((j - 1/2)/n), j = 1..n, of the normalized measure.

    A zero-mass measure yields n atoms at position 0 (their weight is zero
    downstream). Circle positions are reduced mod 1.
    """
    total = mu.total_mass()
    if total <= 0:
        return np.zeros(n)
    xs, cum = _cdf_graph(mu)
    targets = total * (np.arange(n) + 0.5) / n
    out = np.empty(n)
    for j, t in enumerate(targets):
        i = int(np.searchsorted(cum, t, side="left"))
        i = min(max(i, 1), cum.size - 1)
        lo, hi = cum[i - 1], cum[i]
        if hi > lo:
            out[j] = xs[i - 1] + (t - lo) / (hi - lo) * (xs[i] - xs[i - 1])
        else:
            out[j] = xs[i]
    if mu.space == CIRCLE:
        out = np.mod(out, 1.0)
    return out


# ---------------------------------------------------------------------------
# vertex-fibered measures on the circle (the nu objects)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiberedMeasure:
    """x -> measure on the circle, piecewise constant over a vertex partition."""

    partition: Partition
    fibers: tuple

    def __post_init__(self):
        fibers = tuple(self.fibers)
        if len(fibers) != self.partition.m:
            raise ValueError("one fiber per partition cell required")
        object.__setattr__(self, "fibers", fibers)

    def fiber(self, x) -> HybridMeasure:
        return self.fibers[int(self.partition.cell_of(x))]

    def masses(self) -> np.ndarray:
        return np.array([f.total_mass() for f in self.fibers])


@dataclass(frozen=True)
class MonokineticProfile:
    """nu^x = delta at profile(x): one atom whose position varies with x.

    ``fn`` must be a vectorized nondecreasing map of [0,1] into phases, so
    cell averages have quantiles fn(cell quantile).
    """

    fn: object

    def positions(self, x):
        return np.mod(np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float), 1.0)


def _overlap_weights(target: Partition, source: Partition):
    """For each target cell: (source cell indices, overlap fractions of the target cell)."""
    cuts = np.union1d(target.edges, source.edges)
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    ti = target.cell_of(mids)
    si = source.cell_of(mids)
    seg = np.diff(cuts)
    out = [([], []) for _ in range(target.m)]
    for t, s, ln in zip(ti, si, seg):
        out[t][0].append(int(s))
        out[t][1].append(float(ln))
    return out


def _mix(fibers, weights) -> HybridMeasure:
    """Weighted sum of hybrid measures on a common space."""
    space = fibers[0].space
    L = 1
    for f in fibers:
        L = int(np.lcm(L, f.M))
    dens = np.zeros(L)
    pos, w = [], []
    for f, wt in zip(fibers, weights):
        dens += wt * np.repeat(f.density, L // f.M)
        pos.append(f.atom_positions)
        w.append(wt * f.atom_weights)
    return HybridMeasure(space, np.concatenate(pos), np.concatenate(w), dens)


def discretize_nu(nu0, partition: Partition, n: int) -> FiberedMeasure:
    """Replace each cell's averaged fiber with n equal-mass quantile atoms.

    ``nu0`` is either a FiberedMeasure (piecewise constant in x) or a
    MonokineticProfile. Cell masses are the averaged fiber masses, so the
    aggregate normalization is preserved exactly.
    """
    m = partition.m
    fibers = []
    if isinstance(nu0, MonokineticProfile):
        lo = partition.edges[:-1]
        ln = partition.cell_lengths
        for i in range(m):
            xq = lo[i] + (np.arange(n) + 0.5) / n * ln[i]
            pos = nu0.positions(xq)
            fibers.append(HybridMeasure.atomic(pos, np.full(n, 1.0 / n), CIRCLE))
        return FiberedMeasure(partition, tuple(fibers))

    overlaps = _overlap_weights(partition, nu0.partition)
    lengths = partition.cell_lengths
    for i in range(m):
        idx, frac = overlaps[i]
        avg = _mix([nu0.fibers[s] for s in idx], np.asarray(frac) / lengths[i])
        a_i = avg.total_mass()
        pos = quantile_midpoints(avg, n)
        fibers.append(HybridMeasure.atomic(pos, np.full(n, a_i / n), CIRCLE))
    return FiberedMeasure(partition, tuple(fibers))


# ---------------------------------------------------------------------------
# graph measures
# ---------------------------------------------------------------------------

def dgm_from_fiber_fn(fiber_fn, partition: Partition) -> DigraphMeasure:
    """Piecewise-constant digraph measure sampling ``fiber_fn`` at representatives."""
    return DigraphMeasure(
        partition, tuple(fiber_fn(x) for x in partition.representatives)
    )


def discretize_eta(eta0: DigraphMeasure, partition: Partition, n: int,
                   beta: float) -> DigraphMeasure:
    """Cellwise discretization preserving positivity floor and fiber masses.

    Per target cell: the singular part of the source fiber at the cell
    representative becomes n equal atoms at its quantile midpoints; the
    absolutely continuous part is block-averaged onto the target cells, which
    preserves its total mass and keeps the pointwise density floor.
    """
    from .digraph import ac_lower_bound

    if ac_lower_bound(eta0) < beta:
        raise ValueError(
            "initial graph density floor is below beta; positivity horizon "
            "cannot be certified"
        )
    if not partition.is_uniform():
        raise ValueError("target partition must be uniform")
    m = partition.m
    space = partition.space.kind
    fibers = []
    for x in partition.representatives:
        src = eta0.fiber(x)
        sing = HybridMeasure(space, src.atom_positions, src.atom_weights, np.zeros(1))
        ws = sing.total_mass()
        if ws > 0:
            ypos = quantile_midpoints(sing, n)
            yw = np.full(n, ws / n)
        else:
            ypos = np.empty(0)
            yw = np.empty(0)
        ac = HybridMeasure(space, density=src.density)
        cell_mass = mass_in_cells(ac, partition)
        dens = cell_mass / partition.cell_lengths
        fibers.append(HybridMeasure(space, ypos, yw, dens))
    return DigraphMeasure(partition, tuple(fibers))


def discretize_omega(omega: OmegaSpec, partition: Partition,
                     times) -> OmegaSpec:
    """Tabulate omega at (time node, cell representative)."""
    times = np.asarray(times, dtype=float)
    reps = partition.representatives
    values = np.stack([omega.eval(t, reps) for t in times])
    return OmegaSpec.tabulated(times, values)


@dataclass(frozen=True)
class LatticeWeights:
    """Cell-structured weights extracted from a discretized graph measure.

    W_a[i, p] is the a.c. density of fiber i over cell p; the singular part
    of fiber i is the atom list y_pos/y_w sliced by the CSR pointer y_ptr,
    with q[j] the cell containing atom j.
    """

    W_a: np.ndarray
    W_s: np.ndarray
    y_ptr: np.ndarray
    y_pos: np.ndarray
    y_w: np.ndarray
    q: np.ndarray
    mu_cells: np.ndarray


def weights_from_dgm(eta_disc: DigraphMeasure, partition: Partition) -> LatticeWeights:
    """Block-averaged a.c. weights, singular masses, atom coordinates and cells."""
    m = partition.m
    mu = partition.cell_lengths
    W_a = np.zeros((m, m))
    W_s = np.zeros(m)
    ptr = [0]
    pos_all, w_all, q_all = [], [], []
    for i, f in enumerate(eta_disc.fibers):
        ac = HybridMeasure(f.space, density=f.density)
        cm = mass_in_cells(ac, partition)
        W_a[i] = np.where(mu > 0, cm / np.where(mu > 0, mu, 1.0), 0.0)
        W_s[i] = f.atom_weights.sum()
        pos_all.append(f.atom_positions)
        w_all.append(f.atom_weights)
        q_all.append(partition.cell_of(f.atom_positions))
        ptr.append(ptr[-1] + f.atom_positions.size)
    return LatticeWeights(
        W_a, W_s, np.asarray(ptr, dtype=np.int64),
        np.concatenate(pos_all) if pos_all else np.empty(0),
        np.concatenate(w_all) if w_all else np.empty(0),
        np.concatenate(q_all).astype(np.int64) if q_all else np.empty(0, np.int64),
        mu,
    )


def dgm_from_weights(weights: LatticeWeights, partition: Partition) -> DigraphMeasure:
    """Assemble the digraph measure a LatticeWeights bundle represents."""
    if not partition.is_uniform():
        raise ValueError("partition must be uniform")
    m = partition.m
    space = partition.space.kind
    fibers = []
    for i in range(m):
        lo, hi = weights.y_ptr[i], weights.y_ptr[i + 1]
        fibers.append(HybridMeasure(
            space, weights.y_pos[lo:hi], weights.y_w[lo:hi], weights.W_a[i].copy()
        ))
    return DigraphMeasure(partition, tuple(fibers))
