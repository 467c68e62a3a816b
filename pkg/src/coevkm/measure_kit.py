"""Finite signed measures on the circle [0,1) and the interval [0,1].

A measure is stored in split form: a list of atoms (singular part) plus a
piecewise-constant density on a uniform grid (absolutely continuous part
w.r.t. the uniform reference measure). Two metrics are provided:

* ``tv_distance``  -- total variation, |mu - nu|(X), computed exactly on the
  split representation (the convention gives ||delta_x||_TV = 1).
* ``bl_distance``  -- bounded-Lipschitz metric, sup of the integral of f over
  test functions with ||f||_inf + Lip(f) <= 1, evaluated through a grid LP:
  the difference measure is projected onto M_eval cells and the dual is
  maximized subject to |f_k| <= 1 and adjacent-cell steps |f_{k+1} - f_k|
  <= 1/M_eval (wrapping on the circle). The grid optimum is exact; it differs
  from the continuum metric by at most 2/M_eval times the mass of |mu - nu|.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

CIRCLE = "circle"
INTERVAL = "interval"

DEFAULT_DENSITY_CELLS = 512
DEFAULT_EVAL_CELLS = 2048


def wrap_phase(x):
    """Map reals onto [0, 1) (phases mod 1)."""
    return np.mod(x, 1.0)


def circle_distance(x, y):
    """Arc distance on [0,1) with wrap: min(|x-y|, 1-|x-y|), at most 1/2."""
    d = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    d = np.mod(d, 1.0)
    return np.minimum(d, 1.0 - d)


def space_distance(space, x, y):
    if space == CIRCLE:
        return circle_distance(x, y)
    return np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))


@dataclass(frozen=True)
class Grid:
    """Uniform grid of M cells on [0,1); cell k is [k/M, (k+1)/M)."""

    M: int
    space: str = CIRCLE

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("grid needs at least one cell")
        if self.space not in (CIRCLE, INTERVAL):
            raise ValueError(f"unknown space {self.space!r}")

    @property
    def centers(self):
        return (np.arange(self.M) + 0.5) / self.M

    def cell_of(self, x):
        """Containing cell (position 1 on the interval belongs to the last cell)."""
        idx = np.floor(np.asarray(x, dtype=float) * self.M).astype(np.int64)
        if self.space == CIRCLE:
            return np.mod(idx, self.M)
        return np.clip(idx, 0, self.M - 1)


def _sorted_atoms(positions, weights):
    """Sort atoms by position (stable); duplicates and zero weights are kept,
    so atom counts are preserved for atom-tracking consumers. Metrics merge
    coincident atoms internally."""
    positions = np.asarray(positions, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    if positions.shape != weights.shape:
        raise ValueError("atom positions and weights must have equal length")
    order = np.argsort(positions, kind="stable")
    return positions[order], weights[order]


def merge_atoms(positions, weights):
    """Combine weights of exactly coincident atoms; drop zero totals."""
    if positions.size == 0:
        return positions, weights
    uniq, inverse = np.unique(positions, return_inverse=True)
    merged = np.bincount(inverse, weights=weights, minlength=uniq.size)
    keep = merged != 0.0
    return uniq[keep], merged[keep]


@dataclass(frozen=True)
class HybridMeasure:
    """Atoms plus a piecewise-constant density on ``len(density)`` uniform cells.

    ``density`` holds values per unit length, so the absolutely continuous
    mass is ``density.mean()``. Signed weights/densities are allowed (needed
    for differences); dynamical states are checked with ``is_positive``.
    """

    space: str
    atom_positions: np.ndarray = field(default_factory=lambda: np.empty(0))
    atom_weights: np.ndarray = field(default_factory=lambda: np.empty(0))
    density: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        if self.space not in (CIRCLE, INTERVAL):
            raise ValueError(f"unknown space {self.space!r}")
        pos, w = _sorted_atoms(self.atom_positions, self.atom_weights)
        dens = np.asarray(self.density, dtype=float).ravel()
        if dens.size < 1:
            raise ValueError("density grid needs at least one cell")
        if pos.size:
            if self.space == CIRCLE:
                if np.any(pos < 0) or np.any(pos >= 1):
                    raise ValueError("circle atoms must lie in [0, 1)")
            elif np.any(pos < 0) or np.any(pos > 1):
                raise ValueError("interval atoms must lie in [0, 1]")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(dens))):
            raise ValueError("non-finite atom weight or density")
        object.__setattr__(self, "atom_positions", pos)
        object.__setattr__(self, "atom_weights", w)
        object.__setattr__(self, "density", dens)

    # -- constructors -----------------------------------------------------
    @classmethod
    def dirac(cls, position, weight=1.0, space=CIRCLE, M=1):
        return cls(space, np.array([position]), np.array([weight]), np.zeros(M))

    @classmethod
    def atomic(cls, positions, weights, space=CIRCLE, M=1):
        return cls(space, positions, weights, np.zeros(M))

    @classmethod
    def uniform(cls, mass=1.0, space=CIRCLE, M=DEFAULT_DENSITY_CELLS):
        return cls(space, density=np.full(M, float(mass)))

    @classmethod
    def from_density(cls, values, space=CIRCLE):
        return cls(space, density=np.asarray(values, dtype=float))

    # -- basic structure ---------------------------------------------------
    @property
    def M(self) -> int:
        return self.density.size

    def total_mass(self) -> float:
        return float(self.atom_weights.sum() + self.density.mean())

    def ac_mass(self) -> float:
        return float(self.density.mean())

    def is_positive(self, tol=0.0) -> bool:
        return bool(np.all(self.atom_weights >= -tol) and np.all(self.density >= -tol))

    def with_density_cells(self, M: int) -> "HybridMeasure":
        """Exact refinement of the density grid; M must be a multiple of self.M."""
        if M % self.M:
            raise ValueError("can only refine to a multiple of the current grid")
        return HybridMeasure(self.space, self.atom_positions, self.atom_weights,
                             np.repeat(self.density, M // self.M))

    # -- linear structure --------------------------------------------------
    def scaled(self, factor: float) -> "HybridMeasure":
        return HybridMeasure(self.space, self.atom_positions,
                             factor * self.atom_weights, factor * self.density)

    def _binary(self, other: "HybridMeasure", sign: float) -> "HybridMeasure":
        if self.space != other.space:
            raise ValueError("measures live on different spaces")
        L = int(np.lcm(self.M, other.M))
        dens = np.repeat(self.density, L // self.M) \
            + sign * np.repeat(other.density, L // other.M)
        pos = np.concatenate([self.atom_positions, other.atom_positions])
        w = np.concatenate([self.atom_weights, sign * other.atom_weights])
        return HybridMeasure(self.space, pos, w, dens)

    def __add__(self, other):
        return self._binary(other, +1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)


def total_mass(mu: HybridMeasure) -> float:
    return mu.total_mass()


def tv_distance(mu: HybridMeasure, nu: HybridMeasure) -> float:
    """|mu - nu|(X): atom weight differences plus L1 distance of densities.

    Coincident atoms are merged before taking absolute values; density grids
    are reconciled by least-common refinement, exact for piecewise-constant
    densities.
    """
    if mu.space != nu.space:
        raise ValueError("measures live on different spaces")
    diff = mu - nu
    _, w = merge_atoms(diff.atom_positions, diff.atom_weights)
    return float(np.abs(w).sum() + np.abs(diff.density).mean())


def project_to_grid(mu: HybridMeasure, M_eval: int) -> np.ndarray:
    """Mass-preserving projection onto M_eval cells.

    Atoms snap to the containing cell (equivalently the nearest cell center);
    the density is integrated exactly per cell.
    """
    grid = Grid(M_eval, mu.space)
    w = np.zeros(M_eval)
    if mu.atom_positions.size:
        np.add.at(w, grid.cell_of(mu.atom_positions), mu.atom_weights)
    M = mu.M
    if np.any(mu.density):
        if M_eval % M == 0:
            w += np.repeat(mu.density, M_eval // M) / M_eval
        else:
            # exact overlap integration of the piecewise-constant density
            edges = np.arange(M_eval + 1) / M_eval
            coarse = np.arange(M + 1) / M
            cuts = np.union1d(edges, coarse)
            mids = 0.5 * (cuts[:-1] + cuts[1:])
            vals = mu.density[np.minimum((mids * M).astype(int), M - 1)]
            seg_mass = vals * np.diff(cuts)
            target = np.minimum((mids * M_eval).astype(int), M_eval - 1)
            np.add.at(w, target, seg_mass)
    return w


# ---------------------------------------------------------------------------
# chain LP: maximize w.f subject to |f_k| <= 1 and per-pair step budgets
# ---------------------------------------------------------------------------

def _reduce_chain(w, circle):
    """Drop zero-weight cells; return (weights, step budgets between survivors).

    Budgets are in cell units; on the circle the wrap budget closes the loop.
    Feasible assignments of the reduced problem extend to the full grid by
    linear interpolation, so the reduced optimum equals the full optimum.
    """
    idx = np.flatnonzero(w)
    M = w.shape[0]
    if idx.size == 0:
        return np.empty(0), np.empty(0), False
    red = w[idx]
    gaps = np.diff(idx).astype(float)
    wrap = circle and idx.size > 1
    if wrap:
        gaps = np.append(gaps, idx[0] + M - idx[-1])
    return red, gaps / M, wrap


def _solve_chain_lp(red, budgets, wrap):
    """Exact optimum of the reduced chain LP via HiGHS."""
    r = red.size
    if r == 0:
        return 0.0
    if r == 1:
        return float(abs(red[0]))
    budgets = np.minimum(budgets, 2.0)  # box constraints dominate past 2
    npairs = budgets.size
    rows = np.arange(npairs)
    cols_a = rows
    cols_b = (rows + 1) % r
    data = np.ones(npairs)
    Dmat = sp.csr_matrix(
        (np.concatenate([data, -data]),
         (np.concatenate([rows, rows]), np.concatenate([cols_b, cols_a]))),
        shape=(npairs, r),
    )
    A = sp.vstack([Dmat, -Dmat], format="csr")
    b = np.concatenate([budgets, budgets])
    res = linprog(-red, A_ub=A, b_ub=b, bounds=[(-1.0, 1.0)] * r, method="highs")
    if res.status != 0:
        raise RuntimeError(f"chain LP solve failed (status {res.status})")
    return float(-res.fun)


def _chain_objective(mu, nu, M_eval):
    if mu.space != nu.space:
        raise ValueError("measures live on different spaces")
    if M_eval < 2:
        raise ValueError("M_eval must be at least 2")
    if M_eval < max(mu.M, nu.M):
        raise ValueError("M_eval must be at least as fine as the input grids")
    w = project_to_grid(mu, M_eval) - project_to_grid(nu, M_eval)
    return w


def bl_distance(mu: HybridMeasure, nu: HybridMeasure,
                M_eval: int = DEFAULT_EVAL_CELLS) -> float:
    """Bounded-Lipschitz distance via the exact grid LP (see module docstring)."""
    w = _chain_objective(mu, nu, M_eval)
    red, budgets, wrap = _reduce_chain(w, mu.space == CIRCLE)
    return _solve_chain_lp(red, budgets, wrap)


def bl_distance_bruteforce(mu: HybridMeasure, nu: HybridMeasure,
                           M_eval: int) -> float:
    """Reference optimum of the same grid LP for M_eval <= 6 cells.

    Every vertex of the feasible polytope has all coordinates in the lattice
    {s + j/M_eval : s = -1 or +1, j integer} intersected with [-1, 1]: some
    box constraint binds at any vertex and binding chain constraints move in
    steps of exactly 1/M_eval. Exhaustive search over feasible lattice
    assignments therefore attains the LP optimum.
    """
    if M_eval > 6:
        raise ValueError("brute-force oracle is limited to at most 6 cells")
    w = _chain_objective(mu, nu, M_eval)
    M = w.shape[0]
    c = 1.0 / M_eval
    j = np.arange(int(np.floor(2.0 / c)) + 1)
    vals = np.unique(np.concatenate([-1.0 + j * c, 1.0 - j * c]))
    vals = vals[(vals >= -1.0 - 1e-12) & (vals <= 1.0 + 1e-12)]
    nv = vals.size
    tol = 1e-12
    feas = np.abs(vals[:, None] - vals[None, :]) <= c + tol

    circle = mu.space == CIRCLE
    best = -np.inf
    starts = range(nv) if circle else [None]
    for s0 in starts:
        if circle:
            dp = np.full(nv, -np.inf)
            dp[s0] = w[0] * vals[s0]
        else:
            dp = w[0] * vals
        for k in range(1, M):
            prev = np.where(feas, dp[None, :], -np.inf).max(axis=1)
            dp = prev + w[k] * vals
        if circle and M > 1:
            dp = np.where(feas[:, s0], dp, -np.inf)
        best = max(best, dp.max())
    return float(best)


def bl_upper_bound(mu: HybridMeasure, nu: HybridMeasure) -> float:
    """Cheap certified upper bound on bl_distance, used to prune sup scans.

    Always bounded by the total variation; when both measures carry the same
    number of atoms with identical weight vectors, index-pairing gives the
    tighter bound  sum_j w_j min(2, d(x_j, y_j)) plus the density TV.
    """
    if mu.space != nu.space:
        raise ValueError("measures live on different spaces")
    tv = tv_distance(mu, nu)
    if mu.atom_weights.size and mu.atom_weights.size == nu.atom_weights.size \
            and np.array_equal(mu.atom_weights, nu.atom_weights):
        d = space_distance(mu.space, mu.atom_positions, nu.atom_positions)
        paired = float(np.sum(np.abs(mu.atom_weights) * np.minimum(2.0, d)))
        L = int(np.lcm(mu.M, nu.M))
        dens_tv = float(np.abs(np.repeat(mu.density, L // mu.M)
                               - np.repeat(nu.density, L // nu.M)).mean())
        return min(tv, paired + dens_tv)
    return tv
