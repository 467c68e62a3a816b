"""Built-in network families: sparse ring, binary tree, and dense-plus-tree.

Each preset bundles the coupling/adaptation functions, the finite-size weight
matrices, the limiting graph measure (as a fiber function evaluated at
partition representatives), and a monokinetic initial phase profile. Sizes
of the tree and dense families are restricted to full binary trees,
N = 2^(levels+1) - 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .digraph import DigraphMeasure, Partition, VertexSpace
from .discretize import MonokineticProfile, dgm_from_fiber_fn
from .measure_kit import CIRCLE, INTERVAL, HybridMeasure
from .model import FourierFunction, ModelSpec, OmegaSpec

LOG_5_4 = float(np.log(1.25))


def reference_time(epsilon: float) -> float:
    """Common reference horizon (1/eps) log(5/4): the positivity horizon of
    the dense preset with floor 1/4 and unit fiber mass."""
    return LOG_5_4 / epsilon


def tree_sizes(max_levels: int = 9) -> list:
    return [2 ** (k + 1) - 1 for k in range(1, max_levels + 1)]


def _check_tree_size(N: int) -> None:
    if N < 3 or (N + 1) & N != 0:
        raise ValueError(
            f"invalid size N={N}: full binary trees need N = 2^(levels+1) - 1, "
            f"e.g. {tree_sizes()}"
        )


def _tree_targets(i: int, N: int) -> np.ndarray:
    """1-based neighbor indices of node i in the binary tree (children, parent)."""
    out = [j for j in (2 * i, 2 * i + 1) if j <= N]
    if i // 2 >= 1:
        out.append(i // 2)
    return np.asarray(out, dtype=np.int64)


def _tree_singular_atoms(x: float):
    """Atoms of the limiting tree graph fiber at vertex x.

    The borderline vertex x = 1/2 uses the parent-only branch, matching the
    finite tree's case split (nodes past the midpoint have no children).
    """
    if x == 0.0:
        return np.array([0.0]), np.array([2.0])
    if x < 0.5:
        return np.array([2.0 * x, 0.5 * x]), np.array([2.0, 1.0])
    return np.array([0.5 * x]), np.array([1.0])


@dataclass(frozen=True)
class Preset:
    name: str
    space: VertexSpace
    g: FourierFunction
    h: FourierFunction
    default_omega: OmegaSpec
    beta: float                  # certified a.c. density floor of eta_0
    restricted_sizes: bool       # sizes limited to 2^(levels+1)-1
    ac_cells_per_cell: int = 0   # sampling fineness of a.c. fiber densities

    def model(self, epsilon: float, omega: OmegaSpec | None = None) -> ModelSpec:
        return ModelSpec(epsilon, self.g, self.h, omega or self.default_omega)

    def check_size(self, N: int) -> None:
        if self.restricted_sizes:
            _check_tree_size(N)
        elif N < 3:
            raise ValueError("need at least 3 oscillators")

    def weight_matrix(self, N: int) -> np.ndarray:
        raise NotImplementedError

    def eta0_fiber(self, x: float, density_cells: int = 1) -> HybridMeasure:
        raise NotImplementedError

    def limit_dgm(self, partition: Partition, density_cells: int | None = None) -> DigraphMeasure:
        if density_cells is None:
            density_cells = max(1, self.ac_cells_per_cell * partition.m)
        return dgm_from_fiber_fn(lambda x: self.eta0_fiber(x, density_cells), partition)

    def finite_dgm(self, N: int) -> DigraphMeasure:
        """The graph measure encoding the size-N weight matrix."""
        raise NotImplementedError

    def nu0_profile(self) -> MonokineticProfile:
        return MonokineticProfile(lambda x: x)

    def partition(self, m: int) -> Partition:
        """Uniform cells; representatives sit at declared discontinuities of
        the limiting fiber map (the tree families are discontinuous at the
        root vertex x = 0), else at cell centers."""
        part = Partition.uniform(m, self.space)
        if 0.0 in self.fiber_discontinuities():
            reps = part.representatives.copy()
            reps[0] = 0.0
            part = Partition(self.space, part.edges, reps)
        return part

    def fiber_discontinuities(self) -> tuple:
        return ()


class RingPreset(Preset):
    """Nearest-neighbor ring: g = sin 2 pi u, h = -1, weights N on the two neighbors."""

    def __init__(self):
        super().__init__(
            name="ring",
            space=VertexSpace(CIRCLE),
            g=FourierFunction.sin(),
            h=FourierFunction.constant(-1.0),
            default_omega=OmegaSpec.cosine(1.0, 0.25),
            beta=0.0,
            restricted_sizes=False,
        )

    def weight_matrix(self, N: int) -> np.ndarray:
        self.check_size(N)
        j = np.arange(N)
        diff = np.mod(j[None, :] - j[:, None], N)
        return float(N) * np.isin(diff, (1, N - 1)).astype(float)

    def eta0_fiber(self, x: float, density_cells: int = 1) -> HybridMeasure:
        return HybridMeasure.dirac(x % 1.0, 2.0, CIRCLE)

    def finite_dgm(self, N: int) -> DigraphMeasure:
        part = self.partition(N)
        W = self.weight_matrix(N)
        centers = (2 * np.arange(N) + 1.0) / (2 * N)
        fibers = []
        for i in range(N):
            nz = np.flatnonzero(W[i])
            fibers.append(HybridMeasure.atomic(centers[nz], W[i, nz] / N, CIRCLE))
        return DigraphMeasure(part, tuple(fibers))


class TreePreset(Preset):
    """Full binary tree: g = sin 2 pi u, h = -sin^2 2 pi u (no positive part)."""

    def __init__(self):
        super().__init__(
            name="tree",
            space=VertexSpace(INTERVAL),
            g=FourierFunction.sin(),
            h=FourierFunction.neg_sin_squared(),
            default_omega=OmegaSpec.affine(0.5, 0.5),
            beta=0.0,
            restricted_sizes=True,
        )

    def weight_matrix(self, N: int) -> np.ndarray:
        self.check_size(N)
        W = np.zeros((N, N))
        for i in range(1, N + 1):
            W[i - 1, _tree_targets(i, N) - 1] = float(N)
        return W

    def eta0_fiber(self, x: float, density_cells: int = 1) -> HybridMeasure:
        pos, w = _tree_singular_atoms(x)
        return HybridMeasure(INTERVAL, pos, w, np.zeros(1))

    def fiber_discontinuities(self) -> tuple:
        return (0.0, 0.5)

    def finite_dgm(self, N: int) -> DigraphMeasure:
        part = self.partition(N)
        W = self.weight_matrix(N)
        centers = (2 * np.arange(N) + 1.0) / (2 * N)
        fibers = []
        for i in range(N):
            nz = np.flatnonzero(W[i])
            fibers.append(HybridMeasure.atomic(centers[nz], W[i, nz] / N, INTERVAL))
        return DigraphMeasure(part, tuple(fibers))


class DensePreset(Preset):
    """Tree singular part plus the dense block family 2^{-(i+j)/N}.

    g = h = sin 2 pi u, so positivity of the evolving graph is only
    guaranteed up to the horizon set by the density floor 1/4.
    """

    def __init__(self):
        super().__init__(
            name="dense",
            space=VertexSpace(INTERVAL),
            g=FourierFunction.sin(),
            h=FourierFunction.sin(),
            default_omega=OmegaSpec.affine(0.5, 0.5),
            beta=0.25,
            restricted_sizes=True,
            ac_cells_per_cell=8,
        )

    def weight_matrix(self, N: int) -> np.ndarray:
        self.check_size(N)
        i = np.arange(1, N + 1)
        Wa = np.power(2.0, -(i[:, None] + i[None, :]) / N)
        tree = TreePreset()
        return Wa + tree.weight_matrix(N)

    def eta0_fiber(self, x: float, density_cells: int = 1) -> HybridMeasure:
        pos, w = _tree_singular_atoms(x)
        centers = (np.arange(density_cells) + 0.5) / density_cells
        dens = np.power(2.0, -(x + centers))
        return HybridMeasure(INTERVAL, pos, w, dens)

    def fiber_discontinuities(self) -> tuple:
        return (0.0, 0.5)

    def finite_dgm(self, N: int) -> DigraphMeasure:
        part = self.partition(N)
        tree = TreePreset()
        Ws = tree.weight_matrix(N)
        centers = (2 * np.arange(N) + 1.0) / (2 * N)
        i = np.arange(1, N + 1)
        Wa = np.power(2.0, -(i[:, None] + i[None, :]) / N)
        fibers = []
        for k in range(N):
            nz = np.flatnonzero(Ws[k])
            fibers.append(HybridMeasure(INTERVAL, centers[nz], Ws[k, nz] / N, Wa[k]))
        return DigraphMeasure(part, tuple(fibers))


PRESETS = {
    "ring": RingPreset(),
    "tree": TreePreset(),
    "dense": DensePreset(),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown example {name!r}; choose from {sorted(PRESETS)}")


def initial_phases(N: int, profile: MonokineticProfile | None = None,
                   mode: str = "quantile", seed: int = 0) -> np.ndarray:
    """Per-node initial phases: profile values at cell centers, or seeded uniform."""
    if mode == "random":
        rng = np.random.default_rng(seed)
        return rng.uniform(0.0, 1.0, N)
    if mode != "quantile":
        raise ValueError("phase_init must be quantile|random")
    centers = (2 * np.arange(N) + 1.0) / (2 * N)
    prof = profile or MonokineticProfile(lambda x: x)
    return prof.positions(centers)
