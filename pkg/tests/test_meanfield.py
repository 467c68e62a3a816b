import numpy as np
import pytest

from coevkm import (
    CIRCLE,
    DigraphMeasure,
    FourierFunction,
    HybridMeasure,
    LatticeState,
    MeasurePath,
    ModelSpec,
    OmegaSpec,
    Partition,
    VertexSpace,
    ac_lower_bound,
    bl_distance,
    characteristic_flow,
    discretize_eta,
    discretize_nu,
    empirical_path,
    integrate_lattice,
    pushforward,
    reconstruct_eta,
    solve_vlasov_fixed_point,
    solve_vlasov_pde,
    stability_constants,
    sup_tv_distance,
    symmetry_defect,
    tv_distance,
    weights_from_dgm,
)
from coevkm.discretize import FiberedMeasure
from coevkm.meanfield import path_residual
from coevkm.presets import get_preset

from conftest import circ_err

T_STAR = float(np.log(1.25))


def _zero_dgm(part):
    space = part.space.kind
    zero = HybridMeasure(space, density=np.zeros(1))
    return DigraphMeasure(part, tuple(zero for _ in range(part.m)))


def _ring_setup(m, n, density_cells=1):
    preset = get_preset("ring")
    part = preset.partition(m)
    nu0 = discretize_nu(preset.nu0_profile(), part, n)
    eta0 = preset.limit_dgm(part, density_cells)
    return preset, part, nu0, eta0


# ---------------------------------------------------------------------------
# characteristic flow
# ---------------------------------------------------------------------------

def test_flow_pure_drift_without_graph():
    # zero initial graph measure and h = 0: phases drift at omega
    part = Partition.uniform(4, VertexSpace(CIRCLE))
    model = ModelSpec(1.0, FourierFunction.sin(), FourierFunction.constant(0.0),
                      OmegaSpec.constant(0.8))
    nu = MeasurePath.constant(
        FiberedMeasure(part, tuple(
            HybridMeasure.dirac(x) for x in part.representatives)),
        np.arange(0, 0.2001, 1e-3))
    phi0 = part.representatives[:, None]
    flow = characteristic_flow(phi0, _zero_dgm(part), nu, model, T=0.2, dt=1e-3)
    expect = np.mod(phi0[None, :, :] + 0.8 * flow.times[:, None, None], 1.0)
    assert circ_err(flow.phases, expect) < 1e-12


def test_flow_synchronized_state_self_consistent():
    # driving path delta_{c + omega0 t} and an atom started at c: with
    # g(0) = 0 the coupling never acts and the atom rides the rotation
    preset, part, _, eta0 = _ring_setup(4, 1)
    omega0, c = 0.7, 0.35
    model = ModelSpec(1.0, preset.g, preset.h, OmegaSpec.constant(omega0))
    times = np.arange(0, 0.3001, 1e-3)
    pos = np.mod(c + omega0 * times, 1.0)[:, None, None] * np.ones((1, 4, 1))
    nu = MeasurePath(part, times, pos, np.ones(4))
    flow = characteristic_flow(np.full((4, 1), c), eta0, nu, model, T=0.3, dt=1e-3)
    expect = np.mod(c + omega0 * flow.times, 1.0)[:, None, None]
    assert circ_err(flow.phases, expect * np.ones((1, 4, 1))) < 1e-12


def test_flow_requires_matching_partition():
    preset, part, nu0, eta0 = _ring_setup(4, 2)
    other = Partition.uniform(8, VertexSpace(CIRCLE))
    nu = MeasurePath.constant(nu0, np.arange(0, 0.1001, 1e-2))
    with pytest.raises(ValueError):
        characteristic_flow(np.zeros((8, 1)), get_preset("ring").limit_dgm(other),
                            nu, preset.model(1.0), T=0.1, dt=1e-2)


def test_flow_rejects_short_driving_path():
    preset, part, nu0, eta0 = _ring_setup(4, 2)
    nu = MeasurePath.constant(nu0, np.arange(0, 0.05001, 1e-2))
    with pytest.raises(ValueError):
        characteristic_flow(np.zeros((4, 1)), eta0, nu, preset.model(1.0),
                            T=0.2, dt=1e-2)


# ---------------------------------------------------------------------------
# graph-measure reconstruction
# ---------------------------------------------------------------------------

def test_reconstruct_at_time_zero():
    preset, part, nu0, eta0 = _ring_setup(6, 2)
    model = preset.model(1.0)
    nu = MeasurePath.constant(nu0, np.arange(0, 0.1001, 1e-2))
    phi = nu.positions.copy()
    path = reconstruct_eta(eta0, nu, phi, model)
    assert sup_tv_distance(path.at(0), eta0) == pytest.approx(0.0, abs=1e-15)


def test_reconstruct_pure_decay_when_h_zero():
    preset, part, nu0, eta0 = _ring_setup(6, 2)
    model = ModelSpec(1.0, preset.g, FourierFunction.constant(0.0), preset.default_omega)
    nu = MeasurePath.constant(nu0, np.arange(0, 0.2001, 1e-2))
    path = reconstruct_eta(eta0, nu, nu.positions.copy(), model)
    k = 13
    decay = np.exp(-model.epsilon * path.times[k])
    assert sup_tv_distance(path.at(k), eta0.scaled(decay)) <= 1e-14


def test_ring_reconstruction_closed_form():
    # with h = -1 and unit fiber masses:
    # eta_t = exp(-eps t) eta_0 + (1 - exp(-eps t)) uniform
    preset, part, nu0, eta0 = _ring_setup(8, 4)
    model = preset.model(1.0)
    res = solve_vlasov_fixed_point(nu0, eta0, model, T_STAR, 1e-3)
    path = reconstruct_eta(eta0, res.path, res.flow.phases, model)
    for t in (0.1, T_STAR):
        k = res.path.index_of_time(round(t / 1e-3) * 1e-3)
        decay = float(np.exp(-path.times[k]))
        closed = DigraphMeasure(part, tuple(
            f.scaled(decay) + HybridMeasure.uniform(1 - decay, CIRCLE, M=1)
            for f in eta0.fibers))
        assert sup_tv_distance(path.at(k), closed) <= 1e-6


def test_flow_auxiliary_matches_reconstruction():
    # two independent computations of the same graph path agree to O(dt^2)/step
    preset, part, nu0, eta0 = _ring_setup(6, 3)
    model = preset.model(1.0)
    T, dt = 0.2, 2e-3
    nu = MeasurePath.constant(nu0, dt * np.arange(round(T / dt) + 1))
    flow = characteristic_flow(
        np.stack([f.atom_positions for f in nu0.fibers]), eta0, nu, model,
        T=T, dt=dt)
    rec = reconstruct_eta(eta0, nu, flow.phases, model)
    err = np.abs(flow.eta.densities - rec.densities).max()
    assert err <= 10 * dt * dt * round(T / dt)


# ---------------------------------------------------------------------------
# pushforward
# ---------------------------------------------------------------------------

def test_pushforward_identity_and_rotation():
    fiber = HybridMeasure.atomic([0.1, 0.5, 0.9], [0.2, 0.3, 0.5], CIRCLE)
    same = pushforward(fiber, fiber.atom_positions)
    assert tv_distance(same, fiber) == 0.0
    rotated = pushforward(fiber, fiber.atom_positions + 0.25)
    assert rotated.total_mass() == pytest.approx(fiber.total_mass())
    assert np.allclose(np.sort(rotated.atom_positions),
                       np.sort(np.mod(fiber.atom_positions + 0.25, 1.0)))


def test_pushforward_errors():
    fiber = HybridMeasure.atomic([0.1, 0.5], [0.5, 0.5], CIRCLE)
    with pytest.raises(ValueError):
        pushforward(fiber, [0.1])
    dens = HybridMeasure.uniform(1.0)
    with pytest.raises(ValueError):
        pushforward(dens, [0.1])


# ---------------------------------------------------------------------------
# fixed point
# ---------------------------------------------------------------------------

def test_fixed_point_reached_immediately_without_coupling():
    # zero graph measure: the first sweep already lands on the rigid rotation
    part = Partition.uniform(3, VertexSpace(CIRCLE))
    model = ModelSpec(1.0, FourierFunction.sin(), FourierFunction.constant(0.0),
                      OmegaSpec.constant(0.5))
    nu0 = FiberedMeasure(part, tuple(
        HybridMeasure.dirac(x) for x in part.representatives))
    res = solve_vlasov_fixed_point(nu0, _zero_dgm(part), model, 0.2, 1e-3,
                                   tol=1e-10, max_iter=5)
    assert res.converged
    assert res.iterations <= 2
    expect = np.mod(res.path.positions[0][None] + 0.5 * res.path.times[:, None, None], 1.0)
    assert circ_err(res.path.positions, expect) < 1e-12


def test_fixed_point_synchronized_rest_state():
    # all mass at one phase, g(0) = 0, omega = 0: frozen path, one sweep
    preset, part, _, eta0 = _ring_setup(4, 1)
    model = ModelSpec(1.0, preset.g, preset.h, OmegaSpec.constant(0.0))
    nu0 = FiberedMeasure(part, tuple(HybridMeasure.dirac(0.4) for _ in range(4)))
    res = solve_vlasov_fixed_point(nu0, eta0, model, 0.2, 1e-3, tol=1e-12)
    assert res.converged and res.iterations == 1
    assert circ_err(res.path.positions, 0.4 * np.ones_like(res.path.positions)) == 0.0


def test_picard_residuals_decrease_geometrically():
    preset, part, nu0, eta0 = _ring_setup(16, 16)
    model = preset.model(1.0)
    res = solve_vlasov_fixed_point(nu0, eta0, model, 0.5 * T_STAR, 1e-3,
                                   tol=1e-4, max_iter=25)
    assert res.converged
    r = res.residuals
    assert all(b < a for a, b in zip(r[:-1], r[1:]))


def test_picard_mass_conservation_all_iterates():
    preset, part, nu0, eta0 = _ring_setup(8, 8)
    model = preset.model(1.0)
    res = solve_vlasov_fixed_point(nu0, eta0, model, 0.3 * T_STAR, 1e-3)
    masses0 = nu0.masses()
    for k in (0, len(res.path.times) // 2, -1):
        for i in range(part.m):
            assert abs(res.path.fiber(k, i).total_mass() - masses0[i]) <= 1e-10


def test_fixed_point_horizon_guard():
    preset = get_preset("dense")
    part = preset.partition(4)
    nu0 = discretize_nu(preset.nu0_profile(), part, 2)
    eta0 = preset.limit_dgm(part)
    model = preset.model(1.0)
    with pytest.raises(ValueError):
        solve_vlasov_fixed_point(nu0, eta0, model, 2.0 * T_STAR, 1e-3)


def test_non_convergence_flag():
    preset, part, nu0, eta0 = _ring_setup(8, 4)
    model = preset.model(1.0)
    res = solve_vlasov_fixed_point(nu0, eta0, model, 0.5 * T_STAR, 1e-3,
                                   tol=1e-12, max_iter=2)
    assert not res.converged
    assert res.iterations == 2
    assert len(res.residuals) == 2


# ---------------------------------------------------------------------------
# semiflow stability, positivity, symmetry, consistency
# ---------------------------------------------------------------------------

def test_semiflow_perturbation_bound():
    preset, part, nu0, eta0 = _ring_setup(8, 4)
    model = preset.model(1.0)
    t_probe = 0.1
    res = solve_vlasov_fixed_point(nu0, eta0, model, 0.2, 1e-3)
    sc = stability_constants(model, eta0.norm(), float(nu0.masses().max()), 0.2)
    bound = np.exp(sc.L2 * t_probe)
    k = res.path.index_of_time(t_probe)
    phi0 = np.stack([f.atom_positions for f in nu0.fibers])
    base = characteristic_flow(phi0, eta0, res.path, model, T=0.2, dt=1e-3,
                               store_eta=False)
    rng = np.random.default_rng(11)
    delta = 1e-3
    for _ in range(20):
        pert = rng.uniform(-delta, delta, phi0.shape)
        flowed = characteristic_flow(phi0 + pert, eta0, res.path, model,
                                     T=0.2, dt=1e-3, store_eta=False)
        amp = circ_err(flowed.phases[k], base.phases[k]) / np.abs(pert).max()
        assert amp <= bound


def test_positivity_horizon_dense():
    preset = get_preset("dense")
    m = n = 8
    part = preset.partition(m)
    nu0 = discretize_nu(preset.nu0_profile(), part, n)
    eta0 = preset.limit_dgm(part)
    assert ac_lower_bound(eta0) >= 0.25
    model = preset.model(1.0)
    res = solve_vlasov_fixed_point(nu0, eta0, model, T_STAR, 1e-3)
    assert res.flow.min_ac_density >= -1e-8
    assert res.flow.eta.min_density() >= -1e-8


def test_symmetry_preserved_under_symmetric_adaptation():
    # h(u) = cos 2 pi u is structurally symmetric; eta_0 with symmetric blocks
    m, n = 6, 4
    part = Partition.uniform(m, VertexSpace(CIRCLE))
    c = part.representatives
    S = 1.0 + 0.5 * np.cos(2 * np.pi * (c[:, None] + c[None, :]))
    eta0 = DigraphMeasure(part, tuple(
        HybridMeasure(CIRCLE, density=np.repeat(S[i], 1)) for i in range(m)))
    assert symmetry_defect(eta0) <= 1e-14
    model = ModelSpec(1.0, FourierFunction.sin(), FourierFunction.cos(),
                      OmegaSpec.constant(1.0))
    beta = float(S.min())
    from coevkm import positivity_horizon
    horizon = positivity_horizon(beta, 1.0, model.h, model.epsilon)
    T = 0.9 * horizon
    dt = 1e-3
    prof = FiberedMeasure(part, tuple(
        HybridMeasure.dirac(x) for x in part.representatives))
    nu0 = discretize_nu(prof, part, n)
    res = solve_vlasov_fixed_point(nu0, eta0, model, T, dt)
    path = reconstruct_eta(eta0, res.path, res.flow.phases, model)
    defects = [symmetry_defect(path.at(k)) for k in
               range(0, len(path.times), len(path.times) // 8)]
    assert max(defects) <= 1e-6


def test_lattice_path_is_fixed_point_of_flow():
    # pushing the initial atoms through the flow driven by the lattice's own
    # empirical path reproduces the lattice phases
    preset, part, nu0, eta0 = _ring_setup(8, 8)
    model = preset.model(1.0)
    T, dt = T_STAR, 1e-3
    eta_disc = discretize_eta(eta0, part, 8, 0.0)
    wts = weights_from_dgm(eta_disc, part)
    pos0 = np.stack([f.atom_positions for f in nu0.fibers])
    state = LatticeState(part, nu0.masses(), pos0, wts)
    traj = integrate_lattice(state, model,
                             lambda t: model.omega.eval(t, part.representatives),
                             T, dt)
    path = empirical_path(traj)
    flow = characteristic_flow(pos0, eta_disc, path, model, T=T, dt=dt,
                               store_eta=False)
    assert circ_err(traj.phases, flow.phases) <= 1e-5


# ---------------------------------------------------------------------------
# density transport
# ---------------------------------------------------------------------------

def test_pde_uniform_density_is_stationary_for_odd_coupling():
    preset = get_preset("ring")
    m, Mphi = 4, 64
    part = preset.partition(m)
    eta0 = preset.limit_dgm(part)
    model = ModelSpec(1.0, preset.g, preset.h, OmegaSpec.constant(1.0))
    rho0 = np.ones((m, Mphi))
    field = solve_vlasov_pde(rho0, eta0, model, 0.1, 1e-3)
    assert np.abs(field.rho - 1.0).max() <= 1e-12


def test_pde_mass_conserved_every_step():
    preset = get_preset("ring")
    m, Mphi = 4, 64
    part = preset.partition(m)
    eta0 = preset.limit_dgm(part)
    model = ModelSpec(1.0, preset.g, preset.h, OmegaSpec.constant(1.0))
    phi = (np.arange(Mphi) + 0.5) / Mphi
    rho0 = np.tile(1.0 + 0.5 * np.sin(2 * np.pi * phi), (m, 1))
    field = solve_vlasov_pde(rho0, eta0, model, 0.1, 1e-3)
    masses = field.rho.mean(axis=2)
    assert np.abs(np.diff(masses, axis=0)).max() <= 1e-12


def test_pde_cfl_guard():
    preset = get_preset("ring")
    part = preset.partition(2)
    eta0 = preset.limit_dgm(part)
    model = ModelSpec(1.0, preset.g, preset.h, OmegaSpec.constant(5.0))
    with pytest.raises(ValueError, match="CFL"):
        solve_vlasov_pde(np.ones((2, 16)), eta0, model, 0.1, 5e-2)


def test_pde_requires_constant_adaptation():
    preset = get_preset("tree")
    part = preset.partition(2)
    eta0 = get_preset("ring").limit_dgm(Partition.uniform(2, VertexSpace(CIRCLE)))
    model = ModelSpec(1.0, preset.g, preset.h, OmegaSpec.constant(1.0))
    with pytest.raises(ValueError, match="constant"):
        solve_vlasov_pde(np.ones((2, 16)), eta0, model, 0.1, 1e-3)


def test_pde_agrees_with_particles_under_refinement():
    # cross-method check at the reference time: the distance between the
    # density solution and the particle fixed point shrinks when the phase
    # grid is halved and the atom count doubled
    preset = get_preset("ring")
    m = 4
    part = preset.partition(m)
    eta0 = preset.limit_dgm(part)
    model = ModelSpec(1.0, preset.g, preset.h, OmegaSpec.constant(1.0))
    T = T_STAR
    dists = []
    for Mphi, n in ((32, 8), (64, 16), (128, 32)):
        phi = (np.arange(Mphi) + 0.5) / Mphi
        rho_row = 1.0 + 0.5 * np.sin(2 * np.pi * phi)
        field = solve_vlasov_pde(np.tile(rho_row, (m, 1)), eta0, model, T,
                                 T / (8 * Mphi))
        nu0 = discretize_nu(
            FiberedMeasure(part, tuple(
                HybridMeasure.from_density(rho_row) for _ in range(m))),
            part, n)
        res = solve_vlasov_fixed_point(nu0, eta0, model, T, 1e-3, tol=1e-5)
        d = bl_distance(field.fiber(-1, 0), res.path.fiber(-1, 0), 2048)
        dists.append(d)
    assert dists[1] < dists[0]
    assert dists[2] < dists[1]


# ---------------------------------------------------------------------------
# measure path utilities
# ---------------------------------------------------------------------------

def test_path_residual_zero_for_identical():
    preset, part, nu0, eta0 = _ring_setup(4, 2)
    nu = MeasurePath.constant(nu0, np.arange(0, 0.1001, 1e-2))
    assert path_residual(nu, nu) == 0.0


def test_positions_interpolation_shortest_arc():
    part = Partition.uniform(1, VertexSpace(CIRCLE))
    times = np.array([0.0, 1.0])
    pos = np.array([[[0.95]], [[0.05]]])
    path = MeasurePath(part, times, pos, np.ones(1))
    mid = path.positions_at(0.5)
    assert mid[0, 0] == pytest.approx(0.0, abs=1e-12)


def test_flow_rejects_signed_graph_measure():
    preset, part, nu0, _ = _ring_setup(4, 2)
    bad = DigraphMeasure(part, tuple(
        HybridMeasure.dirac(x, -1.0, CIRCLE) for x in part.representatives))
    nu = MeasurePath.constant(nu0, np.arange(0, 0.1001, 1e-2))
    with pytest.raises(ValueError, match="positive"):
        characteristic_flow(np.zeros((4, 1)), bad, nu, preset.model(1.0),
                            T=0.1, dt=1e-2)


def test_measure_path_rejects_negative_masses():
    part = Partition.uniform(2, VertexSpace(CIRCLE))
    with pytest.raises(ValueError, match="nonnegative"):
        MeasurePath(part, np.array([0.0, 0.1]), np.zeros((2, 2, 1)),
                    np.array([1.0, -0.5]))


def test_pde_density_stays_nonnegative():
    preset = get_preset("ring")
    m, Mphi = 4, 64
    eta0 = preset.limit_dgm(preset.partition(m))
    model = ModelSpec(1.0, preset.g, preset.h, OmegaSpec.constant(1.0))
    phi = (np.arange(Mphi) + 0.5) / Mphi
    rho0 = np.tile(1.0 + 0.999 * np.sin(2 * np.pi * phi), (m, 1))
    field = solve_vlasov_pde(rho0, eta0, model, T_STAR, T_STAR / (8 * Mphi))
    assert field.rho.min() >= 0.0
