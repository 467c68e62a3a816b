import numpy as np
import pytest

from coevkm import (
    FourierFunction,
    ModelSpec,
    OmegaSpec,
    gamma_bound,
    positivity_horizon,
    stability_constants,
)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def test_eval_sin_quarter():
    assert FourierFunction.sin()(0.25) == pytest.approx(1.0)


def test_eval_neg_sin_squared():
    h = FourierFunction.neg_sin_squared()
    assert h(0.0) == pytest.approx(0.0, abs=1e-15)
    u = np.linspace(0, 1, 101)
    assert np.allclose(h(u), -np.sin(2 * np.pi * u) ** 2, atol=1e-14)


def test_eval_constant():
    h = FourierFunction.constant(-1.0)
    for u in (0.0, 0.31, 0.99):
        assert h(u) == -1.0


def test_fourier_validation():
    with pytest.raises(ValueError):
        FourierFunction(k=(0,), a=(1.0,), b=(0.0,))
    with pytest.raises(ValueError):
        FourierFunction(k=(1, 1), a=(1.0, 1.0), b=(0.0, 0.0))


# ---------------------------------------------------------------------------
# coefficient bounds
# ---------------------------------------------------------------------------

def _random_fourier(rng):
    nk = int(rng.integers(1, 4))
    ks = rng.choice(np.arange(1, 6), nk, replace=False)
    return FourierFunction(
        c0=float(rng.normal()), k=tuple(int(k) for k in ks),
        a=tuple(rng.normal(0, 1, nk)), b=tuple(rng.normal(0, 1, nk)),
    )


def test_sup_norm_bound_by_sampling(rng):
    u = np.arange(10_000) / 10_000
    for _ in range(20):
        f = _random_fourier(rng)
        assert np.abs(f(u)).max() <= f.sup_norm_bound() + 1e-12


def test_lip_bound_by_finite_differences(rng):
    u = np.arange(10_000) / 10_000
    h = 1e-6
    for _ in range(20):
        f = _random_fourier(rng)
        fd = np.abs(f(u + h) - f(u)) / h
        assert fd.max() <= f.lip_bound() + 1e-5


def test_positive_part_sup_builtins():
    assert FourierFunction.sin().positive_part_sup() == pytest.approx(1.0)
    assert FourierFunction.constant(-1.0).positive_part_sup() == 0.0
    assert FourierFunction.neg_sin_squared().positive_part_sup() == 0.0
    assert FourierFunction.cos().positive_part_sup() == pytest.approx(1.0)


def test_symmetry_structural():
    assert FourierFunction.cos().is_symmetric()
    assert FourierFunction.neg_sin_squared().is_symmetric()
    assert FourierFunction.constant(2.0).is_symmetric()
    assert not FourierFunction.sin().is_symmetric()


# ---------------------------------------------------------------------------
# positivity horizon and its inverse
# ---------------------------------------------------------------------------

def test_horizon_quarter_floor():
    T = positivity_horizon(0.25, 1.0, FourierFunction.sin(), 1.0)
    assert T == pytest.approx(np.log(1.25))
    assert T == pytest.approx(0.22314, abs=1e-5)


def test_horizon_infinite_without_positive_part():
    assert positivity_horizon(1.0, 1.0, FourierFunction.constant(-1.0), 1.0) == np.inf
    assert positivity_horizon(0.0, 2.0, FourierFunction.constant(-1.0), 1.0) == np.inf


def test_horizon_zero_floor():
    assert positivity_horizon(0.0, 1.0, FourierFunction.sin(), 1.0) == 0.0


def test_horizon_requires_positive_epsilon():
    with pytest.raises(ValueError):
        positivity_horizon(1.0, 1.0, FourierFunction.sin(), 0.0)


def test_gamma_bound_examples():
    h = FourierFunction.sin()
    T = np.log(1.25)
    assert gamma_bound(0.25, T, h, 1.0) == pytest.approx(1.0)
    assert gamma_bound(0.25, 1.0, FourierFunction.constant(-1.0), 1.0) == np.inf
    assert gamma_bound(0.0, 1.0, h, 1.0) == 0.0
    with pytest.raises(ValueError):
        gamma_bound(0.25, 0.0, h, 1.0)


def test_horizon_gamma_mutual_inverse(rng):
    h = FourierFunction.sin()
    for _ in range(30):
        beta = float(rng.uniform(0.01, 4.0))
        gamma = float(rng.uniform(0.05, 3.0))
        eps = float(rng.uniform(0.2, 3.0))
        T = positivity_horizon(beta, gamma, h, eps)
        back = gamma_bound(beta, T, h, eps)
        assert back == pytest.approx(gamma, rel=1e-12)


def test_horizon_monotonicity():
    h = FourierFunction.sin()
    betas = [0.1, 0.5, 1.0, 2.0]
    Ts = [positivity_horizon(b, 1.0, h, 1.0) for b in betas]
    assert all(a < b for a, b in zip(Ts, Ts[1:]))
    gammas = [0.5, 1.0, 2.0]
    Ts = [positivity_horizon(1.0, g, h, 1.0) for g in gammas]
    assert all(a > b for a, b in zip(Ts, Ts[1:]))
    # larger positive part shrinks the horizon
    small = positivity_horizon(1.0, 1.0, FourierFunction.sin(amplitude=0.5), 1.0)
    large = positivity_horizon(1.0, 1.0, FourierFunction.sin(amplitude=2.0), 1.0)
    assert large < small


# ---------------------------------------------------------------------------
# stability constants
# ---------------------------------------------------------------------------

def test_constants_vanishing_coupling():
    model = ModelSpec(1.0, FourierFunction.constant(0.0),
                      FourierFunction.constant(-1.0), OmegaSpec.constant(0.7))
    sc = stability_constants(model, eta0_norm=2.0, nu_bound=1.0, T=1.0)
    assert sc.L1 == pytest.approx(0.7)
    assert sc.C1 == 0.0
    assert sc.L2 == 0.0


def test_constants_ring_plugin():
    model = ModelSpec(1.0, FourierFunction.sin(), FourierFunction.constant(-1.0),
                      OmegaSpec.constant(1.0))
    sc = stability_constants(model, eta0_norm=2.0, nu_bound=1.0, T=1.0)
    assert sc.C1 == pytest.approx(6 * np.pi)
    assert sc.L2 == pytest.approx(6 * np.pi)


def test_constants_zero_path_bound():
    model = ModelSpec(1.0, FourierFunction.sin(), FourierFunction.constant(-1.0),
                      OmegaSpec.constant(0.3))
    sc = stability_constants(model, eta0_norm=2.0, nu_bound=0.0, T=1.0)
    assert sc.L1 == pytest.approx(0.3)


def test_constants_undefined_phase_lipschitz():
    # zero coupling but Lipschitz adaptation: the phase constant is undefined
    model = ModelSpec(1.0, FourierFunction.constant(1.0), FourierFunction.sin(),
                      OmegaSpec.constant(0.0))
    with pytest.raises(ValueError):
        stability_constants(model, eta0_norm=1.0, nu_bound=1.0, T=1.0)


def test_constants_k_values():
    model = ModelSpec(2.0, FourierFunction.sin(), FourierFunction.sin(),
                      OmegaSpec.constant(0.0))
    T, eta, nu = 0.5, 1.5, 1.2
    sc = stability_constants(model, eta, nu, T)
    gsup, glip = 1.0, 2 * np.pi
    assert sc.K1 == pytest.approx(T * nu)
    assert sc.K2 == pytest.approx(glip * nu)
    K3 = (gsup + glip) * (1.0 * nu + eta) + gsup * (1.0 + 2 * np.pi) * nu * 2.0 * T
    assert sc.K3 == pytest.approx(K3)
    assert sc.K5 == pytest.approx(sc.K3 + max(sc.K2, sc.K4))
    assert all(v >= 0 for v in vars(sc).values())


# ---------------------------------------------------------------------------
# omega field
# ---------------------------------------------------------------------------

def test_omega_kinds():
    xs = np.array([0.0, 0.25, 1.0])
    assert np.allclose(OmegaSpec.constant(2.0).eval(0.3, xs), 2.0)
    assert np.allclose(OmegaSpec.affine(1.0, 2.0).eval(0.0, xs), 1.0 + 2.0 * xs)
    assert np.allclose(OmegaSpec.cosine(1.0, 0.5).eval(0.0, xs),
                       1.0 + 0.5 * np.cos(2 * np.pi * xs))
    sep = OmegaSpec.separable(lambda t: np.exp(-t), lambda x: x)
    assert np.allclose(sep.eval(1.0, xs), np.exp(-1.0) * xs)


def test_omega_tabulated_interpolation():
    tab = OmegaSpec.tabulated([0.0, 1.0], np.array([[0.0, 2.0], [2.0, 4.0]]))
    assert np.allclose(tab.eval(0.5, np.array([0.25, 0.75])), [1.0, 3.0])
    assert tab.sup_norm(1.0) == 4.0


def test_omega_sup_norm():
    assert OmegaSpec.affine(1.0, -3.0).sup_norm(1.0) == pytest.approx(2.0)
    assert OmegaSpec.cosine(1.0, 0.25).sup_norm(1.0) == pytest.approx(1.25)


def test_model_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec(0.0, FourierFunction.sin(), FourierFunction.sin())
