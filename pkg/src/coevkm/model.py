"""Model specification: adaptation rate, coupling/adaptation functions, rates.

Coupling and adaptation functions are finite Fourier series on the circle,
which makes the sup-norm and Lipschitz bounds needed by the stability
constants exact and auditable. The structural symmetry check h(1-u) = h(u)
reduces to "no sine terms".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi
HPLUS_SAMPLES = 4096


@dataclass(frozen=True)
class FourierFunction:
    """f(u) = c0 + sum_k a_k sin(2 pi k u) + b_k cos(2 pi k u), 1-periodic."""

    c0: float = 0.0
    k: tuple = ()
    a: tuple = ()
    b: tuple = ()

    def __post_init__(self):
        k = tuple(int(v) for v in self.k)
        a = tuple(float(v) for v in self.a)
        b = tuple(float(v) for v in self.b)
        if not (len(k) == len(a) == len(b)):
            raise ValueError("k, a, b must have equal length")
        if any(v < 1 for v in k):
            raise ValueError("harmonics must be positive integers")
        if len(set(k)) != len(k):
            raise ValueError("duplicate harmonic")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, value: float) -> "FourierFunction":
        return cls(c0=value)

    @classmethod
    def sin(cls, k: int = 1, amplitude: float = 1.0) -> "FourierFunction":
        return cls(k=(k,), a=(amplitude,), b=(0.0,))

    @classmethod
    def cos(cls, k: int = 1, amplitude: float = 1.0) -> "FourierFunction":
        return cls(k=(k,), a=(0.0,), b=(amplitude,))

    @classmethod
    def neg_sin_squared(cls) -> "FourierFunction":
        """-sin^2(2 pi u) written as -1/2 + (1/2) cos(4 pi u)."""
        return cls(c0=-0.5, k=(2,), a=(0.0,), b=(0.5,))

    # -- evaluation -----------------------------------------------------------
    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        out = np.full_like(u, self.c0, dtype=float)
        for kk, aa, bb in zip(self.k, self.a, self.b):
            ang = TWO_PI * kk * u
            out = out + aa * np.sin(ang) + bb * np.cos(ang)
        return out if out.ndim else float(out)

    # -- exact coefficient bounds ---------------------------------------------
    def sup_norm_bound(self) -> float:
        return abs(self.c0) + sum(abs(a) + abs(b) for a, b in zip(self.a, self.b))

    def lip_bound(self) -> float:
        return TWO_PI * sum(k * (abs(a) + abs(b)) for k, a, b in zip(self.k, self.a, self.b))

    def bl_bound(self) -> float:
        return self.sup_norm_bound() + self.lip_bound()

    def positive_part_sup(self, samples: int = HPLUS_SAMPLES) -> float:
        """||max(f, 0)||_inf by dense sampling (exact for the built-in choices)."""
        u = np.arange(samples) / samples
        return float(np.maximum(self(u), 0.0).max())

    def is_symmetric(self) -> bool:
        """Structural check of f(1-u) = f(u): no sine terms."""
        return all(a == 0.0 for a in self.a)

    def dense_coeffs(self):
        """(c0, a, b) with a/b dense over k = 1..kmax, for the kernels."""
        kmax = max(self.k, default=0)
        a = np.zeros(kmax)
        b = np.zeros(kmax)
        for kk, aa, bb in zip(self.k, self.a, self.b):
            a[kk - 1] = aa
            b[kk - 1] = bb
        return float(self.c0), a, b


class OmegaSpec:
    """Natural-frequency field omega(t, x), bounded on compact time intervals."""

    def __init__(self, kind, **kw):
        self.kind = kind
        self._kw = kw

    @classmethod
    def constant(cls, value: float) -> "OmegaSpec":
        return cls("constant", value=float(value))

    @classmethod
    def affine(cls, a: float, b: float) -> "OmegaSpec":
        """omega(t, x) = a + b x (continuous on the interval)."""
        return cls("affine", a=float(a), b=float(b))

    @classmethod
    def cosine(cls, a: float, b: float) -> "OmegaSpec":
        """omega(t, x) = a + b cos(2 pi x) (continuous on the circle)."""
        return cls("cosine", a=float(a), b=float(b))

    @classmethod
    def separable(cls, time_fn, space_fn) -> "OmegaSpec":
        """omega(t, x) = time_fn(t) * space_fn(x)."""
        return cls("separable", time_fn=time_fn, space_fn=space_fn)

    @classmethod
    def tabulated(cls, times, values) -> "OmegaSpec":
        """Cellwise rates on a time grid; linear interpolation in t.

        values has shape (len(times), m); column i belongs to cell i of the
        partition the table was built for.
        """
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.shape[0] != times.size:
            raise ValueError("one row of values per time node required")
        return cls("tabulated", times=times, values=values)

    def eval(self, t, x):
        """omega(t, x) for scalar t and array x (cell representatives)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self._kw["value"])
        if self.kind == "affine":
            return self._kw["a"] + self._kw["b"] * x
        if self.kind == "cosine":
            return self._kw["a"] + self._kw["b"] * np.cos(TWO_PI * x)
        if self.kind == "separable":
            return float(self._kw["time_fn"](t)) * np.asarray(self._kw["space_fn"](x), dtype=float)
        times, values = self._kw["times"], self._kw["values"]
        if values.shape[1] != x.size:
            raise ValueError("tabulated omega has a different cell count")
        row = np.empty(values.shape[1])
        for j in range(values.shape[1]):
            row[j] = np.interp(t, times, values[:, j])
        return row

    def sup_norm(self, T: float, t_samples: int = 257, x_samples: int = 257) -> float:
        """sup over [0,T] x X of |omega|, by sampling for the generic kinds."""
        if self.kind == "constant":
            return abs(self._kw["value"])
        if self.kind == "affine":
            a, b = self._kw["a"], self._kw["b"]
            return max(abs(a), abs(a + b))
        if self.kind == "cosine":
            a, b = self._kw["a"], self._kw["b"]
            return max(abs(a + b), abs(a - b))
        if self.kind == "tabulated":
            return float(np.abs(self._kw["values"]).max())
        ts = np.linspace(0.0, T, t_samples)
        xs = np.linspace(0.0, 1.0, x_samples)
        return float(max(np.abs(self.eval(t, xs)).max() for t in ts))


@dataclass(frozen=True)
class ModelSpec:
    """Adaptation rate epsilon, coupling g, adaptation rule h, rates omega."""

    epsilon: float
    g: FourierFunction
    h: FourierFunction
    omega: OmegaSpec = field(default_factory=lambda: OmegaSpec.constant(0.0))

    def __post_init__(self):
        if not (self.epsilon > 0 and np.isfinite(self.epsilon)):
            raise ValueError("epsilon must be positive and finite")


def positivity_horizon(beta: float, gamma: float, h: FourierFunction,
                       epsilon: float) -> float:
    """Guaranteed positivity window (1/eps) log(1 + beta / (gamma ||h+||_inf)).

    Infinite when the adaptation rule has no positive part.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    hplus = h.positive_part_sup()
    if hplus == 0.0:
        return np.inf
    return float(np.log1p(beta / (gamma * hplus)) / epsilon)


def gamma_bound(beta: float, T: float, h: FourierFunction,
                epsilon: float) -> float:
    """Largest fiber-mass bound keeping graph measures positive up to time T."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if T <= 0:
        raise ValueError("T must be positive")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    hplus = h.positive_part_sup()
    if hplus == 0.0:
        return np.inf
    return float(beta / (hplus * np.expm1(epsilon * T)))


@dataclass(frozen=True)
class StabilityConstants:
    L1: float
    L2: float
    L3: float
    L4: float
    C1: float
    C2: float
    K1: float
    K2: float
    K3: float
    K4: float
    K5: float


def stability_constants(model: ModelSpec, eta0_norm: float, nu_bound: float,
                        T: float) -> StabilityConstants:
    """Lipschitz/stability constants of the characteristic semiflow.

    ``eta0_norm`` is the worst-fiber total variation of the initial graph
    measure, ``nu_bound`` the uniform fiber-mass bound of the driving measure
    path, ``T`` the time horizon.
    """
    for name, v in (("eta0_norm", eta0_norm), ("nu_bound", nu_bound), ("T", T)):
        if not np.isfinite(v) or v < 0:
            raise ValueError(f"{name} must be finite and nonnegative")
    eps = model.epsilon
    gsup, glip = model.g.sup_norm_bound(), model.g.lip_bound()
    hsup, hlip = model.h.sup_norm_bound(), model.h.lip_bound()
    gbl, hbl = gsup + glip, hsup + hlip
    nu, eta = nu_bound, eta0_norm

    omega_sup = model.omega.sup_norm(T)
    L1 = omega_sup + gsup * nu * eta + (0.5 * T * T + 1.0) * eps * gsup * hsup * nu * nu

    C1 = glip * nu * (eta + hsup * nu)
    if C1 > 0:
        C2 = eps * gsup * hlip * nu * nu / C1
    elif eps * gsup * hlip * nu * nu == 0.0:
        C2 = 0.0
    else:
        raise ValueError("phase-Lipschitz constant undefined: C1 = 0 with Lip(h) > 0")
    L2 = C1 + C2

    L3 = gbl * (hsup * nu + eta) + gsup * hbl * nu * eps * T
    L4 = nu * (glip * (eta + hsup * nu) + gsup * hlip * nu * eps * T)

    K1 = T * nu
    K2 = glip * nu
    K3 = L3
    K4 = L4
    K5 = K3 + max(K2, K4)
    return StabilityConstants(L1, L2, L3, L4, C1, C2, K1, K2, K3, K4, K5)
