"""Pure-numpy kernels (fallback backend).

Each function here has a jitted twin in ``_kernels_numba`` with identical
semantics. Trigonometric coupling sums are factored through per-cell Fourier
moments so that one right-hand-side evaluation costs O(A*m*K) instead of
O(A^2) for A tracked atoms, m cells and K harmonics.
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


def harmonics(phases, kmax):
    """sin/cos tables of shape (kmax, len(phases)) for k = 1..kmax."""
    n = phases.shape[0]
    s = np.empty((kmax, n))
    c = np.empty((kmax, n))
    if kmax == 0:
        return s, c
    ang = TWO_PI * phases
    s[0] = np.sin(ang)
    c[0] = np.cos(ang)
    for k in range(1, kmax):
        # angle addition from the previous harmonic
        s[k] = s[k - 1] * c[0] + c[k - 1] * s[0]
        c[k] = c[k - 1] * c[0] - s[k - 1] * s[0]
    return s, c


def coupled_rhs(phases, W, omega_t, gc0, ga, gb, hc0, ha, hb, eps):
    """RHS of the N-oscillator system with co-evolving N x N weights.

    dphi_i = omega_i + (1/N) sum_j W_ij g(phi_j - phi_i)
    dW_ij  = -eps (W_ij + h(phi_j - phi_i))
    """
    N = phases.shape[0]
    kg = ga.shape[0]
    kh = ha.shape[0]
    kmax = max(kg, kh)
    s, c = harmonics(phases, kmax)

    dphi = omega_t + (gc0 / N) * W.sum(axis=1)
    for k in range(kg):
        ws = W @ s[k]
        wc = W @ c[k]
        dphi += (c[k] * (ga[k] * ws + gb[k] * wc) + s[k] * (gb[k] * ws - ga[k] * wc)) / N

    dW = W + hc0
    for k in range(kh):
        # h(phi_j - phi_i) = sum_k a_k (s_j c_i - c_j s_i) + b_k (c_j c_i + s_j s_i)
        dW = dW + np.outer(c[k], ha[k] * s[k] + hb[k] * c[k]) \
                + np.outer(s[k], hb[k] * s[k] - ha[k] * c[k])
    dW *= -eps
    return dphi, dW


def cell_moments(positions, weights, cells, m, kmax):
    """Per-cell mass and Fourier moments of a weighted atom cloud.

    Returns (mass, S, C) with S[k-1, p] = sum_{atoms in cell p} w sin(2 pi k x).
    """
    mass = np.bincount(cells, weights=weights, minlength=m)
    S = np.empty((kmax, m))
    C = np.empty((kmax, m))
    s, c = harmonics(positions, kmax)
    for k in range(kmax):
        S[k] = np.bincount(cells, weights=weights * s[k], minlength=m)
        C[k] = np.bincount(cells, weights=weights * c[k], minlength=m)
    return mass, S, C


def fold_moments(mass, S, C, c0, a, b):
    """Fold function coefficients into moments: G(p, phi) = base_p + cos_k(phi) P[k,p] + sin_k(phi) Q[k,p]."""
    kf = a.shape[0]
    base = c0 * mass
    P = a[:, None] * S[:kf] + b[:, None] * C[:kf] if kf else np.zeros((0, mass.shape[0]))
    Q = b[:, None] * S[:kf] - a[:, None] * C[:kf] if kf else np.zeros((0, mass.shape[0]))
    return base, P, Q


def eval_folded(base, P, Q, phases):
    """Evaluate folded moments at target phases: result[u, p] = G(p, phases[u])."""
    kf = P.shape[0]
    s, c = harmonics(phases, kf)
    out = np.broadcast_to(base, (phases.shape[0], base.shape[0])).copy()
    if kf:
        out += c.T @ P + s.T @ Q
    return out


def fibered_rhs(phases, cells, D, mu_cells, omega_cells, decay,
                sing_ptr, sing_q, sing_w,
                gbase, gP, gQ, hbase, hP, hQ, eps):
    """RHS of the cell-structured system driven by per-cell moments.

    phases : (A,) tracked atom phases, cells : (A,) owning cell index
    D      : (A, m) absolutely continuous weight density per source cell
    decay  : exp(-eps*t) multiplying the (closed-form) singular weights
    sing_* : CSR-per-cell singular atoms of the initial graph measure
             (sing_q target cell, sing_w weight)
    """
    A = phases.shape[0]
    G = eval_folded(gbase, gP, gQ, phases)            # (A, m)
    H = eval_folded(hbase, hP, hQ, phases)            # (A, m)

    dphi = omega_cells[cells] + np.einsum("up,p,up->u", D, mu_cells, G)
    # singular part: per tracked atom, sum over its cell's initial atoms
    for i in range(sing_ptr.shape[0] - 1):
        lo, hi = sing_ptr[i], sing_ptr[i + 1]
        if lo == hi:
            continue
        sel = cells == i
        if not np.any(sel):
            continue
        contrib = G[sel][:, sing_q[lo:hi]] @ sing_w[lo:hi]
        dphi[sel] += decay * contrib

    dD = -eps * (D + H)
    return dphi, dD
