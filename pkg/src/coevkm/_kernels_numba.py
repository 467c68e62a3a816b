"""Numba-jitted kernels (default backend). Semantics match ``_kernels_numpy``."""

from __future__ import annotations

import numpy as np
from numba import njit

TWO_PI = 2.0 * np.pi


@njit(cache=True)
def harmonics(phases, kmax):
    n = phases.shape[0]
    s = np.empty((kmax, n))
    c = np.empty((kmax, n))
    if kmax == 0:
        return s, c
    for i in range(n):
        ang = TWO_PI * phases[i]
        s[0, i] = np.sin(ang)
        c[0, i] = np.cos(ang)
    for k in range(1, kmax):
        for i in range(n):
            s[k, i] = s[k - 1, i] * c[0, i] + c[k - 1, i] * s[0, i]
            c[k, i] = c[k - 1, i] * c[0, i] - s[k - 1, i] * s[0, i]
    return s, c


@njit(cache=True)
def coupled_rhs(phases, W, omega_t, gc0, ga, gb, hc0, ha, hb, eps):
    N = phases.shape[0]
    kg = ga.shape[0]
    kh = ha.shape[0]
    kmax = max(kg, kh)
    s, c = harmonics(phases, kmax)

    dphi = np.empty(N)
    rowsum = np.empty(N)
    for i in range(N):
        acc = 0.0
        for j in range(N):
            acc += W[i, j]
        rowsum[i] = acc
    for i in range(N):
        dphi[i] = omega_t[i] + gc0 * rowsum[i] / N
    for k in range(kg):
        ws = np.dot(W, s[k])
        wc = np.dot(W, c[k])
        for i in range(N):
            dphi[i] += (c[k, i] * (ga[k] * ws[i] + gb[k] * wc[i])
                        + s[k, i] * (gb[k] * ws[i] - ga[k] * wc[i])) / N

    dW = np.empty((N, N))
    if kh == 0:
        for i in range(N):
            for j in range(N):
                dW[i, j] = -eps * (W[i, j] + hc0)
    else:
        for i in range(N):
            for j in range(N):
                hij = hc0
                for k in range(kh):
                    hij += ha[k] * (s[k, j] * c[k, i] - c[k, j] * s[k, i]) \
                         + hb[k] * (c[k, j] * c[k, i] + s[k, j] * s[k, i])
                dW[i, j] = -eps * (W[i, j] + hij)
    return dphi, dW


@njit(cache=True)
def cell_moments(positions, weights, cells, m, kmax):
    A = positions.shape[0]
    mass = np.zeros(m)
    S = np.zeros((kmax, m))
    C = np.zeros((kmax, m))
    s, c = harmonics(positions, kmax)
    for u in range(A):
        p = cells[u]
        w = weights[u]
        mass[p] += w
        for k in range(kmax):
            S[k, p] += w * s[k, u]
            C[k, p] += w * c[k, u]
    return mass, S, C


@njit(cache=True)
def fibered_rhs(phases, cells, D, mu_cells, omega_cells, decay,
                sing_ptr, sing_q, sing_w,
                gbase, gP, gQ, hbase, hP, hQ, eps):
    A = phases.shape[0]
    m = mu_cells.shape[0]
    kg = gP.shape[0]
    kh = hP.shape[0]
    kmax = max(kg, kh)
    s, c = harmonics(phases, kmax)

    dphi = np.empty(A)
    dD = np.empty((A, m))
    for u in range(A):
        i = cells[u]
        acc = omega_cells[i]
        for p in range(m):
            g_up = gbase[p]
            for k in range(kg):
                g_up += c[k, u] * gP[k, p] + s[k, u] * gQ[k, p]
            acc += D[u, p] * mu_cells[p] * g_up
            h_up = hbase[p]
            for k in range(kh):
                h_up += c[k, u] * hP[k, p] + s[k, u] * hQ[k, p]
            dD[u, p] = -eps * (D[u, p] + h_up)
        for ell in range(sing_ptr[i], sing_ptr[i + 1]):
            q = sing_q[ell]
            g_uq = gbase[q]
            for k in range(kg):
                g_uq += c[k, u] * gP[k, q] + s[k, u] * gQ[k, q]
            acc += decay * sing_w[ell] * g_uq
        dphi[u] = acc
    return dphi, dD
