"""Fused pointwise kernels for the right-hand side.

These evaluate, point by point, the same formulas as the array versions in
:mod:`nematicflow.landau_de_gennes` and :mod:`nematicflow.tensor_algebra`; the
test suite checks them against those versions. All inputs are flattened to
(ncomp, npoints) float64 arrays.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _mat(q, out):
    out[0, 0] = q[0]
    out[0, 1] = q[1]
    out[0, 2] = q[2]
    out[1, 0] = q[1]
    out[1, 1] = q[3]
    out[1, 2] = q[4]
    out[2, 0] = q[2]
    out[2, 1] = q[4]
    out[2, 2] = -q[0] - q[3]


@njit(cache=True)
def bulk_field(Q, a, b, c, out):
    """out = -aQ + b(Q^2 - tr(Q^2) I/3) - c tr(Q^2) Q in 5-component storage."""
    n = Q.shape[1]
    m = np.empty((3, 3))
    for p in range(n):
        q = Q[:, p]
        _mat(q, m)
        tr2 = 0.0
        for i in range(3):
            for j in range(3):
                tr2 += m[i, j] * m[i, j]
        s = -a - c * tr2
        # Q^2 entries needed for the five stored components
        q2_00 = m[0, 0] * m[0, 0] + m[0, 1] * m[1, 0] + m[0, 2] * m[2, 0]
        q2_01 = m[0, 0] * m[0, 1] + m[0, 1] * m[1, 1] + m[0, 2] * m[2, 1]
        q2_02 = m[0, 0] * m[0, 2] + m[0, 1] * m[1, 2] + m[0, 2] * m[2, 2]
        q2_11 = m[1, 0] * m[0, 1] + m[1, 1] * m[1, 1] + m[1, 2] * m[2, 1]
        q2_12 = m[1, 0] * m[0, 2] + m[1, 1] * m[1, 2] + m[1, 2] * m[2, 2]
        third = tr2 / 3.0
        out[0, p] = s * q[0] + b * (q2_00 - third)
        out[1, p] = s * q[1] + b * q2_01
        out[2, p] = s * q[2] + b * q2_02
        out[3, p] = s * q[3] + b * (q2_11 - third)
        out[4, p] = s * q[4] + b * q2_12


@njit(cache=True)
def nonlinear_terms(u, w, Q, dq, H, B, L1, L2, L3, L4, force, stress, qnl):
    """Grid values of the momentum force, the total stress and the Q-transport.

    force  = u x w - (d_g Q) : B
    stress = sigma^d + Q H - H Q           (row-major 3x3)
    qnl    = Omega Q - Q Omega - u . grad Q  (5 components)
    """
    n = Q.shape[1]
    m = np.empty((3, 3))
    h = np.empty((3, 3))
    bm = np.empty((3, 3))
    G = np.empty((3, 3, 3))
    om = np.empty((3, 3))
    s = np.empty((3, 3))
    div = np.empty(3)
    for p in range(n):
        _mat(Q[:, p], m)
        _mat(H[:, p], h)
        _mat(B[:, p], bm)
        for g in range(3):
            G[0, 0, g] = dq[0, g, p]
            G[0, 1, g] = dq[1, g, p]
            G[0, 2, g] = dq[2, g, p]
            G[1, 0, g] = dq[1, g, p]
            G[1, 1, g] = dq[3, g, p]
            G[1, 2, g] = dq[4, g, p]
            G[2, 0, g] = dq[2, g, p]
            G[2, 1, g] = dq[4, g, p]
            G[2, 2, g] = -dq[0, g, p] - dq[3, g, p]
        u0, u1, u2 = u[0, p], u[1, p], u[2, p]
        w0, w1, w2 = w[0, p], w[1, p], w[2, p]

        # force
        f0 = u1 * w2 - u2 * w1
        f1 = u2 * w0 - u0 * w2
        f2 = u0 * w1 - u1 * w0
        for g in range(3):
            acc = 0.0
            for i in range(3):
                for j in range(3):
                    acc += G[i, j, g] * bm[i, j]
            if g == 0:
                f0 -= acc
            elif g == 1:
                f1 -= acc
            else:
                f2 -= acc
        force[0, p] = f0
        force[1, p] = f1
        force[2, p] = f2

        # distortion stress
        for k in range(3):
            div[k] = G[k, 0, 0] + G[k, 1, 1] + G[k, 2, 2]
        for i in range(3):
            for j in range(3):
                t1 = 0.0
                t3 = 0.0
                for k in range(3):
                    for l in range(3):
                        t1 += G[k, l, i] * G[k, l, j]
                        t3 += G[k, j, l] * G[k, l, i]
                t2 = div[0] * G[0, j, i] + div[1] * G[1, j, i] + div[2] * G[2, j, i]
                s[i, j] = L1 * t1 + L2 * t2 + L3 * t3
        if L4 != 0.0:
            for i in range(3):
                # P[mm, k] = Q_ml Q_kl,i
                p01 = 0.0
                p02 = 0.0
                p10 = 0.0
                p12 = 0.0
                p20 = 0.0
                p21 = 0.0
                for l in range(3):
                    p01 += m[0, l] * G[1, l, i]
                    p02 += m[0, l] * G[2, l, i]
                    p10 += m[1, l] * G[0, l, i]
                    p12 += m[1, l] * G[2, l, i]
                    p20 += m[2, l] * G[0, l, i]
                    p21 += m[2, l] * G[1, l, i]
                s[i, 0] += 0.5 * L4 * (p12 - p21)
                s[i, 1] += 0.5 * L4 * (p20 - p02)
                s[i, 2] += 0.5 * L4 * (p01 - p10)
        for i in range(3):
            for j in range(3):
                qh = m[i, 0] * h[0, j] + m[i, 1] * h[1, j] + m[i, 2] * h[2, j]
                hq = h[i, 0] * m[0, j] + h[i, 1] * m[1, j] + h[i, 2] * m[2, j]
                stress[3 * i + j, p] = -s[i, j] + qh - hq

        # Q transport
        om[0, 0] = 0.0
        om[1, 1] = 0.0
        om[2, 2] = 0.0
        om[0, 1] = -0.5 * w2
        om[1, 0] = 0.5 * w2
        om[0, 2] = 0.5 * w1
        om[2, 0] = -0.5 * w1
        om[1, 2] = -0.5 * w0
        om[2, 1] = 0.5 * w0
        for i in range(3):
            for j in range(3):
                s[i, j] = 0.0
                for k in range(3):
                    s[i, j] += om[i, k] * m[k, j] - m[i, k] * om[k, j]
        tr3 = (s[0, 0] + s[1, 1] + s[2, 2]) / 3.0
        for c in range(5):
            adv = u0 * dq[c, 0, p] + u1 * dq[c, 1, p] + u2 * dq[c, 2, p]
            if c == 0:
                r = s[0, 0] - tr3
            elif c == 1:
                r = 0.5 * (s[0, 1] + s[1, 0])
            elif c == 2:
                r = 0.5 * (s[0, 2] + s[2, 0])
            elif c == 3:
                r = s[1, 1] - tr3
            else:
                r = 0.5 * (s[1, 2] + s[2, 1])
            qnl[c, p] = r - adv
