"""Pure-numpy episode kernel, vectorized over episodes.

Every matrix-vector product is accumulated term by term in a fixed order so
that an episode's result does not depend on how many episodes share the
batch, and so that it matches the compiled kernel.
"""

from __future__ import annotations

import numpy as np


def _mv(M, v, cols=None):
    """``M @ v`` per row of ``v`` (shape (N, c)), summing columns left to right."""
    rows, c = M.shape
    if cols is None:
        cols = range(c)
    N = v.shape[0]
    out = np.zeros((N, rows))
    for i in range(rows):
        acc = np.zeros(N)
        for j in cols:
            acc = acc + M[i, j] * v[:, j]
        out[:, i] = acc
    return out


def simulate_kernel(x0, xP0, xE0, noise, A, BP, BE, Gw, FP, FE, JP, YP, SP, JE, YE, SE,
                    HP, sGP, KP, HE, sGE, KE, n1, corrected, full_obs):
    """Advance ``N`` episodes through ``T`` steps.

    Parameters
    ----------
    x0, xP0, xE0 : ndarray
        Initial true state ``(N, n)`` and estimates ``(N, n1)``.
    noise : ndarray, shape (N, T, d + p + q)
        Standard normal draws: process, then P signal, then E signal.
    A, BP, BE, Gw, FP, FE : ndarray
        Per-step dynamics, noise loading ``Gamma sqrt(W)`` and gains.
    JP, YP, SP, JE, YE, SE : ndarray
        Per-step correction gains, signal matrices and action-to-signal maps.
    HP, sGP, KP, HE, sGE, KE : ndarray
        Observation matrices and Kalman gains at arrival times ``1..T``
        (stored at index ``t - 1``) and signal-noise square roots.
    corrected, full_obs : int
        Filter switches.

    Returns
    -------
    X, XP, XE, UP, UE, ZP, ZE : ndarray
    """
    N, n = x0.shape
    T = A.shape[0]
    d = Gw.shape[2]
    p = HP.shape[1]
    q = HE.shape[1]
    m = FP.shape[1]
    k = FE.shape[1]
    X = np.zeros((N, T + 1, n))
    XP = np.zeros((N, T + 1, n1))
    XE = np.zeros((N, T + 1, n1))
    UP = np.zeros((N, T, m))
    UE = np.zeros((N, T, k))
    ZP = np.zeros((N, T, p))
    ZE = np.zeros((N, T, q))
    x = x0.astype(float).copy()
    xp = xP0.astype(float).copy()
    xe = xE0.astype(float).copy()
    hid = range(n1)
    pub = range(n1, n)
    X[:, 0], XP[:, 0], XE[:, 0] = x, xp, xe
    for t in range(T):
        yP = np.concatenate([xp, x[:, n1:]], axis=1)
        yE = np.concatenate([xe, x[:, n1:]], axis=1)
        uP = _mv(FP[t], yP)
        uE = _mv(FE[t], yE)
        if corrected:
            rE = uE - _mv(FE[t], x, pub)
            rP = uP - _mv(FP[t], x, pub)
            xpp = xp + _mv(JP[t], _mv(SP[t], rE) - _mv(YP[t], xp))
            xep = xe + _mv(JE[t], _mv(SE[t], rP) - _mv(YE[t], xe))
        else:
            xpp, xep = xp, xe
        w = noise[:, t, :d]
        vP = noise[:, t, d:d + p]
        vE = noise[:, t, d + p:d + p + q]
        drive = _mv(BP[t], uP) + _mv(BE[t], uE)
        xn = _mv(A[t], x) + drive + _mv(Gw[t], w)
        zP = _mv(HP[t], xn, hid) + _mv(sGP, vP)
        zE = _mv(HE[t], xn, hid) + _mv(sGE, vE)
        pubdrift = _mv(A[t][:n1], x, pub)
        if full_obs:
            xp = xn[:, :n1].copy()
            xe = xn[:, :n1].copy()
        else:
            A11 = A[t][:n1]
            mP = _mv(A11, xpp, hid) + pubdrift + drive[:, :n1]
            mE = _mv(A11, xep, hid) + pubdrift + drive[:, :n1]
            xp = mP + _mv(KP[t], zP - _mv(HP[t], mP))
            xe = mE + _mv(KE[t], zE - _mv(HE[t], mE))
        x = xn
        X[:, t + 1], XP[:, t + 1], XE[:, t + 1] = x, xp, xe
        UP[:, t], UE[:, t], ZP[:, t], ZE[:, t] = uP, uE, zP, zE
    return X, XP, XE, UP, UE, ZP, ZE
