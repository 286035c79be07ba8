# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled episode kernel; same arithmetic order as ``_kernel_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline double _dot(const double[:, ::1] M, Py_ssize_t i, double[::1] v,
                        Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t j
    for j in range(lo, hi):
        acc = acc + M[i, j] * v[j]
    return acc


cdef inline double _dot3(const double[:, :, ::1] M, Py_ssize_t t, Py_ssize_t i, double[::1] v,
                         Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t j
    for j in range(lo, hi):
        acc = acc + M[t, i, j] * v[j]
    return acc


def simulate_kernel(x0, xP0, xE0, noise, A, BP, BE, Gw, FP, FE, JP, YP, SP, JE, YE, SE,
                    HP, sGP, KP, HE, sGE, KE, int n1, int corrected, int full_obs):
    cdef const double[:, ::1] x0v = np.ascontiguousarray(x0, dtype=np.float64)
    cdef const double[:, ::1] xP0v = np.ascontiguousarray(xP0, dtype=np.float64)
    cdef const double[:, ::1] xE0v = np.ascontiguousarray(xE0, dtype=np.float64)
    cdef const double[:, :, ::1] nz = np.ascontiguousarray(noise, dtype=np.float64)
    cdef const double[:, :, ::1] Av = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[:, :, ::1] BPv = np.ascontiguousarray(BP, dtype=np.float64)
    cdef const double[:, :, ::1] BEv = np.ascontiguousarray(BE, dtype=np.float64)
    cdef const double[:, :, ::1] Gwv = np.ascontiguousarray(Gw, dtype=np.float64)
    cdef const double[:, :, ::1] FPv = np.ascontiguousarray(FP, dtype=np.float64)
    cdef const double[:, :, ::1] FEv = np.ascontiguousarray(FE, dtype=np.float64)
    cdef const double[:, :, ::1] JPv = np.ascontiguousarray(JP, dtype=np.float64)
    cdef const double[:, :, ::1] YPv = np.ascontiguousarray(YP, dtype=np.float64)
    cdef const double[:, :, ::1] SPv = np.ascontiguousarray(SP, dtype=np.float64)
    cdef const double[:, :, ::1] JEv = np.ascontiguousarray(JE, dtype=np.float64)
    cdef const double[:, :, ::1] YEv = np.ascontiguousarray(YE, dtype=np.float64)
    cdef const double[:, :, ::1] SEv = np.ascontiguousarray(SE, dtype=np.float64)
    cdef const double[:, :, ::1] HPv = np.ascontiguousarray(HP, dtype=np.float64)
    cdef const double[:, :, ::1] HEv = np.ascontiguousarray(HE, dtype=np.float64)
    cdef const double[:, :, ::1] KPv = np.ascontiguousarray(KP, dtype=np.float64)
    cdef const double[:, :, ::1] KEv = np.ascontiguousarray(KE, dtype=np.float64)
    cdef const double[:, ::1] sGPv = np.ascontiguousarray(sGP, dtype=np.float64)
    cdef const double[:, ::1] sGEv = np.ascontiguousarray(sGE, dtype=np.float64)

    cdef Py_ssize_t N = x0v.shape[0], n = x0v.shape[1]
    cdef Py_ssize_t T = Av.shape[0], d = Gwv.shape[2]
    cdef Py_ssize_t p = HPv.shape[1], q = HEv.shape[1]
    cdef Py_ssize_t m = FPv.shape[1], k = FEv.shape[1]
    cdef Py_ssize_t rP = YPv.shape[1], rE = YEv.shape[1]

    X_ = np.zeros((N, T + 1, n))
    XP_ = np.zeros((N, T + 1, n1))
    XE_ = np.zeros((N, T + 1, n1))
    UP_ = np.zeros((N, T, m))
    UE_ = np.zeros((N, T, k))
    ZP_ = np.zeros((N, T, p))
    ZE_ = np.zeros((N, T, q))
    cdef double[:, :, ::1] X = X_, XP = XP_, XE = XE_
    cdef double[:, :, ::1] UPo = UP_, UEo = UE_, ZPo = ZP_, ZEo = ZE_

    cdef double[::1] x = np.zeros(n), xn = np.zeros(n), xp = np.zeros(n1), xe = np.zeros(n1)
    cdef double[::1] yP = np.zeros(n), yE = np.zeros(n)
    cdef double[::1] uP = np.zeros(m), uE = np.zeros(k), resE = np.zeros(k), resP = np.zeros(m)
    cdef double[::1] sigP = np.zeros(rP), sigE = np.zeros(rE)
    cdef double[::1] xpp = np.zeros(n1), xep = np.zeros(n1)
    cdef double[::1] mP = np.zeros(n1), mE = np.zeros(n1)
    cdef double[::1] drive = np.zeros(n), w = np.zeros(d), vP = np.zeros(p), vE = np.zeros(q)
    cdef double[::1] zP = np.zeros(p), zE = np.zeros(q), innP = np.zeros(p), innE = np.zeros(q)
    cdef double[::1] xpp_n = np.zeros(n), xep_n = np.zeros(n), pubdrift = np.zeros(n1)

    cdef Py_ssize_t e, t, i, j, a
    cdef double acc, acc2

    with nogil:
        for e in range(N):
            for i in range(n):
                x[i] = x0v[e, i]
                X[e, 0, i] = x[i]
            for i in range(n1):
                xp[i] = xP0v[e, i]
                xe[i] = xE0v[e, i]
                XP[e, 0, i] = xp[i]
                XE[e, 0, i] = xe[i]
            for t in range(T):
                for i in range(n):
                    if i < n1:
                        yP[i] = xp[i]
                        yE[i] = xe[i]
                    else:
                        yP[i] = x[i]
                        yE[i] = x[i]
                for i in range(m):
                    uP[i] = _dot3(FPv, t, i, yP, 0, n)
                for i in range(k):
                    uE[i] = _dot3(FEv, t, i, yE, 0, n)
                if corrected:
                    for i in range(k):
                        resE[i] = uE[i] - _dot3(FEv, t, i, x, n1, n)
                    for i in range(m):
                        resP[i] = uP[i] - _dot3(FPv, t, i, x, n1, n)
                    for i in range(rP):
                        sigP[i] = _dot3(SPv, t, i, resE, 0, k) - _dot3(YPv, t, i, xp, 0, n1)
                    for i in range(rE):
                        sigE[i] = _dot3(SEv, t, i, resP, 0, m) - _dot3(YEv, t, i, xe, 0, n1)
                    for i in range(n1):
                        xpp[i] = xp[i] + _dot3(JPv, t, i, sigP, 0, rP)
                        xep[i] = xe[i] + _dot3(JEv, t, i, sigE, 0, rE)
                else:
                    for i in range(n1):
                        xpp[i] = xp[i]
                        xep[i] = xe[i]
                for j in range(d):
                    w[j] = nz[e, t, j]
                for j in range(p):
                    vP[j] = nz[e, t, d + j]
                for j in range(q):
                    vE[j] = nz[e, t, d + p + j]
                for i in range(n):
                    drive[i] = _dot3(BPv, t, i, uP, 0, m) + _dot3(BEv, t, i, uE, 0, k)
                for i in range(n):
                    xn[i] = _dot3(Av, t, i, x, 0, n) + drive[i] + _dot3(Gwv, t, i, w, 0, d)
                for a in range(p):
                    zP[a] = _dot3(HPv, t, a, xn, 0, n1) + _dot(sGPv, a, vP, 0, p)
                for a in range(q):
                    zE[a] = _dot3(HEv, t, a, xn, 0, n1) + _dot(sGEv, a, vE, 0, q)
                for i in range(n1):
                    pubdrift[i] = _dot3(Av, t, i, x, n1, n)
                if full_obs:
                    for i in range(n1):
                        xp[i] = xn[i]
                        xe[i] = xn[i]
                else:
                    for i in range(n1):
                        xpp_n[i] = xpp[i]
                        xep_n[i] = xep[i]
                    for i in range(n1):
                        mP[i] = _dot3(Av, t, i, xpp_n, 0, n1) + pubdrift[i] + drive[i]
                        mE[i] = _dot3(Av, t, i, xep_n, 0, n1) + pubdrift[i] + drive[i]
                    for a in range(p):
                        innP[a] = zP[a] - _dot3(HPv, t, a, mP, 0, n1)
                    for a in range(q):
                        innE[a] = zE[a] - _dot3(HEv, t, a, mE, 0, n1)
                    for i in range(n1):
                        xp[i] = mP[i] + _dot3(KPv, t, i, innP, 0, p)
                        xe[i] = mE[i] + _dot3(KEv, t, i, innE, 0, q)
                for i in range(n):
                    x[i] = xn[i]
                    X[e, t + 1, i] = x[i]
                for i in range(n1):
                    XP[e, t + 1, i] = xp[i]
                    XE[e, t + 1, i] = xe[i]
                for i in range(m):
                    UPo[e, t, i] = uP[i]
                for i in range(k):
                    UEo[e, t, i] = uE[i]
                for a in range(p):
                    ZPo[e, t, a] = zP[a]
                for a in range(q):
                    ZEo[e, t, a] = zE[a]
    return X_, XP_, XE_, UP_, UE_, ZP_, ZE_
